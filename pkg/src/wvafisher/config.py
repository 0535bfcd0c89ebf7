"""Run configuration: a flat JSON document validated before any computation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .errors import ConfigError

MODES = ("report", "sweep_fig1", "sweep_fig2", "series_check", "montecarlo")
POSTSELECTIONS = ("opt", "identity", "explicit")
BASES = ("meter_eigenbasis", "conjugate_basis", "counts_only")
U64_MAX = (1 << 64) - 1


@dataclass
class RunConfig:
    mode: str = "report"
    # system: qubit angles, or an explicit state/observable given as [re, im] pairs
    theta_i: Optional[float] = math.pi / 3
    theta_f: Optional[float] = None
    phi: float = math.pi
    psi_i: Optional[list] = None
    psi_f: Optional[list] = None
    observable: Optional[list] = None
    postselection: str = "opt"
    # meter
    delta: float = 1.0
    n_points: int = 2001
    half_width_sigmas: float = 8.0
    # coupling, either g_delta (=g*Delta) or g
    g_delta: Optional[float] = None
    g: Optional[float] = None
    g_delta_list: Optional[list] = None
    # sweep grids
    theta_points: int = 500
    theta_f_points: int = 20001
    # series check
    precision_digits: int = 40
    # Monte Carlo
    nu: int = 100_000
    replicas: int = 100
    seed: int = 12345
    basis: str = "meter_eigenbasis"
    bracket: Optional[list] = None
    chunk_size: int = 1 << 16
    threads: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @property
    def coupling(self) -> float:
        """g, resolved from whichever of g / g_delta was given."""
        if self.g is not None:
            return float(self.g)
        return float(self.g_delta) / self.delta

    @property
    def g_delta_value(self) -> float:
        return self.coupling * self.delta

    def state_vectors(self):
        """(psi_i, psi_f or None, A) as arrays; psi_f None means derive it."""
        from .quantum import SIGMA_Z, bloch_state
        if self.psi_i is not None:
            psi_i = _cplx(self.psi_i, "psi_i")
            A = np.array([_cplx(r, "observable") for r in self.observable])
            psi_f = _cplx(self.psi_f, "psi_f") if self.psi_f is not None else None
            return psi_i, psi_f, A
        psi_i = bloch_state(self.theta_i, 0.0).amplitudes
        psi_f = None
        if self.postselection == "explicit":
            psi_f = bloch_state(self.theta_f, self.phi).amplitudes
        return psi_i, psi_f, SIGMA_Z


# per-mode defaults applied when the key is absent
_MODE_DEFAULTS = {
    "report": {"g_delta": 0.1},
    "sweep_fig1": {"g_delta": 0.1},
    "sweep_fig2": {"g_delta_list": [0.1, 0.01, 0.001], "postselection": "explicit"},
    "series_check": {"g_delta_list": [0.001, 0.003, 0.01, 0.03], "n_points": 401},
    "montecarlo": {"g": 0.05, "delta": 2.0},
}


def _cplx(pairs, key):
    try:
        return np.array([complex(float(p[0]), float(p[1])) if isinstance(p, (list, tuple))
                         else complex(float(p)) for p in pairs])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"key '{key}': expected a list of numbers or [re, im] pairs") from exc


def _line_of(text: str, key: str) -> Optional[int]:
    needle = json.dumps(key)
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _where(text, key):
    line = _line_of(text, key) if text is not None else None
    return f"line {line}, key '{key}'" if line else f"key '{key}'"


_FIELDS = {f.name: f for f in fields(RunConfig)}
_INT_KEYS = {"n_points", "theta_points", "theta_f_points", "precision_digits", "nu",
             "replicas", "seed", "chunk_size", "threads"}
_FLOAT_KEYS = {"theta_i", "theta_f", "phi", "delta", "half_width_sigmas", "g_delta", "g"}


def parse_config(text: str, mode: Optional[str] = None, overrides: Optional[dict] = None
                 ) -> RunConfig:
    """Parse and validate a JSON document; ``mode`` (from the subcommand) wins."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("line 1: configuration must be a JSON object")
    return build_config(raw, mode, overrides, text)


def build_config(raw: dict, mode: Optional[str] = None, overrides: Optional[dict] = None,
                 text: Optional[str] = None) -> RunConfig:
    raw = dict(raw)
    for key in raw:
        if key not in _FIELDS:
            raise ConfigError(f"{_where(text, key)}: unknown key")
    if mode is not None:
        if "mode" in raw and raw["mode"] != mode:
            raise ConfigError(f"{_where(text, 'mode')}: config says {raw['mode']!r} "
                              f"but the subcommand is {mode!r}")
        raw["mode"] = mode
    m = raw.get("mode", "report")
    if m not in MODES:
        raise ConfigError(f"{_where(text, 'mode')}: must be one of {', '.join(MODES)}")
    for key, val in (overrides or {}).items():
        if val is not None:
            raw[key] = val
    for key, val in _MODE_DEFAULTS[m].items():
        if key in ("g", "g_delta") and ("g" in raw or "g_delta" in raw):
            continue
        raw.setdefault(key, val)
    for key, val in raw.items():
        raw[key] = _coerce(key, val, text)
    cfg = RunConfig(**raw)
    _validate(cfg, text)
    return cfg


def _coerce(key, val, text):
    if val is None:
        return None
    if key in _INT_KEYS:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{_where(text, key)}: expected an integer, got {val!r}")
        return val
    if key in _FLOAT_KEYS:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{_where(text, key)}: expected a number, got {val!r}")
        if not math.isfinite(val):
            raise ConfigError(f"{_where(text, key)}: must be finite")
        return float(val)
    return val


def _validate(c: RunConfig, text) -> None:
    def bad(key, msg):
        raise ConfigError(f"{_where(text, key)}: {msg}")

    if c.postselection not in POSTSELECTIONS:
        bad("postselection", f"must be one of {', '.join(POSTSELECTIONS)}")
    if c.basis not in BASES:
        bad("basis", f"must be one of {', '.join(BASES)}")
    general = c.psi_i is not None
    if general:
        if c.observable is None:
            bad("observable", "required together with psi_i")
        if not isinstance(c.observable, list) or not c.observable:
            bad("observable", "expected a square matrix of [re, im] pairs")
        for key in ("psi_i", "psi_f"):
            v = getattr(c, key)
            if v is not None and (not isinstance(v, list) or len(v) != len(c.observable)):
                bad(key, "length must match the observable dimension")
        if c.postselection == "explicit" and c.psi_f is None:
            bad("psi_f", "required for explicit post-selection")
        if c.mode in ("sweep_fig1", "sweep_fig2"):
            bad("psi_i", "figure sweeps are defined for the qubit parametrization only")
        try:
            psi_i, _, A = c.state_vectors()
            from .quantum import as_observable, as_state
            as_state(psi_i)
            as_observable(A)
        except ConfigError:
            raise
        except ValueError as exc:
            bad("psi_i", str(exc))
    else:
        if c.observable is not None or c.psi_f is not None:
            bad("observable" if c.observable is not None else "psi_f",
                "explicit states require psi_i")
        if c.theta_i is None:
            bad("theta_i", "required")
        if c.postselection == "explicit" and c.theta_f is None and c.mode != "sweep_fig2":
            bad("theta_f", "required for explicit post-selection")
    if c.delta <= 0:
        bad("delta", "must be positive")
    if c.n_points < 3 or c.n_points % 2 == 0:
        bad("n_points", "must be an odd integer >= 3")
    if c.half_width_sigmas <= 0:
        bad("half_width_sigmas", "must be positive")
    if c.g is not None and c.g_delta is not None:
        bad("g", "give either g or g_delta, not both")
    if c.mode in ("report", "sweep_fig1", "montecarlo"):
        if c.g is None and c.g_delta is None:
            bad("g_delta", "required")
        if c.coupling < 0:
            bad("g" if c.g is not None else "g_delta", "must be non-negative")
    if c.mode in ("sweep_fig2", "series_check"):
        gl = c.g_delta_list
        if not isinstance(gl, list) or not gl or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) and x > 0 for x in gl):
            bad("g_delta_list", "expected a non-empty list of positive numbers")
    if c.theta_points < 2:
        bad("theta_points", "must be >= 2")
    if c.theta_f_points < 3:
        bad("theta_f_points", "must be >= 3")
    if not 20 <= c.precision_digits <= 200:
        bad("precision_digits", "must be in [20, 200]")
    if c.nu < 1:
        bad("nu", "must be >= 1")
    if c.mode == "montecarlo" and c.replicas < 30:
        bad("replicas", "at least 30 replicas are required")
    if not 0 <= c.seed <= U64_MAX:
        bad("seed", "must fit in an unsigned 64-bit integer")
    if c.chunk_size < 1:
        bad("chunk_size", "must be >= 1")
    if c.threads < 1:
        bad("threads", "must be >= 1")
    if c.bracket is not None:
        ok = (isinstance(c.bracket, list) and len(c.bracket) == 2
              and all(isinstance(x, (int, float)) for x in c.bracket)
              and 0 <= c.bracket[0] < c.bracket[1])
        if not ok:
            bad("bracket", "expected [lo, hi] with 0 <= lo < hi")
    if c.mode == "montecarlo" and c.coupling <= 0:
        bad("g", "Monte Carlo needs a positive coupling")
