"""Simulated post-selected experiments and maximum-likelihood estimation of g.

Random streams: every chunk of trials draws from its own Philox4x64-10
generator keyed by ``SeedSequence(seed, spawn_key=(replica, chunk))``. The
chunk layout depends only on ``nu`` and ``chunk_size``, so serial and threaded
generation give identical datasets.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import kernels
from .errors import DegenerateError
from .fisher import MeasurementSpec, cell_distribution, measurement_fisher
from .protocol import Protocol
from .quantum import MeterModel, gaussian_meter

GENERATOR_NAME = "numpy.random.Philox (Philox4x64-10)"
STREAM_DERIVATION = "SeedSequence(entropy=seed, spawn_key=(replica, chunk))"
DEFAULT_CHUNK = 1 << 16
LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: Protocol
    g_true: float
    basis: MeasurementSpec = MeasurementSpec.METER_EIGENBASIS

    def __post_init__(self):
        object.__setattr__(self, "basis", MeasurementSpec(self.basis))

    @property
    def g_alias(self) -> float:
        """Coupling at which exp(-i g a m) starts aliasing across the grid."""
        span = self.protocol.a_range * self.protocol.meter.m_max
        return math.pi / span if span > 0 else math.inf

    def snapshot(self) -> dict:
        p = self.protocol
        return {
            "psi_i": _cplx_list(p.psi_i.amplitudes),
            "psi_f": _cplx_list(p.psi_f.amplitudes),
            "observable": [_cplx_list(r) for r in p.observable.matrix],
            "meter": meter_snapshot(p.meter),
            "g_true": self.g_true,
            "basis": self.basis.value,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "ExperimentConfig":
        proto = Protocol.build(_cplx_array(snap["psi_i"]), _cplx_array(snap["psi_f"]),
                               np.array([_cplx_array(r) for r in snap["observable"]]),
                               meter_from_snapshot(snap["meter"]))
        return cls(proto, float(snap["g_true"]), snap["basis"])


def _cplx_list(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def _cplx_array(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs])


def meter_snapshot(meter: MeterModel) -> dict:
    if meter.analytic_moments is not None:
        return {"kind": "gaussian", "delta": meter.delta, "n_points": meter.n_points,
                "half_width_sigmas": meter.m_max / meter.delta}
    return {"kind": "grid", "grid": meter.grid.tolist(),
            "amplitudes": _cplx_list(meter.amplitudes)}


def meter_from_snapshot(snap: dict) -> MeterModel:
    if snap["kind"] == "gaussian":
        return gaussian_meter(snap["delta"], snap["n_points"], snap["half_width_sigmas"])
    return MeterModel.from_wavefunction(snap["grid"], _cplx_array(snap["amplitudes"]))


@dataclass(frozen=True)
class TrialRecord:
    postselected: bool
    outcome_index: Optional[int] = None


@dataclass(frozen=True)
class ExperimentDataset:
    """Trial record of one simulated run.

    ``outcome_index`` is -1 for failed post-selections and for every trial of a
    counts-only measurement.
    """

    config: ExperimentConfig
    postselected: np.ndarray
    outcome_index: np.ndarray
    seed: int
    replica: int = 0
    chunk_size: int = DEFAULT_CHUNK
    generator: str = GENERATOR_NAME

    @property
    def nu(self) -> int:
        return int(self.postselected.size)

    @property
    def n_success(self) -> int:
        return int(np.count_nonzero(self.postselected))

    @property
    def success_fraction(self) -> float:
        return self.n_success / self.nu if self.nu else math.nan

    def cell_counts(self) -> np.ndarray:
        idx = self.outcome_index[self.outcome_index >= 0]
        return np.bincount(idx, minlength=self.config.protocol.meter.n_points).astype(np.int64)

    def records(self) -> Iterator[TrialRecord]:
        for s, k in zip(self.postselected, self.outcome_index):
            yield TrialRecord(bool(s), int(k) if k >= 0 else None)

    def metadata(self) -> dict:
        return {"format": "wvafisher-dataset/1", "seed": self.seed, "replica": self.replica,
                "chunk_size": self.chunk_size, "generator": self.generator,
                "stream_derivation": STREAM_DERIVATION, "nu": self.nu,
                "config": self.config.snapshot()}


def stream(seed: int, replica: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(replica, chunk))
    return np.random.Generator(np.random.Philox(ss))


def _outcome_cdf(config: ExperimentConfig) -> tuple[float, Optional[np.ndarray]]:
    s = config.protocol.sums(config.g_true)
    if config.basis is MeasurementSpec.COUNTS_ONLY or s.p_f <= 0:
        return max(s.p_f, 0.0), None
    P, _ = cell_distribution(config.protocol, config.g_true, config.basis)
    return s.p_f, np.cumsum(P)


def _sample_chunk(config, p_f, cdf, n, seed, replica, chunk):
    rng = stream(seed, replica, chunk)
    ok = rng.random(n) < p_f
    out = np.full(n, -1, dtype=np.int64)
    if cdf is not None:
        k = int(np.count_nonzero(ok))
        u = rng.random(k) * cdf[-1]
        out[ok] = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    return ok, out


def sample_dataset(config: ExperimentConfig, nu: int, seed: int, *, replica: int = 0,
                   chunk_size: int = DEFAULT_CHUNK, threads: int = 1) -> ExperimentDataset:
    """Simulate ``nu`` trials: success with probability p_f(g_true), then a meter cell."""
    if nu < 1:
        raise ValueError("nu must be >= 1")
    p_f, cdf = _outcome_cdf(config)
    sizes = [min(chunk_size, nu - start) for start in range(0, nu, chunk_size)]
    jobs = [(config, p_f, cdf, n, seed, replica, c) for c, n in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda a: _sample_chunk(*a), jobs))
    else:
        parts = [_sample_chunk(*a) for a in jobs]
    ok = np.concatenate([p[0] for p in parts])
    out = np.concatenate([p[1] for p in parts])
    ok.setflags(write=False)
    out.setflags(write=False)
    return ExperimentDataset(config, ok, out, int(seed), replica, chunk_size)


def _loglik_and_score(dataset: ExperimentDataset, g: float, counts=None):
    cfg = dataset.config
    proto = cfg.protocol
    s = proto.sums(g)
    n_ok = dataset.n_success
    n_fail = dataset.nu - n_ok
    ll = 0.0
    score = 0.0
    if n_fail:
        pf = max(s.p_fail, LOG_FLOOR)
        ll += n_fail * math.log(pf)
        score += n_fail * (-s.dp_f) / pf
    if not n_ok:
        return ll, score
    if cfg.basis is MeasurementSpec.COUNTS_ONLY:
        p = max(s.p_f, LOG_FLOOR)
        return ll + n_ok * math.log(p), score + n_ok * s.dp_f / p
    if counts is None:
        counts = dataset.cell_counts()
    if cfg.basis is MeasurementSpec.METER_EIGENBASIS:
        l2, s2 = kernels.loglik_counts(proto._eigvals, proto.row, proto.meter.grid,
                                       proto.meter.weights, float(g), counts, LOG_FLOOR)
    else:
        P, dP = cell_distribution(proto, g, cfg.basis)
        mask = counts > 0
        Pm = np.maximum(P[mask], LOG_FLOOR)
        l2 = float(np.sum(counts[mask] * np.log(Pm)))
        s2 = float(np.sum(counts[mask] * dP[mask] / Pm))
    return ll + l2, score + s2


def log_likelihood(dataset: ExperimentDataset, g: float) -> float:
    """Sum over trials of log P(trial outcome | g), probabilities floored at 1e-300."""
    ll, _ = _loglik_and_score(dataset, g)
    if not math.isfinite(ll):
        raise DegenerateError(f"non-finite log-likelihood at g={g!r} "
                              f"(offending trial {_first_bad_trial(dataset, g)})")
    return ll


def score(dataset: ExperimentDataset, g: float) -> float:
    """d log L / dg from the analytic probability derivatives."""
    return _loglik_and_score(dataset, g)[1]


def _first_bad_trial(dataset, g) -> int:
    s = dataset.config.protocol.sums(g)
    if not math.isfinite(s.p_f) or not math.isfinite(s.p_fail):
        return 0
    if dataset.config.basis is MeasurementSpec.COUNTS_ONLY:
        return -1
    P, _ = cell_distribution(dataset.config.protocol, g, dataset.config.basis)
    bad = ~np.isfinite(P)
    hits = np.flatnonzero(dataset.outcome_index >= 0)
    for t in hits:
        if bad[dataset.outcome_index[t]]:
            return int(t)
    return -1


@dataclass(frozen=True)
class MLEResult:
    g_hat: float
    loglik_at_max: float
    iterations: int
    bracket: tuple[float, float]
    at_boundary: bool = False


_INVPHI = (math.sqrt(5) - 1) / 2


def default_bracket(config: ExperimentConfig, g_guess: Optional[float] = None):
    guess = config.g_true if g_guess is None else g_guess
    return 0.0, min(3 * guess, 0.9 * config.g_alias)


def mle_estimate(dataset: ExperimentDataset, bracket=None, newton_steps: int = 5) -> MLEResult:
    """Golden-section maximization of the log-likelihood, then Newton polishing."""
    if dataset.nu < 1:
        raise ValueError("empty dataset")
    lo, hi = default_bracket(dataset.config) if bracket is None else map(float, bracket)
    if not 0 <= lo < hi:
        raise ValueError(f"invalid bracket ({lo}, {hi})")
    if hi >= dataset.config.g_alias:
        raise ValueError(f"bracket upper end {hi} reaches the aliasing limit "
                         f"{dataset.config.g_alias}")
    counts = dataset.cell_counts()

    def f(g):
        return _loglik_and_score(dataset, g, counts)[0]

    tol = 1e-6 * (hi - lo)
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    g = 0.5 * (a + b)
    best = f(g)
    for _ in range(newton_steps):
        it += 1
        h = max(1e-7 * (hi - lo), 1e-12)
        s0 = _loglik_and_score(dataset, g, counts)[1]
        sp = _loglik_and_score(dataset, g + h, counts)[1]
        sm = _loglik_and_score(dataset, g - h, counts)[1]
        curv = (sp - sm) / (2 * h)
        if not curv < 0:
            break
        cand = g - s0 / curv
        if not lo <= cand <= hi:
            break
        fc = f(cand)
        if fc < best:
            break
        g, best = cand, fc
    ends = max(f(lo), f(hi))
    at_boundary = (g - lo <= 2 * tol or hi - g <= 2 * tol) or best < ends
    if best < ends:
        g, best = (lo, f(lo)) if f(lo) >= f(hi) else (hi, f(hi))
    return MLEResult(g, best, it, (lo, hi), at_boundary)


@dataclass(frozen=True)
class CRBSummary:
    nu: int
    n_replicas: int
    seed: int
    g_true: float
    basis: str
    fisher_classical: float
    degenerate: bool
    crb_std: Optional[float] = None
    mean: Optional[float] = None
    bias: Optional[float] = None
    std: Optional[float] = None
    ratio: Optional[float] = None
    success_fractions: list = field(default_factory=list)
    p_f: Optional[float] = None
    boundary_hits: int = 0
    generator: str = GENERATOR_NAME

    def as_dict(self) -> dict:
        return {
            "nu": self.nu, "n_replicas": self.n_replicas, "seed": self.seed,
            "g_true": self.g_true, "basis": self.basis,
            "fisher_classical": self.fisher_classical, "degenerate": self.degenerate,
            "crb_std": self.crb_std, "mean": self.mean, "bias": self.bias,
            "std": self.std, "ratio": self.ratio, "p_f": self.p_f,
            "success_fraction_min": min(self.success_fractions, default=None),
            "success_fraction_max": max(self.success_fractions, default=None),
            "boundary_hits": self.boundary_hits, "generator": self.generator,
            "stream_derivation": STREAM_DERIVATION,
        }


def _replica(config, nu, seed, r, bracket, chunk_size):
    ds = sample_dataset(config, nu, seed, replica=r, chunk_size=chunk_size)
    res = mle_estimate(ds, bracket)
    return res.g_hat, res.at_boundary, ds.success_fraction


def crb_report(config: ExperimentConfig, nu: int, n_replicas: int, seed: int, *,
               threads: int = 1, bracket=None, chunk_size: int = DEFAULT_CHUNK) -> CRBSummary:
    """Spread of the MLE over independent replicas versus the Cramer-Rao bound."""
    if n_replicas < 30:
        raise ValueError("crb_report needs at least 30 replicas")
    f_cl = measurement_fisher(config.protocol, None, None, None, config.g_true, config.basis)
    p_f = config.protocol.sums(config.g_true).p_f
    common = dict(nu=nu, n_replicas=n_replicas, seed=int(seed), g_true=config.g_true,
                  basis=config.basis.value, fisher_classical=f_cl, p_f=p_f)
    if not f_cl > 1e-12:
        return CRBSummary(degenerate=True, **common)
    args = [(config, nu, seed, r, bracket, chunk_size) for r in range(n_replicas)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda a: _replica(*a), args))
    else:
        results = [_replica(*a) for a in args]
    g_hat = np.array([r[0] for r in results])
    crb = 1.0 / math.sqrt(nu * f_cl)
    std = float(np.std(g_hat, ddof=1))
    return CRBSummary(degenerate=False, crb_std=crb, mean=float(g_hat.mean()),
                      bias=float(g_hat.mean() - config.g_true), std=std, ratio=std / crb,
                      success_fractions=[r[2] for r in results],
                      boundary_hits=sum(r[1] for r in results), **common)


def write_dataset(dataset: ExperimentDataset, path) -> None:
    """One trial per line: ``index postselected outcome`` after a JSON header."""
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(dataset.metadata(), sort_keys=True) + "\n")
        fh.write("# index\tpostselected\toutcome\n")
        for i, (s, k) in enumerate(zip(dataset.postselected, dataset.outcome_index)):
            fh.write(f"{i}\t{int(s)}\t{k if k >= 0 else '-'}\n")


def read_dataset(path) -> ExperimentDataset:
    with open(path) as fh:
        meta = json.loads(fh.readline()[2:])
        fh.readline()
        rows = [line.split("\t") for line in fh if line.strip()]
    ok = np.array([r[1] == "1" for r in rows], dtype=bool)
    out = np.array([-1 if r[2].strip() == "-" else int(r[2]) for r in rows], dtype=np.int64)
    return ExperimentDataset(ExperimentConfig.from_snapshot(meta["config"]), ok, out,
                             meta["seed"], meta["replica"], meta["chunk_size"],
                             meta["generator"])
