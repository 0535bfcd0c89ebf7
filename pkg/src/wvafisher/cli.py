"""Command-line entry point: ``wvafisher <subcommand> [--config PATH] [--out PATH]``."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .config import RunConfig, U64_MAX, parse_config
from .errors import ConfigError, DegenerateError, NullPostselectionError
from . import reports

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3

COMMANDS = {
    "report": "report",
    "sweep-fig1": "sweep_fig1",
    "sweep-fig2": "sweep_fig2",
    "series-check": "series_check",
    "montecarlo": "montecarlo",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _u64(text):
    v = int(text, 0)
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wvafisher",
                description="Fisher-information budget of post-selected weak measurements.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file, '-' for stdin (default: built-ins)")
        s.add_argument("--out", help="output file (default: stdout)")
        s.add_argument("--seed", type=_u64)
        s.add_argument("--threads", type=_positive)
    return p


def format_number(v) -> str:
    """Plain decimal with 12 significant digits."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if v == 0:
        return "0"
    return np.format_float_positional(v, precision=12, unique=False, fractional=False,
                                      trim="-")


def render_csv(table: reports.Table, cfg: RunConfig) -> str:
    lines = [f"# wvafisher {__version__} {cfg.mode}",
             f"# config_sha256 {cfg.digest()}",
             f"# config {cfg.canonical_json()}",
             ",".join(table.columns)]
    for row in table.rows:
        lines.append(",".join(v if isinstance(v, str) else format_number(v) for v in row))
    return "\n".join(lines) + "\n"


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def render_json(result: dict, cfg: RunConfig, timestamp: str | None = None) -> str:
    from .montecarlo import GENERATOR_NAME
    doc = {
        "tool": "wvafisher",
        "version": __version__,
        "mode": cfg.mode,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "generator": GENERATOR_NAME,
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "result": result,
    }
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def execute(cfg: RunConfig) -> str:
    """Run the configured mode and return the serialized artifact."""
    if cfg.mode == "report":
        return render_json(reports.run_report(cfg), cfg)
    if cfg.mode == "montecarlo":
        return render_json(reports.run_montecarlo(cfg), cfg)
    fn = {"sweep_fig1": reports.sweep_fig1, "sweep_fig2": reports.sweep_fig2,
          "series_check": reports.series_check}[cfg.mode]
    return render_csv(fn(cfg), cfg)


def _write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".wvafisher-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_config_text(path):
    if path is None:
        return "{}"
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        text = _read_config_text(args.config)
        cfg = parse_config(text, COMMANDS[args.command],
                           {"seed": args.seed, "threads": args.threads})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = execute(cfg)
    except (DegenerateError, NullPostselectionError) as exc:
        print(f"numeric degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        _write_atomic(args.out, out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
