"""Report, figure sweeps, series diagnostics and Monte Carlo runs driven by a RunConfig.

Each ``run_*`` function returns plain data; :mod:`wvafisher.cli` serializes it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .fisher import FisherReport, budget_batch, fps_total, MeasurementSpec
from .montecarlo import ExperimentConfig, crb_report
from .protocol import Protocol, align_postselection, optimal_postselection
from .quantum import SIGMA_Z, as_observable, bloch_state, gaussian_meter
from .series import regime_classify, series_fisher


@dataclass(frozen=True)
class Table:
    columns: tuple
    rows: list


def build_meter(cfg: RunConfig):
    return gaussian_meter(cfg.delta, cfg.n_points, cfg.half_width_sigmas)


def resolve_states(cfg: RunConfig):
    """(psi_i, psi_f, A) with psi_f chosen per ``cfg.postselection``."""
    psi_i, psi_f, A = cfg.state_vectors()
    if cfg.postselection == "opt":
        psi_f = optimal_postselection(psi_i, A).psi_f.amplitudes
    elif cfg.postselection == "identity":
        psi_f = np.array(psi_i, dtype=complex)
    return psi_i, align_postselection(psi_i, psi_f).psi_f.amplitudes, A


def _chunks(n, threads):
    k = max(1, min(threads, n))
    edges = np.linspace(0, n, k + 1).astype(int)
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _batched(psi_i, psi_f, A, meter, g, threads):
    parts = _chunks(len(psi_i), threads)

    def job(ab):
        a, b = ab
        return budget_batch(psi_i[a:b], psi_f[a:b], A, meter, g)

    if len(parts) > 1:
        with ThreadPoolExecutor(len(parts)) as pool:
            res = list(pool.map(job, parts))
    else:
        res = [job(parts[0])]
    return {k: np.concatenate([r[k] for r in res]) for k in res[0]}


def run_report(cfg: RunConfig) -> dict:
    psi_i, psi_f, A = resolve_states(cfg)
    meter = build_meter(cfg)
    g = cfg.coupling
    rep: FisherReport = fps_total(psi_i, psi_f, A, meter, g)
    out = {"fisher": rep.as_dict(), "g_delta": cfg.g_delta_value}
    if cfg.postselection == "opt":
        label = regime_classify(psi_i, A, meter, g)
        lead = series_fisher(psi_i, None, A, meter, g, "opt")
        out["regime"] = {"label": label.label.value, "ratio": label.ratio,
                         "epsilon": label.epsilon,
                         "weak_value_criterion": label.weak_value_criterion}
        out["leading_order"] = {"fm_over_qfi": lead.fm_over_qfi,
                                "fpf_over_qfi": lead.fpf_over_qfi, "valid": lead.valid}
    return out


def fig1_grid(n: int) -> np.ndarray:
    """Cell midpoints on (0, pi); symmetric under theta -> pi - theta."""
    return (np.arange(n) + 0.5) * math.pi / n


def sweep_fig1(cfg: RunConfig) -> Table:
    """Budget ratios against theta_i with optimal post-selection per point."""
    theta = fig1_grid(cfg.theta_points)
    psi_i = np.array([bloch_state(t, 0.0).amplitudes for t in theta])
    v = psi_i @ SIGMA_Z.T
    psi_f = v / np.linalg.norm(v, axis=1)[:, None]
    res = _batched(psi_i, psi_f, SIGMA_Z, build_meter(cfg), cfg.coupling, cfg.threads)
    q = res["qfi"]
    rows = list(zip(theta, res["fm"] / q, res["fpf"] / q, res["fps"] / q))
    return Table(("theta_i", "fm_over_qfi", "fpf_over_qfi", "fps_over_qfi"), rows)


def fig2_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, math.pi, n)


def sweep_fig2(cfg: RunConfig) -> Table:
    """F_m and F_ps against theta_f for fixed theta_i and phase phi."""
    theta_f = fig2_grid(cfg.theta_f_points)
    psi_f = np.array([bloch_state(t, cfg.phi).amplitudes for t in theta_f])
    psi_i = np.tile(bloch_state(cfg.theta_i, 0.0).amplitudes, (theta_f.size, 1))
    meter = build_meter(cfg)
    rows = []
    for gd in sorted(float(x) for x in cfg.g_delta_list):
        res = _batched(psi_i, psi_f, SIGMA_Z, meter, gd / cfg.delta, cfg.threads)
        q = res["qfi"]
        rows.extend(zip(theta_f, [gd] * theta_f.size, res["fm"] / q, res["fps"] / q))
    return Table(("theta_f", "g_delta", "fm_over_qfi", "fps_over_qfi"), rows)


def dip_width(theta_f, fm_over_qfi, theta_i: float) -> float:
    """Full width at half depth of the F_m dip, in theta_f.

    The sweep is first divided by its plateau |A_fi|^2 = cos^2((theta_i - theta_f)/2)
    so the dip sits on a flat background of one.
    """
    t = np.asarray(theta_f, dtype=float)
    r = np.asarray(fm_over_qfi, dtype=float) / np.cos((theta_i - t) / 2) ** 2
    k = int(np.argmin(r))
    level = 0.5 * (1.0 + r[k])

    def crossing(step):
        j = k
        while 0 <= j + step < t.size and r[j + step] < level:
            j += step
        if not 0 <= j + step < t.size:
            return t[j]
        a, b = j, j + step
        return t[a] + (level - r[a]) * (t[b] - t[a]) / (r[b] - r[a])

    return float(crossing(1) - crossing(-1))


def series_check(cfg: RunConfig) -> Table:
    """Truncation order of the g^4 series against high-precision grid sums."""
    from .precise import gaussian_grid_model, residual_table

    psi_i, psi_f, A = resolve_states(cfg)
    model = gaussian_grid_model(psi_i, psi_f, as_observable(A).matrix, cfg.delta,
                                cfg.n_points, cfg.half_width_sigmas, cfg.precision_digits)
    g_values = [float(x) / cfg.delta for x in sorted(cfg.g_delta_list)]
    rows = []
    for target, g, r1, r2, order in residual_table(model, g_values):
        rows.append((target, g * cfg.delta, r1, r2,
                     math.nan if order is None else order, int(order is None)))
    return Table(("target", "g_delta", "residual", "residual_half", "order",
                  "identically_zero"), rows)


def experiment_config(cfg: RunConfig) -> ExperimentConfig:
    psi_i, psi_f, A = resolve_states(cfg)
    proto = Protocol.build(psi_i, psi_f, A, build_meter(cfg))
    return ExperimentConfig(proto, cfg.coupling, MeasurementSpec(cfg.basis))


def run_montecarlo(cfg: RunConfig) -> dict:
    exp = experiment_config(cfg)
    summary = crb_report(exp, cfg.nu, cfg.replicas, cfg.seed, threads=cfg.threads,
                         bracket=cfg.bracket, chunk_size=cfg.chunk_size)
    out = summary.as_dict()
    n = cfg.nu
    p = summary.p_f
    sigma = math.sqrt(p * (1 - p) / n)
    fr = summary.success_fractions
    out["success_fraction_max_z"] = max(abs(f - p) for f in fr) / sigma if fr else None
    return out
