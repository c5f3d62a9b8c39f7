"""Stage orchestration for scenarios: simulate, reduce, reconstruct."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..fraccalc.grid import TimeGrid
from ..forward.data import CauchyData, extract_cauchy
from ..forward.solver import SpectralField, solve_spectral
from ..fourier_recon import (
    XiGrid,
    compute_IT,
    data_functional,
    denominator_radius,
    estimate_spectrum,
    invert_spectrum,
    processed_IT,
)
from ..reduction import ObservationWindow, RankDeficiencyWarning, reduce_and_recover
from .io import load_forward, save_forward, write_csv, write_grid_csv, write_json
from .scenario import Scenario

__all__ = ["StageError", "RunReport", "add_trace_noise", "simulate", "reduce", "reconstruct", "run_scenario"]


class StageError(RuntimeError):
    """A pipeline stage failed; the message starts with the stage name."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(exc).__name__}: {exc}")
        self.stage = stage


@dataclass
class RunReport:
    """Scenario echo, per-stage timings, metrics and acceptance flags.

    Field order is fixed so that serialized reports are diffable; only
    ``timings`` varies between identical runs.
    """

    scenario: dict
    stages: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def check(self, name: str, value: float, threshold: float) -> None:
        self.checks[name] = {"value": float(value), "threshold": float(threshold),
                             "passed": bool(value < threshold)}

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "stages": self.stages, "timings": self.timings,
                "metrics": self.metrics, "checks": self.checks, "passed": self.passed}


def _rel(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a))


def add_trace_noise(data: CauchyData, level: float, seed: Optional[int]) -> CauchyData:
    """I.i.d. Gaussian noise on the normal-derivative trace, ``level`` times its RMS."""
    if level == 0:
        return data
    rng = np.random.default_rng(seed)
    tr = np.asarray(data.dnu_trace, float)
    sigma = level * float(np.sqrt(np.mean(tr**2)))
    return data.with_traces(tr + sigma * rng.standard_normal(tr.shape))


# ---------------------------------------------------------------- stages
def simulate(sc: Scenario, out: Optional[Path] = None) -> tuple[SpectralField, CauchyData, dict]:
    grid = TimeGrid.uniform_grid(sc.T, sc.steps)
    u = solve_spectral(sc.model(), sc.alpha, grid, sc.domain)
    data = extract_cauchy(u)
    tr = data.dnu_trace
    metrics = {"time_nodes": grid.size, "modes": sc.domain.n_modes, "boundary_samples": data.layout.size,
               "trace_rms": float(np.sqrt(np.mean(tr**2))), "final_norm": float(np.linalg.norm(u.coeffs[-1]))}
    if out is not None:
        save_forward(out / "forward.npz", u, data, {"scenario": sc.name, "alpha": sc.alpha})
        px, py, nxv, nyv = data.layout.points()
        nt, ns = tr.shape
        write_csv(out / "cauchy_traces.csv", ["t", "sample", "x", "y", "normal_x", "normal_y", "dnu_u"],
                  [np.repeat(grid.nodes, ns), np.tile(np.arange(ns), nt), np.tile(px, nt), np.tile(py, nt),
                   np.tile(nxv, nt), np.tile(nyv, nt), tr.ravel()])
    return u, data, metrics


def _wave_conditions(sc: Scenario) -> dict:
    """Report how the alpha = 2 time and support-ball hypotheses compare on this rectangle."""
    diam = float(np.hypot(sc.L1, sc.L2))
    center = np.array([sc.L1, sc.L2]) / 2
    parts = sc.source.f + (sc.source.g or ())
    delta0 = max(float(np.linalg.norm(np.array(b.center) - center)) + b.radius for b in parts)
    speeds = [np.linalg.norm(sc.source.p)] + ([np.linalg.norm(sc.source.q)] if sc.source.q else [])
    c0 = float(max(speeds))
    ball = c0 * sc.T + delta0
    inradius = min(sc.L1, sc.L2) / 2
    time_ok = sc.T > diam
    ball_ok = ball <= inradius
    binding = [name for name, ok in (("time_horizon", time_ok), ("support_ball", ball_ok)) if not ok]
    return {"T": sc.T, "T_required": diam, "time_condition_holds": time_ok,
            "support_ball_radius": ball, "inradius": inradius, "ball_condition_holds": ball_ok,
            "binding": binding}


def reduce(sc: Scenario, u: SpectralField, data: CauchyData, out: Optional[Path] = None) -> tuple[dict, dict]:
    """Auxiliary-field reduction, initial-data fit and transport inversion."""
    data = add_trace_noise(data, sc.noise_level, sc.seed)
    src = sc.source
    q = np.array(src.q) if src.q is not None else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RankDeficiencyWarning)
        res = reduce_and_recover(u, data, sc.alpha, np.array(src.p), q, ObservationWindow(sc.collar),
                                 mu=sc.reduce_mu, refine=sc.refine)
    rank_warnings = sum(issubclass(w.category, RankDeficiencyWarning) for w in caught)
    fine = res.f.domain
    X, Y = fine.mesh()
    model = sc.model()
    f_true = model.f(X, Y)
    g_true = model.g(X, Y) if model.g is not None else np.zeros_like(f_true)
    a, b = res.initial.on(fine)
    metrics = {
        "rel_error_f": _rel(res.f.values, f_true),
        "rel_error_g": _rel(res.g.values, g_true) if model.g is not None else None,
        "rel_error_sum": _rel(res.f.values + res.g.values, f_true + g_true),
        "condition_number": float(res.initial.condition),
        "rank_warnings": int(rank_warnings),
    }
    if sc.alpha == 2.0:
        metrics["wave_conditions"] = _wave_conditions(sc)
    checks = {"reduce_rel_error_f": metrics["rel_error_f"]}
    if model.g is not None:
        checks["reduce_rel_error_g"] = metrics["rel_error_g"]
    if out is not None:
        cols = {"a": a.values, "b": b.values if b is not None else np.zeros_like(a.values),
                "f": res.f.values, "g": res.g.values, "f_true": f_true, "g_true": g_true}
        write_grid_csv(out / "recovered.csv", fine, cols)
        write_json(out / "reduce_metrics.json", metrics)
    return metrics, checks


def _probe_points(n: int, radius: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0.0, 2 * np.pi, n)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)


def reconstruct(sc: Scenario, data: CauchyData, out: Optional[Path] = None) -> tuple[dict, dict]:
    """Spectrum estimation from Cauchy data and regularized inversion."""
    model = sc.model()
    clean = data
    data = add_trace_noise(data, sc.noise_level, sc.seed)
    profile = model.f
    grid = XiGrid.for_profile(profile, sc.xi_n, sc.rim_fraction)
    est = estimate_spectrum(data, model, sc.alpha, grid, sc.mode, sc.eps_div)
    truth = profile.fourier(grid.samples) / (2 * np.pi)
    v = est.valid_mask
    metrics: dict = {
        "xi_max": grid.xi_max,
        "n_valid": int(v.sum()),
        "n_samples": int(v.size),
        "eps_div": est.eps_div,
        "spectrum_rel_error": _rel(est.fhat[v], truth[v]),
        "conjugate_asymmetry": est.conjugate_asymmetry(),
    }
    checks: dict = {"conjugate_asymmetry": metrics["conjugate_asymmetry"]}
    if sc.mode == "finite_T_exact":
        checks["spectrum_rel_error"] = metrics["spectrum_rel_error"]
        if sc.duality_probes:
            xi = _probe_points(sc.duality_probes, sc.probe_radius, 0 if sc.seed is None else sc.seed)
            source = profile.fourier(xi) * compute_IT(xi, model, sc.alpha, sc.T, grid=clean.grid)
            lhs = data_functional(clean, sc.alpha, sc.T, xi)
            metrics["duality_residual_max"] = float(np.max(np.abs(lhs - source) / np.abs(source)))
            checks["duality_residual"] = metrics["duality_residual_max"]
    if sc.T > sc.source.T0 and sc.alpha < 2.0:
        metrics["denominator_radius"] = denominator_radius(model, sc.alpha, sc.T)
    rd = sc.recon_domain
    X, Y = rd.mesh()
    f_true = profile(X, Y)
    errs = {}
    best = None
    for mu in sc.mu:
        rec = invert_spectrum(est, sc.support_radius, sc.taper_width, mu, rd, center=profile.center)
        errs[format(mu, ".6g")] = _rel(rec.values, f_true)
        if best is None or errs[format(mu, ".6g")] < best[0]:
            best = (errs[format(mu, ".6g")], mu, rec)
    metrics["recon_rel_error_by_mu"] = errs
    metrics["recon_mu"] = best[1]
    metrics["recon_rel_error"] = best[0]
    checks["recon_rel_error_noisy" if sc.noise_level > 0 else "recon_rel_error"] = best[0]
    if out is not None:
        if sc.alpha < 2.0:
            it = processed_IT(grid.samples, model, sc.alpha, sc.T) if sc.mode != "finite_T_exact" else est.denom
        else:
            it = est.denom
        write_csv(out / "fhat.csv", ["xi_x", "xi_y", "re", "im", "abs_IT", "valid"],
                  [grid.samples[:, 0], grid.samples[:, 1], np.nan_to_num(est.fhat.real, nan=0.0),
                   np.nan_to_num(est.fhat.imag, nan=0.0), np.abs(it), v])
        write_grid_csv(out / "f_recon.csv", rd, {"f_recon": best[2].values, "f_true": f_true})
        write_json(out / "metrics.json", metrics)
    return metrics, checks


# ---------------------------------------------------------------- orchestration
def _timed(report: RunReport, stage: str, fn, *args):
    t0 = time.perf_counter()
    try:
        result = fn(*args)
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise StageError(stage, exc) from exc
    report.timings[stage] = round(time.perf_counter() - t0, 3)
    report.stages.append(stage)
    return result


def run_scenario(sc: Scenario, out: Optional[Path] = None, stages: Optional[tuple[str, ...]] = None,
                 dump: Optional[Path] = None) -> RunReport:
    """Run the scenario's stages in dependency order and write ``report.json``.

    ``dump`` replaces the simulate stage by a previously saved forward run.
    """
    stages = stages or sc.stages
    out = Path(out) if out is not None else None
    report = RunReport(sc.echo())
    if dump is not None:
        u, data, _ = _timed(report, "load", load_forward, Path(dump))
        if abs(float(u.alpha.alpha) - sc.alpha) > 0:
            raise StageError("load", ValueError(f"dump alpha {u.alpha.alpha} differs from scenario alpha {sc.alpha}"))
    else:
        u, data, m = _timed(report, "simulate", simulate, sc, out)
        report.metrics["simulate"] = m
    tol = sc.tolerances
    if "reduce" in stages:
        m, c = _timed(report, "reduce", reduce, sc, u, data, out)
        report.metrics["reduce"] = m
        for name, val in c.items():
            report.check(name, val, tol["reduce_rel_error"])
    if "reconstruct" in stages:
        m, c = _timed(report, "reconstruct", reconstruct, sc, data, out)
        report.metrics["reconstruct"] = m
        for name, val in c.items():
            report.check(name, val, tol[name])
    if out is not None:
        write_json(out / "report.json", report.to_dict())
    return report
