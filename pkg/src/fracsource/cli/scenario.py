"""Scenario files: parsing, validation and model construction.

A scenario is a YAML mapping.  Every field is checked before any compute
starts; errors name the offending key path.  All quantities are
dimensionless (unit wave speed, unit diffusivity).
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from ..fraccalc.grid import MIN_TIME_NODES, as_order
from ..forward.sources import BumpProfile, LinearMotion, Orbit, ProfileSum, SupportViolationError
from ..spectral import RectDomain

__all__ = [
    "ScenarioError",
    "ScenarioParseError",
    "Scenario",
    "STAGES",
    "bundled_scenarios",
    "load_scenario",
    "parse_scenario",
]

STAGES = ("simulate", "reduce", "reconstruct")

DEFAULT_TOLERANCES = {
    "reduce_rel_error": 0.05,
    "duality_residual": 1e-3,
    "spectrum_rel_error": 1e-2,
    "recon_rel_error": 0.05,
    "recon_rel_error_noisy": 0.15,
    "conjugate_asymmetry": 1e-10,
}


class ScenarioError(ValueError):
    """A scenario violates a precondition of the modules it drives."""


class ScenarioParseError(ScenarioError):
    """The scenario file is not valid YAML."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


# ---------------------------------------------------------------- field readers
def _fail(path: str, msg: str):
    raise ScenarioError(f"{path}: {msg}")


def _mapping(obj, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(obj, dict):
        _fail(path, "expected a mapping")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        _fail(path, f"unknown key(s) {unknown}; allowed: {sorted(allowed)}")
    missing = sorted(required - set(obj))
    if missing:
        _fail(path, f"missing key(s) {missing}")
    return obj


def _number(obj, path: str, lo: float = -np.inf, hi: float = np.inf, lo_open=False, hi_open=False,
            integer=False) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        _fail(path, f"expected a number, got {obj!r}")
    if integer and int(obj) != obj:
        _fail(path, f"expected an integer, got {obj!r}")
    x = int(obj) if integer else float(obj)
    below = x <= lo if lo_open else x < lo
    above = x >= hi if hi_open else x > hi
    if below or above or not np.isfinite(x):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        _fail(path, f"value {x!r} outside {lb}{lo:g}, {hi:g}{rb}")
    return x


def _vector(obj, path: str) -> tuple[float, float]:
    if not isinstance(obj, (list, tuple)) or len(obj) != 2:
        _fail(path, f"expected a 2-vector, got {obj!r}")
    return (_number(obj[0], f"{path}[0]"), _number(obj[1], f"{path}[1]"))


# ---------------------------------------------------------------- spec types
@dataclass(frozen=True)
class BumpSpec:
    center: tuple[float, float]
    radius: float
    amplitude: float = 1.0

    def build(self) -> BumpProfile:
        return BumpProfile(self.center, self.radius, self.amplitude)


def _bump(obj, path) -> BumpSpec:
    m = _mapping(obj, path, {"center", "radius", "amplitude"}, {"center", "radius"})
    return BumpSpec(_vector(m["center"], f"{path}.center"),
                    _number(m["radius"], f"{path}.radius", 0.0, lo_open=True),
                    _number(m.get("amplitude", 1.0), f"{path}.amplitude"))


def _profile(obj, path) -> tuple[BumpSpec, ...]:
    if isinstance(obj, list):
        if not obj:
            _fail(path, "empty profile list")
        return tuple(_bump(b, f"{path}[{i}]") for i, b in enumerate(obj))
    return (_bump(obj, path),)


def _build_profile(parts: tuple[BumpSpec, ...]):
    bumps = tuple(b.build() for b in parts)
    return bumps[0] if len(bumps) == 1 else ProfileSum(bumps)


@dataclass(frozen=True)
class SourceSpec:
    kind: str
    f: tuple[BumpSpec, ...]
    p: Optional[tuple[float, float]] = None
    g: Optional[tuple[BumpSpec, ...]] = None
    q: Optional[tuple[float, float]] = None
    orbit_radius: float = 0.0
    orbit_period: float = 1.0
    T0: float = 1.0
    pulse_scale: float = 1.0

    def build(self):
        f = _build_profile(self.f)
        if self.kind == "linear_motion":
            g = None if self.g is None else _build_profile(self.g)
            return LinearMotion(f, np.array(self.p), g, None if self.q is None else np.array(self.q))
        r, per, T0, c = self.orbit_radius, self.orbit_period, self.T0, self.pulse_scale

        def rho(t):
            t = np.asarray(t, float)
            return np.stack([r * np.cos(2 * np.pi * t / per) - r, r * np.sin(2 * np.pi * t / per)], axis=-1)

        def h(t):
            s = np.asarray(t, float) / T0
            out = np.zeros_like(s)
            on = (s > 0) & (s < 1)
            out[on] = c * np.exp(-1.0 / (s[on] * (1.0 - s[on])))
            return out

        return Orbit(f, rho, h, T0)


def _source(obj, path) -> SourceSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        _fail(path, "expected a mapping with a 'kind' key")
    kind = obj["kind"]
    if kind == "linear_motion":
        m = _mapping(obj, path, {"kind", "f", "p", "g", "q"}, {"kind", "f", "p"})
        g = None if m.get("g") is None else _profile(m["g"], f"{path}.g")
        q = None if m.get("q") is None else _vector(m["q"], f"{path}.q")
        if (g is None) != (q is None):
            _fail(path, "g and q must be given together")
        p = _vector(m["p"], f"{path}.p")
        if q is not None and np.allclose(p, q):
            _fail(f"{path}.q", f"p and q must differ: recovering two profiles needs p != q (got p = q = {p})")
        return SourceSpec(kind, _profile(m["f"], f"{path}.f"), p, g, q)
    if kind == "orbit":
        m = _mapping(obj, path, {"kind", "f", "orbit", "pulse"}, {"kind", "f"})
        f = _profile(m["f"], f"{path}.f")
        if len(f) != 1:
            _fail(f"{path}.f", "an orbiting source has a single bump profile")
        orb = _mapping(m.get("orbit", {}), f"{path}.orbit", {"kind", "radius", "period"})
        if orb.get("kind", "circle") != "circle":
            _fail(f"{path}.orbit.kind", "only 'circle' orbits are supported")
        pulse = _mapping(m.get("pulse", {}), f"{path}.pulse", {"T0", "scale"})
        scale = _number(pulse.get("scale", 1.0), f"{path}.pulse.scale")
        if scale == 0.0:
            _fail(f"{path}.pulse.scale", "int h dt vanishes; the spectrum is not identifiable")
        return SourceSpec(kind, f,
                          orbit_radius=_number(orb.get("radius", 0.1), f"{path}.orbit.radius", 0.0),
                          orbit_period=_number(orb.get("period", 1.0), f"{path}.orbit.period", 0.0, lo_open=True),
                          T0=_number(pulse.get("T0", 1.0), f"{path}.pulse.T0", 0.0, lo_open=True),
                          pulse_scale=scale)
    _fail(f"{path}.kind", f"unknown source kind {kind!r}; expected 'linear_motion' or 'orbit'")


@dataclass(frozen=True)
class Scenario:
    """Validated scenario.  ``raw`` keeps the normalised mapping for report echoes."""

    name: str
    alpha: float
    L1: float
    L2: float
    N1: int
    N2: int
    T: float
    steps: int
    source: SourceSpec
    stages: tuple[str, ...]
    collar: float = 0.3
    refine: int = 2
    reduce_mu: float = 0.0
    xi_n: int = 17
    rim_fraction: float = 0.01
    mode: str = "finite_T_exact"
    eps_div: Optional[float] = None
    support_radius: float = 0.35
    taper_width: float = 15.0
    mu: tuple[float, ...] = (1e-8,)
    grid_points: tuple[int, int] = (63, 63)
    duality_probes: int = 20
    probe_radius: float = 4.0
    noise_level: float = 0.0
    seed: Optional[int] = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_dir: Optional[str] = None
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def domain(self) -> RectDomain:
        return RectDomain(self.L1, self.L2, self.N1, self.N2)

    @property
    def recon_domain(self) -> RectDomain:
        return RectDomain(self.L1, self.L2, self.N1, self.N2, *self.grid_points)

    def model(self):
        return self.source.build()

    def echo(self) -> dict:
        return copy.deepcopy(self.raw)


_TOP = {"name", "alpha", "domain", "time", "source", "stages", "reduce", "reconstruct", "noise",
        "tolerances", "output_dir"}


def parse_scenario(obj: Any) -> Scenario:
    """Validate a parsed YAML mapping and return a :class:`Scenario`.

    Raises
    ------
    ScenarioError
        Naming the key path and the violated condition.
    """
    m = _mapping(obj, "scenario", _TOP, {"name", "alpha", "domain", "time", "source", "stages"})
    name = m["name"]
    if not isinstance(name, str) or not name:
        _fail("name", "expected a non-empty string")
    alpha_raw = _number(m["alpha"], "alpha")
    try:
        alpha = as_order(alpha_raw).alpha
    except ValueError as exc:
        _fail("alpha", f"{exc} (FracOrder range 0 < alpha <= 2)")

    dom = _mapping(m["domain"], "domain", {"L1", "L2", "modes"}, {"modes"})
    L1 = _number(dom.get("L1", 1.0), "domain.L1", 0.0, lo_open=True)
    L2 = _number(dom.get("L2", 1.0), "domain.L2", 0.0, lo_open=True)
    modes = dom["modes"]
    if isinstance(modes, int):
        modes = [modes, modes]
    if not isinstance(modes, list) or len(modes) != 2:
        _fail("domain.modes", "expected an integer or a pair of integers")
    N1 = _number(modes[0], "domain.modes[0]", 2, 128, integer=True)
    N2 = _number(modes[1], "domain.modes[1]", 2, 128, integer=True)

    tm = _mapping(m["time"], "time", {"T", "steps"}, {"T", "steps"})
    T = _number(tm["T"], "time.T", 0.0, lo_open=True)
    steps = _number(tm["steps"], "time.steps", MIN_TIME_NODES - 1, 20000, integer=True)

    src = _source(m["source"], "source")

    stages = m["stages"]
    if isinstance(stages, str):
        stages = [stages]
    if not isinstance(stages, list) or not stages or any(s not in STAGES for s in stages):
        _fail("stages", f"expected a non-empty list drawn from {list(STAGES)}")
    stages = tuple(s for s in STAGES if s in stages)  # dependency order
    if "simulate" not in stages:
        stages = ("simulate",) + stages
    if "reduce" in stages and src.kind != "linear_motion":
        _fail("stages", "the reduce stage needs a linear_motion source")
    if "reconstruct" in stages and src.kind != "orbit":
        _fail("stages", "the reconstruct stage needs an orbit source")
    if src.kind == "linear_motion" and src.g is not None and alpha <= 1.0:
        _fail("source.g", f"a second profile is only recoverable for alpha > 1 (alpha = {alpha:g}); "
                          "merge the bumps into f")

    kw: dict[str, Any] = {}
    red = _mapping(m.get("reduce", {}), "reduce", {"collar", "refine", "mu"})
    if "collar" in red:
        kw["collar"] = _number(red["collar"], "reduce.collar", 0.0, min(L1, L2) / 2, lo_open=True, hi_open=True)
    if "refine" in red:
        kw["refine"] = _number(red["refine"], "reduce.refine", 1, 16, integer=True)
    if "mu" in red:
        kw["reduce_mu"] = _number(red["mu"], "reduce.mu", 0.0)

    rec = _mapping(m.get("reconstruct", {}), "reconstruct",
                   {"mode", "xi_grid", "eps_div", "support_radius", "taper_width", "mu", "grid_points",
                    "duality_probes", "probe_radius"})
    if "mode" in rec:
        if rec["mode"] not in ("finite_T_exact", "large_T_boundary_only"):
            _fail("reconstruct.mode", "expected 'finite_T_exact' or 'large_T_boundary_only'")
        kw["mode"] = rec["mode"]
    xg = _mapping(rec.get("xi_grid", {}), "reconstruct.xi_grid", {"n", "rim_fraction"})
    if "n" in xg:
        kw["xi_n"] = _number(xg["n"], "reconstruct.xi_grid.n", 1, 101, integer=True)
        if kw["xi_n"] % 2 == 0:
            _fail("reconstruct.xi_grid.n", "must be odd so that the grid contains xi = 0")
    if "rim_fraction" in xg:
        kw["rim_fraction"] = _number(xg["rim_fraction"], "reconstruct.xi_grid.rim_fraction", 0.0, 1.0,
                                     lo_open=True, hi_open=True)
    if rec.get("eps_div") is not None:
        kw["eps_div"] = _number(rec["eps_div"], "reconstruct.eps_div", 0.0)
    inradius = min(L1, L2) / 2
    if "support_radius" in rec:
        kw["support_radius"] = _number(rec["support_radius"], "reconstruct.support_radius", 0.0, inradius,
                                       lo_open=True)
    if "taper_width" in rec:
        kw["taper_width"] = _number(rec["taper_width"], "reconstruct.taper_width", 0.0, lo_open=True)
    if "mu" in rec:
        mus = rec["mu"] if isinstance(rec["mu"], list) else [rec["mu"]]
        if not mus:
            _fail("reconstruct.mu", "empty list")
        kw["mu"] = tuple(_number(v, f"reconstruct.mu[{i}]", 0.0) for i, v in enumerate(mus))
    if "grid_points" in rec:
        gp = rec["grid_points"]
        gp = [gp, gp] if isinstance(gp, int) else gp
        if not isinstance(gp, list) or len(gp) != 2:
            _fail("reconstruct.grid_points", "expected an integer or a pair of integers")
        kw["grid_points"] = (_number(gp[0], "reconstruct.grid_points[0]", max(N1, 3), 512, integer=True),
                             _number(gp[1], "reconstruct.grid_points[1]", max(N2, 3), 512, integer=True))
    if "duality_probes" in rec:
        kw["duality_probes"] = _number(rec["duality_probes"], "reconstruct.duality_probes", 0, 1000, integer=True)
    if "probe_radius" in rec:
        kw["probe_radius"] = _number(rec["probe_radius"], "reconstruct.probe_radius", 0.0, lo_open=True)
    if src.kind == "orbit":
        mode = kw.get("mode", "finite_T_exact")
        if mode == "large_T_boundary_only" and T <= src.T0:
            _fail("time.T", f"large_T_boundary_only needs T > T0 = {src.T0:g}")

    noise = _mapping(m.get("noise", {}), "noise", {"level", "seed"})
    level = _number(noise.get("level", 0.0), "noise.level", 0.0)
    seed = noise.get("seed")
    if seed is not None:
        seed = _number(seed, "noise.seed", 0, 2**63 - 1, integer=True)
    if level > 0 and seed is None:
        _fail("noise.seed", "a seed is mandatory when noise.level > 0")
    kw["noise_level"], kw["seed"] = level, seed

    tol = dict(DEFAULT_TOLERANCES)
    for k, v in _mapping(m.get("tolerances", {}), "tolerances", set(DEFAULT_TOLERANCES)).items():
        tol[k] = _number(v, f"tolerances.{k}", 0.0, lo_open=True)
    kw["tolerances"] = tol
    if m.get("output_dir") is not None:
        if not isinstance(m["output_dir"], str):
            _fail("output_dir", "expected a string")
        kw["output_dir"] = m["output_dir"]

    sc = Scenario(name, alpha, L1, L2, N1, N2, T, steps, src, stages, raw=copy.deepcopy(m), **kw)
    _check_model(sc)
    return sc


def _check_model(sc: Scenario):
    """Construct the source model and check that its support stays inside the domain."""
    try:
        model = sc.model()
    except ValueError as exc:
        _fail("source", str(exc))
    try:
        model.check_support(sc.domain, np.linspace(0.0, sc.T, 65))
    except SupportViolationError as exc:
        _fail("source", f"{exc} (profiles must stay compactly inside the domain)")
    if sc.source.kind == "orbit":
        c = np.array(sc.source.f[0].center)
        if np.any(c - sc.support_radius < 0) or c[0] + sc.support_radius > sc.L1 or \
                c[1] + sc.support_radius > sc.L2:
            _fail("reconstruct.support_radius", "the support disc about the profile centre leaves the domain")


# ---------------------------------------------------------------- loading
def bundled_scenarios() -> dict[str, Path]:
    """Names and paths of the scenarios shipped with the package."""
    root = resources.files("fracsource.cli") / "scenarios"
    return {Path(str(p)).stem: Path(str(p)) for p in root.iterdir() if str(p).endswith(".yaml")}


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario from a path or the name of a bundled scenario."""
    path = Path(ref)
    if not path.exists():
        bundled = bundled_scenarios()
        if str(ref) in bundled:
            path = bundled[str(ref)]
        else:
            raise ScenarioError(f"no scenario file {ref!r} and no bundled scenario of that name "
                                f"(bundled: {sorted(bundled)})")
    text = path.read_text()
    try:
        obj = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ScenarioParseError(f"{path}: {exc.problem or exc}",
                                 None if mark is None else mark.line + 1,
                                 None if mark is None else mark.column + 1) from None
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
    return parse_scenario(obj)
