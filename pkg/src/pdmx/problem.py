"""Run configurations: spec-string parsing and the analytic / numeric / verify pipelines."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytic, expr, numeric
from .massmap import (
    ConstantMass,
    CustomMass,
    DomainInterval,
    ExponentialMass,
    MassModel,
    PowerLawMass,
    custom_from_expr,
    mass_class,
    pct_map,
    residual,
)
from .ordering import (
    OrderingError,
    OrderingScheme,
    effective_potential,
    is_hermitian,
    parse_params,
    parse_scheme,
)


class ConfigError(ValueError):
    """Unparseable run settings."""


class IncompatibleError(ConfigError):
    """Settings that parse but cannot be combined (domain, image, solver path)."""


# --- spec strings ----------------------------------------------------------------


def _split(spec: str):
    head, sep, rest = spec.partition(":")
    return head.strip().lower(), rest if sep else ""


def _floats(text: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    try:
        params = {k: float(v) for k, v in parse_params(text).items()}
    except OrderingError as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"unknown parameter(s) {sorted(unknown)}; expected {sorted(allowed)}")
    missing = set(required) - set(params)
    if missing:
        raise ConfigError(f"missing parameter(s) {sorted(missing)}")
    return params


def parse_domain(text: str) -> DomainInterval:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"domain must be 'lo,hi', got {text!r}")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"domain must be 'lo,hi', got {text!r}") from None
    if not lo < hi:
        raise ConfigError(f"domain needs lo < hi, got {text!r}")
    return DomainInterval(lo, hi)


def parse_mass(spec: str) -> MassModel:
    """Mass from ``const:m0=``, ``exp:a1=,a2=``, ``powerlaw:b1=,b2=,C=``,
    ``class:s=,C1=,C2=,C3=``, ``step:left=,right=,at=`` or an expression
    in ``x`` (optionally ``custom:<expr>@lo,hi``)."""
    kind, rest = _split(spec)
    if kind == "const":
        p = _floats(rest, {"m0"})
        return ConstantMass(p.get("m0", 1.0))
    if kind == "exp":
        p = _floats(rest, {"a1", "a2"})
        return ExponentialMass(p.get("a1", 1.0), p.get("a2", 1.0))
    if kind == "powerlaw":
        p = _floats(rest, {"b1", "b2", "C"})
        return PowerLawMass(p.get("b1", 1.0), p.get("b2", 0.0), p.get("C", 2.0))
    if kind == "class":
        p = _floats(rest, {"s", "C1", "C2", "C3"}, {"s"})
        return mass_class(p["s"], p.get("C1", 0.0), p.get("C2", 1.0), p.get("C3", 1.0))[0]
    if kind == "step":
        p = _floats(rest, {"left", "right", "at"})
        left, right, at = p.get("left", 1.0), p.get("right", 4.0), p.get("at", 0.0)
        return CustomMass(
            func=lambda x: np.where(np.asarray(x) < at, left, right),
            d1=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            d2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            name=f"step:left={left:g},right={right:g},at={at:g}",
            discontinuities=(at,),
        )
    text = rest if kind == "custom" else spec
    body, _, dom = text.partition("@")
    domain = parse_domain(dom) if dom else None
    try:
        return custom_from_expr(body.strip(), domain)
    except expr.ExprError as exc:
        raise ConfigError(f"mass expression: {exc}") from None


def parse_potential(spec: str, hbar: float = 1.0):
    """``harmonic:lambda1=,lambda2=``, ``isotonic:lambda1=,lambda3=[,l=printed]`` or ``custom:<expr in g>``."""
    kind, rest = _split(spec)
    try:
        if kind == "harmonic":
            p = _floats(rest, {"lambda1", "lambda2"}, {"lambda1"})
            return analytic.ShiftedHarmonic(p["lambda1"], p.get("lambda2", 0.0), hbar)
        if kind == "isotonic":
            items = [s for s in rest.split(",") if s.strip()]
            conv = [s.split("=", 1)[1].strip() for s in items if s.strip().startswith("l=")]
            rest = ",".join(s for s in items if not s.strip().startswith("l="))
            p = _floats(rest, {"lambda1", "lambda3"}, {"lambda1", "lambda3"})
            conv = conv[-1] if conv else "consistent"
            return analytic.Isotonic(p["lambda1"], p["lambda3"], hbar, conv)
    except analytic.SpectrumError as exc:
        raise ConfigError(str(exc)) from None
    if kind == "custom":
        try:
            node = expr.parse(rest, var="g")
        except expr.ExprError as exc:
            raise ConfigError(f"potential expression: {exc}") from None
        return analytic.CustomU(node, hbar, f"custom:{rest}")
    raise ConfigError(f"unknown potential {spec!r}; use harmonic:, isotonic: or custom:")


# --- run configuration ----------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    scheme: str = "case1"
    mass: str = "const:m0=1"
    potential: str = "harmonic:lambda1=0.5"
    domain: tuple[float, float] = (-12.0, 12.0)
    grid: int = 4096
    hbar: float = 1.0
    levels: int = 6
    extrapolate: bool = True

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.grid < 16:
            raise ConfigError("grid must have at least 16 points")
        if not self.hbar > 0:
            raise ConfigError("hbar must be positive")
        if not self.domain[0] < self.domain[1]:
            raise ConfigError("domain needs lo < hi")

    def as_dict(self):
        return {
            "scheme": self.scheme,
            "mass": self.mass,
            "potential": self.potential,
            "domain": list(self.domain),
            "grid": self.grid,
            "hbar": self.hbar,
            "levels": self.levels,
            "extrapolate": self.extrapolate,
        }


@dataclass
class Problem:
    config: RunConfig
    scheme: OrderingScheme
    mass: MassModel
    potential: object
    pmap: object
    V: object = field(repr=False)


def build(config: RunConfig, scheme: OrderingScheme | None = None) -> Problem:
    try:
        sch = scheme or parse_scheme(config.scheme)
    except OrderingError as exc:
        raise ConfigError(str(exc)) from None
    mass = parse_mass(config.mass)
    pot = parse_potential(config.potential, config.hbar)
    lo, hi = config.domain
    if lo < mass.domain.lo or hi > mass.domain.hi:
        raise IncompatibleError(f"grid domain [{lo:g}, {hi:g}] leaves the mass domain {mass.domain}")
    pmap = pct_map(mass)
    U = pot.U

    def V(x):
        return U(pmap.g(x))

    return Problem(config, sch, mass, pot, pmap, V)


# --- analytic -------------------------------------------------------------------


@dataclass
class AnalyticSolution:
    levels: list
    states: list
    x: np.ndarray
    reduction_residual: float  # max reduction residual on x; 0 when the levels are exact


def solve_analytic(prob: Problem, samples: int = 401) -> AnalyticSolution:
    """Closed-form levels plus PDM eigenfunctions sampled on the domain.

    Hermitian schemes get Hermitian states, others the non-Hermitian ones.
    """
    if isinstance(prob.potential, analytic.CustomU):
        raise IncompatibleError("custom potentials have no closed-form levels; use solve-numeric")
    levels = analytic.levels(prob.potential, prob.config.levels - 1)
    kind = "hermitian" if is_hermitian(prob.scheme) else "nonhermitian"
    mo = prob.scheme.moments
    try:
        states = [analytic.assemble(lv, prob.pmap, kind, mo) for lv in levels]
    except analytic.CompatibilityError as exc:
        raise IncompatibleError(str(exc)) from None
    lo, hi = prob.config.domain
    x = np.linspace(lo, hi, samples)
    if lo <= prob.mass.domain.lo:
        x = x[1:]
    if hi >= prob.mass.domain.hi:
        x = x[:-1]
    rres = float(np.max(np.abs(residual(mo, prob.pmap, x))))
    return AnalyticSolution(levels, states, x, rres)


# --- numeric --------------------------------------------------------------------


def _singular(prob: Problem, x: float) -> bool:
    with np.errstate(all="ignore"):
        try:
            mv = float(prob.mass(x))
            vv = float(prob.V(x))
        except (ValueError, ArithmeticError):
            return True
    return not (math.isfinite(mv) and mv > 0 and math.isfinite(vv))


def make_grid(prob: Problem, n: int | None = None, cells: int = numeric.HALF_LINE_OFFSET_CELLS):
    lo, hi = prob.config.domain
    n = n or prob.config.grid
    if _singular(prob, lo):
        return numeric.Grid.half_line(lo, hi, n, cells, "lo"), True
    if _singular(prob, hi):
        return numeric.Grid.half_line(lo, hi, n, cells, "hi"), True
    return numeric.Grid(lo, hi, n), False


def _solve_on(prob: Problem, grid: numeric.Grid, k: int) -> numeric.SpectralResult:
    sch, m, hb = prob.scheme, prob.mass, prob.config.hbar
    meta = {"scheme": sch.label, "mass": getattr(m, "label", "custom"), "potential": prob.potential.label}
    if m.discontinuities:
        t = sch.terms
        if len(t) != 1 or abs(t[0].alpha - t[0].gamma) > 1e-12:
            raise IncompatibleError("masses with jumps need a single symmetric term m^a p m^b p m^a")
        op = numeric.discretize_factored(m, prob.V, t[0].alpha, grid, hb, meta)
        return numeric.eig_lowest(op, k)
    if is_hermitian(sch):
        op = numeric.discretize_hermitian(m, prob.V, effective_potential(sch.moments), grid, hb, meta)
        return numeric.eig_lowest(op, k)
    nh = numeric.discretize_nonhermitian(m, prob.V, sch.moments, grid, hb, meta)
    return numeric.eig_nonhermitian(nh, k)


def solve_numeric(prob: Problem) -> numeric.SpectralResult:
    """Lowest levels with diagnostics.

    With ``extrapolate`` the eigenvalues combine spacings ``h`` and ``h/2``
    (the eigenvectors stay those of the base grid).  Near a singular endpoint
    the grid stops ``10 h`` short, and the shift from halving that offset is
    reported as ``offset_sensitivity``.
    """
    k = prob.config.levels
    grid, offset = make_grid(prob)
    if k >= grid.n_points - 2:
        raise IncompatibleError(f"levels must be below the interior size {grid.n_points - 2}")
    res = _solve_on(prob, grid, k)
    raw = res.eigenvalues.copy()
    if prob.config.extrapolate:
        fine = _solve_on(prob, grid.refined(), k)
        res.eigenvalues = numeric.richardson(raw, fine.eigenvalues)
    numeric.diagnostics(res, prob.mass, prob.config.hbar)
    res.diagnostics["raw_eigenvalues"] = raw.tolist()
    res.diagnostics["reliable"] = res.reliable
    if offset:
        half, _ = make_grid(prob, cells=numeric.HALF_LINE_OFFSET_CELLS // 2)
        alt = _solve_on(prob, half, k).eigenvalues
        res.diagnostics["offset_sensitivity"] = float(np.max(np.abs(alt / raw - 1.0)))
    res.meta.update(grid={"lo": grid.lo, "hi": grid.hi, "n": grid.n_points, "h": grid.h})
    return res


# --- verify ---------------------------------------------------------------------


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("PDMX_THREADS", "0")) or (os.cpu_count() or 1))
    except ValueError:
        return 1


def verify(config: RunConfig, schemes: list[str], rel_tol: float = 1e-4) -> dict:
    """Solve the configuration under each scheme and compare spectra.

    Every scheme is compared with the closed-form levels (when the potential
    has them) and with the first scheme.
    """
    parsed = []
    for s in schemes:
        try:
            parsed.append(parse_scheme(s))
        except OrderingError as exc:
            raise ConfigError(f"scheme {s!r}: {exc}") from None
    probs = [build(replace(config, scheme=s), sch) for s, sch in zip(schemes, parsed)]
    with ThreadPoolExecutor(max_workers=min(thread_cap(), len(probs))) as pool:
        results = list(pool.map(solve_numeric, probs))
    k = config.levels
    exact = None
    if not isinstance(probs[0].potential, analytic.CustomU):
        exact = np.array([lv.energy for lv in analytic.levels(probs[0].potential, k - 1)])
    rows = []
    for name, res in zip(schemes, results):
        row = {"scheme": name, "eigenvalues": res.eigenvalues.tolist()}
        if exact is not None:
            row["vs_analytic"] = numeric.spectrum_compare(res, exact, k, rel_tol).as_dict()
        row["vs_first"] = numeric.spectrum_compare(res, results[0], k, rel_tol).as_dict()
        rows.append(row)
    passed = all(r["vs_first"]["pass"] and r.get("vs_analytic", {"pass": True})["pass"] for r in rows)
    return {"config": config.as_dict(), "schemes": rows, "analytic": None if exact is None else exact.tolist(),
            "pass": passed}
