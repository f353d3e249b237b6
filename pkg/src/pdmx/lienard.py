"""Quadratic Lienard systems x'' + f(x) x'^2 + h(x) = 0 as position-dependent-mass problems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr
from .massmap import CustomMass, DomainInterval, MassModel, NumericError, PCTMap, pct_map
from .quadrature import QuadratureError, cumulative

FIT_TOL = 1e-6
DEFAULT_WINDOW = 10.0


@dataclass(frozen=True)
class LienardSystem:
    f: Callable
    h: Callable
    domain: DomainInterval
    f_prime: Callable | None = None
    h_prime: Callable | None = None
    f_text: str | None = None
    h_text: str | None = None


def from_exprs(f_text: str, h_text: str, domain: DomainInterval) -> LienardSystem:
    f, h = expr.parse(f_text), expr.parse(h_text)
    return LienardSystem(f, h, domain, f.diff(), h.diff(), f_text, h_text)


def _derivative(func, x, step=1e-3):
    # five-point central stencil
    x = np.asarray(x, dtype=float)
    s = step * np.maximum(1.0, np.abs(x))
    return (func(x - 2 * s) - 8 * func(x - s) + 8 * func(x + s) - func(x + 2 * s)) / (12 * s)


@dataclass
class LienardDerived:
    mass: MassModel
    V: Callable = field(repr=False)
    pmap: PCTMap = field(repr=False)
    F: Callable | None = field(default=None, repr=False)
    x0: float = 0.0


def build(sys: LienardSystem, x0: float = 0.0, g0: float = 0.0, rtol: float = 1e-10) -> LienardDerived:
    """Mass ``m = exp(2 F)`` with ``F = int_{x0} f``, map ``g = g0 + int_{x0} exp(F)``
    and potential ``V = int_{x0} m h`` (zero at ``x0``)."""
    dom = sys.domain
    if not dom.contains(x0):
        raise ValueError(f"x0 = {x0} outside the domain {dom}")

    def _cum(func, x):
        try:
            return cumulative(func, x0, x, rtol=rtol, atol=1e-15)
        except QuadratureError as exc:
            raise NumericError(f"quadrature failed: {exc}") from exc

    def F(x):
        return _cum(sys.f, x)

    def m(x):
        return np.exp(2.0 * F(x))

    fp = sys.f_prime or (lambda x: _derivative(sys.f, x))

    def d1(x):
        return 2.0 * np.asarray(sys.f(x)) * m(x)

    def d2(x):
        fx = np.asarray(sys.f(x))
        return (2.0 * np.asarray(fp(x)) + 4.0 * fx * fx) * m(x)

    label = f"lienard:f={sys.f_text}" if sys.f_text else "lienard"
    mass = CustomMass(func=m, d1=d1, d2=d2, domain=dom, name=label)
    pmap = pct_map(mass, x0=x0, g0=g0, rtol=rtol)

    def V(x):
        return _cum(lambda t: m(t) * np.asarray(sys.h(t)), x)

    return LienardDerived(mass, V, pmap, F, x0)


def derive(mass: MassModel, V: Callable, x0: float | None = None, g0: float = 0.0) -> LienardDerived:
    """Wrap an existing mass and potential for :func:`classify`."""
    return LienardDerived(mass, V, pct_map(mass, x0=x0, g0=g0), None, x0 if x0 is not None else 0.0)


@dataclass
class Isochronicity:
    family: str
    residual: Callable = field(repr=False)
    max_residual: float


def isochronicity_check(sys: LienardSystem, family: str, params: dict,
                        derived: LienardDerived | None = None, samples: int = 1000,
                        x0: float = 0.0) -> Isochronicity:
    """Residual of ``h' + f h - 2 lambda1`` (``eight_param``) or of
    ``h' + f h - 2 lambda1 - (3/2) lambda3 g^-4`` (``three_param``)."""
    hp = sys.h_prime or (lambda x: _derivative(sys.h, x))
    lam1 = float(params["lambda1"])
    if family == "eight_param":
        def residual(x):
            return np.asarray(hp(x)) + np.asarray(sys.f(x)) * np.asarray(sys.h(x)) - 2.0 * lam1
    elif family == "three_param":
        lam3 = float(params["lambda3"])
        d = derived or build(sys, x0)

        def residual(x):
            g = d.pmap.g(x)
            return (np.asarray(hp(x)) + np.asarray(sys.f(x)) * np.asarray(sys.h(x))
                    - 2.0 * lam1 - 1.5 * lam3 / g ** 4)
    else:
        raise ValueError(f"unknown family {family!r}; use eight_param or three_param")
    x = _window(sys.domain, samples)
    r = residual(x)
    if family == "three_param":
        r = r[np.isfinite(r)]
    return Isochronicity(family, residual, float(np.max(np.abs(r))))


def _window(dom: DomainInterval, n: int, window=None):
    lo, hi = window if window is not None else (dom.lo, dom.hi)
    lo = max(lo, dom.lo) if math.isfinite(lo) else -DEFAULT_WINDOW
    hi = min(hi, dom.hi) if math.isfinite(hi) else (lo + 2 * DEFAULT_WINDOW if lo > -DEFAULT_WINDOW else DEFAULT_WINDOW)
    return np.linspace(lo, hi, n + 2)[1:-1]


@dataclass
class Classification:
    family: str  # "V1", "V2" or "generic"
    params: dict
    constant: float
    fit_residual: dict

    def as_dict(self):
        return {"family": self.family, "params": self.params, "constant": self.constant,
                "fit_residual": self.fit_residual}


def _fit(columns, V):
    A = np.column_stack(columns)
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    coef, *_ = np.linalg.lstsq(A / norms, V, rcond=None)
    coef = coef / norms
    resid = float(np.max(np.abs(A @ coef - V)))
    return coef, resid


def classify(derived: LienardDerived, samples: int = 400, window=None, tol: float = FIT_TOL) -> Classification:
    """Least-squares fit of ``V`` on ``{g^2, g, 1}`` (V1) and ``{g^-2, g^2, 1}`` (V2).

    V1 reads ``lambda1 g^2 + 2 lambda2 g + c`` and V2 ``lambda3/(4 g^2) + lambda1 g^2 + c``.
    A family is accepted when its max fit error is within ``tol * max|V|``;
    V1 wins ties.
    """
    x = _window(derived.mass.domain, samples, window)
    g = np.asarray(derived.pmap.g(x), dtype=float)
    V = np.asarray(derived.V(x), dtype=float)
    scale = max(float(np.max(np.abs(V))), np.finfo(float).tiny)
    one = np.ones_like(g)
    c1, r1 = _fit([g * g, g, one], V)
    ok = np.abs(g) > 1e-12
    with np.errstate(divide="ignore"):
        c2, r2 = _fit([1.0 / g[ok] ** 2, g[ok] ** 2, one[ok]], V[ok])
    fit = {"V1": r1 / scale, "V2": r2 / scale}
    if fit["V1"] <= tol:
        return Classification("V1", {"lambda1": float(c1[0]), "lambda2": float(c1[1] / 2.0)}, float(c1[2]), fit)
    if fit["V2"] <= tol:
        return Classification("V2", {"lambda1": float(c2[1]), "lambda3": float(4.0 * c2[0])}, float(c2[2]), fit)
    return Classification("generic", {}, 0.0, fit)


def mass_parameters(sys: LienardSystem, x0: float = 0.0, samples: int = 200) -> dict | None:
    """Catalog parameters when ``f`` is constant: ``m = exp(2 k (x - x0))``."""
    x = _window(sys.domain, samples)
    fx = np.asarray(sys.f(x), dtype=float) * np.ones_like(x)
    k = float(fx[0])
    if np.max(np.abs(fx - k)) > 1e-12 * max(1.0, abs(k)):
        return None
    if k == 0.0:
        return {"kind": "const", "m0": 1.0}
    return {"kind": "exp", "a1": math.exp(-2.0 * k * x0), "a2": 2.0 * k}
