"""Mass profiles, the coordinate map g = int sqrt(m) dx, and admissible mass classes."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize

from .ordering import OrderingMoments
from .quadrature import QuadratureError, cumulative

INF = math.inf
POSITIVITY_SAMPLES = 1024
CLASS_TOL = 1e-12


class DomainError(ValueError):
    pass


class PositivityError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class DomainInterval:
    lo: float = -INF
    hi: float = INF

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"empty interval ({self.lo}, {self.hi})")

    @property
    def is_full_line(self):
        return self.lo == -INF and self.hi == INF

    @property
    def is_finite(self):
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def boundary_kinds(self):
        kind = lambda v: "dirichlet" if math.isfinite(v) else "decay"
        return kind(self.lo), kind(self.hi)

    def contains(self, x):
        x = np.asarray(x)
        return (x >= self.lo) & (x <= self.hi)

    def sample(self, n=POSITIVITY_SAMPLES):
        """``n`` points strictly inside the interval (tangent-mapped when unbounded)."""
        t = (np.arange(n) + 0.5) / n
        if self.is_finite:
            return self.lo + (self.hi - self.lo) * t
        if self.lo == -INF and self.hi == INF:
            return np.tan(np.pi * (t - 0.5))
        if self.lo == -INF:
            return self.hi - (1.0 - t) / t
        return self.lo + t / (1.0 - t)

    def __str__(self):
        return f"({self.lo:g}, {self.hi:g})"


def full_line():
    return DomainInterval(-INF, INF)


class MassModel:
    """Base class; subclasses implement :meth:`_eval`, returning ``(m, m', m'')``."""

    domain: DomainInterval
    discontinuities: tuple = ()

    def _post(self):
        xs = self.domain.sample()
        m = np.asarray(self._eval(xs)[0])
        bad = ~(m > 0) | ~np.isfinite(m)
        if bad.any():
            i = int(np.argmax(bad))
            raise PositivityError(f"mass not positive on {self.domain}: m({xs[i]:.6g}) = {m[i]}")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return self._eval(x)

    def __call__(self, x):
        return self.evaluate(x)[0]

    def limits(self, xd):
        """One-sided mass values at ``xd`` (equal unless ``xd`` is a jump)."""
        d = 1e-12 * max(1.0, abs(xd))
        return float(self(xd - d)), float(self(xd + d))

    @property
    def kind(self):
        return type(self).__name__


@dataclass(frozen=True)
class ConstantMass(MassModel):
    m0: float = 1.0
    domain: DomainInterval = field(default_factory=full_line)

    def __post_init__(self):
        if not self.m0 > 0:
            raise PositivityError(f"constant mass must be positive, got {self.m0}")

    def _eval(self, x):
        one = np.ones_like(x, dtype=float)
        return self.m0 * one, 0.0 * one, 0.0 * one

    @property
    def label(self):
        return f"const:m0={self.m0:g}"


@dataclass(frozen=True)
class ExponentialMass(MassModel):
    """``m = a1 exp(a2 x)``."""

    a1: float = 1.0
    a2: float = 1.0
    domain: DomainInterval = field(default_factory=full_line)

    def __post_init__(self):
        if not self.a1 > 0:
            raise PositivityError(f"exponential mass needs a1 > 0, got {self.a1}")

    def _eval(self, x):
        m = self.a1 * np.exp(self.a2 * x)
        return m, self.a2 * m, self.a2 ** 2 * m

    @property
    def label(self):
        return f"exp:a1={self.a1:g},a2={self.a2:g}"


@dataclass(frozen=True)
class PowerLawMass(MassModel):
    """``m = (b1 x + b2)^C`` on the side where ``b1 x + b2 > 0``."""

    b1: float = 1.0
    b2: float = 0.0
    C: float = 2.0
    domain: DomainInterval | None = None

    def __post_init__(self):
        if self.b1 == 0:
            raise PositivityError("power-law mass needs b1 != 0")
        root = -self.b2 / self.b1
        natural = DomainInterval(root, INF) if self.b1 > 0 else DomainInterval(-INF, root)
        if self.domain is None:
            object.__setattr__(self, "domain", natural)
        elif self.domain.lo < natural.lo or self.domain.hi > natural.hi:
            raise PositivityError(
                f"b1*x + b2 must stay positive: domain {self.domain} exceeds {natural}"
            )

    def _eval(self, x):
        u = self.b1 * x + self.b2
        C, b1 = self.C, self.b1
        with np.errstate(all="ignore"):
            m = u ** C
            return m, C * b1 * u ** (C - 1.0), C * (C - 1.0) * b1 ** 2 * u ** (C - 2.0)

    @property
    def label(self):
        return f"powerlaw:b1={self.b1:g},b2={self.b2:g},C={self.C:g}"


@dataclass(frozen=True)
class CustomMass(MassModel):
    """User-supplied ``m(x)``; ``d1``/``d2`` are optional analytic derivatives.

    Without them, ``m'`` uses central differences with step
    ``max(1e-6, 1e-6|x|)`` and ``m''`` with ``max(1e-4, 1e-4|x|)``.
    ``discontinuities`` lists isolated jump points.
    """

    func: Callable = None
    d1: Callable | None = None
    d2: Callable | None = None
    domain: DomainInterval = field(default_factory=full_line)
    name: str = "custom"
    discontinuities: tuple = ()

    def __post_init__(self):
        if self.func is None:
            raise ValueError("CustomMass needs a mass function")
        object.__setattr__(self, "discontinuities", tuple(float(v) for v in self.discontinuities))
        self._post()

    def _f(self, x):
        return np.asarray(self.func(x), dtype=float) * np.ones_like(x, dtype=float)

    def _eval(self, x):
        m = self._f(x)
        ax = np.abs(x)
        if self.d1 is not None:
            dm = np.asarray(self.d1(x), dtype=float) * np.ones_like(m)
        else:
            h = np.maximum(1e-6, 1e-6 * ax)
            dm = (self._f(x + h) - self._f(x - h)) / (2 * h)
        if self.d2 is not None:
            d2m = np.asarray(self.d2(x), dtype=float) * np.ones_like(m)
        else:
            h = np.maximum(1e-4, 1e-4 * ax)
            d2m = (self._f(x + h) - 2 * m + self._f(x - h)) / h ** 2
        return m, dm, d2m

    @property
    def label(self):
        return self.name


def custom_from_expr(text: str, domain: DomainInterval | None = None, discontinuities=()) -> CustomMass:
    from . import expr

    node = expr.parse(text)
    d1 = node.diff()
    return CustomMass(
        func=node,
        d1=d1,
        d2=d1.diff(),
        domain=domain or full_line(),
        name=f"custom:{text}",
        discontinuities=discontinuities,
    )


def mass_eval(m: MassModel, x):
    """``(m, m', m'')`` at ``x``; raises for points outside the domain or nonpositive mass."""
    xa = np.asarray(x, dtype=float)
    if not np.all(m.domain.contains(xa)):
        raise DomainError(f"x outside mass domain {m.domain}")
    mv, d1, d2 = m.evaluate(xa)
    if not np.all(np.asarray(mv) > 0):
        raise PositivityError(f"nonpositive mass at x in {np.atleast_1d(xa)[~(np.atleast_1d(mv) > 0)][:3]}")
    if np.ndim(x) == 0:
        return float(mv), float(d1), float(d2)
    return mv, d1, d2


# --- coordinate map --------------------------------------------------------


@dataclass(frozen=True)
class PCTMap:
    """The coordinate map ``g(x) = g0 + int_{x0}^{x} sqrt(m)`` and its inverse."""

    mass: MassModel
    g: Callable
    inverse: Callable
    image: DomainInterval
    x0: float | None
    g0: float

    def __call__(self, x):
        return self.g(x)

    def derivatives(self, x):
        """``(g', g'', g''')`` from the mass and its first two derivatives."""
        m, dm, d2m = self.mass.evaluate(x)
        s = np.sqrt(m)
        return s, dm / (2 * s), d2m / (2 * s) - dm ** 2 / (4 * m * s)

    def gprime(self, x):
        return np.sqrt(self.mass(x))

    def gsecond(self, x):
        return self.derivatives(x)[1]

    def gthird(self, x):
        return self.derivatives(x)[2]


def pct_map(m: MassModel, x0: float | None = None, g0: float = 0.0, rtol: float = 1e-10) -> PCTMap:
    """Build the map for ``m``.

    Catalog masses use closed-form antiderivatives; with ``x0=None`` the
    natural antiderivative is shifted by ``g0``, otherwise ``g(x0) = g0``.
    Custom masses integrate ``sqrt(m)`` from ``x0`` (default 0, or the domain
    midpoint when 0 is outside) by adaptive Simpson to ``rtol``.
    """
    if isinstance(m, ConstantMass):
        return _constant_map(m, x0, g0)
    if isinstance(m, ExponentialMass):
        return _exponential_map(m, x0, g0)
    if isinstance(m, PowerLawMass):
        return _powerlaw_map(m, x0, g0)
    return _custom_map(m, x0, g0, rtol)


def _closed_map(m, G, Ginv, x0, g0):
    off = g0 if x0 is None else g0 - float(G(np.asarray(x0, dtype=float)))
    with np.errstate(all="ignore"):
        ends = G(np.array([m.domain.lo, m.domain.hi], dtype=float)) + off
    image = DomainInterval(float(np.min(ends)), float(np.max(ends)))
    return PCTMap(
        mass=m,
        g=lambda x: G(np.asarray(x, dtype=float)) + off,
        inverse=lambda g: Ginv(np.asarray(g, dtype=float) - off),
        image=image,
        x0=x0,
        g0=g0,
    )


def _constant_map(m, x0, g0):
    s = math.sqrt(m.m0)
    return _closed_map(m, lambda x: s * x, lambda g: g / s, x0, g0)


def _exponential_map(m, x0, g0):
    if m.a2 == 0:
        s = math.sqrt(m.a1)
        return _closed_map(m, lambda x: s * x, lambda g: g / s, x0, g0)
    k = 2.0 * math.sqrt(m.a1) / m.a2
    return _closed_map(
        m,
        lambda x: k * np.exp(0.5 * m.a2 * x),
        lambda g: 2.0 / m.a2 * np.log(g / k),
        x0,
        g0,
    )


def _powerlaw_map(m, x0, g0):
    b1, b2, p = m.b1, m.b2, m.C / 2.0 + 1.0
    if p == 0.0:
        G = lambda x: np.log(b1 * x + b2) / b1
        Ginv = lambda g: (np.exp(b1 * g) - b2) / b1
    else:
        G = lambda x: np.power(np.maximum(b1 * x + b2, 0.0), p) / (b1 * p)
        Ginv = lambda g: (np.power(b1 * p * g, 1.0 / p) - b2) / b1
    return _closed_map(m, G, Ginv, x0, g0)


def _tail_converges(sqrtm, end):
    # sqrt(m) must decay faster than 1/|x| for a finite image endpoint
    s = np.sign(end)
    a, b = float(sqrtm(s * 1e6)), float(sqrtm(s * 1e8))
    if a <= 0 or b <= 0:
        return True
    return math.log(b / a) / math.log(100.0) < -1.05


def _custom_map(m, x0, g0, rtol):
    dom = m.domain
    if x0 is None:
        x0 = 0.0 if dom.lo < 0.0 < dom.hi else (0.5 * (dom.lo + dom.hi) if dom.is_finite else None)
        if x0 is None:
            x0 = dom.lo + 1.0 if math.isfinite(dom.lo) else dom.hi - 1.0
    sqrtm = lambda t: np.sqrt(m(t))

    def g(x):
        try:
            return g0 + cumulative(sqrtm, x0, x, rtol=rtol)
        except QuadratureError as exc:
            raise NumericError(str(exc)) from exc

    ends = []
    for end in (dom.lo, dom.hi):
        if math.isfinite(end):
            try:
                ends.append(float(g(end)))
            except NumericError:
                ends.append(_open_limit(sqrtm, x0, end, g0, rtol))
        elif _tail_converges(sqrtm, end):
            val, _ = integrate.quad(sqrtm, x0, end, epsrel=rtol, limit=200)
            ends.append(g0 + val)
        else:
            ends.append(end)
    image = DomainInterval(ends[0], ends[1])

    def inverse_scalar(target):
        if not (image.lo <= target <= image.hi):
            raise DomainError(f"g = {target} outside image {image}")
        F = lambda x: float(g(x)) - target
        lo, hi = _bracket(F, x0, dom)
        return optimize.brentq(F, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)

    inv = np.vectorize(inverse_scalar, otypes=[float])
    return PCTMap(mass=m, g=g, inverse=inv, image=image, x0=x0, g0=g0)


def _open_limit(sqrtm, x0, end, g0, rtol):
    # the integrand may be singular at an open endpoint; quad never samples it
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        with np.errstate(all="ignore"):
            val, _ = integrate.quad(lambda t: float(sqrtm(t)), x0, end, epsrel=rtol, limit=200)
    return g0 + val if math.isfinite(val) else math.copysign(INF, end - x0)


def _bracket(F, x0, dom):
    f0 = F(x0)
    if f0 == 0:
        return x0, x0
    step = 1.0
    direction = 1.0 if f0 < 0 else -1.0  # g increasing
    a = x0
    for _ in range(200):
        b = a + direction * step
        if direction > 0 and b > dom.hi:
            b = dom.hi
        if direction < 0 and b < dom.lo:
            b = dom.lo
        fb = F(b)
        if np.sign(fb) != np.sign(f0):
            return (a, b) if a < b else (b, a)
        if b in (dom.lo, dom.hi):
            break
        a, step = b, step * 2.0
    raise NumericError("could not bracket the inverse map")


# --- reduction residual and mass classes -----------------------------------


def residual(mo: OrderingMoments, pmap: PCTMap, x):
    """``A g'''/g'^3 - B g''^2/g'^4`` at ``x``; zero means the reduction to constant mass is exact."""
    x = np.asarray(x, dtype=float)
    if not np.all(pmap.mass.domain.contains(x)):
        raise DomainError(f"x outside mass domain {pmap.mass.domain}")
    g1, g2, g3 = pmap.derivatives(x)
    out = mo.A * g3 / g1 ** 3 - mo.B * g2 ** 2 / g1 ** 4
    if not np.all(np.isfinite(out)):
        raise NumericError("map derivatives not finite")
    return float(out) if out.ndim == 0 else out


class Admissibility(NamedTuple):
    admissible: bool
    r: float


def class_coefficient(mo: OrderingMoments, s: float) -> float:
    """Coefficient r(s) with residual = r(s) (g + C1)^-2 when g' = C2 (g + C1)^s."""
    return mo.A * s * (2.0 * s - 1.0) - mo.B * s * s


def admissibility(mo: OrderingMoments, s: float, tol: float = CLASS_TOL) -> Admissibility:
    r = class_coefficient(mo, s)
    return Admissibility(abs(r) <= tol, r)


def admissible_exponent(mo: OrderingMoments) -> float | None:
    """Nonzero root of r(s); None when every s works (A = B = 0) or none does."""
    denom = 2.0 * mo.A - mo.B
    if abs(denom) <= CLASS_TOL:
        return None
    return mo.A / denom


def mass_class(s: float, C1: float = 0.0, C2: float = 1.0, C3: float = 1.0,
               domain: DomainInterval | None = None) -> tuple[MassModel, PCTMap]:
    """Mass and map of the class ``g' = C2 (g + C1)^s``.

    ``s = 1`` gives ``m = C3^2 C2^2 exp(2 C2 x)``; ``s = 0`` a constant mass
    ``C2^2``; any other ``s`` the power law ``(b1 x + b2)^C`` with
    ``C = 2s/(1-s)``, ``b1 = (1-s) C2^(1/s)``, ``b2 = (1-s) C2^((1-s)/s) C3``.
    """
    if not C2 > 0:
        raise PositivityError("class constants need C2 > 0")
    if s == 1.0:
        if not C3 > 0:
            raise PositivityError("s = 1 needs C3 > 0 for an increasing map")
        m = ExponentialMass(a1=(C3 * C2) ** 2, a2=2.0 * C2, domain=domain or full_line())
        return m, pct_map(m, g0=-C1)
    if s == 0.0:
        m = ConstantMass(C2 ** 2, domain=domain or full_line())
        return m, pct_map(m, g0=C3 - C1)
    b1 = (1.0 - s) * C2 ** (1.0 / s)
    b2 = (1.0 - s) * C2 ** ((1.0 - s) / s) * C3
    m = PowerLawMass(b1=b1, b2=b2, C=2.0 * s / (1.0 - s), domain=domain)
    return m, pct_map(m, g0=-C1)


def class_parameters(m: MassModel, pmap: PCTMap) -> tuple[float, float, float, float]:
    """Recover ``(s, C1, C2, C3)`` from a mass-class model and its map."""
    if isinstance(m, ExponentialMass):
        C2 = m.a2 / 2.0
        C3 = math.sqrt(m.a1) / C2
        k = 2.0 * math.sqrt(m.a1) / m.a2  # natural antiderivative prefactor (= C3)
        C1 = -(float(pmap(0.0)) - k)
        return 1.0, C1, C2, C3
    if isinstance(m, ConstantMass):
        C2 = math.sqrt(m.m0)
        return 0.0, 0.0, C2, float(pmap(0.0))
    if isinstance(m, PowerLawMass):
        s = m.C / (m.C + 2.0)
        C2 = (m.b1 / (1.0 - s)) ** s
        C3 = m.b2 / ((1.0 - s) * C2 ** ((1.0 - s) / s))
        x = float(m.domain.sample(3)[1])
        nat = (1.0 - s) * (C2 * x + C3)
        C1 = nat ** (1.0 / (1.0 - s)) - float(pmap(x))
        return s, C1, C2, C3
    raise ValueError("only catalog masses belong to a mass class")
