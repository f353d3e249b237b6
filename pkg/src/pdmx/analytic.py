"""Exact constant-mass spectra (shifted harmonic, isotonic) and PDM eigenfunction assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .massmap import DomainInterval, PCTMap
from .ordering import OrderingMoments

IMAGE_TOL = 1e-12


class SpectrumError(ValueError):
    pass


class CompatibilityError(ValueError):
    pass


# --- special functions -----------------------------------------------------


def hermite(n: int, y):
    """Physicists' Hermite polynomial H_n(y) by the three-term recurrence."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    y = np.asarray(y, dtype=float)
    prev, cur = np.ones_like(y), 2.0 * y
    if n == 0:
        return _out(prev, y)
    for k in range(1, n):
        prev, cur = cur, 2.0 * y * cur - 2.0 * k * prev
    return _out(cur, y)


def laguerre(n: int, a: float, y):
    """Associated Laguerre polynomial L_n^a(y) by the three-term recurrence."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if not a > -1:
        raise ValueError("Laguerre order must exceed -1")
    y = np.asarray(y, dtype=float)
    prev, cur = np.ones_like(y), 1.0 + a - y
    if n == 0:
        return _out(prev, y)
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + a - y) * cur - (k + a) * prev) / (k + 1)
    return _out(cur, y)


def _out(v, y):
    return float(v) if y.ndim == 0 else v


# --- potentials -----------------------------------------------------------


@dataclass(frozen=True)
class ShiftedHarmonic:
    """``U(g) = lambda1 g^2 + 2 lambda2 g``."""

    lambda1: float
    lambda2: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise SpectrumError(f"shifted harmonic needs lambda1 > 0, got {self.lambda1}")
        if not self.hbar > 0:
            raise SpectrumError("hbar must be positive")

    def U(self, g):
        g = np.asarray(g, dtype=float)
        return self.lambda1 * g * g + 2.0 * self.lambda2 * g

    @property
    def label(self):
        return f"harmonic:lambda1={self.lambda1:g},lambda2={self.lambda2:g}"


@dataclass(frozen=True)
class Isotonic:
    """``U(g) = lambda3 / (4 g^2) + lambda1 g^2`` on ``g > 0``.

    ``l_convention`` selects the angular index: ``"consistent"`` solves
    ``l(l+1) = lambda3 / (2 hbar^2)``, the value that makes the closed-form
    states satisfy the differential equation; ``"printed"`` uses
    ``l = (sqrt(1 + 2 sqrt(2 lambda3) / hbar^2) - 1) / 2``, which agrees only
    when ``lambda3 = 2``.
    """

    lambda1: float
    lambda3: float
    hbar: float = 1.0
    l_convention: str = "consistent"

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise SpectrumError(f"isotonic needs lambda1 > 0, got {self.lambda1}")
        if not self.lambda3 > 0:
            raise SpectrumError(f"isotonic needs lambda3 > 0, got {self.lambda3}")
        if not self.hbar > 0:
            raise SpectrumError("hbar must be positive")
        if self.l_convention not in ("consistent", "printed"):
            raise ValueError(f"unknown l convention {self.l_convention!r}")

    def U(self, g):
        g = np.asarray(g, dtype=float)
        with np.errstate(divide="ignore"):
            return self.lambda3 / (4.0 * g * g) + self.lambda1 * g * g

    @property
    def l(self) -> float:
        h2 = self.hbar ** 2
        if self.l_convention == "printed":
            return 0.5 * math.sqrt(1.0 + 2.0 * math.sqrt(2.0 * self.lambda3) / h2) - 0.5
        return 0.5 * math.sqrt(1.0 + 2.0 * self.lambda3 / h2) - 0.5

    @property
    def label(self):
        return f"isotonic:lambda1={self.lambda1:g},lambda3={self.lambda3:g}"


@dataclass(frozen=True)
class CustomU:
    """Arbitrary ``U(g)``; solved only numerically."""

    func: Callable
    hbar: float = 1.0
    name: str = "custom"

    def U(self, g):
        return np.asarray(self.func(np.asarray(g, dtype=float)), dtype=float)

    @property
    def label(self):
        return self.name


# --- levels ---------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticLevel:
    n: int
    energy: float
    phi: Callable = field(repr=False)
    norm_const: float
    l: float | None = None
    half_line: bool = False
    l_plus_half_integer: bool | None = None

    def to_row(self) -> dict:
        row = {"n": self.n, "energy": self.energy, "norm_const": self.norm_const}
        if self.l is not None:
            row["l"] = self.l
        return row


def harmonic_norm(spec: ShiftedHarmonic, n: int) -> float:
    """Closed-form N_n for the shifted harmonic states."""
    return math.exp(_harmonic_log_norm(spec, n))


def _harmonic_log_norm(spec, n):
    l1, l2, hb = spec.lambda1, spec.lambda2, spec.hbar
    return 0.5 * (
        -(l2 * l2) / (hb * l1) * math.sqrt(2.0 / l1)
        + 0.25 * math.log(2.0 * l1)
        - 0.5 * math.log(hb * math.pi)
        - n * math.log(2.0)
        - gammaln(n + 1)
    )


def harmonic_phi_unnormalized(spec: ShiftedHarmonic, n: int) -> Callable:
    l1, l2, hb = spec.lambda1, spec.lambda2, spec.hbar
    scale = math.sqrt(math.sqrt(2.0 * l1) / hb)
    shift = l2 / l1
    width = hb * math.sqrt(2.0 * l1)

    def phi(g, log_norm=0.0):
        g = np.asarray(g, dtype=float)
        expo = log_norm - (l1 * g * g + 2.0 * l2 * g) / width
        return np.exp(expo) * hermite(n, scale * (g + shift))

    return phi


def harmonic_levels(spec: ShiftedHarmonic, n_max: int) -> list[AnalyticLevel]:
    """Levels ``0..n_max``: ``E_n = (2n+1) hbar sqrt(lambda1/2) - lambda2^2/lambda1``."""
    l1, l2, hb = spec.lambda1, spec.lambda2, spec.hbar
    out = []
    for n in range(n_max + 1):
        log_n = _harmonic_log_norm(spec, n)
        base = harmonic_phi_unnormalized(spec, n)
        out.append(
            AnalyticLevel(
                n=n,
                energy=(2 * n + 1) * hb * math.sqrt(l1 / 2.0) - l2 * l2 / l1,
                phi=lambda g, base=base, log_n=log_n: base(g, log_n),
                norm_const=math.exp(log_n),
            )
        )
    return out


def isotonic_norm(spec: Isotonic, n: int) -> float:
    return math.exp(_isotonic_log_norm(spec, n))


def _isotonic_log_norm(spec, n):
    kappa = math.sqrt(2.0 * spec.lambda1) / spec.hbar
    l = spec.l
    return 0.5 * (math.log(2.0) + (l + 1.5) * math.log(kappa) + gammaln(n + 1) - gammaln(n + l + 1.5))


def isotonic_levels(spec: Isotonic, n_max: int, parity: int = 1) -> list[AnalyticLevel]:
    """Levels ``0..n_max`` with ``E_n = 2 hbar sqrt(2 lambda1) (n + l/2 + 3/4)``.

    ``phi`` lives on ``g > 0``; negative ``g`` gets the mirror image times
    ``parity``.
    """
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    l = spec.l
    kappa = math.sqrt(2.0 * spec.lambda1) / spec.hbar
    half_int = abs((l + 0.5) - round(l + 0.5)) < 1e-9
    out = []
    for n in range(n_max + 1):
        log_n = _isotonic_log_norm(spec, n)

        def phi(g, n=n, log_n=log_n):
            g = np.asarray(g, dtype=float)
            a = np.abs(g)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.exp(log_n - 0.5 * kappa * a * a + (l + 1.0) * np.log(a)) * laguerre(n, l + 0.5, kappa * a * a)
            val = np.where(a > 0, val, 0.0)
            val = np.where(g < 0, parity * val, val)
            return float(val) if val.ndim == 0 else val

        out.append(
            AnalyticLevel(
                n=n,
                energy=2.0 * spec.hbar * math.sqrt(2.0 * spec.lambda1) * (n + 0.5 * l + 0.75),
                phi=phi,
                norm_const=math.exp(log_n),
                l=l,
                half_line=True,
                l_plus_half_integer=half_int,
            )
        )
    return out


def levels(spec, n_max: int, **kw) -> list[AnalyticLevel]:
    if isinstance(spec, ShiftedHarmonic):
        return harmonic_levels(spec, n_max)
    if isinstance(spec, Isotonic):
        return isotonic_levels(spec, n_max, **kw)
    raise SpectrumError("custom potentials have no closed-form levels; use the numeric solver")


def constant_mass_residual(level: AnalyticLevel, spec, g, step: float = 1e-3) -> float:
    """``max |phi'' + (2/hbar^2)(E - U) phi| / max |phi|`` over the sample ``g``.

    ``phi''`` uses the fourth-order five-point stencil.
    """
    g = np.asarray(g, dtype=float)
    phi = level.phi
    p0 = phi(g)
    d2 = (-phi(g + 2 * step) + 16.0 * phi(g + step) - 30.0 * p0
          + 16.0 * phi(g - step) - phi(g - 2 * step)) / (12.0 * step ** 2)
    res = d2 + 2.0 / spec.hbar ** 2 * (level.energy - spec.U(g)) * p0
    return float(np.max(np.abs(res)) / np.max(np.abs(p0)))


# --- PDM eigenfunctions ----------------------------------------------------


@dataclass(frozen=True)
class PDMEigenfunction:
    """``psi(x) = m(x)^prefactor_exponent * phi(g(x))``, normalized against ``m^weight_exponent``."""

    n: int
    kind: str
    psi: Callable = field(repr=False)
    prefactor_exponent: float
    weight_exponent: float
    eta: float = 0.0
    pmap: PCTMap | None = field(default=None, repr=False)

    def weight(self, x):
        return np.asarray(self.pmap.mass(x)) ** self.weight_exponent

    def sample(self, x) -> dict:
        x = np.asarray(x, dtype=float)
        return {"x": x, "g": self.pmap(x), "psi": self.psi(x), "weight": self.weight(x)}


def _check_image(level: AnalyticLevel, image: DomainInterval) -> float:
    """Return the rescale factor needed to keep the assembled state normalized."""
    if not level.half_line:
        if not image.is_full_line:
            raise CompatibilityError(f"harmonic level needs a full-line image, map image is {image}")
        return 1.0
    if image.is_full_line:
        return 1.0 / math.sqrt(2.0)  # parity extension doubles the norm
    if abs(image.lo) <= IMAGE_TOL and image.hi == math.inf:
        return 1.0
    if image.lo == -math.inf and abs(image.hi) <= IMAGE_TOL:
        return 1.0
    raise CompatibilityError(f"isotonic level needs image (0, inf) or the full line, map image is {image}")


def assemble(level: AnalyticLevel, pmap: PCTMap, kind: str = "hermitian",
             moments: OrderingMoments | None = None) -> PDMEigenfunction:
    """Lift a constant-mass level to a PDM eigenfunction.

    hermitian: prefactor ``m^(1/4)``; nonhermitian: ``m^((abar-gbar)/2 + 1/4)``
    with weight ``m^(2 eta)``; dual: ``m^(eta + 1/4)`` with weight ``m^(-2 eta)``.
    """
    if kind == "hermitian":
        p, w, eta = 0.25, 0.0, 0.0
    elif kind in ("nonhermitian", "dual"):
        if moments is None:
            raise ValueError(f"{kind} eigenfunctions need ordering moments")
        eta = moments.eta
        if kind == "nonhermitian":
            p, w = 0.5 * (moments.abar - moments.gbar) + 0.25, 2.0 * eta
        else:
            p, w = eta + 0.25, -2.0 * eta
    else:
        raise ValueError(f"unknown eigenfunction kind {kind!r}")
    scale = _check_image(level, pmap.image)
    phi, mass, g = level.phi, pmap.mass, pmap.g

    def psi(x):
        x = np.asarray(x, dtype=float)
        return scale * np.asarray(mass(x)) ** p * phi(g(x))

    return PDMEigenfunction(n=level.n, kind=kind, psi=psi, prefactor_exponent=p,
                            weight_exponent=w, eta=eta, pmap=pmap)
