"""Generalized kinetic-energy orderings for position-dependent masses.

A scheme is a weighted sum of terms ``w * m^alpha p m^beta p m^gamma`` with
``alpha + beta + gamma = -1`` and weights summing to one.  Everything the
expanded Hamiltonian needs is carried by a handful of weighted means, which
:func:`moments` computes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

VALIDATION_TOL = 1e-12


class OrderingError(ValueError):
    """Raised for schemes violating the ordering constraints."""


@dataclass(frozen=True)
class OrderingTerm:
    w: float
    alpha: float
    beta: float
    gamma: float

    @property
    def exponent_sum(self) -> float:
        return self.alpha + self.beta + self.gamma


@dataclass(frozen=True)
class OrderingMoments:
    abar: float
    bbar: float
    gbar: float
    agbar: float
    eta: float
    A: float
    B: float

    def as_dict(self) -> dict:
        return {
            "abar": self.abar,
            "bbar": self.bbar,
            "gbar": self.gbar,
            "agbar": self.agbar,
            "eta": self.eta,
            "A": self.A,
            "B": self.B,
        }


@dataclass(frozen=True)
class EffectivePotentialCoeffs:
    """Dimensionless coefficients of the ordering-induced potential.

    The correction is ``hbar^2/2 * [c_inv_m_dd * (1/m)'' +
    c_inv_m_d_sq * ((1/m)')^2 * m]``; ``c_first_deriv`` multiplies the
    ``(1/m)' p`` term that only the non-Hermitian form carries.
    """

    c_inv_m_dd: float
    c_inv_m_d_sq: float
    c_first_deriv: float = 0.0

    def as_dict(self) -> dict:
        return {
            "c_inv_m_dd": self.c_inv_m_dd,
            "c_inv_m_d_sq": self.c_inv_m_d_sq,
            "c_first_deriv": self.c_first_deriv,
        }


@dataclass(frozen=True)
class OrderingScheme:
    terms: tuple[OrderingTerm, ...]
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        terms = tuple(
            t if isinstance(t, OrderingTerm) else OrderingTerm(*t) for t in self.terms
        )
        if not terms:
            raise OrderingError("an ordering scheme needs at least one term")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, alpha, beta, gamma, label=None) -> "OrderingScheme":
        return cls((OrderingTerm(1.0, alpha, beta, gamma),), label)

    def __len__(self):
        return len(self.terms)

    @cached_property
    def moments(self) -> OrderingMoments:
        return moments(self)

    def to_json(self) -> dict:
        return {
            "label": self.label or "",
            "terms": [
                {"w": t.w, "alpha": t.alpha, "beta": t.beta, "gamma": t.gamma}
                for t in self.terms
            ],
        }


def validate(scheme: OrderingScheme, tol: float = VALIDATION_TOL) -> list[str]:
    """Return a list of violated constraints; empty when the scheme is valid."""
    report = []
    for i, t in enumerate(scheme.terms):
        resid = t.exponent_sum + 1.0
        if abs(resid) > tol:
            report.append(
                f"term {i}: alpha+beta+gamma = {t.exponent_sum:.12g} != -1 "
                f"(residual {resid:.3e})"
            )
    wsum = sum(t.w for t in scheme.terms)
    if abs(wsum - 1.0) > tol:
        report.append(f"sum of weights = {wsum:.12g} != 1 (residual {wsum - 1.0:.3e})")
    return report


def check(scheme: OrderingScheme) -> OrderingScheme:
    report = validate(scheme)
    if report:
        raise OrderingError("; ".join(report))
    return scheme


def moments(scheme: OrderingScheme) -> OrderingMoments:
    check(scheme)
    abar = sum(t.w * t.alpha for t in scheme.terms)
    bbar = sum(t.w * t.beta for t in scheme.terms)
    gbar = sum(t.w * t.gamma for t in scheme.terms)
    agbar = sum(t.w * t.alpha * t.gamma for t in scheme.terms)
    return moments_from_means(abar, gbar, agbar, bbar)


def moments_from_means(abar, gbar, agbar, bbar=None) -> OrderingMoments:
    if bbar is None:
        bbar = -1.0 - abar - gbar
    A = abar + gbar + 0.5
    B = (abar - gbar) ** 2 + 3.0 * abar + 3.0 * gbar + 4.0 * agbar + 1.25
    return OrderingMoments(
        abar=abar,
        bbar=bbar,
        gbar=gbar,
        agbar=agbar,
        eta=(gbar - abar) / 2.0,
        A=A,
        B=B,
    )


def is_hermitian(scheme: OrderingScheme, tol: float = VALIDATION_TOL) -> bool:
    mo = scheme.moments
    return abs(mo.abar - mo.gbar) <= tol


def effective_potential(mo: OrderingMoments, form: str = "hermitian") -> EffectivePotentialCoeffs:
    if form == "hermitian":
        return EffectivePotentialCoeffs(
            c_inv_m_dd=(mo.abar + mo.gbar) / 2.0,
            c_inv_m_d_sq=mo.agbar + (mo.gbar - mo.abar) ** 2 / 4.0,
            c_first_deriv=0.0,
        )
    if form == "nonhermitian":
        return EffectivePotentialCoeffs(
            c_inv_m_dd=mo.gbar,
            c_inv_m_d_sq=mo.agbar,
            c_first_deriv=mo.gbar - mo.abar,
        )
    raise ValueError(f"unknown effective-potential form {form!r}")


def transformed_coeffs(mo: OrderingMoments, eta: float) -> EffectivePotentialCoeffs:
    """Coefficients of ``m^eta H_non m^-eta`` for an arbitrary exponent ``eta``."""
    return EffectivePotentialCoeffs(
        c_inv_m_dd=mo.gbar - eta,
        c_inv_m_d_sq=mo.agbar - eta * (eta - mo.gbar + mo.abar),
        c_first_deriv=mo.gbar - mo.abar - 2.0 * eta,
    )


@dataclass(frozen=True)
class Hermitization:
    eta: float
    moments: OrderingMoments
    coeffs: EffectivePotentialCoeffs
    scheme: OrderingScheme | None
    description: str


def hermitize(scheme: OrderingScheme) -> Hermitization:
    """Similarity exponent and Hermitian partner of ``scheme``.

    ``H_her = m^eta H_non m^-eta`` with ``eta = (gbar - abar)/2``.  An
    explicit Hermitian scheme is returned for single-term input, and for
    multi-term input whenever a symmetric von Roos pair reproduces the
    Hermitian coefficients; otherwise ``scheme`` is None.
    """
    mo = scheme.moments
    eta = mo.eta
    coeffs = effective_potential(mo, "hermitian")
    a = coeffs.c_inv_m_dd
    beta = -1.0 - 2.0 * a
    her_scheme = None
    if len(scheme) == 1:
        her_scheme = OrderingScheme.single(a, beta, a, label=_her_label(scheme))
    else:
        d2 = a * a - coeffs.c_inv_m_d_sq
        if d2 >= -VALIDATION_TOL:
            d = max(d2, 0.0) ** 0.5
            her_scheme = OrderingScheme(
                (OrderingTerm(0.5, a + d, beta, a - d), OrderingTerm(0.5, a - d, beta, a + d)),
                label=_her_label(scheme),
            )
    her_moments = moments_from_means(a, a, coeffs.c_inv_m_d_sq, beta)
    if abs(eta) == 0.0:
        desc = "identity (scheme already Hermitian, eta = 0)"
    else:
        desc = f"H_her = m^({eta:.12g}) H_non m^({-eta:.12g})"
    return Hermitization(eta, her_moments, coeffs, her_scheme, desc)


def _her_label(scheme):
    return f"hermitized({scheme.label})" if scheme.label else "hermitized"


# Li-Kuhn is the symmetrized von Roos choice (0, -1/2, -1/2);
# Morrow-Brownstein coincides with Zhu-Kroemer (alpha = gamma = -1/2, beta = 0).

def _von_roos(alpha, beta, gamma, label):
    return OrderingScheme(
        (OrderingTerm(0.5, alpha, beta, gamma), OrderingTerm(0.5, gamma, beta, alpha)),
        label=label,
    )


def _dutra(a, alpha, beta, gamma):
    # Kinetic operator 1/(4(a+1)) [a(1/m p^2 + p^2 1/m) + vonRoos pair]
    # rewritten in the 1/2 sum w_i convention: weights a/(2(a+1)) for the
    # two GW-type terms and 1/(2(a+1)) for each von Roos term.
    if a == -1:
        raise OrderingError("Dutra ordering undefined for a = -1")
    wg = a / (2.0 * (a + 1.0))
    wv = 1.0 / (2.0 * (a + 1.0))
    return OrderingScheme(
        (
            OrderingTerm(wg, -1.0, 0.0, 0.0),
            OrderingTerm(wg, 0.0, 0.0, -1.0),
            OrderingTerm(wv, alpha, beta, gamma),
            OrderingTerm(wv, gamma, beta, alpha),
        ),
        label=f"dutra(a={a:g})",
    )


NAMED = ("bdd", "gw", "zk", "weyl", "vonroos", "lk", "mb", "dutra", "case1", "single")


def _complete_exponents(params: dict) -> tuple[float, float, float]:
    alpha = params.get("alpha")
    beta = params.get("beta")
    gamma = params.get("gamma")
    given = [v is not None for v in (alpha, beta, gamma)]
    if sum(given) < 2:
        raise OrderingError("need at least two of alpha, beta, gamma")
    if alpha is None:
        alpha = -1.0 - beta - gamma
    elif beta is None:
        beta = -1.0 - alpha - gamma
    elif gamma is None:
        gamma = -1.0 - alpha - beta
    if abs(alpha + beta + gamma + 1.0) > VALIDATION_TOL:
        raise OrderingError(
            f"alpha+beta+gamma = {alpha + beta + gamma:.12g} != -1"
        )
    return float(alpha), float(beta), float(gamma)


def named(name: str, **params) -> OrderingScheme:
    """Build one of the catalogued orderings.

    ``vonroos``, ``dutra`` and ``single`` take exponent keywords (any two of
    ``alpha``, ``beta``, ``gamma``); ``dutra`` also needs ``a``.
    """
    key = name.lower().replace("-", "").replace("_", "")
    third = 1.0 / 3.0
    if key == "bdd":
        return OrderingScheme.single(0.0, -1.0, 0.0, label="BDD")
    if key == "gw":
        return OrderingScheme(
            (OrderingTerm(0.5, -1.0, 0.0, 0.0), OrderingTerm(0.5, 0.0, 0.0, -1.0)),
            label="GW",
        )
    if key in ("zk", "mb"):
        return OrderingScheme.single(-0.5, 0.0, -0.5, label=key.upper())
    if key == "weyl":
        return OrderingScheme(
            (
                OrderingTerm(third, -1.0, 0.0, 0.0),
                OrderingTerm(third, 0.0, -1.0, 0.0),
                OrderingTerm(third, 0.0, 0.0, -1.0),
            ),
            label="Weyl",
        )
    if key == "lk":
        return _von_roos(0.0, -0.5, -0.5, "LK")
    if key == "case1":
        return OrderingScheme.single(-0.25, -0.5, -0.25, label="case1")
    if key == "vonroos":
        a, b, g = _complete_exponents(params)
        return _von_roos(a, b, g, f"vonRoos({a:g},{b:g},{g:g})")
    if key == "single":
        a, b, g = _complete_exponents(params)
        return OrderingScheme.single(a, b, g, label=f"single({a:g},{b:g},{g:g})")
    if key == "dutra":
        if "a" not in params:
            raise OrderingError("dutra ordering needs parameter a")
        a, b, g = _complete_exponents(params)
        return _dutra(float(params["a"]), a, b, g)
    raise OrderingError(f"unknown ordering {name!r}; expected one of {', '.join(NAMED)}")


def parse_params(text: str) -> dict:
    """Parse ``k=v,k=v`` into a dict of floats (fractions like 1/4 allowed)."""
    out = {}
    if not text.strip():
        return out
    for pos, item in _split_items(text):
        if "=" not in item:
            raise OrderingError(f"expected key=value at position {pos}: {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            vpos = pos + len(k) + 1 + (len(v) - len(v.lstrip()))
            raise OrderingError(f"bad number at position {vpos}: {v.strip()!r}") from None
    return out


def _split_items(text):
    pos = 0
    for item in text.split(","):
        yield pos, item
        pos += len(item) + 1


def from_json(data: dict | str) -> OrderingScheme:
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise OrderingError(
                f"invalid scheme JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from None
    try:
        terms = tuple(
            OrderingTerm(float(t["w"]), float(t["alpha"]), float(t["beta"]), float(t["gamma"]))
            for t in data["terms"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise OrderingError(f"malformed scheme JSON: {exc}") from None
    scheme = OrderingScheme(terms, label=data.get("label") or None)
    check(scheme)
    return scheme


def parse_scheme(spec: str) -> OrderingScheme:
    """Scheme from a CLI string: a catalog name, ``name:k=v,...``, inline JSON, or a JSON path."""
    spec = spec.strip()
    if spec.startswith("{"):
        return from_json(spec)
    if spec.endswith(".json") or os.path.isfile(spec):
        try:
            with open(spec) as fh:
                text = fh.read()
        except OSError as exc:
            raise OrderingError(f"cannot read scheme file {spec!r}: {exc.strerror}") from None
        return from_json(text)
    name, _, rest = spec.partition(":")
    return named(name, **parse_params(rest))


def weighted(terms: Iterable[Sequence[float]], label=None) -> OrderingScheme:
    """Convenience constructor from ``(w, alpha, beta, gamma)`` tuples."""
    return OrderingScheme(tuple(OrderingTerm(*map(float, t)) for t in terms), label=label)
