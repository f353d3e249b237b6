"""Finite-difference PDM Hamiltonians, tridiagonal eigensolves and diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .massmap import MassModel, NumericError, PositivityError
from .ordering import EffectivePotentialCoeffs, OrderingMoments, effective_potential

LEAKAGE_TOL = 1e-8
HALF_LINE_OFFSET_CELLS = 10


@dataclass(frozen=True)
class Grid:
    """Uniform nodes ``lo..hi``; the end nodes carry Dirichlet zeros."""

    lo: float
    hi: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError(f"grid needs at least 16 points, got {self.n_points}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"grid needs finite lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def half_line(cls, lo, hi, n_points, cells=HALF_LINE_OFFSET_CELLS, side="lo"):
        """Grid that stops ``cells`` spacings short of a singular endpoint."""
        h = (hi - lo) / (n_points - 1 + cells)
        if side == "lo":
            return cls(lo + cells * h, hi, n_points)
        return cls(lo, hi - cells * h, n_points)

    @property
    def h(self):
        return (self.hi - self.lo) / (self.n_points - 1)

    @property
    def x(self):
        return np.linspace(self.lo, self.hi, self.n_points)

    @property
    def interior(self):
        return self.x[1:-1]

    def refined(self):
        """Halved spacing on the same interval (shares every node)."""
        return Grid(self.lo, self.hi, 2 * self.n_points - 1)


@dataclass
class DiscreteOperator:
    diag: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    symmetric: bool
    x: np.ndarray
    h: float
    weight: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.symmetric and not np.allclose(self.upper, self.lower, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(self.upper), initial=0))):
            raise ValueError("symmetric operator with unequal off-diagonals")
        if self.weight is None:
            self.weight = np.ones_like(self.diag)

    @property
    def size(self):
        return self.diag.size

    def dense(self):
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def apply(self, v):
        out = self.diag * v
        out[:-1] += self.upper * v[1:]
        out[1:] += self.lower * v[:-1]
        return out


def _inv_mass_derivs(m: MassModel, x):
    mv, d1, d2 = m.evaluate(x)
    if not np.all(mv > 0):
        raise PositivityError("mass not positive on the grid")
    inv = 1.0 / mv
    dinv = -d1 / mv ** 2
    d2inv = -d2 / mv ** 2 + 2.0 * d1 ** 2 / mv ** 3
    return mv, inv, dinv, d2inv


def effective_potential_values(m: MassModel, V, coeffs: EffectivePotentialCoeffs, x, hbar=1.0):
    """``V + hbar^2/2 [c1 (1/m)'' + c2 ((1/m)')^2 m]`` at ``x``."""
    mv, _, dinv, d2inv = _inv_mass_derivs(m, np.asarray(x, dtype=float))
    extra = coeffs.c_inv_m_dd * d2inv + coeffs.c_inv_m_d_sq * dinv ** 2 * mv
    return np.asarray(V(x), dtype=float) + 0.5 * hbar ** 2 * extra


def _half_k(m: MassModel, x, h, power=-1.0):
    """``m^power`` at the half points between nodes ``x``.

    A cell containing a declared mass jump uses the series combination
    ``1/k = theta/k_L + (1-theta)/k_R``, which keeps the discrete flux exact
    across the interface.
    """
    mid = 0.5 * (x[:-1] + x[1:])
    k = np.asarray(m(mid), dtype=float) ** power
    for xd in getattr(m, "discontinuities", ()):
        i = np.searchsorted(x, xd) - 1
        if 0 <= i < x.size - 1:
            mL, mR = m.limits(xd)
            theta = (xd - x[i]) / h
            k[i] = 1.0 / (theta / mL ** power + (1.0 - theta) / mR ** power)
    return k


def _flux_laplacian(k, h, scale):
    """Tridiagonal of ``-scale d/dx k d/dx`` on interior nodes (half-point ``k``)."""
    diag = scale * (k[:-1] + k[1:]) / h ** 2
    off = -scale * k[1:-1] / h ** 2
    return diag, off


def discretize_hermitian(m: MassModel, V, coeffs: EffectivePotentialCoeffs, grid: Grid,
                         hbar: float = 1.0, meta: dict | None = None) -> DiscreteOperator:
    """Flux-form ``(1/2) p (1/m) p + V_eff`` with Dirichlet ends; exactly symmetric."""
    x, h = grid.x, grid.h
    xi = x[1:-1]
    k = _half_k(m, x, h)
    diag, off = _flux_laplacian(k, h, 0.5 * hbar ** 2)
    diag = diag + effective_potential_values(m, V, coeffs, xi, hbar)
    _finite(diag)
    return DiscreteOperator(diag, off, off.copy(), True, xi, h, meta=dict(meta or {}))


def discretize_factored(m: MassModel, V, a: float, grid: Grid, hbar: float = 1.0,
                        meta: dict | None = None) -> DiscreteOperator:
    """Single-term ordering ``(1/2) m^a p m^b p m^a`` with ``b = -1 - 2a``, plus ``V``.

    The derivative terms are discretized as ``m_i^a K m_j^a`` with ``K`` the
    flux form of ``-d/dx m^b d/dx``, so ``m^a psi`` and ``m^b (m^a psi)'``
    stay continuous across mass jumps.
    """
    x, h = grid.x, grid.h
    xi = x[1:-1]
    b = -1.0 - 2.0 * a
    k = _half_k(m, x, h, power=b)
    diag, off = _flux_laplacian(k, h, 0.5 * hbar ** 2)
    ma = np.asarray(m(xi), dtype=float) ** a
    diag = diag * ma * ma + np.asarray(V(xi), dtype=float)
    off = off * ma[:-1] * ma[1:]
    _finite(diag)
    return DiscreteOperator(diag, off, off.copy(), True, xi, h, meta=dict(meta or {}))


@dataclass
class NonHermitianDiscretization:
    nonsym: DiscreteOperator
    symmetrized: DiscreteOperator
    eta: float
    scaling: np.ndarray  # psi_tilde = w / scaling


def discretize_nonhermitian(m: MassModel, V, mo: OrderingMoments, grid: Grid, hbar: float = 1.0,
                            meta: dict | None = None) -> NonHermitianDiscretization:
    """Flux kinetic term, central first-derivative term and the non-Hermitian V_eff.

    The tridiagonal is diagonally similar to a symmetric one; the diagonal
    scaling, pinned to ``m^eta`` at the middle node, tracks ``m^eta`` to O(h^2).
    """
    x, h = grid.x, grid.h
    xi = x[1:-1]
    k = _half_k(m, x, h)
    diag, off = _flux_laplacian(k, h, 0.5 * hbar ** 2)
    coeffs = effective_potential(mo, "nonhermitian")
    diag = diag + effective_potential_values(m, V, coeffs, xi, hbar)
    _, _, dinv, _ = _inv_mass_derivs(m, xi)
    drift = 0.5 * hbar ** 2 * coeffs.c_first_deriv * dinv / (2.0 * h)
    upper = off + drift[:-1]
    lower = off - drift[1:]
    _finite(diag)
    meta = dict(meta or {})
    nonsym = DiscreteOperator(diag, upper, lower, mo.eta == 0 and np.array_equal(upper, lower), xi, h, meta=meta)
    prod = upper * lower
    if np.any(prod <= 0):
        raise NumericError("grid too coarse: first-derivative term breaks diagonal similarity")
    ratio = np.sqrt(upper / lower)
    scaling = np.concatenate([[1.0], np.cumprod(ratio)])
    mid = scaling.size // 2
    scaling *= float(m(xi[mid])) ** mo.eta / scaling[mid]
    sym_off = -np.sqrt(prod)
    weight = np.asarray(m(xi), dtype=float) ** (2.0 * mo.eta)
    sym = DiscreteOperator(diag.copy(), sym_off, sym_off.copy(), True, xi, h, weight=weight, meta=meta)
    nonsym.weight = weight
    return NonHermitianDiscretization(nonsym, sym, mo.eta, scaling)


def similarity_defect(m: MassModel, nh: NonHermitianDiscretization, her: DiscreteOperator, f) -> float:
    """``max |(D H_non D^-1 - H_her) f|`` with ``D = diag(m^eta)`` on a smooth test vector ``f``."""
    xi = nh.nonsym.x
    d = np.asarray(m(xi), dtype=float) ** nh.eta
    fv = np.asarray(f(xi), dtype=float)
    lhs = d * nh.nonsym.apply(fv / d)
    # drop the rows next to the boundary, where the Dirichlet truncation differs
    return float(np.max(np.abs(lhs - her.apply(fv))[2:-2]))


def _finite(v):
    if not np.all(np.isfinite(v)):
        raise NumericError("operator has non-finite entries (singular mass or potential on the grid)")


# --- eigensolver -------------------------------------------------------------


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # shape (k, n_interior); each row h-normalized against ``weight``
    x: np.ndarray
    h: float
    weight: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def reliable(self) -> bool:
        leak = self.diagnostics.get("boundary_leakage")
        return leak is None or max(leak) <= LEAKAGE_TOL


def sturm_count(diag, off, lam) -> int:
    """Number of eigenvalues below ``lam`` of the symmetric tridiagonal (LDL^T pivots)."""
    count = 0
    q = 1.0
    pivmin = np.finfo(float).eps * max(1.0, abs(lam), float(np.max(np.abs(off), initial=0.0)) ** 2)
    prev_e2 = 0.0
    for i in range(len(diag)):
        q = float(diag[i]) - lam - (prev_e2 / q if i else 0.0)
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0:
            count += 1
        prev_e2 = off[i] ** 2 if i < len(off) else 0.0
    return count


def _fix_sign(v):
    j = int(np.argmax(np.abs(v) > 1e-3 * np.max(np.abs(v))))
    return -v if v[j] < 0 else v


def eig_lowest(op: DiscreteOperator, k: int) -> SpectralResult:
    """Lowest ``k`` eigenpairs by Sturm bisection plus inverse iteration."""
    if not op.symmetric:
        raise ValueError("eig_lowest needs a symmetric operator")
    if not 1 <= k < op.size:
        raise ValueError(f"need 1 <= k < {op.size}, got {k}")
    try:
        w, v = eigh_tridiagonal(op.diag, op.upper, select="i", select_range=(0, k - 1),
                                lapack_driver="stebz")
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"tridiagonal eigensolver failed: {exc}") from exc
    vecs = v.T / math.sqrt(op.h)
    scale = max(np.max(np.abs(op.diag)), 1.0)
    resid = max(float(np.max(np.abs(op.apply(u) - lam * u))) * math.sqrt(op.h) for lam, u in zip(w, vecs))
    if not np.all(np.isfinite(w)) or resid > 1e-8 * scale:
        raise NumericError(f"eigenpairs did not converge (residual {resid:.3e})")
    vecs = np.array([_fix_sign(u) for u in vecs])
    return SpectralResult(w, vecs, op.x, op.h, np.ones_like(op.diag), meta=dict(op.meta))


def eig_nonhermitian(nh: NonHermitianDiscretization, k: int) -> SpectralResult:
    """Spectrum from the symmetrized operator; vectors mapped back to ``psi_tilde``.

    No renormalization happens here, so the ``m^(2 eta)``-weighted norms in
    :func:`diagnostics` measure how well the reconstruction holds.
    """
    res = eig_lowest(nh.symmetrized, k)
    res.eigenvectors = res.eigenvectors / nh.scaling
    res.weight = nh.symmetrized.weight
    res.meta["eta"] = nh.eta
    return res


def richardson(e_coarse, e_fine, order=2):
    """Extrapolate eigenvalues from spacings ``h`` and ``h/2``."""
    f = 2.0 ** order
    return (f * np.asarray(e_fine) - np.asarray(e_coarse)) / (f - 1.0)


# --- diagnostics --------------------------------------------------------------


def diagnostics(res: SpectralResult, m: MassModel, hbar: float = 1.0) -> dict:
    """Norms, orthogonality, boundary leakage, current and matching residuals.

    The boundary nodes are Dirichlet zeros, so leakage is read at the first
    and last interior nodes.
    """
    psi, w, h = res.eigenvectors, res.weight, res.h
    gram = h * (psi * w) @ psi.T
    k = gram.shape[0]
    norms = np.diag(gram).copy()
    ortho = float(np.max(np.abs(gram - np.eye(k)))) if k else 0.0
    peak = np.max(np.abs(psi), axis=1)
    leakage = np.maximum(np.abs(psi[:, 0]), np.abs(psi[:, -1])) / peak
    mx = np.asarray(m(res.x), dtype=float)
    cpsi = psi.astype(complex)
    dpsi = np.gradient(cpsi, h, axis=1)
    current = hbar * w * np.imag(np.conj(cpsi) * dpsi) / mx
    out = {
        "norms": norms.tolist(),
        "orthogonality_max_error": ortho,
        "boundary_leakage": leakage.tolist(),
        "current_max": float(np.max(np.abs(current))),
        "matching": matching_residuals(res, m),
    }
    res.diagnostics.update(out)
    return out


def matching_residuals(res: SpectralResult, m: MassModel):
    """Continuity defects of ``m^(-1/4) psi`` and ``m^(-3/4) psi'`` at declared mass jumps.

    One-sided values come from linear extrapolation and one-sided derivatives
    from three-point stencils on each side; defects are relative to the peak
    of the corresponding quantity.  ``None`` for masses without jumps.
    """
    jumps = [xd for xd in getattr(m, "discontinuities", ()) if res.x[2] < xd < res.x[-3]]
    if not jumps:
        return None
    x, h = res.x, res.h
    mx = np.asarray(m(x), dtype=float)
    out = []
    for xd in jumps:
        iL = int(np.searchsorted(x, xd)) - 1  # last node left of the jump
        iR = iL + 1
        if x[iR] == xd:
            iR += 1
        mL, mR = m.limits(xd)
        dL, dR = xd - x[iL], x[iR] - xd
        value_res, flux_res = [], []
        for psi in res.eigenvectors:
            u = mx ** -0.25 * psi
            uL = u[iL] + dL * (u[iL] - u[iL - 1]) / h
            uR = u[iR] - dR * (u[iR + 1] - u[iR]) / h
            # second-order one-sided derivatives, shifted to the interface
            pL = (3 * psi[iL] - 4 * psi[iL - 1] + psi[iL - 2]) / (2 * h)
            pR = (-3 * psi[iR] + 4 * psi[iR + 1] - psi[iR + 2]) / (2 * h)
            ppL = (psi[iL] - 2 * psi[iL - 1] + psi[iL - 2]) / h ** 2
            ppR = (psi[iR + 2] - 2 * psi[iR + 1] + psi[iR]) / h ** 2
            pL, pR = pL + dL * ppL, pR - dR * ppR
            flux = mx ** -0.75 * np.gradient(psi, h)
            value_res.append(abs(uL - uR) / np.max(np.abs(u)))
            flux_res.append(abs(mL ** -0.75 * pL - mR ** -0.75 * pR) / np.max(np.abs(flux)))
        out.append({"x": xd, "value": value_res, "flux": flux_res})
    return out


@dataclass
class Comparison:
    passed: bool
    rel_diffs: list
    rel_tol: float

    def as_dict(self):
        return {"pass": self.passed, "rel_diffs": self.rel_diffs, "rel_tol": self.rel_tol}


def spectrum_compare(a, b, k: int, rel_tol: float) -> Comparison:
    """Per-level relative differences of the lowest ``k`` eigenvalues."""
    ea = np.asarray(getattr(a, "eigenvalues", a), dtype=float)
    eb = np.asarray(getattr(b, "eigenvalues", b), dtype=float)
    if ea.size < k or eb.size < k:
        raise ValueError(f"need at least {k} levels in both spectra")
    denom = np.maximum(np.abs(eb[:k]), np.finfo(float).tiny)
    diffs = (np.abs(ea[:k] - eb[:k]) / denom).tolist()
    return Comparison(all(d <= rel_tol for d in diffs), diffs, rel_tol)
