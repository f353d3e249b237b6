"""Adaptive Simpson quadrature vectorized over panels, and its cumulative form."""

from __future__ import annotations

import numpy as np


class QuadratureError(ArithmeticError):
    def __init__(self, msg, achieved):
        super().__init__(f"{msg} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


def _simpson(fa, fm, fb, width):
    return width / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a, b, rtol=1e-10, atol=1e-14, max_depth=50):
    """Integrate ``f`` over each panel ``[a_i, b_i]``.

    ``a`` and ``b`` may be arrays; all panels are refined together and each
    panel is split until the Richardson estimate ``|S2 - S1| / 15`` drops
    below ``max(atol, rtol * |S2|)`` on every leaf (tolerances scale with the
    leaf width).  ``f`` must accept numpy arrays.
    """
    # non-finite panels are detected and reported below
    with np.errstate(invalid="ignore", over="ignore"):
        return _adaptive_simpson(f, a, b, rtol, atol, max_depth)


def _adaptive_simpson(f, a, b, rtol, atol, max_depth):
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    total = np.zeros(a.size)
    # leaf state
    owner = np.arange(a.size)
    lo, hi = a.copy(), b.copy()
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = _ev(f, lo), _ev(f, mid), _ev(f, hi)
    whole = _simpson(flo, fmid, fhi, hi - lo)
    span = np.abs(b - a)
    span[span == 0] = 1.0
    # per-panel tolerance budget, split proportionally by leaf width
    budget = np.maximum(atol, rtol * np.abs(whole))
    worst = 0.0
    for depth in range(max_depth + 1):
        if lo.size == 0:
            break
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = _ev(f, lm), _ev(f, rm)
        left = _simpson(flo, flm, fmid, mid - lo)
        right = _simpson(fmid, frm, fhi, hi - mid)
        refined = left + right
        err = np.abs(refined - whole) / 15.0
        frac = np.abs(hi - lo) / span[owner]
        tol = np.maximum(budget[owner], rtol * np.abs(refined)) * np.maximum(frac, 1e-300)
        done = (err <= tol) | ~np.isfinite(err)
        if depth == max_depth:
            done[:] = True
            if np.any(err > tol):
                worst = float(np.max(err[err > tol] / np.maximum(np.abs(refined[err > tol]), 1e-300)))
        np.add.at(total, owner[done], refined[done] + (refined[done] - whole[done]) / 15.0)
        keep = ~done
        if not keep.any():
            break
        owner = np.concatenate([owner[keep], owner[keep]])
        lo, mid, hi, flo, fmid, fhi, whole = (
            np.concatenate([lo[keep], mid[keep]]),
            np.concatenate([lm[keep], rm[keep]]),
            np.concatenate([mid[keep], hi[keep]]),
            np.concatenate([flo[keep], fmid[keep]]),
            np.concatenate([flm[keep], frm[keep]]),
            np.concatenate([fmid[keep], fhi[keep]]),
            np.concatenate([left[keep], right[keep]]),
        )
    if not np.all(np.isfinite(total)):
        raise QuadratureError("non-finite integrand", np.inf)
    if worst > 0.0:
        raise QuadratureError("adaptive Simpson did not converge", worst)
    total = total.reshape(shape)
    return float(total[0]) if scalar else total


def _ev(f, x):
    out = np.asarray(f(x), dtype=float)
    return np.broadcast_to(out, np.shape(x)).copy() if out.shape != np.shape(x) else out


def cumulative(f, x0, x, rtol=1e-10, atol=1e-14):
    """``F(x) = int_{x0}^{x} f`` at every point of ``x`` (any order)."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    order = np.argsort(flat)
    xs = flat[order]
    out = np.empty_like(xs)
    # integrate outward from x0 in both directions so errors do not cross it
    right = xs >= x0
    if right.any():
        nodes = np.concatenate([[x0], xs[right]])
        out[right] = np.cumsum(adaptive_simpson(f, nodes[:-1], nodes[1:], rtol, atol))
    left = ~right
    if left.any():
        nodes = np.concatenate([[x0], xs[left][::-1]])
        out[left] = -np.cumsum(adaptive_simpson(f, nodes[1:], nodes[:-1], rtol, atol))[::-1]
    res = np.empty_like(flat)
    res[order] = out
    return float(res[0]) if x.ndim == 0 else res.reshape(x.shape)
