"""Acceptance criteria AC-1 .. AC-10, one PASS/FAIL line each."""

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from pdmx import analytic as an
from pdmx import lienard as li
from pdmx import numeric as nu
from pdmx import ordering as od
from pdmx import problem as pr
from pdmx.massmap import CustomMass, DomainInterval

B0_SCHEME = ('{"terms":[{"w":0.5,"alpha":1.25,"beta":-2,"gamma":-0.25},'
             '{"w":0.5,"alpha":-1.25,"beta":0,"gamma":0.25}]}')
AC3 = dict(mass="powerlaw:b1=1,b2=0,C=2", potential="isotonic:lambda1=0.5,lambda3=8",
           domain=(0.0, 20.0), grid=4096, levels=5)
AC3_TOL = 1e-4


@pytest.fixture
def report(capsys):
    def _report(label, ok, detail, elapsed=None, budget=None):
        timed = elapsed is not None and budget is not None
        within = not timed or elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        clock = f" [{elapsed:.2f}s < {budget:g}s]" if timed else ""
        with capsys.disabled():
            print(f"\n{label}: {status}  {detail}{clock}")
        assert ok, detail
        assert within, f"{label} took {elapsed:.2f}s (budget {budget:g}s)"

    return _report


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.abs(b)))


def solve(**kw):
    t0 = time.perf_counter()
    prob = pr.build(pr.RunConfig(**kw))
    res = pr.solve_numeric(prob)
    return prob, res, time.perf_counter() - t0


def test_ac1_constant_mass(report):
    _, res, dt = solve(mass="const:m0=1", potential="harmonic:lambda1=0.5", domain=(-12, 12), grid=4096, levels=6)
    err = rel_err(res.eigenvalues, np.arange(6) + 0.5)
    report("AC-1", err <= 1e-6, f"max rel error {err:.2e} <= 1e-6", dt, 2)


def test_ac2_arbitrary_mass_case1(report):
    _, res, dt = solve(mass="1+x^2", potential="harmonic:lambda1=2,lambda2=1", domain=(-10, 10),
                       grid=8192, levels=6)
    err = rel_err(res.eigenvalues, 2 * np.arange(6) + 0.5)
    report("AC-2", err <= 1e-4, f"max rel error {err:.2e} <= 1e-4", dt, 5)


@pytest.fixture(scope="module")
def ac3():
    t0 = time.perf_counter()
    a_prob, a, _ = solve(scheme="case1", **AC3)
    b_prob, b, _ = solve(scheme=B0_SCHEME, **AC3)
    return dict(a=a, b=b, a_prob=a_prob, b_prob=b_prob, elapsed=time.perf_counter() - t0)


def test_ac3_spectra_agree(report, ac3):
    err = rel_err(ac3["b"].eigenvalues, ac3["a"].eigenvalues)
    report("AC-3 (scheme agreement)", err <= AC3_TOL, f"case1 vs B=0 scheme: {err:.2e} <= 1e-4",
           ac3["elapsed"], 5)


def test_ac3_matches_closed_form(report, ac3):
    exact = [lv.energy for lv in an.isotonic_levels(ac3["a_prob"].potential, 4)]
    err = max(rel_err(ac3[k].eigenvalues, exact) for k in "ab")
    l = ac3["a_prob"].potential.l
    report("AC-3 (closed form, l(l+1) = lambda3/2)", err <= AC3_TOL,
           f"l = {l:.6f}, E_0 = {exact[0]:.6f}; max rel error {err:.2e} <= 1e-4")


def test_ac3_matches_literal_levels(report, ac3):
    literal = 2 * np.arange(5) + 2.5
    err = max(rel_err(ac3[k].eigenvalues, literal) for k in "ab")
    report("AC-3 (literal E_n = 2n + 5/2)", err <= AC3_TOL,
           f"numeric E_0 = {ac3['a'].eigenvalues[0]:.6f} vs 2.5; max rel error {err:.2e} <= 1e-4")


def test_ac3_effective_potentials_differ(report, ac3):
    prob = ac3["a_prob"]
    x = nu.Grid.half_line(0.0, 20.0, AC3["grid"]).interior
    va = nu.effective_potential_values(prob.mass, prob.V, od.effective_potential(prob.scheme.moments), x)
    vb = nu.effective_potential_values(prob.mass, prob.V, od.effective_potential(ac3["b_prob"].scheme.moments), x)
    diff = float(np.max(np.abs(va - vb)))
    scale = float(np.max(np.abs(prob.V(x))))
    report("AC-3 (V_eff differ)", diff > 1e-3 * scale,
           f"max |V_eff(case1) - V_eff(B=0)| = {diff:.2e}, needs > {1e-3 * scale:.2e}")


def test_ac4_negative_control(report, ac3):
    prob, res, dt = solve(scheme="zk", **AC3)
    exact = [lv.energy for lv in an.isotonic_levels(prob.potential, 4)]
    err = rel_err(res.eigenvalues, exact)
    report("AC-4", err > 10 * AC3_TOL, f"ZK max rel deviation {err:.2e} > 1e-3", dt, 5)


def test_ac5_nonhermitian_isospectral(report):
    t0 = time.perf_counter()
    prob = pr.build(pr.RunConfig(mass="1+x^2", potential="harmonic:lambda1=2,lambda2=1"))
    m, V = prob.mass, prob.V
    grid = nu.Grid(-10, 10, 8192)
    mo = od.OrderingScheme.single(0, -0.5, -0.5).moments
    nh = nu.discretize_nonhermitian(m, V, mo, grid)
    res = nu.eig_nonhermitian(nh, 6)
    her = nu.eig_lowest(nu.discretize_hermitian(m, V, od.effective_potential(od.named("case1").moments), grid), 6)
    d = nu.diagnostics(res, m)
    spec = rel_err(res.eigenvalues, her.eigenvalues)
    norm = float(np.max(np.abs(np.array(d["norms"]) - 1)))
    ortho = d["orthogonality_max_error"]
    dt = time.perf_counter() - t0
    ok = spec <= 1e-4 and norm <= 1e-6 and ortho <= 1e-6
    report("AC-5", ok, f"spectra {spec:.2e} <= 1e-4, rho-norm {norm:.2e} <= 1e-6, "
                       f"orthogonality {ortho:.2e} <= 1e-6", dt, 5)


def test_ac6_normalization_constants(report):
    t0 = time.perf_counter()
    n0 = an.harmonic_norm(an.ShiftedHarmonic(0.5), 0)
    worst = 0.0
    for spec in (an.ShiftedHarmonic(2.0, 1.0), an.ShiftedHarmonic(0.5, 0.3)):
        for n in range(5):
            raw = an.harmonic_phi_unnormalized(spec, n)
            oracle = quad(lambda g: raw(g) ** 2, -np.inf, np.inf, epsabs=0, epsrel=1e-13, limit=400)[0] ** -0.5
            worst = max(worst, abs(an.harmonic_norm(spec, n) / oracle - 1))
    dt = time.perf_counter() - t0
    ok = abs(n0 - math.pi ** -0.25) <= 1e-12 and worst <= 1e-8
    report("AC-6", ok, f"|N_0 - pi^-1/4| = {abs(n0 - math.pi ** -0.25):.1e}, oracle rel diff {worst:.1e} <= 1e-8",
           dt, 1)


def test_ac7_constant_mass_residual(report):
    t0 = time.perf_counter()
    cases = [
        (an.ShiftedHarmonic(0.5), np.linspace(-8, 8, 1601), 5),
        (an.ShiftedHarmonic(2.0, 1.0), np.linspace(-6, 6, 1201), 5),
        (an.Isotonic(0.5, 8.0), np.linspace(0.02, 8, 800), 4),
    ]
    worst = max(an.constant_mass_residual(lv, spec, g) for spec, g, n in cases for lv in an.levels(spec, n))
    dt = time.perf_counter() - t0
    report("AC-7", worst <= 1e-6, f"max residual / max|phi| = {worst:.2e} <= 1e-6", dt, 1)


def test_ac8_discretization_order(report):
    t0 = time.perf_counter()
    errs = []
    ns = (1024, 2048, 4096)
    for n in ns:
        _, res, _ = solve(mass="const:m0=1", potential="harmonic:lambda1=0.5", domain=(-12, 12), grid=n,
                          levels=6, extrapolate=False)
        errs.append(np.abs(res.eigenvalues - (np.arange(6) + 0.5)))
    h = np.array([24 / (n - 1) for n in ns])
    slopes = [np.polyfit(np.log(h), np.log([e[k] for e in errs]), 1)[0] for k in range(6)]
    dt = time.perf_counter() - t0
    ok = all(abs(s - 2) <= 0.2 for s in slopes)
    report("AC-8", ok, f"log-log slopes {', '.join(f'{s:.3f}' for s in slopes)} within 2 +- 0.2", dt, 5)


def test_ac9_lienard_round_trip(report):
    t0 = time.perf_counter()
    k, lam1, lam2 = 0.3, 1.0, 0.5
    # h' + k h = 2 lam1 via the integrating factor exp(k x): h = 2 lam1/k + c exp(-k x)
    c = 2 * lam2 - 2 * lam1 / k
    sys_ = li.from_exprs(repr(k), f"{2 * lam1 / k!r} + ({c!r})*exp(-{k!r}*x)", DomainInterval(-3.0, 3.0))
    cl = li.classify(li.build(sys_))
    iso = li.isochronicity_check(sys_, "eight_param", {"lambda1": lam1}).max_residual
    got = (cl.params.get("lambda1", np.nan), cl.params.get("lambda2", np.nan))
    err = max(abs(got[0] / lam1 - 1), abs(got[1] / lam2 - 1))
    dt = time.perf_counter() - t0
    ok = cl.family == "V1" and err <= 1e-6 and iso <= 1e-9
    report("AC-9", ok, f"{cl.family} lambda1={got[0]:.12g} lambda2={got[1]:.12g} (rel {err:.1e}), "
                       f"isochronicity residual {iso:.1e}", dt, 1)


def test_ac10_matching_conditions(report):
    t0 = time.perf_counter()
    m = CustomMass(func=lambda x: np.where(x < 0, 1.0, 4.0), d1=lambda x: 0 * x, d2=lambda x: 0 * x,
                   name="step", discontinuities=(0.0,))
    ns = (512, 1024, 2048, 4096)
    value, flux, hs = [], [], []
    for n in ns:
        grid = nu.Grid(-8.0, 8.0, n)
        res = nu.eig_lowest(nu.discretize_factored(m, lambda x: 0.5 * x * x, -0.25, grid), 3)
        match = nu.diagnostics(res, m)["matching"][0]
        value.append(max(match["value"]))
        flux.append(max(match["flux"]))
        hs.append(grid.h)
    sv = np.polyfit(np.log(hs), np.log(value), 1)[0]
    sf = np.polyfit(np.log(hs), np.log(flux), 1)[0]
    dt = time.perf_counter() - t0
    shrinking = all(b < a for a, b in zip(value, value[1:])) and all(b < a for a, b in zip(flux, flux[1:]))
    ok = shrinking and sv >= 0.9 and sf >= 0.9
    report("AC-10", ok, f"value residual order {sv:.2f}, flux residual order {sf:.2f} (>= 1 expected); "
                        f"finest {value[-1]:.1e} / {flux[-1]:.1e}", dt, 5)
