import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmx import ordering as od
from pdmx.massmap import (
    ConstantMass,
    CustomMass,
    DomainError,
    DomainInterval,
    ExponentialMass,
    PositivityError,
    PowerLawMass,
    admissibility,
    admissible_exponent,
    class_coefficient,
    class_parameters,
    custom_from_expr,
    mass_class,
    mass_eval,
    pct_map,
    residual,
)
from pdmx.quadrature import adaptive_simpson

HALF = DomainInterval(0.0, math.inf)


class TestMassEval:
    def test_exponential(self):
        assert mass_eval(ExponentialMass(1, 2), 0.0) == (1, 2, 4)

    def test_powerlaw(self):
        assert mass_eval(PowerLawMass(1, 0, 2), 3.0) == (9, 6, 2)

    def test_constant(self):
        assert mass_eval(ConstantMass(1.0), np.array([-5.0, 7.0]))[1].tolist() == [0, 0]

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            mass_eval(PowerLawMass(1, 0, 2), -1.0)

    def test_nonpositive_constant(self):
        with pytest.raises(PositivityError):
            ConstantMass(0.0)

    def test_nonpositive_custom(self):
        with pytest.raises(PositivityError):
            CustomMass(func=lambda x: x)

    def test_powerlaw_domain_too_wide(self):
        with pytest.raises(PositivityError):
            PowerLawMass(1, 0, 2, domain=DomainInterval(-1.0, 1.0))

    def test_finite_difference_fallback(self):
        m = CustomMass(func=lambda x: 1 + x ** 2)
        val, d1, d2 = mass_eval(m, 1.5)
        assert (val, d1, d2) == pytest.approx((3.25, 3.0, 2.0), rel=1e-6)

    def test_expression_mass_uses_exact_derivatives(self):
        m = custom_from_expr("exp(x)*(2+sin(x))")
        x = sp.symbols("x")
        ref = sp.exp(x) * (2 + sp.sin(x))
        got = mass_eval(m, 0.3)
        want = [float(sp.diff(ref, x, k).subs(x, 0.3)) for k in range(3)]
        assert got == pytest.approx(want, rel=1e-13)

    def test_limits_at_jump(self):
        m = CustomMass(func=lambda x: np.where(x < 0, 1.0, 4.0), discontinuities=(0.0,))
        assert m.limits(0.0) == (1.0, 4.0)


class TestDomain:
    def test_empty(self):
        with pytest.raises(DomainError):
            DomainInterval(1.0, 1.0)

    @pytest.mark.parametrize("lo,hi", [(-math.inf, math.inf), (0, math.inf), (-math.inf, 2), (-1, 3)])
    def test_samples_inside(self, lo, hi):
        d = DomainInterval(lo, hi)
        xs = d.sample(64)
        assert np.all((xs > lo) & (xs < hi)) and np.all(np.diff(xs) > 0)

    def test_boundary_kinds(self):
        assert DomainInterval(0, math.inf).boundary_kinds == ("dirichlet", "decay")


def asinh_map(x):
    return 0.5 * (x * np.sqrt(1 + x * x) + np.arcsinh(x))


class TestPCTMap:
    def test_constant_identity(self):
        p = pct_map(ConstantMass(1.0), x0=0.0)
        xs = np.linspace(-3, 3, 7)
        assert p(xs) == pytest.approx(xs, abs=1e-15)

    def test_powerlaw_closed_form(self):
        p = pct_map(PowerLawMass(1, 0, 2))
        xs = np.linspace(0.1, 5, 20)
        assert p(xs) == pytest.approx(xs ** 2 / 2, rel=1e-14)
        assert (p.image.lo, p.image.hi) == (0.0, math.inf)

    def test_powerlaw_against_quadrature(self):
        m = PowerLawMass(0.5, 1.0, 1.3)
        p = pct_map(m, x0=0.0)
        for x in [0.5, 2.0, 7.0]:
            q = adaptive_simpson(lambda t: np.sqrt(m(t)), 0.0, x, rtol=1e-13)
            assert float(p(x)) == pytest.approx(q, rel=1e-11)

    def test_exponential_against_quadrature(self):
        m = ExponentialMass(2.0, 0.6)
        p = pct_map(m, x0=-1.0, g0=0.3)
        for x in [-3.0, 0.0, 4.0]:
            q = adaptive_simpson(lambda t: np.sqrt(m(t)), -1.0, x, rtol=1e-13)
            assert float(p(x)) == pytest.approx(0.3 + q, rel=1e-11, abs=1e-13)

    def test_custom_matches_closed_form(self):
        p = pct_map(custom_from_expr("1+x^2"))
        xs = np.linspace(-6, 6, 20)
        assert p(xs) == pytest.approx(asinh_map(xs), abs=1e-9)
        assert p.image.is_full_line

    def test_custom_inverse_round_trip(self):
        p = pct_map(custom_from_expr("1+x^2"))
        xs = np.linspace(-4, 4, 15)
        assert p.inverse(p(xs)) == pytest.approx(xs, abs=1e-9)

    def test_custom_bounded_image(self):
        p = pct_map(custom_from_expr("1/(1+x^2)^2"))
        # int sqrt(m) = atan(x), so the image is (-pi/2, pi/2)
        assert (p.image.lo, p.image.hi) == pytest.approx((-math.pi / 2, math.pi / 2), abs=1e-8)

    def test_derivatives(self):
        p = pct_map(ExponentialMass(1, 2))
        g1, g2, g3 = p.derivatives(np.array([0.5]))
        e = math.exp(0.5)
        assert (g1[0], g2[0], g3[0]) == pytest.approx((e, e, e), rel=1e-14)


class TestResidual:
    def test_constant_mass_zero(self):
        p = pct_map(ConstantMass(3.0))
        assert residual(od.named("zk").moments, p, np.linspace(-2, 2, 5)) == pytest.approx(0, abs=1e-15)

    @pytest.mark.parametrize("mass", [ExponentialMass(1, 2), PowerLawMass(1, 0.5, 1.7)])
    def test_case1_zero(self, mass):
        p = pct_map(mass)
        assert residual(od.named("case1").moments, p, np.array([0.5, 1.0, 3.0])) == pytest.approx(0, abs=1e-13)

    def test_quadratic_mass_b_zero(self):
        mo = od.weighted([(0.5, 1.25, -2, -0.25), (0.5, -1.25, 0, 0.25)]).moments
        p = pct_map(PowerLawMass(1, 0, 2))
        assert residual(mo, p, np.array([1.0, 2.0, 5.0])) == pytest.approx(0, abs=1e-15)

    def test_quadratic_mass_zk_nonzero(self):
        p = pct_map(PowerLawMass(1, 0, 2))
        # g = x^2/2: residual = -B g''^2/g'^4 = 3/(4 x^4)
        assert residual(od.named("zk").moments, p, 2.0) == pytest.approx(0.75 / 16, rel=1e-14)

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            residual(od.named("zk").moments, pct_map(PowerLawMass(1, 0, 2)), -1.0)


class TestAdmissibility:
    @pytest.mark.parametrize("s", [-2.0, 0.3, 1.0, 4.0])
    def test_case1_any_s(self, s):
        assert admissibility(od.named("case1").moments, s) == (True, 0.0)

    def test_b_zero_scheme_at_half(self):
        mo = od.weighted([(0.5, 1.25, -2, -0.25), (0.5, -1.25, 0, 0.25)]).moments
        assert admissibility(mo, 0.5).admissible
        assert admissible_exponent(mo) == pytest.approx(0.5)

    def test_zk_at_one(self):
        mo = od.named("zk").moments
        a = admissibility(mo, 1.0)
        assert a.r == pytest.approx(mo.A - mo.B) and not a.admissible

    @pytest.mark.parametrize("name,s", [("bdd", -2.0), ("gw", -2 / 3), ("zk", 2.0), ("weyl", -0.4), ("lk", 0.0)])
    def test_exponent_roots(self, name, s):
        mo = od.named(name).moments
        root = admissible_exponent(mo)
        assert root == pytest.approx(s, abs=1e-12)
        assert abs(class_coefficient(mo, root)) < 1e-12

    def test_case1_has_no_single_root(self):
        assert admissible_exponent(od.named("case1").moments) is None


class TestMassClass:
    def test_exponential_branch(self):
        m, _ = mass_class(1.0, C2=1.0, C3=1.0)
        assert isinstance(m, ExponentialMass) and (m.a1, m.a2) == (1.0, 2.0)

    def test_quadratic_branch(self):
        m, _ = mass_class(0.5)
        assert isinstance(m, PowerLawMass) and m.C == pytest.approx(2.0)

    def test_constant_branch(self):
        m, _ = mass_class(0.0, C2=2.0)
        assert isinstance(m, ConstantMass) and m.m0 == 4.0

    def test_needs_positive_c2(self):
        with pytest.raises(PositivityError):
            mass_class(0.5, C2=-1.0)


class_args = st.tuples(
    st.sampled_from([-1.5, -0.5, 1 / 3, 0.5, 0.75, 1.0, 2.0]),
    st.floats(-2, 2),
    st.floats(0.3, 3),
    st.floats(0.2, 3),
)


@settings(max_examples=40, deadline=None)
@given(class_args)
def test_class_map_solves_bernoulli_ode(args):
    s, C1, C2, C3 = args
    m, p = mass_class(s, C1, C2, C3)
    xs = m.domain.sample(1000)
    xs = xs[np.abs(xs) < 50]
    g = p(xs)
    gp = p.gprime(xs)
    ok = np.isfinite(g) & np.isfinite(gp) & (np.abs(g) < 1e12)
    want = C2 * (g[ok] + C1) ** s
    assert gp[ok] == pytest.approx(want, rel=1e-9)


@settings(max_examples=10, deadline=None)
@given(class_args, st.integers(0, 3))
def test_residual_is_coefficient_times_inverse_square(args, which):
    s, C1, C2, C3 = args
    mo = od.named(["bdd", "gw", "zk", "weyl"][which]).moments
    m, p = mass_class(s, C1, C2, C3)
    xs = m.domain.sample(41)[5:-5]
    xs = xs[np.abs(xs) < 20]
    g = p(xs)
    want = class_coefficient(mo, s) * (g + C1) ** -2.0
    assert residual(mo, p, xs) == pytest.approx(want, rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(class_args)
def test_class_parameters_round_trip(args):
    s, C1, C2, C3 = args
    m, p = mass_class(s, C1, C2, C3)
    got = class_parameters(m, p)
    assert got[0] == pytest.approx(s, abs=1e-12)
    assert got[2:] == pytest.approx((C2, C3), rel=1e-10)
    assert got[1] == pytest.approx(C1, abs=1e-10 * max(1.0, abs(C1)))
