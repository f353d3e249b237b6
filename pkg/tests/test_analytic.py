import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import eval_genlaguerre, eval_hermite

from pdmx import analytic as an
from pdmx import ordering as od
from pdmx.massmap import ConstantMass, PowerLawMass, custom_from_expr, pct_map


def integrate(f, lo=-math.inf, hi=math.inf):
    return quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)[0]


class TestPolynomials:
    def test_hermite_five_expansion(self):
        y = 0.7
        assert an.hermite(5, y) == pytest.approx(32 * y ** 5 - 160 * y ** 3 + 120 * y, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 20), st.floats(-4, 4))
    def test_hermite_matches_scipy(self, n, y):
        ref = eval_hermite(n, y)
        assert an.hermite(n, y) == pytest.approx(ref, rel=1e-10, abs=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 15), st.floats(-0.9, 5), st.floats(0, 20))
    def test_laguerre_matches_scipy(self, n, a, y):
        ref = eval_genlaguerre(n, a, y)
        assert an.laguerre(n, a, y) == pytest.approx(ref, rel=1e-9, abs=1e-9)

    def test_laguerre_order_bound(self):
        with pytest.raises(ValueError):
            an.laguerre(2, -1.0, 0.5)

    def test_vector_input(self):
        assert an.hermite(2, np.array([0.0, 1.0])).tolist() == [-2.0, 2.0]


class TestHarmonic:
    def test_textbook_levels(self):
        lv = an.harmonic_levels(an.ShiftedHarmonic(0.5), 5)
        assert [v.energy for v in lv] == pytest.approx([n + 0.5 for n in range(6)], abs=1e-15)
        assert lv[0].norm_const == pytest.approx(math.pi ** -0.25, abs=1e-12)

    def test_shifted_levels(self):
        lv = an.harmonic_levels(an.ShiftedHarmonic(2.0, 1.0), 5)
        assert [v.energy for v in lv] == pytest.approx([2 * n + 0.5 for n in range(6)], abs=1e-14)

    def test_bad_lambda1(self):
        with pytest.raises(an.SpectrumError):
            an.ShiftedHarmonic(0.0)

    @pytest.mark.parametrize("spec", [an.ShiftedHarmonic(2.0, 1.0), an.ShiftedHarmonic(0.7, -0.4, 1.3)])
    @pytest.mark.parametrize("n", range(5))
    def test_norm_matches_quadrature_oracle(self, spec, n):
        raw = an.harmonic_phi_unnormalized(spec, n)
        oracle = integrate(lambda g: raw(g) ** 2) ** -0.5
        assert an.harmonic_norm(spec, n) == pytest.approx(oracle, rel=1e-8)

    def test_orthonormal(self):
        spec = an.ShiftedHarmonic(2.0, 1.0)
        lv = an.harmonic_levels(spec, 6)
        for a in lv:
            for b in lv:
                val = integrate(lambda g: a.phi(g) * b.phi(g))
                assert val == pytest.approx(float(a.n == b.n), abs=1e-7)

    @pytest.mark.parametrize("spec", [an.ShiftedHarmonic(0.5), an.ShiftedHarmonic(2.0, 1.0)])
    def test_equation_residual(self, spec):
        g = np.linspace(-6, 6, 801)
        for level in an.harmonic_levels(spec, 5):
            assert an.constant_mass_residual(level, spec, g) <= 1e-6


class TestIsotonic:
    def test_consistent_l(self):
        spec = an.Isotonic(0.5, 8.0)
        assert spec.l * (spec.l + 1) == pytest.approx(4.0, abs=1e-14)
        lv = an.isotonic_levels(spec, 3)
        assert lv[0].energy == pytest.approx(2 * (0.5 * spec.l + 0.75), abs=1e-14)

    def test_printed_l_is_one_at_eight(self):
        spec = an.Isotonic(0.5, 8.0, l_convention="printed")
        assert spec.l == pytest.approx(1.0, abs=1e-15)
        assert [v.energy for v in an.isotonic_levels(spec, 3)] == pytest.approx([2.5, 4.5, 6.5, 8.5])

    @pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
    def test_conventions_agree_only_at_two(self, hbar):
        a = an.Isotonic(1.0, 2.0, hbar)
        b = an.Isotonic(1.0, 2.0, hbar, l_convention="printed")
        assert a.l == pytest.approx(b.l, abs=1e-14)
        assert an.Isotonic(1.0, 4.0, hbar).l != pytest.approx(an.Isotonic(1.0, 4.0, hbar, l_convention="printed").l)

    def test_only_consistent_l_solves_equation(self):
        g = np.linspace(0.05, 6, 600)
        good = an.Isotonic(0.5, 8.0)
        bad = an.Isotonic(0.5, 8.0, l_convention="printed")
        assert max(an.constant_mass_residual(v, good, g) for v in an.isotonic_levels(good, 4)) <= 1e-6
        assert min(an.constant_mass_residual(v, bad, g) for v in an.isotonic_levels(bad, 4)) > 1e-2

    @pytest.mark.parametrize("n", range(5))
    def test_orthonormal_on_half_line(self, n):
        spec = an.Isotonic(0.5, 8.0)
        lv = an.isotonic_levels(spec, 4)
        for other in lv:
            val = integrate(lambda g: lv[n].phi(g) * other.phi(g), 0.0)
            assert val == pytest.approx(float(other.n == n), abs=1e-8)

    def test_l_plus_half_integer_flag(self):
        # l(l+1) = lambda3/2: 3/2 -> l = 1/2, 15/2 -> l = 3/2, 12 -> l = 2
        flag = lambda lam3: an.isotonic_levels(an.Isotonic(1.0, lam3), 0)[0].l_plus_half_integer
        assert flag(1.5) and flag(7.5) and not flag(12.0)

    def test_bad_lambda3(self):
        with pytest.raises(an.SpectrumError):
            an.Isotonic(0.5, -1.0)

    def test_custom_has_no_levels(self):
        with pytest.raises(an.SpectrumError):
            an.levels(an.CustomU(lambda g: g * g), 3)


class TestAssemble:
    def test_constant_mass_hermitian_is_phi(self):
        level = an.harmonic_levels(an.ShiftedHarmonic(0.5), 2)[2]
        ef = an.assemble(level, pct_map(ConstantMass(1.0), x0=0.0))
        xs = np.linspace(-3, 3, 13)
        assert ef.psi(xs) == pytest.approx(level.phi(xs), abs=1e-15)

    def test_case1_prefactor(self):
        m = custom_from_expr("1+x^2")
        p = pct_map(m)
        level = an.harmonic_levels(an.ShiftedHarmonic(2.0, 1.0), 1)[1]
        ef = an.assemble(level, p, "hermitian", od.named("case1").moments)
        xs = np.linspace(-2, 2, 9)
        assert ef.psi(xs) == pytest.approx((1 + xs ** 2) ** 0.25 * level.phi(p(xs)), rel=1e-14)

    def test_nonhermitian_prefactor_half(self):
        mo = od.OrderingScheme.single(0, -0.5, -0.5).moments
        level = an.harmonic_levels(an.ShiftedHarmonic(2.0, 1.0), 0)[0]
        ef = an.assemble(level, pct_map(custom_from_expr("1+x^2")), "nonhermitian", mo)
        assert ef.prefactor_exponent == 0.5 and ef.weight_exponent == -0.5

    def test_harmonic_on_half_line_rejected(self):
        level = an.harmonic_levels(an.ShiftedHarmonic(0.5), 0)[0]
        with pytest.raises(an.CompatibilityError):
            an.assemble(level, pct_map(PowerLawMass(1, 0, 2)))

    def test_isotonic_on_bounded_image_rejected(self):
        level = an.isotonic_levels(an.Isotonic(0.5, 8.0), 0)[0]
        with pytest.raises(an.CompatibilityError):
            an.assemble(level, pct_map(custom_from_expr("1/(1+x^2)^2")))

    def test_missing_moments(self):
        level = an.harmonic_levels(an.ShiftedHarmonic(0.5), 0)[0]
        with pytest.raises(ValueError):
            an.assemble(level, pct_map(ConstantMass(1.0)), "dual")

    @pytest.mark.parametrize("n", range(4))
    def test_hermitian_pdm_normalized(self, n):
        p = pct_map(custom_from_expr("1+x^2"))
        level = an.harmonic_levels(an.ShiftedHarmonic(2.0, 1.0), n)[n]
        ef = an.assemble(level, p)
        assert integrate(lambda x: ef.psi(x) ** 2) == pytest.approx(1.0, abs=1e-8)

    def test_isotonic_on_quadratic_mass_normalized(self):
        p = pct_map(PowerLawMass(1, 0, 2))
        for level in an.isotonic_levels(an.Isotonic(0.5, 8.0), 3):
            ef = an.assemble(level, p)
            assert integrate(lambda x: ef.psi(x) ** 2, 0.0) == pytest.approx(1.0, abs=1e-8)

    def test_isotonic_parity_extension_normalized(self):
        p = pct_map(ConstantMass(1.0), x0=0.0)
        level = an.isotonic_levels(an.Isotonic(0.5, 8.0), 1, parity=-1)[1]
        ef = an.assemble(level, p)
        assert integrate(lambda x: ef.psi(x) ** 2) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("n", range(3))
    def test_weighted_norm_and_biorthogonality(self, n):
        mo = od.OrderingScheme.single(0.3, -0.2, -1.1).moments
        p = pct_map(custom_from_expr("1+x^2"))
        lv = an.harmonic_levels(an.ShiftedHarmonic(2.0, 1.0), 2)
        right = an.assemble(lv[n], p, "nonhermitian", mo)
        assert integrate(lambda x: right.weight(x) * right.psi(x) ** 2) == pytest.approx(1.0, abs=1e-8)
        for other in lv:
            dual = an.assemble(other, p, "dual", mo)
            val = integrate(lambda x: right.psi(x) * dual.psi(x))
            assert val == pytest.approx(float(other.n == n), abs=1e-8)


def test_admissible_schemes_share_eigenfunctions():
    p = pct_map(PowerLawMass(1, 0, 2))
    b0 = od.weighted([(0.5, 1.25, -2, -0.25), (0.5, -1.25, 0, 0.25)]).moments
    xs = np.linspace(0.1, 6, 60)
    for level in an.isotonic_levels(an.Isotonic(0.5, 8.0), 4):
        a = an.assemble(level, p, "hermitian", od.named("case1").moments)
        b = an.assemble(level, p, "hermitian", b0)
        assert np.max(np.abs(a.psi(xs) - b.psi(xs))) <= 1e-12
