import math
from fractions import Fraction

import numpy as np
import pytest

from adeliclab.curves import QCurve
from adeliclab.dynamics import (
    DynamicalMetric,
    Endomorphism,
    canonical_height,
    canonical_metric_family,
    commuting_compatibility_factor,
    dynamic_constant_check,
    local_potential_height,
    tate_grid_potentials,
    tate_local_potential,
)
from adeliclab.metrics import GridSpec, ToricMetric, metric_distance
from adeliclab.piecewise import Roof
from adeliclab.points import ClosedPoint

CURVE = QCurve()
ARCH = CURVE.arch_place()

SQUARE = Endomorphism([0, 0, 1], [1])
SQUARE_PLUS_ONE = Endomorphism([1, 0, 1], [1])
CUBE = Endomorphism([0, 0, 0, 1], [1])


def roof0():
    return Roof([(Fraction(0), 0.0), (Fraction(1), 0.0)])


class TestEndomorphism:
    def test_degree_and_application(self):
        assert SQUARE.degree == 2
        assert CUBE.degree == 3
        assert SQUARE_PLUS_ONE.apply_fraction(Fraction(1, 2)) == Fraction(5, 4)

    def test_degree_one_rejected(self):
        with pytest.raises(ValueError, match="degree must exceed 1"):
            Endomorphism([0, 1], [1])

    def test_shared_root_rejected(self):
        with pytest.raises(ValueError, match="share"):
            Endomorphism([-1, 0, 1], [-1, 1])

    def test_resultants(self):
        assert abs(SQUARE.primitive_resultant()) == 1
        assert abs(SQUARE_PLUS_ONE.primitive_resultant()) == 1
        assert abs(Endomorphism([0, 0, 2], [1]).primitive_resultant()) == 4

    def test_infinity_and_poles(self):
        assert SQUARE.apply_pair((1, 0)) == (1, 0)
        inv = Endomorphism([1], [0, 0, 1])  # 1/z^2 swaps 0 and infinity
        assert inv.apply_pair((0, 1)) == (1, 0)
        assert inv.apply_pair((1, 0)) == (0, 1)

    def test_serialization(self):
        blob = SQUARE_PLUS_ONE.to_json()
        assert blob == {"num": ["1", "0", "1"], "den": ["1"], "alpha": "1"}


class TestTateIteration:
    def test_square_is_fixed_point_at_arch(self):
        ta = tate_local_potential(SQUARE, ARCH, 5)
        assert ta.lambda_sup == 0.0
        assert ta.error_bound == 0.0
        naive = ToricMetric(1, roof0())
        for z in (0.5, 1.0, 2.0 + 1.0j, 7.0):
            assert ta.potential.potential_at(z) == pytest.approx(
                naive.potential_at(z), abs=1e-12)

    def test_square_finite_place_trivial(self):
        ta = tate_local_potential(SQUARE, CURVE.prime_place(3), 4)
        assert ta.lambda_sup == 0.0
        assert ta.potential.pl_curve_or_none() is not None
        assert metric_distance(ta.potential, ToricMetric(1, roof0())) == 0.0

    def test_contraction_bound_on_grid(self):
        grid = GridSpec()
        seq = tate_grid_potentials(SQUARE_PLUS_ONE, 21, grid=grid)
        lam = tate_local_potential(SQUARE_PLUS_ONE, ARCH, 1).lambda_sup
        assert 0.5 < lam < 1.0
        for n in range(21):
            gap = np.max(np.abs(seq[n + 1] - seq[n]))
            assert gap <= lam * 2.0 ** -(n + 1)

    def test_error_bound_is_sound(self):
        grid = GridSpec()
        seq = tate_grid_potentials(SQUARE_PLUS_ONE, 26, grid=grid)
        ta = tate_local_potential(SQUARE_PLUS_ONE, ARCH, 8)
        tail = np.max(np.abs(seq[26] - seq[8]))
        assert tail <= ta.error_bound

    def test_functional_equation_exact_form(self):
        # depth n at f(z) equals depth n+1 at z, scaled by the degree,
        # minus the log of the denominator lift
        f = SQUARE_PLUS_ONE
        m10 = DynamicalMetric(f, ARCH, 10)
        m11 = DynamicalMetric(f, ARCH, 11)
        for z in (0.3, 1.0 + 0.5j, -2.0, 5.0j):
            lhs = m10.potential_at(f.apply_complex(z))
            rhs = 2.0 * m11.potential_at(z)
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_functional_equation_at_limit(self):
        f = SQUARE_PLUS_ONE
        ta = tate_local_potential(f, ARCH, 14)
        m = ta.potential
        for z in (0.3, 1.0 + 0.5j, -2.0):
            lhs = m.potential_at(f.apply_complex(z))
            rhs = 2.0 * m.potential_at(z)
            assert abs(lhs - rhs) <= 3.0 * ta.error_bound + 1e-12

    def test_bad_starting_metric_rejected(self):
        with pytest.raises(ValueError, match="level"):
            tate_local_potential(SQUARE, ARCH, 3,
                                 ToricMetric(2, roof0()))


class TestCanonicalFamily:
    def test_square_family_is_exact(self):
        fam = canonical_metric_family(SQUARE, tol=1e-9)
        assert fam.listed_places() == []
        assert fam.level == 1

    def test_depth_matches_tolerance(self):
        fam = canonical_metric_family(SQUARE_PLUS_ONE, tol=1e-6)
        arch_metric = fam.local(ARCH)
        lam = tate_local_potential(SQUARE_PLUS_ONE, ARCH, 1).lambda_sup
        assert arch_metric.depth == math.ceil(math.log2(lam / 1e-6))
        assert [pl.kind for pl in fam.listed_places()] == ["arch"]

    def test_monomial_family_exact_toric(self):
        f = Endomorphism([0, 0, 0, 2], [1])  # 2 z^3
        fam = canonical_metric_family(f, tol=1e-9)
        arch = fam.local(ARCH)
        assert isinstance(arch, ToricMetric)
        # u(t) = max(0, t + log|2| / 2) at the real place
        assert arch.potential_at(1.0) == pytest.approx(math.log(2) / 2, abs=1e-12)
        at2 = fam.local(CURVE.prime_place(2))
        # |2|_2 = 1/2 so the roof tilts the other way
        assert at2.potential_curve().eval(0.0) == 0.0
        assert at2.potential_curve().eval(4.0) == pytest.approx(
            4.0 - math.log(2) / 2, abs=1e-12)
        assert fam.local(CURVE.prime_place(5)) is fam.default

    @pytest.mark.parametrize("c", [Fraction(2), Fraction(1, 3)])
    def test_alpha_rescaling_square(self, c):
        base = canonical_metric_family(SQUARE, tol=1e-9)
        scaled = canonical_metric_family(
            Endomorphism([0, 0, 1], [1], alpha_scale=c), tol=1e-9)
        for place in [ARCH, CURVE.prime_place(2), CURVE.prime_place(3)]:
            shift = CURVE.log_abs(c, place)  # log|c| at the place
            got = metric_distance(scaled.local(place), base.local(place))
            assert abs(got - abs(shift)) <= 1e-10
            # metric scales by |c|^{-1/(d-1)}: potential shifts up by log|c|
            du = (scaled.local(place).potential_at(1.7)
                  - base.local(place).potential_at(1.7))
            assert du == pytest.approx(shift, abs=1e-10)

    @pytest.mark.parametrize("c", [Fraction(2), Fraction(1, 3)])
    def test_alpha_rescaling_cube(self, c):
        base = canonical_metric_family(CUBE, tol=1e-9)
        scaled = canonical_metric_family(
            Endomorphism([0, 0, 0, 1], [1], alpha_scale=c), tol=1e-9)
        for place in [ARCH, CURVE.prime_place(2), CURVE.prime_place(3)]:
            shift = CURVE.log_abs(c, place) / 2  # d - 1 = 2
            du = (scaled.local(place).potential_at(0.8)
                  - base.local(place).potential_at(0.8))
            assert du == pytest.approx(shift, abs=1e-10)

    def test_section_norm_ratio(self):
        base = canonical_metric_family(SQUARE, tol=1e-9)
        scaled = canonical_metric_family(
            Endomorphism([0, 0, 1], [1], alpha_scale=2), tol=1e-9)
        r = (scaled.local(ARCH).section_log_norm([1], 1.3)
             - base.local(ARCH).section_log_norm([1], 1.3))
        assert r == pytest.approx(-math.log(2), abs=1e-12)

    def test_bad_reduction_non_monomial_raises(self):
        f = Endomorphism([Fraction(1, 2), 0, 1], [1])  # z^2 + 1/2, bad at 2
        with pytest.raises(ValueError, match="reduction"):
            canonical_metric_family(f, tol=1e-6)


class TestCanonicalHeight:
    def test_two_under_squaring(self):
        for depth in (4, 8, 12):
            assert canonical_height(SQUARE, Fraction(2), depth) == (
                pytest.approx(math.log(2), abs=1e-12))

    def test_fixed_and_preperiodic_rationals(self):
        assert canonical_height(SQUARE, Fraction(1), 8) == 0.0
        assert canonical_height(SQUARE, Fraction(0), 8) == 0.0
        assert canonical_height(SQUARE, Fraction(-1), 8) == 0.0
        minus = Endomorphism([-1, 0, 1], [1])  # z^2 - 1
        assert canonical_height(minus, Fraction(0), 8) == 0.0

    def test_infinity_is_periodic(self):
        assert canonical_height(SQUARE, ClosedPoint.infinity(), 8) == 0.0

    def test_roots_of_unity_vanish(self):
        from sympy import Poly, cyclotomic_poly, symbols

        x = symbols("x")
        for m in (3, 5, 8, 12, 16):
            coeffs = [int(c) for c in
                      reversed(Poly(cyclotomic_poly(m, x), x).all_coeffs())]
            zeta = ClosedPoint(coeffs)
            assert canonical_height(SQUARE, zeta, 10) == 0.0

    def test_sqrt2_under_squaring(self):
        p = ClosedPoint([-2, 0, 1])
        assert canonical_height(SQUARE, p, 6) == pytest.approx(
            math.log(2) / 2, abs=1e-12)

    def test_budget_guard(self):
        with pytest.raises(ValueError, match="increase budget or lower depth"):
            canonical_height(SQUARE, Fraction(3), 30, bit_budget=1000)

    def test_nonnegative(self):
        for r in (Fraction(2, 3), Fraction(-5, 7), Fraction(10, 3)):
            assert canonical_height(SQUARE_PLUS_ONE, r, 12) >= 0.0

    def test_cross_check_against_potentials(self):
        fam = canonical_metric_family(SQUARE, tol=1e-9)
        assert local_potential_height(fam, Fraction(2)) == pytest.approx(
            math.log(2), abs=1e-9)
        assert local_potential_height(fam, Fraction(1, 2)) == pytest.approx(
            math.log(2), abs=1e-9)
        fam1 = canonical_metric_family(SQUARE_PLUS_ONE, tol=1e-8)
        tele = canonical_height(SQUARE_PLUS_ONE, Fraction(1), 20)
        pot = local_potential_height(fam1, Fraction(1))
        assert abs(tele - pot) < 1e-5


class TestCommutingFactor:
    def test_standard_power_maps(self):
        assert commuting_compatibility_factor(SQUARE, CUBE) == Fraction(1)
        fam_f = canonical_metric_family(SQUARE, tol=1e-9)
        fam_g = canonical_metric_family(CUBE, tol=1e-9)
        assert metric_distance(fam_f.local(ARCH), fam_g.local(ARCH)) <= 1e-12

    def test_self_commutes(self):
        assert commuting_compatibility_factor(
            SQUARE_PLUS_ONE, SQUARE_PLUS_ONE) == Fraction(1)

    def test_beta_rescaling_scales_r(self):
        g = Endomorphism([0, 0, 1], [1], alpha_scale=5)  # beta -> 5*beta
        r = commuting_compatibility_factor(CUBE, g)  # d = 3
        assert r == Fraction(25)

    def test_non_commuting_rejected(self):
        with pytest.raises(ValueError, match="not a commuting pair"):
            commuting_compatibility_factor(SQUARE, SQUARE_PLUS_ONE)

    def test_metric_comparison_law(self):
        # f = z^2 (alpha standard), g = z^3 with beta -> 5*beta:
        # r = 5^(d-1) = 5 and the metrics differ by |r|^(-1/((d-1)(e-1)))
        g5 = Endomorphism([0, 0, 0, 1], [1], alpha_scale=5)
        r = commuting_compatibility_factor(SQUARE, g5)
        assert r == Fraction(5)
        fam_f = canonical_metric_family(SQUARE, tol=1e-9)
        fam_g = canonical_metric_family(g5, tol=1e-9)
        for place in [ARCH, CURVE.prime_place(5)]:
            du = (fam_g.local(place).potential_at(1.3)
                  - fam_f.local(place).potential_at(1.3))
            assert du == pytest.approx(CURVE.log_abs(r, place) / 2, abs=1e-12)


class TestDynamicConstant:
    def test_constant_solution_accepted(self):
        out = dynamic_constant_check(lambda z: 3.0, SQUARE, b=2.0, a=-3.0)
        assert out["equation_holds"]
        assert out["is_constant"]
        assert out["predicted"] == pytest.approx(3.0)
        assert out["observed"] == pytest.approx(3.0)

    def test_non_solution_rejected(self):
        out = dynamic_constant_check(
            lambda z: math.cos(np.angle(z)), SQUARE, b=2.0, a=0.0)
        assert not out["equation_holds"]

    def test_b_must_contract(self):
        with pytest.raises(ValueError, match="b must exceed 1"):
            dynamic_constant_check(lambda z: 0.0, SQUARE, b=1.0, a=0.0)
