"""Generic small sequences, orbit measures, heights, and convergence data."""

import math
from fractions import Fraction

import numpy as np
import pytest

from adeliclab.curves import CopiesCurve, FqTCurve, QCurve
from adeliclab.dynamics import Endomorphism, canonical_height, canonical_metric_family
from adeliclab.equidist import (
    WHOLE_SPACE,
    GenericSequence,
    convergence_report,
    delta_functional,
    essential_minimum_estimate,
    galois_orbit_local_points,
    limit_functional,
    normalized_height,
    small_sequence_generate,
)
from adeliclab.families import named_family
from adeliclab.measures import PointMass, SegmentAtoms
from adeliclab.metrics import (
    ArchTestFn,
    MetricFamily,
    NonarchTestFn,
    TestFunctionFamily,
)
from adeliclab.piecewise import PLProfile
from adeliclab.points import ClosedPoint

CURVE = QCurve()
ARCH = CURVE.arch_place()
P2 = CURVE.prime_place(2)
P3 = CURVE.prime_place(3)
SQUARE = Endomorphism([0, 0, 1], [1])
CANONICAL = canonical_metric_family(SQUARE)

TENT = [(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)]
RAMP = [(0.0, 0.0), (1.0, 1.0)]


def tent_family():
    return TestFunctionFamily({
        ARCH: ArchTestFn(profile=PLProfile(TENT)),
        P2: NonarchTestFn(profile=PLProfile(TENT)),
    })


def ramp_at_two():
    return TestFunctionFamily({P2: NonarchTestFn(profile=PLProfile(RAMP))})


def const_family(c):
    return TestFunctionFamily({
        ARCH: ArchTestFn(profile=PLProfile.constant(c)),
        P2: NonarchTestFn(profile=PLProfile.constant(c)),
    })


class TestSequenceGeneration:
    def test_target_two_gives_pure_power_fibers(self):
        seq = small_sequence_generate(SQUARE, 2, 5)
        assert len(seq) == 5
        for k, Y in enumerate(seq.points):
            d = 2 ** (k + 1)
            assert Y.coeffs == tuple([-2] + [0] * (d - 1) + [1])

    def test_target_two_heights_exact(self):
        seq = small_sequence_generate(SQUARE, 2, 5)
        assert seq.heights == [math.log(2) / 2 ** n for n in range(1, 6)]

    def test_target_two_hypotheses(self):
        seq = small_sequence_generate(SQUARE, 2, 5)
        assert seq.is_generic()
        assert seq.is_small()

    def test_roots_of_unity_target(self):
        seq = small_sequence_generate(SQUARE, 1, 5)
        assert [Y.degree for Y in seq.points] == [1, 2, 4, 8, 16]
        assert seq.points[0].coeffs == (-1, 1)
        assert seq.points[1].coeffs == (1, 0, 1)
        assert seq.heights == [0.0] * 5
        assert seq.is_generic()
        assert seq.is_small()

    def test_tie_break_is_lexicographic(self):
        seq = small_sequence_generate(SQUARE, 4, 1)
        assert seq.points[0].coeffs == (-2, 1)

    def test_exceptional_target_rejected(self):
        with pytest.raises(ValueError, match="non-exceptional"):
            small_sequence_generate(SQUARE, 0, 2)

    def test_length_must_be_positive(self):
        with pytest.raises(ValueError):
            small_sequence_generate(SQUARE, 2, 0)

    def test_heights_follow_the_functional_equation(self):
        f = Endomorphism([-1, 0, 1], [1])
        seq = small_sequence_generate(f, 2, 2)
        h = canonical_height(f, 2)
        assert seq.heights[0] == h / 2
        assert seq.heights[1] == h / 4

    def test_descriptor_mentions_target(self):
        seq = small_sequence_generate(SQUARE, 2, 1)
        assert "2" in seq.descriptor

    def test_rational_targets_parse(self):
        seq = small_sequence_generate(SQUARE, "1/3", 1)
        assert seq.points[0].coeffs == (-1, 0, 3)


class TestGenericSequenceChecks:
    def test_duplicates_break_genericity(self):
        Y = ClosedPoint.from_rational(2)
        seq = GenericSequence("dup", [Y, Y], [0.1, 0.1])
        assert not seq.is_generic()

    def test_constant_positive_heights_are_not_small(self):
        pts = [ClosedPoint.from_rational(k) for k in (2, 3, 5)]
        seq = GenericSequence("flat heights", pts, [0.5, 0.5, 0.5])
        assert not seq.is_small()

    def test_geometric_decay_is_small(self):
        pts = [ClosedPoint.from_rational(k) for k in (2, 3, 5)]
        seq = GenericSequence("halving", pts, [0.4, 0.2, 0.1], rate=2)
        assert seq.is_small()

    def test_json_round_trip_fields(self):
        seq = small_sequence_generate(SQUARE, 2, 2)
        blob = seq.to_json()
        assert blob["heights"] == seq.heights
        assert blob["degrees"] == [2, 4]
        assert blob["descriptor"] == seq.descriptor


class TestGaloisOrbits:
    def test_octic_roots_on_the_unit_circle(self):
        mu = galois_orbit_local_points(ClosedPoint((1, 0, 0, 0, 1)), ARCH)
        assert isinstance(mu, PointMass)
        assert len(mu.atoms) == 4
        assert all(m == 0.25 for _, m in mu.atoms)
        assert all(abs(abs(z) - 1.0) <= 1e-12 for z, _ in mu.atoms)

    def test_sqrt_two_at_two(self):
        mu = galois_orbit_local_points(ClosedPoint((-2, 0, 1)), P2)
        assert isinstance(mu, SegmentAtoms)
        assert mu.atoms == [(0.5, 1.0)]

    def test_sqrt_two_at_three(self):
        mu = galois_orbit_local_points(ClosedPoint((-2, 0, 1)), P3)
        assert mu.atoms == [(0.0, 1.0)]

    def test_fourth_root_of_two_at_two(self):
        mu = galois_orbit_local_points(ClosedPoint((-2, 0, 0, 0, 1)), P2)
        assert mu.atoms == [(0.25, 1.0)]

    def test_rational_point_orbits(self):
        Y = ClosedPoint.from_rational(Fraction(3, 2))
        arch = galois_orbit_local_points(Y, ARCH)
        assert arch.atoms == [(1.5 + 0j, 1.0)]
        two = galois_orbit_local_points(Y, P2)
        assert two.atoms == [(-1.0, 1.0)]

    def test_zero_point(self):
        Y = ClosedPoint.from_rational(0)
        arch = galois_orbit_local_points(Y, ARCH)
        assert arch.atoms == [(0j, 1.0)]
        two = galois_orbit_local_points(Y, P2)
        assert two.atoms == [(math.inf, 1.0)]

    def test_copy_place_is_the_trivial_valuation(self):
        copies = CopiesCurve(["2", "1/2"])
        mu = galois_orbit_local_points(ClosedPoint((-2, 0, 1)), copies.copy_place(0))
        assert mu.atoms == [(0.0, 1.0)]

    def test_infinity_rejected(self):
        with pytest.raises(ValueError):
            galois_orbit_local_points(ClosedPoint.infinity(), ARCH)

    def test_budget_guard(self):
        with pytest.raises(ValueError, match="budget"):
            galois_orbit_local_points(ClosedPoint((1, 0, 0, 0, 1)), ARCH, budget=2)


class TestDeltaFunctional:
    def test_newton_slope_feeds_the_profile(self):
        d = 2 ** 3
        Y = ClosedPoint(tuple([-2] + [0] * (d - 1) + [1]))
        val = delta_functional(Y, CANONICAL, ramp_at_two())
        assert val == pytest.approx(0.125, abs=1e-15)

    def test_constant_test_function(self):
        Y = ClosedPoint((1, 0, 0, 0, 1))
        fam = TestFunctionFamily({ARCH: ArchTestFn(profile=PLProfile.constant(0.4))})
        assert delta_functional(Y, CANONICAL, fam) == pytest.approx(0.4, abs=1e-15)

    def test_cyclotomic_tent_at_infinity(self):
        Y = ClosedPoint((1, 0, 0, 0, 1))
        fam = TestFunctionFamily({ARCH: ArchTestFn(profile=PLProfile(TENT))})
        assert delta_functional(Y, CANONICAL, fam) == pytest.approx(1.0, abs=1e-12)

    def test_place_restriction_partitions(self):
        Y = ClosedPoint((-2, 0, 1))
        fam = tent_family()
        whole = delta_functional(Y, CANONICAL, fam)
        arch_only = delta_functional(Y, CANONICAL, fam, places=lambda w: w.is_arch)
        finite_only = delta_functional(Y, CANONICAL, fam,
                                       places=lambda w: not w.is_arch)
        assert arch_only + finite_only == whole

    def test_restriction_really_restricts(self):
        Y = ClosedPoint((-2, 0, 1))
        only_two = delta_functional(Y, CANONICAL, tent_family(),
                                    places=lambda w: w.kind == "prime")
        assert only_two == pytest.approx(0.5, abs=1e-15)


class TestLimitFunctional:
    def test_canonical_square_at_infinity(self):
        fam = TestFunctionFamily({ARCH: ArchTestFn(profile=PLProfile(TENT))})
        assert limit_functional(CANONICAL, fam) == 1.0

    def test_canonical_square_at_two_sees_the_gauss_atom(self):
        bump = PLProfile([(-1.0, 0.0), (0.0, 0.7), (1.0, 0.0)])
        fam = TestFunctionFamily({P2: NonarchTestFn(profile=bump)})
        assert limit_functional(CANONICAL, fam) == 0.7

    def test_zero_function(self):
        fam = const_family(0.0)
        assert limit_functional(CANONICAL, fam) == 0.0

    def test_degree_normalization(self):
        phi = MetricFamily(CURVE, 3)
        fam = TestFunctionFamily({ARCH: ArchTestFn(profile=PLProfile.constant(0.4))})
        assert limit_functional(phi, fam) == pytest.approx(0.4, abs=1e-15)


class TestNormalizedHeight:
    def test_rational_two(self):
        assert normalized_height(ClosedPoint.from_rational(2), CANONICAL) == math.log(2)

    def test_sqrt_two(self):
        h = normalized_height(ClosedPoint((-2, 0, 1)), CANONICAL)
        assert h == math.log(2) / 2

    def test_denominators_count(self):
        h = normalized_height(ClosedPoint.from_rational(Fraction(1, 2)), CANONICAL)
        assert h == pytest.approx(math.log(2), abs=1e-15)

    def test_roots_of_unity_have_height_zero(self):
        assert normalized_height(ClosedPoint((1, 0, 0, 0, 1)), CANONICAL) == 0.0

    def test_whole_space_markers(self):
        assert normalized_height(WHOLE_SPACE, CANONICAL) == 0.0
        assert normalized_height(None, CANONICAL) == 0.0

    def test_whole_space_shifted(self):
        phi = named_family("shift:1/4")
        assert normalized_height(None, phi) == pytest.approx(0.25, abs=1e-12)

    def test_shift_adds_to_point_heights(self):
        phi = named_family("shift:1/4")
        h = normalized_height(ClosedPoint.from_rational(2), phi)
        assert h == pytest.approx(math.log(2) + 0.25, abs=1e-12)

    def test_dynamical_cross_check_runs(self):
        f = Endomorphism([-1, 0, 1], [1])
        phi = canonical_metric_family(f)
        assert any(phi.local(w).variant == "dynamical" for w in phi.listed_places())
        assert normalized_height(ClosedPoint.from_rational(0), phi) == 0.0
        h2 = normalized_height(ClosedPoint.from_rational(2), phi)
        assert h2 == pytest.approx(canonical_height(f, 2), abs=1e-12)

    def test_infinity_rejected(self):
        with pytest.raises(ValueError):
            normalized_height(ClosedPoint.infinity(), CANONICAL)


class TestEssentialMinimum:
    def test_canonical_square_bracket_is_zero(self):
        lower, upper = essential_minimum_estimate(CANONICAL)
        assert lower == 0.0
        assert upper == 0.0

    def test_shifted_bracket(self):
        lower, upper = essential_minimum_estimate(named_family("shift:1/4"))
        assert lower == pytest.approx(0.25, abs=1e-12)
        assert upper == pytest.approx(0.25, abs=1e-12)
        assert upper >= lower - 1e-12

    def test_function_field_trivial_family(self):
        phi = MetricFamily(FqTCurve(3), 1)
        assert essential_minimum_estimate(phi) == (0.0, 0.0)

    def test_empty_enumeration_rejected(self):
        with pytest.raises(ValueError):
            essential_minimum_estimate(CANONICAL, degree_bound=0)


class TestConvergenceReport:
    def test_row_shape_and_heights(self):
        seq = small_sequence_generate(SQUARE, 2, 4)
        report = convergence_report(seq, CANONICAL, [("tent", tent_family())])
        rows = report["rows"]
        assert len(rows) == 4
        assert [r["n"] for r in rows] == [1, 2, 3, 4]
        assert [r["height"] for r in rows] == seq.heights
        assert all(r["f_id"] == "tent" for r in rows)

    def test_tent_gaps_match_direct_evaluation(self):
        seq = small_sequence_generate(SQUARE, 2, 4)
        fam = tent_family()
        report = convergence_report(seq, CANONICAL, [("tent", fam)])
        limit = limit_functional(CANONICAL, fam)
        prof = PLProfile(TENT)
        for row in report["rows"]:
            n = row["n"]
            expect = prof.eval(math.log(2) / 2 ** n) + prof.eval(1.0 / 2 ** n)
            assert row["delta_n"] == pytest.approx(expect, abs=1e-12)
            assert row["gap"] == pytest.approx(abs(expect - limit), abs=1e-12)
        gaps = [r["gap"] for r in report["rows"]]
        assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))
        assert report["trend"]["tent"] == 1.0

    def test_constant_test_function_has_zero_gap(self):
        seq = small_sequence_generate(SQUARE, 2, 3)
        report = convergence_report(seq, CANONICAL, [("const", const_family(0.4))])
        assert all(r["gap"] == 0.0 for r in report["rows"])
        assert report["trend"]["const"] == 1.0

    def test_unnamed_bank_entries_get_ids(self):
        seq = small_sequence_generate(SQUARE, 2, 2)
        report = convergence_report(seq, CANONICAL, [tent_family(), const_family(0.1)])
        assert {r["f_id"] for r in report["rows"]} == {"f0", "f1"}

    def test_roots_of_unity_kill_the_first_moment(self):
        seq = small_sequence_generate(SQUARE, 1, 3)
        fam = TestFunctionFamily({ARCH: ArchTestFn(callable=lambda z: z.real)})
        report = convergence_report(seq, CANONICAL, [("re", fam)])
        for row in report["rows"]:
            if row["n"] >= 2:
                assert abs(row["delta_n"]) <= 1e-12
                assert abs(row["delta_x"]) <= 1e-12

    def test_summaries_carry_gap_traces(self):
        seq = small_sequence_generate(SQUARE, 2, 3)
        report = convergence_report(seq, CANONICAL, [("tent", tent_family())])
        (summary,) = report["summaries"]
        assert summary["seq"] == seq.descriptor
        assert summary["f_id"] == "tent"
        assert summary["gaps"] == [r["gap"] for r in report["rows"]]
        assert summary["heights"] == seq.heights
