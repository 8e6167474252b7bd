"""Local measures, Monge-Ampere recipes, and global integration."""

import math
from fractions import Fraction

import numpy as np
import pytest

from adeliclab.curves import Place, QCurve
from adeliclab.dynamics import Endomorphism, tate_local_potential
from adeliclab.metrics import (
    ArchTestFn,
    MetricFamily,
    NonarchTestFn,
    TestFunctionFamily,
    ToricMetric,
    TwistedMetric,
    fs_quotient,
)
from adeliclab.bundles import GramNorm
from adeliclab.measures import (
    CircleAtoms,
    MeasureFamily,
    PointMass,
    SamplerMeasure,
    SegmentAtoms,
    integrate_global,
    integrate_global_report,
    integrate_log_section,
    monge_ampere_family,
    monge_ampere_local,
    radon_nikodym_check,
)
from adeliclab.piecewise import PLProfile, Roof

CURVE = QCurve()
ARCH = CURVE.arch_place()
P2 = CURVE.prime_place(2)
P3 = CURVE.prime_place(3)

TENT = Roof([(Fraction(0), 0.0), (Fraction(1, 2), 0.5), (Fraction(1), 0.0)])
ROOF0 = Roof([(Fraction(0), 0.0), (Fraction(1), 0.0)])


def arch_profile(kinks):
    return ArchTestFn(profile=PLProfile(kinks))


def nonarch_profile(kinks):
    return NonarchTestFn(profile=PLProfile(kinks))


class TestLocalMeasures:
    def test_circle_total_mass(self):
        mu = CircleAtoms([(1.0, 0.25), (2.0, 0.75)])
        assert mu.total_mass() == 1.0

    def test_circle_rejects_negative_mass(self):
        with pytest.raises(ValueError, match="mass"):
            CircleAtoms([(1.0, -0.5)])

    def test_circle_rejects_zero_radius(self):
        with pytest.raises(ValueError, match="radius"):
            CircleAtoms([(0.0, 1.0)])

    def test_circle_profile_integral_is_exact(self):
        mu = CircleAtoms([(math.e, 2.0)])
        fn = arch_profile([(-1.0, -1.0), (2.0, 2.0)])
        assert mu.integrate(fn) == pytest.approx(2.0, abs=1e-15)

    def test_circle_callable_angular_average(self):
        mu = CircleAtoms([(2.0, 1.0)])
        assert abs(mu.integrate(ArchTestFn(callable=lambda z: z.real))) < 1e-12
        sq = mu.integrate(ArchTestFn(callable=lambda z: abs(z) ** 2))
        assert sq == pytest.approx(4.0, abs=1e-12)

    def test_segment_integral(self):
        mu = SegmentAtoms([(Fraction(1, 2), 2.0)])
        fn = nonarch_profile([(0.0, 1.0), (1.0, 3.0)])
        assert mu.integrate(fn) == pytest.approx(4.0, abs=1e-15)

    def test_segment_rejects_negative_mass(self):
        with pytest.raises(ValueError, match="mass"):
            SegmentAtoms([(0.0, -1.0)])

    def test_point_mass(self):
        mu = PointMass([(1 + 1j, 0.5), (1 - 1j, 0.5)])
        val = mu.integrate(ArchTestFn(callable=lambda z: z.imag))
        assert val == pytest.approx(0.0, abs=1e-15)
        assert mu.total_mass() == 1.0

    def test_json_round_trip_labels(self):
        assert CircleAtoms([(1.0, 1.0)]).to_json()["variant"] == "circle"
        assert SegmentAtoms([(0.0, 1.0)]).to_json()["variant"] == "segment"
        assert PointMass([(1j, 1.0)]).to_json()["variant"] == "points"


class TestSampler:
    def test_squaring_map_equilibrates_on_unit_circle(self):
        f = Endomorphism([0, 0, 1], [1])
        mu = SamplerMeasure(f, budget=4000, seed=11)
        rep = mu.integrate_report(ArchTestFn(callable=lambda z: math.log(abs(z))))
        assert abs(rep["mean"]) <= 3 * rep["stderr"] + 1e-6
        assert rep["budget"] == 4000
        assert rep["seed"] == 11

    def test_deterministic_given_seed(self):
        f = Endomorphism([-1, 0, 1], [1])
        fn = ArchTestFn(callable=lambda z: abs(z))
        a = SamplerMeasure(f, budget=500, seed=7).integrate(fn)
        b = SamplerMeasure(f, budget=500, seed=7).integrate(fn)
        assert a == b

    def test_samples_stay_near_julia_set(self):
        f = Endomorphism([1, 0, 1], [1])
        pts = SamplerMeasure(f, budget=1000, seed=3).sample()
        assert pts.shape == (1000,)
        assert np.max(np.abs(pts)) < 3.0

    def test_zero_budget_rejected(self):
        f = Endomorphism([0, 0, 1], [1])
        mu = SamplerMeasure(f, budget=0, seed=1)
        with pytest.raises(ValueError, match="budget"):
            mu.integrate(ArchTestFn(callable=abs))


class TestMongeAmpere:
    def test_canonical_arch_is_unit_circle_atom(self):
        mu = monge_ampere_local(ToricMetric(1, ROOF0), ARCH)
        assert isinstance(mu, CircleAtoms)
        assert mu.atoms == [(1.0, 1.0)]

    def test_canonical_nonarch_is_gauss_atom(self):
        mu = monge_ampere_local(ToricMetric(1, ROOF0), P2)
        assert isinstance(mu, SegmentAtoms)
        assert mu.atoms == [(0.0, 1.0)]

    def test_tent_roof_splits_into_two_unit_atoms(self):
        mu = monge_ampere_local(ToricMetric(2, TENT), ARCH)
        radii = [r for r, _ in mu.atoms]
        masses = [m for _, m in mu.atoms]
        assert radii == pytest.approx([math.exp(-1.0), math.e], abs=1e-12)
        assert masses == pytest.approx([1.0, 1.0], abs=1e-12)

    def test_nonarch_atoms_in_valuation_coordinates(self):
        roof = Roof([(Fraction(0), 0.0), (Fraction(1, 2), 0.3), (Fraction(1), 0.0)])
        mu = monge_ampere_local(ToricMetric(1, roof), P2)
        vs = [v for v, _ in mu.atoms]
        assert vs == pytest.approx([0.6 / math.log(2), -0.6 / math.log(2)])
        assert [m for _, m in mu.atoms] == pytest.approx([0.5, 0.5])

    def test_toric_mass_equals_level(self):
        roof = Roof(
            [
                (Fraction(0), 0.1),
                (Fraction(1, 3), 0.4),
                (Fraction(3, 4), 0.2),
                (Fraction(1), -0.3),
            ]
        )
        for level in (1, 3, 7):
            mu = monge_ampere_local(ToricMetric(level, roof), ARCH)
            assert mu.total_mass() == pytest.approx(level, abs=1e-12)

    def test_fs_radial_quadrature_mass_is_exact(self):
        phi = fs_quotient(GramNorm([[1, 0], [0, 1]]), ARCH)
        mu = monge_ampere_local(phi, ARCH)
        assert isinstance(mu, CircleAtoms)
        assert mu.total_mass() == pytest.approx(1.0, abs=1e-12)

    def test_fs_measure_is_radially_symmetric(self):
        phi = fs_quotient(GramNorm([[1, 0], [0, 1]]), ARCH)
        mu = monge_ampere_local(phi, ARCH)
        odd = mu.integrate(arch_profile([(-12.0, -12.0), (12.0, 12.0)]))
        assert abs(odd) < 1e-9

    def test_dynamical_metric_gets_sampler(self):
        f = Endomorphism([1, 0, 1], [1])
        m = tate_local_potential(f, ARCH, 6).potential
        mu = monge_ampere_local(m, ARCH)
        assert isinstance(mu, SamplerMeasure)
        assert mu.total_mass() == 1.0

    def test_twisted_metric_rejected(self):
        base = ToricMetric(1, ROOF0)
        tw = TwistedMetric(base, [(arch_profile([(0.0, 1.0)]), 0.5, ARCH)])
        with pytest.raises(ValueError, match="variant"):
            monge_ampere_local(tw, ARCH)

    def test_family_defaults_track_level(self):
        fam = MetricFamily(CURVE, 2)
        eta = monge_ampere_family(fam)
        assert eta.local(ARCH).atoms == [(1.0, 2.0)]
        assert eta.local(P3).atoms == [(0.0, 2.0)]

    def test_family_exceptions_carried_over(self):
        fam = MetricFamily(CURVE, 2, exceptions={ARCH: ToricMetric(2, TENT)})
        eta = monge_ampere_family(fam)
        assert len(eta.local(ARCH).atoms) == 2
        assert eta.listed_places() == [ARCH]


class TestIntegrateGlobal:
    def test_constant_one_at_arch_gives_arch_weight(self):
        eta = MeasureFamily(CURVE)
        f = TestFunctionFamily({ARCH: arch_profile([(0.0, 1.0)])})
        assert integrate_global(eta, f) == pytest.approx(1.0, abs=1e-15)

    def test_two_places_add(self):
        eta = MeasureFamily(CURVE)
        f = TestFunctionFamily(
            {
                ARCH: arch_profile([(0.0, 1.0)]),
                P2: nonarch_profile([(0.0, 1.0)]),
            }
        )
        assert integrate_global(eta, f) == pytest.approx(2.0, abs=1e-15)

    def test_place_predicate_restricts(self):
        eta = MeasureFamily(CURVE)
        f = TestFunctionFamily(
            {
                ARCH: arch_profile([(0.0, 1.0)]),
                P2: nonarch_profile([(0.0, 1.0)]),
            }
        )
        only_arch = integrate_global(eta, f, places=lambda pl: pl.is_arch)
        assert only_arch == pytest.approx(1.0, abs=1e-15)

    def test_tent_atoms_integrate_profiles_exactly(self):
        fam = MetricFamily(CURVE, 2, exceptions={ARCH: ToricMetric(2, TENT)})
        eta = monge_ampere_family(fam)
        prof = PLProfile([(-1.0, 0.25), (1.0, 0.75)])
        f = TestFunctionFamily({ARCH: ArchTestFn(profile=prof)})
        assert integrate_global(eta, f) == pytest.approx(1.0, abs=1e-14)

    def test_fubini_split_over_disjoint_place_sets(self):
        eta = MeasureFamily(CURVE)
        f = TestFunctionFamily(
            {
                ARCH: arch_profile([(0.0, 0.3)]),
                P2: nonarch_profile([(0.0, 0.4)]),
                P3: nonarch_profile([(0.0, 0.5)]),
            }
        )
        total = integrate_global(eta, f)
        arch_part = integrate_global(eta, f, places=lambda pl: pl.is_arch)
        finite_part = integrate_global(eta, f, places=lambda pl: not pl.is_arch)
        assert arch_part + finite_part == total

    def test_extension_by_zero_is_exact(self):
        eta = MeasureFamily(CURVE)
        f = TestFunctionFamily({P2: nonarch_profile([(0.0, 0.4)])})
        assert integrate_global(eta, f, places=lambda pl: pl.key == "5") == 0.0

    def test_report_carries_sampler_stderr(self):
        f = Endomorphism([1, 0, 1], [1])
        eta = MeasureFamily(CURVE).with_local(
            ARCH, SamplerMeasure(f, budget=2000, seed=5)
        )
        tf = TestFunctionFamily({ARCH: ArchTestFn(callable=lambda z: abs(z))})
        rep = integrate_global_report(eta, tf)
        assert rep["stderr"] > 0
        assert rep["value"] == pytest.approx(rep["places"]["arch:inf"]["value"])

    def test_sampler_zero_budget_error_propagates(self):
        f = Endomorphism([0, 0, 1], [1])
        eta = MeasureFamily(CURVE).with_local(
            ARCH, SamplerMeasure(f, budget=0, seed=5)
        )
        tf = TestFunctionFamily({ARCH: ArchTestFn(callable=abs)})
        with pytest.raises(ValueError, match="budget"):
            integrate_global(eta, tf)


class TestLogSectionIntegral:
    def test_unit_section_on_canonical_data_vanishes(self):
        eta = MeasureFamily(CURVE)
        psi = MetricFamily(CURVE, 1)
        rep = integrate_log_section(eta, [0, 1], psi, 1.0, t_max=6)
        assert rep["diverged"] is False
        assert rep["limit"] == pytest.approx(0.0, abs=1e-12)
        assert all(v == pytest.approx(0.0, abs=1e-12) for _, v in rep["values"])

    def test_atom_at_zero_of_section_diverges_linearly(self):
        eta = MeasureFamily(CURVE).with_local(ARCH, PointMass([(0j, 1.0)]))
        psi = MetricFamily(CURVE, 1)
        rep = integrate_log_section(eta, [0, 1], psi, 1.0, t_max=5)
        assert rep["diverged"] is True
        assert rep["limit"] is None
        assert [v for _, v in rep["values"]] == pytest.approx(
            [1.0, 2.0, 3.0, 4.0, 5.0]
        )

    def test_nonarch_atom_saturates_at_exact_value(self):
        eta = MeasureFamily(CURVE).with_local(P2, SegmentAtoms([(1.0, 1.0)]))
        psi = MetricFamily(CURVE, 1)
        rep = integrate_log_section(eta, [0, 1], psi, 1.0, t_max=6)
        assert rep["diverged"] is False
        assert rep["limit"] == pytest.approx(math.log(2), abs=1e-12)

    def test_values_nondecreasing(self):
        eta = MeasureFamily(CURVE).with_local(
            ARCH, CircleAtoms([(0.5, 0.5), (2.0, 0.5)])
        )
        psi = MetricFamily(CURVE, 1)
        rep = integrate_log_section(eta, [-4, 1], psi, 0.25, t_max=8)
        vals = [v for _, v in rep["values"]]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_zero_section_rejected(self):
        eta = MeasureFamily(CURVE)
        psi = MetricFamily(CURVE, 1)
        with pytest.raises(ValueError, match="nonzero"):
            integrate_log_section(eta, [0, 0], psi, 1.0, t_max=3)

    def test_per_place_caps(self):
        eta = MeasureFamily(CURVE).with_local(ARCH, PointMass([(0j, 1.0)]))
        psi = MetricFamily(CURVE, 1)
        rep = integrate_log_section(eta, [0, 1], psi, {ARCH: 0.5}, t_max=4)
        assert [v for _, v in rep["values"]] == pytest.approx(
            [0.5, 1.0, 1.5, 2.0]
        )


class TestRadonNikodym:
    def test_unit_density_passes(self):
        eta = MeasureFamily(CURVE)
        res = radon_nikodym_check(TestFunctionFamily({}), eta)
        assert res["passed"] is True
        assert res["deviation"] == 0.0
        assert res["offending"] == []

    def test_explicit_unit_density_passes(self):
        eta = MeasureFamily(CURVE)
        p = TestFunctionFamily(
            {
                ARCH: arch_profile([(0.0, 1.0)]),
                P2: nonarch_profile([(0.0, 1.0)]),
            }
        )
        res = radon_nikodym_check(p, eta)
        assert res["passed"] is True
        assert res["offending"] == []

    def test_bump_on_charged_atom_fails_and_names_place(self):
        eta = MeasureFamily(CURVE)
        p = TestFunctionFamily(
            {P2: nonarch_profile([(-1.0, 1.0), (0.0, 1.5), (1.0, 1.0)])}
        )
        res = radon_nikodym_check(p, eta)
        assert res["passed"] is False
        assert res["offending"] == ["prime:2"]
        assert res["deviation"] == pytest.approx(0.5, abs=1e-15)

    def test_deviation_on_weightless_place_passes(self):
        ghost = Place("prime", "7", Fraction(0))
        eta = MeasureFamily(CURVE)
        p = TestFunctionFamily(
            {ghost: nonarch_profile([(-1.0, 1.0), (0.0, 2.0), (1.0, 1.0)])}
        )
        res = radon_nikodym_check(p, eta)
        assert res["passed"] is True
        assert res["offending"] == []


class TestSerialization:
    def test_measure_family_json_keys(self):
        eta = MeasureFamily(CURVE).with_local(P2, SegmentAtoms([(1.0, 1.0)]))
        blob = eta.to_json()
        assert "prime:2" in blob["exceptions"]

    def test_sampler_json_records_provenance(self):
        f = Endomorphism([1, 0, 1], [1])
        blob = SamplerMeasure(f, budget=123, seed=9).to_json()
        assert blob["budget"] == 123
        assert blob["seed"] == 9
        assert blob["variant"] == "sampler"
