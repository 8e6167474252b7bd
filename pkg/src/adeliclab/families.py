"""Ready-made generators: metric families, test banks, density examples.

The Lipschitz bank is a fixed set of five slope-bounded profile pairs
supported at the archimedean place and at 2, varied enough to separate
the equilibrium measures that show up in the convergence experiments.
Random generators take a numpy Generator so runs are reproducible, and
the named families back the command-line metric descriptors.
"""

import math
from fractions import Fraction

from .curves import Place, QCurve
from .measures import monge_ampere_family
from .metrics import (
    ArchTestFn,
    MetricFamily,
    NonarchTestFn,
    TestFunctionFamily,
    ToricMetric,
)
from .piecewise import PLProfile, Roof
from .utils import parse_rational

# (id, archimedean kinks in t = ln|z|, kinks at 2 in v = -ln|.|_2/ln 2);
# every segment has |slope| <= 1
_BANK = [
    ("tent",
     [(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)],
     [(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)]),
    ("wedge",
     [(-1.0, -1.0), (1.0, 1.0)],
     [(-1.0, -1.0), (1.0, 1.0)]),
    ("ramp",
     [(0.0, 0.0), (1.0, 1.0)],
     [(0.0, 0.0), (1.0, 1.0)]),
    ("plateau",
     [(-2.0, 0.0), (-1.0, 1.0), (1.0, 1.0), (2.0, 0.0)],
     [(-2.0, 0.0), (-1.0, 1.0), (1.0, 1.0), (2.0, 0.0)]),
    ("offset-tent",
     [(0.5, 0.0), (1.5, 1.0), (2.5, 0.0)],
     [(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]),
]


def lipschitz_test_bank(curve=None):
    """Five 1-Lipschitz toric test families at the places {inf, 2}."""
    curve = curve or QCurve()
    arch = curve.arch_place()
    two = curve.prime_place(2)
    bank = []
    for fid, arch_kinks, two_kinks in _BANK:
        fam = TestFunctionFamily({
            arch: ArchTestFn(profile=PLProfile(arch_kinks)),
            two: NonarchTestFn(profile=PLProfile(two_kinks)),
        })
        bank.append((fid, fam))
    return bank


_ROOF_XS = [Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4),
            Fraction(1)]


def _random_roof(rng, scale: float) -> Roof:
    base = float(rng.uniform(-scale, scale))
    slopes = sorted((float(s) for s in rng.uniform(-2 * scale, 2 * scale, 4)),
                    reverse=True)
    pts = [(_ROOF_XS[0], base)]
    value = base
    for x, s in zip(_ROOF_XS[1:], slopes):
        value += 0.25 * s
        pts.append((x, value))
    return Roof(pts)


def random_toric_family(rng, level: int = 1, curve=None, scale: float = 0.6):
    """Random concave roofs at inf and 2 over an otherwise flat family.

    Resamples until |G(0) + G(1)| >= 0.05 for the combined transform,
    since that boundary sum is the leading coefficient of the lattice
    chi-volume error and the error-decay diagnostics degenerate when it
    vanishes.
    """
    curve = curve or QCurve()
    arch = curve.arch_place()
    two = curve.prime_place(2)
    w_arch, w_two = float(arch.weight), float(two.weight)
    while True:
        roof_arch = _random_roof(rng, scale)
        roof_two = _random_roof(rng, scale)
        edge = (w_arch * (roof_arch.eval(0) + roof_arch.eval(1))
                + w_two * (roof_two.eval(0) + roof_two.eval(1)))
        if abs(edge) >= 0.05:
            break
    return MetricFamily(curve, level, exceptions={
        arch: ToricMetric(level, roof_arch),
        two: ToricMetric(level, roof_two),
    })


def random_test_family(rng, places, amp: float = 0.1):
    """Small random PL test profiles at the given places."""
    grid = [-2.0, -1.0, 0.0, 1.0, 2.0]
    entries = {}
    for place in places:
        values = [float(v) for v in rng.uniform(-amp, amp, len(grid))]
        profile = PLProfile(list(zip(grid, values)))
        if place.is_arch:
            entries[place] = ArchTestFn(profile=profile)
        else:
            entries[place] = NonarchTestFn(profile=profile)
    return TestFunctionFamily(entries)


def named_family(name: str, curve=None, level: int = 1) -> MetricFamily:
    """Metric family from a short descriptor: flat, tent, tilt, shift:R."""
    curve = curve or QCurve()
    if name == "flat":
        return MetricFamily(curve, level)
    arch = curve.arch_place()
    if name == "tent":
        roof = Roof([(Fraction(0), 0.0), (Fraction(1, 2), 0.25),
                     (Fraction(1), 0.0)])
    elif name == "tilt":
        roof = Roof([(Fraction(0), 0.0), (Fraction(1), 0.25)])
    elif name.startswith("shift:"):
        roof = Roof.constant(float(parse_rational(name[len("shift:"):])))
    else:
        raise ValueError(f"unknown metric family {name!r}")
    return MetricFamily(curve, level,
                        exceptions={arch: ToricMetric(level, roof)})


def radon_example(case: str):
    """Canned density/measure pairs for the Radon-Nikodym checker.

    constant: the density 1, which always passes.
    bump: density 1 except a bump on the Gauss atom at 2, which fails
          and reports the place.
    ghost: a wild density carried only by a weight-zero place, which
           passes because zero-mass places cannot offend.
    """
    curve = QCurve()
    eta = monge_ampere_family(MetricFamily(curve, 1))
    arch = curve.arch_place()
    two = curve.prime_place(2)
    unit_arch = ArchTestFn(profile=PLProfile.constant(1.0))
    unit_two = NonarchTestFn(profile=PLProfile.constant(1.0))
    if case == "constant":
        density = TestFunctionFamily({arch: unit_arch, two: unit_two})
    elif case == "bump":
        bump = PLProfile([(-1.0, 1.0), (0.0, 1.5), (1.0, 1.0)])
        density = TestFunctionFamily({
            arch: unit_arch,
            two: NonarchTestFn(profile=bump),
        })
    elif case == "ghost":
        ghost = Place("prime", "7", Fraction(0))
        wild = PLProfile([(-1.0, 1.0), (0.0, 9.0), (1.0, 1.0)])
        density = TestFunctionFamily({ghost: NonarchTestFn(profile=wild)})
    else:
        raise ValueError(f"unknown density example {case!r}")
    return density, eta
