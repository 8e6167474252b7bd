"""Generic small sequences and numerical equidistribution on the line.

Closed-point sequences come from iterated preimages of a rational
target under a polynomial endomorphism; their Galois orbits become
local measures (complex roots at the archimedean place, Newton-polygon
valuations at the finite ones), the delta functional averages test
functions over those orbits, and the limit functional integrates the
same functions against the Monge-Ampere family of the metric.  On top
of that sit normalized heights of closed points, an essential-minimum
bracket, and the convergence report that tabulates delta-vs-limit gaps
along a sequence.
"""

import math
from fractions import Fraction

import numpy as np

from .chivol import asymptotic_max_slope, chi_volume_closed_form
from .curves import QCurve
from .dynamics import Endomorphism, _compose_forms, _pad_form, canonical_height
from .measures import PointMass, SegmentAtoms, integrate_global, monge_ampere_family
from .points import (
    ClosedPoint,
    _primitive,
    arch_roots,
    irreducible_factors,
    newton_polygon_valuations,
)
from .utils import factor_int, format_rational, parse_rational

WHOLE_SPACE = "X"

_SQFREE_PRIMES = (10007, 10009, 10037, 10039, 10061)


class GenericSequence:
    """Materialized sequence of closed points with its height trace.

    `rate` records the degree of the generating map when the sequence
    comes from iterated preimages, in which case the heights obey
    h_n = h_1 / rate^(n-1) exactly and smallness is certified from that
    functional equation.
    """

    def __init__(self, descriptor, points, heights, rate=None):
        if len(points) != len(heights):
            raise ValueError("points and heights must have equal length")
        self.descriptor = str(descriptor)
        self.points = list(points)
        self.heights = [float(h) for h in heights]
        self.rate = None if rate is None else int(rate)

    def __len__(self):
        return len(self.points)

    def is_generic(self) -> bool:
        """Pairwise distinct closed points; on the line that is enough."""
        return len(set(self.points)) == len(self.points)

    def is_small(self, tol: float = 1e-9) -> bool:
        """Whether the height trace certifies convergence to zero."""
        hs = self.heights
        if all(h <= tol for h in hs):
            return True
        if self.rate is not None and self.rate >= 2:
            lead = hs[0]
            return all(
                abs(h - lead / self.rate**k) <= tol * max(1.0, lead)
                for k, h in enumerate(hs)
            )
        if len(hs) < 2:
            return False
        if any(b > a + tol for a, b in zip(hs, hs[1:])):
            return False
        return hs[-1] <= hs[0] * 0.75 ** (len(hs) - 1) + tol

    def to_json(self):
        return {
            "descriptor": self.descriptor,
            "degrees": [Y.degree for Y in self.points],
            "heights": list(self.heights),
        }


def _poly_gcd_mod(a, b, p):
    def reduce(c):
        c = [x % p for x in c]
        while c and c[-1] == 0:
            c.pop()
        return c

    a, b = reduce(a), reduce(b)
    while b:
        inv = pow(b[-1], p - 2, p)
        while len(a) >= len(b):
            lead = a[-1] * inv % p
            off = len(a) - len(b)
            for j in range(len(b)):
                a[off + j] = (a[off + j] - lead * b[j]) % p
            while a and a[-1] == 0:
                a.pop()
            if not a:
                break
        a, b = b, a
    return a


def _squarefree_certificate(coeffs) -> bool:
    """True when gcd(P, P') is constant mod some good prime.

    Coprimality mod p forces coprimality over the rationals, so a single
    success certifies squarefreeness; polynomials with a repeated factor
    can never pass.
    """
    deriv = [k * c for k, c in enumerate(coeffs)][1:]
    for p in _SQFREE_PRIMES:
        if coeffs[-1] % p == 0:
            continue
        if len(_poly_gcd_mod(list(coeffs), list(deriv), p)) == 1:
            return True
    return False


def small_sequence_generate(f: Endomorphism, target, N: int) -> GenericSequence:
    """Closed points cut out by the iterated preimages of a target.

    Y_n is the largest-degree irreducible factor of the numerator of
    f^n(z) - target, ties broken by lexicographically smallest
    coefficient tuple; the height trace is h(target) / deg(f)^n by the
    functional equation of the canonical height.
    """
    if N < 1:
        raise ValueError("sequence length must be at least 1")
    d = f.degree
    if d < 2:
        raise ValueError("preimage sequences need a map of degree at least 2")
    beta = parse_rational(target)
    a, b = beta.numerator, beta.denominator
    outer = (_pad_form(f._lift_num, d), _pad_form(f._lift_den, d))
    forms = outer
    points = []
    for n in range(1, N + 1):
        if n > 1:
            forms = _compose_forms(outer, forms)
        fiber = _primitive([int(b * fc - a * gc)
                            for fc, gc in zip(forms[0], forms[1])])
        if len(fiber) < 2:
            raise ValueError("the fiber is empty; choose a non-exceptional target")
        if not _squarefree_certificate(fiber):
            raise ValueError(
                "iterated preimages are not squarefree; "
                "choose a non-exceptional target")
        factors = irreducible_factors(list(fiber))
        top = max(len(c) - 1 for c, _ in factors)
        pick = min(c for c, _ in factors if len(c) - 1 == top)
        points.append(ClosedPoint(pick, _trusted=True))
    if len(set(points)) != len(points):
        raise ValueError("chosen fiber factors repeat; "
                         "choose a non-preperiodic target")
    h0 = canonical_height(f, beta)
    heights = [h0 / d**n for n in range(1, N + 1)]
    descriptor = (f"roots of f^n(z) = {format_rational(beta)} for n = 1..{N}, "
                  f"f of degree {d}")
    return GenericSequence(descriptor, points, heights, rate=d)


def _scaled_residual(coeffs, roots):
    """max |A(z)| / max|coeffs| over the computed roots."""
    top = max(abs(c) for c in coeffs)
    scaled = np.array([float(Fraction(int(c), top)) for c in coeffs])
    acc = np.zeros(len(roots), dtype=complex)
    for c in scaled[::-1]:
        acc = acc * roots + c
    return float(np.max(np.abs(acc))) if len(roots) else 0.0


def galois_orbit_local_points(Y: ClosedPoint, place, budget: int = 2048):
    """Galois orbit of a closed point as a local measure of mass one."""
    if Y.is_infinity:
        raise ValueError("the point at infinity has no affine Galois orbit")
    deg = Y.degree
    if place.kind == "copy":
        # trivial absolute value: everything sits at valuation zero
        v = math.inf if Y.coeffs[0] == 0 else 0.0
        return SegmentAtoms([(v, 1.0)])
    if place.is_arch:
        if deg > budget:
            raise ValueError(
                f"degree {deg} exceeds the root-finder budget {budget}")
        roots = arch_roots(Y)
        top = max(1.0, float(np.max(np.abs(roots)))) if deg else 1.0
        gate = 1e-12 * math.exp(min(700.0, deg * math.log(top)))
        worst = _scaled_residual(Y.coeffs, roots)
        if worst > gate:
            raise ArithmeticError(
                f"root refinement did not converge: scaled residual {worst:.3e} "
                f"exceeds the gate {gate:.3e}")
        return PointMass([(z, 1.0 / deg) for z in roots])
    if place.kind == "prime":
        if Y.coeffs[0] == 0:
            return SegmentAtoms([(math.inf, 1.0)])
        vals = newton_polygon_valuations(Y.coeffs, int(place.key))
        return SegmentAtoms([(float(v), m / deg) for v, m in vals])
    raise ValueError(f"no orbit data at places of kind {place.kind!r}")


def delta_functional(Y: ClosedPoint, phi, f, places=None,
                     budget: int = 2048) -> float:
    """Weighted orbit averages of a test family over a place set.

    In dimension zero the average does not depend on the metric family;
    `phi` fixes the ambient polarization and keeps the signature aligned
    with the limit functional.  `places` is an optional predicate.
    """
    del phi
    total = 0.0
    for place in f.places():
        if places is not None and not places(place):
            continue
        mu = galois_orbit_local_points(Y, place, budget=budget)
        total += float(place.weight) * mu.integrate(f.get(place))
    return total


def limit_functional(phi, f, places=None) -> float:
    """Degree-normalized Monge-Ampere integral of a test family."""
    if phi.level < 1:
        raise ValueError("the limit functional needs a positive level")
    eta = monge_ampere_family(phi)
    return integrate_global(eta, f, places) / phi.level


def _support_places(curve, coeffs):
    out = set()
    for c in (coeffs[0], coeffs[-1]):
        c = abs(int(c))
        if c > 1:
            for p in factor_int(c):
                out.add(curve.prime_place(p))
    return out


def _left_tail(pl_curve) -> float:
    return pl_curve.eval(pl_curve.kinks[0][0] - 1.0)


def _cross_check_height(Y, phi, h, tol=1e-6):
    for place in phi.listed_places():
        metric = phi.local(place)
        if metric.variant == "dynamical" and Y.is_rational():
            ref = canonical_height(metric.f, Y.as_rational())
            if abs(ref - h) > tol * max(1.0, abs(ref)):
                raise ArithmeticError(
                    f"height cross-check failed: local potentials give {h!r}, "
                    f"telescoping gives {ref!r}")
            return


def normalized_height(Y, phi) -> float:
    """Height of a closed point, or of the whole line, for a metric family.

    Dimension zero: the orbit average of -ln of the norm of the section 1
    summed over the places (the finite support of the point plus every
    listed place).  The whole space gets the chi-volume value; a
    dynamical family is cross-checked against the telescoping height.
    """
    if Y is None or (isinstance(Y, str) and Y == WHOLE_SPACE):
        return phi.level * chi_volume_closed_form(phi) / 2.0
    if Y.is_infinity:
        raise ValueError("heights of the point at infinity are not supported "
                         "by the section 1")
    curve = phi.curve
    if not isinstance(curve, QCurve):
        raise ValueError("closed-point heights live over the rational base")
    places = {curve.arch_place()}
    places.update(phi.listed_places())
    places.update(_support_places(curve, Y.coeffs))
    roots = None
    total = 0.0
    for place in sorted(places, key=lambda w: (w.kind, w.key)):
        metric = phi.local(place)
        if place.is_arch:
            if roots is None:
                roots = arch_roots(Y)
            part = math.fsum(metric.potential_at(z) for z in roots)
        else:
            pot = metric.potential_curve()
            if Y.coeffs[0] == 0:
                part = _left_tail(pot)
            else:
                lp = math.log(int(place.key))
                part = math.fsum(
                    mult * pot.eval(-float(v) * lp)
                    for v, mult in newton_polygon_valuations(
                        Y.coeffs, int(place.key)))
        total += float(place.weight) * part
    h = total / Y.degree
    _cross_check_height(Y, phi, h)
    return h


def _cyclotomic_coeffs(m: int):
    from sympy import Poly, cyclotomic_poly, symbols

    z = symbols("z")
    return tuple(int(c) for c in reversed(Poly(cyclotomic_poly(m, z), z).all_coeffs()))


def essential_minimum_estimate(phi, degree_bound: int = 4,
                               height_budget: int = 8):
    """Bracket the essential minimum of the heights of a metric family.

    Lower bound: level times the maximum of the concave transform, which
    bounds every height of a nonzero finite point from below through the
    product formula.  Upper bound: the least height over an enumerated
    family of closed points (rationals and cyclotomics over the rational
    base, nonzero constants over a function field), any finite set of
    which can be excluded without changing the essential minimum.
    """
    if degree_bound < 1 or height_budget < 1:
        raise ValueError("empty candidate enumeration")
    lower = phi.level * asymptotic_max_slope(phi)
    curve = phi.curve
    if isinstance(curve, QCurve):
        candidates = []
        for den in range(1, height_budget + 1):
            for num in range(-height_budget, height_budget + 1):
                if num != 0 and math.gcd(abs(num), den) == 1:
                    candidates.append(
                        ClosedPoint.from_rational(Fraction(num, den)))
        if degree_bound >= 2:
            for m in range(3, 4 * degree_bound + 1):
                coeffs = _cyclotomic_coeffs(m)
                if len(coeffs) - 1 <= degree_bound:
                    candidates.append(ClosedPoint(coeffs, _trusted=True))
        upper = min(normalized_height(Y, phi) for Y in candidates)
    else:
        # nonzero constants have valuation zero at every place, so they
        # share one height: the weighted sum of the potentials at t = 0
        upper = math.fsum(
            float(place.weight) * phi.local(place).potential_curve().eval(0.0)
            for place in phi.listed_places())
    return (lower, upper)


def convergence_report(seq: GenericSequence, phi, test_bank, places=None,
                       budget: int = 2048):
    """Delta-vs-limit table for a sequence and a bank of test families.

    Rows carry (n, f_id, delta_n, delta_x, gap, height); the trend entry
    per test family is the fraction of consecutive gap pairs that do not
    increase.  Galois orbits are computed once per point and place.
    """
    bank = []
    for i, entry in enumerate(test_bank):
        if isinstance(entry, tuple):
            bank.append((str(entry[0]), entry[1]))
        else:
            bank.append((f"f{i}", entry))
    eta = monge_ampere_family(phi)
    limits = {
        fid: integrate_global(eta, fam, places) / phi.level
        for fid, fam in bank
    }
    orbits = {}
    rows = []
    gaps = {fid: [] for fid, _ in bank}
    for idx, Y in enumerate(seq.points):
        for fid, fam in bank:
            val = 0.0
            for place in fam.places():
                if places is not None and not places(place):
                    continue
                key = (idx, place.kind, place.key)
                mu = orbits.get(key)
                if mu is None:
                    mu = galois_orbit_local_points(Y, place, budget=budget)
                    orbits[key] = mu
                val += float(place.weight) * mu.integrate(fam.get(place))
            gap = abs(val - limits[fid])
            gaps[fid].append(gap)
            rows.append({
                "n": idx + 1,
                "f_id": fid,
                "delta_n": val,
                "delta_x": limits[fid],
                "gap": gap,
                "height": seq.heights[idx],
            })
    trend = {}
    for fid, gs in gaps.items():
        pairs = list(zip(gs, gs[1:]))
        if pairs:
            trend[fid] = sum(b <= a + 1e-12 for a, b in pairs) / len(pairs)
        else:
            trend[fid] = 1.0
    summaries = [
        {"seq": seq.descriptor, "f_id": fid, "gaps": gaps[fid],
         "heights": list(seq.heights)}
        for fid, _ in bank
    ]
    return {"descriptor": seq.descriptor, "rows": rows, "trend": trend,
            "summaries": summaries}
