"""Closed points of the projective line over the rationals.

A closed point is a Galois orbit of algebraic numbers, stored as the
primitive integer minimal polynomial (ascending coefficients, positive
leading coefficient), plus a separate marker for the point at infinity.
Factorization of integer polynomials runs certificate-first: zero and
rational roots are stripped exactly, root-of-unity polynomials split
into cyclotomic parts, and Eisenstein or prime-power criteria settle
binomials before any general-purpose fallback is attempted.
"""

import math
from fractions import Fraction

import numpy as np

from .curves import _padic_valuation
from .polyroots import all_roots
from .utils import factor_int, log_int

_FALLBACK_DEGREE_CAP = 192


def _primitive(coeffs) -> tuple:
    """Clear denominators, divide out content, make the lead positive."""
    fracs = [Fraction(c) for c in coeffs]
    while fracs and fracs[-1] == 0:
        fracs.pop()
    if not fracs:
        raise ValueError("zero polynomial")
    den = 1
    for c in fracs:
        den = den * c.denominator // math.gcd(den, c.denominator)
    ints = [int(c * den) for c in fracs]
    g = 0
    for c in ints:
        g = math.gcd(g, c)
    ints = [c // g for c in ints]
    if ints[-1] < 0:
        ints = [-c for c in ints]
    return tuple(ints)


def _divmod_exact(num, den):
    """Divide integer polynomials over the rationals; both parts returned."""
    num = [Fraction(c) for c in num]
    den = [Fraction(c) for c in den]
    q = [Fraction(0)] * max(1, len(num) - len(den) + 1)
    r = list(num)
    for i in range(len(num) - len(den), -1, -1):
        c = r[i + len(den) - 1] / den[-1]
        q[i] = c
        if c != 0:
            for j, d in enumerate(den):
                r[i + j] -= c * d
    while len(r) > 1 and r[-1] == 0:
        r.pop()
    return q, r


def _int_nthroot(n: int, k: int) -> int:
    """Floor of the k-th root of a nonnegative integer."""
    if n < 0:
        raise ValueError("negative radicand")
    if n == 0:
        return 0
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


def _fraction_kth_root(c: Fraction, k: int):
    """Exact k-th root of a rational, or None when no rational root exists."""
    if c == 0:
        return Fraction(0)
    neg = c < 0
    if neg and k % 2 == 0:
        return None
    num, den = abs(c.numerator), c.denominator
    rn, rd = _int_nthroot(num, k), _int_nthroot(den, k)
    if rn**k != num or rd**k != den:
        return None
    root = Fraction(rn, rd)
    return -root if neg else root


def _eisenstein_certified(coeffs) -> bool:
    lower = [abs(c) for c in coeffs[:-1] if c != 0]
    if not lower:
        return False
    g = 0
    for c in lower:
        g = math.gcd(g, c)
    if g <= 1 or g.bit_length() > 128:
        return False
    for p in factor_int(g):
        if coeffs[-1] % p != 0 and coeffs[0] % (p * p) != 0:
            return True
    return False


def _binomial_irreducible(coeffs):
    """Prime-power test for a*z^n + b; True, False, or None when unsure."""
    n = len(coeffs) - 1
    c = Fraction(-coeffs[0], coeffs[-1])
    for p in factor_int(n):
        if _fraction_kth_root(c, p) is not None:
            return False
    if n % 4 == 0:
        t = _fraction_kth_root(-c / 4, 4)
        if t is not None:
            return False
    return True


def _cyclotomic_coeffs(d: int) -> tuple:
    from sympy import Poly, cyclotomic_poly, symbols

    x = symbols("x")
    desc = Poly(cyclotomic_poly(d, x), x).all_coeffs()
    return tuple(int(c) for c in reversed(desc))


def _sympy_factors(coeffs):
    from sympy import Poly, symbols

    x = symbols("x")
    _, parts = Poly(list(reversed(coeffs)), x).factor_list()
    out = []
    for f, m in parts:
        fc = [int(c) for c in reversed(f.all_coeffs())]
        if fc[-1] < 0:
            fc = [-c for c in fc]
        out.append((tuple(fc), int(m)))
    return out


def _rational_root_candidates(c0: int, cn: int):
    if abs(c0).bit_length() > 64 or abs(cn).bit_length() > 64:
        return
    def divisors(n):
        ds = [1]
        for p, e in factor_int(n).items():
            ds = [d * p**i for d in ds for i in range(e + 1)]
        return ds
    for q in divisors(cn):
        for p in divisors(c0):
            if math.gcd(p, q) == 1:
                yield Fraction(p, q)
                yield Fraction(-p, q)


def _eval_exact(coeffs, r: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * r + c
    return acc


def irreducible_factors(coeffs):
    """Factor an integer polynomial into primitive irreducible parts.

    Returns [(coeff_tuple, multiplicity)] sorted by degree then by the
    ascending coefficient tuple.  The content and overall sign are dropped.
    """
    poly = list(_primitive(coeffs))
    found: dict[tuple, int] = {}

    def add(f, m=1):
        found[f] = found.get(f, 0) + m

    zero_mult = 0
    while poly[0] == 0:
        poly.pop(0)
        zero_mult += 1
    if zero_mult:
        add((0, 1), zero_mult)
    n = len(poly) - 1

    if n >= 1 and poly == [-1] + [0] * (n - 1) + [1]:
        for d in range(1, n + 1):
            if n % d == 0:
                add(_cyclotomic_coeffs(d))
        return _sorted_factors(found)
    if n >= 1 and poly == [1] + [0] * (n - 1) + [1]:
        for d in range(1, 2 * n + 1):
            if 2 * n % d == 0 and n % d != 0:
                add(_cyclotomic_coeffs(d))
        return _sorted_factors(found)

    if n >= 1:
        for r in _rational_root_candidates(poly[0], poly[-1]):
            while len(poly) > 1 and _eval_exact(poly, r) == 0:
                add(_primitive([-r.numerator, r.denominator]))
                q, rem = _divmod_exact(poly, [-r.numerator, r.denominator])
                assert rem == [0]
                poly = list(_primitive(q))
    n = len(poly) - 1

    if n >= 1:
        if n <= 3:
            add(tuple(poly))  # no rational roots left, so irreducible
        elif _eisenstein_certified(poly):
            add(tuple(poly))
        elif sum(1 for c in poly if c != 0) == 2 and _binomial_irreducible(poly):
            add(tuple(poly))
        elif n > _FALLBACK_DEGREE_CAP:
            raise ValueError(
                f"factorization degree cap exceeded: {n} > {_FALLBACK_DEGREE_CAP}")
        else:
            for f, m in _sympy_factors(poly):
                add(f, m)
    return _sorted_factors(found)


def _sorted_factors(found):
    return sorted(found.items(), key=lambda fm: (len(fm[0]), fm[0]))


class ClosedPoint:
    """A closed point of the projective line, or the point at infinity."""

    __slots__ = ("coeffs", "is_infinity")

    def __init__(self, coeffs=None, *, _infinity=False, _trusted=False):
        self.is_infinity = _infinity
        if _infinity:
            self.coeffs = None
            return
        poly = _primitive(coeffs)
        if len(poly) < 2:
            raise ValueError("constant polynomial defines no point")
        if not _trusted:
            fs = irreducible_factors(poly)
            if fs != [(poly, 1)]:
                raise ValueError(f"reducible polynomial: factors {fs}")
        self.coeffs = poly

    @classmethod
    def from_rational(cls, r) -> "ClosedPoint":
        r = Fraction(r)
        return cls([-r.numerator, r.denominator], _trusted=True)

    @classmethod
    def infinity(cls) -> "ClosedPoint":
        return cls(_infinity=True)

    @property
    def degree(self) -> int:
        return 1 if self.is_infinity else len(self.coeffs) - 1

    def is_rational(self) -> bool:
        return self.is_infinity or self.degree == 1

    def as_rational(self) -> Fraction:
        if self.is_infinity or self.degree != 1:
            raise ValueError("not a finite rational point")
        return Fraction(-self.coeffs[0], self.coeffs[1])

    def __eq__(self, other):
        return (isinstance(other, ClosedPoint)
                and self.is_infinity == other.is_infinity
                and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.is_infinity, self.coeffs))

    def __repr__(self):
        if self.is_infinity:
            return "ClosedPoint(infinity)"
        return f"ClosedPoint({list(self.coeffs)})"


def newton_polygon_valuations(coeffs, p: int):
    """Valuations of the roots of an integer polynomial at a prime.

    Reads the slopes of the lower convex hull of (i, v_p(c_i)).  Returns
    [(valuation, multiplicity)] with valuations ascending; the constant
    term must be nonzero.
    """
    poly = _primitive(coeffs)
    if poly[0] == 0:
        raise ValueError("zero constant term has no finite valuation")
    pts = [(i, Fraction(_padic_valuation(Fraction(c), p)))
           for i, c in enumerate(poly) if c != 0]
    hull = []
    for pt in pts:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            if (y1 - y0) * (pt[0] - x1) >= (pt[1] - y1) * (x1 - x0):
                hull.pop()
            else:
                break
        hull.append(pt)
    out = []
    for (x0, y0), (x1, y1) in zip(hull, hull[1:]):
        slope = (y1 - y0) / (x1 - x0)
        out.append((-slope, int(x1 - x0)))
    out.sort(key=lambda vm: vm[0])
    return out


def arch_roots(point: ClosedPoint) -> np.ndarray:
    """Complex roots of the minimal polynomial, scaled safely for floats."""
    if point.is_infinity:
        raise ValueError("infinity has no affine roots")
    top = max(abs(c) for c in point.coeffs)
    shift = max(0, top.bit_length() - 500)
    scaled = [float(Fraction(c, 1 << shift)) for c in point.coeffs]
    return all_roots(scaled)


def naive_height(point: ClosedPoint) -> float:
    """Standard absolute logarithmic height of a closed point.

    Equals log(Mahler measure)/degree of the primitive minimal polynomial.
    Two-term polynomials are handled in closed form; otherwise the
    archimedean roots are located numerically.
    """
    if point.is_infinity:
        return 0.0
    poly = point.coeffs
    n = len(poly) - 1
    support = [abs(c) for c in poly if c != 0]
    if len(support) <= 2:
        return log_int(max(support)) / n
    total = log_int(abs(poly[-1]))
    for z in arch_roots(point):
        total += max(0.0, math.log(abs(z)))
    return total / n
