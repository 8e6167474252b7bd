"""Piecewise-linear toolkit for toric data on P^1.

Two dual representations drive everything toric:

* `Roof`: a concave piecewise-linear function on the normalized interval
  [0, 1].  A toric metric on O(n) stores its roof theta so that the sup norm
  of the monomial z^k is exp(-n * theta(k/n)).
* `PLCurve`: a piecewise-linear function of the valuation parameter
  t = ln|z| with finitely many kinks and fixed tail slopes.  The potential of
  a toric metric on O(n) is the convex curve
  u(t) = n * max_x (x t + theta(x)), with tail slopes 0 and n.

`potential_from_roof` and `legendre_roof` convert between the two exactly
(both sides are PL, so Legendre duality is finite bookkeeping, not
quadrature).  `PLCurve.convex_hull` is what makes twisted potentials
integrable: only the convex envelope of a potential is visible to section
sup norms.
"""

from __future__ import annotations

import bisect
import math
from fractions import Fraction

from .utils import format_rational, parse_rational

_SLOPE_TOL = 1e-9


class Roof:
    """Concave PL function on [0,1]; breakpoints rational, values float."""

    def __init__(self, points):
        pts = []
        for x, v in points:
            xf = x if isinstance(x, Fraction) else parse_rational(x)
            pts.append((xf, float(v)))
        if len(pts) < 2:
            raise ValueError("roof needs at least the two endpoints")
        if pts[0][0] != 0 or pts[-1][0] != 1:
            raise ValueError("roof breakpoints must start at 0 and end at 1")
        for (x0, _), (x1, _) in zip(pts, pts[1:]):
            if not x1 > x0:
                raise ValueError("roof breakpoints must be strictly increasing")
        slopes = [
            (v1 - v0) / float(x1 - x0) for (x0, v0), (x1, v1) in zip(pts, pts[1:])
        ]
        for s0, s1 in zip(slopes, slopes[1:]):
            if s1 > s0 + _SLOPE_TOL:
                raise ValueError("roof must be concave (nonincreasing slopes)")
        self.points = pts
        self._xs = [float(x) for x, _ in pts]

    @classmethod
    def constant(cls, m: float) -> "Roof":
        return cls([(Fraction(0), m), (Fraction(1), m)])

    def eval(self, x) -> float:
        xf = float(x)
        if xf < -1e-12 or xf > 1 + 1e-12:
            raise ValueError("roof argument outside [0,1]")
        i = bisect.bisect_right(self._xs, xf) - 1
        i = min(max(i, 0), len(self.points) - 2)
        (x0, v0), (x1, v1) = self.points[i], self.points[i + 1]
        w = (xf - float(x0)) / float(x1 - x0)
        return v0 * (1 - w) + v1 * w

    def slopes(self):
        return [
            (v1 - v0) / float(x1 - x0)
            for (x0, v0), (x1, v1) in zip(self.points, self.points[1:])
        ]

    def integral(self) -> float:
        total = 0.0
        for (x0, v0), (x1, v1) in zip(self.points, self.points[1:]):
            total += float(x1 - x0) * (v0 + v1) / 2.0
        return total

    def max_value(self) -> float:
        return max(v for _, v in self.points)

    def min_value(self) -> float:
        return min(v for _, v in self.points)

    def argmax(self) -> Fraction:
        return max(self.points, key=lambda p: p[1])[0]

    def shift(self, c: float) -> "Roof":
        return Roof([(x, v + c) for x, v in self.points])

    @classmethod
    def combine(cls, terms) -> "Roof":
        """Affine combination sum c_i * roof_i (concave for c_i >= 0)."""
        xs = sorted({x for _, r in terms for x, _ in r.points})
        pts = [(x, sum(c * r.eval(x) for c, r in terms)) for x in xs]
        return cls(pts)

    def to_json(self):
        return [[format_rational(x), v] for x, v in self.points]

    @classmethod
    def from_json(cls, blob) -> "Roof":
        return cls([(parse_rational(x), v) for x, v in blob])

    def __repr__(self):
        inner = ", ".join(f"({x}, {v:.4g})" for x, v in self.points)
        return f"Roof[{inner}]"


class PLCurve:
    """PL function of t with kinks [(t, value)] and constant tail slopes."""

    def __init__(self, kinks, slope_left: float, slope_right: float):
        ks = sorted((float(t), float(u)) for t, u in kinks)
        if not ks:
            raise ValueError("PLCurve needs at least one anchor point")
        merged = [ks[0]]
        for t, u in ks[1:]:
            if t - merged[-1][0] < 1e-13:
                continue
            merged.append((t, u))
        self.kinks = merged
        self.slope_left = float(slope_left)
        self.slope_right = float(slope_right)
        self._ts = [t for t, _ in merged]

    def eval(self, t: float) -> float:
        t = float(t)
        ks = self.kinks
        if t <= ks[0][0]:
            return ks[0][1] + self.slope_left * (t - ks[0][0])
        if t >= ks[-1][0]:
            return ks[-1][1] + self.slope_right * (t - ks[-1][0])
        i = bisect.bisect_right(self._ts, t) - 1
        (t0, u0), (t1, u1) = ks[i], ks[i + 1]
        w = (t - t0) / (t1 - t0)
        return u0 * (1 - w) + u1 * w

    def piece_slopes(self):
        """Slopes of all pieces, tails included: length len(kinks)+1."""
        inner = [
            (u1 - u0) / (t1 - t0)
            for (t0, u0), (t1, u1) in zip(self.kinks, self.kinks[1:])
        ]
        return [self.slope_left] + inner + [self.slope_right]

    def is_convex(self, tol: float = _SLOPE_TOL) -> bool:
        s = self.piece_slopes()
        return all(b >= a - tol for a, b in zip(s, s[1:]))

    def add(self, other: "PLCurve") -> "PLCurve":
        ts = sorted(set(self._ts) | set(other._ts))
        kinks = [(t, self.eval(t) + other.eval(t)) for t in ts]
        return PLCurve(
            kinks,
            self.slope_left + other.slope_left,
            self.slope_right + other.slope_right,
        )

    def scale(self, c: float) -> "PLCurve":
        return PLCurve(
            [(t, c * u) for t, u in self.kinks],
            c * self.slope_left,
            c * self.slope_right,
        )

    def add_scaled(self, other: "PLCurve", c: float) -> "PLCurve":
        return self.add(other.scale(c))

    def shift(self, c: float) -> "PLCurve":
        return PLCurve(
            [(t, u + c) for t, u in self.kinks], self.slope_left, self.slope_right
        )

    def convex_hull(self) -> "PLCurve":
        """Largest convex minorant (tail slopes preserved)."""
        pts = list(self.kinks)
        hull = []
        for p in pts:
            while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 1e-15:
                hull.pop()
            hull.append(p)
        # trim against the tail rays: leftmost slopes must be >= slope_left,
        # rightmost <= slope_right
        while len(hull) >= 2:
            s = (hull[1][1] - hull[0][1]) / (hull[1][0] - hull[0][0])
            if s < self.slope_left - 1e-15:
                hull.pop(0)
            else:
                break
        while len(hull) >= 2:
            s = (hull[-1][1] - hull[-2][1]) / (hull[-1][0] - hull[-2][0])
            if s > self.slope_right + 1e-15:
                hull.pop()
            else:
                break
        return PLCurve(hull, self.slope_left, self.slope_right)

    def ma_atoms(self, tol: float = 1e-12):
        """Slope-jump decomposition [(t, jump)] of a convex curve."""
        if not self.is_convex():
            raise ValueError("ma_atoms needs a convex curve; take convex_hull first")
        s = self.piece_slopes()
        out = []
        for i, (t, _) in enumerate(self.kinks):
            jump = s[i + 1] - s[i]
            if jump > tol:
                out.append((t, jump))
        return out

    def sup_abs_diff(self, other: "PLCurve") -> float:
        if (
            abs(self.slope_left - other.slope_left) > 1e-12
            or abs(self.slope_right - other.slope_right) > 1e-12
        ):
            return math.inf
        ts = sorted(set(self._ts) | set(other._ts))
        probes = [ts[0] - 1.0] + ts + [ts[-1] + 1.0]
        return max(abs(self.eval(t) - other.eval(t)) for t in probes)

    def __repr__(self):
        inner = ", ".join(f"({t:.4g}, {u:.4g})" for t, u in self.kinks)
        return (
            f"PLCurve[{self.slope_left:.3g} <- {inner} -> {self.slope_right:.3g}]"
        )


def _cross(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def potential_from_roof(roof: Roof, level: int) -> PLCurve:
    """u(t) = n max_x (x t + theta(x)): upper envelope of the support lines.

    Kinks sit at the negated roof slopes; collinear roof pieces merge.
    """
    n = int(level)
    if n < 1:
        raise ValueError("level must be a positive integer")
    slopes = roof.slopes()
    kinks = []
    for i, s in enumerate(slopes):
        t = -s
        x, v = roof.points[i]
        u = n * (float(x) * t + v)
        if kinks and abs(t - kinks[-1][0]) < 1e-13:
            continue
        kinks.append((t, u))
    return PLCurve(kinks, slope_left=0.0, slope_right=float(n))


def legendre_roof(pot: PLCurve, level: int) -> Roof:
    """Concave dual theta(x) = inf_t (u(t) - n x t) / n of a convex potential.

    Requires tail slopes 0 and n (an O(n)-potential).  Each affine piece of u
    with slope sigma contributes the roof point (sigma/n, intercept/n).
    """
    n = int(level)
    if abs(pot.slope_left) > 1e-9 or abs(pot.slope_right - n) > 1e-9:
        raise ValueError("potential tail slopes must be 0 and level")
    if not pot.is_convex():
        raise ValueError("legendre_roof needs a convex potential")
    s = pot.piece_slopes()
    pts = []
    for i in range(len(s)):
        # a point on piece i: kink i-1 on the right end or kink i on the left
        t, u = pot.kinks[min(i, len(pot.kinks) - 1)]
        x = s[i] / n
        c = (u - s[i] * t) / n
        x = min(max(x, 0.0), 1.0)
        xf = Fraction(x).limit_denominator(10**12)
        if pts and xf <= pts[-1][0]:
            continue
        pts.append((xf, c))
    if pts[0][0] != 0:
        pts.insert(0, (Fraction(0), pts[0][1]))  # defensive; slope_left == 0
    if pts[-1][0] != 1:
        pts.append((Fraction(1), pts[-1][1]))
    return Roof(pts)


class PLProfile:
    """Bounded PL test-function profile on the valuation line: PL between
    its kinks, constant beyond them (so it extends continuously to P^1)."""

    def __init__(self, kinks):
        ks = sorted((float(t), float(v)) for t, v in kinks)
        if not ks:
            raise ValueError("profile needs at least one point")
        self.kinks = ks
        self._ts = [t for t, _ in ks]

    @classmethod
    def constant(cls, c: float) -> "PLProfile":
        return cls([(0.0, c)])

    def eval(self, t: float) -> float:
        t = float(t)
        ks = self.kinks
        if t <= ks[0][0]:
            return ks[0][1]
        if t >= ks[-1][0]:
            return ks[-1][1]
        i = bisect.bisect_right(self._ts, t) - 1
        (t0, v0), (t1, v1) = ks[i], ks[i + 1]
        w = (t - t0) / (t1 - t0)
        return v0 * (1 - w) + v1 * w

    def scale(self, c: float) -> "PLProfile":
        return PLProfile([(t, c * v) for t, v in self.kinks])

    def is_constant(self, tol: float = 0.0) -> bool:
        v0 = self.kinks[0][1]
        return all(abs(v - v0) <= tol for _, v in self.kinks)

    def as_curve(self) -> PLCurve:
        return PLCurve(self.kinks, slope_left=0.0, slope_right=0.0)

    def bound(self) -> float:
        return max(abs(v) for _, v in self.kinks)

    def to_json(self):
        return [[t, v] for t, v in self.kinks]

    @classmethod
    def from_json(cls, blob) -> "PLProfile":
        return cls([(t, v) for t, v in blob])
