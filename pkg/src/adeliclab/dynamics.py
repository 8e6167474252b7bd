"""Canonical metrics and heights for endomorphisms of the projective line.

A degree-d endomorphism f with a chosen lift scalar determines a unique
semipositive metric on the degree-1 bundle satisfying the pullback
isometry.  Archimedean metrics are computed by the contracting potential
iteration with a certified geometric tail bound; finite places with good
reduction get the exact trivial metric, and monomial maps get exact
piecewise-linear limits everywhere.  Also here: canonical heights of
closed points by orbit telescoping, and compatibility factors for
commuting pairs.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .curves import QCurve, _padic_valuation
from .metrics import (
    FSQuotientMetric,
    GridSpec,
    LocalMetric,
    MetricFamily,
    ToricMetric,
)
from .piecewise import Roof
from .points import ClosedPoint, irreducible_factors, naive_height
from .utils import (
    factor_int,
    format_rational,
    log_fraction,
    log_int,
    parse_rational,
)

_DEFAULT_GRID = None


def _default_grid():
    global _DEFAULT_GRID
    if _DEFAULT_GRID is None:
        _DEFAULT_GRID = GridSpec()
    return _DEFAULT_GRID


def _roof_zero():
    return Roof([(Fraction(0), 0.0), (Fraction(1), 0.0)])


def _int_det(rows) -> int:
    """Bareiss fraction-free determinant of an integer matrix."""
    m = [list(r) for r in rows]
    n = len(m)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[-1][-1]


def _sylvester_resultant(a, b, d: int) -> int:
    """Resultant of two degree-d binary forms given by ascending coeffs."""
    da = list(reversed(list(a) + [0] * (d + 1 - len(a))))
    db = list(reversed(list(b) + [0] * (d + 1 - len(b))))
    rows = []
    for i in range(d):
        rows.append([0] * i + da + [0] * (d - 1 - i))
    for i in range(d):
        rows.append([0] * i + db + [0] * (d - 1 - i))
    return _int_det(rows)


class Endomorphism:
    """A rational self-map of P^1 of degree at least 2, with a lift scalar.

    The numerator and denominator are ascending rational coefficient
    lists; the scalar alpha_scale pins down the isomorphism between the
    pullback of the degree-1 bundle and its d-th power relative to the
    standard monomial lift.
    """

    def __init__(self, num, den, alpha_scale=1):
        self.num = _trim(num)
        self.den = _trim(den)
        self.alpha = parse_rational(alpha_scale)
        if self.alpha == 0:
            raise ValueError("alpha_scale must be nonzero")
        d = max(len(self.num), len(self.den)) - 1
        if d < 2:
            raise ValueError("degree must exceed 1")
        self.degree = d
        scale = 1
        for c in self.num + self.den:
            scale = scale * c.denominator // math.gcd(scale, c.denominator)
        lift_num = [int(c * scale) for c in self.num]
        lift_den = [int(c * scale) for c in self.den]
        g = 0
        for c in lift_num + lift_den:
            g = math.gcd(g, c)
        self._lift_num = tuple(c // g for c in lift_num)
        self._lift_den = tuple(c // g for c in lift_den)
        self._res = _sylvester_resultant(self._lift_num, self._lift_den, d)
        if self._res == 0:
            raise ValueError("numerator and denominator share a root")
        self._form_num = _pad_form(self.num, d)
        self._form_den = _pad_form(self.den, d)
        self._float_num = np.array([float(c) for c in self._form_num])
        self._float_den = np.array([float(c) for c in self._form_den])

    def primitive_resultant(self) -> int:
        return self._res

    def apply_pair(self, pair):
        """Exact image of a projective point given as a coprime pair."""
        p, q = int(pair[0]), int(pair[1])
        d = self.degree
        P = sum(c * p**k * q ** (d - k)
                for k, c in enumerate(_pad_form(self._lift_num, d)))
        Q = sum(c * p**k * q ** (d - k)
                for k, c in enumerate(_pad_form(self._lift_den, d)))
        if Q == 0:
            return (1, 0)
        if P == 0:
            return (0, 1)
        g = math.gcd(abs(P), abs(Q))
        s = 1 if Q > 0 else -1
        return (s * P // g, s * Q // g)

    def apply_fraction(self, r) -> Fraction:
        r = parse_rational(r)
        p, q = self.apply_pair((r.numerator, r.denominator))
        if q == 0:
            raise ValueError("image is the point at infinity")
        return Fraction(p, q)

    def apply_complex(self, z):
        z = complex(z)
        num = _horner(self.num, z)
        den = _horner(self.den, z)
        if den == 0:
            return complex(math.inf, 0.0)
        return num / den

    def to_json(self):
        return {
            "num": [format_rational(c) for c in self.num],
            "den": [format_rational(c) for c in self.den],
            "alpha": format_rational(self.alpha),
        }

    def __repr__(self):
        return f"Endomorphism(num={list(self.num)}, den={list(self.den)})"


def _trim(coeffs):
    out = [parse_rational(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    if not out:
        raise ValueError("zero polynomial")
    return tuple(out)


def _pad_form(coeffs, d: int):
    return tuple(coeffs) + (type(coeffs[0])(0),) * (d + 1 - len(coeffs))


def _horner(coeffs, z):
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * z + complex(float(c))
    return acc


def _monomial_ratio(f: Endomorphism):
    """a such that f = a*z^d, or None when f is not a top-degree monomial."""
    if len(f.den) != 1:
        return None
    if len(f.num) != f.degree + 1:
        return None
    if any(c != 0 for c in f.num[:-1]):
        return None
    return f.num[-1] / f.den[0]


def _is_naive(phi0) -> bool:
    return (isinstance(phi0, ToricMetric) and phi0.level == 1
            and phi0.roof.points == [(Fraction(0), 0.0), (Fraction(1), 0.0)])


def _check_start(phi0):
    if phi0 is None:
        return ToricMetric(1, _roof_zero())
    if phi0.level != 1:
        raise ValueError("starting metric must live at level 1")
    if not isinstance(phi0, (ToricMetric, FSQuotientMetric)):
        raise ValueError("starting metric must be toric or a Hermitian quotient")
    return phi0


def _homog_evaluator(phi0):
    """Degree-1 homogeneous extension of a starting potential.

    Returns U0 with U0(z, 1) = potential(z) and U0(s*v) = log|s| + U0(v),
    evaluated stably on sup-normalized coordinate arrays.
    """
    if isinstance(phi0, ToricMetric):
        xs = np.array([float(x) for x, _ in phi0.roof.points])
        ths = np.array([th for _, th in phi0.roof.points])

        def U0(X, Y):
            with np.errstate(divide="ignore"):
                lx = np.maximum(np.log(np.abs(X)), -1e300)
                ly = np.maximum(np.log(np.abs(Y)), -1e300)
            vals = (xs[:, None] * lx[None, :]
                    + (1.0 - xs)[:, None] * ly[None, :] + ths[:, None])
            return np.max(vals, axis=0)

        return U0

    ginv = np.asarray(phi0._inv, dtype=float)

    def U0(X, Y):
        v = np.stack([Y, X])
        q = np.einsum("ik,ij,jk->k", np.conj(v), ginv, v).real
        return 0.5 * np.log(q)

    return U0


def _orbit_rows(f: Endomorphism, zs, n: int, phi0, c_log: float):
    """Potentials of depth 0..n at the given complex points, one row each."""
    X = np.asarray(zs, dtype=complex)
    scalar = X.ndim == 0
    X = np.atleast_1d(X)
    Y = np.ones_like(X)
    m0 = np.maximum(np.abs(X), 1.0)
    X = X / m0
    Y = Y / m0
    L = np.log(m0)
    d = f.degree
    U0 = _homog_evaluator(phi0)
    rows = [L + U0(X, Y)]
    for k in range(n):
        Fv = _eval_form(f._float_num, X, Y)
        Gv = _eval_form(f._float_den, X, Y)
        m = np.maximum(np.abs(Fv), np.abs(Gv))
        if m.min() <= 0.0:
            raise ArithmeticError("orbit hit an exact common zero of the lift")
        L = d * L + np.log(m)
        X = Fv / m
        Y = Gv / m
        rows.append(float(d) ** -(k + 1) * (L + U0(X, Y)))
    if c_log != 0.0:
        for k in range(len(rows)):
            rows[k] = rows[k] + (1.0 - float(d) ** -k) / (d - 1) * c_log
    out = np.array(rows)
    return out[:, 0] if scalar else out


def _eval_form(coeffs, X, Y):
    """Evaluate sum_k c_k X^k Y^(d-k) on sup-normalized arrays."""
    d = len(coeffs) - 1
    acc = np.zeros_like(X)
    Xp = np.ones_like(X)
    xpow = []
    for _ in range(d + 1):
        xpow.append(Xp)
        Xp = Xp * X
    Yp = np.ones_like(Y)
    for k in range(d, -1, -1):
        if coeffs[k] != 0.0:
            acc = acc + coeffs[k] * xpow[k] * Yp
        Yp = Yp * Y
    return acc


class DynamicalMetric(LocalMetric):
    """Depth-n approximation of the canonical archimedean metric."""

    variant = "dynamical"
    level = 1

    def __init__(self, f: Endomorphism, place, depth: int, phi0=None):
        if place.kind != "arch":
            raise ValueError("iterated metrics are archimedean only")
        self.f = f
        self.place = place
        self.depth = int(depth)
        self.phi0 = _check_start(phi0)
        self._c_log = log_fraction(abs(f.alpha))

    def potential_at(self, z):
        rows = _orbit_rows(self.f, complex(z), self.depth, self.phi0,
                           self._c_log)
        return float(rows[-1])

    def potential_grid(self, zs):
        rows = _orbit_rows(self.f, zs, self.depth, self.phi0, self._c_log)
        return rows[-1]


@dataclass(frozen=True)
class TateApprox:
    place: object
    depth: int
    potential: LocalMetric
    lambda_sup: float
    error_bound: float


def _lambda_sup_arch(f: Endomorphism, grid=None) -> float:
    """Sup of the one-step potential defect, with a 1.05 safety factor."""
    grid = grid or _default_grid()
    naive = ToricMetric(1, _roof_zero())
    c_log = log_fraction(abs(f.alpha))
    rows = _orbit_rows(f, grid.points(), 1, naive, c_log)
    raw = float(np.max(np.abs(rows[1] - rows[0]))) * f.degree
    if raw < 1e-13:
        return 0.0
    return 1.05 * raw


def tate_local_potential(f: Endomorphism, place, n: int, phi0=None,
                         grid=None) -> TateApprox:
    """Depth-n canonical potential at one place, with a certified tail.

    The recorded error bound is lambda_sup * d^(-n) / (d-1); it is zero
    exactly when the returned potential is the limit itself (fixed points
    of the iteration, good reduction, and monomial maps).
    """
    phi0 = _check_start(phi0)
    d = f.degree

    if place.kind == "prime":
        if not _is_naive(phi0):
            raise ValueError("finite places support only the naive "
                             "starting metric")
        p = int(place.key)
        c_p = -_padic_valuation(f.alpha, p) * math.log(p)
        shift = c_p / (d - 1)
        if _padic_valuation(Fraction(f.primitive_resultant()), p) == 0:
            pot = ToricMetric(1, _roof_zero().shift(shift))
            return TateApprox(place, n, pot, 0.0, 0.0)
        a = _monomial_ratio(f)
        if a is not None:
            la = -_padic_valuation(a, p) * math.log(p)
            roof = Roof([(Fraction(0), shift),
                         (Fraction(1), shift + la / (d - 1))])
            return TateApprox(place, n, ToricMetric(1, roof), 0.0, 0.0)
        raise ValueError(
            f"bad reduction at prime {p}: only monomial maps are "
            "supported at finite places without good reduction")

    lam = _lambda_sup_arch(f, grid)
    c_log = log_fraction(abs(f.alpha))
    if _is_naive(phi0):
        if lam == 0.0:
            return TateApprox(place, n, phi0, 0.0, 0.0)
        a = _monomial_ratio(f)
        if a is not None:
            s0 = c_log / (d - 1)
            la = log_fraction(abs(a))
            roof = Roof([(Fraction(0), s0), (Fraction(1), s0 + la / (d - 1))])
            return TateApprox(place, n, ToricMetric(1, roof), lam, 0.0)
    pot = DynamicalMetric(f, place, n, phi0)
    return TateApprox(place, n, pot, lam, lam * float(d) ** -n / (d - 1))


def tate_grid_potentials(f: Endomorphism, n_max: int, grid=None, phi0=None):
    """Array of archimedean potentials, one row per depth 0..n_max."""
    grid = grid or _default_grid()
    phi0 = _check_start(phi0)
    c_log = log_fraction(abs(f.alpha))
    return _orbit_rows(f, grid.points(), n_max, phi0, c_log)


def canonical_metric_family(f: Endomorphism, tol: float = 1e-9, curve=None,
                            grid=None) -> MetricFamily:
    """Metric family within tol of the canonical one at every place.

    Finite places with good reduction and all places of monomial maps
    carry exact piecewise-linear potentials; the remaining archimedean
    metric is iterated to the depth forced by the tail bound.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    curve = curve or QCurve()
    arch = curve.arch_place()
    d = f.degree
    exceptions = {}

    candidates = set(factor_int(abs(f.primitive_resultant())))
    candidates |= set(factor_int(f.alpha.numerator))
    candidates |= set(factor_int(f.alpha.denominator))
    a = _monomial_ratio(f)
    if a is not None:
        candidates |= set(factor_int(a.numerator))
        candidates |= set(factor_int(a.denominator))
    for p in sorted(candidates):
        ta = tate_local_potential(f, curve.prime_place(p), 0)
        roof = ta.potential.roof
        if any(v != 0.0 for _, v in roof.points):
            exceptions[curve.prime_place(p)] = ta.potential

    lam = _lambda_sup_arch(f, grid)
    if a is not None or lam == 0.0:
        ta = tate_local_potential(f, arch, 0, grid=grid)
        roof = ta.potential.roof
        if any(v != 0.0 for _, v in roof.points):
            exceptions[arch] = ta.potential
    else:
        depth = max(1, math.ceil(math.log(lam / (tol * (d - 1)), d)))
        exceptions[arch] = DynamicalMetric(f, arch, depth)
    return MetricFamily(curve, 1, exceptions=exceptions)


_DEFAULT_BIT_BUDGET = 4_000_000


def _budget_error():
    return ValueError("orbit coefficients exceed the bit budget: "
                      "increase budget or lower depth")


def canonical_height(f: Endomorphism, P, n_max: int = 16,
                     bit_budget: int = _DEFAULT_BIT_BUDGET) -> float:
    """Canonical height of a closed point by exact orbit telescoping.

    Returns d^(-n_max) times the naive height of the n_max-th image; an
    orbit that revisits a point short-circuits to exactly zero.  Orbit
    data is exact, so coefficient growth is guarded by bit_budget.
    """
    if not isinstance(P, ClosedPoint):
        P = ClosedPoint.from_rational(parse_rational(P))
    d = f.degree

    def as_pair(pt):
        if pt.is_infinity:
            return (1, 0)
        if pt.degree == 1:
            r = pt.as_rational()
            return (r.numerator, r.denominator)
        return None

    state = as_pair(P) or P
    seen = set()
    for _ in range(n_max):
        if state in seen:
            return 0.0
        seen.add(state)
        if isinstance(state, tuple):
            if max(abs(c).bit_length() for c in state) > bit_budget:
                raise _budget_error()
            state = f.apply_pair(state)
        else:
            if max(abs(c).bit_length() for c in state.coeffs) > bit_budget:
                raise _budget_error()
            state = _pushforward_point(f, state)
            state = as_pair(state) or state
    if isinstance(state, tuple):
        return float(d) ** -n_max * log_int(max(abs(state[0]),
                                                abs(state[1]), 1))
    return float(d) ** -n_max * naive_height(state)


def _pushforward_point(f: Endomorphism, point: ClosedPoint) -> ClosedPoint:
    """Image of a closed point: minimal polynomial of f(root)."""
    from sympy import Poly, resultant, symbols

    y, z = symbols("y z")
    A = sum(c * y**i for i, c in enumerate(point.coeffs))
    d = f.degree
    Fh = sum(int(c) * y**k for k, c in enumerate(_pad_form(f._lift_num, d)))
    Gh = sum(int(c) * y**k for k, c in enumerate(_pad_form(f._lift_den, d)))
    R = Poly(resultant(A, z * Gh - Fh, y), z)
    coeffs = [int(c) for c in reversed(R.all_coeffs())]
    if len(coeffs) == 1:
        return ClosedPoint.infinity()
    fs = irreducible_factors(coeffs)
    if len(fs) != 1:
        raise ArithmeticError("pushforward split into several orbits")
    return ClosedPoint(fs[0][0], _trusted=True)


def local_potential_height(family: MetricFamily, r) -> float:
    """Height of a nonzero rational point as a sum of local potentials.

    Cross-checks the telescoping route: sums weight * potential at the
    point over the family's listed places plus every place in the
    support of the point.
    """
    r = parse_rational(r)
    if r == 0:
        raise ValueError("potential route needs a nonzero point")
    curve = family.curve
    places = {curve.arch_place()}
    places.update(family.listed_places())
    for n in (abs(r.numerator), r.denominator):
        for p in factor_int(n) if n > 1 else ():
            places.add(curve.prime_place(p))
    total = 0.0
    for place in sorted(places, key=lambda pl: (pl.kind, pl.key)):
        metric = family.local(place)
        if place.kind == "arch":
            u = metric.potential_at(complex(float(r)))
        else:
            t = curve.log_abs(r, place)
            u = metric.potential_curve().eval(t)
        total += float(place.weight) * u
    return total


def _form_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _compose_forms(outer, inner):
    """Substitute a degree-e pair of forms into a degree-d pair."""
    (Fo, Go), (Fi, Gi) = outer, inner
    d = len(Fo) - 1
    fpow = [[Fraction(1)]]
    gpow = [[Fraction(1)]]
    for _ in range(d):
        fpow.append(_form_mul(fpow[-1], Fi))
        gpow.append(_form_mul(gpow[-1], Gi))
    e = len(Fi) - 1
    size = d * e + 1

    def build(coeffs):
        acc = [Fraction(0)] * size
        for k, c in enumerate(coeffs):
            if c == 0:
                continue
            term = _form_mul(fpow[k], gpow[d - k])
            for i, t in enumerate(term):
                acc[i] += c * t
        return acc

    return build(Fo), build(Go)


def commuting_compatibility_factor(f: Endomorphism, g: Endomorphism) -> Fraction:
    """The scalar r relating the two composite lift isomorphisms.

    For commuting f, g the two ways around the pullback square differ by
    r; the canonical metrics then differ by the factor
    |r|^(-1/((d-1)(e-1))) at every place.
    """
    d, e = f.degree, g.degree
    ff = (_pad_form(f.num, d), _pad_form(f.den, d))
    gg = (_pad_form(g.num, e), _pad_form(g.den, e))
    C1 = _compose_forms(ff, gg)
    C2 = _compose_forms(gg, ff)
    cross_a = _form_mul(C1[0], C2[1])
    cross_b = _form_mul(C1[1], C2[0])
    if any(x != y for x, y in zip(cross_a, cross_b)):
        raise ValueError("not a commuting pair")
    mu = None
    for x, y in zip(C1[0] + C1[1], C2[0] + C2[1]):
        if y != 0:
            mu = x / y
            break
        if x != 0:
            raise ValueError("not a commuting pair")
    if mu is None or any(x != mu * y
                         for x, y in zip(C1[0] + C1[1], C2[0] + C2[1])):
        raise ValueError("not a commuting pair")
    return mu * f.alpha ** (1 - e) * g.alpha ** (d - 1)


def dynamic_constant_check(lam, f: Endomorphism, b: float, a: float,
                           grid=None, eq_tol: float = 1e-9,
                           const_tol: float = 1e-8) -> dict:
    """Test the rigidity of solutions of pullback(lam) = b*lam + a, b > 1.

    When the functional equation holds on the grid the only continuous
    solution is the constant -a/(b-1); reports both the equation residual
    and the observed spread of lam.
    """
    if b <= 1:
        raise ValueError("b must exceed 1")
    grid = grid or _default_grid()
    pts = grid.points()
    vals = np.array([float(lam(z)) for z in pts])
    pulled = np.array([float(lam(f.apply_complex(z))) for z in pts])
    residual = float(np.max(np.abs(pulled - b * vals - a)))
    spread = float(vals.max() - vals.min())
    return {
        "equation_holds": residual <= eq_tol,
        "is_constant": spread <= const_tol,
        "predicted": -a / (b - 1),
        "observed": float(vals.mean()),
        "residual": residual,
        "spread": spread,
    }
