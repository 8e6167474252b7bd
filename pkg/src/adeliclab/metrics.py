"""Local metrics on O(n) over the projective line, and family plumbing.

A local metric assigns |s|(z) = |P(z)| e^{-u(z)} to a section with
coefficient polynomial P, where u is the potential.  Toric metrics keep
u as a piecewise-linear function of t = ln|z| dual to a concave roof on
[0,1]; quotient metrics of Hermitian norms keep u in closed form; twists
add bounded test functions on top.  Nonarchimedean metrics are always
toric here, with potentials read on the segment coordinate t = ln|z|
(test-function profiles arrive in the valuation coordinate
v = -ln|z|_p / ln p and are converted at the boundary).
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bundles import DiagonalNorm, GramNorm
from .piecewise import PLCurve, PLProfile, Roof, potential_from_roof


def log_abs_poly(coeffs, z):
    """ln|P(z)| for ascending coefficients, stable for any |z|."""
    cs = [complex(c) for c in coeffs]
    n = len(cs) - 1
    z = complex(z)
    if z == 0:
        return math.log(abs(cs[0])) if cs[0] != 0 else float("-inf")
    if abs(z) <= 1.0:
        acc = 0j
        for c in reversed(cs):
            acc = acc * z + c
        return math.log(abs(acc)) if acc != 0 else float("-inf")
    u = 1.0 / z
    acc = 0j
    for c in cs:
        acc = acc * u + c
    if acc == 0:
        return float("-inf")
    return n * math.log(abs(z)) + math.log(abs(acc))


class GridSpec:
    """Deterministic sampling grid on the punctured plane.

    Log-radii run over [-t_max, t_max] including 0 and angles over
    multiples of 2 pi / n_theta, so z = 1 and z = -1 are always sampled.
    """

    def __init__(self, n_theta=64, n_radial=64, t_max=4.0):
        if n_theta < 2 or n_radial < 2 or t_max <= 0:
            raise ValueError("bad grid parameters")
        self.n_theta = int(n_theta)
        self.n_radial = int(n_radial)
        self.t_max = float(t_max)
        self._points = None

    def t_values(self):
        left_count = (self.n_radial + 1) // 2
        left = np.linspace(-self.t_max, 0.0, left_count)
        right = np.linspace(0.0, self.t_max, self.n_radial - left_count + 1)[1:]
        return np.concatenate([left, right])

    def thetas(self):
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    def points(self):
        if self._points is None:
            radii = np.exp(self.t_values())
            phases = np.exp(1j * self.thetas())
            self._points = (radii[:, None] * phases[None, :]).ravel()
        return self._points


class LocalMetric:
    variant = "abstract"
    level = None

    def potential_at(self, z):
        raise NotImplementedError

    def pl_curve_or_none(self):
        return None

    def potential_curve(self):
        curve = self.pl_curve_or_none()
        if curve is None:
            raise ValueError("metric has no piecewise-linear potential")
        return curve

    def section_norm(self, coeffs, z):
        return math.exp(self.section_log_norm(coeffs, z))

    def section_log_norm(self, coeffs, z):
        return log_abs_poly(coeffs, z) - self.potential_at(z)


class ToricMetric(LocalMetric):
    variant = "toric"

    def __init__(self, level, roof):
        if level < 0:
            raise ValueError("level must be nonnegative")
        self.level = int(level)
        self.roof = roof
        self._pot = potential_from_roof(roof, self.level)

    def pl_curve_or_none(self):
        return self._pot

    def potential_at(self, z):
        z = complex(z)
        if z == 0:
            t = self._pot.kinks[0][0] - 1.0
        else:
            t = math.log(abs(z))
        return self._pot.eval(t)


class FSQuotientMetric(LocalMetric):
    """Quotient metric of a Hermitian norm on the monomial section space."""

    variant = "fs"

    def __init__(self, level, gram):
        self.level = int(level)
        g = np.array([[float(v) for v in row] for row in gram.matrix], dtype=float)
        self.gram = g
        self._inv = np.linalg.inv(g)
        diag = np.allclose(g, np.diag(np.diag(g)))
        self._diag_log = 0.5 * np.log(np.diag(g)) if diag else None

    def potential_at(self, z):
        n = self.level
        z = complex(z)
        if self._diag_log is not None:
            t = math.log(abs(z)) if z != 0 else float("-inf")
            ks = np.arange(n + 1)
            if z == 0:
                return float(-self._diag_log[0])
            return float(
                0.5 * np.logaddexp.reduce(2 * (ks * t - self._diag_log))
            )
        if abs(z) <= 1.0:
            a = z ** np.arange(n + 1)
            q = np.real(np.conj(a) @ self._inv @ a)
            return 0.5 * math.log(q)
        b = (1.0 / z) ** (n - np.arange(n + 1))
        q = np.real(np.conj(b) @ self._inv @ b)
        return n * math.log(abs(z)) + 0.5 * math.log(q)

    def kernel_log(self, x, y):
        """ln|K(x,y)| of the reproducing kernel, for peak sections."""
        n = self.level
        ax = complex(x) ** np.arange(n + 1)
        ay = complex(y) ** np.arange(n + 1)
        k = np.conj(ay) @ self._inv @ ax
        return math.log(abs(k)) if k != 0 else float("-inf")


@dataclass
class ArchTestFn:
    callable: object = None
    profile: PLProfile = None

    def __post_init__(self):
        if self.callable is None and self.profile is None:
            raise ValueError("test function needs a callable or a profile")

    def eval_at(self, z):
        if self.callable is not None:
            return float(self.callable(z))
        z = complex(z)
        t = math.log(abs(z)) if z != 0 else -1e9
        return self.profile.eval(t)

    def profile_curve(self, place=None):
        if self.profile is None:
            return None
        return self.profile.as_curve()


@dataclass
class NonarchTestFn:
    profile: PLProfile = None

    def __post_init__(self):
        if self.profile is None:
            raise ValueError("nonarchimedean test functions are profiles")

    def eval_at(self, z):
        raise TypeError("nonarchimedean test functions live on the segment")

    def profile_curve(self, place):
        # profile is in v = -ln|.|_p/ln p; convert to t = ln|.|
        lp = math.log(int(place.key))
        pts = [(-v * lp, y) for v, y in self.profile.kinks]
        pts.reverse()
        return PLProfile(pts).as_curve()


class TwistedMetric(LocalMetric):
    variant = "twisted"

    def __init__(self, base, terms):
        self.base = base
        self.terms = list(terms)  # (test fn, scale, place or None)
        self.level = base.level

    def potential_at(self, z):
        total = self.base.potential_at(z)
        for fn, tau, _ in self.terms:
            total += tau * fn.eval_at(z)
        return total

    def pl_curve_or_none(self):
        curve = self.base.pl_curve_or_none()
        if curve is None:
            return None
        for fn, tau, place in self.terms:
            prof = fn.profile_curve(place)
            if prof is None:
                return None
            curve = curve.add_scaled(prof, tau)
        return curve


class TestFunctionFamily:
    """Finitely supported family of per-place test functions."""

    __test__ = False

    def __init__(self, entries):
        self.entries = dict(entries)
        for place, fn in self.entries.items():
            if place.is_arch and isinstance(fn, NonarchTestFn):
                raise ValueError("nonarchimedean profile at the archimedean place")
            if not place.is_arch and isinstance(fn, ArchTestFn):
                raise ValueError("archimedean test function at a finite place")

    def places(self):
        return list(self.entries)

    def get(self, place):
        return self.entries.get(place)

    def to_json(self):
        out = {}
        for place, fn in self.entries.items():
            key = f"{place.kind}:{place.key}"
            prof = fn.profile.to_json() if fn.profile is not None else None
            out[key] = {"profile": prof}
        return out


class MetricFamily:
    """One metric per place: a default plus finitely many exceptions."""

    def __init__(self, curve, level, default=None, exceptions=None):
        self.curve = curve
        self.level = int(level)
        if default is None:
            default = ToricMetric(level, Roof([(Fraction(0), 0.0), (Fraction(1), 0.0)]))
        if default.level != self.level:
            raise ValueError("default metric level mismatch")
        self.default = default
        self.exceptions = dict(exceptions or {})
        for m in self.exceptions.values():
            if m.level != self.level:
                raise ValueError("exception metric level mismatch")

    def local(self, place):
        return self.exceptions.get(place, self.default)

    def with_local(self, place, metric):
        exc = dict(self.exceptions)
        exc[place] = metric
        return MetricFamily(self.curve, self.level, self.default, exc)

    def listed_places(self):
        return list(self.exceptions)


def metric_distance(phi, psi, grid=None):
    """Sup of |log ratio| of two local metrics; exact for PL data."""
    if phi.level != psi.level:
        raise ValueError("level mismatch between metrics")
    a = phi.pl_curve_or_none()
    b = psi.pl_curve_or_none()
    if a is not None and b is not None:
        return a.sup_abs_diff(b)
    grid = grid or GridSpec()
    return max(
        abs(phi.potential_at(z) - psi.potential_at(z)) for z in grid.points()
    )


def fs_quotient(norm, place):
    """Quotient metric of a norm on the monomial basis of H0(O(n)).

    Archimedean Hermitian data gives the closed-form quotient weight;
    nonarchimedean diagonal data gives the toric metric whose roof is
    the upper concave hull of (k/n, -ln v_k / n).
    """
    if place.is_arch:
        if isinstance(norm, GramNorm):
            return FSQuotientMetric(norm.size() - 1, norm)
        if isinstance(norm, DiagonalNorm):
            n = norm.size() - 1
            g = GramNorm(
                [
                    [
                        Fraction(math.exp(2 * norm.log_value(k))).limit_denominator(
                            10**15
                        )
                        if k == l
                        else 0
                        for l in range(n + 1)
                    ]
                    for k in range(n + 1)
                ]
            )
            m = FSQuotientMetric(n, g)
            m._diag_log = np.array([norm.log_value(k) for k in range(n + 1)])
            return m
        raise ValueError("unsupported norm descriptor")
    if not isinstance(norm, DiagonalNorm):
        raise ValueError("nonarchimedean quotients need diagonal norms")
    n = norm.size() - 1
    if n < 1:
        raise ValueError("need at least two sections")
    pts = [(Fraction(k, n), -norm.log_value(k) / n) for k in range(n + 1)]
    hull = _upper_concave_hull(pts)
    return ToricMetric(n, Roof(hull))


def _upper_concave_hull(pts):
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            x3, y3 = p
            cross = (float(x2 - x1)) * (y3 - y1) - (y2 - y1) * float(x3 - x1)
            if cross >= -1e-15:  # middle point not above the chord
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def fs_envelope_step(phi, f, n, grid=None):
    """Envelope approximation f_n(x) = min_y [f(y) + n d(x,y)] via peak sections.

    d(x,y) = -ln of the normalized kernel ratio of the level-1 quotient
    metric phi; d >= 0 with equality only at y = x, so f_n <= f, f_n is
    nondecreasing in n, and f_n -> f pointwise where f is continuous.
    """
    if not isinstance(phi, FSQuotientMetric) or phi.level != 1:
        raise ValueError("envelope needs a level-1 Hermitian quotient metric")
    grid = grid or GridSpec()
    ys = grid.points()
    fvals = np.array([float(f(y)) for y in ys])
    if fvals.min() < -1e-12:
        raise ValueError("envelope requires f >= 0")
    uvals = np.array([phi.potential_at(y) for y in ys])

    def f_n(x):
        fx = float(f(x))
        if fx < -1e-12:
            raise ValueError("envelope requires f >= 0")
        ux = phi.potential_at(x)
        best = fx
        for y, fy, uy in zip(ys, fvals, uvals):
            rho_log = phi.kernel_log(x, y) - ux - uy
            cand = fy - n * rho_log
            if cand < best:
                best = cand
        return best

    return f_n


def fs_envelope_table(phi, f, xs, n_values, grid=None):
    """Envelope approximants at many points and levels in one pass.

    Returns the matrix [f_n(x)] with rows following n_values and columns
    xs; same quantity as fs_envelope_step, restructured so the kernel
    distances are computed once.
    """
    if not isinstance(phi, FSQuotientMetric) or phi.level != 1:
        raise ValueError("envelope needs a level-1 Hermitian quotient metric")
    grid = grid or GridSpec()
    ys = grid.points()
    fy = np.array([float(f(y)) for y in ys])
    xs = np.array([complex(x) for x in xs])
    fx = np.array([float(f(x)) for x in xs])
    if min(fy.min(), fx.min()) < -1e-12:
        raise ValueError("envelope requires f >= 0")
    uy = np.array([phi.potential_at(y) for y in ys])
    ux = np.array([phi.potential_at(x) for x in xs])
    ax = np.stack([np.ones_like(xs), xs], axis=1)
    ay = np.stack([np.ones_like(ys), ys], axis=1)
    kernel = ax @ phi._inv @ np.conj(ay.T)
    with np.errstate(divide="ignore"):
        rho = np.log(np.abs(kernel))
    rho[~np.isfinite(rho)] = -1e300
    rho -= ux[:, None]
    rho -= uy[None, :]
    out = np.empty((len(n_values), len(xs)))
    for i, n in enumerate(n_values):
        out[i] = np.minimum(fx, (fy[None, :] - n * rho).min(axis=1))
    return out


def twist(family, testfam, t):
    """Multiply local metrics by e^{-t f}; constants just shift roofs."""
    if t == 0:
        return MetricFamily(family.curve, family.level, family.default,
                            family.exceptions)
    out = family
    for place in testfam.places():
        fn = testfam.get(place)
        base = out.local(place)
        if fn.profile is not None and fn.profile.is_constant():
            c = fn.profile.kinks[0][1]
            if base.variant == "toric":
                shifted = ToricMetric(
                    base.level, base.roof.shift(t * c / max(base.level, 1))
                )
                out = out.with_local(place, shifted)
                continue
        if base.variant == "twisted":
            twisted = TwistedMetric(base.base, base.terms + [(fn, t, place)])
        else:
            twisted = TwistedMetric(base, [(fn, t, place)])
        out = out.with_local(place, twisted)
    return out


def mixed_second_partial_fd(f, x, eps, scheme="rotation"):
    """Finite-difference estimate of the mixed second complex derivative.

    The default rotation scheme averages the four axis directions and
    converges to the true mixed derivative with O(eps^2) error; the
    corner scheme is the raw 4-point combination, which measures the
    real mixed partial d2/dx dy instead.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = complex(x)
    if scheme == "rotation":
        val = (
            f(x + eps) + f(x - eps) + f(x + 1j * eps) + f(x - 1j * eps) - 4 * f(x)
        ) / (4 * eps * eps)
        return complex(val)
    if scheme == "corner":
        val = (f(x + eps + 1j * eps) - f(x + eps) - f(x + 1j * eps) + f(x)) / (
            eps * eps
        )
        return complex(val)
    raise ValueError("unknown scheme")
