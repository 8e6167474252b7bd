"""Arithmetic volumes of metrized line bundles on the projective line.

The concave transform of a toric metric family is the weight-summed
roof G on [0, 1]; its integral gives the normalized volume
chi = 2 * int G, its maximum the asymptotic maximal slope, and its
finite-level shadow is the degree staircase of the sup-norm section
lattice H0(O(n)).  Lattice estimates, interpolation, relative volumes,
and directional derivatives all pass through the same roof calculus.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bundles import AdelicVectorBundle, DiagonalNorm, hn_filtration_diagonal
from .measures import integrate_global, monge_ampere_family
from .metrics import GridSpec, MetricFamily, ToricMetric
from .piecewise import Roof, legendre_roof
from .utils import format_rational


@dataclass(frozen=True)
class OkounkovInterval:
    """The section body of O(level): the interval [0, level], normalized."""

    level: int

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("level must be positive")

    def normalized(self):
        return (Fraction(0), Fraction(1))

    def unnormalized(self):
        return (Fraction(0), Fraction(self.level))

    def lattice_count(self) -> int:
        return self.level + 1


def _require_flat_default(phi) -> None:
    d = phi.default
    if d.variant != "toric" or any(v != 0.0 for _, v in d.roof.points):
        raise ValueError("global volume operations need the flat default metric")


def _toric_roof_pairs(phi):
    """(place, roof) rows of the exceptions; everything must be toric."""
    _require_flat_default(phi)
    out = []
    for pl in phi.listed_places():
        m = phi.local(pl)
        if m.variant != "toric":
            raise ValueError("needs a toric metric family")
        out.append((pl, m.roof))
    return out


def _transform_roof(phi) -> Roof:
    terms = [(float(pl.weight), r) for pl, r in _toric_roof_pairs(phi)]
    terms.append((1.0, Roof.constant(0.0)))  # pins the [0,1] domain
    return Roof.combine(terms)


class ConcaveTransform:
    """Exact transform roof plus its finite-level staircase shadow."""

    def __init__(self, roof: Roof, level: int, staircase):
        self.roof = roof
        self.level = int(level)
        self.staircase = list(staircase)

    def eval(self, x) -> float:
        return self.roof.eval(x)

    def integral(self) -> float:
        return self.roof.integral()

    def max_value(self) -> float:
        return self.roof.max_value()

    def staircase_gap(self) -> float:
        return max(
            (abs(v - self.roof.eval(x)) for x, v in self.staircase),
            default=0.0,
        )

    def to_json(self):
        return {
            "roof": self.roof.to_json(),
            "level": self.level,
            "staircase": [[format_rational(x), v] for x, v in self.staircase],
        }


def _toric_bundle(phi, n: int) -> AdelicVectorBundle:
    """Sup-norm lattice of H0(O(n)) for an exactly toric family."""
    norms = {}
    for pl, roof in _toric_roof_pairs(phi):
        norms[pl] = DiagonalNorm(
            log_values=[-n * roof.eval(Fraction(k, n)) for k in range(n + 1)]
        )
    return AdelicVectorBundle(phi.curve, n + 1, norms)


def concave_transform(phi, n_max: int = 20) -> ConcaveTransform:
    """Weight-summed roof with the level-n_max degree staircase attached.

    Staircase entries are (k/n, line degree of z^k / n); for toric data
    they reproduce the roof at the lattice points, which is the
    finite-level cross-validation of the transform.
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    roof = _transform_roof(phi)
    bundle = _toric_bundle(phi, n_max)
    stair = [
        (Fraction(k, n_max), bundle.line_degree(k) / n_max)
        for k in range(n_max + 1)
    ]
    return ConcaveTransform(roof, n_max, stair)


def section_filtration(phi, n: int, t: float):
    """Indices of the monomials z^k at level n with spectral value >= t."""
    if n < 1:
        raise ValueError("level must be positive")
    g = _transform_roof(phi)
    return [k for k in range(n + 1) if g.eval(Fraction(k, n)) >= t]


def chi_volume_closed_form(phi) -> float:
    """Normalized volume 2 * int G of a toric family."""
    return 2.0 * _transform_roof(phi).integral()


def _sup_log_norms_grid(metric, n: int, grid: GridSpec) -> np.ndarray:
    """Grid estimates of ln sup-norm of each z^k under the n-th power."""
    scale = n / metric.level
    pts = grid.points()
    ts = np.log(np.abs(pts))
    us = scale * np.array([metric.potential_at(z) for z in pts])
    ks = np.arange(n + 1)
    return np.max(ks[:, None] * ts[None, :] - us[None, :], axis=1)


def _estimate_from_norms(phi, n: int, exact, grid_metrics, grid) -> float:
    norms = dict(exact)
    for pl, m in grid_metrics.items():
        norms[pl] = DiagonalNorm(
            log_values=list(_sup_log_norms_grid(m, n, grid))
        )
    bundle = AdelicVectorBundle(phi.curve, n + 1, norms)
    return 2.0 * bundle.arithmetic_degree() / n**2


def chi_volume_lattice_estimate(phi, n: int, grid=None) -> float:
    """Volume estimate 2 deg(H0(O(n)), sup)/n^2 from the section lattice.

    Toric places contribute exact diagonal norms; other archimedean
    metrics are supped over a grid at two resolutions, and a spread
    above one percent raises rather than returning a shaky number.
    """
    if n < 1:
        raise ValueError("level must be positive")
    _require_flat_default(phi)
    exact = {}
    grid_metrics = {}
    for pl in phi.listed_places():
        m = phi.local(pl)
        if m.variant == "toric":
            exact[pl] = DiagonalNorm(
                log_values=[-n * m.roof.eval(Fraction(k, n)) for k in range(n + 1)]
            )
        elif pl.is_arch:
            grid_metrics[pl] = m
        else:
            raise ValueError("finite places need toric metrics")
    if not grid_metrics:
        bundle = AdelicVectorBundle(phi.curve, n + 1, exact)
        return 2.0 * bundle.arithmetic_degree() / n**2
    base = grid or GridSpec()
    fine = GridSpec(2 * base.n_theta, 2 * base.n_radial, base.t_max)
    est_base = _estimate_from_norms(phi, n, exact, grid_metrics, base)
    est_fine = _estimate_from_norms(phi, n, exact, grid_metrics, fine)
    if abs(est_fine - est_base) > 0.01 * (1.0 + abs(est_fine)):
        raise ValueError(
            "grid too coarse for a stable estimate; refine the sampling grid"
        )
    return est_fine


def chi_volume_error_trace(phi, levels=(5, 10, 25, 50), grid=None):
    """(n, estimate, closed form, absolute error) rows over the levels."""
    closed = chi_volume_closed_form(phi)
    rows = []
    for n in levels:
        est = chi_volume_lattice_estimate(phi, n, grid=grid)
        rows.append((n, est, closed, abs(est - closed)))
    return rows


def _union_places(phi1, phi2):
    out = list(phi1.listed_places())
    for pl in phi2.listed_places():
        if pl not in out:
            out.append(pl)
    return out


def _sup_convolve(r1: Roof, n1: int, r2: Roof, n2: int) -> Roof:
    """Sup-convolution of two concave roofs, normalized to level n1+n2.

    In unnormalized coordinates the graph segments of both summands are
    merged in decreasing slope order, which realizes
    h(x) = max over u+w=x of (f1(u) + f2(w)) for concave PL data.
    """

    def segments(roof, lv):
        pts = [(lv * x, lv * v) for x, v in roof.points]
        return [
            ((y1 - y0) / float(x1 - x0), x1 - x0, y1 - y0)
            for (x0, y0), (x1, y1) in zip(pts, pts[1:])
        ]

    segs = sorted(segments(r1, n1) + segments(r2, n2), key=lambda s: -s[0])
    total = Fraction(n1 + n2)
    x = Fraction(0)
    y = n1 * r1.points[0][1] + n2 * r2.points[0][1]
    verts = [(x, y)]
    for _, dx, dy in segs:
        x += dx
        y += dy
        verts.append((x, y))
    return Roof([(vx / total, vy / float(total)) for vx, vy in verts])


def add_toric_families(phi1, phi2) -> MetricFamily:
    """Tensor sum: levels add and local roofs sup-convolve place by place."""
    if phi1.curve.base != phi2.curve.base:
        raise ValueError("curve mismatch between families")
    _toric_roof_pairs(phi1)
    _toric_roof_pairs(phi2)
    n1, n2 = phi1.level, phi2.level
    flat = Roof.constant(0.0)
    exceptions = {}
    for pl in _union_places(phi1, phi2):
        r1 = phi1.local(pl).roof if pl in phi1.exceptions else flat
        r2 = phi2.local(pl).roof if pl in phi2.exceptions else flat
        exceptions[pl] = ToricMetric(n1 + n2, _sup_convolve(r1, n1, r2, n2))
    return MetricFamily(phi1.curve, n1 + n2, exceptions=exceptions)


def _snap_roof(roof: Roof) -> Roof:
    """Collapse float-noise breakpoints onto nearby small rationals.

    Dual roofs of mixed potentials can acquire x-coordinates a few
    ulps away from the exact rational slope; left alone, those collide
    with exact breakpoints from other places when roofs are summed.
    """
    pts = []
    for x, v in roof.points:
        snapped = x.limit_denominator(10**6)
        if abs(float(snapped - x)) > 1e-9:
            snapped = x
        if pts and snapped <= pts[-1][0]:
            continue
        pts.append((snapped, v))
    if pts[-1][0] != 1:
        pts.append(roof.points[-1])
    return Roof(pts)


def interpolate_toric(phi1, phi2, delta: float) -> MetricFamily:
    """Potential interpolation delta*u1 + (1-delta)*u2 as a toric family.

    The pointwise mix of two convex toric potentials is again convex,
    and its dual roof dominates the roof mix, which is what makes the
    volume concave along these paths.
    """
    if not 0.0 <= float(delta) <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if phi1.level != phi2.level:
        raise ValueError("level mismatch between the families")
    if phi1.curve.base != phi2.curve.base:
        raise ValueError("curve mismatch between families")
    _toric_roof_pairs(phi1)
    _toric_roof_pairs(phi2)
    delta = float(delta)
    level = phi1.level
    exceptions = {}
    for pl in _union_places(phi1, phi2):
        u1 = phi1.local(pl).potential_curve()
        u2 = phi2.local(pl).potential_curve()
        mix = u1.scale(delta).add(u2.scale(1.0 - delta))
        exceptions[pl] = ToricMetric(level, _snap_roof(legendre_roof(mix, level)))
    return MetricFamily(phi1.curve, level, exceptions=exceptions)


def _metric_log_norms(metric, n: int, grid=None):
    if metric.variant == "toric":
        return [-n * metric.roof.eval(Fraction(k, n)) for k in range(n + 1)]
    return list(_sup_log_norms_grid(metric, n, grid))


def relative_volume_estimate(phi, psi, place, n: int, grid=None) -> float:
    """Relative volume of two local metrics from level-n determinant norms.

    Returns -(2/n^2) ln(det phi / det psi) of the sup-norm lattices;
    exact for toric inputs, grid-estimated (with a two-resolution
    stability check) for other archimedean metrics.
    """
    if phi.level != psi.level:
        raise ValueError("level mismatch between metrics")
    if n < 1:
        raise ValueError("level must be positive")
    both_toric = phi.variant == "toric" and psi.variant == "toric"
    if not both_toric and not place.is_arch:
        raise ValueError("finite places need toric metrics")

    def estimate(g):
        diff = math.fsum(_metric_log_norms(phi, n, g)) - math.fsum(
            _metric_log_norms(psi, n, g)
        )
        return -2.0 * diff / n**2

    if both_toric:
        return estimate(None)
    base = grid or GridSpec()
    fine = GridSpec(2 * base.n_theta, 2 * base.n_radial, base.t_max)
    est_base, est_fine = estimate(base), estimate(fine)
    if abs(est_fine - est_base) > 0.01 * (1.0 + abs(est_fine)):
        raise ValueError(
            "grid too coarse for a stable estimate; refine the sampling grid"
        )
    return est_fine


def relative_volume_closed_form(phi, psi) -> float:
    """2 * int (roof_phi - roof_psi) for two toric metrics of one level."""
    if phi.variant != "toric" or psi.variant != "toric":
        raise ValueError("relative volume closed form needs toric metrics")
    if phi.level != psi.level:
        raise ValueError("level mismatch between metrics")
    return 2.0 * (phi.roof.integral() - psi.roof.integral())


def relative_volume_global(phi, psi) -> float:
    """Weighted sum of local relative volumes; equals chi(phi) - chi(psi)."""
    if phi.level != psi.level:
        raise ValueError("level mismatch between the families")
    _toric_roof_pairs(phi)
    _toric_roof_pairs(psi)
    total = 0.0
    for pl in _union_places(phi, psi):
        total += float(pl.weight) * relative_volume_closed_form(
            phi.local(pl), psi.local(pl)
        )
    return total


def gateaux_derivative(phi, f) -> float:
    """Directional derivative of the volume along a test-function twist.

    Equals (2/level) * sum over places of the local integrals of f
    against the curvature measures of phi.
    """
    eta = monge_ampere_family(phi)
    return 2.0 * integrate_global(eta, f) / phi.level


def _twisted_chi(phi, f, tau: float) -> float:
    level = phi.level
    places = list(_union_places(phi, _FPlaces(f)))
    total = 0.0
    for pl in places:
        curve = phi.local(pl).potential_curve()
        fn = f.get(pl)
        if fn is not None:
            if fn.profile is None:
                raise ValueError(
                    "finite differences need profile test functions"
                )
            curve = curve.add(fn.profile_curve(pl).scale(tau))
        roof = legendre_roof(curve.convex_hull(), level)
        total += float(pl.weight) * roof.integral()
    return 2.0 * total


class _FPlaces:
    """Adapter so a test family can stand in for a metric family's places."""

    def __init__(self, f):
        self._places = list(f.places())

    def listed_places(self):
        return self._places


def gateaux_fd(phi, f, h: float = 1e-3) -> float:
    """Symmetric finite difference of the volume under the twist by f."""
    if h <= 0:
        raise ValueError("step must be positive")
    _toric_roof_pairs(phi)
    return (_twisted_chi(phi, f, h) - _twisted_chi(phi, f, -h)) / (2.0 * h)


def asymptotic_max_slope(phi) -> float:
    """Limit of the maximal successive slope: the maximum of the transform."""
    return _transform_roof(phi).max_value()


def max_slope_trace(phi, n_max: int = 20):
    """(n, top filtration threshold / n) rows along the lattice levels."""
    if n_max < 1:
        raise ValueError("n_max must be positive")
    rows = []
    for n in range(1, n_max + 1):
        steps = hn_filtration_diagonal(_toric_bundle(phi, n))
        rows.append((n, steps[0].threshold / n))
    return rows
