"""Measure families on the projective line and global integration.

Local measures come in four shapes: radially symmetric atom lists on
circles |z| = r (archimedean), atom lists on the valuation segment
(nonarchimedean, coordinate v = -ln|z|_p / ln p), weighted point masses
(Galois orbits), and seeded backward-iteration samplers for equilibrium
measures with no closed form.  A family pairs a per-place default, one
atom at the Gauss point or on the unit circle, with finitely many
exceptions.  Global integrals of finitely supported test-function
families are weighted sums of local integrals over the places.
"""

import math
from fractions import Fraction

import numpy as np

from .curves import QCurve
from .metrics import log_abs_poly
from .utils import factor_int, parse_rational

_QUAD_THETA = 256  # angular resolution for non-radial circle integrands


def _place_key(place) -> str:
    return f"{place.kind}:{place.key}"


class LocalMeasure:
    variant = "abstract"

    def total_mass(self) -> float:
        raise NotImplementedError

    def integrate(self, fn):
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


def _check_atoms(atoms, coord_name):
    out = []
    for x, m in atoms:
        x = float(x)
        m = float(m)
        if m < 0:
            raise ValueError("atom mass must be nonnegative")
        if coord_name == "radius" and x <= 0:
            raise ValueError("atom radius must be positive")
        out.append((x, m))
    return out


class CircleAtoms(LocalMeasure):
    """Radially symmetric archimedean measure: mass on circles |z| = r."""

    variant = "circle"

    def __init__(self, atoms):
        self.atoms = _check_atoms(atoms, "radius")

    def total_mass(self):
        return math.fsum(m for _, m in self.atoms)

    def integrate(self, fn, n_theta: int = _QUAD_THETA):
        if getattr(fn, "profile", None) is not None:
            return math.fsum(
                m * fn.profile.eval(math.log(r)) for r, m in self.atoms
            )
        return self._angular(lambda z: float(fn.callable(z)), n_theta)

    def _angular(self, g, n_theta: int = _QUAD_THETA):
        phases = np.exp(2j * np.pi * np.arange(n_theta) / n_theta)
        total = 0.0
        for r, m in self.atoms:
            total += m * math.fsum(g(z) for z in r * phases) / n_theta
        return total

    def to_json(self):
        return {"variant": "circle", "atoms": [[r, m] for r, m in self.atoms]}


class SegmentAtoms(LocalMeasure):
    """Atoms on the nonarchimedean segment, coordinate v = -ln|z|_p/ln p."""

    variant = "segment"

    def __init__(self, atoms):
        self.atoms = _check_atoms(atoms, "valuation")

    def total_mass(self):
        return math.fsum(m for _, m in self.atoms)

    def integrate(self, fn):
        return math.fsum(m * fn.profile.eval(v) for v, m in self.atoms)

    def to_json(self):
        return {"variant": "segment", "atoms": [[v, m] for v, m in self.atoms]}


class PointMass(LocalMeasure):
    """Weighted archimedean point masses, e.g. a Galois orbit."""

    variant = "points"

    def __init__(self, atoms):
        self.atoms = []
        for z, m in atoms:
            m = float(m)
            if m < 0:
                raise ValueError("atom mass must be nonnegative")
            self.atoms.append((complex(z), m))

    def total_mass(self):
        return math.fsum(m for _, m in self.atoms)

    def integrate(self, fn):
        return math.fsum(m * fn.eval_at(z) for z, m in self.atoms)

    def to_json(self):
        return {
            "variant": "points",
            "atoms": [[z.real, z.imag, m] for z, m in self.atoms],
        }


class SamplerMeasure(LocalMeasure):
    """Equilibrium measure of a degree-d map, sampled by backward iteration.

    Runs a bank of chains z <- random preimage of z, discards a burn-in
    prefix, and pools the remaining iterates.  Sampling is deterministic
    given the seed; reported standard errors treat the pool as i.i.d.,
    which understates correlated-chain noise slightly.
    """

    variant = "sampler"

    def __init__(self, f, mass: float = 1.0, budget: int = 100_000,
                 seed: int = 20260818, burn_in: int = 24):
        self.f = f
        self.mass = float(mass)
        self.budget = int(budget)
        self.seed = int(seed)
        self.burn_in = int(burn_in)

    def total_mass(self):
        return self.mass

    def sample(self, budget=None, seed=None):
        budget = self.budget if budget is None else int(budget)
        if budget <= 0:
            raise ValueError("sampler budget must be positive")
        seed = self.seed if seed is None else int(seed)
        rng = np.random.default_rng(seed)
        d = self.f.degree
        alpha = float(self.f.alpha)
        num = np.array([float(c) for c in self.f._form_num]) * alpha
        den = np.array([float(c) for c in self.f._form_den])
        n_chains = min(256, budget)
        steps = -(-budget // n_chains)
        z = 1.5 * np.exp(2j * np.pi * np.arange(n_chains) / n_chains) + 0.25 + 0.1j
        pool = []
        for step in range(self.burn_in + steps):
            lead = num[d] - z * den[d]
            tiny = np.abs(lead) < 1e-12 * (1.0 + np.abs(z))
            if tiny.any():
                z = np.where(tiny, z + (1e-9 + 1e-9j), z)
                lead = num[d] - z * den[d]
            coeffs = num[None, :d] - z[:, None] * den[None, :d]
            comp = np.zeros((n_chains, d, d), dtype=complex)
            for i in range(1, d):
                comp[:, i, i - 1] = 1.0
            comp[:, :, d - 1] = -coeffs / lead[:, None]
            roots = np.linalg.eigvals(comp)
            z = roots[np.arange(n_chains), rng.integers(0, d, size=n_chains)]
            if step >= self.burn_in:
                pool.append(z.copy())
        return np.concatenate(pool)[:budget]

    def integrate_report(self, fn, budget=None, seed=None):
        pts = self.sample(budget, seed)
        vals = np.array([fn.eval_at(z) for z in pts])
        n = len(vals)
        se = float(vals.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        return {
            "mean": self.mass * float(vals.mean()),
            "stderr": self.mass * se,
            "budget": n,
            "seed": self.seed if seed is None else int(seed),
        }

    def integrate(self, fn, budget=None, seed=None):
        return self.integrate_report(fn, budget, seed)["mean"]

    def to_json(self):
        return {
            "variant": "sampler",
            "map": self.f.to_json(),
            "mass": self.mass,
            "budget": self.budget,
            "seed": self.seed,
        }


class MeasureFamily:
    """One local measure per place: a shared default plus exceptions.

    The default is an atom list in the log-radius coordinate t, realized
    per place as circle atoms (archimedean) or segment atoms in the
    valuation coordinate (finite places).  With no override that is a
    single atom of the given mass at the Gauss point / unit circle.
    """

    def __init__(self, curve, default_mass: float = 1.0, exceptions=None,
                 default_atoms_t=None):
        self.curve = curve
        self.default_mass = float(default_mass)
        if default_atoms_t is None:
            default_atoms_t = [(0.0, self.default_mass)]
        self.default_atoms_t = [(float(t), float(m)) for t, m in default_atoms_t]
        self.exceptions = dict(exceptions or {})

    def local(self, place) -> LocalMeasure:
        if place in self.exceptions:
            return self.exceptions[place]
        return _atoms_t_to_measure(self.default_atoms_t, place)

    def with_local(self, place, measure) -> "MeasureFamily":
        exc = dict(self.exceptions)
        exc[place] = measure
        return MeasureFamily(self.curve, self.default_mass, exc,
                             self.default_atoms_t)

    def listed_places(self):
        return list(self.exceptions)

    def to_json(self):
        return {
            "default_mass": self.default_mass,
            "default_atoms_t": [[t, m] for t, m in self.default_atoms_t],
            "exceptions": {
                _place_key(pl): mu.to_json() for pl, mu in self.exceptions.items()
            },
        }


def _atoms_t_to_measure(atoms_t, place) -> LocalMeasure:
    if place.is_arch:
        return CircleAtoms([(math.exp(t), m) for t, m in atoms_t])
    if place.kind == "prime":
        lp = math.log(int(place.key))
        return SegmentAtoms([(-t / lp, m) for t, m in atoms_t])
    # trivial or function-field places keep the segment coordinate as-is
    return SegmentAtoms(list(atoms_t))


def _fs_circle_atoms(metric, n_radial: int = 256, t_pad: float = 8.0):
    """Radial quadrature of the curvature of a diagonal quotient metric.

    Masses are increments of the radial derivative u'(t) between interval
    midpoints, with the two tail masses extended to +-infinity so the
    total telescopes to the level exactly.
    """
    if metric._diag_log is None:
        raise ValueError(
            "curvature quadrature needs diagonal quotient data"
        )
    n = metric.level
    dk = np.asarray(metric._diag_log, dtype=float)
    ks = np.arange(n + 1, dtype=float)
    span = t_pad + float(np.max(np.abs(dk))) if n > 0 else t_pad

    def uprime(t):
        w = 2.0 * (ks * t - dk)
        w = w - w.max()
        e = np.exp(w)
        return float((ks * e).sum() / e.sum())

    ts = np.linspace(-span, span, n_radial + 1)
    half = 0.5 * (ts[1:] + ts[:-1])
    grads = [0.0] + [uprime(h) for h in half] + [float(n)]
    atoms = []
    for j, t in enumerate(ts):
        m = grads[j + 1] - grads[j]
        if m > 1e-16:
            atoms.append((math.exp(float(t)), m))
    return CircleAtoms(atoms)


def monge_ampere_local(metric, place) -> LocalMeasure:
    """Curvature measure of one local metric; total mass is the level.

    Toric potentials decompose exactly into slope-jump atoms, diagonal
    Hermitian quotients get a radial quadrature, and depth-limited
    dynamical metrics get the backward-iteration sampler of the map's
    equilibrium measure (the depth-infinity limit).
    """
    if metric.variant == "toric":
        atoms_t = metric.potential_curve().ma_atoms()
        return _atoms_t_to_measure(atoms_t, place)
    if metric.variant == "fs":
        if not place.is_arch:
            raise ValueError("quotient metrics live at archimedean places")
        return _fs_circle_atoms(metric)
    if metric.variant == "dynamical":
        return SamplerMeasure(metric.f, mass=1.0)
    raise ValueError(
        f"no curvature recipe for metric variant '{metric.variant}'"
    )


def monge_ampere_family(phi) -> MeasureFamily:
    """Per-place curvature measures of a metric family."""
    default_atoms = phi.default.potential_curve().ma_atoms()
    exceptions = {
        pl: monge_ampere_local(phi.local(pl), pl) for pl in phi.listed_places()
    }
    return MeasureFamily(phi.curve, float(phi.level), exceptions, default_atoms)


def integrate_global(eta: MeasureFamily, f, places=None) -> float:
    """Weighted sum over places of local integrals of a test family.

    `places` is an optional predicate restricting the place set; the
    test family is extended by zero off its listed places.
    """
    total = 0.0
    for place in f.places():
        if places is not None and not places(place):
            continue
        total += float(place.weight) * eta.local(place).integrate(f.get(place))
    return total


def integrate_global_report(eta: MeasureFamily, f, places=None) -> dict:
    """Like integrate_global, with per-place rows and Monte Carlo errors."""
    rows = {}
    var = 0.0
    total = 0.0
    for place in f.places():
        if places is not None and not places(place):
            continue
        mu = eta.local(place)
        w = float(place.weight)
        if isinstance(mu, SamplerMeasure):
            rep = mu.integrate_report(f.get(place))
            val, se = rep["mean"], rep["stderr"]
        else:
            val, se = mu.integrate(f.get(place)), 0.0
        rows[_place_key(place)] = {"value": w * val, "stderr": w * se}
        total += w * val
        var += (w * se) ** 2
    return {"value": total, "stderr": math.sqrt(var), "places": rows}


def _cap(A, place) -> float:
    a = float(A.get(place, 1.0)) if isinstance(A, dict) else float(A)
    if a <= 0:
        raise ValueError("truncation slope must be positive")
    return a


def _support_primes(curve, coeffs):
    if not isinstance(curve, QCurve):
        return []
    primes = set()
    for c in coeffs:
        if c == 0:
            continue
        primes.update(factor_int(abs(c.numerator)))
        primes.update(factor_int(c.denominator))
    return [curve.prime_place(p) for p in sorted(primes)]


def _log_sec_values(mu, place, curve, coeffs, metric, cap, ts):
    """One place's truncated integrals of -ln|s| for each cutoff t."""

    def rows_from_values(gs, masses):
        out = []
        for t in ts:
            lid = t * cap
            out.append(
                math.fsum(m * min(g, lid) for g, m in zip(gs, masses))
            )
        return out

    cfloat = [float(c) for c in coeffs]
    if isinstance(mu, CircleAtoms):
        phases = np.exp(2j * np.pi * np.arange(_QUAD_THETA) / _QUAD_THETA)
        gs, masses = [], []
        for r, m in mu.atoms:
            for z in r * phases:
                gs.append(metric.potential_at(z) - log_abs_poly(cfloat, z))
                masses.append(m / _QUAD_THETA)
        return rows_from_values(gs, masses)
    if isinstance(mu, PointMass):
        gs = [
            metric.potential_at(z) - log_abs_poly(cfloat, z)
            for z, _ in mu.atoms
        ]
        return rows_from_values(gs, [m for _, m in mu.atoms])
    if isinstance(mu, SamplerMeasure):
        pts = mu.sample()
        gs = [metric.potential_at(z) - log_abs_poly(cfloat, z) for z in pts]
        w = mu.mass / len(pts)
        return rows_from_values(gs, [w] * len(pts))
    # segment atoms: exact sup-norm evaluation at each segment point
    lp = math.log(int(place.key)) if place.kind == "prime" else None
    gs, masses = [], []
    for v, m in mu.atoms:
        t_coord = -v * lp if lp is not None else v
        u = metric.potential_curve().eval(t_coord)
        lns = max(
            curve.log_abs(c, place) + k * t_coord
            for k, c in enumerate(coeffs)
            if c != 0
        )
        gs.append(u - lns)
        masses.append(m)
    return rows_from_values(gs, masses)


def integrate_log_section(eta: MeasureFamily, coeffs, psi, A,
                          t_max: int = 8) -> dict:
    """Truncated integrals of -ln|s|_psi against a measure family.

    The integrand at cutoff t is min(-ln|s|, t*A(place)); values are
    nondecreasing in t.  The report carries the (t, value) rows, the
    stabilized limit if the last step moved by less than 1e-12, and a
    divergence flag otherwise (as happens when an atom sits on a zero
    of the section).
    """
    cs = [parse_rational(c) for c in coeffs]
    if all(c == 0 for c in cs):
        raise ValueError("section must be nonzero")
    if len(cs) - 1 > psi.level:
        raise ValueError("section degree exceeds the level")
    if int(t_max) < 2:
        raise ValueError("t_max must be at least 2")
    ts = list(range(1, int(t_max) + 1))

    places = []
    if isinstance(psi.curve, QCurve):
        places.append(psi.curve.arch_place())
    for pl in list(eta.listed_places()) + list(psi.listed_places()) + \
            _support_primes(psi.curve, cs):
        if pl not in places:
            places.append(pl)

    totals = [0.0] * len(ts)
    for pl in places:
        rows = _log_sec_values(
            eta.local(pl), pl, psi.curve, cs, psi.local(pl), _cap(A, pl), ts
        )
        w = float(pl.weight)
        totals = [acc + w * r for acc, r in zip(totals, rows)]

    settled = abs(totals[-1] - totals[-2]) <= 1e-12 * (1.0 + abs(totals[-1]))
    return {
        "values": list(zip(ts, totals)),
        "limit": totals[-1] if settled else None,
        "diverged": not settled,
    }


def _abs_deviation(mu, fn) -> float:
    """Local integral of |p - 1| for a density given as a test function."""
    if isinstance(mu, CircleAtoms):
        if getattr(fn, "profile", None) is not None:
            return math.fsum(
                m * abs(fn.profile.eval(math.log(r)) - 1.0) for r, m in mu.atoms
            )
        return mu._angular(lambda z: abs(float(fn.callable(z)) - 1.0))
    if isinstance(mu, SegmentAtoms):
        return math.fsum(m * abs(fn.profile.eval(v) - 1.0) for v, m in mu.atoms)
    if isinstance(mu, PointMass):
        return math.fsum(m * abs(fn.eval_at(z) - 1.0) for z, m in mu.atoms)
    pts = mu.sample()
    return mu.mass * float(
        np.mean([abs(fn.eval_at(z) - 1.0) for z in pts])
    )


def radon_nikodym_check(p, eta: MeasureFamily, places=None,
                        tol: float = 1e-9) -> dict:
    """Whether a candidate density p integrates like the constant 1.

    Computes the weighted total of the local integrals of |p - 1| and
    lists the places whose weighted deviation exceeds the tolerance;
    places of weight zero can never offend.
    """
    total = 0.0
    offending = []
    for place in p.places():
        if places is not None and not places(place):
            continue
        dev = _abs_deviation(eta.local(place), p.get(place))
        w = float(place.weight)
        total += w * dev
        if w * dev > tol:
            offending.append(_place_key(place))
    return {"passed": total <= tol, "deviation": total, "offending": offending}
