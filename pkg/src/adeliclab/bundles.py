"""Adelic vector bundles: finite-rank spaces with a norm at each place.

A bundle stores one norm descriptor per place; places without a
descriptor carry the standard norm (sup norm at nonarchimedean places,
Euclidean norm at the archimedean one), which contributes nothing to
degrees.  Degrees are weighted sums of log determinant norms, slopes
are degrees over ranks, and for diagonal data the standard basis
realizes the Harder-Narasimhan filtration, so thresholds are just the
sorted line degrees.

The brute-force slope search keeps every comparison exact: candidate
subspaces are ranked through rational wedge-norm data, and the winning
line's float is produced by the very same summation used for
filtration thresholds, so the two agree bitwise on diagonal input.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from .curves import CopiesCurve, QCurve, _padic_valuation
from .utils import log_fraction


class DiagonalNorm:
    """Norm with an orthogonal standard basis, given by per-line values.

    Pass either `values` (positive numbers, exact if Fractions) or
    `log_values` (floats, used verbatim so callers control rounding).
    """

    kind = "diagonal"

    def __init__(self, values=None, log_values=None):
        if (values is None) == (log_values is None):
            raise ValueError("pass exactly one of values, log_values")
        if values is not None:
            vals = []
            for v in values:
                if isinstance(v, float):
                    if v <= 0:
                        raise ValueError("norm values must be positive")
                    vals.append(v)
                else:
                    fv = Fraction(v)
                    if fv <= 0:
                        raise ValueError("norm values must be positive")
                    vals.append(fv)
            self.values = vals
            self.log_values = None
        else:
            self.values = None
            self.log_values = [float(t) for t in log_values]

    def size(self):
        return len(self.values if self.values is not None else self.log_values)

    def log_value(self, i):
        if self.log_values is not None:
            return self.log_values[i]
        v = self.values[i]
        return log_fraction(v) if isinstance(v, Fraction) else math.log(v)

    def exact_values(self):
        """Fraction values when available, else None."""
        if self.values is None:
            return None
        if all(isinstance(v, Fraction) for v in self.values):
            return self.values
        return None

    def log_detnorm(self):
        return sum(self.log_value(i) for i in range(self.size()))


class GramNorm:
    """Archimedean norm |x| = sqrt(x^T G x) for a positive definite G."""

    kind = "gram"

    def __init__(self, matrix):
        rows = [[Fraction(v) for v in row] for row in matrix]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("Gram matrix must be square")
        for i in range(n):
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise ValueError("Gram matrix must be symmetric")
        for k in range(1, n + 1):
            if _det([r[:k] for r in rows[:k]]) <= 0:
                raise ValueError("Gram matrix is not positive definite")
        self.matrix = rows
        self.det = _det(rows)

    def size(self):
        return len(self.matrix)

    def log_detnorm(self):
        return 0.5 * log_fraction(self.det)


class LatticeNorm:
    """Nonarchimedean gauge norm of the lattice spanned by basis columns."""

    kind = "lattice"

    def __init__(self, basis):
        rows = [[Fraction(v) for v in row] for row in basis]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("lattice basis must be square")
        self.basis = rows
        self.det = _det(rows)
        if self.det == 0:
            raise ValueError("lattice basis is singular")
        self._inverse = None

    def size(self):
        return len(self.basis)

    def inverse(self):
        if self._inverse is None:
            self._inverse = _invert(self.basis)
        return self._inverse

    def log_detnorm_at(self, place):
        # gauge of the standard wedge is |det|^{-1} at the place
        p = int(place.key)
        v = _padic_valuation(self.det.numerator, p) - _padic_valuation(
            self.det.denominator, p
        )
        return v * math.log(p)


@dataclass(frozen=True)
class FiltrationStep:
    threshold: float
    indices: tuple
    dimension: int


class AdelicVectorBundle:
    def __init__(self, curve, rank, norms):
        if rank < 1:
            raise ValueError("rank must be positive")
        self.curve = curve
        self.rank = rank
        self.norms = dict(norms)
        for place, desc in self.norms.items():
            if desc.size() != rank:
                raise ValueError("norm size does not match rank")
            if desc.kind == "gram" and not place.is_arch:
                raise ValueError("Gram norms are archimedean only")
            if desc.kind == "lattice" and place.kind != "prime":
                raise ValueError("lattice norms live at finite places")

    def sorted_places(self):
        return sorted(
            self.norms, key=lambda pl: (0 if pl.is_arch else 1, pl.kind, str(pl.key))
        )

    def arithmetic_degree(self):
        total = 0.0
        for place in self.sorted_places():
            desc = self.norms[place]
            if desc.kind == "lattice":
                ldn = desc.log_detnorm_at(place)
            else:
                ldn = desc.log_detnorm()
            total += -float(place.weight) * ldn
        return total

    def slope(self):
        return self.arithmetic_degree() / self.rank

    def is_diagonal(self):
        return all(d.kind == "diagonal" for d in self.norms.values())

    def line_degree(self, k):
        """Degree of the k-th coordinate line under the induced norms."""
        if not self.is_diagonal():
            raise ValueError("line degrees need diagonal norms")
        if not 0 <= k < self.rank:
            raise ValueError("line index out of range")
        total = 0.0
        for place in self.sorted_places():
            total += -float(place.weight) * self.norms[place].log_value(k)
        return total


def hn_filtration_diagonal(bundle):
    """Filtration steps (threshold, line indices) for diagonal bundles.

    Lines are grouped by equal degree and steps are returned with
    strictly decreasing thresholds; each step lists all lines at or
    above its threshold.
    """
    if not bundle.is_diagonal():
        raise ValueError("filtration shortcut needs diagonal norms")
    degrees = [bundle.line_degree(k) for k in range(bundle.rank)]
    thresholds = sorted(set(degrees), reverse=True)
    steps = []
    for t in thresholds:
        idx = tuple(k for k in range(bundle.rank) if degrees[k] >= t)
        steps.append(FiltrationStep(threshold=t, indices=idx, dimension=len(idx)))
    return steps


def spectral_norm_diagonal(index, level, family, n_max=8):
    """Limit norm exp(-t_N/N) of a monomial line along tensor powers.

    `family(level*N)` must return the diagonal bundle at that level;
    t_N is the degree of line `index*N` inside it.  Returns the final
    value and the whole trace.
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    trace = []
    for n in range(1, n_max + 1):
        b = family(level * n)
        k = index * n
        if k >= b.rank:
            raise ValueError("line index escapes the family rank")
        trace.append(math.exp(-b.line_degree(k) / n))
    return trace[-1], trace


# ---------------------------------------------------------------------------
# exhaustive slope search


class _SlopeValue:
    """Slope as an exact sum of c*ln(q) terms plus a float shadow."""

    def __init__(self, float_value, terms=None):
        self.float_value = float_value
        self.terms = terms  # list of (Fraction coeff, Fraction base>0) or None

    def compare(self, other):
        if self.terms is not None and other.terms is not None:
            diff = [(c, q) for c, q in self.terms]
            diff.extend((-c, q) for c, q in other.terms)
            return _sign_of_log_combination(diff)
        a, b = self.float_value, other.float_value
        return (a > b) - (a < b)


def _sign_of_log_combination(terms):
    """Exact sign of sum c_i ln(q_i) with rational c_i and q_i > 0."""
    denom = 1
    for c, _ in terms:
        denom = denom * c.denominator // gcd(denom, c.denominator)
    prod = Fraction(1)
    for c, q in terms:
        e = int(c * denom)
        if e and q != 1:
            prod *= Fraction(q) ** e
    return (prod > 1) - (prod < 1)


def _det(rows):
    n = len(rows)
    if n == 0:
        return Fraction(1)
    if n == 1:
        return Fraction(rows[0][0])
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = Fraction(0)
    for j in range(n):
        if rows[0][j] == 0:
            continue
        minor = [r[:j] + r[j + 1 :] for r in rows[1:]]
        total += (-1) ** j * rows[0][j] * _det(minor)
    return total


def _invert(rows):
    n = len(rows)
    aug = [[Fraction(v) for v in rows[i]] + [Fraction(int(i == j)) for j in range(n)]
           for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _rref(rows):
    mat = [list(r) for r in rows]
    nrows, ncols = len(mat), len(mat[0])
    lead = 0
    out = []
    for col in range(ncols):
        piv = next((r for r in range(lead, nrows) if mat[r][col] != 0), None)
        if piv is None:
            continue
        mat[lead], mat[piv] = mat[piv], mat[lead]
        inv = Fraction(1) / mat[lead][col]
        mat[lead] = [v * inv for v in mat[lead]]
        for r in range(nrows):
            if r != lead and mat[r][col] != 0:
                f = mat[r][col]
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[lead])]
        lead += 1
        if lead == nrows:
            break
    for r in range(lead):
        out.append(tuple(mat[r]))
    return out


def _primitive_rows(rows):
    """Scale Fraction rows to primitive integer rows, leading entry > 0."""
    out = []
    for row in rows:
        denom = 1
        for v in row:
            denom = denom * v.denominator // gcd(denom, v.denominator)
        ints = [int(v * denom) for v in row]
        g = 0
        for v in ints:
            g = gcd(g, abs(v))
        ints = [v // g for v in ints]
        lead = next(v for v in ints if v != 0)
        if lead < 0:
            ints = [-v for v in ints]
        out.append(tuple(ints))
    return out


def _minors(rows, dim):
    """All r x r column minors of an r x dim integer row matrix."""
    r = len(rows)
    minors = {}
    for cols in itertools.combinations(range(dim), r):
        sub = [[Fraction(row[c]) for c in cols] for row in rows]
        minors[cols] = _det(sub)
    return minors


def _exact_abs(place, x):
    if x == 0:
        return Fraction(0)
    if place.is_arch:
        return abs(Fraction(x))
    if place.kind == "copy":
        return Fraction(1)
    x = Fraction(x)
    p = int(place.key)
    v = _padic_valuation(x.numerator, p) - _padic_valuation(x.denominator, p)
    return Fraction(p) ** (-v)


def _strip_primes(n, primes):
    for p in primes:
        while n % p == 0:
            n //= p
    return n


def _subspace_slope(bundle, rows):
    """Exact-and-float slope of the span of integer rows."""
    dim = bundle.rank
    r = len(rows)
    minors = _minors(rows, dim)
    content = 0
    for m in minors.values():
        content = gcd(content, abs(int(m)))
    terms = []
    float_total = 0.0
    exact_ok = True
    arch_seen = False
    for place in bundle.sorted_places():
        desc = bundle.norms[place]
        nu = Fraction(place.weight)
        if desc.kind == "diagonal":
            exact = desc.exact_values()
            if exact is None:
                exact_ok = False
                ln_norm = _float_wedge_log(desc, place, minors)
                float_total += -float(nu) * ln_norm / r
                continue
            if place.is_arch:
                arch_seen = True
                s = Fraction(0)
                for cols, m in minors.items():
                    if m == 0:
                        continue
                    prod = Fraction(1)
                    for c in cols:
                        prod *= exact[c] * exact[c]
                    s += m * m * prod
                terms.append((-nu / (2 * r), s))
                float_total += float(-nu / (2 * r)) * log_fraction(s)
            else:
                best = Fraction(0)
                for cols, m in minors.items():
                    if m == 0:
                        continue
                    val = _exact_abs(place, m)
                    for c in cols:
                        val *= exact[c]
                    if val > best:
                        best = val
                terms.append((-nu / r, best))
                float_total += float(-nu / r) * log_fraction(best)
        elif desc.kind == "gram":
            arch_seen = True
            w = [
                [
                    sum(
                        Fraction(rows[i][a]) * desc.matrix[a][b] * rows[j][b]
                        for a in range(dim)
                        for b in range(dim)
                    )
                    for j in range(r)
                ]
                for i in range(r)
            ]
            d = _det(w)
            terms.append((-nu / (2 * r), d))
            float_total += float(-nu / (2 * r)) * log_fraction(d)
        else:  # lattice
            inv = desc.inverse()
            coords = [
                [sum(inv[i][a] * rows[j][a] for a in range(dim)) for j in range(r)]
                for i in range(dim)
            ]
            best = Fraction(0)
            for cols in itertools.combinations(range(dim), r):
                m = _det([[coords[c][j] for j in range(r)] for c in cols])
                val = _exact_abs(place, m)
                if val > best:
                    best = val
            terms.append((-nu / r, best))
            float_total += float(-nu / r) * log_fraction(best)
    if isinstance(bundle.curve, QCurve):
        if not arch_seen:
            s = sum(m * m for m in minors.values())
            terms.append((Fraction(-1, 2 * r), s))
            float_total += float(Fraction(-1, 2 * r)) * log_fraction(s)
        listed = {int(pl.key) for pl in bundle.norms if pl.kind == "prime"}
        g_out = _strip_primes(content, listed)
        if g_out > 1:
            terms.append((Fraction(1, r), Fraction(g_out)))
            float_total += float(Fraction(1, r)) * log_fraction(Fraction(g_out))
    return _SlopeValue(float_total, terms if exact_ok else None)


def _float_wedge_log(desc, place, minors):
    logs = [desc.log_value(i) for i in range(desc.size())]
    if place.is_arch:
        total = 0.0
        for cols, m in minors.items():
            if m == 0:
                continue
            total += float(m) ** 2 * math.exp(2 * sum(logs[c] for c in cols))
        return 0.5 * math.log(total)
    best = None
    for cols, m in minors.items():
        if m == 0:
            continue
        val = math.log(float(_exact_abs(place, m))) + sum(logs[c] for c in cols)
        best = val if best is None else max(best, val)
    return best


def max_slope_bruteforce(bundle, height_bound=1):
    """Maximal slope by exhausting subspaces spanned by small vectors.

    Candidate generators run over primitive integer vectors with
    coordinates up to `height_bound`; spans are deduplicated through
    reduced row echelon form and compared exactly.  Ties prefer
    coordinate lines, then smaller rank, so on diagonal bundles the
    returned float equals the top filtration threshold bitwise.
    Returns (slope, witness dict).
    """
    dim = bundle.rank
    if dim > 4:
        raise ValueError("exhaustive search supports dim <= 4")
    if not isinstance(bundle.curve, (QCurve, CopiesCurve)):
        raise ValueError("exhaustive search supports the rational base curves")
    vectors = []
    for tup in itertools.product(range(-height_bound, height_bound + 1), repeat=dim):
        if all(v == 0 for v in tup):
            continue
        g = 0
        for v in tup:
            g = gcd(g, abs(v))
        if g != 1:
            continue
        lead = next(v for v in tup if v != 0)
        if lead < 0:
            continue
        vectors.append(tup)
    total_combos = sum(math.comb(len(vectors), r) for r in range(2, dim))
    if total_combos > 500_000:
        raise ValueError("search space too large; reduce height_bound")

    best = None  # (slope_value, prefer_key, rows)
    diagonal = bundle.is_diagonal()

    def consider(rows):
        nonlocal best
        r = len(rows)
        is_line = r == 1 and sum(1 for v in rows[0] if v != 0) == 1
        sv = _subspace_slope(bundle, rows)
        prefer = (0 if is_line else 1, r)
        if best is None:
            best = (sv, prefer, rows, is_line)
            return
        c = sv.compare(best[0])
        if c > 0 or (c == 0 and prefer < best[1]):
            best = (sv, prefer, rows, is_line)

    for vec in vectors:
        consider([vec])
    seen = set()
    for r in range(2, dim):
        for combo in itertools.combinations(vectors, r):
            rref = _rref([[Fraction(v) for v in row] for row in combo])
            if len(rref) != r:
                continue
            key = (r, tuple(rref))
            if key in seen:
                continue
            seen.add(key)
            consider(_primitive_rows(rref))
    if dim > 1:
        consider([tuple(int(i == j) for j in range(dim)) for i in range(dim)])

    sv, _, rows, is_line = best
    if is_line and diagonal:
        k = next(i for i, v in enumerate(rows[0]) if v != 0)
        slope = bundle.line_degree(k)
    else:
        slope = sv.float_value
    witness = {"rank": len(rows), "basis": [list(r) for r in rows], "slope": slope}
    return slope, witness
