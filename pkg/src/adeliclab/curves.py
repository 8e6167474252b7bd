"""Adelic curves over Q and F_q(T), plus a weighted-copies toy curve.

A curve bundles a base field, a countable family of places with positive
weights (the measure nu), and normalized absolute values satisfying the
product formula: sum_w nu(w) ln|a|_w = 0 for every nonzero a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .utils import (
    factor_int,
    format_rational,
    is_prime,
    log_fraction,
    parse_rational,
)


@dataclass(frozen=True)
class Place:
    kind: str  # "arch" | "prime" | "poly" | "degree" | "copy"
    key: str
    weight: Fraction

    def __repr__(self):
        return f"Place({self.kind}:{self.key}, nu={self.weight})"

    @property
    def is_arch(self) -> bool:
        return self.kind == "arch"


class AdelicCurve:
    """Common interface; concrete curves fill in places and absolute values."""

    proper = True
    base = "?"

    def abs_value(self, a, place: Place) -> float:
        raise NotImplementedError

    def log_abs(self, a, place: Place) -> float:
        v = self.abs_value(a, place)
        if v <= 0:
            raise ValueError("zero has no absolute value")
        return math.log(v)

    def place_support(self, a):
        """[(place, order)] at all places where |a| != 1, plus arch/degree."""
        raise NotImplementedError

    def product_formula_defect(self, a) -> float:
        raise NotImplementedError

    def integrate_places(self, values: dict, default: float = 0.0) -> float:
        """Integrate a place function given by finitely many values.

        `default` applies to every unlisted place; curves with infinite total
        mass reject a nonzero default.
        """
        total = 0.0
        for pl, g in values.items():
            total += float(pl.weight) * g
        if default != 0.0:
            rest = self._remaining_mass(set(values))
            if rest is None:
                raise ValueError(
                    "integral would diverge: nonzero default on a curve "
                    "with infinite place mass"
                )
            total += default * rest
        return total

    def _remaining_mass(self, used: set):
        return None  # infinite by default

    def to_json(self) -> dict:
        raise NotImplementedError


class QCurve(AdelicCurve):
    """The rationals: one place per prime (weight 1) plus the real place."""

    base = "Q"

    def arch_place(self) -> Place:
        return Place("arch", "inf", Fraction(1))

    def prime_place(self, p: int) -> Place:
        p = int(p)
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        return Place("prime", str(p), Fraction(1))

    def abs_value(self, a, place: Place) -> float:
        a = parse_rational(a)
        if a == 0:
            raise ValueError("zero has no absolute value")
        if place.kind == "arch":
            return abs(float(a))
        if place.kind == "prime":
            p = int(place.key)
            v = _padic_valuation(a, p)
            return float(Fraction(p) ** (-v))
        raise ValueError(f"place {place} does not belong to Q")

    def log_abs(self, a, place: Place) -> float:
        a = parse_rational(a)
        if a == 0:
            raise ValueError("zero has no absolute value")
        if place.kind == "arch":
            return log_fraction(abs(a))
        p = int(place.key)
        return -_padic_valuation(a, p) * math.log(p)

    def place_support(self, a):
        a = parse_rational(a)
        if a == 0:
            raise ValueError("zero has no support")
        out = []
        num = factor_int(a.numerator) if abs(a.numerator) != 1 else {}
        den = factor_int(a.denominator) if a.denominator != 1 else {}
        for p in sorted(set(num) | set(den)):
            out.append((self.prime_place(p), num.get(p, 0) - den.get(p, 0)))
        out.append((self.arch_place(), 0))
        return out

    def product_formula_defect(self, a) -> float:
        a = parse_rational(a)
        total = log_fraction(abs(a))
        for pl, v in self.place_support(a):
            if pl.kind == "prime":
                total -= v * math.log(int(pl.key))
        return total

    def to_json(self) -> dict:
        return {"base": "Q"}


def _padic_valuation(a: Fraction, p: int) -> int:
    v = 0
    num, den = a.numerator, a.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


# ---------------------------------------------------------------------------
# finite fields F_{p^k} and polynomials over them


class FiniteField:
    """Arithmetic of F_q, q = p^k. Elements are ints (k=1) or coeff tuples."""

    def __init__(self, q: int):
        p, k = _prime_power(q)
        self.q, self.p, self.k = q, p, k
        if k == 1:
            self.zero, self.one = 0, 1
            self.gen = 1 if p == 2 else min(
                g for g in range(2, p) if _is_primitive_root(g, p)
            ) if p > 2 else 1
            self.modulus = None
        else:
            self.zero = (0,) * k
            self.one = (1,) + (0,) * (k - 1)
            self.gen = (0, 1) + (0,) * (k - 2)
            self.modulus = _smallest_irreducible(p, k)

    def from_int(self, n: int):
        if self.k == 1:
            return n % self.p
        digits = []
        n = n % self.q
        for _ in range(self.k):
            digits.append(n % self.p)
            n //= self.p
        return tuple(digits)

    def add(self, a, b):
        if self.k == 1:
            return (a + b) % self.p
        return tuple((x + y) % self.p for x, y in zip(a, b))

    def neg(self, a):
        if self.k == 1:
            return (-a) % self.p
        return tuple((-x) % self.p for x in a)

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        if self.k == 1:
            return (a * b) % self.p
        p, k, m = self.p, self.k, self.modulus
        prod = [0] * (2 * k - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    prod[i + j] = (prod[i + j] + x * y) % p
        # reduce modulo the monic modulus of degree k
        for i in range(2 * k - 2, k - 1, -1):
            c = prod[i]
            if c:
                prod[i] = 0
                for j in range(k):
                    prod[i - k + j] = (prod[i - k + j] - c * m[j]) % p
        return tuple(prod[:k])

    def inv(self, a):
        if a == self.zero:
            raise ZeroDivisionError("inverse of 0 in F_q")
        # q is tiny at desk scale; a^(q-2) is fine
        out, base, e = self.one, a, self.q - 2
        while e:
            if e & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            e >>= 1
        return out

    def elements(self):
        for n in range(self.q):
            yield self.from_int(n)


def _prime_power(q: int):
    for p in range(2, q + 1):
        if q % p == 0:
            k = 0
            while q % p == 0:
                q //= p
                k += 1
            if q != 1:
                raise ValueError("q must be a prime power")
            return p, k
    raise ValueError("q must be >= 2")


def _is_primitive_root(g: int, p: int) -> bool:
    order = p - 1
    fac = factor_int(order)
    return all(pow(g, order // r, p) != 1 for r in fac)


def _poly_irreducible_fp(coeffs: tuple, p: int) -> bool:
    # coeffs ascending over F_p, monic; brute trial division
    n = len(coeffs) - 1
    if n == 1:
        return True
    for d in range(1, n // 2 + 1):
        for idx in range(p**d):
            div = []
            m = idx
            for _ in range(d):
                div.append(m % p)
                m //= p
            div.append(1)
            if _fp_poly_mod(coeffs, tuple(div), p) == ():
                return False
    return True


def _fp_poly_mod(a: tuple, b: tuple, p: int) -> tuple:
    a = list(a)
    db, lb = len(b) - 1, b[-1]
    linv = pow(lb, p - 2, p)
    while len(a) - 1 >= db and any(a):
        while a and a[-1] == 0:
            a.pop()
        if len(a) - 1 < db:
            break
        c = a[-1] * linv % p
        shift = len(a) - 1 - db
        for j in range(db + 1):
            a[shift + j] = (a[shift + j] - c * b[j]) % p
        while a and a[-1] == 0:
            a.pop()
    return tuple(a)


def _smallest_irreducible(p: int, k: int) -> tuple:
    for idx in range(p**k):
        lower = []
        m = idx
        for _ in range(k):
            lower.append(m % p)
            m //= p
        cand = tuple(lower) + (1,)
        if _poly_irreducible_fp(cand, p):
            return cand
    raise RuntimeError("unreachable: irreducible polynomials exist")


class PolyRing:
    """Dense univariate polynomials over a FiniteField, variable T."""

    def __init__(self, field: FiniteField):
        self.F = field

    def normalize(self, coeffs) -> tuple:
        c = list(coeffs)
        while c and c[-1] == self.F.zero:
            c.pop()
        return tuple(c)

    def from_ints(self, ints: Iterable[int]) -> tuple:
        return self.normalize([self.F.from_int(n) for n in ints])

    def degree(self, a: tuple) -> int:
        return len(a) - 1  # zero poly handled by callers

    def add(self, a, b):
        F = self.F
        n = max(len(a), len(b))
        out = []
        for i in range(n):
            x = a[i] if i < len(a) else F.zero
            y = b[i] if i < len(b) else F.zero
            out.append(F.add(x, y))
        return self.normalize(out)

    def mul(self, a, b):
        F = self.F
        if not a or not b:
            return ()
        out = [F.zero] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x != F.zero:
                for j, y in enumerate(b):
                    out[i + j] = F.add(out[i + j], F.mul(x, y))
        return self.normalize(out)

    def divmod(self, a, b):
        F = self.F
        if not b:
            raise ZeroDivisionError("polynomial division by zero")
        a = list(a)
        q = [F.zero] * max(len(a) - len(b) + 1, 1)
        linv = F.inv(b[-1])
        while len(a) >= len(b) and any(x != F.zero for x in a):
            while a and a[-1] == F.zero:
                a.pop()
            if len(a) < len(b):
                break
            c = F.mul(a[-1], linv)
            shift = len(a) - len(b)
            q[shift] = c
            for j in range(len(b)):
                a[shift + j] = F.sub(a[shift + j], F.mul(c, b[j]))
            while a and a[-1] == F.zero:
                a.pop()
        return self.normalize(q), self.normalize(a)

    def gcd(self, a, b):
        while b:
            _, r = self.divmod(a, b)
            a, b = b, r
        return self.monic(a) if a else ()

    def monic(self, a):
        if not a:
            return ()
        F = self.F
        linv = F.inv(a[-1])
        return tuple(F.mul(x, linv) for x in a)

    def monic_polys(self, deg: int):
        F = self.F
        for idx in range(F.q**deg):
            lower = []
            m = idx
            for _ in range(deg):
                lower.append(F.from_int(m % F.q))
                m //= F.q
            yield tuple(lower) + (F.one,)

    def is_irreducible(self, a) -> bool:
        if not a or len(a) == 1:
            return False
        n = len(a) - 1
        if n == 1:
            return True
        for d in range(1, n // 2 + 1):
            for div in self.monic_polys(d):
                if self.divmod(a, div)[1] == ():
                    return False
        return True

    def factor(self, a) -> dict:
        """Monic irreducible factors with multiplicities (unit dropped)."""
        if not a:
            raise ValueError("cannot factor 0")
        a = self.monic(a)
        out: dict[tuple, int] = {}
        d = 1
        while len(a) > 1:
            if d > (len(a) - 1) // 2:
                out[a] = out.get(a, 0) + 1
                break
            hit = False
            for div in self.monic_polys(d):
                q, r = self.divmod(a, div)
                if r == ():
                    out[div] = out.get(div, 0) + 1
                    a = q
                    hit = True
                    break
            if not hit:
                d += 1
        return out

    def to_string(self, a) -> str:
        F = self.F
        if not a:
            return "0"
        terms = []
        for i in range(len(a) - 1, -1, -1):
            c = a[i]
            if c == F.zero:
                continue
            if F.k == 1:
                cs = "" if (c == 1 and i > 0) else str(c)
            else:
                cs = "(" + ",".join(str(x) for x in c) + ")"
                if c == F.one and i > 0:
                    cs = ""
            if i == 0:
                terms.append(cs if cs else "1")
            elif i == 1:
                terms.append(f"{cs}T" if cs else "T")
            else:
                terms.append(f"{cs}T^{i}" if cs else f"T^{i}")
        return "+".join(terms)


@dataclass(frozen=True)
class FqtElement:
    num: tuple
    den: tuple


class FqTCurve(AdelicCurve):
    """F_q(T): one place per monic irreducible (weight deg) plus the
    degree place (weight 1), |a|_pi = q^(-ord_pi a), |a|_deg = q^(deg a)."""

    def __init__(self, q: int):
        self.field = FiniteField(q)
        self.polyring = PolyRing(self.field)
        self.q = q
        self.base = "FqT"
        self._place_polys: dict[str, tuple] = {}

    def element(self, num, den=None) -> FqtElement:
        R = self.polyring
        if isinstance(num, FqtElement):
            return num
        npoly = num if isinstance(num, tuple) else R.from_ints(num)
        if den is None:
            dpoly = (self.field.one,)
        else:
            dpoly = den if isinstance(den, tuple) else R.from_ints(den)
        if not dpoly:
            raise ZeroDivisionError("zero denominator")
        g = R.gcd(npoly, dpoly) if npoly else ()
        if g and len(g) > 1:
            npoly = R.divmod(npoly, g)[0]
            dpoly = R.divmod(dpoly, g)[0]
        if dpoly and dpoly[-1] != self.field.one:
            linv = self.field.inv(dpoly[-1])
            scale = (linv,)
            npoly = R.mul(npoly, scale)
            dpoly = R.mul(dpoly, scale)
        return FqtElement(npoly, dpoly)

    def degree_place(self) -> Place:
        return Place("degree", "deg", Fraction(1))

    def poly_place(self, pi) -> Place:
        R = self.polyring
        poly = pi if isinstance(pi, tuple) else R.from_ints(pi)
        poly = R.monic(poly)
        if not R.is_irreducible(poly):
            raise ValueError(f"{R.to_string(poly)} is not irreducible over F_{self.q}")
        key = R.to_string(poly)
        self._place_polys[key] = poly
        return Place("poly", key, Fraction(len(poly) - 1))

    def _ord(self, a: FqtElement, poly: tuple) -> int:
        R = self.polyring

        def mult(f):
            if not f:
                return 0
            m = 0
            while True:
                q, r = R.divmod(f, poly)
                if r != ():
                    return m
                f, m = q, m + 1

        return mult(a.num) - mult(a.den)

    def abs_value(self, a, place: Place) -> float:
        a = self.element(a) if not isinstance(a, FqtElement) else a
        if not a.num:
            raise ValueError("zero has no absolute value")
        if place.kind == "degree":
            return float(self.q) ** (len(a.num) - len(a.den))
        if place.kind == "poly":
            poly = self._place_polys[place.key]
            return float(self.q) ** (-self._ord(a, poly))
        raise ValueError(f"place {place} does not belong to F_q(T)")

    def place_support(self, a):
        a = self.element(a) if not isinstance(a, FqtElement) else a
        if not a.num:
            raise ValueError("zero has no support")
        R = self.polyring
        out = []
        nfac = R.factor(a.num) if len(a.num) > 1 else {}
        dfac = R.factor(a.den) if len(a.den) > 1 else {}
        keys = {}
        for poly, m in nfac.items():
            keys[poly] = m
        for poly, m in dfac.items():
            keys[poly] = keys.get(poly, 0) - m
        for poly in sorted(keys, key=lambda f: (len(f), R.to_string(f))):
            pl = Place("poly", R.to_string(poly), Fraction(len(poly) - 1))
            self._place_polys[pl.key] = poly
            out.append((pl, keys[poly]))
        out.append((self.degree_place(), 0))
        return out

    def product_formula_defect(self, a) -> float:
        a = self.element(a) if not isinstance(a, FqtElement) else a
        # exact integer combination times ln q
        total = (len(a.num) - len(a.den))
        for pl, v in self.place_support(a):
            if pl.kind == "poly":
                total -= int(pl.weight) * v
        return total * math.log(self.q)

    def to_json(self) -> dict:
        return {"base": "FqT", "q": self.q}


class CopiesCurve(AdelicCurve):
    """Finitely many labeled copies of the trivial absolute value on Q with
    user-chosen positive weights; proper by construction, useful for
    exercising non-unit place masses."""

    base = "copies"

    def __init__(self, weights):
        ws = [parse_rational(w) for w in weights]
        if not ws or any(w <= 0 for w in ws):
            raise ValueError("weights must be positive and nonempty")
        self.weights = ws

    def copy_place(self, i: int) -> Place:
        return Place("copy", str(i), self.weights[i])

    def all_places(self):
        return [self.copy_place(i) for i in range(len(self.weights))]

    def abs_value(self, a, place: Place) -> float:
        if parse_rational(a) == 0:
            raise ValueError("zero has no absolute value")
        return 1.0

    def place_support(self, a):
        if parse_rational(a) == 0:
            raise ValueError("zero has no support")
        return []

    def product_formula_defect(self, a) -> float:
        if parse_rational(a) == 0:
            raise ValueError("zero has no support")
        return 0.0

    def total_mass(self) -> float:
        return float(sum(self.weights))

    def _remaining_mass(self, used: set):
        return float(sum(w for i, w in enumerate(self.weights)
                         if self.copy_place(i) not in used))

    def to_json(self) -> dict:
        return {"base": "copies",
                "weights": [format_rational(w) for w in self.weights]}


def curve_from_json(blob: dict) -> AdelicCurve:
    base = blob.get("base")
    if base == "Q":
        return QCurve()
    if base == "FqT":
        return FqTCurve(int(blob["q"]))
    if base == "copies":
        return CopiesCurve(blob["weights"])
    raise ValueError(f"unknown curve base {base!r}")
