"""Shared numeric helpers: exact rationals, big-integer logs, factoring."""

from __future__ import annotations

import json
import math
import random
from fractions import Fraction

LN2 = math.log(2.0)


def log_int(n: int) -> float:
    """Natural log of a positive integer, safe for arbitrarily many bits."""
    if n <= 0:
        raise ValueError("log_int needs a positive integer")
    b = n.bit_length()
    if b <= 900:
        return math.log(n)
    shift = b - 64
    return math.log(n >> shift) + shift * LN2


def log_fraction(q: Fraction) -> float:
    """Natural log of a positive rational."""
    if q <= 0:
        raise ValueError("log_fraction needs a positive rational")
    return log_int(q.numerator) - log_int(q.denominator)


def parse_rational(text) -> Fraction:
    """Parse 'num/den' or integer strings (also passes through numbers)."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return Fraction(text).limit_denominator(10**12)
    s = str(text).strip()
    return Fraction(s)


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for 64-bit-ish inputs, probabilistic above."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    # these witnesses are exact for n < 3.3e24
    for a in [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int, rng: random.Random) -> int:
    if n % 2 == 0:
        return 2
    while True:
        x = rng.randrange(2, n - 1)
        y, c, d = x, rng.randrange(1, n - 1), 1
        while d == 1:
            x = (x * x + c) % n
            y = (y * y + c) % n
            y = (y * y + c) % n
            d = math.gcd(abs(x - y), n)
        if d != n:
            return d


def factor_int(n: int) -> dict[int, int]:
    """Prime factorization of a nonzero integer (sign dropped)."""
    n = abs(n)
    if n == 0:
        raise ValueError("cannot factor 0")
    out: dict[int, int] = {}
    for p in (2, 3, 5):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    f = 7
    # wheel-free trial division is plenty below 1e12 inputs
    while f * f <= n and f < 100000:
        while n % f == 0:
            out[f] = out.get(f, 0) + 1
            n //= f
        f += 2
    if n > 1:
        rng = random.Random(0xFACADE)
        stack = [n]
        while stack:
            m = stack.pop()
            if m == 1:
                continue
            if is_prime(m):
                out[m] = out.get(m, 0) + 1
                continue
            d = _pollard_rho(m, rng)
            stack.extend([d, m // d])
    return dict(sorted(out.items()))


def dump_json(obj, path=None, **kw) -> str:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False, **kw) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
