"""Simultaneous root finding for dense complex polynomials.

Coefficients are ascending: coeffs[k] multiplies z^k.  The iteration is
Ehrlich-Aberth with a twist that keeps high degrees finite: for points
outside the unit disk the Newton ratio p/p' is evaluated through the
reversed polynomial at u = 1/z, so no power of z is ever formed
directly.  Initial guesses sit on the circle of radius
|c0/cn|^(1/deg), which is exact for binomials and a decent first move
generally.
"""

import numpy as np

_SEED = 987654321


def _newton_ratio(coeffs, z):
    """w = p(z)/p'(z), stable for any magnitude of z."""
    n = len(coeffs) - 1
    w = np.empty_like(z)
    small = np.abs(z) <= 1.0
    with np.errstate(all="ignore"):
        if small.any():
            zs = z[small]
            p = np.full_like(zs, coeffs[n])
            dp = np.zeros_like(zs)
            for k in range(n - 1, -1, -1):
                dp = dp * zs + p
                p = p * zs + coeffs[k]
            w[small] = p / dp
        big = ~small
        if big.any():
            zb = z[big]
            u = 1.0 / zb
            rev = coeffs[::-1]  # q(u) = sum rev[j] u^j, p(z) = z^n q(1/z)
            q = np.full_like(u, rev[n])
            dq = np.zeros_like(u)
            for k in range(n - 1, -1, -1):
                dq = dq * u + q
                q = q * u + rev[k]
            w[big] = zb * q / (n * q - u * dq)
    bad = ~np.isfinite(w)
    if bad.any():
        w[bad] = 0.125 * (1.0 + np.abs(z[bad]))
    return w


def all_roots(coeffs, tol=1e-14, max_iter=400):
    """All complex roots, multiplicity included, in deterministic order."""
    c = np.asarray([complex(v) for v in coeffs], dtype=complex)
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        raise ValueError("zero polynomial has no well-defined roots")
    c = c[: nz[-1] + 1]
    if len(c) == 1:
        return np.zeros(0, dtype=complex)
    zero_mult = int(np.nonzero(c)[0][0])
    c = c[zero_mult:]
    n = len(c) - 1
    roots = np.zeros(zero_mult, dtype=complex)
    if n >= 1:
        c = c / np.max(np.abs(c))
        r0 = np.exp((np.log(abs(c[0])) - np.log(abs(c[n]))) / n)
        rng = np.random.default_rng(_SEED)
        angles = 2 * np.pi * (np.arange(n) + 0.25) / n + 1e-3 * rng.standard_normal(n)
        radii = r0 * (1.0 + 1e-3 * rng.standard_normal(n))
        z = radii * np.exp(1j * angles)
        for _ in range(max_iter):
            w = _newton_ratio(c, z)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            with np.errstate(all="ignore"):
                inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            s = inv.sum(axis=1)
            denom = 1.0 - w * s
            denom = np.where(np.abs(denom) < 1e-300, 1.0, denom)
            dz = w / denom
            z = z - dz
            if np.max(np.abs(dz) / (1.0 + np.abs(z))) < tol:
                break
        for _ in range(3):  # plain Newton polish
            z = z - _newton_ratio(c, z)
        order = np.lexsort((np.abs(z), np.round(np.angle(z), 12)))
        roots = np.concatenate([roots, z[order]])
    return roots
