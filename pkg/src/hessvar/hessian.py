"""Elementary symmetric polynomials, the Garding cone, and radial Hessian spectra.

Everything here is exact algebra on eigenvalue tuples.  For a radial
function u(|x|) on R^n the Hessian has eigenvalue u''(r) once (radial
direction) and u'(r)/r with multiplicity n-1, which gives the k-Hessian
the closed form used throughout the package:

    S_k = C(n-1,k-1) * u'' * (u'/r)^(k-1) + C(n-1,k) * (u'/r)^k

and equivalently the divergence form

    r^(n-1) * S_k = (1/k) * C(n-1,k-1) * d/dr[ r^(n-k) * (u')^k ].
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError


def binom(n: int, k: int) -> float:
    """C(n, k) as a float; zero outside the Pascal triangle."""
    if k < 0 or k > n:
        return 0.0
    return float(math.comb(n, k))


def elementary_symmetric(lam, kmax: int) -> np.ndarray:
    """All e_0..e_kmax of the tuples in ``lam`` (last axis = eigenvalues).

    Uses the stable coefficient recurrence (fold one eigenvalue at a
    time), never subset enumeration.  Returns shape lam.shape[:-1] + (kmax+1,).
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if not 1 <= kmax <= n:
        raise ConfigError(f"need 1 <= kmax <= n, got kmax={kmax}, n={n}")
    if not np.all(np.isfinite(lam)):
        raise ConfigError("eigenvalue tuple has non-finite entries")
    e = np.zeros(lam.shape[:-1] + (kmax + 1,), dtype=float)
    e[..., 0] = 1.0
    for i in range(n):
        top = min(i + 1, kmax)
        for j in range(top, 0, -1):
            e[..., j] += lam[..., i] * e[..., j - 1]
    return e


def sigma(k: int, lam) -> float | np.ndarray:
    """k-th elementary symmetric polynomial of the eigenvalue tuple."""
    e = elementary_symmetric(lam, k)
    out = e[..., k]
    return float(out) if out.ndim == 0 else out


def in_gamma_k(k: int, lam, eps_cone: float = 0.0) -> bool | np.ndarray:
    """True iff sigma_j(lam) > eps_cone for every j = 1..k.

    ``eps_cone`` is a rejection margin for flow steps; the default 0
    is the strict open-cone test.
    """
    e = elementary_symmetric(lam, k)
    ok = np.all(e[..., 1:] > eps_cone, axis=-1)
    return bool(ok) if np.ndim(ok) == 0 else ok


def radial_hessian_eigs(n: int, u2, slope_over_r) -> np.ndarray:
    """Hessian eigenvalues of a radial function: (u'', u'/r, ..., u'/r).

    At r = 0 the caller must pass slope_over_r = u''(0) (the limit of
    u'(r)/r).
    """
    if n < 1:
        raise ConfigError(f"need n >= 1, got {n}")
    u2 = np.asarray(u2, dtype=float)
    q = np.asarray(slope_over_r, dtype=float)
    out = np.empty(np.broadcast(u2, q).shape + (n,), dtype=float)
    out[..., 0] = u2
    out[..., 1:] = q[..., None]
    return out


def radial_sigma_j(n: int, j: int, u2, q):
    """sigma_j of the radial eigenvalue tuple (u'', q, ..., q), q = u'/r."""
    u2 = np.asarray(u2, dtype=float)
    q = np.asarray(q, dtype=float)
    return binom(n - 1, j - 1) * u2 * q ** (j - 1) + binom(n - 1, j) * q**j


def radial_Sk(n: int, k: int, u1, u2, r):
    """k-Hessian of a radial profile from u', u'' at radius r.

    Vectorized over nodes; entries with r = 0 use the origin limit
    (all eigenvalues equal u''), so u1 is ignored there.
    """
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= n, got k={k}, n={n}")
    r = np.asarray(r, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(r > 0.0, u1 / np.where(r > 0.0, r, 1.0), u2)
    out = radial_sigma_j(n, k, u2, q)
    return float(out) if out.ndim == 0 else out


def radial_gamma_margins(n: int, k: int, u2, q) -> np.ndarray:
    """sigma_j for j = 1..k of radial tuples, stacked on the last axis."""
    u2 = np.asarray(u2, dtype=float)
    q = np.asarray(q, dtype=float)
    cols = [radial_sigma_j(n, j, u2, q) for j in range(1, k + 1)]
    return np.stack(np.broadcast_arrays(*cols), axis=-1) if k > 1 else np.asarray(cols[0])[..., None]


def radial_in_gamma_k(n: int, k: int, u1, u2, r, eps_cone: float = 0.0):
    """Nodewise Gamma_k membership for a radial profile (origin handled)."""
    r = np.asarray(r, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(r > 0.0, u1 / np.where(r > 0.0, r, 1.0), u2)
    m = radial_gamma_margins(n, k, u2, q)
    ok = np.all(m > eps_cone, axis=-1)
    return bool(ok) if np.ndim(ok) == 0 else ok


def sigma_subset_oracle(k: int, lam) -> float:
    """Subset-enumeration evaluation of sigma_k; test oracle for small n.

    Accumulates with compensated summation so the oracle stays accurate
    even when the subset products nearly cancel.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= n, got k={k}, n={n}")
    from itertools import combinations

    vals = lam.tolist()
    return math.fsum(math.prod(vals[i] for i in idx) for idx in combinations(range(n), k))
