"""Source terms psi(x, u) = weight(|x|) * f(u) for the right-hand sides.

Every kind separates into a radial weight and a u-dependent factor.  The
weight itself factors as r^weight_power * weight_smooth(r) with the
smooth part bounded near the origin, so quadrature can always integrate
the power factor analytically over the first cell.

The primitive F(z) = int_z^0 f(t) dt (the u-part of the potential; the
weight multiplies it inside dx-integrals) is closed form for the
constant / power / eigen kinds and is tabulated by cumulative quadrature
for the mollified, capped, and regularized kinds, with exact
continuations on their pure far branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


def _hermite_monotone(t, t0, t1, f0, f1, m0, m1):
    """Cubic Hermite bridge with Fritsch-Carlson slope clamping.

    Endpoint slopes are clipped into [0, 3*secant] (or the decreasing
    mirror) so the bridge cannot overshoot monotone data.
    """
    h = t1 - t0
    sec = (f1 - f0) / h
    if sec >= 0.0:
        m0 = min(max(m0, 0.0), 3.0 * sec)
        m1 = min(max(m1, 0.0), 3.0 * sec)
    else:
        m0 = max(min(m0, 0.0), 3.0 * sec)
        m1 = max(min(m1, 0.0), 3.0 * sec)
    x = (np.asarray(t, dtype=float) - t0) / h
    h00 = 2 * x**3 - 3 * x**2 + 1
    h10 = x**3 - 2 * x**2 + x
    h01 = -2 * x**3 + 3 * x**2
    h11 = x**3 - x**2
    return h00 * f0 + h10 * h * m0 + h01 * f1 + h11 * h * m1


class Nonlinearity:
    """Base interface; subclasses fill ``kind`` and the evaluation data."""

    kind = "abstract"
    weight_power = 0.0  # power of r carried by the weight at the origin

    def f(self, z):
        raise NotImplementedError

    def F(self, z):
        """Primitive int_z^0 f(t) dt (positive for z < 0)."""
        raise NotImplementedError

    def weight_smooth(self, r):
        """Bounded factor of the weight; full weight = r^weight_power * this."""
        return np.ones_like(np.asarray(r, dtype=float))

    def weight(self, r):
        r = np.asarray(r, dtype=float)
        if self.weight_power == 0.0:
            return self.weight_smooth(r)
        with np.errstate(divide="ignore"):
            return r**self.weight_power * self.weight_smooth(r)

    def psi(self, r, z):
        return self.weight(r) * self.f(z)

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantSource(Nonlinearity):
    """psi = c, no weight.  Steady state of S_k = C(n,k) is the paraboloid."""

    c: float
    kind = "constant"

    def __post_init__(self):
        if not self.c > 0.0:
            raise ConfigError(f"constant source must be positive, got {self.c}")

    def f(self, z):
        return np.full_like(np.asarray(z, dtype=float), self.c)

    def F(self, z):
        return -self.c * np.asarray(z, dtype=float)

    def describe(self):
        return {"kind": "constant", "c": self.c}


@dataclass(frozen=True)
class PowerSource(Nonlinearity):
    """psi = coeff * r^wexp * |z|^p (wexp = 2 s k in the natural problems)."""

    p: float
    wexp: float = 0.0
    coeff: float = 1.0
    kind = "power"

    def __post_init__(self):
        if self.p < 0.0 or self.coeff <= 0.0:
            raise ConfigError("power source needs p >= 0 and coeff > 0")
        object.__setattr__(self, "weight_power", float(self.wexp))

    def f(self, z):
        return self.coeff * np.abs(np.asarray(z, dtype=float)) ** self.p

    def F(self, z):
        z = np.asarray(z, dtype=float)
        return -np.sign(z) * self.coeff * np.abs(z) ** (self.p + 1.0) / (self.p + 1.0)

    def describe(self):
        return {"kind": "power", "p": self.p, "wexp": self.wexp, "coeff": self.coeff}


@dataclass(frozen=True)
class EigenSource(Nonlinearity):
    """psi = lam * r^wexp * |z|^k, the eigenvalue-problem right-hand side."""

    lam: float
    k: int
    wexp: float = 0.0
    kind = "eigen"

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ConfigError(f"eigenvalue factor must be positive, got {self.lam}")
        object.__setattr__(self, "weight_power", float(self.wexp))

    def f(self, z):
        return self.lam * np.abs(np.asarray(z, dtype=float)) ** self.k

    def F(self, z):
        z = np.asarray(z, dtype=float)
        return -np.sign(z) * self.lam * np.abs(z) ** (self.k + 1.0) / (self.k + 1.0)

    def describe(self):
        return {"kind": "eigen", "lam": self.lam, "k": self.k, "wexp": self.wexp}


class _TabulatedPrimitive:
    """Mixin: F by cumulative trapezoid over a dense |z| table."""

    _table_depth: float = 0.0  # |z| beyond which _F_tail continues exactly

    def _build_table(self, zdeep: float, npts: int = 6000):
        za = np.concatenate([[0.0], np.geomspace(1e-10 * zdeep, zdeep, npts)])
        fv = self.f(-za)
        Fv = np.concatenate([[0.0], np.cumsum(0.5 * (fv[1:] + fv[:-1]) * np.diff(za))])
        self._ztab = za
        self._Ftab = Fv
        self._table_depth = zdeep

    def _F_tail(self, az):
        raise NotImplementedError

    def F(self, z):
        z = np.asarray(z, dtype=float)
        az = np.abs(z)
        base = np.interp(az, self._ztab, self._Ftab)
        deep = az > self._table_depth
        if np.any(deep):
            base = np.where(deep, self._Ftab[-1] + self._F_tail(az), base)
        return np.where(z <= 0.0, base, -base)


class MollifiedSource(_TabulatedPrimitive, Nonlinearity):
    """Bounded mollification of the critical power |z|^(kstar-1).

    Three pure branches -- a positive plateau delta^(kstar-1) for
    |z| < delta, the power |z|^(kstar-1) for 2*delta < |z| < M, and the
    integrable tail eps*z^(-2) for |z| > M + eps -- joined by monotone
    cubic bridges.  The weight is the smooth (r^2 + delta^2)^(s k).
    """

    kind = "mollified"
    weight_power = 0.0

    def __init__(self, delta: float, eps: float, M: float, kstar: float, s: float, k: int):
        if not (0.0 < delta < 1.0 and 0.0 < eps and M > max(1.0, 4.0 * delta)):
            raise ConfigError("mollified source needs 0 < delta < 1, eps > 0, M large")
        if kstar <= 2.0:
            raise ConfigError(f"mollified source needs kstar > 2, got {kstar}")
        self.delta = float(delta)
        self.eps = float(eps)
        self.M = float(M)
        self.kstar = float(kstar)
        self.s = float(s)
        self.k = int(k)
        self._build_table(zdeep=2.0 * (M + eps))

    def f(self, z):
        d, e, M, q = self.delta, self.eps, self.M, self.kstar - 1.0
        z = np.asarray(z, dtype=float)
        az = np.atleast_1d(np.abs(z))
        out = np.empty_like(az)
        lo = az < d
        bridge_lo = (az >= d) & (az <= 2 * d)
        mid = (az > 2 * d) & (az < M)
        bridge_hi = (az >= M) & (az <= M + e)
        hi = az > M + e
        out[lo] = d**q
        out[bridge_lo] = _hermite_monotone(
            az[bridge_lo], d, 2 * d, d**q, (2 * d) ** q, 0.0, q * (2 * d) ** (q - 1.0)
        )
        out[mid] = az[mid] ** q
        out[bridge_hi] = _hermite_monotone(
            az[bridge_hi], M, M + e, M**q, e / (M + e) ** 2, q * M ** (q - 1.0), -2 * e / (M + e) ** 3
        )
        out[hi] = e / az[hi] ** 2
        return out.reshape(z.shape) if z.ndim else out[0]

    def _F_tail(self, az):
        zd = self._table_depth
        return self.eps * (1.0 / zd - 1.0 / np.maximum(az, zd))

    def weight_smooth(self, r):
        r = np.asarray(r, dtype=float)
        return (r**2 + self.delta**2) ** (self.s * self.k)

    def describe(self):
        return {
            "kind": "mollified",
            "delta": self.delta,
            "eps": self.eps,
            "M": self.M,
            "kstar": self.kstar,
            "s": self.s,
            "k": self.k,
        }


class CappedSource(_TabulatedPrimitive, Nonlinearity):
    """Cap a base source by the power d_m |z|^p below z = -m.

    d_m = m^(-p) * base.f(-m) makes the junction continuous; the weight
    is inherited from the base.
    """

    kind = "capped"

    def __init__(self, base: Nonlinearity, m: float, p: float):
        if m <= 0.0 or p <= 0.0:
            raise ConfigError("cap needs m > 0 and p > 0")
        self.base = base
        self.m = float(m)
        self.p = float(p)
        self.d_m = float(base.f(np.asarray(-m))) / m**p
        self.weight_power = base.weight_power
        self._build_table(zdeep=2.0 * m)

    def f(self, z):
        z = np.asarray(z, dtype=float)
        az = np.abs(z)
        return np.where(az <= self.m, self.base.f(z), self.d_m * az**self.p)

    def _F_tail(self, az):
        zd = self._table_depth
        return self.d_m * (np.maximum(az, zd) ** (self.p + 1.0) - zd ** (self.p + 1.0)) / (self.p + 1.0)

    def weight_smooth(self, r):
        return self.base.weight_smooth(r)

    def describe(self):
        return {"kind": "capped", "m": self.m, "p": self.p, "base": self.base.describe()}


class RegularizedSublinearSource(_TabulatedPrimitive, Nonlinearity):
    """Sublinear-driver regularization at level m.

    f_m^(1/k) = fhat_m^(1/k) + 1/m where fhat_m clamps the base below
    z = -2m, and the singular weight r^(2sk) is smoothed into
    (r^2 + m^(-2))^(s k).  The shift keeps log f_m bounded near u = 0,
    which is what lets the descent flow run all the way to the boundary.
    """

    kind = "sublinear-regularized"
    weight_power = 0.0

    def __init__(self, base: Nonlinearity, m: float, k: int, s: float):
        if m <= 0.0:
            raise ConfigError(f"regularization level must be positive, got {m}")
        self.base = base
        self.m = float(m)
        self.k = int(k)
        self.s = float(s)
        self._f_clamped = float(base.f(np.asarray(-2.0 * m)))
        self._build_table(zdeep=3.0 * m)

    def f(self, z):
        zc = np.clip(np.asarray(z, dtype=float), -2.0 * self.m, 2.0 * self.m)
        fhat = self.base.f(zc)
        return (fhat ** (1.0 / self.k) + 1.0 / self.m) ** self.k

    def _F_tail(self, az):
        zd = self._table_depth
        c2 = (self._f_clamped ** (1.0 / self.k) + 1.0 / self.m) ** self.k
        return c2 * (np.maximum(az, zd) - zd)

    def weight_smooth(self, r):
        r = np.asarray(r, dtype=float)
        return (r**2 + self.m**-2) ** (self.s * self.k)

    def describe(self):
        return {
            "kind": "sublinear-regularized",
            "m": self.m,
            "k": self.k,
            "s": self.s,
            "base": self.base.describe(),
        }


class FrozenField(Nonlinearity):
    """psi frozen to given nodal values (f = 1); fixed-point testing aid."""

    kind = "frozen"
    weight_power = 0.0

    def __init__(self, r_nodes: np.ndarray, psi_nodes: np.ndarray):
        self._r = np.asarray(r_nodes, dtype=float)
        self._psi = np.asarray(psi_nodes, dtype=float)
        if np.any(self._psi <= 0.0):
            raise ConfigError("frozen field must be strictly positive")

    def f(self, z):
        return np.ones_like(np.asarray(z, dtype=float))

    def F(self, z):
        return -np.asarray(z, dtype=float)

    def weight_smooth(self, r):
        return np.interp(np.asarray(r, dtype=float), self._r, self._psi)

    def describe(self):
        return {"kind": "frozen", "nodes": len(self._r)}


def from_spec(spec: dict) -> Nonlinearity:
    """Rebuild a source term from its ``describe()`` dictionary."""
    kind = spec.get("kind")
    if kind == "constant":
        return ConstantSource(spec["c"])
    if kind == "power":
        return PowerSource(spec["p"], spec.get("wexp", 0.0), spec.get("coeff", 1.0))
    if kind == "eigen":
        return EigenSource(spec["lam"], spec["k"], spec.get("wexp", 0.0))
    if kind == "mollified":
        return MollifiedSource(
            spec["delta"], spec["eps"], spec["M"], spec["kstar"], spec["s"], spec["k"]
        )
    if kind == "capped":
        return CappedSource(from_spec(spec["base"]), spec["m"], spec["p"])
    if kind == "sublinear-regularized":
        return RegularizedSublinearSource(from_spec(spec["base"]), spec["m"], spec["k"], spec["s"])
    raise ConfigError(f"unknown nonlinearity kind: {kind!r}")
