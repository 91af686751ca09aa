"""Grids, radial profiles, weighted quadrature, Hessian energies and exponents.

The geometric conventions live here.  ``sphere_area`` is the single owner
of the surface-measure convention: it returns the area of the unit sphere
S^{n-1}, so sphere_area(2) = 2*pi and sphere_area(3) = 4*pi.  Every dx
integral of a radial function g is computed as

    integral_Omega g dx = sphere_area(n) * int_0^R g(r) r^(n-1) dr

with composite trapezoid on the (possibly graded) grid; when a power
weight r^sigma is present the first cell integrates the power factor in
closed form with the smooth part frozen at the first interior node, which
keeps integrable singularities at the origin under control without
adaptive machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hessian
from .errors import AdmissibilityError, ConfigError


def sphere_area(n: int) -> float:
    """Area of the unit sphere S^{n-1} in R^n (2*pi for n=2, 4*pi for n=3)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension n, Hessian order k, weight exponent s, and ball radius R.

    The weight in the equations is |x|^(2sk).  ``s0 = min(1, n/2k)`` marks
    the solver range (solvers need s > -s0); sharp-constant computations
    additionally admit s in [-1, 0] and the nonexistence machinery uses
    s <= -1, so construction only checks basic sanity and each consumer
    enforces its own range.
    """

    n: int
    k: int
    s: float
    R: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.k < 1 or self.k > self.n:
            raise ConfigError(f"need 1 <= k <= n, got n={self.n}, k={self.k}")
        if not (self.R > 0.0 and math.isfinite(self.R)):
            raise ConfigError(f"need R > 0, got R={self.R}")
        if not math.isfinite(self.s):
            raise ConfigError(f"need finite s, got s={self.s}")

    @property
    def s0(self) -> float:
        return min(1.0, self.n / (2.0 * self.k))

    @property
    def weight_exponent(self) -> float:
        """Power of |x| in the natural weight, 2*s*k."""
        return 2.0 * self.s * self.k

    def require_solver_range(self):
        if self.s <= -self.s0:
            raise ConfigError(f"solver range needs s > -s0 = {-self.s0:g}, got s={self.s}")

    def require_sharp_range(self):
        if not 2 * self.k < self.n:
            raise ConfigError(f"sharp-constant range needs 2k < n, got n={self.n}, k={self.k}")
        if not -1.0 <= self.s <= 0.0:
            raise ConfigError(f"sharp-constant range needs -1 <= s <= 0, got s={self.s}")


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing nodes r_0 = 0 < r_1 < ... < r_N."""

    nodes: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "_wcache", {})
        object.__setattr__(self, "_diff", None)
        if nodes.ndim != 1 or nodes.size < 17:
            raise ConfigError("grid needs at least N >= 16 cells")
        if nodes[0] != 0.0:
            raise ConfigError("grid must start exactly at r = 0")
        if not np.all(np.diff(nodes) > 0.0):
            raise ConfigError("grid nodes must be strictly increasing")

    @property
    def N(self) -> int:
        return self.nodes.size - 1

    @property
    def R(self) -> float:
        return float(self.nodes[-1])


def make_grid(params: ProblemParams, N: int, gamma: float | None = None) -> RadialGrid:
    """Power-graded grid r_i = R * (i/N)^gamma on [0, R].

    gamma defaults to 2 when s < 0 (concentrates nodes at the weight
    singularity) and to 1 otherwise.
    """
    if N < 16:
        raise ConfigError(f"need N >= 16, got N={N}")
    if gamma is None:
        gamma = 2.0 if params.s < 0.0 else 1.0
    if not (gamma >= 1.0 and math.isfinite(gamma)):
        raise ConfigError(f"need gamma >= 1, got gamma={gamma}")
    nodes = params.R * (np.arange(N + 1) / N) ** float(gamma)
    nodes[0] = 0.0
    nodes[-1] = params.R
    return RadialGrid(nodes=nodes, gamma=float(gamma))


@dataclass(eq=False)
class RadialProfile:
    """Nodal values of a radial function and its first derivative."""

    grid: RadialGrid
    u: np.ndarray
    du: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)
        if self.u.shape != self.grid.nodes.shape or self.du.shape != self.grid.nodes.shape:
            raise ConfigError("profile arrays must match the grid")

    def copy(self) -> "RadialProfile":
        return RadialProfile(self.grid, self.u.copy(), self.du.copy())

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.u)))


@dataclass(frozen=True)
class QuotientReport:
    """Hessian energy, weighted norm, and their scale-invariant quotient."""

    energy: float
    wnorm: float
    quotient: float
    kstar: float


# ---------------------------------------------------------------------------
# finite differences on nonuniform grids


def _diff_ops(grid: RadialGrid):
    ops = grid._diff
    if ops is None:
        r = grid.nodes
        hl = r[1:-1] - r[:-2]
        hr = r[2:] - r[1:-1]
        den = hl * hr * (hl + hr)
        c1 = (-(hr**2) / den, (hr**2 - hl**2) / den, hl**2 / den)
        c2 = (2.0 * hr / den, -2.0 * (hl + hr) / den, 2.0 * hl / den)
        a = r[-1] - r[-2]
        b = r[-1] - r[-3]
        hb = r[-2] - r[-3]
        bnd1 = (a / (hb * b), -b / (hb * a), (a + b) / (a * b))
        bnd2 = (2.0 / (hb * b), -2.0 / (hb * a), 2.0 / (a * b))
        ops = (c1, c2, float(r[1]), bnd1, bnd2)
        object.__setattr__(grid, "_diff", ops)
    return ops


def derivatives(grid: RadialGrid, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Second-order (du, d2u) from nodal values.

    Interior nodes use the nonuniform central stencil; the origin uses a
    ghost-node reflection (u'(0) = 0, u''(0) = 2(u_1 - u_0)/r_1^2); the
    outer boundary uses one-sided stencils.
    """
    c1, c2, r1, bnd1, bnd2 = _diff_ops(grid)
    du = np.empty_like(u)
    d2u = np.empty_like(u)
    du[1:-1] = c1[0] * u[:-2] + c1[1] * u[1:-1] + c1[2] * u[2:]
    d2u[1:-1] = c2[0] * u[:-2] + c2[1] * u[1:-1] + c2[2] * u[2:]
    du[0] = 0.0
    d2u[0] = 2.0 * (u[1] - u[0]) / r1**2
    du[-1] = bnd1[0] * u[-3] + bnd1[1] * u[-2] + bnd1[2] * u[-1]
    d2u[-1] = bnd2[0] * u[-3] + bnd2[1] * u[-2] + bnd2[2] * u[-1]
    return du, d2u


# ---------------------------------------------------------------------------
# quadrature


def weight_vector(grid: RadialGrid, p: float) -> np.ndarray:
    """Nodal weights W with W @ vals = int_0^R r^p * vals(r) dr.

    Composite trapezoid over [r_1, R] plus the analytic first cell with
    ``vals`` frozen at r_1.  W[0] is always zero, so integrals never
    evaluate the (possibly singular) integrand at the origin.
    """
    if p <= -1.0:
        raise ConfigError(f"power r^{p} is not integrable at the origin")
    key = float(p)
    W = grid._wcache.get(key)
    if W is None:
        r = grid.nodes
        W = np.zeros_like(r)
        t = np.zeros_like(r)
        t[1:-1] = 0.5 * (r[2:] - r[:-2])
        t[-1] = 0.5 * (r[-1] - r[-2])
        t[1] = 0.5 * (r[2] - r[1])
        W[1:] = t[1:] * r[1:] ** p
        W[1] += r[1] ** (p + 1.0) / (p + 1.0)
        grid._wcache[key] = W
    return W


def radial_weighted_integral(
    n: int, grid: RadialGrid, vals: np.ndarray, wexp: float = 0.0
) -> float:
    """int_0^R r^(n-1+wexp) * vals(r) dr  (see ``weight_vector``)."""
    return float(weight_vector(grid, n - 1.0 + wexp) @ vals)


# ---------------------------------------------------------------------------
# profile builders


def profile_from_callable(grid: RadialGrid, f, df) -> RadialProfile:
    """Sample u = f(r), u' = df(r) on the grid."""
    r = grid.nodes
    return RadialProfile(grid, np.asarray(f(r), dtype=float), np.asarray(df(r), dtype=float))


def quadratic_profile(params: ProblemParams, grid: RadialGrid, a: float = 1.0) -> RadialProfile:
    """The paraboloid a*(r^2 - R^2)/2, the workhorse admissible profile."""
    r = grid.nodes
    return RadialProfile(grid, a * (r**2 - params.R**2) / 2.0, a * r)


def profile_from_derivative(grid: RadialGrid, du: np.ndarray) -> RadialProfile:
    """Rebuild u from u' by inward trapezoid integration with u(R) = 0."""
    r = grid.nodes
    du = np.asarray(du, dtype=float)
    seg = 0.5 * (du[1:] + du[:-1]) * np.diff(r)
    u = np.empty_like(du)
    u[-1] = 0.0
    u[:-1] = -np.cumsum(seg[::-1])[::-1]
    return RadialProfile(grid, u, du)


def project_admissible(params: ProblemParams, grid: RadialGrid, du_raw: np.ndarray) -> RadialProfile:
    """Project a raw slope field into the admissible cone.

    Clips u' >= 0 and enforces that m(r) = r^(n-k) (u')^k is nondecreasing
    (running maximum); these two conditions characterize nonnegative S_j
    for all j <= k along radial profiles.  u is then rebuilt with u(R) = 0.
    """
    n, k = params.n, params.k
    r = grid.nodes
    du = np.maximum(np.asarray(du_raw, dtype=float), 0.0)
    m = np.zeros_like(du)
    m[1:] = r[1:] ** (n - k) * du[1:] ** k
    m = np.maximum.accumulate(m)
    du = np.zeros_like(m)
    du[1:] = m[1:] ** (1.0 / k) * r[1:] ** (-(n - k) / k)
    return profile_from_derivative(grid, du)


def random_admissible_profile(
    params: ProblemParams, grid: RadialGrid, rng: np.random.Generator, roughness: float = 0.5
) -> RadialProfile:
    """Seeded random admissible profile on a bounded grid.

    Multiplies the paraboloid slope by exp(roughness * g) with g a smooth
    random low-order trigonometric field, then projects back into the
    admissible cone.
    """
    r = grid.nodes
    x = r / grid.R
    g = np.zeros_like(r)
    for j in range(1, 5):
        g += rng.normal() / j * np.sin(j * np.pi * x)
        g += rng.normal() / j * (1.0 - np.cos(j * np.pi * x))
    du = r * np.exp(roughness * g)
    return project_admissible(params, grid, du)


# ---------------------------------------------------------------------------
# admissibility checks


def dirichlet_gap(prof: RadialProfile) -> float:
    return abs(float(prof.u[-1]))


def check_energy_admissible(prof: RadialProfile, dirichlet_tol: float = 1e-6):
    """Cheap preconditions for energy evaluation: u' >= 0 and u(R) ~ 0."""
    scale = max(prof.sup, 1e-300)
    dscale = float(np.max(np.abs(prof.du))) if prof.du.size else 0.0
    if np.min(prof.du) < -1e-12 * max(dscale, 1e-300):
        raise AdmissibilityError("profile has negative slope; not admissible")
    if dirichlet_gap(prof) > dirichlet_tol * scale:
        raise AdmissibilityError(
            f"profile does not vanish at the boundary: |u(R)| = {dirichlet_gap(prof):.3e}"
        )


def gamma_margins(params: ProblemParams, prof: RadialProfile, d2u: np.ndarray | None = None):
    """sigma_j margins (j = 1..k) at nodes 0..N-1, derivatives by FD if needed."""
    if d2u is None:
        _, d2u = derivatives(prof.grid, prof.u)
    r = prof.grid.nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(r > 0.0, prof.du / np.where(r > 0.0, r, 1.0), d2u)
    return hessian.radial_gamma_margins(params.n, params.k, d2u, q)[:-1]


def profile_in_cone(
    params: ProblemParams, prof: RadialProfile, eps_cone: float = 0.0, d2u: np.ndarray | None = None
) -> bool:
    """Nodewise Gamma_k admissibility at every interior node (origin included)."""
    return bool(np.all(gamma_margins(params, prof, d2u) > eps_cone))


def profile_in_cone_relative(
    params: ProblemParams,
    prof: RadialProfile,
    rel_floor: float = -1e-4,
    d2u: np.ndarray | None = None,
) -> bool:
    """Cone check with margins measured against the local term magnitudes.

    Projected profiles ride the cone boundary (sigma_k = 0) along
    flattened flux stretches; there the terms cancel exactly and finite
    differences leave a systematic signed bias of mesh order (not mere
    round-off), so the floor is relative to |term1| + |term2| and sized
    for second-order stencils on graded meshes.
    """
    if d2u is None:
        _, d2u = derivatives(prof.grid, prof.u)
    n, k = params.n, params.k
    r = prof.grid.nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(r > 0.0, prof.du / np.where(r > 0.0, r, 1.0), d2u)
    ok = True
    for j in range(1, k + 1):
        t1 = hessian.binom(n - 1, j - 1) * d2u * q ** (j - 1)
        t2 = hessian.binom(n - 1, j) * q**j
        scale = np.abs(t1) + np.abs(t2) + 1e-300
        ok = ok and bool(np.all(((t1 + t2) / scale)[:-1] > rel_floor))
    return ok


# ---------------------------------------------------------------------------
# energies, norms, exponents


def hessian_energy(params: ProblemParams, prof: RadialProfile, check: bool = True) -> float:
    """The Hessian energy of an admissible profile.

    Computes (omega_n / k) * C(n-1, k-1) * int_0^R r^(n-k) (u')^(k+1) dr,
    the one-dimensional reduction of int_Omega (-u) S_k(D^2 u) dx; its
    (k+1)-th root is the natural norm on the admissible class.
    """
    if check:
        check_energy_admissible(prof)
    n, k = params.n, params.k
    coeff = sphere_area(n) / k * hessian.binom(n - 1, k - 1)
    vals = prof.du ** (k + 1)
    return coeff * radial_weighted_integral(n, prof.grid, vals, wexp=1.0 - k)


def energy_by_parts_check(params: ProblemParams, prof: RadialProfile) -> float:
    """Relative gap between the two routes to the Hessian energy.

    Evaluates omega_n * int (-u) S_k r^(n-1) dr directly (second
    derivatives by finite differences) and compares with
    ``hessian_energy``; for smooth admissible profiles the gap shrinks
    at the O(h^2) quadrature rate.  The zero profile returns gap 0.
    """
    n, k = params.n, params.k
    energy = hessian_energy(params, prof, check=False)
    _, d2u = derivatives(prof.grid, prof.u)
    r = prof.grid.nodes
    sk = hessian.radial_Sk(n, k, prof.du, d2u, r)
    direct = sphere_area(n) * radial_weighted_integral(n, prof.grid, -prof.u * sk)
    denom = max(abs(energy), abs(direct))
    if denom == 0.0:
        return 0.0
    return abs(direct - energy) / denom


def weighted_norm(params: ProblemParams, prof: RadialProfile, p: float, sigma: float) -> float:
    """Weighted Lebesgue norm (int_Omega |x|^sigma |u|^p dx)^(1/p)."""
    if p < 1.0:
        raise ConfigError(f"need p >= 1, got p={p}")
    if sigma <= -params.n:
        raise ConfigError(f"weight exponent sigma={sigma} is not integrable for n={params.n}")
    val = sphere_area(params.n) * radial_weighted_integral(
        params.n, prof.grid, np.abs(prof.u) ** p, wexp=sigma
    )
    return val ** (1.0 / p)


def sup_norm(prof: RadialProfile) -> float:
    """Max over nodes; the package's only stand-in for the p = infinity norm."""
    return prof.sup


def critical_exponent(params: ProblemParams, equality_surrogate: float | None = None) -> float:
    """The critical integrability power k*(s) in its four branches.

    For 2k < n it is (k+1)(n+2sk)/(n-2k) when s <= 0 and (k+1)n/(n-2k)
    when s > 0; for 2k = n any finite value works and the caller must
    supply the surrogate to use; for 2k > n the exponent is infinite and
    math.inf is returned.
    """
    n, k, s = params.n, params.k, params.s
    if 2 * k < n:
        if s <= 0.0:
            return (k + 1.0) * (n + 2.0 * s * k) / (n - 2.0 * k)
        return (k + 1.0) * n / (n - 2.0 * k)
    if 2 * k == n:
        if equality_surrogate is None:
            raise ConfigError("2k = n: any finite exponent works, pass equality_surrogate")
        if not (math.isfinite(equality_surrogate) and equality_surrogate >= 1.0):
            raise ConfigError(f"surrogate must be finite and >= 1, got {equality_surrogate}")
        return float(equality_surrogate)
    return math.inf


def exponent_regime(params: ProblemParams) -> str:
    n, k = params.n, params.k
    if 2 * k < n:
        return "subcritical (2k<n), weighted branch" if params.s <= 0 else "subcritical (2k<n), unweighted branch"
    if 2 * k == n:
        return "borderline (2k=n), any finite"
    return "high order (2k>n), infinite"


def mt_alpha(n: int, k: int) -> float:
    """Sharp exponential-class constant n * [omega_n/k * C(n-1,k-1)]^(2/n) for 2k = n."""
    return n * (sphere_area(n) / k * hessian.binom(n - 1, k - 1)) ** (2.0 / n)


def mt_functional(params: ProblemParams, prof: RadialProfile) -> float:
    """Exponential (Moser-Trudinger type) functional in the borderline case 2k = n.

    Returns int_Omega exp[alpha_n (|u| / ||u||)^{(n+2)/n}] dx where ||u||
    is the (k+1)-th root of the Hessian energy.
    """
    n, k = params.n, params.k
    if 2 * k != n:
        raise ConfigError(f"exponential functional needs 2k = n, got n={n}, k={k}")
    energy = hessian_energy(params, prof)
    if energy <= 0.0:
        raise AdmissibilityError("zero profile: the normalizing norm vanishes")
    norm = energy ** (1.0 / (k + 1.0))
    alpha = mt_alpha(n, k)
    vals = np.exp(alpha * (np.abs(prof.u) / norm) ** ((n + 2.0) / n))
    return sphere_area(n) * radial_weighted_integral(n, prof.grid, vals)


def quotient_report(
    params: ProblemParams, prof: RadialProfile, kstar: float | None = None
) -> QuotientReport:
    """Weighted-norm / energy^(1/(k+1)) quotient at the critical exponent."""
    if kstar is None:
        kstar = critical_exponent(params)
    energy = hessian_energy(params, prof)
    wnorm = weighted_norm(params, prof, kstar, params.weight_exponent)
    if energy <= 0.0:
        raise AdmissibilityError("quotient undefined for zero-energy profile")
    return QuotientReport(
        energy=energy,
        wnorm=wnorm,
        quotient=wnorm / energy ** (1.0 / (params.k + 1.0)),
        kstar=kstar,
    )
