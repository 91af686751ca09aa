"""Radial two-point solver for S_k(D^2 u) = psi(r, u) in divergence form.

With m(r) = r^(n-k) (u')^k the equation becomes the first-order system

    m'(r) = c_k * r^(n-1) * psi(r, u),   c_k = k / C(n-1, k-1),
    u'(r) = m(r)^(1/k) * r^(-(n-k)/k),

marched outward from u(0) = a < 0, m(0) = 0 by a trapezoidal
predictor-corrector.  The right-hand side is sign-definite, so m is
nondecreasing and the k-th root is well defined; boundary-value problems
are closed by bisection (plus a secant polish) on the center value a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hessian, radial
from .errors import BracketError, ConfigError, NumericalError, ResolutionError
from .nonlinearity import Nonlinearity
from .radial import ProblemParams, RadialGrid, RadialProfile


def divergence_constant(n: int, k: int) -> float:
    """c_k = k / C(n-1, k-1), the divergence-form normalization."""
    return k / hessian.binom(n - 1, k - 1)


def comparison_slope(n: int, k: int) -> float:
    """Asymptotic d w(2 delta) / d log(delta) for the comparison problem.

    For the right-hand side (r^2 + delta^2)^(-k) and n > 2k the flux
    integral gives m(rho) ~ c_k rho^(n-2k)/(n-2k) well above delta, hence
    w' ~ (c_k/(n-2k))^(1/k) / rho and a log-divergent center value.
    """
    if n <= 2 * k:
        raise ConfigError(f"comparison problem needs n > 2k, got n={n}, k={k}")
    return (divergence_constant(n, k) / (n - 2.0 * k)) ** (1.0 / k)


def comparison_slope_lower(n: int, k: int) -> float:
    """Chained lower-bound constant valid down to rho = 2 delta.

    Dropping the flux below delta and using r^2 + delta^2 <= 2 r^2 there:
    m(rho) >= c_k 2^-k (rho^(n-2k) - delta^(n-2k))/(n-2k) and
    delta <= rho/2, so w'(rho) >= this constant / rho on rho >= 2 delta.
    """
    if n <= 2 * k:
        raise ConfigError(f"comparison problem needs n > 2k, got n={n}, k={k}")
    ck = divergence_constant(n, k)
    return (ck * 2.0**-k * (1.0 - 2.0 ** -(n - 2.0 * k)) / (n - 2.0 * k)) ** (1.0 / k)


@dataclass
class ShootResult:
    prof: RadialProfile
    center_value: float
    boundary_gap: float
    ode_residual: float
    bisection_history: list = field(default_factory=list)  # rows (a, boundary_gap)


def _origin_cell(params: ProblemParams, nl: Nonlinearity, a: float, r1: float):
    """Analytic first cell: integrates the weight power exactly with f frozen.

    Near the origin m ~ c r^(n + wp) and u' ~ r^(1 + wp/k), so the first
    u-increment uses the matching power rule instead of a trapezoid.
    """
    n, k = params.n, params.k
    ck = divergence_constant(n, k)
    wp = nl.weight_power
    if n + wp <= 0.0:
        raise ConfigError(f"weight power {wp} too singular for n={n}")
    f0 = float(nl.f(np.asarray(a)))
    w0 = float(nl.weight_smooth(np.asarray(r1)))
    m1 = ck * w0 * f0 * r1 ** (n + wp) / (n + wp)
    du1 = m1 ** (1.0 / k) * r1 ** (-(n - k) / k)
    beta = 1.0 + wp / k
    u1 = a + du1 * r1 / (beta + 1.0)
    return m1, du1, u1


def integrate_out(
    params: ProblemParams, nl: Nonlinearity, a: float, grid: RadialGrid
) -> RadialProfile:
    """March the divergence-form system outward from u(0) = a.

    Returns the full profile without imposing u(R) = 0; the attained
    boundary value is prof.u[-1].  Aborts if psi loses positivity along
    the march (the monotone structure is then gone).
    """
    if not a < 0.0:
        raise ConfigError(f"center value must be negative, got a={a}")
    n, k = params.n, params.k
    ck = divergence_constant(n, k)
    r = grid.nodes
    npts = r.size
    u = np.empty(npts)
    du = np.empty(npts)
    m = np.empty(npts)
    u[0], du[0], m[0] = a, 0.0, 0.0
    m[1], du[1], u[1] = _origin_cell(params, nl, a, float(r[1]))
    wp = nl.weight_power
    wsm = np.asarray(nl.weight_smooth(r), dtype=float)
    # exact per-cell integral of the power factor; trapezoid on wsm * f(u)
    P = ck * r ** (n + wp) / (n + wp)
    pex = -(n - k) / k

    fvals = nl.f
    g_i = wsm[1] * float(fvals(np.asarray(u[1])))
    for i in range(1, npts - 1):
        h = r[i + 1] - r[i]
        u_pred = u[i] + h * du[i]
        f_pred = float(fvals(np.asarray(u_pred)))
        if f_pred <= 0.0:
            raise NumericalError(
                f"source term lost positivity at r={r[i + 1]:.4g} (u={u_pred:.4g})"
            )
        g_next = wsm[i + 1] * f_pred
        m[i + 1] = m[i] + (P[i + 1] - P[i]) * 0.5 * (g_i + g_next)
        du[i + 1] = m[i + 1] ** (1.0 / k) * r[i + 1] ** pex
        u[i + 1] = u[i] + 0.5 * h * (du[i] + du[i + 1])
        # corrector refresh of the source at the new point
        g_i = wsm[i + 1] * float(fvals(np.asarray(u[i + 1])))
    return RadialProfile(grid, u, du)


def boundary_gap(params: ProblemParams, nl: Nonlinearity, a: float, grid: RadialGrid) -> float:
    return float(integrate_out(params, nl, a, grid).u[-1])


def ode_residual(params: ProblemParams, nl: Nonlinearity, prof: RadialProfile) -> float:
    """Weighted L2 gap between S_k(D^2 u) (finite differences) and psi(r, u).

    Integrated over the open interior; the boundary node carries the
    Dirichlet condition and the first cell has no quadrature weight.
    """
    n, k = params.n, params.k
    r = prof.grid.nodes
    _, d2u = radial.derivatives(prof.grid, prof.u)
    sk = hessian.radial_Sk(n, k, prof.du, d2u, r)
    with np.errstate(divide="ignore"):
        w = np.where(r > 0, r, 1.0) ** nl.weight_power * nl.weight_smooth(r)
    gap = sk - w * np.asarray(nl.f(prof.u), dtype=float)
    gap[0] = 0.0
    gap[-1] = 0.0
    W = radial.weight_vector(prof.grid, n - 1.0).copy()
    W[-1] = 0.0
    return math.sqrt(max(radial.sphere_area(n) * float(W @ (gap * gap)), 0.0))


def sweep_brackets(
    params: ProblemParams,
    nl: Nonlinearity,
    grid: RadialGrid,
    scale: float = 1.0,
    exponents: range = range(-14, 13),
):
    """Coarse geometric sweep a = -scale * 2^e; returns gaps and sign-change pairs."""
    gaps = []
    for e in exponents:
        a = -scale * 2.0**e
        gaps.append((a, boundary_gap(params, nl, a, grid)))
    brackets = []
    for (a1, g1), (a2, g2) in zip(gaps, gaps[1:]):
        if g1 == 0.0:
            brackets.append((a1, a1))
        elif g1 * g2 < 0.0:
            brackets.append((a1, a2))
    return gaps, brackets


def _degenerate_sweep(gaps) -> bool:
    """Homogeneity signature: boundary gap proportional to the center value."""
    ratios = np.array([g / a for a, g in gaps])
    scale = float(np.max(np.abs(ratios)))
    if scale == 0.0:
        return True
    return float(np.std(ratios)) < 0.02 * scale and float(np.max(np.abs(ratios))) < 0.05


def shoot(
    params: ProblemParams,
    nl: Nonlinearity,
    tol: float,
    bracket: tuple | None = None,
    grid: RadialGrid | None = None,
    N: int = 1024,
    max_iter: int = 200,
) -> ShootResult:
    """Bisection (plus secant polish) on the center value until |u(R)| <= tol."""
    if grid is None:
        grid = radial.make_grid(params, N)
    if bracket is None:
        gaps, brackets = sweep_brackets(params, nl, grid)
        if not brackets:
            if _degenerate_sweep(gaps):
                raise BracketError(
                    "degenerate bracket: boundary gap scales with the center value "
                    "(homogeneous source at its eigenvalue); any center value solves "
                    "up to discretization"
                )
            raise BracketError(f"no sign change on the sweep; gaps: {gaps}")
        bracket = brackets[0]
    a_lo, a_hi = bracket
    g_lo = boundary_gap(params, nl, a_lo, grid)
    g_hi = boundary_gap(params, nl, a_hi, grid)
    history = [(a_lo, g_lo), (a_hi, g_hi)]
    if g_lo * g_hi > 0.0:
        raise BracketError(f"no sign change on bracket {bracket}: gaps {g_lo:.3e}, {g_hi:.3e}")
    a, g = a_lo, g_lo
    for _ in range(max_iter):
        # secant proposal, clipped into the bracket; fall back to midpoint
        if g_hi != g_lo:
            a_sec = a_hi - g_hi * (a_hi - a_lo) / (g_hi - g_lo)
        else:
            a_sec = 0.5 * (a_lo + a_hi)
        a_mid = 0.5 * (a_lo + a_hi)
        a = a_sec if min(a_lo, a_hi) < a_sec < max(a_lo, a_hi) else a_mid
        g = boundary_gap(params, nl, a, grid)
        history.append((a, g))
        if abs(g) <= tol:
            break
        if g * g_lo < 0.0:
            a_hi, g_hi = a, g
        else:
            a_lo, g_lo = a, g
    else:
        raise NumericalError(f"shooting did not reach |u(R)| <= {tol} in {max_iter} iterations")
    prof = integrate_out(params, nl, a, grid)
    # close the Dirichlet condition exactly for downstream energy checks
    prof.u -= prof.u[-1]
    return ShootResult(
        prof=prof,
        center_value=a,
        boundary_gap=g,
        ode_residual=ode_residual(params, nl, prof),
        bisection_history=history,
    )


def solve_known_rhs(
    params: ProblemParams,
    grid: RadialGrid,
    fvals: np.ndarray,
    wexp: float = 0.0,
) -> tuple[RadialProfile, np.ndarray]:
    """Direct double integration when the right-hand side is known nodally.

    Solves d/dr [r^(n-k) (u')^k] = c_k r^(n-1+wexp) fvals(r) with
    u'(0) = 0, u(R) = 0; the first cell integrates the weight power
    analytically with fvals frozen at the first node.  Returns the
    profile and the flux m.
    """
    n, k = params.n, params.k
    if n + wexp <= 0.0:
        raise ConfigError(f"weight power {wexp} too singular for n={n}")
    ck = divergence_constant(n, k)
    r = grid.nodes
    # integrate the power factor exactly per cell (trapezoid on the smooth
    # factor only); plain trapezoid on r^(n-1) f loses percents near r = 0
    P = ck * r ** (n + wexp) / (n + wexp)
    dm = np.empty(r.size - 1)
    dm[0] = P[1] * fvals[1]
    dm[1:] = (P[2:] - P[1:-1]) * 0.5 * (fvals[1:-1] + fvals[2:])
    m = np.concatenate([[0.0], np.cumsum(dm)])
    m = np.maximum(m, 0.0)
    du = np.zeros_like(r)
    du[1:] = m[1:] ** (1.0 / k) * r[1:] ** (-(n - k) / k)
    beta = 1.0 + wexp / k
    prof = radial.profile_from_derivative(grid, du)
    # refit the first cell with the matching power rule
    corr = du[1] * r[1] * (1.0 / (beta + 1.0) - 0.5)
    prof.u[0] -= corr
    return prof, m


def nonexistence_ode(
    params: ProblemParams,
    delta: float,
    eta: float,
    grid: RadialGrid | None = None,
    N: int = 4096,
    gamma: float = 3.0,
) -> RadialProfile:
    """Comparison profile w on [0, eta]: S_k(D^2 w) = (r^2 + delta^2)^(-k), w(eta) = 0.

    As delta shrinks the center value w(0) diverges like log(delta); the
    grid must resolve r ~ delta or a ResolutionError is raised.
    """
    if not (params.n > 2 * params.k):
        raise ConfigError(f"comparison problem needs n > 2k, got n={params.n}, k={params.k}")
    if not 0.0 < 2.0 * delta < eta < 1.0:
        raise ConfigError(f"need 0 < 2*delta < eta < 1, got delta={delta}, eta={eta}")
    if grid is None:
        sub = ProblemParams(params.n, params.k, params.s, R=eta)
        grid = radial.make_grid(sub, N, gamma=gamma)
    r = grid.nodes
    near = r <= 2.0 * delta
    if np.count_nonzero(near) < 8:
        raise ResolutionError(
            f"grid too coarse near r ~ delta: {np.count_nonzero(near)} nodes below 2*delta"
        )
    fvals = (r**2 + delta**2) ** (-float(params.k))
    prof, _ = solve_known_rhs(params, grid, fvals, wexp=0.0)
    return prof


def polish_fixed_point(
    params: ProblemParams,
    nl: Nonlinearity,
    prof: RadialProfile,
    tol: float,
    max_iter: int = 30,
) -> RadialProfile:
    """Damped Newton endgame on the discrete system S_k(D^2 u) = psi(r, u).

    Marched or flowed profiles satisfy the equation to scheme order; a
    few banded Newton sweeps push the nodal residual of the same finite
    difference operators to round-off, so downstream certificates can
    re-evaluate the equation at face value.  For singular weights the
    origin node carries the symmetric-extrapolation constraint instead
    of the (undefined) equation.  Stops when the weighted L2 residual
    drops below tol; returns the profile unchanged in the (unlikely)
    event Newton cannot improve it.
    """
    from scipy.linalg import solve_banded

    n, k = params.n, params.k
    grid = prof.grid
    r = grid.nodes
    npts = r.size
    b1 = hessian.binom(n - 1, k - 1)
    b2 = hessian.binom(n - 1, k)
    hl = r[1:-1] - r[:-2]
    hr = r[2:] - r[1:-1]
    den = hl * hr * (hl + hr)
    c1 = np.stack([-(hr**2) / den, (hr**2 - hl**2) / den, hl**2 / den])
    c2 = np.stack([2.0 * hr / den, -2.0 * (hl + hr) / den, 2.0 * hl / den])
    wsm = np.asarray(nl.weight_smooth(r), dtype=float)
    wp = nl.weight_power
    with np.errstate(divide="ignore"):
        w = np.where(r > 0, r, 1.0) ** wp * wsm
    singular0 = wp != 0.0
    ex_den = r[2] ** 2 - r[1] ** 2
    omega = radial.sphere_area(n)
    W = radial.weight_vector(grid, n - 1.0).copy()
    W[-1] = 0.0

    def fprime(z):
        h = 1e-7 * (1.0 + np.abs(z))
        return (np.asarray(nl.f(z + h), dtype=float) - np.asarray(nl.f(z - h), dtype=float)) / (
            2.0 * h
        )

    def assemble(u):
        du1 = c1[0] * u[:-2] + c1[1] * u[1:-1] + c1[2] * u[2:]
        d2u1 = c2[0] * u[:-2] + c2[1] * u[1:-1] + c2[2] * u[2:]
        q1 = du1 / r[1:-1]
        S1 = b1 * d2u1 * q1 ** (k - 1) + b2 * q1**k
        G = np.zeros(npts - 1)
        G[1:] = S1 - w[1:-1] * np.asarray(nl.f(u[1:-1]), dtype=float)
        d2u0 = 2.0 * (u[1] - u[0]) / r[1] ** 2
        if singular0:
            G[0] = u[0] - (u[1] * r[2] ** 2 - u[2] * r[1] ** 2) / ex_den
        else:
            G[0] = hessian.binom(n, k) * d2u0**k - w[0] * float(nl.f(np.asarray(u[0])))
        return G, du1, d2u1, q1, d2u0

    def res_norm(G):
        g = np.concatenate([G, [0.0]])
        g[0] = 0.0
        return math.sqrt(max(omega * float(W @ (g * g)), 0.0))

    u = prof.u.copy()
    G, du1, d2u1, q1, d2u0 = assemble(u)
    best = res_norm(G)
    for _ in range(max_iter):
        if best <= tol:
            break
        A = b1 * q1 ** (k - 1)
        B = b1 * (k - 1) * d2u1 * (q1 ** (k - 2) if k >= 2 else 0.0) + b2 * k * q1 ** (k - 1)
        fp = fprime(u[1:-1])
        # banded Jacobian, (l, u) = (1, 2); unknowns u_0 .. u_{N-1}
        ab = np.zeros((4, npts - 1))
        rows = np.arange(1, npts - 1)
        dG_m = A * c2[0] + B * c1[0] / r[1:-1]
        dG_c = A * c2[1] + B * c1[1] / r[1:-1] - w[1:-1] * fp
        dG_p = A * c2[2] + B * c1[2] / r[1:-1]
        ab[2, rows] = dG_c
        ab[3, rows[:-1]] = dG_m[1:]  # subdiagonal entries a[i, i-1]
        ab[1, rows[rows < npts - 2] + 1] = dG_p[: npts - 3]  # a[i, i+1]
        # row 1 also couples u_0
        ab[3, 0] = dG_m[0]
        if singular0:
            ab[2, 0] = 1.0
            ab[1, 1] = -r[2] ** 2 / ex_den
            ab[0, 2] = r[1] ** 2 / ex_den
        else:
            fac = k * hessian.binom(n, k) * d2u0 ** (k - 1) * 2.0 / r[1] ** 2
            ab[2, 0] = -fac - w[0] * float(fprime(np.asarray(u[0])))
            ab[1, 1] = ab[1, 1] + fac
        try:
            step = solve_banded((1, 2), ab, -G)
        except Exception:
            break
        t = 1.0
        improved = False
        while t > 1e-6:
            u_try = u.copy()
            u_try[:-1] += t * step
            G_try, du1_t, d2u1_t, q1_t, d2u0_t = assemble(u_try)
            rn = res_norm(G_try)
            if np.isfinite(rn) and rn < best:
                u, G, du1, d2u1, q1, d2u0 = u_try, G_try, du1_t, d2u1_t, q1_t, d2u0_t
                best = rn
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    du, _ = radial.derivatives(grid, u)
    du[0] = 0.0
    return RadialProfile(grid, u, du)


def value_at(prof: RadialProfile, rho: float) -> float:
    """Linear interpolation of u at radius rho."""
    return float(np.interp(rho, prof.grid.nodes, prof.u))


def value_at(prof: RadialProfile, rho: float) -> float:
    """Linear interpolation of u at radius rho."""
    return float(np.interp(rho, prof.grid.nodes, prof.u))


def export_rows(params: ProblemParams, prof: RadialProfile):
    """Rows (r, u, du, m) for CSV emission."""
    n, k = params.n, params.k
    m = np.zeros_like(prof.grid.nodes)
    m[1:] = prof.grid.nodes[1:] ** (n - k) * prof.du[1:] ** k
    return list(zip(prof.grid.nodes, prof.u, prof.du, m))
