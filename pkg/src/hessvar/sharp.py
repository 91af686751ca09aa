"""Extremal profiles and the sharp weighted-embedding constant.

For 2k < n and -1 < s <= 0 the quotient

    ||u||_{L^{k*}(|x|^{2sk})} / I_k(u)^{1/(k+1)}

over whole space is maximized by the explicit radial family

    u(r) = -(lambda + r^(2(s+1)))^((2k-n) / (2k(s+1))),   lambda > 0,

and the maximum C* is independent of the dilation parameter lambda.
Whole-space integrals are truncated at a radius solved from closed-form
power tail bounds (the extremal decays like r^((2k-n)/k)), with the tail
kept below a configurable fraction of the bulk; the grid is a power-
graded core continued by a geometric far field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import hessian, radial
from .errors import AdmissibilityError, ConfigError, TruncationError
from .radial import ProblemParams, QuotientReport, RadialGrid, RadialProfile


@dataclass(frozen=True)
class ExtremalSpec:
    """Problem data plus the dilation parameter of the extremal family."""

    params: ProblemParams
    lam: float = 1.0

    def __post_init__(self):
        self.params.require_sharp_range()
        if self.params.s <= -1.0:
            raise ConfigError("the extremal family needs s > -1")
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise ConfigError(f"dilation parameter must be positive, got {self.lam}")

    @property
    def decay_exponent(self) -> float:
        """(2k - n)/(2k(s+1)), the outer power of the profile."""
        p = self.params
        return (2.0 * p.k - p.n) / (2.0 * p.k * (p.s + 1.0))

    @property
    def r_scale(self) -> float:
        """Radius where the two terms of (lambda + r^(2(s+1))) balance."""
        return self.lam ** (1.0 / (2.0 * (self.params.s + 1.0)))


def extremal_values(spec: ExtremalSpec, r: np.ndarray):
    """(u, u') of the extremal on given radii (analytic derivative)."""
    p = spec.params
    a = 2.0 * (p.s + 1.0)
    b = -spec.decay_exponent  # positive
    base = spec.lam + r**a
    u = -(base ** (-b))
    # for s < -1/2 the slope is singular at the origin (a - 1 < 0); the
    # profile convention stores du(0) = 0 either way
    with np.errstate(divide="ignore"):
        du = a * b * r ** (a - 1.0) * base ** (-b - 1.0)
    if r.size and r[0] == 0.0:
        du[0] = 0.0
    return u, du


def extremal_profile(spec: ExtremalSpec, grid: RadialGrid) -> RadialProfile:
    """Sample the extremal and its analytic derivative on the grid."""
    u, du = extremal_values(spec, grid.nodes)
    return RadialProfile(grid, u, du)


@dataclass(frozen=True)
class QuadConfig:
    """Whole-space truncation quadrature settings."""

    n_core: int = 3000
    core_span: float = 30.0  # core ends at core_span * r_scale
    core_gamma: float = 2.0
    nodes_per_decade: int = 800
    tail_rel: float = 1e-8
    r_max_budget: float = 1e20


def truncation_radius(spec: ExtremalSpec, cfg: QuadConfig = QuadConfig()) -> float:
    """Radius beyond which both power tails drop below tail_rel of the bulk.

    The energy integrand decays like r^(-(n-k)/k) and the weighted-norm
    integrand like r^(-1-(n+2sk)/k); both tail integrals have closed
    forms, and the bulk is estimated by a coarse quadrature of the core.
    """
    p = spec.params
    n, k, s = p.n, p.k, p.s
    a = 2.0 * (s + 1.0)
    b = -spec.decay_exponent
    kstar = radial.critical_exponent(p)
    R0 = cfg.core_span * spec.r_scale
    r = R0 * (np.arange(1, 2001) / 2000.0) ** 2
    u = (spec.lam + r**a) ** (-b)
    du = a * b * r ** (a - 1.0) * (spec.lam + r**a) ** (-b - 1.0)
    bulk_E = float(np.trapezoid(r ** (n - k) * du ** (k + 1), r))
    bulk_N = float(np.trapezoid(r ** (n - 1.0 + 2 * s * k) * u**kstar, r))
    m = (n - 2.0 * k) / k
    tail_E_coeff = (a * b) ** (k + 1) * k / (n - 2.0 * k)
    R_E = (2.0 * tail_E_coeff / (cfg.tail_rel * bulk_E)) ** (1.0 / m)
    q = (n + 2.0 * s * k) / k
    R_N = (2.0 / q / (cfg.tail_rel * bulk_N)) ** (1.0 / q)
    R = max(R_E, R_N, 2.0 * R0)
    if R > cfg.r_max_budget:
        raise TruncationError(
            f"tail bound {cfg.tail_rel} needs R = {R:.3e}, beyond budget {cfg.r_max_budget:.1e}"
        )
    return R


def whole_space_grid(spec: ExtremalSpec, cfg: QuadConfig = QuadConfig()) -> RadialGrid:
    """Power-graded core on [0, core_span * r_scale] + geometric far field."""
    R0 = cfg.core_span * spec.r_scale
    Rmax = truncation_radius(spec, cfg)
    core = R0 * (np.arange(cfg.n_core + 1) / cfg.n_core) ** cfg.core_gamma
    ndec = math.log10(Rmax / R0)
    ntail = max(int(cfg.nodes_per_decade * ndec), 16)
    tail = R0 * 10.0 ** np.linspace(0.0, ndec, ntail + 1)[1:]
    tail[-1] = Rmax
    nodes = np.concatenate([core, tail])
    nodes[0] = 0.0
    return RadialGrid(nodes=nodes, gamma=cfg.core_gamma)


def sharp_quotient(spec: ExtremalSpec, cfg: QuadConfig = QuadConfig()) -> QuotientReport:
    """C* = weighted norm / energy^(1/(k+1)) of the extremal over truncated space."""
    grid = whole_space_grid(spec, cfg)
    prof = extremal_profile(spec, grid)
    return radial.quotient_report(spec.params, prof)


def bliss_change_of_variables_check(spec: ExtremalSpec, prof: RadialProfile) -> float:
    """Max relative gap across the t = r^((2k-n)/k) substitution identities.

    Both displayed identities are checked on the matching range
    [r_1, R] (the variable change maps it onto a finite t-interval):

        int r^(n-k) (u')^(k+1) dr   =  m^k     * int |u'(t)|^(k+1) dt
        int r^(n-1+2sk) |u|^k* dr   =  (1/m)   * int t^(-k*k/(k+1)-1) |u|^k* dt

    with m = (n-2k)/k; the gap shrinks at the quadrature rate O(h^2).
    """
    p = spec.params
    n, k, s = p.n, p.k, p.s
    m = (n - 2.0 * k) / k
    kstar = radial.critical_exponent(p)
    r = prof.grid.nodes[1:]
    u = prof.u[1:]
    du = prof.du[1:]
    lhs_E = float(np.trapezoid(r ** (n - k) * du ** (k + 1), r))
    lhs_N = float(np.trapezoid(r ** (n - 1.0 + 2 * s * k) * np.abs(u) ** kstar, r))
    t = r**(-m)
    # t decreases along r; flip to ascending for the quadrature
    t_asc = t[::-1]
    dudt = du * r ** (m + 1.0) / m  # |du/dt| via the substitution
    rhs_E = m**k * float(np.trapezoid(dudt[::-1] ** (k + 1), t_asc))
    rhs_N = (1.0 / m) * float(
        np.trapezoid(
            (t_asc ** (-kstar * k / (k + 1.0) - 1.0)) * np.abs(u[::-1]) ** kstar, t_asc
        )
    )
    gap_E = abs(lhs_E - rhs_E) / max(abs(lhs_E), abs(rhs_E), 1e-300)
    gap_N = abs(lhs_N - rhs_N) / max(abs(lhs_N), abs(rhs_N), 1e-300)
    if lhs_E == 0.0 and rhs_E == 0.0:
        gap_E = 0.0
    if lhs_N == 0.0 and rhs_N == 0.0:
        gap_N = 0.0
    return max(gap_E, gap_N)


def smooth_random_field(r: np.ndarray, r_scale: float, rng: np.random.Generator, modes: int = 4):
    """Smooth random function of the compactified coordinate x = r/(r + r_scale)."""
    x = r / (r + r_scale)
    g = np.zeros_like(r)
    for j in range(1, modes + 1):
        g += rng.normal() / j * np.sin(j * np.pi * x)
        g += rng.normal() / j * (1.0 - np.cos(j * np.pi * x))
    return g


@dataclass
class ProbeReport:
    base_quotient: float
    quotients: np.ndarray
    failures: list
    max_quotient: float
    ok: bool


def maximality_probe(
    spec: ExtremalSpec,
    n_perturb: int = 200,
    amplitude: float = 0.05,
    seed: int = 0,
    cfg: QuadConfig = QuadConfig(),
    margin: float = 1e-4,
) -> ProbeReport:
    """Random admissible perturbations of the extremal never beat its quotient.

    Perturbations multiply u' by exp(amplitude * smooth noise), are
    projected back into the admissible cone (u' >= 0 and nondecreasing
    r^(n-k)(u')^k, which together give nonnegative sigma_j radially),
    and are then verified nodewise; projection failures are recorded
    per sample, not fatal.  Deterministic for a fixed seed.
    """
    p = spec.params
    grid = whole_space_grid(spec, cfg)
    base = extremal_profile(spec, grid)
    base_q = radial.quotient_report(p, base).quotient
    rng = np.random.default_rng(seed)
    r = grid.nodes
    quotients = np.empty(n_perturb)
    failures = []
    for i in range(n_perturb):
        g = smooth_random_field(r, spec.r_scale, rng)
        pert = radial.project_admissible(p, grid, base.du * np.exp(amplitude * g))
        _, d2u = radial.derivatives(grid, pert.u)
        if not radial.profile_in_cone_relative(p, pert, d2u=d2u):
            failures.append(i)
            quotients[i] = np.nan
            continue
        quotients[i] = radial.quotient_report(p, pert).quotient
    finite = quotients[np.isfinite(quotients)]
    max_q = float(np.max(finite)) if finite.size else base_q
    return ProbeReport(
        base_quotient=base_q,
        quotients=quotients,
        failures=failures,
        max_quotient=max_q,
        ok=max_q <= base_q * (1.0 + margin),
    )


def constraint_convexity_check(
    params: ProblemParams, u: RadialProfile, v: RadialProfile
) -> float:
    """Minimum second difference of the constraint term along a segment.

    Evaluates (int |x|^{2sk} |w|^{k*} dx)^((k+1)/k*) at w = u + t(v - u),
    t in {0, 1/4, 1/2, 3/4, 1}; convexity makes every second difference
    nonnegative up to round-off.
    """
    kstar = radial.critical_exponent(params)
    if kstar < params.k + 1.0:
        raise ConfigError("constraint convexity needs k* >= k+1 (s <= 0, 2k < n)")
    if u.grid is not v.grid:
        raise ConfigError("profiles must share a grid")
    ts = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    vals = []
    for t in ts:
        w = RadialProfile(u.grid, (1 - t) * u.u + t * v.u, (1 - t) * u.du + t * v.du)
        vals.append(
            radial.weighted_norm(params, w, kstar, params.weight_exponent) ** (params.k + 1.0)
        )
    vals = np.asarray(vals)
    second = vals[:-2] - 2.0 * vals[1:-1] + vals[2:]
    return float(np.min(second))


def _ratio_Ts(params: ProblemParams, prof: RadialProfile) -> float:
    """energy / wnorm^(k+1), the infimum form of the embedding constant."""
    rep = radial.quotient_report(params, prof)
    return rep.energy / rep.wnorm ** (params.k + 1.0)


def _family_profile(params: ProblemParams, grid: RadialGrid, log_lam: float, mix: float):
    """Boundary-matched truncated extremal blended with the paraboloid slope."""
    spec = ExtremalSpec(ProblemParams(params.n, params.k, params.s, params.R), math.exp(log_lam))
    _, du_ext = extremal_values(spec, grid.nodes)
    scale_ext = float(np.max(du_ext))
    du = (1.0 - mix) * du_ext / max(scale_ext, 1e-300) + mix * grid.nodes / params.R
    return radial.profile_from_derivative(grid, du)


@dataclass
class MonotonicityReport:
    ratio_small: float
    ratio_large: float
    monotone_ok: bool
    lower_bound: float
    lower_bound_ok: bool
    argmin_small: tuple = ()
    argmin_large: tuple = ()


def domain_monotonicity_probe(
    params: ProblemParams,
    R1: float,
    R2: float,
    N: int = 2048,
    cfg: QuadConfig = QuadConfig(),
    tol: float = 1e-6,
) -> MonotonicityReport:
    """Smaller balls cannot have a smaller embedding ratio.

    Minimizes energy / wnorm^(k+1) over a two-parameter admissible family
    (truncated boundary-matched extremals of dilation exp(log_lam), mixed
    with the paraboloid) on B_R1 and B_R2 and checks
    min(B_R1) >= min(B_R2) - tol, plus the whole-space lower bound
    1/C*^(k+1) within 0.1%.
    """
    if not 0.0 < R1 <= R2:
        raise ConfigError(f"need 0 < R1 <= R2, got {R1}, {R2}")
    params.require_sharp_range()
    cstar = sharp_quotient(ExtremalSpec(params), cfg).quotient
    results = []
    a = 2.0 * (params.s + 1.0)
    for R in (R1, R2):
        pR = ProblemParams(params.n, params.k, params.s, R)
        grid = radial.make_grid(pR, N, gamma=3.0)
        # concentration scales below ~1e-4 R^a are not resolvable at this N
        lam_scale = R**a

        def ratio(x, pR=pR, grid=grid):
            return _ratio_Ts(pR, _family_profile(pR, grid, x[0], x[1]))

        best = None
        for lg in np.linspace(math.log(1e-4 * lam_scale), math.log(4.0 * lam_scale), 9):
            for mix in (0.0, 0.25, 0.75):
                val = ratio((lg, mix))
                if best is None or val < best[1]:
                    best = ((lg, mix), val)
        opt = optimize.minimize(
            ratio, x0=np.asarray(best[0]),
            method="Nelder-Mead",
            bounds=[(math.log(1e-4 * lam_scale), math.log(30.0 * lam_scale)), (0.0, 1.0)],
            options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 400},
        )
        val = min(best[1], float(opt.fun))
        arg = tuple(opt.x) if opt.fun <= best[1] else best[0]
        results.append((val, arg))
    lower = (1.0 / cstar) ** (params.k + 1.0)
    return MonotonicityReport(
        ratio_small=results[0][0],
        ratio_large=results[1][0],
        monotone_ok=results[0][0] >= results[1][0] - tol,
        lower_bound=lower,
        lower_bound_ok=min(results[0][0], results[1][0]) >= lower * (1.0 - 1e-3),
        argmin_small=results[0][1],
        argmin_large=results[1][1],
    )
