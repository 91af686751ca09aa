"""End-to-end sublinear / superlinear / nonexistence instantiations.

Each driver validates the growth hypotheses of its regime against the
computed principal eigenvalue, produces a solution (descent flow for the
sublinear minimization, shooting for the superlinear problem), polishes
it onto the discrete fixed point, and returns a certificate recording
exactly what was verified numerically:

  sublinear     J(u*) < 0, equation residual, nontriviality, and the
                potential-growth lower bound J >= -K2 along the run;
  superlinear   equation residual, J(u*) > 0, nontriviality, and an
                interior maximum of t -> J(t u*) on (0, 2] (the directly
                checkable trace of the min-max geometry; the
                infinite-dimensional path space is not searched);
  nonexistence  integrability of f^(-1/k) at -infinity, the transform
                table phi(z), and the log-divergence rate of the
                comparison profile's center value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import flow, radial, shooting, spectral
from .errors import ConfigError, NumericalError
from .flow import FlowConfig, FlowState
from .nonlinearity import Nonlinearity, PowerSource, RegularizedSublinearSource
from .radial import ProblemParams, RadialProfile
from .shooting import ShootResult


# ---------------------------------------------------------------------------
# growth validators


@dataclass
class GrowthReport:
    sub0_limit: float  # f(z)/|z|^k at the near-zero end of the sample range
    inf_limit: float  # f(z)/|z|^k at the far end
    ar_theta: float | None  # largest potential-growth margin on z < -M, if positive
    subcritical_flag: bool
    lambda1: float
    hypotheses: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return all(self.hypotheses.values())


def _ratio_samples(nl: Nonlinearity, k: int, z_range=(1e-6, 1e6), n_samples: int = 121):
    z = -np.geomspace(z_range[0], z_range[1], n_samples)
    f = np.asarray(nl.f(z), dtype=float)
    return z, f, f / np.abs(z) ** k


def growth_margin_theta(nl: Nonlinearity, k: int, M: float = 100.0,
                        z_far: float = 1e6, n_samples: int = 60) -> float:
    """Largest theta with int_z^0 f <= (1-theta)/(k+1) |z| f(z) on z < -M.

    Reported as 1 - (k+1) * max_z F(z)/(|z| f(z)); positive means the
    superlinear potential-growth hypothesis holds on the sampled range.
    """
    z = -np.geomspace(M, z_far, n_samples)
    F = np.asarray(nl.F(z), dtype=float)
    f = np.asarray(nl.f(z), dtype=float)
    ratio = (k + 1.0) * F / (np.abs(z) * f)
    return float(1.0 - np.max(ratio))


def validate_superlinear(
    nl: Nonlinearity,
    params: ProblemParams,
    lambda1: float,
    z_range=(1e-6, 1e6),
    M: float = 100.0,
) -> GrowthReport:
    """Sampled check of the superlinear hypotheses against lambda1.

    Needs f/|z|^k below lambda1 near zero and above it at -infinity, the
    potential-growth margin theta > 0 beyond -M, and subcritical growth
    (f/|z|^(k*-1) -> 0 when 2k < n; log f / |z|^((n+2)/n) -> 0 when
    2k = n).  Report-only: failures land in the hypotheses table.
    """
    n, k = params.n, params.k
    z, f, ratio = _ratio_samples(nl, k, z_range)
    sub0 = float(ratio[0])
    inf_lim = float(ratio[-1])
    theta = 1.0 - (k + 1.0) * float(
        np.max(
            np.asarray(nl.F(z[np.abs(z) > M]), dtype=float)
            / (np.abs(z[np.abs(z) > M]) * f[np.abs(z) > M])
        )
    )
    hyp = {
        "zero_limit_below_lambda1": sub0 < lambda1,
        "infinity_limit_above_lambda1": inf_lim > lambda1,
        "potential_growth_margin": theta > 0.0,
    }
    if 2 * k < n:
        kstar = radial.critical_exponent(params)
        crit = f / np.abs(z) ** (kstar - 1.0)
        subcritical = crit[-1] < 1e-2 * np.max(crit) and crit[-1] < crit[-10]
    else:
        crit = np.log(np.maximum(f, 1e-300)) / np.abs(z) ** ((n + 2.0) / n)
        subcritical = abs(crit[-1]) < 1e-2 * max(np.max(np.abs(crit)), 1e-300)
    hyp["subcritical_growth"] = bool(subcritical)
    return GrowthReport(
        sub0_limit=sub0,
        inf_limit=inf_lim,
        ar_theta=theta if theta > 0.0 else None,
        subcritical_flag=bool(subcritical),
        lambda1=lambda1,
        hypotheses=hyp,
    )


def validate_sublinear(
    nl: Nonlinearity,
    params: ProblemParams,
    lambda1: float,
    z_range=(1e-6, 1e6),
) -> GrowthReport:
    """Sampled check of the sublinear pair: f/|z|^k above lambda1 near
    zero and below it at -infinity."""
    z, f, ratio = _ratio_samples(nl, params.k, z_range)
    sub0 = float(ratio[0])
    inf_lim = float(ratio[-1])
    hyp = {
        "zero_limit_above_lambda1": sub0 > lambda1,
        "infinity_limit_below_lambda1": inf_lim < lambda1,
    }
    return GrowthReport(
        sub0_limit=sub0,
        inf_limit=inf_lim,
        ar_theta=None,
        subcritical_flag=True,
        lambda1=lambda1,
        hypotheses=hyp,
    )


# ---------------------------------------------------------------------------
# sublinear minimization


def _tune_seed_amplitude(params, reg, phi1, lambda1, amplitudes=None):
    """Smallest-J admissible multiple of the eigenfunction with J < 0."""
    best = None
    if amplitudes is None:
        amplitudes = np.geomspace(1e-3, 10.0, 25)
    for a in amplitudes:
        prof = RadialProfile(phi1.grid, a * phi1.u, a * phi1.du)
        J = flow.functional_J(params, prof, reg)
        if J < 0.0 and (best is None or J < best[1]):
            best = (a, J)
    if best is None:
        raise NumericalError("no eigenfunction multiple with negative energy found")
    return best[0]


def sublinear_lower_bound(params: ProblemParams, nl: Nonlinearity, lambda1: float,
                          z_range=(1e-6, 1e4)) -> float:
    """K2 with J >= -K2: from F(z) <= K1 + (1-theta1) lambda1 |z|^(k+1)/(k+1).

    theta1 comes from the sampled far-field ratio margin and K1 from the
    sampled excess; K2 = K1 * int_Omega weight dx.
    """
    k = params.k
    z, f, ratio = _ratio_samples(nl, k, z_range)
    far = float(ratio[-1])
    theta1 = max(1.0 - far / lambda1, 1e-3) * 0.5
    F = np.asarray(nl.F(z), dtype=float)
    K1 = float(np.max(F - (1.0 - theta1) * lambda1 * np.abs(z) ** (k + 1.0) / (k + 1.0)))
    K1 = max(K1, 0.0)
    wvol = radial.sphere_area(params.n) * params.R ** (params.n + params.weight_exponent) / (
        params.n + params.weight_exponent
    )
    return K1 * wvol


def solve_sublinear(
    params: ProblemParams,
    nl: Nonlinearity,
    m: float = 1000.0,
    N: int = 128,
    flow_tol: float = 1e-5,
    residual_tol: float = 1e-8,
    max_steps: int = 600_000,
    cfg: FlowConfig | None = None,
    eigen: spectral.EigenResult | None = None,
) -> tuple[FlowState, dict]:
    """Sublinear minimization at regularization level m.

    Builds f_m^(1/k) = fhat_m^(1/k) + 1/m with the |z| > 2m clamp and the
    smoothed weight (r^2 + m^-2)^(sk), seeds the descent flow at the
    eigenfunction multiple with the most negative energy, flows to the
    steady state, and finishes with the Newton endgame so the certificate
    can re-evaluate the equation independently.
    """
    params.require_solver_range()
    if eigen is None:
        eigen = spectral.inverse_iteration(params, N=max(N, 256))
    report = validate_sublinear(nl, params, eigen.lambda1)
    if not report.all_ok:
        raise ConfigError(f"sublinear hypotheses fail: {report.hypotheses}")
    reg = RegularizedSublinearSource(nl, m, params.k, params.s)
    grid = radial.make_grid(params, N, gamma=1.0)
    phi = eigen.phi1
    phi_here = RadialProfile(grid, np.interp(grid.nodes, phi.grid.nodes, phi.u),
                             np.interp(grid.nodes, phi.grid.nodes, phi.du))
    a = _tune_seed_amplitude(params, reg, phi_here, eigen.lambda1)
    init = RadialProfile(grid, a * phi_here.u, a * phi_here.du)
    run = flow.flow_to_steady(params, init, reg, tol=flow_tol, max_steps=max_steps,
                              cfg=cfg, collect_trace=True)
    prof = shooting.polish_fixed_point(params, reg, run.state.prof, tol=residual_tol)
    res = shooting.ode_residual(params, reg, prof)
    J = flow.functional_J(params, prof, reg)
    K2 = sublinear_lower_bound(params, reg, eigen.lambda1)
    traceJ = [row[3] for row in run.trace]
    cert = {
        "J": J,
        "J_negative": J < 0.0,
        "residual": res,
        "nontrivial": prof.sup > 1e-8 * params.R**2,
        "flow_converged": run.converged,
        "flow_steps": run.steps,
        "energy_monotone": run.worst_descent_violation <= 0.0,
        "K2": K2,
        "J_above_lower_bound": min(traceJ) >= -K2 - 1e-9 * (1.0 + K2),
        "seed_amplitude": a,
        "lambda1": eigen.lambda1,
        "regularization_m": m,
    }
    cert["ok"] = bool(
        cert["J_negative"] and cert["residual"] <= 1e-5 and cert["nontrivial"]
        and cert["flow_converged"] and cert["energy_monotone"]
    )
    state = FlowState(time=run.state.time, prof=prof, energy=J, residual=res, dt=run.state.dt)
    return state, cert


# ---------------------------------------------------------------------------
# superlinear mountain-pass instantiation


def solve_superlinear(
    params: ProblemParams,
    nl: Nonlinearity,
    N: int = 2048,
    shoot_tol: float = 1e-9,
    residual_tol: float = 1e-8,
    t_samples: int = 64,
    eigen: spectral.EigenResult | None = None,
) -> tuple[ShootResult, dict]:
    """Nontrivial superlinear solution by sweep + shooting + Newton endgame.

    The min-max path machinery is replaced by its checkable consequences:
    the solution has positive energy, t -> J(t u*) has an interior
    maximum on (0, 2], and J(t u*) > 0 for small t (small-norm
    positivity); everything else in the certificate is a direct
    re-evaluation of the equation.
    """
    params.require_solver_range()
    if eigen is None:
        eigen = spectral.inverse_iteration(params, N=max(N // 4, 256))
    report = validate_superlinear(nl, params, eigen.lambda1)
    if not report.all_ok:
        raise ConfigError(f"superlinear hypotheses fail: {report.hypotheses}")
    if 2 * params.k < params.n:
        kstar = radial.critical_exponent(params)
        p_exp = getattr(nl, "p", None)
        if p_exp is not None and not params.k < p_exp < kstar - 1.0:
            raise ConfigError(f"need k < p < k*-1 = {kstar - 1.0}, got p={p_exp}")
    result = shooting.shoot(params, nl, tol=shoot_tol, N=N)
    prof = shooting.polish_fixed_point(params, nl, result.prof, tol=residual_tol)
    res = shooting.ode_residual(params, nl, prof)
    J = flow.functional_J(params, prof, nl)
    ts = np.linspace(0.0, 2.0, t_samples + 1)[1:]
    Js = np.array(
        [flow.functional_J(params, RadialProfile(prof.grid, t * prof.u, t * prof.du), nl)
         for t in ts]
    )
    imax = int(np.argmax(Js))
    interior_max = 0 < imax < len(ts) - 1
    small_t_positive = bool(np.all(Js[: max(imax // 2, 1)] > 0.0))
    energy = radial.hessian_energy(params, prof)
    cert = {
        "J": J,
        "J_positive": J > 0.0,
        "residual": res,
        "nontrivial": prof.sup > 1e-8 * params.R**2,
        "interior_max_t": float(ts[imax]),
        "interior_max": bool(interior_max),
        "small_t_positive": small_t_positive,
        "center_value": result.center_value,
        "lambda1": eigen.lambda1,
        # post-hoc uniform bounds plus the blow-up rescaling diagnostic
        "sup_norm": prof.sup,
        "hessian_energy": energy,
        "uniform_bounds_finite": bool(np.isfinite(prof.sup) and np.isfinite(energy)),
    }
    if 2 * params.k < params.n:
        kstar = radial.critical_exponent(params)
        beta0 = (kstar - 1.0 - params.k) / (2.0 * params.k * (1.0 + params.s))
        cert["rescale_beta0"] = beta0
        cert["rescale_radius"] = prof.sup**beta0
    cert["ok"] = bool(
        cert["J_positive"] and cert["residual"] <= 1e-5 and cert["nontrivial"]
        and cert["interior_max"] and cert["small_t_positive"]
        and cert["uniform_bounds_finite"]
    )
    polished = ShootResult(
        prof=prof,
        center_value=result.center_value,
        boundary_gap=float(prof.u[-1]),
        ode_residual=res,
        bisection_history=result.bisection_history,
    )
    return polished, cert


# ---------------------------------------------------------------------------
# nonexistence demonstrator


def transform_integrability(nl: Nonlinearity, k: int, eps: float = 1e-2,
                            z_max: float = 1e12, blocks_per_decade: int = 8):
    """Does int_{-inf}^{-eps} f(z)^(-1/k) dz converge?

    Integrates decade blocks of f^(-1/k); a geometric decay of the block
    sums certifies convergence (value extrapolated by the ratio), while
    non-decaying blocks certify divergence.  Returns (converges, value).
    """
    edges = np.geomspace(eps, z_max, int(blocks_per_decade * math.log10(z_max / eps)) + 1)
    total = 0.0
    block_sums = []
    for a, b in zip(edges[:-1], edges[1:]):
        z = np.linspace(a, b, 9)
        vals = np.asarray(nl.f(-z), dtype=float) ** (-1.0 / k)
        s = float(np.trapezoid(vals, z))
        block_sums.append(s)
        total += s
    decade = blocks_per_decade
    tail_ratio = sum(block_sums[-decade:]) / max(sum(block_sums[-2 * decade : -decade]), 1e-300)
    if tail_ratio < 0.9:
        tail = sum(block_sums[-decade:]) * tail_ratio / (1.0 - tail_ratio)
        return True, total + tail
    return False, math.inf


def transform_table(nl: Nonlinearity, k: int, eps0: float, z_deep: float, n_pts: int = 400):
    """phi(z) = int_{-eps0}^z f(t)^(-1/k) dt on a log grid of z <= -eps0."""
    z = -np.geomspace(eps0, z_deep, n_pts)
    g = np.asarray(nl.f(z), dtype=float) ** (-1.0 / k)
    phi = np.zeros_like(z)
    phi[1:] = np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(z))
    return z, phi


def nonexistence_demo(
    params: ProblemParams,
    f_spec: Nonlinearity,
    delta_list=(1e-2, 1e-3, 1e-4),
    eta: float = 0.5,
    N: int = 4096,
    eps0: float = 1e-2,
) -> dict:
    """Why bounded subsolutions cannot exist for strongly singular weights.

    Validates the transform integrability of f, tabulates phi (increasing
    and convex for decreasing f), solves the comparison problem for each
    delta, and fits the center value w(2 delta) against log(delta): a
    slope matching the closed-form constant certifies the logarithmic
    divergence that a bounded transform phi(u) could never dominate.
    """
    n, k = params.n, params.k
    if not (n > 2 * k and params.s <= -1.0):
        raise ConfigError(f"nonexistence regime needs n > 2k and s <= -1, got n={n}, k={k}, s={params.s}")
    z_chk = -np.geomspace(1e-3, 1e6, 50)
    fv = np.asarray(f_spec.f(z_chk), dtype=float)
    if np.any(fv <= 0.0):
        raise ConfigError("f must be positive on negatives")
    if np.any(np.diff(fv) < -1e-12 * np.max(fv)):
        # f sampled toward -infinity must not decrease in |z| ... f decreasing in z
        raise ConfigError("f must be monotone decreasing in z (nondecreasing in |z|)")
    converges, integral = transform_integrability(f_spec, k)
    ztab, phitab = transform_table(f_spec, k, eps0, 1e6)
    report = {
        "transform_integrable": converges,
        "transform_integral": integral,
        "phi_z": ztab,
        "phi": phitab,
        "delta": list(delta_list),
        "w_at_2delta": [],
        "expected_slope": shooting.comparison_slope(n, k),
    }
    if not converges:
        report["slope_vs_log_delta"] = None
        report["diverges"] = False
        return report
    for d in delta_list:
        w = shooting.nonexistence_ode(params, delta=d, eta=eta, N=N)
        report["w_at_2delta"].append(shooting.value_at(w, 2.0 * d))
    x = np.log(np.asarray(delta_list))
    y = np.asarray(report["w_at_2delta"])
    slope = float(np.polyfit(x, y, 1)[0])
    report["slope_vs_log_delta"] = slope
    # w(2 delta) -> -infinity as delta -> 0: positive slope against log(delta)
    report["diverges"] = bool(slope > 0.5 * report["expected_slope"])
    return report
