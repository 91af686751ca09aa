"""Principal eigenvalue of the weighted k-Hessian on a ball.

The eigenpair solves S_k(D^2 u) = lambda |x|^(2sk) |u|^k with u = 0 on
the boundary and the normalization int |x|^(2sk) |u|^(k+1) dx = 1; the
eigenvalue is the infimum of the weighted Rayleigh quotient

    I_k(u) / int |x|^(2sk) |u|^(k+1) dx

over admissible profiles.  Inverse iteration exploits the divergence
form: with the previous iterate frozen on the right-hand side the
equation integrates out directly (no root finding), and renormalizing
after each solve makes the Rayleigh quotient of the new iterate the
eigenvalue estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import radial, shooting
from .errors import AdmissibilityError, ConfigError, ConvergenceError
from .radial import ProblemParams, RadialGrid, RadialProfile


@dataclass
class EigenResult:
    lambda1: float
    phi1: RadialProfile
    iterations: int
    history: list = field(default_factory=list)  # rows (iteration, lambda, residual)
    converged: bool = True


def weighted_power_integral(params: ProblemParams, prof: RadialProfile, p: float) -> float:
    """int_Omega |x|^(2sk) |u|^p dx."""
    return radial.sphere_area(params.n) * radial.radial_weighted_integral(
        params.n, prof.grid, np.abs(prof.u) ** p, wexp=params.weight_exponent
    )


def rayleigh(params: ProblemParams, prof: RadialProfile) -> float:
    """Weighted Rayleigh quotient; its infimum over admissible profiles is lambda1."""
    denom = weighted_power_integral(params, prof, params.k + 1.0)
    if denom <= 0.0:
        raise AdmissibilityError("Rayleigh quotient undefined for the zero profile")
    return radial.hessian_energy(params, prof, check=False) / denom


def eigen_residual(params: ProblemParams, prof: RadialProfile, lam: float,
                   relative: bool = True) -> float:
    """Weighted L2 gap between S_k(D^2 u) and lam |x|^(2sk) |u|^k.

    Integrated over the open interior.  With relative=True (the default)
    the gap is measured against the L2 norm of the right-hand side,
    which is the meaningful scale when the weight is singular and both
    sides blow up at the origin.
    """
    from . import hessian

    n, k = params.n, params.k
    r = prof.grid.nodes
    _, d2u = radial.derivatives(prof.grid, prof.u)
    sk = hessian.radial_Sk(n, k, prof.du, d2u, r)
    with np.errstate(divide="ignore"):
        w = np.where(r > 0, r, 1.0) ** params.weight_exponent
    rhs = lam * w * np.abs(prof.u) ** k
    gap = sk - rhs
    gap[0] = 0.0
    gap[-1] = 0.0
    rhs[0] = 0.0
    rhs[-1] = 0.0
    W = radial.weight_vector(prof.grid, n - 1.0).copy()
    W[-1] = 0.0
    num = math.sqrt(max(radial.sphere_area(n) * float(W @ (gap * gap)), 0.0))
    if not relative:
        return num
    den = math.sqrt(max(radial.sphere_area(n) * float(W @ (rhs * rhs)), 1e-300))
    return num / den


def _normalize(params: ProblemParams, prof: RadialProfile) -> RadialProfile:
    nrm = weighted_power_integral(params, prof, params.k + 1.0) ** (1.0 / (params.k + 1.0))
    if nrm <= 0.0:
        raise AdmissibilityError("cannot normalize a zero profile")
    return RadialProfile(prof.grid, prof.u / nrm, prof.du / nrm)


def inverse_iteration(
    params: ProblemParams,
    init: RadialProfile | None = None,
    tol: float = 1e-4,
    max_iter: int = 200,
    grid: RadialGrid | None = None,
    N: int = 1024,
    gamma: float | None = None,
) -> EigenResult:
    """Principal eigenpair by inverse power iteration on the divergence form.

    Each sweep solves d/dr[r^(n-k)(u')^k] = c_k r^(n-1) |x|^(2sk) |u_m|^k
    with the previous iterate on the right, renormalizes to unit weighted
    (k+1)-norm, and reads the eigenvalue estimate off the Rayleigh
    quotient.  Stops when successive estimates differ by at most tol
    (relative) and the equation residual is below tol * lambda.
    """
    params.require_solver_range()
    if grid is None:
        grid = radial.make_grid(params, N, gamma)
    if init is None:
        init = radial.quadratic_profile(params, grid)
    if init.sup == 0.0:
        raise AdmissibilityError("all-zero initial profile rejected")
    u = _normalize(params, init)
    wexp = params.weight_exponent
    lam_prev = None
    history = []
    for it in range(1, max_iter + 1):
        rhs = np.abs(u.u) ** params.k
        sol, _ = shooting.solve_known_rhs(params, grid, rhs, wexp=wexp)
        u = _normalize(params, sol)
        lam = rayleigh(params, u)
        res = eigen_residual(params, u, lam)
        history.append((it, lam, res))
        if lam_prev is not None and abs(lam - lam_prev) <= tol * lam and res <= tol:
            return EigenResult(lambda1=lam, phi1=u, iterations=it, history=history)
        lam_prev = lam
    raise ConvergenceError(
        f"eigen iteration did not converge in {max_iter} sweeps "
        f"(last lambda={lam_prev}, residual={history[-1][2]:.3e})"
    )
