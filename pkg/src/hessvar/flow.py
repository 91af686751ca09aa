"""Descent gradient flow for the Hessian functional.

The evolution is the explicit update

    u <- u + dt * [ mu(S_k(D^2 u)) - mu(psi(x, u)) ]

at interior nodes, with the Dirichlet value re-imposed at r = R and
u'(0) = 0 enforced by a ghost-node reflection.  A step is accepted only
if the new profile is nodewise cone-admissible AND the functional

    J(u) = I_k(u)/(k+1) - int_Omega F(x, u) dx

does not increase (up to a 1e-12 * |J| round-off slack); otherwise dt is
halved and retried.  This backtracking replaces continuous-time existence
theory with a per-step descent guarantee that is directly checkable.  On
top of it, dt is capped by a row-sum bound on the spectral radius of the
linearized update, which keeps the explicit scheme from creeping past its
stability limit and pinning a cone margin at zero.

Flows routinely take 1e5..1e6 accepted steps, so the whole trial loop
(update, backtracking, cone margins, J, residual) runs in one compiled
kernel; see _kernels.flow_advance.

mu = log is the default; a concave power-tail variant ('power', p) is
accepted for experimentation but carries no estimate claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hessian, radial
from ._kernels import flow_advance, flow_run, geometry
from .errors import AdmissibilityError, ConfigError, NumericalError, StuckFlowError
from .nonlinearity import Nonlinearity
from .radial import ProblemParams, RadialGrid, RadialProfile

_EMPTY = np.zeros(1)


def make_mu(spec):
    """Flow nonlinearity mu: 'log' (default) or ('power', p) with a C^1 blend."""
    if spec is None or spec == "log":
        return np.log
    if isinstance(spec, (tuple, list)) and len(spec) == 2 and spec[0] == "power":
        p = float(spec[1])
        if p <= 1.0:
            raise ConfigError(f"power-tail mu needs p > 1, got {p}")
        f0, m0 = math.log(0.5), 2.0
        f1, m1 = 1.0, 1.0 / p

        def mu(z):
            z = np.asarray(z, dtype=float)
            out = np.empty_like(z)
            lo = z < 0.5
            hi = z > 1.0
            mid = ~(lo | hi)
            out[lo] = np.log(z[lo])
            out[hi] = z[hi] ** (1.0 / p)
            if np.any(mid):
                from .nonlinearity import _hermite_monotone

                out[mid] = _hermite_monotone(z[mid], 0.5, 1.0, f0, f1, m0, m1)
            return out

        return mu
    raise ConfigError(f"unknown mu spec: {spec!r}")


def _mu_descriptor(spec):
    if spec is None or spec == "log":
        return 0, 2.0
    if isinstance(spec, (tuple, list)) and len(spec) == 2 and spec[0] == "power":
        p = float(spec[1])
        if p <= 1.0:
            raise ConfigError(f"power-tail mu needs p > 1, got {p}")
        return 1, p
    raise ConfigError(f"unknown mu spec: {spec!r}")


def _nl_descriptor(nl: Nonlinearity):
    """Flatten a source term into the kernel's (kind, params, tables) form."""
    kind = nl.kind
    if kind in ("constant", "frozen"):
        c = nl.c if kind == "constant" else 1.0
        return 0, float(c), 0.0, _EMPTY, _EMPTY, _EMPTY, 0.0, 0.0, 0.0, 0.0
    if kind == "power":
        return 1, float(nl.coeff), float(nl.p), _EMPTY, _EMPTY, _EMPTY, 0.0, 0.0, 0.0, 0.0
    if kind == "eigen":
        return 1, float(nl.lam), float(nl.k), _EMPTY, _EMPTY, _EMPTY, 0.0, 0.0, 0.0, 0.0
    ztab = nl._ztab
    Ftab = nl._Ftab
    ftab = np.asarray(nl.f(-ztab), dtype=float)
    zd = float(nl._table_depth)
    F_deep = float(Ftab[-1])
    if kind == "mollified":
        tc, tp = nl.eps, -2.0
    elif kind == "capped":
        tc, tp = nl.d_m, nl.p
    elif kind == "sublinear-regularized":
        tc = (nl._f_clamped ** (1.0 / nl.k) + 1.0 / nl.m) ** nl.k
        tp = 0.0
    else:
        raise ConfigError(f"source kind {kind!r} has no kernel descriptor")
    return 2, 0.0, 0.0, ztab, ftab, Ftab, zd, float(tc), float(tp), F_deep


@dataclass
class FlowConfig:
    dt0: float = 1e-5
    dt_max: float = 0.1
    grow: float = 1.2
    cfl: float = 0.9  # fraction of the 2/rate explicit stability bound
    max_halvings: int = 40
    eps_cone: float = 0.0
    descent_slack: float = 1e-12
    mu: object = "log"
    eta_bounds: tuple = (1e-10, 1e10)


@dataclass
class FlowState:
    time: float
    prof: RadialProfile
    energy: float  # current J value
    residual: float  # L2(Omega) gap between S_k and psi
    dt: float


@dataclass
class FlowRun:
    state: FlowState
    converged: bool
    steps: int
    trace: list = field(default_factory=list)  # rows (step, time, dt, J, residual)
    eta_range: tuple | None = None


class _Engine:
    """Precomputed grid data and nodal evaluations for one flow."""

    def __init__(self, params: ProblemParams, grid: RadialGrid, nl: Nonlinearity,
                 mu="log", lam_mult: float | None = None):
        n, k = params.n, params.k
        self.params = params
        self.grid = grid
        self.nl = nl
        self.mu = make_mu(mu)
        self.mu_kind, self.p_mu = _mu_descriptor(mu)
        self.lam_mult = lam_mult  # not None => quotient-normalized flow
        r = grid.nodes
        self.r = r
        hl = r[1:-1] - r[:-2]
        hr = r[2:] - r[1:-1]
        den = hl * hr * (hl + hr)
        self.c1 = np.ascontiguousarray(
            np.stack([-(hr**2) / den, (hr**2 - hl**2) / den, hl**2 / den])
        )
        self.c2 = np.ascontiguousarray(
            np.stack([2.0 * hr / den, -2.0 * (hl + hr) / den, 2.0 * hl / den])
        )
        a = r[-1] - r[-2]
        b = r[-1] - r[-3]
        hb = r[-2] - r[-3]
        self.bnd1 = np.array([a / (hb * b), -b / (hb * a), (a + b) / (a * b)])
        self.bnd2 = np.array([2.0 / (hb * b), -2.0 / (hb * a), 2.0 / (a * b)])
        self.rinv = np.zeros_like(r)
        self.rinv[1:] = 1.0 / r[1:]
        self.s2a = np.abs(self.c2).sum(axis=0)
        self.s1r = np.abs(self.c1).sum(axis=0) / r[1:-1]
        self.bin1 = np.array([hessian.binom(n - 1, j - 1) for j in range(k + 1)])
        self.bin2 = np.array([hessian.binom(n - 1, j) for j in range(k + 1)])
        self.omega = radial.sphere_area(n)
        self.coeffE = self.omega / k * hessian.binom(n - 1, k - 1)
        # left-rectangle closure of the boundary cell: the one-sided slope at
        # r = R depends on interior nodes with O(1/h) coefficients, and letting
        # it enter the energy would hand the discrete gradient a spurious O(1)
        # boundary term that can flip the descent direction in thin layers
        self.W_energy = radial.weight_vector(grid, n - k).copy()
        h_last = r[-1] - r[-2]
        self.W_energy[-2] += 0.5 * h_last * r[-2] ** (n - k)
        self.W_energy[-1] = 0.0
        self.W_pot = radial.weight_vector(grid, n - 1.0 + nl.weight_power)
        self.W_res = radial.weight_vector(grid, n - 1.0).copy()
        self.W_res[-1] = 0.0  # the boundary node carries the Dirichlet condition
        self.wsm = np.asarray(nl.weight_smooth(r), dtype=float)
        # any nonzero weight power degenerates the log update at r = 0
        self.singular0 = 1 if nl.weight_power != 0.0 else 0
        with np.errstate(divide="ignore"):
            self.wfull = np.where(r > 0, r, 1.0) ** nl.weight_power * self.wsm
        if self.singular0:
            self.wfull[0] = np.inf
        elif nl.weight_power > 0.0:
            self.wfull[0] = 0.0
        self.desc = _nl_descriptor(nl)
        self.kstar = getattr(nl, "kstar", 0.0)
        if lam_mult is not None and not self.kstar:
            raise ConfigError("normalized flow needs a mollified source with kstar")
        npts = r.size
        self._buf = tuple(np.empty(npts) for _ in range(7))

    def geometry(self, u, eps_cone: float = 0.0):
        return geometry(
            u, self.r, self.c1, self.c2, self.bnd1, self.bnd2, self.bin1, self.bin2,
            self.params.k, eps_cone,
        )

    def potential(self, u):
        """int_Omega F(x, u) dx."""
        return self.omega * float(self.W_pot @ (self.wsm * self.nl.F(u)))

    def energy_I(self, du):
        return self.coeffE * float(self.W_energy @ du ** (self.params.k + 1))

    def eta(self, u):
        pot = self.potential(u)
        ks = self.kstar
        val = ks * pot
        if val <= 0.0:
            raise NumericalError("normalization integral lost positivity")
        return val ** ((self.params.k + 1.0 - ks) / ks)

    def J(self, u, du):
        k = self.params.k
        if self.lam_mult is None:
            return self.energy_I(du) / (k + 1.0) - self.potential(u)
        pot = self.potential(u)
        return self.energy_I(du) / (k + 1.0) - self.lam_mult / (k + 1.0) * (self.kstar * pot) ** (
            (k + 1.0) / self.kstar
        )

    def psi(self, u, eta_val: float | None = None):
        vals = self.wfull * self.nl.f(u)
        if self.lam_mult is not None:
            vals = self.lam_mult * (eta_val if eta_val is not None else self.eta(u)) * vals
        return vals

    def residual(self, S, psi_vals):
        d = S - psi_vals
        d[0] = 0.0  # first cell carries no quadrature weight; avoid inf*0
        d[-1] = 0.0
        return math.sqrt(max(self.omega * float(self.W_res @ (d * d)), 0.0))

    def state_of(self, prof: RadialProfile, dt: float, time: float = 0.0) -> FlowState:
        du, d2u, S, margin, rate = self.geometry(prof.u)
        if margin <= 0.0 or not math.isfinite(margin):
            raise AdmissibilityError("initial profile is not nodewise cone-admissible")
        p = RadialProfile(self.grid, prof.u.copy(), du)
        eta_val = self.eta(prof.u) if self.lam_mult is not None else None
        res = self.residual(S, self.psi(prof.u, eta_val))
        return FlowState(time=time, prof=p, energy=self.J(prof.u, du), residual=res, dt=dt)

    def mu_psi_of(self, psi_vals):
        """mu(psi) nodally, with the degenerate-origin and boundary conventions."""
        out = np.zeros_like(psi_vals)
        out[1:-1] = self.mu(psi_vals[1:-1])
        out[0] = 0.0 if self.singular0 else float(self.mu(psi_vals[:1])[0])
        return out

    def advance_raw(self, u, S, psi_vals, mu_psi, J_old, dt, rate, cfg: FlowConfig):
        """One accepted kernel step; returns kernel outputs plus filled buffers."""
        d = self.desc
        upd, u_new, du_new, d2u_new, S_new, psi_new, mu_psi_new = self._buf
        normalized = 1 if self.lam_mult is not None else 0
        out = flow_advance(
            u, S, psi_vals, mu_psi, J_old, dt, rate,
            self.r, self.rinv, self.s1r, self.s2a,
            self.c1, self.c2, self.bnd1, self.bnd2, self.bin1, self.bin2,
            self.params.k, cfg.eps_cone,
            self.W_energy, self.W_pot, self.W_res, self.wsm, self.wfull,
            self.omega, self.coeffE,
            d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7], d[8], d[9],
            self.mu_kind, self.p_mu,
            normalized, self.kstar or 0.0, self.lam_mult or 0.0,
            cfg.descent_slack, cfg.grow, cfg.dt_max, cfg.cfl, cfg.max_halvings,
            self.singular0,
            upd, u_new, du_new, d2u_new, S_new, psi_new, mu_psi_new,
        )
        ok = out[0]
        if not ok:
            raise StuckFlowError(
                f"no admissible descending step after {cfg.max_halvings} halvings (dt={out[1]:.3e})"
            )
        return out


def _prepare(engine: _Engine, u, cfg: FlowConfig):
    """Entry quantities (S, psi, mu_psi, rate) for the first step."""
    du, d2u, S, margin, rate = engine.geometry(u, cfg.eps_cone)
    if margin <= 0.0:
        raise AdmissibilityError("profile is not nodewise cone-admissible")
    eta_val = None
    if engine.lam_mult is not None:
        eta_val = engine.eta(u)
    psi_vals = engine.psi(u, eta_val)
    return S, psi_vals, engine.mu_psi_of(psi_vals), rate


def _check_eta(eta_val, cfg: FlowConfig):
    lo, hi = cfg.eta_bounds
    if not lo < eta_val < hi:
        raise NumericalError(f"eta = {eta_val:.3e} escaped bounds {cfg.eta_bounds}")


def _run_flow(engine, init, tol, max_steps, cfg, collect_trace, track_eta, trace_every=1):
    state0 = engine.state_of(init, dt=cfg.dt0)
    trace = [(0, 0.0, cfg.dt0, state0.energy, state0.residual)] if collect_trace else []
    eta0 = engine.eta(init.u) if track_eta else None
    if state0.residual <= tol:
        return FlowRun(state=state0, converged=True, steps=0, trace=trace,
                       eta_range=(eta0, eta0) if track_eta else None)
    u = state0.prof.u.copy()
    S, psi_vals, mu_psi, rate = _prepare(engine, u, cfg)
    d = engine.desc
    npts = u.size
    stride = trace_every if collect_trace else 0
    nrows = (max_steps // stride + 2) if stride else 0
    trace_buf = np.zeros((nrows, 5))
    u_out = np.empty(npts)
    du_out = np.empty(npts)
    normalized = 1 if engine.lam_mult is not None else 0
    status, steps, t, J, res, dt_next, worst, eta_min, eta_max, ntrace = flow_run(
        u, S, psi_vals, mu_psi, state0.energy, state0.residual, cfg.dt0, rate,
        engine.r, engine.rinv, engine.s1r, engine.s2a,
        engine.c1, engine.c2, engine.bnd1, engine.bnd2, engine.bin1, engine.bin2,
        engine.params.k, cfg.eps_cone,
        engine.W_energy, engine.W_pot, engine.W_res, engine.wsm, engine.wfull,
        engine.omega, engine.coeffE,
        d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7], d[8], d[9],
        engine.mu_kind, engine.p_mu, normalized, engine.kstar or 0.0, engine.lam_mult or 0.0,
        cfg.descent_slack, cfg.grow, cfg.dt_max, cfg.cfl, cfg.max_halvings, engine.singular0,
        tol, max_steps, cfg.eta_bounds[0], cfg.eta_bounds[1], stride, trace_buf,
        u_out, du_out,
    )
    if status == -1:
        raise StuckFlowError(
            f"no admissible descending step after {cfg.max_halvings} halvings (step {steps + 1})"
        )
    if status == -2:
        raise NumericalError(
            f"eta escaped bounds {cfg.eta_bounds}: range seen ({eta_min:.3e}, {eta_max:.3e})"
        )
    if collect_trace:
        for i in range(ntrace):
            row = trace_buf[i]
            trace.append((int(row[0]), row[1], row[2], row[3], row[4]))
        if not trace or trace[-1][0] != steps:
            trace.append((steps, t, trace_buf[ntrace - 1][2] if ntrace else cfg.dt0, J, res))
    prof = RadialProfile(engine.grid, u_out, du_out)
    final = FlowState(time=t, prof=prof, energy=J, residual=res, dt=dt_next)
    run = FlowRun(state=final, converged=status == 1, steps=steps, trace=trace,
                  eta_range=(eta_min, eta_max) if track_eta else None)
    run.worst_descent_violation = worst
    return run


# ---------------------------------------------------------------------------
# public operations


def functional_J(params: ProblemParams, prof: RadialProfile, nl: Nonlinearity) -> float:
    """J(u) = I_k(u)/(k+1) - int_Omega F(x, u) dx for an admissible profile."""
    energy = radial.hessian_energy(params, prof)
    pot = radial.sphere_area(params.n) * radial.radial_weighted_integral(
        params.n, prof.grid, nl.weight_smooth(prof.grid.nodes) * nl.F(prof.u), nl.weight_power
    )
    return energy / (params.k + 1.0) - pot


def functional_J_normalized(
    params: ProblemParams, prof: RadialProfile, nl: Nonlinearity, lam_mult: float
) -> float:
    """Quotient-normalized functional with potential term (kstar int F)^((k+1)/kstar)."""
    kstar = getattr(nl, "kstar", None)
    if kstar is None:
        raise ConfigError("normalized functional needs a mollified source with kstar")
    energy = radial.hessian_energy(params, prof)
    pot = radial.sphere_area(params.n) * radial.radial_weighted_integral(
        params.n, prof.grid, nl.weight_smooth(prof.grid.nodes) * nl.F(prof.u), nl.weight_power
    )
    k = params.k
    return energy / (k + 1.0) - lam_mult / (k + 1.0) * (kstar * pot) ** ((k + 1.0) / kstar)


def initial_state(
    params: ProblemParams, prof: RadialProfile, nl: Nonlinearity, cfg: FlowConfig | None = None
) -> FlowState:
    """Wrap a profile into a FlowState with refreshed derivatives."""
    cfg = cfg or FlowConfig()
    engine = _Engine(params, prof.grid, nl, mu=cfg.mu)
    return engine.state_of(prof, dt=cfg.dt0)


def flow_step(
    params: ProblemParams, state: FlowState, nl: Nonlinearity, cfg: FlowConfig | None = None
) -> FlowState:
    """One accepted descent step (dt backtracking included)."""
    cfg = cfg or FlowConfig()
    engine = _Engine(params, state.prof.grid, nl, mu=cfg.mu)
    u = state.prof.u
    S, psi_vals, mu_psi, rate = _prepare(engine, u, cfg)
    ok, dt_used, dt_next, J, res, margin, rate_n, eta_val, _pot = engine.advance_raw(
        u, S, psi_vals, mu_psi, state.energy, state.dt, rate, cfg
    )
    _, u_new, du_new, _, _, _, _ = engine._buf
    prof = RadialProfile(engine.grid, u_new.copy(), du_new.copy())
    return FlowState(time=state.time + dt_used, prof=prof, energy=J, residual=res, dt=dt_next)


def flow_to_steady(
    params: ProblemParams,
    init: RadialProfile,
    nl: Nonlinearity,
    tol: float,
    max_steps: int,
    cfg: FlowConfig | None = None,
    collect_trace: bool = False,
    trace_every: int = 1,
) -> FlowRun:
    """Iterate the descent flow until the equation residual drops below tol.

    Budget exhaustion returns converged=False rather than raising; an
    already-steady initial profile returns after zero steps.  Trace rows
    land every trace_every accepted steps when collect_trace is set.
    """
    cfg = cfg or FlowConfig()
    engine = _Engine(params, init.grid, nl, mu=cfg.mu)
    return _run_flow(engine, init, tol, max_steps, cfg, collect_trace, track_eta=False,
                     trace_every=trace_every)


def normalized_flow(
    params: ProblemParams,
    init: RadialProfile,
    nl: Nonlinearity,
    lam_mult: float,
    tol: float,
    max_steps: int = 20000,
    cfg: FlowConfig | None = None,
    collect_trace: bool = False,
    trace_every: int = 1,
) -> FlowRun:
    """Descent flow for psi = lam_mult * eta(u) * weight * f(u).

    The scalar eta(u) = (kstar int F dx)^((k+1-kstar)/kstar) is recomputed
    from the current profile at every step; it must stay inside the
    configured positive bounds for the whole run.
    """
    cfg = cfg or FlowConfig()
    engine = _Engine(params, init.grid, nl, mu=cfg.mu, lam_mult=lam_mult)
    return _run_flow(engine, init, tol, max_steps, cfg, collect_trace, track_eta=True,
                     trace_every=trace_every)
