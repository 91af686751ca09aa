"""Fused per-step geometry evaluation for the descent flow.

One call produces, from nodal values u on a nonuniform grid:

  du, d2u      second-order finite differences (ghost reflection at the
               origin, one-sided at the outer boundary)
  S            nodal k-Hessian of the radial profile (origin limit at r=0)
  min_margin   smallest sigma_j - eps_cone over j = 1..k and nodes 0..N-1
  rate         row-sum bound on the spectral radius of the linearized
               log-flow operator, used to cap the explicit time step

The numba version is the hot path (flows take 1e5..1e6 steps); the numpy
twin is the import fallback and the cross-check oracle in tests.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(**kwargs):
        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _geometry_jit(u, r, c1, c2, bnd1, bnd2, bin1, bin2, k, eps_cone):
    npts = u.shape[0]
    du = np.empty(npts)
    d2u = np.empty(npts)
    S = np.empty(npts)
    du[0] = 0.0
    d2u[0] = 2.0 * (u[1] - u[0]) / (r[1] * r[1])
    for i in range(1, npts - 1):
        du[i] = c1[0, i - 1] * u[i - 1] + c1[1, i - 1] * u[i] + c1[2, i - 1] * u[i + 1]
        d2u[i] = c2[0, i - 1] * u[i - 1] + c2[1, i - 1] * u[i] + c2[2, i - 1] * u[i + 1]
    du[npts - 1] = bnd1[0] * u[npts - 3] + bnd1[1] * u[npts - 2] + bnd1[2] * u[npts - 1]
    d2u[npts - 1] = bnd2[0] * u[npts - 3] + bnd2[1] * u[npts - 2] + bnd2[2] * u[npts - 1]

    min_margin = np.inf
    rate = 0.0
    for i in range(npts):
        q = d2u[0] if i == 0 else du[i] / r[i]
        qp = 1.0
        sk = 0.0
        for j in range(1, k + 1):
            sj = bin1[j] * d2u[i] * qp + bin2[j] * qp * q
            qp *= q
            if j == k:
                sk = sj
            if i < npts - 1 and sj - eps_cone < min_margin:
                min_margin = sj - eps_cone
        S[i] = sk
        if i < npts - 1 and sk > 0.0:
            qk1 = q ** (k - 1)
            A = bin1[k] * qk1
            if k >= 2:
                B = bin1[k] * (k - 1) * d2u[i] * q ** (k - 2) + k * bin2[k] * qk1
            else:
                B = bin2[k]
            if i == 0:
                g = k * (bin1[k] + bin2[k]) * abs(d2u[0]) ** (k - 1)
                loc = g * 4.0 / (r[1] * r[1]) / sk
            else:
                s2 = abs(c2[0, i - 1]) + abs(c2[1, i - 1]) + abs(c2[2, i - 1])
                s1 = abs(c1[0, i - 1]) + abs(c1[1, i - 1]) + abs(c1[2, i - 1])
                loc = (abs(A) * s2 + abs(B) * s1 / r[i]) / sk
            if loc > rate:
                rate = loc
    return du, d2u, S, min_margin, rate


def _geometry_numpy(u, r, c1, c2, bnd1, bnd2, bin1, bin2, k, eps_cone):
    npts = u.shape[0]
    du = np.empty(npts)
    d2u = np.empty(npts)
    du[1:-1] = c1[0] * u[:-2] + c1[1] * u[1:-1] + c1[2] * u[2:]
    d2u[1:-1] = c2[0] * u[:-2] + c2[1] * u[1:-1] + c2[2] * u[2:]
    du[0] = 0.0
    d2u[0] = 2.0 * (u[1] - u[0]) / r[1] ** 2
    du[-1] = bnd1[0] * u[-3] + bnd1[1] * u[-2] + bnd1[2] * u[-1]
    d2u[-1] = bnd2[0] * u[-3] + bnd2[1] * u[-2] + bnd2[2] * u[-1]

    q = np.empty(npts)
    q[0] = d2u[0]
    q[1:] = du[1:] / r[1:]
    margins = np.empty((npts, k))
    qp = np.ones(npts)
    for j in range(1, k + 1):
        margins[:, j - 1] = bin1[j] * d2u * qp + bin2[j] * qp * q
        qp = qp * q
    S = margins[:, k - 1].copy()
    min_margin = float(np.min(margins[:-1]) - eps_cone)

    qk1 = q[:-1] ** (k - 1)
    A = bin1[k] * qk1
    if k >= 2:
        B = bin1[k] * (k - 1) * d2u[:-1] * q[:-1] ** (k - 2) + k * bin2[k] * qk1
    else:
        B = np.full(npts - 1, bin2[k])
    s2 = np.abs(c2).sum(axis=0)
    s1 = np.abs(c1).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        loc = np.zeros(npts - 1)
        good = S[1:-1] > 0.0
        loc[1:] = np.where(
            good, (np.abs(A[1:]) * s2 + np.abs(B[1:]) * s1 / r[1:-1]) / S[1:-1], 0.0
        )
    if S[0] > 0.0:
        g = k * (bin1[k] + bin2[k]) * abs(d2u[0]) ** (k - 1)
        loc[0] = g * 4.0 / r[1] ** 2 / S[0]
    rate = float(np.max(loc)) if loc.size else 0.0
    return du, d2u, S, min_margin, rate


geometry = _geometry_jit if HAVE_NUMBA else _geometry_numpy


# ---------------------------------------------------------------------------
# fully fused advance step
#
# Source-term descriptor passed by the flow engine:
#   nl_kind 0: f = c                      (nl_c = c)
#   nl_kind 1: f = c * |z|^p              (nl_c, nl_p)
#   nl_kind 2: tabulated f/F on |z| in ztab, with far branch
#              f = tc * |z|^tp beyond zd (tp != -1)
# mu_kind 0: log; 1: power tail z^(1/p_mu) above 1 with a C^1 blend.
#
# The update direction mu(S) - mu(psi) is frozen while dt backtracks, so
# the transcendental calls happen once per accepted step, and a constant
# source (nl_kind 0, unnormalized) never re-evaluates psi at all.


@njit(cache=True, inline="always")
def _interp1(x, xs, ys):
    if x <= xs[0]:
        return ys[0]
    if x >= xs[xs.size - 1]:
        return ys[ys.size - 1]
    lo = 0
    hi = xs.size - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    t = (x - xs[lo]) / (xs[lo + 1] - xs[lo])
    return ys[lo] * (1.0 - t) + ys[lo + 1] * t


@njit(cache=True, inline="always")
def _f_eval(z, nl_kind, nl_c, nl_p, ztab, ftab, zd, tc, tp):
    az = abs(z)
    if nl_kind == 0:
        return nl_c
    if nl_kind == 1:
        return nl_c * az**nl_p
    if az > zd:
        return tc * az**tp
    return _interp1(az, ztab, ftab)


@njit(cache=True, inline="always")
def _F_eval(z, nl_kind, nl_c, nl_p, ztab, Ftab, zd, tc, tp, F_deep):
    az = abs(z)
    if nl_kind == 0:
        val = nl_c * az
    elif nl_kind == 1:
        val = nl_c * az ** (nl_p + 1.0) / (nl_p + 1.0)
    elif az > zd:
        val = F_deep + tc * (az ** (tp + 1.0) - zd ** (tp + 1.0)) / (tp + 1.0)
    else:
        val = _interp1(az, ztab, Ftab)
    return val if z <= 0.0 else -val


@njit(cache=True, inline="always")
def _mu_eval(z, mu_kind, p_mu):
    if mu_kind == 0:
        return np.log(z)
    if z < 0.5:
        return np.log(z)
    if z > 1.0:
        return z ** (1.0 / p_mu)
    # C^1 cubic blend between log and the power tail on [1/2, 1]
    f0 = -0.6931471805599453
    m0 = 2.0
    f1 = 1.0
    m1 = 1.0 / p_mu
    sec = (f1 - f0) * 2.0
    a0 = m0 if m0 < 3.0 * sec else 3.0 * sec
    a1 = m1 if m1 < 3.0 * sec else 3.0 * sec
    x = (z - 0.5) * 2.0
    h = 0.5
    return (
        (2 * x**3 - 3 * x**2 + 1) * f0
        + (x**3 - 2 * x**2 + x) * h * a0
        + (-2 * x**3 + 3 * x**2) * f1
        + (x**3 - x**2) * h * a1
    )


@njit(cache=True)
def flow_advance(
    u, S, psi, mu_psi, J_old, dt_in, rate_in,
    r, rinv, s1r, s2a, c1, c2, bnd1, bnd2, bin1, bin2, k, eps_cone,
    W_energy, W_pot, W_res, wsm, wfull, omega, coeffE,
    nl_kind, nl_c, nl_p, ztab, ftab, Ftab, zd, tc, tp, F_deep,
    mu_kind, p_mu, normalized, kstar, lam_mult,
    descent_slack, grow, dt_max, cfl, max_halvings, singular0,
    upd, u_new, du_new, d2u_new, S_new, psi_new, mu_psi_new,
):
    """One accepted descent step, fully fused.

    psi and mu_psi describe the current state; the *_new buffers receive
    the accepted state.  Returns (ok, dt_used, dt_next, J_new, res,
    margin, rate, eta_new, pot); ok = 0 means no admissible descending
    step within the halving budget.
    """
    npts = u.shape[0]
    kp1 = k + 1.0
    psi_const = nl_kind == 0 and normalized == 0
    for i in range(npts - 1):
        if singular0 == 1 and i == 0:
            upd[0] = 0.0
        else:
            upd[i] = _mu_eval(S[i], mu_kind, p_mu) - mu_psi[i]
    upd[npts - 1] = 0.0
    dt = dt_in
    if rate_in > 0.0 and cfl * 2.0 / rate_in < dt:
        dt = cfl * 2.0 / rate_in
    for _ in range(max_halvings + 1):
        for i in range(npts):
            u_new[i] = u[i] + dt * upd[i]
        u_new[npts - 1] = 0.0
        if singular0 == 1:
            u_new[0] = (u_new[1] * r[2] ** 2 - u_new[2] * r[1] ** 2) / (r[2] ** 2 - r[1] ** 2)

        # fused geometry: derivatives, S_k, cone margins, stability rate
        du_new[0] = 0.0
        d2u_new[0] = 2.0 * (u_new[1] - u_new[0]) / (r[1] * r[1])
        for i in range(1, npts - 1):
            du_new[i] = c1[0, i - 1] * u_new[i - 1] + c1[1, i - 1] * u_new[i] + c1[2, i - 1] * u_new[i + 1]
            d2u_new[i] = c2[0, i - 1] * u_new[i - 1] + c2[1, i - 1] * u_new[i] + c2[2, i - 1] * u_new[i + 1]
        du_new[npts - 1] = bnd1[0] * u_new[npts - 3] + bnd1[1] * u_new[npts - 2] + bnd1[2] * u_new[npts - 1]
        d2u_new[npts - 1] = bnd2[0] * u_new[npts - 3] + bnd2[1] * u_new[npts - 2] + bnd2[2] * u_new[npts - 1]

        margin = np.inf
        rate = 0.0
        for i in range(npts):
            q = d2u_new[0] if i == 0 else du_new[i] * rinv[i]
            qp = 1.0
            qkm1 = 1.0
            sk = 0.0
            for j in range(1, k + 1):
                sj = bin1[j] * d2u_new[i] * qp + bin2[j] * qp * q
                if j == k:
                    sk = sj
                    qkm1 = qp
                qp *= q
                if i < npts - 1 and sj - eps_cone < margin:
                    margin = sj - eps_cone
            S_new[i] = sk
            if i < npts - 1 and sk > 0.0:
                A = bin1[k] * qkm1
                if k >= 2:
                    B = (k - 1) * bin1[k] * d2u_new[i] * (qkm1 / q if q != 0.0 else 0.0) + k * bin2[k] * qkm1
                else:
                    B = bin2[k]
                if i == 0:
                    g = k * (bin1[k] + bin2[k]) * abs(qkm1)
                    loc = g * 4.0 * rinv[1] * rinv[1] / sk
                else:
                    loc = (abs(A) * s2a[i - 1] + abs(B) * s1r[i - 1]) / sk
                if loc > rate:
                    rate = loc
        if margin > 0.0:
            pot = 0.0
            enr = 0.0
            for i in range(npts):
                if W_pot[i] != 0.0:
                    pot += W_pot[i] * wsm[i] * _F_eval(
                        u_new[i], nl_kind, nl_c, nl_p, ztab, Ftab, zd, tc, tp, F_deep
                    )
                dup = du_new[i]
                for _j in range(k):
                    dup *= du_new[i]
                enr += W_energy[i] * dup
            pot *= omega
            enr *= coeffE
            if normalized == 1:
                val = kstar * pot
                if val > 0.0:
                    J_new = enr / kp1 - lam_mult / kp1 * val ** (kp1 / kstar)
                else:
                    J_new = np.inf
            else:
                J_new = enr / kp1 - pot
            if J_new <= J_old + descent_slack * abs(J_old):
                eta_new = 1.0
                res2 = 0.0
                if psi_const:
                    for i in range(1, npts - 1):
                        psi_new[i] = psi[i]
                        mu_psi_new[i] = mu_psi[i]
                        if W_res[i] != 0.0:
                            dres = S_new[i] - psi_new[i]
                            res2 += W_res[i] * dres * dres
                    psi_new[0] = psi[0]
                    psi_new[npts - 1] = psi[npts - 1]
                    mu_psi_new[0] = mu_psi[0]
                    mu_psi_new[npts - 1] = mu_psi[npts - 1]
                else:
                    scale = 1.0
                    if normalized == 1:
                        eta_new = (kstar * pot) ** ((kp1 - kstar) / kstar)
                        scale = lam_mult * eta_new
                    for i in range(npts):
                        psi_new[i] = scale * wfull[i] * _f_eval(
                            u_new[i], nl_kind, nl_c, nl_p, ztab, ftab, zd, tc, tp
                        )
                        if i > 0 and i < npts - 1:
                            mu_psi_new[i] = _mu_eval(psi_new[i], mu_kind, p_mu)
                            if W_res[i] != 0.0:
                                dres = S_new[i] - psi_new[i]
                                res2 += W_res[i] * dres * dres
                    mu_psi_new[0] = 0.0 if singular0 == 1 else _mu_eval(psi_new[0], mu_kind, p_mu)
                    mu_psi_new[npts - 1] = 0.0
                res = np.sqrt(omega * res2) if res2 > 0.0 else 0.0
                dt_next = dt * grow
                if dt_next > dt_max:
                    dt_next = dt_max
                return 1, dt, dt_next, J_new, res, margin, rate, eta_new, pot
        dt *= 0.5
    return 0, dt, dt, J_old, -1.0, -1.0, -1.0, 1.0, 0.0


@njit(cache=True)
def flow_run(
    u, S, psi, mu_psi, J0, res0, dt0, rate0,
    r, rinv, s1r, s2a, c1, c2, bnd1, bnd2, bin1, bin2, k, eps_cone,
    W_energy, W_pot, W_res, wsm, wfull, omega, coeffE,
    nl_kind, nl_c, nl_p, ztab, ftab, Ftab, zd, tc, tp, F_deep,
    mu_kind, p_mu, normalized, kstar, lam_mult,
    descent_slack, grow, dt_max, cfl, max_halvings, singular0,
    tol, max_steps, eta_lo_bound, eta_hi_bound, trace_every, trace_buf,
    u_out, du_out,
):
    """Run the descent flow until the residual drops below tol.

    Trace rows (step, time, dt, J, res) land every trace_every accepted
    steps.  Returns (status, steps, t_end, J, res, dt_next,
    worst_descent, eta_min, eta_max, ntrace) with status 1 = converged,
    0 = budget exhausted, -1 = stuck, -2 = eta escaped its bounds.
    """
    npts = u.shape[0]
    upd = np.empty(npts)
    u_new = np.empty(npts)
    du_new = np.empty(npts)
    d2u_new = np.empty(npts)
    S_new = np.empty(npts)
    psi_new = np.empty(npts)
    mu_psi_new = np.empty(npts)
    J = J0
    res = res0
    dt = dt0
    rate = rate0
    t = 0.0
    eta_min = np.inf
    eta_max = -np.inf
    worst = -np.inf
    ntrace = 0
    status = 0
    steps = 0
    for step in range(1, max_steps + 1):
        ok, dt_used, dt_next, J_new, res_new, margin, rate_new, eta_new, pot = flow_advance(
            u, S, psi, mu_psi, J, dt, rate,
            r, rinv, s1r, s2a, c1, c2, bnd1, bnd2, bin1, bin2, k, eps_cone,
            W_energy, W_pot, W_res, wsm, wfull, omega, coeffE,
            nl_kind, nl_c, nl_p, ztab, ftab, Ftab, zd, tc, tp, F_deep,
            mu_kind, p_mu, normalized, kstar, lam_mult,
            descent_slack, grow, dt_max, cfl, max_halvings, singular0,
            upd, u_new, du_new, d2u_new, S_new, psi_new, mu_psi_new,
        )
        if ok == 0:
            status = -1
            steps = step - 1
            break
        viol = J_new - (J + descent_slack * abs(J))
        if viol > worst:
            worst = viol
        u[:] = u_new
        S[:] = S_new
        psi[:] = psi_new
        mu_psi[:] = mu_psi_new
        J = J_new
        res = res_new
        dt = dt_next
        rate = rate_new
        t += dt_used
        steps = step
        if normalized == 1:
            if eta_new < eta_min:
                eta_min = eta_new
            if eta_new > eta_max:
                eta_max = eta_new
            if not (eta_lo_bound < eta_new < eta_hi_bound):
                status = -2
                break
        if trace_every > 0 and step % trace_every == 0 and ntrace < trace_buf.shape[0]:
            trace_buf[ntrace, 0] = step
            trace_buf[ntrace, 1] = t
            trace_buf[ntrace, 2] = dt_used
            trace_buf[ntrace, 3] = J
            trace_buf[ntrace, 4] = res
            ntrace += 1
        if res <= tol:
            status = 1
            break
    u_out[:] = u
    # refresh derivatives of the final u (du_new may hold a rejected trial)
    du_out[0] = 0.0
    for i in range(1, npts - 1):
        du_out[i] = c1[0, i - 1] * u[i - 1] + c1[1, i - 1] * u[i] + c1[2, i - 1] * u[i + 1]
    du_out[npts - 1] = bnd1[0] * u[npts - 3] + bnd1[1] * u[npts - 2] + bnd1[2] * u[npts - 1]
    return status, steps, t, J, res, dt, worst, eta_min, eta_max, ntrace
