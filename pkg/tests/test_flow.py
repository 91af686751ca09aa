import math

import numpy as np
import pytest

from hessvar import flow, nonlinearity, radial
from hessvar.errors import AdmissibilityError, ConfigError
from hessvar.hessian import binom
from hessvar.radial import ProblemParams, RadialProfile


def quad_setup(n=3, k=1, N=64, a=0.5):
    p = ProblemParams(n, k, 0.0, 1.0)
    g = radial.make_grid(p, N)
    nl = nonlinearity.ConstantSource(binom(n, k))
    return p, g, nl, radial.quadratic_profile(p, g, a=a)


def test_functional_J_zero_profile():
    p, g, nl, _ = quad_setup()
    zero = RadialProfile(g, np.zeros_like(g.nodes), np.zeros_like(g.nodes))
    assert flow.functional_J(p, zero, nl) == pytest.approx(0.0, abs=1e-14)


def test_functional_J_constant_source_algebra():
    # J = I_k/(k+1) - c * int (-u) dx for a constant source
    p, g, nl, prof = quad_setup(a=1.0)
    expect = radial.hessian_energy(p, prof) / 2 - nl.c * radial.sphere_area(3) * (
        radial.radial_weighted_integral(3, g, -prof.u)
    )
    assert flow.functional_J(p, prof, nl) == pytest.approx(expect, rel=1e-12)


def test_functional_J_eigen_pair_vanishes():
    # at the eigenpair the two halves of J cancel
    from hessvar import spectral

    p = ProblemParams(5, 1, -0.25)
    res = spectral.inverse_iteration(p, N=512)
    nl = nonlinearity.EigenSource(res.lambda1, p.k, p.weight_exponent)
    val = flow.functional_J(p, res.phi1, nl)
    assert abs(val) < 1e-6 * res.lambda1


def test_frozen_fixed_point_zero_steps():
    p, g, nl, prof = quad_setup(a=1.0)
    eng = flow._Engine(p, g, nonlinearity.ConstantSource(1.0))
    du, d2u, S, margin, rate = eng.geometry(prof.u)
    frozen = nonlinearity.FrozenField(g.nodes, S)
    run = flow.flow_to_steady(p, prof, frozen, tol=1e-12, max_steps=100)
    assert run.steps == 0
    assert run.converged
    assert run.state.residual == pytest.approx(0.0, abs=1e-13)


def test_constant_flow_recovers_quadratic():
    p, g, nl, init = quad_setup(N=64, a=0.4)
    run = flow.flow_to_steady(p, init, nl, tol=1e-6, max_steps=100_000, collect_trace=True)
    assert run.converged
    exact = radial.quadratic_profile(p, g, a=1.0)
    assert np.max(np.abs(run.state.prof.u - exact.u)) < 1e-5
    # monotone energy along the whole trace
    J = [row[3] for row in run.trace]
    assert all(J[i + 1] <= J[i] + 1e-12 * abs(J[i]) for i in range(len(J) - 1))
    assert run.worst_descent_violation <= 0.0


def test_flow_step_descends_and_grows_dt():
    p, g, nl, init = quad_setup(N=48, a=0.4)
    state = flow.initial_state(p, init, nl)
    nxt = flow.flow_step(p, state, nl)
    assert nxt.energy <= state.energy + 1e-12 * abs(state.energy)
    assert nxt.time > state.time


def test_inadmissible_init_rejected():
    p, g, nl, _ = quad_setup()
    bad = RadialProfile(g, -(g.nodes**2 - 1.0) / 2.0, -g.nodes)  # concave bump
    with pytest.raises(AdmissibilityError):
        flow.flow_to_steady(p, bad, nl, tol=1e-6, max_steps=10)


def test_power_tail_mu_variant_descends():
    p, g, nl, init = quad_setup(N=48, a=0.6)
    cfg = flow.FlowConfig(mu=("power", 3.0))
    run = flow.flow_to_steady(p, init, nl, tol=1e-5, max_steps=50_000, cfg=cfg,
                              collect_trace=True)
    J = [row[3] for row in run.trace]
    assert all(J[i + 1] <= J[i] + 1e-12 * abs(J[i]) for i in range(len(J) - 1))
    assert run.converged
    with pytest.raises(ConfigError):
        flow.make_mu(("power", 0.5))
    with pytest.raises(ConfigError):
        flow.make_mu("exp")


def test_mu_power_blend_is_monotone_continuous():
    mu = flow.make_mu(("power", 4.0))
    z = np.linspace(0.05, 3.0, 2000)
    v = mu(z)
    assert np.all(np.diff(v) > 0.0)
    assert np.max(np.abs(np.diff(v))) < 0.1  # no jumps across the blend


def test_normalized_flow_eta_bounded_and_deterministic():
    p = ProblemParams(5, 1, -0.25)
    kstar = radial.critical_exponent(p)
    nl = nonlinearity.MollifiedSource(delta=0.05, eps=0.05, M=20.0, kstar=kstar,
                                      s=p.s, k=p.k)
    g = radial.make_grid(p, 48, gamma=1.0)
    init = radial.quadratic_profile(p, g, a=1.0)
    run1 = flow.normalized_flow(p, init, nl, lam_mult=1.0, tol=1e-8, max_steps=3000,
                                collect_trace=True)
    run2 = flow.normalized_flow(p, init, nl, lam_mult=1.0, tol=1e-8, max_steps=3000)
    lo, hi = run1.eta_range
    assert 0.0 < lo <= hi < math.inf
    J = [row[3] for row in run1.trace]
    assert all(J[i + 1] <= J[i] + 1e-12 * abs(J[i]) for i in range(len(J) - 1))
    assert np.array_equal(run1.state.prof.u, run2.state.prof.u)


def test_normalized_functional_matches_engine():
    p = ProblemParams(5, 1, -0.25)
    kstar = radial.critical_exponent(p)
    nl = nonlinearity.MollifiedSource(delta=0.05, eps=0.05, M=20.0, kstar=kstar,
                                      s=p.s, k=p.k)
    g = radial.make_grid(p, 64, gamma=1.0)
    prof = radial.quadratic_profile(p, g, a=0.7)
    val = flow.functional_J_normalized(p, prof, nl, lam_mult=2.0)
    assert math.isfinite(val)
    with pytest.raises(ConfigError):
        flow.functional_J_normalized(p, prof, nonlinearity.ConstantSource(1.0), 1.0)


def test_kernel_matches_numpy_geometry():
    from hessvar._kernels import _geometry_numpy, geometry

    p = ProblemParams(8, 3, 0.0)
    g = radial.make_grid(p, 48)
    eng = flow._Engine(p, g, nonlinearity.ConstantSource(binom(8, 3)))
    rng = np.random.default_rng(0)
    u = (g.nodes**2 - 1.0) / 2.0 * (1.0 + 0.03 * rng.normal(size=g.nodes.size))
    u[-1] = 0.0
    args = (u, eng.r, eng.c1, eng.c2, eng.bnd1, eng.bnd2, eng.bin1, eng.bin2, 3, 0.0)
    out_jit = geometry(*args)
    out_np = _geometry_numpy(*args)
    for a, b in zip(out_jit, out_np):
        assert np.allclose(np.asarray(a), np.asarray(b), rtol=1e-13, atol=1e-13)


def test_steady_state_euler_lagrange_residual():
    # at convergence, directional derivatives of J along smooth interior
    # directions vanish to within ten times the flow tolerance
    tol = 1e-6
    p, g, nl, init = quad_setup(N=96, a=0.6)
    run = flow.flow_to_steady(p, init, nl, tol=tol, max_steps=300_000)
    assert run.converged
    prof = run.state.prof
    r = g.nodes
    rng = np.random.default_rng(17)
    cutoff = np.clip((0.8 - r) / 0.2, 0.0, 1.0) ** 2  # vanish near the boundary
    h = 1e-6
    for _ in range(10):
        v = np.zeros_like(r)
        for j in range(1, 5):
            v += rng.normal() / j * np.sin(j * np.pi * r)
        v *= cutoff
        v /= np.max(np.abs(v))
        up = RadialProfile(g, prof.u + h * v, prof.du)
        dn = RadialProfile(g, prof.u - h * v, prof.du)
        up.du, _ = radial.derivatives(g, up.u)
        dn.du, _ = radial.derivatives(g, dn.u)
        dJ = (flow.functional_J(p, up, nl) - flow.functional_J(p, dn, nl)) / (2 * h)
        assert abs(dJ) <= 10 * tol
