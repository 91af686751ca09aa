import math

import numpy as np
import pytest

from hessvar import radial, spectral
from hessvar.errors import AdmissibilityError
from hessvar.radial import ProblemParams, RadialProfile


def test_lambda1_is_pi_squared_for_radial_laplacian():
    p = ProblemParams(3, 1, 0.0, 1.0)
    res = spectral.inverse_iteration(p, N=1024)
    assert res.lambda1 == pytest.approx(math.pi**2, rel=1e-3)
    # eigenfunction: negative inside, Dirichlet at R, unit weighted norm
    assert np.all(res.phi1.u[:-1] < 0.0)
    assert res.phi1.u[-1] == 0.0
    assert res.phi1.du[0] == 0.0
    assert spectral.weighted_power_integral(p, res.phi1, p.k + 1.0) == pytest.approx(
        1.0, abs=1e-10
    )
    assert radial.profile_in_cone_relative(p, res.phi1, rel_floor=-1e-6)


def test_rayleigh_homogeneity_and_eigen_value():
    p = ProblemParams(5, 2, -0.1)
    res = spectral.inverse_iteration(p, N=512)
    r5 = spectral.rayleigh(
        p, RadialProfile(res.phi1.grid, 5.0 * res.phi1.u, 5.0 * res.phi1.du)
    )
    assert r5 == pytest.approx(spectral.rayleigh(p, res.phi1), rel=1e-12)
    assert spectral.rayleigh(p, res.phi1) == pytest.approx(res.lambda1, rel=1e-12)


def test_rayleigh_lower_bound_random_profiles():
    p = ProblemParams(5, 2, -0.1)
    res = spectral.inverse_iteration(p, N=512)
    g = radial.make_grid(p, 256, gamma=1.0)
    rng = np.random.default_rng(77)
    for _ in range(50):
        prof = radial.random_admissible_profile(p, g, rng)
        assert spectral.rayleigh(p, prof) >= res.lambda1 * (1.0 - 1e-4)


def test_scaling_law():
    base = ProblemParams(5, 2, -0.1, 1.0)
    lam1 = spectral.inverse_iteration(base, N=512).lambda1
    for R in (0.5, 2.0):
        pR = ProblemParams(5, 2, -0.1, R)
        lamR = spectral.inverse_iteration(pR, N=512).lambda1
        assert lamR == pytest.approx(R ** (-2 * 2 * 0.9) * lam1, rel=1e-4)


def test_multi_init_agreement():
    p = ProblemParams(4, 1, -0.3)
    tol = 5e-5
    g = radial.make_grid(p, 512)
    a = spectral.inverse_iteration(p, grid=g, tol=tol)
    rng = np.random.default_rng(5)
    other = radial.random_admissible_profile(p, g, rng)
    b = spectral.inverse_iteration(p, init=other, grid=g, tol=tol)
    assert abs(a.lambda1 - b.lambda1) <= 2 * tol * a.lambda1


def test_zero_init_rejected():
    p = ProblemParams(3, 1, 0.0)
    g = radial.make_grid(p, 64)
    zero = RadialProfile(g, np.zeros_like(g.nodes), np.zeros_like(g.nodes))
    with pytest.raises(AdmissibilityError):
        spectral.inverse_iteration(p, init=zero, grid=g)


def test_grid_convergence_second_order():
    p = ProblemParams(3, 1, 0.0)
    exact = math.pi**2
    errs = [abs(spectral.inverse_iteration(p, N=N).lambda1 - exact) for N in (128, 256)]
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_history_and_residual():
    p = ProblemParams(5, 1, -0.25)
    res = spectral.inverse_iteration(p, N=512, tol=1e-4)
    assert res.history[-1][0] == res.iterations
    assert res.history[-1][2] <= 1e-4
    assert spectral.eigen_residual(p, res.phi1, res.lambda1) <= 1e-4
