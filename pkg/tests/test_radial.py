import math

import numpy as np
import pytest

from hessvar import radial
from hessvar.errors import AdmissibilityError, ConfigError
from hessvar.radial import ProblemParams


def test_sphere_area_convention():
    assert radial.sphere_area(2) == pytest.approx(2 * math.pi)
    assert radial.sphere_area(3) == pytest.approx(4 * math.pi)


def test_params_validation():
    with pytest.raises(ConfigError):
        ProblemParams(3, 4, 0.0)
    with pytest.raises(ConfigError):
        ProblemParams(3, 1, 0.0, R=-1.0)
    p = ProblemParams(5, 2, -0.1)
    assert p.s0 == pytest.approx(1.0)
    assert ProblemParams(3, 2, 0.0).s0 == pytest.approx(0.75)
    assert p.weight_exponent == pytest.approx(-0.4)


def test_make_grid_power_rule():
    p = ProblemParams(3, 1, 0.0, R=1.0)
    g = radial.make_grid(p, 16, gamma=1.0)
    assert np.allclose(g.nodes[4], 0.25)
    g2 = radial.make_grid(p, 16, gamma=2.0)
    assert np.allclose(g2.nodes[4], 0.0625)
    assert np.all(np.diff(g2.nodes) > 0)
    # gamma defaults: 2 for singular weight, 1 otherwise
    assert radial.make_grid(ProblemParams(5, 1, -0.5), 32).gamma == 2.0
    assert radial.make_grid(p, 32).gamma == 1.0


def test_make_grid_rejects_small_or_bad():
    p = ProblemParams(3, 1, 0.0)
    with pytest.raises(ConfigError):
        radial.make_grid(p, 4)
    with pytest.raises(ConfigError):
        radial.make_grid(p, 32, gamma=0.5)


def test_derivatives_exact_for_quadratics():
    p = ProblemParams(5, 1, -0.3, R=2.0)
    g = radial.make_grid(p, 64, gamma=2.0)
    u = 3.0 * g.nodes**2 - 1.0
    du, d2u = radial.derivatives(g, u)
    assert np.max(np.abs(du - 6.0 * g.nodes)) < 1e-10
    assert np.max(np.abs(d2u - 6.0)) < 1e-8


def test_hessian_energy_quadratic_closed_form():
    for n, k, R in [(3, 1, 1.0), (5, 2, 1.5), (4, 2, 0.7)]:
        p = ProblemParams(n, k, 0.0, R=R)
        g = radial.make_grid(p, 512)
        prof = radial.quadratic_profile(p, g)
        from hessvar.hessian import binom

        exact = radial.sphere_area(n) / k * binom(n - 1, k - 1) * R ** (n + 2) / (n + 2)
        assert radial.hessian_energy(p, prof) == pytest.approx(exact, rel=1e-4)


def test_hessian_energy_homogeneity():
    p = ProblemParams(5, 2, 0.0)
    g = radial.make_grid(p, 128)
    prof = radial.quadratic_profile(p, g)
    base = radial.hessian_energy(p, prof)
    for t in (0.5, 2.0, 10.0):
        scaled = radial.RadialProfile(g, t * prof.u, t * prof.du)
        assert radial.hessian_energy(p, scaled) == pytest.approx(t**3 * base, rel=1e-12)


def test_hessian_energy_rejects_inadmissible():
    p = ProblemParams(3, 1, 0.0)
    g = radial.make_grid(p, 32)
    bad = radial.RadialProfile(g, g.nodes**2 - 1.0, -g.nodes)  # negative slope
    with pytest.raises(AdmissibilityError):
        radial.hessian_energy(p, bad)
    shifted = radial.RadialProfile(g, g.nodes**2, 2 * g.nodes)  # u(R) != 0
    with pytest.raises(AdmissibilityError):
        radial.hessian_energy(p, shifted)


def test_energy_by_parts_quadratic_and_zero():
    p = ProblemParams(3, 1, 0.0)
    g = radial.make_grid(p, 512)
    assert radial.energy_by_parts_check(p, radial.quadratic_profile(p, g)) < 1e-4
    zero = radial.RadialProfile(g, np.zeros_like(g.nodes), np.zeros_like(g.nodes))
    assert radial.energy_by_parts_check(p, zero) == 0.0


def test_energy_by_parts_refinement_order():
    p = ProblemParams(5, 2, 0.0)
    gaps = []
    for N in (128, 256):
        g = radial.make_grid(p, N)
        gaps.append(radial.energy_by_parts_check(p, radial.quadratic_profile(p, g)))
    assert 3.5 < gaps[0] / gaps[1] < 4.5


def test_weighted_norm_examples():
    p = ProblemParams(3, 1, 0.0, R=1.0)
    g = radial.make_grid(p, 512)
    zero = radial.RadialProfile(g, np.zeros_like(g.nodes), np.zeros_like(g.nodes))
    assert radial.weighted_norm(p, zero, 2.0, 0.0) == 0.0
    # constant -1 has L1 norm = ball volume
    const = radial.RadialProfile(g, -np.ones_like(g.nodes), np.zeros_like(g.nodes))
    vol = radial.sphere_area(3) / 3
    assert radial.weighted_norm(p, const, 1.0, 0.0) == pytest.approx(vol, rel=1e-5)
    quad = radial.quadratic_profile(p, g)
    assert radial.weighted_norm(p, quad, 1.0, 0.0) == pytest.approx(4 * math.pi / 15, rel=1e-5)
    with pytest.raises(ConfigError):
        radial.weighted_norm(p, quad, 1.0, -3.0)
    with pytest.raises(ConfigError):
        radial.weighted_norm(p, quad, 0.5, 0.0)


def test_critical_exponent_branches():
    assert radial.critical_exponent(ProblemParams(3, 1, 0.0)) == pytest.approx(6.0)
    assert radial.critical_exponent(ProblemParams(7, 2, -1.0)) == pytest.approx(3.0)  # k+1
    assert radial.critical_exponent(ProblemParams(7, 2, 0.5)) == pytest.approx(7.0)
    assert math.isinf(radial.critical_exponent(ProblemParams(3, 2, 0.0)))
    with pytest.raises(ConfigError):
        radial.critical_exponent(ProblemParams(4, 2, -0.5))
    assert radial.critical_exponent(ProblemParams(4, 2, -0.5), equality_surrogate=9.0) == 9.0


def test_critical_exponent_formula_and_continuity():
    rng = np.random.default_rng(20)
    for _ in range(20):
        n = int(rng.integers(3, 10))
        k = int(rng.integers(1, (n - 1) // 2 + 1))
        s = float(rng.uniform(-1.0, 0.0))
        p = ProblemParams(n, k, s)
        expect = (k + 1) * (n + 2 * s * k) / (n - 2 * k)
        assert radial.critical_exponent(p) == pytest.approx(expect, rel=1e-14)
    # continuity across s = 0 from below
    vals = [radial.critical_exponent(ProblemParams(5, 1, s)) for s in (-1e-3, -1e-6, 0.0)]
    assert abs(vals[0] - vals[2]) < 1e-2
    assert abs(vals[1] - vals[2]) < 1e-5


def test_mt_alpha_and_functional():
    assert radial.mt_alpha(2, 1) == pytest.approx(4 * math.pi)
    p = ProblemParams(4, 2, 0.0)
    g = radial.make_grid(p, 256)
    prof = radial.quadratic_profile(p, g)
    val = radial.mt_functional(p, prof)
    assert math.isfinite(val) and val > 0.0
    zero = radial.RadialProfile(g, np.zeros_like(g.nodes), np.zeros_like(g.nodes))
    with pytest.raises(AdmissibilityError):
        radial.mt_functional(p, zero)
    with pytest.raises(ConfigError):
        radial.mt_functional(ProblemParams(3, 1, 0.0), prof)


def test_random_admissible_profiles_are_admissible():
    p = ProblemParams(5, 2, -0.1)
    g = radial.make_grid(p, 128, gamma=1.0)
    rng = np.random.default_rng(42)
    r = g.nodes
    for _ in range(20):
        prof = radial.random_admissible_profile(p, g, rng)
        assert prof.u[-1] == 0.0
        assert np.all(prof.du >= 0.0)
        m = r[1:] ** (p.n - p.k) * prof.du[1:] ** p.k
        assert np.all(np.diff(m) >= -1e-12 * np.max(m))
        # flattened flux stretches ride the cone boundary; allow mesh-order noise
        assert radial.profile_in_cone_relative(p, prof, rel_floor=-5e-3)


def test_quotient_report_consistency():
    p = ProblemParams(5, 1, -0.25)
    g = radial.make_grid(p, 256)
    prof = radial.quadratic_profile(p, g)
    rep = radial.quotient_report(p, prof)
    assert rep.quotient == pytest.approx(rep.wnorm / rep.energy ** (1 / 2), rel=1e-15)
    assert rep.kstar == pytest.approx(3.0)
