import numpy as np
import pytest

from hessvar import nonlinearity as nl
from hessvar.errors import ConfigError


def test_constant_and_power_primitives():
    c = nl.ConstantSource(3.0)
    assert c.F(-2.0) == pytest.approx(6.0)
    p = nl.PowerSource(p=1.5, wexp=-0.5, coeff=2.0)
    z = -1.7
    assert p.f(z) == pytest.approx(2.0 * 1.7**1.5)
    assert p.F(z) == pytest.approx(2.0 * 1.7**2.5 / 2.5)
    e = nl.EigenSource(lam=5.0, k=2)
    assert e.f(-3.0) == pytest.approx(45.0)
    assert e.F(-3.0) == pytest.approx(5.0 * 27.0 / 3.0)


def test_weights():
    p = nl.PowerSource(p=1.0, wexp=-0.5)
    r = np.array([0.25, 1.0, 4.0])
    assert np.allclose(p.weight(r), r**-0.5)
    m = nl.MollifiedSource(delta=0.01, eps=0.1, M=10.0, kstar=6.0, s=-0.25, k=1)
    assert np.allclose(m.weight(r), (r**2 + 1e-4) ** -0.25)
    assert m.weight_power == 0.0


def test_mollified_branches():
    d, e, M, ks = 0.01, 0.05, 10.0, 6.0
    m = nl.MollifiedSource(delta=d, eps=e, M=M, kstar=ks, s=0.0, k=1)
    q = ks - 1.0
    # plateau, pure power, integrable tail
    assert m.f(-0.5 * d) == pytest.approx(d**q)
    assert m.f(-1.0) == pytest.approx(1.0)
    assert m.f(-5.0) == pytest.approx(5.0**q)
    assert m.f(-50.0) == pytest.approx(e / 2500.0)
    # strictly positive everywhere, monotone on the lower bridge
    z = np.linspace(-3 * M, 0.0, 2000)
    assert np.all(m.f(z) > 0.0)
    zb = -np.linspace(d, 2 * d, 200)
    fb = m.f(zb)
    assert np.all(np.diff(fb) >= -1e-15)  # increasing in |z|
    # primitive is uniformly bounded (tail integrable)
    assert m.F(-1e9) < m.F(-1e12) < np.inf
    assert m.F(-1e12) - m.F(-1e6) < 1e-5


def test_mollified_primitive_matches_quadrature():
    m = nl.MollifiedSource(delta=0.02, eps=0.05, M=5.0, kstar=4.0, s=0.0, k=1)
    from scipy.integrate import quad

    for z in (-0.5, -3.0, -8.0):
        val, _ = quad(lambda t: float(m.f(np.asarray(-t))), 0.0, -z, limit=200)
        assert m.F(z) == pytest.approx(val, rel=1e-4)


def test_capped_source_continuity_and_tail():
    base = nl.PowerSource(p=3.0, wexp=-0.4)
    cap = nl.CappedSource(base, m=2.0, p=1.5)
    # continuous junction: d_m * m^p = f(-m)
    assert cap.f(-2.0 + 1e-9) == pytest.approx(cap.f(-2.0 - 1e-9), rel=1e-6)
    assert cap.f(-8.0) == pytest.approx(cap.d_m * 8.0**1.5)
    assert cap.weight_power == pytest.approx(-0.4)
    # deep primitive follows the capped power
    z = -100.0
    direct = cap.F(-4.0) + cap.d_m * (100.0**2.5 - 4.0**2.5) / 2.5
    assert cap.F(z) == pytest.approx(direct, rel=1e-6)


def test_sublinear_regularized():
    base = nl.PowerSource(p=0.5, wexp=-0.5)
    reg = nl.RegularizedSublinearSource(base, m=100.0, k=1, s=-0.25)
    assert reg.f(-0.25) == pytest.approx(0.5 + 0.01)
    # clamped below -2m
    assert reg.f(-500.0) == pytest.approx(reg.f(-300.0))
    assert float(reg.weight_smooth(np.asarray(0.0))) == pytest.approx((1e-4) ** -0.25)
    assert np.all(np.asarray(reg.f(np.linspace(-5, 0, 100))) > 0)


def test_frozen_field_positivity_check():
    with pytest.raises(ConfigError):
        nl.FrozenField(np.array([0.0, 1.0]), np.array([1.0, 0.0]))


def test_from_spec_round_trip():
    sources = [
        nl.ConstantSource(2.5),
        nl.PowerSource(p=1.5, wexp=-0.5, coeff=3.0),
        nl.EigenSource(lam=7.0, k=2, wexp=-0.4),
        nl.MollifiedSource(delta=0.01, eps=0.1, M=20.0, kstar=3.0, s=-0.25, k=1),
        nl.CappedSource(nl.PowerSource(p=2.0, wexp=0.0), m=5.0, p=1.2),
        nl.RegularizedSublinearSource(nl.PowerSource(p=0.5, wexp=-0.5), m=50.0, k=1, s=-0.25),
    ]
    z = np.linspace(-7.0, -0.01, 64)
    for src in sources:
        clone = nl.from_spec(src.describe())
        assert clone.describe() == src.describe()
        assert np.allclose(np.asarray(clone.f(z)), np.asarray(src.f(z)))
        assert np.allclose(np.asarray(clone.F(z)), np.asarray(src.F(z)))
