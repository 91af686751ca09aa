"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the lines as they
happen.  Tolerances are pinned here, not configurable.
"""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from hessvar import drivers, flow, hessian, nonlinearity, radial, sharp, shooting, spectral
from hessvar.radial import ProblemParams, RadialProfile


def _report(num, ok, detail):
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


# -- 1 ----------------------------------------------------------------------


def test_criterion_1_algebra_oracle():
    rng = np.random.default_rng(2024)
    worst = 0.0
    nesting_ok = True
    total = 0
    for n in range(1, 9):
        lam = rng.normal(size=(1250, n)) * 3.0
        total += lam.shape[0]
        members = {}
        for k in range(1, n + 1):
            fast = np.atleast_1d(hessian.sigma(k, lam))
            slow = np.array([hessian.sigma_subset_oracle(k, row) for row in lam])
            scale = np.maximum(np.abs(slow), 1e-300)
            worst = max(worst, float(np.max(np.abs(fast - slow) / scale)))
            members[k] = np.atleast_1d(hessian.in_gamma_k(k, lam))
        for k in range(2, n + 1):
            for j in range(1, k):
                nesting_ok = nesting_ok and bool(np.all(~members[k] | members[j]))
    _report(1, worst < 1e-12 and nesting_ok,
            f"recurrence vs subset enumeration on {total} tuples: "
            f"max rel gap {worst:.2e}; cone nesting {'holds' if nesting_ok else 'fails'}")


# -- 2 ----------------------------------------------------------------------


def test_criterion_2_by_parts_identity():
    p = ProblemParams(5, 2, 0.0, 1.0)
    R = 1.0
    alpha = p.n / (4 * p.k * R**2)
    profiles = {
        "quadratic": (lambda r: (r**2 - R**2) / 2, lambda r: r),
        "quartic": (lambda r: (r**2 - R**2) / 2 + (r**4 - R**4) / 8,
                    lambda r: r + r**3 / 2),
        "cosine": (lambda r: -(2 * R / np.pi) * np.cos(np.pi * r / (2 * R)),
                   lambda r: np.sin(np.pi * r / (2 * R))),
        "cubic": (lambda r: (r**2 - R**2) / 2 + (r**3 - R**3) / (3 * R),
                  lambda r: r + r**2 / R),
        "gauss": (lambda r: -(np.exp(-alpha * r**2) - np.exp(-alpha * R**2)) / (2 * alpha),
                  lambda r: r * np.exp(-alpha * r**2)),
    }
    ok = True
    details = []
    for name, (f, df) in profiles.items():
        gaps = []
        for N in (128, 256, 512):
            g = radial.make_grid(p, N)
            gaps.append(radial.energy_by_parts_check(p, radial.profile_from_callable(g, f, df)))
        r1, r2 = gaps[0] / gaps[1], gaps[1] / gaps[2]
        ok = ok and 3.5 < r1 < 4.5 and 3.5 < r2 < 4.5
        details.append(f"{name}: {r1:.2f},{r2:.2f}")
    _report(2, ok, "three-grid by-parts convergence ratios " + "; ".join(details))


# -- 3 ----------------------------------------------------------------------


def test_criterion_3_sharp_constant():
    cases = [(3, 1, 0.0), (5, 1, -0.25), (5, 2, -0.1)]
    ok = True
    details = []
    for n, k, s in cases:
        p = ProblemParams(n, k, s)
        vals = [sharp.sharp_quotient(sharp.ExtremalSpec(p, lam)).quotient
                for lam in (0.5, 1.0, 2.0)]
        spread = (max(vals) - min(vals)) / vals[1]
        ok = ok and spread <= 1e-6
        details.append(f"({n},{k},{s}) lam-spread {spread:.1e}")
    # independent 4x-resolution quadrature of the same extremal at (3,1,0)
    spec = sharp.ExtremalSpec(ProblemParams(3, 1, 0.0), 1.0)
    base_cfg = sharp.QuadConfig()
    fine_cfg = sharp.QuadConfig(n_core=4 * base_cfg.n_core,
                                nodes_per_decade=4 * base_cfg.nodes_per_decade)
    c_base = sharp.sharp_quotient(spec, base_cfg).quotient
    c_fine = sharp.sharp_quotient(spec, fine_cfg).quotient
    gap4 = abs(c_base - c_fine) / c_fine
    ok = ok and gap4 <= 1e-6
    details.append(f"4x-resolution gap {gap4:.1e}")
    for n, k, s in cases:
        rep = sharp.maximality_probe(sharp.ExtremalSpec(ProblemParams(n, k, s)),
                                     n_perturb=200, amplitude=0.05, seed=2024)
        excess = rep.max_quotient / rep.base_quotient - 1.0
        ok = ok and rep.ok
        details.append(f"({n},{k},{s}) probe excess {excess:+.1e}")
    _report(3, ok, "; ".join(details))


# -- 4 ----------------------------------------------------------------------


def test_criterion_4_bliss_substitution():
    p = ProblemParams(5, 1, -0.25)
    spec = sharp.ExtremalSpec(p, 1.0)
    pR = ProblemParams(5, 1, -0.25, R=8.0)

    def perturbed(fac):
        def du(r):
            _, base = sharp.extremal_values(spec, np.asarray(r, dtype=float))
            x = r / (r + 1.0)
            return base * np.exp(fac * (0.3 * np.sin(np.pi * x)
                                        + 0.2 * (1 - np.cos(2 * np.pi * x))))
        return du

    ok = True
    details = []
    for name, fac in (("extremal", 0.0), ("perturbed+", 1.0), ("perturbed-", -0.7)):
        gaps = []
        for N in (128, 256, 512):
            g = radial.make_grid(pR, N, gamma=2.0)
            prof = radial.profile_from_derivative(g, perturbed(fac)(g.nodes))
            gaps.append(sharp.bliss_change_of_variables_check(spec, prof))
        r1, r2 = gaps[0] / gaps[1], gaps[1] / gaps[2]
        ok = ok and 3.5 < r1 < 4.5 and 3.5 < r2 < 4.5 and gaps[2] < 1e-3
        details.append(f"{name}: ratios {r1:.2f},{r2:.2f}, finest gap {gaps[2]:.1e}")
    _report(4, ok, "substitution identities " + "; ".join(details))


# -- 5 ----------------------------------------------------------------------


def test_criterion_5_flow_descent():
    n, k = 8, 2
    p = ProblemParams(n, k, 0.0, 1.0)
    g = radial.make_grid(p, 512)
    nl = nonlinearity.ConstantSource(hessian.binom(n, k))
    init = radial.quadratic_profile(p, g, a=0.5)
    run = flow.flow_to_steady(p, init, nl, tol=1e-5, max_steps=4_000_000)
    exact = radial.quadratic_profile(p, g, a=1.0)
    gap = float(np.max(np.abs(run.state.prof.u - exact.u)))
    ok = run.converged and gap < 1e-5 and run.worst_descent_violation <= 0.0
    _report(5, ok,
            f"constant-source flow at N=512 ({n},{k}): steps {run.steps}, "
            f"sup-gap to paraboloid {gap:.2e}, worst descent slack "
            f"{run.worst_descent_violation:.1e} (<= 0 means every accepted "
            f"step lowered J within 1e-12|J|)")


# -- 6 ----------------------------------------------------------------------


def test_criterion_6_eigenvalue():
    p = ProblemParams(3, 1, 0.0, 1.0)
    res = spectral.inverse_iteration(p, N=1024)
    err = abs(res.lambda1 - math.pi**2) / math.pi**2
    ok = err <= 1e-3
    details = [f"lambda1(3,1,0)={res.lambda1:.6f} vs pi^2, rel {err:.1e}"]

    base = ProblemParams(5, 2, -0.1, 1.0)
    lam1 = spectral.inverse_iteration(base, N=512).lambda1
    for R in (0.5, 2.0):
        lamR = spectral.inverse_iteration(ProblemParams(5, 2, -0.1, R), N=512).lambda1
        scale_err = abs(lamR - R ** (-2 * 2 * 0.9) * lam1) / lamR
        ok = ok and scale_err <= 1e-4
        details.append(f"scaling R={R}: rel {scale_err:.1e}")

    g = radial.make_grid(base, 256, gamma=1.0)
    rng = np.random.default_rng(2024)
    margin = math.inf
    for _ in range(500):
        prof = radial.random_admissible_profile(base, g, rng)
        margin = min(margin, spectral.rayleigh(base, prof) / lam1 - 1.0)
    ok = ok and margin >= -1e-4
    details.append(f"500 random profiles: min Rayleigh margin {margin:+.1e}")
    _report(6, ok, "; ".join(details))


# -- 7 ----------------------------------------------------------------------


def test_criterion_7_sublinear():
    p = ProblemParams(5, 1, -0.25, 1.0)
    nl = nonlinearity.PowerSource(p=0.5, wexp=p.weight_exponent)
    eig = spectral.inverse_iteration(p, N=512)
    sups = {}
    ok = True
    details = []
    for m in (10.0, 100.0, 1000.0):
        state, cert = drivers.solve_sublinear(p, nl, m=m, N=128, eigen=eig)
        sups[m] = state.prof.sup
        good = (cert["residual"] <= 1e-5 and cert["J"] < 0.0 and cert["nontrivial"]
                and cert["energy_monotone"] and cert["flow_converged"])
        ok = ok and good
        details.append(f"m={m:g}: residual {cert['residual']:.1e}, J {cert['J']:.2e}, "
                       f"sup {state.prof.sup:.5f}")
    vals = np.array(list(sups.values()))
    spread = float((vals.max() - vals.min()) / vals.max())
    spread_ok = spread < 0.05
    details.append(f"sup-norm spread across m: {spread:.3f} (bar: < 0.05)")
    _report(7, ok and spread_ok, "; ".join(details))


# -- 8 ----------------------------------------------------------------------


def test_criterion_8_superlinear():
    p = ProblemParams(5, 1, -0.25, 1.0)
    kstar = radial.critical_exponent(p)
    p_mid = (p.k + (kstar - 1.0)) / 2.0  # midway in (k, k*-1)
    nl = nonlinearity.PowerSource(p=p_mid, wexp=p.weight_exponent)
    result, cert = drivers.solve_superlinear(p, nl, N=2048)
    ok = (cert["residual"] <= 1e-5 and cert["J"] > 0.0 and cert["nontrivial"]
          and cert["interior_max"] and cert["small_t_positive"])
    _report(8, ok,
            f"p={p_mid:g}: residual {cert['residual']:.1e}, J {cert['J']:.3e} > 0, "
            f"interior max of t -> J(t u*) at t={cert['interior_max_t']:.3f}")


# -- 9 ----------------------------------------------------------------------


def test_criterion_9_nonexistence():
    p = ProblemParams(5, 1, -1.0, 1.0)
    rep = drivers.nonexistence_demo(
        p, nonlinearity.PowerSource(p=2.0, wexp=p.weight_exponent),
        delta_list=(1e-2, 1e-3, 1e-4), N=4096,
    )
    slope_err = abs(rep["slope_vs_log_delta"] - rep["expected_slope"]) / rep["expected_slope"]
    reject = drivers.nonexistence_demo(
        p, nonlinearity.PowerSource(p=1.0, wexp=p.weight_exponent)
    )
    ok = (rep["transform_integrable"] and slope_err <= 0.1 and rep["diverges"]
          and not reject["transform_integrable"])
    _report(9, ok,
            f"fitted slope {rep['slope_vs_log_delta']:.5f} vs closed form "
            f"{rep['expected_slope']:.5f} (rel {slope_err:.1e}); integrability "
            f"validator accepts |z|^2 and rejects |z|^1")


# -- 10 ---------------------------------------------------------------------


def test_criterion_10_determinism(tmp_path):
    commands = [
        ["eigen", "--n", "3", "--k", "1", "--s", "0", "--N", "256"],
        ["quotient", "--n", "5", "--k", "1", "--s", "-0.25"],
        ["flow", "--n", "3", "--k", "1", "--s", "0", "--N", "48",
         "--flow-tol", "1e-4", "--trace-every", "25"],
        ["nonexist", "--n", "5", "--k", "1", "--s", "-1", "--N", "1024"],
        ["sweep", "--s-range=-0.9:-0.1:0.1", "exponent", "--n", "5", "--k", "1"],
        ["solve", "--regime", "superlinear", "--p", "1.5",
         "--n", "5", "--k", "1", "--s", "-0.25", "--N", "512"],
    ]
    from hessvar import cli

    csvs = {}
    for tag in ("first", "second"):
        for i, cmd in enumerate(commands):
            out = tmp_path / tag / f"cmd{i}"
            rc = cli.main(cmd + ["--output-dir", str(out), "--seed", "0"])
            assert rc == 0
    first = sorted((tmp_path / "first").rglob("*.csv"))
    assert first, "no CSV artifacts emitted"
    identical = True
    for f in first:
        twin = tmp_path / "second" / f.relative_to(tmp_path / "first")
        if f.read_bytes() != twin.read_bytes():
            identical = False
            print(f"  differs: {f.name}")
    _report(10, identical,
            f"{len(first)} CSV artifacts byte-identical across two seeded reruns")
