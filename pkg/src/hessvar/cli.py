"""Command-line front end: config ingestion, dispatch, reproducible sweeps.

Every run writes its CSV/JSON artifacts plus one manifest into its own
output directory; rerunning with the same config and seed reproduces the
CSV bytes exactly.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, drivers, flow, nonlinearity, radial, report, sharp, shooting, spectral
from .errors import ConfigError, HessvarError
from .radial import ProblemParams


@dataclass
class RunConfig:
    n: int = 3
    k: int = 1
    s: float = 0.0
    R: float = 1.0
    N: int = 256
    gamma: float | None = None
    flow_tol: float = 1e-5
    shoot_tol: float = 1e-8
    eigen_tol: float = 1e-4
    nl_spec: dict | None = None
    seed: int = 0
    output_dir: str = "."

    def params(self) -> ProblemParams:
        return ProblemParams(self.n, self.k, self.s, self.R)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return cls(**d)


def _build_config(args) -> RunConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    cfg = RunConfig.from_dict(base)
    for name in ("n", "k", "s", "R", "N", "gamma", "flow_tol", "shoot_tol",
                 "eigen_tol", "seed", "output_dir"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "nl", None) is not None:
        cfg.nl_spec = json.loads(args.nl)
    env_dir = os.environ.get("HESSVAR_OUTPUT_DIR")
    if getattr(args, "output_dir", None) is None and env_dir and "output_dir" not in base:
        cfg.output_dir = env_dir
    return cfg


def _emit_plotscript(run: report.RunDir):
    stub = [
        "# Minimal plotting stub for the CSV artifacts in this directory.",
        "# Uses matplotlib if available; adapt freely.",
        "import csv, sys",
        "files = %r" % sorted(f for f in run.files if f.endswith(".csv")),
        "for name in files:",
        "    with open(name) as fh:",
        "        rows = list(csv.reader(fh))",
        "    print(name, 'columns:', rows[0], 'rows:', len(rows) - 1)",
        "try:",
        "    import matplotlib.pyplot as plt",
        "except ImportError:",
        "    sys.exit(0)",
        "for name in files:",
        "    with open(name) as fh:",
        "        rows = list(csv.reader(fh))",
        "    cols = list(zip(*[[float(v) for v in r] for r in rows[1:]]))",
        "    if len(cols) >= 2:",
        "        plt.figure(); plt.plot(cols[0], cols[1]); plt.title(name)",
        "plt.show()",
    ]
    (run.dir / "plots.py").write_text("\n".join(stub) + "\n")
    run.files.append("plots.py")


def _profile_rows(params, prof):
    return shooting.export_rows(params, prof)


PROFILE_HEADER = ["r", "u", "du", "m"]


# ---------------------------------------------------------------------------
# subcommands


def cmd_exponent(cfg: RunConfig, args) -> dict:
    params = cfg.params()
    if 2 * cfg.k == cfg.n:
        kstar = radial.critical_exponent(params, equality_surrogate=args.kstar_surrogate)
    else:
        kstar = radial.critical_exponent(params)
    out = {
        "n": cfg.n,
        "k": cfg.k,
        "s": cfg.s,
        "kstar": "inf" if math.isinf(kstar) else kstar,
        "s0": params.s0,
        "regime": radial.exponent_regime(params),
    }
    print(json.dumps(out, sort_keys=True))
    return out


def cmd_quotient(cfg: RunConfig, args, run: report.RunDir) -> dict:
    params = cfg.params()
    spec = sharp.ExtremalSpec(params, args.lam)
    rep = sharp.sharp_quotient(spec)
    grid = radial.make_grid(params, cfg.N)
    prof = sharp.extremal_profile(spec, grid)
    run.csv("extremal_profile.csv", PROFILE_HEADER, _profile_rows(params, prof))
    out = {"cstar": rep.quotient, "energy": rep.energy, "wnorm": rep.wnorm,
           "kstar": rep.kstar, "lam": args.lam}
    run.json("quotient.json", out)
    return out


def cmd_extremal(cfg: RunConfig, args, run: report.RunDir) -> dict:
    params = cfg.params()
    spec = sharp.ExtremalSpec(params, args.lam)
    grid = radial.make_grid(params, cfg.N, cfg.gamma)
    prof = sharp.extremal_profile(spec, grid)
    run.csv("extremal_profile.csv", PROFILE_HEADER, _profile_rows(params, prof))
    out = {"lam": args.lam, "u0": float(prof.u[0]), "nodes": int(grid.N + 1)}
    run.json("extremal.json", out)
    return out


def _nl_from_config(cfg: RunConfig, params: ProblemParams):
    if cfg.nl_spec is not None:
        return nonlinearity.from_spec(cfg.nl_spec)
    from . import hessian

    return nonlinearity.ConstantSource(hessian.binom(params.n, params.k))


def cmd_flow(cfg: RunConfig, args, run: report.RunDir) -> dict:
    params = cfg.params()
    nl = _nl_from_config(cfg, params)
    grid = radial.make_grid(params, cfg.N, cfg.gamma)
    init = radial.quadratic_profile(params, grid, a=args.init_amplitude)
    fr = flow.flow_to_steady(params, init, nl, tol=cfg.flow_tol,
                             max_steps=args.max_steps, collect_trace=True,
                             trace_every=args.trace_every)
    run.csv("flow_trace.csv", ["step", "time", "dt", "J", "residual"], fr.trace)
    run.csv("flow_profile.csv", PROFILE_HEADER, _profile_rows(params, fr.state.prof))
    out = {
        "converged": fr.converged,
        "steps": fr.steps,
        "J": fr.state.energy,
        "residual": fr.state.residual,
        "nl": nl.describe(),
    }
    run.json("flow.json", out)
    return out


def cmd_eigen(cfg: RunConfig, args, run: report.RunDir) -> dict:
    params = cfg.params()
    res = spectral.inverse_iteration(params, tol=cfg.eigen_tol, N=cfg.N, gamma=cfg.gamma)
    run.csv("eigen_history.csv", ["iteration", "lambda", "residual"], res.history)
    run.csv("eigenfunction.csv", PROFILE_HEADER, _profile_rows(params, res.phi1))
    out = {"lambda1": res.lambda1, "iterations": res.iterations}
    run.json("eigen.json", out)
    return out


def cmd_solve(cfg: RunConfig, args, run: report.RunDir) -> dict:
    params = cfg.params()
    nl = nonlinearity.PowerSource(p=args.p, wexp=params.weight_exponent)
    if args.regime == "sublinear":
        state, cert = drivers.solve_sublinear(
            params, nl, m=args.m, N=cfg.N, flow_tol=cfg.flow_tol
        )
        prof = state.prof
    elif args.regime == "superlinear":
        result, cert = drivers.solve_superlinear(params, nl, N=cfg.N, shoot_tol=cfg.shoot_tol)
        prof = result.prof
        run.csv("shoot_history.csv", ["center_value", "boundary_gap"],
                result.bisection_history)
    else:
        raise ConfigError(f"unknown regime {args.regime!r}")
    run.csv("solution_profile.csv", PROFILE_HEADER, _profile_rows(params, prof))
    out = {"regime": args.regime, "p": args.p, "certificate": cert, "nl": nl.describe()}
    run.json("solve.json", out)
    return out


def cmd_nonexist(cfg: RunConfig, args, run: report.RunDir) -> dict:
    params = cfg.params()
    nl = nonlinearity.PowerSource(p=args.p, wexp=params.weight_exponent)
    deltas = [float(x) for x in args.deltas.split(",")]
    rep = drivers.nonexistence_demo(params, nl, delta_list=deltas, eta=args.eta, N=cfg.N)
    run.csv("phi_transform.csv", ["z", "phi"], list(zip(rep["phi_z"], rep["phi"])))
    rows = list(zip(rep["delta"], rep["w_at_2delta"])) if rep["transform_integrable"] else []
    run.csv("center_values.csv", ["delta", "w_at_2delta"], rows)
    out = {k: v for k, v in rep.items() if k not in ("phi_z", "phi")}
    run.json("nonexist.json", out)
    return out


def _parse_range(spec: str):
    start, stop, step = (float(x) for x in spec.split(":"))
    if step <= 0:
        raise ConfigError(f"sweep step must be positive, got {step}")
    vals = []
    x = start
    while x <= stop + 1e-12:
        vals.append(round(x, 12))
        x += step
    return vals


def cmd_sweep(cfg: RunConfig, args, run: report.RunDir) -> dict:
    svalues = _parse_range(args.s_range)
    target = args.target

    def one(s):
        sub = RunConfig.from_dict({**cfg.to_dict(), "s": s,
                                   "output_dir": str(run.dir / f"s_{s:+.6f}")})
        subrun = report.RunDir(sub.output_dir)
        params = sub.params()
        if target == "quotient":
            rep = sharp.sharp_quotient(sharp.ExtremalSpec(params, 1.0))
            out = {"s": s, "value": rep.quotient}
        elif target == "eigen":
            res = spectral.inverse_iteration(params, tol=sub.eigen_tol, N=sub.N)
            out = {"s": s, "value": res.lambda1}
        elif target == "exponent":
            out = {"s": s, "value": radial.critical_exponent(params)}
        else:
            raise ConfigError(f"unknown sweep target {target!r}")
        subrun.json(f"{target}.json", out)
        subrun.manifest({**sub.to_dict(), "command": target})
        return out

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(one, svalues))
    results.sort(key=lambda d: d["s"])
    run.csv("sweep.csv", ["s", target], [(d["s"], d["value"]) for d in results])
    out = {"target": target, "points": len(results)}
    run.json("sweep.json", out)
    return out


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hessvar",
        description="Radial variational toolkit for the k-Hessian operator",
    )
    ap.add_argument("--version", action="version", version=f"hessvar {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--s", type=float, default=None)
        p.add_argument("--R", type=float, default=None)
        p.add_argument("--N", type=int, default=None)
        p.add_argument("--gamma", type=float, default=None)
        p.add_argument("--flow-tol", dest="flow_tol", type=float, default=None)
        p.add_argument("--shoot-tol", dest="shoot_tol", type=float, default=None)
        p.add_argument("--eigen-tol", dest="eigen_tol", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output-dir", dest="output_dir", type=str, default=None)
        p.add_argument("--nl", type=str, default=None, help="JSON source-term spec")
        p.add_argument("--emit-plotscript", action="store_true")

    p = sub.add_parser("exponent", help="critical exponent, s0, and regime branch")
    common(p)
    p.add_argument("--kstar-surrogate", type=float, default=100.0)

    p = sub.add_parser("quotient", help="sharp constant of the extremal family")
    common(p)
    p.add_argument("--lam", type=float, default=1.0)

    p = sub.add_parser("extremal", help="sample the extremal profile on a ball")
    common(p)
    p.add_argument("--lam", type=float, default=1.0)

    p = sub.add_parser("flow", help="descent flow to the steady state")
    common(p)
    p.add_argument("--init-amplitude", type=float, default=0.5)
    p.add_argument("--max-steps", type=int, default=200_000)
    p.add_argument("--trace-every", type=int, default=1)

    p = sub.add_parser("eigen", help="principal eigenvalue by inverse iteration")
    common(p)

    p = sub.add_parser("solve", help="sublinear or superlinear Dirichlet problem")
    common(p)
    p.add_argument("--regime", choices=["sublinear", "superlinear"], required=True)
    p.add_argument("--p", type=float, required=True, help="power of the source |z|^p")
    p.add_argument("--m", type=float, default=1000.0, help="sublinear regularization level")

    p = sub.add_parser("nonexist", help="nonexistence mechanism demonstrator")
    common(p)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--deltas", type=str, default="1e-2,1e-3,1e-4")
    p.add_argument("--eta", type=float, default=0.5)

    p = sub.add_parser("sweep", help="parameter sweep over s")
    common(p)
    p.add_argument("--s-range", dest="s_range", type=str, required=True,
                   help="start:stop:step")
    p.add_argument("target", choices=["quotient", "eigen", "exponent"])
    p.add_argument("--workers", type=int, default=4)

    return ap


NO_FILES = {"exponent"}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.command in NO_FILES:
            cmd_exponent(cfg, args)
            return 0
        run = report.RunDir(cfg.output_dir)
        handler = {
            "quotient": cmd_quotient,
            "extremal": cmd_extremal,
            "flow": cmd_flow,
            "eigen": cmd_eigen,
            "solve": cmd_solve,
            "nonexist": cmd_nonexist,
            "sweep": cmd_sweep,
        }[args.command]
        summary = handler(cfg, args, run)
        if args.emit_plotscript:
            _emit_plotscript(run)
        run.json("config.json", cfg.to_dict())
        run.manifest({**cfg.to_dict(), "command": args.command})
        print(json.dumps(report._jsonable(summary), sort_keys=True))
        return 0
    except ConfigError as exc:
        print(json.dumps({"error": {"type": "config", "message": str(exc)}}), file=sys.stderr)
        return 2
    except HessvarError as exc:
        print(
            json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
            file=sys.stderr,
        )
        return 3


if __name__ == "__main__":
    sys.exit(main())
