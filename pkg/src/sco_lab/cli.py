"""Command-line front door: geometry dumps, bound evaluation, verification
suites, Monte Carlo experiments, and rate fitting.

Every artifact directory gets a manifest.json echoing the fully resolved
configuration (including the master seed and tool version), so any run can
be reproduced byte-for-byte from its manifest. Exit codes: 0 success,
1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bounds import BoundQuery, evaluate_bounds
from .experiments import (
    ExperimentConfig,
    coin_instance_spec,
    fit_rate,
    gadget_instance_spec,
    quad_instance_spec,
    rate_fit_to_dict,
    run_experiment,
    tent_instance_spec,
    write_experiment_artifacts,
)
from .families import (
    BlockGadgetFamily,
    CoinLinearFamily,
    Feasible,
    LogisticFamily,
    QuadGaussianFamily,
    SmallKappaQuadFamily,
    TentFamily,
    block_gadget_window_check,
    verify_regularity,
)
from .lattice import (
    count_integer_points_l2,
    enumerate_integer_points,
    l2_integer_packing,
    sparse_sign_packing,
    write_packing_csv,
    write_points_csv,
)
from .solvers import EmpiricalSummary, erm_block_gadget, erm_enumerated, \
    erm_quadratic_integer_box


def _parse_radius(text: str) -> float:
    return math.inf if text in ("inf", "Inf", "INF") else float(text)


def _write_manifest(out_dir: str, command: str, resolved: dict):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"tool": "sco-lab", "version": __version__, "command": command,
                "config": resolved}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_geometry(args) -> int:
    if args.action == "count":
        print(count_integer_points_l2(args.d, args.R))
        return 0
    if args.action == "enumerate":
        pts = enumerate_integer_points(args.d, args.R, args.norm)
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, "points.csv")
            write_points_csv(pts, path)
            _write_manifest(args.out, "geometry enumerate",
                            {"d": args.d, "R": args.R, "norm": args.norm})
            print(f"wrote {len(pts)} points to {path}")
        else:
            for p in pts.points:
                print(",".join(str(c) for c in p))
        return 0
    if args.action == "packing":
        packing = l2_integer_packing(args.d, args.R, seed=args.seed,
                                     target_size=args.target_size)
    else:  # sign-packing
        packing = sparse_sign_packing(args.d, args.s, args.target_size,
                                      seed=args.seed)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{args.action}.csv")
        write_packing_csv(packing, path)
        _write_manifest(args.out, f"geometry {args.action}",
                        {"d": args.d, "R": getattr(args, "R", None),
                         "s": getattr(args, "s", None),
                         "target_size": args.target_size, "seed": args.seed})
        print(f"wrote packing of size {len(packing)} to {path}")
    else:
        rows = packing.vectors if hasattr(packing, "vectors") else packing.centers
        for row in rows:
            print(",".join(str(c) for c in row))
    return 0


def _cmd_bounds(args) -> int:
    q = BoundQuery(d=args.d, R=args.R, epsilon=args.eps, delta=args.delta,
                   mu=args.mu, L=args.L, sigma=args.sigma)
    out = evaluate_bounds(q, constant=args.constant)
    text = json.dumps(out, indent=2, sort_keys=True)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bounds.json"), "w") as fh:
            fh.write(text + "\n")
        _write_manifest(args.out, "bounds", out["query"])
    return 0


def _verification_families(seed: int):
    packing = l2_integer_packing(8, 3, seed=seed, target_size=8)
    return [
        CoinLinearFamily(d=4, R=2.0, rho=0.5, b=(1, -1, 1, -1)),
        CoinLinearFamily(d=4, R=2.0, rho=0.25, b=(1,), mode="confidence"),
        TentFamily(packing=packing, hidden=1, rho=0.5),
        QuadGaussianFamily(d=3, mu=1.0, sigma=1.0, theta=(0.5, -1.0, 2.0)),
        SmallKappaQuadFamily(d=4, mu=1.0, gamma=1 / 80, b=(1, -1, -1, 1),
                             sigma=1.0),
        BlockGadgetFamily(d=4, mu=1.0, L=64.0, tau=2, gamma=1 / 24,
                          b=(1, -1), sigma=1.0),
        LogisticFamily(d=3, mu=0.5, M=2.0, eta=0.1),
    ]


def _verify_families(trials: int, seed: int) -> bool:
    ok = True
    for fam in _verification_families(seed):
        report = verify_regularity(fam, trials=trials, seed=seed)
        print(report.summary())
        ok = ok and report.ok
    return ok


def _verify_gadget() -> bool:
    ok = True
    for L in (64.0, 256.0):
        for tau in (1, 2):
            rep = block_gadget_window_check(1.0, L, tau, 1 / 24)
            line = f"gadget window L={L} tau={tau}: " + \
                ("PASS" if rep["ok"] else f"FAIL {rep}")
            print(line)
            ok = ok and rep["ok"]
    return ok


def _verify_solvers(trials: int, seed: int) -> bool:
    from .lattice import enumerate_integer_points as enum

    rng = np.random.default_rng(seed)
    pts = {d: enum(d, 3, "linf").points for d in (1, 2, 3, 4)}
    ok = True
    for _ in range(trials):
        d = int(rng.integers(1, 5))
        mu = float(rng.uniform(0.3, 3))
        zbar = rng.normal(0, 2, size=d)
        fam = QuadGaussianFamily(d=d, mu=mu, sigma=1.0, theta=(0.0,) * d)
        fast = erm_quadratic_integer_box(zbar, mu, 3)
        slow, _ = erm_enumerated(EmpiricalSummary(fam.tag, 5, zbar), fam, pts[d])
        ok = ok and fast.tolist() == slow.tolist()
    for _ in range(trials):
        d = 2 * int(rng.integers(1, 3))
        fam = BlockGadgetFamily(d=d, mu=1.0, L=64.0, tau=int(rng.integers(1, 3)),
                                gamma=float(rng.uniform(0.005, 1 / 24)),
                                b=tuple(rng.integers(0, 2, size=d // 2) * 2 - 1),
                                sigma=1.0)
        zbar = rng.normal(0, 3, size=d)
        fast = erm_block_gadget(zbar, fam, 3)
        slow, _ = erm_enumerated(EmpiricalSummary(fam.tag, 5, zbar), fam, pts[d])
        ok = ok and fast.tolist() == slow.tolist()
    print(f"solver oracle equivalence ({2 * trials} instances): "
          + ("PASS" if ok else "FAIL"))
    return ok


def _cmd_verify(args) -> int:
    ok = True
    if args.suite in ("families", "all"):
        ok = _verify_families(args.trials, args.seed) and ok
    if args.suite in ("gadget", "all"):
        ok = _verify_gadget() and ok
    if args.suite in ("solvers", "all"):
        ok = _verify_solvers(args.trials, args.seed) and ok
    print("verification: " + ("PASS" if ok else "FAIL"))
    return 0 if ok else 1


def _build_family_spec(args) -> dict:
    fam = args.family
    if fam == "coin":
        return coin_instance_spec(args.d, args.R, args.eps)
    if fam == "coin-confidence":
        return coin_instance_spec(args.d, args.R, args.eps, mode="confidence")
    if fam == "tent":
        packing = l2_integer_packing(args.d, args.R, seed=args.seed,
                                     target_size=args.target_size)
        return tent_instance_spec(packing.to_spec(), packing.radius, args.eps)
    if fam == "quad":
        return quad_instance_spec(args.d, args.mu or 1.0, args.sigma or 1.0)
    if fam == "gadget":
        return gadget_instance_spec(args.d, args.mu or 1.0, args.L or 64.0,
                                    int(args.R), args.eps,
                                    sigma=args.sigma or 1.0)
    if fam == "small-kappa":
        mu = args.mu or 1.0
        return {"kind": "small_kappa_quad", "d": args.d, "mu": mu,
                "gamma": mu / 80, "sigma": args.sigma or 1.0}
    raise ValueError(f"unknown family {fam!r}")


def _default_feasible(args, family_spec: dict) -> dict:
    kind = family_spec["kind"]
    if kind == "tent":
        return Feasible.l2_ball(args.R).to_spec()
    if kind == "coin_linear":
        return Feasible.box_continuous(args.R).to_spec()
    if args.rule == "erm_continuous":
        return Feasible.all_space().to_spec()
    return Feasible.box_integer(args.R).to_spec()


def _cmd_simulate(args) -> int:
    spec = {}
    if args.config:
        with open(args.config) as fh:
            spec = json.load(fh)
    # flags override config-file values
    if args.rule:
        spec["rule"] = args.rule
    if args.eps is not None:
        spec["epsilon"] = args.eps
    if args.delta is not None:
        spec["delta"] = args.delta
    if args.m_grid:
        spec["m_grid"] = [int(v) for v in args.m_grid.split(",")]
    if args.trials is not None:
        spec["trials"] = args.trials
    if args.seed is not None:
        spec["master_seed"] = args.seed
    if args.family:
        spec["family"] = _build_family_spec(args)
        spec.setdefault("experiment_id",
                        f"{args.family}-{spec.get('rule', 'erm')}"
                        f"-eps{spec.get('epsilon')}")
        spec["feasible"] = _default_feasible(args, spec["family"])
    missing = [k for k in ("experiment_id", "family", "feasible", "rule",
                           "epsilon", "delta", "m_grid", "trials",
                           "master_seed") if k not in spec]
    if missing:
        print(f"simulate: missing configuration keys {missing} "
              f"(give --config or --family plus flags)", file=sys.stderr)
        return 2
    config = ExperimentConfig.from_spec(spec)
    outcome = run_experiment(config, threads=args.threads)
    out_dir = os.path.join(args.out, config.experiment_id)
    write_experiment_artifacts(config, outcome, out_dir,
                               extra_manifest={"command": "simulate",
                                               "threads_used": args.threads})
    s = outcome["summary"]
    print(json.dumps({"experiment_id": s["experiment_id"], "m_hat": s["m_hat"],
                      "per_m": s["per_m"]}, indent=2))
    print(f"artifacts in {out_dir}")
    return 0


def _cmd_ratefit(args) -> int:
    pairs = []
    sources = []
    for path in args.inputs:
        with open(path) as fh:
            summary = json.load(fh)
        if summary.get("m_hat") is None:
            print(f"ratefit: {path} has no m_hat (search did not qualify)",
                  file=sys.stderr)
            return 1
        pairs.append((summary["epsilon"], summary["m_hat"]))
        sources.append(os.path.abspath(path))
    fit = fit_rate(pairs)
    out = rate_fit_to_dict(fit)
    out["sources"] = sources
    text = json.dumps(out, indent=2, sort_keys=True)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "ratefit.json"), "w") as fh:
            fh.write(text + "\n")
        _write_manifest(args.out, "ratefit", {"inputs": sources})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sco-lab",
        description="Sample-complexity laboratory for stochastic optimization "
                    "over integer and continuous feasible sets.")
    parser.add_argument("--version", action="version",
                        version=f"sco-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geometry", help="enumeration, counting and packings")
    g.add_argument("action", choices=["enumerate", "count", "packing",
                                      "sign-packing"])
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--R", type=_parse_radius, default=None)
    g.add_argument("--s", type=int, default=None, help="support size")
    g.add_argument("--norm", choices=["l2", "linf"], default="l2")
    g.add_argument("--target-size", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None)
    g.set_defaults(func=_cmd_geometry)

    b = sub.add_parser("bounds", help="evaluate every theoretical formula")
    b.add_argument("--d", type=int, required=True)
    b.add_argument("--R", type=_parse_radius, required=True)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--delta", type=float, required=True)
    b.add_argument("--mu", type=float, default=None)
    b.add_argument("--L", type=float, default=None)
    b.add_argument("--sigma", type=float, default=None)
    b.add_argument("--constant", type=float, default=1.0)
    b.add_argument("--out", default=None)
    b.set_defaults(func=_cmd_bounds)

    v = sub.add_parser("verify", help="regularity and solver-oracle suites")
    v.add_argument("--suite", choices=["families", "gadget", "solvers", "all"],
                   default="all")
    v.add_argument("--trials", type=int, default=60)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    s.add_argument("--config", default=None,
                   help="JSON file mirroring ExperimentConfig; flags override")
    s.add_argument("--family",
                   choices=["coin", "coin-confidence", "tent", "quad", "gadget",
                            "small-kappa"], default=None)
    s.add_argument("--rule",
                   choices=["erm", "erm_continuous", "majority", "sgd"],
                   default=None)
    s.add_argument("--d", type=int, default=4)
    s.add_argument("--R", type=_parse_radius, default=1.0)
    s.add_argument("--eps", type=float, default=None)
    s.add_argument("--delta", type=float, default=None)
    s.add_argument("--mu", type=float, default=None)
    s.add_argument("--L", type=float, default=None)
    s.add_argument("--sigma", type=float, default=None)
    s.add_argument("--m-grid", default=None, help="comma-separated sizes")
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--target-size", type=int, default=8,
                   help="packing size for tent instances")
    s.add_argument("--threads", type=int,
                   default=int(os.environ.get("SCO_LAB_THREADS", "1")))
    s.add_argument("--out", default="out")
    s.set_defaults(func=_cmd_simulate)

    r = sub.add_parser("ratefit", help="fit a rate exponent from summaries")
    r.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="summary.json files from simulate runs")
    r.add_argument("--out", default=None)
    r.set_defaults(func=_cmd_ratefit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
