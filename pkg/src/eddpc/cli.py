"""Command-line front end.

Exit codes: 0 success, 2 parse/usage, 3 dimension, 4 excitation,
5 infeasible, 6 solver, 7 scheme mismatch. Errors are also reported on
stderr as one JSON line ``{"error": <category>, "message": ...}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys as _sys
from pathlib import Path

from .bench import BenchConfig, analytic_table, benchmark_setting, run_benchmark
from .closed_loop import ABORTED, check_equivalence, run, sample_initial_past
from .exceptions import (
    ConfigurationError,
    EddpcError,
    EquivalenceError,
    InfeasibleError,
    InsufficientExcitationError,
    SolverError,
)
from .kernel import DEFAULT_KAPPA_MAX
from .lti import LtiSystem, collect, random_system
from .ocp import OcpSpec
from .predictors import Predictor, build_predictor
from .qp import INFEASIBLE
from .trajectory import SCHEMES, Trajectory, canonical_scheme, is_pe, min_data_length

EXIT_CODES = {"parse": 2, "dimension": 3, "excitation": 4, "infeasible": 5, "solver": 6,
              "mismatch": 7}


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=1)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _spec(args, q: int, n: int, L: int) -> OcpSpec:
    return OcpSpec.box(L, n, q, bound=args.bound)


def cmd_gen_sys(args):
    n = args.order
    m = args.inputs if args.inputs is not None else max(1, n - 2)
    p = args.outputs if args.outputs is not None else m
    sys = random_system(n, m, p, seed=args.seed)
    sys.save(args.out)
    print(json.dumps({"n": sys.n, "m": sys.m, "p": sys.p, "lag": sys.lag, "out": args.out}))


def cmd_collect(args):
    sys = LtiSystem.load(args.system)
    bound = min_data_length("eDDPC", sys.m, sys.n, lag=sys.lag)
    if args.samples < bound:
        raise InsufficientExcitationError(
            f"T = {args.samples} is below the minimum {bound} = (m+1)(lag+n+1)-1")
    traj = collect(sys, args.samples, seed=args.seed)
    if not is_pe(traj.u, sys.lag + 1 + sys.n):
        raise InsufficientExcitationError("collected input is not persistently exciting")
    traj.to_csv(args.out)
    print(json.dumps({"T": traj.T, "m": traj.m, "p": traj.p, "out": args.out}))


def cmd_preprocess(args):
    traj = Trajectory.from_csv(args.data)
    if args.system:
        sys = LtiSystem.load(args.system)
        n, lag = sys.n, sys.lag
    else:
        if args.order is None:
            raise ConfigurationError("preprocess needs --order or --system")
        n = args.order
        lag = n if args.lag is None else args.lag
    if args.lag is not None:
        lag = args.lag
    L = args.horizon if args.horizon is not None else 2 * n
    pred = build_predictor(args.scheme, traj, L, n, lag=lag, T_ini=args.tini,
                           kappa_max=args.kappa_max)
    pred.save(args.out)
    info = {"scheme": pred.tag, "rows": pred.matrix.shape[0], "cols": pred.regressor_dim,
            "T": traj.T, "out": args.out}
    if pred.details is not None:
        info["gamma_cond"] = pred.details.gamma_cond
    print(json.dumps(info))


def cmd_run(args):
    sys = LtiSystem.load(args.system)
    pred = Predictor.load(args.predictor)
    spec = _spec(args, pred.q, pred.n, pred.L)
    past, x0 = sample_initial_past(sys, spec.lb, spec.ub, seed=args.seed)
    lg = run(sys, pred, spec, past, max_steps=args.steps, conv_tol=args.conv_tol, x0=x0)
    if args.out:
        lg.to_jsonl(args.out)
    if args.csv:
        lg.to_csv(args.csv, sys.m)
    print(json.dumps({"scheme": lg.scheme, "status": lg.status, "steps": len(lg),
                      "final_cost": float(lg.costs[-1]) if len(lg) else None}))
    if lg.status == INFEASIBLE:
        raise InfeasibleError(lg.message or "initial problem infeasible")
    if lg.status == ABORTED:
        raise SolverError(lg.message)


def cmd_compare(args):
    n = args.order
    setting = benchmark_setting(n)
    m, L = setting["m"], args.horizon if args.horizon is not None else setting["L"]
    T_ini = args.tini if args.tini is not None else n
    sys = random_system(n, m, setting["p"], seed=args.seed)
    schemes = [canonical_scheme(s) for s in args.schemes] if args.schemes else list(SCHEMES)
    T = {s: min_data_length(s, m, n, lag=n, L=L, T_ini=T_ini) for s in schemes}
    data = collect(sys, max(T.values()), seed=args.seed + 1)
    spec = _spec(args, m + setting["p"], n, L)
    past, x0 = sample_initial_past(sys, spec.lb, spec.ub, seed=args.seed + 2)
    logs = []
    for s in schemes:
        pred = build_predictor(s, data.window(0, T[s] - 1), L, n, lag=sys.lag, T_ini=T_ini,
                               kappa_max=args.kappa_max)
        logs.append(run(sys, pred, spec, past, max_steps=args.steps, conv_tol=None, x0=x0))
    rep = check_equivalence(logs)
    _emit({"schemes": schemes, "statuses": list(rep.statuses), "steps": rep.steps_compared,
           "max_deviation": rep.max_w_deviation, "max_cost_deviation": rep.max_cost_deviation,
           "truncated": rep.truncated}, args.out)
    if any(lg.status == INFEASIBLE and not lg.steps for lg in logs):
        raise InfeasibleError("initial problem infeasible")
    if not rep.ok(args.tol, args.cost_tol):
        raise EquivalenceError(f"max deviation {rep.max_w_deviation:.3e} exceeds {args.tol}")


def cmd_bench(args):
    kw = dict(seed=args.seed, max_steps=args.steps, kappa_max=args.kappa_max)
    if args.full:
        cfg = BenchConfig.full_scale(**kw)
    else:
        cfg = BenchConfig(orders=tuple(args.order or (4, 6, 8)), systems=args.systems, **kw)
    rep = run_benchmark(cfg)
    rep.save(args.out)
    for r in rep.rows:
        print(f"n={r.n:<3d} {r.scheme:<9s} T={r.T:<4d} dim={r.dim:<4d} "
              f"avg={1e3 * r.avg_time:8.3f} ms  max={1e3 * r.max_time:8.3f} ms  "
              f"ok={r.systems_ok} fail={sum(r.failures.values())} dev={r.max_deviation:.1e}")


def cmd_table1(args):
    n = args.order
    m = args.inputs if args.inputs is not None else benchmark_setting(n)["m"]
    L = args.horizon if args.horizon is not None else 2 * n
    rows = analytic_table(m, n, L, lag=args.lag, T_ini=args.tini)
    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=1) + "\n")
    for r in rows:
        print(f"{r['scheme']:<9s} min_T={r['min_T']:<5d} dim={r['dim']}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eddpc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, *names):
        if "seed" in names:
            p.add_argument("--seed", type=int, default=0)
        if "out" in names:
            p.add_argument("--out")
        if "kappa" in names:
            p.add_argument("--kappa-max", type=float, default=DEFAULT_KAPPA_MAX)
        if "bound" in names:
            p.add_argument("--bound", type=float, default=5.0, help="box |w_i| <= bound")
        return p

    p = common(sub.add_parser("gen-sys", help="random stable system to JSON"), "seed")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--inputs", type=int)
    p.add_argument("--outputs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_sys)

    p = common(sub.add_parser("collect", help="simulate a data experiment to CSV"), "seed")
    p.add_argument("--system", required=True)
    p.add_argument("--samples", "-T", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = common(sub.add_parser("preprocess", help="build a predictor from data"), "kappa")
    p.add_argument("--data", required=True)
    p.add_argument("--scheme", default="eddpc", choices=["ddpc", "sddpc", "svd", "eddpc"])
    p.add_argument("--system", help="read n and the lag from a system file")
    p.add_argument("--order", type=int)
    p.add_argument("--lag", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--tini", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = common(sub.add_parser("run", help="closed loop with a stored predictor"), "seed", "bound")
    p.add_argument("--system", required=True)
    p.add_argument("--predictor", required=True)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--conv-tol", type=float, default=1e-4)
    p.add_argument("--out", help="JSON-lines log")
    p.add_argument("--csv", help="CSV summary")
    p.set_defaults(func=cmd_run)

    p = common(sub.add_parser("compare", help="closed-loop equivalence across schemes"),
               "seed", "out", "kappa", "bound")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--horizon", type=int)
    p.add_argument("--tini", type=int)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--scheme", dest="schemes", action="append",
                   choices=["ddpc", "sddpc", "svd", "eddpc"])
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--cost-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_compare)

    p = common(sub.add_parser("bench", help="random-system benchmark"), "seed")
    p.add_argument("--order", type=int, action="append")
    p.add_argument("--systems", type=int, default=10)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--kappa-max", type=float)
    p.add_argument("--full", action="store_true", help="orders 4..14, 100 systems each")
    p.add_argument("--out", default="bench_out")
    p.set_defaults(func=cmd_bench)

    p = common(sub.add_parser("table1", help="analytic data-length / regressor table"), "out")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--inputs", type=int)
    p.add_argument("--lag", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--tini", type=int)
    p.set_defaults(func=cmd_table1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except EddpcError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=_sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(json.dumps({"error": "parse", "message": str(exc)}), file=_sys.stderr)
        return EXIT_CODES["parse"]
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
