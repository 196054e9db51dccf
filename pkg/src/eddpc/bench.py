"""Analytic comparison table and the random-system benchmark across schemes."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .closed_loop import check_equivalence, run, sample_initial_past
from .exceptions import EddpcError, InputError
from .lti import collect, random_system
from .ocp import OcpSpec
from .predictors import build_predictor
from .trajectory import SCHEMES, min_data_length, regressor_dim

log = logging.getLogger(__name__)

WORKERS_ENV = "EDDPC_WORKERS"
DESK_ORDERS = (4, 6, 8)
FULL_ORDERS = (4, 6, 8, 10, 12, 14)


def analytic_table(m: int, n: int, L: int, lag: int | None = None, T_ini: int | None = None,
                   T: dict | None = None) -> list[dict]:
    """Minimum data length and regressor size for every scheme.

    ``lag`` defaults to its upper bound ``n`` and ``T_ini`` to ``n``. The
    regressor size is evaluated at ``T[scheme]`` when given, else at the minimum.
    """
    lag = n if lag is None else lag
    T_ini = n if T_ini is None else T_ini
    rows = []
    for s in SCHEMES:
        t_min = min_data_length(s, m, n, lag=lag, L=L, T_ini=T_ini)
        t_used = t_min if T is None or s not in T else int(T[s])
        rows.append({"scheme": s, "m": m, "n": n, "lag": lag, "L": L, "T_ini": T_ini,
                     "min_T": t_min, "T": t_used,
                     "dim": regressor_dim(s, m, n, L, T=t_used, T_ini=T_ini)})
    return rows


def benchmark_setting(n: int) -> dict:
    """``p = m = n - 2``, ``L = 2n``, ``T_ini = n``; eDDPC uses the lag bound ``n``."""
    if n < 3:
        raise InputError(f"order n = {n} leaves no inputs (m = n - 2)")
    m = n - 2
    return {"m": m, "p": m, "L": 2 * n, "T_ini": n}


@dataclass
class BenchConfig:
    orders: tuple[int, ...] = DESK_ORDERS
    systems: int = 10
    seed: int = 0
    max_steps: int = 30
    conv_tol: float | None = 1e-4
    bound: float = 5.0
    kappa_max: float | None = None
    workers: int | None = None

    def __post_init__(self):
        self.orders = tuple(int(n) for n in self.orders)
        for n in self.orders:
            benchmark_setting(n)
        if self.systems < 1:
            raise InputError("systems per order must be positive")

    @classmethod
    def full_scale(cls, **kw) -> "BenchConfig":
        return cls(orders=FULL_ORDERS, systems=100, **kw)


@dataclass
class SchemeRow:
    n: int
    scheme: str
    T: int
    dim: int
    avg_time: float = float("nan")
    max_time: float = float("nan")
    systems_ok: int = 0
    failures: dict = field(default_factory=dict)
    max_deviation: float = 0.0


@dataclass
class BenchReport:
    rows: list[SchemeRow]
    config: dict
    systems: list[dict] = field(default_factory=list)

    def row(self, n: int, scheme: str) -> SchemeRow:
        for r in self.rows:
            if r.n == n and r.scheme == scheme:
                return r
        raise KeyError((n, scheme))

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": [asdict(r) for r in self.rows],
                "systems": self.systems}

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.json").write_text(json.dumps(self.to_dict(), indent=1))
        with open(out / "bench.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "scheme", "T", "dim", "avg_time_ms", "max_time_ms", "systems_ok",
                         "failures", "max_deviation"])
            for r in self.rows:
                wr.writerow([r.n, r.scheme, r.T, r.dim, f"{1e3 * r.avg_time:.4f}",
                             f"{1e3 * r.max_time:.4f}", r.systems_ok, sum(r.failures.values()),
                             f"{r.max_deviation:.3e}"])
        # whitespace-separated timing curves, one line per order
        with open(out / "timing.dat", "w") as fh:
            fh.write("# n " + " ".join(SCHEMES) + "  (avg ms)\n")
            for n in self.config["orders"]:
                fh.write(f"{n} " + " ".join(f"{1e3 * self.row(n, s).avg_time:.6f}" for s in SCHEMES)
                         + "\n")


def _seeds(seed: int, n: int, idx: int):
    return np.random.SeedSequence([seed, n, idx]).spawn(3)


def run_system(n: int, idx: int, cfg: BenchConfig) -> dict:
    """Full pipeline for one random system: data, four predictors, four closed loops."""
    setting = benchmark_setting(n)
    m, p, L, T_ini = setting["m"], setting["p"], setting["L"], setting["T_ini"]
    s_sys, s_data, s_init = _seeds(cfg.seed, n, idx)
    sys = random_system(n, m, p, seed=s_sys)
    table = analytic_table(m, n, L, T_ini=T_ini)
    T = {r["scheme"]: r["T"] for r in table}
    data = collect(sys, max(T.values()), seed=s_data)
    spec = OcpSpec.box(L, n, m + p, bound=cfg.bound)
    past, x0 = sample_initial_past(sys, spec.lb, spec.ub, seed=s_init)
    kw = {} if cfg.kappa_max is None else {"kappa_max": cfg.kappa_max}

    out = {"n": n, "index": idx, "lag": sys.lag, "schemes": {}}
    logs = []
    for s in SCHEMES:
        rec = {"T": T[s], "status": "ok", "times": []}
        try:
            pred = build_predictor(s, data.window(0, T[s] - 1), L, n, lag=sys.lag, T_ini=T_ini, **kw)
            rec["dim"] = pred.regressor_dim
            lg = run(sys, pred, spec, past, max_steps=cfg.max_steps, conv_tol=cfg.conv_tol, x0=x0)
        except EddpcError as exc:
            rec["status"] = exc.category
            rec["message"] = str(exc)
            out["schemes"][s] = rec
            continue
        if not lg.steps:
            rec["status"] = lg.status
            rec["message"] = lg.message
        else:
            times = lg.solve_times
            rec["times"] = (times[1:] if times.size > 1 else times).tolist()
            rec["closed_loop"] = lg.status
            logs.append(lg)
        out["schemes"][s] = rec
    rep = check_equivalence(logs)
    out["deviation"] = rep.max_w_deviation if len(logs) > 1 else 0.0
    out["cost_deviation"] = rep.max_cost_deviation if len(logs) > 1 else 0.0
    return out


def _run_system_args(args):
    return run_system(*args)


def _worker_count(cfg: BenchConfig) -> int:
    if cfg.workers is not None:
        return max(1, int(cfg.workers))
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise InputError(f"{WORKERS_ENV} must be an integer") from None


def run_benchmark(cfg: BenchConfig | None = None) -> BenchReport:
    """Run every (order, system) pipeline and aggregate per (order, scheme).

    Averages are taken over systems of the per-system mean solve time (first
    step excluded as warm-up); the maximum is over all steps of all systems.
    Systems where a scheme fails are counted in ``failures`` and left out of
    that scheme's averages.
    """
    cfg = BenchConfig() if cfg is None else cfg
    jobs = [(n, i, cfg) for n in cfg.orders for i in range(cfg.systems)]
    workers = _worker_count(cfg)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_system_args, jobs))
    else:
        results = [run_system(*j) for j in jobs]
    results.sort(key=lambda r: (r["n"], r["index"]))

    rows = []
    for n in cfg.orders:
        setting = benchmark_setting(n)
        table = {r["scheme"]: r for r in analytic_table(setting["m"], n, setting["L"],
                                                         T_ini=setting["T_ini"])}
        mine = [r for r in results if r["n"] == n]
        for s in SCHEMES:
            row = SchemeRow(n, s, table[s]["T"], table[s]["dim"])
            means, peak = [], []
            for r in mine:
                rec = r["schemes"][s]
                if rec["status"] != "ok":
                    row.failures[rec["status"]] = row.failures.get(rec["status"], 0) + 1
                    continue
                if rec["times"]:
                    means.append(float(np.mean(rec["times"])))
                    peak.append(float(np.max(rec["times"])))
                row.max_deviation = max(row.max_deviation, r["deviation"])
            row.systems_ok = len(means)
            if means:
                row.avg_time, row.max_time = float(np.mean(means)), float(np.max(peak))
            rows.append(row)
    conf = asdict(cfg)
    conf["workers"] = workers
    return BenchReport(rows, conf, results)
