"""Receding-horizon simulation against the true plant, and scheme comparison."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .exceptions import GenerationError, InputError
from .lti import LtiSystem, estimate_initial_state, final_state, simulate
from .ocp import OcpSpec, assemble, recover_trajectory
from .predictors import Predictor, model_predictor
from .qp import INFEASIBLE, OPTIMAL, ActiveSetSolver
from .trajectory import Trajectory

log = logging.getLogger(__name__)

CONVERGED = "converged"
HORIZON_EXHAUSTED = "horizon_exhausted"
ABORTED = "aborted"

PAST_TOL = 1e-8


@dataclass
class StepRecord:
    t: int
    w: np.ndarray
    u: np.ndarray
    predicted: np.ndarray
    cost: float
    status: str
    solve_time: float
    iterations: int

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("w", "u", "predicted"):
            d[k] = np.asarray(d[k]).tolist()
        return d


@dataclass
class ClosedLoopLog:
    scheme: str
    steps: list[StepRecord] = field(default_factory=list)
    status: str = HORIZON_EXHAUSTED
    message: str = ""

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def w(self) -> np.ndarray:
        return np.array([s.w for s in self.steps])

    @property
    def costs(self) -> np.ndarray:
        return np.array([s.cost for s in self.steps])

    @property
    def solve_times(self) -> np.ndarray:
        return np.array([s.solve_time for s in self.steps])

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps({"scheme": self.scheme, "status": self.status,
                                 "message": self.message, "steps": len(self.steps)}) + "\n")
            for s in self.steps:
                fh.write(json.dumps(s.to_dict()) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "ClosedLoopLog":
        lines = Path(path).read_text().splitlines()
        head = json.loads(lines[0])
        steps = []
        for line in lines[1:]:
            d = json.loads(line)
            steps.append(StepRecord(d["t"], np.array(d["w"]), np.array(d["u"]),
                                    np.array(d["predicted"]), d["cost"], d["status"],
                                    d["solve_time"], d["iterations"]))
        return cls(head["scheme"], steps, head["status"], head.get("message", ""))

    def to_csv(self, path, m: int) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            if not self.steps:
                wr.writerow(["t", "cost", "status", "solve_time", "iterations"])
                return
            q = len(self.steps[0].w)
            wr.writerow(["t"] + [f"u_{i + 1}" for i in range(m)] + [f"y_{i + 1}" for i in range(q - m)]
                        + ["cost", "status", "solve_time", "iterations"])
            for s in self.steps:
                wr.writerow([s.t, *map(repr, map(float, s.w)), repr(s.cost), s.status,
                             repr(s.solve_time), s.iterations])


def _verified_state(sys: LtiSystem, past: np.ndarray) -> np.ndarray:
    x_start, err = estimate_initial_state(sys, Trajectory(past, sys.m))
    if err > PAST_TOL:
        raise InputError(f"initial past window is not a trajectory of the plant (residual {err:.2e})")
    return final_state(sys, x_start, past[:, : sys.m])


def run(sys: LtiSystem, pred: Predictor, spec: OcpSpec, init_past, max_steps: int = 30,
        conv_tol: float | None = 1e-4, x0=None, solver=None) -> ClosedLoopLog:
    """Closed-loop receding-horizon control of ``sys`` using ``pred``.

    At each step the condensed problem is built from the last ``n`` measured
    samples, solved warm-started from the previous active set, and the first
    predicted input is applied to the plant.

    Args:
        init_past: ``(n, q)`` array of measurements before ``t = 0``.
        conv_tol: stop once the last ``n`` measurements are all within this
            distance of the set point; ``None`` disables the check.
        x0: plant state at ``t = 0``; reconstructed from ``init_past`` if omitted.
        solver: anything with ``solve(problem, warm)``; defaults to the built-in
            active-set solver.
    """
    n, q, m = spec.n, spec.q, sys.m
    past = np.array(init_past, dtype=float).reshape(n, q)
    x_rec = _verified_state(sys, past)
    x = x_rec if x0 is None else np.asarray(x0, dtype=float).reshape(sys.n)
    solver = ActiveSetSolver() if solver is None else solver
    out = ClosedLoopLog(pred.tag)
    warm = None
    for t in range(max_steps):
        cqp = assemble(pred, spec, past)
        sol = solver.solve(cqp.qp, warm)
        if sol.status != OPTIMAL:
            out.status = INFEASIBLE if sol.status == INFEASIBLE else ABORTED
            out.message = f"t={t}: solver returned {sol.status}"
            log.info("%s run stopped: %s", pred.tag, out.message)
            return out
        warm = sol.active_set
        _, future = recover_trajectory(cqp, sol.x)
        u = future[0, :m].copy()
        y = sys.C @ x + sys.D @ u
        w = np.concatenate([u, y])
        x = sys.A @ x + sys.B @ u
        out.steps.append(StepRecord(t, w, u, np.vstack([past, future]), sol.objective,
                                    sol.status, sol.solve_time, sol.iterations))
        past = np.vstack([past[1:], w])
        if conv_tol is not None and np.all(np.linalg.norm(past - spec.w_s, axis=1) <= conv_tol):
            out.status = CONVERGED
            return out
    out.status = HORIZON_EXHAUSTED
    return out


def run_model_mpc(sys: LtiSystem, spec: OcpSpec, init_past, **kwargs) -> ClosedLoopLog:
    """Same problem, but predicting with the true ``(A, B, C, D)``."""
    return run(sys, model_predictor(sys, spec.L, spec.n), spec, init_past, **kwargs)


@dataclass(frozen=True)
class EquivalenceReport:
    max_w_deviation: float
    max_cost_deviation: float
    steps_compared: int
    truncated: bool
    statuses: tuple[str, ...]

    def ok(self, w_tol: float = 1e-5, cost_tol: float = 1e-6) -> bool:
        return (not self.truncated and self.max_w_deviation <= w_tol
                and self.max_cost_deviation <= cost_tol)


def cost_deviation(a, b, floor: float = 1.0) -> float:
    """Relative difference with a unit floor so near-zero costs compare absolutely."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def check_equivalence(logs, cost_floor: float = 1.0) -> EquivalenceReport:
    """Pairwise worst-case difference of measured trajectories and optimal costs.

    Cost differences are relative to ``max(|a|, |b|, cost_floor)``.
    """
    logs = list(logs)
    if not logs:
        return EquivalenceReport(0.0, 0.0, 0, False, ())
    lengths = [len(lg) for lg in logs]
    k = min(lengths)
    wdev = cdev = 0.0
    for a, b in combinations(logs, 2):
        if k:
            wdev = max(wdev, float(np.max(np.abs(a.w[:k] - b.w[:k]))))
            cdev = max(cdev, cost_deviation(a.costs[:k], b.costs[:k], cost_floor))
    return EquivalenceReport(wdev, cdev, k, len(set(lengths)) > 1,
                             tuple(lg.status for lg in logs))


def sample_initial_past(sys: LtiSystem, lb, ub, seed=None, max_retries: int = 100,
                        n: int | None = None):
    """Draw ``x ~ U(-1, 1)^n`` and ``n`` inputs ``~ U(-1, 1)^m``, simulate the past window.

    Returns:
        ``(past, x0)``: the ``(n, q)`` window and the plant state at ``t = 0``.
    """
    n = sys.n if n is None else n
    rng = np.random.default_rng(seed)
    lb, ub = np.asarray(lb, float), np.asarray(ub, float)
    for _ in range(max_retries):
        x_start = rng.uniform(-1, 1, sys.n)
        u = rng.uniform(-1, 1, (n, sys.m))
        past = simulate(sys, x_start, u).w
        if np.all(past >= lb) and np.all(past <= ub):
            return past, final_state(sys, x_start, u)
    raise GenerationError(f"no in-box initial window after {max_retries} draws")
