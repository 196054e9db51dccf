"""Dense convex QP solver (primal active set, warm-startable).

Solves::

    min  0.5 x'Hx + f'x + c0
    s.t. A_eq x = b_eq
         lb <= G x <= ub

``H`` only needs to be positive semidefinite. Equalities are eliminated with
an SVD null-space parameterization (rank-deficient but consistent rows are
fine); directions along which neither the objective nor any inequality
changes are then projected out, which is what makes the raw Hankel
predictors (whose regressor is not unique) solvable without regularization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from ._linalg import null_space, orth, rank_tolerance
from .exceptions import InputError

KKT_TOL = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"
UNBOUNDED = "unbounded"

# (row index, side) with side +1 for the upper bound and -1 for the lower bound
ActiveSet = tuple[tuple[int, int], ...]


@dataclass(frozen=True, eq=False)
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    G: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    c0: float = 0.0

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        nv = H.shape[0]
        if H.shape != (nv, nv):
            raise InputError(f"H must be square, got {H.shape}")
        asym = np.max(np.abs(H - H.T)) if nv else 0.0
        if asym > 1e-12 * max(1.0, np.max(np.abs(H))):
            raise InputError(f"H is not symmetric (max asymmetry {asym:.2e})")
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if f.shape != (nv,):
            raise InputError(f"f has {f.size} entries, expected {nv}")
        A = np.zeros((0, nv)) if self.A_eq is None else np.asarray(self.A_eq, dtype=float).reshape(-1, nv)
        b = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).reshape(-1)
        G = np.zeros((0, nv)) if self.G is None else np.asarray(self.G, dtype=float).reshape(-1, nv)
        lb = np.full(G.shape[0], -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1)
        ub = np.full(G.shape[0], np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1)
        if b.shape[0] != A.shape[0]:
            raise InputError("A_eq and b_eq row counts differ")
        if lb.shape[0] != G.shape[0] or ub.shape[0] != G.shape[0]:
            raise InputError("G, lb and ub row counts differ")
        if np.any(lb > ub):
            raise InputError("lb > ub for some inequality row")
        vals = dict(H=0.5 * (H + H.T), f=f, A_eq=A, b_eq=b, G=G, lb=lb, ub=ub)
        for k, v in vals.items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)

    @property
    def nv(self) -> int:
        return self.H.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.f @ x + self.c0)

    def to_dict(self) -> dict:
        def enc(a):
            return np.where(np.isfinite(a), a, np.sign(a) * 1e300).tolist() if a.ndim == 1 else a.tolist()
        return {"nv": self.nv, "H": self.H.tolist(), "f": self.f.tolist(), "c0": self.c0,
                "A_eq": self.A_eq.tolist(), "b_eq": self.b_eq.tolist(), "G": self.G.tolist(),
                "lb": enc(self.lb), "ub": enc(self.ub)}

    @classmethod
    def from_dict(cls, doc: dict) -> "QpProblem":
        nv = int(doc["nv"])

        def dec(v):
            a = np.asarray(v, dtype=float)
            return np.where(np.abs(a) >= 1e300, np.sign(a) * np.inf, a)

        return cls(np.asarray(doc["H"]).reshape(nv, nv), doc["f"],
                   np.asarray(doc["A_eq"], dtype=float).reshape(-1, nv), doc["b_eq"],
                   np.asarray(doc["G"], dtype=float).reshape(-1, nv), dec(doc["lb"]), dec(doc["ub"]),
                   float(doc.get("c0", 0.0)))


@dataclass(frozen=True, eq=False)
class QpSolution:
    x: np.ndarray
    objective: float
    status: str
    active_set: ActiveSet = ()
    iterations: int = 0
    solve_time: float = 0.0
    eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lower_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    upper_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float

    @property
    def max(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)

    def ok(self, tol: float = KKT_TOL) -> bool:
        return self.max <= tol


def _inf_norm(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(v))) if v.size else 0.0


def check_kkt(problem: QpProblem, x, eq_multipliers=None, lower=None, upper=None) -> KktReport:
    """Scaled KKT residuals of a candidate primal-dual point.

    Multipliers follow the convention
    ``Hx + f + A_eq' nu + G' (upper - lower) = 0`` with ``lower, upper >= 0``.
    Each residual is divided by the magnitude of the terms that produced it.
    """
    x = np.asarray(x, dtype=float)
    P = problem
    nu = np.zeros(P.A_eq.shape[0]) if eq_multipliers is None else np.asarray(eq_multipliers, float)
    lo = np.zeros(P.G.shape[0]) if lower is None else np.asarray(lower, float)
    up = np.zeros(P.G.shape[0]) if upper is None else np.asarray(upper, float)

    Hx = P.H @ x
    Anu = P.A_eq.T @ nu
    Gmu = P.G.T @ (up - lo)
    grad = Hx + P.f + Anu + Gmu
    stat = _inf_norm(grad) / max(1.0, _inf_norm(Hx), _inf_norm(P.f), _inf_norm(Anu), _inf_norm(Gmu))

    Gx = P.G @ x
    eq_res = _inf_norm(P.A_eq @ x - P.b_eq) / max(1.0, _inf_norm(P.b_eq))
    with np.errstate(invalid="ignore"):
        viol = np.concatenate([np.maximum(P.lb - Gx, 0.0), np.maximum(Gx - P.ub, 0.0)])
    viol = viol[np.isfinite(viol)]
    bounds = np.concatenate([P.lb[np.isfinite(P.lb)], P.ub[np.isfinite(P.ub)]])
    ineq_res = _inf_norm(viol) / max(1.0, _inf_norm(bounds))
    primal = max(eq_res, ineq_res)

    mu_scale = max(1.0, _inf_norm(lo), _inf_norm(up))
    dual = max(0.0, -float(min(lo.min(initial=0.0), up.min(initial=0.0)))) / mu_scale
    with np.errstate(invalid="ignore"):
        slack_lo = np.where(lo != 0, lo * (Gx - P.lb), 0.0)
        slack_up = np.where(up != 0, up * (P.ub - Gx), 0.0)
    comp = _inf_norm(np.concatenate([slack_lo, slack_up]))
    comp /= mu_scale * max(1.0, _inf_norm(Gx))
    return KktReport(stat, primal, dual, comp)


class _Reduced:
    """Problem in the coordinates ``x = x0 + B y`` that remain after eliminating
    equalities and the common null space of the Hessian and the inequalities."""

    def __init__(self, P: QpProblem, feas_tol: float):
        self.infeasible = False
        self.unbounded = False
        nv = P.nv
        if P.A_eq.shape[0]:
            U, s, Vt = np.linalg.svd(P.A_eq, full_matrices=True)
            r = int(np.sum(s > rank_tolerance(P.A_eq.shape, s[0]))) if s.size and s[0] > 0 else 0
            x0 = Vt[:r].T @ ((U[:, :r].T @ P.b_eq) / s[:r])
            if _inf_norm(P.A_eq @ x0 - P.b_eq) > feas_tol * max(1.0, _inf_norm(P.b_eq)):
                self.infeasible = True
            Z = Vt[r:].T
        else:
            x0, Z = np.zeros(nv), np.eye(nv)
        Hz = Z.T @ P.H @ Z
        gz = Z.T @ (P.H @ x0 + P.f)
        Gz = P.G @ Z
        stack = [Hz / max(_inf_norm(Hz), 1e-300)]
        if Gz.size:
            stack.append(Gz / max(_inf_norm(Gz), 1e-300))
        V = orth(np.vstack(stack).T) if Z.shape[1] else np.zeros((0, 0))
        if Z.shape[1] and V.shape[1] < Z.shape[1]:
            resid = gz - V @ (V.T @ gz)
            if _inf_norm(resid) > feas_tol * max(1.0, _inf_norm(gz)):
                # linear decrease along a direction nothing constrains
                self.unbounded = True
        self.x0 = x0
        self.basis = Z @ V if Z.shape[1] else np.zeros((nv, 0))
        self.H = V.T @ Hz @ V
        self.H = 0.5 * (self.H + self.H.T)
        self.g = V.T @ gz
        self.G = Gz @ V
        Gx0 = P.G @ x0
        self.lb = P.lb - Gx0
        self.ub = P.ub - Gx0
        self.row_norm = np.linalg.norm(self.G, axis=1) if self.G.size else np.zeros(P.G.shape[0])
        scale = max(_inf_norm(self.row_norm), 1e-300)
        self.live = self.row_norm > 1e-12 * scale
        # rows that became constant must already be satisfied
        dead = ~self.live
        if np.any(dead & ((self.lb > feas_tol * np.maximum(1, np.abs(self.lb)))
                          | (self.ub < -feas_tol * np.maximum(1, np.abs(self.ub))))):
            self.infeasible = True
        try:
            self.chol = sla.cho_factor(self.H) if self.H.size else None
            d = np.diag(self.chol[0]) if self.chol is not None else np.ones(1)
            if np.min(np.abs(d)) ** 2 < 1e-13 * max(_inf_norm(self.H), 1e-300):
                self.chol = None
            self.pd = True if self.chol is not None or not self.H.size else False
        except np.linalg.LinAlgError:
            self.chol = None
            self.pd = False

    def to_full(self, y):
        return self.x0 + self.basis @ y


class ActiveSetSolver:
    """Primal active-set QP solver.

    Args:
        kkt_tol: tolerance for optimality and feasibility decisions.
        max_iter: iteration cap; defaults to ``50 * (nv + inequality rows)``.
    """

    def __init__(self, kkt_tol: float = KKT_TOL, max_iter: int | None = None):
        self.kkt_tol = kkt_tol
        self.max_iter = max_iter

    def solve(self, problem: QpProblem, warm=None) -> QpSolution:
        t0 = time.perf_counter()
        sol = self._solve(problem, warm)
        return _with_time(sol, time.perf_counter() - t0)

    # -- internals ---------------------------------------------------------

    def _solve(self, P: QpProblem, warm) -> QpSolution:
        nrows = P.G.shape[0]
        red = _Reduced(P, feas_tol=max(self.kkt_tol, 1e-9))
        if red.infeasible:
            return self._fail(P, INFEASIBLE, red)
        if red.unbounded:
            return self._fail(P, UNBOUNDED, red)
        max_iter = self.max_iter or 50 * (P.nv + nrows)

        y, W = self._start(red, warm)
        if y is None:
            return self._fail(P, INFEASIBLE, red)
        if red.H.shape[0] == 0:
            x = red.to_full(y)
            nu, lo, up = self._multipliers(P, red, x, (), np.zeros(0))
            return QpSolution(x, P.objective(x), OPTIMAL, (), 1, 0.0, nu, lo, up)

        it = 0
        status = MAX_ITER
        lam = np.zeros(len(W))
        while it < max_iter:
            it += 1
            p, lam, zero_curv = self._eqp(red, y, W)
            grad = red.H @ y + red.g
            ptol = 1e-12 * max(1.0, _inf_norm(y))
            if _inf_norm(p) <= ptol:
                worst, worst_val = None, 0.0
                lam_tol = self.kkt_tol * max(1.0, _inf_norm(grad), _inf_norm(lam))
                for k, (i, side) in enumerate(W):
                    if red.lb[i] == red.ub[i]:
                        continue
                    v = -side * lam[k]
                    if v > lam_tol and v > worst_val:
                        worst, worst_val = k, v
                if worst is None:
                    status = OPTIMAL
                    break
                W = W[:worst] + W[worst + 1 :]
                continue
            alpha, block = self._ratio(red, y, p, W, unbounded_step=zero_curv)
            if block is None and zero_curv:
                status = UNBOUNDED
                break
            y = y + alpha * p
            if block is not None:
                W = W + (block,)
        x = red.to_full(y)
        nu, lo, up = self._multipliers(P, red, x, W, lam if status == OPTIMAL else None)
        return QpSolution(x, P.objective(x), status, tuple(W), it, 0.0, nu, lo, up)

    def _fail(self, P, status, red):
        x = red.x0 if red.x0 is not None else np.zeros(P.nv)
        nrows = P.G.shape[0]
        return QpSolution(x, P.objective(x), status, (), 0, 0.0, np.zeros(P.A_eq.shape[0]),
                          np.zeros(nrows), np.zeros(nrows))

    def _independent(self, red, W):
        """Greedily keep rows of ``W`` that are linearly independent and bounded on their side."""
        kept, rows = [], []
        for i, side in W:
            i = int(i)
            if not (0 <= i < red.G.shape[0]) or not red.live[i]:
                continue
            if not np.isfinite(red.ub[i] if side > 0 else red.lb[i]):
                continue
            if any(i == k for k, _ in kept):
                continue
            cand = np.vstack(rows + [red.G[i]])
            s = np.linalg.svd(cand, compute_uv=False)
            if s[-1] > 1e-9 * s[0]:
                kept.append((i, 1 if side > 0 else -1))
                rows.append(red.G[i])
        return tuple(kept)

    def _target(self, red, W):
        return np.array([red.ub[i] if s > 0 else red.lb[i] for i, s in W])

    def _feasible(self, red, y, tol=None):
        if not red.G.size:
            return True
        tol = self.kkt_tol if tol is None else tol
        Gy = red.G @ y
        scale = np.maximum(1.0, np.maximum(np.abs(np.where(np.isfinite(red.lb), red.lb, 0)),
                                           np.abs(np.where(np.isfinite(red.ub), red.ub, 0))))
        with np.errstate(invalid="ignore"):
            ok = (Gy >= red.lb - tol * scale) & (Gy <= red.ub + tol * scale)
        return bool(np.all(ok | ~red.live))

    def _eq_point(self, red, W):
        """Minimizer of the objective on the affine set where the rows of ``W`` are tight."""
        k = red.H.shape[0]
        if not W:
            if red.pd:
                return sla.cho_solve(red.chol, -red.g) if k else np.zeros(0)
            return None
        A = red.G[[i for i, _ in W]]
        b = self._target(red, W)
        if red.pd:
            K = np.block([[red.H, A.T], [A, np.zeros((len(W), len(W)))]])
            try:
                sol = np.linalg.solve(K, np.concatenate([-red.g, b]))
            except np.linalg.LinAlgError:
                return None
            return sol[:k]
        y0 = np.linalg.lstsq(A, b, rcond=None)[0]
        N = null_space(A)
        Hn = N.T @ red.H @ N
        gn = N.T @ (red.H @ y0 + red.g)
        z = np.linalg.lstsq(Hn, -gn, rcond=None)[0] if Hn.size else np.zeros(0)
        if Hn.size and _inf_norm(Hn @ z + gn) > 1e-9 * max(1.0, _inf_norm(gn)):
            return None
        return y0 + N @ z

    def _start(self, red, warm):
        k = red.H.shape[0]
        if warm:
            W = self._independent(red, tuple(warm))
            y = self._eq_point(red, W) if k else np.zeros(0)
            if y is not None and self._feasible(red, y):
                return y, W
        if k == 0:
            return (np.zeros(0), ()) if self._feasible(red, np.zeros(0)) else (None, ())
        y = self._eq_point(red, ())
        if y is not None and self._feasible(red, y):
            return y, ()
        return self._phase_one(red)

    def _phase_one(self, red):
        """Feasible point from an auxiliary LP minimizing the largest bound violation."""
        k = red.H.shape[0]
        live = np.flatnonzero(red.live)
        A_ub, b_ub = [], []
        for i in live:
            if np.isfinite(red.ub[i]):
                A_ub.append(np.append(red.G[i], -1.0)); b_ub.append(red.ub[i])
            if np.isfinite(red.lb[i]):
                A_ub.append(np.append(-red.G[i], -1.0)); b_ub.append(-red.lb[i])
        if not A_ub:
            return np.zeros(k), ()
        c = np.zeros(k + 1)
        c[-1] = 1.0
        bounds = [(None, None)] * k + [(0, None)]
        res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs")
        if res.status != 0:
            return None, ()
        y = res.x[:k]
        if res.x[-1] > self.kkt_tol * max(1.0, _inf_norm(b_ub)) or not self._feasible(red, y):
            return None, ()
        Gy = red.G @ y
        tight = []
        for i in live:
            scale = max(1.0, abs(Gy[i]))
            if np.isfinite(red.ub[i]) and abs(Gy[i] - red.ub[i]) <= 1e-10 * scale:
                tight.append((int(i), 1))
            elif np.isfinite(red.lb[i]) and abs(Gy[i] - red.lb[i]) <= 1e-10 * scale:
                tight.append((int(i), -1))
        return y, self._independent(red, tuple(tight))

    def _eqp(self, red, y, W):
        """Step ``p`` minimizing the model with the rows of ``W`` held fixed, and multipliers."""
        k = red.H.shape[0]
        grad = red.H @ y + red.g
        idx = [i for i, _ in W]
        A = red.G[idx] if idx else np.zeros((0, k))
        if red.pd:
            if not idx:
                return sla.cho_solve(red.chol, -grad), np.zeros(0), False
            K = np.block([[red.H, A.T], [A, np.zeros((len(idx), len(idx)))]])
            sol = np.linalg.solve(K, np.concatenate([-grad, np.zeros(len(idx))]))
            return sol[:k], sol[k:], False
        N = null_space(A) if idx else np.eye(k)
        Hn = N.T @ red.H @ N
        gn = N.T @ grad
        w, E = np.linalg.eigh(Hn) if Hn.size else (np.zeros(0), np.zeros((0, 0)))
        flat = w <= 1e-10 * max(_inf_norm(w), 1e-300)
        E0 = E[:, flat]
        descent = E0 @ (E0.T @ gn)
        zero_curv = False
        if _inf_norm(descent) > 1e-10 * max(1.0, _inf_norm(gn)):
            p = -N @ descent
            zero_curv = True
        else:
            pos = ~flat
            z = -E[:, pos] @ ((E[:, pos].T @ gn) / w[pos])
            p = N @ z
        lam = np.zeros(len(idx))
        if idx and not zero_curv:
            lam = np.linalg.lstsq(A.T, -(grad + red.H @ p), rcond=None)[0]
        return p, lam, zero_curv

    def _ratio(self, red, y, p, W, unbounded_step=False):
        alpha = np.inf if unbounded_step else 1.0
        block = None
        if not red.G.size:
            return alpha, block
        in_W = {i for i, _ in W}
        Gp = red.G @ p
        Gy = red.G @ y
        pn = _inf_norm(p)
        for i in np.flatnonzero(red.live):
            if i in in_W:
                continue
            a = Gp[i]
            if abs(a) <= 1e-12 * red.row_norm[i] * pn:
                continue
            if a > 0 and np.isfinite(red.ub[i]):
                step, side = max(red.ub[i] - Gy[i], 0.0) / a, 1
            elif a < 0 and np.isfinite(red.lb[i]):
                step, side = max(Gy[i] - red.lb[i], 0.0) / -a, -1
            else:
                continue
            if step < alpha:
                alpha, block = step, (int(i), side)
        return alpha, block

    def _multipliers(self, P, red, x, W, lam):
        nrows = P.G.shape[0]
        lo, up = np.zeros(nrows), np.zeros(nrows)
        if lam is not None:
            for (i, side), v in zip(W, lam):
                if red.lb[i] == red.ub[i]:
                    up[i], lo[i] = max(v, 0.0), max(-v, 0.0)
                elif side > 0:
                    up[i] = max(v, 0.0)
                else:
                    lo[i] = max(-v, 0.0)
        nu = np.zeros(P.A_eq.shape[0])
        if P.A_eq.shape[0]:
            rhs = -(P.H @ x + P.f + P.G.T @ (up - lo))
            nu = np.linalg.lstsq(P.A_eq.T, rhs, rcond=None)[0]
        return nu, lo, up


def _with_time(sol: QpSolution, dt: float) -> QpSolution:
    return QpSolution(sol.x, sol.objective, sol.status, sol.active_set, sol.iterations, dt,
                      sol.eq_multipliers, sol.lower_multipliers, sol.upper_multipliers)


def solve(problem: QpProblem, warm=None, kkt_tol: float = KKT_TOL,
          max_iter: int | None = None) -> QpSolution:
    """Solve ``problem`` with a fresh :class:`ActiveSetSolver`."""
    return ActiveSetSolver(kkt_tol, max_iter).solve(problem, warm)
