"""Condensed finite-horizon optimal control problem over a predictor's regressor.

For a predicted stack ``w_bar = M @ r`` covering ``n`` past and ``L`` future
samples, the problem is::

    min_r  sum_{k=0}^{L-1} ||w_bar_k - w_s||_W^2
    s.t.   w_bar[-n:0]   = measured past
           w_bar[L-n:L]  = w_s repeated n times
           lb <= w_bar_k <= ub,  k = 0..L-1
           (segment stitching, if the predictor has any)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, InputError
from .predictors import Predictor
from .qp import QpProblem


@dataclass(frozen=True, eq=False)
class OcpSpec:
    """Horizon, weight, set point and box constraints.

    ``lb``/``ub`` are per-coordinate bounds on ``w = (u, y)``; ``w_s`` must lie
    strictly inside them.
    """

    L: int
    n: int
    W: np.ndarray
    w_s: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        q = W.shape[0]
        w_s = np.asarray(self.w_s, dtype=float).reshape(-1)
        lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (q,)).copy()
        ub = np.broadcast_to(np.asarray(self.ub, dtype=float), (q,)).copy()
        if W.shape != (q, q) or w_s.shape != (q,):
            raise InputError("W must be q x q and w_s must have q entries")
        if not np.allclose(W, W.T, rtol=0, atol=1e-12 * max(1.0, np.abs(W).max())):
            raise InputError("W must be symmetric")
        if np.linalg.eigvalsh(W).min() <= 0:
            raise InputError("W must be positive definite")
        if not np.all((lb < w_s) & (w_s < ub)):
            raise InputError("the set point must lie strictly inside the box")
        if self.n > self.L:
            raise ConfigurationError(f"initialization depth n = {self.n} exceeds horizon L = {self.L}")
        for k, v in dict(W=W, w_s=w_s, lb=lb, ub=ub).items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)

    @property
    def q(self) -> int:
        return self.W.shape[0]

    @classmethod
    def box(cls, L: int, n: int, q: int, bound: float = 5.0, w_s=None, W=None) -> "OcpSpec":
        """Symmetric box ``|w_i| <= bound`` with identity weight and origin set point by default."""
        return cls(L, n, np.eye(q) if W is None else W, np.zeros(q) if w_s is None else w_s,
                   -bound * np.ones(q), bound * np.ones(q))

    def stage_cost(self, future) -> float:
        """Direct evaluation of the cost on an ``(L, q)`` array of predicted samples."""
        e = np.asarray(future, dtype=float).reshape(-1, self.q) - self.w_s
        return float(np.einsum("ki,ij,kj->", e, self.W, e))


@dataclass(frozen=True, eq=False)
class CondensedQp:
    qp: QpProblem
    M: np.ndarray
    n: int
    L: int
    q: int
    tag: str = ""

    @property
    def nv(self) -> int:
        return self.qp.nv

    def to_dict(self) -> dict:
        doc = self.qp.to_dict()
        doc.update({"tag": self.tag, "n": self.n, "L": self.L, "q": self.q, "M": self.M.tolist()})
        return doc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, doc: dict) -> "CondensedQp":
        return cls(QpProblem.from_dict(doc), np.asarray(doc["M"], dtype=float), int(doc["n"]),
                   int(doc["L"]), int(doc["q"]), doc.get("tag", ""))


def assemble(pred: Predictor, spec: OcpSpec, past) -> CondensedQp:
    """Condensed QP in the regressor of ``pred`` for the measured ``past`` window."""
    n, L, q = spec.n, spec.L, spec.q
    past = np.asarray(past, dtype=float)
    if past.shape != (n, q):
        raise InputError(f"past window must have shape ({n}, {q}), got {past.shape}")
    if pred.q != q or pred.n != n or pred.L != L:
        raise InputError(
            f"predictor (q={pred.q}, n={pred.n}, L={pred.L}) does not match the problem "
            f"(q={q}, n={n}, L={L})")
    M = pred.trajectory_map()
    nv = M.shape[1]
    future = M[q * n :]
    Wblk = np.kron(np.eye(L), spec.W)
    target = np.tile(spec.w_s, L)
    WM = Wblk @ future
    H = 2.0 * future.T @ WM
    f = -2.0 * WM.T @ target
    c0 = float(target @ Wblk @ target)

    S = pred.regressor_constraints()
    A_eq = np.vstack([M[: q * n], M[q * L :], S])
    b_eq = np.concatenate([past.reshape(-1), np.tile(spec.w_s, n), np.zeros(S.shape[0])])
    G = future
    lb, ub = np.tile(spec.lb, L), np.tile(spec.ub, L)
    qp = QpProblem(0.5 * (H + H.T), f, A_eq.reshape(-1, nv), b_eq, G, lb, ub, c0)
    return CondensedQp(qp, M, n, L, q, pred.tag)


def recover_trajectory(cqp: CondensedQp, regressor) -> tuple[np.ndarray, np.ndarray]:
    """Split ``M @ regressor`` into the ``(n, q)`` past and ``(L, q)`` future blocks."""
    r = np.asarray(regressor, dtype=float).reshape(-1)
    if r.shape != (cqp.nv,):
        raise InputError(f"regressor has {r.size} entries, expected {cqp.nv}")
    w = (cqp.M @ r).reshape(-1, cqp.q)
    return w[: cqp.n], w[cqp.n :]
