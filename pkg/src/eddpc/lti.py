"""Discrete-time LTI state-space systems used as the ground-truth plant."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._linalg import numerical_rank
from .exceptions import (
    GenerationError,
    InputError,
    NoUniqueEquilibriumError,
    ParseError,
    StructuralError,
)
from .trajectory import Trajectory

MAX_RETRIES = 100


def observability_matrix(A: np.ndarray, C: np.ndarray, k: int) -> np.ndarray:
    """Stack ``[C; CA; ...; CA^{k-1}]``."""
    blocks = []
    M = C
    for _ in range(k):
        blocks.append(M)
        M = M @ A
    return np.vstack(blocks) if blocks else np.zeros((0, A.shape[0]))


def controllability_matrix(A: np.ndarray, B: np.ndarray, k: int | None = None) -> np.ndarray:
    k = A.shape[0] if k is None else k
    blocks = []
    M = B
    for _ in range(k):
        blocks.append(M)
        M = A @ M
    return np.hstack(blocks)


def _lag(A, C) -> int:
    n = A.shape[0]
    for k in range(1, n + 1):
        if numerical_rank(observability_matrix(A, C, k)) == n:
            return k
    raise StructuralError("(A, C) is not observable")


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """Minimal state-space realization ``x+ = Ax + Bu``, ``y = Cx + Du``.

    The lag (observability index) is computed on construction.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray | None = None
    lag: int = field(init=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(A.shape[0], -1)
        C = np.asarray(self.C, dtype=float).reshape(-1, A.shape[0])
        if A.shape[0] != A.shape[1]:
            raise InputError(f"A must be square, got {A.shape}")
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else np.asarray(self.D, dtype=float)
        D = D.reshape(C.shape[0], B.shape[1])
        for name, M in zip("ABCD", (A, B, C, D)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)
        object.__setattr__(self, "lag", _lag(A, C))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def q(self) -> int:
        return self.m + self.p

    def is_controllable(self) -> bool:
        return numerical_rank(controllability_matrix(self.A, self.B)) == self.n

    def is_observable(self) -> bool:
        return numerical_rank(observability_matrix(self.A, self.C, self.n)) == self.n

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in "ABCD"}

    @classmethod
    def from_dict(cls, d: dict) -> "LtiSystem":
        try:
            A, B, C = (np.array(d[k], dtype=float) for k in "ABC")
        except KeyError as exc:
            raise InputError(f"system document is missing field {exc}") from None
        D = d.get("D")
        return cls(A, B, C, D=None if D is None else np.array(D, dtype=float))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "LtiSystem":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: {exc}") from None
        return cls.from_dict(doc)


@dataclass(frozen=True)
class Equilibrium:
    w_s: np.ndarray
    x_s: np.ndarray

    def u(self, m: int) -> np.ndarray:
        return self.w_s[:m]

    def y(self, m: int) -> np.ndarray:
        return self.w_s[m:]


def simulate(sys: LtiSystem, x0, u) -> Trajectory:
    """Simulate ``sys`` from ``x0`` under the input sequence ``u`` (shape ``(N, m)``)."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float)
    if u.ndim == 1 and sys.m == 1:
        u = u[:, None]
    if x.shape != (sys.n,):
        raise InputError(f"x0 has {x.size} entries, system order is {sys.n}")
    if u.ndim != 2 or u.shape[1] != sys.m or u.shape[0] < 1:
        raise InputError(f"input must have shape (N>=1, {sys.m}), got {u.shape}")
    y = np.empty((u.shape[0], sys.p))
    for k, uk in enumerate(u):
        y[k] = sys.C @ x + sys.D @ uk
        x = sys.A @ x + sys.B @ uk
    return Trajectory(np.hstack([u, y]), sys.m)


def final_state(sys: LtiSystem, x0, u) -> np.ndarray:
    """State reached after applying all of ``u`` from ``x0``."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    for uk in np.asarray(u, dtype=float).reshape(-1, sys.m):
        x = sys.A @ x + sys.B @ uk
    return x


def compute_lag(sys: LtiSystem) -> int:
    return _lag(sys.A, sys.C)


def estimate_initial_state(sys: LtiSystem, traj: Trajectory) -> tuple[np.ndarray, float]:
    """Least-squares initial state for ``traj`` and the relative re-simulation residual.

    The residual is zero (to rounding) exactly when ``traj`` is a trajectory of ``sys``.
    """
    u, y = traj.u, traj.y
    N = traj.T
    O = observability_matrix(sys.A, sys.C, N)
    # forced response by superposition from zero state
    y_forced = simulate(sys, np.zeros(sys.n), u).y
    x0, *_ = np.linalg.lstsq(O, (y - y_forced).reshape(-1), rcond=None)
    y_hat = simulate(sys, x0, u).y
    scale = max(1.0, float(np.max(np.abs(traj.w))))
    return x0, float(np.max(np.abs(y_hat - y))) / scale


def random_system(n: int, m: int, p: int, seed=None) -> LtiSystem:
    """Random Schur-stable, controllable and observable system with ``D = 0``.

    Entries of ``A``, ``B``, ``C`` are uniform on (-1, 1); ``A`` is rescaled so
    its spectral radius is uniform on (0.3, 0.95).
    """
    if min(n, m, p) < 1:
        raise InputError("n, m and p must be positive")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RETRIES):
        A = rng.uniform(-1, 1, (n, n))
        rho = np.max(np.abs(np.linalg.eigvals(A)))
        if rho == 0:
            continue
        A *= rng.uniform(0.3, 0.95) / rho
        B = rng.uniform(-1, 1, (n, m))
        C = rng.uniform(-1, 1, (p, n))
        if numerical_rank(observability_matrix(A, C, n)) < n:
            continue
        if numerical_rank(controllability_matrix(A, B)) < n:
            continue
        return LtiSystem(A, B, C)
    raise GenerationError(f"no controllable/observable system after {MAX_RETRIES} draws")


def equilibrium_from_input(sys: LtiSystem, u_s) -> Equilibrium:
    u_s = np.asarray(u_s, dtype=float).reshape(sys.m)
    M = np.eye(sys.n) - sys.A
    if numerical_rank(M) < sys.n:
        raise NoUniqueEquilibriumError("I - A is singular")
    x_s = np.linalg.solve(M, sys.B @ u_s)
    y_s = sys.C @ x_s + sys.D @ u_s
    return Equilibrium(np.concatenate([u_s, y_s]), x_s)


def collect(sys: LtiSystem, T: int, seed=None, x0=None) -> Trajectory:
    """Length-``T`` experiment with inputs ``~ U(-1, 1)^m`` from a random (or given) state."""
    if T < 1:
        raise InputError(f"T must be positive, got {T}")
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-1, 1, sys.n) if x0 is None else x0
    return simulate(sys, x0, rng.uniform(-1, 1, (T, sys.m)))
