"""Data-driven kernel representation and the null-space trajectory predictor.

The offline pipeline is::

    R_d   = left kernel of H_d(w_data)                  (extract_kernel)
    rows  = p rows of R_d giving a well-conditioned Gamma (select_rows)
    Gamma = R_d followed by shifted copies of the rows   (build_gamma)
    P     = orthonormal basis of ker(Gamma)              (null_space_predictor)

``im(P)`` is the set of all length-``L_target`` trajectories of the system and
``P`` has exactly ``m * L_target + n`` columns.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._linalg import condition_number, left_null_space, null_space, numerical_rank
from .exceptions import (
    ConfigurationError,
    DegenerateKernelError,
    InputError,
    InsufficientExcitationError,
    ParseError,
    WindowError,
)
from .trajectory import Trajectory, hankel

log = logging.getLogger(__name__)

DEFAULT_KAPPA_MAX = 1e4


@dataclass(frozen=True, eq=False)
class KernelRep:
    """Rows annihilating every depth-``d`` window of the data.

    ``R`` has shape ``(p*d - n, q*d)``; block ``R[:, j*q:(j+1)*q]`` holds the
    coefficients acting on sample ``j`` of the window.
    """

    R: np.ndarray
    d: int
    m: int
    n: int

    @property
    def q(self) -> int:
        return self.R.shape[1] // self.d

    @property
    def p(self) -> int:
        return self.q - self.m

    @property
    def g(self) -> int:
        return self.R.shape[0]

    def coefficient(self, i: int, j: int) -> np.ndarray:
        """Row ``i`` coefficient acting on the ``j``-th sample of a window."""
        return self.R[i, j * self.q : (j + 1) * self.q]

    def to_dict(self) -> dict:
        return {"kind": "kernel", "d": self.d, "m": self.m, "n": self.n,
                "rows": self.R.shape[0], "cols": self.R.shape[1],
                "data": self.R.reshape(-1).tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "KernelRep":
        R = np.asarray(doc["data"], dtype=float).reshape(doc["rows"], doc["cols"])
        return cls(R, int(doc["d"]), int(doc["m"]), int(doc["n"]))


@dataclass(frozen=True, eq=False)
class GammaMatrix:
    matrix: np.ndarray
    d: int
    L_target: int
    rows: tuple[int, ...]

    @property
    def shift_count(self) -> int:
        return self.L_target - self.d


@dataclass(frozen=True, eq=False)
class PredictorP:
    """Full-column-rank basis ``P`` of the length-``L_target`` behavior."""

    P: np.ndarray
    L_target: int
    m: int
    n: int
    rows: tuple[int, ...] = ()
    gamma_cond: float = float("nan")
    well_conditioned: bool = True
    kernel: KernelRep | None = field(default=None, repr=False)

    @property
    def q(self) -> int:
        return self.P.shape[0] // self.L_target

    def to_dict(self) -> dict:
        doc = {"kind": "null_space_predictor", "L_target": self.L_target, "m": self.m,
               "n": self.n, "rows": self.P.shape[0], "cols": self.P.shape[1],
               "selected_rows": list(self.rows), "gamma_cond": self.gamma_cond,
               "data": self.P.reshape(-1).tolist()}
        if self.kernel is not None:
            doc["kernel"] = self.kernel.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PredictorP":
        P = np.asarray(doc["data"], dtype=float).reshape(doc["rows"], doc["cols"])
        kernel = KernelRep.from_dict(doc["kernel"]) if "kernel" in doc else None
        return cls(P, int(doc["L_target"]), int(doc["m"]), int(doc["n"]),
                   tuple(doc.get("selected_rows", ())), float(doc.get("gamma_cond", "nan")),
                   kernel=kernel)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "PredictorP":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: {exc}") from None
        return cls.from_dict(doc)


def extract_kernel(traj: Trajectory, d: int, n: int) -> KernelRep:
    """Orthonormal basis of the left kernel of ``H_d(traj)``.

    Raises:
        InsufficientExcitationError: if ``rank(H_d) != m*d + n``, i.e. the data
            is not exciting enough (or ``d`` is below ``lag + 1``).
    """
    H = hankel(traj, d)
    m, p = traj.m, traj.p
    rank = numerical_rank(H)
    if rank != m * d + n:
        raise InsufficientExcitationError(
            f"rank(H_{d}) = {rank}, need m*d + n = {m * d + n}; "
            "collect longer / richer data or increase d")
    R = left_null_space(H)
    if R.shape[0] != p * d - n:
        # only reachable when n > p*d, i.e. d below the lag
        raise InsufficientExcitationError(f"left kernel has {R.shape[0]} rows, expected {p * d - n}")
    return KernelRep(R, d, m, n)


def build_gamma(kernel: KernelRep, rows, L_target: int) -> GammaMatrix:
    """Banded matrix: all kernel rows, then ``L_target - d`` one-sample shifts of ``rows``."""
    d, q = kernel.d, kernel.q
    if L_target < d:
        raise WindowError(f"L_target = {L_target} is shorter than the kernel depth {d}")
    rows = tuple(int(r) for r in rows)
    if any(not 0 <= r < kernel.g for r in rows):
        raise InputError(f"row selection {rows} out of range for {kernel.g} kernel rows")
    shifts = L_target - d
    G = np.zeros((kernel.g + len(rows) * shifts, q * L_target))
    G[: kernel.g, : q * d] = kernel.R
    sub = kernel.R[list(rows)]
    for k in range(1, shifts + 1):
        top = kernel.g + (k - 1) * len(rows)
        G[top : top + len(rows), k * q : k * q + q * d] = sub
    return GammaMatrix(G, d, L_target, rows)


def _search(kernel: KernelRep, p: int, L_target: int, kappa_max: float):
    best, best_cond = None, np.inf
    for combo in itertools.combinations(range(kernel.g), p):
        cond = condition_number(build_gamma(kernel, combo, L_target).matrix)
        if cond <= kappa_max:
            return combo, cond, True
        if cond < best_cond:
            best, best_cond = combo, cond
    return best, best_cond, False


def select_rows(kernel: KernelRep, p: int | None = None, kappa_max: float = DEFAULT_KAPPA_MAX,
                L_target: int | None = None) -> tuple[tuple[int, ...], float, bool]:
    """Pick ``p`` kernel rows whose shifts yield a well-conditioned Gamma.

    Combinations are tried in lexicographic order (the first ``p`` rows come
    first) and the search stops at the first one with condition number at most
    ``kappa_max``. If none qualifies, the best one seen is returned with the
    flag set to ``False``.

    Returns:
        ``(rows, condition_number, ok)``
    """
    p = kernel.p if p is None else p
    if kernel.g < p:
        raise ConfigurationError(f"kernel has {kernel.g} rows, cannot select {p}")
    if L_target is None:
        L_target = kernel.d + 1
    rows, cond, ok = _search(kernel, p, L_target, kappa_max)
    if not ok:
        log.warning("no row selection reaches cond <= %.1e; best is %.3e", kappa_max, cond)
    return rows, cond, ok


def null_space_predictor(gamma: GammaMatrix, m: int, n: int) -> np.ndarray:
    """Orthonormal basis of ``ker(Gamma)``, checked to have ``m*L_target + n`` columns."""
    P = null_space(gamma.matrix)
    expected = m * gamma.L_target + n
    if P.shape[1] != expected:
        raise DegenerateKernelError(
            f"ker(Gamma) has dimension {P.shape[1]}, expected m*L + n = {expected}")
    return P


def preprocess(traj: Trajectory, n: int, lag: int, L: int, kappa_max: float = DEFAULT_KAPPA_MAX,
               d: int | None = None) -> PredictorP:
    """Offline phase: data -> predictor ``P`` with ``im(P)`` = behaviour on ``L + n`` samples.

    Args:
        traj: measured data.
        n: system order.
        lag: system lag; the kernel depth defaults to ``lag + 1``.
        L: prediction horizon (the predictor also covers ``n`` past samples).
        kappa_max: conditioning threshold for the row search.
        d: optional kernel depth override (must be ``>= lag + 1``).
    """
    d = lag + 1 if d is None else d
    if d < lag + 1:
        raise ConfigurationError(f"kernel depth {d} must be at least lag + 1 = {lag + 1}")
    L_target = L + n
    kernel = extract_kernel(traj, d, n)
    if L_target == d:
        rows, cond, ok = (), condition_number(kernel.R), True
    else:
        rows, cond, ok = select_rows(kernel, traj.p, kappa_max, L_target)
    gamma = build_gamma(kernel, rows, L_target)
    P = null_space_predictor(gamma, traj.m, n)
    return PredictorP(P, L_target, traj.m, n, rows, cond, ok, kernel)
