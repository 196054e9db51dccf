"""Trajectory predictors for the four data-driven schemes (and a model oracle).

Every predictor exposes :meth:`Predictor.trajectory_map`, a matrix ``M`` with
``w_bar = M @ regressor`` stacking ``n`` past and ``L`` future samples, plus
optional linear equalities the regressor must satisfy (segment stitching).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._linalg import null_space, orth, rank_tolerance
from .exceptions import (
    ConfigurationError,
    InputError,
    InsufficientExcitationError,
    ParseError,
    RankMismatchError,
)
from .kernel import DEFAULT_KAPPA_MAX, PredictorP, preprocess
from .lti import LtiSystem, observability_matrix
from .trajectory import Trajectory, canonical_scheme, hankel, is_pe

MODEL = "model"


@dataclass(frozen=True, eq=False)
class Predictor:
    """A predictor matrix (a single Hankel segment for ``sDDPC``) plus metadata."""

    tag: str
    matrix: np.ndarray
    m: int
    p: int
    n: int
    L: int
    T: int | None = None
    T_ini: int | None = None
    details: PredictorP | None = None

    @property
    def q(self) -> int:
        return self.m + self.p

    @property
    def prediction_length(self) -> int:
        return self.L + self.n

    @property
    def n_segments(self) -> int:
        return self.L // self.T_ini if self.tag == "sDDPC" else 1

    @property
    def regressor_dim(self) -> int:
        return self.n_segments * self.matrix.shape[1]

    def trajectory_map(self) -> np.ndarray:
        """Matrix taking the regressor to the stacked prediction ``w_bar[-n:L]``."""
        if self.tag != "sDDPC":
            return self.matrix
        if self.T_ini < self.n:
            raise ConfigurationError(
                f"segmented predictor with T_ini = {self.T_ini} < n = {self.n} "
                "cannot reproduce the n-sample initialization window")
        q, Ti, ns = self.q, self.T_ini, self.n_segments
        c = self.matrix.shape[1]
        past, fut = self.matrix[: q * Ti], self.matrix[q * Ti :]
        full = np.zeros((q * Ti * (ns + 1), ns * c))
        full[: q * Ti, :c] = past
        for i in range(ns):
            full[q * Ti * (i + 1) : q * Ti * (i + 2), i * c : (i + 1) * c] = fut
        return full[q * (Ti - self.n) :]

    def regressor_constraints(self) -> np.ndarray:
        """Rows ``S`` with ``S @ regressor = 0`` required for a consistent prediction."""
        if self.tag != "sDDPC" or self.n_segments == 1:
            return np.zeros((0, self.regressor_dim))
        q, Ti, ns = self.q, self.T_ini, self.n_segments
        c = self.matrix.shape[1]
        past, fut = self.matrix[: q * Ti], self.matrix[q * Ti :]
        S = np.zeros((q * Ti * (ns - 1), ns * c))
        for i in range(1, ns):
            r = q * Ti * (i - 1)
            S[r : r + q * Ti, i * c : (i + 1) * c] = past
            S[r : r + q * Ti, (i - 1) * c : i * c] = -fut
        return S

    def trajectory_basis(self) -> np.ndarray:
        """Orthonormal basis of every prediction the regressor can produce."""
        M = self.trajectory_map()
        S = self.regressor_constraints()
        if S.shape[0]:
            M = M @ null_space(S)
        return orth(M)

    def to_dict(self) -> dict:
        doc = {"tag": self.tag, "m": self.m, "p": self.p, "n": self.n, "L": self.L,
               "T": self.T, "T_ini": self.T_ini, "rows": self.matrix.shape[0],
               "cols": self.matrix.shape[1], "data": self.matrix.reshape(-1).tolist()}
        if self.details is not None:
            doc["null_space"] = {k: v for k, v in self.details.to_dict().items() if k != "data"}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Predictor":
        try:
            M = np.asarray(doc["data"], dtype=float).reshape(doc["rows"], doc["cols"])
            return cls(doc["tag"], M, int(doc["m"]), int(doc["p"]), int(doc["n"]), int(doc["L"]),
                       doc.get("T"), doc.get("T_ini"))
        except (KeyError, ValueError) as exc:
            raise InputError(f"malformed predictor document: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Predictor":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: {exc}") from None
        return cls.from_dict(doc)


def _require_pe(traj: Trajectory, order: int, scheme: str):
    if not is_pe(traj.u, order):
        raise InsufficientExcitationError(
            f"{scheme}: input of length {traj.T} is not persistently exciting of order {order}")


def build_ddpc_predictor(traj: Trajectory, L: int, n: int) -> Predictor:
    """Raw Hankel predictor ``H_{L+n}(w_data)``; needs PE of order ``L + 2n``."""
    _require_pe(traj, L + 2 * n, "DDPC")
    return Predictor("DDPC", hankel(traj, L + n), traj.m, traj.p, n, L, T=traj.T)


def build_svd_predictor(traj: Trajectory, L: int, n: int) -> Predictor:
    """Compressed predictor ``U_1 S_1`` from the SVD of ``H_{L+n}(w_data)``."""
    H = hankel(traj, L + n)
    U, s, _ = np.linalg.svd(H, full_matrices=False)
    r = int(np.sum(s > rank_tolerance(H.shape, s[0]))) if s[0] > 0 else 0
    expected = traj.m * (L + n) + n
    if r != expected:
        raise RankMismatchError(f"rank(H_{L + n}) = {r}, expected m(L+n)+n = {expected}")
    _require_pe(traj, L + 2 * n, "SVD-DDPC")
    return Predictor("SVD-DDPC", U[:, :r] * s[:r], traj.m, traj.p, n, L, T=traj.T)


def build_segmented_predictor(traj: Trajectory, L: int, T_ini: int, n: int,
                              lag: int | None = None) -> Predictor:
    """Bank of ``L / T_ini`` depth-``2 T_ini`` Hankel predictors.

    Consecutive segments overlap by ``T_ini`` samples; the overlap equality is
    returned by :meth:`Predictor.regressor_constraints`.
    """
    if T_ini < 1 or L % T_ini:
        raise ConfigurationError(f"horizon L = {L} is not a multiple of T_ini = {T_ini}")
    if lag is not None and T_ini < lag:
        raise ConfigurationError(f"T_ini = {T_ini} is below the lag {lag}")
    H = hankel(traj, 2 * T_ini)
    _require_pe(traj, 2 * T_ini + n, "sDDPC")
    return Predictor("sDDPC", H, traj.m, traj.p, n, L, T=traj.T, T_ini=T_ini)


def build_eddpc_predictor(traj: Trajectory, L: int, n: int, lag: int,
                          kappa_max: float = DEFAULT_KAPPA_MAX, d: int | None = None) -> Predictor:
    """Null-space predictor from short data (kernel of the depth-``lag+1`` Hankel matrix)."""
    res = preprocess(traj, n, lag, L, kappa_max=kappa_max, d=d)
    return Predictor("eDDPC", res.P, traj.m, traj.p, n, L, T=traj.T, details=res)


def model_predictor(sys: LtiSystem, L: int, n: int | None = None) -> Predictor:
    """Model-based basis of the length-``L + n`` behaviour.

    The regressor is ``(x_{-n}, u_{-n}, ..., u_{L-1})``; used as an oracle.
    """
    n = sys.n if n is None else n
    N = L + n
    m, p, q = sys.m, sys.p, sys.q
    O = observability_matrix(sys.A, sys.C, N)
    markov = [sys.D] + [sys.C @ np.linalg.matrix_power(sys.A, k) @ sys.B for k in range(N - 1)]
    M = np.zeros((q * N, sys.n + m * N))
    for k in range(N):
        M[k * q : k * q + m, sys.n + k * m : sys.n + (k + 1) * m] = np.eye(m)
        M[k * q + m : (k + 1) * q, : sys.n] = O[k * p : (k + 1) * p]
        for j in range(k + 1):
            M[k * q + m : (k + 1) * q, sys.n + j * m : sys.n + (j + 1) * m] = markov[k - j]
    return Predictor(MODEL, M, m, p, n, L)


def build_predictor(scheme: str, traj: Trajectory, L: int, n: int, lag: int | None = None,
                    T_ini: int | None = None, kappa_max: float = DEFAULT_KAPPA_MAX) -> Predictor:
    """Dispatch on the scheme tag (``DDPC``, ``sDDPC``, ``SVD-DDPC``, ``eDDPC``)."""
    scheme = canonical_scheme(scheme)
    if scheme == "DDPC":
        return build_ddpc_predictor(traj, L, n)
    if scheme == "SVD-DDPC":
        return build_svd_predictor(traj, L, n)
    if scheme == "sDDPC":
        return build_segmented_predictor(traj, L, n if T_ini is None else T_ini, n, lag)
    if lag is None:
        raise ConfigurationError("eDDPC needs the system lag")
    return build_eddpc_predictor(traj, L, n, lag, kappa_max)
