"""Input-output trajectories, Hankel matrices and excitation checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._linalg import numerical_rank
from .exceptions import ConfigurationError, InputError, ParseError, WindowError

SCHEMES = ("DDPC", "sDDPC", "SVD-DDPC", "eDDPC")

_SCHEME_ALIASES = {
    "ddpc": "DDPC",
    "sddpc": "sDDPC",
    "svd": "SVD-DDPC",
    "svd-ddpc": "SVD-DDPC",
    "eddpc": "eDDPC",
}


def canonical_scheme(tag: str) -> str:
    try:
        return _SCHEME_ALIASES[str(tag).lower()]
    except KeyError:
        raise InputError(f"unknown scheme {tag!r}; expected one of {SCHEMES}") from None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time series ``w_k = (u_k, y_k)`` stored as a ``(T, m + p)`` array."""

    w: np.ndarray
    m: int

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.ndim != 2:
            raise InputError("trajectory samples must form a 2-D array")
        if not 0 <= self.m <= w.shape[1]:
            raise InputError(f"input block size {self.m} exceeds sample size {w.shape[1]}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def T(self) -> int:
        return self.w.shape[0]

    @property
    def q(self) -> int:
        return self.w.shape[1]

    @property
    def p(self) -> int:
        return self.q - self.m

    @property
    def u(self) -> np.ndarray:
        return self.w[:, : self.m]

    @property
    def y(self) -> np.ndarray:
        return self.w[:, self.m :]

    def __len__(self) -> int:
        return self.T

    def window(self, a: int, b: int) -> "Trajectory":
        """Samples ``a`` through ``b`` inclusive."""
        if not 0 <= a <= b <= self.T - 1:
            raise WindowError(f"window [{a}, {b}] outside [0, {self.T - 1}]")
        return Trajectory(self.w[a : b + 1], self.m)

    def stacked(self) -> np.ndarray:
        return self.w.reshape(-1).copy()

    @classmethod
    def from_stacked(cls, v, q: int, m: int) -> "Trajectory":
        return cls(np.asarray(v, dtype=float).reshape(-1, q), m)

    def to_csv(self, path) -> None:
        header = [f"u_{i + 1}" for i in range(self.m)] + [f"y_{i + 1}" for i in range(self.p)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in self.w:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ParseError(f"{path}: empty trajectory file")
        header = [h.strip() for h in rows[0]]
        m = sum(h.startswith("u_") for h in header)
        p = sum(h.startswith("y_") for h in header)
        if m + p != len(header) or header[:m] != [f"u_{i + 1}" for i in range(m)]:
            raise ParseError(f"{path}: header must read u_1..u_m,y_1..y_p, got {header}")
        try:
            data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
        if data.ndim != 2 or data.shape[1] != m + p:
            raise ParseError(f"{path}: ragged rows")
        return cls(data, m)


def _as_samples(data) -> np.ndarray:
    if isinstance(data, Trajectory):
        return data.w
    a = np.asarray(data, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def hankel(data, L: int) -> np.ndarray:
    """Block-Hankel matrix of depth ``L``; column ``j`` stacks samples ``j..j+L-1``.

    ``data`` is a :class:`Trajectory` or an array of shape ``(T, k)`` (e.g. an
    input-only sequence).
    """
    w = _as_samples(data)
    T, k = w.shape
    if L < 1 or L > T:
        raise WindowError(f"Hankel depth {L} invalid for {T} samples")
    return sliding_window_view(w, (L, k)).reshape(T - L + 1, L * k).T.copy()


def is_pe(u, L: int) -> bool:
    """True iff ``u`` is persistently exciting of order ``L`` (rank ``mL``)."""
    H = hankel(u, L)
    return numerical_rank(H) == H.shape[0]


def behavior_rank_check(traj, L: int, n: int) -> bool:
    """True iff the depth-``L`` Hankel matrix of ``traj`` has rank ``mL + n``."""
    H = hankel(traj, L)
    m = traj.m if isinstance(traj, Trajectory) else None
    if m is None:
        raise InputError("behavior_rank_check needs a Trajectory to know the input size")
    return numerical_rank(H) == m * L + n


def min_data_length(scheme: str, m: int, n: int, lag: int | None = None,
                    L: int | None = None, T_ini: int | None = None) -> int:
    """Smallest number of samples each scheme needs for its excitation condition."""
    scheme = canonical_scheme(scheme)
    if scheme in ("DDPC", "SVD-DDPC"):
        if L is None:
            raise ConfigurationError(f"{scheme} needs the horizon L")
        return (m + 1) * (L + 2 * n) - 1
    if scheme == "sDDPC":
        if T_ini is None:
            raise ConfigurationError("sDDPC needs T_ini")
        return (m + 1) * (2 * T_ini + n) - 1
    if lag is None:
        raise ConfigurationError("eDDPC needs the lag")
    return (m + 1) * (lag + n + 1) - 1


def behavior_data_length(m: int, n: int, L: int) -> int:
    """Samples needed for an input PE of order ``L + n``, which spans all length-``L`` windows.

    This is the plain depth-``L`` requirement; the null-space construction
    saves ``(m+1)(L - lag - 1)`` samples against it for any ``L > lag + 1``.
    """
    return (m + 1) * (L + n) - 1


def regressor_dim(scheme: str, m: int, n: int, L: int, T: int | None = None,
                  T_ini: int | None = None) -> int:
    """Number of decision variables of the condensed problem for each scheme."""
    scheme = canonical_scheme(scheme)
    if scheme == "DDPC":
        return T - L - n + 1
    if scheme == "sDDPC":
        return (L // T_ini) * (T - 2 * T_ini + 1)
    return m * (L + n) + n
