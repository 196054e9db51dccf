"""Independent reference computations used only by the tests."""

import itertools

import numpy as np


def brute_force_qp(H, f, A_eq, b_eq, G, lb, ub, c0=0.0, feas_tol=1e-9):
    """Global minimum of a strictly convex QP by enumerating every active set.

    Each row of ``G`` is either inactive, held at ``lb`` or held at ``ub``. For
    every combination the equality-constrained minimizer is computed from its
    KKT system; the best feasible one is the optimum (the optimum of a strictly
    convex QP is the minimizer over the face it lies on).

    Returns ``(objective, x)`` or ``(inf, None)`` if nothing is feasible.
    """
    H = np.asarray(H, float)
    nv = H.shape[0]
    f = np.asarray(f, float)
    A_eq = np.asarray(A_eq, float).reshape(-1, nv)
    b_eq = np.asarray(b_eq, float).reshape(-1)
    G = np.asarray(G, float).reshape(-1, nv)
    lb, ub = np.asarray(lb, float), np.asarray(ub, float)
    k = G.shape[0]
    choices = []
    for i in range(k):
        opts = [0]
        if np.isfinite(lb[i]):
            opts.append(-1)
        if np.isfinite(ub[i]) and ub[i] != lb[i]:
            opts.append(1)
        choices.append(opts)

    best_val, best_x = np.inf, None
    by_size: dict[int, list] = {}
    for combo in itertools.product(*choices):
        act = [(i, s) for i, s in enumerate(combo) if s]
        if len(act) + A_eq.shape[0] > nv:
            continue
        by_size.setdefault(len(act), []).append(act)

    neq = A_eq.shape[0]
    for size, sets in by_size.items():
        nc = neq + size
        K = np.zeros((len(sets), nv + nc, nv + nc))
        rhs = np.zeros((len(sets), nv + nc))
        K[:, :nv, :nv] = H
        rhs[:, :nv] = -f
        if neq:
            K[:, nv : nv + neq, :nv] = A_eq
            K[:, :nv, nv : nv + neq] = A_eq.T
            rhs[:, nv : nv + neq] = b_eq
        for j, act in enumerate(sets):
            for r, (i, s) in enumerate(act):
                K[j, nv + neq + r, :nv] = G[i]
                K[j, :nv, nv + neq + r] = G[i]
                rhs[j, nv + neq + r] = ub[i] if s > 0 else lb[i]
        cond = np.linalg.cond(K)
        good = cond < 1e12
        if not np.any(good):
            continue
        X = np.linalg.solve(K[good], rhs[good][..., None])[..., 0][:, :nv]
        for x in X:
            if neq and np.max(np.abs(A_eq @ x - b_eq)) > feas_tol * max(1, np.max(np.abs(b_eq))):
                continue
            Gx = G @ x
            if np.any(Gx < lb - feas_tol * np.maximum(1, np.abs(lb))) or np.any(
                    Gx > ub + feas_tol * np.maximum(1, np.abs(ub))):
                continue
            val = 0.5 * x @ H @ x + f @ x + c0
            if val < best_val:
                best_val, best_x = val, x
    return best_val, best_x


def random_qp(rng, nv_max=20, rows_max=10, eq_max=2):
    """Random strictly convex QP with a guaranteed feasible point."""
    nv = int(rng.integers(1, nv_max + 1))
    neq = int(rng.integers(0, min(eq_max, nv - 1) + 1)) if nv > 1 else 0
    k = int(rng.integers(1, rows_max + 1))
    M = rng.normal(size=(nv, nv))
    H = M @ M.T + 0.1 * np.eye(nv)
    f = rng.normal(size=nv) * 3
    A = rng.normal(size=(neq, nv))
    x_feas = rng.normal(size=nv)
    b = A @ x_feas
    G = rng.normal(size=(k, nv))
    Gx = G @ x_feas
    lb = Gx - rng.uniform(0.0, 1.0, k)
    ub = Gx + rng.uniform(0.0, 1.0, k)
    kind = rng.integers(0, 4, k)
    lb[kind == 1] = -np.inf
    ub[kind == 2] = np.inf
    return H, f, A, b, G, lb, ub


def fit_initial_state(A, B, C, D, u, y):
    """Least-squares initial state and max output mismatch after re-simulation.

    Written against the raw matrices so it does not share code with the
    package's simulator.
    """
    n = A.shape[0]
    N = u.shape[0]
    rows = []
    Ak = np.eye(n)
    for _ in range(N):
        rows.append(C @ Ak)
        Ak = A @ Ak
    O = np.vstack(rows)
    forced = np.zeros_like(y)
    x = np.zeros(n)
    for k in range(N):
        forced[k] = C @ x + D @ u[k]
        x = A @ x + B @ u[k]
    x0 = np.linalg.lstsq(O, (y - forced).reshape(-1), rcond=None)[0]
    x = x0.copy()
    err = 0.0
    for k in range(N):
        err = max(err, float(np.max(np.abs(C @ x + D @ u[k] - y[k]))))
        x = A @ x + B @ u[k]
    return x0, err
