import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from eddpc._linalg import projection_residual
from eddpc.lti import collect, random_system, simulate
from eddpc.predictors import build_eddpc_predictor
from eddpc.qp import QpProblem, check_kkt, solve
from eddpc.trajectory import behavior_data_length, hankel, is_pe, min_data_length
from oracles import random_qp

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(1, 3), st.integers(1, 3))
def test_simulation_is_linear(seed, n, m, p):
    sys = random_system(n, m, p, seed=seed)
    rng = np.random.default_rng(seed)
    xa, xb = rng.normal(size=(2, n))
    ua, ub = rng.normal(size=(2, 10, m))
    lhs = simulate(sys, xa + xb, ua + ub).y
    rhs = simulate(sys, xa, ua).y + simulate(sys, xb, ub).y
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(2, 40), st.integers(1, 8))
def test_pe_is_monotone_in_order(seed, m, T, L):
    u = np.random.default_rng(seed).uniform(-1, 1, (T, m))
    if T < L:
        return
    if is_pe(u, L):
        assert all(is_pe(u, k) for k in range(1, L))


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_sample_saving_identity(data):
    m = data.draw(st.integers(1, 6))
    n = data.draw(st.integers(1, 12))
    lag = data.draw(st.integers(1, n))
    L = data.draw(st.integers(lag + 2, lag + 30))
    t_e = min_data_length("eDDPC", m, n, lag=lag)
    assert behavior_data_length(m, n, L) - t_e == (m + 1) * (L - lag - 1)
    # DDPC predicts L + n samples, so its saving is the same identity at that length
    assert min_data_length("DDPC", m, n, L=L) - t_e == (m + 1) * (L + n - lag - 1)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(2, 12))
def test_hankel_block_shift(seed, q, L):
    w = np.random.default_rng(seed).normal(size=(L + 6, q))
    H = hankel(w, L)
    assert H.shape == (q * L, 7)
    np.testing.assert_array_equal(H[q:, :-1], H[:-q, 1:])


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(2, 5), st.integers(1, 2), st.integers(1, 3))
def test_null_space_predictor_spans_the_behaviour(seed, n, m, L_extra):
    p = max(1, n - 2)
    sys = random_system(n, m, p, seed=seed)
    L = sys.lag + L_extra
    if L < n:
        L = n
    T = (m + 1) * (sys.lag + n + 1) - 1 + 5
    pred = build_eddpc_predictor(collect(sys, T, seed=seed + 1), L, n, sys.lag)
    assert pred.matrix.shape[1] == m * (L + n) + n
    rng = np.random.default_rng(seed)
    W = np.column_stack([simulate(sys, rng.uniform(-1, 1, n),
                                  rng.uniform(-1, 1, (L + n, m))).stacked() for _ in range(20)])
    assert projection_residual(pred.matrix, W) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_solver_certifies_and_warm_restarts(seed):
    rng = np.random.default_rng(seed)
    prob = QpProblem(*random_qp(rng))
    sol = solve(prob)
    assert sol.ok
    assert check_kkt(prob, sol.x, sol.eq_multipliers, sol.lower_multipliers,
                     sol.upper_multipliers).ok(1e-8)
    assert solve(prob, warm=sol.active_set).iterations <= 2
