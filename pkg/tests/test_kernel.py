import itertools

import numpy as np
import pytest

from eddpc._linalg import condition_number, principal_angles, projection_residual
from eddpc.exceptions import DegenerateKernelError, InsufficientExcitationError, WindowError
from eddpc.kernel import (
    GammaMatrix,
    KernelRep,
    PredictorP,
    build_gamma,
    extract_kernel,
    null_space_predictor,
    preprocess,
    select_rows,
)
from eddpc.lti import collect, simulate
from eddpc.trajectory import Trajectory, hankel
from oracles import fit_initial_state


def _integrator_kernel(integrator_data):
    k = extract_kernel(integrator_data, 2, 1)
    # fix the sign so the row reads [-1, -1, 0, 1]
    return KernelRep(k.R / k.R[0, 3], k.d, k.m, k.n)


def test_integrator_kernel(integrator_data):
    k = extract_kernel(integrator_data, 2, 1)
    assert k.R.shape == (1, 4)
    r = k.R[0] / k.R[0, 3]
    np.testing.assert_allclose(r, [-1, -1, 0, 1], atol=1e-12)
    assert np.abs(k.R @ hankel(integrator_data, 2)).max() < 1e-12


def test_kernel_rows_benchmark_setting(sys4):
    d = sys4.lag + 1
    traj = collect(sys4, 3 * (d + 4) - 1, seed=2)
    k = extract_kernel(traj, d, 4)
    assert k.g == 2 * d - 4
    np.testing.assert_allclose(k.R @ k.R.T, np.eye(k.g), atol=1e-12)
    H = hankel(traj, d)
    assert np.abs(k.R @ H).max() <= 1e-10 * np.abs(H).max()


def test_zero_data_has_no_kernel_rank():
    with pytest.raises(InsufficientExcitationError):
        extract_kernel(Trajectory(np.zeros((20, 2)), 1), 2, 1)


def test_gamma_integrator(integrator_data):
    k = _integrator_kernel(integrator_data)
    G = build_gamma(k, (0,), 3)
    np.testing.assert_allclose(G.matrix, [[-1, -1, 0, 1, 0, 0], [0, 0, -1, -1, 0, 1]], atol=1e-12)
    assert G.shift_count == 1
    np.testing.assert_array_equal(build_gamma(k, (0,), 2).matrix, k.R)
    with pytest.raises(WindowError):
        build_gamma(k, (0,), 1)


def test_gamma_band_structure(sys4, long_data4):
    d = sys4.lag + 1
    k = extract_kernel(long_data4, d, 4)
    G = build_gamma(k, (0, 1), 12).matrix
    assert G.shape == (k.g + 2 * (12 - d), 48)
    first = G[k.g : k.g + 2]
    for s in range(1, 12 - d):
        blk = G[k.g + 2 * s : k.g + 2 * s + 2]
        np.testing.assert_array_equal(blk[:, 4 * s :], first[:, : 48 - 4 * s])


def test_integrator_null_space(integrator_data):
    k = _integrator_kernel(integrator_data)
    G = build_gamma(k, (0,), 3)
    P = null_space_predictor(G, 1, 1)
    assert P.shape == (6, 4)
    assert np.linalg.matrix_rank(P) == 4
    assert np.abs(G.matrix @ P).max() < 1e-12
    with pytest.raises(DegenerateKernelError):
        null_space_predictor(G, 1, 2)


def test_select_rows_trivial_cases(integrator_data, sys4, long_data4):
    assert select_rows(_integrator_kernel(integrator_data), 1, L_target=4)[0] == (0,)
    k = extract_kernel(long_data4, sys4.lag + 1, 4)
    if k.g == 2:
        assert select_rows(k, 2, L_target=12)[0] == (0, 1)


def test_select_rows_against_exhaustive_search(long_data4, sys4):
    k = extract_kernel(long_data4, sys4.lag + 1, 4)
    rows, cond, ok = select_rows(k, 2, kappa_max=1e8, L_target=12)
    conds = {c: condition_number(build_gamma(k, c, 12).matrix)
             for c in itertools.combinations(range(k.g), 2)}
    assert ok and cond <= 1e8
    assert cond == pytest.approx(conds[rows])
    # lexicographic first-pass rule
    first = next(c for c in sorted(conds) if conds[c] <= 1e8)
    assert rows == first


def test_select_rows_flags_unreachable_threshold(long_data4, sys4):
    k = extract_kernel(long_data4, sys4.lag + 1, 4)
    rows, cond, ok = select_rows(k, 2, kappa_max=0.5, L_target=12)
    assert not ok
    best = min(condition_number(build_gamma(k, c, 12).matrix)
               for c in itertools.combinations(range(k.g), 2))
    assert cond == pytest.approx(best)


def test_preprocess_dimensions(integrator_data, sys4):
    res = preprocess(integrator_data, 1, 1, 2)
    assert res.P.shape == (6, 4)
    traj = collect(sys4, 26, seed=5)
    res = preprocess(traj, 4, sys4.lag, 8)
    assert res.P.shape == (48, 28)
    np.testing.assert_allclose(res.P.T @ res.P, np.eye(28), atol=1e-10)


def test_preprocess_is_deterministic(sys4):
    traj = collect(sys4, 26, seed=5)
    a, b = preprocess(traj, 4, sys4.lag, 8), preprocess(traj, 4, sys4.lag, 8)
    assert principal_angles(a.P, b.P).max() <= 1e-10


def test_columns_are_trajectories(sys4):
    res = preprocess(collect(sys4, 26, seed=5), 4, sys4.lag, 8)
    for col in res.P.T:
        w = col.reshape(12, 4)
        _, err = fit_initial_state(sys4.A, sys4.B, sys4.C, sys4.D, w[:, :2], w[:, 2:])
        assert err <= 1e-8


def test_soundness_and_completeness(sys4):
    res = preprocess(collect(sys4, 26, seed=5), 4, sys4.lag, 8)
    rng = np.random.default_rng(0)
    W = np.column_stack([simulate(sys4, rng.uniform(-1, 1, 4), rng.uniform(-1, 1, (12, 2))).stacked()
                         for _ in range(100)])
    assert projection_residual(res.P, W) <= 1e-8
    for beta in rng.normal(size=(100, 28)):
        w = (res.P @ beta).reshape(12, 4)
        _, err = fit_initial_state(sys4.A, sys4.B, sys4.C, sys4.D, w[:, :2], w[:, 2:])
        assert err <= 1e-8 * max(1.0, np.abs(w).max())
    assert np.linalg.matrix_rank(res.P) == 28


def test_json_round_trip(tmp_path, sys4):
    res = preprocess(collect(sys4, 26, seed=5), 4, sys4.lag, 8)
    path = tmp_path / "p.json"
    res.save(path)
    back = PredictorP.load(path)
    np.testing.assert_array_equal(back.P, res.P)
    assert back.rows == res.rows and back.kernel.R.shape == res.kernel.R.shape
    assert isinstance(build_gamma(back.kernel, back.rows, back.L_target), GammaMatrix)
