import numpy as np
import pytest

from eddpc.exceptions import ConfigurationError, InputError
from eddpc.lti import collect, simulate
from eddpc.ocp import CondensedQp, OcpSpec, assemble, recover_trajectory
from eddpc.predictors import build_predictor, model_predictor
from eddpc.qp import solve


@pytest.fixture
def setup(sys4):
    data = collect(sys4, 47, seed=9)
    preds = {s: build_predictor(s, data.window(0, T - 1), 8, 4, lag=sys4.lag, T_ini=4)
             for s, T in (("DDPC", 47), ("sDDPC", 35), ("SVD-DDPC", 47), ("eDDPC", 26))}
    spec = OcpSpec.box(8, 4, 4)
    past = simulate(sys4, [0.3, -0.2, 0.5, 0.1], np.random.default_rng(0).uniform(-1, 1, (4, 2))).w
    return preds, spec, past


def test_spec_validation():
    with pytest.raises(InputError):
        OcpSpec.box(8, 4, 2, W=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(InputError):
        OcpSpec.box(8, 4, 2, w_s=[5.0, 0.0])
    with pytest.raises(ConfigurationError):
        OcpSpec.box(3, 4, 2)


def test_cost_at_set_point_is_zero(setup):
    _, spec, _ = setup
    assert spec.stage_cost(np.zeros((8, 4))) == 0.0


def test_eddpc_bookkeeping(setup):
    preds, spec, past = setup
    cqp = assemble(preds["eDDPC"], spec, past)
    assert cqp.nv == 28
    assert cqp.qp.A_eq.shape == (32, 28)
    assert cqp.qp.G.shape == (32, 28)
    pa, fu = recover_trajectory(cqp, np.zeros(28))
    assert np.all(pa == 0) and np.all(fu == 0)


def test_dimension_errors(setup):
    preds, spec, past = setup
    with pytest.raises(InputError):
        assemble(preds["eDDPC"], spec, past[:3])
    with pytest.raises(InputError):
        assemble(preds["eDDPC"], OcpSpec.box(6, 4, 4), past)
    with pytest.raises(InputError):
        recover_trajectory(assemble(preds["eDDPC"], spec, past), np.zeros(27))


def test_optimal_cost_agrees_across_schemes(setup, sys4):
    preds, spec, past = setup
    preds["model"] = model_predictor(sys4, 8)
    costs, first = {}, {}
    for tag, pred in preds.items():
        cqp = assemble(pred, spec, past)
        sol = solve(cqp.qp)
        assert sol.ok
        pa, fu = recover_trajectory(cqp, sol.x)
        np.testing.assert_allclose(pa, past, atol=1e-8)
        np.testing.assert_allclose(fu[-4:], 0.0, atol=1e-8)
        assert np.all(fu <= 5 + 1e-8) and np.all(fu >= -5 - 1e-8)
        assert sol.objective == pytest.approx(spec.stage_cost(fu), rel=1e-10, abs=1e-12)
        costs[tag], first[tag] = sol.objective, fu[0]
    ref = costs["model"]
    for tag in preds:
        assert abs(costs[tag] - ref) <= 1e-6 * max(1.0, abs(ref))
        np.testing.assert_allclose(first[tag], first["model"], atol=1e-6)


def test_feasibility_transfer(setup, sys4):
    preds, spec, past = setup
    # a feasible oracle trajectory: drive with the model optimum, recover regressors for each scheme
    cqp = assemble(model_predictor(sys4, 8), spec, past)
    target = cqp.M @ solve(cqp.qp).x
    for pred in preds.values():
        c = assemble(pred, spec, past)
        S = pred.regressor_constraints()
        K = np.vstack([c.M, S]) if S.size else c.M
        rhs = np.concatenate([target, np.zeros(S.shape[0])]) if S.size else target
        r = np.linalg.lstsq(K, rhs, rcond=None)[0]
        assert np.abs(c.M @ r - target).max() <= 1e-8
        assert np.abs(c.qp.A_eq @ r - c.qp.b_eq).max() <= 1e-8


def test_json_round_trip(tmp_path, setup):
    preds, spec, past = setup
    cqp = assemble(preds["eDDPC"], spec, past)
    path = tmp_path / "qp.json"
    cqp.save(path)
    import json
    back = CondensedQp.from_dict(json.loads(path.read_text()))
    np.testing.assert_array_equal(back.qp.H, cqp.qp.H)
    np.testing.assert_array_equal(back.M, cqp.M)
