import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from eddpc.closed_loop import run, sample_initial_past
from eddpc.exceptions import InputError, InsufficientExcitationError
from eddpc.estimator import PredictiveController, TrajectoryPredictor
from eddpc.lti import collect, simulate
from eddpc.ocp import OcpSpec
from eddpc.predictors import build_predictor


def test_params_round_trip():
    c = PredictiveController(scheme="ddpc", n=4, L=8, m=2)
    assert clone(c).get_params() == c.get_params()
    c.set_params(L=10)
    assert c.L == 10


def test_predict_matches_closed_loop_first_input(sys4):
    data = collect(sys4, 26, seed=1)
    ctrl = PredictiveController(n=4, L=8, m=2, lag=sys4.lag).fit(data.w)
    past, x0 = sample_initial_past(sys4, -5 * np.ones(4), 5 * np.ones(4), seed=3)
    lg = run(sys4, build_predictor("eddpc", data, 8, 4, lag=sys4.lag), OcpSpec.box(8, 4, 4), past,
             max_steps=1)
    np.testing.assert_allclose(ctrl.predict(past), lg.steps[0].u, atol=1e-9)
    batch = ctrl.predict(np.vstack([past.reshape(1, -1)] * 2))
    assert batch.shape == (2, 2)


def test_unfitted_and_bad_input(sys4):
    with pytest.raises(NotFittedError):
        PredictiveController(n=4, L=8, m=2).predict(np.zeros((4, 4)))
    ctrl = PredictiveController(n=4, L=8, m=2, lag=sys4.lag).fit(collect(sys4, 26, seed=1).w)
    with pytest.raises(InputError):
        ctrl.predict(np.zeros((1, 15)))
    with pytest.raises(InputError):
        PredictiveController(n=4, L=8, m=4).fit(np.zeros((30, 4)))
    with pytest.raises(InsufficientExcitationError):
        PredictiveController(n=4, L=8, m=2, lag=sys4.lag).fit(collect(sys4, 8, seed=1).w)


def test_transformer_round_trip(sys4):
    tp = TrajectoryPredictor(n=4, L=8, m=2, lag=sys4.lag).fit(collect(sys4, 26, seed=1).w)
    rng = np.random.default_rng(0)
    W = np.vstack([simulate(sys4, rng.uniform(-1, 1, 4), rng.uniform(-1, 1, (12, 2))).stacked()
                   for _ in range(5)])
    beta = tp.transform(W)
    assert beta.shape == (5, 28)
    np.testing.assert_allclose(tp.inverse_transform(beta), W, atol=1e-10)
    with pytest.raises(InputError):
        tp.transform(W[:, :10])
