import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanforecast import tensor as T
from kanforecast.ensemble import EnsembleModel, ensemble_fit, ensemble_predict
from kanforecast.errors import ConfigurationError, ContractError
from kanforecast.gradcheck import max_gradient_error
from kanforecast.models import RNN_MODELS, build_model
from kanforecast.tensor import Tensor
from kanforecast.train import TrainConfig

SMALL = {"hidden": 3}


def _bases(seed=0, d=2):
    return [build_model(k, d, 5, seed + i, SMALL) for i, k in enumerate(RNN_MODELS)]


def test_needs_four_bases():
    with pytest.raises(ContractError):
        EnsembleModel(_bases()[:3])
    with pytest.raises(ConfigurationError):
        build_model("Ensemble", 2, 5, 0)


def test_equal_logits_average():
    m = EnsembleModel(_bases())
    out = m.forward(np.array([[1.0, 2.0, 3.0, 4.0]])).data
    assert out[0, 0] == 2.5


def test_saturated_logit_selects_base():
    m = EnsembleModel(_bases())
    m.logits.data[2] = 50.0
    out = m.forward(np.array([[1.0, 2.0, 3.0, 4.0]])).data
    assert out[0, 0] == pytest.approx(3.0, abs=1e-15)


def test_zero_steps_uniform():
    np.testing.assert_array_equal(EnsembleModel(_bases()).coefficients(), [0.25] * 4)


def test_only_logits_trainable():
    m = EnsembleModel(_bases())
    assert list(m.trainable()) == ["logits"]


def test_logit_gradient():
    m = EnsembleModel(_bases())
    m.logits.data = np.array([0.3, -1.0, 2.0, 0.1])
    preds = np.random.default_rng(0).normal(size=(6, 4))
    w = Tensor(np.random.default_rng(1).normal(size=(6, 1)))
    assert max_gradient_error(lambda: T.tensor_sum(m.forward(preds) * w), [m.logits]) < 1e-4


def test_convex_hull_on_windows():
    m = EnsembleModel(_bases())
    m.logits.data = np.array([1.0, -2.0, 0.5, 3.0])
    windows = np.random.default_rng(2).uniform(0, 1, size=(1000, 5, 2))
    base = m.features(windows)
    out = ensemble_predict(m, windows)
    assert np.all(out >= base.min(axis=1) - 1e-12)
    assert np.all(out <= base.max(axis=1) + 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=4, max_size=4))
def test_coefficients_sum_to_one(logits):
    m = EnsembleModel(_bases())
    m.logits.data = np.array(logits)
    c = m.coefficients()
    assert abs(c.sum() - 1.0) <= 1e-12
    assert np.all((c >= 0) & (c <= 1))


def _exact_base_task():
    """Targets equal to base 1's predictions; the others are off by fixed offsets."""
    bases = _bases(seed=10)
    windows = np.random.default_rng(3).uniform(0, 1, size=(96, 5, 2))
    y = bases[1].predict(windows)
    return bases, windows, y


def test_fit_prefers_exact_base_and_freezes_others():
    bases, windows, y = _exact_base_task()
    before = [b.state_dict() for b in bases]
    m = EnsembleModel(bases)
    cfg = TrainConfig(model="Ensemble", epochs=400, patience=400, lr=0.05, batch_size=32)
    ckpt, history = ensemble_fit(m, (windows[:64], y[:64]), (windows[64:], y[64:]), cfg)
    assert m.coefficients()[1] > 0.9
    for b, state in zip(bases, before):
        for k, v in b.state_dict().items():
            assert v.tobytes() == state[k].tobytes()
    assert history.rows
    assert abs(m.coefficients().sum() - 1.0) <= 1e-12
    assert ckpt.state["logits"].tobytes() == m.logits.data.tobytes()


def test_state_round_trip():
    m = EnsembleModel(_bases())
    m.logits.data = np.array([0.1, 0.2, 0.3, 0.4])
    clone = EnsembleModel(_bases(seed=99))
    clone.load_state_dict(m.state_dict())
    w = np.random.default_rng(4).uniform(size=(3, 5, 2))
    assert ensemble_predict(clone, w).tobytes() == ensemble_predict(m, w).tobytes()
