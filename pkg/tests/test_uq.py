import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcpower.data import Standardizer, split, standardize_split
from mcpower.model import NetworkConfig, forward, init_network, with_dropout
from mcpower.synthetic import heteroscedastic_sine
from mcpower.train import TrainConfig, train
from mcpower.uq import (
    McConfig,
    aleatoric_variance,
    epistemic_variance,
    mc_samples,
    predictions_frame,
    predictive_mean,
    summarize,
)


@pytest.fixture(scope="module")
def sine_model():
    x, y = heteroscedastic_sine(2000, seed=2)
    sp = split(x, y, (0.8, 0.1, 0.1), "shuffled", 0)
    stz = Standardizer.fit(sp.x_train, sp.y_train, ["x"])
    net, _ = train(standardize_split(sp, stz), NetworkConfig(input_dim=1, hidden_width=32),
                   TrainConfig(epochs=60, batch_size=32))
    return net, stz


def two_pass(d):
    d = np.asarray(d, dtype=float)
    mean = math.fsum(d) / len(d)
    return mean, math.fsum((v - mean) ** 2 for v in d) / len(d)


def test_hand_cases():
    assert predictive_mean([1.0, 2.0, 3.0]) == 2.0
    assert epistemic_variance([1.0, 2.0, 3.0]) == pytest.approx(2 / 3, rel=1e-15)
    assert predictive_mean([4.5]) == 4.5 and epistemic_variance([4.5]) == 0.0
    assert epistemic_variance([3.0] * 7) == 0.0
    assert aleatoric_variance([0.0, 0.0]) == 1.0
    assert aleatoric_variance([0.0, math.log(3)]) == pytest.approx(2.0)


def test_empty_draws_raise():
    for fn in (predictive_mean, epistemic_variance, aleatoric_variance):
        with pytest.raises(ValueError):
            fn(np.empty((0, 3)))


def test_aleatoric_overflow_names_draw():
    with pytest.raises(FloatingPointError, match="draw 1"):
        aleatoric_variance(np.array([[0.0], [1000.0]]))


def test_mean_matches_high_precision_oracle(rng):
    d = rng.normal(5, 3, size=10_000)
    m, v = two_pass(d)
    assert abs(predictive_mean(d) - m) < 1e-10
    assert abs(epistemic_variance(d) - v) < 1e-10


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(-1e3, 1e3)))
def test_oracle_equivalence_property(d):
    m, v = two_pass(d)
    assert abs(predictive_mean(d) - m) < 1e-10
    assert abs(epistemic_variance(d) - v) < 1e-10 * max(1.0, v)
    assert epistemic_variance(d) >= 0


def test_near_zero_dropout_collapses_to_off(rng):
    net = with_dropout(init_network(NetworkConfig(input_dim=2, hidden_width=16)), 1e-13)
    x = rng.normal(size=(20, 2))
    mus, lvs = mc_samples(net, x, McConfig(passes=10))
    off_mu, off_lv, _ = forward(net, x)
    assert np.max(np.abs(mus - off_mu)) < 1e-6 and np.max(np.abs(lvs - off_lv)) < 1e-6


def test_off_mode_single_pass_has_no_epistemic(rng):
    net = init_network(NetworkConfig(input_dim=2, hidden_width=16))
    mus, _ = mc_samples(net, rng.normal(size=(50, 2)), McConfig(passes=1, mask_mode="off"))
    assert np.all(epistemic_variance(mus) < 1e-12)


def test_draws_deterministic_and_prefix_stable(rng):
    net = init_network(NetworkConfig(input_dim=2, hidden_width=8))
    x = rng.normal(size=(30, 2))
    a = mc_samples(net, x, McConfig(passes=50, seed=3))[0]
    b = mc_samples(net, x, McConfig(passes=50, seed=3))[0]
    c = mc_samples(net, x, McConfig(passes=100, seed=3))[0]
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c[:50])
    assert not np.array_equal(a, mc_samples(net, x, McConfig(passes=50, seed=4))[0])


def test_mc_config_validation():
    with pytest.raises(ValueError):
        McConfig(passes=0)
    with pytest.raises(ValueError):
        McConfig(mask_mode="soft")


def test_summarize_scaling_laws():
    net = init_network(NetworkConfig(input_dim=1, hidden_width=4))
    for a in net.param_arrays().values():
        if a is not net.gate_logits:
            a[...] = 0.0
    stz = Standardizer(np.zeros(1), np.ones(1), 300.0, 400.0)
    s = summarize(net, np.zeros((3, 1)), McConfig(passes=5), stz)
    np.testing.assert_allclose(s.mean, 300.0)
    np.testing.assert_allclose(s.aleatoric_var, 400.0 ** 2)
    assert stz.inverse_variance(0.01) == pytest.approx(1600.0)


def test_summarize_matches_manual_composition(sine_model, rng):
    net, stz = sine_model
    x = rng.uniform(0, 1, (5, 1))
    mc = McConfig(passes=20, seed=8)
    s = summarize(net, x, mc, stz, keep_draws=True)
    z = (x - stz.x_mean) / stz.x_std
    mus, lvs = [], []
    from mcpower.numerics import RngStream, stream_id
    for b in range(20):
        mu, lv, _ = forward(net, z, "hard", RngStream(8, stream_id("mc", b, 0)))
        mus.append(mu)
        lvs.append(lv)
    mus, lvs = np.array(mus), np.array(lvs)
    np.testing.assert_allclose(s.mean, mus.mean(0) * stz.y_std + stz.y_mean, rtol=1e-13)
    np.testing.assert_allclose(s.epistemic_var, mus.var(0) * stz.y_std ** 2, rtol=1e-12)
    np.testing.assert_allclose(s.aleatoric_var, np.exp(lvs).mean(0) * stz.y_std ** 2, rtol=1e-13)
    assert np.all(s.aleatoric_var > 0) and np.all(s.epistemic_var >= 0)


def test_averaged_aleatoric_close_to_plugin(sine_model):
    net, stz = sine_model
    x = np.linspace(0.02, 0.98, 50)[:, None]
    s = summarize(net, x, McConfig(passes=100), stz)
    _, lv, _ = forward(net, stz.transform_x(x))
    plugin = np.exp(lv) * stz.y_std ** 2
    assert np.max(np.abs(s.aleatoric_var / plugin - 1)) < 0.3


def test_standard_error_shrinks_like_root_b(sine_model):
    """Spread of the MC mean over 20 seeds, averaged over several inputs, per doubling of B."""
    net, stz = sine_model
    z = stz.transform_x(np.linspace(0.05, 0.95, 12)[:, None])
    ses = []
    for B in (25, 50, 100, 200):
        means = np.array([predictive_mean(mc_samples(net, z, McConfig(passes=B, seed=s))[0]) for s in range(20)])
        ses.append(means.std(axis=0, ddof=1).mean())
    ratios = np.array(ses[1:]) / np.array(ses[:-1])
    assert np.all((ratios >= 0.6) & (ratios <= 0.85)), ratios


def test_predictions_frame_schema():
    from mcpower.uq import PredictiveSummary
    s = PredictiveSummary(np.array([1.0, 2.0]), np.array([4.0, 9.0]), np.array([1.0, 16.0]))
    df = predictions_frame(s, [5.0, 6.0], actual=[1.5, 2.5], row_id=[10, 11])
    assert list(df.columns) == ["row_id", "wind_speed", "power_pred_kw", "epistemic_std_kw",
                                "aleatoric_std_kw", "power_actual_kw"]
    assert df["epistemic_std_kw"].tolist() == [2.0, 3.0]
    assert "power_actual_kw" not in predictions_frame(s, [5.0, 6.0]).columns
