"""Layers, network specs, loss, training and model files."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import LAYER_KINDS, check_layer, random_layer_case
from mipreduce.neural import (
    Conv1d, Dropout, MaxPool1d, ModelFormatError, Network, NetworkSpec, SpecError, TrainConfig,
    TrainingDiverged, ann_spec, bce_with_logits_loss, cnn_spec, conv_out_len, forward,
    load_model, per_label_bce, predict_probabilities, save_model, train,
)


# ---------------------------------------------------------------- layers
@pytest.mark.parametrize("kind", LAYER_KINDS)
def test_layer_gradients(kind):
    rng = np.random.default_rng(hash(kind) % 2**32)
    for _ in range(5):
        layer, x, tr = random_layer_case(kind, rng)
        assert check_layer(layer, x, rng, train=tr) <= 1e-4


def test_conv_matches_direct_loop():
    rng = np.random.default_rng(0)
    layer = Conv1d(2, 3, 3, 2, 1, False, rng)
    x = rng.standard_normal((2, 2, 9))
    out = layer.forward(x)
    W, b = layer.params
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1)))
    L = conv_out_len(9, 3, 2, 1)
    ref = np.zeros((2, 3, L))
    for n in range(2):
        for o in range(3):
            for t in range(L):
                ref[n, o, t] = (W[o] * xp[n, :, 2 * t:2 * t + 3]).sum() + b[o]
    assert np.allclose(out, ref)


def test_maxpool_padding_never_wins():
    pool = MaxPool1d(3, 1, 1)
    x = -np.ones((1, 1, 4)) * np.arange(1, 5)
    out = pool.forward(x)
    assert np.all(np.isfinite(out)) and out[0, 0, 0] == -1


def test_dropout_expectation():
    rng = np.random.default_rng(1)
    layer = Dropout(0.3)
    x = np.ones((1, 200))
    mean = np.mean([layer.forward(x, train=True, rng=rng).mean() for _ in range(200)])
    assert abs(mean - 1.0) < 0.02
    assert np.array_equal(layer.forward(x, train=False), x)


# ------------------------------------------------------------------ specs
def test_cnn_shapes():
    shapes = cnn_spec().shapes()
    assert shapes[:7] == [(32, 90), (64, 83), (64, 16), (128, 14), (128, 4), (256, 4), (256, 1)]
    assert shapes[-1] == (7,)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.integers(1, 64), st.integers(1, 4))
def test_ann_shape_sweep(layers, width, batch):
    net = Network.build(ann_spec(layers, width), seed=layers)
    out = net.forward(np.zeros((batch, 90)))
    assert out.shape == (batch, 7)
    assert len(net.params) == 2 * (layers + 1)


def test_spec_errors():
    with pytest.raises(SpecError):
        NetworkSpec((("dense", 5),))
    with pytest.raises(SpecError):
        NetworkSpec((("conv1d", 2, 4, 3, 1, 0), ("flatten",), ("dense", 7)))
    with pytest.raises(SpecError):
        NetworkSpec((("conv1d", 1, 4, 100, 1, 0), ("flatten",), ("dense", 7)))
    with pytest.raises(SpecError):
        NetworkSpec((("magic",), ("dense", 7)))
    with pytest.raises(SpecError):
        Network.build(ann_spec(1, 8)).forward(np.zeros((2, 80)))


def test_spec_dict_round_trip():
    spec = cnn_spec(0.1, 0.2)
    assert NetworkSpec.from_dict(spec.to_dict()) == spec


# -------------------------------------------------------------------- loss
def test_loss_at_zero_logits_is_ln2_per_label():
    loss, _ = bce_with_logits_loss(np.zeros((4, 7)), np.eye(4, 7))
    assert loss == pytest.approx(7 * math.log(2))


def test_loss_is_sum_of_per_label_terms():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((5, 7))
    y = rng.integers(0, 2, (5, 7))
    p = 1 / (1 + np.exp(-z))
    naive = -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean(axis=0)
    assert np.allclose(per_label_bce(z, y), naive)
    assert bce_with_logits_loss(z, y)[0] == pytest.approx(naive.sum())


def test_loss_is_stable_when_saturated():
    z = np.array([[800.0, -800.0]])
    loss, g = bce_with_logits_loss(z, np.array([[1, 0]]))
    assert loss == pytest.approx(0.0, abs=1e-300) and np.all(np.isfinite(g))
    loss, _ = bce_with_logits_loss(z, np.array([[0, 1]]))
    assert loss == pytest.approx(1600.0)


def test_loss_gradient_finite_difference():
    rng = np.random.default_rng(3)
    z = rng.standard_normal((3, 7))
    y = rng.integers(0, 2, (3, 7))
    w = rng.uniform(0.5, 2, 7)
    _, g = bce_with_logits_loss(z, y, w)
    num = np.zeros_like(z)
    for i in np.ndindex(z.shape):
        d = np.zeros_like(z)
        d[i] = 1e-6
        num[i] = (bce_with_logits_loss(z + d, y, w)[0] - bce_with_logits_loss(z - d, y, w)[0]) / 2e-6
    assert np.allclose(g, num, rtol=1e-5, atol=1e-9)


def test_whole_network_gradient():
    """Backpropagation through a small convolutional stack matches finite differences."""
    spec = NetworkSpec((("conv1d", 1, 2, 3, 1, 1), ("maxpool1d", 2, 2, 0), ("flatten",),
                        ("dense", 4), ("dense", 3)), input_width=8, output_width=3)
    net = Network.build(spec, seed=5)
    rng = np.random.default_rng(5)
    x = rng.standard_normal((2, 8))
    y = rng.integers(0, 2, (2, 3))
    _, g = bce_with_logits_loss(net.forward(x), y)
    net.backward(g)
    for p, grad in zip(net.params, net.grads):
        flat = p.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + 1e-6
            fp = bce_with_logits_loss(net.forward(x), y)[0]
            flat[i] = old - 1e-6
            fm = bce_with_logits_loss(net.forward(x), y)[0]
            flat[i] = old
            assert grad.reshape(-1)[i] == pytest.approx((fp - fm) / 2e-6, rel=1e-4, abs=1e-8)


# ---------------------------------------------------------------- training
def _toy(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 3, (n, 90)).astype(float)
    Y = np.zeros((n, 7), dtype=int)
    Y[:, 0] = X[:, :10].sum(axis=1) > 10
    Y[:, 1] = 1 - Y[:, 0]
    Y[:, 2] = X[:, 50] > 1
    return X, Y


def test_ann_overfits_small_set():
    X, Y = _toy()
    model = train(ann_spec(2, 64), X, Y, TrainConfig(epochs=600, learning_rate=1e-2), scale=2.0)
    pred = (predict_probabilities(model, X) >= 0.5).astype(int)
    assert (pred == Y).all(axis=1).mean() == 1.0
    assert model.loss_log[-1] < model.loss_log[0]


def test_cnn_trains_a_few_epochs():
    X, Y = _toy(8)
    model = train(cnn_spec(0.1, 0.3), X, Y, TrainConfig(epochs=3, learning_rate=1e-3, batch_size=4))
    assert len(model.loss_log) == 3 and all(np.isfinite(model.loss_log))
    assert predict_probabilities(model, X[0]).shape == (7,)


def test_training_is_deterministic():
    X, Y = _toy(20)
    cfg = TrainConfig(epochs=20, learning_rate=1e-2, batch_size=7, seed=4)
    a = train(ann_spec(1, 16), X, Y, cfg)
    b = train(ann_spec(1, 16), X, Y, cfg)
    assert all(np.array_equal(p, q) for p, q in zip(a.network.params, b.network.params))


def test_training_divergence_is_reported():
    X, Y = _toy(10)
    with pytest.raises(TrainingDiverged, match="epoch"):
        train(ann_spec(2, 32), X * 1e200, Y, TrainConfig(epochs=5, learning_rate=1e3))


def test_train_input_errors():
    X, Y = _toy(4)
    with pytest.raises(SpecError):
        train(ann_spec(1, 4), X[:, :50], Y, TrainConfig(1, 1e-3))
    with pytest.raises(ValueError):
        train(ann_spec(1, 4), X[:0], Y[:0], TrainConfig(1, 1e-3))
    with pytest.raises(ValueError):
        TrainConfig(0, 1e-3)


def test_eval_mode_is_deterministic_and_train_mode_is_not():
    X, Y = _toy(6)
    model = train(cnn_spec(0.2, 0.3), X, Y, TrainConfig(epochs=1, learning_rate=1e-3))
    assert np.array_equal(forward(model, X), forward(model, X))
    rng = np.random.default_rng(0)
    assert not np.array_equal(forward(model, X, "train", rng), forward(model, X, "train", rng))


def test_model_round_trip(tmp_path):
    X, Y = _toy(10)
    model = train(ann_spec(1, 8), X, Y, TrainConfig(epochs=5, learning_rate=1e-2), scale=3.0)
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(predict_probabilities(back, X), predict_probabilities(model, X))
    assert back.scaling["scale"] == 3.0


def test_model_file_errors(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "bad.json")
    (tmp_path / "old.json").write_text('{"format": "other/0"}')
    with pytest.raises(ModelFormatError, match="format"):
        load_model(tmp_path / "old.json")
