import math
import warnings

import numpy as np
import pytest

from gatedalpha.errors import ConfigError, DataError, NumericError, ShapeError
from gatedalpha.nn import (
    Adam,
    BatchNorm,
    Dropout,
    FeedForwardBlock,
    GatedActivation,
    Linear,
    Param,
    ReLU,
    bce_with_logits,
    cosine_similarity,
    ic_loss,
    sigmoid,
)
from gatedalpha.nn.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from gradcheck import CASES, worst_error

# per-operation tolerances; the acceptance suite applies the looser 1e-4 to all of them
TOLERANCE = {
    "linear": 1e-6,
    "relu": 1e-6,
    "sigmoid": 1e-6,
    "batchnorm_train": 1e-5,
    "dropout_frozen_mask": 1e-6,
    "ffn_block": 1e-5,
    "gated": 1e-5,
    "gated_mid_relu": 1e-5,
    "bce": 1e-6,
    "ic_predictive": 1e-5,
    "ic_literal": 1e-5,
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_gradient_matches_finite_differences(name):
    assert worst_error(name) < TOLERANCE[name]


# --------------------------------------------------------------------------
# linear


def test_linear_identity():
    layer = Linear(3, 3)
    layer.W.data[:] = np.eye(3)
    x = np.random.default_rng(0).normal(size=(4, 3))
    assert np.array_equal(layer.forward(x), x)


def test_linear_hand_case():
    layer = Linear(2, 2)
    layer.W.data[:] = [[1, 1], [0, 1]]
    layer.b.data[:] = [0.5, -0.5]
    assert layer.forward(np.array([[1.0, 2.0]])).tolist() == [[3.5, 1.5]]


def test_linear_param_count_and_shape_error():
    layer = Linear(7, 3, np.random.default_rng(0))
    assert sum(p.data.size for p in layer.params()) == 3 * (7 + 1)
    with pytest.raises(ShapeError, match=r"\(n, 7\).*\(2, 5\)"):
        layer.forward(np.zeros((2, 5)))


def test_linear_gradients_accumulate():
    rng = np.random.default_rng(1)
    layer = Linear(3, 2, rng)
    x, g = rng.normal(size=(4, 3)), rng.normal(size=(4, 2))
    layer.forward(x)
    layer.backward(g)
    once = layer.W.grad.copy()
    layer.backward(g)
    np.testing.assert_allclose(layer.W.grad, 2 * once)
    np.testing.assert_allclose(once, g.T @ x)


# --------------------------------------------------------------------------
# relu / sigmoid


def test_relu_values_and_negative_grad():
    r = ReLU()
    assert r.forward(np.array([[-1.0, 0.0, 2.0]])).tolist() == [[0.0, 0.0, 2.0]]
    x = -np.abs(np.random.default_rng(0).normal(size=(3, 4))) - 0.1
    assert np.all(r.forward(x) == 0) and np.all(r.backward(np.ones_like(x)) == 0)


def test_sigmoid_stable_at_extremes():
    s = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert s.tolist() == [0.0, 0.5, 1.0]
    assert np.all(np.isfinite(s))


# --------------------------------------------------------------------------
# batch normalization


def test_batchnorm_hand_case():
    bn = BatchNorm(1, eps=0.0)
    out = bn.forward(np.array([[1.0], [2.0], [3.0]]), train=True)
    np.testing.assert_allclose(out[:, 0], [-math.sqrt(1.5), 0.0, math.sqrt(1.5)], atol=1e-15)
    np.testing.assert_allclose(bn.running_mean, [0.2])
    np.testing.assert_allclose(bn.running_var, [0.9 * 1 + 0.1 * 2 / 3])


def test_batchnorm_affine():
    bn = BatchNorm(1, eps=0.0)
    bn.gamma.data[:] = 3.0
    bn.beta.data[:] = 1.0
    out = bn.forward(np.random.default_rng(0).normal(5, 2, size=(50, 1)), train=True)
    assert out.mean() == pytest.approx(1.0, abs=1e-12)
    assert out.std() == pytest.approx(3.0, abs=1e-12)


def test_batchnorm_train_statistics():
    rng = np.random.default_rng(0)
    for _ in range(20):
        bn = BatchNorm(32)
        x = rng.normal(rng.normal(size=32), rng.uniform(0.5, 3, 32), size=(64, 32))
        bn.forward(x, train=True)
        var_batch = x.var(axis=0)
        assert np.max(np.abs(bn.xhat.mean(axis=0))) < 1e-8
        # with eps folded in, the normalized variance is var / (var + eps)
        folded = bn.xhat.var(axis=0) * (var_batch + bn.eps) / var_batch
        assert np.max(np.abs(folded - 1.0)) < 1e-6


def test_batchnorm_inference_independent_of_batch():
    rng = np.random.default_rng(2)
    bn = BatchNorm(8)
    for _ in range(5):
        bn.forward(rng.normal(size=(32, 8)), train=True)
    x = rng.normal(size=(40, 8))
    whole = bn.forward(x, train=False)
    halves = np.concatenate([bn.forward(x[:17], train=False), bn.forward(x[17:], train=False)])
    assert whole.tobytes() == halves.tobytes()
    assert bn.forward(x, train=False).tobytes() == whole.tobytes()


def test_batchnorm_requires_two_rows_in_training():
    with pytest.raises(ShapeError):
        BatchNorm(3).forward(np.zeros((1, 3)), train=True)
    BatchNorm(3).forward(np.zeros((1, 3)), train=False)


def test_batchnorm_init():
    bn = BatchNorm(5)
    assert np.all(bn.gamma.data == 1) and np.all(bn.beta.data == 0)


# --------------------------------------------------------------------------
# dropout


def test_dropout_identity_cases():
    x = np.random.default_rng(0).normal(size=(10, 10))
    assert Dropout(0.5).forward(x, train=False) is x
    assert Dropout(0.0).forward(x, train=True).tobytes() == x.tobytes()


def test_dropout_rejects_p_one():
    with pytest.raises(ConfigError):
        Dropout(1.0)


def test_dropout_law_of_large_numbers():
    rng = np.random.default_rng(0)
    x = rng.uniform(0.5, 1.5, size=(1000, 1000))
    out = Dropout(0.15, np.random.default_rng(1)).forward(x, train=True)
    survivors = np.mean(out != 0)
    assert abs(survivors - 0.85) < 0.003
    assert abs(out.mean() / x.mean() - 1) < 0.01
    np.testing.assert_allclose(out[out != 0], x[out != 0] / 0.85)


def test_dropout_backward_uses_same_mask():
    d = Dropout(0.4, np.random.default_rng(3))
    x = np.ones((20, 20))
    y = d.forward(x, train=True)
    assert np.array_equal(d.backward(np.ones_like(x)), y)


# --------------------------------------------------------------------------
# blocks


def test_ffn_zero_init_is_identity():
    rng = np.random.default_rng(0)
    block = FeedForwardBlock(4, 2, dropout=0.3, rng=rng)
    for lin in (block.lin1, block.lin2):
        lin.W.data[:] = 0
        lin.b.data[:] = 0
    x = rng.normal(size=(6, 4))
    assert block.forward(x, train=True).tobytes() == x.tobytes()
    assert block.forward(x, train=False).tobytes() == x.tobytes()


def test_ffn_widths():
    block = FeedForwardBlock(4, 2)
    assert block.lin1.W.shape == (8, 4) and block.lin2.W.shape == (4, 8)
    assert block.forward(np.zeros((3, 4)), train=False).shape == (3, 4)


def test_ffn_projection_shortcut_for_unequal_dims():
    rng = np.random.default_rng(0)
    block = FeedForwardBlock(4, 2, rng=rng, d_out=3)
    assert block.proj is not None
    assert block.forward(rng.normal(size=(5, 4)), train=True).shape == (5, 3)


def test_gate_saturated_is_identity():
    x = np.random.default_rng(0).normal(size=(6, 8))
    g = GatedActivation(8, 2)
    for lin in (g.down, g.up):
        lin.W.data[:] = 0
    g.up.b.data[:] = 20.0
    assert np.max(np.abs(g.forward(x) - x)) < 1e-8


def test_gate_zero_weights_halves():
    x = np.random.default_rng(0).normal(size=(6, 8))
    g = GatedActivation(8, 4)
    for lin in (g.down, g.up):
        lin.W.data[:] = 0
        lin.b.data[:] = 0
    assert np.array_equal(g.forward(x), x / 2)


def test_gate_shrinks_magnitudes():
    rng = np.random.default_rng(5)
    g = GatedActivation(16, 4, rng)
    x = rng.normal(0, 5, size=(50, 16))
    y = g.forward(x)
    assert np.all(np.abs(y) <= np.abs(x))
    assert np.all((g.gate > 0) & (g.gate < 1))


def test_gate_divisor_must_divide():
    with pytest.raises(ConfigError):
        GatedActivation(10, 3)


def test_inference_forward_is_pure():
    rng = np.random.default_rng(0)
    block = FeedForwardBlock(6, 2, dropout=0.5, rng=rng)
    x = rng.normal(size=(9, 6))
    assert block.forward(x, False).tobytes() == block.forward(x, False).tobytes()


# --------------------------------------------------------------------------
# losses


def test_bce_values():
    assert bce_with_logits(np.array([[0.0]]), np.array([1]))[0] == pytest.approx(math.log(2), abs=1e-15)
    loss, grad = bce_with_logits(np.array([[30.0]]), np.array([1]))
    assert 0 <= loss < 1e-12
    loss, _ = bce_with_logits(np.array([[-800.0], [800.0]]), np.array([1, 0]))
    assert loss == pytest.approx(800.0)


def test_bce_grad_formula():
    z = np.array([[0.3], [-1.2]])
    y = np.array([1.0, 0.0])
    _, g = bce_with_logits(z, y)
    np.testing.assert_allclose(g[:, 0], (sigmoid(z[:, 0]) - y) / 2)


def test_cosine_similarity_cases():
    assert cosine_similarity([1, 0], [0, 1]) == 0
    assert cosine_similarity([1, 1], [2, 2]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [-1, 0]) == -1
    with pytest.raises(ValueError):
        cosine_similarity([0, 0], [1, 0])


def test_ic_single_aligned_factor():
    r = np.array([0.1, -0.3, 0.2, 0.05])
    C = (3.0 * r)[:, None]
    assert ic_loss(C, r, mode="literal")[0] == pytest.approx(1.0)
    assert ic_loss(C, r, mode="predictive")[0] == pytest.approx(-1.0)


def test_ic_pairwise_term_counts_ordered_pairs():
    rng = np.random.default_rng(0)
    r = rng.normal(size=6)
    c = rng.normal(size=6)
    C = np.column_stack([c, c])
    lam = 0.7
    s = cosine_similarity(c, r)
    assert ic_loss(C, r, lam, "literal")[0] == pytest.approx(2 * s - 2 * lam)
    assert ic_loss(C, r, lam, "predictive")[0] == pytest.approx(-2 * abs(s) + lam)


def test_ic_zero_column_contributes_nothing():
    rng = np.random.default_rng(0)
    r = rng.normal(size=5)
    c = rng.normal(size=5)
    with pytest.warns(RuntimeWarning, match="zero-norm"):
        loss, grad = ic_loss(np.column_stack([c, np.zeros(5)]), r, 1.0, "literal")
    assert loss == pytest.approx(cosine_similarity(c, r))
    assert np.all(grad[:, 1] == 0)


def test_ic_predictive_improves_when_column_replaced_by_returns():
    rng = np.random.default_rng(3)
    for _ in range(20):
        r = rng.normal(size=12)
        C = rng.normal(size=(12, 4))
        for i in range(4):
            better = C.copy()
            better[:, i] = r
            # the alignment term alone (lam = 0) strictly improves
            assert ic_loss(better, r, 0.0)[0] < ic_loss(C, r, 0.0)[0]


def test_ic_requires_two_stocks():
    with pytest.raises(ShapeError):
        ic_loss(np.ones((1, 2)), np.ones(1))


# --------------------------------------------------------------------------
# Adam


def test_adam_zero_grads_leave_params():
    p = Param(np.array([1.0, -2.0]), "p")
    opt = Adam([p])
    p.grad[:] = [0.5, 0.5]
    opt.step()
    after_first = p.data.copy()
    m_before = opt.m["p"].copy()
    p.zero_grad()
    opt.step()
    np.testing.assert_allclose(opt.m["p"], 0.9 * m_before)
    fresh = Param(np.array([3.0]), "q")
    opt2 = Adam([fresh])
    opt2.step()
    assert fresh.data.tolist() == [3.0]
    assert after_first.shape == (2,)


def test_adam_matches_hand_executed_update():
    p = Param(np.array([0.0]), "w")
    opt = Adam([p], lr=0.1)
    p.grad[:] = 1.0
    opt.step()
    assert p.data[0] == pytest.approx(-0.1, abs=1e-8)
    # continue with varying grads against a scalar oracle
    m = v = 0.0
    w = 0.0
    b1, b2, eps, lr = 0.9, 0.999, 1e-8, 0.1
    p.data[:] = 0.0
    opt = Adam([p], lr=lr)
    for t, g in enumerate([1.0, -0.5, 2.0, 0.25, 0.0], start=1):
        p.grad[:] = g
        opt.step()
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        assert p.data[0] == pytest.approx(w, abs=1e-15)


def test_adam_rejects_non_finite_gradient():
    p = Param(np.zeros(3), "blocks.0.lin1.W")
    p.grad[1] = np.nan
    with pytest.raises(NumericError, match="blocks.0.lin1.W"):
        Adam([p]).step()


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(0)
        p = Param(rng.normal(size=(3, 3)), "p")
        opt = Adam([p], lr=0.01)
        for _ in range(50):
            p.grad[:] = rng.normal(size=(3, 3))
            opt.step()
        return p.data.tobytes()

    assert run() == run()


def test_adam_state_round_trip():
    p = Param(np.ones(2), "p")
    opt = Adam([p])
    p.grad[:] = [1.0, 2.0]
    opt.step()
    other = Adam([Param(np.ones(2), "p")])
    other.load_state_dict(opt.state_dict())
    assert other.t == 1 and np.array_equal(other.m["p"], opt.m["p"])


# --------------------------------------------------------------------------
# checkpoints


def test_checkpoint_byte_exact_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {"a.W": rng.normal(size=(3, 4)), "a.b": rng.normal(size=4), "t": np.array(7.0), "e": np.zeros((0, 2))}
    blob = encode_checkpoint(tensors, {"kind": "x"})
    assert blob.startswith(b"GDNN1")
    back, header = decode_checkpoint(blob)
    assert header == {"kind": "x"}
    for k, v in tensors.items():
        assert back[k].shape == v.shape and back[k].tobytes() == v.tobytes()
    assert encode_checkpoint(back, header) == blob
    path = tmp_path / "c.bin"
    save_checkpoint(path, tensors, header)
    assert path.read_bytes() == blob
    assert load_checkpoint(path)[0]["a.W"].tobytes() == tensors["a.W"].tobytes()


def test_checkpoint_rejects_corruption():
    blob = encode_checkpoint({"x": np.ones(3)})
    with pytest.raises(DataError, match="magic"):
        decode_checkpoint(b"XXXXX" + blob[5:])
    with pytest.raises(DataError, match="truncated"):
        decode_checkpoint(blob[:-4])


def test_checkpoint_preserves_special_values():
    x = np.array([np.inf, -0.0, 5e-324, np.nan])
    back, _ = decode_checkpoint(encode_checkpoint({"x": x}))
    assert back["x"].tobytes() == x.tobytes()


def test_no_warnings_in_clean_forward():
    rng = np.random.default_rng(0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        FeedForwardBlock(8, 4, 0.1, rng).forward(rng.normal(size=(16, 8)), train=True)
