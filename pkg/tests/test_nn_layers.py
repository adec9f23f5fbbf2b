import numpy as np
import pytest

from carle.errors import ParameterError
from carle.nn.layers import Conv1d, Dense, Flatten, Lstm, MaxPool1, MultiHeadAttention
from carle.nn.model import ResCnnUnit
from conftest import jiggle_biases, layer_gradcheck

TOL = 1e-4


class TestDense:
    def test_gradcheck(self, rng):
        layer = Dense(5, 3, rng, "d")
        jiggle_biases(layer, rng)
        x = rng.normal(size=(4, 5))
        wp, wx = layer_gradcheck(layer, x, rng=rng)
        assert wp < TOL and wx < TOL

    def test_gradcheck_3d_input(self, rng):
        layer = Dense(4, 2, rng, "d")
        jiggle_biases(layer, rng)
        x = rng.normal(size=(3, 5, 4))
        wp, wx = layer_gradcheck(layer, x, rng=rng)
        assert wp < TOL and wx < TOL

    def test_relu_activation_masks(self, rng):
        layer = Dense(3, 2, rng, "d", activation="relu")
        x = rng.normal(size=(10, 3))
        out = layer.forward(x)
        assert np.all(out >= 0)


class TestConv1d:
    def test_gradcheck(self, rng):
        for kernel in (1, 2, 3):
            layer = Conv1d(3, 2, kernel, rng, "c")
            jiggle_biases(layer, rng)
            x = rng.normal(size=(2, 6, 3))
            wp, wx = layer_gradcheck(layer, x, rng=rng)
            assert wp < TOL and wx < TOL

    def test_same_padding_output_length(self, rng):
        for kernel in (1, 2, 3, 4):
            layer = Conv1d(2, 5, kernel, rng, "c")
            out = layer.forward(rng.normal(size=(3, 7, 2)))
            assert out.shape == (3, 7, 5)

    def test_l2_gradient_is_lambda_w(self, rng):
        lam = 0.01
        layer = Conv1d(2, 2, 2, rng, "c", l2=lam)
        layer.zero_grads()
        layer.add_reg_grads()
        assert np.allclose(layer.grads["W"], lam * layer.params["W"], rtol=0, atol=0)
        assert layer.reg_loss() == pytest.approx(0.5 * lam * np.sum(layer.params["W"] ** 2))


class TestMaxPool1:
    def test_identity(self, rng):
        pool = MaxPool1(1)
        x = rng.normal(size=(2, 4, 3))
        assert np.array_equal(pool.forward(x), x)
        assert np.array_equal(pool.backward(x), x)

    def test_rejects_other_sizes(self):
        with pytest.raises(ParameterError):
            MaxPool1(2)


class TestLstm:
    def test_gradcheck(self, rng):
        layer = Lstm(3, 4, rng, "l")
        jiggle_biases(layer, rng)
        x = rng.normal(size=(2, 5, 3))
        wp, wx = layer_gradcheck(layer, x, rng=rng)
        assert wp < TOL and wx < TOL

    def test_gate_ranges_on_wild_inputs(self, rng):
        layer = Lstm(4, 6, rng, "l")
        x = rng.uniform(-10, 10, size=(3, 8, 4))
        layer.forward(x)
        stats = layer.gate_ranges()
        for key in ("i", "f", "o"):
            lo, hi = stats[key]
            assert 0.0 < lo and hi < 1.0
        lo, hi = stats["g"]
        assert -1.0 < lo and hi < 1.0

    def test_output_shape_full_sequence(self, rng):
        layer = Lstm(3, 7, rng, "l")
        out = layer.forward(rng.normal(size=(2, 5, 3)))
        assert out.shape == (2, 5, 7)

    def test_clear_cache(self, rng):
        layer = Lstm(2, 3, rng, "l")
        layer.forward(rng.normal(size=(1, 4, 2)))
        assert layer._cache is not None
        layer.clear_cache()
        assert layer._cache is None


class TestMultiHeadAttention:
    def test_gradcheck(self, rng):
        layer = MultiHeadAttention(4, 2, 4, rng, "m")
        jiggle_biases(layer, rng)
        x = rng.normal(size=(2, 3, 4))
        wp, wx = layer_gradcheck(layer, x, rng=rng)
        assert wp < TOL and wx < TOL

    def test_attention_rows_sum_to_one(self, rng):
        layer = MultiHeadAttention(6, 3, 6, rng, "m")
        layer.forward(rng.normal(size=(4, 5, 6)))
        attn = layer.attention_weights()
        assert attn.shape == (4, 3, 5, 5)
        assert np.all(np.abs(attn.sum(axis=-1) - 1.0) < 1e-6)

    def test_output_width_preserved(self, rng):
        layer = MultiHeadAttention(5, 2, 8, rng, "m")
        out = layer.forward(rng.normal(size=(2, 4, 5)))
        assert out.shape == (2, 4, 5)

    def test_model_dim_must_divide(self, rng):
        with pytest.raises(ParameterError):
            MultiHeadAttention(4, 3, 8, rng, "m")


class TestFlatten:
    def test_round_trip(self, rng):
        layer = Flatten()
        x = rng.normal(size=(3, 4, 5))
        out = layer.forward(x)
        assert out.shape == (3, 20)
        assert np.array_equal(layer.backward(out), x)


class _UnitWrapper:
    """Adapt ResCnnUnit to the layer_gradcheck interface."""

    def __init__(self, unit):
        self.unit = unit
        self.params = {}
        self.grads = {}
        for layer in unit.layers():
            for key, val in layer.params.items():
                self.params[f"{layer.name}.{key}"] = val
        self.zero_grads()

    def zero_grads(self):
        for layer in self.unit.layers():
            layer.zero_grads()
        self._sync()

    def _sync(self):
        for layer in self.unit.layers():
            for key, val in layer.grads.items():
                self.grads[f"{layer.name}.{key}"] = val

    def forward(self, x):
        return self.unit.forward(x)

    def backward(self, dout):
        dx = self.unit.backward(dout)
        self._sync()
        return dx


class TestResCnnUnit:
    def test_gradcheck_with_projection(self, rng):
        unit = ResCnnUnit(3, (2, 4), (2, 2), 0.0, True, rng, "u")
        assert unit.proj is not None
        for conv in unit.convs:
            jiggle_biases(conv, rng)
        wp, wx = layer_gradcheck(_UnitWrapper(unit), rng.normal(size=(2, 5, 3)), rng=rng)
        assert wp < TOL and wx < TOL

    def test_gradcheck_identity_skip(self, rng):
        unit = ResCnnUnit(3, (4, 3), (3, 2), 0.0, True, rng, "u")
        assert unit.proj is None
        for conv in unit.convs:
            jiggle_biases(conv, rng)
        wp, wx = layer_gradcheck(_UnitWrapper(unit), rng.normal(size=(2, 5, 3)), rng=rng)
        assert wp < TOL and wx < TOL

    def test_gradcheck_no_residual(self, rng):
        unit = ResCnnUnit(3, (2, 2), (2, 2), 0.0, False, rng, "u")
        for conv in unit.convs:
            jiggle_biases(conv, rng)
        wp, wx = layer_gradcheck(_UnitWrapper(unit), rng.normal(size=(2, 5, 3)), rng=rng)
        assert wp < TOL and wx < TOL

    def test_zeroed_main_branch_passes_activation_only(self, rng):
        # equal widths -> identity skip; zero conv weights -> out = relu(x)
        unit = ResCnnUnit(3, (3, 3), (2, 2), 0.0, True, rng, "u")
        for conv in unit.convs:
            conv.params["W"][...] = 0.0
            conv.params["b"][...] = 0.0
        x = rng.normal(size=(2, 6, 3))
        assert np.array_equal(unit.forward(x), np.maximum(x, 0.0))
