import numpy as np
import pytest

from chanadapt.neural import backend
from chanadapt.neural.layers import (BatchNorm2d, Conv2d, ConvTranspose2d,
                                     LeakyReLU, Sigmoid, Tanh, concat_channels,
                                     split_channels)

BACKENDS = list(backend.available_backends())


@pytest.fixture(params=BACKENDS)
def impl(request, monkeypatch):
    """Run layer math on each available kernel backend."""
    chosen = backend.available_backends()[request.param]
    monkeypatch.setattr(backend, "_impl", chosen)
    return request.param


def numeric_grad(loss_fn, arr, h=1e-5, probes=40, rng=None):
    """Central finite differences on a random subset of entries."""
    rng = rng or np.random.default_rng(0)
    flat = arr.ravel()
    idx = rng.choice(flat.size, size=min(probes, flat.size), replace=False)
    grads = np.zeros(len(idx))
    for j, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        grads[j] = (up - down) / (2 * h)
    return idx, grads


def check_layer_gradients(layer, x, rng, forward=None, probes=30):
    """Compare analytic input/parameter gradients with finite differences."""
    fwd = forward or (lambda: layer.forward(x, training=True))
    proj = rng.normal(size=fwd().shape)  # random linear functional as loss

    def loss():
        return float(np.sum(fwd() * proj))

    out = fwd()
    for p in layer.parameters():
        p.zero_grad()
    gx = layer.backward(proj)

    idx, ref = numeric_grad(loss, x, rng=rng, probes=probes)
    got = gx.ravel()[idx]
    np.testing.assert_allclose(got, ref, rtol=1e-4, atol=1e-7)

    for p in layer.parameters():
        idx, ref = numeric_grad(loss, p.value, rng=rng, probes=probes)
        got = p.grad.ravel()[idx]
        np.testing.assert_allclose(got, ref, rtol=1e-4, atol=1e-7,
                                   err_msg=f"parameter {p.name}")


class TestConvGradients:
    @pytest.mark.parametrize("stride,kernel,pad", [
        ((1, 1), (5, 5), (2, 2)),
        ((1, 1), (9, 9), (4, 4)),
        ((2, 2), (4, 4), (1, 1)),
        ((2, 1), (3, 3), (1, 1)),
    ])
    def test_conv2d(self, impl, stride, kernel, pad):
        rng = np.random.default_rng(42)
        layer = Conv2d(3, 4, kernel, stride=stride, padding=pad,
                       tag="c", rng=rng)
        for _ in range(5):
            x = rng.normal(size=(2, 3, 12, 10))
            check_layer_gradients(layer, x, rng)

    def test_identity_kernel(self, impl):
        rng = np.random.default_rng(0)
        layer = Conv2d(1, 1, (1, 1), tag="c", rng=rng)
        layer.weight.value[...] = 1.0
        layer.bias.value[...] = 0.0
        x = rng.normal(size=(2, 1, 6, 5))
        np.testing.assert_allclose(layer.forward(x), x, atol=1e-14)

    @pytest.mark.parametrize("stride", [(2, 2), (2, 1), (1, 1)])
    def test_conv_transpose(self, impl, stride):
        rng = np.random.default_rng(43)
        layer = ConvTranspose2d(3, 2, (4, 4), stride=stride, padding=1,
                                tag="ct", rng=rng)
        probe = Conv2d(2, 3, (4, 4), stride=stride, padding=1, tag="fwd", rng=rng)
        out_size = (11, 9)
        oh, ow = probe.output_shape(*out_size)
        for _ in range(5):
            x = rng.normal(size=(2, 3, oh, ow))
            check_layer_gradients(
                layer, x, rng,
                forward=lambda: layer.forward(x, training=True,
                                              output_size=out_size))

    def test_conv_transpose_inverts_conv_geometry(self, impl):
        rng = np.random.default_rng(1)
        conv = Conv2d(1, 4, (3, 3), stride=(2, 1), padding=1, tag="c", rng=rng)
        deconv = ConvTranspose2d(4, 1, (3, 3), stride=(2, 1), padding=1,
                                 tag="d", rng=rng)
        for h, w in [(5, 1), (3, 1), (2, 1), (9, 4)]:
            x = rng.normal(size=(1, 1, h, w))
            mid = conv.forward(x)
            back = deconv.forward(mid, output_size=(h, w))
            assert back.shape == (1, 1, h, w)

    def test_unreachable_output_size_rejected(self, impl):
        rng = np.random.default_rng(2)
        layer = ConvTranspose2d(1, 1, (4, 4), stride=2, padding=1, tag="d", rng=rng)
        x = rng.normal(size=(1, 1, 4, 4))
        with pytest.raises(ValueError):
            layer.forward(x, output_size=(20, 8))


class TestPointwiseGradients:
    def test_tanh(self):
        rng = np.random.default_rng(3)
        layer = Tanh()
        for _ in range(20):
            x = rng.normal(size=(2, 4, 6, 6))
            check_layer_gradients(layer, x, rng)

    def test_tanh_grad_at_zero(self):
        layer = Tanh()
        x = np.zeros((1, 1, 2, 2))
        layer.forward(x, training=True)
        g = layer.backward(np.ones_like(x))
        np.testing.assert_allclose(g, 1.0)

    def test_leaky_relu(self):
        rng = np.random.default_rng(4)
        layer = LeakyReLU(0.2)
        for _ in range(20):
            x = rng.normal(size=(2, 4, 6, 6)) + 0.05  # keep clear of the kink
            check_layer_gradients(layer, x, rng)

    def test_leaky_relu_slope(self):
        layer = LeakyReLU(0.2)
        x = np.array([[[[-1.0, 2.0]]]])
        layer.forward(x, training=True)
        g = layer.backward(np.ones_like(x))
        np.testing.assert_allclose(g, [[[[0.2, 1.0]]]])

    def test_sigmoid(self):
        rng = np.random.default_rng(5)
        layer = Sigmoid()
        for _ in range(20):
            x = rng.normal(size=(2, 4, 6, 6))
            check_layer_gradients(layer, x, rng)


class TestBatchNormGradients:
    def test_training_mode(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            layer = BatchNorm2d(4, tag="bn")
            layer.gamma.value[...] = rng.normal(size=4)
            layer.beta.value[...] = rng.normal(size=4)
            x = rng.normal(size=(2, 4, 6, 6))
            check_layer_gradients(layer, x, rng)

    def test_inference_uses_running_stats(self):
        rng = np.random.default_rng(7)
        layer = BatchNorm2d(2, tag="bn")
        for _ in range(50):
            layer.forward(rng.normal(loc=3.0, scale=2.0, size=(4, 2, 5, 5)),
                          training=True)
        x1 = rng.normal(size=(1, 2, 5, 5))
        batch = np.concatenate([x1, rng.normal(size=(5, 2, 5, 5))])
        solo = layer.forward(x1, training=False)
        joint = layer.forward(batch, training=False)[:1]
        np.testing.assert_allclose(solo, joint, atol=1e-12)

    def test_training_vs_inference_differ(self):
        rng = np.random.default_rng(8)
        layer = BatchNorm2d(2, tag="bn")
        x = rng.normal(loc=5.0, size=(4, 2, 5, 5))
        out_train = layer.forward(x, training=True)
        out_eval = layer.forward(x, training=False)
        assert np.abs(out_train - out_eval).max() > 1e-3

    def test_zeros_map_to_zeros(self):
        layer = BatchNorm2d(1, tag="bn")
        x = np.zeros((2, 1, 4, 4))
        np.testing.assert_array_equal(layer.forward(x, training=True), 0.0)

    def test_frozen_keeps_running_stats(self):
        rng = np.random.default_rng(9)
        layer = BatchNorm2d(2, tag="bn")
        layer.forward(rng.normal(size=(4, 2, 5, 5)), training=True)
        layer.frozen = True
        rm = layer.running_mean.copy()
        rv = layer.running_var.copy()
        layer.forward(rng.normal(loc=9.0, size=(4, 2, 5, 5)), training=True)
        np.testing.assert_array_equal(layer.running_mean, rm)
        np.testing.assert_array_equal(layer.running_var, rv)


class TestConcat:
    def test_concat_split_round_trip(self):
        rng = np.random.default_rng(10)
        a = rng.normal(size=(2, 3, 4, 4))
        b = rng.normal(size=(2, 5, 4, 4))
        joined = concat_channels(a, b)
        ga, gb = split_channels(joined, 3)
        np.testing.assert_array_equal(ga, a)
        np.testing.assert_array_equal(gb, b)


class TestBackendParity:
    def test_layer_outputs_match_across_backends(self):
        impls = backend.available_backends()
        if len(impls) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(11)
        x = rng.normal(size=(2, 3, 16, 12))
        layer = Conv2d(3, 8, (5, 5), stride=1, padding=2, tag="c",
                       rng=np.random.default_rng(0))
        outs = {}
        for name, chosen in impls.items():
            outs[name] = backend.conv_fwd(
                np.pad(x, ((0, 0), (0, 0), (2, 2), (2, 2))),
                layer.weight.value, (1, 1), impl=chosen)
        a, b = outs.values()
        assert np.max(np.abs(a - b)) < 1e-11
