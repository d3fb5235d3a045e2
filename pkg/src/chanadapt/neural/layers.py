"""Layers with exact forward/backward passes on (B, C, H, W) arrays.

Every layer caches what its backward pass needs during forward and releases
it afterwards.  Parameters are plain named arrays with matching gradient
slots; an optimizer walks the parameter list and skips entries whose
``trainable`` flag is off.
"""

import numpy as np

from . import backend


class Parameter:
    """A named weight array with its gradient slot and trainability flag."""

    __slots__ = ("name", "layer_tag", "value", "grad", "trainable")

    def __init__(self, name, layer_tag, value, trainable=True):
        self.name = name
        self.layer_tag = layer_tag
        self.value = value
        self.grad = np.zeros_like(value)
        self.trainable = trainable

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.value.shape}, trainable={self.trainable})"


class Layer:
    """Base: parameter-free, shape-preserving."""

    tag = ""

    def parameters(self):
        return []

    def buffers(self):
        """Non-trainable state that must persist in checkpoints."""
        return {}

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError


def _pair(v):
    return tuple(v) if isinstance(v, (tuple, list)) else (v, v)


class Conv2d(Layer):
    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0, *,
                 tag, rng, dtype=np.float64, weight_std=None):
        self.tag = tag
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel = _pair(kernel)
        self.stride = _pair(stride)
        self.padding = _pair(padding)
        fan_in = in_ch * self.kernel[0] * self.kernel[1]
        std = weight_std if weight_std is not None else np.sqrt(1.0 / fan_in)
        w = rng.normal(0.0, std, size=(out_ch, in_ch, *self.kernel)).astype(dtype)
        self.weight = Parameter(f"{tag}.weight", tag, w)
        self.bias = Parameter(f"{tag}.bias", tag, np.zeros(out_ch, dtype=dtype))
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def output_shape(self, h, w):
        kh, kw = self.kernel
        sy, sx = self.stride
        ph, pw = self.padding
        oh = (h + 2 * ph - kh) // sy + 1
        ow = (w + 2 * pw - kw) // sx + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"layer {self.tag}: kernel {self.kernel} does not fit "
                             f"input {(h, w)} with padding {self.padding}")
        return oh, ow

    def forward(self, x, training=False):
        if x.shape[1] != self.in_ch:
            raise ValueError(f"layer {self.tag}: expected {self.in_ch} channels, "
                             f"got {x.shape[1]}")
        self.output_shape(x.shape[2], x.shape[3])
        ph, pw = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
        out = backend.conv_fwd(xp, self.weight.value, self.stride)
        out += self.bias.value[None, :, None, None]
        if training:
            self._cache = (xp, x.shape)
        return out

    def backward(self, grad_out):
        xp, x_shape = self._cache
        self._cache = None
        grad_out = np.ascontiguousarray(grad_out, dtype=xp.dtype)
        if self.weight.trainable:  # frozen layers skip the weight-grad kernel
            self.bias.grad += grad_out.sum(axis=(0, 2, 3))
            self.weight.grad += backend.conv_bwd_weight(xp, grad_out, self.kernel,
                                                        self.stride)
        gxp = backend.conv_bwd_input(grad_out, self.weight.value, xp.shape[2:],
                                     self.stride)
        ph, pw = self.padding
        if ph or pw:
            gxp = gxp[:, :, ph:ph + x_shape[2], pw:pw + x_shape[3]]
        return gxp


class ConvTranspose2d(Layer):
    """Adjoint of Conv2d; the forward pass targets an explicit output size."""

    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0, *,
                 tag, rng, dtype=np.float64, weight_std=None):
        self.tag = tag
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel = _pair(kernel)
        self.stride = _pair(stride)
        self.padding = _pair(padding)
        fan_in = in_ch * self.kernel[0] * self.kernel[1]
        std = weight_std if weight_std is not None else np.sqrt(1.0 / fan_in)
        w = rng.normal(0.0, std, size=(in_ch, out_ch, *self.kernel)).astype(dtype)
        self.weight = Parameter(f"{tag}.weight", tag, w)
        self.bias = Parameter(f"{tag}.bias", tag, np.zeros(out_ch, dtype=dtype))
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def _check_output_size(self, in_hw, out_hw):
        kh, kw = self.kernel
        sy, sx = self.stride
        ph, pw = self.padding
        for i, (n_in, n_out, k, s, p) in enumerate(
                [(in_hw[0], out_hw[0], kh, sy, ph), (in_hw[1], out_hw[1], kw, sx, pw)]):
            base = (n_in - 1) * s - 2 * p + k
            if not base <= n_out < base + s:
                raise ValueError(
                    f"layer {self.tag}: output size {out_hw} unreachable from "
                    f"{in_hw} (axis {i}: base {base}, stride {s})")

    def forward(self, x, training=False, output_size=None):
        if output_size is None:
            raise ValueError(f"layer {self.tag}: output_size is required")
        self._check_output_size(x.shape[2:], output_size)
        ph, pw = self.padding
        padded_hw = (output_size[0] + 2 * ph, output_size[1] + 2 * pw)
        x = np.ascontiguousarray(x)
        full = backend.conv_bwd_input(x, self.weight.value, padded_hw, self.stride)
        out = full[:, :, ph:ph + output_size[0], pw:pw + output_size[1]]
        out = np.ascontiguousarray(out) + self.bias.value[None, :, None, None]
        if training:
            self._cache = (x, padded_hw)
        return out

    def backward(self, grad_out):
        x, padded_hw = self._cache
        self._cache = None
        ph, pw = self.padding
        g = np.ascontiguousarray(grad_out, dtype=x.dtype)
        self.bias.grad += g.sum(axis=(0, 2, 3))
        gp = np.pad(g, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else g
        assert gp.shape[2:] == padded_hw
        self.weight.grad += backend.conv_bwd_weight(gp, x, self.kernel, self.stride)
        return backend.conv_fwd(gp, self.weight.value, self.stride)


class BatchNorm2d(Layer):
    """Per-channel normalization with affine scale/shift.

    Training mode normalizes with batch statistics (biased variance) and
    updates exponential running averages; inference mode uses the running
    averages, so the output of one sample does not depend on its batch.
    A frozen batchnorm behaves as in inference even while training, keeping
    both its parameters and its running statistics fixed.
    """

    def __init__(self, channels, *, tag, dtype=np.float64, eps=1e-5, momentum=0.1):
        self.tag = tag
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Parameter(f"{tag}.gamma", tag, np.ones(channels, dtype=dtype))
        self.beta = Parameter(f"{tag}.beta", tag, np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.frozen = False
        self._cache = None

    def parameters(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def set_buffers(self, bufs):
        self.running_mean = np.array(bufs["running_mean"], dtype=self.running_mean.dtype)
        self.running_var = np.array(bufs["running_var"], dtype=self.running_var.dtype)

    def forward(self, x, training=False):
        if x.shape[1] != self.channels:
            raise ValueError(f"layer {self.tag}: expected {self.channels} channels, "
                             f"got {x.shape[1]}")
        use_batch_stats = training and not self.frozen
        if use_batch_stats:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean = ((1.0 - self.momentum) * self.running_mean
                                 + self.momentum * mean)
            self.running_var = ((1.0 - self.momentum) * self.running_var
                                + self.momentum * var)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        out = (self.gamma.value[None, :, None, None] * xhat
               + self.beta.value[None, :, None, None])
        if training:
            self._cache = (xhat, inv_std, use_batch_stats)
        return out.astype(x.dtype, copy=False)

    def backward(self, grad_out):
        xhat, inv_std, used_batch_stats = self._cache
        self._cache = None
        g = grad_out
        self.beta.grad += g.sum(axis=(0, 2, 3))
        self.gamma.grad += (g * xhat).sum(axis=(0, 2, 3))
        scale = (self.gamma.value * inv_std)[None, :, None, None]
        if not used_batch_stats:
            return g * scale
        n = g.shape[0] * g.shape[2] * g.shape[3]
        g_mean = g.mean(axis=(0, 2, 3))[None, :, None, None]
        gx_mean = (g * xhat).sum(axis=(0, 2, 3))[None, :, None, None] / n
        return scale * (g - g_mean - xhat * gx_mean)


class Tanh(Layer):
    def __init__(self, tag="tanh"):
        self.tag = tag
        self._cache = None

    def forward(self, x, training=False):
        out = np.tanh(x)
        if training:
            self._cache = out
        return out

    def backward(self, grad_out):
        out = self._cache
        self._cache = None
        return grad_out * (1.0 - out * out)


class LeakyReLU(Layer):
    def __init__(self, slope=0.2, tag="lrelu"):
        self.tag = tag
        self.slope = slope
        self._cache = None

    def forward(self, x, training=False):
        if training:
            self._cache = x > 0
        return np.where(x > 0, x, self.slope * x)

    def backward(self, grad_out):
        mask = self._cache
        self._cache = None
        return np.where(mask, grad_out, self.slope * grad_out)


class Sigmoid(Layer):
    def __init__(self, tag="sigmoid"):
        self.tag = tag
        self._cache = None

    def forward(self, x, training=False):
        out = sigmoid(x)
        if training:
            self._cache = out
        return out

    def backward(self, grad_out):
        out = self._cache
        self._cache = None
        return grad_out * out * (1.0 - out)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def concat_channels(a, b):
    """Channel concatenation; invert the split with :func:`split_channels`."""
    return np.concatenate([a, b], axis=1)


def split_channels(grad, ch_a):
    return grad[:, :ch_a], grad[:, ch_a:]
