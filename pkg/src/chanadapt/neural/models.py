"""Network architectures: a 7-block refinement CNN and a U-Net conditional
GAN with a patch discriminator.

Both nets map one normalized real plane (1, K, M) to one plane of the same
size; complex grids are handled upstream by running the real and imaginary
planes independently.  The GAN operates on a zero-padded canonical shape so
that the seven stride-2 encoder stages fit, and crops back afterwards.
"""

import numpy as np

from .layers import (BatchNorm2d, Conv2d, ConvTranspose2d, LeakyReLU, Tanh,
                     concat_channels, split_channels)

CNN_FILTERS = (64, 64, 64, 32, 16, 8, 1)
CNN_KERNELS = ((9, 9),) + ((5, 5),) * 6
CNN_PADDINGS = ((4, 4),) + ((2, 2),) * 6

GEN_ENC_FILTERS = (32, 64, 128, 256, 256, 256, 256)
DISC_FILTERS = (32, 64, 128, 256, 1)

# four stages halve both axes, three more halve only the subcarrier axis
ENC_STRIDES = ((2, 2),) * 4 + ((2, 1),) * 3
ENC_KERNELS = ((4, 4),) * 4 + ((3, 3),) * 3


def padded_gan_shape(k, m):
    """Canonical zero-padded input shape for the U-Net, e.g. 612x14 -> 640x16.

    The subcarrier axis grows to the smallest 80 * 2^j >= k so the seven
    halving stages fit; the symbol axis grows to the smallest 16 * 2^j >= m
    for its four halvings.
    """
    h = 80
    while h < k:
        h *= 2
    w = 16
    while w < m:
        w *= 2
    return h, w


def pad_plane(x, padded_hw):
    """Zero-pad (B, C, k, m) up to the canonical shape (bottom/right)."""
    ph = padded_hw[0] - x.shape[2]
    pw = padded_hw[1] - x.shape[3]
    if ph < 0 or pw < 0:
        raise ValueError(f"plane {x.shape[2:]} larger than padded shape {padded_hw}")
    return np.pad(x, ((0, 0), (0, 0), (0, ph), (0, pw)))


def crop_plane(x, hw):
    return x[:, :, : hw[0], : hw[1]]


class RefinementCnn:
    """Batchnorm front end followed by seven stride-1 conv blocks.

    Tanh activations separate the blocks; the last block is linear.  Spatial
    shape is preserved throughout, so any grid size flows through the same
    parameters.
    """

    kind = "cnn"

    def __init__(self, rng, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self.input_bn = BatchNorm2d(1, tag="input_bn", dtype=dtype)
        self.blocks = []
        in_ch = 1
        for i, (out_ch, kern, pad) in enumerate(
                zip(CNN_FILTERS, CNN_KERNELS, CNN_PADDINGS)):
            self.blocks.append(Conv2d(in_ch, out_ch, kern, stride=1, padding=pad,
                                      tag=f"conv{i}", rng=rng, dtype=dtype))
            in_ch = out_ch
        self.activations = [Tanh(tag=f"act{i}") for i in range(6)]

    def layers(self):
        out = [self.input_bn]
        for i, blk in enumerate(self.blocks):
            out.append(blk)
            if i < 6:
                out.append(self.activations[i])
        return out

    def parameters(self):
        params = []
        for layer in self.layers():
            params.extend(layer.parameters())
        return params

    def batchnorms(self):
        return [self.input_bn]

    def forward(self, x, training=False):
        out = x.astype(self.dtype, copy=False)
        for layer in self.layers():
            out = layer.forward(out, training=training)
        return out

    def backward(self, grad_out):
        g = grad_out
        for layer in reversed(self.layers()):
            g = layer.backward(g)
        return g


class UnetGenerator:
    """Seven-stage strided encoder, stride-1 bottleneck, mirrored decoder.

    Encoder stage i feeds decoder stage 8-i through channel concatenation.
    Decoder stages target the recorded encoder input sizes, so odd
    intermediate sizes invert exactly.  Output passes through tanh.
    """

    kind = "generator"

    def __init__(self, rng, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self.enc = []
        self.enc_bn = []
        in_ch = 1
        for i, out_ch in enumerate(GEN_ENC_FILTERS):
            self.enc.append(Conv2d(in_ch, out_ch, ENC_KERNELS[i], ENC_STRIDES[i],
                                   padding=1, tag=f"enc{i + 1}", rng=rng,
                                   dtype=dtype, weight_std=0.02))
            self.enc_bn.append(
                BatchNorm2d(out_ch, tag=f"enc{i + 1}_bn", dtype=dtype)
                if i > 0 else None)
            in_ch = out_ch
        self.bottleneck = Conv2d(in_ch, 256, (3, 3), 1, padding=1, tag="bottleneck",
                                 rng=rng, dtype=dtype, weight_std=0.02)
        self.bottleneck_bn = BatchNorm2d(256, tag="bottleneck_bn", dtype=dtype)

        dec_out = (256, 256, 256, 128, 64, 32, 1)
        self.dec = []
        self.dec_bn = []
        skip_ch = list(GEN_ENC_FILTERS[::-1])  # enc7 ... enc1
        prev_ch = 256
        for i, out_ch in enumerate(dec_out):
            stage = 7 - i  # geometry of the encoder stage being inverted
            self.dec.append(ConvTranspose2d(prev_ch + skip_ch[i], out_ch,
                                            ENC_KERNELS[stage - 1],
                                            ENC_STRIDES[stage - 1], padding=1,
                                            tag=f"dec{i + 1}", rng=rng, dtype=dtype,
                                            weight_std=0.02))
            self.dec_bn.append(
                BatchNorm2d(out_ch, tag=f"dec{i + 1}_bn", dtype=dtype)
                if i < 6 else None)
            prev_ch = out_ch
        self.act = LeakyReLU(0.2)
        self.out_act = Tanh(tag="gen_out")

    def layers(self):
        out = []
        for conv, bn in zip(self.enc, self.enc_bn):
            out.append(conv)
            if bn is not None:
                out.append(bn)
        out.extend([self.bottleneck, self.bottleneck_bn])
        for conv, bn in zip(self.dec, self.dec_bn):
            out.append(conv)
            if bn is not None:
                out.append(bn)
        return out

    def parameters(self):
        params = []
        for layer in self.layers():
            params.extend(layer.parameters())
        return params

    def batchnorms(self):
        return [l for l in self.layers() if isinstance(l, BatchNorm2d)]

    def forward(self, x, training=False):
        """x is a padded (B, 1, H, W) plane; returns the same shape."""
        x = x.astype(self.dtype, copy=False)
        acts = {}
        skips = []
        sizes = [x.shape[2:]]
        out = x
        for i, (conv, bn) in enumerate(zip(self.enc, self.enc_bn)):
            if i > 0:
                out = self._a(out, training, acts, f"enc{i}_act")
            out = conv.forward(out, training)
            if bn is not None:
                out = bn.forward(out, training)
            skips.append(out)
            sizes.append(out.shape[2:])

        out = self._a(out, training, acts, "bottle_act")
        out = self.bottleneck.forward(out, training)
        out = self.bottleneck_bn.forward(out, training)

        concat_sizes = []
        for i, (conv, bn) in enumerate(zip(self.dec, self.dec_bn)):
            skip = skips[6 - i]
            concat_sizes.append(out.shape[1])
            out = concat_channels(out, skip)
            out = self._a(out, training, acts, f"dec{i + 1}_act")
            out = conv.forward(out, training, output_size=sizes[6 - i])
            if bn is not None:
                out = bn.forward(out, training)
        out = self.out_act.forward(out, training)
        if training:
            self._acts = acts
            self._concat_sizes = concat_sizes
        return out

    def _a(self, x, training, acts, name):
        """Leaky-ReLU with a private mask per call site."""
        if training:
            acts[name] = x > 0
        return np.where(x > 0, x, 0.2 * x)

    def _a_back(self, g, name):
        mask = self._acts[name]
        return np.where(mask, g, 0.2 * g)

    def backward(self, grad_out):
        g = self.out_act.backward(grad_out)
        skip_grads = [None] * 7
        for i in range(6, -1, -1):
            bn = self.dec_bn[i]
            if bn is not None:
                g = bn.backward(g)
            g = self.dec[i].backward(g)
            g = self._a_back(g, f"dec{i + 1}_act")
            g, g_skip = split_channels(g, self._concat_sizes[i])
            skip_grads[6 - i] = g_skip

        g = self.bottleneck_bn.backward(g)
        g = self.bottleneck.backward(g)
        g = self._a_back(g, "bottle_act")

        for i in range(6, -1, -1):
            g = g + skip_grads[i]
            bn = self.enc_bn[i]
            if bn is not None:
                g = bn.backward(g)
            g = self.enc[i].backward(g)
            if i > 0:
                g = self._a_back(g, f"enc{i}_act")
        self._acts = None
        return g


class PatchDiscriminator:
    """Five conv stages producing a patch map of realness logits.

    Input is the 2-channel concatenation of the conditioning plane and the
    candidate plane.  Apply a sigmoid to the output to read probabilities;
    the training loss works on the logits directly.
    """

    kind = "discriminator"

    def __init__(self, rng, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        specs = [
            (2, DISC_FILTERS[0], (4, 4), (2, 2), False),
            (DISC_FILTERS[0], DISC_FILTERS[1], (4, 4), (2, 2), True),
            (DISC_FILTERS[1], DISC_FILTERS[2], (4, 4), (2, 2), True),
            (DISC_FILTERS[2], DISC_FILTERS[3], (4, 4), (1, 1), True),
            (DISC_FILTERS[3], DISC_FILTERS[4], (4, 3), (1, 1), False),
        ]
        self.convs = []
        self.bns = []
        for i, (ci, co, kern, stride, with_bn) in enumerate(specs):
            self.convs.append(Conv2d(ci, co, kern, stride, padding=1,
                                     tag=f"d{i + 1}", rng=rng, dtype=dtype,
                                     weight_std=0.02))
            self.bns.append(BatchNorm2d(co, tag=f"d{i + 1}_bn", dtype=dtype)
                            if with_bn else None)
        self.acts = [LeakyReLU(0.2, tag=f"d{i + 1}_act") for i in range(4)]

    def layers(self):
        out = []
        for i, (conv, bn) in enumerate(zip(self.convs, self.bns)):
            out.append(conv)
            if bn is not None:
                out.append(bn)
            if i < 4:
                out.append(self.acts[i])
        return out

    def parameters(self):
        params = []
        for layer in self.layers():
            params.extend(layer.parameters())
        return params

    def batchnorms(self):
        return [l for l in self.layers() if isinstance(l, BatchNorm2d)]

    def forward(self, x, training=False):
        out = x.astype(self.dtype, copy=False)
        for layer in self.layers():
            out = layer.forward(out, training=training)
        return out

    def backward(self, grad_out):
        g = grad_out
        for layer in reversed(self.layers()):
            g = layer.backward(g)
        return g


class GanPair:
    """Generator/discriminator bundle trained together."""

    kind = "gan"

    def __init__(self, rng, dtype=np.float64):
        self.generator = UnetGenerator(rng, dtype)
        self.discriminator = PatchDiscriminator(rng, dtype)
        self.dtype = np.dtype(dtype)

    def parameters(self):
        return self.generator.parameters() + self.discriminator.parameters()

    def batchnorms(self):
        return self.generator.batchnorms() + self.discriminator.batchnorms()


def build_model(kind, seed, dtype=np.float64):
    """Construct a freshly initialized model of the requested kind."""
    rng = np.random.default_rng([int(seed), 0x6d6f64])
    if kind == "cnn":
        return RefinementCnn(rng, dtype)
    if kind == "gan":
        return GanPair(rng, dtype)
    raise ValueError(f"unknown model kind {kind!r}")


def parameter_count(model, trainable_only=False):
    return sum(p.value.size for p in model.parameters()
               if p.trainable or not trainable_only)
