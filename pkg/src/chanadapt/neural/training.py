"""Training loops and the complex-grid refinement wrapper.

The CNN trains as plain mean-squared-error regression on normalized planes.
The GAN alternates one discriminator step and one generator step per batch,
with a binary cross-entropy adversarial term (computed on logits) plus an
L1 reconstruction term on the generator.  Both loops are deterministic for
a fixed seed: shuffling, and nothing else, consumes the epoch RNG.
"""

import numpy as np

from ..errors import TrainingDivergedError
from ..estimators import EstimateGrid, NormState, minmax_denormalize
from .models import GanPair, RefinementCnn, crop_plane, pad_plane, padded_gan_shape
from .optim import Adam


class TrainConfig:
    """Hyperparameters shared by both training loops."""

    def __init__(self, learning_rate=1e-3, betas=(0.9, 0.999), batch_size=8,
                 epochs=10, l1_weight=100.0, seed=0, precision="float32"):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if precision not in ("float32", "float64"):
            raise ValueError(f"unknown precision {precision!r}")
        self.learning_rate = learning_rate
        self.betas = tuple(betas)
        self.batch_size = int(batch_size)
        self.epochs = int(epochs)
        self.l1_weight = float(l1_weight)
        self.seed = int(seed)
        self.precision = precision

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64

    def replace(self, **kw):
        fields = dict(learning_rate=self.learning_rate, betas=self.betas,
                      batch_size=self.batch_size, epochs=self.epochs,
                      l1_weight=self.l1_weight, seed=self.seed,
                      precision=self.precision)
        fields.update(kw)
        return TrainConfig(**fields)

    def to_dict(self):
        return {"learning_rate": self.learning_rate, "betas": list(self.betas),
                "batch_size": self.batch_size, "epochs": self.epochs,
                "l1_weight": self.l1_weight, "seed": self.seed,
                "precision": self.precision}


def _as_plane_array(planes, dtype):
    arr = np.asarray(planes, dtype=dtype)
    if arr.ndim != 3:
        raise ValueError(f"expected (S, K, M) plane stack, got shape {arr.shape}")
    return arr[:, None, :, :]  # add the channel axis


def _check_finite(loss, epoch, what):
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"{what} loss became {loss}", epoch)


def train_cnn(model: RefinementCnn, inputs, labels, config: TrainConfig,
              optimizer=None):
    """MSE regression of label planes from input planes.

    ``inputs``/``labels`` are (S, K, M) real arrays of normalized planes.
    Returns the per-epoch mean loss history; the model is updated in place.
    """
    x = _as_plane_array(inputs, config.dtype)
    y = _as_plane_array(labels, config.dtype)
    if x.shape != y.shape:
        raise ValueError(f"input/label shape mismatch {x.shape} vs {y.shape}")
    if x.shape[0] == 0:
        raise ValueError("empty dataset")
    opt = optimizer or Adam(model.parameters(), lr=config.learning_rate,
                            betas=config.betas)
    rng = np.random.default_rng([config.seed, 0x7472])
    history = []
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = x[idx], y[idx]
            out = model.forward(xb, training=True)
            diff = out - yb
            loss = float(np.mean(diff * diff))
            _check_finite(loss, epoch, "training")
            opt.zero_grad()
            model.backward(2.0 * diff.astype(config.dtype) / diff.size)
            opt.step()
            total += loss * len(idx)
        history.append(total / n)
    return history


def _bce_with_logits(logits, target):
    """Mean stable BCE and its gradient w.r.t. the logits."""
    stable = np.maximum(logits, 0.0) - logits * target + np.log1p(np.exp(-np.abs(logits)))
    sig = 1.0 / (1.0 + np.exp(-np.abs(logits)))
    sig = np.where(logits >= 0, sig, 1.0 - sig)  # sigmoid(logits)
    grad = (sig - target) / logits.size
    return float(stable.mean()), grad


def train_gan(gan: GanPair, inputs, labels, config: TrainConfig,
              g_optimizer=None, d_optimizer=None):
    """Adversarial + L1 training of the conditional generator.

    ``inputs``/``labels`` are (S, K, M) normalized plane stacks at grid size;
    padding to the canonical U-Net shape happens internally.  Returns
    per-epoch (generator_loss, discriminator_loss) pairs.
    """
    x = _as_plane_array(inputs, config.dtype)
    y = _as_plane_array(labels, config.dtype)
    if x.shape != y.shape:
        raise ValueError(f"input/label shape mismatch {x.shape} vs {y.shape}")
    if x.shape[0] == 0:
        raise ValueError("empty dataset")
    padded = padded_gan_shape(x.shape[2], x.shape[3])
    g_opt = g_optimizer or Adam(gan.generator.parameters(),
                                lr=config.learning_rate, betas=config.betas)
    d_opt = d_optimizer or Adam(gan.discriminator.parameters(),
                                lr=config.learning_rate, betas=config.betas)
    rng = np.random.default_rng([config.seed, 0x67616e])
    history = []
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        g_total = 0.0
        d_total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = pad_plane(x[idx], padded)
            yb = pad_plane(y[idx], padded)
            fake = gan.generator.forward(xb, training=True)

            # discriminator step: real pair up, generated pair down
            d_opt.zero_grad()
            logits_real = gan.discriminator.forward(
                np.concatenate([xb, yb], axis=1), training=True)
            loss_real, grad_real = _bce_with_logits(logits_real,
                                                    np.ones_like(logits_real))
            gan.discriminator.backward(0.5 * grad_real)
            logits_fake = gan.discriminator.forward(
                np.concatenate([xb, fake], axis=1), training=True)
            loss_fake, grad_fake = _bce_with_logits(logits_fake,
                                                    np.zeros_like(logits_fake))
            gan.discriminator.backward(0.5 * grad_fake)
            d_loss = 0.5 * (loss_real + loss_fake)
            _check_finite(d_loss, epoch, "discriminator")
            d_opt.step()

            # generator step: fool the discriminator, stay close in L1
            g_opt.zero_grad()
            fake = gan.generator.forward(xb, training=True)
            logits = gan.discriminator.forward(
                np.concatenate([xb, fake], axis=1), training=True)
            adv_loss, adv_grad = _bce_with_logits(logits, np.ones_like(logits))
            d_in_grad = gan.discriminator.backward(adv_grad)
            _, fake_grad = np.split(d_in_grad, 2, axis=1)
            diff = fake - yb
            l1_loss = float(np.abs(diff).mean())
            fake_grad = fake_grad + config.l1_weight * np.sign(diff) / diff.size
            g_loss = adv_loss + config.l1_weight * l1_loss
            _check_finite(g_loss, epoch, "generator")
            gan.generator.backward(fake_grad.astype(config.dtype))
            g_opt.step()

            g_total += g_loss * len(idx)
            d_total += d_loss * len(idx)
        history.append((g_total / n, d_total / n))
    return history


def refine_plane(model, plane):
    """Run one normalized (K, M) plane through a model in inference mode."""
    x = plane[None, None, :, :]
    if isinstance(model, RefinementCnn):
        return model.forward(x, training=False)[0, 0]
    gen = model.generator if isinstance(model, GanPair) else model
    padded = padded_gan_shape(plane.shape[0], plane.shape[1])
    out = gen.forward(pad_plane(x, padded), training=False)
    return crop_plane(out, plane.shape)[0, 0]


def refine(model, normalized_grid, state: NormState, kind: str) -> EstimateGrid:
    """Refine a normalized complex grid and undo the normalization.

    The real and imaginary planes run independently through the same model;
    the reassembled complex grid is mapped back to physical scale with the
    state recorded when the input estimate was normalized.
    """
    dtype = getattr(model, "dtype", np.float64)
    re = refine_plane(model, np.ascontiguousarray(normalized_grid.real, dtype=dtype))
    im = refine_plane(model, np.ascontiguousarray(normalized_grid.imag, dtype=dtype))
    refined = re.astype(np.float64) + 1j * im.astype(np.float64)
    return EstimateGrid(values=minmax_denormalize(refined, state), kind=kind)
