"""Cross-domain transfer: layer freezing, fine-tuning, and the entropic
optimal-transport distance used to quantify how far apart two channel
datasets are.

Freezing is expressed as a per-parameter trainability mask derived from
layer tags.  Frozen batchnorm layers also stop updating their running
statistics, so the entire frozen block is bit-stable across fine-tuning.
"""

from dataclasses import dataclass

import numpy as np

from .neural.layers import BatchNorm2d
from .neural.models import GanPair, RefinementCnn
from .neural.optim import Adam
from .neural.training import TrainConfig, train_cnn, train_gan

CNN_FROZEN_TAGS = ("input_bn", "conv0", "conv1", "conv2", "conv3", "conv4")
GAN_FROZEN_TAGS = ("enc1", "enc2", "enc3", "enc4", "enc5",
                   "enc2_bn", "enc3_bn", "enc4_bn", "enc5_bn",
                   "d1", "d2", "d3", "d2_bn", "d3_bn")


def freeze_for_transfer(model_kind: str) -> dict:
    """Trainability flags per layer tag for the canonical architectures.

    CNN: the batchnorm front end and conv blocks 0-4 freeze; blocks 5 and 6
    stay trainable.  GAN: generator encoder stages 1-5 freeze (stages 6-7,
    the bottleneck and all decoder stages stay trainable); discriminator
    stages 1-3 freeze.
    """
    if model_kind == "cnn":
        frozen = set(CNN_FROZEN_TAGS)
    elif model_kind == "gan":
        frozen = set(GAN_FROZEN_TAGS)
    elif model_kind == "none":
        frozen = set()
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")
    return {"frozen_tags": frozen}


def apply_freeze_mask(model, mask: dict):
    """Set per-parameter flags from the mask; returns the parameter mask."""
    frozen = mask["frozen_tags"]
    seen = set()
    flags = {}
    for p in model.parameters():
        p.trainable = p.layer_tag not in frozen
        flags[p.name] = p.trainable
        seen.add(p.layer_tag)
    for bn in model.batchnorms():
        bn.frozen = bn.tag in frozen
    unknown = frozen - seen
    if unknown:
        raise ValueError(f"freeze mask names unknown layer tags: {sorted(unknown)}")
    return flags


def frozen_checksum(model, mask: dict):
    """Stable digest of every frozen parameter's bytes."""
    import hashlib

    frozen = mask["frozen_tags"]
    h = hashlib.sha256()
    for p in sorted(model.parameters(), key=lambda q: q.name):
        if p.layer_tag in frozen:
            h.update(p.name.encode())
            h.update(np.ascontiguousarray(p.value).tobytes())
    return h.hexdigest()


def finetune(model, inputs, labels, config: TrainConfig, mask: dict):
    """Fine-tune only the mask's trainable parameters on target-domain data.

    Returns the loss history.  Fresh optimizer state is used: the frozen
    parameters are excluded from the optimizer entirely.
    """
    apply_freeze_mask(model, mask)
    if isinstance(model, RefinementCnn):
        opt = Adam(model.parameters(), lr=config.learning_rate, betas=config.betas)
        return train_cnn(model, inputs, labels, config, optimizer=opt)
    if isinstance(model, GanPair):
        g_opt = Adam(model.generator.parameters(), lr=config.learning_rate,
                     betas=config.betas)
        d_opt = Adam(model.discriminator.parameters(), lr=config.learning_rate,
                     betas=config.betas)
        return train_gan(model, inputs, labels, config,
                         g_optimizer=g_opt, d_optimizer=d_opt)
    raise ValueError(f"cannot fine-tune model of type {type(model).__name__}")


def frobenius_norm(matrix) -> float:
    """sqrt of the summed squared moduli."""
    arr = np.asarray(matrix)
    return float(np.sqrt(np.sum(np.abs(arr) ** 2)))


@dataclass
class OtProblem:
    """Empirical transport problem between two sets of complex matrices."""

    source: list
    target: list
    epsilon: float = None  # default: 0.05 x median pairwise cost
    max_iter: int = 5000
    tolerance: float = 1e-8

    def __post_init__(self):
        if len(self.source) == 0 or len(self.target) == 0:
            raise ValueError("both sample sets must be nonempty")
        shapes = {np.asarray(m).shape for m in self.source}
        shapes |= {np.asarray(m).shape for m in self.target}
        if len(shapes) != 1:
            raise ValueError(f"all matrices must share one shape, got {shapes}")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class OtResult:
    distance: float
    iterations: int
    converged: bool
    epsilon: float
    plan: np.ndarray


def pairwise_frobenius_cost(source, target) -> np.ndarray:
    """C[i, j] = Frobenius distance between source i and target j."""
    s = np.stack([np.asarray(m, dtype=np.complex128).ravel() for m in source])
    t = np.stack([np.asarray(m, dtype=np.complex128).ravel() for m in target])
    s2 = np.sum(np.abs(s) ** 2, axis=1)[:, None]
    t2 = np.sum(np.abs(t) ** 2, axis=1)[None, :]
    cross = np.real(s @ t.conj().T)
    sq = np.maximum(s2 + t2 - 2.0 * cross, 0.0)
    return np.sqrt(sq)


def sinkhorn_w1(problem: OtProblem) -> OtResult:
    """Entropic approximation of the Wasserstein-1 distance.

    Uniform marginals 1/N_S and 1/N_T; log-domain scaling iterations run
    until the L1 marginal violation of the implied plan drops below the
    tolerance or the iteration budget is exhausted (reported, not raised).
    """
    cost = pairwise_frobenius_cost(problem.source, problem.target)
    ns, nt = cost.shape
    eps = problem.epsilon
    if eps is None:
        eps = max(0.05 * float(np.median(cost)), 1e-300)
    log_a = np.full(ns, -np.log(ns))
    log_b = np.full(nt, -np.log(nt))
    f = np.zeros(ns)
    g = np.zeros(nt)
    scaled = -cost / eps

    def logsumexp(m, axis):
        mx = m.max(axis=axis, keepdims=True)
        return (mx + np.log(np.sum(np.exp(m - mx), axis=axis, keepdims=True))).squeeze(axis)

    def marginal_violation():
        plan = np.exp(scaled + f[:, None] / eps + g[None, :] / eps)
        return (np.abs(plan.sum(axis=1) - 1.0 / ns).sum()
                + np.abs(plan.sum(axis=0) - 1.0 / nt).sum()), plan

    converged = False
    iterations = 0
    check_every = 5
    for iterations in range(1, problem.max_iter + 1):
        f = eps * (log_a - logsumexp(scaled + g[None, :] / eps, axis=1))
        g = eps * (log_b - logsumexp(scaled + f[:, None] / eps, axis=0))
        if iterations % check_every == 0 or iterations == problem.max_iter:
            violation, _ = marginal_violation()
            if violation < problem.tolerance:
                converged = True
                break
    _, plan = marginal_violation()
    distance = float(np.sum(plan * cost))
    return OtResult(distance=distance, iterations=iterations,
                    converged=converged, epsilon=eps, plan=plan)
