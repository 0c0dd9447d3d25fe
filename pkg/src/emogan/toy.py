"""2-D toy study: vanilla GAN vs conditional GAN with a class head.

Both map 2-D normal noise onto a 4-component Gaussian mixture. The
conditional ("info") variant feeds a one-hot class to the generator and
adds a categorical cross-entropy term from an auxiliary head that shares
the discriminator trunk, weighted by ``lambda_info``; its generated
samples should cluster by conditioning label, while the vanilla variant
is free to spread (or collapse) across modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import ContractViolationError, DivergenceError
from .priors import NormalPrior, one_hot_of

NUM_MODES = 4
LOSS_CEILING = 1e6


@dataclass
class ToyGan:
    variant: str
    generator: nn.Mlp
    trunk: nn.Mlp
    d_head: nn.Mlp
    aux_head: nn.Mlp | None
    prior: NormalPrior


@dataclass
class ToyResult:
    samples: np.ndarray                 # (n, 2) generated points
    labels: np.ndarray | None           # conditioning ids (info variant only)
    history: list = field(default_factory=list)  # (epoch, d_loss, g_loss) means


def build_toy(variant, seed=0, hidden=128):
    if variant not in ("vanilla", "info"):
        raise ContractViolationError(f"unknown toy variant {variant!r}")
    rng = np.random.default_rng(seed)
    g_in = 2 + (NUM_MODES if variant == "info" else 0)
    generator = nn.Mlp.from_dims([g_in, hidden, hidden, 2], ["relu", "relu", "linear"], rng)
    trunk = nn.Mlp.from_dims([2, hidden, hidden], ["relu", "relu"], rng)
    d_head = nn.Mlp.from_dims([hidden, 1], ["sigmoid"], rng)
    aux_head = None
    if variant == "info":
        aux_head = nn.Mlp.from_dims([hidden, NUM_MODES], ["softmax"], rng)
    return ToyGan(variant, generator, trunk, d_head, aux_head, NormalPrior(2))


def _gen_input(gan, n, rng):
    z = gan.prior.sample(n, rng)
    if gan.variant == "info":
        ids = rng.integers(0, NUM_MODES, size=n)
        return np.hstack([z, one_hot_of(ids)]), ids
    return z, None


def _discriminate(gan, x, want_cache=False):
    if want_cache:
        h, tc = gan.trunk.forward(x, want_cache=True)
        p, hc = gan.d_head.forward(h, want_cache=True)
        return p, (tc, hc)
    return gan.d_head.forward(gan.trunk.forward(x))


DEFAULT_TOY_EPOCHS = 150


def toy_train_and_sample(variant, target, epochs, seed, n_samples=2000,
                         batch_size=64, dataset_size=2048, hidden=64,
                         lr_d=0.05, lr_g=0.05, momentum=0.5, lambda_info=1.0):
    """Train one toy model against the target mixture; returns a ToyResult.

    A fixed dataset of `dataset_size` target draws is swept for `epochs`
    epochs; each batch does one discriminator and one generator step.
    """
    if epochs < 1:
        raise ContractViolationError("epochs must be >= 1")
    gan = build_toy(variant, seed=seed, hidden=hidden)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))  # distinct from init stream
    cfg_d = nn.SgdConfig(lr_d, momentum)
    cfg_g = nn.SgdConfig(lr_g, momentum)
    real_all, _ = target.sample(dataset_size, rng)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(dataset_size)
        d_losses, g_losses = [], []
        for start in range(0, dataset_size, batch_size):
            idx = order[start:start + batch_size]
            real = real_all[idx]
            nb = len(idx)

            # discriminator step: real -> 1, generated -> 0
            gin, _ = _gen_input(gan, nb, rng)
            fake = gan.generator.forward(gin)
            d_loss = _update_discriminator(gan, real, fake, cfg_d)

            # generator step: drive D(fake) -> 1, plus class term when present
            gin, ids = _gen_input(gan, nb, rng)
            g_loss = _update_generator(gan, gin, ids, cfg_g, lambda_info)

            if not (np.isfinite(d_loss) and np.isfinite(g_loss)) or max(d_loss, g_loss) > LOSS_CEILING:
                raise DivergenceError(f"toy training diverged at epoch {epoch}", epoch=epoch)
            d_losses.append(d_loss)
            g_losses.append(g_loss)
        history.append((epoch, float(np.mean(d_losses)), float(np.mean(g_losses))))

    gin, ids = _gen_input(gan, n_samples, rng)
    samples = gan.generator.forward(gin)
    return ToyResult(samples=samples, labels=ids, history=history)


def _update_discriminator(gan, real, fake, cfg):
    p_real, cache_real = _discriminate(gan, real, want_cache=True)
    loss_real, dp_real = nn.loss_bce(p_real, np.ones(len(real)))
    p_fake, cache_fake = _discriminate(gan, fake, want_cache=True)
    loss_fake, dp_fake = nn.loss_bce(p_fake, np.zeros(len(fake)))

    head_grads_r, dh_r = gan.d_head.backward(dp_real, cache_real[1])
    trunk_grads_r, _ = gan.trunk.backward(dh_r, cache_real[0])
    head_grads_f, dh_f = gan.d_head.backward(dp_fake, cache_fake[1])
    trunk_grads_f, _ = gan.trunk.backward(dh_f, cache_fake[0])
    nn.sgd_step(gan.d_head, nn.accumulate_grads(head_grads_r, head_grads_f), cfg)
    nn.sgd_step(gan.trunk, nn.accumulate_grads(trunk_grads_r, trunk_grads_f), cfg)
    return loss_real + loss_fake


def _update_generator(gan, gin, ids, cfg, lambda_info):
    fake, g_cache = gan.generator.forward(gin, want_cache=True)
    h, t_cache = gan.trunk.forward(fake, want_cache=True)
    p, d_cache = gan.d_head.forward(h, want_cache=True)
    loss, dp = nn.loss_bce(p, np.ones(len(fake)))
    _, dh = gan.d_head.backward(dp, d_cache)

    if gan.variant == "info":
        q, a_cache = gan.aux_head.forward(h, want_cache=True)
        one_hot = one_hot_of(ids)
        q_loss, dq = nn.loss_categorical(q, one_hot)
        aux_grads, dh_aux = gan.aux_head.backward(lambda_info * dq, a_cache)
        dh = dh + dh_aux
        loss = loss + lambda_info * q_loss
        nn.sgd_step(gan.aux_head, aux_grads, cfg)

    _, dfake = gan.trunk.backward(dh, t_cache)
    gen_grads, _ = gan.generator.backward(dfake, g_cache)
    nn.sgd_step(gan.generator, gen_grads, cfg)
    return loss


# ---------------------------------------------------------------------------
# scatter diagnostics

def nearest_mode(samples, target):
    """Index of the closest mixture mean for every 2-D sample."""
    d = ((samples[:, None, :] - target.means[None]) ** 2).sum(axis=2)
    return d.argmin(axis=1)


def cluster_purity(samples, labels, target):
    """(purity, bijective): quality of the label -> nearest-mode mapping.

    Each conditioning label is mapped to its majority mode; purity is the
    fraction of samples landing on their label's mode, and the mapping is
    bijective when all four labels claim distinct modes.
    """
    modes = nearest_mode(samples, target)
    mapping = {}
    for k in range(NUM_MODES):
        owned = modes[labels == k]
        if len(owned):
            mapping[k] = int(np.bincount(owned, minlength=NUM_MODES).argmax())
    purity = float(np.mean([modes[i] == mapping[labels[i]] for i in range(len(samples))]))
    bijective = len(mapping) == NUM_MODES and len(set(mapping.values())) == NUM_MODES
    return purity, bijective


def mode_coverage(samples, target, min_fraction=0.05):
    """Number of mixture modes claiming at least `min_fraction` of samples."""
    modes = nearest_mode(samples, target)
    frac = np.bincount(modes, minlength=NUM_MODES) / len(samples)
    return int((frac >= min_fraction).sum())
