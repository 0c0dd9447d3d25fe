"""Per-batch five-step adversarial training with per-step SGD configs.

Step 1 updates the autoencoder on reconstruction MSE. Step 2 updates the
code-space discriminator D1 (target 1 on encoder codes, 0 on prior-side
samples, both conditioned on one-hot labels). Step 3 updates the encoder
to drive D1's output on its codes toward 0, D1 frozen. Steps 4-5 (m2/m3
only) play the same game in data space: D2 sees decoder outputs as 1 and
real features as 0; the decoder (plus code generator and aux head for m3)
is updated to drive D2 toward 0, with the m3 class term weighted by
``lambda_info``. Step 5 runs ``d2_gen_ratio`` times per step 4.

Freezing is structural: a frozen component's backward is only used to pass
gradients through, and its parameters and momentum buffers are never
touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ContractViolationError, DivergenceError
from .models import ModelM3
from .priors import one_hot_of

LOSS_CEILING = 1e6

LOSS_NAMES = ("recon", "d1", "g1", "d2", "g2", "q")


@dataclass
class TrainPlan:
    """Optimizer settings for each step plus loop-level knobs."""

    step1: nn.SgdConfig
    step2: nn.SgdConfig
    step3: nn.SgdConfig
    step4: nn.SgdConfig
    step5: nn.SgdConfig
    batch_size: int = 64
    epochs: int = 200
    d2_gen_ratio: int = 2
    seed: int = 0
    lambda_info: float = 1.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ContractViolationError("batch_size must be >= 1")
        if self.d2_gen_ratio < 1:
            raise ContractViolationError("d2_gen_ratio must be >= 1")
        if self.epochs < 0:
            raise ContractViolationError("epochs must be >= 0")


def default_plan(model_kind, epochs=200, batch_size=64, seed=0):
    """The reference learning rates and momentum for each model kind."""
    kind = model_kind.lower()
    if kind in ("m1", "m2"):
        step1 = nn.SgdConfig(0.001, momentum=0.9)
        adv_lr = 0.1
    elif kind == "m3":
        step1 = nn.SgdConfig(0.001, momentum=0.0)
        adv_lr = 0.01
    else:
        raise ContractViolationError(f"unknown model kind {model_kind!r}")
    return TrainPlan(
        step1=step1,
        step2=nn.SgdConfig(adv_lr),
        step3=nn.SgdConfig(adv_lr),
        step4=nn.SgdConfig(0.0001),
        step5=nn.SgdConfig(0.001),
        batch_size=batch_size,
        epochs=epochs,
        seed=seed,
    )


class LossHistory:
    """Per-epoch loss records on the train and validation splits."""

    def __init__(self):
        self.records = []  # (epoch, split, name, value)
        self.step_counts = {"step4": 0, "step5": 0}

    def add(self, epoch, split, name, value):
        if not np.isfinite(value):
            raise DivergenceError(f"non-finite {name} loss recorded", epoch=epoch)
        self.records.append((int(epoch), split, name, float(value)))

    def series(self, name, split="train"):
        return np.array([v for e, s, n, v in self.records if n == name and s == split])

    def last(self, name, split="train"):
        series = self.series(name, split)
        if len(series) == 0:
            raise KeyError(f"no records for {name}/{split}")
        return float(series[-1])

    def num_epochs(self):
        return max((e + 1 for e, *_ in self.records), default=0)

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["epoch", "split", "loss_name", "value"])
            for epoch, split, name, value in self.records:
                writer.writerow([epoch, split, name, repr(value)])


def _check(loss, step):
    if not np.isfinite(loss) or abs(loss) > LOSS_CEILING:
        raise DivergenceError(f"loss diverged in {step}", step=step)
    return float(loss)


def step1_autoencoder(model, batch, cfg):
    """One reconstruction step on encoder+decoder; returns pre-update loss."""
    if len(batch) == 0:
        raise ContractViolationError("batch must be nonempty")
    codes, enc_cache = model.encoder.forward(batch, want_cache=True)
    recon, dec_cache = model.decoder.forward(codes, want_cache=True)
    loss, dout = nn.loss_mse(recon, batch)
    _check(loss, "step1")
    if cfg is not None:
        dec_grads, dcodes = model.decoder.backward(dout, dec_cache)
        enc_grads, _ = model.encoder.backward(dcodes, enc_cache)
        nn.sgd_step(model.decoder, dec_grads, cfg)
        nn.sgd_step(model.encoder, enc_grads, cfg)
    return loss


def _code_sides(model, batch, labels, rng):
    """Both D1 input sides: (encoded real, one-hot) and (prior-side, one-hot)."""
    codes = model.encoder.forward(batch)
    c_x = one_hot_of(labels)
    prior_codes, prior_ids = model.sample_codes(len(batch), rng)
    c_z = one_hot_of(prior_ids)
    return np.hstack([codes, c_x]), np.hstack([prior_codes, c_z])


def step2_d1(model, batch, labels, rng, cfg):
    """Update D1 to separate encoder codes (1) from prior-side samples (0)."""
    enc_side, prior_side = _code_sides(model, batch, labels, rng)
    p_enc, cache_enc = model.d1.forward(enc_side, want_cache=True)
    loss_enc, dp_enc = nn.loss_bce(p_enc, np.ones(len(enc_side)))
    p_pri, cache_pri = model.d1.forward(prior_side, want_cache=True)
    loss_pri, dp_pri = nn.loss_bce(p_pri, np.zeros(len(prior_side)))
    loss = _check(loss_enc + loss_pri, "step2")
    if cfg is not None:
        g_enc, _ = model.d1.backward(dp_enc, cache_enc)
        g_pri, _ = model.d1.backward(dp_pri, cache_pri)
        nn.sgd_step(model.d1, nn.accumulate_grads(g_enc, g_pri), cfg)
    return loss


def step3_encoder(model, batch, labels, cfg):
    """Update the encoder to drive D1's output on its codes toward 0."""
    codes, enc_cache = model.encoder.forward(batch, want_cache=True)
    d1_in = np.hstack([codes, one_hot_of(labels)])
    p, d1_cache = model.d1.forward(d1_in, want_cache=True)
    loss, dp = nn.loss_bce(p, np.zeros(len(batch)))
    _check(loss, "step3")
    if cfg is not None:
        _, d_in = model.d1.backward(dp, d1_cache)
        enc_grads, _ = model.encoder.backward(d_in[:, : model.code_dim], enc_cache)
        nn.sgd_step(model.encoder, enc_grads, cfg)
    return loss


def _synthesize(model, n, rng, want_caches=False):
    """Decoder output for n prior draws plus conditioning one-hots."""
    if isinstance(model, ModelM3):
        z = model.prior.sample(n, rng)
        c, _ = model.labels.one_hot(n, rng)
        cg_in = np.hstack([z, c])
        if want_caches:
            codes, cg_cache = model.code_generator.forward(cg_in, want_cache=True)
            synth, dec_cache = model.decoder.forward(codes, want_cache=True)
            return synth, c, (cg_cache, dec_cache)
        synth = model.decoder.forward(model.code_generator.forward(cg_in))
        return synth, c, None
    z, comp = model.prior.sample(n, rng)
    c = one_hot_of(comp)
    if want_caches:
        synth, dec_cache = model.decoder.forward(z, want_cache=True)
        return synth, c, (None, dec_cache)
    return model.decoder.forward(z), c, None


def _d2_prob(model, features, one_hot, want_cache=False):
    inp = np.hstack([features, one_hot])
    if isinstance(model, ModelM3):
        if want_cache:
            h, t_cache = model.d2_trunk.forward(inp, want_cache=True)
            p, h_cache = model.d2_head.forward(h, want_cache=True)
            return p, (t_cache, h_cache)
        return model.d2_head.forward(model.d2_trunk.forward(inp)), None
    if want_cache:
        return model.d2.forward(inp, want_cache=True)
    return model.d2.forward(inp), None


def step4_d2(model, batch, labels, n_synth, rng, cfg):
    """Update D2 (and shared trunk) to separate decoder outputs (1) from real (0)."""
    if not model.has_d2:
        raise ContractViolationError("step 4 needs a data-space discriminator (m2/m3)")
    if n_synth != len(batch):
        raise ContractViolationError(
            f"real/synthetic counts must balance: {len(batch)} vs {n_synth}"
        )
    synth, c_synth, _ = _synthesize(model, n_synth, rng)
    real_in = (batch, one_hot_of(labels))
    p_syn, cache_syn = _d2_prob(model, synth, c_synth, want_cache=True)
    loss_syn, dp_syn = nn.loss_bce(p_syn, np.ones(n_synth))
    p_real, cache_real = _d2_prob(model, *real_in, want_cache=True)
    loss_real, dp_real = nn.loss_bce(p_real, np.zeros(len(batch)))
    loss = _check(loss_syn + loss_real, "step4")
    if cfg is not None:
        if isinstance(model, ModelM3):
            (t_syn, h_syn), (t_real, h_real) = cache_syn, cache_real
            gh_s, dh_s = model.d2_head.backward(dp_syn, h_syn)
            gt_s, _ = model.d2_trunk.backward(dh_s, t_syn)
            gh_r, dh_r = model.d2_head.backward(dp_real, h_real)
            gt_r, _ = model.d2_trunk.backward(dh_r, t_real)
            nn.sgd_step(model.d2_head, nn.accumulate_grads(gh_s, gh_r), cfg)
            nn.sgd_step(model.d2_trunk, nn.accumulate_grads(gt_s, gt_r), cfg)
        else:
            g_s, _ = model.d2.backward(dp_syn, cache_syn)
            g_r, _ = model.d2.backward(dp_real, cache_real)
            nn.sgd_step(model.d2, nn.accumulate_grads(g_s, g_r), cfg)
    return loss


def step5_generator(model, n, rng, cfg, lambda_info=1.0):
    """Update the decoder (m2) or decoder+CG+aux (m3) against a frozen D2.

    Returns (adversarial loss, class-term loss or None).
    """
    if not model.has_d2:
        raise ContractViolationError("step 5 needs a data-space discriminator (m2/m3)")
    synth, c, caches = _synthesize(model, n, rng, want_caches=True)
    cg_cache, dec_cache = caches
    if isinstance(model, ModelM3):
        inp = np.hstack([synth, c])
        h, t_cache = model.d2_trunk.forward(inp, want_cache=True)
        p, h_cache = model.d2_head.forward(h, want_cache=True)
        adv, dp = nn.loss_bce(p, np.zeros(n))
        q, a_cache = model.aux_head.forward(h, want_cache=True)
        q_loss, dq = nn.loss_categorical(q, c)
        _check(adv + lambda_info * q_loss, "step5")
        if cfg is not None:
            _, dh_adv = model.d2_head.backward(dp, h_cache)
            aux_grads, dh_aux = model.aux_head.backward(lambda_info * dq, a_cache)
            _, dinp = model.d2_trunk.backward(dh_adv + dh_aux, t_cache)
            dec_grads, dcodes = model.decoder.backward(
                dinp[:, : model.feature_dim], dec_cache
            )
            cg_grads, _ = model.code_generator.backward(dcodes, cg_cache)
            nn.sgd_step(model.decoder, dec_grads, cfg)
            nn.sgd_step(model.code_generator, cg_grads, cfg)
            nn.sgd_step(model.aux_head, aux_grads, cfg)
        return float(adv), float(q_loss)
    p, d2_cache = _d2_prob(model, synth, c, want_cache=True)
    adv, dp = nn.loss_bce(p, np.zeros(n))
    _check(adv, "step5")
    if cfg is not None:
        _, dinp = model.d2.backward(dp, d2_cache)
        dec_grads, _ = model.decoder.backward(dinp[:, : model.feature_dim], dec_cache)
        nn.sgd_step(model.decoder, dec_grads, cfg)
    return float(adv), None


def evaluate_losses(model, features, labels, rng, lambda_info=1.0):
    """All step losses on a split without any parameter update."""
    out = {}
    out["recon"] = step1_autoencoder(model, features, None)
    out["d1"] = step2_d1(model, features, labels, rng, None)
    out["g1"] = step3_encoder(model, features, labels, None)
    if model.has_d2:
        out["d2"] = step4_d2(model, features, labels, len(features), rng, None)
        adv, q = step5_generator(model, len(features), rng, None, lambda_info)
        out["g2"] = adv
        if q is not None:
            out["q"] = q
    return out


def train(model, train_split, val_split, plan):
    """Run the full per-batch schedule; returns a LossHistory.

    `train_split` / `val_split` are (features, labels) pairs. Validation
    losses are evaluated once per epoch with no updates. Raises
    DivergenceError (with epoch and step) if any loss blows up.
    """
    x_train, y_train = train_split
    x_val, y_val = val_split
    history = LossHistory()
    if plan.epochs == 0:
        return history
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, 11]))
    n = len(x_train)
    for epoch in range(plan.epochs):
        sums = {}
        counts = {}
        order = rng.permutation(n)
        for start in range(0, n, plan.batch_size):
            idx = order[start : start + plan.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            try:
                batch_losses = {
                    "recon": step1_autoencoder(model, xb, plan.step1),
                    "d1": step2_d1(model, xb, yb, rng, plan.step2),
                    "g1": step3_encoder(model, xb, yb, plan.step3),
                }
                if model.has_d2:
                    batch_losses["d2"] = step4_d2(
                        model, xb, yb, len(xb), rng, plan.step4
                    )
                    history.step_counts["step4"] += 1
                    g2_vals, q_vals = [], []
                    for _ in range(plan.d2_gen_ratio):
                        adv, q = step5_generator(
                            model, len(xb), rng, plan.step5, plan.lambda_info
                        )
                        history.step_counts["step5"] += 1
                        g2_vals.append(adv)
                        if q is not None:
                            q_vals.append(q)
                    batch_losses["g2"] = float(np.mean(g2_vals))
                    if q_vals:
                        batch_losses["q"] = float(np.mean(q_vals))
            except DivergenceError as exc:
                exc.epoch = epoch
                raise
            for name, value in batch_losses.items():
                sums[name] = sums.get(name, 0.0) + value * len(xb)
                counts[name] = counts.get(name, 0) + len(xb)
        for name in LOSS_NAMES:
            if name in sums:
                history.add(epoch, "train", name, sums[name] / counts[name])
        val_rng = np.random.default_rng(np.random.SeedSequence([plan.seed, 13, epoch]))
        for name, value in evaluate_losses(
            model, x_val, y_val, val_rng, plan.lambda_info
        ).items():
            history.add(epoch, "val", name, value)
    return history
