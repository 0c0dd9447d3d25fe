"""The three generator systems (m1/m2/m3) and the 2-D toy GAN pair.

m1: autoencoder whose 2-D code space is adversarially matched (D1) to a
    4-component Gaussian mixture; sampling a mixture component and decoding
    yields a synthetic feature vector of that component's class.
m2: m1 plus a data-space discriminator D2, so the decoder also receives an
    adversarial update against real feature vectors.
m3: 256-D code space learned data-driven; a code generator maps
    (20-D normal noise, one-hot class) into code space, and D2 carries an
    auxiliary softmax head that predicts the conditioning class
    (mutual-information surrogate).

Label convention used throughout: discriminators are trained toward 1 on
the generated/encoded side and 0 on the prior/real side; generators are
trained to drive the discriminator output on their own outputs toward 0.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import (
    ContractViolationError,
    DivergenceError,
    ShapeError,
    UnsupportedOperationError,
)
from .priors import LabelSource, MixturePrior, NormalPrior, one_hot_of, orthogonal_mixture, prior_from_config

REFERENCE_FEATURE_DIM = 1582
NUM_CLASSES = 4

BUNDLE_MAGIC = "emogan-model-bundle"
BUNDLE_VERSION = 1

SCALE_PROFILES = {"default": 1.0, "half": 0.5, "quarter": 0.25}


def resolve_scale(scale, feature_dim):
    """Width multiplier for the reference layer sizes.

    "default" keeps the reference widths; "auto" shrinks them by
    feature_dim / 1582 for desk-scale corpora; floats are used directly.
    """
    if scale == "auto":
        return feature_dim / REFERENCE_FEATURE_DIM
    if isinstance(scale, str):
        try:
            return SCALE_PROFILES[scale]
        except KeyError:
            raise ContractViolationError(f"unknown scale profile {scale!r}")
    return float(scale)


def _w(width, ratio):
    """Scaled hidden width with a floor of 8."""
    return max(8, int(round(width * ratio)))


class ModelM1:
    """Code-space adversarial autoencoder over a 2-D mixture prior."""

    kind = "m1"
    has_d2 = False

    def __init__(self, encoder, decoder, d1, prior, scale="default", seed=None):
        self.encoder = encoder
        self.decoder = decoder
        self.d1 = d1
        self.prior = prior
        self.scale = scale
        self.seed = seed
        self.labels = LabelSource(NUM_CLASSES)
        if encoder.dims[-1] != prior.dim:
            raise ShapeError("encoder bottleneck must match the prior dimension")
        if d1.dims[0] != prior.dim + NUM_CLASSES:
            raise ShapeError("d1 input must be code dim + one-hot width")

    @property
    def feature_dim(self):
        return self.encoder.dims[0]

    @property
    def code_dim(self):
        return self.encoder.dims[-1]

    def components(self):
        return {"encoder": self.encoder, "decoder": self.decoder, "d1": self.d1}

    def generator_nets(self):
        """Networks whose outputs are decoded synthetic samples."""
        return {"decoder": self.decoder}

    def sample_codes(self, n, rng):
        """Prior-side draw for the code-space game: (codes, class ids)."""
        z, comp = self.prior.sample(n, rng)
        return z, comp

    def decode_for_class(self, n, class_id, rng):
        z = self.prior.sample_component(class_id, n, rng)
        return self.decoder.forward(z)


class ModelM2(ModelM1):
    """m1 plus a data-space discriminator on decoder outputs vs real."""

    kind = "m2"
    has_d2 = True

    def __init__(self, encoder, decoder, d1, d2, prior, scale="default", seed=None):
        super().__init__(encoder, decoder, d1, prior, scale=scale, seed=seed)
        self.d2 = d2
        if d2.dims[0] != self.feature_dim + NUM_CLASSES:
            raise ShapeError("d2 input must be feature dim + one-hot width")

    def components(self):
        out = super().components()
        out["d2"] = self.d2
        return out


class ModelM3:
    """Conditional code-generator variant with an auxiliary class head."""

    kind = "m3"
    has_d2 = True

    def __init__(self, encoder, decoder, d1, code_generator, d2_trunk, d2_head,
                 aux_head, prior, scale="default", seed=None):
        self.encoder = encoder
        self.decoder = decoder
        self.d1 = d1
        self.code_generator = code_generator
        self.d2_trunk = d2_trunk
        self.d2_head = d2_head
        self.aux_head = aux_head
        self.prior = prior
        self.scale = scale
        self.seed = seed
        self.labels = LabelSource(NUM_CLASSES)
        if code_generator.dims[0] != prior.dim + NUM_CLASSES:
            raise ShapeError("code generator input must be z dim + one-hot width")
        if code_generator.dims[-1] != encoder.dims[-1]:
            raise ShapeError("code generator output must match the bottleneck")
        if aux_head.dims[-1] != NUM_CLASSES:
            raise ShapeError("aux head must end in a 4-way softmax")

    @property
    def feature_dim(self):
        return self.encoder.dims[0]

    @property
    def code_dim(self):
        return self.encoder.dims[-1]

    @property
    def z_dim(self):
        return self.prior.dim

    def components(self):
        return {
            "encoder": self.encoder,
            "decoder": self.decoder,
            "d1": self.d1,
            "code_generator": self.code_generator,
            "d2_trunk": self.d2_trunk,
            "d2_head": self.d2_head,
            "aux_head": self.aux_head,
        }

    def generator_nets(self):
        return {"decoder": self.decoder, "code_generator": self.code_generator}

    def sample_codes(self, n, rng):
        """Prior-side draw: z through the code generator with uniform labels."""
        z = self.prior.sample(n, rng)
        one_hot, ids = self.labels.one_hot(n, rng)
        codes = self.code_generator.forward(np.hstack([z, one_hot]))
        return codes, ids

    def decode_for_class(self, n, class_id, rng):
        z = self.prior.sample(n, rng)
        one_hot = one_hot_of(np.full(n, class_id), NUM_CLASSES)
        codes = self.code_generator.forward(np.hstack([z, one_hot]))
        return self.decoder.forward(codes)


@dataclass
class SyntheticBatch:
    """Generated feature vectors with their class ids."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.features) == 0:
            raise ContractViolationError("synthetic batch must be nonempty")
        if not np.isfinite(self.features).all():
            raise DivergenceError("synthetic features contain non-finite values")
        if self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES:
            raise ContractViolationError("labels must lie in 0..3")


def build(model_kind, feature_dim, scale="default", seed=0,
          mixture_separation=3.0, mixture_stddev=0.5, z_dim=20):
    """Construct an initialized m1/m2/m3 with the reference layer layout.

    With feature_dim=1582 and the default profile the component widths are
    the reference ones; other profiles shrink hidden widths proportionally
    (floor 8). The 2-D bottleneck of m1/m2 never scales.
    """
    if feature_dim < 4:
        raise ContractViolationError("feature_dim must be at least 4")
    ratio = resolve_scale(scale, feature_dim)
    rng = np.random.default_rng(seed)
    kind = model_kind.lower()
    if kind in ("m1", "m2"):
        code = 2
        enc_dims = [feature_dim, _w(1000, ratio), _w(500, ratio), _w(100, ratio), code]
        dec_dims = enc_dims[::-1]
        d1_dims = [code + NUM_CLASSES, _w(1000, ratio), _w(500, ratio), _w(100, ratio), 1]
        prior = orthogonal_mixture(mixture_separation, mixture_stddev)
        encoder = nn.Mlp.from_dims(enc_dims, ["relu", "relu", "relu", "linear"], rng)
        decoder = nn.Mlp.from_dims(dec_dims, ["relu", "relu", "relu", "linear"], rng)
        d1 = nn.Mlp.from_dims(d1_dims, ["relu", "relu", "relu", "sigmoid"], rng)
        if kind == "m1":
            return ModelM1(encoder, decoder, d1, prior, scale=scale, seed=seed)
        d2_dims = [feature_dim + NUM_CLASSES, _w(1000, ratio), _w(500, ratio), _w(100, ratio), 1]
        d2 = nn.Mlp.from_dims(d2_dims, ["relu", "relu", "relu", "sigmoid"], rng)
        return ModelM2(encoder, decoder, d1, d2, prior, scale=scale, seed=seed)
    if kind == "m3":
        code = max(8, int(round(256 * ratio)))
        if feature_dim < 4:
            raise ContractViolationError("feature_dim smaller than the bottleneck")
        enc_dims = [feature_dim, _w(1000, ratio), _w(700, ratio), _w(300, ratio), code]
        dec_dims = enc_dims[::-1]
        d1_dims = [code + NUM_CLASSES, _w(1000, ratio), _w(500, ratio), _w(100, ratio), 1]
        cg_dims = [z_dim + NUM_CLASSES, _w(140, ratio), code]
        trunk_dims = [feature_dim + NUM_CLASSES, _w(1000, ratio), _w(500, ratio), _w(100, ratio)]
        encoder = nn.Mlp.from_dims(enc_dims, ["relu", "relu", "relu", "linear"], rng)
        decoder = nn.Mlp.from_dims(dec_dims, ["relu", "relu", "relu", "linear"], rng)
        d1 = nn.Mlp.from_dims(d1_dims, ["relu", "relu", "relu", "sigmoid"], rng)
        cg = nn.Mlp.from_dims(cg_dims, ["relu", "linear"], rng)
        trunk = nn.Mlp.from_dims(trunk_dims, ["relu", "relu", "relu"], rng)
        d2_head = nn.Mlp.from_dims([trunk_dims[-1], 1], ["sigmoid"], rng)
        aux_head = nn.Mlp.from_dims([trunk_dims[-1], _w(128, ratio), NUM_CLASSES],
                                    ["relu", "softmax"], rng)
        return ModelM3(encoder, decoder, d1, cg, trunk, d2_head, aux_head,
                       NormalPrior(z_dim), scale=scale, seed=seed)
    raise ContractViolationError(f"unknown model kind {model_kind!r}")


def encode(model, features):
    """Bottleneck codes for a batch of feature vectors."""
    return model.encoder.forward(features)


def generate(model, n, class_id=None, seed=0):
    """Sample a SyntheticBatch of n feature vectors.

    m1/m2 draw the latent from the requested (or uniformly random) mixture
    component; m3 draws normal noise plus a one-hot class through the code
    generator. The recorded label is the component/conditioning class.
    """
    if n < 1:
        raise ContractViolationError("need n >= 1")
    rng = np.random.default_rng(seed)
    if class_id is not None:
        if not 0 <= class_id < NUM_CLASSES:
            raise ContractViolationError(f"unknown class id {class_id}")
        features = model.decode_for_class(n, class_id, rng)
        labels = np.full(n, class_id, dtype=np.int64)
        return SyntheticBatch(features=features, labels=labels)
    if isinstance(model, ModelM3):
        z = model.prior.sample(n, rng)
        one_hot, ids = model.labels.one_hot(n, rng)
        codes = model.code_generator.forward(np.hstack([z, one_hot]))
        features = model.decoder.forward(codes)
    else:
        z, ids = model.prior.sample(n, rng)
        features = model.decoder.forward(z)
    return SyntheticBatch(features=features, labels=ids.astype(np.int64))


def discriminate_code(model, code, one_hot):
    """D1 probability that each (code, one-hot) row is an encoder output."""
    inp = np.hstack([code, one_hot])
    return model.d1.forward(inp)[:, 0]


def discriminate_data(model, features, one_hot):
    """D2 probability that each row is a decoder output.

    Returns (probabilities, aux_softmax); the aux term is None except for
    m3, whose shared trunk feeds both heads.
    """
    if not model.has_d2:
        raise UnsupportedOperationError("m1 has no data-space discriminator")
    inp = np.hstack([features, one_hot])
    if isinstance(model, ModelM3):
        h = model.d2_trunk.forward(inp)
        return model.d2_head.forward(h)[:, 0], model.aux_head.forward(h)
    return model.d2.forward(inp)[:, 0], None


# ---------------------------------------------------------------------------
# model bundles: one zip holding every component checkpoint plus metadata

def save_bundle(model, path):
    meta = {
        "magic": BUNDLE_MAGIC,
        "version": BUNDLE_VERSION,
        "kind": model.kind,
        "feature_dim": model.feature_dim,
        "scale": model.scale if isinstance(model.scale, str) else float(model.scale),
        "seed": model.seed,
        "prior": model.prior.config(),
        "components": sorted(model.components()),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("meta.json", json.dumps(meta, indent=1, sort_keys=True))
        for name, net in sorted(model.components().items()):
            zf.writestr(f"{name}.mlp", nn.dumps_mlp(net, seed=model.seed))


def load_bundle(path):
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("magic") != BUNDLE_MAGIC or meta.get("version") != BUNDLE_VERSION:
            raise ContractViolationError(f"not a recognizable model bundle: {path}")
        nets = {}
        for name in meta["components"]:
            nets[name], _ = nn.loads_mlp(zf.read(f"{name}.mlp"))
    prior = prior_from_config(meta["prior"])
    common = dict(scale=meta["scale"], seed=meta["seed"])
    if meta["kind"] == "m1":
        return ModelM1(nets["encoder"], nets["decoder"], nets["d1"], prior, **common)
    if meta["kind"] == "m2":
        return ModelM2(nets["encoder"], nets["decoder"], nets["d1"], nets["d2"], prior, **common)
    if meta["kind"] == "m3":
        return ModelM3(nets["encoder"], nets["decoder"], nets["d1"],
                       nets["code_generator"], nets["d2_trunk"], nets["d2_head"],
                       nets["aux_head"], prior, **common)
    raise ContractViolationError(f"unknown bundle kind {meta['kind']!r}")
