"""End-to-end experiment protocols behind the CLI verbs.

Each run function takes an ExperimentConfig, writes CSV tables, SVG plots
and a run manifest into the output directory, and returns a summary dict.
Every random draw is seeded through ``config.stage_seed`` from the master
seed, so a rerun with the same config reproduces byte-identical CSV/SVG
outputs (the manifest also records wall-clock times, which do vary).
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, data, metrics, models, plots, toy, training
from .config import stage_seed
from .errors import ConfigError
from .priors import NormalPrior, orthogonal_mixture

CHANCE_LEVEL = 0.25


class RunContext:
    """Output bookkeeping for one experiment run."""

    def __init__(self, cfg, out_dir=None):
        self.cfg = cfg
        self.out_dir = Path(out_dir if out_dir is not None else cfg.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.seeds = {}
        self.clocks = {}

    def seed(self, stage, index=0):
        value = stage_seed(self.cfg.master_seed, stage, index)
        self.seeds[f"{stage}[{index}]"] = value
        return value

    def path(self, name):
        p = self.out_dir / name
        self.outputs.append(p)
        return p

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        yield
        self.clocks[name] = self.clocks.get(name, 0.0) + time.perf_counter() - start

    def write_csv(self, name, header, rows):
        path = self.path(name)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(
                    [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row]
                )
        return path

    def finish(self):
        inventory = {}
        for p in self.outputs:
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            inventory[str(p.relative_to(self.out_dir))] = digest
        manifest = {
            "artifact": f"emogan {__version__}",
            "kind": self.cfg.kind,
            "master_seed": self.cfg.master_seed,
            "config": self.cfg.to_dict(),
            "stage_seeds": self.seeds,
            "wall_clock_seconds": {k: round(v, 3) for k, v in self.clocks.items()},
            "outputs": inventory,
        }
        path = self.out_dir / "run_manifest.json"
        path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return manifest


# ---------------------------------------------------------------------------
# corpus plumbing shared by the protocols

def _load_corpus(cfg, which="corpus"):
    path = getattr(cfg, which)
    seed_base = {"corpus": "toy-corpus", "source": "toy-source-corpus",
                 "target": "toy-target-corpus"}[which]
    if path is not None:
        session = cfg.session_column if which == "corpus" else None
        return data.load_csv(path, label_column=cfg.label_column, session_column=session)
    t = cfg.toy
    if which == "target":
        # same class geometry as the toy source, but shifted and noisier
        return data.make_toy_corpus(
            feature_dim=t.feature_dim,
            per_class=t.per_class,
            class_mean_separation=t.separation,
            noise_stddev=t.target_noise_stddev,
            seed=stage_seed(cfg.master_seed, seed_base),
            direction_seed=stage_seed(cfg.master_seed, "toy-source-corpus"),
            mean_shift=t.target_shift,
            name="toy-target",
        )
    return data.make_toy_corpus(
        feature_dim=t.feature_dim,
        per_class=t.per_class,
        class_mean_separation=t.separation,
        noise_stddev=t.noise_stddev,
        seed=stage_seed(cfg.master_seed, seed_base),
        direction_seed=stage_seed(cfg.master_seed, seed_base),
        name="toy" if which == "corpus" else "toy-source",
    )


def _train_model(cfg, kind, train_xy, val_xy, seed):
    model = models.build(
        kind,
        train_xy[0].shape[1],
        scale=cfg.scale,
        seed=stage_seed(seed, "build"),
    )
    epochs = cfg.train.m3_epochs if kind == "m3" else cfg.train.epochs
    batch_size = cfg.train.m3_batch_size if kind == "m3" else cfg.train.batch_size
    plan = training.default_plan(
        kind,
        epochs=epochs,
        batch_size=batch_size,
        seed=stage_seed(seed, "train"),
    )
    plan.d2_gen_ratio = cfg.train.d2_gen_ratio
    plan.lambda_info = cfg.train.lambda_info
    t = cfg.train
    from .nn import SgdConfig

    if t.step1_lr is not None or t.step1_momentum is not None:
        plan.step1 = SgdConfig(
            t.step1_lr if t.step1_lr is not None else plan.step1.learning_rate,
            t.step1_momentum if t.step1_momentum is not None else plan.step1.momentum,
        )
    for attr, name in (("step2_lr", "step2"), ("step3_lr", "step3"),
                       ("step4_lr", "step4"), ("step5_lr", "step5")):
        lr = getattr(t, attr)
        if lr is not None:
            setattr(plan, name, SgdConfig(lr, getattr(plan, name).momentum))
    history = training.train(model, train_xy, val_xy, plan)
    return model, history


def _loss_plots(ctx, history, tag):
    rows = [(e, s, n, v) for e, s, n, v in history.records]
    ctx.write_csv(f"loss_{tag}.csv", ["epoch", "split", "loss_name", "value"], rows)
    epochs = np.arange(history.num_epochs())

    def series(name, split):
        values = history.series(name, split)
        return (f"{name} {split}", epochs[: len(values)], values)

    plots.line_svg(
        ctx.path(f"loss_{tag}_code.svg"),
        [series("d1", "train"), series("d1", "val"), series("g1", "train"), series("g1", "val")],
        title=f"code-space adversarial losses ({tag})",
        xlabel="epoch",
        ylabel="loss",
    )
    plots.line_svg(
        ctx.path(f"loss_{tag}_recon.svg"),
        [series("recon", "train"), series("recon", "val")],
        title=f"reconstruction loss ({tag})",
        xlabel="epoch",
        ylabel="mse",
    )
    if len(history.series("d2", "train")):
        plots.line_svg(
            ctx.path(f"loss_{tag}_data.svg"),
            [series("d2", "train"), series("d2", "val"), series("g2", "train"), series("g2", "val")],
            title=f"data-space adversarial losses ({tag})",
            xlabel="epoch",
            ylabel="loss",
        )


# ---------------------------------------------------------------------------
# verb: toy-compare

def run_toy_compare(cfg, out_dir=None):
    """2-D study: vanilla vs conditional GAN against the 4-mode target."""
    ctx = RunContext(cfg, out_dir)
    tc = cfg.toy_compare
    target = orthogonal_mixture(tc.separation, tc.stddev)

    with ctx.stage("sample-panels"):
        source = NormalPrior(2).sample(tc.n_samples, ctx.seed("toy-source"))
        target_pts, target_ids = target.sample(tc.n_samples, ctx.seed("toy-target"))

    kwargs = dict(
        epochs=tc.epochs,
        n_samples=tc.n_samples,
        batch_size=tc.batch_size,
        dataset_size=tc.dataset_size,
        hidden=tc.hidden,
        lr_d=tc.lr_d,
        lr_g=tc.lr_g,
        momentum=tc.momentum,
        lambda_info=tc.lambda_info,
    )
    with ctx.stage("train-vanilla"):
        vanilla = toy.toy_train_and_sample("vanilla", target, seed=ctx.seed("toy-train-vanilla"), **kwargs)
    with ctx.stage("train-info"):
        info = toy.toy_train_and_sample("info", target, seed=ctx.seed("toy-train-info"), **kwargs)

    purity, bijective = toy.cluster_purity(info.samples, info.labels, target)
    coverage = toy.mode_coverage(vanilla.samples, target)

    with ctx.stage("emit"):
        ctx.write_csv("toy_source.csv", ["x", "y"], source.tolist())
        ctx.write_csv(
            "toy_target.csv", ["x", "y", "mode"],
            [(x, y, int(m)) for (x, y), m in zip(target_pts, target_ids)],
        )
        ctx.write_csv("toy_vanilla.csv", ["x", "y"], vanilla.samples.tolist())
        ctx.write_csv(
            "toy_infogan.csv", ["x", "y", "label"],
            [(x, y, int(l)) for (x, y), l in zip(info.samples, info.labels)],
        )
        ctx.write_csv(
            "toy_report.csv", ["quantity", "value"],
            [
                ("infogan_purity", purity),
                ("infogan_bijective", int(bijective)),
                ("vanilla_mode_coverage", coverage),
            ],
        )
        plots.scatter_svg(ctx.path("panel_a_source.svg"), [("source", source)],
                          title="source: 2-D normal", xlabel="x", ylabel="y")
        plots.scatter_svg(
            ctx.path("panel_b_target.svg"),
            [(f"mode {k}", target_pts[target_ids == k]) for k in range(4)],
            title="target: 4-Gaussian mixture", xlabel="x", ylabel="y",
        )
        plots.scatter_svg(ctx.path("panel_c_vanilla.svg"), [("generated", vanilla.samples)],
                          title="vanilla GAN output", xlabel="x", ylabel="y")
        plots.scatter_svg(
            ctx.path("panel_d_infogan.svg"),
            [(f"label {k}", info.samples[info.labels == k]) for k in range(4)],
            title="conditional GAN output by label", xlabel="x", ylabel="y",
        )
    manifest = ctx.finish()
    return {
        "purity": purity,
        "bijective": bijective,
        "coverage": coverage,
        "out_dir": str(ctx.out_dir),
        "manifest": manifest,
    }


# ---------------------------------------------------------------------------
# verb: cv (in-domain cross-validation)

def run_cv_indomain(cfg, out_dir=None):
    """Per-fold GAN training plus both cross-classifier metrics and FID."""
    ctx = RunContext(cfg, out_dir)
    corpus = _load_corpus(cfg, "corpus")
    folds = data.split(corpus, data.SplitPlan(mode="leave-one-session-out"))
    n_synth = cfg.n_synth or len(corpus)

    std_full = data.Standardizer.fit(corpus.features)
    evaluator = None
    if "fid" in cfg.metrics:
        with ctx.stage("evaluator"):
            evaluator = metrics.evaluator_train(
                std_full.transform(corpus.features),
                corpus.labels,
                epochs=cfg.evaluator.epochs,
                seed=ctx.seed("evaluator"),
                learning_rate=cfg.evaluator.learning_rate,
                momentum=cfg.evaluator.momentum,
                batch_size=cfg.evaluator.batch_size,
            )

    rows = []
    scatter_fold_artifacts = {}
    for kind in cfg.models:
        for fold_i, (train_c, val_c) in enumerate(folds):
            std = data.Standardizer.fit(train_c.features)
            train_xy = (std.transform(train_c.features), train_c.labels)
            val_xy = (std.transform(val_c.features), val_c.labels)
            with ctx.stage(f"train-{kind}"):
                model, history = _train_model(
                    cfg, kind, train_xy, val_xy, ctx.seed(f"cv-{kind}", fold_i)
                )
            _loss_plots(ctx, history, f"{kind}_fold{fold_i}")
            if cfg.save_models:
                with ctx.stage("save-models"):
                    models.save_bundle(model, ctx.path(f"{kind}_fold{fold_i}.bundle.zip"))
            with ctx.stage(f"generate-{kind}"):
                batch = models.generate(model, n_synth, seed=ctx.seed(f"cv-gen-{kind}", fold_i))
                synth_raw = std.inverse_transform(batch.features)
            with ctx.stage(f"metrics-{kind}"):
                row = {"model": kind, "fold": fold_i}
                for set_name, real_c in (("set1", train_c), ("set2", val_c)):
                    std_real = data.Standardizer.fit(real_c.features)
                    if "metric1" in cfg.metrics:
                        row[f"metric1_{set_name}"] = metrics.metric1(
                            std_real.transform(real_c.features), real_c.labels,
                            std_real.transform(synth_raw), batch.labels,
                            seed=ctx.seed(f"svm1-{kind}-{set_name}", fold_i),
                        )
                    if "metric2" in cfg.metrics:
                        std_syn = data.Standardizer.fit(synth_raw)
                        row[f"metric2_{set_name}"] = metrics.metric2(
                            std_syn.transform(synth_raw), batch.labels,
                            std_syn.transform(real_c.features), real_c.labels,
                            seed=ctx.seed(f"svm2-{kind}-{set_name}", fold_i),
                        )
                if "fid" in cfg.metrics:
                    row["fid"] = metrics.fid_pipeline(
                        evaluator,
                        std_full.transform(corpus.features),
                        std_full.transform(synth_raw),
                    )
            rows.append(row)
            if fold_i == cfg.code_scatter_fold:
                scatter_fold_artifacts[kind] = synth_raw
                if kind == "m1":
                    scatter_fold_artifacts["_m1_model"] = model
                    scatter_fold_artifacts["_m1_std"] = std
                    scatter_fold_artifacts["_fold"] = (train_c, val_c)

    report = metrics.MetricsReport(rows=rows, chance_level=CHANCE_LEVEL)
    value_cols = []
    for set_name in ("set1", "set2"):
        for metric in ("metric1", "metric2"):
            if metric in cfg.metrics:
                value_cols.append(f"{metric}_{set_name}")
    if "fid" in cfg.metrics:
        value_cols.append("fid")
    header = ["model", "fold"] + value_cols
    table = [[r["model"], r["fold"]] + [r[c] for c in value_cols] for r in rows]
    for kind in report.models():
        table.append([kind, "mean"] + [report.mean(kind, c) for c in value_cols])
    ctx.write_csv("metrics.csv", header, table)

    if "_m1_model" in scatter_fold_artifacts:
        with ctx.stage("code-scatter"):
            _emit_code_scatters(ctx, cfg, scatter_fold_artifacts)
    manifest = ctx.finish()
    return {"report": report, "out_dir": str(ctx.out_dir), "manifest": manifest}


def _emit_code_scatters(ctx, cfg, artifacts):
    """2-D code-space views through the trained m1 encoder (one fold)."""
    model = artifacts["_m1_model"]
    std = artifacts["_m1_std"]
    train_c, val_c = artifacts["_fold"]
    fold_tag = f"fold{cfg.code_scatter_fold}"
    panels = [
        ("train", std.transform(train_c.features), train_c.labels),
        ("val", std.transform(val_c.features), val_c.labels),
    ]
    for kind in cfg.models:
        if kind in artifacts:
            synth_raw = artifacts[kind]
            panels.append((f"synth_{kind}", std.transform(synth_raw), None))
    for name, feats, labels in panels:
        codes = models.encode(model, feats)
        if labels is None:
            groups = [(name, codes)]
            rows = [(x, y) for x, y in codes]
            header = ["code_x", "code_y"]
        else:
            groups = [(f"class {k}", codes[labels == k]) for k in range(4)]
            rows = [(x, y, int(l)) for (x, y), l in zip(codes, labels)]
            header = ["code_x", "code_y", "label"]
        ctx.write_csv(f"codes_{fold_tag}_{name}.csv", header, rows)
        plots.scatter_svg(
            ctx.path(f"codes_{fold_tag}_{name}.svg"), groups,
            title=f"m1 code space: {name}", xlabel="code x", ylabel="code y",
        )


# ---------------------------------------------------------------------------
# verb: cross-corpus

def run_cross_corpus(cfg, out_dir=None):
    """Train on the source corpus, evaluate the synthetic sets against the
    target corpus: metric 1 on a balanced target, metric 2 on the
    unbalanced target, FID with a target-trained evaluator."""
    ctx = RunContext(cfg, out_dir)
    source = _load_corpus(cfg, "source")
    target = _load_corpus(cfg, "target")
    if source.feature_dim != target.feature_dim:
        raise ConfigError("source and target corpora must share the feature dimension")
    n_synth = cfg.n_synth or len(source)

    std_src = data.Standardizer.fit(source.features)
    src_xy = (std_src.transform(source.features), source.labels)

    std_tgt = data.Standardizer.fit(target.features)
    evaluator = None
    if "fid" in cfg.metrics:
        with ctx.stage("evaluator"):
            evaluator = metrics.evaluator_train(
                std_tgt.transform(target.features), target.labels,
                epochs=cfg.evaluator.epochs, seed=ctx.seed("evaluator-target"),
                learning_rate=cfg.evaluator.learning_rate,
                momentum=cfg.evaluator.momentum, batch_size=cfg.evaluator.batch_size,
            )
    balanced = data.balance(target, seed=ctx.seed("balance-target"))
    std_bal = data.Standardizer.fit(balanced.features)

    rows = []
    for kind in cfg.models:
        # the whole source trains the generator; validation diagnostics
        # reuse the training split (no held-out set in this protocol)
        with ctx.stage(f"train-{kind}"):
            model, history = _train_model(cfg, kind, src_xy, src_xy, ctx.seed(f"cc-{kind}"))
        _loss_plots(ctx, history, f"{kind}_source")
        if cfg.save_models:
            models.save_bundle(model, ctx.path(f"{kind}_source.bundle.zip"))
        with ctx.stage(f"generate-{kind}"):
            batch = models.generate(model, n_synth, seed=ctx.seed(f"cc-gen-{kind}"))
            synth_raw = std_src.inverse_transform(batch.features)
        with ctx.stage(f"metrics-{kind}"):
            row = {"model": kind}
            if "metric1" in cfg.metrics:
                row["metric1"] = metrics.metric1(
                    std_bal.transform(balanced.features), balanced.labels,
                    std_bal.transform(synth_raw), batch.labels,
                    seed=ctx.seed(f"svm1-{kind}"),
                )
            if "metric2" in cfg.metrics:
                std_syn = data.Standardizer.fit(synth_raw)
                row["metric2"] = metrics.metric2(
                    std_syn.transform(synth_raw), batch.labels,
                    std_syn.transform(target.features), target.labels,
                    seed=ctx.seed(f"svm2-{kind}"),
                )
            if "fid" in cfg.metrics:
                row["fid"] = metrics.fid_pipeline(
                    evaluator,
                    std_tgt.transform(target.features),
                    std_tgt.transform(synth_raw),
                )
        rows.append(row)

    report = metrics.MetricsReport(rows=rows, chance_level=CHANCE_LEVEL)
    value_cols = [m for m in ("metric1", "metric2", "fid") if m in cfg.metrics]
    ctx.write_csv(
        "cross_corpus.csv", ["model"] + value_cols,
        [[r["model"]] + [r[c] for c in value_cols] for r in rows],
    )
    manifest = ctx.finish()
    return {"report": report, "out_dir": str(ctx.out_dir), "manifest": manifest}


# ---------------------------------------------------------------------------
# verb: low-resource

def _stratified_fraction(corpus, percent, seed):
    rng = np.random.default_rng(seed)
    keep = []
    for k in range(data.NUM_CLASSES):
        idx = np.flatnonzero(corpus.labels == k)
        take = max(1, int(round(percent / 100.0 * len(idx))))
        keep.append(rng.choice(idx, size=take, replace=False))
    return corpus.subset(np.sort(np.concatenate(keep)))


def run_low_resource(cfg, out_dir=None):
    """Accuracy-vs-P curves: classifier trained on P% of the source plus
    N synthetic samples, evaluated on the target corpus."""
    ctx = RunContext(cfg, out_dir)
    source = _load_corpus(cfg, "source")
    target = _load_corpus(cfg, "target")
    if source.feature_dim != target.feature_dim:
        raise ConfigError("source and target corpora must share the feature dimension")
    lr_cfg = cfg.low_resource

    std_src = data.Standardizer.fit(source.features)
    src_xy = (std_src.transform(source.features), source.labels)

    rows = []
    for kind in cfg.models:
        with ctx.stage(f"train-{kind}"):
            model, _ = _train_model(cfg, kind, src_xy, src_xy, ctx.seed(f"lr-{kind}"))
        for pi, percent in enumerate(lr_cfg.p_grid):
            sub = _stratified_fraction(source, percent, ctx.seed(f"lr-sub-{kind}", pi))
            for ni, n_add in enumerate(lr_cfg.n_grid):
                cell = pi * len(lr_cfg.n_grid) + ni
                feats, labels = sub.features, sub.labels
                if n_add > 0:
                    with ctx.stage("generate"):
                        batch = models.generate(
                            model, n_add, seed=ctx.seed(f"lr-gen-{kind}", cell)
                        )
                        feats = np.vstack([feats, std_src.inverse_transform(batch.features)])
                        labels = np.concatenate([labels, batch.labels])
                with ctx.stage("classifier"):
                    std_cell = data.Standardizer.fit(feats)
                    clf = metrics.evaluator_train(
                        std_cell.transform(feats), labels,
                        epochs=lr_cfg.classifier_epochs,
                        seed=ctx.seed(f"lr-clf-{kind}", cell),
                        learning_rate=cfg.evaluator.learning_rate,
                        momentum=cfg.evaluator.momentum,
                        batch_size=cfg.evaluator.batch_size,
                    )
                    preds = clf.net.forward(std_cell.transform(target.features)).argmax(axis=1)
                    score = metrics.uwa(preds, target.labels)
                rows.append({"model": kind, "p_percent": percent, "n_synth": n_add, "uwa": score})

    ctx.write_csv(
        "low_resource.csv", ["model", "p_percent", "n_synth", "uwa"],
        [[r["model"], r["p_percent"], r["n_synth"], r["uwa"]] for r in rows],
    )
    for kind in cfg.models:
        series = []
        for n_add in cfg.low_resource.n_grid:
            pts = [(r["p_percent"], r["uwa"]) for r in rows
                   if r["model"] == kind and r["n_synth"] == n_add]
            label = "baseline (n=0)" if n_add == 0 else f"n_synth={n_add}"
            series.append((label, [p for p, _ in pts], [u for _, u in pts]))
        plots.line_svg(
            ctx.path(f"low_resource_{kind}.svg"), series,
            title=f"target accuracy vs source fraction ({kind})",
            xlabel="percent of source data", ylabel="uwa",
        )
    manifest = ctx.finish()
    return {"rows": rows, "out_dir": str(ctx.out_dir), "manifest": manifest}


RUNNERS = {
    "toy-compare": run_toy_compare,
    "cv": run_cv_indomain,
    "cross-corpus": run_cross_corpus,
    "low-resource": run_low_resource,
}
