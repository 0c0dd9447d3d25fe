import numpy as np
import pytest

from emogan import cli, data, models, training
from emogan.cli import EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGENCE, EXIT_OK


def run(argv):
    return cli.main(argv)


SMALL = [
    "--config", None,  # replaced per test
]


def write_small_config(tmp_path, **extra):
    import yaml

    raw = {
        "toy": {"feature_dim": 16, "per_class": 40},
        "train": {"epochs": 6, "m3_epochs": 6, "m3_batch_size": 32},
        "evaluator": {"epochs": 3},
        "toy_compare": {"epochs": 2, "n_samples": 60, "dataset_size": 128},
        "low_resource": {"p_grid": [100], "n_grid": [0, 50], "classifier_epochs": 2},
        **extra,
    }
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return p


def test_toy_compare_exit_zero(tmp_path, capsys):
    cfgp = write_small_config(tmp_path)
    code = run(["toy-compare", "--config", str(cfgp), "--out", str(tmp_path / "out"), "--seed", "3"])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "purity" in out
    assert (tmp_path / "out" / "run_manifest.json").exists()


def test_cv_exit_zero(tmp_path):
    cfgp = write_small_config(tmp_path)
    code = run(["cv", "--config", str(cfgp), "--out", str(tmp_path / "cv"), "--model", "m1"])
    assert code == EXIT_OK
    assert (tmp_path / "cv" / "metrics.csv").exists()


def test_config_error_exit_two(tmp_path):
    missing = tmp_path / "nope.yaml"
    assert run(["cv", "--config", str(missing)]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("unknown_key: 1\n", encoding="utf-8")
    assert run(["cv", "--config", str(bad)]) == EXIT_CONFIG
    assert run(["cv", "--corpus", "/no/such/file.csv"]) == EXIT_CONFIG


def test_data_error_exit_three(tmp_path):
    broken = tmp_path / "broken.csv"
    broken.write_text("f0,label\n1.0,excited\n", encoding="utf-8")
    cfgp = write_small_config(tmp_path)
    code = run(["cv", "--config", str(cfgp), "--corpus", str(broken), "--out", str(tmp_path / "x")])
    assert code == EXIT_DATA


def test_divergence_exit_four(tmp_path):
    cfgp = write_small_config(
        tmp_path,
        train={"epochs": 20, "step1_lr": 1e6},
    )
    code = run(["cv", "--config", str(cfgp), "--out", str(tmp_path / "dv"), "--model", "m1"])
    assert code == EXIT_DIVERGENCE


def test_generate_and_metrics_round_trip(tmp_path, capsys):
    corpus = data.make_toy_corpus(feature_dim=12, per_class=60, seed=4)
    std = data.Standardizer.fit(corpus.features)
    xy = (std.transform(corpus.features), corpus.labels)
    model = models.build("m1", 12, scale="auto", seed=1)
    training.train(model, xy, xy, training.default_plan("m1", epochs=30, seed=1))
    bundle = tmp_path / "model.zip"
    models.save_bundle(model, bundle)
    real_csv = tmp_path / "real.csv"
    data.save_csv(corpus, real_csv)

    synth_csv = tmp_path / "synth.csv"
    assert run(["generate", "--bundle", str(bundle), "--n", "300",
                "--seed", "2", "--out-csv", str(synth_csv)]) == EXIT_OK
    back = data.load_csv(synth_csv)
    assert len(back) == 300 and back.feature_dim == 12

    fixed = tmp_path / "fixed.csv"
    assert run(["generate", "--bundle", str(bundle), "--n", "10", "--class-id", "3",
                "--seed", "2", "--out-csv", str(fixed)]) == EXIT_OK
    assert np.all(data.load_csv(fixed).labels == 3)

    assert run(["metrics", "--real", str(real_csv), "--synth", str(synth_csv),
                "--out", str(tmp_path / "rep")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "metric1_uwa" in out and "fid" in out
    assert (tmp_path / "rep" / "metrics.csv").exists()


def test_metrics_dimension_mismatch_exit_three(tmp_path):
    a = data.make_toy_corpus(feature_dim=8, per_class=30, seed=1)
    b = data.make_toy_corpus(feature_dim=12, per_class=30, seed=1)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    data.save_csv(a, pa)
    data.save_csv(b, pb)
    assert run(["metrics", "--real", str(pa), "--synth", str(pb)]) == EXIT_DATA


def test_cli_never_mutates_input_corpus(tmp_path):
    corpus = data.make_toy_corpus(feature_dim=16, per_class=40, seed=9)
    path = tmp_path / "corpus.csv"
    data.save_csv(corpus, path)
    before = path.read_bytes()
    cfgp = write_small_config(tmp_path)
    assert run(["cv", "--config", str(cfgp), "--corpus", str(path),
                "--out", str(tmp_path / "out")]) == EXIT_OK
    assert path.read_bytes() == before
