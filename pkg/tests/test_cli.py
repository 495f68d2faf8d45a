import json

import pytest

from revsent import config as cfgmod
from revsent.cli import main
from revsent.errors import ConfigError


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out.strip(), err.strip()


@pytest.fixture(scope="module")
def prepared(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    raw = root / "raw.jsonl"
    assert main(["synth", "--n", "120", "--seed", "2", "--out", str(raw)]) == 0
    assert main(["prepare", "--input", str(raw), "--data-dir", str(root / "data")]) == 0
    return root


@pytest.fixture(scope="module")
def trained(prepared):
    out = prepared / "runs" / "cnn"
    args = ["train", "--model", "cnn", "--multitask", "weighted", "--epochs", "2", "--lr", "1e-3",
            "--embed-dim", "16", "--data-dir", prepared / "data", "--out", out]
    assert main([str(a) for a in args]) == 0
    return out


class TestPrepare:
    def test_artifacts(self, prepared):
        data = prepared / "data"
        for name in ("splits/train.jsonl", "splits/val.jsonl", "splits/test.jsonl", "meta_schema.json",
                     "tfidf.json", "vocab.json", "correlation.json", "correlation.csv", "run_manifest.json"):
            assert (data / name).is_file(), name
        manifest = json.loads((data / "run_manifest.json").read_text())
        assert manifest["command"] == "prepare" and manifest["outputs"]["splits"] == {"train": 84, "val": 18,
                                                                                       "test": 18}

    def test_rerun_is_byte_identical(self, prepared, tmp_path, capsys):
        code, _, _ = run(["prepare", "--input", prepared / "raw.jsonl", "--data-dir", tmp_path / "d"], capsys)
        assert code == 0
        for f in (prepared / "data").rglob("*"):
            if f.is_file() and f.name != "run_manifest.json":
                assert (tmp_path / "d" / f.relative_to(prepared / "data")).read_bytes() == f.read_bytes()

    def test_needs_input(self, tmp_path, capsys):
        code, _, err = run(["prepare", "--data-dir", tmp_path], capsys)
        assert code == 1 and err.startswith("config: prepare needs an input file")


class TestBaseline:
    @pytest.mark.parametrize("model", ["dt", "knn", "svm"])
    def test_writes_reports(self, prepared, tmp_path, capsys, model):
        code, out, _ = run(["baseline", "--model", model, "--data-dir", prepared / "data", "--out", tmp_path], capsys)
        assert code == 0 and out == str(tmp_path)
        report = json.loads((tmp_path / "test_report.json").read_text())
        assert report["n"] == 18 and 0.0 <= report["accuracy"] <= 1.0
        assert [g["bucket"] for g in report["per_group"]] == ["0", "1-5", "6-20", "21-100", ">100"]

    def test_meta_only_and_five_star(self, prepared, tmp_path, capsys):
        code, _, _ = run(["baseline", "--model", "rf", "--n-trees", "5", "--input", "meta", "--mode", "five",
                          "--data-dir", prepared / "data", "--out", tmp_path], capsys)
        assert code == 0
        assert len(json.loads((tmp_path / "val_report.json").read_text())["confusion"]) == 5

    def test_model_required(self, prepared, capsys):
        code, _, err = run(["baseline", "--data-dir", prepared / "data"], capsys)
        assert code == 2 and err.startswith("usage:")

    def test_deep_model_is_not_a_baseline(self, prepared, capsys):
        code, _, err = run(["baseline", "--model", "han", "--data-dir", prepared / "data"], capsys)
        assert code == 2 and "han" in err

    def test_missing_data(self, tmp_path, capsys):
        code, _, err = run(["baseline", "--model", "dt", "--data-dir", tmp_path / "none"], capsys)
        assert code == 1 and err.startswith("data:") and "revsent prepare" in err


class TestDeep:
    def test_train_outputs(self, trained):
        for name in ("model/manifest.json", "curves.csv", "val_report.json", "test_report.json", "run_manifest.json"):
            assert (trained / name).is_file(), name
        assert len((trained / "curves.csv").read_text().splitlines()) == 3

    def test_evaluate(self, prepared, trained, capsys):
        code, out, _ = run(["evaluate", "--checkpoint", trained / "model", "--data-dir", prepared / "data"], capsys)
        assert code == 0
        ev = json.loads(open(out).read())
        assert ev == json.loads((trained / "test_report.json").read_text())

    @pytest.mark.parametrize("method", ["grad_x_input", "integrated_gradients"])
    def test_explain(self, prepared, trained, tmp_path, capsys, method):
        rid = json.loads((prepared / "data/splits/test.jsonl").read_text().splitlines()[0])["review_id"]
        code, out, _ = run(["explain", "--checkpoint", trained / "model", "--review-id", rid, "--method", method,
                            "--steps", "16", "--data-dir", prepared / "data", "--out", tmp_path], capsys)
        assert code == 0 and out.endswith(f"{rid}.html")
        side = json.loads((tmp_path / f"{rid}.json").read_text())
        assert side["method"].startswith(method)

    def test_explain_attention_needs_han(self, prepared, trained, capsys):
        rid = json.loads((prepared / "data/splits/test.jsonl").read_text().splitlines()[0])["review_id"]
        code, _, err = run(["explain", "--checkpoint", trained / "model", "--review-id", rid, "--method",
                            "attention", "--data-dir", prepared / "data"], capsys)
        assert code == 1 and err.startswith("config:")

    def test_explain_unknown_review(self, prepared, trained, capsys):
        code, _, err = run(["explain", "--checkpoint", trained / "model", "--review-id", "nope",
                            "--data-dir", prepared / "data"], capsys)
        assert code == 1 and "'nope'" in err

    def test_predict(self, prepared, trained, tmp_path, capsys):
        code, out, _ = run(["predict", "--checkpoint", trained / "model", "--input",
                            prepared / "data/splits/val.jsonl", "--out", tmp_path], capsys)
        assert code == 0
        rows = [json.loads(line) for line in open(out)]
        assert len(rows) == 18
        assert set(rows[0]) == {"review_id", "class", "probabilities", "sentiment_estimate"}

    def test_predict_with_baseline_checkpoint(self, prepared, tmp_path, capsys):
        assert run(["baseline", "--model", "dt", "--data-dir", prepared / "data", "--out", tmp_path / "dt"],
                   capsys)[0] == 0
        code, out, _ = run(["predict", "--checkpoint", tmp_path / "dt/model", "--input",
                            prepared / "data/splits/test.jsonl", "--out", tmp_path / "p"], capsys)
        assert code == 0 and len(open(out).read().splitlines()) == 18

    def test_replay_train_is_byte_identical(self, trained, tmp_path, capsys):
        code, _, _ = run(["replay", trained / "run_manifest.json", "--out", tmp_path / "again"], capsys)
        assert code == 0
        files = [p.relative_to(trained) for p in (trained / "model").rglob("*") if p.is_file()]
        assert len(files) >= 2
        for name in files + ["curves.csv", "val_report.json", "test_report.json"]:
            assert (trained / name).read_bytes() == (tmp_path / "again" / name).read_bytes(), name

    def test_invariant_violation(self, prepared, capsys):
        code, _, err = run(["train", "--model", "han", "--input", "meta", "--data-dir", prepared / "data"], capsys)
        assert code == 1
        assert err == "config: RunConfig invariant violated: deep models (cnn, han) need input text or joint"


class TestConfig:
    def test_file_then_flags(self, prepared, tmp_path, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text("# classical run\nmodel = dt\nmax-depth = 2\nseed = 7\n")
        code, _, _ = run(["baseline", "--config", conf, "--seed", "3", "--data-dir", prepared / "data",
                          "--out", tmp_path / "o"], capsys)
        assert code == 0
        cfg = json.loads((tmp_path / "o/run_manifest.json").read_text())["config"]
        assert (cfg["model"], cfg["max_depth"], cfg["seed"]) == ("dt", 2, 3)

    def test_env_data_dir(self, prepared, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("REVSENT_DATA_DIR", str(prepared / "data"))
        code, _, _ = run(["baseline", "--model", "dt", "--out", tmp_path], capsys)
        assert code == 0

    def test_bad_config_line(self, tmp_path, capsys):
        conf = tmp_path / "bad.conf"
        conf.write_text("model = dt\nwhat = 1\n")
        code, _, err = run(["baseline", "--config", conf], capsys)
        assert code == 1 and err == f"config: {conf}:2: unknown config key 'what'"

    def test_unparseable_value(self, tmp_path):
        conf = tmp_path / "bad.conf"
        conf.write_text("epochs = many\n")
        with pytest.raises(ConfigError, match="epochs"):
            cfgmod.read_config_file(conf)

    def test_coercion(self, tmp_path):
        conf = tmp_path / "ok.conf"
        conf.write_text("stratify = yes\nlr = 0.01\nmax_depth = none\nembeddings = vecs.txt  # path\n")
        assert cfgmod.read_config_file(conf) == {"stratify": True, "lr": 0.01, "max_depth": None,
                                                 "embeddings": "vecs.txt"}

    @pytest.mark.parametrize("flags,msg", [
        ({"model": "svm", "multitask": "uncertainty"}, "multitask"),
        ({"lam": 1.5}, "lam"),
        ({"epochs": 0}, "epochs"),
        ({"model": "bert"}, "model"),
    ])
    def test_invalid(self, flags, msg):
        with pytest.raises(ConfigError, match=msg):
            cfgmod.resolve(None, flags)

    def test_help(self, capsys):
        code, out, _ = run(["--help"], capsys)
        assert code == 0
        for cmd in ("prepare", "baseline", "train", "evaluate", "explain", "predict", "replay"):
            assert cmd in out
