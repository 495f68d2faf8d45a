"""End-to-end steps behind the CLI: prepare, baseline, train, evaluate, explain, predict.

Every step takes a validated :class:`RunConfig`, writes its outputs under a
directory and drops a ``run_manifest.json`` there recording the full config,
the command and library versions, which is enough to replay the step.
"""

from __future__ import annotations

import json
import logging
import platform
from collections import Counter
from pathlib import Path

import numpy as np
import scipy

import revsent
from revsent import classical, config as cfgmod
from revsent.classical import joint_features, load_baseline, make_baseline, save_baseline
from revsent.classical import splitter
from revsent.config import DEEP_MODELS, RunConfig
from revsent.errors import ConfigError, DataError
from revsent.evaluation import EvalReport, evaluate, export_curves, per_restaurant_bias
from revsent.features import (
    Vocabulary, classical_tokens, encode_meta_batch, fit_meta_schema, fit_tfidf, load_embeddings,
)
from revsent.features.meta import MetaSchema
from revsent.features.tfidf import TfIdfModel
from revsent.ingest import (
    LabeledDataset, SplitSpec, correlation_matrix, load_lexicon, load_reviews, numeric_columns, split_dataset,
    write_reviews,
)
from revsent.interpret import attention_attribution, explain, extract_attention, render_heatmap
from revsent.model import (
    JointModel, TrainConfig, load_model, make_inputs, n_classes_for, predict, save_model, train,
)

log = logging.getLogger("revsent.pipeline")

MANIFEST = "run_manifest.json"
SPLITS = ("train", "val", "test")


def _label_mode(cfg: RunConfig) -> str:
    return "binary" if cfg.mode == "binary" else "five"


def write_manifest(directory, command: str, cfg: RunConfig, outputs: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": cfg.to_json(),
        "seed": cfg.seed,
        "versions": {"revsent": revsent.__version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "splitter_backend": splitter.BACKEND,
        "outputs": outputs or {},
    }
    path = directory / MANIFEST
    path.write_text(cfgmod.dumps(manifest))
    return path


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cfgmod.dumps(obj))


# ---------------------------------------------------------------------------
# prepare
# ---------------------------------------------------------------------------

def prepare(cfg: RunConfig) -> Path:
    """Split raw reviews and fit every train-only artifact into ``cfg.data_dir``."""
    if not cfg.input_path:
        raise ConfigError("prepare needs an input file (--input)")
    out = Path(cfg.data_dir)
    lexicon = load_lexicon(cfg.lexicon)
    ds = load_reviews(cfg.input_path, lexicon=lexicon)
    spec = SplitSpec(cfg.train_frac, cfg.val_frac, cfg.test_frac, cfg.seed)
    parts = split_dataset(ds, spec, stratify=cfg.stratify)
    for name, part in zip(SPLITS, parts):
        (out / "splits").mkdir(parents=True, exist_ok=True)
        write_reviews(part, out / "splits" / f"{name}.jsonl")
    train_ds = parts[0]
    schema = fit_meta_schema(train_ds, max_categories=cfg.max_categories)
    _write_json(out / "meta_schema.json", schema.to_json())
    tfidf = fit_tfidf([classical_tokens(t) for t in train_ds.texts()], (1, cfg.ngram_max),
                      max_features=cfg.tfidf_max_features)
    _write_json(out / "tfidf.json", tfidf.to_json())
    vocab = Vocabulary.build(train_ds.texts(), min_freq=cfg.vocab_min_freq, max_size=cfg.vocab_max_size)
    _write_json(out / "vocab.json", vocab.to_json())
    corr = correlation_matrix(numeric_columns(ds))
    _write_json(out / "correlation.json", corr.to_json())
    corr.to_csv(out / "correlation.csv")
    write_manifest(out, "prepare", cfg, {
        "records": len(ds), "splits": {n: len(p) for n, p in zip(SPLITS, parts)},
        "meta_dim": schema.dim, "tfidf_dim": tfidf.dim, "vocab_size": len(vocab),
        "stars_vs_sentiment": corr.get("stars", "sentiment_score"),
    })
    return out


class PreparedData:
    """Artifacts written by :func:`prepare`."""

    def __init__(self, data_dir):
        self.dir = Path(data_dir)
        if not (self.dir / "splits" / "train.jsonl").exists():
            raise DataError(f"{self.dir} has no prepared splits; run 'revsent prepare' first")
        self._splits: dict[str, LabeledDataset] = {}

    def split(self, name: str) -> LabeledDataset:
        if name not in SPLITS:
            raise ConfigError(f"split must be one of {', '.join(SPLITS)}; got {name!r}")
        if name not in self._splits:
            # Scores were filled at prepare time, so no lexicon is needed here.
            self._splits[name] = load_reviews(self.dir / "splits" / f"{name}.jsonl")
        return self._splits[name]

    def _json(self, name: str):
        try:
            return json.loads((self.dir / name).read_text())
        except FileNotFoundError:
            raise DataError(f"{self.dir / name} is missing; rerun 'revsent prepare'") from None

    @property
    def schema(self) -> MetaSchema:
        return MetaSchema.from_json(self._json("meta_schema.json"))

    @property
    def tfidf(self) -> TfIdfModel:
        return TfIdfModel.from_json(self._json("tfidf.json"))

    @property
    def vocab(self) -> Vocabulary:
        return Vocabulary.from_json(self._json("vocab.json"))


# ---------------------------------------------------------------------------
# classical baselines
# ---------------------------------------------------------------------------

def baseline_features(ds: LabeledDataset, input_mode: str, schema: MetaSchema, tfidf: TfIdfModel):
    if input_mode == "meta":
        return encode_meta_batch(ds, schema)
    text = tfidf.transform([classical_tokens(t) for t in ds.texts()])
    if input_mode == "text":
        return text
    return joint_features(encode_meta_batch(ds, schema), text)


def baseline_params(cfg: RunConfig) -> dict:
    return {
        "dt": {"max_depth": cfg.max_depth, "seed": cfg.seed},
        "rf": {"n_trees": cfg.n_trees, "max_depth": cfg.max_depth, "seed": cfg.seed},
        "knn": {"k": cfg.k},
        "svm": {"C": cfg.C, "seed": cfg.seed},
        "gb": {"n_rounds": cfg.gb_rounds, "learning_rate": cfg.gb_lr, "max_depth": cfg.gb_max_depth,
               "feature_fraction": cfg.feature_fraction, "seed": cfg.seed},
        "mlp": {"hidden": tuple(int(h) for h in cfg.mlp_hidden.split(",")), "lr": cfg.mlp_lr,
                "n_epochs": cfg.mlp_epochs, "seed": cfg.seed, "patience": cfg.patience},
    }[cfg.model]


def _report(pred, ds: LabeledDataset, cfg_mode: str, train_ds: LabeledDataset | None) -> EvalReport:
    labels = ds.labels(cfg_mode)
    report = evaluate(pred, labels, n_classes=n_classes_for(cfg_mode))
    if train_ds is not None:
        counts = Counter(r.restaurant_name for r in train_ds)
        report.per_group = per_restaurant_bias(pred, labels, [r.restaurant_name for r in ds], counts)
    return report


def run_baseline(cfg: RunConfig) -> Path:
    if cfg.model in DEEP_MODELS:
        raise ConfigError(f"'{cfg.model}' is a deep model; use 'revsent train'")
    data = PreparedData(cfg.data_dir)
    out = Path(cfg.out or Path("runs") / f"{cfg.model}-{cfg.input}-{cfg.mode}")
    schema, tfidf = data.schema, data.tfidf
    mode = _label_mode(cfg)
    train_ds = data.split("train")
    X = baseline_features(train_ds, cfg.input, schema, tfidf)
    fit_kw = {}
    if cfg.model == "mlp":
        # the MLP early-stops on validation loss like the deep models
        val_ds = data.split("val")
        fit_kw["validation"] = (baseline_features(val_ds, cfg.input, schema, tfidf), val_ds.labels(mode))
    model = make_baseline(cfg.model, **baseline_params(cfg)).fit(X, train_ds.labels(mode), **fit_kw)
    save_baseline(model, out / "model")
    for name in ("val", "test"):
        ds = data.split(name)
        pred = model.predict(baseline_features(ds, cfg.input, schema, tfidf))
        _report(pred, ds, mode, train_ds).write(out / f"{name}_report.json")
    write_manifest(out, "baseline", cfg, {"checkpoint": "model", "reports": ["val_report.json", "test_report.json"]})
    return out


# ---------------------------------------------------------------------------
# deep models
# ---------------------------------------------------------------------------

def build_deep_model(cfg: RunConfig, vocab: Vocabulary, meta_dim: int) -> JointModel:
    embeddings = None
    embed_dim = cfg.embed_dim
    if cfg.embeddings:
        table = load_embeddings(cfg.embeddings, vocab, seed=cfg.seed)
        embeddings, embed_dim = table.vectors, table.dim
        log.info("pretrained vectors found for %d of %d tokens", table.found, len(vocab))
    enc = {"kind": cfg.model, "vocab_size": len(vocab), "embed_dim": embed_dim,
           "trainable_embeddings": not cfg.freeze_embeddings}
    if cfg.model == "cnn":
        enc["seq_len"] = cfg.n_max
    loss_mode = {"off": "single", "weighted": "weighted", "uncertainty": "uncertainty"}[cfg.multitask]
    return JointModel(enc, n_classes_for(_label_mode(cfg)), "joint" if cfg.input == "joint" else "text",
                      meta_dim if cfg.input == "joint" else 0, loss_mode, cfg.lam,
                      meta_dropout=cfg.meta_dropout, seed=cfg.seed, embeddings=embeddings)


def run_train(cfg: RunConfig, progress=None) -> Path:
    if cfg.model not in DEEP_MODELS:
        raise ConfigError(f"'{cfg.model}' is a classical model; use 'revsent baseline'")
    data = PreparedData(cfg.data_dir)
    out = Path(cfg.out or Path("runs") / f"{cfg.model}-{cfg.input}-{cfg.mode}-{cfg.multitask}")
    vocab = data.vocab
    schema = data.schema if cfg.input == "joint" else None
    mode = _label_mode(cfg)
    inputs = {n: make_inputs(data.split(n), vocab, schema, mode, cfg.n_max, cfg.r_max) for n in SPLITS}
    model = build_deep_model(cfg, vocab, schema.dim if schema else 0)
    tc = TrainConfig(batch_size=cfg.batch_size, epochs=cfg.epochs, lr=cfg.lr, seed=cfg.seed, patience=cfg.patience)
    history = train(model, inputs["train"], inputs["val"], tc, progress=progress)
    save_model(model, out / "model", vocab, schema,
               {"label_mode": mode, "n_max": cfg.n_max, "r_max": cfg.r_max,
                "best_epoch": history.best_epoch, "stopped_early": history.stopped_early})
    export_curves(history, out / "curves.csv")
    train_ds = data.split("train")
    for name in ("val", "test"):
        preds = predict(model, inputs[name])
        _report(preds.classes, data.split(name), mode, train_ds).write(out / f"{name}_report.json")
    write_manifest(out, "train", cfg, {"checkpoint": "model", "curves": "curves.csv",
                                       "best_epoch": history.best_epoch, "epochs_run": len(history.records)})
    return out


# ---------------------------------------------------------------------------
# evaluate / explain / predict on a saved checkpoint
# ---------------------------------------------------------------------------

def _is_deep(checkpoint) -> bool:
    try:
        manifest = json.loads((Path(checkpoint) / "manifest.json").read_text())
    except FileNotFoundError:
        raise DataError(f"no checkpoint at {checkpoint}") from None
    return "model" in manifest.get("config", {})


def _run_config_of(checkpoint) -> RunConfig | None:
    path = Path(checkpoint).parent / MANIFEST
    if path.exists():
        return cfgmod.from_json(json.loads(path.read_text())["config"])
    return None


def predict_dataset(checkpoint, ds: LabeledDataset, data: PreparedData | None = None):
    """Return (classes, probabilities or None, sentiment or None, label mode)."""
    if _is_deep(checkpoint):
        model, vocab, schema, extra = load_model(checkpoint)
        inputs = make_inputs(ds, vocab, schema, extra.get("label_mode", "binary"),
                             extra.get("n_max", 50), extra.get("r_max", 10))
        p = predict(model, inputs)
        return p.classes, p.probabilities, p.sentiment, extra.get("label_mode", "binary")
    run = _run_config_of(checkpoint)
    if run is None or data is None:
        raise DataError(f"{checkpoint}: classical checkpoints need their run manifest and prepared data")
    model = load_baseline(checkpoint)
    X = baseline_features(ds, run.input, data.schema, data.tfidf)
    proba = None if isinstance(model, classical.LinearSvm) else model.predict_proba(X)
    return model.predict(X), proba, None, _label_mode(run)


def run_evaluate(cfg: RunConfig, checkpoint, split: str = "test") -> Path:
    data = PreparedData(cfg.data_dir)
    ds = data.split(split)
    classes, _, _, mode = predict_dataset(checkpoint, ds, data)
    report = _report(classes, ds, mode, data.split("train"))
    out = Path(cfg.out or Path(checkpoint).parent / f"eval_{split}")
    report.write(out / "report.json")
    cfg.extra = {"checkpoint": str(checkpoint), "split": split}
    write_manifest(out, "evaluate", cfg, {"report": "report.json"})
    return out


def run_explain(cfg: RunConfig, checkpoint, review_id: str, split: str = "test", method: str = "grad_x_input",
                steps: int = 64, target: int | None = None) -> Path:
    if not _is_deep(checkpoint):
        raise ConfigError("explanations need a deep (cnn/han) checkpoint")
    data = PreparedData(cfg.data_dir)
    model, vocab, schema, extra = load_model(checkpoint)
    mode = extra.get("label_mode", "binary")
    ds = data.split(split)
    try:
        record = ds.find(review_id)
    except KeyError:
        raise DataError(f"review id {review_id!r} is not in the {split} split") from None
    inputs = make_inputs(LabeledDataset([record]), vocab, schema, mode, extra.get("n_max", 50), extra.get("r_max", 10))
    meta_row = None if inputs.meta is None else inputs.meta[0]
    label = int(inputs.labels[0])
    if method == "attention":
        if model.encoder.kind != "han":
            raise ConfigError("attention maps need a HAN checkpoint")
        out_fwd = model(model.batch_ids(inputs.reviews), None if inputs.meta is None else inputs.meta)
        attr = attention_attribution(inputs.reviews[0], extract_attention(out_fwd.trace))
        attr.prediction, attr.label = int(np.argmax(out_fwd.logits.data[0])), label
    else:
        attr = explain(model, inputs.reviews[0], meta_row, target, method, steps, label)
    out = Path(cfg.out or Path(checkpoint).parent / "explain")
    path = render_heatmap(attr, out / f"{review_id}.html", title=f"review {review_id}: {attr.method}")
    cfg.extra = {"checkpoint": str(checkpoint), "review_id": review_id, "split": split, "method": method,
                 "steps": steps, "target": target}
    write_manifest(out, "explain", cfg, {"heatmap": path.name})
    return path


def run_predict(cfg: RunConfig, checkpoint, input_path) -> Path:
    ds = load_reviews(input_path, lexicon=load_lexicon(cfg.lexicon))
    data = None
    if not _is_deep(checkpoint):
        run = _run_config_of(checkpoint)
        data = PreparedData(run.data_dir if run is not None else cfg.data_dir)
    classes, proba, sentiment, mode = predict_dataset(checkpoint, ds, data)
    out = Path(cfg.out or Path(checkpoint).parent / "predictions")
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, r in enumerate(ds):
        row = {"review_id": r.review_id, "class": int(classes[i])}
        if mode == "five":
            row["stars"] = int(classes[i]) + 1
        if proba is not None:
            row["probabilities"] = [float(p) for p in proba[i]]
        if sentiment is not None:
            row["sentiment_estimate"] = float(sentiment[i])
        lines.append(json.dumps(row, sort_keys=True))
    (out / "predictions.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
    cfg.extra = {"checkpoint": str(checkpoint), "input": str(input_path)}
    write_manifest(out, "predict", cfg, {"predictions": "predictions.jsonl"})
    return out


def replay(manifest_path, out=None) -> Path:
    """Re-run the step recorded in a run manifest (optionally into another directory)."""
    manifest = json.loads(Path(manifest_path).read_text())
    cfg = cfgmod.from_json(manifest["config"])
    extra = dict(cfg.extra)
    command = manifest["command"]
    if out is not None:
        if command == "prepare":
            cfg.data_dir = str(out)
        else:
            cfg.out = str(out)
    if command == "prepare":
        return prepare(cfg)
    if command == "baseline":
        return run_baseline(cfg)
    if command == "train":
        return run_train(cfg)
    if command == "evaluate":
        return run_evaluate(cfg, extra["checkpoint"], extra["split"])
    if command == "explain":
        return run_explain(cfg, extra["checkpoint"], extra["review_id"], extra["split"], extra["method"],
                           extra["steps"], extra["target"]).parent
    if command == "predict":
        return run_predict(cfg, extra["checkpoint"], extra["input"])
    raise ConfigError(f"cannot replay command {command!r}")
