"""``revsent`` command line: prepare, baseline, train, evaluate, explain, predict, replay, synth.

Settings come from RunConfig defaults, then an optional ``--config`` file,
then explicit flags.  Errors print one ``category: message`` line to stderr
and exit non-zero.
"""

from __future__ import annotations

import logging
import sys

import click

from revsent import config as cfgmod
from revsent import pipeline
from revsent.errors import RevsentError

EXIT_ERROR = 1
EXIT_USAGE = 2


def _opt(*names, **kw):
    kw.setdefault("default", None)
    return click.option(*names, **kw)


def common(f):
    f = _opt("--seed", type=int, help="Root seed for all randomness.")(f)
    f = _opt("--data-dir", envvar="REVSENT_DATA_DIR", type=click.Path(file_okay=False),
             help="Prepared-data directory (env REVSENT_DATA_DIR; default ./data).")(f)
    f = click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                     help="key = value settings file; flags override it.")(f)
    return f


def task_options(f):
    f = _opt("--mode", type=click.Choice(cfgmod.MODES), help="Label mode.")(f)
    f = _opt("--input", "input", type=click.Choice(cfgmod.INPUTS), help="Feature set.")(f)
    return f


def _resolve(config_file, **flags) -> cfgmod.RunConfig:
    return cfgmod.resolve(config_file, flags)


@click.group()
@click.option("-v", "--verbose", count=True, help="Log progress (-vv for debug).")
def cli(verbose: int) -> None:
    """Review rating prediction from text and meta features."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@cli.command()
@common
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Raw reviews (.jsonl or .csv).")
@_opt("--train-frac", type=float)
@_opt("--val-frac", type=float)
@_opt("--test-frac", type=float)
@_opt("--stratify/--no-stratify")
@_opt("--lexicon", type=click.Path(exists=True, dir_okay=False), help="word<TAB>score lexicon file.")
@_opt("--ngram-max", type=int)
@_opt("--tfidf-max-features", type=int)
@_opt("--vocab-min-freq", type=int)
@_opt("--vocab-max-size", type=int)
@_opt("--max-categories", type=int)
def prepare(config_file, **flags):
    """Split reviews and fit meta schema, TF-IDF, vocabulary and correlation report."""
    cfg = _resolve(config_file, **flags)
    out = pipeline.prepare(cfg)
    click.echo(str(out))


@cli.command()
@common
@task_options
@_opt("--model", type=click.Choice(cfgmod.CLASSICAL_MODELS))
@_opt("--out", type=click.Path(file_okay=False), help="Run directory.")
@_opt("--n-trees", type=int)
@_opt("--max-depth", type=int)
@_opt("--k", type=int)
@_opt("--C", "C", type=float)
@_opt("--gb-rounds", type=int)
@_opt("--gb-lr", type=float)
@_opt("--gb-max-depth", type=int)
@_opt("--feature-fraction", type=float)
@_opt("--mlp-hidden", type=str, help="Comma-separated layer sizes.")
@_opt("--mlp-lr", type=float)
@_opt("--mlp-epochs", type=int)
def baseline(config_file, **flags):
    """Fit a classical baseline and write val/test EvalReports."""
    flags.setdefault("model", None)
    if flags["model"] is None and config_file is None:
        raise click.UsageError("--model is required")
    out = pipeline.run_baseline(_resolve(config_file, **flags))
    click.echo(str(out))


@cli.command(name="train")
@common
@task_options
@_opt("--model", type=click.Choice(cfgmod.DEEP_MODELS))
@_opt("--multitask", type=click.Choice(cfgmod.MULTITASK))
@_opt("--lambda", "lam", type=float, help="Classification weight for --multitask weighted.")
@_opt("--epochs", type=int)
@_opt("--batch-size", type=int)
@_opt("--lr", type=float)
@_opt("--patience", type=int)
@_opt("--embeddings", type=click.Path(exists=True, dir_okay=False), help="GloVe-format text vectors.")
@_opt("--embed-dim", type=int)
@_opt("--freeze-embeddings/--train-embeddings")
@_opt("--meta-dropout", type=float)
@_opt("--n-max", type=int)
@_opt("--r-max", type=int)
@_opt("--out", type=click.Path(file_okay=False), help="Run directory.")
def train_cmd(config_file, **flags):
    """Train a CNN or HAN model; writes checkpoint, curves.csv and EvalReports."""
    cfg = _resolve(config_file, **flags)

    def progress(rec):
        click.echo(f"epoch {rec.epoch}: train_loss={rec.train_loss:.4f} val_loss={rec.val_loss:.4f} "
                   f"val_acc={rec.val_accuracy:.4f}", err=True)

    out = pipeline.run_train(cfg, progress=progress)
    click.echo(str(out))


@cli.command()
@common
@click.option("--checkpoint", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--split", default="test", type=click.Choice(pipeline.SPLITS), show_default=True)
@_opt("--out", type=click.Path(file_okay=False))
def evaluate(config_file, checkpoint, split, **flags):
    """Evaluate a checkpoint on a prepared split (accuracy, confusion, buckets)."""
    out = pipeline.run_evaluate(_resolve(config_file, **flags), checkpoint, split)
    click.echo(str(out / "report.json"))


@cli.command()
@common
@click.option("--checkpoint", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--review-id", required=True)
@click.option("--split", default="test", type=click.Choice(pipeline.SPLITS), show_default=True)
@click.option("--method", default="grad_x_input", show_default=True,
              type=click.Choice(["grad_x_input", "integrated_gradients", "attention"]))
@click.option("--steps", default=64, show_default=True, type=int, help="Integrated-gradients steps.")
@click.option("--target", default=None, type=int, help="Class to explain (default: predicted).")
@_opt("--out", type=click.Path(file_okay=False))
def explain(config_file, checkpoint, review_id, split, method, steps, target, **flags):
    """Write an HTML token heatmap (plus JSON sidecar) for one review."""
    path = pipeline.run_explain(_resolve(config_file, **flags), checkpoint, review_id, split, method, steps, target)
    click.echo(str(path))


@cli.command()
@common
@click.option("--checkpoint", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@_opt("--lexicon", type=click.Path(exists=True, dir_okay=False))
@_opt("--out", type=click.Path(file_okay=False))
def predict(config_file, checkpoint, input_path, **flags):
    """Predict classes (and sentiment estimates for multitask models) for a review file."""
    out = pipeline.run_predict(_resolve(config_file, **flags), checkpoint, input_path)
    click.echo(str(out / "predictions.jsonl"))


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(file_okay=False), help="Write here instead.")
def replay(manifest, out):
    """Re-run the step recorded in a run manifest."""
    click.echo(str(pipeline.replay(manifest, out)))


@cli.command()
@click.option("--n", default=1000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--label-noise", default=0.0, show_default=True, type=float)
@click.option("--negation-rate", default=0.0, show_default=True, type=float)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def synth(n, seed, label_noise, negation_rate, out):
    """Write a planted-signal synthetic corpus as JSONL."""
    from revsent.ingest import write_reviews
    from revsent.synthetic import synthetic_reviews

    write_reviews(synthetic_reviews(n, seed, label_noise, negation_rate), out)
    click.echo(out)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="revsent", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted: interrupted", err=True)
        return EXIT_ERROR
    except click.UsageError as exc:
        click.echo(f"usage: {exc.format_message()}".replace("\n", " "), err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        click.echo(f"usage: {exc.format_message()}".replace("\n", " "), err=True)
        return EXIT_USAGE
    except RevsentError as exc:
        click.echo(f"{exc.category}: {exc}".replace("\n", " "), err=True)
        return EXIT_ERROR
    except (ValueError, KeyError) as exc:
        click.echo(f"invalid: {exc}".replace("\n", " "), err=True)
        return EXIT_ERROR
    except OSError as exc:
        click.echo(f"io: {exc}".replace("\n", " "), err=True)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
