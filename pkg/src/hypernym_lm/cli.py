"""Pipeline driver: build-classmap, train, eval, compare, plot.

Exit codes: 0 success, 1 validation/config error, 2 runtime failure.
Artifacts land in the configured output directory and embed the hash of the
config sections they depend on; stages refuse inputs whose hashes disagree
with the active config.
"""

from __future__ import annotations

import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import plots
from .classmap import (
    ClassMapParams,
    build_classmap,
    classmap_stats,
    count_frequencies,
    load_classmap,
    load_frequencies,
    save_classmap,
    save_frequencies,
)
from .config import RunConfig, config_hash, load_config
from .data import encode_corpus, read_documents, read_token_stream
from .errors import ConfigError, ConsistencyError, HypernymLmError, ValidationError
from .evaluate import pairwise_compare, perplexity, write_eval_report, write_pairwise_report
from .model import ModelConfig
from .train import LanguageModel, load_checkpoint, train
from .vocab import build_partition, save_partition
from .wordnet import load_wordnet

WORDNET_ENV = "HYPERNYM_LM_WORDNET"


@contextmanager
def _locked(out_dir: Path):
    """Guard concurrent writers of one output directory."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock} if that run is dead)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _wordnet_path(cfg: RunConfig) -> str:
    path = cfg.wordnet.path or os.environ.get(WORDNET_ENV, "")
    if not path:
        raise ConfigError(
            f"no WordNet path: set [wordnet] path or the {WORDNET_ENV} environment variable")
    return path


def _run_build_classmap(cfg: RunConfig):
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    stage = config_hash(cfg, "classmap")
    stream = read_token_stream(cfg.corpus.train)
    freqs = count_frequencies(stream)
    db = load_wordnet(_wordnet_path(cfg))
    params = ClassMapParams(depth=cfg.classmap.depth, freq_threshold=cfg.classmap.freq_threshold)
    cmap = build_classmap(freqs, db, params, corpus_id=cfg.corpus.id)
    stats = classmap_stats(cmap)
    save_frequencies(freqs, out / "freqs.tsv", corpus_id=cfg.corpus.id,
                     extra_headers={"config": stage})
    save_classmap(cmap, out / "classmap.tsv", extra_headers={"config": stage})
    stats_blob = {"config": stage, "wordnet_version": db.version, **stats.as_dict()}
    (out / "stats.json").write_text(json.dumps(stats_blob, indent=2) + "\n", encoding="utf-8")
    return freqs, cmap, stats


def _load_classmap_artifacts(cfg: RunConfig):
    """Load cached freqs+classmap, verifying their stage hash; build if absent."""
    out = Path(cfg.output.dir)
    stage = config_hash(cfg, "classmap")
    fpath, cpath = out / "freqs.tsv", out / "classmap.tsv"
    if fpath.exists() and cpath.exists():
        freqs, fex = load_frequencies(fpath)
        cmap, cex = load_classmap(cpath)
        for name, extras in (("freqs.tsv", fex), ("classmap.tsv", cex)):
            if extras.get("config") != stage:
                raise ConsistencyError(
                    f"{out / name} was built with config {extras.get('config')}, "
                    f"current classmap config is {stage}; rebuild with build-classmap")
        return freqs, cmap
    freqs, cmap, _ = _run_build_classmap(cfg)
    return freqs, cmap


def _build_partition(cfg: RunConfig, freqs, cmap):
    part = build_partition(freqs, cmap, unk_threshold=cfg.vocab.unk_threshold)
    out = Path(cfg.output.dir)
    save_partition(part, out / "vocab.tsv",
                   extra_headers={"config": config_hash(cfg, "vocab")})
    return part


def _model_from_checkpoint(path: Path, part) -> tuple[LanguageModel, dict]:
    params, _state, meta = load_checkpoint(path)
    if meta["vocab_hash"] != part.content_hash():
        raise ConsistencyError(
            f"checkpoint {path} was trained on a different vocabulary partition")
    mc = dict(meta["config"]["model"])
    mc["vocab_size"] = part.total
    model = LanguageModel(params=params, config=ModelConfig(**mc), part=part,
                          objective=meta["config"]["training"]["objective"])
    return model, meta


def _split_docs(cfg: RunConfig, split: str):
    path = getattr(cfg.corpus, split)
    if not path:
        raise ConfigError(f"[corpus] {split} is not set")
    return read_documents(path)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


@click.group()
def cli():
    """Hypernym-class curriculum language modeling pipeline."""


def _config_options(f):
    f = click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
                     help="Override a config value.")(f)
    f = click.option("--config", "-c", "config_path", required=True,
                     type=click.Path(exists=False), help="TOML run config.")(f)
    return f


@cli.command("build-classmap")
@_config_options
def cmd_build_classmap(config_path, overrides):
    """Count corpus frequencies and build the token->class map."""
    cfg = load_config(config_path, list(overrides))
    with _locked(Path(cfg.output.dir)):
        _freqs, cmap, stats = _run_build_classmap(cfg)
    click.echo(f"classmap: {stats.num_mapped_tokens} tokens -> {stats.num_classes} classes "
               f"(d={cfg.classmap.depth}, f={cmap.params.threshold_label})")
    click.echo(f"artifacts in {cfg.output.dir}: freqs.tsv classmap.tsv stats.json")


@cli.command("train")
@_config_options
@click.option("--resume", is_flag=True, help="Continue from the run's checkpoint.npz.")
def cmd_train(config_path, overrides, resume):
    """Train with the configured objective and pacing schedule."""
    cfg = load_config(config_path, list(overrides))
    out = Path(cfg.output.dir)
    with _locked(out):
        freqs, cmap = _load_classmap_artifacts(cfg)
        part = _build_partition(cfg, freqs, cmap)
        train_ids = encode_corpus(cfg.corpus.train, part)
        valid_ids = encode_corpus(cfg.corpus.valid, part) if cfg.corpus.valid else None
        result = train(cfg, part, train_ids, valid_ids, out, resume=resume)
    click.echo(f"trained {result.steps_run} steps "
               f"(objective={cfg.training.objective}); "
               f"metrics: {result.metrics_path}; checkpoint: {result.checkpoint_path}")


@cli.command("eval")
@_config_options
@click.option("--checkpoint", type=click.Path(exists=True), default=None,
              help="Checkpoint to score (default: <output.dir>/checkpoint.npz).")
@click.option("--split", type=click.Choice(["valid", "test"]), default="test")
def cmd_eval(config_path, overrides, checkpoint, split):
    """Stratified perplexity report for a trained model."""
    cfg = load_config(config_path, list(overrides))
    out = Path(cfg.output.dir)
    freqs, cmap = _load_classmap_artifacts(cfg)
    part = _build_partition(cfg, freqs, cmap)
    ckpt = Path(checkpoint) if checkpoint else out / "checkpoint.npz"
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt} (train first?)")
    model, meta = _model_from_checkpoint(ckpt, part)
    docs = _split_docs(cfg, split)
    report = perplexity(model, docs, freqs, strata=tuple(cfg.eval.strata),
                        meta={"checkpoint": str(ckpt), "split": split,
                              "config": meta["stage_hash"]})
    json_path, csv_path = write_eval_report(report, out / f"eval-{split}")
    click.echo(f"overall ppl: {report.overall.ppl:.4f}  "
               f"rep ppl: {report.rep.ppl if report.rep.count else 'n/a'}  "
               f"nonrep ppl: {report.nonrep.ppl if report.nonrep.count else 'n/a'}")
    click.echo(f"wrote {json_path} and {csv_path}")


@cli.command("compare")
@_config_options
@click.argument("checkpoint_a", type=click.Path(exists=True))
@click.argument("checkpoint_b", type=click.Path(exists=True))
@click.option("--split", type=click.Choice(["valid", "test"]), default="test")
def cmd_compare(config_path, overrides, checkpoint_a, checkpoint_b, split):
    """Pairwise win/tie/loss comparison over replaced-token occurrences."""
    cfg = load_config(config_path, list(overrides))
    out = Path(cfg.output.dir)
    freqs, cmap = _load_classmap_artifacts(cfg)
    part = _build_partition(cfg, freqs, cmap)
    model_a, _ = _model_from_checkpoint(Path(checkpoint_a), part)
    model_b, _ = _model_from_checkpoint(Path(checkpoint_b), part)
    docs = _split_docs(cfg, split)
    report = pairwise_compare(model_a, model_b, docs, freqs,
                              strata=tuple(cfg.eval.strata),
                              tie_epsilon=cfg.eval.tie_epsilon,
                              meta={"checkpoint_a": str(checkpoint_a),
                                    "checkpoint_b": str(checkpoint_b), "split": split})
    json_path, csv_path = write_pairwise_report(report, out / "compare")
    pa, pt, pb = report.overall.percentages()
    click.echo(f"overall: win_a {pa:.1f}%  tie {pt:.1f}%  win_b {pb:.1f}% "
               f"over {report.overall.occurrences} occurrences")
    click.echo(f"wrote {json_path} and {csv_path}")


@cli.command("plot")
@click.argument("inputs", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["auto", "curve", "bars"]), default="auto")
@click.option("--out", "out_dir", type=click.Path(), default="plots")
@click.option("--svg", is_flag=True, help="Render SVG next to the CSV.")
def cmd_plot(inputs, kind, out_dir, svg):
    """Emit plot-data CSV (and optionally SVG) from metrics or reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    first = Path(inputs[0])
    if kind == "auto":
        if first.suffix == ".jsonl":
            kind = "curve"
        elif first.name.startswith("pairwise"):
            kind = "bars"
        else:
            with open(first, encoding="utf-8") as fh:
                header = fh.readline()
            kind = "bars" if "pct_win_a" in header else "curve"
    if kind == "curve":
        series = {}
        for inp in inputs:
            p = Path(inp)
            points = (plots.curve_points_from_metrics(p) if p.suffix == ".jsonl"
                      else plots.curve_points_from_csv(p))
            series[p.stem if p.stem != "metrics" else p.parent.name] = points
        csv_path = plots.write_curve_csv(series, out / "curve.csv")
        click.echo(f"wrote {csv_path}")
        if svg:
            svg_path = plots.render_curve_svg(series, out / "curve.svg")
            click.echo(f"wrote {svg_path}")
    else:
        p = Path(inputs[0])
        rows = (plots.bars_rows_from_pairwise_json(p) if p.suffix == ".json"
                else plots.bars_rows_from_csv(p))
        csv_path = plots.write_bars_csv(rows, out / "bars.csv")
        click.echo(f"wrote {csv_path}")
        if svg:
            svg_path = plots.render_bars_svg(rows, out / "bars.svg")
            click.echo(f"wrote {svg_path}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as e:
        click.echo(f"error: {e.format_message()}", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 2
    except ValidationError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except HypernymLmError as e:
        click.echo(f"failure: {e}", err=True)
        return 2
    except OSError as e:
        click.echo(f"failure: {e}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
