"""Command line surface: training, tagging, classification, and serving.

Exit codes: 0 success, 1 usage error, 2 data or model error. `-` for
`--in`/`--out` means the standard streams.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from datetime import timedelta
from pathlib import Path

import click

from . import cnn as cnn_mod
from . import corpus as corpus_mod
from . import crf as crf_mod
from . import fusion as fusion_mod
from . import report as report_mod
from .config import PipelineConfig, find_config, with_seed
from .errors import UrbanPulseError
from .impact import GridIndex, score_annotation
from .ingest import replay_tweets
from .pipeline import Pipeline, SnapshotStore, annotations_geojson
from .similarity import (
    build_graph, build_report, records_from_jsonl, report_to_csv,
    report_to_json,
)
from .text import (
    EventClass, PhraseMatcher, load_dictionaries, sentence_iter, tokenize,
)


def _read_text(source: str) -> str:
    if source == "-":
        return sys.stdin.read()
    return Path(source).read_text(encoding="utf-8")


def _write_text(target: str, text: str) -> None:
    if target == "-":
        sys.stdout.write(text)
    else:
        path = Path(target)
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _matcher(config: PipelineConfig) -> PhraseMatcher:
    return PhraseMatcher(load_dictionaries(config.dictionaries_dir))


@click.group()
def cli():
    """City-event extraction pipeline for tweet streams."""


_config_option = click.option("--config", "config_path", default=None,
                              help="Path to the pipeline config JSON.")
_seed_option = click.option("--seed", type=int, default=None,
                            help="Override the configured random seed.")


@cli.command("train-crf")
@_config_option
@_seed_option
@click.option("--out", "out_path", default=None,
              help="Model file path (defaults to the configured one).")
@click.option("--size", type=int, default=500, show_default=True,
              help="Synthetic training corpus size.")
@click.option("--epochs", type=int, default=60, show_default=True)
def train_crf(config_path, seed, out_path, size, epochs):
    """Train the sequence tagger on a synthetic span-labelled corpus."""
    config = with_seed(find_config(config_path), seed)
    dictionaries = load_dictionaries(config.dictionaries_dir)
    matcher = PhraseMatcher(dictionaries)

    corpus = corpus_mod.generate_crf_corpus(dictionaries, size,
                                            seed=config.seed,
                                            frame=config.frame)
    held_out = corpus_mod.generate_crf_corpus(dictionaries, max(size // 5, 20),
                                              seed=config.seed + 1,
                                              frame=config.frame)
    sentences = list(sentence_iter(corpus))
    train_config = crf_mod.CrfTrainConfig(epochs=epochs, seed=config.seed)
    model = crf_mod.train(sentences, train_config, matcher=matcher)

    pairs = [(crf_mod.decode(model, tokens), tags)
             for tokens, tags in sentence_iter(held_out)]
    f1 = crf_mod.token_f1(pairs)

    path = Path(out_path) if out_path else Path(config.crf_model_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    crf_mod.save(model, path)
    click.echo(f"trained sequence tagger on {len(sentences)} sentences; "
               f"held-out token F1 {f1:.3f}; wrote {path}")


@cli.command("train-cnn")
@_config_option
@_seed_option
@click.option("--out", "out_path", default=None,
              help="Model file path (defaults to the configured one).")
@click.option("--size", type=int, default=300, show_default=True,
              help="Synthetic training corpus size.")
@click.option("--epochs", type=int, default=30, show_default=True)
def train_cnn(config_path, seed, out_path, size, epochs):
    """Train the windowed tagger on the templated grammar corpus."""
    config = with_seed(find_config(config_path), seed)
    sentences = corpus_mod.generate_tag_corpus(size, seed=config.seed)
    held_out = corpus_mod.generate_tag_corpus(max(size // 5, 20),
                                              seed=config.seed + 1)
    train_config = cnn_mod.CnnTrainConfig(epochs=epochs, seed=config.seed)
    model = cnn_mod.train(sentences, train_config)
    accuracy = cnn_mod.pos_accuracy(model, held_out)

    path = Path(out_path) if out_path else Path(config.cnn_model_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cnn_mod.save(model, path)
    click.echo(f"trained window tagger on {len(sentences)} sentences; "
               f"held-out tag accuracy {accuracy:.3f}; wrote {path}")


@cli.command("train-fusion")
@_config_option
@_seed_option
@click.option("--out", "out_path", default=None,
              help="Model file path (defaults to the configured one).")
@click.option("--size", type=int, default=600, show_default=True,
              help="Synthetic labelled corpus size.")
@click.option("--epochs", type=int, default=200, show_default=True)
def train_fusion(config_path, seed, out_path, size, epochs):
    """Train the fusion head on views from the two trained taggers."""
    config = with_seed(find_config(config_path), seed)
    dictionaries = load_dictionaries(config.dictionaries_dir)
    matcher = PhraseMatcher(dictionaries)
    crf_model = crf_mod.load(config.crf_model_path, matcher=matcher)
    cnn_model = cnn_mod.load(config.cnn_model_path)

    corpus = corpus_mod.generate_crf_corpus(dictionaries, size,
                                            seed=config.seed,
                                            frame=config.frame)
    dataset = []
    for item in corpus:
        labels = item.labels - {EventClass.OTHER}
        if not labels:
            continue
        tokens = tokenize(item.tweet.text)
        tags = crf_mod.decode(crf_model, tokens)
        boosted = cnn_mod.boost_location(
            tags, cnn_mod.loc_spans(cnn_model, tokens))
        phi = crf_mod.semantic_view_from_tags(boosted)
        theta = cnn_mod.syntactic_view(cnn_model, tokens)
        dataset.append((theta, phi, labels))

    train_config = fusion_mod.FusionTrainConfig(epochs=epochs,
                                                seed=config.seed,
                                                tau=config.tau)
    model = fusion_mod.train(dataset, train_config)
    accuracy = fusion_mod.training_accuracy(model, dataset)

    path = Path(out_path) if out_path else Path(config.fusion_model_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fusion_mod.save(model, path)
    click.echo(f"trained fusion head on {len(dataset)} labelled tweets; "
               f"training accuracy {accuracy:.3f}; wrote {path}")


@cli.command("tag")
@_config_option
@click.option("--in", "in_path", required=True,
              help="Tweet JSONL input, or - for stdin.")
@click.option("--out", "out_path", default="-",
              help="Per-token JSONL output, or - for stdout.")
def tag(config_path, in_path, out_path):
    """Per-token tags: BIO event spans (boosted) and part of speech."""
    config = find_config(config_path)
    pipeline = Pipeline.load(config)

    lines = []
    for tweet in _iter_tweets(in_path, config):
        tokens = tokenize(tweet.text)
        tags = crf_mod.decode(pipeline.crf_model, tokens)
        boosted = cnn_mod.boost_location(
            tags, cnn_mod.loc_spans(pipeline.cnn_model, tokens))
        pos, _ = cnn_mod.predict(pipeline.cnn_model, tokens)
        lines.append(json.dumps({
            "id": tweet.id,
            "tokens": [str(t) for t in tokens],
            "tags": [str(t) for t in boosted],
            "pos": pos,
        }, ensure_ascii=False))
    _write_text(out_path, "\n".join(lines) + "\n" if lines else "")


def _iter_tweets(in_path: str, config: PipelineConfig):
    if in_path == "-":
        import tempfile
        with tempfile.NamedTemporaryFile("w", suffix=".jsonl",
                                         delete=False) as fh:
            fh.write(sys.stdin.read())
            name = fh.name
        try:
            yield from replay_tweets(name, config.stream_filter)
        finally:
            Path(name).unlink(missing_ok=True)
    else:
        yield from replay_tweets(in_path, config.stream_filter)


@cli.command("classify")
@_config_option
@click.option("--in", "in_path", required=True,
              help="Tweet JSONL input, or - for stdin.")
@click.option("--out", "out_path", default="-",
              help="Annotation output, or - for stdout.")
@click.option("--format", "fmt",
              type=click.Choice(["jsonl", "csv", "geojson"]),
              default="jsonl", show_default=True)
@click.option("--figures", "figures_dir", default=None,
              help="Directory for rendered report figures.")
def classify(config_path, in_path, out_path, fmt, figures_dir):
    """Classify a tweet stream into impact-scored event annotations."""
    config = find_config(config_path)
    pipeline = Pipeline.load(config)
    annotations = pipeline.process(_iter_tweets(in_path, config))

    if fmt == "jsonl":
        text = report_mod.annotations_to_jsonl(annotations)
    elif fmt == "csv":
        text = report_mod.annotations_to_csv(annotations)
    else:
        text = json.dumps(annotations_geojson(annotations),
                          ensure_ascii=False, indent=2) + "\n"
    _write_text(out_path, text)

    if figures_dir:
        written = report_mod.render_figures(figures_dir, annotations,
                                            config.frame)
        click.echo(f"rendered {len(written)} figures in {figures_dir}",
                   err=True)


@cli.command("impact")
@_config_option
@click.option("--in", "in_path", required=True,
              help="Annotation JSONL input, or - for stdin.")
@click.option("--out", "out_path", default="-",
              help="Rescored annotation JSONL output, or - for stdout.")
def impact(config_path, in_path, out_path):
    """Recompute severity, likelihood, and impact for stored annotations."""
    config = find_config(config_path)
    annotations = report_mod.annotations_from_jsonl(_read_text(in_path))

    index = GridIndex(cell_size_deg=config.grid_cell_deg)
    bare = []
    for a in annotations:
        a = replace(a, severity=None, likelihood=None, impact=None)
        bare.append(a)
        if a.resolved_location is not None:
            index.add(a)
    delta_t = timedelta(seconds=config.delta_t_seconds)
    scored = [score_annotation(a, index, config.frame, delta_t)
              for a in bare]
    _write_text(out_path, report_mod.annotations_to_jsonl(scored))


@cli.command("correlate")
@_config_option
@click.option("--events", "events_path", required=True,
              help="Annotation JSONL (classify output), or - for stdin.")
@click.option("--records", "records_path", required=True,
              help="Authority record JSONL.")
@click.option("--out", "out_path", default="-",
              help="Report output, or - for stdout.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
              default="csv", show_default=True)
@click.option("--lead/--no-lead", default=False, show_default=True,
              help="Include lead-time statistics (JSON format only).")
@click.option("--figures", "figures_dir", default=None,
              help="Directory for rendered report figures.")
def correlate(config_path, events_path, records_path, out_path, fmt, lead,
              figures_dir):
    """Score per-class similarity between tweet events and authority records."""
    config = find_config(config_path)
    annotations = report_mod.annotations_from_jsonl(_read_text(events_path))
    records = records_from_jsonl(_read_text(records_path))
    graph = build_graph(records, config.frame.centre)
    report = build_report(annotations, graph,
                          lead_events=annotations if lead else None)

    if fmt == "csv":
        text = report_to_csv(report)
    else:
        text = json.dumps(report_to_json(report), indent=2) + "\n"
    _write_text(out_path, text)

    if figures_dir:
        written = report_mod.render_figures(figures_dir, annotations,
                                            config.frame, report=report)
        click.echo(f"rendered {len(written)} figures in {figures_dir}",
                   err=True)


@cli.command("serve")
@_config_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(config_path, host, port):
    """Run the HTTP service over the configured replay stream."""
    import uvicorn

    from .service import StreamRefresher, create_app

    config = find_config(config_path)
    pipeline = Pipeline.load(config)
    store = SnapshotStore(config)
    app = create_app(store, config.corpus_path)

    refresher = None
    if config.stream_path is not None:
        refresher = StreamRefresher(pipeline, store, config.stream_path,
                                    config.stream_filter,
                                    interval_seconds=config.window_seconds)
        refresher.start()
    else:
        store.swap()
        click.echo("no stream_path configured; serving an empty window",
                   err=True)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        if refresher is not None:
            refresher.stop()


@cli.command("gen-fixtures")
@_seed_option
@click.option("--out", "out_dir", required=True,
              help="Directory for the generated files.")
@click.option("--size", type=int, default=200, show_default=True)
def gen_fixtures(seed, out_dir, size):
    """Generate synthetic corpora: training data, a replay stream, records."""
    from .text import annotated_to_dict, tweet_to_dict, write_tag_corpus
    from .similarity import records_to_jsonl

    seed = seed if seed is not None else 0
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data_dir = Path(PipelineConfig().dictionaries_dir)
    dictionaries = load_dictionaries(data_dir)

    annotated = corpus_mod.generate_crf_corpus(dictionaries, size, seed=seed)
    (out / "annotated.jsonl").write_text(
        "".join(json.dumps(annotated_to_dict(a), ensure_ascii=False) + "\n"
                for a in annotated), encoding="utf-8")

    write_tag_corpus(out / "tags.jsonl",
                     corpus_mod.generate_tag_corpus(size, seed=seed))

    stream = corpus_mod.generate_tweet_stream(dictionaries, size, seed=seed)
    (out / "stream.jsonl").write_text(
        "".join(json.dumps(tweet_to_dict(t), ensure_ascii=False) + "\n"
                for t in stream), encoding="utf-8")

    _, records = corpus_mod.generate_lead_time_stream(seed=seed)
    (out / "records.jsonl").write_text(records_to_jsonl(records),
                                       encoding="utf-8")
    click.echo(f"wrote annotated.jsonl, tags.jsonl, stream.jsonl, "
               f"records.jsonl in {out}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.exceptions.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except UrbanPulseError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
