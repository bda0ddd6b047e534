import json
from pathlib import Path

import pytest

ACCEPTANCE_FILE = "test_acceptance.py"
_acceptance_reports = []


def pytest_runtest_logreport(report):
    if ACCEPTANCE_FILE in report.nodeid and report.when == "call":
        _acceptance_reports.append(report)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per shipped guarantee."""
    if not _acceptance_reports:
        return
    terminalreporter.section("acceptance summary")
    for report in _acceptance_reports:
        name = report.nodeid.split("::", 1)[1]
        outcome = ("PASS" if report.passed
                   else "SKIP" if report.skipped else "FAIL")
        terminalreporter.write_line(f"{outcome}  {name}")

from urbanpulse import cnn as cnn_mod
from urbanpulse import corpus as corpus_mod
from urbanpulse import crf as crf_mod
from urbanpulse import fusion as fusion_mod
from urbanpulse.config import PipelineConfig, load_config
from urbanpulse.pipeline import Pipeline
from urbanpulse.text import (
    EventClass, PhraseMatcher, load_dictionaries, sentence_iter, tokenize,
)

SEED = 11


@pytest.fixture(scope="session")
def models_dir(tmp_path_factory) -> Path:
    """Train the three models once per session at desk scale."""
    out = tmp_path_factory.mktemp("models")
    dictionaries = load_dictionaries(PipelineConfig().dictionaries_dir)
    matcher = PhraseMatcher(dictionaries)

    corpus = corpus_mod.generate_crf_corpus(dictionaries, 200, seed=SEED)
    crf_model = crf_mod.train(list(sentence_iter(corpus)),
                              crf_mod.CrfTrainConfig(epochs=30, seed=SEED),
                              matcher=matcher)
    crf_mod.save(crf_model, out / "crf.json")

    sentences = corpus_mod.generate_tag_corpus(200, seed=SEED)
    cnn_model = cnn_mod.train(sentences,
                              cnn_mod.CnnTrainConfig(epochs=30, seed=SEED))
    cnn_mod.save(cnn_model, out / "cnn.json")

    dataset = []
    for item in corpus_mod.generate_crf_corpus(dictionaries, 300, seed=SEED + 1):
        labels = item.labels - {EventClass.OTHER}
        if not labels:
            continue
        tokens = tokenize(item.tweet.text)
        tags = crf_mod.decode(crf_model, tokens)
        boosted = cnn_mod.boost_location(
            tags, cnn_mod.loc_spans(cnn_model, tokens))
        dataset.append((cnn_mod.syntactic_view(cnn_model, tokens),
                        crf_mod.semantic_view_from_tags(boosted), labels))
    fusion_model = fusion_mod.train(
        dataset, fusion_mod.FusionTrainConfig(epochs=150, seed=SEED))
    fusion_mod.save(fusion_model, out / "fusion.json")
    return out


@pytest.fixture(scope="session")
def config_path(models_dir, tmp_path_factory) -> Path:
    """A config file wired to the session-trained models."""
    root = tmp_path_factory.mktemp("cfg")
    path = root / "config.json"
    path.write_text(json.dumps({
        "models": {
            "crf": str(models_dir / "crf.json"),
            "cnn": str(models_dir / "cnn.json"),
            "fusion": str(models_dir / "fusion.json"),
        },
        "corpus_path": str(root / "corpus" / "annotations.jsonl"),
        "seed": SEED,
    }))
    return path


@pytest.fixture(scope="session")
def pipeline(config_path) -> Pipeline:
    return Pipeline.load(load_config(config_path))
