"""Pipeline configuration: one JSON document wiring paths and knobs.

Relative paths resolve against the config file's own directory, so a
config can travel with its data. `URBANPULSE_CONFIG` supplies the path
when the command line does not.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .geo import CityFrame, GeoPoint, LONDON
from .ingest import DisruptionMapping, ParserRules, StreamConfig

ENV_VAR = "URBANPULSE_CONFIG"

_PACKAGE_DATA = Path(__file__).parent / "data"


@dataclass(frozen=True)
class PipelineConfig:
    dictionaries_dir: Path = _PACKAGE_DATA / "dictionaries"
    gazetteer_path: Path = _PACKAGE_DATA / "gazetteer.csv"
    crf_model_path: Path = Path("models/crf.json")
    cnn_model_path: Path = Path("models/cnn.json")
    fusion_model_path: Path = Path("models/fusion.json")
    corpus_path: Path = Path("corpus/annotations.jsonl")
    stream_path: Path | None = None
    frame: CityFrame = LONDON
    delta_t_seconds: float = 300.0
    grid_cell_deg: float = 0.01
    tau: float = 0.3
    window_seconds: float = 60.0
    seed: int = 0
    stream_filter: StreamConfig = field(default_factory=StreamConfig)
    disruption_mapping: DisruptionMapping | None = None
    parser_rules: ParserRules | None = None

    def __post_init__(self):
        if self.delta_t_seconds <= 0:
            raise ConfigError("delta_t_seconds must be positive")
        if self.window_seconds <= 0:
            raise ConfigError("window_seconds must be positive")
        if self.grid_cell_deg <= 0:
            raise ConfigError("grid_cell_deg must be positive")
        if not 0.0 < self.tau < 1.0:
            raise ConfigError("tau must lie strictly between 0 and 1")


def _point(pair) -> GeoPoint:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ConfigError(f"expected a [lat, lon] pair, got {pair!r}")
    return GeoPoint(float(pair[0]), float(pair[1]))


def _frame(d) -> CityFrame:
    try:
        return CityFrame(centre=_point(d["centre"]), bbox_sw=_point(d["sw"]),
                         bbox_ne=_point(d["ne"]))
    except KeyError as exc:
        raise ConfigError(f"frame block missing field: {exc}") from None


def _stream_filter(d) -> StreamConfig:
    boxes = tuple((_point(sw), _point(ne))
                  for sw, ne in d.get("locations", ()))
    return StreamConfig(follow=tuple(str(x) for x in d.get("follow", ())),
                        track=tuple(str(x) for x in d.get("track", ())),
                        locations=boxes)


def load_config(path: str | Path) -> PipelineConfig:
    """Read a config file; input files it references must already exist."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config root must be an object")

    base = path.parent
    defaults = PipelineConfig()

    def resolve(key, default):
        value = raw.get(key)
        if value is None:
            return default
        return (base / str(value)).resolve()

    models = raw.get("models", {})

    def resolve_model(key, default):
        value = models.get(key)
        if value is None:
            return default
        return (base / str(value)).resolve()

    config = PipelineConfig(
        dictionaries_dir=resolve("dictionaries_dir", defaults.dictionaries_dir),
        gazetteer_path=resolve("gazetteer", defaults.gazetteer_path),
        crf_model_path=resolve_model("crf", defaults.crf_model_path),
        cnn_model_path=resolve_model("cnn", defaults.cnn_model_path),
        fusion_model_path=resolve_model("fusion", defaults.fusion_model_path),
        corpus_path=resolve("corpus_path", defaults.corpus_path),
        stream_path=resolve("stream_path", None),
        frame=_frame(raw["frame"]) if "frame" in raw else defaults.frame,
        delta_t_seconds=float(raw.get("delta_t_seconds",
                                      defaults.delta_t_seconds)),
        grid_cell_deg=float(raw.get("grid_cell_deg", defaults.grid_cell_deg)),
        tau=float(raw.get("tau", defaults.tau)),
        window_seconds=float(raw.get("window_seconds",
                                     defaults.window_seconds)),
        seed=int(raw.get("seed", defaults.seed)),
        stream_filter=_stream_filter(raw.get("stream_filter", {})),
        disruption_mapping=(DisruptionMapping.from_dict(raw["disruption_mapping"])
                            if "disruption_mapping" in raw else None),
        parser_rules=(ParserRules.from_dict(raw["parser_rules"])
                      if "parser_rules" in raw else None),
    )

    # Model files appear after training, but the lexical inputs and any
    # configured replay file must exist up front.
    if not Path(config.dictionaries_dir).is_dir():
        raise ConfigError(
            f"dictionaries_dir does not exist: {config.dictionaries_dir}")
    if not Path(config.gazetteer_path).is_file():
        raise ConfigError(
            f"gazetteer file does not exist: {config.gazetteer_path}")
    if config.stream_path is not None and not Path(config.stream_path).is_file():
        raise ConfigError(
            f"stream_path does not exist: {config.stream_path}")
    return config


def find_config(explicit: str | None = None) -> PipelineConfig:
    """Resolve the active config: flag, then environment, then defaults."""
    if explicit:
        return load_config(explicit)
    env = os.environ.get(ENV_VAR)
    if env:
        return load_config(env)
    return PipelineConfig()


def with_seed(config: PipelineConfig, seed: int | None) -> PipelineConfig:
    return config if seed is None else replace(config, seed=seed)
