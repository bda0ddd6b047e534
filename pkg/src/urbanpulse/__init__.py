"""City-event extraction from short text streams.

Subpackages cover tokenization and tag vocabularies (text), a linear-chain
CRF entity tagger (crf), a windowed neural tagger (cnn), multi-view event
classification (fusion), geodesy (geo), impact scoring (impact), similarity
against authority records (similarity), data ingest (ingest), and the
pipeline/CLI/service glue (pipeline, cli, service).
"""

__version__ = "0.1.0"
