from .store import (
    CaptionRecord,
    EmbeddingIndex,
    argsort_desc,
    cosine_scores,
    ingest,
    load_index,
    load_manifest,
    save_index,
)

__all__ = [
    "CaptionRecord",
    "EmbeddingIndex",
    "argsort_desc",
    "cosine_scores",
    "ingest",
    "load_index",
    "load_manifest",
    "save_index",
]
