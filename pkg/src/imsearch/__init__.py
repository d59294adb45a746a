"""Training-free language-guided image retrieval.

One pipeline serves text-to-image, composed, and chat-based retrieval:
stage 1 synthesizes target descriptions at three granularities and fuses
dual-path cosine scores over the index; stage 2 verifies predicate
propositions against the top candidates; stage 3 pairwise-evaluates the
leaders and promotes the first acceptance.
"""

from .adapters import BLANK_REFERENCE_TEXT, Session, SessionStore, adapt_chatir, adapt_cir, adapt_tir
from .cache import Cache
from .config import load_config, mock_backends
from .engine import PipelineResult, RetrievalEngine
from .errors import EngineError
from .gateway import Gateway, MockBackend
from .index import EmbeddingIndex, ingest, load_index, save_index
from .model import (
    AtomicInstruction,
    Embedding,
    EvaluatorVerdict,
    ImageRecord,
    InstructionKind,
    PipelineConfig,
    Proposition,
    QueryKind,
    RankedEntry,
    RankedList,
    RetrievalQuery,
    Stage,
    StageTrace,
    TargetDescriptions,
    validate_query,
)

__version__ = "0.1.0"

__all__ = [
    "AtomicInstruction",
    "BLANK_REFERENCE_TEXT",
    "Cache",
    "Embedding",
    "EmbeddingIndex",
    "EngineError",
    "EvaluatorVerdict",
    "Gateway",
    "ImageRecord",
    "InstructionKind",
    "MockBackend",
    "PipelineConfig",
    "PipelineResult",
    "Proposition",
    "QueryKind",
    "RankedEntry",
    "RankedList",
    "RetrievalEngine",
    "RetrievalQuery",
    "Session",
    "SessionStore",
    "Stage",
    "StageTrace",
    "TargetDescriptions",
    "adapt_chatir",
    "adapt_cir",
    "adapt_tir",
    "ingest",
    "load_config",
    "load_index",
    "mock_backends",
    "save_index",
    "validate_query",
]
