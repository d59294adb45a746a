from .evaluation import evaluate_pairwise, promote, run_stage3
from .synthesis import Stage1Result, fuse_scores, rank_stage1, run_stage1, synthesize
from .verification import (
    VerificationMatrix,
    count_satisfied,
    derive_propositions,
    rerank_stage2,
    run_stage2,
    verify_candidate,
)

__all__ = [
    "Stage1Result",
    "VerificationMatrix",
    "count_satisfied",
    "derive_propositions",
    "evaluate_pairwise",
    "fuse_scores",
    "promote",
    "rank_stage1",
    "rerank_stage2",
    "run_stage1",
    "run_stage2",
    "run_stage3",
    "synthesize",
    "verify_candidate",
]
