"""Retrieval metric kernels: Recall@k, subset Recall@k, mAP@k, Hits@k.

All kernels take a ranking as an ordered sequence of image ids and a
ground-truth collection of ids; they are pure and oracle-tested.
"""

from __future__ import annotations

from ..errors import MissingSubset


def recall_at_k(ranking, ground_truth, k: int) -> int:
    """1 iff any ground-truth id appears in the top-k, else 0."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    gt = set(ground_truth)
    if not gt:
        raise ValueError("ground truth is empty")
    return int(any(image_id in gt for image_id in list(ranking)[:k]))


def recall_subset_at_k(ranking, subset_group, ground_truth, k: int) -> int:
    """Recall@k after restricting the ranking to the subset group."""
    if subset_group is None:
        raise MissingSubset("case has no subset group")
    subset = set(subset_group)
    if not subset:
        raise MissingSubset("subset group is empty")
    gt = set(ground_truth)
    if not (subset & gt):
        raise MissingSubset("subset group contains no ground-truth id")
    restricted = [image_id for image_id in ranking if image_id in subset]
    return recall_at_k(restricted, gt, k)


def average_precision_at_k(ranking, ground_truth, k: int) -> float:
    """AP@k = sum_i rel(i) * Precision@i / min(|GT|, k); rel=0 past list end."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    gt = set(ground_truth)
    if not gt:
        raise ValueError("ground truth is empty")
    hits = 0
    total = 0.0
    for i, image_id in enumerate(list(ranking)[:k], start=1):
        if image_id in gt:
            hits += 1
            total += hits / i
    return total / min(len(gt), k)


def hits_at_k(per_round_rankings, ground_truth, k: int, mode: str = "cumulative"):
    """Per-round hit vector for a dialog case.

    ``cumulative`` (default): round r is 1 iff the target appeared in the
    top-k at any round <= r. ``per_round``: each round judged alone.
    """
    if mode not in ("cumulative", "per_round"):
        raise ValueError(f"mode must be 'cumulative' or 'per_round', got {mode!r}")
    rounds = list(per_round_rankings)
    if not rounds:
        raise ValueError("at least one round required")
    out = []
    seen = 0
    for ranking in rounds:
        hit = recall_at_k(ranking, ground_truth, k)
        if mode == "cumulative":
            seen = max(seen, hit)
            out.append(seen)
        else:
            out.append(hit)
    return tuple(out)
