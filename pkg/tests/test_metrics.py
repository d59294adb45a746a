"""Metric kernels vs brute-force oracles."""

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from imsearch.bench.metrics import (
    average_precision_at_k,
    hits_at_k,
    recall_at_k,
    recall_subset_at_k,
)
from imsearch.errors import MissingSubset

# -- independent oracles ----------------------------------------------------


def oracle_recall(ranking, gt, k):
    return 1 if set(ranking[:k]) & set(gt) else 0


def oracle_ap(ranking, gt, k):
    gt = set(gt)
    hits = 0
    acc = 0.0
    for i in range(min(k, len(ranking))):
        if ranking[i] in gt:
            hits += 1
            acc += hits / (i + 1)
    return acc / min(len(gt), k)


def random_world(rng, n=30):
    ids = [f"d{i}" for i in range(n)]
    ranking = ids[:]
    rng.shuffle(ranking)
    gt = set(rng.sample(ids, rng.randint(1, 5)))
    return ids, ranking, gt


class TestRecall:
    def test_gt_at_rank_1(self):
        assert recall_at_k(["a", "b"], {"a"}, 1) == 1

    def test_gt_at_rank_11_k10(self):
        ranking = [f"x{i}" for i in range(10)] + ["gt"]
        assert recall_at_k(ranking, {"gt"}, 10) == 0
        assert recall_at_k(ranking, {"gt"}, 11) == 1

    def test_200_random_cases_match_oracle(self):
        rng = random.Random(0)
        for _ in range(200):
            _, ranking, gt = random_world(rng)
            k = rng.randint(1, 15)
            assert recall_at_k(ranking, gt, k) == oracle_recall(ranking, gt, k)

    def test_monotone_in_k(self):
        rng = random.Random(1)
        for _ in range(50):
            _, ranking, gt = random_world(rng)
            values = [recall_at_k(ranking, gt, k) for k in range(1, 20)]
            assert values == sorted(values)

    def test_k_floor(self):
        with pytest.raises(ValueError):
            recall_at_k(["a"], {"a"}, 0)


class TestRecallSubset:
    def test_restriction_semantics(self):
        # gt ranked 50th overall but 1st within its subset
        ranking = [f"x{i}" for i in range(49)] + ["gt", "s1", "s2"]
        subset = ["s1", "s2", "gt"]
        assert recall_at_k(ranking, {"gt"}, 1) == 0
        assert recall_subset_at_k(ranking, subset, {"gt"}, 1) == 1

    def test_gt_absent_from_subset(self):
        with pytest.raises(MissingSubset):
            recall_subset_at_k(["a", "b"], ["a"], {"b"}, 1)

    def test_no_subset(self):
        with pytest.raises(MissingSubset):
            recall_subset_at_k(["a"], None, {"a"}, 1)

    def test_random_matches_filter_then_check_oracle(self):
        rng = random.Random(2)
        for _ in range(200):
            ids, ranking, gt = random_world(rng)
            subset = set(rng.sample(ids, 8)) | {next(iter(gt))}
            k = rng.randint(1, 6)
            got = recall_subset_at_k(ranking, subset, gt, k)
            restricted = [i for i in ranking if i in subset]
            assert got == oracle_recall(restricted, gt, k)


class TestMapAtK:
    def test_single_gt_rank_1_is_one(self):
        for k in (1, 3, 10):
            assert average_precision_at_k(["gt", "b", "c"], {"gt"}, k) == 1.0

    def test_single_gt_rank_2_k5_is_half(self):
        assert average_precision_at_k(["x", "gt", "y"], {"gt"}, 5) == 0.5

    def test_min_gt_k_normalization(self):
        # |GT|=3, k=2, both top-2 relevant: (1/1 + 2/2) / min(3,2) = 1.0
        assert average_precision_at_k(["g1", "g2", "x"], {"g1", "g2", "g3"}, 2) == 1.0

    def test_rel_zero_beyond_list_end(self):
        assert average_precision_at_k(["x", "gt"], {"gt"}, 10) == 0.5 / min(1, 10)

    def test_random_matches_oracle(self):
        rng = random.Random(3)
        for _ in range(500):
            _, ranking, gt = random_world(rng)
            k = rng.randint(1, 10)
            got = average_precision_at_k(ranking, gt, k)
            assert abs(got - oracle_ap(ranking, gt, k)) <= 1e-9

    def test_bounded_and_perfect_prefix(self):
        rng = random.Random(4)
        for _ in range(200):
            _, ranking, gt = random_world(rng)
            k = rng.randint(1, 10)
            ap = average_precision_at_k(ranking, gt, k)
            assert 0.0 <= ap <= 1.0
            m = min(len(gt), k)
            prefix_perfect = all(r in gt for r in ranking[:m])
            if ap == 1.0:
                assert prefix_perfect
            if prefix_perfect:
                assert ap == 1.0


class TestHitsAtK:
    def test_cumulative_mode(self):
        rounds = [["a"], ["b"], ["gt"], ["c"], ["d"]]
        assert hits_at_k(rounds, {"gt"}, 1) == (0, 0, 1, 1, 1)

    def test_per_round_mode(self):
        rounds = [["a"], ["b"], ["gt"], ["c"]]
        assert hits_at_k(rounds, {"gt"}, 1, mode="per_round") == (0, 0, 1, 0)

    def test_cumulative_monotone_property(self):
        rng = random.Random(5)
        for _ in range(100):
            ids = [f"r{i}" for i in range(10)]
            rounds = [rng.sample(ids, 5) for _ in range(6)]
            gt = {rng.choice(ids)}
            values = hits_at_k(rounds, gt, 3)
            assert list(values) == sorted(values)

    def test_ten_round_scripted_matches_oracle(self):
        rng = random.Random(6)
        ids = [f"q{i}" for i in range(20)]
        rounds = [rng.sample(ids, 10) for _ in range(10)]
        gt = {"q3", "q7"}
        got = hits_at_k(rounds, gt, 5)
        seen = 0
        want = []
        for r in rounds:
            seen = max(seen, oracle_recall(r, gt, 5))
            want.append(seen)
        assert list(got) == want

    def test_requires_rounds(self):
        with pytest.raises(ValueError):
            hits_at_k([], {"x"}, 1)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            hits_at_k([["a"]], {"a"}, 1, mode="weird")


@given(
    st.lists(st.integers(0, 40), min_size=1, max_size=30, unique=True),
    st.sets(st.integers(0, 40), min_size=1, max_size=5),
    st.integers(1, 15),
)
def test_recall_and_map_agree_with_oracles_property(ranking, gt, k):
    ranking = [str(i) for i in ranking]
    gt = {str(i) for i in gt}
    assert recall_at_k(ranking, gt, k) == oracle_recall(ranking, gt, k)
    assert abs(average_precision_at_k(ranking, gt, k) - oracle_ap(ranking, gt, k)) <= 1e-9
