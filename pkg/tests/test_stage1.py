"""Stage 1: synthesis round-trips, fusion math vs oracles, stable ranking."""

import itertools

import numpy as np
import pytest

from conftest import make_mock_gateway
from imsearch.errors import ParseError
from imsearch.gateway.mock import text_vector
from imsearch.gateway.parsing import stage1_reasoner_json
from imsearch.index import CaptionRecord, EmbeddingIndex
from imsearch.model import (
    AtomicInstruction,
    ImageRecord,
    InstructionKind,
    Stage,
    StageTrace,
    TargetDescriptions,
)
from imsearch.stages import fuse_scores, rank_stage1, synthesize
from imsearch.stages.synthesis import SYNTHETIC_RETENTION_NOTE
from test_kernels import scalar_fused_oracle

BABY_DESCS = TargetDescriptions(
    core_elements="A woman holds a baby.",
    enhanced_details="A woman with dark hair holds a baby under an umbrella.",
    comprehensive_synthesis="A woman with dark hair holds a baby and is smiling, under a gray umbrella.",
)
BABY_ATOMIC = (AtomicInstruction(kind=InstructionKind.ADDITION, text="Make the woman holding a baby."),)


def make_index(v_text, v_image):
    v_text = np.asarray(v_text, dtype=np.float32)
    n = v_text.shape[0]
    records = [ImageRecord(id=f"img{i}", uri=f"mem://{i}", content_hash=f"h{i}") for i in range(n)]
    captions = [CaptionRecord(image_id=f"img{i}", text=f"caption {i}", captioner_id="t") for i in range(n)]
    return EmbeddingIndex(records, captions, v_text, np.asarray(v_image, dtype=np.float32))


def random_unit_rows(rng, n, d):
    rows = rng.standard_normal((n, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


class TestSynthesize:
    def test_worked_example(self, mock_backend):
        gateway = make_mock_gateway(mock_backend)
        mock_backend.script(
            role="reasoner",
            text_contains=["- Instruction: has the person holding a baby"],
            response=stage1_reasoner_json(BABY_ATOMIC, BABY_DESCS),
        )
        insts, descs, notes = synthesize(
            "has the person holding a baby",
            "A woman with dark hair is smiling under a gray umbrella with a white flower hanging from it.",
            gateway,
        )
        assert insts == BABY_ATOMIC
        assert descs.core_elements == "A woman holds a baby."
        assert notes == ()

    def test_mock_echo_round_trip(self, mock_backend):
        gateway = make_mock_gateway(mock_backend)
        insts = (
            AtomicInstruction(kind=InstructionKind.REMOVAL, text="Remove the hat."),
            AtomicInstruction(kind=InstructionKind.RETENTION, text="Keep the tree."),
        )
        descs = TargetDescriptions("a", "b", "c")
        mock_backend.script(role="reasoner", response=stage1_reasoner_json(insts, descs))
        got_insts, got_descs, _ = synthesize("x", "y", gateway)
        assert got_insts == insts and got_descs == descs

    def test_malformed_then_valid_two_calls(self, mock_backend):
        gateway = make_mock_gateway(mock_backend)
        mock_backend.script(
            role="reasoner",
            responses=["not json at all", stage1_reasoner_json(BABY_ATOMIC, BABY_DESCS)],
        )
        insts, descs, _ = synthesize("x", "y", gateway)
        assert insts == BABY_ATOMIC
        assert len(mock_backend.calls_for("reasoner")) == 2

    def test_malformed_twice_fails(self, mock_backend):
        gateway = make_mock_gateway(mock_backend)
        mock_backend.script(role="reasoner", response="never json")
        with pytest.raises(ParseError):
            synthesize("x", "y", gateway)
        assert len(mock_backend.calls_for("reasoner")) == 2

    def test_zero_instructions_synthetic_retention(self, mock_backend):
        gateway = make_mock_gateway(mock_backend)
        mock_backend.script(role="reasoner", response=stage1_reasoner_json((), BABY_DESCS))
        insts, _, notes = synthesize("keep everything", "y", gateway)
        assert insts == (AtomicInstruction(kind=InstructionKind.RETENTION, text="keep everything"),)
        assert SYNTHETIC_RETENTION_NOTE in notes

    def test_empty_description_substituted(self, mock_backend):
        gateway = make_mock_gateway(mock_backend)
        descs = TargetDescriptions(core_elements="", enhanced_details="b", comprehensive_synthesis="c")
        mock_backend.script(role="reasoner", response=stage1_reasoner_json(BABY_ATOMIC, descs))
        _, got, notes = synthesize("the instruction", "y", gateway)
        assert got.core_elements == "the instruction"
        assert got.enhanced_details == "b"
        assert any("core_elements" in n for n in notes)


class TestFuseScores:
    def _gateway_with_desc_vectors(self, mock_backend, descs, vectors):
        gateway = make_mock_gateway(mock_backend)
        for text, vec in zip(descs.as_ordered(), vectors):
            mock_backend.script(role="text_encoder", text_contains=[text], vector_values=list(vec))
        return gateway

    def test_worked_value_063(self, mock_backend):
        # per-granularity sims text=0.8, image=0.6 with tau=0.15 -> 0.63
        index = make_index([[0.8, 0.6]], [[0.6, 0.8]])
        descs = TargetDescriptions("same text", "same text", "same text")
        gateway = make_mock_gateway(mock_backend)
        mock_backend.script(role="text_encoder", vector_values=[1.0, 0.0])
        scores = fuse_scores(descs, index, 0.15, gateway)
        assert abs(scores[0] - 0.63) < 1e-7

    def test_tau_zero_pure_image_path(self, mock_backend):
        rng = np.random.default_rng(0)
        v_text = random_unit_rows(rng, 8, 16)
        v_image = random_unit_rows(rng, 8, 16)
        index = make_index(v_text, v_image)
        descs = TargetDescriptions("d one", "d two", "d three")
        gateway = make_mock_gateway(mock_backend)
        scores = fuse_scores(descs, index, 0.0, gateway)
        queries = [text_vector(t, 16) for t in descs.as_ordered()]
        want = np.mean([index.v_image.astype(np.float64) @ q for q in queries], axis=0)
        np.testing.assert_allclose(scores, want, atol=1e-9, rtol=0)

    def test_tau_one_pure_text_path(self, mock_backend):
        rng = np.random.default_rng(1)
        index = make_index(random_unit_rows(rng, 6, 16), random_unit_rows(rng, 6, 16))
        descs = TargetDescriptions("a1", "a2", "a3")
        gateway = make_mock_gateway(mock_backend)
        scores = fuse_scores(descs, index, 1.0, gateway)
        queries = [text_vector(t, 16) for t in descs.as_ordered()]
        want = np.mean([index.v_text.astype(np.float64) @ q for q in queries], axis=0)
        np.testing.assert_allclose(scores, want, atol=1e-9, rtol=0)

    def test_matches_bruteforce_oracle(self, mock_backend):
        rng = np.random.default_rng(2)
        index = make_index(random_unit_rows(rng, 20, 8), random_unit_rows(rng, 20, 8))
        descs = TargetDescriptions("b1", "b2", "b3")
        mock_backend.dim = 8
        gateway = make_mock_gateway(mock_backend)
        scores = fuse_scores(descs, index, 0.15, gateway)
        queries = [text_vector(t, 8) for t in descs.as_ordered()]
        want = scalar_fused_oracle(index.v_text, index.v_image, queries, 0.15)
        np.testing.assert_allclose(scores, want, atol=1e-9, rtol=0)

    def test_linearity_in_tau(self, mock_backend):
        rng = np.random.default_rng(3)
        index = make_index(random_unit_rows(rng, 10, 16), random_unit_rows(rng, 10, 16))
        descs = TargetDescriptions("c1", "c2", "c3")
        gateway = make_mock_gateway(mock_backend)
        tau = 0.37
        s_tau = fuse_scores(descs, index, tau, gateway)
        s_one = fuse_scores(descs, index, 1.0, gateway)
        s_zero = fuse_scores(descs, index, 0.0, gateway)
        np.testing.assert_allclose(s_tau, tau * s_one + (1 - tau) * s_zero, atol=1e-9, rtol=0)

    def test_granularity_permutation_invariant(self, mock_backend):
        rng = np.random.default_rng(4)
        index = make_index(random_unit_rows(rng, 7, 16), random_unit_rows(rng, 7, 16))
        gateway = make_mock_gateway(mock_backend)
        texts = ("g1", "g2", "g3")
        base = fuse_scores(TargetDescriptions(*texts), index, 0.15, gateway)
        for perm in itertools.permutations(texts):
            permuted = fuse_scores(TargetDescriptions(*perm), index, 0.15, gateway)
            np.testing.assert_allclose(base, permuted, atol=1e-9, rtol=0)

    def test_tau_out_of_bounds(self, mock_backend):
        index = make_index([[1.0, 0.0]], [[0.0, 1.0]])
        with pytest.raises(ValueError):
            fuse_scores(TargetDescriptions("a", "b", "c"), index, 1.5, make_mock_gateway(mock_backend))


class TestRankStage1:
    def test_tie_kept_in_index_order(self):
        ranking = rank_stage1([0.2, 0.9, 0.9], ["img1", "img2", "img3"])
        assert ranking.ids() == ("img2", "img3", "img1")
        assert [e.stage1_rank for e in ranking.entries] == [1, 2, 3]
        assert ranking.stage is Stage.STAGE1

    def test_all_equal_identity_order(self):
        ranking = rank_stage1([0.5] * 4, [f"img{i}" for i in range(4)])
        assert ranking.ids() == tuple(f"img{i}" for i in range(4))

    def test_random_matches_oracle(self):
        rng = np.random.default_rng(5)
        scores = rng.integers(0, 6, size=30).astype(float)
        ids = [f"img{i:02d}" for i in range(30)]
        ranking = rank_stage1(scores, ids)
        oracle = [ids[i] for i in sorted(range(30), key=lambda i: (-scores[i], i))]
        assert list(ranking.ids()) == oracle

    def test_constant_shift_invariant(self):
        rng = np.random.default_rng(6)
        scores = rng.standard_normal(20)
        ids = [f"img{i}" for i in range(20)]
        assert rank_stage1(scores, ids).ids() == rank_stage1(scores + 5.0, ids).ids()

    def test_resort_idempotent(self):
        ranking = rank_stage1([0.3, 0.9, 0.3], ["a", "b", "c"])
        scores_again = [e.stage1_score for e in ranking.entries]
        ids_again = [e.image_id for e in ranking.entries]
        assert rank_stage1(scores_again, ids_again).ids() == ranking.ids()

    def test_trace_attached(self):
        trace = StageTrace(notes=("n",))
        ranking = rank_stage1([1.0], ["a"], trace=trace)
        assert ranking.trace.notes == ("n",)
