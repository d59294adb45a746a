"""Model-output parsers: tolerance, failure paths, canonical round-trips."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from imsearch.errors import AmbiguousAnswer, ParseError
from imsearch.gateway.parsing import (
    Answer,
    classify_answer,
    parse_evaluator_output,
    parse_stage1_output,
    parse_stage2_output,
    parse_yes_no,
    stage1_reasoner_json,
    stage2_reasoner_text,
)
from imsearch.model import AtomicInstruction, InstructionKind, Proposition, TargetDescriptions

CANONICAL = json.dumps(
    {
        "Atomic Instructions": [{"type": "Addition", "instruction": "Make the woman holding a baby."}],
        "Core Elements": "A woman holds a baby.",
        "Enhanced Details": "A woman with dark hair holds a baby under an umbrella.",
        "Comprehensive Synthesis": "A woman with dark hair holds a baby and is smiling, under a gray umbrella.",
    }
)


class TestStage1Parse:
    def test_well_formed(self):
        insts, descs = parse_stage1_output(CANONICAL)
        assert len(insts) == 1
        assert insts[0] == AtomicInstruction(
            kind=InstructionKind.ADDITION, text="Make the woman holding a baby."
        )
        assert descs.core_elements == "A woman holds a baby."
        assert descs.comprehensive_synthesis.endswith("gray umbrella.")

    def test_fenced_block_equivalent(self):
        fenced = "Sure, here is the answer:\n```json\n" + CANONICAL + "\n```\nHope that helps."
        assert parse_stage1_output(fenced) == parse_stage1_output(CANONICAL)

    def test_surrounding_prose_tolerated(self):
        noisy = "Step reasoning blah...\n" + CANONICAL + "\ntrailing remark"
        assert parse_stage1_output(noisy) == parse_stage1_output(CANONICAL)

    def test_missing_comprehensive_synthesis(self):
        obj = json.loads(CANONICAL)
        del obj["Comprehensive Synthesis"]
        with pytest.raises(ParseError):
            parse_stage1_output(json.dumps(obj))

    def test_missing_instruction_list(self):
        obj = json.loads(CANONICAL)
        del obj["Atomic Instructions"]
        with pytest.raises(ParseError):
            parse_stage1_output(json.dumps(obj))

    def test_unknown_instruction_type(self):
        obj = json.loads(CANONICAL)
        obj["Atomic Instructions"][0]["type"] = "Translation"
        with pytest.raises(ParseError):
            parse_stage1_output(json.dumps(obj))

    def test_case_insensitive_kinds_and_keys(self):
        obj = {
            "atomic_instructions": [{"kind": "removal", "text": "Remove the hat."}],
            "core_elements": "a",
            "enhanced_details": "b",
            "comprehensive_synthesis": "c",
        }
        insts, descs = parse_stage1_output(json.dumps(obj))
        assert insts[0].kind is InstructionKind.REMOVAL
        assert descs == TargetDescriptions("a", "b", "c")

    def test_string_entries_accepted(self):
        obj = json.loads(CANONICAL)
        obj["Atomic Instructions"] = ["Comparison: More people than before."]
        insts, _ = parse_stage1_output(json.dumps(obj))
        assert insts[0].kind is InstructionKind.COMPARISON

    def test_no_json_at_all(self):
        with pytest.raises(ParseError):
            parse_stage1_output("The target image shows a woman holding a baby.")

    @given(
        st.lists(
            st.builds(
                AtomicInstruction,
                kind=st.sampled_from(InstructionKind),
                text=st.text(min_size=1, max_size=30).filter(lambda t: t.strip()),
            ),
            min_size=1,
            max_size=4,
        ),
        st.tuples(*[st.text(min_size=1, max_size=30)] * 3),
    )
    def test_round_trip_canonical_emitter(self, insts, desc_texts):
        descs = TargetDescriptions(*desc_texts)
        parsed_insts, parsed_descs = parse_stage1_output(stage1_reasoner_json(insts, descs))
        assert list(parsed_insts) == insts
        assert parsed_descs == descs


class TestStage2Parse:
    def test_worked_example(self):
        raw = (
            "1. **Step 1.** Based on the atomic instructions, the statements are:\n"
            "    (1) There is a woman holding a baby.\n\n"
            "2. **Step 2.** Based on step 1, the questions and answers are:\n"
            "    (1) Q: Is there a woman holding a baby? A: Yes. (True)"
        )
        props = parse_stage2_output(raw)
        assert props == (
            Proposition(
                statement="There is a woman holding a baby.",
                question="Is there a woman holding a baby?",
                truth_value=True,
            ),
        )

    def test_negative_truth(self):
        raw = "(1) Q: Is there a hat in the image? A: No. (False)"
        props = parse_stage2_output(raw)
        assert props[0].truth_value is False

    def test_truth_annotation_wins_over_answer(self):
        raw = "(1) Q: Is the scene empty? A: No. (False)\n(2) Q: Is it day? A: Yes. (True)"
        props = parse_stage2_output(raw)
        assert [p.truth_value for p in props] == [False, True]

    def test_empty_raw(self):
        with pytest.raises(ParseError):
            parse_stage2_output("")

    def test_prose_without_questions(self):
        with pytest.raises(ParseError):
            parse_stage2_output("The instruction implies several scene changes.")

    def test_statement_falls_back_to_question(self):
        raw = "(1) Q: Is the dog black? A: Yes. (True)"
        props = parse_stage2_output(raw)
        assert props[0].statement == "Is the dog black."

    @given(
        st.lists(
            st.builds(
                Proposition,
                statement=st.text(
                    alphabet=st.characters(blacklist_characters="?\nQA()", blacklist_categories=("Cs",)),
                    min_size=1,
                    max_size=30,
                ).map(lambda s: s.strip() or "s"),
                question=st.text(
                    alphabet=st.characters(blacklist_characters="?\n()", blacklist_categories=("Cs",)),
                    min_size=1,
                    max_size=30,
                ).map(lambda s: (s.strip() or "q") + "?"),
                truth_value=st.booleans(),
            ),
            min_size=1,
            max_size=5,
        )
    )
    def test_round_trip_canonical_emitter(self, props):
        parsed = parse_stage2_output(stage2_reasoner_text(props))
        assert [(p.question, p.truth_value) for p in parsed] == [
            (p.question, p.truth_value) for p in props
        ]


class TestYesNo:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("Yes.", True),
            ("yes", True),
            ("  YES, absolutely", True),
            ("no, the shirt is blue", False),
            ("No", False),
            ("**No**", False),
        ],
    )
    def test_clear_answers(self, raw, expected):
        assert parse_yes_no(raw) is expected

    @pytest.mark.parametrize("raw", ["maybe", "", "42", "不知道", "yesterday was fine? hardly"])
    def test_ambiguous(self, raw):
        if raw == "yesterday was fine? hardly":
            # first token is "yesterday", not "yes"
            with pytest.raises(AmbiguousAnswer):
                parse_yes_no(raw)
        else:
            with pytest.raises(AmbiguousAnswer):
                parse_yes_no(raw)

    @given(st.text(max_size=200))
    def test_never_crashes_on_unicode(self, raw):
        answer = classify_answer(raw)
        assert answer in (Answer.YES, Answer.NO, Answer.AMBIGUOUS)
        if answer is Answer.AMBIGUOUS:
            with pytest.raises(AmbiguousAnswer):
                parse_yes_no(raw)
        else:
            assert parse_yes_no(raw) is (answer is Answer.YES)

    def test_answer_matches_semantics(self):
        assert Answer.YES.matches(True) and not Answer.YES.matches(False)
        assert Answer.NO.matches(False) and not Answer.NO.matches(True)
        assert not Answer.AMBIGUOUS.matches(True) and not Answer.AMBIGUOUS.matches(False)


class TestEvaluatorParse:
    def test_yes_with_justification(self):
        accepted, justification = parse_evaluator_output("ANSWER: Yes\nThe dog is now black.")
        assert accepted is True
        assert justification == "The dog is now black."

    def test_no(self):
        accepted, justification = parse_evaluator_output("ANSWER: No\nStill a white dog.")
        assert accepted is False
        assert justification == "Still a white dog."

    def test_missing_answer_line(self):
        with pytest.raises(AmbiguousAnswer):
            parse_evaluator_output("The image shows a dog that might be black.")

    def test_answer_line_not_first(self):
        accepted, justification = parse_evaluator_output(
            "Let me look closely.\nANSWER: Yes\nMatches."
        )
        assert accepted is True and justification == "Matches."

    def test_bracketed_token(self):
        accepted, _ = parse_evaluator_output("ANSWER: [Yes]\nok")
        assert accepted is True

    def test_garbled_answer_token(self):
        with pytest.raises(AmbiguousAnswer):
            parse_evaluator_output("ANSWER: unclear\nhmm")
