from __future__ import annotations

import itertools
import json
import random
from pathlib import Path

import pytest

from oracles import majority_oracle
from vifforge.errors import (
    ContractError,
    ParseError,
    ReplyFormatError,
    SchemaError,
    TransportError,
)
from vifforge.evalharness import (
    AggregatedVerdict,
    AgreementMatrix,
    HumanBallots,
    JudgeVerdict,
    MockJudge,
    NormalizationRules,
    Outcome,
    PreferenceItem,
    VqaItem,
    agreement,
    aggregate_human,
    build_judge_prompt,
    default_rules,
    judge_pair,
    largest_remainder_percentages,
    load_preference_items,
    load_rules,
    load_vqa_items,
    normalize_answer,
    parse_judge_reply,
    preference_summary,
    run_judgements,
    score_accuracy,
    swap_item,
    truncate_words,
)

A, T, B = Outcome.A_WINS, Outcome.TIE, Outcome.B_WINS


# -------------------------------------------------------------- normalization


def test_base_normalization_casefold_and_punctuation() -> None:
    rules = NormalizationRules()
    assert normalize_answer("  Yes!!  ", "en", rules) == "yes"
    assert normalize_answer("A   red\tcar.", "en", rules) == "a red car"


def test_base_normalization_composes_nfc() -> None:
    rules = NormalizationRules()
    decomposed = "café"
    composed = "café"
    assert normalize_answer(decomposed, "en", rules) == normalize_answer(
        composed, "en", rules
    )


def test_default_rules_korean_yes_class() -> None:
    rules = default_rules()
    for surface in ("네", "예", "Yes", "yes."):
        assert normalize_answer(surface, "ko", rules) == "yes"
    for surface in ("아니요", "아니오", "No"):
        assert normalize_answer(surface, "ko", rules) == "no"


def test_default_rules_chinese_classes() -> None:
    rules = default_rules()
    assert normalize_answer("是的", "zh", rules) == "yes"
    assert normalize_answer("不是", "zh", rules) == "no"
    assert normalize_answer("不", "zh", rules) == "no"


def test_equivalence_is_language_scoped() -> None:
    rules = default_rules()
    # the Korean class must not leak into English-language items
    assert normalize_answer("네", "en", rules) == "네"


def test_cross_class_collision_rejected() -> None:
    with pytest.raises(ContractError) as excinfo:
        NormalizationRules(classes={"ko": [["yes", "네"], ["no", "네"]]})
    assert "two equivalence classes" in str(excinfo.value)


def test_empty_class_rejected() -> None:
    with pytest.raises(ContractError):
        NormalizationRules(classes={"en": [[]]})


def test_load_rules_round_trip(tmp_path: Path) -> None:
    path = tmp_path / "rules.json"
    path.write_text(
        json.dumps({"classes": {"ko": [["yes", "네"]]}}), encoding="utf-8"
    )
    rules = load_rules(path)
    assert normalize_answer("네", "ko", rules) == "yes"
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(ParseError):
        load_rules(bad)


def vqa(qid: str, gold: tuple[str, ...], pred: str, lang: str = "ko") -> VqaItem:
    return VqaItem(
        question_id=qid,
        language=lang,
        question="q",
        gold_answers=gold,
        prediction=pred,
    )


def test_score_accuracy_hand_fixture() -> None:
    rules = default_rules()
    items = [
        vqa("q1", ("네",), "yes"),
        vqa("q2", ("아니요",), "예"),
        vqa("q3", ("고양이",), "고양이!"),
        vqa("q4", ("강아지",), "고양이"),
    ]
    report = score_accuracy(items, rules)
    assert report.correct == 2
    assert report.total == 4
    assert report.accuracy == 0.5
    assert report.to_dict()["per_item"] == {
        "q1": True,
        "q2": False,
        "q3": True,
        "q4": False,
    }


def test_score_accuracy_interchangeable_surface_forms() -> None:
    # swapping every gold/prediction for another member of its class cannot
    # change any per-item result
    rules = default_rules()
    surfaces = {"yes": ["yes", "네", "예"], "no": ["no", "아니요", "아니오"]}
    rng = random.Random(11)
    canonical = [
        vqa(f"q{i}", (rng.choice(["yes", "no"]),), rng.choice(["yes", "no"]))
        for i in range(20)
    ]
    baseline = score_accuracy(canonical, rules).to_dict()["per_item"]
    for trial in range(5):
        relabeled = [
            vqa(
                item.question_id,
                tuple(rng.choice(surfaces[g]) for g in item.gold_answers),
                rng.choice(surfaces[item.prediction]),
            )
            for item in canonical
        ]
        assert score_accuracy(relabeled, rules).to_dict()["per_item"] == baseline


def test_score_accuracy_empty_is_error() -> None:
    with pytest.raises(ContractError):
        score_accuracy([], default_rules())


def test_gold_answers_must_be_non_empty() -> None:
    with pytest.raises(ContractError):
        vqa("q1", (), "yes")


def test_truncate_words() -> None:
    assert truncate_words("one two  three four", 3) == "one two three"
    assert truncate_words("short", 10) == "short"
    with pytest.raises(ContractError):
        truncate_words("x", 0)


# ------------------------------------------------------------------- judging


def pref(item_id: str, a: str, b: str, limit: int | None = None) -> PreferenceItem:
    return PreferenceItem(
        item_id=item_id,
        image="img://x",
        question="what is shown?",
        answer_a=a,
        answer_b=b,
        model_a="left-model",
        model_b="right-model",
        word_limit=limit,
    )


def test_swap_item_swaps_answers_and_models() -> None:
    item = pref("i1", "aa", "bb")
    swapped = swap_item(item)
    assert (swapped.answer_a, swapped.answer_b) == ("bb", "aa")
    assert (swapped.model_a, swapped.model_b) == ("right-model", "left-model")
    assert swap_item(swapped) == item


def test_parse_judge_reply_grammar() -> None:
    assert parse_judge_reply("reasoning...\nVERDICT: A\n") is A
    assert parse_judge_reply("verdict: b") is B
    assert parse_judge_reply("VERDICT: TIE") is T
    # the last verdict line wins when the judge changes its mind
    assert parse_judge_reply("VERDICT: A\nwait.\nVERDICT: B") is B


def test_parse_judge_reply_phrase_fallbacks() -> None:
    assert parse_judge_reply("Both answers are similar in quality.") is T
    assert parse_judge_reply("Answer A is better overall.") is A
    assert parse_judge_reply("answer b is better here") is B
    # tie phrasing outranks the preference phrasing when both appear
    assert parse_judge_reply("a is better? no, both similar really") is T


def test_parse_judge_reply_failure_keeps_raw() -> None:
    with pytest.raises(ReplyFormatError) as excinfo:
        parse_judge_reply("no decision forthcoming")
    assert excinfo.value.raw_reply == "no decision forthcoming"


def test_mock_judge_longer_answer_wins() -> None:
    judge = MockJudge()
    reply = judge.complete(build_judge_prompt("q", "a long answer", "meh"), "")
    assert parse_judge_reply(reply) is A
    reply = judge.complete(build_judge_prompt("q", "meh", "a long answer"), "")
    assert parse_judge_reply(reply) is B
    reply = judge.complete(build_judge_prompt("q", "same", "size"), "")
    assert parse_judge_reply(reply) is T


def test_judge_pair_outcome_is_position_independent() -> None:
    # answer_a is strictly longer, so the original-frame outcome must be
    # A_WINS no matter which side it was shown on
    judge = MockJudge()
    saw_swap = {True: 0, False: 0}
    for i in range(40):
        verdict = judge_pair(pref(f"item-{i}", "a much longer answer", "short"), judge)
        assert verdict.outcome is A
        saw_swap[verdict.swapped] += 1
    assert saw_swap[True] > 0 and saw_swap[False] > 0


def test_judge_pair_swap_depends_only_on_seed_and_id() -> None:
    judge = MockJudge()
    first = judge_pair(pref("stable-id", "aaaa", "bb"), judge, seed=7)
    second = judge_pair(pref("stable-id", "aaaa", "bb"), judge, seed=7)
    assert first == second
    other_seed = judge_pair(pref("stable-id", "aaaa", "bb"), judge, seed=8)
    assert other_seed.seed == 8


def test_judge_pair_word_limit_applies_before_judging() -> None:
    judge = MockJudge()
    # untruncated, A wins on length; truncated to one word, B's word is longer
    item = pref("lim-1", "tiny word plus many more words", "gigantic", limit=1)
    verdict = judge_pair(item, judge)
    assert verdict.outcome is B


def test_judge_pair_retries_then_succeeds() -> None:
    judge = MockJudge(fail_times=2)
    verdict = judge_pair(pref("r1", "longer answer", "x"), judge, max_retries=2)
    assert verdict.outcome is A
    assert judge.calls == 3


def test_judge_pair_exhausted_retries() -> None:
    judge = MockJudge(fail_times=5)
    with pytest.raises(TransportError) as excinfo:
        judge_pair(pref("r2", "longer answer", "x"), judge, max_retries=2)
    assert excinfo.value.attempts == 3
    assert "'r2'" in str(excinfo.value)


def test_run_judgements_preserves_item_order() -> None:
    items = [pref(f"o{i}", "long answer text", "x") for i in range(8)]
    verdicts = run_judgements(items, MockJudge(), parallelism=3)
    assert [v.item_id for v in verdicts] == [f"o{i}" for i in range(8)]
    with pytest.raises(ContractError):
        run_judgements(items, MockJudge(), parallelism=0)
    assert run_judgements([], MockJudge()) == []


def test_swapping_every_item_mirrors_the_summary() -> None:
    rng = random.Random(3)
    items = []
    for i in range(30):
        a = "word " * rng.randrange(1, 6)
        b = "word " * rng.randrange(1, 6)
        items.append(pref(f"s{i}", a.strip(), b.strip()))
    forward = preference_summary(run_judgements(items, MockJudge(), seed=1))
    backward = preference_summary(
        run_judgements([swap_item(item) for item in items], MockJudge(), seed=1)
    )
    fc, bc = dict(forward.counts), dict(backward.counts)
    assert fc["a_wins"] == bc["b_wins"]
    assert fc["b_wins"] == bc["a_wins"]
    assert fc["tie"] == bc["tie"]


def test_verdict_to_dict() -> None:
    verdict = JudgeVerdict(item_id="v1", outcome=B, rationale="why", swapped=True, seed=4)
    assert verdict.to_dict() == {
        "item_id": "v1",
        "outcome": "b_wins",
        "rationale": "why",
        "swapped": True,
        "seed": 4,
    }


def test_outcome_parse() -> None:
    assert Outcome.parse(" A_WINS ") is A
    assert Outcome.parse("tie") is T
    with pytest.raises(ContractError):
        Outcome.parse("draw")


# -------------------------------------------------------- human aggregation


def test_aggregate_human_exhaustive_against_oracle() -> None:
    for votes in itertools.product((A, T, B), repeat=3):
        ballots = HumanBallots(item_id="x", votes=votes)
        assert aggregate_human(ballots).outcome is majority_oracle(votes), votes


def test_aggregate_human_vote_order_irrelevant() -> None:
    for votes in itertools.product((A, T, B), repeat=3):
        outcomes = {
            aggregate_human(HumanBallots(item_id="x", votes=p)).outcome
            for p in itertools.permutations(votes)
        }
        assert len(outcomes) == 1


def test_aggregate_human_rules() -> None:
    assert aggregate_human(HumanBallots("a", (A, A, B))).outcome is A
    assert aggregate_human(HumanBallots("b", (B, T, B))).outcome is B
    assert aggregate_human(HumanBallots("c", (A, T, B))).outcome is T


def test_ballots_require_exactly_three_votes() -> None:
    with pytest.raises(ContractError):
        HumanBallots(item_id="x", votes=(A, B))  # type: ignore[arg-type]


# ------------------------------------------------------------------ agreement


def jv(item_id: str, outcome: Outcome) -> JudgeVerdict:
    return JudgeVerdict(item_id=item_id, outcome=outcome)


def hv(item_id: str, outcome: Outcome) -> AggregatedVerdict:
    return AggregatedVerdict(item_id=item_id, outcome=outcome)


def test_agreement_hand_fixture() -> None:
    judge = [jv("1", A), jv("2", A), jv("3", B), jv("4", T)]
    human = [hv("1", A), hv("2", B), hv("3", B), hv("4", T)]
    matrix = agreement(judge, human)
    assert matrix.cell(A, A) == 1
    assert matrix.cell(A, B) == 1
    assert matrix.cell(B, B) == 1
    assert matrix.cell(T, T) == 1
    assert matrix.total() == 4
    assert matrix.rate(A) == 0.5
    assert matrix.rate(B) == 1.0
    assert matrix.judge_marginals() == {A: 2, T: 1, B: 1}
    assert matrix.human_marginals() == {A: 1, T: 1, B: 2}


def test_agreement_rate_none_when_judge_never_said_it() -> None:
    matrix = agreement([jv("1", A)], [hv("1", A)])
    assert matrix.rate(B) is None
    assert matrix.to_dict()["rates"]["b_wins"] is None


def test_agreement_marginals_property() -> None:
    rng = random.Random(17)
    outcomes = (A, T, B)
    judge = [jv(f"i{n}", rng.choice(outcomes)) for n in range(60)]
    human = [hv(f"i{n}", rng.choice(outcomes)) for n in range(60)]
    matrix = agreement(judge, human)
    assert sum(matrix.judge_marginals().values()) == 60
    assert sum(matrix.human_marginals().values()) == 60
    for outcome in outcomes:
        expected = sum(1 for v in judge if v.outcome is outcome)
        assert matrix.judge_marginals()[outcome] == expected


def test_agreement_duplicate_ids_rejected() -> None:
    with pytest.raises(ContractError):
        agreement([jv("1", A), jv("1", B)], [hv("1", A)])


def test_agreement_item_set_mismatch_names_both_sides() -> None:
    with pytest.raises(ContractError) as excinfo:
        agreement([jv("1", A), jv("2", B)], [hv("1", A), hv("3", T)])
    message = str(excinfo.value)
    assert "item sets differ" in message
    assert "judge-only: ['2']" in message
    assert "human-only: ['3']" in message


def test_agreement_negative_cells_rejected() -> None:
    with pytest.raises(ContractError):
        AgreementMatrix({(A, A): -1})


# ---------------------------------------------------------------- percentages


def test_largest_remainder_hand_case() -> None:
    assert largest_remainder_percentages([42, 17, 31]) == [46.7, 18.9, 34.4]


def test_largest_remainder_sums_to_hundred() -> None:
    rng = random.Random(23)
    for _ in range(50):
        counts = [rng.randrange(0, 40) for _ in range(rng.randrange(2, 6))]
        if sum(counts) == 0:
            counts[0] = 1
        shares = largest_remainder_percentages(counts)
        assert round(sum(shares), 6) == 100.0
        assert all(s >= 0 for s in shares)


def test_largest_remainder_exact_thirds() -> None:
    # ties on the remainder go to earlier entries
    assert largest_remainder_percentages([1, 1, 1]) == [33.4, 33.3, 33.3]


def test_largest_remainder_errors() -> None:
    with pytest.raises(ContractError):
        largest_remainder_percentages([0, 0])
    with pytest.raises(ContractError):
        largest_remainder_percentages([-1, 2])


def test_preference_summary_counts_and_percentages() -> None:
    verdicts = [jv("1", A), jv("2", A), jv("3", B), jv("4", T), jv("5", A)]
    summary = preference_summary(verdicts, model_a="m1", model_b="m2")
    data = summary.to_dict()
    assert data["counts"] == {"a_wins": 3, "tie": 1, "b_wins": 1}
    assert data["percentages"] == {"a_wins": 60.0, "tie": 20.0, "b_wins": 20.0}
    assert data["model_a"] == "m1"
    with pytest.raises(ContractError):
        preference_summary([])


# -------------------------------------------------------------------- loaders


def write_jsonl(path: Path, records: list[dict]) -> None:
    path.write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records),
        encoding="utf-8",
    )


def test_load_vqa_items_joins_on_question_id(tmp_path: Path) -> None:
    gold = tmp_path / "gold.jsonl"
    preds = tmp_path / "preds.jsonl"
    write_jsonl(
        gold,
        [
            {"question_id": "q1", "language": "ko", "gold_answers": ["네"]},
            {"question_id": "q2", "language": "en", "gold_answers": ["cat", "a cat"]},
        ],
    )
    write_jsonl(
        preds,
        [
            {"question_id": "q2", "prediction": "A cat."},
            {"question_id": "q1", "prediction": "예"},
        ],
    )
    items = load_vqa_items(gold, preds)
    assert [item.question_id for item in items] == ["q1", "q2"]
    report = score_accuracy(items, default_rules())
    assert report.correct == 2


def test_load_vqa_items_orphans_rejected(tmp_path: Path) -> None:
    gold = tmp_path / "gold.jsonl"
    preds = tmp_path / "preds.jsonl"
    write_jsonl(gold, [{"question_id": "q1", "gold_answers": ["x"]}])
    write_jsonl(preds, [])
    with pytest.raises(ContractError) as excinfo:
        load_vqa_items(gold, preds)
    assert "no prediction for question 'q1'" in str(excinfo.value)

    write_jsonl(preds, [{"question_id": "q1", "prediction": "x"},
                        {"question_id": "q9", "prediction": "y"}])
    with pytest.raises(ContractError) as excinfo:
        load_vqa_items(gold, preds)
    assert "predictions without gold entries: q9" in str(excinfo.value)


def test_load_preference_items(tmp_path: Path) -> None:
    path = tmp_path / "items.jsonl"
    write_jsonl(
        path,
        [
            {
                "item_id": "p1",
                "question": "q?",
                "answer_a": "aa",
                "answer_b": "bb",
                "model_a": "m1",
                "model_b": "m2",
                "word_limit": 5,
            }
        ],
    )
    items = load_preference_items(path)
    assert items[0].word_limit == 5
    assert items[0].model_b == "m2"
    bad = tmp_path / "bad.jsonl"
    write_jsonl(bad, [{"item_id": "p2", "question": "q?"}])
    with pytest.raises(SchemaError):
        load_preference_items(bad)
