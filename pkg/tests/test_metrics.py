import math
import random

import pytest

from granolaqa.dataset import EntityRef, Prediction, QAExample
from granolaqa.errors import EvaluationError, ValidationError
from granolaqa.metrics import (
    EvalConfig,
    MatchResult,
    evaluate_corpus,
    find_match_index,
    granola_accuracy,
    informativeness,
    is_idk,
    standard_accuracy,
    stratify,
)

LN2 = math.log(2.0)


def _example(eid, answers, relation="P19", popularity=None):
    return QAExample(
        id=eid,
        question=f"question {eid}",
        relation=relation,
        entity=EntityRef(surface=eid),
        answers=tuple(tuple(level) for level in answers),
        popularity=popularity,
    )


def test_eval_config_validation():
    with pytest.raises(ValidationError):
        EvalConfig(tau=0.0)
    with pytest.raises(ValidationError):
        EvalConfig(tau=1.5)
    with pytest.raises(ValidationError):
        EvalConfig(lambda_=-0.1)
    with pytest.raises(ValidationError):
        EvalConfig(idk_markers=frozenset())


def test_idk_markers_normalized():
    config = EvalConfig(idk_markers=frozenset({"I don't know", "IDK"}))
    assert is_idk("idk", config)
    assert is_idk("I don't know.", config)
    assert not is_idk("I don't know the answer", config)
    assert not is_idk(None, config)


def test_find_match_index_smallest_level(barbican_example):
    match = find_match_index("London", barbican_example, 0.8)
    assert match.matched_level == 2
    assert match.matched_answer == "London"
    assert match.score == 1.0


def test_find_match_index_level_one_self_match(barbican_example):
    match = find_match_index("Barbican Centre", barbican_example, 0.8)
    assert match.matched_level == 1
    assert match.score == 1.0


def test_find_match_index_no_match(barbican_example):
    match = find_match_index("Tokyo", barbican_example, 0.8)
    assert match.matched_level is None
    assert match.matched_answer is None
    assert match.score == 0.0


def test_find_match_index_reports_best_alias_first_on_ties():
    example = _example("tie", [["alpha beta", "beta alpha"]])
    match = find_match_index("alpha beta", example, 0.8)
    assert match.matched_answer == "alpha beta"
    assert match.score == 1.0


def test_granola_accuracy_indicator():
    assert granola_accuracy(MatchResult(2, "x", 1.0)) == 1
    assert granola_accuracy(MatchResult(1, "x", 1.0)) == 1
    assert granola_accuracy(MatchResult(None, None, 0.0)) == 0


def test_informativeness_values():
    assert informativeness(MatchResult(1, "x", 1.0), 0.7) == 1.0
    assert informativeness(MatchResult(3, "x", 1.0), LN2) == pytest.approx(0.25, abs=1e-12)
    assert informativeness(MatchResult(None, None, 0.0), 0.5) == 0.0


def test_informativeness_monotone_in_level_and_lambda():
    for lam in (0.1, LN2, 2.0):
        values = [informativeness(MatchResult(level, "x", 1.0), lam) for level in range(1, 6)]
        assert values == sorted(values, reverse=True)
    # level 1 invariant in lambda, deeper levels strictly decreasing
    assert informativeness(MatchResult(1, "x", 1.0), 0.1) == informativeness(
        MatchResult(1, "x", 1.0), 3.0
    )
    assert informativeness(MatchResult(2, "x", 1.0), 0.1) > informativeness(
        MatchResult(2, "x", 1.0), 3.0
    )


def test_informativeness_equals_accuracy_at_zero_lambda():
    assert informativeness(MatchResult(4, "x", 1.0), 0.0) == 1.0


def test_standard_accuracy_level_one_only(fiona_example):
    assert standard_accuracy("Westcliff-on-Sea", fiona_example, 0.8) == 1
    assert standard_accuracy("Essex", fiona_example, 0.8) == 0
    assert granola_accuracy(find_match_index("Essex", fiona_example, 0.8)) == 1
    assert standard_accuracy("IDK", fiona_example, 0.8) == 0


def _four_prediction_corpus(barbican_example):
    examples = [
        barbican_example,
        _example("two", [["fine two"], ["coarse two"]]),
        _example("three", [["fine three"]]),
        _example("four", [["fine four"]]),
    ]
    predictions = [
        Prediction(example_id="barbican", method="m", answer="The Barbican"),
        Prediction(example_id="two", method="m", answer="coarse two"),
        Prediction(example_id="three", method="m", answer="wrong"),
        Prediction(example_id="four", method="m", idk=True),
    ]
    return predictions, examples


def test_evaluate_corpus_hand_counted(barbican_example):
    predictions, examples = _four_prediction_corpus(barbican_example)
    report = evaluate_corpus(predictions, examples, EvalConfig())
    assert report.n_total == 4
    assert report.n_idk == 1
    assert report.n_nonidk == 3
    assert report.accuracy_granola == pytest.approx(0.5)
    assert report.selective_accuracy_granola == pytest.approx(2 / 3)
    assert report.match_level_histogram["1"] == pytest.approx(0.25)
    assert report.match_level_histogram["2"] == pytest.approx(0.25)
    assert report.match_level_histogram["idk"] == pytest.approx(0.25)
    assert report.match_level_histogram["error"] == pytest.approx(0.25)
    assert sum(report.match_level_histogram.values()) == pytest.approx(1.0, abs=1e-9)


def test_evaluate_corpus_all_idk():
    examples = [_example("a", [["x"]]), _example("b", [["y"]])]
    predictions = [
        Prediction(example_id="a", method="m", idk=True),
        Prediction(example_id="b", method="m", answer="IDK"),
    ]
    report = evaluate_corpus(predictions, examples)
    assert report.n_nonidk == 0
    assert report.selective_accuracy_granola == 0.0
    assert report.mean_informativeness == 0.0
    assert report.match_level_histogram["idk"] == 1.0


def test_evaluate_corpus_single_correct():
    examples = [_example("a", [["right"]])]
    predictions = [Prediction(example_id="a", method="m", answer="right")]
    report = evaluate_corpus(predictions, examples)
    assert report.accuracy_standard == 1.0
    assert report.accuracy_granola == 1.0
    assert report.selective_accuracy_granola == 1.0
    assert report.mean_informativeness == 1.0
    assert report.knowledge_gap == 0.0


def test_evaluate_corpus_empty():
    report = evaluate_corpus([], [])
    assert report.n_total == 0
    assert report.match_level_histogram == {}


def test_evaluate_corpus_unresolved_id():
    with pytest.raises(EvaluationError):
        evaluate_corpus([Prediction(example_id="ghost", method="m", answer="x")], [])


def test_evaluate_corpus_duplicate_prediction():
    examples = [_example("a", [["x"]])]
    predictions = [
        Prediction(example_id="a", method="m", answer="x"),
        Prediction(example_id="a", method="m", answer="y"),
    ]
    with pytest.raises(EvaluationError):
        evaluate_corpus(predictions, examples)


def test_evaluate_corpus_permutation_invariant(barbican_example):
    predictions, examples = _four_prediction_corpus(barbican_example)
    forward = evaluate_corpus(predictions, examples)
    backward = evaluate_corpus(list(reversed(predictions)), examples)
    assert forward == backward


def test_dominance_random_pairs():
    rng = random.Random(99)
    words = ["rock", "jazz", "essex", "city", "label", "born", "blue"]
    for _ in range(1000):
        levels = []
        for level_no in range(rng.randint(1, 4)):
            levels.append([f"{rng.choice(words)} {level_no} {i}" for i in range(rng.randint(1, 3))])
        example = _example("x", levels)
        roll = rng.random()
        if roll < 0.4:
            level = rng.randrange(len(levels))
            prediction = rng.choice(levels[level])
        elif roll < 0.7:
            prediction = rng.choice(words)
        else:
            prediction = "unrelated thing"
        tau = rng.uniform(0.05, 1.0)
        assert granola_accuracy(find_match_index(prediction, example, tau)) >= standard_accuracy(
            prediction, example, tau
        )


def test_stratify_relation_key(fiona_example):
    examples = [
        fiona_example,
        _example("courage", [["Rock Records"], ["a Taiwanese record label"]], relation="P264"),
        _example("hayek", [["Friedrich Hayek"], ["an economist"]], relation="P40"),
        _example("rice", [["Elmer Rice"], ["a playwright"]], relation="P50"),
        _example("shapshak", [["Rhodes University"], ["South Africa"]], relation="P69"),
    ]
    predictions = [
        Prediction(example_id=example.id, method="m", answer=example.answers[0][0])
        for example in examples
    ]
    report = stratify(predictions, examples, "relation")
    assert list(report.strata.keys()) == ["P19", "P264", "P40", "P50", "P69"]
    assert report.strata_key == "relation"
    for stratum in report.strata.values():
        assert stratum.n_total == 1
        assert stratum.accuracy_granola == 1.0


def test_stratify_popularity_equal_bins():
    examples = [_example(f"e{i}", [["right"]], popularity=i * 10) for i in range(100)]
    predictions = [Prediction(example_id=f"e{i}", method="m", answer="right") for i in range(100)]
    report = stratify(predictions, examples, "popularity", bins=5)
    assert len(report.strata) == 5
    assert all(stratum.n_total == 20 for stratum in report.strata.values())
    assert list(report.strata.keys()) == ["bin01", "bin02", "bin03", "bin04", "bin05"]


def test_stratify_popularity_ascending_order():
    examples = [_example(f"e{i}", [["right"]], popularity=1000 - i) for i in range(10)]
    predictions = [
        Prediction(example_id=f"e{i}", method="m", answer="right" if i < 5 else "wrong")
        for i in range(10)
    ]
    report = stratify(predictions, examples, "popularity", bins=2)
    # bin01 holds the lowest popularity values, which are the wrong answers here
    assert report.strata["bin01"].accuracy_granola == 0.0
    assert report.strata["bin02"].accuracy_granola == 1.0


def test_stratify_popularity_ties_share_a_bin():
    examples = [_example(f"e{i}", [["right"]], popularity=42) for i in range(30)]
    predictions = [Prediction(example_id=f"e{i}", method="m", answer="right") for i in range(30)]
    report = stratify(predictions, examples, "popularity", bins=5)
    assert len(report.strata) == 1
    assert report.strata["bin01"].n_total == 30


def test_stratify_popularity_unknown_stratum():
    examples = [
        _example("a", [["right"]], popularity=5),
        _example("b", [["right"]]),
    ]
    predictions = [
        Prediction(example_id="a", method="m", answer="right"),
        Prediction(example_id="b", method="m", answer="right"),
    ]
    report = stratify(predictions, examples, "popularity", bins=2)
    assert "unknown" in report.strata
    assert report.strata["unknown"].n_total == 1


def test_stratify_unknown_key():
    with pytest.raises(EvaluationError):
        stratify([], [], "color")


def test_report_to_dict_round_structure(barbican_example):
    predictions, examples = _four_prediction_corpus(barbican_example)
    report = stratify(predictions, examples, "relation")
    document = report.to_dict()
    assert document["n_total"] == 4
    assert document["strata_key"] == "relation"
    assert set(document["strata"]) == {"P159", "P19"}
    assert "strata" not in document["strata"]["P19"]
