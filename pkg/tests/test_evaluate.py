from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from counterreact.evaluate import (
    ErrorRecord,
    cohen_kappa,
    confusion,
    error_report,
    mcnemar,
    prf,
    render_error_report,
    render_metrics,
    round2,
)


def test_confusion_hand_count():
    matrix = confusion(["a", "a", "b"], ["a", "b", "b"], ["a", "b"])
    assert matrix.counts == ((1, 1), (0, 1))


def test_confusion_diagonal_when_equal():
    labels = ["x", "y", "x", "z"]
    matrix = confusion(labels, labels, ["x", "y", "z"])
    assert matrix.counts == ((2, 0, 0), (0, 1, 0), (0, 0, 1))


def test_confusion_rejects_mismatch_and_unknown():
    with pytest.raises(ValueError):
        confusion(["a"], ["a", "b"], ["a", "b"])
    with pytest.raises(ValueError):
        confusion(["a"], ["q"], ["a", "b"])


def test_confusion_matches_counting_oracle():
    rng = random.Random(2)
    classes = ["a", "b", "c"]
    for _ in range(1000):
        n = rng.randint(1, 12)
        gold = [rng.choice(classes) for _ in range(n)]
        pred = [rng.choice(classes) for _ in range(n)]
        matrix = confusion(gold, pred, classes)
        for i, gi in enumerate(classes):
            for j, pj in enumerate(classes):
                assert matrix.counts[i][j] == sum(
                    1 for g, p in zip(gold, pred) if g == gi and p == pj
                )


def test_prf_constant_reentry_predictor_row():
    gold = ["reentry"] * 694 + ["no_reentry"] * 306
    pred = ["reentry"] * 1000
    report = prf(confusion(gold, pred, ["reentry", "no_reentry"]))
    rendered = (
        round2(report.precision[0]), round2(report.recall[0]), round2(report.f1[0]),
        round2(report.precision[1]), round2(report.recall[1]), round2(report.f1[1]),
        round2(report.weighted_precision), round2(report.weighted_recall),
        round2(report.weighted_f1),
    )
    assert rendered == (0.69, 1.00, 0.82, 0.00, 0.00, 0.00, 0.48, 0.69, 0.57)


def test_prf_constant_non_hateful_predictor_row():
    gold = ["non_hateful"] * 480 + ["hateful"] * 200 + ["no_reentry"] * 320
    pred = ["non_hateful"] * 1000
    report = prf(confusion(gold, pred, ["hateful", "non_hateful", "no_reentry"]))
    by_class = dict(zip(report.classes, zip(report.precision, report.recall, report.f1)))
    p, r, f = by_class["non_hateful"]
    assert (round2(p), round2(r), round2(f)) == (0.48, 1.00, 0.65)
    assert (round2(report.weighted_precision), round2(report.weighted_recall),
            round2(report.weighted_f1)) == (0.23, 0.48, 0.31)


def test_prf_hand_matrix():
    from counterreact.evaluate import ConfusionMatrix

    matrix = ConfusionMatrix(("a", "b"), ((2, 1), (0, 3)))
    report = prf(matrix)
    assert report.precision == (1.0, 0.75)
    assert report.recall == pytest.approx((2 / 3, 1.0))
    assert report.f1 == pytest.approx((0.8, 6 / 7))
    assert report.weighted_f1 == pytest.approx((3 * 0.8 + 3 * 6 / 7) / 6)


def test_prf_weighted_recall_is_accuracy():
    rng = random.Random(7)
    for _ in range(500):
        k = rng.randint(2, 5)
        counts = [[rng.randint(0, 20) for _ in range(k)] for _ in range(k)]
        if sum(map(sum, counts)) == 0:
            counts[0][0] = 1
        from counterreact.evaluate import ConfusionMatrix

        matrix = ConfusionMatrix(tuple(range(k)), tuple(tuple(r) for r in counts))
        report = prf(matrix)
        trace = sum(counts[i][i] for i in range(k))
        assert report.weighted_recall == trace / matrix.total  # exact
        assert report.accuracy == report.weighted_recall


def test_prf_matches_per_item_oracle():
    rng = random.Random(12)
    classes = ["x", "y", "z"]
    for _ in range(200):
        n = rng.randint(1, 30)
        gold = [rng.choice(classes) for _ in range(n)]
        pred = [rng.choice(classes) for _ in range(n)]
        report = prf(confusion(gold, pred, classes))
        for i, cls in enumerate(classes):
            tp = sum(1 for g, p in zip(gold, pred) if g == cls and p == cls)
            fp = sum(1 for g, p in zip(gold, pred) if g != cls and p == cls)
            fn = sum(1 for g, p in zip(gold, pred) if g == cls and p != cls)
            precision = tp / (tp + fp) if tp + fp else 0.0
            recall = tp / (tp + fn) if tp + fn else 0.0
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            assert report.precision[i] == precision
            assert report.recall[i] == recall
            assert report.f1[i] == f1


def test_prf_empty_matrix_rejected():
    from counterreact.evaluate import ConfusionMatrix

    with pytest.raises(ValueError):
        prf(ConfusionMatrix(("a",), ((0,),)))


def test_mcnemar_identical_predictions():
    gold = [0, 1, 0, 1]
    result = mcnemar(gold, [0, 1, 1, 1], [0, 1, 1, 1])
    assert result.b == result.c == 0
    assert result.p_value == 1.0
    assert result.method == "degenerate"


def test_mcnemar_exact_small_counts():
    gold = [0] * 12 + [1] * 8
    pred_a = [0] * 12 + [1] * 8          # all correct
    pred_b = [1] * 10 + [0, 0] + [0, 0] + [1] * 6  # wrong on 10 golds=0, 2 golds=1
    result = mcnemar(gold, pred_a, pred_b)
    assert (result.b, result.c) == (12, 0)
    # direct construction of b=10, c=2 via vectors
    gold = [0] * 12
    pred_a = [0] * 10 + [1, 1]
    pred_b = [1] * 10 + [0, 0]
    result = mcnemar(gold, pred_a, pred_b)
    assert (result.b, result.c) == (10, 2)
    assert result.method == "exact"
    assert result.statistic == pytest.approx(49 / 12)
    oracle = 2 * Fraction(sum(math.comb(12, i) for i in range(3)), 2**12)
    assert result.p_value == pytest.approx(float(oracle), abs=1e-12)
    assert result.p_value < 0.05


def test_mcnemar_chi_square_large_counts():
    gold = [0] * 40
    pred_a = [0] * 30 + [1] * 10
    pred_b = [1] * 30 + [0] * 10
    result = mcnemar(gold, pred_a, pred_b)
    assert (result.b, result.c) == (30, 10)
    assert result.method == "chi2"
    assert result.statistic == pytest.approx(19**2 / 40)
    assert result.p_value == pytest.approx(math.erfc(math.sqrt(result.statistic / 2)))


def test_mcnemar_symmetry():
    rng = random.Random(3)
    for _ in range(100):
        n = rng.randint(1, 60)
        gold = [rng.randint(0, 1) for _ in range(n)]
        pred_a = [rng.randint(0, 1) for _ in range(n)]
        pred_b = [rng.randint(0, 1) for _ in range(n)]
        fwd = mcnemar(gold, pred_a, pred_b)
        rev = mcnemar(gold, pred_b, pred_a)
        assert (fwd.b, fwd.c) == (rev.c, rev.b)
        assert fwd.p_value == pytest.approx(rev.p_value, abs=1e-15)


def test_mcnemar_exact_p_capped_at_one():
    gold = [0] * 8
    pred_a = [0] * 4 + [1] * 4
    pred_b = [1] * 4 + [0] * 4
    result = mcnemar(gold, pred_a, pred_b)
    assert (result.b, result.c) == (4, 4)
    assert result.p_value == 1.0


def test_kappa_perfect_two_classes():
    result = cohen_kappa(["y", "n", "y"], ["y", "n", "y"])
    assert result.agreement_rate == 1.0
    assert result.kappa == 1.0


def test_kappa_from_agreement_table():
    labels_a = ["p"] * 40 + ["p"] * 10 + ["n"] * 10 + ["n"] * 40
    labels_b = ["p"] * 40 + ["n"] * 10 + ["p"] * 10 + ["n"] * 40
    result = cohen_kappa(labels_a, labels_b)
    assert result.agreement_rate == pytest.approx(0.8)
    assert result.kappa == pytest.approx(0.6, abs=1e-12)


def test_kappa_chance_level_when_one_rater_constant():
    labels_a = ["y"] * 10
    labels_b = ["y"] * 5 + ["n"] * 5
    assert cohen_kappa(labels_a, labels_b).kappa == pytest.approx(0.0)


def test_kappa_degenerate_single_label():
    result = cohen_kappa(["y", "y"], ["y", "y"])
    assert result.kappa == 1.0


def test_kappa_length_mismatch():
    with pytest.raises(ValueError):
        cohen_kappa(["a"], ["a", "b"])


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=60))
def test_kappa_never_exceeds_one(pairs):
    labels_a = [a for a, _ in pairs]
    labels_b = [b for _, b in pairs]
    result = cohen_kappa(labels_a, labels_b)
    assert result.kappa <= 1.0 + 1e-12
    if result.agreement_rate == 1.0 and len(set(labels_a)) >= 2:
        assert result.kappa == pytest.approx(1.0)


def test_error_record_validation():
    with pytest.raises(ValueError):
        ErrorRecord("p1", "hateful", "hateful", "hateful", "FP", "negation")
    with pytest.raises(ValueError):
        ErrorRecord("p1", "hateful", "no_reentry", "hateful", "XX", "negation")
    with pytest.raises(ValueError):
        ErrorRecord("p1", "hateful", "no_reentry", "hateful", "FP", "gremlins")


def test_error_report_single_record():
    record = ErrorRecord("p1", "hateful", "non_hateful", "non_hateful", "FP", "negation")
    report = error_report([record])
    column = report["proportions"]["non_hateful/FP"]
    assert column["negation"] == 1.0
    assert sum(column.values()) == pytest.approx(1.0)
    assert report["proportions"]["non_hateful/FN"] is None


def test_error_report_overall_share():
    records = []
    for i in range(49):
        records.append(ErrorRecord(f"a{i}", "hateful", "no_reentry", "hateful", "FN",
                                   "rhetorical_question"))
    for i in range(51):
        records.append(ErrorRecord(f"b{i}", "no_reentry", "hateful", "hateful", "FP",
                                   "negation"))
    report = error_report(records)
    assert report["proportions"]["All"]["rhetorical_question"] == pytest.approx(0.49)
    assert report["proportions"]["All"]["negation"] == pytest.approx(0.51)


def test_error_report_columns_sum_to_one():
    rng = random.Random(1)
    causes = ["rhetorical_question", "negation", "sarcasm_irony", "other"]
    records = [
        ErrorRecord(f"p{i}", "x", "y", rng.choice(["hateful", "no_reentry"]),
                    rng.choice(["FP", "FN"]), rng.choice(causes))
        for i in range(60)
    ]
    report = error_report(records)
    for column, bucket in report["proportions"].items():
        if bucket is not None:
            assert sum(bucket.values()) == pytest.approx(1.0)


def test_error_report_empty():
    report = error_report([])
    assert report["columns"] == []
    assert "no error records" in render_error_report(report)


def test_render_rounding_convention():
    assert round2(0.005) == 0.01  # halves away from zero
    assert round2(0.8194) == 0.82
    assert round2(0.4816) == 0.48
    assert round2(0.125) == 0.13


def test_render_metrics_two_decimals():
    gold = ["a"] * 2 + ["b"]
    report = prf(confusion(gold, ["a", "b", "b"], ["a", "b"]))
    text = render_metrics(report)
    assert "| a | 1.00 | 0.50 | 0.67 | 2 |" in text
