"""Evaluation math: confusion matrices, per-class and weighted P/R/F1,
paired McNemar comparison, Cohen's kappa, and error-cause tabulation.

Raw values are kept at full precision; rendering rounds to two decimals,
halves away from zero.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Hashable, Optional, Sequence

ERROR_CAUSES = (
    "rhetorical_question",
    "negation",
    "sarcasm_irony",
    "intricate_text",
    "general_knowledge",
    "other",
)

ERROR_POLARITIES = ("FP", "FN")


def round2(value: float) -> float:
    """Two-decimal rounding, halves away from zero (render-time only)."""
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple[Hashable, ...]
    counts: tuple[tuple[int, ...], ...]  # rows = gold, cols = predicted

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def row_sum(self, i: int) -> int:
        return sum(self.counts[i])

    def col_sum(self, j: int) -> int:
        return sum(row[j] for row in self.counts)


def confusion(
    gold: Sequence[Hashable],
    pred: Sequence[Hashable],
    classes: Sequence[Hashable],
) -> ConfusionMatrix:
    """Count (gold, predicted) pairs into a square matrix."""
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} items, predictions {len(pred)}")
    position = {c: i for i, c in enumerate(classes)}
    if len(position) != len(classes):
        raise ValueError("duplicate class labels")
    counts = [[0] * len(classes) for _ in classes]
    for g, p in zip(gold, pred):
        if g not in position:
            raise ValueError(f"gold label {g!r} not in classes")
        if p not in position:
            raise ValueError(f"predicted label {p!r} not in classes")
        counts[position[g]][position[p]] += 1
    return ConfusionMatrix(tuple(classes), tuple(tuple(row) for row in counts))


@dataclass(frozen=True)
class MetricsReport:
    classes: tuple[Hashable, ...]
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    support: tuple[int, ...]
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float

    @property
    def accuracy(self) -> float:
        # identical to weighted recall by construction
        return self.weighted_recall

    def to_dict(self) -> dict:
        return {
            "classes": [str(c) for c in self.classes],
            "per_class": {
                str(c): {
                    "precision": self.precision[i],
                    "recall": self.recall[i],
                    "f1": self.f1[i],
                    "support": self.support[i],
                }
                for i, c in enumerate(self.classes)
            },
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
        }


def prf(matrix: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 plus support-weighted averages.

    Zero denominators yield zero metrics, so a never-predicted class scores
    0.00/0.00/0.00 rather than being dropped.
    """
    total = matrix.total
    if total == 0:
        raise ValueError("empty confusion matrix")
    k = len(matrix.classes)
    precision, recall, f1, support = [], [], [], []
    for i in range(k):
        diag = matrix.counts[i][i]
        col = matrix.col_sum(i)
        row = matrix.row_sum(i)
        p = diag / col if col else 0.0
        r = diag / row if row else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f)
        support.append(row)
    # support-share weighting; the recall numerator collapses to the trace,
    # which keeps weighted recall exactly equal to accuracy
    trace = sum(matrix.counts[i][i] for i in range(k))
    return MetricsReport(
        classes=matrix.classes,
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        support=tuple(support),
        weighted_precision=math.fsum(s * p for s, p in zip(support, precision)) / total,
        weighted_recall=trace / total,
        weighted_f1=math.fsum(s * f for s, f in zip(support, f1)) / total,
    )


def render_metrics(report: MetricsReport) -> str:
    """Markdown metrics table, two decimals."""
    lines = [
        "| Class | P | R | F1 | Support |",
        "|---|---|---|---|---|",
    ]
    for i, c in enumerate(report.classes):
        lines.append(
            f"| {c} | {round2(report.precision[i]):.2f} | {round2(report.recall[i]):.2f} "
            f"| {round2(report.f1[i]):.2f} | {report.support[i]} |"
        )
    lines.append(
        f"| weighted | {round2(report.weighted_precision):.2f} "
        f"| {round2(report.weighted_recall):.2f} | {round2(report.weighted_f1):.2f} "
        f"| {sum(report.support)} |"
    )
    return "\n".join(lines) + "\n"


def _chi2_sf_1df(x: float) -> float:
    return math.erfc(math.sqrt(x / 2.0))


@dataclass(frozen=True)
class McNemarResult:
    b: int  # first model right, second wrong
    c: int  # first model wrong, second right
    statistic: float
    p_value: float
    method: str  # "exact", "chi2", or "degenerate"


def mcnemar(
    gold: Sequence[Hashable],
    pred_a: Sequence[Hashable],
    pred_b: Sequence[Hashable],
) -> McNemarResult:
    """Paired comparison of two prediction vectors on the same items.

    Small discordant counts (b + c < 25) use the exact two-sided binomial;
    larger ones the continuity-corrected chi-square with one degree of
    freedom.
    """
    if not len(gold) == len(pred_a) == len(pred_b):
        raise ValueError("gold and both prediction vectors must align")
    b = sum(1 for g, x, y in zip(gold, pred_a, pred_b) if x == g and y != g)
    c = sum(1 for g, x, y in zip(gold, pred_a, pred_b) if x != g and y == g)
    n = b + c
    if n == 0:
        return McNemarResult(b, c, 0.0, 1.0, "degenerate")
    statistic = (abs(b - c) - 1) ** 2 / n
    if n < 25:
        tail = sum(math.comb(n, i) for i in range(min(b, c) + 1))
        p = min(1.0, 2.0 * tail / 2.0**n)
        return McNemarResult(b, c, statistic, p, "exact")
    return McNemarResult(b, c, statistic, _chi2_sf_1df(statistic), "chi2")


@dataclass(frozen=True)
class AgreementResult:
    agreement_rate: float
    kappa: float


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> AgreementResult:
    """Raw agreement and chance-corrected kappa between two labelings."""
    if len(labels_a) != len(labels_b):
        raise ValueError("label vectors must have equal length")
    n = len(labels_a)
    if n == 0:
        raise ValueError("label vectors must be non-empty")
    observed = sum(1 for x, y in zip(labels_a, labels_b) if x == y) / n
    categories = set(labels_a) | set(labels_b)
    expected = sum(
        (sum(1 for x in labels_a if x == cat) / n) * (sum(1 for y in labels_b if y == cat) / n)
        for cat in categories
    )
    if expected >= 1.0:
        # both raters constant on one label: perfect agreement by fiat
        kappa = 1.0 if observed == 1.0 else 0.0
    else:
        kappa = (observed - expected) / (1.0 - expected)
    return AgreementResult(agreement_rate=observed, kappa=kappa)


def load_annotations_csv(path) -> tuple[list[str], list[str]]:
    """Read an annotation file: CSV of (item_id, label_a, label_b)."""
    labels_a, labels_b = [], []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path} is empty")
        rows = [header] if header[0] != "item_id" else []
        rows.extend(reader)
    for row in rows:
        if len(row) < 3:
            raise ValueError(f"annotation row too short: {row}")
        labels_a.append(row[1])
        labels_b.append(row[2])
    return labels_a, labels_b


@dataclass(frozen=True)
class ErrorRecord:
    pair_id: str
    gold: str
    predicted: str
    error_class: str  # outcome class the polarity is relative to
    polarity: str  # "FP" or "FN"
    cause: str

    def __post_init__(self) -> None:
        if self.gold == self.predicted:
            raise ValueError("error records require gold != predicted")
        if self.polarity not in ERROR_POLARITIES:
            raise ValueError(f"polarity must be FP or FN, got {self.polarity!r}")
        if self.cause not in ERROR_CAUSES:
            raise ValueError(f"unknown cause {self.cause!r}")


def load_error_records_csv(path) -> list[ErrorRecord]:
    """Read error records: CSV of (pair_id, gold, predicted, class, polarity, cause)."""
    records = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        for row in reader:
            if not row or row[0] == "pair_id":
                continue
            records.append(ErrorRecord(*row[:6]))
    return records


def error_report(records: Sequence[ErrorRecord]) -> dict:
    """Cause proportions per (class, polarity) column plus an "All" column.

    Each non-empty column's proportions sum to 1; columns with no records
    are rendered empty. Empty input gives an empty report.
    """
    if not records:
        return {"columns": [], "causes": list(ERROR_CAUSES), "proportions": {}}
    classes = sorted({r.error_class for r in records})
    columns = [(cls, pol) for cls in classes for pol in ERROR_POLARITIES]
    proportions: dict[str, Optional[dict[str, float]]] = {}
    for cls, pol in columns:
        bucket = [r for r in records if r.error_class == cls and r.polarity == pol]
        key = f"{cls}/{pol}"
        if not bucket:
            proportions[key] = None
            continue
        proportions[key] = {
            cause: sum(1 for r in bucket if r.cause == cause) / len(bucket)
            for cause in ERROR_CAUSES
        }
    proportions["All"] = {
        cause: sum(1 for r in records if r.cause == cause) / len(records)
        for cause in ERROR_CAUSES
    }
    return {
        "columns": [f"{cls}/{pol}" for cls, pol in columns] + ["All"],
        "causes": list(ERROR_CAUSES),
        "proportions": proportions,
    }


def render_error_report(report: dict) -> str:
    """Markdown table of cause proportions, two decimals, empty cells for
    columns without records."""
    if not report["columns"]:
        return "(no error records)\n"
    header = "| Cause | " + " | ".join(report["columns"]) + " |"
    rule = "|" + "---|" * (len(report["columns"]) + 1)
    lines = [header, rule]
    for cause in report["causes"]:
        cells = []
        for column in report["columns"]:
            bucket = report["proportions"][column]
            cells.append("" if bucket is None else f"{round2(bucket[cause]):.2f}")
        lines.append(f"| {cause} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def metrics_csv(report: MetricsReport) -> str:
    """Raw-precision CSV of the metrics report."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["class", "precision", "recall", "f1", "support"])
    for i, c in enumerate(report.classes):
        writer.writerow([c, repr(report.precision[i]), repr(report.recall[i]),
                         repr(report.f1[i]), report.support[i]])
    writer.writerow(["weighted", repr(report.weighted_precision),
                     repr(report.weighted_recall), repr(report.weighted_f1),
                     sum(report.support)])
    return buffer.getvalue()
