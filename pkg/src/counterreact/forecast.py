"""Reaction predictors: two-stage cascade and 3-way classifier over three
input variants, with deterministic splitting and majority baselines."""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .classify import (
    ClassifierSpec,
    Decision,
    NgramHyper,
    build_classifier,
    one_hot_decision,
    train_ngram,
)
from .errors import ConfigurationError
from .outcomes import OUTCOME_ORDER, OutcomeLabel

DEFAULT_SEPARATOR = "[SEP]"


class InputVariant(Enum):
    HS_ONLY = "hs"
    COUNTER_ONLY = "cs"
    PAIR = "pair"


TASK_CLASSES = {
    "reentry": ("no_reentry", "reentry"),
    "reentry_type": ("hateful", "non_hateful"),
    "three_way": tuple(label.value for label in OUTCOME_ORDER),
}


def task_label(task: str, outcome: OutcomeLabel) -> Optional[int]:
    """Class index of an outcome under a task; None when filtered out."""
    if task == "reentry":
        return 0 if outcome is OutcomeLabel.NO_REENTRY else 1
    if task == "reentry_type":
        if outcome is OutcomeLabel.NO_REENTRY:
            return None
        return 0 if outcome is OutcomeLabel.HATEFUL_REENTRY else 1
    if task == "three_way":
        return OUTCOME_ORDER.index(outcome)
    raise ValueError(f"unknown task {task!r}")


def make_input(pair, variant: InputVariant, separator: str = DEFAULT_SEPARATOR) -> str:
    """Select or concatenate the pair's texts for one input variant."""
    hs_text, cs_text = pair.hs_text, pair.cs_text
    if variant is InputVariant.HS_ONLY:
        if not hs_text:
            raise ValueError(f"pair {pair.pair_id}: empty hate text")
        return hs_text
    if variant is InputVariant.COUNTER_ONLY:
        if not cs_text:
            raise ValueError(f"pair {pair.pair_id}: empty counterspeech text")
        return cs_text
    if not hs_text or not cs_text:
        raise ValueError(f"pair {pair.pair_id}: pair variant needs both texts")
    return f"{hs_text} {separator} {cs_text}"


@dataclass(frozen=True)
class SplitAssignment:
    train: frozenset[str]
    test: frozenset[str]
    seed: int
    ratio: float

    def to_dict(self) -> dict:
        return {
            "train": sorted(self.train),
            "test": sorted(self.test),
            "seed": self.seed,
            "ratio": self.ratio,
        }


def split_corpus(
    pair_ids: Sequence[str],
    ratio: float,
    seed: int,
    strata: Optional[dict[str, object]] = None,
) -> SplitAssignment:
    """Deterministic shuffled split, independent of input order.

    Ids are sorted before the seeded shuffle, so permuting the input leaves
    the assignment unchanged. The train size is round(ratio * N), halves up.
    With `strata` (id -> stratum), sampling is proportional within each
    stratum, distributing the rounding leftovers by largest remainder so the
    global train size stays exactly round(ratio * N).
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be strictly between 0 and 1")
    ids = sorted(pair_ids)
    if len(ids) != len(set(ids)):
        raise ValueError("pair ids must be unique")
    if len(ids) < 2:
        raise ValueError("need at least two pairs to split")
    n_train = int(ratio * len(ids) + 0.5)
    rng = random.Random(seed)

    if strata is None:
        rng.shuffle(ids)
        train = ids[:n_train]
    else:
        missing = [pid for pid in ids if pid not in strata]
        if missing:
            raise ValueError(f"no stratum for ids: {missing[:5]}")
        groups: dict[str, list[str]] = {}
        for pid in ids:
            groups.setdefault(str(strata[pid]), []).append(pid)
        quota = {}
        for key in sorted(groups):
            rng.shuffle(groups[key])
            quota[key] = int(ratio * len(groups[key]))
        leftover = n_train - sum(quota.values())
        by_remainder = sorted(
            groups, key=lambda key: (-(ratio * len(groups[key]) - quota[key]), key)
        )
        for key in by_remainder[:leftover]:
            quota[key] += 1
        train = [pid for key in sorted(groups) for pid in groups[key][: quota[key]]]

    train_set = frozenset(train)
    return SplitAssignment(
        train=train_set,
        test=frozenset(pid for pid in ids if pid not in train_set),
        seed=seed,
        ratio=ratio,
    )


@dataclass(frozen=True)
class MajorityModel:
    """Constant predictor of the most frequent training label."""

    label: int
    n_classes: int

    def predict(self, text: str) -> Decision:
        return one_hot_decision(self.label, self.n_classes)

    def predict_batch(self, texts: Sequence[str]) -> list[Decision]:
        return [self.predict(t) for t in texts]


def majority_baseline(train_labels: Sequence[int], n_classes: Optional[int] = None) -> MajorityModel:
    """Most frequent training label, ties broken by the lowest class index."""
    if not train_labels:
        raise ValueError("majority baseline needs training labels")
    counts = Counter(train_labels)
    n_classes = n_classes or max(train_labels) + 1
    label = max(range(n_classes), key=lambda c: (counts.get(c, 0), -c))
    return MajorityModel(label=label, n_classes=n_classes)


def training_data(pairs, task: str, variant: InputVariant,
                  separator: str = DEFAULT_SEPARATOR) -> tuple[list[str], list[int]]:
    """Input texts and class labels for a task, with task-specific filtering."""
    texts, labels = [], []
    for pair in pairs:
        label = task_label(task, pair.outcome)
        if label is None:
            continue
        texts.append(make_input(pair, variant, separator))
        labels.append(label)
    return texts, labels


def train_stage(
    task: str,
    train_pairs,
    variant: InputVariant,
    spec: ClassifierSpec | dict,
    separator: str = DEFAULT_SEPARATOR,
):
    """Fit (or wire up) the model for one prediction task.

    The reentry task sees every pair with collapsed binary labels; the
    reentry-type task sees only pairs whose hater came back; the three-way
    task sees everything with the full label set.
    """
    if task not in TASK_CLASSES:
        raise ValueError(f"unknown prediction task {task!r}")
    if isinstance(spec, dict):
        spec = ClassifierSpec(kind=spec["kind"], task=task, parameters=spec.get("parameters", {}))
    texts, labels = training_data(train_pairs, task, variant, separator)
    if task == "reentry_type" and not labels:
        raise ConfigurationError("reentry_type training needs at least one reentry pair")
    if spec.kind == "ngram":
        hyper = NgramHyper.from_dict(
            dict(spec.parameters, n_classes=len(TASK_CLASSES[task]))
        )
        return train_ngram(texts, labels, hyper)
    if spec.kind in ("remote", "lexicon"):
        return build_classifier(spec)
    raise ConfigurationError(f"cannot train classifier kind {spec.kind!r}")


def cascade_outcome(stage1_decision: Decision, stage2_decision: Optional[Decision]) -> OutcomeLabel:
    """Compose stage decisions: negative reentry short-circuits to no-reentry."""
    if stage1_decision.label == 0:
        return OutcomeLabel.NO_REENTRY
    if stage2_decision is None:
        raise ValueError("stage 2 decision required when stage 1 is positive")
    return (
        OutcomeLabel.HATEFUL_REENTRY
        if stage2_decision.label == 0
        else OutcomeLabel.NON_HATEFUL_REENTRY
    )


def predict_two_stage(stage1, stage2, text: str) -> OutcomeLabel:
    """Cascade: a negative reentry decision short-circuits to no-reentry and
    the type model is never consulted; otherwise the type model decides."""
    first = stage1.predict(text)
    if first.label == 0:
        return cascade_outcome(first, None)
    return cascade_outcome(first, stage2.predict(text))


def predict_two_stage_gold_routed(stage2, text: str, gold_reentry: bool) -> OutcomeLabel:
    """Diagnostic mode: route by the gold reentry flag instead of stage 1."""
    if not gold_reentry:
        return OutcomeLabel.NO_REENTRY
    if stage2.predict(text).label == 0:
        return OutcomeLabel.HATEFUL_REENTRY
    return OutcomeLabel.NON_HATEFUL_REENTRY


def two_stage_scores(stage1_decision: Decision, stage2_decision: Optional[Decision]) -> list[float]:
    """Composed 3-class score vector for reporting.

    With a type decision, the reentry mass p_yes splits across the two
    reentry classes; without one (short-circuited cascade) it is reported
    unsplit as [p_no, p_yes, 0.0].
    """
    p_no, p_yes = stage1_decision.scores
    if stage2_decision is None:
        return [p_no, p_yes, 0.0]
    return [p_no, p_yes * stage2_decision.scores[0], p_yes * stage2_decision.scores[1]]


def predict_three_way(model, text: str) -> OutcomeLabel:
    """Single-model prediction over the full outcome set."""
    return OUTCOME_ORDER[model.predict(text).label]
