"""Lexicon-category profiling of counterspeech and the rank-based statistics
used to compare categories across reaction outcomes."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .text import tokenize

if TYPE_CHECKING:
    from .outcomes import ConversationPair


@dataclass(frozen=True)
class Lexicon:
    name: str
    entries: frozenset[str]
    match_mode: str = "exact"  # "exact" or "prefix"

    def __post_init__(self) -> None:
        if not self.entries:
            raise ConfigurationError(f"lexicon {self.name!r} has no entries")
        if self.match_mode not in ("exact", "prefix"):
            raise ConfigurationError(f"lexicon {self.name!r}: bad match_mode {self.match_mode!r}")

    def matches(self, token: str) -> bool:
        if self.match_mode == "exact":
            return token in self.entries
        return any(token.startswith(stem) for stem in self.entries)


def load_lexicon(path: str | Path) -> Lexicon:
    """Load one category file: {"name", "match_mode", "entries": [...]}."""
    with open(path, encoding="utf-8") as handle:
        raw = json.load(handle)
    try:
        return Lexicon(
            name=raw["name"],
            entries=frozenset(w.lower() for w in raw["entries"]),
            match_mode=raw.get("match_mode", "exact"),
        )
    except KeyError as exc:
        raise ConfigurationError(f"lexicon file {path}: missing key {exc}") from exc


def load_lexicon_dir(directory: str | Path) -> list[Lexicon]:
    """Load every *.json category file in a directory, sorted by category name."""
    lexicons = [load_lexicon(p) for p in sorted(Path(directory).glob("*.json"))]
    if not lexicons:
        raise ConfigurationError(f"no lexicon files found in {directory}")
    names = [lx.name for lx in lexicons]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"duplicate lexicon names in {directory}")
    return sorted(lexicons, key=lambda lx: lx.name)


@dataclass(frozen=True)
class LexiconProfile:
    scores: dict[str, float]
    token_count: int
    degenerate: bool


def profile_text(text: str, lexicons: Sequence[Lexicon]) -> LexiconProfile:
    """Score text against each category as matched-token share.

    Empty or untokenizable text yields a degenerate all-zero profile.
    """
    tokens = tokenize(text)
    if not tokens:
        return LexiconProfile({lx.name: 0.0 for lx in lexicons}, 0, True)
    total = len(tokens)
    scores = {
        lx.name: sum(1 for tok in tokens if lx.matches(tok)) / total
        for lx in lexicons
    }
    return LexiconProfile(scores, total, False)


@dataclass(frozen=True)
class RankSumResult:
    u: float  # U statistic of the first sample
    z: float
    p_two_sided: float
    method: str  # "exact" or "normal"


def _midranks(values: Sequence[float]) -> list[float]:
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j + 2) / 2.0  # 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _norm_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# The exact path costs about n * k * rank-sum-span element operations;
# beyond this budget fall back to the normal approximation.
_EXACT_WORK_LIMIT = 2_000_000_000


def _exact_two_sided_p(doubled_ranks: list[int], k: int, observed_doubled: int) -> float:
    """Two-sided permutation p-value for the rank sum of a size-k group.

    Counts, over all equally likely assignments of k of the pooled
    (tie-midranked) positions to the group, how often the rank sum deviates
    from its mean at least as much as observed. Computed by dynamic
    programming over (subset size, doubled rank sum) counts, which
    enumerates the full permutation distribution without materializing it.
    """
    n = len(doubled_ranks)
    mean2 = k * (n + 1)
    dev = abs(observed_doubled - mean2)
    if dev == 0:
        return 1.0
    max_sum = sum(sorted(doubled_ranks)[-k:])
    table = np.zeros((k + 1, max_sum + 1))
    table[0, 0] = 1.0
    for r in doubled_ranks:
        for size in range(k, 0, -1):
            table[size, r:] += table[size - 1, : max_sum + 1 - r]
    dist = table[k]
    sums = np.arange(max_sum + 1)
    extreme = dist[np.abs(sums - mean2) >= dev].sum()
    return float(extreme / dist.sum())


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> RankSumResult:
    """Two-sample rank-sum test on midranks with tie handling.

    The U statistic reported is the first sample's. When the smaller sample
    has at most 8 values the two-sided p is exact by permutation
    distribution; otherwise it uses the tie-corrected normal approximation
    with continuity correction. The z score is always the (signed)
    normal-approximation score, zero when every pooled value is identical.
    """
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    pooled = list(a) + list(b)
    n = n1 + n2
    ranks = _midranks(pooled)
    rank_sum_a = sum(ranks[:n1])
    # count of (a, b) pairs where a wins, ties counted half
    u_a = rank_sum_a - n1 * (n1 + 1) / 2.0

    tie_counts = Counter(pooled).values()
    tie_factor = 1.0 - sum(t**3 - t for t in tie_counts) / float(n**3 - n) if n > 1 else 0.0
    sd = math.sqrt(tie_factor * n1 * n2 * (n + 1) / 12.0)

    deviation = u_a - n1 * n2 / 2.0
    if sd == 0.0:
        z = 0.0
    else:
        shrunk = deviation - math.copysign(min(0.5, abs(deviation)), deviation)
        z = shrunk / sd

    k = min(n1, n2)
    doubled = [int(round(2 * r)) for r in ranks]
    exact_work = n * (k + 1) * (sum(sorted(doubled)[-k:]) + 1)
    if k <= 8 and exact_work <= _EXACT_WORK_LIMIT:
        if k == n1:
            observed = int(round(2 * rank_sum_a))
        else:
            observed = int(round(2 * (n * (n + 1) / 2.0 - rank_sum_a)))
        p = _exact_two_sided_p(doubled, k, observed)
        method = "exact"
    else:
        p = min(1.0, 2.0 * _norm_sf(abs(z))) if sd > 0.0 else 1.0
        method = "normal"
    return RankSumResult(u=u_a, z=z, p_two_sided=p, method=method)


def bonferroni(p_values: Sequence[float], alpha: float, m: int) -> list[bool]:
    """Flag each p-value significant at the family-corrected level alpha/m."""
    if m <= 0:
        raise ValueError("family size m must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    threshold = alpha / m
    return [p <= threshold for p in p_values]


GROUPINGS = {
    "reentry_vs_no": ("reentry", "no_reentry"),
    "hateful_vs_nonhateful": ("hateful", "non_hateful"),
}

ALL_COMMUNITIES = "All"


@dataclass(frozen=True)
class ComparisonResult:
    grouping: str
    community: str
    category: str
    group_a: str
    group_b: str
    n_a: int
    n_b: int
    testable: bool
    direction: str | None = None  # "higher_in_a" or "higher_in_b"
    u: float | None = None
    z: float | None = None
    p_value: float | None = None
    significant_raw: bool = False
    significant_bonferroni: bool = False


def _split_groups(items, grouping: str):
    from .outcomes import OutcomeLabel

    if grouping == "reentry_vs_no":
        group_a = [it for it in items if it[0].outcome is not OutcomeLabel.NO_REENTRY]
        group_b = [it for it in items if it[0].outcome is OutcomeLabel.NO_REENTRY]
    elif grouping == "hateful_vs_nonhateful":
        group_a = [it for it in items if it[0].outcome is OutcomeLabel.HATEFUL_REENTRY]
        group_b = [it for it in items if it[0].outcome is OutcomeLabel.NON_HATEFUL_REENTRY]
    else:
        raise ValueError(f"unknown grouping {grouping!r}")
    return group_a, group_b


def compare_groups(
    pairs: Sequence["ConversationPair"],
    lexicons: Sequence[Lexicon],
    grouping: str,
    by_community: bool = True,
    alpha: float = 0.05,
    direction_stat: str = "mean",
) -> list[ComparisonResult]:
    """Rank-sum comparisons of counterspeech category scores between outcome groups.

    Runs one test per category within each community cell plus an overall
    cell; the Bonferroni family is the set of categories tested within one
    cell. Direction reflects which group has the larger mean (or median)
    score. Cells where either group has fewer than two profiles are marked
    untestable.
    """
    if direction_stat not in ("mean", "median"):
        raise ValueError(f"unknown direction_stat {direction_stat!r}")
    name_a, name_b = GROUPINGS[grouping]
    items = [(p, profile_text(p.cs_text, lexicons)) for p in pairs]

    cells: list[tuple[str, list]] = [(ALL_COMMUNITIES, items)]
    if by_community:
        communities = sorted({p.community.value for p, _ in items})
        for community in communities:
            cells.append((community, [it for it in items if it[0].community.value == community]))

    stat = np.mean if direction_stat == "mean" else np.median
    results: list[ComparisonResult] = []
    for community, cell_items in cells:
        group_a, group_b = _split_groups(cell_items, grouping)
        n_a, n_b = len(group_a), len(group_b)
        if n_a < 2 or n_b < 2:
            for lx in lexicons:
                results.append(
                    ComparisonResult(grouping, community, lx.name, name_a, name_b, n_a, n_b, False)
                )
            continue
        m = len(lexicons)
        for lx in lexicons:
            scores_a = [prof.scores[lx.name] for _, prof in group_a]
            scores_b = [prof.scores[lx.name] for _, prof in group_b]
            test = wilcoxon_rank_sum(scores_a, scores_b)
            direction = "higher_in_a" if stat(scores_a) > stat(scores_b) else "higher_in_b"
            results.append(
                ComparisonResult(
                    grouping,
                    community,
                    lx.name,
                    name_a,
                    name_b,
                    n_a,
                    n_b,
                    True,
                    direction=direction,
                    u=test.u,
                    z=test.z,
                    p_value=test.p_two_sided,
                    significant_raw=test.p_two_sided <= alpha,
                    significant_bonferroni=test.p_two_sided <= alpha / m,
                )
            )
    return results


def comparisons_to_csv(results: Iterable[ComparisonResult]) -> str:
    """Render testable results as CSV (untestable cells are excluded)."""
    lines = ["grouping,community,category,direction,U,z,p,sig_raw,sig_bonferroni"]
    for r in results:
        if not r.testable:
            continue
        lines.append(
            f"{r.grouping},{r.community},{r.category},{r.direction},"
            f"{r.u!r},{r.z!r},{r.p_value!r},{r.significant_raw},{r.significant_bonferroni}"
        )
    return "\n".join(lines) + "\n"


def render_comparison_grid(results: Sequence[ComparisonResult]) -> str:
    """Markdown arrow grid: one row per category, one column per community.

    An up arrow means the first group scored higher; arrows for tests that
    miss the Bonferroni cut are wrapped in underscores; untestable cells
    stay blank.
    """
    communities = [ALL_COMMUNITIES] + sorted(
        {r.community for r in results} - {ALL_COMMUNITIES}
    )
    categories = list(dict.fromkeys(r.category for r in results))
    by_key = {(r.community, r.category): r for r in results}
    header = "| category | " + " | ".join(communities) + " |"
    rule = "|" + "---|" * (len(communities) + 1)
    rows = [header, rule]
    for category in categories:
        cells = []
        for community in communities:
            r = by_key.get((community, category))
            if r is None or not r.testable:
                cells.append("")
                continue
            arrow = "↑" if r.direction == "higher_in_a" else "↓"
            cells.append(arrow if r.significant_bonferroni else f"_{arrow}_")
        rows.append(f"| {category} | " + " | ".join(cells) + " |")
    return "\n".join(rows) + "\n"
