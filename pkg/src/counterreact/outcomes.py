"""Extract (hate, counterspeech) pairs with follow-ups from dialogue trees and
label the hater's reaction: no reentry, hateful reentry, or non-hateful reentry."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .classify import Ensemble
from .errors import InconsistencyError
from .ingest import Comment, DialogueTree


class OutcomeLabel(Enum):
    NO_REENTRY = "no_reentry"
    HATEFUL_REENTRY = "hateful"
    NON_HATEFUL_REENTRY = "non_hateful"


# Fixed class-index order shared by every predictor over this label set.
OUTCOME_ORDER = (
    OutcomeLabel.NO_REENTRY,
    OutcomeLabel.HATEFUL_REENTRY,
    OutcomeLabel.NON_HATEFUL_REENTRY,
)


class Community(Enum):
    DISCUSSION = "Discussion"
    IDENTITY = "Identity"
    MEDIA_SHARING = "MediaSharing"
    MEME = "Meme"
    HOBBY = "Hobby"
    UNCATEGORIZED = "Uncategorized"


def load_community_map(path: str | Path) -> dict[str, Community]:
    """Load the subreddit -> community table; lookups are case-insensitive."""
    with open(path, encoding="utf-8") as handle:
        raw = json.load(handle)
    return {sub.lower(): Community(category) for sub, category in raw.items()}


def community_for(subreddit: str, community_map: dict[str, Community]) -> Community:
    return community_map.get(subreddit.lower(), Community.UNCATEGORIZED)


@dataclass
class ConversationPair:
    hs: Comment
    cs: Comment
    outcome: Optional[OutcomeLabel]
    reentry_comment: Optional[Comment]
    subreddit: str
    community: Community
    thread_id: str

    @property
    def pair_id(self) -> str:
        return f"{self.hs.id}:{self.cs.id}"

    @property
    def hs_text(self) -> str:
        return self.hs.body

    @property
    def cs_text(self) -> str:
        return self.cs.body

    def to_record(self) -> dict:
        return {
            "hs_id": self.hs.id,
            "cs_id": self.cs.id,
            "hs_text": self.hs.body,
            "cs_text": self.cs.body,
            "outcome": self.outcome.value if self.outcome else None,
            "reentry_id": self.reentry_comment.id if self.reentry_comment else None,
            "subreddit": self.subreddit,
            "community": self.community.value,
        }


def find_pairs(
    tree: DialogueTree,
    hs_ids: set[str],
    cs_ids: set[str],
    community_map: Optional[dict[str, Community]] = None,
) -> list[ConversationPair]:
    """Draft one pair per (hate comment, counterspeech child) with a follow-up.

    A counterspeech comment qualifies when it is a direct child of a hate
    comment, written by a different author, and has at least one descendant.
    Hate comments with a deleted author are skipped: without the author the
    hater's reentry cannot be detected.
    """
    unknown = (hs_ids | cs_ids) - set(tree.index)
    if unknown:
        raise InconsistencyError(f"labeled ids not in tree: {sorted(unknown)}")
    community_map = community_map or {}
    pairs = []
    for hs_id in sorted(hs_ids):
        hs = tree.index[hs_id]
        if hs.author_deleted:
            continue
        for child_id in tree.children.get(hs_id, []):
            if child_id not in cs_ids:
                continue
            cs = tree.index[child_id]
            if cs.author == hs.author:
                continue
            if not tree.children.get(child_id):
                continue  # no follow-up conversation below the counterspeech
            pairs.append(
                ConversationPair(
                    hs=hs,
                    cs=cs,
                    outcome=None,
                    reentry_comment=None,
                    subreddit=hs.subreddit,
                    community=community_for(hs.subreddit, community_map),
                    thread_id=tree.thread_id,
                )
            )
    pairs.sort(key=lambda p: (p.thread_id, p.hs.id, p.cs.id))
    return pairs


def label_reentry(
    pair: ConversationPair,
    tree: DialogueTree,
    hs_ensemble: Ensemble,
) -> tuple[OutcomeLabel, Optional[Comment]]:
    """Label the hater's earliest comment below the counterspeech, if any.

    Descendants are scanned in (created_utc, id) order; the first one by the
    hater is the reentry comment, hateful when the ensemble says so.
    """
    hater = pair.hs.author
    reentry = min(
        (c for c in tree.descendants(pair.cs.id) if c.author == hater),
        key=lambda c: (c.created_utc, c.id),
        default=None,
    )
    if reentry is None:
        return OutcomeLabel.NO_REENTRY, None
    if hs_ensemble.is_positive(reentry.body):
        return OutcomeLabel.HATEFUL_REENTRY, reentry
    return OutcomeLabel.NON_HATEFUL_REENTRY, reentry


def extract_pairs(
    trees: Sequence[DialogueTree],
    hs_ids: set[str],
    cs_ids: set[str],
    hs_ensemble: Ensemble,
    community_map: Optional[dict[str, Community]] = None,
) -> list[ConversationPair]:
    """find_pairs + label_reentry over a forest, merged deterministically."""
    pairs = []
    for tree in trees:
        tree_ids = set(tree.index)
        for pair in find_pairs(tree, hs_ids & tree_ids, cs_ids & tree_ids, community_map):
            outcome, reentry = label_reentry(pair, tree, hs_ensemble)
            pair.outcome = outcome
            pair.reentry_comment = reentry
            pairs.append(pair)
    pairs.sort(key=lambda p: (p.thread_id, p.hs.id, p.cs.id))
    return pairs


_OUTCOME_COLUMNS = [label.value for label in OUTCOME_ORDER]


def _round_percent(count: int, total: int) -> int:
    # nearest integer, halves away from zero
    if total == 0:
        return 0
    scaled = 100 * count
    return (2 * scaled + total) // (2 * total)


def summarize_corpus(pairs: Sequence[ConversationPair]) -> list[dict]:
    """Per-community and overall outcome counts with integer percentages.

    One row per community present plus an "All" row; empty input gives an
    empty table.
    """
    if not pairs:
        return []
    if any(p.outcome is None for p in pairs):
        raise ValueError("cannot summarize unlabeled draft pairs")
    rows = []
    communities = sorted({p.community.value for p in pairs})
    for name in communities + ["All"]:
        selected = [
            p for p in pairs if name == "All" or p.community.value == name
        ]
        total = len(selected)
        row: dict = {"community": name, "pairs": total}
        for outcome in _OUTCOME_COLUMNS:
            count = sum(1 for p in selected if p.outcome.value == outcome)
            row[outcome] = count
            row[f"{outcome}_pct"] = _round_percent(count, total)
        rows.append(row)
    return rows


def render_corpus_summary(rows: Sequence[dict]) -> str:
    """Markdown table of the corpus summary."""
    if not rows:
        return "(no pairs)\n"
    header = (
        "| Community | Pairs | No Reentry (%) | Hateful Reentry (%) | Non-hateful Reentry (%) |"
    )
    rule = "|---|---|---|---|---|"
    lines = [header, rule]
    for row in rows:
        cells = [
            f"{row[outcome]} ({row[f'{outcome}_pct']}%)" for outcome in _OUTCOME_COLUMNS
        ]
        lines.append(f"| {row['community']} | {row['pairs']} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def pairs_to_jsonl(pairs: Sequence[ConversationPair]) -> str:
    return "".join(json.dumps(p.to_record(), sort_keys=True) + "\n" for p in pairs)


@dataclass(frozen=True)
class PairRecord:
    """A pair as stored in pairs.jsonl, without the backing tree."""

    hs_id: str
    cs_id: str
    hs_text: str
    cs_text: str
    outcome: OutcomeLabel
    reentry_id: Optional[str]
    subreddit: str
    community: Community

    @property
    def pair_id(self) -> str:
        return f"{self.hs_id}:{self.cs_id}"


def load_pair_records(path: str | Path) -> list[PairRecord]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            raw = json.loads(line)
            records.append(
                PairRecord(
                    hs_id=raw["hs_id"],
                    cs_id=raw["cs_id"],
                    hs_text=raw["hs_text"],
                    cs_text=raw["cs_text"],
                    outcome=OutcomeLabel(raw["outcome"]),
                    reentry_id=raw.get("reentry_id"),
                    subreddit=raw["subreddit"],
                    community=Community(raw["community"]),
                )
            )
    return records
