"""Shared helpers for the test suite."""

from __future__ import annotations

from pathlib import Path

from counterreact.classify import Ensemble, LexiconClassifier
from counterreact.ingest import Comment
from counterreact.linguistics import Lexicon

DATA_DIR = Path(__file__).parent / "data"

HATE_MARKER = "vexnog"
COUNTER_MARKER = "calmora"


def make_comment(
    id: str,
    parent: str | None = None,
    thread: str = "t3_t",
    author: str = "someone",
    body: str = "plain words here",
    t: int = 0,
    subreddit: str = "testsub",
) -> Comment:
    return Comment(
        id=id,
        parent_id=parent,
        thread_id=thread,
        author=author,
        body=body,
        created_utc=t,
        subreddit=subreddit,
    )


def marker_ensemble(marker: str = HATE_MARKER, members: int = 3) -> Ensemble:
    lexicon = Lexicon(name="markers", entries=frozenset({marker}))
    return Ensemble([LexiconClassifier(lexicon, 0.05) for _ in range(members)])
