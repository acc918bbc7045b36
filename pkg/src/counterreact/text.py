"""Shared tokenization used by every lexical component.

One rule everywhere keeps lexicon scores and n-gram features comparable:
Unicode word characters, lowercased, punctuation discarded.
"""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Split text into lowercase word tokens."""
    return _WORD_RE.findall(text.lower())
