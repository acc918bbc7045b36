"""Parse newline-delimited comment dumps and reconstruct dialogue trees.

Dump schema, one JSON object per line:
    {"id": str, "parent_id": str|null, "link_id": str, "author": str,
     "body": str, "created_utc": int, "subreddit": str}

Parent ids may be bare or carry Reddit-style "t1_"/"t3_" prefixes; a "t3_"
parent marks a top-level comment.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Optional

from .errors import DumpError

DELETED_AUTHOR = "[deleted]"

_REQUIRED_FIELDS = ("id", "link_id", "author", "body", "created_utc", "subreddit")


@dataclass(frozen=True)
class Comment:
    id: str
    parent_id: Optional[str]
    thread_id: str
    author: str
    body: str
    created_utc: int
    subreddit: str

    @property
    def author_deleted(self) -> bool:
        return self.author == DELETED_AUTHOR

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "parent_id": self.parent_id,
            "link_id": self.thread_id,
            "author": self.author,
            "body": self.body,
            "created_utc": self.created_utc,
            "subreddit": self.subreddit,
        }


@dataclass(frozen=True)
class ParseError:
    line_no: int
    reason: str


@dataclass(frozen=True)
class OrphanReport:
    comment_id: str
    parent_id: str
    reason: str  # "missing_parent" or "orphaned_ancestor"


class StrictParseError(DumpError):
    """Raised in strict mode on the first malformed dump line."""


def strip_kind_prefix(raw_id: str) -> str:
    """Drop a Reddit kind prefix ("t1_", "t3_", ...) if present."""
    if len(raw_id) > 3 and raw_id[0] == "t" and raw_id[1].isdigit() and raw_id[2] == "_":
        return raw_id[3:]
    return raw_id


def _is_submission_ref(raw_id: str) -> bool:
    return raw_id.startswith("t3_")


def _parse_record(record: dict) -> Comment:
    for name in _REQUIRED_FIELDS:
        if name not in record:
            raise ValueError(f"missing field {name!r}")
    if not isinstance(record["id"], str) or not record["id"]:
        raise ValueError("id must be a non-empty string")
    parent = record.get("parent_id")
    if parent is not None and not isinstance(parent, str):
        raise ValueError("parent_id must be a string or null")
    created = record["created_utc"]
    if isinstance(created, bool) or not isinstance(created, int):
        raise ValueError("created_utc must be an integer")
    if created < 0:
        raise ValueError("created_utc must be >= 0")
    if not isinstance(record["body"], str):
        raise ValueError("body must be a string")
    if not isinstance(record["author"], str):
        raise ValueError("author must be a string")
    if not isinstance(record["subreddit"], str):
        raise ValueError("subreddit must be a string")
    if not isinstance(record["link_id"], str) or not record["link_id"]:
        raise ValueError("link_id must be a non-empty string")
    return Comment(
        id=record["id"],
        parent_id=parent,
        thread_id=record["link_id"],
        author=record["author"],
        body=record["body"],
        created_utc=created,
        subreddit=record["subreddit"],
    )


def parse_dump(
    source: IO[str] | Iterable[str],
    strict: bool = False,
) -> tuple[list[Comment], list[ParseError]]:
    """Parse a newline-delimited JSON dump into comments.

    Lenient mode (default) collects one ParseError per malformed line and
    keeps going; strict mode raises on the first. Blank lines are skipped.
    Comment order matches line order.
    """
    comments: list[Comment] = []
    errors: list[ParseError] = []
    for line_no, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("line is not a JSON object")
            comments.append(_parse_record(record))
        except (json.JSONDecodeError, ValueError) as exc:
            if strict:
                raise StrictParseError(f"line {line_no}: {exc}") from exc
            errors.append(ParseError(line_no=line_no, reason=str(exc)))
    return comments, errors


@dataclass
class DialogueTree:
    root: Comment
    children: dict[str, list[str]]
    index: dict[str, Comment]

    @property
    def thread_id(self) -> str:
        return self.root.thread_id

    def __len__(self) -> int:
        return len(self.index)

    def descendants(self, comment_id: str) -> Iterator[Comment]:
        """Yield all comments strictly below comment_id, in child-sorted DFS order."""
        stack = list(reversed(self.children.get(comment_id, [])))
        while stack:
            current = stack.pop()
            yield self.index[current]
            stack.extend(reversed(self.children.get(current, [])))

    def to_record(self) -> dict:
        order = [self.root.id] + [c.id for c in self.descendants(self.root.id)]
        edges = [
            [parent, child]
            for parent in order
            for child in self.children.get(parent, [])
        ]
        return {
            "thread_id": self.thread_id,
            "comments": [self.index[cid].to_record() for cid in order],
            "edges": edges,
        }


def tree_from_record(record: dict) -> DialogueTree:
    """Rebuild a DialogueTree from its serialized form."""
    comments = [_parse_record(r) for r in record["comments"]]
    index = {c.id: c for c in comments}
    children: dict[str, list[str]] = defaultdict(list)
    child_ids = set()
    for parent, child in record["edges"]:
        children[parent].append(child)
        child_ids.add(child)
    roots = [c for c in comments if c.id not in child_ids]
    if len(roots) != 1:
        raise DumpError(f"tree record has {len(roots)} roots, expected 1")
    for kids in children.values():
        kids.sort(key=lambda cid: (index[cid].created_utc, cid))
    return DialogueTree(root=roots[0], children=dict(children), index=index)


def build_trees(
    comments: list[Comment],
    orphan_policy: str = "drop",
) -> tuple[list[DialogueTree], list[OrphanReport]]:
    """Assemble one tree per top-level comment.

    A comment is a root when it has no parent_id or its parent is a "t3_"
    submission reference. Comments whose parent id does not resolve are
    orphans: dropped (with their subtrees) or promoted to roots of their
    own trees, per policy. Child lists are sorted by (created_utc, id).
    """
    if orphan_policy not in ("drop", "promote_to_root"):
        raise ValueError(f"unknown orphan policy {orphan_policy!r}")

    index: dict[str, Comment] = {}
    for comment in comments:
        key = strip_kind_prefix(comment.id)
        if key in index:
            raise DumpError(f"duplicate comment id {comment.id!r}")
        index[key] = comment

    roots: list[str] = []
    orphan_roots: list[str] = []
    reports: list[OrphanReport] = []
    parent_of: dict[str, str] = {}
    for key, comment in index.items():
        raw_parent = comment.parent_id
        if raw_parent is None or _is_submission_ref(raw_parent):
            roots.append(key)
            continue
        parent_key = strip_kind_prefix(raw_parent)
        if parent_key not in index:
            reports.append(OrphanReport(comment.id, raw_parent, "missing_parent"))
            orphan_roots.append(key)
        elif parent_key == key:
            raise DumpError(f"cycle detected: {comment.id!r} is its own parent")
        else:
            parent_of[key] = parent_key

    children: dict[str, list[str]] = defaultdict(list)
    for child, parent in parent_of.items():
        children[parent].append(child)
    for kids in children.values():
        kids.sort(key=lambda k: (index[k].created_utc, index[k].id))

    reachable: set[str] = set()
    for start in roots + orphan_roots:
        stack = [start]
        while stack:
            node = stack.pop()
            reachable.add(node)
            stack.extend(children.get(node, []))
    unreachable = set(index) - reachable
    if unreachable:
        offenders = sorted(index[k].id for k in unreachable)
        raise DumpError(f"cycle detected among comments: {offenders}")

    if orphan_policy == "drop":
        # dropping an orphan drops its whole subtree; report every casualty
        for orphan in orphan_roots:
            for desc in _subtree(orphan, children):
                if desc != orphan:
                    reports.append(
                        OrphanReport(index[desc].id, index[parent_of[desc]].id, "orphaned_ancestor")
                    )

    tree_roots = list(roots)
    if orphan_policy == "promote_to_root":
        tree_roots.extend(orphan_roots)
    tree_roots.sort(key=lambda k: (index[k].thread_id, index[k].created_utc, index[k].id))

    trees = []
    for root_key in tree_roots:
        members = _subtree(root_key, children)
        trees.append(
            DialogueTree(
                root=index[root_key],
                children={
                    index[k].id: [index[c].id for c in children[k]]
                    for k in members
                    if children.get(k)
                },
                index={index[k].id: index[k] for k in members},
            )
        )
    return trees, reports


def _subtree(root: str, children: dict[str, list[str]]) -> list[str]:
    members = []
    stack = [root]
    while stack:
        node = stack.pop()
        members.append(node)
        stack.extend(children.get(node, []))
    return members


_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_USER_RE = re.compile(r"(?<![\w/])/?u/[A-Za-z0-9_-]+")


def mask_pii(text: str) -> str:
    """Replace URLs with "[URL]" and u/NAME mentions with "u/[USER]".

    Idempotent: neither replacement token re-matches either pattern.
    """
    masked = _URL_RE.sub("[URL]", text)
    return _USER_RE.sub("u/[USER]", masked)
