from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, strategies as st

from counterreact.errors import DumpError
from counterreact.ingest import (
    OrphanReport,
    build_trees,
    mask_pii,
    parse_dump,
    StrictParseError,
    tree_from_record,
)

from support import make_comment


def _record(id, parent=None, thread="t3_t", author="a", body="b", t=0, sub="s"):
    return {
        "id": id,
        "parent_id": parent,
        "link_id": thread,
        "author": author,
        "body": body,
        "created_utc": t,
        "subreddit": sub,
    }


def _lines(*records):
    return [json.dumps(r) + "\n" for r in records]


def test_parse_single_minimal_record():
    comments, errors = parse_dump(_lines(_record("c1")))
    assert errors == []
    assert len(comments) == 1
    assert comments[0].id == "c1"
    assert comments[0].parent_id is None


def test_parse_malformed_line_lenient():
    comments, errors = parse_dump(["not json\n"])
    assert comments == []
    assert len(errors) == 1
    assert errors[0].line_no == 1


def test_parse_malformed_line_strict():
    with pytest.raises(StrictParseError):
        parse_dump(["not json\n"], strict=True)


def test_parse_fixture_with_missing_id():
    records = [_record(f"c{i}", t=i) for i in range(5)]
    del records[2]["id"]
    comments, errors = parse_dump(_lines(*records))
    assert [c.id for c in comments] == ["c0", "c1", "c3", "c4"]
    assert len(errors) == 1
    assert errors[0].line_no == 3
    assert "id" in errors[0].reason


@pytest.mark.parametrize("field,value", [
    ("created_utc", -5),
    ("created_utc", "soon"),
    ("id", ""),
    ("body", 7),
])
def test_parse_rejects_bad_fields(field, value):
    record = _record("c1")
    record[field] = value
    comments, errors = parse_dump(_lines(record))
    assert comments == []
    assert len(errors) == 1


def test_round_trip_through_dump_schema():
    records = [
        _record("c1", t=3),
        _record("c2", parent="c1", t=4, body="reply text", author="other"),
        _record("c3", parent="t3_t", t=5),
    ]
    comments, _ = parse_dump(_lines(*records))
    again, errors = parse_dump(_lines(*(c.to_record() for c in comments)))
    assert errors == []
    assert again == comments


def test_build_chain():
    comments = [
        make_comment("A", t=1),
        make_comment("B", parent="A", t=2),
        make_comment("C", parent="B", t=3),
    ]
    trees, orphans = build_trees(comments)
    assert orphans == []
    assert len(trees) == 1
    tree = trees[0]
    assert tree.root.id == "A"
    assert tree.children["A"] == ["B"]
    assert tree.children["B"] == ["C"]
    assert len(tree) == 3


def test_orphan_drop_policy():
    comments = [make_comment("A", t=1), make_comment("D", parent="missing", t=2)]
    trees, orphans = build_trees(comments, orphan_policy="drop")
    assert [t.root.id for t in trees] == ["A"]
    assert orphans == [OrphanReport("D", "missing", "missing_parent")]


def test_orphan_promote_policy():
    comments = [
        make_comment("A", t=1),
        make_comment("D", parent="missing", t=2),
        make_comment("E", parent="D", t=3),
    ]
    trees, orphans = build_trees(comments, orphan_policy="promote_to_root")
    assert sorted(t.root.id for t in trees) == ["A", "D"]
    promoted = next(t for t in trees if t.root.id == "D")
    assert promoted.children["D"] == ["E"]
    assert len(orphans) == 1


def test_orphan_drop_removes_subtree():
    comments = [
        make_comment("A", t=1),
        make_comment("D", parent="missing", t=2),
        make_comment("E", parent="D", t=3),
    ]
    trees, orphans = build_trees(comments, orphan_policy="drop")
    assert [t.root.id for t in trees] == ["A"]
    assert {o.comment_id for o in orphans} == {"D", "E"}
    # conservation: dropped + kept = total
    assert sum(len(t) for t in trees) + len(orphans) == len(comments)


def test_duplicate_id_fatal():
    with pytest.raises(DumpError, match="duplicate"):
        build_trees([make_comment("A"), make_comment("A")])


def test_cycle_fatal():
    comments = [
        make_comment("A", parent="B", t=1),
        make_comment("B", parent="A", t=2),
    ]
    with pytest.raises(DumpError, match="cycle"):
        build_trees(comments)


def test_prefixed_parent_ids_resolve():
    comments = [
        make_comment("A", parent="t3_sub", t=1),
        make_comment("B", parent="t1_A", t=2),
    ]
    trees, orphans = build_trees(comments)
    assert orphans == []
    assert len(trees) == 1
    assert trees[0].children["A"] == ["B"]


def test_child_order_breaks_timestamp_ties_by_id():
    comments = [
        make_comment("A", t=1),
        make_comment("z", parent="A", t=5),
        make_comment("b", parent="A", t=5),
        make_comment("a", parent="A", t=7),
    ]
    trees, _ = build_trees(comments)
    assert trees[0].children["A"] == ["b", "z", "a"]


def _random_forest(rng: random.Random, n: int):
    comments = []
    for i in range(n):
        cid = f"c{i}"
        if i == 0 or rng.random() < 0.2:
            parent = None if rng.random() < 0.5 else "t3_thread"
        elif rng.random() < 0.08:
            parent = f"gone{i}"  # orphan
        else:
            parent = f"c{rng.randrange(i)}"
        comments.append(make_comment(cid, parent=parent, thread="t3_thread",
                                     t=rng.randrange(20)))
    return comments


def _oracle_attach(comments):
    """Repeatedly attach children to known nodes starting from the roots."""
    roots = [c for c in comments if c.parent_id is None or c.parent_id.startswith("t3_")]
    by_parent = {}
    for c in comments:
        if c not in roots:
            by_parent.setdefault(c.parent_id, []).append(c)
    trees = {}
    for root in roots:
        members = {root.id}
        frontier = [root.id]
        while frontier:
            nxt = []
            for pid in frontier:
                for child in by_parent.get(pid, []):
                    members.add(child.id)
                    nxt.append(child.id)
            frontier = nxt
        trees[root.id] = members
    return trees


def test_random_forest_matches_attachment_oracle():
    rng = random.Random(20240917)
    for _ in range(25):
        comments = _random_forest(rng, 50)
        trees, orphans = build_trees(comments, orphan_policy="drop")
        oracle = _oracle_attach(comments)
        assert {t.root.id for t in trees} == set(oracle)
        for tree in trees:
            assert set(tree.index) == oracle[tree.root.id]
        # node multiset identical: every comment is in exactly one place
        placed = [cid for t in trees for cid in t.index] + [o.comment_id for o in orphans]
        assert sorted(placed) == sorted(c.id for c in comments)


def test_tree_record_round_trip():
    comments = [
        make_comment("A", t=1),
        make_comment("B", parent="A", t=2),
        make_comment("C", parent="A", t=3),
        make_comment("D", parent="C", t=4),
    ]
    trees, _ = build_trees(comments)
    rebuilt = tree_from_record(trees[0].to_record())
    assert rebuilt.root == trees[0].root
    assert rebuilt.children == trees[0].children
    assert rebuilt.index == trees[0].index


def test_mask_pii_mentions_and_urls():
    assert mask_pii("u/john said hi") == "u/[USER] said hi"
    assert mask_pii("") == ""
    assert mask_pii("see https://x.y/z and /u/ann") == "see [URL] and u/[USER]"
    assert mask_pii("fu/bar stays") == "fu/bar stays"
    assert mask_pii("www.example.org/page link") == "[URL] link"


@given(st.text(max_size=200))
def test_mask_pii_idempotent(text):
    once = mask_pii(text)
    assert mask_pii(once) == once


def test_deleted_author_flagged():
    assert make_comment("A", author="[deleted]").author_deleted
    assert not make_comment("A", author="deleted").author_deleted
