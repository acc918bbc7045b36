"""Deterministic synthetic corpus generator.

Builds a comment dump whose hate/counterspeech structure is known by
construction: nonsense marker tokens stand in for hateful and counter
wording (keeping the corpus non-toxic), and each reaction outcome plants a
lexical signature in the counterspeech so downstream models and the
category comparisons have a recoverable signal.
"""

from __future__ import annotations

import json
import random
import shutil
from importlib import resources
from pathlib import Path

HATE_MARKERS = ["vexnog", "gromwick", "snarlip"]
COUNTER_MARKERS = ["calmora", "pacifen", "soothrel"]

# outcome -> tokens planted in the counterspeech (drawn from packaged lexicons)
SIGNATURES = {
    "hateful": ["attack", "fight", "destroy", "rage", "hostile"],
    "non_hateful": ["sorry", "forgive", "respect", "please", "mercy"],
    "no_reentry": ["wonderful", "nice", "great", "pleasant", "glad"],
}

OUTCOME_WEIGHTS = [("no_reentry", 0.33), ("hateful", 0.20), ("non_hateful", 0.47)]

FILLER = (
    "table window kitchen garden street bridge river mountain valley forest "
    "paper letter bottle basket mirror candle blanket pillow ladder hammer "
    "engine wheel signal tunnel harbor market square corner station platform "
    "walked opened carried painted folded stacked measured counted sorted "
    "morning evening summer winter yesterday tomorrow weekend season moment "
    "neighbor cousin teacher driver farmer sailor painter keeper runner singer"
).split()

SIGNATURE_RATE = 0.92
DEEP_NEST_RATE = 0.3
NEUTRAL_ROOT_RATE = 0.25
LATE_SECOND_REENTRY_RATE = 0.2
DECOY_THREAD_EVERY = 10


def _sentence(rng: random.Random, n_words: int, extra: list[str] | None = None) -> str:
    words = [rng.choice(FILLER) for _ in range(n_words)]
    for token in extra or []:
        words.insert(rng.randrange(len(words) + 1), token)
    return " ".join(words)


def _pick_outcome(rng: random.Random) -> str:
    roll = rng.random()
    cumulative = 0.0
    for outcome, weight in OUTCOME_WEIGHTS:
        cumulative += weight
        if roll < cumulative:
            return outcome
    return OUTCOME_WEIGHTS[-1][0]


def generate_dump(n_pairs: int, seed: int, subreddits: list[str]) -> tuple[list[dict], list[dict]]:
    """Produce dump records plus the expected pair labels, in thread order."""
    rng = random.Random(seed)
    records: list[dict] = []
    expected: list[dict] = []
    for i in range(n_pairs):
        base = 1_600_000_000 + i * 1000
        thread = f"t3_s{i:05d}"
        subreddit = rng.choice(subreddits)
        outcome = _pick_outcome(rng)
        hater = f"hater_{i:05d}"

        def emit(cid: str, parent: str | None, author: str, body: str, t: int) -> None:
            records.append(
                {
                    "id": cid,
                    "parent_id": parent,
                    "link_id": thread,
                    "author": author,
                    "body": body,
                    "created_utc": base + t,
                    "subreddit": subreddit,
                }
            )

        hs_id = f"h{i:05d}"
        if rng.random() < NEUTRAL_ROOT_RATE:
            root_id = f"n{i:05d}"
            emit(root_id, thread, f"poster_{i:05d}", _sentence(rng, rng.randint(6, 12)), 0)
            emit(hs_id, root_id, hater,
                 _sentence(rng, rng.randint(8, 14), [rng.choice(HATE_MARKERS)]), 1)
        else:
            emit(hs_id, thread, hater,
                 _sentence(rng, rng.randint(8, 14), [rng.choice(HATE_MARKERS)]), 1)

        cs_id = f"c{i:05d}"
        cs_extra = [rng.choice(COUNTER_MARKERS)]
        if rng.random() < SIGNATURE_RATE:
            cs_extra.extend(rng.sample(SIGNATURES[outcome], 2))
        emit(cs_id, hs_id, f"counter_{i:05d}",
             _sentence(rng, rng.randint(10, 16), cs_extra), 2)

        follow_id = f"f{i:05d}"
        emit(follow_id, cs_id, f"byst_{i:05d}", _sentence(rng, rng.randint(5, 10)), 3)

        reentry_id = None
        if outcome != "no_reentry":
            reentry_id = f"r{i:05d}"
            parent = follow_id if rng.random() < DEEP_NEST_RATE else cs_id
            if outcome == "hateful":
                body = _sentence(rng, rng.randint(6, 12), [rng.choice(HATE_MARKERS)])
            else:
                body = _sentence(rng, rng.randint(6, 12))
            emit(reentry_id, parent, hater, body, 4)
            if outcome == "non_hateful" and rng.random() < LATE_SECOND_REENTRY_RATE:
                # a later hateful post must not flip the earliest-reaction label
                emit(f"r{i:05d}b", cs_id, hater,
                     _sentence(rng, rng.randint(5, 9), [rng.choice(HATE_MARKERS)]), 9)

        if i % DECOY_THREAD_EVERY == 0:
            # hate comment whose only reply is not counterspeech: no pair
            emit(f"d{i:05d}", thread, f"decoy_{i:05d}",
                 _sentence(rng, rng.randint(6, 10), [rng.choice(HATE_MARKERS)]), 5)
            emit(f"d{i:05d}x", f"d{i:05d}", f"bystx_{i:05d}",
                 _sentence(rng, rng.randint(5, 9)), 6)

        expected.append(
            {
                "hs_id": hs_id,
                "cs_id": cs_id,
                "outcome": outcome,
                "reentry_id": reentry_id,
                "subreddit": subreddit,
            }
        )
    return records, expected


def _default_config(seed: int) -> dict:
    def member(name: str) -> dict:
        return {
            "kind": "lexicon",
            "parameters": {"lexicon_path": f"detectors/{name}.json", "threshold": 0.05},
        }

    return {
        "paths": {
            "dump": "dump.jsonl",
            "lexicon_dir": "lexicons",
            "community_map": "community_map.json",
            "out_dir": "out",
        },
        "ingest": {"mode": "lenient", "orphan_policy": "drop"},
        "classifiers": {
            "hate": [member("hate_markers_a"), member("hate_markers_b"), member("hate_markers_c")],
            "counter": [
                member("counter_markers_a"),
                member("counter_markers_b"),
                member("counter_markers_c"),
            ],
            "prediction": {
                "kind": "ngram",
                "parameters": {"dim": 65536, "epochs": 300, "learning_rate": 2.0,
                                "l2": 0.0001, "seed": seed},
            },
        },
        "split": {"ratio": 0.8, "seed": seed},
        "analysis": {"alpha": 0.05, "by_community": True, "direction_stat": "mean"},
        "separator": "[SEP]",
    }


def write_workspace(out_dir: str | Path, n_pairs: int = 2000, seed: int = 7) -> Path:
    """Generate a self-contained run workspace: dump, lexicons, config.

    Returns the path to the written config file.
    """
    workspace = Path(out_dir)
    workspace.mkdir(parents=True, exist_ok=True)

    data_root = resources.files("counterreact") / "data"
    for sub in ("lexicons", "detectors"):
        target = workspace / sub
        if target.exists():
            shutil.rmtree(target)
        target.mkdir()
        for entry in sorted((data_root / sub).iterdir(), key=lambda e: e.name):
            (target / entry.name).write_text(entry.read_text(encoding="utf-8"))
    (workspace / "community_map.json").write_text(
        (data_root / "community_map.json").read_text(encoding="utf-8")
    )

    with open(workspace / "community_map.json", encoding="utf-8") as handle:
        subreddits = sorted(json.load(handle))
    records, expected = generate_dump(n_pairs, seed, subreddits)
    with open(workspace / "dump.jsonl", "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")
    with open(workspace / "expected_pairs.json", "w", encoding="utf-8") as handle:
        json.dump(expected, handle, indent=2, sort_keys=True)

    config_path = workspace / "config.json"
    with open(config_path, "w", encoding="utf-8") as handle:
        json.dump(_default_config(seed), handle, indent=2, sort_keys=True)
        handle.write("\n")
    return config_path
