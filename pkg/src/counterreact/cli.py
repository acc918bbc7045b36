"""Pipeline command line: each stage reads upstream artifacts, writes its own
plus a manifest (config hash, seed, input/output hashes, versions), and never
mutates what came before. Reruns with identical inputs are byte-identical.

Exit codes: 0 ok, 2 missing upstream artifact, 3 bad config or mixed
manifests, 4 remote-service failure.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import pickle
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import __version__
from .classify import Ensemble, load_ensemble
from .errors import ConfigurationError, TransportError
from .evaluate import (
    cohen_kappa,
    confusion,
    error_report,
    load_annotations_csv,
    load_error_records_csv,
    mcnemar,
    metrics_csv,
    prf,
    render_error_report,
    render_metrics,
)
from .forecast import (
    InputVariant,
    cascade_outcome,
    majority_baseline,
    make_input,
    predict_three_way,
    predict_two_stage_gold_routed,
    split_corpus,
    train_stage,
    training_data,
    two_stage_scores,
)
from .ingest import build_trees, mask_pii, parse_dump, tree_from_record
from .linguistics import (
    GROUPINGS,
    compare_groups,
    comparisons_to_csv,
    load_lexicon_dir,
    render_comparison_grid,
)
from .outcomes import (
    OUTCOME_ORDER,
    OutcomeLabel,
    extract_pairs,
    load_community_map,
    load_pair_records,
    pairs_to_jsonl,
    render_corpus_summary,
    summarize_corpus,
)
from .synthetic import write_workspace

EXIT_MISSING_INPUT = 2
EXIT_BAD_CONFIG = 3
EXIT_REMOTE_FAILURE = 4

PICKLE_PROTOCOL = 4

STRATEGIES = ("two_stage", "three_way", "baseline")
VARIANTS = {v.value: v for v in InputVariant}


class StageFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fail(code: int, message: str) -> StageFailure:
    return StageFailure(code, message)


_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _interpolate(value):
    if isinstance(value, str):
        def repl(match: re.Match) -> str:
            name = match.group(1)
            if name not in os.environ:
                raise _fail(EXIT_BAD_CONFIG, f"config references unset variable ${{{name}}}")
            return os.environ[name]

        return _ENV_RE.sub(repl, value)
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    return value


_REQUIRED_CONFIG = (
    ("paths", dict),
    ("classifiers", dict),
    ("split", dict),
)
_REQUIRED_PATHS = ("dump", "lexicon_dir", "community_map", "out_dir")


class Run:
    """A loaded config plus path resolution and manifest bookkeeping."""

    def __init__(self, config_path: Path, out_override: Path | None = None):
        if not config_path.exists():
            raise _fail(EXIT_BAD_CONFIG, f"config not found: {config_path}")
        try:
            raw = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise _fail(EXIT_BAD_CONFIG, f"config is not valid JSON: {exc}")
        self.config = _interpolate(raw)
        if out_override is not None:
            self.config.setdefault("paths", {})["out_dir"] = str(out_override)
        self.base_dir = config_path.parent
        self._validate()
        canonical = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        self.config_hash = hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def _validate(self) -> None:
        for key, kind in _REQUIRED_CONFIG:
            if key not in self.config or not isinstance(self.config[key], kind):
                raise _fail(EXIT_BAD_CONFIG, f"config field missing or wrong type: {key}")
        for name in _REQUIRED_PATHS:
            if name not in self.config["paths"]:
                raise _fail(EXIT_BAD_CONFIG, f"config field missing: paths.{name}")
        for member_set in ("hate", "counter"):
            members = self.config["classifiers"].get(member_set)
            if not isinstance(members, list) or not members:
                raise _fail(
                    EXIT_BAD_CONFIG, f"config field missing: classifiers.{member_set}"
                )
        split = self.config["split"]
        ratio = split.get("ratio")
        if not isinstance(ratio, (int, float)) or not 0 < ratio < 1:
            raise _fail(EXIT_BAD_CONFIG, "config field invalid: split.ratio")
        if not isinstance(split.get("seed"), int):
            raise _fail(EXIT_BAD_CONFIG, "config field invalid: split.seed")

    def path(self, name: str) -> Path:
        return (self.base_dir / self.config["paths"][name]).resolve()

    @property
    def out_dir(self) -> Path:
        out = self.path("out_dir")
        out.mkdir(parents=True, exist_ok=True)
        return out

    @property
    def seed(self) -> int:
        return self.config["split"]["seed"]

    @property
    def separator(self) -> str:
        return self.config.get("separator", "[SEP]")

    def artifact(self, relative: str) -> Path:
        path = self.out_dir / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def require_artifact(self, relative: str, producer: str) -> Path:
        path = self.out_dir / relative
        if not path.exists():
            raise _fail(
                EXIT_MISSING_INPUT,
                f"missing upstream artifact {path} (run the {producer!r} stage first)",
            )
        return path

    def resolve_classifier_paths(self, specs: list[dict]) -> list[dict]:
        resolved = []
        for spec in specs:
            params = dict(spec.get("parameters", {}))
            if "lexicon_path" in params:
                params["lexicon_path"] = str((self.base_dir / params["lexicon_path"]).resolve())
            if "model_path" in params:
                params["model_path"] = str((self.base_dir / params["model_path"]).resolve())
            resolved.append(dict(spec, parameters=params))
        return resolved

    def ensemble(self, member_set: str, task: str) -> Ensemble:
        specs = self.resolve_classifier_paths(self.config["classifiers"][member_set])
        return load_ensemble(specs, task)

    def _rel(self, path: Path) -> str:
        # base-relative paths keep manifests byte-identical across workspaces
        try:
            return os.path.relpath(path, self.base_dir)
        except ValueError:
            return str(path)

    def begin_stage(self, stage: str) -> None:
        """Invalidate the stage's manifest before writing its outputs.

        The manifest written at the end is the completion marker; a crash
        mid-stage leaves artifacts without one, so the stage reads as
        incomplete instead of silently stale.
        """
        stale = self.out_dir / "manifests" / f"{stage}.json"
        if stale.exists():
            stale.unlink()

    def write_manifest(self, stage: str, inputs: list[Path], outputs: list[Path],
                       params: dict | None = None) -> None:
        manifest = {
            "stage": stage,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "inputs": {self._rel(p): _sha256_file(p) for p in sorted(inputs)},
            "outputs": {self._rel(p): _sha256_file(p) for p in sorted(outputs)},
            "params": params or {},
            "versions": {"counterreact": __version__, "python": sys.version.split()[0]},
        }
        path = self.artifact(f"manifests/{stage}.json")
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _map_jobs(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_trees(run: Run) -> list:
    trees_path = run.require_artifact("trees.jsonl", "ingest")
    return [tree_from_record(record) for record in _read_jsonl(trees_path)]


@click.group()
def main() -> None:
    """Conversation-reaction pipeline."""


def _stage(fn):
    """Wrap a stage body with the shared failure-to-exit-code handling."""

    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except StageFailure as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.code)
        except ConfigurationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_BAD_CONFIG)
        except TransportError as exc:
            click.echo(f"error: remote service failed: {exc}", err=True)
            sys.exit(EXIT_REMOTE_FAILURE)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def run_options(fn):
    fn = click.option(
        "--config", "config_path", type=click.Path(path_type=Path), required=True,
        help="Run config JSON.",
    )(fn)
    fn = click.option(
        "--out", "out_override", type=click.Path(path_type=Path), default=None,
        help="Override paths.out_dir from the config.",
    )(fn)
    return fn


jobs_option = click.option("--jobs", type=int, default=1, show_default=True,
                           help="Worker threads for per-thread work.")


@main.command()
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--pairs", type=int, default=2000, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@_stage
def synth(out_dir: Path, pairs: int, seed: int) -> None:
    """Generate a self-contained synthetic workspace (dump + config)."""
    config_path = write_workspace(out_dir, n_pairs=pairs, seed=seed)
    click.echo(f"wrote {config_path}")


@main.command()
@run_options
@click.option("--strict/--lenient", "strict", default=False,
              help="Fail on the first malformed dump line instead of collecting errors.")
@_stage
def ingest(config_path: Path, out_override: Path | None, strict: bool) -> None:
    """Parse the dump, mask identifying text, and reconstruct dialogue trees."""
    run = Run(config_path, out_override)
    run.begin_stage("ingest")
    dump_path = run.path("dump")
    if not dump_path.exists():
        raise _fail(EXIT_MISSING_INPUT, f"missing input dump {dump_path}")
    with open(dump_path, encoding="utf-8") as handle:
        comments, errors = parse_dump(handle, strict=strict)
    masked = [dataclasses.replace(c, body=mask_pii(c.body)) for c in comments]
    policy = run.config.get("ingest", {}).get("orphan_policy", "drop")
    trees, orphans = build_trees(masked, orphan_policy=policy)

    trees_path = run.artifact("trees.jsonl")
    _write_jsonl(trees_path, (t.to_record() for t in trees))
    errors_path = run.artifact("parse_errors.jsonl")
    _write_jsonl(errors_path, ({"line": e.line_no, "reason": e.reason} for e in errors))
    orphans_path = run.artifact("orphans.jsonl")
    _write_jsonl(
        orphans_path,
        ({"id": o.comment_id, "parent_id": o.parent_id, "reason": o.reason} for o in orphans),
    )
    run.write_manifest("ingest", [dump_path], [trees_path, errors_path, orphans_path],
                       {"strict": strict, "orphan_policy": policy})
    click.echo(f"{len(trees)} trees, {len(errors)} parse errors, {len(orphans)} orphan reports")


@main.command()
@run_options
@jobs_option
@_stage
def label(config_path: Path, out_override: Path | None, jobs: int) -> None:
    """Run the hate and counterspeech ensembles over every tree."""
    run = Run(config_path, out_override)
    run.begin_stage("label")
    trees = _load_trees(run)
    hate_ensemble = run.ensemble("hate", "hate")
    counter_ensemble = run.ensemble("counter", "counter")

    def label_tree(tree) -> list[dict]:
        ids = [tree.root.id] + [c.id for c in tree.descendants(tree.root.id)]
        bodies = [tree.index[cid].body for cid in ids]
        hate_flags = dict(zip(ids, hate_ensemble.classify_batch(bodies)))
        counter_candidates = [
            child
            for cid in ids
            if hate_flags[cid]
            for child in tree.children.get(cid, [])
        ]
        counter_flags = dict.fromkeys(ids, False)
        if counter_candidates:
            votes = counter_ensemble.classify_batch(
                [tree.index[cid].body for cid in counter_candidates]
            )
            counter_flags.update(dict(zip(counter_candidates, votes)))
        return [
            {"id": cid, "hate": hate_flags[cid], "counter": counter_flags[cid]}
            for cid in ids
        ]

    labeled = _map_jobs(label_tree, trees, jobs)
    labels_path = run.artifact("labels.jsonl")
    _write_jsonl(labels_path, (record for tree_records in labeled for record in tree_records))
    run.write_manifest("label", [run.artifact("trees.jsonl")], [labels_path])
    total_hate = sum(1 for recs in labeled for r in recs if r["hate"])
    total_counter = sum(1 for recs in labeled for r in recs if r["counter"])
    click.echo(f"{total_hate} hate comments, {total_counter} counterspeech replies")


@main.command()
@run_options
@jobs_option
@_stage
def extract(config_path: Path, out_override: Path | None, jobs: int) -> None:
    """Pair hate comments with counterspeech and label the hater's reaction."""
    run = Run(config_path, out_override)
    run.begin_stage("extract")
    trees = _load_trees(run)
    labels_path = run.require_artifact("labels.jsonl", "label")
    labels = _read_jsonl(labels_path)
    hs_ids = {r["id"] for r in labels if r["hate"]}
    cs_ids = {r["id"] for r in labels if r["counter"]}
    community_map = load_community_map(run.path("community_map"))
    hs_ensemble = run.ensemble("hate", "hate")

    per_tree = _map_jobs(
        lambda tree: extract_pairs([tree], hs_ids & set(tree.index),
                                   cs_ids & set(tree.index), hs_ensemble, community_map),
        trees, jobs,
    )
    pairs = sorted((p for chunk in per_tree for p in chunk),
                   key=lambda p: (p.thread_id, p.hs.id, p.cs.id))
    pairs_path = run.artifact("pairs.jsonl")
    pairs_path.write_text(pairs_to_jsonl(pairs), encoding="utf-8")

    summary = summarize_corpus(pairs)
    summary_json = run.artifact("corpus_summary.json")
    _write_json(summary_json, {"config_hash": run.config_hash, "rows": summary})
    summary_md = run.artifact("corpus_summary.md")
    summary_md.write_text(render_corpus_summary(summary), encoding="utf-8")
    run.write_manifest(
        "extract",
        [run.artifact("trees.jsonl"), labels_path],
        [pairs_path, summary_json, summary_md],
    )
    click.echo(f"{len(pairs)} pairs")


@main.command()
@run_options
@_stage
def analyze(config_path: Path, out_override: Path | None) -> None:
    """Compare counterspeech category scores across reaction outcomes."""
    run = Run(config_path, out_override)
    run.begin_stage("analyze")
    pairs_path = run.require_artifact("pairs.jsonl", "extract")
    pairs = load_pair_records(pairs_path)
    lexicon_dir = run.path("lexicon_dir")
    if not lexicon_dir.exists():
        raise _fail(EXIT_MISSING_INPUT, f"missing lexicon directory {lexicon_dir}")
    lexicons = load_lexicon_dir(lexicon_dir)
    settings = run.config.get("analysis", {})
    alpha = settings.get("alpha", 0.05)
    by_community = settings.get("by_community", True)
    direction_stat = settings.get("direction_stat", "mean")

    all_results = []
    grids = []
    for grouping in GROUPINGS:
        results = compare_groups(
            pairs, lexicons, grouping,
            by_community=by_community, alpha=alpha, direction_stat=direction_stat,
        )
        all_results.extend(results)
        grids.append(f"## {grouping}\n\n" + render_comparison_grid(results))

    csv_path = run.artifact("analysis/comparisons.csv")
    csv_path.write_text(comparisons_to_csv(all_results), encoding="utf-8")
    md_path = run.artifact("analysis/comparisons.md")
    md_path.write_text("\n".join(grids), encoding="utf-8")
    run.write_manifest("analyze", [pairs_path], [csv_path, md_path],
                       {"alpha": alpha, "by_community": by_community,
                        "direction_stat": direction_stat})
    flagged = sum(1 for r in all_results if r.testable and r.significant_bonferroni)
    click.echo(f"{flagged} category tests pass the corrected threshold")


@main.command()
@run_options
@click.option("--ratio", type=float, default=None, help="Override split.ratio.")
@click.option("--seed", type=int, default=None, help="Override split.seed.")
@click.option("--stratify", is_flag=True, default=False,
              help="Sample proportionally within each outcome.")
@_stage
def split(config_path: Path, out_override: Path | None, ratio: float | None,
          seed: int | None, stratify: bool) -> None:
    """Assign pairs to train/test deterministically."""
    run = Run(config_path, out_override)
    run.begin_stage("split")
    pairs_path = run.require_artifact("pairs.jsonl", "extract")
    pairs = load_pair_records(pairs_path)
    effective_ratio = ratio if ratio is not None else run.config["split"]["ratio"]
    effective_seed = seed if seed is not None else run.config["split"]["seed"]
    stratify = stratify or run.config["split"].get("stratify", False)
    strata = {p.pair_id: p.outcome.value for p in pairs} if stratify else None
    assignment = split_corpus([p.pair_id for p in pairs], effective_ratio,
                              effective_seed, strata=strata)
    split_path = run.artifact("split.json")
    _write_json(split_path, dict(assignment.to_dict(), config_hash=run.config_hash))
    run.write_manifest("split", [pairs_path], [split_path],
                       {"ratio": effective_ratio, "seed": effective_seed,
                        "stratify": stratify})
    click.echo(f"train {len(assignment.train)}, test {len(assignment.test)}")


def _split_sets(run: Run) -> tuple[list, list]:
    pairs = load_pair_records(run.require_artifact("pairs.jsonl", "extract"))
    raw = json.loads(run.require_artifact("split.json", "split").read_text(encoding="utf-8"))
    train_ids, test_ids = set(raw["train"]), set(raw["test"])
    train = [p for p in pairs if p.pair_id in train_ids]
    test = [p for p in pairs if p.pair_id in test_ids]
    return train, test


@main.command()
@run_options
@click.option("--strategy", type=click.Choice(STRATEGIES), required=True)
@click.option("--variant", type=click.Choice(sorted(VARIANTS)), default="pair",
              show_default=True)
@_stage
def train(config_path: Path, out_override: Path | None, strategy: str, variant: str) -> None:
    """Fit the models for one prediction strategy."""
    run = Run(config_path, out_override)
    train_pairs, _ = _split_sets(run)
    spec = run.config["classifiers"].get("prediction")
    if not spec:
        raise _fail(EXIT_BAD_CONFIG, "config field missing: classifiers.prediction")
    spec = run.resolve_classifier_paths([spec])[0]
    input_variant = VARIANTS[variant]

    if strategy == "two_stage":
        payload = {
            "strategy": strategy,
            "variant": variant,
            "stage1": train_stage("reentry", train_pairs, input_variant, spec, run.separator),
            "stage2": train_stage("reentry_type", train_pairs, input_variant, spec, run.separator),
        }
    elif strategy == "three_way":
        payload = {
            "strategy": strategy,
            "variant": variant,
            "model": train_stage("three_way", train_pairs, input_variant, spec, run.separator),
        }
    else:
        _, labels = training_data(train_pairs, "three_way", input_variant, run.separator)
        payload = {
            "strategy": strategy,
            "variant": variant,
            "model": majority_baseline(labels, n_classes=3),
        }
    run.begin_stage(f"train_{strategy}_{variant}")
    model_path = run.artifact(f"models/{strategy}_{variant}.pkl")
    with open(model_path, "wb") as handle:
        pickle.dump(payload, handle, protocol=PICKLE_PROTOCOL)
    run.write_manifest(f"train_{strategy}_{variant}",
                       [run.artifact("pairs.jsonl"), run.artifact("split.json")],
                       [model_path], {"strategy": strategy, "variant": variant})
    click.echo(f"wrote {model_path}")


@main.command()
@run_options
@click.option("--strategy", type=click.Choice(STRATEGIES), required=True)
@click.option("--variant", type=click.Choice(sorted(VARIANTS)), default="pair",
              show_default=True)
@click.option("--gold-routing", is_flag=True, default=False,
              help="Diagnostic: route stage 2 by gold reentry instead of stage 1.")
@_stage
def predict(config_path: Path, out_override: Path | None, strategy: str, variant: str, gold_routing: bool) -> None:
    """Predict reactions for the test pairs."""
    run = Run(config_path, out_override)
    if gold_routing and strategy != "two_stage":
        raise _fail(EXIT_BAD_CONFIG, "--gold-routing only applies to two_stage")
    _, test_pairs = _split_sets(run)
    model_path = run.require_artifact(f"models/{strategy}_{variant}.pkl",
                                      f"train --strategy {strategy}")
    with open(model_path, "rb") as handle:
        payload = pickle.load(handle)
    input_variant = VARIANTS[variant]
    test_pairs = sorted(test_pairs, key=lambda p: p.pair_id)

    records = []
    for pair in test_pairs:
        text = make_input(pair, input_variant, run.separator)
        if strategy == "two_stage":
            stage1, stage2 = payload["stage1"], payload["stage2"]
            first = stage1.predict(text)
            if gold_routing:
                outcome = predict_two_stage_gold_routed(
                    stage2, text, pair.outcome is not OutcomeLabel.NO_REENTRY
                )
                scores = two_stage_scores(first, stage2.predict(text))
            else:
                second = stage2.predict(text) if first.label == 1 else None
                outcome = cascade_outcome(first, second)
                scores = two_stage_scores(first, second)
        else:
            model = payload["model"]
            outcome = predict_three_way(model, text)
            scores = list(model.predict(text).scores)
        records.append(
            {
                "pair_id": pair.pair_id,
                "strategy": strategy,
                "variant": variant,
                "predicted": outcome.value,
                "scores": scores,
            }
        )
    suffix = "_gold" if gold_routing else ""
    run.begin_stage(f"predict_{strategy}_{variant}{suffix}")
    pred_path = run.artifact(f"predictions/{strategy}_{variant}{suffix}.jsonl")
    _write_jsonl(pred_path, records)
    run.write_manifest(f"predict_{strategy}_{variant}{suffix}",
                       [model_path, run.artifact("split.json")], [pred_path],
                       {"strategy": strategy, "variant": variant,
                        "gold_routing": gold_routing})
    click.echo(f"wrote {pred_path}")


def _load_predictions(path: Path) -> dict[str, str]:
    return {r["pair_id"]: r["predicted"] for r in _read_jsonl(path)}


def _gold_for(run: Run, pair_ids: list[str], gold_path: Path | None = None) -> dict[str, str]:
    if gold_path is None:
        gold_path = run.require_artifact("pairs.jsonl", "extract")
    elif not gold_path.exists():
        raise _fail(EXIT_MISSING_INPUT, f"missing gold file {gold_path}")
    pairs = load_pair_records(gold_path)
    gold = {p.pair_id: p.outcome.value for p in pairs}
    missing = [pid for pid in pair_ids if pid not in gold]
    if missing:
        raise _fail(EXIT_BAD_CONFIG, f"predictions reference unknown pairs: {missing[:5]}")
    return gold


OUTCOME_CLASSES = tuple(label.value for label in OUTCOME_ORDER)

# fixed-name artifacts and the stage whose manifest attests them
_PIPELINE_ARTIFACTS = {
    "trees.jsonl": "ingest",
    "labels.jsonl": "label",
    "pairs.jsonl": "extract",
    "split.json": "split",
    "analysis/comparisons.csv": "analyze",
}


@main.command()
@run_options
@click.option("--pred", "pred_path", type=click.Path(path_type=Path), required=True)
@click.option("--gold", "gold_path", type=click.Path(path_type=Path), default=None,
              help="Gold pairs file (defaults to the run's pairs.jsonl).")
@click.option("--compare", "compare_path", type=click.Path(path_type=Path), default=None,
              help="Second predictions file for a paired comparison.")
@click.option("--annotations", type=click.Path(path_type=Path), default=None,
              help="CSV of (item_id, label_a, label_b) for agreement statistics.")
@click.option("--errors", "errors_path", type=click.Path(path_type=Path), default=None,
              help="CSV of annotated error causes: (pair_id, gold, predicted, class, "
                   "polarity, cause).")
@_stage
def evaluate(config_path: Path, out_override: Path | None, pred_path: Path,
             gold_path: Path | None, compare_path: Path | None,
             annotations: Path | None, errors_path: Path | None) -> None:
    """Score predictions against gold outcomes (and optionally a rival model)."""
    run = Run(config_path, out_override)
    if not pred_path.exists():
        raise _fail(EXIT_MISSING_INPUT, f"missing predictions file {pred_path}")
    predictions = _load_predictions(pred_path)
    ordered_ids = sorted(predictions)
    gold_map = _gold_for(run, ordered_ids, gold_path)
    gold = [gold_map[pid] for pid in ordered_ids]
    predicted = [predictions[pid] for pid in ordered_ids]
    matrix = confusion(gold, predicted, OUTCOME_CLASSES)
    report = prf(matrix)

    payload: dict = {
        "config_hash": run.config_hash,
        "predictions": str(pred_path),
        "n_items": len(ordered_ids),
        "confusion": {"classes": list(matrix.classes),
                      "counts": [list(row) for row in matrix.counts]},
        "metrics": report.to_dict(),
    }
    rendered = [f"# Evaluation: {pred_path.name}", "", render_metrics(report)]
    inputs = [pred_path, gold_path or run.artifact("pairs.jsonl")]

    if compare_path is not None:
        if not compare_path.exists():
            raise _fail(EXIT_MISSING_INPUT, f"missing predictions file {compare_path}")
        rival = _load_predictions(compare_path)
        shared = sorted(set(ordered_ids) & set(rival))
        rival_report = prf(confusion(
            [gold_map[pid] for pid in shared], [rival[pid] for pid in shared],
            OUTCOME_CLASSES,
        ))
        result = mcnemar(
            [gold_map[pid] for pid in shared],
            [predictions[pid] for pid in shared],
            [rival[pid] for pid in shared],
        )
        payload["compare_metrics"] = rival_report.to_dict()
        payload["mcnemar"] = {
            "against": str(compare_path),
            "n_items": len(shared),
            "b": result.b,
            "c": result.c,
            "statistic": result.statistic,
            "p_value": result.p_value,
            "method": result.method,
        }
        rendered.append(f"## Comparison model: {compare_path.name}\n\n"
                        + render_metrics(rival_report))
        rendered.append(
            f"Paired comparison vs {compare_path.name}: b={result.b}, c={result.c}, "
            f"statistic={result.statistic:.4f}, p={result.p_value:.6f} ({result.method})\n"
        )
        inputs.append(compare_path)

    if annotations is not None:
        if not annotations.exists():
            raise _fail(EXIT_MISSING_INPUT, f"missing annotations file {annotations}")
        labels_a, labels_b = load_annotations_csv(annotations)
        agreement = cohen_kappa(labels_a, labels_b)
        payload["agreement"] = {
            "agreement_rate": agreement.agreement_rate,
            "kappa": agreement.kappa,
            "n_items": len(labels_a),
        }
        rendered.append(
            f"Annotation agreement: rate={agreement.agreement_rate:.4f}, "
            f"kappa={agreement.kappa:.4f}\n"
        )
        inputs.append(annotations)

    if errors_path is not None:
        if not errors_path.exists():
            raise _fail(EXIT_MISSING_INPUT, f"missing error-record file {errors_path}")
        causes = error_report(load_error_records_csv(errors_path))
        payload["error_causes"] = causes
        rendered.append("## Error causes\n\n" + render_error_report(causes))
        inputs.append(errors_path)

    stem = pred_path.stem
    run.begin_stage(f"evaluate_{stem}")
    json_path = run.artifact(f"metrics/{stem}.json")
    _write_json(json_path, payload)
    md_path = run.artifact(f"metrics/{stem}.md")
    md_path.write_text("\n".join(rendered), encoding="utf-8")
    csv_path = run.artifact(f"metrics/{stem}.csv")
    csv_path.write_text(metrics_csv(report), encoding="utf-8")
    run.write_manifest(f"evaluate_{stem}", inputs, [json_path, md_path, csv_path])
    click.echo(
        f"weighted P/R/F1 = {report.weighted_precision:.2f}/{report.weighted_recall:.2f}"
        f"/{report.weighted_f1:.2f}"
    )


@main.command()
@run_options
@click.option("--pred-a", type=click.Path(path_type=Path), required=True)
@click.option("--pred-b", type=click.Path(path_type=Path), required=True)
@_stage
def compare(config_path: Path, out_override: Path | None, pred_a: Path, pred_b: Path) -> None:
    """McNemar comparison of two prediction files on their shared items."""
    run = Run(config_path, out_override)
    for path in (pred_a, pred_b):
        if not path.exists():
            raise _fail(EXIT_MISSING_INPUT, f"missing predictions file {path}")
    first = _load_predictions(pred_a)
    second = _load_predictions(pred_b)
    shared = sorted(set(first) & set(second))
    if not shared:
        raise _fail(EXIT_BAD_CONFIG, "prediction files share no pair ids")
    gold_map = _gold_for(run, shared)
    result = mcnemar(
        [gold_map[pid] for pid in shared],
        [first[pid] for pid in shared],
        [second[pid] for pid in shared],
    )
    payload = {
        "config_hash": run.config_hash,
        "pred_a": str(pred_a),
        "pred_b": str(pred_b),
        "n_items": len(shared),
        "b": result.b,
        "c": result.c,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "method": result.method,
    }
    run.begin_stage(f"compare_{pred_a.stem}_vs_{pred_b.stem}")
    out_path = run.artifact(f"metrics/mcnemar_{pred_a.stem}_vs_{pred_b.stem}.json")
    _write_json(out_path, payload)
    run.write_manifest(f"compare_{pred_a.stem}_vs_{pred_b.stem}",
                       [pred_a, pred_b, run.artifact("pairs.jsonl")], [out_path])
    click.echo(f"b={result.b} c={result.c} p={result.p_value:.6f} ({result.method})")


@main.command()
@run_options
@_stage
def report(config_path: Path, out_override: Path | None) -> None:
    """Compile the run report after checking manifest consistency."""
    run = Run(config_path, out_override)
    manifest_dir = run.out_dir / "manifests"
    if not manifest_dir.exists():
        raise _fail(EXIT_MISSING_INPUT, f"missing manifests under {manifest_dir}")
    manifests = [json.loads(p.read_text(encoding="utf-8"))
                 for p in sorted(manifest_dir.glob("*.json"))]
    hashes = {m["config_hash"] for m in manifests}
    if hashes != {run.config_hash}:
        raise _fail(
            EXIT_BAD_CONFIG,
            f"mixed-manifest inputs: artifacts were produced under configs {sorted(hashes)}",
        )
    for manifest in manifests:
        for rel_path, digest in manifest["outputs"].items():
            full = run.base_dir / rel_path
            if full.exists() and _sha256_file(full) != digest:
                raise _fail(
                    EXIT_BAD_CONFIG,
                    f"artifact {rel_path} no longer matches the manifest of stage "
                    f"{manifest['stage']!r}",
                )
    for rel, producer in _PIPELINE_ARTIFACTS.items():
        if (run.out_dir / rel).exists() and not (manifest_dir / f"{producer}.json").exists():
            raise _fail(
                EXIT_BAD_CONFIG,
                f"artifact {rel} exists but stage {producer!r} left no manifest "
                f"(incomplete run)",
            )

    sections = [f"# Run report\n\nconfig hash: `{run.config_hash}`\n"]
    for name, title in (
        ("corpus_summary.md", "Corpus summary"),
        ("analysis/comparisons.md", "Linguistic comparisons"),
    ):
        path = run.out_dir / name
        if path.exists():
            sections.append(f"## {title}\n\n" + path.read_text(encoding="utf-8"))
    metrics_dir = run.out_dir / "metrics"
    if metrics_dir.exists():
        for path in sorted(metrics_dir.glob("*.md")):
            sections.append(path.read_text(encoding="utf-8"))
    run.begin_stage("report")
    report_path = run.artifact("report.md")
    report_path.write_text("\n".join(sections), encoding="utf-8")
    run.write_manifest("report", [], [report_path])
    click.echo(f"wrote {report_path}")


if __name__ == "__main__":
    main()
