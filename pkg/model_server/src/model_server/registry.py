"""Model registry: one named task per served model, loaded at startup.

Registry file:
    {
      "timeout": 10.0,
      "tasks": {
        "<task name>": {
          "model": "constant" | "keyword" | "hf",
          "classes": 2 | 3,
          "max_batch": 64,
          "prompt_template": "... {example} ...",   # optional, instruction models
          ... backend-specific fields ...
        }
      }
    }

Backends: "constant" needs "label"; "keyword" needs "keywords" (+ optional
"threshold", default 0.05); "hf" needs "path" (a transformers checkpoint)
and is available only when transformers is installed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

# Default zero-shot prompt wording for instruction-model backends, with the
# answer-string -> class-index mapping each task expects.
DEFAULT_PROMPT_TEMPLATES = {
    "reentry": (
        "Here is a counterspeech to a hate comment: {example}. "
        "Will the hater come back to join the conversation? Answer 'Yes' or 'No'.",
        {"No": 0, "Yes": 1},
    ),
    "reentry_type": (
        "Here is a counterspeech to a hate comment: {example}. "
        "Assuming the hater comes back to join the conversation, "
        "will the engagement be hateful? Answer 'Yes' or 'No'",
        {"Yes": 0, "No": 1},
    ),
    "three_way": (
        "Here is a counterspeech to a hate comment:{example}. "
        "What will be the hater's response? Answer 'Reentry with a non-hateful comment', "
        "'Reentry with a hateful comment', or 'No reentry'",
        {"No reentry": 0, "Reentry with a hateful comment": 1,
         "Reentry with a non-hateful comment": 2},
    ),
}


class RegistryError(Exception):
    pass


class ModelLoadError(Exception):
    pass


_WORD_RE = re.compile(r"\w+")


class ConstantModel:
    def __init__(self, label: int, classes: int):
        if not 0 <= label < classes:
            raise ModelLoadError(f"constant label {label} outside {classes} classes")
        self.label = label
        self.classes = classes

    def classify(self, texts: Sequence[str]):
        scores = [0.0] * self.classes
        scores[self.label] = 1.0
        return [self.label] * len(texts), [list(scores) for _ in texts]


class KeywordModel:
    """Binary decision from the share of tokens found in a keyword list."""

    def __init__(self, keywords: Sequence[str], threshold: float, classes: int):
        if classes != 2:
            raise ModelLoadError("keyword models are binary")
        if not keywords:
            raise ModelLoadError("keyword model needs a non-empty keyword list")
        self.keywords = {k.lower() for k in keywords}
        self.threshold = threshold

    def classify(self, texts: Sequence[str]):
        labels, scores = [], []
        for text in texts:
            tokens = _WORD_RE.findall(text.lower())
            ratio = (sum(1 for t in tokens if t in self.keywords) / len(tokens)
                     if tokens else 0.0)
            label = int(bool(tokens) and ratio >= self.threshold)
            labels.append(label)
            scores.append([1.0 - float(label), float(label)])
        return labels, scores


class HfModel:
    """transformers text-classification checkpoint, loaded lazily."""

    def __init__(self, path: str, classes: int):
        try:
            from transformers import pipeline
        except ImportError as exc:
            raise ModelLoadError("transformers is not installed") from exc
        try:
            self.pipeline = pipeline("text-classification", model=path, top_k=None)
        except Exception as exc:  # checkpoint missing, download failure, ...
            raise ModelLoadError(f"could not load checkpoint {path!r}: {exc}") from exc
        self.classes = classes

    def classify(self, texts: Sequence[str]):
        labels, scores = [], []
        for rows in self.pipeline(list(texts)):
            by_index = {int(r["label"].split("_")[-1]): r["score"] for r in rows}
            row = [by_index.get(i, 0.0) for i in range(self.classes)]
            total = sum(row) or 1.0
            row = [s / total for s in row]
            labels.append(max(range(self.classes), key=lambda i: (row[i], -i)))
            scores.append(row)
        return labels, scores


_BACKENDS = {"constant", "keyword", "hf"}


@dataclass
class RegistryEntry:
    task: str
    model_id: str
    classes: int
    max_batch: int
    prompt_template: Optional[str] = None
    params: dict = field(default_factory=dict)
    backend: object = None
    load_error: Optional[str] = None

    def __post_init__(self) -> None:
        if self.classes not in (2, 3):
            raise RegistryError(f"task {self.task!r}: class count must be 2 or 3")
        if self.max_batch < 1:
            raise RegistryError(f"task {self.task!r}: max batch must be >= 1")
        if self.model_id not in _BACKENDS:
            raise RegistryError(f"task {self.task!r}: unknown model kind {self.model_id!r}")

    @property
    def loaded(self) -> bool:
        return self.backend is not None

    def load(self) -> None:
        try:
            if self.model_id == "constant":
                self.backend = ConstantModel(int(self.params.get("label", 0)), self.classes)
            elif self.model_id == "keyword":
                self.backend = KeywordModel(
                    self.params.get("keywords", []),
                    float(self.params.get("threshold", 0.05)),
                    self.classes,
                )
            else:
                self.backend = HfModel(self.params["path"], self.classes)
        except (ModelLoadError, KeyError) as exc:
            self.load_error = str(exc)


class Registry:
    def __init__(self, entries: dict[str, RegistryEntry], timeout: float = 10.0):
        self.entries = entries
        self.timeout = timeout

    @classmethod
    def from_dict(cls, raw: dict) -> "Registry":
        entries = {}
        for task, spec in raw.get("tasks", {}).items():
            params = {k: v for k, v in spec.items()
                      if k not in ("model", "classes", "max_batch", "prompt_template")}
            template = spec.get("prompt_template")
            # instruction-style checkpoints get the stock zero-shot wording;
            # rule-based backends only use a template when asked explicitly
            if template is None and spec.get("model") == "hf" \
                    and task in DEFAULT_PROMPT_TEMPLATES:
                template = DEFAULT_PROMPT_TEMPLATES[task][0]
            entry = RegistryEntry(
                task=task,
                model_id=spec.get("model", "constant"),
                classes=int(spec.get("classes", 2)),
                max_batch=int(spec.get("max_batch", 64)),
                prompt_template=template,
                params=params,
            )
            entry.load()
            entries[task] = entry
        return cls(entries, timeout=float(raw.get("timeout", 10.0)))

    @classmethod
    def from_file(cls, path: str | Path) -> "Registry":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    @property
    def all_loaded(self) -> bool:
        return all(entry.loaded for entry in self.entries.values())
