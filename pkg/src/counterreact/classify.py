"""Classifier abstraction: lexicon baseline, embedded hashed n-gram model,
remote-service adapter, and the unanimous-vote ensemble used for labeling."""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, ProtocolError, TransportError
from .linguistics import Lexicon
from .text import tokenize

TASKS = ("hate", "counter", "reentry", "reentry_type", "three_way")
TASK_CLASS_COUNTS = {
    "hate": 2,
    "counter": 2,
    "reentry": 2,
    "reentry_type": 2,
    "three_way": 3,
}

_SCORE_SUM_TOL = 1e-6


@dataclass(frozen=True)
class Decision:
    label: int
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.scores:
            raise ValueError("decision needs at least one class score")
        if any(s < 0.0 or s > 1.0 for s in self.scores):
            raise ValueError(f"scores outside [0, 1]: {self.scores}")
        if abs(sum(self.scores) - 1.0) > _SCORE_SUM_TOL:
            raise ValueError(f"scores do not sum to 1: {self.scores}")
        best = max(range(len(self.scores)), key=lambda i: (self.scores[i], -i))
        if self.label != best:
            raise ValueError(f"label {self.label} is not the argmax of {self.scores}")


def decision_from_scores(scores: Sequence[float]) -> Decision:
    """Build a Decision whose label is the argmax, ties to the lowest index."""
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return Decision(label=best, scores=tuple(float(s) for s in scores))


def one_hot_decision(label: int, n_classes: int) -> Decision:
    scores = [0.0] * n_classes
    scores[label] = 1.0
    return Decision(label=label, scores=tuple(scores))


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str  # "lexicon", "ngram", "remote"
    task: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("lexicon", "ngram", "remote"):
            raise ConfigurationError(f"unknown classifier kind {self.kind!r}")
        if self.task not in TASKS:
            raise ConfigurationError(f"unknown task {self.task!r}")
        if self.kind == "lexicon":
            if "lexicon_path" not in self.parameters and "entries" not in self.parameters:
                raise ConfigurationError("lexicon classifier needs lexicon_path or entries")
        elif self.kind == "remote":
            if not self.parameters.get("endpoint"):
                raise ConfigurationError("remote classifier needs an endpoint")
            if float(self.parameters.get("timeout", 10.0)) <= 0:
                raise ConfigurationError("remote timeout must be positive")


def classify_lexicon(text: str, lexicon: Lexicon, threshold: float) -> Decision:
    """Binary decision from the share of tokens matching the lexicon.

    Positive exactly when matched/total >= threshold; empty text is always
    negative. The positive-class score grows with the margin over the
    threshold so the label is recoverable as the argmax.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    tokens = tokenize(text)
    if not tokens:
        return Decision(label=0, scores=(1.0, 0.0))
    ratio = sum(1 for tok in tokens if lexicon.matches(tok)) / len(tokens)
    margin = ratio - threshold
    positive_score = (1.0 + margin) / 2.0
    if margin >= 0.0 and positive_score <= 0.5:
        positive_score = 0.5 + 1e-9
    return decision_from_scores((1.0 - positive_score, positive_score))


class LexiconClassifier:
    """Lexicon-share classifier exposing the common predict interface."""

    def __init__(self, lexicon: Lexicon, threshold: float):
        if not 0.0 <= threshold <= 1.0:
            raise ConfigurationError("threshold must be in [0, 1]")
        self.lexicon = lexicon
        self.threshold = threshold

    def predict(self, text: str) -> Decision:
        return classify_lexicon(text, self.lexicon, self.threshold)

    def predict_batch(self, texts: Sequence[str]) -> list[Decision]:
        return [self.predict(t) for t in texts]


@dataclass(frozen=True)
class NgramHyper:
    orders: tuple[int, ...] = (1, 2)
    dim: int = 1 << 16
    l2: float = 1e-4
    epochs: int = 300
    learning_rate: float = 2.0
    seed: int = 0
    n_classes: Optional[int] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "NgramHyper":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown n-gram hyperparameters: {sorted(unknown)}")
        if "orders" in raw:
            raw = dict(raw, orders=tuple(raw["orders"]))
        return cls(**raw)


def _hash_feature(gram: str, seed: int, dim: int) -> int:
    key = seed.to_bytes(8, "little", signed=True)
    digest = hashlib.blake2b(gram.encode("utf-8"), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def _featurize(text: str, hyper: NgramHyper) -> dict[int, float]:
    tokens = tokenize(text)
    counts: dict[int, float] = {}
    for order in hyper.orders:
        for i in range(len(tokens) - order + 1):
            gram = f"{order}:" + " ".join(tokens[i : i + order])
            idx = _hash_feature(gram, hyper.seed, hyper.dim)
            counts[idx] = counts.get(idx, 0.0) + 1.0
    norm = np.sqrt(sum(v * v for v in counts.values()))
    if norm > 0:
        counts = {k: v / norm for k, v in counts.items()}
    return counts


def _feature_matrix(texts: Sequence[str], hyper: NgramHyper) -> sparse.csr_matrix:
    rows, cols, data = [], [], []
    for row, text in enumerate(texts):
        for idx, value in _featurize(text, hyper).items():
            rows.append(row)
            cols.append(idx)
            data.append(value)
        rows.append(row)  # bias column
        cols.append(hyper.dim)
        data.append(1.0)
    return sparse.csr_matrix(
        (data, (rows, cols)), shape=(len(texts), hyper.dim + 1), dtype=np.float64
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


@dataclass
class NgramModel:
    hyper: NgramHyper
    n_classes: int
    weights: Optional[np.ndarray] = None  # (dim + 1, n_classes); None for constant
    constant_label: Optional[int] = None

    def predict(self, text: str) -> Decision:
        return self.predict_batch([text])[0]

    def predict_batch(self, texts: Sequence[str]) -> list[Decision]:
        if self.constant_label is not None:
            return [one_hot_decision(self.constant_label, self.n_classes) for _ in texts]
        matrix = _feature_matrix(texts, self.hyper)
        probs = _softmax(matrix @ self.weights)
        probs /= probs.sum(axis=1, keepdims=True)
        return [decision_from_scores(row) for row in probs]


def train_ngram(
    texts: Sequence[str],
    labels: Sequence[int],
    hyper: NgramHyper | dict | None = None,
) -> NgramModel:
    """Fit a softmax regression over hashed n-gram features.

    Deterministic for a fixed seed: features use a keyed hash and training
    is full-batch gradient descent. Single-class input degrades to a
    constant predictor with a warning.
    """
    if isinstance(hyper, dict):
        hyper = NgramHyper.from_dict(hyper)
    elif hyper is None:
        hyper = NgramHyper()
    if len(texts) != len(labels):
        raise ValueError("texts and labels must have equal length")
    if len(texts) < 2:
        raise ValueError("training needs at least two examples")
    distinct = sorted(set(labels))
    if any(lab < 0 for lab in distinct):
        raise ValueError("labels must be non-negative class indices")
    n_classes = hyper.n_classes or max(distinct) + 1
    if max(distinct) >= n_classes:
        raise ValueError("label outside declared class range")
    if len(distinct) == 1:
        warnings.warn("single-class training set; returning a constant predictor")
        return NgramModel(hyper=hyper, n_classes=n_classes, constant_label=distinct[0])

    matrix = _feature_matrix(texts, hyper)
    n = len(texts)
    targets = np.zeros((n, n_classes))
    targets[np.arange(n), np.asarray(labels)] = 1.0
    weights = np.zeros((hyper.dim + 1, n_classes))
    reg_mask = np.ones((hyper.dim + 1, 1))
    reg_mask[hyper.dim, 0] = 0.0  # no penalty on the bias row
    transposed = matrix.T.tocsr()
    for _ in range(hyper.epochs):
        probs = _softmax(matrix @ weights)
        grad = transposed @ (probs - targets) / n + hyper.l2 * reg_mask * weights
        weights -= hyper.learning_rate * grad
    return NgramModel(hyper=hyper, n_classes=n_classes, weights=weights)


def predict_ngram(model: NgramModel, text: str) -> Decision:
    return model.predict(text)


def _requests_transport(url: str, payload: dict, timeout: float) -> dict:
    import requests

    try:
        response = requests.post(url, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(f"request to {url} failed: {exc}") from exc
    if response.status_code >= 500:
        raise TransportError(f"{url} returned {response.status_code}")
    if response.status_code != 200:
        raise ProtocolError(f"{url} returned {response.status_code}: {response.text[:200]}")
    try:
        return response.json()
    except ValueError as exc:
        raise ProtocolError(f"{url} returned malformed JSON") from exc


Transport = Callable[[str, dict, float], dict]


def remote_classify(
    endpoint: str,
    task: str,
    texts: Sequence[str],
    timeout: float = 10.0,
    retries: int = 2,
    max_batch: int = 64,
    n_classes: Optional[int] = None,
    transport: Optional[Transport] = None,
) -> list[Decision]:
    """Classify a batch through the wire protocol, order-preserving.

    The wire task name is free-form (servers may multiplex several models);
    for names outside the built-in task set the class count must be given.
    Transient transport failures are retried up to `retries` extra attempts;
    protocol violations (length mismatch, malformed payload) are never
    retried and never silently truncated. Responses without scores get
    one-hot scores synthesized from the label.
    """
    if not texts:
        raise ValueError("batch must be non-empty")
    if len(texts) > max_batch:
        raise ValueError(f"batch of {len(texts)} exceeds max_batch={max_batch}")
    n_classes = n_classes or TASK_CLASS_COUNTS.get(task)
    if not n_classes:
        raise ConfigurationError(f"task {task!r} is not built-in; pass n_classes")
    send = transport or _requests_transport
    payload = {"task": task, "texts": list(texts)}
    attempts = retries + 1
    last_error: Exception | None = None
    for _ in range(attempts):
        try:
            body = send(endpoint, payload, timeout)
            break
        except TransportError as exc:
            last_error = exc
    else:
        raise TransportError(f"{endpoint} failed after {attempts} attempts: {last_error}")
    return _decode_response(body, task, len(texts), n_classes)


def _decode_response(body: dict, task: str, expected: int, n_classes: int) -> list[Decision]:
    if not isinstance(body, dict) or "labels" not in body:
        raise ProtocolError(f"response missing 'labels': {body!r:.200}")
    labels = body["labels"]
    if not isinstance(labels, list) or len(labels) != expected:
        raise ProtocolError(f"expected {expected} labels, got {len(labels) if isinstance(labels, list) else body!r}")
    scores = body.get("scores")
    if scores is not None and (not isinstance(scores, list) or len(scores) != expected):
        raise ProtocolError(f"expected {expected} score rows")
    decisions = []
    for i, label in enumerate(labels):
        if isinstance(label, bool) or not isinstance(label, int) or not 0 <= label < n_classes:
            raise ProtocolError(f"label {label!r} invalid for task {task!r}")
        if scores is None:
            decisions.append(one_hot_decision(label, n_classes))
        else:
            row = scores[i]
            if not isinstance(row, list) or len(row) != n_classes:
                raise ProtocolError(f"score row {i} has wrong arity")
            try:
                decisions.append(Decision(label=label, scores=tuple(float(s) for s in row)))
            except ValueError as exc:
                raise ProtocolError(f"score row {i} invalid: {exc}") from exc
    return decisions


class RemoteClassifier:
    """Adapter for a remote model endpoint serving one task.

    Large inputs are split into protocol-sized chunks; up to max_in_flight
    chunks are dispatched concurrently, with order-preserving reassembly.
    """

    def __init__(
        self,
        endpoint: str,
        task: str,
        timeout: float = 10.0,
        retries: int = 2,
        max_batch: int = 64,
        n_classes: Optional[int] = None,
        max_in_flight: int = 1,
        transport: Optional[Transport] = None,
    ):
        if timeout <= 0:
            raise ConfigurationError("timeout must be positive")
        if max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be >= 1")
        self.endpoint = endpoint
        self.task = task
        self.timeout = timeout
        self.retries = retries
        self.max_batch = max_batch
        self.n_classes = n_classes or TASK_CLASS_COUNTS.get(task)
        if not self.n_classes:
            raise ConfigurationError(f"task {task!r} is not built-in; pass n_classes")
        self.max_in_flight = max_in_flight
        self.transport = transport

    def predict(self, text: str) -> Decision:
        return self.predict_batch([text])[0]

    def _call(self, chunk: Sequence[str]) -> list[Decision]:
        return remote_classify(
            self.endpoint,
            self.task,
            chunk,
            timeout=self.timeout,
            retries=self.retries,
            max_batch=self.max_batch,
            n_classes=self.n_classes,
            transport=self.transport,
        )

    def predict_batch(self, texts: Sequence[str]) -> list[Decision]:
        chunks = [texts[start : start + self.max_batch]
                  for start in range(0, len(texts), self.max_batch)]
        if self.max_in_flight == 1 or len(chunks) <= 1:
            results = [self._call(chunk) for chunk in chunks]
        else:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                results = list(pool.map(self._call, chunks))
        return [decision for chunk in results for decision in chunk]


def ensemble_consensus(decisions: Sequence[Decision]) -> int:
    """Unanimous vote: positive only when every member says positive."""
    if not decisions:
        raise ConfigurationError("consensus needs at least one member decision")
    return 1 if all(d.label == 1 for d in decisions) else 0


class Ensemble:
    """Unanimity ensemble over classifiers sharing a binary task."""

    def __init__(self, members: Sequence):
        if not members:
            raise ConfigurationError("ensemble needs at least one member")
        self.members = list(members)

    def is_positive(self, text: str) -> bool:
        return self.classify_batch([text])[0]

    def classify_batch(self, texts: Sequence[str]) -> list[bool]:
        votes = [member.predict_batch(texts) for member in self.members]
        return [
            ensemble_consensus([member_votes[i] for member_votes in votes]) == 1
            for i in range(len(texts))
        ]


def build_classifier(spec: ClassifierSpec, transport: Optional[Transport] = None):
    """Instantiate a classifier from its spec. Paths must be pre-resolved."""
    params = spec.parameters
    if spec.kind == "lexicon":
        if "lexicon_path" in params:
            from .linguistics import load_lexicon

            lexicon = load_lexicon(params["lexicon_path"])
        else:
            lexicon = Lexicon(
                name=params.get("name", "inline"),
                entries=frozenset(w.lower() for w in params["entries"]),
                match_mode=params.get("match_mode", "exact"),
            )
        return LexiconClassifier(lexicon, float(params.get("threshold", 0.05)))
    if spec.kind == "ngram":
        model_path = params.get("model_path")
        if not model_path:
            raise ConfigurationError("ngram classifier spec needs model_path to a trained model")
        import pickle

        with open(model_path, "rb") as handle:
            model = pickle.load(handle)
        if not isinstance(model, NgramModel):
            raise ConfigurationError(f"{model_path} does not hold an n-gram model")
        return model
    return RemoteClassifier(
        endpoint=params["endpoint"],
        task=params.get("remote_task", spec.task),
        timeout=float(params.get("timeout", 10.0)),
        retries=int(params.get("retries", 2)),
        max_batch=int(params.get("max_batch", 64)),
        n_classes=params.get("n_classes"),
        max_in_flight=int(params.get("max_in_flight", 1)),
        transport=transport,
    )


def load_ensemble(specs: Sequence[dict | ClassifierSpec], task: str,
                  transport: Optional[Transport] = None) -> Ensemble:
    """Build the unanimity ensemble for a task from config-style specs."""
    members = []
    for raw in specs:
        spec = raw if isinstance(raw, ClassifierSpec) else ClassifierSpec(
            kind=raw["kind"], task=task, parameters=raw.get("parameters", {})
        )
        members.append(build_classifier(spec, transport=transport))
    return Ensemble(members)
