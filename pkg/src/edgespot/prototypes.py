"""Few-shot enrollment, open-set scoring, and threshold calibration.

Keywords are represented by prototypes: the arithmetic mean of the K
enrollment embeddings.  Queries are scored by cosine similarity (the
embedding space is angular, so Euclidean-on-normalized would rank
identically) and accepted when the best score clears the store threshold.
Prototypes are stored unnormalized so that merging enrollment lists stays an
exact weighted average; normalization happens inside the cosine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError, StoreError

STORE_HEADER = "edgespot-store v1"


@dataclass(frozen=True)
class Prototype:
    """Mean embedding of K enrollment shots for one keyword."""

    label: str
    vector: np.ndarray
    shots: int

    def __post_init__(self):
        object.__setattr__(
            self, "vector", np.ascontiguousarray(self.vector, dtype=np.float32).ravel()
        )
        if self.shots < 1:
            raise ParameterError(f"prototype '{self.label}' needs shots >= 1")
        if not self.label or any(ch.isspace() for ch in self.label):
            raise ParameterError(f"label must be nonempty without whitespace: {self.label!r}")


def enroll(label: str, embeddings) -> Prototype:
    """Componentwise mean of the enrollment embeddings."""
    vecs = [np.asarray(e, dtype=np.float32).ravel() for e in embeddings]
    if not vecs:
        raise ParameterError(f"cannot enroll '{label}' from an empty embedding list")
    dim = vecs[0].shape[0]
    for i, v in enumerate(vecs):
        if v.shape[0] != dim:
            raise ShapeError("dim", dim, v.shape[0], f"enrollment embedding {i}")
    mean = np.mean(np.stack(vecs), axis=0, dtype=np.float64).astype(np.float32)
    return Prototype(label=label, vector=mean, shots=len(vecs))


def score(e, p: Prototype) -> float:
    """Cosine similarity between a query embedding and a prototype."""
    q = np.asarray(e, dtype=np.float64).ravel()
    v = p.vector.astype(np.float64)
    if q.shape != v.shape:
        raise ShapeError("dim", v.shape[0], q.shape[0], "query embedding")
    qn, vn = np.linalg.norm(q), np.linalg.norm(v)
    if qn == 0.0 or vn == 0.0:
        raise ParameterError("cosine similarity is undefined for a zero-norm vector")
    return float(np.dot(q, v) / (qn * vn))


@dataclass
class Detection:
    """Outcome of scoring a query against every prototype in a store."""

    label: str
    score: float
    accepted: bool
    scores: dict


@dataclass
class PrototypeStore:
    """Label -> prototype map with a shared similarity metric and threshold."""

    prototypes: dict = field(default_factory=dict)
    metric: str = "cosine"
    threshold: float = 0.5

    def __post_init__(self):
        if self.metric != "cosine":
            raise ParameterError(f"unsupported metric '{self.metric}'")
        # Values above the cosine ceiling of 1 are allowed and reject every
        # query; calibration can land there when all negatives score 1.0.
        if not self.threshold >= -1.0:
            raise ParameterError(
                f"cosine threshold must be >= -1, got {self.threshold}"
            )

    def add(self, proto: Prototype) -> None:
        if proto.label in self.prototypes:
            raise StoreError(f"duplicate prototype label '{proto.label}'")
        self.prototypes[proto.label] = proto

    @property
    def labels(self) -> tuple:
        return tuple(sorted(self.prototypes))


def detect(e, store: PrototypeStore) -> Detection:
    """Score against every prototype; accept iff the best score >= threshold.

    Ties break toward the lexicographically smallest label.
    """
    if not store.prototypes:
        raise StoreError("cannot detect against an empty store")
    scores = {}
    best_label, best_score = None, -math.inf
    for label in store.labels:
        s = score(e, store.prototypes[label])
        scores[label] = s
        if s > best_score:
            best_label, best_score = label, s
    return Detection(
        label=best_label,
        score=best_score,
        accepted=best_score >= store.threshold,
        scores=scores,
    )


def max_score(e, store: PrototypeStore) -> float:
    """Best score over all prototypes (the open-set calibration statistic)."""
    return detect(e, store).score


def calibrate_threshold(negative_scores, target_far: float) -> float:
    """Smallest observed score theta with count(scores >= theta) <= n*target_far.

    If even the maximum observed score is exceeded too often (target floor(n*far)
    admits fewer hits than the max's tie count), the next representable value
    above the maximum is returned so the empirical FAR lands at zero.
    """
    scores = np.sort(np.asarray(negative_scores, dtype=np.float64).ravel())
    if scores.size == 0:
        raise ParameterError("threshold calibration needs at least one negative score")
    if not np.all(np.isfinite(scores)):
        raise ParameterError("negative scores must be finite")
    if not 0.0 < target_far < 1.0:
        raise ParameterError(f"target FAR must lie in (0, 1), got {target_far}")
    n = scores.size
    allowed = int(math.floor(n * target_far))
    # count(x >= scores[i]) = n - (first index of scores[i]) under ascending sort
    counts = n - np.searchsorted(scores, scores, side="left")
    ok = np.nonzero(counts <= allowed)[0]
    if ok.size:
        return float(scores[ok[0]])
    return float(np.nextafter(scores[-1], np.inf))


def _fmt_float(v: float) -> str:
    return repr(float(v))


def save_store(store: PrototypeStore, sink) -> None:
    """Versioned text persistence; exact decimal round-trip per component."""
    if not store.prototypes:
        raise StoreError("refusing to save an empty store")
    dims = {p.vector.shape[0] for p in store.prototypes.values()}
    if len(dims) != 1:
        raise StoreError(f"prototypes disagree on embedding dim: {sorted(dims)}")
    dim = dims.pop()
    lines = [
        STORE_HEADER,
        f"metric {store.metric}",
        f"threshold {_fmt_float(store.threshold)}",
        f"dim {dim}",
    ]
    for label in store.labels:
        p = store.prototypes[label]
        vals = " ".join(_fmt_float(v) for v in p.vector)
        lines.append(f"proto {label} {p.shots} {vals}")
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write(text)


def load_store(source) -> PrototypeStore:
    """Parse and validate a store document; errors name the offending line."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != STORE_HEADER:
        raise StoreError(f"unrecognized store header: {lines[0] if lines else '<empty>'!r}")
    fields = {}
    protos = {}
    dim = None
    for ln in lines[1:]:
        parts = ln.split()
        key = parts[0]
        if key in ("metric", "threshold", "dim"):
            if len(parts) != 2:
                raise StoreError(f"malformed header line: {ln!r}")
            fields[key] = parts[1]
        elif key == "proto":
            if dim is None:
                dim = int(fields.get("dim", "-1"))
            if len(parts) < 3:
                raise StoreError(f"malformed prototype line: {ln[:40]!r}")
            label, shots = parts[1], int(parts[2])
            vals = [float(v) for v in parts[3:]]
            if len(vals) != dim:
                raise StoreError(
                    f"prototype '{label}' has {len(vals)} components, expected {dim}"
                )
            if label in protos:
                raise StoreError(f"duplicate prototype label '{label}'")
            protos[label] = Prototype(label, np.array(vals, dtype=np.float32), shots)
        else:
            raise StoreError(f"unknown store record '{key}'")
    for key in ("metric", "threshold", "dim"):
        if key not in fields:
            raise StoreError(f"store is missing the '{key}' header")
    if not protos:
        raise StoreError("store contains no prototypes")
    return PrototypeStore(
        prototypes=protos,
        metric=fields["metric"],
        threshold=float(fields["threshold"]),
    )
