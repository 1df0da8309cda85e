"""Open-set metrics and episodic trial generation.

Metrics operate on raw score lists (detection rate at a false-alarm target,
AUROC via the rank statistic) or on full trial sets (accuracy at a target
FAR, where a positive counts only if it is accepted and argmax-correct).
Negative trials are scored by their maximum similarity over all enrolled
prototypes, the usual open-set convention.  Episode generation is fully
determined by its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, ParameterError, ShapeError
from .prototypes import PrototypeStore, calibrate_threshold, detect, enroll


@dataclass(frozen=True)
class KdConfig:
    """Distillation diagnostics: embedding MSE weighted against an auxiliary
    loss supplied externally."""

    lam: float = 5e-5
    dim: int = 64

    def __post_init__(self):
        if self.lam <= 0:
            raise ParameterError(f"loss weight must be positive, got {self.lam}")


def kd_loss(student, teacher) -> float:
    """Mean squared componentwise difference between two embeddings."""
    s = np.asarray(student, dtype=np.float64).ravel()
    t = np.asarray(teacher, dtype=np.float64).ravel()
    if s.shape != t.shape:
        raise ShapeError("dim", t.shape[0], s.shape[0], "kd_loss")
    return float(np.mean((s - t) ** 2))


def kd_loss_grad(student, teacher) -> np.ndarray:
    """Analytic gradient of :func:`kd_loss` with respect to the student."""
    s = np.asarray(student, dtype=np.float64).ravel()
    t = np.asarray(teacher, dtype=np.float64).ravel()
    if s.shape != t.shape:
        raise ShapeError("dim", t.shape[0], s.shape[0], "kd_loss_grad")
    return 2.0 * (s - t) / s.size


@dataclass(frozen=True)
class DetPoint:
    """One operating point: target FAR, achieved rate, and the threshold."""

    far: float
    rate: float
    threshold: float

    def __post_init__(self):
        if not 0.0 <= self.far <= 1.0:
            raise ParameterError(f"far must lie in [0, 1], got {self.far}")
        if not 0.0 <= self.rate <= 1.0:
            raise ParameterError(f"rate must lie in [0, 1], got {self.rate}")


def det_at_far(pos_scores, neg_scores, far: float) -> DetPoint:
    """Detection rate at the threshold calibrated to the target FAR."""
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    if pos.size == 0:
        raise ParameterError("det_at_far needs at least one positive score")
    theta = calibrate_threshold(neg_scores, far)
    rate = float(np.count_nonzero(pos >= theta)) / pos.size
    return DetPoint(far=far, rate=rate, threshold=theta)


def auroc(pos_scores, neg_scores) -> float:
    """Probability a random positive outscores a random negative, ties at 1/2.

    Computed as the Mann-Whitney rank statistic, which equals trapezoidal
    integration of the ROC curve exactly and involves no binning.
    """
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.sort(np.asarray(neg_scores, dtype=np.float64).ravel())
    if pos.size == 0 or neg.size == 0:
        raise ParameterError("auroc needs nonempty positive and negative score lists")
    below = np.searchsorted(neg, pos, side="left")    # negatives strictly below
    below_eq = np.searchsorted(neg, pos, side="right")
    wins = float(below.sum())
    ties = float((below_eq - below).sum())
    return (wins + 0.5 * ties) / (pos.size * neg.size)


@dataclass(frozen=True)
class Sample:
    """One labeled embedding with a stable source identifier."""

    uid: str
    label: str
    vector: np.ndarray


@dataclass(frozen=True)
class TrialSet:
    """One episode: enrollment shots per target plus disjoint test trials."""

    targets: tuple
    shots: dict                   # label -> list of enrollment Samples
    positives: tuple              # Samples with target labels
    negatives: tuple              # Samples with unknown labels
    seed: int

    def __post_init__(self):
        enrolled = {s.uid for lst in self.shots.values() for s in lst}
        tested = {s.uid for s in self.positives} | {s.uid for s in self.negatives}
        overlap = enrolled & tested
        if overlap:
            raise DatasetError(
                f"enrollment and test partitions share utterances: {sorted(overlap)[:3]}"
            )


def enroll_store(trials: TrialSet, threshold: float = 0.0) -> PrototypeStore:
    """Build a store from the episode's enrollment shots."""
    store = PrototypeStore(threshold=threshold)
    for label in trials.targets:
        store.add(enroll(label, [s.vector for s in trials.shots[label]]))
    return store


def acc_at_far(trials: TrialSet, store: PrototypeStore, far: float) -> DetPoint:
    """Accuracy over positive trials at a FAR-calibrated threshold.

    A positive counts only when it is both accepted (max score >= theta) and
    assigned the correct label by argmax.
    """
    for s in trials.positives:
        if s.label not in store.prototypes:
            raise DatasetError(f"positive trial label '{s.label}' is not enrolled")
    if not trials.negatives:
        raise ParameterError("acc_at_far needs negative trials for calibration")
    neg_scores = [detect(s.vector, store).score for s in trials.negatives]
    theta = calibrate_threshold(neg_scores, far)
    correct = 0
    for s in trials.positives:
        d = detect(s.vector, store)
        if d.score >= theta and d.label == s.label:
            correct += 1
    rate = correct / len(trials.positives) if trials.positives else 0.0
    return DetPoint(far=far, rate=rate, threshold=theta)


def episode_scores(trials: TrialSet, store: PrototypeStore) -> tuple:
    """(positive max-scores, negative max-scores) for score-list metrics."""
    pos = [detect(s.vector, store).score for s in trials.positives]
    neg = [detect(s.vector, store).score for s in trials.negatives]
    return pos, neg


def make_episodes(dataset, n_targets: int, n_unknown: int, k: int,
                  n_trials: int, seed: int) -> list:
    """Sample `n_trials` episodes of K-shot enrollments against unknowns.

    Each trial draws target and unknown labels without replacement, takes K
    enrollment shots per target (excluded from testing), and uses every
    remaining target sample as a positive and every unknown-label sample as a
    negative.
    """
    if n_targets < 1 or n_unknown < 1 or k < 1 or n_trials < 1:
        raise ParameterError("episode counts and K must all be >= 1")
    by_label = {}
    for s in dataset:
        by_label.setdefault(s.label, []).append(s)
    for label, samples in by_label.items():
        uids = {s.uid for s in samples}
        if len(uids) != len(samples):
            raise DatasetError(f"label '{label}' has duplicate sample identifiers")
    labels = sorted(by_label)
    if len(labels) < n_targets + n_unknown:
        raise DatasetError(
            f"need at least {n_targets + n_unknown} distinct labels, have {len(labels)}"
        )
    starved = [lb for lb in labels if len(by_label[lb]) <= k]
    if starved:
        raise DatasetError(
            f"labels need more than K={k} samples to leave test data: {starved[:5]}"
        )
    rng = np.random.default_rng(seed)
    episodes = []
    for trial in range(n_trials):
        chosen = rng.choice(len(labels), size=n_targets + n_unknown, replace=False)
        target_labels = tuple(labels[i] for i in sorted(chosen[:n_targets]))
        unknown_labels = tuple(labels[i] for i in sorted(chosen[n_targets:]))
        shots, positives = {}, []
        for label in target_labels:
            pool = sorted(by_label[label], key=lambda s: s.uid)
            picks = rng.choice(len(pool), size=k, replace=False)
            mask = np.zeros(len(pool), dtype=bool)
            mask[picks] = True
            shots[label] = [pool[i] for i in range(len(pool)) if mask[i]]
            positives.extend(pool[i] for i in range(len(pool)) if not mask[i])
        negatives = []
        for label in unknown_labels:
            negatives.extend(sorted(by_label[label], key=lambda s: s.uid))
        episodes.append(TrialSet(
            targets=target_labels,
            shots=shots,
            positives=tuple(positives),
            negatives=tuple(negatives),
            seed=seed + trial,
        ))
    return episodes


@dataclass(frozen=True)
class MetricSummary:
    """Mean and spread of one metric across trials."""

    name: str
    mean: float
    std: float
    count: int

    def format(self) -> str:
        return f"{self.name}: {self.mean:.4f} +/- {self.std:.4f} ({self.count} trials)"


def summarize(name: str, values) -> MetricSummary:
    """Population mean +/- std across episode results."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ParameterError(f"no values to summarize for '{name}'")
    return MetricSummary(name=name, mean=float(arr.mean()),
                         std=float(arr.std()), count=int(arr.size))
