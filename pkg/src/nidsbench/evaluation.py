"""Evaluation harnesses: stratified cross-validation for batch models and
prequential (test-then-train) runs with fading-factor forgetting for stream
models, plus metrics, drift annotation and a synthetic drift stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import Attribute, AttributeSchema, DataError, Dataset, NOMINAL, NUMERIC


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    labels: tuple[str, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)

    @property
    def error(self) -> float:
        return 1.0 - self.accuracy


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    error: float
    precision: np.ndarray
    recall: np.ndarray


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, error rate and per-class precision/recall (0/0 -> 0)."""
    if cm.total == 0:
        raise DataError("empty confusion matrix")
    diag = np.diag(cm.counts).astype(np.float64)
    col = cm.counts.sum(axis=0).astype(np.float64)
    row = cm.counts.sum(axis=1).astype(np.float64)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    return Metrics(cm.accuracy, cm.error, precision, recall)


# ---------------------------------------------------------------------------
# stratified cross-validation


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    assignment: np.ndarray  # fold index per instance
    seed: int


def assign_stratified_folds(labels: Sequence[int] | np.ndarray, n_folds: int,
                            seed: int) -> np.ndarray:
    """Per-instance fold indices: shuffle within class, deal round-robin.

    The round-robin pointer runs continuously across classes, so both the
    per-class counts and the overall fold sizes differ from perfect
    proportionality by at most one.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if n_folds > n:
        raise ValueError(f"{n_folds} folds exceed {n} instances")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int32)
    cursor = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        for i in idx:
            assignment[i] = cursor % n_folds
            cursor += 1
    return assignment


def stratified_folds(ds: Dataset, n_folds: int, seed: int) -> FoldPlan:
    return FoldPlan(n_folds, assign_stratified_folds(ds.labels, n_folds, seed),
                    seed)


@dataclass(frozen=True)
class CrossValidationResult:
    confusion: ConfusionMatrix
    accuracy: float
    error: float
    fold_accuracies: tuple[float, ...]


def cross_validate(ds: Dataset, model_factory: Callable[[], object],
                   n_folds: int, seed: int) -> CrossValidationResult:
    """Evaluate a fresh model per fold; aggregate one confusion matrix.

    The factory is invoked exactly once per fold and each model is fitted on
    the training folds only, so any preprocessing the model performs inside
    fit (see batch_learners.Pipeline) never sees test-fold data.
    """
    plan = stratified_folds(ds, n_folds, seed)
    c = len(ds.schema.class_labels)
    counts = np.zeros((c, c), dtype=np.int64)
    fold_accs = []
    for fold in range(n_folds):
        test_mask = plan.assignment == fold
        train = ds.subset(np.flatnonzero(~test_mask), note=f"train fold {fold}")
        test = ds.subset(np.flatnonzero(test_mask), note=f"test fold {fold}")
        model = model_factory()
        model.fit(train)
        predicted = model.predict_dataset(test)
        np.add.at(counts, (test.labels, predicted), 1)
        fold_accs.append(float((predicted == test.labels).mean()))
    cm = ConfusionMatrix(ds.schema.class_labels, counts)
    return CrossValidationResult(cm, cm.accuracy, cm.error, tuple(fold_accs))


# ---------------------------------------------------------------------------
# prequential evaluation


def faded_update(s: float, b: float, a: int, alpha: float):
    """One step of the fading-factor recurrence; returns (s', b', accuracy)."""
    s2 = a + alpha * s
    b2 = 1.0 + alpha * b
    return s2, b2, s2 / b2


@dataclass(frozen=True)
class PrequentialTrace:
    """Per-instance prequential record; instance indices are 1-based."""

    alpha: float
    correct: np.ndarray       # uint8
    faded: np.ndarray
    cumulative: np.ndarray
    confusion: ConfusionMatrix

    def __len__(self) -> int:
        return len(self.correct)

    @property
    def final_cumulative_accuracy(self) -> float:
        return float(self.cumulative[-1])

    @property
    def final_faded_accuracy(self) -> float:
        return float(self.faded[-1])

    @property
    def faded_mean(self) -> float:
        return float(self.faded.mean())


def prequential_run(stream: Dataset, model, alpha: float) -> PrequentialTrace:
    """Predict, record, then train on every instance in stream order."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    n = len(stream)
    if n == 0:
        raise DataError("empty stream")
    c = len(stream.schema.class_labels)
    correct = np.zeros(n, dtype=np.uint8)
    faded = np.zeros(n)
    cumulative = np.zeros(n)
    counts = np.zeros((c, c), dtype=np.int64)
    num, nom, labels = stream.numeric, stream.nominal, stream.labels
    s = b = 0.0
    right = 0
    for i in range(n):
        y = int(labels[i])
        pred = model.predict_code(num[i], nom[i])
        a = 1 if pred == y else 0
        correct[i] = a
        right += a
        s, b, faded[i] = faded_update(s, b, a, alpha)
        cumulative[i] = right / (i + 1)
        counts[y, pred] += 1
        model.learn_row(num[i], nom[i], y)
    cm = ConfusionMatrix(stream.schema.class_labels, counts)
    return PrequentialTrace(alpha, correct, faded, cumulative, cm)


def annotate_drifts(trace: PrequentialTrace, drop_threshold: float = 0.02,
                    window: int = 500) -> list[int]:
    """1-based indices of faded-accuracy drop episodes.

    An instance is in a drop when its faded accuracy sits more than
    drop_threshold below the maximum over the preceding `window` instances
    (scanning starts once a full window exists). Overlapping or nearby drops
    (gap < window) merge into one episode, annotated at its lowest point, so
    returned indices are sorted and pairwise more than `window` apart.
    """
    if drop_threshold <= 0:
        raise ValueError("drop_threshold must be positive")
    faded = trace.faded
    n = len(faded)
    if n <= window:
        return []
    windows = np.lib.stride_tricks.sliding_window_view(faded, window)
    roll_max = windows.max(axis=1)  # roll_max[t] = max(faded[t : t + window])
    pos = np.arange(window, n)
    in_drop = faded[pos] < roll_max[: n - window] - drop_threshold
    drops = pos[in_drop]
    if not len(drops):
        return []
    episodes = []
    start = prev = drops[0]
    for d in drops[1:]:
        if d - prev <= window:
            prev = d
        else:
            episodes.append((start, prev))
            start = prev = d
    episodes.append((start, prev))
    out = []
    for lo, hi in episodes:
        seg = faded[lo:hi + 1]
        out.append(int(lo + np.argmin(seg)) + 1)  # 1-based
    return out


def gen_drift_stream(n: int, switch_at: int, seed: int) -> Dataset:
    """Synthetic stream with one abrupt concept inversion.

    One nominal attribute fully determines the class; from position
    `switch_at` (0-based) onward the mapping is inverted. A second nominal
    attribute and one numeric attribute carry seeded noise.
    """
    if not 0 < switch_at < n:
        raise ValueError("need 0 < switch_at < n")
    rng = np.random.default_rng(seed)
    signal = rng.integers(0, 2, n).astype(np.int32)
    noise_sym = rng.integers(0, 2, n).astype(np.int32)
    noise_num = rng.random(n)
    labels = signal.copy()
    labels[switch_at:] = 1 - labels[switch_at:]
    schema = AttributeSchema(
        (
            Attribute("signal", NOMINAL, ("a", "b")),
            Attribute("noise_sym", NOMINAL, ("x", "y")),
            Attribute("noise_num", NUMERIC),
        ),
        ("c0", "c1"),
    )
    return Dataset(schema, noise_num.reshape(-1, 1),
                   np.column_stack([signal, noise_sym]).astype(np.int32),
                   labels.astype(np.int32),
                   provenance=f"synthetic drift stream n={n} switch={switch_at} "
                              f"seed={seed}")


# ---------------------------------------------------------------------------
# exports


def write_trace_csv(trace: PrequentialTrace, path: str | Path,
                    every: int = 1) -> Path:
    """Trace CSV: index,correct,faded_accuracy,cumulative_accuracy."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("index,correct,faded_accuracy,cumulative_accuracy\n")
        for i in range(0, len(trace), every):
            fh.write(f"{i + 1},{trace.correct[i]},{float(trace.faded[i])!r},"
                     f"{float(trace.cumulative[i])!r}\n")
    return path


def write_confusion_csv(cm: ConfusionMatrix, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("label," + ",".join(cm.labels) + "\n")
        for i, lab in enumerate(cm.labels):
            fh.write(lab + "," + ",".join(str(int(v)) for v in cm.counts[i]) + "\n")
    return path
