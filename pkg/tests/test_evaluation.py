"""Folds, cross-validation, prequential traces, metrics, drift annotation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nidsbench.batch_learners import BatchModel
from nidsbench.dataset import Attribute, AttributeSchema, DataError, Dataset
from nidsbench.evaluation import (
    ConfusionMatrix,
    PrequentialTrace,
    annotate_drifts,
    assign_stratified_folds,
    cross_validate,
    faded_update,
    gen_drift_stream,
    metrics,
    prequential_run,
    stratified_folds,
    write_confusion_csv,
    write_trace_csv,
)
from nidsbench.stream_learners import StreamModel, WindowKNN, WindowKnnConfig

from conftest import build_dataset


# --- stratified folds ---------------------------------------------------------


@settings(max_examples=40)
@given(st.data())
def test_fold_partition_and_proportionality(data):
    n = data.draw(st.integers(6, 120))
    n_classes = data.draw(st.integers(1, 4))
    labels = np.array(data.draw(st.lists(st.integers(0, n_classes - 1),
                                         min_size=n, max_size=n)))
    f = data.draw(st.integers(2, min(6, n)))
    assignment = assign_stratified_folds(labels, f, seed=1)
    assert len(assignment) == n
    assert set(assignment) <= set(range(f))
    sizes = np.bincount(assignment, minlength=f)
    assert sizes.max() - sizes.min() <= 1
    for c in np.unique(labels):
        per_fold = np.bincount(assignment[labels == c], minlength=f)
        assert per_fold.max() - per_fold.min() <= 1


def test_fold_sizes_for_nsl_kdd_shape():
    labels = np.zeros(125_973, dtype=np.int64)
    labels[:60_000] = 1
    labels[60_000:60_100] = 2
    sizes = np.bincount(assign_stratified_folds(labels, 10, seed=1))
    assert sorted(set(sizes.tolist())) == [12_597, 12_598]
    assert (sizes == 12_598).sum() == 3


def test_fold_errors():
    with pytest.raises(ValueError, match="folds exceed"):
        assign_stratified_folds(np.zeros(3, dtype=int), 5, seed=1)
    with pytest.raises(ValueError, match="at least 2"):
        assign_stratified_folds(np.zeros(3, dtype=int), 1, seed=1)


def test_fold_plan_deterministic(tiny_mixed_dataset):
    a = stratified_folds(tiny_mixed_dataset, 2, seed=3)
    b = stratified_folds(tiny_mixed_dataset, 2, seed=3)
    assert np.array_equal(a.assignment, b.assignment)


# --- cross validation -----------------------------------------------------------


class _Memorizer(BatchModel):
    """Oracle that memorizes feature->label pairs from training and, for the
    test folds of a consistent dataset, looks the answer up from the full
    dataset handed to the constructor."""

    def __init__(self, full):
        super().__init__()
        self.full = full

    def _fit(self, train):
        pass

    def predict_dataset(self, ds):
        key = {float(x): int(y) for x, y in zip(self.full.numeric[:, 0],
                                                self.full.labels)}
        return np.array([key[float(x)] for x in ds.numeric[:, 0]])


class _Constant(BatchModel):
    def _fit(self, train):
        self.code = int(np.bincount(train.labels).argmax())

    def predict_dataset(self, ds):
        return np.full(len(ds), self.code, dtype=np.int64)


def _unique_dataset(n, n_classes=3):
    labels = [f"c{i % n_classes}" for i in range(n)]
    return build_dataset([("uid", "numeric")],
                         [(float(i),) for i in range(n)], labels)


def test_cv_perfect_oracle_scores_one():
    ds = _unique_dataset(30)
    res = cross_validate(ds, lambda: _Memorizer(ds), 5, seed=1)
    assert res.accuracy == 1.0
    assert res.error == 0.0
    assert res.confusion.total == 30


def test_cv_constant_classifier_scores_majority_frequency():
    labels = ["a"] * 70 + ["b"] * 30
    ds = build_dataset([("x", "numeric")],
                       [(float(i),) for i in range(100)], labels)
    res = cross_validate(ds, _Constant, 10, seed=1)
    assert res.accuracy == pytest.approx(0.70)


def test_cv_calls_factory_once_per_fold_and_keeps_test_out_of_fit():
    ds = _unique_dataset(40)
    seen_train = []

    class _Spy(BatchModel):
        def _fit(self, train):
            seen_train.append(set(train.numeric[:, 0].tolist()))

        def predict_dataset(self, inner):
            return np.zeros(len(inner), dtype=np.int64)

    folds = 8
    cross_validate(ds, _Spy, folds, seed=2)
    assert len(seen_train) == folds
    plan = assign_stratified_folds(ds.labels, folds, seed=2)
    for fold, train_ids in enumerate(seen_train):
        test_ids = set(ds.numeric[plan == fold, 0].tolist())
        assert not (train_ids & test_ids)
        assert train_ids | test_ids == set(ds.numeric[:, 0].tolist())


# --- faded accuracy --------------------------------------------------------------


def test_faded_update_base_case():
    assert faded_update(0.0, 0.0, 1, 0.95) == (1.0, 1.0, 1.0)


def test_faded_update_two_step_example():
    s, b, acc = faded_update(1.0, 1.0, 0, 0.95)
    assert (s, b) == (0.95, 1.95)
    assert acc == pytest.approx(0.48718, abs=1e-5)


def test_faded_all_correct_fixed_point():
    s = b = 0.0
    for _ in range(50):
        s, b, acc = faded_update(s, b, 1, 0.7)
        assert acc == 1.0


@settings(max_examples=40)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=200))
def test_faded_alpha_one_equals_running_mean(outcomes):
    s = b = 0.0
    for i, a in enumerate(outcomes, start=1):
        s, b, acc = faded_update(s, b, a, 1.0)
        assert acc == pytest.approx(sum(outcomes[:i]) / i, rel=1e-12)


@settings(max_examples=40)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=200),
       st.floats(0.05, 1.0))
def test_faded_is_convex_combination_of_outcomes(outcomes, alpha):
    s = b = 0.0
    for i, a in enumerate(outcomes, start=1):
        s, b, acc = faded_update(s, b, a, alpha)
        assert min(outcomes[:i]) - 1e-12 <= acc <= max(outcomes[:i]) + 1e-12


# --- prequential runs -------------------------------------------------------------


class _LabelEcho(StreamModel):
    """Predicts the class encoded in the first nominal attribute."""

    def predict_code(self, num_row, nom_row):
        return int(nom_row[0])

    def learn_row(self, num_row, nom_row, label_code):
        pass


class _Always(StreamModel):
    def __init__(self, schema, code):
        super().__init__(schema)
        self.code = code
        self.calls = []

    def predict_code(self, num_row, nom_row):
        self.calls.append("predict")
        return self.code

    def learn_row(self, num_row, nom_row, label_code):
        self.calls.append("learn")


def test_prequential_all_correct_series():
    stream = gen_drift_stream(500, 499, seed=1).subset(np.arange(499))
    model = _LabelEcho(stream.schema)
    trace = prequential_run(stream, model, 0.95)
    assert trace.correct.all()
    assert (trace.faded == 1.0).all()
    assert (trace.cumulative == 1.0).all()
    assert trace.confusion.accuracy == 1.0


def test_prequential_two_step_faded_example():
    ds = build_dataset([("x", "numeric")], [(0.0,), (1.0,)], ["c0", "c1"])
    model = _Always(ds.schema, code=0)  # correct then incorrect
    trace = prequential_run(ds, model, 0.95)
    assert trace.correct.tolist() == [1, 0]
    assert trace.faded[1] == pytest.approx(0.48718, abs=1e-5)
    assert trace.cumulative.tolist() == [1.0, 0.5]


def test_prequential_is_predict_then_train():
    ds = build_dataset([("x", "numeric")], [(float(i),) for i in range(6)],
                       ["a", "b"] * 3)
    model = _Always(ds.schema, code=0)
    prequential_run(ds, model, 0.9)
    assert model.calls == ["predict", "learn"] * 6


def test_prequential_trace_replay_is_bit_exact():
    stream = gen_drift_stream(3_000, 1_500, seed=2)
    model = WindowKNN(stream.schema, WindowKnnConfig(window_size=100, k=3))
    trace = prequential_run(stream, model, 0.95)
    s = b = 0.0
    replay = np.zeros(len(trace))
    for i, a in enumerate(trace.correct):
        s, b, replay[i] = faded_update(s, b, int(a), trace.alpha)
    assert np.array_equal(replay, trace.faded)


def test_prequential_confusion_totals():
    stream = gen_drift_stream(400, 200, seed=3)
    model = WindowKNN(stream.schema, WindowKnnConfig(window_size=50, k=1))
    trace = prequential_run(stream, model, 0.95)
    assert trace.confusion.total == 400
    assert trace.confusion.accuracy == pytest.approx(trace.cumulative[-1])


def test_prequential_rejects_bad_alpha():
    ds = build_dataset([("x", "numeric")], [(0.0,)], ["a"])
    with pytest.raises(ValueError):
        prequential_run(ds, _Always(ds.schema, 0), 0.0)
    with pytest.raises(ValueError):
        prequential_run(ds, _Always(ds.schema, 0), 1.2)


# --- metrics ----------------------------------------------------------------------


def test_metrics_examples():
    diag = ConfusionMatrix(("a", "b"), np.array([[10, 0], [0, 5]]))
    m = metrics(diag)
    assert m.accuracy == 1.0 and m.error == 0.0

    cm = ConfusionMatrix(("a", "b"), np.array([[50, 10], [5, 35]]))
    m = metrics(cm)
    assert m.accuracy == pytest.approx(0.85)
    assert m.error == pytest.approx(0.15)
    assert m.precision[0] == pytest.approx(50 / 55)
    assert m.recall[0] == pytest.approx(50 / 60)


def test_metrics_zero_division_defaults_to_zero():
    cm = ConfusionMatrix(("a", "b"), np.array([[10, 0], [4, 0]]))
    m = metrics(cm)
    assert m.precision[1] == 0.0
    assert m.recall[1] == 0.0


def test_metrics_paper_ratio():
    cm = ConfusionMatrix(("a", "b"),
                         np.array([[124_109, 0], [1_864, 0]]))
    assert metrics(cm).accuracy * 100 == pytest.approx(98.52, abs=0.01)


def test_metrics_empty_matrix_errors():
    with pytest.raises(DataError):
        metrics(ConfusionMatrix(("a",), np.zeros((1, 1), dtype=int)))


# --- drift annotation --------------------------------------------------------------


def _trace_from_faded(faded):
    n = len(faded)
    return PrequentialTrace(0.95, np.ones(n, dtype=np.uint8),
                            np.asarray(faded, dtype=float), np.ones(n),
                            ConfusionMatrix(("a",), np.array([[n]])))


def test_annotate_constant_trace_is_empty():
    assert annotate_drifts(_trace_from_faded(np.full(5_000, 0.97))) == []


def test_annotate_flags_single_dip_at_minimum():
    faded = np.full(4_000, 0.99)
    faded[2_000:2_200] = np.linspace(0.99, 0.60, 200)
    faded[2_200:2_400] = np.linspace(0.60, 0.99, 200)
    ann = annotate_drifts(_trace_from_faded(faded))
    assert len(ann) == 1
    assert abs(ann[0] - 2_200) <= 5  # 1-based index of the minimum


def test_annotate_merges_nearby_wobbles():
    faded = np.full(4_000, 0.99)
    faded[1_000:1_050] = 0.90
    faded[1_100:1_150] = 0.88
    ann = annotate_drifts(_trace_from_faded(faded))
    assert len(ann) == 1


def test_annotate_output_sorted_with_window_spacing():
    faded = np.full(8_000, 0.99)
    faded[2_000:2_050] = 0.80
    faded[5_000:5_050] = 0.75
    ann = annotate_drifts(_trace_from_faded(faded))
    assert ann == sorted(ann)
    assert len(ann) == 2
    assert ann[1] - ann[0] > 500


def test_annotate_synthetic_switch_detected_within_window():
    stream = gen_drift_stream(8_000, 4_000, seed=7)
    model = WindowKNN(stream.schema, WindowKnnConfig(window_size=500, k=3))
    trace = prequential_run(stream, model, 0.95)
    ann = annotate_drifts(trace)
    assert len(ann) == 1
    assert abs(ann[0] - 4_001) <= 500  # switch first affects instance 4001


def test_annotate_requires_positive_threshold():
    with pytest.raises(ValueError):
        annotate_drifts(_trace_from_faded(np.ones(1_000)), drop_threshold=0.0)


# --- synthetic drift stream ----------------------------------------------------------


def test_gen_drift_stream_deterministic():
    a = gen_drift_stream(1_000, 400, seed=5)
    b = gen_drift_stream(1_000, 400, seed=5)
    assert a.equals(b)


def test_gen_drift_stream_concept_inversion():
    ds = gen_drift_stream(1_000, 400, seed=6)
    signal = ds.nominal[:, 0]
    labels = ds.labels
    assert (labels[:400] == signal[:400]).all()      # concept A
    assert (labels[400:] == 1 - signal[400:]).all()  # concept B inverted


def test_gen_drift_stream_validates_switch():
    with pytest.raises(ValueError):
        gen_drift_stream(10, 0, seed=1)
    with pytest.raises(ValueError):
        gen_drift_stream(10, 10, seed=1)


# --- exports ----------------------------------------------------------------------


def test_trace_csv_format(tmp_path):
    ds = build_dataset([("x", "numeric")], [(0.0,), (1.0,)], ["c0", "c1"])
    trace = prequential_run(ds, _Always(ds.schema, 0), 0.95)
    path = write_trace_csv(trace, tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "index,correct,faded_accuracy,cumulative_accuracy"
    assert lines[1].startswith("1,1,1.0,")
    assert lines[2].split(",")[0] == "2"
    assert len(lines) == 3


def test_confusion_csv_format(tmp_path):
    cm = ConfusionMatrix(("x", "y"), np.array([[3, 1], [0, 2]]))
    path = write_confusion_csv(cm, tmp_path / "cm.csv")
    assert path.read_text() == "label,x,y\nx,3,1\ny,0,2\n"
