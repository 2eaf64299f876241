"""Batch classifiers: naive Bayes, C4.5-style tree, k-NN, MLP, linear SVM.

Every model follows the same contract: `fit(train)` builds the model from a
Dataset, `predict(instance)` returns a class label, `predict_scores(instance)`
a per-class score vector whose argmax (ties to the lowest class index) is the
prediction. The k-NN and SVM tie rules refine the plain argmax at exact score
ties; see their docstrings.

Mixed-distance convention used by k-NN (batch and windowed): euclidean over
numeric attributes plus a 0/1 overlap term per nominal attribute, i.e.
sqrt(sum((x - y)^2)) + #nominal mismatches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .dataset import AttributeSchema, DataError, Dataset, Instance
from .nbcore import ClassConditionalStats, scores_to_probabilities
from .preprocess import (
    Normalizer,
    OneHotEncoder,
    apply_normalizer,
    apply_one_hot,
    fit_normalizer,
    fit_one_hot,
    stratified_sample,
)


class TrainingError(RuntimeError):
    """Model training diverged or received an unusable dataset."""


def instance_rows(schema: AttributeSchema, instance: Instance):
    """Split one Instance into (numeric row, nominal code row).

    Nominal symbols outside the schema's domain are coded -1; each learner
    documents how it treats them.
    """
    num = np.array([float(instance.values[p]) for p in schema.numeric_positions])
    nom = np.empty(len(schema.nominal_positions), dtype=np.int32)
    for j, p in enumerate(schema.nominal_positions):
        domain = schema.attributes[p].domain
        v = instance.values[p]
        nom[j] = domain.index(v) if v in domain else -1
    return num.reshape(1, -1), nom.reshape(1, -1)


class BatchModel:
    """Shared fit/predict plumbing; subclasses implement _fit and _scores."""

    def __init__(self):
        self.schema: AttributeSchema | None = None

    def fit(self, train: Dataset) -> "BatchModel":
        if len(train) == 0:
            raise TrainingError("cannot fit on an empty dataset")
        self.schema = train.schema
        self._fit(train)
        return self

    def _fit(self, train: Dataset) -> None:
        raise NotImplementedError

    def _scores(self, num: np.ndarray, nom: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _predict_codes(self, num: np.ndarray, nom: np.ndarray) -> np.ndarray:
        return np.argmax(self._scores(num, nom), axis=1)

    def predict_dataset(self, ds: Dataset) -> np.ndarray:
        if not self.schema.same_attributes(ds.schema):
            raise DataError("dataset schema differs from the fitted schema")
        return self._predict_codes(ds.numeric, ds.nominal)

    def predict(self, instance: Instance) -> str:
        num, nom = instance_rows(self.schema, instance)
        return self.schema.class_labels[int(self._predict_codes(num, nom)[0])]

    def predict_scores(self, instance: Instance) -> np.ndarray:
        num, nom = instance_rows(self.schema, instance)
        return self._scores(num, nom)[0]


class NaiveBayes(BatchModel):
    """Gaussian/Laplace naive Bayes.

    Nominal likelihoods use add-one smoothing, numeric likelihoods are
    Gaussian per (class, attribute) with the variance floored, and scores
    are log prior + sum of log likelihoods (exposed as normalized
    probabilities). Statistics are accumulated instance-by-instance through
    the same code path as the streaming variant.
    """

    def _fit(self, train: Dataset) -> None:
        stats = ClassConditionalStats(train.schema)
        for i in range(len(train)):
            stats.update(train.numeric[i], train.nominal[i], int(train.labels[i]))
        self.stats = stats

    def _scores(self, num, nom):
        return scores_to_probabilities(self.stats.log_scores(num, nom))

    def _predict_codes(self, num, nom):
        return np.argmax(self.stats.log_scores(num, nom), axis=1)


# ---------------------------------------------------------------------------
# decision tree


@dataclass(frozen=True)
class TreeConfig:
    min_leaf_instances: int = 2
    use_gain_ratio: bool = True
    pruning: str = "pessimistic"  # or "none"
    confidence: float = 0.25
    max_depth: int | None = None

    def __post_init__(self):
        if self.min_leaf_instances < 1:
            raise ValueError("min_leaf_instances must be >= 1")
        if self.pruning not in ("none", "pessimistic"):
            raise ValueError(f"unknown pruning mode {self.pruning!r}")
        if not 0.0 < self.confidence <= 0.5:
            raise ValueError("confidence must lie in (0, 0.5]")


class _TreeNode:
    __slots__ = ("counts", "majority", "col", "kind", "threshold", "children",
                 "est_errors")

    def __init__(self, counts: np.ndarray):
        self.counts = counts
        self.majority = int(np.argmax(counts))
        self.col = None          # column in the numeric/nominal matrix
        self.kind = None         # "num" or "nom"
        self.threshold = None
        self.children = None
        self.est_errors = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def to_leaf(self):
        self.col = self.kind = self.threshold = self.children = None


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _entropy_rows(rows: np.ndarray) -> np.ndarray:
    tot = rows.sum(axis=1, keepdims=True)
    safe = np.maximum(tot, 1e-300)
    p = rows / safe
    plogp = np.where(rows > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -plogp.sum(axis=1)


def _pessimistic_extra_errors(n: float, e: float, cf: float) -> float:
    """Upper-confidence extra error count for a leaf with n instances, e errors."""
    if n <= 0:
        return 0.0
    if e == 0:
        return n * (1.0 - cf ** (1.0 / n))
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = NormalDist().inv_cdf(1.0 - cf)
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n)
         + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n)
    return r * n - e


class DecisionTree(BatchModel):
    """C4.5-style tree: multiway nominal splits, binary numeric threshold
    splits at class-boundary midpoints, gain-ratio selection (info gain when
    the split info is zero), optional pessimistic pruning by subtree
    replacement. A split is admissible only when at least two branches hold
    min_leaf_instances instances and its information gain is positive.

    At prediction, a nominal value with no branch (unseen at the node, or a
    symbol outside the schema domain) falls back to the node's majority class.
    """

    def __init__(self, config: TreeConfig = TreeConfig()):
        super().__init__()
        self.config = config

    def _fit(self, train: Dataset) -> None:
        self.n_classes = len(train.schema.class_labels)
        num, nom, y = train.numeric, train.nominal, train.labels.astype(np.int64)
        self._nom_domain_sizes = [
            len(train.schema.attributes[p].domain)
            for p in train.schema.nominal_positions
        ]
        self.root = self._grow(num, nom, y)
        if self.config.pruning == "pessimistic":
            self._prune(self.config.confidence)

    def _grow(self, num, nom, y):
        cfg = self.config
        holder: list = [None]
        stack = [(np.arange(len(y)), 0, holder, 0)]
        while stack:
            idx, depth, container, slot = stack.pop()
            counts = np.bincount(y[idx], minlength=self.n_classes)
            node = _TreeNode(counts)
            container[slot] = node
            if (counts > 0).sum() <= 1:
                continue  # pure
            if len(idx) < cfg.min_leaf_instances:
                continue
            if cfg.max_depth is not None and depth >= cfg.max_depth:
                continue
            best = self._best_split(num, nom, y, idx, counts)
            if best is None:
                continue
            kind, col, threshold, parts = best
            node.kind, node.col, node.threshold = kind, col, threshold
            node.children = [None] * len(parts)
            for slot_i, part in enumerate(parts):
                if len(part):
                    stack.append((part, depth + 1, node.children, slot_i))
        return holder[0]

    def _best_split(self, num, nom, y, idx, counts):
        cfg = self.config
        n = len(idx)
        h_parent = _entropy(counts)
        y_sub = y[idx]
        best = None
        best_key = 0.0

        for col, d in enumerate(self._nom_domain_sizes):
            if d < 2:
                continue
            codes = nom[idx, col].astype(np.int64)
            table = np.bincount(codes * self.n_classes + y_sub,
                                minlength=d * self.n_classes
                                ).reshape(d, self.n_classes)
            sizes = table.sum(axis=1)
            if (sizes > 0).sum() < 2 or (sizes >= cfg.min_leaf_instances).sum() < 2:
                continue
            gain = h_parent - float((sizes / n) @ _entropy_rows(table))
            if gain <= 1e-12:
                continue
            split_info = _entropy(sizes)
            key = gain / split_info if cfg.use_gain_ratio and split_info > 1e-12 \
                else gain
            if best is None or key > best_key:
                best_key = key
                parts = [idx[codes == k] for k in range(d)]
                best = ("nom", col, None, parts)

        for col in range(num.shape[1]):
            found = self._best_numeric_cut(num[idx, col], y_sub, counts, h_parent)
            if found is None:
                continue
            gain, split_info, threshold = found
            key = gain / split_info if cfg.use_gain_ratio and split_info > 1e-12 \
                else gain
            if best is None or key > best_key:
                best_key = key
                vals = num[idx, col]
                parts = [idx[vals <= threshold], idx[vals > threshold]]
                best = ("num", col, threshold, parts)
        return best

    def _best_numeric_cut(self, vals, y_sub, counts, h_parent):
        cfg = self.config
        n = len(vals)
        if n < 2 * cfg.min_leaf_instances:
            return None
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y_sub[order]
        chg = np.flatnonzero(sv[1:] != sv[:-1])
        if not len(chg):
            return None
        run_starts = np.concatenate(([0], chg + 1))
        run_min = np.minimum.reduceat(sy, run_starts)
        run_max = np.maximum.reduceat(sy, run_starts)
        pure = np.where(run_min == run_max, run_min, -1)
        boundary = (pure[:-1] == -1) | (pure[1:] == -1) | (pure[:-1] != pure[1:])
        ok = boundary & (chg + 1 >= cfg.min_leaf_instances) \
            & (n - chg - 1 >= cfg.min_leaf_instances)
        cand = chg[ok]
        if not len(cand):
            return None
        # left-side class counts at each candidate cut, via one searchsorted
        # per class over that class's sorted positions
        left = np.empty((len(cand), self.n_classes))
        for c in range(self.n_classes):
            pos_c = np.flatnonzero(sy == c)
            left[:, c] = np.searchsorted(pos_c, cand, side="right")
        right = counts[None, :] - left
        n_left = (cand + 1).astype(np.float64)
        both = _entropy_rows(np.vstack([left, right]))
        m = len(cand)
        gains = h_parent - (n_left * both[:m] + (n - n_left) * both[m:]) / n
        best_i = int(np.argmax(gains))
        gain = float(gains[best_i])
        if gain <= 1e-12:
            return None
        pos = cand[best_i]
        threshold = (sv[pos] + sv[pos + 1]) / 2.0
        split_info = _entropy(np.array([pos + 1, n - pos - 1], dtype=np.float64))
        return gain, split_info, threshold

    def _prune(self, cf: float) -> None:
        stack = [(self.root, False)]
        while stack:
            node, processed = stack.pop()
            n = float(node.counts.sum())
            e = float(n - node.counts.max())
            if node.is_leaf:
                node.est_errors = e + _pessimistic_extra_errors(n, e, cf)
                continue
            if not processed:
                stack.append((node, True))
                stack.extend((c, False) for c in node.children if c is not None)
                continue
            subtree = sum(c.est_errors for c in node.children if c is not None)
            as_leaf = e + _pessimistic_extra_errors(n, e, cf)
            if as_leaf <= subtree + 0.1:
                node.to_leaf()
                node.est_errors = as_leaf
            else:
                node.est_errors = subtree

    def _route(self, num_row, nom_row) -> _TreeNode:
        node = self.root
        while not node.is_leaf:
            if node.kind == "num":
                child = node.children[0] if num_row[node.col] <= node.threshold \
                    else node.children[1]
            else:
                code = int(nom_row[node.col])
                child = node.children[code] if 0 <= code < len(node.children) \
                    else None
            if child is None:
                break
            node = child
        return node

    def _predict_codes(self, num, nom):
        out = np.empty(len(num), dtype=np.int64)
        for i in range(len(num)):
            out[i] = self._route(num[i], nom[i]).majority
        return out

    def _scores(self, num, nom):
        out = np.empty((len(num), self.n_classes))
        for i in range(len(num)):
            node = self._route(num[i], nom[i])
            total = node.counts.sum()
            out[i] = node.counts / total if total else 1.0 / self.n_classes
        return out

    def n_leaves(self) -> int:
        count, stack = 0, [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                count += 1
            else:
                stack.extend(c for c in node.children if c is not None)
        return count

    def depth(self) -> int:
        best, stack = 0, [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if not node.is_leaf:
                stack.extend((c, d + 1) for c in node.children if c is not None)
        return best


# ---------------------------------------------------------------------------
# k nearest neighbors


@dataclass(frozen=True)
class KnnConfig:
    k: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


def mixed_distances(q_num, q_nom, t_num, t_nom) -> np.ndarray:
    """(n_queries, n_train) distances: sqrt(numeric sq. dist) + nominal
    mismatch count."""
    qs = (q_num * q_num).sum(axis=1)
    ts = (t_num * t_num).sum(axis=1)
    sq = qs[:, None] + ts[None, :] - 2.0 * (q_num @ t_num.T)
    np.maximum(sq, 0.0, out=sq)
    dist = np.sqrt(sq)
    for j in range(q_nom.shape[1]):
        dist += q_nom[:, j][:, None] != t_nom[:, j][None, :]
    return dist


def knn_vote(dist: np.ndarray, tie_order: np.ndarray, labels: np.ndarray,
             k: int, n_classes: int) -> tuple[int, np.ndarray]:
    """Majority vote among the k nearest of one query.

    Equal distances are resolved toward the lower `tie_order` value; equal
    vote counts toward the class with the smaller summed neighbor distance,
    then the lower class index. Returns (winner code, vote count vector).
    """
    kth = np.partition(dist, k - 1)[k - 1]
    cand = np.flatnonzero(dist <= kth)
    nb = cand[np.lexsort((tie_order[cand], dist[cand]))[:k]]
    votes = np.bincount(labels[nb], minlength=n_classes).astype(np.float64)
    top = votes.max()
    tied = np.flatnonzero(votes == top)
    if len(tied) > 1:
        sums = np.bincount(labels[nb], weights=dist[nb], minlength=n_classes)
        tied = tied[sums[tied] == sums[tied].min()]
    return int(tied[0]), votes


class KNN(BatchModel):
    """Brute-force k-NN over the mixed distance, majority vote.

    Prediction refines the score-argmax contract at exact vote ties: tied
    classes are separated by smaller summed neighbor distance first, then by
    ascending class index. Scores are vote fractions.
    """

    def __init__(self, config: KnnConfig = KnnConfig(), block: int = 256):
        super().__init__()
        self.config = config
        self.block = block

    def _fit(self, train: Dataset) -> None:
        if self.config.k > len(train):
            raise TrainingError(
                f"k={self.config.k} exceeds training size {len(train)}")
        self.t_num = train.numeric
        self.t_nom = train.nominal
        self.t_labels = train.labels.astype(np.int64)
        self.n_classes = len(train.schema.class_labels)
        self._order = np.arange(len(train))

    def _vote_block(self, num, nom):
        k = self.config.k
        codes = np.empty(len(num), dtype=np.int64)
        votes = np.empty((len(num), self.n_classes))
        for start in range(0, len(num), self.block):
            stop = min(start + self.block, len(num))
            dist = mixed_distances(num[start:stop], nom[start:stop],
                                   self.t_num, self.t_nom)
            for i in range(stop - start):
                c, v = knn_vote(dist[i], self._order, self.t_labels, k,
                                self.n_classes)
                codes[start + i] = c
                votes[start + i] = v / k
        return codes, votes

    def _predict_codes(self, num, nom):
        return self._vote_block(num, nom)[0]

    def _scores(self, num, nom):
        return self._vote_block(num, nom)[1]


# ---------------------------------------------------------------------------
# multilayer perceptron


@dataclass(frozen=True)
class MlpConfig:
    hidden_units: int | None = None  # None: ceil((inputs + classes) / 2)
    learning_rate: float = 0.3
    momentum: float = 0.2
    epochs: int = 10
    seed: int = 1
    sigmoid_slope: float = 1.0

    def __post_init__(self):
        if self.hidden_units is not None and self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def _sigmoid(z: np.ndarray, slope: float) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-slope * z))


def mlp_forward(params, x, slope):
    w1, b1, w2, b2 = params
    hidden = _sigmoid(x @ w1 + b1, slope)
    out = _sigmoid(hidden @ w2 + b2, slope)
    return hidden, out


def mlp_loss(params, x, target, slope) -> float:
    _, out = mlp_forward(params, x, slope)
    return 0.5 * float(((out - target) ** 2).sum())


def mlp_gradients(params, x, target, slope):
    """Backpropagated gradients of the half squared error for one instance."""
    w1, b1, w2, b2 = params
    hidden, out = mlp_forward(params, x, slope)
    delta_out = (out - target) * slope * out * (1.0 - out)
    g_w2 = np.outer(hidden, delta_out)
    g_b2 = delta_out
    delta_hid = (w2 @ delta_out) * slope * hidden * (1.0 - hidden)
    g_w1 = np.outer(x, delta_hid)
    g_b1 = delta_hid
    return g_w1, g_b1, g_w2, g_b2


class MLP(BatchModel):
    """Three-layer feed-forward net, unipolar sigmoid on hidden and output
    layers, trained by per-instance SGD on half squared error with momentum.
    Inputs must be all-numeric (normalize + one-hot encode first).
    """

    def __init__(self, config: MlpConfig = MlpConfig()):
        super().__init__()
        self.config = config

    def _fit(self, train: Dataset) -> None:
        if train.nominal.shape[1]:
            raise TrainingError("MLP requires an all-numeric dataset")
        cfg = self.config
        x = train.numeric
        y = train.labels
        n, d = x.shape
        c = len(train.schema.class_labels)
        h = cfg.hidden_units or math.ceil((d + c) / 2)
        rng = np.random.default_rng(cfg.seed)
        w1 = rng.uniform(-0.5, 0.5, (d, h))
        b1 = rng.uniform(-0.5, 0.5, h)
        w2 = rng.uniform(-0.5, 0.5, (h, c))
        b2 = rng.uniform(-0.5, 0.5, c)
        v_w1 = np.zeros_like(w1)
        v_b1 = np.zeros_like(b1)
        v_w2 = np.zeros_like(w2)
        v_b2 = np.zeros_like(b2)
        targets = np.zeros((n, c))
        targets[np.arange(n), y] = 1.0
        lr, mom, slope = cfg.learning_rate, cfg.momentum, cfg.sigmoid_slope

        for _ in range(cfg.epochs):
            for i in rng.permutation(n):
                xi = x[i]
                hidden = _sigmoid(xi @ w1 + b1, slope)
                out = _sigmoid(hidden @ w2 + b2, slope)
                delta_out = (out - targets[i]) * slope * out * (1.0 - out)
                delta_hid = (w2 @ delta_out) * slope * hidden * (1.0 - hidden)
                v_w2 *= mom
                v_w2 -= lr * np.outer(hidden, delta_out)
                v_b2 *= mom
                v_b2 -= lr * delta_out
                v_w1 *= mom
                v_w1 -= lr * np.outer(xi, delta_hid)
                v_b1 *= mom
                v_b1 -= lr * delta_hid
                w2 += v_w2
                b2 += v_b2
                w1 += v_w1
                b1 += v_b1
            if not (np.isfinite(w1).all() and np.isfinite(w2).all()):
                raise TrainingError(
                    "non-finite weights: learning rate too high for this data")
        self.params = (w1, b1, w2, b2)

    def _scores(self, num, nom):
        w1, b1, w2, b2 = self.params
        slope = self.config.sigmoid_slope
        out = _sigmoid(_sigmoid(num @ w1 + b1, slope) @ w2 + b2, slope)
        return out / out.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# linear soft-margin SVM trained by pairwise dual optimization


@dataclass(frozen=True)
class SvmConfig:
    c: float = 1.0
    tolerance: float = 1e-3
    max_passes: int = 50

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("C must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")


class LinearSVM(BatchModel):
    """Binary linear SVM trained by sequential two-multiplier dual updates.

    Class code 0 maps to -1 and class code 1 to +1 (with the binary variant's
    label order that is normal vs attack). Candidate first multipliers are
    KKT violators; the second is chosen by the largest error difference, with
    deterministic fallbacks over non-bound then all multipliers. Training
    stops when no multiplier moved by more than the tolerance over a full
    pass, or after max_passes passes. A decision value of exactly 0 predicts
    the +1 class.
    """

    _REFRESH_EVERY = 256

    def __init__(self, config: SvmConfig = SvmConfig()):
        super().__init__()
        self.config = config

    def _fit(self, train: Dataset) -> None:
        if train.nominal.shape[1]:
            raise TrainingError("SVM requires an all-numeric dataset")
        if len(train.schema.class_labels) != 2:
            raise TrainingError("SVM requires exactly two classes")
        counts = np.bincount(train.labels, minlength=2)
        if (counts == 0).any():
            raise TrainingError("SVM requires both classes present")
        x = train.numeric
        y = np.where(train.labels == 0, -1.0, 1.0)
        self.w, self.b, self.alpha_, self.passes_ = self._smo(x, y)

    def _smo(self, x, y):
        cfg = self.config
        n, d = x.shape
        c = cfg.c
        tol = cfg.tolerance
        alpha = np.zeros(n)
        w = np.zeros(d)
        b = 0.0
        xsq = (x * x).sum(axis=1)
        e_cache = -y.copy()
        steps = 0

        def exact_e(i):
            return float(x[i] @ w + b - y[i])

        def try_step(i, j):
            nonlocal b, w, steps
            if i == j:
                return 0.0
            ei, ej = exact_e(i), exact_e(j)
            ai, aj = alpha[i], alpha[j]
            if y[i] != y[j]:
                lo, hi = max(0.0, aj - ai), min(c, c + aj - ai)
            else:
                lo, hi = max(0.0, ai + aj - c), min(c, ai + aj)
            if hi - lo < 1e-12:
                return 0.0
            kij = float(x[i] @ x[j])
            eta = xsq[i] + xsq[j] - 2.0 * kij
            if eta <= 1e-15:
                return 0.0
            aj_new = min(max(aj + y[j] * (ei - ej) / eta, lo), hi)
            delta_j = aj_new - aj
            if abs(delta_j) < 1e-12:
                return 0.0
            ai_new = ai + y[i] * y[j] * (aj - aj_new)
            delta_i = ai_new - ai
            b1 = b - ei - y[i] * delta_i * xsq[i] - y[j] * delta_j * kij
            b2 = b - ej - y[i] * delta_i * kij - y[j] * delta_j * xsq[j]
            if 1e-12 < ai_new < c - 1e-12:
                b = b1
            elif 1e-12 < aj_new < c - 1e-12:
                b = b2
            else:
                b = (b1 + b2) / 2.0
            w += y[i] * delta_i * x[i] + y[j] * delta_j * x[j]
            alpha[i], alpha[j] = ai_new, aj_new
            steps += 1
            if steps % self._REFRESH_EVERY == 0:
                e_cache[:] = x @ w + b - y
            else:
                e_cache[i] = exact_e(i)
                e_cache[j] = exact_e(j)
            return abs(delta_j)

        def examine(i):
            ei = exact_e(i)
            r = ei * y[i]
            if not ((r < -tol and alpha[i] < c) or (r > tol and alpha[i] > 0)):
                return 0.0
            gap = np.abs(e_cache - ei)
            gap[i] = -1.0
            moved = try_step(i, int(np.argmax(gap)))
            if moved:
                return moved
            for j in np.flatnonzero((alpha > 1e-12) & (alpha < c - 1e-12)):
                moved = try_step(i, int(j))
                if moved:
                    return moved
            for j in range(n):
                moved = try_step(i, j)
                if moved:
                    return moved
            return 0.0

        passes = 0
        examine_all = True
        while passes < cfg.max_passes:
            e_cache[:] = x @ w + b - y
            max_delta = 0.0
            if examine_all:
                targets = range(n)
            else:
                targets = np.flatnonzero((alpha > 1e-12) & (alpha < c - 1e-12))
            for i in targets:
                max_delta = max(max_delta, examine(int(i)))
            passes += 1
            if examine_all:
                if max_delta <= tol:
                    break
                examine_all = False
            elif max_delta == 0.0:
                examine_all = True
        return w, b, alpha, passes

    def decision_values(self, num: np.ndarray) -> np.ndarray:
        return num @ self.w + self.b

    def _scores(self, num, nom):
        f = self.decision_values(num)
        return np.column_stack([-f, f])

    def _predict_codes(self, num, nom):
        return (self.decision_values(num) >= 0.0).astype(np.int64)


# ---------------------------------------------------------------------------
# preprocessing pipeline wrapper


class Pipeline(BatchModel):
    """Fits per-fold preprocessing on the training split, then the model.

    Optional stages, applied in order: class-stratified training subsample,
    min-max normalization, one-hot encoding. The fitted normalizer/encoder
    transform every later input, so no test data reaches their fitting.
    """

    def __init__(self, model: BatchModel, normalize: bool = False,
                 encode: bool = False, subsample: int | None = None,
                 seed: int = 1):
        super().__init__()
        self.model = model
        self.normalize = normalize
        self.encode = encode
        self.subsample = subsample
        self.seed = seed
        self._normalizer: Normalizer | None = None
        self._encoder: OneHotEncoder | None = None

    def _fit(self, train: Dataset) -> None:
        ds = train
        if self.subsample is not None and len(ds) > self.subsample:
            idx = stratified_sample(ds.labels, self.subsample, self.seed)
            ds = ds.subset(idx, note=f"stratified subsample {self.subsample}")
        if self.normalize:
            self._normalizer = fit_normalizer(ds)
            ds = apply_normalizer(self._normalizer, ds)
        if self.encode:
            self._encoder = fit_one_hot(ds)
            ds = apply_one_hot(self._encoder, ds)
        self.model.fit(ds)

    def _transform(self, ds: Dataset) -> Dataset:
        if self._normalizer is not None:
            ds = apply_normalizer(self._normalizer, ds)
        if self._encoder is not None:
            ds = apply_one_hot(self._encoder, ds)
        return ds

    def predict_dataset(self, ds: Dataset) -> np.ndarray:
        if not self.schema.same_attributes(ds.schema):
            raise DataError("dataset schema differs from the fitted schema")
        return self.model.predict_dataset(self._transform(ds))

    def _predict_codes(self, num, nom):
        raise NotImplementedError  # dataset-level entry points only

    def predict(self, instance: Instance) -> str:
        ds = _single_instance_dataset(self.schema, instance)
        code = int(self.model.predict_dataset(self._transform(ds))[0])
        return self.schema.class_labels[code]

    def predict_scores(self, instance: Instance) -> np.ndarray:
        ds = _single_instance_dataset(self.schema, instance)
        tr = self._transform(ds)
        return self.model._scores(tr.numeric, tr.nominal)[0]


def _single_instance_dataset(schema: AttributeSchema, instance: Instance) -> Dataset:
    num, nom = instance_rows(schema, instance)
    return Dataset(schema, num, nom, np.zeros(1, dtype=np.int32))
