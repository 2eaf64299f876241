"""Stream classifiers driven predict-then-train, one instance at a time.

All four learners share the StreamModel contract: `predict` never mutates
state, `learn` folds one labeled instance into the model, and predictions
break score ties toward the lowest class index. Cold starts (no evidence at
all) predict class index 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import AttributeSchema, Instance
from .batch_learners import instance_rows, knn_vote, mixed_distances
from .nbcore import VARIANCE_FLOOR, ClassConditionalStats, scores_to_probabilities


def hoeffding_bound(value_range: float, delta: float, n: int) -> float:
    """Confidence radius sqrt(R^2 ln(1/delta) / (2n))."""
    if value_range < 0:
        raise ValueError("range must be >= 0")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(value_range * value_range * math.log(1.0 / delta) / (2.0 * n))


def poisson_knuth(lam: float, rng: np.random.Generator, cap: int = 20) -> int:
    """Inverse-transform Poisson draw, capped at `cap`.

    For lambdas large enough that exp(-lam) underflows the loop simply runs
    into the cap, which is the intended behavior.
    """
    if lam <= 0.0:
        return 0
    limit = math.exp(-lam)
    k = 0
    p = 1.0
    while True:
        k += 1
        p *= rng.random()
        if p <= limit:
            return k - 1
        if k > cap:
            return cap


class StreamModel:
    """predict-then-train contract over a fixed schema."""

    def __init__(self, schema: AttributeSchema):
        self.schema = schema
        self.n_classes = len(schema.class_labels)

    def predict_code(self, num_row: np.ndarray, nom_row: np.ndarray) -> int:
        raise NotImplementedError

    def learn_row(self, num_row: np.ndarray, nom_row: np.ndarray,
                  label_code: int) -> None:
        raise NotImplementedError

    def _scores_row(self, num_row: np.ndarray, nom_row: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, instance: Instance) -> str:
        num, nom = instance_rows(self.schema, instance)
        return self.schema.class_labels[self.predict_code(num[0], nom[0])]

    def predict_scores(self, instance: Instance) -> np.ndarray:
        num, nom = instance_rows(self.schema, instance)
        return self._scores_row(num[0], nom[0])

    def learn(self, instance: Instance) -> None:
        num, nom = instance_rows(self.schema, instance)
        self.learn_row(num[0], nom[0], self.schema.label_code(instance.label))


class StreamingNaiveBayes(StreamModel):
    """Naive Bayes with one-pass sufficient-statistic updates.

    Shares the accumulator with the batch learner, so counts, means and M2
    aggregates after a stream equal the batch statistics on the same data
    exactly. Before any instance is seen every class ties at score 0 and
    class index 0 is predicted.
    """

    def __init__(self, schema: AttributeSchema):
        super().__init__(schema)
        self.stats = ClassConditionalStats(schema)

    def predict_code(self, num_row, nom_row):
        scores = self.stats.log_scores(num_row.reshape(1, -1),
                                       nom_row.reshape(1, -1))
        return int(np.argmax(scores[0]))

    def _scores_row(self, num_row, nom_row):
        scores = self.stats.log_scores(num_row.reshape(1, -1),
                                       nom_row.reshape(1, -1))
        return scores_to_probabilities(scores)[0]

    def learn_row(self, num_row, nom_row, label_code):
        self.stats.update(num_row, nom_row, label_code)


# ---------------------------------------------------------------------------
# Hoeffding tree


@dataclass(frozen=True)
class HoeffdingConfig:
    delta: float = 1e-7
    grace_period: int = 200
    tie_threshold: float = 0.05
    leaf_prediction: str = "majority"  # or "naive-bayes"
    numeric_bins: int = 10

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.grace_period < 1:
            raise ValueError("grace_period must be >= 1")
        if self.tie_threshold < 0:
            raise ValueError("tie_threshold must be >= 0")
        if self.leaf_prediction not in ("majority", "naive-bayes"):
            raise ValueError(f"unknown leaf prediction {self.leaf_prediction!r}")


class _HTLeaf:
    __slots__ = ("class_counts", "learned", "last_eval", "mean",
                 "m2", "vmin", "vmax", "nom_counts")

    def __init__(self, n_classes: int, n_num: int, domain_sizes: list[int],
                 startup: np.ndarray | None = None):
        # class_counts includes the (possibly fractional) startup distribution
        # carried over from the parent split; `learned` counts only instances
        # this leaf actually observed.
        self.class_counts = np.zeros(n_classes) if startup is None \
            else startup.astype(np.float64)
        self.learned = np.zeros(n_classes)
        self.last_eval = 0.0
        self.mean = np.zeros((n_classes, n_num))
        self.m2 = np.zeros((n_classes, n_num))
        self.vmin = np.full(n_num, np.inf)
        self.vmax = np.full(n_num, -np.inf)
        self.nom_counts = [np.zeros((d, n_classes)) for d in domain_sizes]

    @property
    def n_learned(self) -> float:
        return float(self.learned.sum())

    def learn(self, num_row, nom_row, y):
        self.class_counts[y] += 1.0
        self.learned[y] += 1.0
        if len(num_row):
            n = self.learned[y]
            delta = num_row - self.mean[y]
            self.mean[y] += delta / n
            self.m2[y] += delta * (num_row - self.mean[y])
            np.minimum(self.vmin, num_row, out=self.vmin)
            np.maximum(self.vmax, num_row, out=self.vmax)
        for j, counts in enumerate(self.nom_counts):
            code = nom_row[j]
            if code >= 0:
                counts[code, y] += 1.0


class _HTSplit:
    __slots__ = ("kind", "col", "threshold", "children", "fallback")

    def __init__(self, kind, col, threshold, children, fallback):
        self.kind = kind
        self.col = col
        self.threshold = threshold
        self.children = children
        self.fallback = fallback  # majority code for unroutable values


def _distribution_entropy(rows: np.ndarray) -> np.ndarray:
    """Entropy (bits) of each row of fractional class counts."""
    rows = np.atleast_2d(rows)
    tot = rows.sum(axis=1, keepdims=True)
    p = rows / np.maximum(tot, 1e-300)
    plogp = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -plogp.sum(axis=1)


class HoeffdingTree(StreamModel):
    """Incremental decision tree with Hoeffding-bound split decisions.

    Leaves keep per-class nominal value counts and per-class Gaussian
    summaries of numeric attributes; every grace_period learned instances a
    leaf compares the two best information gains and splits when their gap
    exceeds the Hoeffding bound (or the bound has shrunk below the tie
    threshold). Numeric candidate thresholds are `numeric_bins` equal-width
    cuts between the observed min and max, with left/right class mass
    estimated from the Gaussians. New children start from the split's
    estimated class distributions, so prediction quality carries over.
    """

    def __init__(self, schema: AttributeSchema,
                 config: HoeffdingConfig = HoeffdingConfig()):
        super().__init__(schema)
        self.config = config
        self._n_num = len(schema.numeric_positions)
        self._domain_sizes = [len(schema.attributes[p].domain)
                              for p in schema.nominal_positions]
        self.root: _HTLeaf | _HTSplit = self._new_leaf(None)
        self.n_splits = 0

    def _new_leaf(self, startup):
        return _HTLeaf(self.n_classes, self._n_num, self._domain_sizes, startup)

    def _route(self, num_row, nom_row):
        """Returns (leaf-or-split, parent, slot): split only when unroutable."""
        node, parent, slot = self.root, None, None
        while isinstance(node, _HTSplit):
            if node.kind == "num":
                branch = 0 if num_row[node.col] <= node.threshold else 1
            else:
                code = int(nom_row[node.col])
                if not 0 <= code < len(node.children):
                    return node, parent, slot
                branch = code
            parent, slot = node, branch
            node = node.children[branch]
        return node, parent, slot

    def predict_code(self, num_row, nom_row):
        node, _, _ = self._route(num_row, nom_row)
        if isinstance(node, _HTSplit):
            return node.fallback
        if self.config.leaf_prediction == "naive-bayes" and node.n_learned > 0:
            return int(np.argmax(self._leaf_nb_scores(node, num_row, nom_row)))
        return int(np.argmax(node.class_counts))

    def _scores_row(self, num_row, nom_row):
        node, _, _ = self._route(num_row, nom_row)
        if isinstance(node, _HTSplit):
            scores = np.zeros(self.n_classes)
            scores[node.fallback] = 1.0
            return scores
        if self.config.leaf_prediction == "naive-bayes" and node.n_learned > 0:
            return scores_to_probabilities(
                self._leaf_nb_scores(node, num_row, nom_row).reshape(1, -1))[0]
        total = node.class_counts.sum()
        if total <= 0:
            return np.full(self.n_classes, 1.0 / self.n_classes)
        return node.class_counts / total

    def _leaf_nb_scores(self, leaf, num_row, nom_row):
        total = leaf.class_counts.sum()
        with np.errstate(divide="ignore"):
            scores = np.log(leaf.class_counts / max(total, 1e-300))
        seen = leaf.learned > 0
        if self._n_num and seen.any():
            var = np.maximum(leaf.m2 / np.maximum(leaf.learned, 1.0)[:, None],
                             VARIANCE_FLOOR)
            diff = num_row[None, :] - leaf.mean
            ll = -0.5 * (diff * diff / var + np.log(var) + math.log(2 * math.pi))
            scores[seen] += ll.sum(axis=1)[seen]
        for j, counts in enumerate(leaf.nom_counts):
            d = counts.shape[0]
            code = int(nom_row[j])
            numer = counts[code] + 1.0 if 0 <= code < d else np.ones(self.n_classes)
            scores[seen] += (np.log(numer) - np.log(leaf.learned + d))[seen]
        return scores

    def learn_row(self, num_row, nom_row, label_code):
        node, parent, slot = self._route(num_row, nom_row)
        if isinstance(node, _HTSplit):
            return  # unroutable nominal code: nothing to learn on
        node.learn(num_row, nom_row, label_code)
        seen = node.n_learned
        if seen - node.last_eval >= self.config.grace_period:
            node.last_eval = seen
            self._attempt_split(node, parent, slot)

    def _attempt_split(self, leaf, parent, slot):
        if (leaf.class_counts > 0).sum() <= 1:
            return
        candidates = []  # (gain, order, builder)
        for j, counts in enumerate(leaf.nom_counts):
            if (counts.sum(axis=1) > 0).sum() < 2:
                continue
            totals = counts.sum(axis=0)
            n = totals.sum()
            sizes = counts.sum(axis=1)
            gain = float(_distribution_entropy(totals)[0]
                         - (sizes / n) @ _distribution_entropy(counts))
            candidates.append((gain, ("nom", j, None, counts.copy())))
        for col in range(self._n_num):
            found = self._numeric_candidate(leaf, col)
            if found is not None:
                candidates.append(found)
        if not candidates:
            return
        candidates.sort(key=lambda t: -t[0])
        best_gain = candidates[0][0]
        second = candidates[1][0] if len(candidates) > 1 else 0.0
        second = max(second, 0.0)  # the no-split option
        if best_gain <= 0.0:
            return
        n_seen = leaf.n_learned
        eps = hoeffding_bound(math.log2(max(self.n_classes, 2)),
                              self.config.delta, int(n_seen))
        if not (best_gain - second > eps or eps < self.config.tie_threshold):
            return
        kind, col, threshold, dists = candidates[0][1]
        if kind == "nom":
            children = [self._new_leaf(dists[k]) for k in range(dists.shape[0])]
        else:
            children = [self._new_leaf(dists[0]), self._new_leaf(dists[1])]
        fallback = int(np.argmax(leaf.class_counts))
        split = _HTSplit(kind, col, threshold, children, fallback)
        if parent is None:
            self.root = split
        else:
            parent.children[slot] = split
        self.n_splits += 1

    def _numeric_candidate(self, leaf, col):
        lo, hi = leaf.vmin[col], leaf.vmax[col]
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            return None
        counts = leaf.learned
        mask = counts > 0
        mu = leaf.mean[:, col]
        sigma = np.sqrt(np.maximum(
            leaf.m2[:, col] / np.maximum(counts, 1.0), VARIANCE_FLOOR))
        n_total = counts.sum()
        parent_h = float(_distribution_entropy(counts)[0])
        bins = self.config.numeric_bins
        best = None
        for i in range(1, bins + 1):
            t = lo + i * (hi - lo) / (bins + 1)
            left = np.zeros(self.n_classes)
            for c in np.flatnonzero(mask):
                if sigma[c] > math.sqrt(VARIANCE_FLOOR):
                    frac = 0.5 * (1.0 + math.erf((t - mu[c])
                                                 / (sigma[c] * math.sqrt(2))))
                else:
                    frac = 1.0 if mu[c] <= t else 0.0
                left[c] = counts[c] * frac
            right = counts - left
            nl, nr = left.sum(), right.sum()
            if nl <= 0 or nr <= 0:
                continue
            gain = parent_h - float(
                nl / n_total * _distribution_entropy(left)[0]
                + nr / n_total * _distribution_entropy(right)[0])
            if best is None or gain > best[0]:
                best = (gain, ("num", col, t, np.vstack([left, right])))
        return best


# ---------------------------------------------------------------------------
# sliding-window k-NN


@dataclass(frozen=True)
class WindowKnnConfig:
    window_size: int = 5000
    k: int = 3

    def __post_init__(self):
        if not self.window_size >= self.k >= 1:
            raise ValueError("need window_size >= k >= 1")


class WindowKNN(StreamModel):
    """k-NN over a FIFO window of the most recent labeled instances.

    Distance and tie rules match the batch k-NN; the tie order among equal
    distances is insertion order (older instances win). An empty window
    predicts class index 0.
    """

    def __init__(self, schema: AttributeSchema,
                 config: WindowKnnConfig = WindowKnnConfig()):
        super().__init__(schema)
        self.config = config
        w = config.window_size
        self._num = np.zeros((w, len(schema.numeric_positions)))
        self._nom = np.zeros((w, len(schema.nominal_positions)), dtype=np.int32)
        self._labels = np.zeros(w, dtype=np.int64)
        self._seq = np.zeros(w, dtype=np.int64)
        self.size = 0
        self._write = 0
        self._counter = 0

    def predict_code(self, num_row, nom_row):
        if self.size == 0:
            return 0
        return self._vote(num_row, nom_row)[0]

    def _scores_row(self, num_row, nom_row):
        if self.size == 0:
            return np.full(self.n_classes, 1.0 / self.n_classes)
        _, votes = self._vote(num_row, nom_row)
        return votes / votes.sum()

    def _vote(self, num_row, nom_row):
        m = self.size
        dist = mixed_distances(num_row.reshape(1, -1), nom_row.reshape(1, -1),
                               self._num[:m], self._nom[:m])[0]
        k = min(self.config.k, m)
        return knn_vote(dist, self._seq[:m], self._labels[:m], k, self.n_classes)

    def learn_row(self, num_row, nom_row, label_code):
        i = self._write
        self._num[i] = num_row
        self._nom[i] = nom_row
        self._labels[i] = label_code
        self._seq[i] = self._counter
        self._counter += 1
        self._write = (self._write + 1) % self.config.window_size
        self.size = min(self.size + 1, self.config.window_size)


# ---------------------------------------------------------------------------
# online boosting


@dataclass(frozen=True)
class BoostConfig:
    n_members: int = 10
    seed: int = 1
    kappa_cap: int = 20

    def __post_init__(self):
        if self.n_members < 1:
            raise ValueError("n_members must be >= 1")


class OzaBoost(StreamModel):
    """Online boosting over StreamModel members.

    Each arriving instance carries weight lambda (starting at 1); every member
    trains on it Poisson(lambda) times (capped), then lambda is rescaled down
    if the member now classifies the instance correctly and up otherwise,
    using the member's accumulated correct/incorrect weight masses. Voting
    weight per member is log((1 - e)/e) of its clamped error estimate;
    members that never saw mass vote with weight 0.
    """

    def __init__(self, schema: AttributeSchema,
                 config: BoostConfig = BoostConfig(),
                 member_factory=None):
        super().__init__(schema)
        self.config = config
        factory = member_factory or (lambda: HoeffdingTree(schema))
        self.members = [factory() for _ in range(config.n_members)]
        self.lam_sc = np.zeros(config.n_members)
        self.lam_sw = np.zeros(config.n_members)
        self._rng = np.random.default_rng(config.seed)

    def member_weights(self) -> np.ndarray:
        mass = self.lam_sc + self.lam_sw
        eps = np.clip(np.divide(self.lam_sw, mass, out=np.zeros_like(mass),
                                where=mass > 0), 1e-10, 1.0 - 1e-10)
        return np.where(mass > 0, np.log((1.0 - eps) / eps), 0.0)

    def _votes(self, num_row, nom_row):
        votes = np.zeros(self.n_classes)
        for m, wt in zip(self.members, self.member_weights()):
            if wt != 0.0:
                votes[m.predict_code(num_row, nom_row)] += wt
        return votes

    def predict_code(self, num_row, nom_row):
        return int(np.argmax(self._votes(num_row, nom_row)))

    def _scores_row(self, num_row, nom_row):
        votes = self._votes(num_row, nom_row)
        total = votes.sum()
        return votes / total if total > 0 else np.full(self.n_classes,
                                                       1.0 / self.n_classes)

    def learn_row(self, num_row, nom_row, label_code):
        lam = 1.0
        for i, member in enumerate(self.members):
            kappa = poisson_knuth(lam, self._rng, self.config.kappa_cap)
            for _ in range(kappa):
                member.learn_row(num_row, nom_row, label_code)
            if member.predict_code(num_row, nom_row) == label_code:
                self.lam_sc[i] += lam
                lam *= (self.lam_sc[i] + self.lam_sw[i]) / (2.0 * self.lam_sc[i])
            else:
                self.lam_sw[i] += lam
                lam *= (self.lam_sc[i] + self.lam_sw[i]) / (2.0 * self.lam_sw[i])
