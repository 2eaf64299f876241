"""Shared class-conditional statistics for the naive-Bayes learners.

Both the batch and the streaming naive-Bayes classifiers feed instances
through this accumulator one at a time, so their sufficient statistics are
identical by construction. Numeric attributes keep per-class running
count/mean/M2 (Welford updates); nominal attributes keep per-class value
counts with Laplace add-one smoothing at scoring time.
"""

from __future__ import annotations

import numpy as np

from .dataset import AttributeSchema

VARIANCE_FLOOR = 1e-9
_LOG_2PI = float(np.log(2.0 * np.pi))


class ClassConditionalStats:
    """One-pass per-class statistics over a fixed schema."""

    def __init__(self, schema: AttributeSchema):
        self.schema = schema
        c = len(schema.class_labels)
        n_num = len(schema.numeric_positions)
        self.class_counts = np.zeros(c, dtype=np.int64)
        self.mean = np.zeros((c, n_num))
        self.m2 = np.zeros((c, n_num))
        self.nominal_counts = [
            np.zeros((len(schema.attributes[p].domain), c), dtype=np.int64)
            for p in schema.nominal_positions
        ]

    @property
    def total(self) -> int:
        return int(self.class_counts.sum())

    def update(self, num_row: np.ndarray, nom_row: np.ndarray, label: int) -> None:
        self.class_counts[label] += 1
        n = self.class_counts[label]
        delta = num_row - self.mean[label]
        self.mean[label] += delta / n
        self.m2[label] += delta * (num_row - self.mean[label])
        for j, counts in enumerate(self.nominal_counts):
            code = nom_row[j]
            if code >= 0:
                counts[code, label] += 1

    def variances(self) -> np.ndarray:
        """Per-(class, attribute) population variance, floored."""
        n = np.maximum(self.class_counts, 1)[:, None]
        return np.maximum(self.m2 / n, VARIANCE_FLOOR)

    def log_scores(self, num_rows: np.ndarray, nom_rows: np.ndarray) -> np.ndarray:
        """(n, C) unnormalized log posteriors: log prior + sum log likelihood.

        Classes never observed score -inf; with no observations at all every
        class scores 0 (a flat tie). Nominal symbols outside a fitted domain
        contribute the Laplace floor 1/(n_c + d).
        """
        n_rows = len(num_rows)
        c = len(self.class_counts)
        total = self.total
        if total == 0:
            return np.zeros((n_rows, c))
        with np.errstate(divide="ignore"):
            scores = np.tile(np.log(self.class_counts / total), (n_rows, 1))
        seen = self.class_counts > 0
        if self.mean.shape[1]:
            var = self.variances()
            diff = num_rows[:, None, :] - self.mean[None, :, :]
            ll = -0.5 * (diff * diff / var[None] + np.log(var)[None] + _LOG_2PI)
            scores[:, seen] += ll.sum(axis=2)[:, seen]
        for j, counts in enumerate(self.nominal_counts):
            d = counts.shape[0]
            smoothed = np.vstack([counts + 1, np.ones((1, c))])  # last row: unseen
            denom = self.class_counts + d
            loglik = np.log(smoothed) - np.log(np.maximum(denom, 1))
            codes = np.where(nom_rows[:, j] >= 0, nom_rows[:, j], d)
            scores[:, seen] += loglik[codes][:, seen]
        scores[:, ~seen] = -np.inf
        return scores


def scores_to_probabilities(log_scores: np.ndarray) -> np.ndarray:
    """Row-normalize log scores into probabilities (flat rows stay uniform)."""
    log_scores = np.atleast_2d(log_scores)
    finite = np.isfinite(log_scores)
    out = np.zeros_like(log_scores)
    for i in range(len(log_scores)):
        row = log_scores[i]
        if not finite[i].any():
            out[i] = 1.0 / row.size
            continue
        m = row[finite[i]].max()
        ex = np.where(finite[i], np.exp(row - m), 0.0)
        out[i] = ex / ex.sum()
    return out
