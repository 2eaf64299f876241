#!/usr/bin/env python3
"""Reproduce the batch cross-validation comparison on NSL-KDD.

Runs the five classifiers over the preprocessing variants they apply to
(the SVM is binary-only) under stratified 10-fold cross-validation and
prints an accuracy table. k-NN uses a stratified 20,000-instance training
subsample per fold by default to keep the run desk-scale; pass
--knn-sample 0 for the full-data run.
"""

import argparse
import sys
import time

from nidsbench.batch_learners import (
    KNN,
    MLP,
    DecisionTree,
    KnnConfig,
    MlpConfig,
    LinearSVM,
    NaiveBayes,
    Pipeline,
)
from nidsbench.cli import resolve_data
from nidsbench.dataset import kdd99_schema, load_dataset
from nidsbench.evaluation import cross_validate
from nidsbench.preprocess import SelectionSpec, apply_variant, \
    select_attributes, variant


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="nsl-kdd")
    ap.add_argument("--folds", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--knn-sample", type=int, default=20_000)
    ap.add_argument("--variants", default="v1,v2,v3")
    ap.add_argument("--algos", default="nb,j48,knn3,knn5,knn7,mlp,svm")
    args = ap.parse_args()

    path = resolve_data(args.data)
    raw = load_dataset(path, kdd99_schema())
    print(f"loaded {args.data}: {len(raw)} instances from {path}")

    knn_sample = args.knn_sample or None

    def factory(algo):
        if algo == "nb":
            return NaiveBayes()
        if algo == "j48":
            return DecisionTree()
        if algo.startswith("knn"):
            k = int(algo[3:])
            return Pipeline(KNN(KnnConfig(k=k)), normalize=True,
                            subsample=knn_sample, seed=args.seed)
        if algo == "mlp":
            return Pipeline(MLP(MlpConfig(seed=args.seed)), normalize=True,
                            encode=True)
        if algo == "svm":
            return Pipeline(LinearSVM(), normalize=True, encode=True)
        raise ValueError(algo)

    variants = args.variants.split(",")
    algos = args.algos.split(",")
    print(f"\n{'algorithm':<10}" + "".join(f"{v:>10}" for v in variants))
    for algo in algos:
        cells = []
        for vid in variants:
            if algo == "svm" and vid != "v2":
                cells.append(f"{'-':>10}")
                continue
            ds = select_attributes(apply_variant(raw, variant(vid)),
                                   SelectionSpec())
            t0 = time.perf_counter()
            res = cross_validate(ds, lambda: factory(algo), args.folds,
                                 args.seed)
            dt = time.perf_counter() - t0
            cells.append(f"{res.accuracy * 100:9.2f}%")
            print(f"  [{algo} {vid}: {res.accuracy * 100:.2f}% in {dt:.0f}s]",
                  file=sys.stderr)
        print(f"{algo:<10}" + "".join(cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
