"""Command-line orchestration: fetch, preprocess, rank, batch, stream, report.

Exit codes: 0 success, 1 usage error, 2 data error (missing/corrupt/
unparsable input), 3 runtime failure. Every batch/stream run writes its
artifacts plus a manifest echoing the resolved configuration and input
digests, so identical configurations reproduce identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import urllib.error
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .batch_learners import (
    KNN,
    MLP,
    DecisionTree,
    KnnConfig,
    LinearSVM,
    MlpConfig,
    NaiveBayes,
    Pipeline,
    TrainingError,
)
from .dataset import (
    DataError,
    IntegrityError,
    ParseError,
    fetch_dataset,
    kdd99_schema,
    load_dataset,
    sha256_file,
    write_dataset,
)
from .evaluation import (
    PrequentialTrace,
    annotate_drifts,
    cross_validate,
    prequential_run,
    write_confusion_csv,
    write_trace_csv,
)
from .preprocess import (
    SelectionSpec,
    apply_normalizer,
    apply_variant,
    fit_normalizer,
    oner_rank,
    select_attributes,
    variant,
)
from .stream_learners import (
    BoostConfig,
    HoeffdingTree,
    OzaBoost,
    StreamingNaiveBayes,
    WindowKNN,
    WindowKnnConfig,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

BATCH_ALGOS = ("nb", "j48", "knn", "mlp", "svm")
STREAM_ALGOS = ("snb", "ht", "wknn", "ozaboost")

DEFAULT_URLS = {
    "kdd99-10": "http://kdd.ics.uci.edu/databases/kddcup99/"
                "kddcup.data_10_percent.gz",
    "nsl-kdd": "https://raw.githubusercontent.com/defcom17/NSL_KDD/master/"
               "KDDTrain%2B.txt",
}

# Warm-up length used to fit the stream normalizer for windowed k-NN.
STREAM_NORMALIZE_WARMUP = 1000

SVG_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a batch/stream run, seed included."""

    command: str = "batch"
    data: str = "nsl-kdd"
    variant: str = "v1"
    attrs: str = "selected"
    algo: str = "nb"
    k: int = 3
    folds: int = 10
    alpha: float = 0.95
    seed: int = 1
    out: str = "runs"
    sample: int | None = None


def default_cache_dir() -> Path:
    env = os.environ.get("NIDSBENCH_CACHE")
    return Path(env) if env else Path.home() / ".cache" / "nidsbench"


def resolve_data(data: str, cache_dir: Path | None = None) -> Path:
    """Turn --data into a file path: literal path, or a cached named dataset."""
    p = Path(data)
    if p.is_file():
        return p
    cache = cache_dir if cache_dir is not None else default_cache_dir()
    if data in DEFAULT_URLS:
        hits = sorted(f for f in cache.glob(data + "*")
                      if f.is_file() and not f.name.endswith(".part"))
        if hits:
            return hits[0]
        raise DataError(
            f"dataset {data!r} not in cache {cache}; fetch it first or copy "
            f"the file there (see README)")
    raise DataError(f"no such data file: {data}")


def _load_prepared(cfg: RunConfig):
    """Load + relabel + select per the run configuration."""
    path = resolve_data(cfg.data)
    ds = load_dataset(path, kdd99_schema())
    ds = apply_variant(ds, variant(cfg.variant))
    if cfg.attrs != "all":
        if cfg.attrs == "selected":
            spec = SelectionSpec()
        else:
            spec = SelectionSpec(tuple(int(t) for t in cfg.attrs.split(",")))
        ds = select_attributes(ds, spec)
    return ds, path


def make_batch_model(cfg: RunConfig):
    if cfg.algo == "nb":
        return NaiveBayes()
    if cfg.algo == "j48":
        return DecisionTree()
    if cfg.algo == "knn":
        return Pipeline(KNN(KnnConfig(k=cfg.k)), normalize=True,
                        subsample=cfg.sample, seed=cfg.seed)
    if cfg.algo == "mlp":
        return Pipeline(MLP(MlpConfig(seed=cfg.seed)), normalize=True,
                        encode=True)
    if cfg.algo == "svm":
        return Pipeline(LinearSVM(), normalize=True, encode=True)
    raise ValueError(f"unknown batch algorithm {cfg.algo!r}")


def make_stream_model(schema, cfg: RunConfig):
    if cfg.algo == "snb":
        return StreamingNaiveBayes(schema)
    if cfg.algo == "ht":
        return HoeffdingTree(schema)
    if cfg.algo == "wknn":
        return WindowKNN(schema, WindowKnnConfig(k=cfg.k))
    if cfg.algo == "ozaboost":
        return OzaBoost(schema, BoostConfig(seed=cfg.seed))
    raise ValueError(f"unknown stream algorithm {cfg.algo!r}")


def _run_stem(cfg: RunConfig) -> str:
    data_tag = cfg.data if cfg.data in DEFAULT_URLS else Path(cfg.data).stem
    return f"{data_tag}_{cfg.variant}_{cfg.algo}_s{cfg.seed}"


def _write_manifest(cfg: RunConfig, input_path: Path, out_dir: Path,
                    stem: str) -> Path:
    manifest = {
        "config": asdict(cfg),
        "inputs": {str(input_path): sha256_file(input_path)},
    }
    path = out_dir / f"{stem}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_summary(out_dir: Path, stem: str, payload: dict) -> Path:
    path = out_dir / f"{stem}_summary.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def run_batch(cfg: RunConfig) -> str:
    t0 = time.perf_counter()
    ds, path = _load_prepared(cfg)
    result = cross_validate(ds, lambda: make_batch_model(cfg), cfg.folds,
                            cfg.seed)
    runtime = time.perf_counter() - t0
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = _run_stem(cfg)
    write_confusion_csv(result.confusion, out_dir / f"{stem}_confusion.csv")
    _write_summary(out_dir, stem, {
        "dataset": cfg.data, "variant": cfg.variant, "algorithm": cfg.algo,
        "params": {"folds": cfg.folds, "seed": cfg.seed, "k": cfg.k,
                   "sample": cfg.sample, "attrs": cfg.attrs},
        "accuracy": result.accuracy, "error": result.error,
        "runtime_seconds": runtime, "drift_indices": [],
    })
    _write_manifest(cfg, path, out_dir, stem)
    return (f"batch {cfg.algo} on {cfg.data} {cfg.variant}: "
            f"accuracy={result.accuracy * 100:.2f}% "
            f"error={result.error * 100:.2f}% "
            f"({result.confusion.total} instances, {cfg.folds} folds, "
            f"seed {cfg.seed})")


def run_stream(cfg: RunConfig) -> str:
    t0 = time.perf_counter()
    ds, path = _load_prepared(cfg)
    if cfg.algo == "wknn":
        warm = ds.subset(np.arange(min(STREAM_NORMALIZE_WARMUP, len(ds))),
                         note="normalizer warm-up")
        ds = apply_normalizer(fit_normalizer(warm), ds)
    model = make_stream_model(ds.schema, cfg)
    trace = prequential_run(ds, model, cfg.alpha)
    drifts = annotate_drifts(trace)
    runtime = time.perf_counter() - t0
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = _run_stem(cfg)
    write_trace_csv(trace, out_dir / f"{stem}_trace.csv")
    write_confusion_csv(trace.confusion, out_dir / f"{stem}_confusion.csv")
    emit_svg_curve([(cfg.algo, trace)], out_dir / f"{stem}_curve.svg")
    _write_summary(out_dir, stem, {
        "dataset": cfg.data, "variant": cfg.variant, "algorithm": cfg.algo,
        "params": {"alpha": cfg.alpha, "seed": cfg.seed, "k": cfg.k},
        "accuracy": trace.final_cumulative_accuracy,
        "error": 1.0 - trace.final_cumulative_accuracy,
        "faded_mean": trace.faded_mean,
        "runtime_seconds": runtime, "drift_indices": drifts,
    })
    _write_manifest(cfg, path, out_dir, stem)
    return (f"stream {cfg.algo} on {cfg.data} {cfg.variant} alpha={cfg.alpha}: "
            f"accuracy={trace.final_cumulative_accuracy * 100:.2f}% "
            f"faded-mean={trace.faded_mean * 100:.2f}% "
            f"drifts={drifts} ({len(trace)} instances, seed {cfg.seed})")


# ---------------------------------------------------------------------------
# SVG emission


def _svg_polyline(series: np.ndarray, color: str, x0, y0, w, h, n_max,
                  every: int) -> str:
    pts = []
    idx = list(range(0, len(series), every))
    if idx[-1] != len(series) - 1:
        idx.append(len(series) - 1)
    for i in idx:
        x = x0 + (i + 1) / n_max * w
        y = y0 + (1.0 - series[i]) * h
        pts.append(f"{x:.2f},{y:.2f}")
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
            f'points="{" ".join(pts)}"/>')


def emit_svg_series(named_series: list[tuple[str, np.ndarray]],
                    path: str | Path, every: int = 100) -> Path:
    """Standalone SVG line chart of faded accuracy vs instance index."""
    if not named_series or any(len(s) == 0 for _, s in named_series):
        raise ValueError("need at least one non-empty trace")
    width, height = 960, 480
    ml, mr, mt, mb = 60, 170, 20, 45
    w, h = width - ml - mr, height - mt - mb
    n_max = max(len(s) for _, s in named_series)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mt}" width="{w}" height="{h}" fill="white" '
        f'stroke="#333"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = mt + (1.0 - frac) * h
        parts.append(f'<line x1="{ml}" y1="{y:.2f}" x2="{ml + w}" y2="{y:.2f}" '
                     f'stroke="#ddd"/>')
        parts.append(f'<text x="{ml - 8}" y="{y + 4:.2f}" font-size="11" '
                     f'text-anchor="end">{frac:.2f}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = ml + frac * w
        tick = int(round(frac * n_max))
        parts.append(f'<text x="{x:.2f}" y="{mt + h + 16}" font-size="11" '
                     f'text-anchor="middle">{tick}</text>')
    parts.append(f'<text x="{ml + w / 2:.2f}" y="{height - 8}" font-size="12" '
                 f'text-anchor="middle">instance index</text>')
    parts.append(f'<text x="14" y="{mt + h / 2:.2f}" font-size="12" '
                 f'transform="rotate(-90 14 {mt + h / 2:.2f})" '
                 f'text-anchor="middle">faded accuracy</text>')
    for i, (name, series) in enumerate(named_series):
        color = SVG_PALETTE[i % len(SVG_PALETTE)]
        parts.append(_svg_polyline(np.asarray(series, dtype=float), color,
                                   ml, mt, w, h, n_max, every))
        ly = mt + 16 + 18 * i
        parts.append(f'<line x1="{ml + w + 10}" y1="{ly}" x2="{ml + w + 34}" '
                     f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{ml + w + 40}" y="{ly + 4}" font-size="12">'
                     f'{name}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path


def emit_svg_curve(traces: list[tuple[str, PrequentialTrace]],
                   path: str | Path, every: int = 100) -> Path:
    """SVG chart of one or more prequential traces (shared alpha assumed)."""
    return emit_svg_series([(name, t.faded) for name, t in traces], path, every)


def emit_report(out_dir: str | Path) -> list[Path]:
    """Combine every *_trace.csv under out_dir: one long CSV with an
    `algorithm` column plus an overlay SVG."""
    out_dir = Path(out_dir)
    trace_files = sorted(out_dir.glob("*_trace.csv"))
    if not trace_files:
        raise DataError(f"no *_trace.csv files under {out_dir}")
    combined = out_dir / "combined_traces.csv"
    series = []
    with open(combined, "w") as out:
        out.write("algorithm,index,correct,faded_accuracy,cumulative_accuracy\n")
        for f in trace_files:
            name = f.name[: -len("_trace.csv")]
            faded = []
            with open(f) as fh:
                next(fh)  # header
                for line in fh:
                    out.write(f"{name},{line}")
                    faded.append(float(line.split(",")[2]))
            series.append((name, np.asarray(faded)))
    svg = emit_svg_series(series, out_dir / "comparison.svg")
    return [combined, svg]


# ---------------------------------------------------------------------------
# argument parsing


class _ExitRequest(Exception):
    def __init__(self, code: int):
        self.code = code


class _Parser(argparse.ArgumentParser):
    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise _ExitRequest(EXIT_OK if status == 0 else EXIT_USAGE)

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise _ExitRequest(EXIT_USAGE)


def _add_common(p: argparse.ArgumentParser, stream: bool):
    p.add_argument("--data", default="kdd99-10" if stream else "nsl-kdd",
                   help="kdd99-10 | nsl-kdd | path to a KDD-format file")
    p.add_argument("--variant", default="v2" if stream else "v1",
                   choices=("v1", "v2", "v3"))
    p.add_argument("--attrs", default="selected",
                   help="selected | all | comma-separated 1-based indices")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--k", type=int, default=3, help="neighbors for knn/wknn")


def build_parser() -> _Parser:
    parser = _Parser(prog="nidsbench",
                     description="KDD99-family intrusion-detection benchmark")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("fetch", help="download and verify a dataset file")
    p.add_argument("--data", required=True, help="kdd99-10 | nsl-kdd")
    p.add_argument("--url", default=None, help="override the default URL")
    p.add_argument("--sha256", required=True,
                   help="expected SHA-256 hex digest of the file")
    p.add_argument("--cache", default=None, help="cache directory")

    p = sub.add_parser("preprocess", help="write a relabeled/reduced CSV")
    _add_common(p, stream=False)
    p.add_argument("--normalize", action="store_true",
                   help="min-max normalize numeric attributes (fit on the "
                        "whole file)")

    p = sub.add_parser("rank", help="print the OneR attribute ranking")
    _add_common(p, stream=False)

    p = sub.add_parser("batch", help="stratified cross-validation run")
    _add_common(p, stream=False)
    p.add_argument("--algo", required=True, choices=BATCH_ALGOS)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--sample", type=int, default=None,
                   help="stratified training subsample size (knn)")

    p = sub.add_parser("stream", help="prequential evaluation run")
    _add_common(p, stream=True)
    p.add_argument("--algo", required=True, choices=STREAM_ALGOS)
    p.add_argument("--alpha", type=float, default=0.95)

    p = sub.add_parser("report", help="combine traces under --out")
    p.add_argument("--out", default="runs")
    return parser


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        command=args.command,
        data=getattr(args, "data", "nsl-kdd"),
        variant=getattr(args, "variant", "v1"),
        attrs=getattr(args, "attrs", "selected"),
        algo=getattr(args, "algo", "nb"),
        k=getattr(args, "k", 3),
        folds=getattr(args, "folds", 10),
        alpha=getattr(args, "alpha", 0.95),
        seed=getattr(args, "seed", 1),
        out=getattr(args, "out", "runs"),
        sample=getattr(args, "sample", None),
    )


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        if not argv:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        attrs = getattr(args, "attrs", "selected")
        if attrs not in ("selected", "all"):
            try:
                SelectionSpec(tuple(int(t) for t in attrs.split(",")))
            except ValueError as exc:
                parser.error(f"bad --attrs value {attrs!r}: {exc}")
        if args.command == "fetch":
            url = args.url or DEFAULT_URLS.get(args.data)
            if url is None:
                parser.error(f"no default URL for {args.data!r}; pass --url")
            cache = Path(args.cache) if args.cache else default_cache_dir()
            path = fetch_dataset(args.data, url, args.sha256, cache)
            print(f"fetched {args.data} -> {path}")
        elif args.command == "preprocess":
            cfg = _config_from_args(args)
            ds, _ = _load_prepared(cfg)
            if args.normalize:
                ds = apply_normalizer(fit_normalizer(ds), ds)
            out_dir = Path(cfg.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            stem = _run_stem(cfg).rsplit("_s", 1)[0]
            csv_path = out_dir / f"{stem}_preprocessed.csv"
            write_dataset(ds, csv_path)
            sidecar = out_dir / f"{stem}_preprocessed.provenance.txt"
            sidecar.write_text(ds.provenance + "\n")
            print(f"wrote {csv_path} ({len(ds)} instances) and {sidecar}")
        elif args.command == "rank":
            cfg = _config_from_args(args)
            ds, _ = _load_prepared(cfg)
            print("rank  attr  name                          accuracy")
            for rank, (idx, acc) in enumerate(oner_rank(ds), start=1):
                name = ds.schema.attributes[idx - 1].name
                print(f"{rank:>4}  {idx:>4}  {name:<28}  {acc * 100:7.3f}%")
        elif args.command == "batch":
            print(run_batch(_config_from_args(args)))
        elif args.command == "stream":
            print(run_stream(_config_from_args(args)))
        elif args.command == "report":
            for p in emit_report(args.out):
                print(f"wrote {p}")
    except _ExitRequest as req:
        return req.code
    except (ParseError, DataError, IntegrityError, urllib.error.URLError,
            FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
