"""Command-line experiment harness.

Subcommands::

    mixkmeans blobs    --out blobs.csv --n 2000 --k-true 10
    mixkmeans run      --data blobs.csv --labels --normalize --k 10 --out table.csv
    mixkmeans sweep    --data blobs.csv --labels --k 10 --out curves.csv
    mixkmeans diagnose --data blobs.csv --labels --k 10

Every experiment cell (mode, k, delta, seed) is an independent fit; output
rows follow the order of the spec, so repeating a spec reproduces the
output files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .data import Dataset, flatten_image_table, gaussian_blobs, load_csv, save_csv, zscore_normalize
from .distance import MODES, PrecisionContext, kernel_matrix_diff
from .kmeans import KMeansConfig, fit
from .metrics import evaluate
from .simfloat import FP64, get_format

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_DELTA = 2.0
SWEEP_DELTAS = (1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0)
IMAGE_K_PRESETS = (5, 10, 20, 50)

# (column header, MetricsReport field)
METRIC_COLUMNS = (
    ("SSE", "sse"),
    ("ARI", "ari"),
    ("AMI", "ami"),
    ("Homogeneity", "homogeneity"),
    ("Completeness", "completeness"),
    ("V-measure", "v_measure"),
    ("eta", "eta"),
)
TABLE_COLUMNS = (
    ("mode", "normalized")
    + tuple(h for h, _ in METRIC_COLUMNS)
    + ("k", "delta", "seed", "low_format", "iterations", "n_warnings", "error")
)
CURVE_COLUMNS = ("delta", "seed", "metric", "value")


class SpecError(ValueError):
    """Invalid experiment specification or unloadable dataset."""


@dataclass(frozen=True)
class ExperimentSpec:
    data: Optional[str] = None
    labels: bool = False
    normalize: bool = False
    k: Union[int, Sequence[int], None] = None
    modes: Tuple[str, ...] = ("working",)
    low_format: str = "fp16"
    deltas: Tuple[float, ...] = (DEFAULT_DELTA,)
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    max_iter: int = 300
    tol: float = 1e-4
    rescue: bool = True
    image: bool = False
    out: Optional[str] = None

    def __post_init__(self):
        if not self.modes:
            raise SpecError("at least one mode is required")
        for m in self.modes:
            if m not in MODES:
                raise SpecError(f"unknown mode {m!r}; choose from {', '.join(MODES)}")
        if not self.seeds:
            raise SpecError("at least one seed is required")
        if not self.deltas:
            raise SpecError("at least one delta is required")
        for d in self.deltas:
            if not d >= 1.0:
                raise SpecError(f"delta must be >= 1, got {d}")
        try:
            get_format(self.low_format)
        except (KeyError, ValueError) as exc:
            raise SpecError(str(exc)) from None
        if self.max_iter < 1:
            raise SpecError("max-iter must be >= 1")
        if not self.tol >= 0:
            raise SpecError("tol must be >= 0")
        ks = self.k
        if ks is not None:
            ks = (int(ks),) if isinstance(ks, (int, np.integer)) else tuple(int(v) for v in ks)
            if not ks or any(v < 1 for v in ks):
                raise SpecError("k must be a positive integer")
        object.__setattr__(self, "k", ks)
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def as_dict(self) -> dict:
        """Echo for output files; the output path is left out so it cannot change the bytes."""
        d = asdict(self)
        del d["out"]
        for key in ("k", "modes", "deltas", "seeds"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


@dataclass
class RunResult:
    mode: str
    normalized: bool
    k: int
    delta: Optional[float]
    seed: int
    low_format: Optional[str]
    metrics: Optional[dict]
    iterations: int = 0
    warnings: List[str] = field(default_factory=list)
    precision_bounds: List[Optional[float]] = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class RunRecord:
    spec: dict
    runs: List[RunResult] = field(default_factory=list)

    def aggregates(self) -> List[dict]:
        """Mean, min and max of each metric per (mode, k, delta), NA values skipped."""
        groups = {}
        for run in self.runs:
            groups.setdefault((run.mode, run.k, run.delta), []).append(run)
        out = []
        for (mode, k, delta), runs in groups.items():
            entry = {"mode": mode, "k": k, "delta": delta, "n_runs": len(runs)}
            for header, key in METRIC_COLUMNS:
                vals = [r.metrics[key] for r in runs if r.metrics is not None]
                vals = [v for v in vals if v is not None and not math.isnan(v)]
                entry[header] = (
                    {"mean": math.fsum(vals) / len(vals), "min": min(vals), "max": max(vals), "n": len(vals)}
                    if vals
                    else None
                )
            out.append(entry)
        return out


def load_dataset(spec: ExperimentSpec) -> Dataset:
    if spec.data is None:
        raise SpecError("no dataset given (use --data PATH)")
    try:
        if spec.image:
            ds = flatten_image_table(spec.data)
        else:
            ds = load_csv(spec.data, has_labels=spec.labels)
    except (OSError, ValueError) as exc:
        raise SpecError(f"cannot load {spec.data}: {exc}") from None
    return ds


def _resolve_ks(spec: ExperimentSpec, ds: Dataset) -> Tuple[int, ...]:
    if spec.k is not None:
        ks = spec.k
    elif spec.image:
        ks = IMAGE_K_PRESETS
    elif ds.labels is not None:
        ks = (ds.n_classes,)
    else:
        raise SpecError("k is required when the dataset has no labels")
    for k in ks:
        if k > ds.n:
            raise SpecError(f"k={k} exceeds the number of points ({ds.n})")
    return ks


def run_experiment(spec: ExperimentSpec, dataset: Optional[Dataset] = None) -> RunRecord:
    """Fit and score every (mode, k, delta, seed) cell of ``spec``.

    Only the mixed mode depends on delta; the other modes run once per
    seed and report ``delta`` as NA. Failures inside a cell are recorded on
    that cell and do not stop the sweep.
    """
    ds = dataset if dataset is not None else load_dataset(spec)
    if spec.normalize:
        try:
            ds = zscore_normalize(ds)
        except ValueError as exc:
            raise SpecError(str(exc)) from None
    ks = _resolve_ks(spec, ds)
    low = get_format(spec.low_format)
    record = RunRecord(spec=spec.as_dict())
    for mode in spec.modes:
        deltas = spec.deltas if mode == "mixed" else (None,)
        for k in ks:
            for delta in deltas:
                for seed in spec.seeds:
                    record.runs.append(_run_cell(ds, spec, mode, k, delta, seed, low))
    return record


def _run_cell(ds, spec, mode, k, delta, seed, low) -> RunResult:
    res = RunResult(
        mode=mode,
        normalized=spec.normalize,
        k=k,
        delta=delta,
        seed=seed,
        low_format=None if mode == "working" else low.name,
        metrics=None,
    )
    try:
        ctx = PrecisionContext(work=FP64, low=low, delta=DEFAULT_DELTA if delta is None else delta)
        cfg = KMeansConfig(k=k, max_iter=spec.max_iter, tol=spec.tol, mode=mode, ctx=ctx, seed=seed, rescue=spec.rescue)
        cl = fit(ds, cfg)
        res.metrics = evaluate(ds.X, cl.labels, cl.centers, ds.labels, cl.eta).as_dict()
        res.iterations = cl.iterations_run
        res.warnings = list(cl.warnings)
        res.precision_bounds = list(cl.precision_bounds)
    except Exception as exc:  # recorded per cell, the sweep goes on
        res.error = f"{type(exc).__name__}: {exc}"
    return res


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _num(v):
    """Float for JSON, with NA (None or NaN) as None."""
    if v is None:
        return None
    v = float(v)
    return None if math.isnan(v) else v


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _table_row(run: RunResult) -> dict:
    row = {"mode": run.mode, "normalized": run.normalized}
    for header, key in METRIC_COLUMNS:
        row[header] = None if run.metrics is None else _num(run.metrics[key])
    row.update(
        k=run.k,
        delta=run.delta,
        seed=run.seed,
        low_format=run.low_format,
        iterations=run.iterations,
        n_warnings=len(run.warnings),
        error=run.error,
    )
    return row


def _write(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def render_table(record: Optional[RunRecord], fmt: str = "csv") -> str:
    runs = [] if record is None else record.runs
    rows = [_table_row(r) for r in runs]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for row in rows:
            w.writerow([_cell(row[c]) for c in TABLE_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "spec": None if record is None else record.spec,
            "columns": list(TABLE_COLUMNS),
            "rows": rows,
            "runs": [] if record is None else [{"warnings": r.warnings} for r in runs],
            "aggregates": [] if record is None else record.aggregates(),
        }
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")


def emit_table(record: Optional[RunRecord], path=None, fmt: str = "csv") -> None:
    """Write one row per run in the fixed column order of ``TABLE_COLUMNS``.

    NA values become empty cells in CSV and ``null`` in JSON.
    """
    _write(render_table(record, fmt), path)


def curve_rows(record: RunRecord) -> List[tuple]:
    """Long-format ``(delta, seed, metric, value)`` rows of the mixed-mode runs."""
    deltas = list(record.spec.get("deltas") or [])
    if len(set(deltas)) != len(deltas):
        raise ValueError(f"duplicate delta values in {deltas}")
    seen = set()
    rows = []
    for run in record.runs:
        if run.delta is None:
            continue
        key = (run.k, run.delta, run.seed)
        if key in seen:
            raise ValueError(f"duplicate delta entry {run.delta} for seed {run.seed}")
        seen.add(key)
        for header, name in METRIC_COLUMNS:
            value = None if run.metrics is None else _num(run.metrics[name])
            rows.append((run.delta, run.seed, header, value))
    return rows


def render_curves(record: RunRecord, fmt: str = "csv") -> str:
    rows = curve_rows(record)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([dict(zip(CURVE_COLUMNS, r)) for r in rows], indent=2, allow_nan=False) + "\n"
    raise ValueError(f"unknown curve format {fmt!r}")


def emit_curves(record: RunRecord, path=None, fmt: str = "csv") -> None:
    _write(render_curves(record, fmt), path)


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


def diagnose(dataset: Dataset, spec: ExperimentSpec, kernel_points: int = 1000) -> dict:
    """Working-mode run with the per-iteration center-update bound stream.

    Also reports the relative Frobenius gap between the difference-formula
    and Gram-formula distance matrices on the first ``kernel_points``
    points, in float64 and in the low format.
    """
    ds = zscore_normalize(dataset) if spec.normalize else dataset
    ks = _resolve_ks(spec, ds)
    k = ks[0]
    low = get_format(spec.low_format)
    cl = fit(ds, KMeansConfig(k=k, max_iter=spec.max_iter, tol=spec.tol, mode="working", seed=spec.seeds[0]))
    bounds = [_num(b) if b is not None else None for b in cl.precision_bounds]
    finite = [b for b in bounds if b is not None]
    sub = ds.X[: min(kernel_points, ds.n)]
    gaps = {}
    for fmt in (FP64, low):
        try:
            gaps[fmt.name] = kernel_matrix_diff(sub, fmt, relative=True)
        except FloatingPointError as exc:
            gaps[fmt.name] = f"overflow: {exc}"
    exceeded = [i + 1 for i, b in enumerate(bounds) if b is not None and low.u > b]
    return {
        "k": k,
        "seed": spec.seeds[0],
        "iterations": cl.iterations_run,
        "low_format": low.name,
        "low_u": low.u,
        "bounds": bounds,
        "min_bound": min(finite) if finite else None,
        "u_exceeds_bound_at": exceeded,
        "kernel_points": int(sub.shape[0]),
        "kernel_rel_frobenius": gaps,
    }


def _format_diagnosis(rep: dict) -> str:
    lines = [f"working-mode run: k={rep['k']} seed={rep['seed']} iterations={rep['iterations']}"]
    lines.append("iteration  center-update precision bound")
    for i, b in enumerate(rep["bounds"], start=1):
        lines.append(f"{i:9d}  {'converged' if b is None else repr(b)}")
    u = rep["low_u"]
    if rep["u_exceeds_bound_at"]:
        its = ", ".join(map(str, rep["u_exceeds_bound_at"]))
        lines.append(f"{rep['low_format']} u = {u!r} exceeds the bound at iterations {its}")
    else:
        lines.append(f"{rep['low_format']} u = {u!r} never exceeds the bound")
    for name, gap in rep["kernel_rel_frobenius"].items():
        shown = gap if isinstance(gap, str) else repr(gap)
        lines.append(f"kernel matrix relative Frobenius gap ({name}, {rep['kernel_points']} points): {shown}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _seed_list(text: str) -> Tuple[int, ...]:
    try:
        seeds = tuple(int(s) for s in text.replace(" ", "").split(",") if s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be a comma-separated list of integers, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _add_experiment_args(p: argparse.ArgumentParser, default_modes, default_deltas) -> None:
    p.add_argument("--data", required=True, help="CSV table, one point per row")
    p.add_argument("--labels", action="store_true", help="last column holds ground-truth labels")
    p.add_argument("--image", action="store_true", help="data is an R,G,B pixel table (k presets 5,10,20,50)")
    p.add_argument("--normalize", action="store_true", help="z-score each feature first")
    p.add_argument("--k", type=int, action="append", help="cluster count (repeatable)")
    p.add_argument("--mode", action="append", choices=MODES, help=f"default: {' '.join(default_modes)}")
    p.add_argument("--low-format", default="fp16", choices=("q52", "fp16", "fp32"))
    p.add_argument("--delta", type=float, action="append", help=f"trigger threshold (repeatable, default {default_deltas})")
    p.add_argument("--seeds", type=_seed_list, default=DEFAULT_SEEDS, help="comma-separated, default 0,1,2,3,4")
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--no-rescue", action="store_true", help="let low-precision overflow failures stand")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.set_defaults(default_modes=default_modes, default_deltas=default_deltas)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixkmeans", description="k-means++ with low and mixed precision distances")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="result table over modes and seeds")
    _add_experiment_args(p, ("working", "low", "mixed"), (DEFAULT_DELTA,))
    p.add_argument("--curves", default=None, help="also write delta curves to this path")

    p = sub.add_parser("sweep", help="delta sweep, long-format curves")
    _add_experiment_args(p, ("mixed",), SWEEP_DELTAS)
    p.add_argument("--table", default=None, help="also write the per-run table to this path")

    p = sub.add_parser("diagnose", help="center-update precision bounds and kernel agreement")
    _add_experiment_args(p, ("working",), (DEFAULT_DELTA,))
    p.add_argument("--kernel-points", type=int, default=1000)

    p = sub.add_parser("blobs", help="write a Gaussian blob dataset with labels")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--k-true", type=int, default=10)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--center-box", type=float, default=10.0)
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def spec_from_args(args) -> ExperimentSpec:
    return ExperimentSpec(
        data=args.data,
        labels=args.labels,
        normalize=args.normalize,
        k=args.k,
        modes=tuple(args.mode) if args.mode else args.default_modes,
        low_format=args.low_format,
        deltas=tuple(args.delta) if args.delta else args.default_deltas,
        seeds=args.seeds,
        max_iter=args.max_iter,
        tol=args.tol,
        rescue=not args.no_rescue,
        image=args.image,
        out=args.out,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "blobs":
            ds = gaussian_blobs(
                args.n, args.k_true, r=args.r, sigma=args.sigma, seed=args.seed,
                center_box=args.center_box, shift=args.shift,
            )
            save_csv(ds, args.out)
            return 0
        spec = spec_from_args(args)
        if args.command == "diagnose":
            rep = diagnose(load_dataset(spec), spec, args.kernel_points)
            text = json.dumps(rep, indent=2) + "\n" if args.format == "json" else _format_diagnosis(rep)
            _write(text, args.out)
            return 0
        if args.command == "sweep" and len(set(spec.deltas)) != len(spec.deltas):
            raise SpecError(f"duplicate delta values in {list(spec.deltas)}")
        record = run_experiment(spec)
        if args.command == "run":
            emit_table(record, args.out, args.format)
            if args.curves:
                emit_curves(record, args.curves, "csv")
        else:
            emit_curves(record, args.out, args.format)
            if args.table:
                emit_table(record, args.table, "csv")
        return 0
    except (SpecError, ValueError, OSError) as exc:
        print(f"mixkmeans: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
