"""Datasets: CSV ingestion, z-score normalization and Gaussian blobs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` points of dimension ``r`` stored column-wise in ``points`` (r, n).

    ``X`` is the same data as a C-contiguous (n, r) array, which is what the
    kernels consume. ``norm_params`` holds the per-feature ``(mean, std)``
    of the data before :func:`zscore_normalize`.
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    norm_params: Optional[Tuple[np.ndarray, np.ndarray]] = None
    name: str = ""
    X: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, ndmin=2)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-D (r, n) array")
        if pts.shape[1] == 0:
            raise ValueError("dataset has no points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("dataset contains non-finite entries")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        X = np.ascontiguousarray(pts.T)
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (pts.shape[1],):
                raise ValueError(f"expected {pts.shape[1]} labels, got shape {lab.shape}")
            lab = lab.astype(np.int64)
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)
        if self.norm_params is not None:
            mu, sigma = (np.asarray(a, dtype=np.float64) for a in self.norm_params)
            if np.any(sigma <= 0):
                raise ValueError("normalization std entries must be positive")
            object.__setattr__(self, "norm_params", (mu, sigma))

    @classmethod
    def from_rows(cls, X, labels=None, **kwargs) -> "Dataset":
        """Build from an (n, r) array with one point per row."""
        return cls(np.asarray(X, dtype=np.float64).T, labels=labels, **kwargs)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def r(self) -> int:
        return self.points.shape[0]

    @property
    def n_classes(self) -> Optional[int]:
        return None if self.labels is None else int(np.unique(self.labels).size)


def zscore_normalize(ds: Dataset) -> Dataset:
    """Shift each feature by its mean and divide by its population std."""
    X = ds.X
    mu = X.mean(axis=0)
    sigma = np.sqrt(((X - mu) ** 2).mean(axis=0))
    zero = np.flatnonzero(sigma == 0.0)
    if zero.size:
        raise ValueError(f"feature {int(zero[0])} has zero variance; cannot normalize")
    return replace(ds, points=((X - mu) / sigma).T, norm_params=(mu, sigma))


def gaussian_blobs(
    n: int,
    k_true: int,
    r: int = 2,
    sigma: float = 1.0,
    seed: int = 0,
    center_box: float = 10.0,
    min_separation: Optional[float] = None,
    shift: float = 0.0,
) -> Dataset:
    """Isotropic Gaussian clusters around well-spread random centers.

    Centers are drawn uniformly from ``[-center_box, center_box]^r`` and
    rejected until every pair is at least ``min_separation`` apart (default
    ``center_box / sqrt(k_true)``). Points are split as evenly as possible,
    earlier clusters taking the remainder. ``shift`` is added to every
    coordinate afterwards, e.g. to push all squared norms past a low
    format's overflow threshold.
    """
    if k_true < 1 or r < 1:
        raise ValueError("k_true and r must be positive")
    if n < k_true:
        raise ValueError(f"n={n} is smaller than k_true={k_true}")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    if min_separation is None:
        min_separation = center_box / math.sqrt(k_true)
    centers = np.empty((k_true, r))
    placed = 0
    for _ in range(10_000 * k_true):
        cand = rng.uniform(-center_box, center_box, size=r)
        if placed == 0 or np.min(np.linalg.norm(centers[:placed] - cand, axis=1)) >= min_separation:
            centers[placed] = cand
            placed += 1
            if placed == k_true:
                break
    else:
        raise ValueError("could not place centers; lower min_separation or raise center_box")

    sizes = np.full(k_true, n // k_true)
    sizes[: n % k_true] += 1
    labels = np.repeat(np.arange(k_true), sizes)
    X = centers[labels] + sigma * rng.standard_normal((n, r)) + shift
    return Dataset.from_rows(X, labels=labels, name=f"blobs(n={n},k={k_true},r={r},sigma={sigma:g},seed={seed})")


def _parse_cell(text, row, col):
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"non-numeric cell {text!r} at row {row}, column {col}") from None


def _looks_numeric(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def _read_table(path, delimiter, header):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delimiter) if row and any(c.strip() for c in row)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if header is None:
        header = not any(_looks_numeric(c) for c in rows[0])
    start = 1 if header else 0
    body = rows[start:]
    if not body:
        raise ValueError(f"{path}: no data rows")
    width = len(body[0])
    for i, row in enumerate(body, start=start + 1):
        if len(row) != width:
            raise ValueError(f"{path}: ragged table, row {i} has {len(row)} cells, expected {width}")
    return body, start


def load_csv(
    path,
    has_labels: bool = False,
    delimiter: str = ",",
    header: Optional[bool] = None,
    points_as: str = "rows",
) -> Dataset:
    """Read a numeric table.

    ``points_as="rows"`` (the default) reads one point per row with an
    optional trailing integer label column; ``"columns"`` reads one point
    per column with an optional final label row. ``header=None`` skips the
    first line when none of its cells parse as numbers. Error messages give
    1-based row and column positions in the file.
    """
    if points_as not in ("rows", "columns"):
        raise ValueError("points_as must be 'rows' or 'columns'")
    body, start = _read_table(path, delimiter, header)
    table = np.array(
        [[_parse_cell(c.strip(), i, j + 1) for j, c in enumerate(row)] for i, row in enumerate(body, start=start + 1)]
    )
    if points_as == "columns":
        table = table.T
    labels = None
    if has_labels:
        if table.shape[1] < 2:
            raise ValueError(f"{path}: label column requested but the table has a single column")
        lab = table[:, -1]
        if not np.all(lab == np.round(lab)):
            raise ValueError(f"{path}: label column holds non-integer values")
        labels = lab.astype(np.int64)
        table = table[:, :-1]
    return Dataset.from_rows(table, labels=labels, name=Path(path).stem)


def save_csv(ds: Dataset, path, delimiter: str = ",", header: bool = False) -> None:
    """Write one point per row; floats use ``repr`` so reloading is exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        if header:
            cols = [f"x{i}" for i in range(ds.r)]
            w.writerow(cols + (["label"] if ds.labels is not None else []))
        for i, row in enumerate(ds.X):
            cells = [repr(float(v)) for v in row]
            if ds.labels is not None:
                cells.append(str(int(ds.labels[i])))
            w.writerow(cells)


def flatten_image_table(path, scale: float = 255.0, delimiter: str = ",", header: Optional[bool] = None) -> Dataset:
    """Pixel table (one ``R,G,B`` row per pixel) to points in ``[0, 1]^3``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    body, start = _read_table(path, delimiter, header)
    if len(body[0]) != 3:
        raise ValueError(f"{path}: image tables need exactly 3 columns (R,G,B), got {len(body[0])}")
    rgb = np.array([[_parse_cell(c.strip(), i, j + 1) for j, c in enumerate(row)] for i, row in enumerate(body, start=start + 1)])
    return Dataset.from_rows(rgb / scale, name=Path(path).stem, norm_params=None)


def reconstruct_pixels(centers: np.ndarray, labels: np.ndarray, scale: float = 255.0) -> np.ndarray:
    """Segmented image as an (n_pixels, 3) table: each pixel replaced by its center.

    ``centers`` is (k, 3) in the scaled space; the output is in the
    original channel units.
    """
    return np.asarray(centers)[np.asarray(labels)] * scale


def save_pixel_table(pixels: np.ndarray, path, delimiter: str = ",") -> None:
    np.savetxt(path, pixels, delimiter=delimiter, fmt="%.17g")
