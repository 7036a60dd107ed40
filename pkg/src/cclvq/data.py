"""Sample containers and deterministic CSV import/export.

A dataset pairs inputs with target points. Inputs are either real vectors
(shape ``(N, p)``) or integer labels over a finite input space (shape
``(N,)``). Targets are always points in R^d, shape ``(N, d)``.

CSV layout: header ``x_0..x_{p-1},y_0..y_{d-1}`` with one sample per row;
label-valued inputs use a single ``x_label`` column instead of ``x_*``.
An optional trailing ``mode`` column carries generator oracle labels and is
never consumed by training code. Floats are written with ``repr`` so that
identical datasets produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(eq=False)
class Dataset:
    xs: np.ndarray
    ys: np.ndarray
    modes: np.ndarray | None = None

    def __post_init__(self):
        xs = np.asarray(self.xs)
        if np.issubdtype(xs.dtype, np.integer):
            xs = xs.astype(np.int64).reshape(-1)
        else:
            xs = np.asarray(xs, dtype=np.float64)
            if xs.ndim == 1:
                xs = xs[:, None]
            if xs.ndim != 2:
                raise ValidationError(f"inputs must be (N,) labels or (N,p) vectors, got shape {xs.shape}")
            if not np.all(np.isfinite(xs)):
                raise ValidationError("inputs contain non-finite values")
        ys = np.asarray(self.ys, dtype=np.float64)
        if ys.ndim == 1:
            ys = ys[:, None]
        if ys.ndim != 2 or not np.all(np.isfinite(ys)):
            raise ValidationError("targets must be a finite (N,d) array")
        if xs.shape[0] != ys.shape[0]:
            raise ValidationError(f"input/target counts differ: {xs.shape[0]} vs {ys.shape[0]}")
        if xs.shape[0] == 0:
            raise ValidationError("dataset is empty")
        if self.modes is not None:
            modes = np.asarray(self.modes, dtype=np.int64).reshape(-1)
            if modes.shape[0] != xs.shape[0]:
                raise ValidationError("mode column length mismatch")
            self.modes = modes
        self.xs, self.ys = xs, ys

    @property
    def n_samples(self) -> int:
        return self.ys.shape[0]

    @property
    def input_kind(self) -> str:
        return "label" if self.xs.ndim == 1 else "vector"

    @property
    def in_dim(self) -> int:
        return 0 if self.input_kind == "label" else self.xs.shape[1]

    @property
    def out_dim(self) -> int:
        return self.ys.shape[1]

    @property
    def n_labels(self) -> int:
        if self.input_kind != "label":
            raise ValidationError("n_labels is only defined for label-valued inputs")
        return int(self.xs.max()) + 1

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            self.xs[idx].copy(),
            self.ys[idx].copy(),
            None if self.modes is None else self.modes[idx].copy(),
        )


def train_heldout_split(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded permutation split; the held-out part takes the last
    ceil(fraction*N) permuted rows. fraction must leave both parts nonempty."""
    if not 0.0 < fraction < 1.0:
        raise ValidationError("held-out fraction must be in (0, 1)")
    n = dataset.n_samples
    n_held = max(1, int(np.ceil(fraction * n)))
    if n_held >= n:
        raise ValidationError(f"held-out fraction {fraction} leaves no training data for N={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.subset(perm[: n - n_held]), dataset.subset(perm[n - n_held :])


def _fmt(v: float) -> str:
    return repr(float(v))


def save_csv(dataset: Dataset, path, include_modes: bool = False) -> None:
    if include_modes and dataset.modes is None:
        raise ValidationError("dataset has no mode column to export")
    if dataset.input_kind == "label":
        x_cols = ["x_label"]
    else:
        x_cols = [f"x_{k}" for k in range(dataset.in_dim)]
    cols = x_cols + [f"y_{k}" for k in range(dataset.out_dim)]
    if include_modes:
        cols.append("mode")
    lines = [",".join(cols)]
    for j in range(dataset.n_samples):
        if dataset.input_kind == "label":
            row = [str(int(dataset.xs[j]))]
        else:
            row = [_fmt(v) for v in dataset.xs[j]]
        row += [_fmt(v) for v in dataset.ys[j]]
        if include_modes:
            row.append(str(int(dataset.modes[j])))
        lines.append(",".join(row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_csv(path) -> Dataset:
    with open(path) as fh:
        raw = [line.rstrip("\n") for line in fh if line.strip()]
    if not raw:
        raise ValidationError(f"{path}: empty dataset file")
    header = raw[0].split(",")
    label_input = header[0] == "x_label"
    n_x = 1 if label_input else sum(1 for c in header if c.startswith("x_"))
    n_y = sum(1 for c in header if c.startswith("y_"))
    has_modes = header[-1] == "mode"
    expected = n_x + n_y + (1 if has_modes else 0)
    if n_x == 0 or n_y == 0 or expected != len(header):
        raise ValidationError(f"{path}: unrecognized dataset header {header!r}")
    xs, ys, modes = [], [], []
    for lineno, line in enumerate(raw[1:], start=2):
        parts = line.split(",")
        if len(parts) != expected:
            raise ValidationError(f"{path}:{lineno}: expected {expected} fields, got {len(parts)}")
        try:
            if label_input:
                xs.append(int(parts[0]))
            else:
                xs.append([float(v) for v in parts[:n_x]])
            ys.append([float(v) for v in parts[n_x : n_x + n_y]])
            if has_modes:
                modes.append(int(parts[-1]))
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return Dataset(
        np.asarray(xs, dtype=np.int64 if label_input else np.float64),
        np.asarray(ys),
        np.asarray(modes, dtype=np.int64) if has_modes else None,
    )
