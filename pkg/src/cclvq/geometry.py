"""Core vector arithmetic for unconditional quantizers.

Points are 1-D float arrays of dimension ``d``; a codebook is an ``(n, d)``
array whose row order is significant (row ``i`` owns quantizer cell ``i``).
All indices returned by this module are 0-based. Ties in nearest-point
assignment are broken toward the smallest index, which makes every operation
deterministic.

Losses: ``"squared"`` is the squared Euclidean distance and is the only loss
for which the Wasserstein-2 identities of :mod:`cclvq.wasserstein` hold.
``"l1"`` (sum of absolute coordinate differences) is accepted by the training
code as a generalized loss but carries no Wasserstein guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError

LOSS_KINDS = ("squared", "l1")

WEIGHT_TOL = 1e-12


def as_points(ys, name: str = "points") -> np.ndarray:
    """Coerce to a finite float64 array of shape (N, d), N >= 1."""
    arr = np.asarray(ys, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None] if arr.size else arr.reshape(0, 1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError(f"{name} must be a nonempty (N, d) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_point(y, name: str = "point") -> np.ndarray:
    """Coerce to a finite float64 vector of shape (d,), d >= 1."""
    arr = np.asarray(y, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValidationError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_codebook(codebook) -> np.ndarray:
    arr = np.asarray(codebook, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None] if arr.size else arr.reshape(0, 1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValidationError("codebook must contain at least one point")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("codebook contains non-finite values")
    return arr


def _check_same_dim(d_left: int, d_right: int, what: str) -> None:
    if d_left != d_right:
        raise DimensionMismatchError(f"{what}: dimension {d_left} != {d_right}")


def loss_values(preds: np.ndarray, ys: np.ndarray, kind: str = "squared") -> np.ndarray:
    """Per-row loss between predictions and targets, both (N, d)."""
    if kind == "squared":
        diff = preds - ys
        return np.einsum("ij,ij->i", diff, diff)
    if kind == "l1":
        return np.abs(preds - ys).sum(axis=1)
    raise ValidationError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def loss_grads(preds: np.ndarray, ys: np.ndarray, kind: str = "squared") -> np.ndarray:
    """Gradient of the loss in the prediction, rowwise: (N, d)."""
    if kind == "squared":
        return 2.0 * (preds - ys)
    if kind == "l1":
        return np.sign(preds - ys)
    raise ValidationError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def pairwise_losses(ys: np.ndarray, codebook: np.ndarray, kind: str = "squared") -> np.ndarray:
    """Loss matrix (N, n) between each sample and each codebook point."""
    diff = ys[:, None, :] - codebook[None, :, :]
    if kind == "squared":
        return np.einsum("ijk,ijk->ij", diff, diff)
    if kind == "l1":
        return np.abs(diff).sum(axis=2)
    raise ValidationError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def nearest_indices(ys, codebook, loss: str = "squared") -> np.ndarray:
    """0-based index of the nearest codebook point for each row of ``ys``.

    Ties go to the smallest index (np.argmin's convention).
    """
    pts = as_points(ys)
    cb = as_codebook(codebook)
    _check_same_dim(pts.shape[1], cb.shape[1], "samples vs codebook")
    return np.argmin(pairwise_losses(pts, cb, loss), axis=1)


def nearest_index(y, codebook, loss: str = "squared") -> int:
    """0-based index of the codebook point nearest to a single point."""
    pt = as_point(y)
    return int(nearest_indices(pt[None, :], codebook, loss)[0])


def project(y, codebook) -> np.ndarray:
    """The nearest codebook point itself (exact row, not a copy of the value)."""
    cb = as_codebook(codebook)
    return cb[nearest_index(y, cb)].copy()


def distortion(ys, codebook, loss: str = "squared") -> float:
    """Mean loss from each sample to its nearest codebook point.

    Under the default squared loss this is the empirical distortion whose
    square root equals the Wasserstein-2 distance to the quantized law.
    """
    pts = as_points(ys)
    cb = as_codebook(codebook)
    _check_same_dim(pts.shape[1], cb.shape[1], "samples vs codebook")
    return float(pairwise_losses(pts, cb, loss).min(axis=1).mean())


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite discrete measure: points (m, d) with nonnegative weights summing to 1.

    Duplicate support points and zero weights are permitted; the Wasserstein
    solver merges/drops them internally.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points, "measure support")
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise ValidationError(
                f"weight count {w.shape[0]} != support size {pts.shape[0]}"
            )
        if not np.all(np.isfinite(w)) or np.any(w < -WEIGHT_TOL):
            raise ValidationError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"weights sum to {w.sum()!r}, expected 1 within {WEIGHT_TOL}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", np.maximum(w, 0.0))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def empirical(cls, ys) -> "DiscreteMeasure":
        """Uniform weights on the given sample points (duplicates kept)."""
        pts = as_points(ys)
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, y) -> "DiscreteMeasure":
        return cls(as_point(y)[None, :], np.array([1.0]))


def quantized_law(ys, codebook) -> DiscreteMeasure:
    """Law of the nearest-point projection under the empirical distribution.

    Atom ``i`` sits at codebook point ``i`` with weight equal to the fraction
    of samples assigned to cell ``i``; zero-weight atoms are retained.
    """
    pts = as_points(ys)
    cb = as_codebook(codebook)
    _check_same_dim(pts.shape[1], cb.shape[1], "samples vs codebook")
    idx = nearest_indices(pts, cb)
    counts = np.bincount(idx, minlength=cb.shape[0]).astype(np.float64)
    return DiscreteMeasure(cb.copy(), counts / pts.shape[0])
