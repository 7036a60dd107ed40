"""Evaluation metrics and the exhaustive optimality oracle.

Everything here is a pure function. The brute-force oracle is deliberately
capped to tiny instances (≤ 8 atoms per label, n ≤ 3) where full
enumeration of cell assignments is exact and instant; it exists so that
trained models can be compared against a number that is provably optimal
rather than merely converged.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

from .conditional import EnsembleState, assign_batch, ensemble_loss_matrix
from .data import Dataset
from .errors import ValidationError
from .models import classify_batch
from .synthetic import FiniteConditionalLaw, MultimodalRegressionSpec, mode_curve, mode_probs

BRUTE_FORCE_MAX_ATOMS = 8
BRUTE_FORCE_MAX_CELLS = 3


def usage_entropy(counts) -> float:
    """Shannon entropy of usage frequencies, normalized by log n.

    Returns 0.0 for a single expert (the normalizer is degenerate there, and
    a one-expert ensemble has no usage diversity to measure).
    """
    counts = np.asarray(counts, dtype=np.float64).reshape(-1)
    if counts.size < 1:
        raise ValidationError("need at least one count")
    if np.any(counts < 0) or counts.sum() <= 0:
        raise ValidationError("counts must be nonnegative and not all zero")
    if counts.size == 1:
        return 0.0
    freqs = counts / counts.sum()
    nz = freqs[freqs > 0]
    h = -float(np.sum(nz * np.log(nz)))
    return h / float(np.log(counts.size))


def match_experts_to_modes(
    state: EnsembleState, grid: np.ndarray, n_modes: int
) -> np.ndarray:
    """Min-cost matching of experts to mode curves.

    Cost of pairing expert i with mode k is the mean squared distance
    between the expert's predictions on the grid and the mode's noise-free
    curve. Returns ``expert_for_mode``: entry k is the expert index paired
    with mode k.
    """
    if state.n_experts != n_modes:
        raise ValidationError(f"matching needs n experts == m modes, got {state.n_experts} vs {n_modes}")
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    preds = np.column_stack([f.forward_batch(grid[:, None])[:, 0] for f in state.experts])
    cost = np.empty((state.n_experts, n_modes))
    for k in range(n_modes):
        cost[:, k] = np.mean((preds - mode_curve(k, grid)[:, None]) ** 2, axis=0)
    rows, cols = linear_sum_assignment(cost)
    expert_for_mode = np.empty(n_modes, dtype=np.int64)
    expert_for_mode[cols] = rows
    return expert_for_mode


def weight_error(state: EnsembleState, spec: MultimodalRegressionSpec, grid) -> float:
    """Mean total-variation distance between the classifier's output and the
    true mode probabilities over the grid, after expert↔mode matching."""
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    expert_for_mode = match_experts_to_modes(state, grid, spec.m)
    probs = classify_batch(state.classifier, grid[:, None])
    truth = mode_probs(spec, grid)
    matched = probs[:, expert_for_mode]
    tv = 0.5 * np.abs(matched - truth).sum(axis=1)
    return float(tv.mean())


def assignment_purity(
    state: EnsembleState, dataset: Dataset, expert_for_mode: np.ndarray, loss: str = "squared"
) -> np.ndarray:
    """Per mode: fraction of that mode's samples won by its matched expert.
    Requires the dataset's oracle mode labels."""
    if dataset.modes is None:
        raise ValidationError("purity needs oracle mode labels")
    report = assign_batch(state, dataset.xs, dataset.ys, loss)
    purities = np.empty(len(expert_for_mode))
    for k, i in enumerate(expert_for_mode):
        mask = dataset.modes == k
        if not mask.any():
            raise ValidationError(f"mode {k} has no samples")
        purities[k] = np.mean(report.winners[mask] == i)
    return purities


def expert_mode_rmse(
    state: EnsembleState, dataset: Dataset, expert_for_mode: np.ndarray
) -> np.ndarray:
    """Per mode: RMSE between the matched expert's predictions and the mode's
    noise-free curve, evaluated at that mode's sample inputs."""
    if dataset.modes is None:
        raise ValidationError("rmse needs oracle mode labels")
    out = np.empty(len(expert_for_mode))
    for k, i in enumerate(expert_for_mode):
        mask = dataset.modes == k
        xs = dataset.xs[mask]
        preds = state.experts[i].forward_batch(xs)[:, 0]
        out[k] = np.sqrt(np.mean((preds - mode_curve(k, xs[:, 0])) ** 2))
    return out


def _optimal_label_distortion(points: np.ndarray, weights: np.ndarray, n: int) -> float:
    """Exact optimum of the weighted distortion for one label: enumerate all
    assignments of atoms to n cells; each cell's optimum point is its
    weighted centroid (squared loss)."""
    m = points.shape[0]
    if n >= m:
        return 0.0
    best = np.inf
    for assignment in itertools.product(range(n), repeat=m):
        cells = np.asarray(assignment)
        total = 0.0
        for c in range(n):
            mask = cells == c
            if not mask.any():
                continue
            w = weights[mask]
            centroid = (w[:, None] * points[mask]).sum(axis=0) / w.sum()
            total += float((w * ((points[mask] - centroid) ** 2).sum(axis=1)).sum())
            if total >= best:
                break
        best = min(best, total)
    return best


def brute_force_per_label(law: FiniteConditionalLaw, n: int) -> np.ndarray:
    """Exact per-label optimal distortions, by enumeration."""
    if n < 1 or n > BRUTE_FORCE_MAX_CELLS:
        raise ValidationError(f"cell count {n} outside 1..{BRUTE_FORCE_MAX_CELLS}")
    for l, pts in enumerate(law.atoms):
        if pts.shape[0] > BRUTE_FORCE_MAX_ATOMS:
            raise ValidationError(
                f"label {l} has {pts.shape[0]} atoms; enumeration is capped at {BRUTE_FORCE_MAX_ATOMS}"
            )
    return np.asarray(
        [_optimal_label_distortion(law.atoms[l], law.weights[l], n) for l in range(law.n_labels)]
    )


def brute_force_optimal_delta(law: FiniteConditionalLaw, n: int) -> float:
    """Exact optimal conditional distortion with n points per label, labels
    weighted uniformly (the finite generator's input marginal)."""
    return float(brute_force_per_label(law, n).mean())


def exact_delta(state: EnsembleState, law: FiniteConditionalLaw, loss: str = "squared") -> float:
    """Model distortion against the law itself (not a sample): per label,
    the weighted mean over atoms of the smallest expert loss."""
    total = 0.0
    for l in range(law.n_labels):
        xs = np.full(law.atoms[l].shape[0], l, dtype=np.int64)
        losses = ensemble_loss_matrix(state, xs, law.atoms[l], loss)
        total += float((law.weights[l] * losses.min(axis=1)).sum())
    return total / law.n_labels
