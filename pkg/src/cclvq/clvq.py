"""Unconditional quantizer training.

The stochastic winner-takes-all recursion, the full-batch Lloyd baseline,
the exact empirical distortion gradient (valid only away from assignment
ties), and the duplicate-and-perturb codebook split used to grow ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TieError, ValidationError
from .geometry import as_codebook, as_point, as_points, distortion, nearest_indices, pairwise_losses

TIE_GAP = 1e-12

SCHEDULES = ("constant", "inverse")


@dataclass(frozen=True)
class ClvqConfig:
    """Settings for the stochastic quantizer recursion.

    ``gamma0`` is the initial learning rate in (0, 1]. With the ``inverse``
    schedule the rate at step t is ``gamma0 / (1 + t / tau)``; ``tau``
    defaults to ``steps / 10``. ``init`` is either ``"random-distinct"``
    (n distinct sample points drawn without replacement) or an explicit
    starting codebook.
    """

    n: int
    gamma0: float = 0.5
    schedule: str = "inverse"
    tau: float | None = None
    steps: int = 10_000
    seed: int = 0
    init: np.ndarray | str = "random-distinct"
    trace_every: int | None = field(default=None)

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not 0.0 < self.gamma0 <= 1.0:
            raise ValidationError("gamma0 must lie in (0, 1]")
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if self.schedule not in SCHEDULES:
            raise ValidationError(f"schedule must be one of {SCHEDULES}")


def clvq_step(codebook, y, gamma: float) -> np.ndarray:
    """One winner-takes-all update: the nearest point moves toward ``y``."""
    if not 0.0 < gamma <= 1.0:
        raise ValidationError("gamma must lie in (0, 1]")
    cb = as_codebook(codebook).copy()
    pt = as_point(y)
    winner = int(nearest_indices(pt[None, :], cb)[0])
    cb[winner] += gamma * (pt - cb[winner])
    return cb


def _initial_codebook(ys: np.ndarray, config: ClvqConfig, rng: np.random.Generator) -> np.ndarray:
    if isinstance(config.init, str):
        if config.init != "random-distinct":
            raise ValidationError(f"unknown init {config.init!r}")
        distinct = np.unique(ys, axis=0)
        if distinct.shape[0] < config.n:
            raise ValidationError(
                f"need at least {config.n} distinct samples for initialization, "
                f"got {distinct.shape[0]}"
            )
        chosen = rng.choice(distinct.shape[0], size=config.n, replace=False)
        return distinct[chosen].copy()
    cb = as_codebook(config.init)
    if cb.shape[0] != config.n:
        raise ValidationError("provided codebook size does not match config.n")
    return cb.copy()


def gamma_at(config: ClvqConfig, step: int) -> float:
    if config.schedule == "constant":
        return config.gamma0
    tau = config.tau if config.tau is not None else max(config.steps / 10.0, 1.0)
    return config.gamma0 / (1.0 + step / tau)


def train_clvq(ys, config: ClvqConfig) -> tuple[np.ndarray, list[float]]:
    """Run the seeded stochastic recursion over uniformly drawn samples.

    Returns the final codebook and the distortion trace, recorded once per
    epoch (one epoch = N draws) plus once at the end if ``steps`` is not a
    multiple of N. Fully deterministic given the seed.
    """
    pts = as_points(ys)
    rng = np.random.default_rng(config.seed)
    cb = _initial_codebook(pts, config, rng)

    n_samples = pts.shape[0]
    record_every = config.trace_every or n_samples
    trace: list[float] = []
    draws = rng.integers(0, n_samples, size=config.steps)
    for t in range(config.steps):
        y = pts[draws[t]]
        winner = int(np.argmin(((cb - y) ** 2).sum(axis=1)))
        cb[winner] += gamma_at(config, t) * (y - cb[winner])
        if (t + 1) % record_every == 0:
            trace.append(distortion(pts, cb))
    if config.steps % record_every != 0:
        trace.append(distortion(pts, cb))
    return cb, trace


def grad_distortion(ys, codebook) -> np.ndarray:
    """Exact gradient of the empirical distortion, one (d,) block per point.

    Raises :class:`TieError` if any sample is (numerically) equidistant from
    two codebook points, where the distortion is not differentiable.
    """
    pts = as_points(ys)
    cb = as_codebook(codebook)
    sq = pairwise_losses(pts, cb, "squared")
    if cb.shape[0] >= 2:
        part = np.partition(sq, 1, axis=1)
        gaps = part[:, 1] - part[:, 0]
        bad = np.flatnonzero(gaps <= TIE_GAP)
        if bad.size:
            j = int(bad[0])
            order = np.argsort(sq[j], kind="stable")
            raise TieError(j, int(order[0]), int(order[1]), float(gaps[j]))
    winners = np.argmin(sq, axis=1)
    grad = np.zeros_like(cb)
    for i in range(cb.shape[0]):
        mask = winners == i
        if mask.any():
            grad[i] = 2.0 * (mask.sum() * cb[i] - pts[mask].sum(axis=0)) / pts.shape[0]
    return grad


def lloyd_step(ys, codebook, dead_policy: str = "reseed") -> np.ndarray:
    """One assignment/centroid sweep.

    Cells with no assigned samples follow ``dead_policy``: ``"reseed"``
    moves the k-th empty cell (in index order) onto the sample with the
    (k+1)-th largest current quantization error; ``"keep"`` leaves it alone.
    """
    if dead_policy not in ("reseed", "keep"):
        raise ValidationError(f"unknown dead policy {dead_policy!r}")
    pts = as_points(ys)
    cb = as_codebook(codebook).copy()
    sq = pairwise_losses(pts, cb, "squared")
    winners = np.argmin(sq, axis=1)
    empty = []
    for i in range(cb.shape[0]):
        mask = winners == i
        if mask.any():
            cb[i] = pts[mask].mean(axis=0)
        else:
            empty.append(i)
    if empty and dead_policy == "reseed":
        errors = sq[np.arange(pts.shape[0]), winners]
        worst_first = np.argsort(-errors, kind="stable")
        for k, i in enumerate(empty):
            cb[i] = pts[worst_first[k % pts.shape[0]]]
    return cb


def cell_contributions(ys, codebook) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell summed squared error and sample counts."""
    pts = as_points(ys)
    cb = as_codebook(codebook)
    sq = pairwise_losses(pts, cb, "squared")
    winners = np.argmin(sq, axis=1)
    best = sq[np.arange(pts.shape[0]), winners]
    n = cb.shape[0]
    contrib = np.zeros(n)
    np.add.at(contrib, winners, best)
    counts = np.bincount(winners, minlength=n)
    return contrib, counts


def pick_split_index(contrib: np.ndarray, counts: np.ndarray) -> int:
    """Deterministic choice of the cell to duplicate: largest distortion
    contribution, ties broken by larger count, then by smaller index."""
    best = 0
    for i in range(1, len(contrib)):
        if contrib[i] > contrib[best] or (
            contrib[i] == contrib[best] and counts[i] > counts[best]
        ):
            best = i
    return best


def split_codebook(codebook, ys, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Grow the codebook by duplicating its highest-contribution point.

    The copy is appended with an isotropic Gaussian perturbation of scale
    ``epsilon``; with ``epsilon=0`` the full-batch distortion is exactly
    unchanged (the duplicate loses every tie to the original).
    """
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    cb = as_codebook(codebook)
    contrib, counts = cell_contributions(ys, cb)
    target = pick_split_index(contrib, counts)
    copy = cb[target] + epsilon * rng.standard_normal(cb.shape[1])
    return np.vstack([cb, copy[None, :]])
