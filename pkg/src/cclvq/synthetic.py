"""Seeded data generators and their ground-truth oracles.

Three experiment families:

* multimodal regression — scalar X ~ N(0,1); a hidden mode I is drawn from
  softmax(a_k x + b_k); the target is Y = sin(2 I X) + 10 I + noise, with
  I ranging over 1..m in that formula. Returned mode labels are 0-based
  (label k means I = k + 1) and travel on the dataset's oracle channel only.
* two-Dirac — Y = X + offset or X - offset with equal probability, the
  minimal law whose conditional mean is a useless predictor.
* finite conditional laws — a finite label set with an explicit atom list
  per label; supports both sampling and exact enumeration, which is what
  makes exact optimality checks possible.

Determinism contract: every generator consumes a seeded Generator through a
fixed, documented draw order, and normal deviates come from the inverse-CDF
transform ``ndtri(max(u, 2^-53))`` of uniform draws, so any implementation
of the same transform reproduces the distribution exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .data import Dataset
from .errors import ValidationError
from .geometry import DiscreteMeasure

_MIN_UNIFORM = 2.0**-53


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """N(0,1) deviates via the documented inverse-CDF transform."""
    u = np.maximum(rng.random(size), _MIN_UNIFORM)
    return ndtri(u)


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One draw per row of probs (N, m), via the row's CDF and one uniform."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


@dataclass(frozen=True)
class MultimodalRegressionSpec:
    m: int = 3
    a: tuple = (-1.0, 0.0, 1.0)
    b: tuple = (0.0, 0.0, 0.0)
    sigma: float = 0.1
    n_samples: int = 8000
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("mode count must be >= 1")
        if len(self.a) != self.m or len(self.b) != self.m:
            raise ValidationError(f"need {self.m} logit coefficients, got a={len(self.a)}, b={len(self.b)}")
        if self.sigma < 0:
            raise ValidationError("noise std must be >= 0")
        if self.n_samples < 1:
            raise ValidationError("sample count must be >= 1")
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))


def mode_probs(spec: MultimodalRegressionSpec, x) -> np.ndarray:
    """softmax(a_k x + b_k) over modes; vectorizes over x."""
    x = np.asarray(x, dtype=np.float64)
    logits = np.multiply.outer(x, np.asarray(spec.a)) + np.asarray(spec.b)
    logits -= logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=-1, keepdims=True)


def mode_curve(label: int, x) -> np.ndarray:
    """The noise-free target curve for 0-based mode ``label``."""
    i = label + 1
    x = np.asarray(x, dtype=np.float64)
    return np.sin(2.0 * i * x) + 10.0 * i


def gen_multimodal(spec: MultimodalRegressionSpec) -> Dataset:
    """Draw order: X, then mode uniforms, then target noise."""
    rng = np.random.default_rng(spec.seed)
    xs = standard_normal(rng, spec.n_samples)
    labels = _categorical(rng, mode_probs(spec, xs))
    noise = spec.sigma * standard_normal(rng, spec.n_samples)
    ys = mode_curve(labels, xs) + noise
    return Dataset(xs, ys, modes=labels)


def gen_two_dirac(n_samples: int, offset: float = 100.0, seed: int = 0) -> Dataset:
    """Mode 0 is the +offset branch, mode 1 the -offset branch."""
    if n_samples < 1:
        raise ValidationError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    xs = standard_normal(rng, n_samples)
    branch = (rng.random(n_samples) < 0.5).astype(np.int64)  # 1 = minus branch
    ys = xs + np.where(branch == 0, offset, -offset)
    return Dataset(xs, ys, modes=branch)


@dataclass(frozen=True)
class FiniteConditionalLaw:
    """Per-label atom lists: atoms[l] is (m_l, d), weights[l] is (m_l,)
    summing to 1. The input marginal is uniform over labels."""

    atoms: tuple = field(default_factory=tuple)
    weights: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.atoms or len(self.atoms) != len(self.weights):
            raise ValidationError("need matching nonempty atom and weight lists")
        atoms, weights = [], []
        d = None
        for label, (pts, ws) in enumerate(zip(self.atoms, self.weights)):
            pts = np.asarray(pts, dtype=np.float64)
            if pts.ndim == 1:
                pts = pts[:, None]
            ws = np.asarray(ws, dtype=np.float64).reshape(-1)
            if pts.shape[0] != ws.shape[0] or pts.shape[0] == 0:
                raise ValidationError(f"label {label}: atom/weight count mismatch")
            if d is None:
                d = pts.shape[1]
            elif pts.shape[1] != d:
                raise ValidationError("labels disagree on point dimension")
            if np.any(ws < 0) or abs(ws.sum() - 1.0) > 1e-12:
                raise ValidationError(f"label {label}: atom weights must be >= 0 and sum to 1")
            atoms.append(pts)
            weights.append(ws)
        object.__setattr__(self, "atoms", tuple(atoms))
        object.__setattr__(self, "weights", tuple(weights))

    @property
    def n_labels(self) -> int:
        return len(self.atoms)

    @property
    def dim(self) -> int:
        return self.atoms[0].shape[1]

    def label_measure(self, label: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.atoms[label], self.weights[label])


def gen_finite_conditional(law: FiniteConditionalLaw, n_samples: int, seed: int = 0) -> Dataset:
    """Sample labels uniformly, then one atom per sample from that label's
    weights. Draw order: labels, then atom uniforms."""
    if n_samples < 1:
        raise ValidationError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, law.n_labels, size=n_samples)
    u = rng.random(n_samples)
    ys = np.empty((n_samples, law.dim))
    for l in range(law.n_labels):
        mask = labels == l
        if not mask.any():
            continue
        cum = np.cumsum(law.weights[l])
        idx = np.minimum(np.searchsorted(cum, u[mask], side="right"), len(cum) - 1)
        ys[mask] = law.atoms[l][idx]
    return Dataset(labels, ys)


def enumerate_finite_conditional(law: FiniteConditionalLaw) -> tuple[Dataset, np.ndarray]:
    """Exact mode: bypass sampling and list every (label, atom) pair once,
    with joint weights (uniform label mass times atom weight). The weights
    sum to 1 and are the dataset's importance weights."""
    labels, ys, ws = [], [], []
    for l in range(law.n_labels):
        for pt, w in zip(law.atoms[l], law.weights[l]):
            labels.append(l)
            ys.append(pt)
            ws.append(w / law.n_labels)
    return Dataset(np.asarray(labels, dtype=np.int64), np.asarray(ys)), np.asarray(ws)


def random_finite_law(
    rng: np.random.Generator,
    max_labels: int = 4,
    max_atoms: int = 8,
    dim: int = 1,
    spread: float = 5.0,
) -> FiniteConditionalLaw:
    """Random small instance for oracle suites: label count in 1..max_labels,
    atom count per label in 2..max_atoms, Dirichlet-ish weights bounded away
    from zero so every atom matters."""
    k = int(rng.integers(1, max_labels + 1))
    atoms, weights = [], []
    for _ in range(k):
        m = int(rng.integers(2, max_atoms + 1))
        pts = spread * rng.standard_normal((m, dim))
        raw = rng.random(m) + 0.2
        weights.append(raw / raw.sum())
        atoms.append(pts)
    return FiniteConditionalLaw(tuple(atoms), tuple(weights))
