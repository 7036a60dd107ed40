"""Seeded verification suites tying the trainable objects to exact oracles.

Five independent suites, each reducible to a yes/no with a measured
residual:

* ``prop1`` — the quantization identity: squared W2 between an empirical
  law and its quantized law equals the distortion, and the best W2 over
  all weightings of a fixed support is the square root of the distortion.
  The W2 side is an exact transportation solve, so the two routes share no
  code path.
* ``gradient`` — the distortion gradient against central finite
  differences on tie-free instances, plus a negative control: an injected
  equidistant sample must raise the tie error rather than return a number.
* ``model-grads`` — backprop of every function family (expert losses and
  classifier cross-entropy) against finite differences.
* ``theorem1`` — on finite label spaces: per-label conditional distortion
  equals the squared W2 between the per-label empirical law and the
  model's quantized law with exact cell weights, and the label-frequency
  weighted sum reassembles the total distortion.
* ``optimal`` — winner-takes-all training with lookup experts reaches the
  enumerated optimal distortion within 1% relative on exactly-represented
  rational laws.

Every suite is deterministic given its seed and returns a CheckResult; a
failing trial's inputs are serialized for replay.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import clvq
from .conditional import (
    EnsembleState,
    TrainConfig,
    batch_iteration,
    conditional_quantized_law,
    ensemble_loss_matrix,
    init_from_data,
    make_ensemble,
    split_expert,
)
from .data import Dataset
from .errors import TieError, ValidationError
from .geometry import DiscreteMeasure, distortion, loss_values, quantized_law
from .metrics import brute_force_per_label, exact_delta
from .models import classify_batch, grad_classifier_batch, grad_params_batch, make_function
from .synthetic import FiniteConditionalLaw, gen_finite_conditional, random_finite_law
from .wasserstein import best_supported_w2, w2_discrete

CHECKS = ("prop1", "gradient", "model-grads", "theorem1", "optimal")

DEFAULT_TRIALS = {
    "prop1": 200,
    "gradient": 100,
    "model-grads": 100,
    "theorem1": 50,
    "optimal": 20,
}

TOLERANCES = {
    "prop1": 1e-9,
    "gradient": 1e-5,
    "model-grads": 1e-5,
    "theorem1": 1e-9,
    "optimal": 0.01,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    trials: int
    max_residual: float
    tolerance: float
    detail: str = ""
    failing: dict | None = None


def _result(name, trials, worst, failing=None, detail=""):
    tol = TOLERANCES[name]
    return CheckResult(
        name=name,
        passed=failing is None and worst <= tol,
        trials=trials,
        max_residual=float(worst),
        tolerance=tol,
        detail=detail,
        failing=failing,
    )


def check_prop1(trials: int = 200, seed: int = 0) -> CheckResult:
    """|W2²(empirical, quantized) − distortion| and
    |best-supported W2 − sqrt(distortion)| on random instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        n_pts = int(rng.integers(2, 51))
        d = int(rng.integers(1, 4))
        n_cb = int(rng.integers(1, 6))
        ys = 3.0 * rng.standard_normal((n_pts, d))
        cb = 3.0 * rng.standard_normal((n_cb, d))
        dist = distortion(ys, cb)
        w2, _ = w2_discrete(DiscreteMeasure.empirical(ys), quantized_law(ys, cb))
        r = max(abs(w2 * w2 - dist), abs(best_supported_w2(ys, cb) - np.sqrt(dist)))
        if r > worst:
            worst = r
            if r > TOLERANCES["prop1"]:
                return _result(
                    "prop1", trials, worst,
                    failing={"check": "prop1", "trial": t, "points": ys.tolist(), "codebook": cb.tolist()},
                )
    return _result("prop1", trials, worst)


def _vector_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / scale


def _tie_free_instance(rng) -> tuple[np.ndarray, np.ndarray]:
    """Random (ys, codebook) whose two smallest per-sample losses are
    separated enough that finite differences never cross a cell boundary."""
    while True:
        n_pts = int(rng.integers(3, 41))
        d = int(rng.integers(1, 4))
        n_cb = int(rng.integers(2, 6))
        ys = 2.0 * rng.standard_normal((n_pts, d))
        cb = 2.0 * rng.standard_normal((n_cb, d))
        sq = ((ys[:, None, :] - cb[None, :, :]) ** 2).sum(axis=2)
        part = np.partition(sq, 1, axis=1)
        if np.all(part[:, 1] - part[:, 0] > 1e-4):
            return ys, cb


def check_gradient(trials: int = 100, seed: int = 0) -> CheckResult:
    """Distortion gradient vs central finite differences (h = 1e-6), plus
    the injected-tie negative control."""
    rng = np.random.default_rng(seed)
    h = 1e-6
    worst = 0.0
    for t in range(trials):
        ys, cb = _tie_free_instance(rng)
        grad = clvq.grad_distortion(ys, cb).reshape(-1)
        fd = np.empty_like(grad)
        flat = cb.reshape(-1)
        for k in range(flat.size):
            e = np.zeros_like(flat)
            e[k] = h
            fd[k] = (
                distortion(ys, (flat + e).reshape(cb.shape))
                - distortion(ys, (flat - e).reshape(cb.shape))
            ) / (2 * h)
        r = _vector_rel_err(grad, fd)
        if r > worst:
            worst = r
            if r > TOLERANCES["gradient"]:
                return _result(
                    "gradient", trials, worst,
                    failing={"check": "gradient", "trial": t, "points": ys.tolist(), "codebook": cb.tolist()},
                )
    # negative control: an equidistant sample must be rejected, not differentiated
    tie_ys = np.array([[1.0], [5.0]])
    tie_cb = np.array([[0.0], [2.0]])
    try:
        clvq.grad_distortion(tie_ys, tie_cb)
    except TieError:
        detail = "tie injection rejected as expected"
    else:
        return _result(
            "gradient", trials, worst,
            failing={"check": "gradient", "trial": "tie-control",
                     "points": tie_ys.tolist(), "codebook": tie_cb.tolist()},
            detail="injected tie was not detected",
        )
    return _result("gradient", trials, worst, detail=detail)


def _random_function(rng, kind: str):
    d = int(rng.integers(1, 3))
    if kind == "constant":
        return make_function("constant", d, params=rng.standard_normal(d))
    if kind == "lookup":
        L = int(rng.integers(2, 5))
        return make_function("lookup", d, n_labels=L, params=rng.standard_normal(L * d))
    if kind == "affine":
        return make_function("affine", d, in_dim=int(rng.integers(1, 4)), rng=rng)
    return make_function("mlp", d, in_dim=int(rng.integers(1, 4)), hidden=5, rng=rng)


def _random_inputs(rng, fn, n: int):
    if fn.kind == "lookup":
        return rng.integers(0, fn.n_labels, size=n)
    width = fn.in_dim if fn.kind in ("affine", "mlp") else 1
    return rng.standard_normal((n, width))


def _fd_params(fn, objective, h=1e-6) -> np.ndarray:
    fd = np.empty(fn.params.size)
    for k in range(fn.params.size):
        e = np.zeros(fn.params.size)
        e[k] = h
        fd[k] = (objective(fn.with_params(fn.params + e)) - objective(fn.with_params(fn.params - e))) / (2 * h)
    return fd


def check_model_grads(trials: int = 100, seed: int = 0) -> CheckResult:
    """Backprop vs finite differences for every function kind: summed
    squared-loss expert gradients and mean cross-entropy classifier
    gradients."""
    rng = np.random.default_rng(seed)
    kinds = ("constant", "lookup", "affine", "mlp")
    worst = 0.0
    for t in range(trials):
        kind = kinds[t % len(kinds)]
        fn = _random_function(rng, kind)
        n = int(rng.integers(2, 9))
        xs = _random_inputs(rng, fn, n)
        ys = rng.standard_normal((n, fn.out_dim))
        grad = grad_params_batch(fn, xs, ys, "squared")
        fd = _fd_params(fn, lambda f: float(loss_values(f.forward_batch(xs), ys, "squared").sum()))
        r = _vector_rel_err(grad, fd)

        labels = rng.integers(0, fn.out_dim, size=n) if fn.out_dim > 1 else np.zeros(n, dtype=np.int64)
        cgrad = grad_classifier_batch(fn, xs, labels)
        cfd = _fd_params(
            fn,
            lambda f: float(-np.mean(np.log(classify_batch(f, xs)[np.arange(n), labels]))),
        )
        r = max(r, _vector_rel_err(cgrad, cfd))
        if r > worst:
            worst = r
            if r > TOLERANCES["model-grads"]:
                return _result(
                    "model-grads", trials, worst,
                    failing={"check": "model-grads", "trial": t, "kind": kind,
                             "params": fn.params.tolist(), "inputs": np.asarray(xs).tolist(),
                             "targets": ys.tolist()},
                )
    return _result("model-grads", trials, worst)


def check_theorem1(trials: int = 50, seed: int = 0) -> CheckResult:
    """Per-label distortion = per-label W2² against the model's law with
    exact cell weights; frequency-weighted sum reassembles the total."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        law = random_finite_law(rng, max_labels=4, max_atoms=6, dim=int(rng.integers(1, 3)))
        ds = gen_finite_conditional(law, int(rng.integers(60, 241)), seed=int(rng.integers(2**31)))
        n = int(rng.integers(1, 4))
        state = make_ensemble("lookup", n, law.dim, n_labels=law.n_labels, seed=int(rng.integers(2**31)))
        state = replace(
            state,
            experts=[f.with_params(3.0 * rng.standard_normal(f.params.size)) for f in state.experts],
        )
        total = 0.0
        r = 0.0
        labels_present = np.unique(ds.xs)
        for l in labels_present:
            mask = ds.xs == l
            emp = DiscreteMeasure.empirical(ds.ys[mask])
            model_law = conditional_quantized_law(state, int(l), dataset=ds)
            w2, _ = w2_discrete(emp, model_law)
            per_label = float(ensemble_loss_matrix(state, ds.xs[mask], ds.ys[mask]).min(axis=1).mean())
            r = max(r, abs(w2 * w2 - per_label))
            total += mask.mean() * per_label
        full = float(ensemble_loss_matrix(state, ds.xs, ds.ys).min(axis=1).mean())
        r = max(r, abs(total - full))
        if r > worst:
            worst = r
            if r > TOLERANCES["theorem1"]:
                return _result(
                    "theorem1", trials, worst,
                    failing={"check": "theorem1", "trial": t,
                             "atoms": [a.tolist() for a in law.atoms],
                             "weights": [w.tolist() for w in law.weights],
                             "expert_params": [f.params.tolist() for f in state.experts]},
                )
    return _result("theorem1", trials, worst)


# -- exact-optimality suite --------------------------------------------------

RATIONAL_DENOMINATOR = 16


def _random_rational_law(rng, n_cells: int) -> tuple[FiniteConditionalLaw, np.ndarray]:
    """Law with weights that are multiples of 1/16, at least n_cells + 1
    atoms per label (so the optimum is strictly positive), and the numerator
    table needed to materialize it exactly as a dataset."""
    k = int(rng.integers(1, 5))
    atoms, weights, numerators = [], [], []
    for _ in range(k):
        m = int(rng.integers(n_cells + 1, 9))
        nums = rng.multinomial(RATIONAL_DENOMINATOR - m, np.full(m, 1.0 / m)) + 1
        atoms.append(5.0 * rng.standard_normal((m, 1)))
        weights.append(nums / RATIONAL_DENOMINATOR)
        numerators.append(nums)
    return FiniteConditionalLaw(tuple(atoms), tuple(weights)), numerators


def _materialize(law: FiniteConditionalLaw, numerators) -> Dataset:
    """Dataset whose empirical measure IS the law: atom j of label l appears
    numerators[l][j] times, every label block has the same size."""
    xs, ys = [], []
    for l in range(law.n_labels):
        for j, reps in enumerate(numerators[l]):
            xs.extend([l] * int(reps))
            ys.extend([law.atoms[l][j]] * int(reps))
    return Dataset(np.asarray(xs, dtype=np.int64), np.asarray(ys))


def _spread_seeding(rng, atoms: np.ndarray, weights: np.ndarray, n: int) -> np.ndarray:
    """Distance²-weighted atom seeding: first row by mass, each next row an
    atom sampled proportionally to its mass times squared distance from the
    rows chosen so far."""
    rows = [atoms[rng.choice(atoms.shape[0], p=weights)]]
    while len(rows) < n:
        d2 = np.min(((atoms[:, None, :] - np.asarray(rows)[None]) ** 2).sum(axis=2), axis=1)
        p = weights * d2
        if p.sum() <= 0:
            rows.append(atoms[rng.integers(atoms.shape[0])])
            continue
        rows.append(atoms[rng.choice(atoms.shape[0], p=p / p.sum())])
    return np.asarray(rows)


def _merge_seeding(atoms: np.ndarray, weights: np.ndarray, n: int) -> np.ndarray:
    """Agglomerative seeding: every atom its own cell, then repeatedly merge
    the pair with the smallest pooled-variance increase until n cells remain.
    Deterministic; good at isolating heavy outlier atoms."""
    rows = [a.copy() for a in atoms]
    masses = list(weights)
    while len(rows) > max(n, 1):
        best, cost = None, np.inf
        for i in range(len(rows)):
            for j in range(i + 1, len(rows)):
                c = masses[i] * masses[j] / (masses[i] + masses[j])
                c *= float(((rows[i] - rows[j]) ** 2).sum())
                if c < cost:
                    best, cost = (i, j), c
        i, j = best
        m = masses[i] + masses[j]
        rows[i] = (masses[i] * rows[i] + masses[j] * rows[j]) / m
        masses[i] = m
        del rows[j], masses[j]
    while len(rows) < n:
        rows.append(rows[0])
    return np.asarray(rows)


def _train_single_label(
    block: Dataset, weights: np.ndarray, atoms: np.ndarray, n: int, seed: int, restarts: int
) -> np.ndarray:
    """Train one label's n-point quantizer and return its (n, d) rows.

    Restarts rotate through four starting protocols — agglomerative merge
    seeding, grow-by-splitting from a single expert, distance²-weighted
    atom seeding, and uniform distinct atoms — and the restart with the
    lowest exact distortion wins. The portfolio exists because each
    protocol alone has known bad basins on small instances; their failure
    sets barely overlap."""
    d = block.out_dim
    spread = float(block.ys.std()) or 1.0
    cfg = TrainConfig(
        gamma_exp=0.4 / block.n_samples,
        gamma_cls=0.05,
        epochs=1,
        batch_size=block.n_samples,
        seed=seed,
    )
    labels = np.zeros(atoms.shape[0], dtype=np.int64)
    classifier = make_function("lookup", n, n_labels=1)
    best_rows, best_dl = None, np.inf
    for r in range(restarts):
        rng = np.random.default_rng((seed, r))
        protocol = 0 if r == 0 else 1 + (r - 1) % 3
        if protocol == 1:
            state = make_ensemble("lookup", 1, d, n_labels=1, seed=int(rng.integers(2**31)))
            state = init_from_data(state, block, rng)
            while True:
                for _ in range(200 if state.n_experts == n else 120):
                    state, _ = batch_iteration(state, block.xs, block.ys, cfg)
                if state.n_experts == n:
                    break
                state = split_expert(state, block, 0.4 * spread, rng)
        else:
            if protocol == 0:
                rows = _merge_seeding(atoms, weights, n)
            elif protocol == 2:
                rows = _spread_seeding(rng, atoms, weights, n)
            else:
                take = min(n, atoms.shape[0])
                idx = rng.choice(atoms.shape[0], size=take, replace=False)
                rows = atoms[np.concatenate([idx, rng.integers(0, atoms.shape[0], n - take)])]
            experts = [make_function("lookup", d, n_labels=1, params=row.copy()) for row in rows]
            state = EnsembleState(experts=experts, classifier=classifier)
            for _ in range(250):
                state, _ = batch_iteration(state, block.xs, block.ys, cfg)
        losses = ensemble_loss_matrix(state, labels, atoms)
        dl = float((weights * losses.min(axis=1)).sum())
        if dl < best_dl:
            best_dl = dl
            best_rows = np.stack([f.params.reshape(1, d)[0] for f in state.experts])
    return best_rows


def train_lookup_to_optimum(
    law: FiniteConditionalLaw,
    numerators,
    n: int,
    seed: int = 0,
    restarts: int = 9,
) -> EnsembleState:
    """Winner-takes-all training of n lookup experts on the exactly
    materialized law. Lookup experts make the objective separable across
    labels, so each label is trained as its own single-label run (the
    composite table is identical to what one joint run computes, sub-problem
    by sub-problem) with the restart portfolio."""
    k, d = law.n_labels, law.dim
    tables = np.zeros((n, k, d))
    for l in range(k):
        block_xs = np.zeros(int(sum(numerators[l])), dtype=np.int64)
        block_ys = np.repeat(law.atoms[l], np.asarray(numerators[l], dtype=np.int64), axis=0)
        block = Dataset(block_xs, block_ys)
        rows = _train_single_label(block, law.weights[l], law.atoms[l], n, seed + 977 * l, restarts)
        tables[:, l] = rows
    experts = [
        make_function("lookup", d, n_labels=k, params=tables[i].reshape(-1)) for i in range(n)
    ]
    classifier = make_function("lookup", n, n_labels=k)
    return EnsembleState(experts=experts, classifier=classifier)


def check_optimal(trials: int = 20, seed: int = 0) -> CheckResult:
    """Trained lookup ensembles vs the enumerated optimum: relative gap of
    the total distortion (and of every per-label distortion) ≤ 1%."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        n = int(rng.integers(1, 4))
        law, numerators = _random_rational_law(rng, n)
        state = train_lookup_to_optimum(law, numerators, n, seed=int(rng.integers(2**31)))
        opt_labels = brute_force_per_label(law, n)
        gaps = []
        for l in range(law.n_labels):
            losses = ensemble_loss_matrix(state, np.full(law.atoms[l].shape[0], l), law.atoms[l])
            dl = float((law.weights[l] * losses.min(axis=1)).sum())
            gaps.append((dl - opt_labels[l]) / max(opt_labels[l], 1e-12))
        total_gap = (exact_delta(state, law) - float(opt_labels.mean())) / max(float(opt_labels.mean()), 1e-12)
        r = max(max(gaps), total_gap)
        if r > worst:
            worst = r
            if r > TOLERANCES["optimal"]:
                return _result(
                    "optimal", trials, worst,
                    failing={"check": "optimal", "trial": t, "n": n,
                             "atoms": [a.tolist() for a in law.atoms],
                             "weights": [w.tolist() for w in law.weights]},
                )
    return _result("optimal", trials, max(worst, 0.0))


_CHECK_FNS = {
    "prop1": check_prop1,
    "gradient": check_gradient,
    "model-grads": check_model_grads,
    "theorem1": check_theorem1,
    "optimal": check_optimal,
}


def run_checks(names=None, seed: int = 0, trials: int | None = None) -> list:
    """Run the selected suites (all by default) and return their results."""
    names = list(names) if names else list(CHECKS)
    for name in names:
        if name not in _CHECK_FNS:
            raise ValidationError(f"unknown check {name!r}; available: {', '.join(CHECKS)}")
    return [
        _CHECK_FNS[name](trials=trials or DEFAULT_TRIALS[name], seed=seed) for name in names
    ]
