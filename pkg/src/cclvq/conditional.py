"""Winner-takes-all training of a conditional quantizer.

The trainable object is an ensemble: n experts sharing one parametric
family, plus a weight classifier whose output size always equals the
expert count. One batch iteration does three things, in order:

1. assign every sample to the expert with the smallest prediction loss
   (optionally perturbed by Gaussian assignment noise),
2. for each expert, one gradient step on the *summed* loss over the
   samples it won — losers' parameters are untouched, bit for bit,
3. one gradient step on the *mean* cross-entropy between the classifier's
   output and the winner indices.

The sum-vs-mean asymmetry between steps 2 and 3 is deliberate and part of
the update contract; learning-rate choices elsewhere assume it.

Gradient accumulation treats ``accumulation_factor`` consecutive batches
as one concatenated batch, which makes "k accumulated batches" and "one
k-times-larger batch" exactly the same update, not an approximation.

Ensemble growth duplicates the expert contributing the most distortion
(ties: larger sample count, then smaller index), perturbs the copy by
``epsilon``, and gives the classifier a new logit equal to the duplicated
one minus log 2 — so a zero-epsilon split provably changes no assignment
and no distortion number anywhere.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, train_heldout_split
from .errors import ValidationError
from .geometry import LOSS_KINDS, DiscreteMeasure, loss_values
from .models import (
    ParamFunction,
    classify,
    classify_batch,
    grad_classifier_batch,
    grad_params_batch,
    make_function,
    offset_output,
    set_output_bias,
    split_output,
)

log = logging.getLogger(__name__)


@dataclass(eq=False)
class EnsembleState:
    experts: list
    classifier: ParamFunction
    step: int = 0

    def __post_init__(self):
        if len(self.experts) < 1:
            raise ValidationError("need at least one expert")
        kinds = {f.kind for f in self.experts}
        dims = {f.out_dim for f in self.experts}
        if len(kinds) != 1 or len(dims) != 1:
            raise ValidationError("experts must share one kind and output dimension")
        if self.classifier.out_dim != len(self.experts):
            raise ValidationError(
                f"classifier outputs {self.classifier.out_dim} logits for {len(self.experts)} experts"
            )

    @property
    def n_experts(self) -> int:
        return len(self.experts)

    @property
    def out_dim(self) -> int:
        return self.experts[0].out_dim


@dataclass(frozen=True)
class TrainConfig:
    gamma_exp: float = 1e-3
    gamma_cls: float = 1e-2
    epochs: int = 10
    batch_size: int = 64
    accumulation_factor: int = 1
    assignment_noise_std: float = 0.0
    noise_decay_epoch: int = 1
    split_schedule: tuple = ()
    loss: str = "squared"
    seed: int = 0
    heldout_fraction: float = 0.1

    def __post_init__(self):
        if self.gamma_exp < 0 or self.gamma_cls < 0:
            raise ValidationError("learning rates must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")
        if self.accumulation_factor < 1:
            raise ValidationError("accumulation_factor must be >= 1")
        if self.assignment_noise_std < 0:
            raise ValidationError("assignment_noise_std must be >= 0")
        if not 0.0 < self.heldout_fraction < 1.0:
            raise ValidationError("heldout_fraction must lie in (0, 1)")
        if not 1 <= self.noise_decay_epoch <= self.epochs:
            raise ValidationError("noise decay epoch must lie in 1..epochs")
        if self.loss not in LOSS_KINDS:
            raise ValidationError(f"loss must be one of {LOSS_KINDS}")
        events = tuple((int(e), float(eps)) for e, eps in self.split_schedule)
        for e, eps in events:
            if not 1 <= e <= self.epochs:
                raise ValidationError(f"split epoch {e} outside 1..{self.epochs}")
            if eps < 0:
                raise ValidationError("split epsilon must be >= 0")
        object.__setattr__(self, "split_schedule", events)


@dataclass(frozen=True)
class AssignmentReport:
    winners: np.ndarray
    per_expert_counts: np.ndarray
    per_expert_distortion: np.ndarray


def make_ensemble(
    kind: str,
    n: int,
    out_dim: int,
    *,
    in_dim: int = 0,
    n_labels: int = 0,
    hidden: int = 20,
    seed: int = 0,
) -> EnsembleState:
    """Fresh ensemble; experts draw independent initializations from one
    seeded stream. The classifier keeps random hidden weights but starts
    with a zeroed output head, so its initial output is exactly uniform
    while every layer still receives gradient."""
    rng = np.random.default_rng(seed)
    experts = [
        make_function(kind, out_dim, in_dim=in_dim, n_labels=n_labels, hidden=hidden, rng=rng)
        for _ in range(n)
    ]
    classifier = make_function(kind, n, in_dim=in_dim, n_labels=n_labels, hidden=hidden, rng=rng)
    classifier = set_output_bias(classifier, np.zeros(n))
    return EnsembleState(experts=experts, classifier=classifier)


def init_from_data(state: EnsembleState, dataset: Dataset, rng: np.random.Generator) -> EnsembleState:
    """Competitive-learning initialization: start each expert as a constant
    function at the target of a randomly drawn sample, keeping any earlier
    layers' random weights. Lookup experts draw one target per label. Early
    winner competition is then decided in output space, which is what makes
    multi-branch targets separate by branch rather than by input region."""
    experts = []
    for fn in state.experts:
        if fn.kind == "lookup":
            table = np.empty((fn.n_labels, fn.out_dim))
            for l in range(fn.n_labels):
                pool = np.flatnonzero(dataset.xs == l)
                if pool.size == 0:
                    raise ValidationError(f"no samples with label {l} to initialize from")
                table[l] = dataset.ys[rng.choice(pool)]
            experts.append(fn.with_params(table.reshape(-1)))
        else:
            target = dataset.ys[rng.integers(dataset.n_samples)]
            experts.append(set_output_bias(fn, target))
    return replace(state, experts=experts)


def ensemble_loss_matrix(state: EnsembleState, xs, ys, loss: str = "squared") -> np.ndarray:
    """(N, n) matrix of per-sample, per-expert prediction losses."""
    ys = np.asarray(ys, dtype=np.float64)
    cols = [loss_values(f.forward_batch(xs), ys, loss) for f in state.experts]
    return np.column_stack(cols)


def delta(state: EnsembleState, dataset: Dataset, loss: str = "squared") -> float:
    """Empirical conditional distortion: mean over samples of the smallest
    expert loss."""
    return float(ensemble_loss_matrix(state, dataset.xs, dataset.ys, loss).min(axis=1).mean())


def assign_batch(
    state: EnsembleState,
    xs,
    ys,
    loss: str = "squared",
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> AssignmentReport:
    """Winner per sample = argmin over experts of loss (+ Gaussian noise when
    noise_std > 0; ties at zero noise go to the smallest index). Reported
    distortion contributions use the true, noise-free losses of the chosen
    winners, so they sum to the realized batch distortion."""
    losses = ensemble_loss_matrix(state, xs, ys, loss)
    if noise_std > 0.0:
        if rng is None:
            raise ValidationError("assignment noise requires a generator")
        winners = np.argmin(losses + noise_std * rng.standard_normal(losses.shape), axis=1)
    else:
        winners = np.argmin(losses, axis=1)
    n = state.n_experts
    counts = np.bincount(winners, minlength=n)
    contrib = np.zeros(n)
    np.add.at(contrib, winners, losses[np.arange(losses.shape[0]), winners])
    contrib /= losses.shape[0]
    return AssignmentReport(winners=winners, per_expert_counts=counts, per_expert_distortion=contrib)


def update_experts(
    state: EnsembleState, xs, ys, report: AssignmentReport, gamma_exp: float, loss: str = "squared"
) -> EnsembleState:
    """One step per winning expert on its summed assigned loss; experts with
    no assigned samples are returned as the same objects."""
    xs = np.asarray(xs)
    ys = np.asarray(ys, dtype=np.float64)
    new_experts = list(state.experts)
    if gamma_exp != 0.0:
        for i in range(state.n_experts):
            mask = report.winners == i
            if not mask.any():
                continue
            fn = state.experts[i]
            grad = grad_params_batch(fn, xs[mask], ys[mask], loss)
            new_experts[i] = fn.with_params(fn.params - gamma_exp * grad)
    return replace(state, experts=new_experts)


def update_classifier(
    state: EnsembleState, xs, report: AssignmentReport, gamma_cls: float
) -> EnsembleState:
    """One step on the mean cross-entropy against the winner indices."""
    if gamma_cls == 0.0:
        return state
    grad = grad_classifier_batch(state.classifier, xs, report.winners)
    clf = state.classifier.with_params(state.classifier.params - gamma_cls * grad)
    return replace(state, classifier=clf)


def batch_iteration(
    state: EnsembleState,
    xs,
    ys,
    config: TrainConfig,
    *,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[EnsembleState, AssignmentReport]:
    """assign → expert step → classifier step, on one (macro-)batch."""
    report = assign_batch(state, xs, ys, config.loss, noise_std, rng)
    state = update_experts(state, xs, ys, report, config.gamma_exp, config.loss)
    state = update_classifier(state, xs, report, config.gamma_cls)
    return replace(state, step=state.step + 1), report


def pick_expert_to_split(state: EnsembleState, dataset: Dataset, loss: str = "squared") -> int:
    """Largest distortion contribution; ties to the larger sample count,
    then the smaller index."""
    report = assign_batch(state, dataset.xs, dataset.ys, loss)
    best = 0
    for i in range(1, state.n_experts):
        di, db = report.per_expert_distortion[i], report.per_expert_distortion[best]
        if di > db:
            best = i
        elif di == db and report.per_expert_counts[i] > report.per_expert_counts[best]:
            best = i
    return best


def split_expert(
    state: EnsembleState,
    dataset: Dataset,
    epsilon: float,
    rng: np.random.Generator,
    loss: str = "squared",
) -> EnsembleState:
    """Append a perturbed copy of the highest-contribution expert and grow
    the classifier by one logit at (duplicated logit − log 2).

    The perturbation is an output-space offset: twin(x) = original(x) + ε·g
    with one Gaussian draw g per split. Offsetting in output space (rather
    than jittering every parameter) keeps the twins' prediction difference
    constant in x, so the first post-split competition separates samples by
    target height — the analogue of the classic codeword ± ε split."""
    if epsilon < 0:
        raise ValidationError("split epsilon must be >= 0")
    idx = pick_expert_to_split(state, dataset, loss)
    src = state.experts[idx]
    twin = offset_output(src, epsilon * rng.standard_normal(src.out_dim))
    classifier = split_output(state.classifier, idx)
    return EnsembleState(experts=list(state.experts) + [twin], classifier=classifier, step=state.step)


def conditional_quantized_law(
    state: EnsembleState, x, dataset: Dataset | None = None, loss: str = "squared"
) -> DiscreteMeasure:
    """The model's n-point law at input x: atoms are the expert predictions,
    weights come from the classifier. With a label input and a dataset, the
    weights are instead exact empirical cell counts at that label."""
    points = np.stack([f.forward(x) for f in state.experts])
    if dataset is not None:
        if dataset.input_kind != "label":
            raise ValidationError("cell-count weights need a label-valued dataset")
        mask = dataset.xs == int(x)
        if not mask.any():
            raise ValidationError(f"label {x} does not occur in the dataset")
        report = assign_batch(state, dataset.xs[mask], dataset.ys[mask], loss)
        weights = report.per_expert_counts / report.per_expert_counts.sum()
    else:
        weights = classify(state.classifier, x)
    return DiscreteMeasure(points, weights)


def _epoch_noise_factor(epoch: int, decay_epoch: int) -> float:
    if decay_epoch <= 1:
        return 0.0
    return max(0.0, (decay_epoch - epoch) / (decay_epoch - 1))


def epoch_metrics(
    state: EnsembleState, train: Dataset, heldout: Dataset, loss: str = "squared"
) -> dict:
    """Noise-free end-of-epoch snapshot used for the metrics trace."""
    report = assign_batch(state, train.xs, train.ys, loss)
    probs = classify_batch(state.classifier, train.xs)
    from .metrics import usage_entropy  # local import, metrics depends on this module

    return {
        "train_delta": delta(state, train, loss),
        "heldout_delta": delta(state, heldout, loss),
        "per_expert_counts": [int(c) for c in report.per_expert_counts],
        "usage_entropy": usage_entropy(report.per_expert_counts),
        "classifier_accuracy": float(np.mean(probs.argmax(axis=1) == report.winners)),
    }


def train(
    dataset: Dataset, initial: EnsembleState, config: TrainConfig
) -> tuple[EnsembleState, list]:
    """Run the full training loop; returns the final state and one metrics
    record per epoch.

    Per epoch, in order: execute any splits scheduled for this epoch, fix
    the epoch's assignment-noise std (relative scale × current training
    distortion × linear decay that hits zero at noise_decay_epoch), shuffle,
    sweep macro-batches of batch_size × accumulation_factor samples, then
    record noise-free metrics. Everything is driven by one seeded generator,
    so a config+seed pair fixes the trace exactly.
    """
    rng = np.random.default_rng(config.seed)
    train_ds, heldout_ds = train_heldout_split(dataset, config.heldout_fraction, config.seed)
    state = initial
    trace = []
    macro = config.batch_size * config.accumulation_factor
    for epoch in range(1, config.epochs + 1):
        for e, eps in config.split_schedule:
            if e == epoch:
                state = split_expert(state, train_ds, eps, rng, config.loss)
        noise_std = 0.0
        if config.assignment_noise_std > 0.0:
            factor = _epoch_noise_factor(epoch, config.noise_decay_epoch)
            if factor > 0.0:
                noise_std = config.assignment_noise_std * factor * delta(state, train_ds, config.loss)
        perm = rng.permutation(train_ds.n_samples)
        xs, ys = train_ds.xs[perm], train_ds.ys[perm]
        for start in range(0, train_ds.n_samples, macro):
            bx, by = xs[start : start + macro], ys[start : start + macro]
            state, _ = batch_iteration(state, bx, by, config, noise_std=noise_std, rng=rng)
        record = {"epoch": epoch, "n_experts": state.n_experts}
        record.update(epoch_metrics(state, train_ds, heldout_ds, config.loss))
        trace.append(record)
        for i, c in enumerate(record["per_expert_counts"]):
            if c == 0:
                log.warning("expert %d received no samples in epoch %d", i, epoch)
    return state, trace
