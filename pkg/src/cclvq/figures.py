"""Reference experiment and figure-data export.

One pinned run — the three-mode regression mixture trained from a single
expert with two mid-training splits — feeds three figures: the loss trace
with expert-count steps, per-expert predictions over the input range, and
predicted vs true mode weights. Data is written as plain CSVs with
documented headers; a companion render step draws quick-look PNGs from
those same CSVs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .conditional import EnsembleState, TrainConfig, init_from_data, make_ensemble, train
from .data import Dataset
from .errors import ValidationError
from .metrics import match_experts_to_modes
from .models import classify_batch
from .synthetic import MultimodalRegressionSpec, gen_multimodal, mode_probs

PRED_GRID = np.linspace(-2.0, 2.0, 201)
WEIGHT_GRID = np.linspace(-1.0, 1.0, 201)

REFERENCE_TRAIN = TrainConfig(
    gamma_exp=8e-4,
    gamma_cls=0.3,
    epochs=1600,
    batch_size=128,
    split_schedule=((401, 1.0), (801, 1.0)),
    seed=0,
)
REFERENCE_ENSEMBLE_SEED = 3

CSV_NAMES = ("fig1_loss.csv", "fig2_preds.csv", "fig2_data.csv", "fig3_weights.csv")


def reference_run(
    spec: MultimodalRegressionSpec | None = None,
    config: TrainConfig = REFERENCE_TRAIN,
    ensemble_seed: int = REFERENCE_ENSEMBLE_SEED,
) -> tuple[EnsembleState, list[dict], Dataset]:
    """Generate the three-mode dataset and train the reference ensemble."""
    spec = spec or MultimodalRegressionSpec()
    dataset = gen_multimodal(spec)
    state = make_ensemble("mlp", 1, 1, in_dim=1, hidden=20, seed=ensemble_seed)
    state = init_from_data(state, dataset, np.random.default_rng(ensemble_seed))
    state, trace = train(dataset, state, config)
    return state, trace, dataset


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_figure_data(
    out_dir,
    state: EnsembleState,
    trace: list[dict],
    dataset: Dataset,
    spec: MultimodalRegressionSpec | None = None,
) -> list[Path]:
    """Write the four figure CSVs and return their paths.

    * ``fig1_loss.csv`` — epoch,train_delta,heldout_delta,n_experts
    * ``fig2_preds.csv`` — x,expert,y_pred (expert-major, one grid pass each)
    * ``fig2_data.csv`` — x,y (the raw training sample)
    * ``fig3_weights.csv`` — x,expert,weight_pred,weight_true, where
      weight_true is the generator probability of the mode matched to that
      expert (matching by mean squared curve distance).
    """
    spec = spec or MultimodalRegressionSpec()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    fig1 = out / "fig1_loss.csv"
    _write_csv(
        fig1,
        ["epoch", "train_delta", "heldout_delta", "n_experts"],
        (
            [r["epoch"], repr(float(r["train_delta"])), repr(float(r["heldout_delta"])), r["n_experts"]]
            for r in trace
        ),
    )

    fig2 = out / "fig2_preds.csv"
    rows = []
    for i, fn in enumerate(state.experts):
        preds = fn.forward_batch(PRED_GRID[:, None])[:, 0]
        rows.extend([repr(float(x)), i, repr(float(y))] for x, y in zip(PRED_GRID, preds))
    _write_csv(fig2, ["x", "expert", "y_pred"], rows)

    fig2_data = out / "fig2_data.csv"
    _write_csv(
        fig2_data,
        ["x", "y"],
        ([repr(float(x)), repr(float(y))] for x, y in zip(dataset.xs[:, 0], dataset.ys[:, 0])),
    )

    fig3 = out / "fig3_weights.csv"
    probs = classify_batch(state.classifier, WEIGHT_GRID[:, None])
    true = np.stack([mode_probs(spec, x) for x in WEIGHT_GRID])
    if state.n_experts == spec.m:
        expert_for_mode = match_experts_to_modes(state, WEIGHT_GRID, spec.m)
        mode_for_expert = np.argsort(expert_for_mode)
    else:
        mode_for_expert = np.arange(state.n_experts) % spec.m
    rows = []
    for i in range(state.n_experts):
        k = int(mode_for_expert[i])
        rows.extend(
            [repr(float(x)), i, repr(float(w)), repr(float(t))]
            for x, w, t in zip(WEIGHT_GRID, probs[:, i], true[:, k])
        )
    _write_csv(fig3, ["x", "expert", "weight_pred", "weight_true"], rows)

    return [fig1, fig2, fig2_data, fig3]


def _read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                cols[name].append(float(value))
    return {name: np.asarray(vals) for name, vals in cols.items()}


def render_report(out_dir) -> list[Path]:
    """Draw quick-look PNGs next to the CSVs (reads the CSVs back, so the
    images show exactly what was exported)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    for name in CSV_NAMES:
        if not (out / name).exists():
            raise ValidationError(f"missing figure data file {out / name}")
    written = []

    loss = _read_csv(out / "fig1_loss.csv")
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(loss["epoch"], loss["train_delta"], label="train")
    ax.plot(loss["epoch"], loss["heldout_delta"], label="held-out")
    ax2 = ax.twinx()
    ax2.step(loss["epoch"], loss["n_experts"], where="post", color="gray", alpha=0.5)
    ax2.set_ylabel("experts")
    ax.set_xlabel("epoch")
    ax.set_ylabel("distortion")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    target = out / "fig1_loss.png"
    fig.savefig(target, dpi=110)
    plt.close(fig)
    written.append(target)

    preds = _read_csv(out / "fig2_preds.csv")
    data = _read_csv(out / "fig2_data.csv")
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(data["x"], data["y"], ".", ms=2, color="lightgray", label="data")
    for i in sorted(set(preds["expert"].astype(int))):
        mask = preds["expert"].astype(int) == i
        ax.plot(preds["x"][mask], preds["y_pred"][mask], lw=2, label=f"expert {i}")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(markerscale=4)
    fig.tight_layout()
    target = out / "fig2_preds.png"
    fig.savefig(target, dpi=110)
    plt.close(fig)
    written.append(target)

    weights = _read_csv(out / "fig3_weights.csv")
    fig, ax = plt.subplots(figsize=(7, 4))
    for i in sorted(set(weights["expert"].astype(int))):
        mask = weights["expert"].astype(int) == i
        (line,) = ax.plot(weights["x"][mask], weights["weight_pred"][mask], lw=2)
        ax.plot(
            weights["x"][mask],
            weights["weight_true"][mask],
            "--",
            color=line.get_color(),
            alpha=0.7,
        )
    ax.set_xlabel("x")
    ax.set_ylabel("weight (solid: classifier, dashed: generator)")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    target = out / "fig3_weights.png"
    fig.savefig(target, dpi=110)
    plt.close(fig)
    written.append(target)

    return written
