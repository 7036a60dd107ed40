"""Read the report CSVs and draw the three figures.

Presentation only: every number comes out of the delimited files the
training CLI exports, and nothing is recomputed here. Structural problems —
a missing file, a missing column, a table with nothing to draw — raise
``SchemaError`` instead of producing an empty or misleading image.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

SCHEMAS = {
    "fig1_loss.csv": ("epoch", "train_delta", "heldout_delta", "n_experts"),
    "fig2_preds.csv": ("x", "expert", "y_pred"),
    "fig2_data.csv": ("x", "y"),
    "fig3_weights.csv": ("x", "expert", "weight_pred", "weight_true"),
}

PALETTE = ("#1b6ca8", "#d1495b", "#66a182", "#edae49", "#8d96a3")


class SchemaError(ValueError):
    """A report CSV does not look like the trainer wrote it."""


def load_columns(path: Path, required: tuple[str, ...]) -> dict[str, list[float]]:
    """Read ``path`` and return the required columns as float lists.

    Extra columns are ignored; a missing one is an error that names it.
    """
    if not path.is_file():
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise SchemaError(f"{path.name}: missing column {column!r}")
        cols: dict[str, list[float]] = {c: [] for c in required}
        for lineno, row in enumerate(reader, start=2):
            for column in required:
                value = row[column]
                try:
                    cols[column].append(float(value))
                except (TypeError, ValueError):
                    raise SchemaError(
                        f"{path.name}:{lineno}: column {column!r} has non-numeric value {value!r}"
                    ) from None
    return cols


def _by_expert(cols: dict[str, list[float]]) -> list[tuple[int, dict[str, list[float]]]]:
    groups: dict[int, dict[str, list[float]]] = {}
    for j, e in enumerate(cols["expert"]):
        group = groups.setdefault(int(e), {c: [] for c in cols})
        for c, values in cols.items():
            group[c].append(values[j])
    return sorted(groups.items())


def _color(i: int) -> str:
    return PALETTE[i % len(PALETTE)]


def draw_loss(cols: dict[str, list[float]], target: Path) -> None:
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    ax.plot(cols["epoch"], cols["train_delta"], color=PALETTE[0], lw=1.6, label="train")
    ax.plot(cols["epoch"], cols["heldout_delta"], color=PALETTE[1], lw=1.6, label="held-out")
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("distortion")
    ax.grid(alpha=0.25)
    steps = ax.twinx()
    steps.step(cols["epoch"], cols["n_experts"], where="post", color="0.45", lw=1.0, ls=":")
    steps.set_ylabel("experts")
    steps.set_yticks(sorted({int(n) for n in cols["n_experts"]}))
    ax.set_title("distortion while the ensemble grows")
    ax.legend(loc="upper right", framealpha=0.9)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def draw_predictions(
    preds: dict[str, list[float]], data: dict[str, list[float]], target: Path
) -> None:
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    ax.plot(data["x"], data["y"], ".", ms=2, color="0.82", zorder=1, label="samples")
    for i, block in _by_expert(preds):
        ax.plot(block["x"], block["y_pred"], color=_color(i), lw=2.2, zorder=2, label=f"expert {i}")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("per-expert predictions over the data")
    ax.legend(markerscale=4, framealpha=0.9)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def draw_weights(cols: dict[str, list[float]], target: Path) -> None:
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    for i, block in _by_expert(cols):
        ax.plot(block["x"], block["weight_pred"], color=_color(i), lw=2.0, label=f"expert {i}")
        ax.plot(block["x"], block["weight_true"], color=_color(i), lw=1.2, ls="--", alpha=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("weight")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("classifier weights (solid) vs generator probabilities (dashed)")
    ax.legend(framealpha=0.9)
    fig.tight_layout()
    fig.savefig(target, dpi=150)
    plt.close(fig)


def render_all(figures_dir, out_dir) -> list[Path]:
    """Render the three report figures from ``figures_dir`` into ``out_dir``.

    Returns the written image paths. Inputs are opened read-only; running
    twice overwrites the same three files.
    """
    src = Path(figures_dir)
    loss = load_columns(src / "fig1_loss.csv", SCHEMAS["fig1_loss.csv"])
    preds = load_columns(src / "fig2_preds.csv", SCHEMAS["fig2_preds.csv"])
    data = load_columns(src / "fig2_data.csv", SCHEMAS["fig2_data.csv"])
    weights = load_columns(src / "fig3_weights.csv", SCHEMAS["fig3_weights.csv"])
    if not preds["x"]:
        raise SchemaError("fig2_preds.csv: no prediction rows; refusing to draw a blank figure")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "fig1_loss.png", out / "fig2_preds.png", out / "fig3_weights.png"]
    draw_loss(loss, written[0])
    draw_predictions(preds, data, written[1])
    draw_weights(weights, written[2])
    return written
