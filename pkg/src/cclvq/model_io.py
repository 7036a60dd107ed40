"""JSON persistence for trained ensembles.

The on-disk form is a versioned envelope: scalar shape fields plus flat
parameter lists per expert and for the classifier. Floats are written with
``repr`` semantics (shortest round-trip form), so a save/load cycle
reproduces forward outputs bitwise.
"""

from __future__ import annotations

import json
from pathlib import Path

from .conditional import EnsembleState
from .errors import ValidationError
from .models import ParamFunction, make_function

FORMAT_VERSION = 1


def _function_block(fn: ParamFunction) -> dict:
    return {
        "kind": fn.kind,
        "in_dim": fn.in_dim,
        "n_labels": fn.n_labels,
        "hidden": fn.hidden,
        "params": fn.params.tolist(),
    }


def _function_from_block(block: dict, out_dim: int) -> ParamFunction:
    return make_function(
        block["kind"],
        out_dim,
        in_dim=block["in_dim"],
        n_labels=block["n_labels"],
        hidden=block["hidden"],
        params=block["params"],
    )


def save_model(path, state: EnsembleState, config: dict | None = None) -> None:
    """Write the ensemble (and an optional config echo) as JSON."""
    first = state.experts[0]
    envelope = {
        "version": FORMAT_VERSION,
        "expert_kind": first.kind,
        "n": state.n_experts,
        "d": first.out_dim,
        "p": first.in_dim if first.input_kind == "vector" else first.n_labels,
        "experts": [_function_block(f) for f in state.experts],
        "classifier": {
            **_function_block(state.classifier),
            "out_dim": state.classifier.out_dim,
        },
        "config": config,
    }
    Path(path).write_text(json.dumps(envelope, indent=1) + "\n")


def load_model(path) -> tuple[EnsembleState, dict | None]:
    """Read an envelope back into an ensemble. Raises ValidationError on
    anything that is not a version-1 envelope with coherent shapes."""
    try:
        envelope = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(envelope, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    for key in ("version", "expert_kind", "n", "d", "experts", "classifier"):
        if key not in envelope:
            raise ValidationError(f"{path}: missing field {key!r}")
    if envelope["version"] != FORMAT_VERSION:
        raise ValidationError(
            f"{path}: format version {envelope['version']} not supported"
        )
    if len(envelope["experts"]) != envelope["n"]:
        raise ValidationError(
            f"{path}: envelope says n={envelope['n']} but has "
            f"{len(envelope['experts'])} expert blocks"
        )
    try:
        experts = [_function_from_block(b, envelope["d"]) for b in envelope["experts"]]
        cls_block = envelope["classifier"]
        classifier = _function_from_block(cls_block, cls_block["out_dim"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed function block ({exc})") from exc
    return EnsembleState(experts=experts, classifier=classifier), envelope.get("config")
