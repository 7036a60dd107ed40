"""Command-line front end.

Four subcommands: ``gen`` writes synthetic datasets as CSV, ``train`` fits
an ensemble and emits a JSON model snapshot plus a JSONL metrics trace,
``verify`` runs the oracle suites, and ``figures`` produces the figure-data
CSVs with quick-look PNG renderings alongside.

Exit codes: 0 success, 1 usage, 2 validation, 3 I/O, 4 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import verify
from .conditional import TrainConfig, init_from_data, make_ensemble, train
from .data import load_csv, save_csv
from .errors import DimensionMismatchError, ValidationError
from .figures import REFERENCE_TRAIN, reference_run, render_report, write_figure_data
from .model_io import save_model
from .synthetic import (
    MultimodalRegressionSpec,
    gen_finite_conditional,
    gen_multimodal,
    gen_two_dirac,
    random_finite_law,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_VERIFY = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse flavor that reports usage problems as exit code 1."""

    def error(self, message):
        raise _UsageError(message)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _parse_splits(pairs) -> tuple:
    schedule = []
    for item in pairs:
        epoch, sep, eps = item.partition(":")
        if not sep:
            raise ValidationError(f"--split-at wants EPOCH:EPSILON, got {item!r}")
        try:
            schedule.append((int(epoch), float(eps)))
        except ValueError as exc:
            raise ValidationError(f"--split-at wants EPOCH:EPSILON, got {item!r}") from exc
    return tuple(schedule)


def build_parser() -> _Parser:
    parser = _Parser(prog="cclvq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset as CSV")
    p.add_argument("--experiment", required=True, choices=("multimodal", "two-dirac", "finite"))
    p.add_argument("--n-samples", type=int, default=None, help="default 8000 (multimodal) or 4000")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.1, help="multimodal noise std")
    p.add_argument("--offset", type=float, default=100.0, help="two-dirac branch offset")
    p.add_argument("--max-labels", type=int, default=4, help="finite: label-count cap")
    p.add_argument("--max-atoms", type=int, default=8, help="finite: per-label atom cap")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit an ensemble on a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--expert-kind", default="affine", choices=("constant", "affine", "mlp", "lookup"))
    p.add_argument("--experts", type=int, default=2, help="initial expert count")
    p.add_argument("--hidden", type=int, default=20)
    p.add_argument("--gamma-exp", type=float, default=1e-3)
    p.add_argument("--gamma-cls", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--accumulation", type=int, default=1)
    p.add_argument("--noise-std", type=float, default=0.0, help="relative assignment-noise scale")
    p.add_argument("--noise-decay-epoch", type=int, default=1)
    p.add_argument("--split-at", action="append", default=[], metavar="EPOCH:EPSILON")
    p.add_argument("--loss", default="squared", choices=("squared", "l1"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--heldout-fraction", type=float, default=0.1)
    p.add_argument("--model-out", default=None)
    p.add_argument("--metrics-out", default=None)

    p = sub.add_parser("verify", help="run the oracle suites")
    p.add_argument("--checks", nargs="+", choices=verify.CHECKS, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fail-out", default="verify_failure.json",
                   help="where to serialize a failing instance")

    p = sub.add_parser("figures", help="run the reference experiment, write figure CSVs + PNGs")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int, default=REFERENCE_TRAIN.epochs)
    p.add_argument("--split-at", action="append", default=None, metavar="EPOCH:EPSILON",
                   help="default: 401:1.0 801:1.0")
    p.add_argument("--n-samples", type=int, default=8000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-render", action="store_true", help="skip the PNG pass")
    return parser


def cmd_gen(args) -> int:
    n = args.n_samples if args.n_samples is not None else (
        8000 if args.experiment == "multimodal" else 4000
    )
    if n <= 0:
        raise ValidationError(f"--n-samples must be positive, got {n}")
    if args.experiment == "multimodal":
        spec = MultimodalRegressionSpec(sigma=args.sigma, n_samples=n, seed=args.seed)
        dataset = gen_multimodal(spec)
    elif args.experiment == "two-dirac":
        dataset = gen_two_dirac(n, offset=args.offset, seed=args.seed)
    else:
        rng = np.random.default_rng(args.seed)
        law = random_finite_law(rng, max_labels=args.max_labels, max_atoms=args.max_atoms)
        dataset = gen_finite_conditional(law, n, seed=int(rng.integers(2**31)))
    save_csv(dataset, args.out)
    print(f"wrote {dataset.n_samples} samples to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    dataset = load_csv(args.data)
    config = TrainConfig(
        gamma_exp=args.gamma_exp,
        gamma_cls=args.gamma_cls,
        epochs=args.epochs,
        batch_size=args.batch_size,
        accumulation_factor=args.accumulation,
        assignment_noise_std=args.noise_std,
        noise_decay_epoch=args.noise_decay_epoch,
        split_schedule=_parse_splits(args.split_at),
        loss=args.loss,
        seed=args.seed,
        heldout_fraction=args.heldout_fraction,
    )
    kwargs = {}
    if dataset.input_kind == "label":
        kwargs["n_labels"] = dataset.n_labels
    else:
        kwargs["in_dim"] = dataset.in_dim
    state = make_ensemble(
        args.expert_kind, args.experts, dataset.out_dim,
        hidden=args.hidden, seed=args.seed, **kwargs,
    )
    state = init_from_data(state, dataset, np.random.default_rng((args.seed, 1)))
    state, trace = train(dataset, state, config)

    if args.metrics_out:
        with open(args.metrics_out, "w") as fh:
            for record in trace:
                fh.write(json.dumps(_jsonable(record)) + "\n")
    if args.model_out:
        echo = {
            "expert_kind": args.expert_kind,
            "initial_experts": args.experts,
            "hidden": args.hidden,
            "data": args.data,
            **{f: _jsonable(getattr(config, f)) for f in config.__dataclass_fields__},
        }
        save_model(args.model_out, state, echo)
    last = trace[-1]
    print(
        f"trained {state.n_experts} experts for {config.epochs} epochs: "
        f"train_delta={last['train_delta']:.6g} heldout_delta={last['heldout_delta']:.6g}"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run_checks(names=args.checks, seed=args.seed, trials=args.trials)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "pass" if r.passed else "FAIL"
        line = (
            f"{r.name:12s} {status}  trials={r.trials}  "
            f"max_residual={r.max_residual:.3e}  tol={r.tolerance:g}"
        )
        if r.detail:
            line += f"  ({r.detail})"
        print(line)
    if failed:
        payload = [
            {"check": r.name, "max_residual": r.max_residual, "tolerance": r.tolerance,
             "failing": _jsonable(r.failing)}
            for r in failed
        ]
        Path(args.fail_out).write_text(json.dumps(payload, indent=1) + "\n")
        print(f"{len(failed)} check(s) failed; failing instances written to {args.fail_out}",
              file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_figures(args) -> int:
    splits = _parse_splits(args.split_at) if args.split_at is not None else \
        REFERENCE_TRAIN.split_schedule
    config = TrainConfig(
        gamma_exp=REFERENCE_TRAIN.gamma_exp,
        gamma_cls=REFERENCE_TRAIN.gamma_cls,
        epochs=args.epochs,
        batch_size=REFERENCE_TRAIN.batch_size,
        split_schedule=splits,
        seed=args.seed,
    )
    spec = MultimodalRegressionSpec(n_samples=args.n_samples)
    state, trace, dataset = reference_run(spec, config)
    written = write_figure_data(args.out_dir, state, trace, dataset, spec)
    if not args.no_render:
        written += render_report(args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {"gen": cmd_gen, "train": cmd_train, "verify": cmd_verify, "figures": cmd_figures}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, DimensionMismatchError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
