"""Command-line behavior: schemas, determinism, and the exit-code table
(0 ok, 1 usage, 2 validation, 3 I/O, 4 verification failure)."""

import json

import numpy as np
import pytest

from cclvq import cli, verify
from cclvq.data import load_csv
from cclvq.synthetic import MultimodalRegressionSpec, mode_probs


def run(argv):
    return cli.main(argv)


@pytest.fixture
def dirac_csv(tmp_path):
    path = tmp_path / "dirac.csv"
    assert run(["gen", "--experiment", "two-dirac", "--n-samples", "200",
                "--seed", "7", "--out", str(path)]) == 0
    return path


class TestGen:
    def test_writes_schema_valid_csv(self, dirac_csv):
        ds = load_csv(dirac_csv)
        assert ds.n_samples == 200 and ds.in_dim == 1 and ds.out_dim == 1

    def test_repeat_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["gen", "--experiment", "multimodal", "--n-samples", "150", "--seed", "3"]
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_finite_experiment_has_label_inputs(self, tmp_path):
        path = tmp_path / "fin.csv"
        assert run(["gen", "--experiment", "finite", "--n-samples", "80",
                    "--seed", "1", "--out", str(path)]) == 0
        assert open(path).readline().startswith("x_label,")

    def test_zero_samples_is_validation_error(self, tmp_path, capsys):
        code = run(["gen", "--experiment", "two-dirac", "--n-samples", "0",
                    "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "n-samples" in capsys.readouterr().err

    def test_unwritable_out_is_io_error(self, tmp_path):
        code = run(["gen", "--experiment", "two-dirac", "--n-samples", "5",
                    "--out", str(tmp_path / "no" / "dir" / "x.csv")])
        assert code == 3


class TestTrain:
    def test_writes_model_and_metrics(self, dirac_csv, tmp_path):
        model, metrics = tmp_path / "m.json", tmp_path / "t.jsonl"
        code = run(["train", "--data", str(dirac_csv), "--gamma-exp", "3e-3",
                    "--epochs", "8", "--seed", "2",
                    "--model-out", str(model), "--metrics-out", str(metrics)])
        assert code == 0
        records = [json.loads(line) for line in open(metrics)]
        assert len(records) == 8
        assert records[0]["epoch"] == 1
        for key in ("train_delta", "heldout_delta", "per_expert_counts",
                    "usage_entropy", "classifier_accuracy"):
            assert key in records[0]
        envelope = json.loads(model.read_text())
        assert envelope["expert_kind"] == "affine"
        assert envelope["config"]["gamma_exp"] == 3e-3

    def test_repeat_run_is_byte_identical(self, dirac_csv, tmp_path):
        outs = []
        for name in ("r1.jsonl", "r2.jsonl"):
            path = tmp_path / name
            assert run(["train", "--data", str(dirac_csv), "--gamma-exp", "3e-3",
                        "--epochs", "6", "--seed", "9",
                        "--metrics-out", str(path)]) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_split_flag_grows_ensemble(self, dirac_csv, tmp_path):
        metrics = tmp_path / "t.jsonl"
        code = run(["train", "--data", str(dirac_csv), "--experts", "1",
                    "--gamma-exp", "3e-3", "--epochs", "6",
                    "--split-at", "4:0.5", "--metrics-out", str(metrics)])
        assert code == 0
        records = [json.loads(line) for line in open(metrics)]
        assert [r["n_experts"] for r in records] == [1, 1, 1, 2, 2, 2]

    def test_split_beyond_epochs_is_validation_error(self, dirac_csv):
        assert run(["train", "--data", str(dirac_csv), "--epochs", "5",
                    "--split-at", "9:1.0"]) == 2

    def test_bad_split_syntax_is_validation_error(self, dirac_csv):
        assert run(["train", "--data", str(dirac_csv), "--split-at", "abc"]) == 2

    def test_missing_data_is_io_error(self, tmp_path):
        assert run(["train", "--data", str(tmp_path / "ghost.csv")]) == 3

    def test_lookup_experts_on_label_data(self, tmp_path):
        fin = tmp_path / "fin.csv"
        run(["gen", "--experiment", "finite", "--n-samples", "120", "--seed", "4",
             "--out", str(fin)])
        metrics = tmp_path / "t.jsonl"
        code = run(["train", "--data", str(fin), "--expert-kind", "lookup",
                    "--experts", "2", "--gamma-exp", "1e-2", "--epochs", "4",
                    "--metrics-out", str(metrics)])
        assert code == 0
        assert len(open(metrics).readlines()) == 4


class TestUsageErrors:
    def test_no_subcommand(self):
        assert run([]) == 1

    def test_unknown_flag(self):
        assert run(["gen", "--experiment", "two-dirac", "--out", "x.csv",
                    "--frobnicate"]) == 1

    def test_unknown_experiment_choice(self):
        assert run(["gen", "--experiment", "cifar", "--out", "x.csv"]) == 1


class TestVerify:
    def test_passing_checks_exit_zero(self, capsys):
        code = run(["verify", "--checks", "prop1", "--trials", "5", "--seed", "1"])
        assert code == 0
        out = capsys.readouterr().out
        assert "prop1" in out and "pass" in out and "trials=5" in out

    def test_failing_check_exits_four_and_serializes(self, tmp_path, monkeypatch, capsys):
        broken = verify.CheckResult(
            name="prop1", passed=False, trials=1, max_residual=0.5,
            tolerance=1e-9, failing={"seed": 123, "ys": [[0.0], [1.0]]},
        )
        monkeypatch.setattr(cli.verify, "run_checks", lambda **kw: [broken])
        fail_out = tmp_path / "failure.json"
        code = run(["verify", "--fail-out", str(fail_out)])
        assert code == 4
        assert "FAIL" in capsys.readouterr().out
        payload = json.loads(fail_out.read_text())
        assert payload[0]["check"] == "prop1"
        assert payload[0]["failing"]["seed"] == 123


class TestFigures:
    def test_quick_run_produces_schema_and_pngs(self, tmp_path):
        out = tmp_path / "figs"
        code = run(["figures", "--out-dir", str(out), "--epochs", "10",
                    "--split-at", "4:1.0", "--split-at", "7:1.0",
                    "--n-samples", "300"])
        assert code == 0
        assert (out / "fig1_loss.csv").exists()
        header = open(out / "fig1_loss.csv").readline().strip()
        assert header == "epoch,train_delta,heldout_delta,n_experts"
        assert open(out / "fig2_preds.csv").readline().strip() == "x,expert,y_pred"
        assert open(out / "fig2_data.csv").readline().strip() == "x,y"
        assert open(out / "fig3_weights.csv").readline().strip() == \
            "x,expert,weight_pred,weight_true"
        for name in ("fig1_loss.png", "fig2_preds.png", "fig3_weights.png"):
            assert (out / name).stat().st_size > 0

    def test_no_render_skips_pngs(self, tmp_path):
        out = tmp_path / "figs"
        code = run(["figures", "--out-dir", str(out), "--epochs", "4",
                    "--split-at", "2:1.0", "--n-samples", "200", "--no-render"])
        assert code == 0
        assert not list(out.glob("*.png"))
        # weight_true column is the generator probability, exactly
        spec = MultimodalRegressionSpec(n_samples=200)
        rows = [l.strip().split(",") for l in open(out / "fig3_weights.csv")][1:]
        x0 = float(rows[0][0])
        assert float(rows[0][3]) in [pytest.approx(p) for p in mode_probs(spec, x0)]
