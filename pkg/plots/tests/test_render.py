import shutil
import subprocess

import pytest

from cclvq_plots import SchemaError, cli, render_all


@pytest.fixture(scope="session")
def exported(tmp_path_factory):
    """Real report CSVs, produced by the training CLI (a fast configuration
    of the same export path the full run uses)."""
    exe = shutil.which("cclvq")
    if exe is None:
        pytest.fail("the cclvq training CLI must be installed to export report CSVs")
    out = tmp_path_factory.mktemp("export")
    res = subprocess.run(
        [exe, "figures", "--out-dir", str(out), "--epochs", "24", "--n-samples", "400",
         "--split-at", "9:1.0", "--split-at", "17:1.0", "--seed", "0", "--no-render"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    return out


def tiny_report(dir):
    """Hand-written four-file report, small enough to corrupt per test."""
    (dir / "fig1_loss.csv").write_text(
        "epoch,train_delta,heldout_delta,n_experts\n1,4.0,4.5,1\n2,2.0,2.2,2\n3,1.0,1.1,2\n"
    )
    rows = ["x,expert,y_pred"]
    for i in (0, 1):
        rows += [f"{x},{i},{x + 10 * i}" for x in (-1.0, 0.0, 1.0)]
    (dir / "fig2_preds.csv").write_text("\n".join(rows) + "\n")
    (dir / "fig2_data.csv").write_text("x,y\n-1.0,9.0\n0.0,0.5\n1.0,11.0\n")
    rows = ["x,expert,weight_pred,weight_true"]
    for i in (0, 1):
        rows += [f"{x},{i},0.5,0.5" for x in (-1.0, 0.0, 1.0)]
    (dir / "fig3_weights.csv").write_text("\n".join(rows) + "\n")
    return dir


def test_renders_three_nonempty_images_from_training_export(exported, tmp_path):
    written = render_all(exported, tmp_path / "img")
    assert [p.name for p in written] == ["fig1_loss.png", "fig2_preds.png", "fig3_weights.png"]
    for p in written:
        assert p.stat().st_size > 1000, p


def test_corrupted_export_schema_exits_nonzero(exported, tmp_path, capsys):
    for name in ("fig1_loss.csv", "fig2_preds.csv", "fig2_data.csv", "fig3_weights.csv"):
        shutil.copy(exported / name, tmp_path / name)
    broken = tmp_path / "fig3_weights.csv"
    head, _, tail = broken.read_text().partition("\n")
    broken.write_text(head.replace("weight_true", "wtrue") + "\n" + tail)
    code = cli.main([str(tmp_path), str(tmp_path / "img")])
    assert code != 0
    assert "weight_true" in capsys.readouterr().err


def test_missing_column_message_names_the_column(tmp_path):
    tiny_report(tmp_path)
    (tmp_path / "fig2_preds.csv").write_text("x,expert,pred\n0.0,0,1.0\n")
    with pytest.raises(SchemaError, match="y_pred"):
        render_all(tmp_path, tmp_path / "img")


def test_empty_predictions_are_refused(tmp_path, capsys):
    tiny_report(tmp_path)
    (tmp_path / "fig2_preds.csv").write_text("x,expert,y_pred\n")
    with pytest.raises(SchemaError, match="no prediction rows"):
        render_all(tmp_path, tmp_path / "img")
    assert cli.main([str(tmp_path), str(tmp_path / "img")]) == 1
    assert "fig2_preds" in capsys.readouterr().err


def test_missing_file_is_an_error(tmp_path):
    tiny_report(tmp_path)
    (tmp_path / "fig1_loss.csv").unlink()
    with pytest.raises(SchemaError, match="file not found"):
        render_all(tmp_path, tmp_path / "img")


def test_non_numeric_cell_reports_file_line_and_column(tmp_path):
    tiny_report(tmp_path)
    path = tmp_path / "fig2_data.csv"
    path.write_text(path.read_text().replace("0.5", "oops"))
    with pytest.raises(SchemaError, match=r"fig2_data\.csv:3.*'y'.*'oops'"):
        render_all(tmp_path, tmp_path / "img")


def test_inputs_are_left_byte_identical(tmp_path):
    tiny_report(tmp_path)
    names = ["fig1_loss.csv", "fig2_preds.csv", "fig2_data.csv", "fig3_weights.csv"]
    before = {n: (tmp_path / n).read_bytes() for n in names}
    render_all(tmp_path, tmp_path / "img")
    render_all(tmp_path, tmp_path / "img")  # idempotent overwrite
    assert {n: (tmp_path / n).read_bytes() for n in names} == before


def test_cli_prints_the_written_paths(tmp_path, capsys):
    tiny_report(tmp_path)
    assert cli.main([str(tmp_path), str(tmp_path / "img")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and all(line.endswith(".png") for line in lines)
