import json

import pytest

from ultraseg.cli import main
from ultraseg.cluster import Dendrogram, constrained_complete_link
from ultraseg.correspondence import factor_decomposition, frequency_model
from ultraseg.haar import forward
from ultraseg.ingest import load_signal, read_table
from ultraseg.regression import fold_and_regress, mse_sweep

EXPECTED = {
    "table.csv",
    "factors.json",
    "dendrogram.json",
    "dendrogram.nwk",
    "decomposition.csv",
    "manifest.json",
    "synthetic_signal.fit.csv",
    "synthetic_signal.sweep.csv",
    "synthetic_signal.breakpoints.txt",
}


@pytest.fixture
def table_path(fixtures_dir):
    return str(fixtures_dir / "synthetic_table.csv")


@pytest.fixture
def signal_path(fixtures_dir):
    return str(fixtures_dir / "synthetic_signal.csv")


def run(*args):
    return main([str(a) for a in args])


def test_pipeline_outputs_match_library(tmp_path, table_path, signal_path):
    out = tmp_path / "out"
    assert run("pipeline", "--table", table_path, "--signal", signal_path, "--keep", 2, "--out", out) == 0
    assert {p.name for p in out.iterdir()} == EXPECTED

    table = read_table(open(table_path).read())
    dec = factor_decomposition(frequency_model(table))
    tree = constrained_complete_link(dec.row_factors[:, :2], table.row_labels)
    assert (out / "factors.json").read_text() == dec.to_json()
    assert (out / "dendrogram.json").read_text() == tree.to_json()
    assert (out / "dendrogram.nwk").read_text() == tree.to_newick()
    assert (out / "decomposition.csv").read_text() == forward(tree, dec.row_factors[:, :2]).to_csv(["F1", "F2"])
    signal = load_signal(open(signal_path).read())
    assert (out / "synthetic_signal.fit.csv").read_text() == fold_and_regress(tree, signal, 2).to_csv()
    sweep_lines = (out / "synthetic_signal.sweep.csv").read_text().splitlines()
    assert len(sweep_lines) == 13 and sweep_lines[-1] == "11,0.0"
    assert [float(l.split(",")[1]) for l in sweep_lines[1:]] == [m for _, m, _ in mse_sweep(tree, signal)]
    assert "1 -- 5, 6 -- 9, 10 -- 12" in (out / "synthetic_signal.breakpoints.txt").read_text()

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["dims"] == 2
    assert manifest["conventions"]["haar_sign"].startswith("left")
    assert manifest["conventions"]["mse"] == "mean over n points"
    assert manifest["dropped_rows"] == []
    assert sorted(manifest["artifacts"]) == sorted(EXPECTED)


def test_stagewise_commands_reproduce_pipeline(tmp_path, table_path, signal_path):
    whole = tmp_path / "whole"
    assert run("pipeline", "--table", table_path, "--signal", signal_path, "--keep", 3, "--out", whole) == 0
    s = tmp_path / "stages"
    assert run("ca", "--table", table_path, "--out", s) == 0
    assert run("cluster", "--factors", s / "factors.json", "--out", s) == 0
    assert run("haar", "--tree", s / "dendrogram.json", "--factors", s / "factors.json", "--out", s) == 0
    assert run("regress", "--tree", s / "dendrogram.json", "--signal", signal_path, "--keep", 3, "--out", s) == 0
    for name in ("factors.json", "dendrogram.json", "dendrogram.nwk", "decomposition.csv",
                 "synthetic_signal.fit.csv", "synthetic_signal.breakpoints.txt"):
        assert (s / name).read_bytes() == (whole / name).read_bytes(), name
    assert "sign_convention" in json.loads((s / "decomposition.json").read_text())


def test_sweep_command(tmp_path, table_path, signal_path):
    s = tmp_path / "s"
    run("ca", "--table", table_path, "--out", s)
    run("cluster", "--factors", s / "factors.json", "--out", s)
    assert run("sweep", "--tree", s / "dendrogram.json", "--signal", signal_path, "--out", s) == 0
    fits = (s / "synthetic_signal.fit.csv").read_text().splitlines()
    assert fits[0] == "keep,label,original,fitted"
    assert len(fits) == 1 + 12 * 12
    table = (s / "synthetic_signal.breakpoints.txt").read_text().splitlines()
    assert table[1].startswith("keep=0 | 1 | 1 -- 12")
    assert len(table) == 13


def test_ingest_from_events(tmp_path, fixtures_dir):
    out = tmp_path / "o"
    events = fixtures_dir / "events_small.csv"
    assert run("ingest", "--events", events, "--granularity", "month", "--from", "2001-03", "--to", "2001-05", "--out", out) == 0
    assert (out / "table.csv").read_text() == "label,killed,injured\n2001-03,4,6\n2001-05,0,7\n"
    assert json.loads((out / "table_meta.json").read_text())["dropped_rows"] == ["2001-04"]


def test_pipeline_from_events_without_signals(tmp_path, fixtures_dir):
    out = tmp_path / "o"
    events = fixtures_dir / "events_small.csv"
    assert run("pipeline", "--events", events, "--granularity", "month", "--out", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["dropped_rows"] == ["2001-04"]
    assert manifest["inputs"]["events"]["file"] == "events_small.csv"


def test_both_sources_is_validation_error(tmp_path, table_path, fixtures_dir, capsys):
    code = run("pipeline", "--table", table_path, "--events", fixtures_dir / "events_small.csv", "--out", tmp_path / "o")
    assert code == 2
    assert "[ingest]" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_wrong_length_signal_names_file(tmp_path, table_path, capsys):
    bad = tmp_path / "short.csv"
    bad.write_text("label,value\n1993,1\n1994,2\n")
    out = tmp_path / "o"
    code = run("pipeline", "--table", table_path, "--signal", bad, "--keep", 1, "--out", out)
    assert code == 3
    err = capsys.readouterr().err
    assert "short.csv" in err and "2 points" in err
    assert not out.exists() or not any(out.iterdir())


def test_keep_out_of_range(tmp_path, table_path, signal_path):
    assert run("pipeline", "--table", table_path, "--signal", signal_path, "--keep", 12, "--out", tmp_path / "o") == 2


def test_median_linkage_cannot_regress(tmp_path, table_path, signal_path):
    assert run("pipeline", "--table", table_path, "--linkage", "median", "--signal", signal_path,
               "--keep", 1, "--out", tmp_path / "o") == 2
    assert run("pipeline", "--table", table_path, "--linkage", "median", "--out", tmp_path / "m") == 0
    tree = Dendrogram.from_json((tmp_path / "m" / "dendrogram.json").read_text())
    assert tree.linkage == "median"


def test_missing_file_is_data_error(tmp_path):
    assert run("ca", "--table", tmp_path / "nope.csv", "--out", tmp_path / "o") == 3


def test_bad_dims(tmp_path, table_path):
    assert run("pipeline", "--table", table_path, "--dims", 0, "--out", tmp_path / "o") == 2


def test_dims_beyond_retained_uses_all(tmp_path, table_path):
    assert run("pipeline", "--table", table_path, "--dims", 50, "--out", tmp_path / "o") == 0
    header = (tmp_path / "o" / "decomposition.csv").read_text().splitlines()[1:]
    assert [line.split(",")[0] for line in header] == ["F1", "F2", "F3", "F4", "F5"]


def test_argparse_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["pipeline", "--keep", "1", "--sweep", "--out", str(tmp_path)])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["regress", "--tree", "t.json", "--signal", "s.csv", "--out", str(tmp_path)])
    assert exc.value.code == 2
