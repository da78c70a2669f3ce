import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import pytest

from height_census.census import CensusRow, FitReport
from height_census.cli import (
    EXIT_FAIL,
    EXIT_INCOMPLETE,
    EXIT_INPUT,
    EXIT_OK,
    _fit_status,
    main,
    parse_ladder,
)
from height_census.errors import InputError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
PROVENANCES = {"exact", "closed_form", "triangulation±err", "heuristic"}


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(command, config, out, *extra):
    return main([command, "--config", str(config), "--out", str(out), *extra])


def numbers(node, path="$"):
    """Yield (path, dict) for every numeric entry of a report."""
    if isinstance(node, dict):
        if "value" in node and "provenance" in node:
            yield path, node
        for key, val in node.items():
            if key != "value":
                yield from numbers(val, f"{path}.{key}")
    elif isinstance(node, list):
        for i, val in enumerate(node):
            yield from numbers(val, f"{path}[{i}]")


def bare_numbers(node, path="$"):
    """Numbers that are not wrapped in a provenance entry."""
    if isinstance(node, dict):
        if "value" in node and "provenance" in node:
            node = {k: v for k, v in node.items() if k not in ("value", "error")}
        for key, val in node.items():
            if key in ("k", "seed", "exit_status", "cells", "tolerance", "monotone", "complete", "version"):
                continue
            yield from bare_numbers(val, f"{path}.{key}")
    elif isinstance(node, list):
        for i, val in enumerate(node):
            yield from bare_numbers(val, f"{path}[{i}]")
    elif isinstance(node, (int, float)) and not isinstance(node, bool):
        yield path


def test_volume_command(tmp_path):
    assert run("volume", CONFIGS / "volume_s_units.toml", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["c"]["value"] == pytest.approx(24.976, abs=1e-3)
    assert rep["c"]["value"] == pytest.approx(rep["c_closed_form"]["value"], rel=1e-6)
    assert rep["c"]["provenance"] == "triangulation±err"
    assert rep["c_closed_form"]["provenance"] == "closed_form"
    assert rep["verdict"] == "PASS"


def test_census_command(tmp_path):
    assert run("census", CONFIGS / "census_half.toml", tmp_path) == EXIT_OK
    with open(tmp_path / "rows.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["X", "count", "degenerate", "complete", "ratio"]
    assert [r[1] for r in rows[1:]] == ["7", "13", "27"]
    ratios = [float(r[4]) for r in rows[1:]]
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)
    plot = list(csv.reader(open(tmp_path / "plot.csv")))
    assert plot[0] == ["x", "y"]
    assert float(plot[1][0]) == pytest.approx(math.log(math.log(100)))
    assert float(plot[1][1]) == pytest.approx(math.log(7))
    assert (tmp_path / "plot.png").stat().st_size > 0


@pytest.mark.parametrize(
    "command,config",
    [("hball", "hball_s_units.toml"), ("recurrence", "recurrence_pow.toml"), ("represent", "represent_ones.toml")],
)
def test_shipped_configs_pass(tmp_path, command, config):
    assert run(command, CONFIGS / config, tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["fit"]["verdict"] == "PASS"
    assert (tmp_path / "plot.png").exists()


@pytest.mark.parametrize(
    "command,config",
    [("volume", "volume_s_units.toml"), ("census", "census_half.toml"), ("recurrence", "recurrence_pow.toml")],
)
def test_every_number_has_provenance(tmp_path, command, config):
    run(command, CONFIGS / config, tmp_path)
    rep = json.loads((tmp_path / "report.json").read_text())
    entries = list(numbers(rep))
    assert entries
    for path, node in entries:
        assert node["provenance"] in PROVENANCES, path
    assert list(bare_numbers(rep)) == []


def test_malformed_rational_names_key(tmp_path, capsys):
    cfg = write(tmp_path, 'k = 2\ngenerators = [["2//3", "1"]]\n')
    assert run("volume", cfg, tmp_path / "o") == EXIT_INPUT
    err = capsys.readouterr().err
    assert "generators[0][0]" in err and "2//3" in err


@pytest.mark.parametrize(
    "text,needle",
    [
        ('generators = [["2", "1"]]\n', "'k'"),
        ('k = 2\ngenerators = [["2"]]\n', "generators[0]"),
        ('k = 2\ngenerators = [["2", "1/2"]]\nladder = ["10", "5", "20"]\n', "ladder"),
        ('k = 2\ngenerators = [["2", "1/2"]]\nseed = -1\n', "seed"),
        ('k = 2\ngenerators = [["2", "1/2"]]\n[census]\nbogus = 1\n', "census"),
        ("k = 2\ngenerators = [[\n", "run.toml"),
    ],
)
def test_input_errors(tmp_path, capsys, text, needle):
    cfg = write(tmp_path, text)
    assert run("hball", cfg, tmp_path / "o") == EXIT_INPUT
    assert needle in capsys.readouterr().err


def test_missing_config_is_input_error(capsys):
    assert main(["census"]) == EXIT_INPUT


def test_fit_failure_exit(tmp_path):
    text = (CONFIGS / "hball_s_units.toml").read_text() + "tolerance = 1e-6\n"
    assert run("hball", write(tmp_path, text), tmp_path / "o") == EXIT_FAIL
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["fit"]["verdict"] == "FAIL" and rep["exit_status"] == EXIT_FAIL


def test_tail_instability_exit(tmp_path):
    # a starved scan cannot reach the terms n 2^n + 1 that exceed X = 2^600
    text = f'roots = ["2", "1"]\npolys = [["0", "1"], ["1"]]\nladder = ["{2**600}"]\nslack = -0.999\ntail = 1\n'
    assert run("recurrence", write(tmp_path, text), tmp_path / "o") == EXIT_INCOMPLETE


def test_incomplete_takes_precedence_over_fail():
    rows = [CensusRow(X=Fraction(10), count=1, complete=False)]
    fit = FitReport(ratios=[0.0], slope=0.0, final_ratio=0.0, monotone=False, tolerance=0.15, passed=False)
    assert _fit_status(fit, rows) == EXIT_INCOMPLETE
    assert _fit_status(fit, [CensusRow(X=Fraction(10), count=1)]) == EXIT_FAIL
    assert _fit_status(None, [CensusRow(X=Fraction(10), count=1)]) == EXIT_OK


def test_rank_zero_group_rejected(tmp_path):
    cfg = write(tmp_path, 'k = 2\ngenerators = [["-1", "1"]]\n')
    assert run("volume", cfg, tmp_path / "o") == EXIT_INPUT


def test_invalid_family_and_recurrence(tmp_path, capsys):
    cfg = write(tmp_path, 'k = 1\ngenerators = [["2"]]\nA = [["1", "2"], ["2", "1"]]\nladder = ["10"]\n')
    assert run("represent", cfg, tmp_path / "o") == EXIT_INPUT
    assert "(1.a)" in capsys.readouterr().err
    cfg = write(tmp_path, 'roots = ["2", "-2"]\npolys = [["1"], ["1"]]\nladder = ["10"]\n')
    assert run("recurrence", cfg, tmp_path / "o") == EXIT_INPUT
    assert "roots" in capsys.readouterr().err


def test_auto_close_permutations(tmp_path):
    text = 'k = 1\ngenerators = [["2"]]\nA = [["1", "3"]]\nauto_close_permutations = true\nladder = ["2", "10"]\n'
    assert run("represent", write(tmp_path, text), tmp_path / "o") == EXIT_OK
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["A"] == [["1", "3"], ["3", "1"]]
    assert rep["rows"][0]["count"]["value"] == 3


def test_determinism_and_chunking(tmp_path):
    base = (CONFIGS / "census_half.toml").read_text()
    a = run("census", write(tmp_path, base, "a.toml"), tmp_path / "a")
    b = run("census", write(tmp_path, base, "b.toml"), tmp_path / "b")
    c = run("census", write(tmp_path, base.replace("parallel_chunks = 1", "parallel_chunks = 2"), "c.toml"), tmp_path / "c")
    assert a == b == c == EXIT_OK
    ra = (tmp_path / "a" / "report.json").read_bytes()
    assert ra == (tmp_path / "b" / "report.json").read_bytes()
    assert ra == (tmp_path / "c" / "report.json").read_bytes()
    assert (tmp_path / "a" / "rows.csv").read_bytes() == (tmp_path / "c" / "rows.csv").read_bytes()


def test_seed_recorded_and_used(tmp_path):
    run("volume", CONFIGS / "volume_s_units.toml", tmp_path / "a", "--seed", "7")
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["seed"] == 7


def test_missing_plot_dir_still_succeeds(tmp_path, caplog):
    text = f'plot_dir = "{tmp_path / "nowhere"}"\n' + (CONFIGS / "census_half.toml").read_text()
    assert run("census", write(tmp_path, text), tmp_path / "o") == EXIT_OK
    assert (tmp_path / "o" / "report.json").exists()
    assert not (tmp_path / "o" / "plot.png").exists()
    assert "skipping figures" in caplog.text


def test_plot_dir_redirects_figure(tmp_path):
    figs = tmp_path / "figs"
    figs.mkdir()
    text = f'plot_dir = "{figs}"\n' + (CONFIGS / "census_half.toml").read_text()
    assert run("census", write(tmp_path, text), tmp_path / "o") == EXIT_OK
    assert (figs / "plot.png").exists()


def test_ladder_forms():
    assert parse_ladder({"ladder": ["10", "100"]}) == [10, 100]
    assert parse_ladder({"ladder": {"base": "2", "rungs": 3, "start": 4, "step": 4}}) == [16, 256, 4096]
    assert parse_ladder({"ladder": {"base": "10", "rungs": 2}}) == [10, 100]
    with pytest.raises(InputError):
        parse_ladder({"ladder": {"base": "10", "rungs": 0}})
    with pytest.raises(InputError):
        parse_ladder({"ladder": "10"})
