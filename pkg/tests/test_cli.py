from __future__ import annotations

import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from dglab.cli import main
from dglab.errors import ConfigError
from dglab.export import plain, read_csv, write_csv
from dglab.pipeline import HARNACK_COLUMNS, HOLDER_COLUMNS, SWEEP_COLUMNS
from dglab.scenario import bundled, bundled_names, load_scenario, scenario_from_dict

EXPECTED = {"heat_smoke", "gaussian_harnack", "figure2_moving_interface", "paper_s7_example",
            "forward_backward_sign", "expansion_bump"}


def heat_raw() -> dict:
    return json.loads(bundled("heat_smoke").read_text())


def write(tmp_path: Path, raw: dict, name: str = "cfg.json") -> str:
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# ------------------------------------------------------------ scenarios

def test_bundled_scenarios_present_and_valid():
    assert set(bundled_names()) == EXPECTED
    for name in bundled_names():
        load_scenario(bundled(name)).validate()


def test_schema_rejects_unknown_keys():
    raw = heat_raw()
    raw["weight"]["colour"] = "blue"
    with pytest.raises(ConfigError):
        scenario_from_dict(raw)


def test_regime_must_match_weight():
    raw = heat_raw()
    raw["regime"] = "forward_backward"
    with pytest.raises(ConfigError):
        scenario_from_dict(raw).validate()


def test_plain_and_csv_formatting(tmp_path):
    assert plain({"a": math.inf, "b": (1, 2.5), "c": math.nan}) == {"a": "inf", "b": [1, 2.5], "c": "nan"}
    p = write_csv(tmp_path / "t.csv", [{"x": 0.1, "ok": True, "v": -math.inf}], ["x", "ok", "v", "missing"])
    assert p.read_text() == "x,ok,v,missing\n0.1,true,-inf,\n"


# ------------------------------------------------------------ command line

def test_heat_smoke_runs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["all", "--config", "heat_smoke", "--out", str(out)]) == 0
    for name in ("solution.csv", "solution.bin", "harnack.csv", "harnack.json", "holder.csv",
                 "weights.json", "energy.csv", "oscillation.svg", "ratios.svg", "eps_sweep.svg"):
        assert (out / name).is_file(), name
    assert list(read_csv(out / "harnack.csv")[0])[: len(HARNACK_COLUMNS)] == list(HARNACK_COLUMNS)


@pytest.mark.parametrize("command", ["solve", "weights", "degiorgi", "harnack", "holder", "sweep-eps"])
def test_single_stages(tmp_path, command):
    assert main([command, "--config", "heat_smoke", "--out", str(tmp_path)]) == 0
    assert any(tmp_path.iterdir())


def test_malformed_json_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["all", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_inadmissible_probe_exit_4(tmp_path, capsys):
    raw = heat_raw()
    raw["probes"] = [{"x0": 0.5, "t0": 0.05, "r": 0.2, "strict": False}]
    raw["R_bar"] = 0.5
    assert main(["harnack", "--config", write(tmp_path, raw), "--out", str(tmp_path / "o")]) == 4
    assert "5r <= R_bar" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_solver_failure_exit_3(tmp_path, capsys):
    raw = json.loads(bundled("forward_backward_sign").read_text())
    raw["eps_strip"] = 1.5
    raw["grid"].update(nx=41, nt=21)
    raw["probes"] = []
    assert main(["solve", "--config", write(tmp_path, raw), "--out", str(tmp_path / "o")]) == 3
    assert "solver failure" in capsys.readouterr().err


def test_plot_without_reports_exit_5(tmp_path, capsys):
    assert main(["plot", "--out", str(tmp_path)]) == 5


def test_empty_probe_list_plots(tmp_path):
    raw = heat_raw()
    raw["probes"] = []
    raw.pop("holder")
    out = tmp_path / "o"
    assert main(["all", "--config", write(tmp_path, raw), "--out", str(out)]) == 0
    assert read_csv(out / "harnack.csv") == []
    for name in ("oscillation.svg", "ratios.svg", "eps_sweep.svg"):
        assert (out / name).read_text().lstrip().startswith("<?xml")
    assert main(["plot", "--out", str(out)]) == 0


def test_reruns_and_parallel_are_byte_identical(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["all", "--config", "heat_smoke", "--out", str(a)]) == 0
    assert main(["all", "--config", "heat_smoke", "--out", str(b)]) == 0
    assert main(["all", "--config", "heat_smoke", "--out", str(c), "--parallel", "3"]) == 0
    assert tree(a) == tree(b) == tree(c)


def test_environment_overrides_out(tmp_path, monkeypatch):
    monkeypatch.setenv("DGLAB_OUT", str(tmp_path / "env"))
    assert main(["solve", "--config", "heat_smoke", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "solution.csv").is_file()
    assert not (tmp_path / "flag").exists()


def test_list_and_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "dglab", "list"], capture_output=True, text=True, check=True)
    assert set(res.stdout.split()) == EXPECTED


def test_report_columns_are_documented(tmp_path):
    out = tmp_path / "o"
    assert main(["all", "--config", "heat_smoke", "--out", str(out)]) == 0
    assert (out / "holder.csv").read_text().splitlines()[0] == ",".join(HOLDER_COLUMNS)
    assert (out / "sweep.csv").read_text().splitlines()[0] == ",".join(SWEEP_COLUMNS)
