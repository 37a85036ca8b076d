from __future__ import annotations

import csv
import json

import pytest

from poincare_fewbody.cli import RunConfig, main
from poincare_fewbody.errors import ParameterError

SMALL_3B = {"threebody_grid": [8, 6], "grid": {"n_k": 48, "n_q": 32, "n_angle": 8, "k_scale": 400.0, "q_scale": 300.0}}


def _config(tmp_path, name="cfg.json", **d):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def _read(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def group_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("gc")
    code = main(["group-check", "--out", str(out)])
    return code, _read(out / "group_check.json")


def test_group_check_default_passes(group_report):
    code, rep = group_report
    assert code == 0 and rep["pass"]
    assert rep["schema_version"] == 1
    names = {c["check_name"] for c in rep["checks"]}
    assert {"cocycle_canonical", "cocycle_lightfront", "cg_intertwining", "subgroup_front"} <= names
    for c in rep["checks"]:
        assert set(c) >= {"check_name", "samples", "max_deviation", "pass"}


def test_group_check_seed_change_same_verdicts(tmp_path, group_report):
    code = main(["group-check", "--out", str(tmp_path), "--seed", "987"])
    rep = _read(tmp_path / "group_check.json")
    assert code == 0
    assert [c["pass"] for c in rep["checks"]] == [c["pass"] for c in group_report[1]["checks"]]


def test_group_check_broken_tolerance_reports_failures(tmp_path):
    tol = {"cocycle": 1e-16, "unitarity": 1e-16, "subgroup": 1e-10, "cg": 1e-16, "trimer_z": 1e-8}
    cfg = _config(tmp_path, tolerances=tol, samples={"cocycle": 50, "unitarity": 20, "subgroup": 10, "cg": 2})
    code = main(["group-check", "--config", cfg, "--out", str(tmp_path / "o")])
    rep = _read(tmp_path / "o" / "group_check.json")
    assert code != 0 and not rep["pass"]
    failed = {c["check_name"] for c in rep["checks"] if not c["pass"]}
    assert "cocycle_canonical" in failed and "cg_intertwining" in failed


def test_twobody_phases_rows_and_header(tmp_path):
    cfg = _config(tmp_path, k_list=[20.0, 100.0, 300.0])
    assert main(["twobody", "phases", "--config", cfg, "--out", str(tmp_path)]) == 0
    with open(tmp_path / "phases.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k_MeV", "delta_rel_rad", "delta_nr_rad", "diff"]
    assert len(rows) == 4
    assert all(abs(float(r[3])) < 1e-8 for r in rows[1:])
    assert _read(tmp_path / "phases.meta.json")["schema_version"] == 1


def test_twobody_phases_zero_potential(tmp_path):
    zero = {"lambda_r": 0.0, "mu_r": 600.0, "lambda_a": 0.0, "mu_a": 300.0}
    cfg = _config(tmp_path, interaction=zero)
    assert main(["twobody", "phases", "--config", cfg, "--out", str(tmp_path)]) == 0
    with open(tmp_path / "phases.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    assert len(rows) == 10 and all(float(r[3]) == 0.0 for r in rows)


def test_twobody_bound_default_and_unbound(tmp_path):
    assert main(["twobody", "bound", "--out", str(tmp_path / "a")]) == 0
    rep = _read(tmp_path / "a" / "twobody_bound.json")
    assert rep["status"] == "bound"
    masses = rep["relativistic"]["bound_masses_MeV"]
    assert len(masses) == 1 and masses[0] < 2 * 938.92
    weak = {"lambda_r": 0.0, "mu_r": 600.0, "lambda_a": -0.1, "mu_a": 300.0}
    cfg = _config(tmp_path, interaction=weak)
    assert main(["twobody", "bound", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    rep = _read(tmp_path / "b" / "twobody_bound.json")
    assert rep["status"] == "no_bound_state" and rep["explanation"]
    assert rep["relativistic"]["bound_masses_MeV"] == []


def test_threebody_zero_potential_status(tmp_path):
    zero = {"lambda_r": 0.0, "mu_r": 600.0, "lambda_a": 0.0, "mu_a": 300.0}
    cfg = _config(tmp_path, interaction=zero, **SMALL_3B)
    assert main(["threebody", "--config", cfg, "--out", str(tmp_path)]) == 0
    rep = _read(tmp_path / "trimer.json")
    assert rep["status"] == "no_bound_state"
    assert (tmp_path / "convergence.csv").exists()


def test_threebody_small_grid_outputs(tmp_path):
    cfg = _config(tmp_path, **SMALL_3B)
    assert main(["threebody", "--config", cfg, "--out", str(tmp_path)]) == 0
    rep = _read(tmp_path / "trimer.json")
    assert rep["status"] == "bound"
    assert rep["difference_MeV"] == pytest.approx(rep["M3_rel_MeV"] - rep["M3_nr_MeV"])
    assert rep["difference_MeV"] != 0.0
    with open(tmp_path / "convergence.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n_k", "n_q", "M3_MeV"] and [r[:2] for r in rows[1:]] == [["8", "6"], ["16", "12"]]


def test_outputs_are_byte_identical(tmp_path):
    cfg = _config(tmp_path, k_list=[50.0, 250.0], samples={"cocycle": 20, "unitarity": 5, "subgroup": 5, "cg": 1})
    for run in ("r1", "r2"):
        out = str(tmp_path / run)
        assert main(["group-check", "--config", cfg, "--out", out, "--seed", "5"]) == 0
        assert main(["twobody", "phases", "--config", cfg, "--out", out]) == 0
        assert main(["twobody", "bound", "--config", cfg, "--out", out]) == 0
    for name in ("group_check.json", "phases.csv", "phases.meta.json", "twobody_bound.json"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


@pytest.mark.parametrize(
    "bad",
    [
        {"tolerances": {"cocycle": 0.5}},
        {"tolerances": {"cg": 0.0}},
        {"m1": -1.0},
        {"unknown_key": 1},
        {"grid": {"n_k": 1}},
        {"seed": -3},
    ],
)
def test_invalid_config_exit_code(tmp_path, bad):
    cfg = _config(tmp_path, **bad)
    assert main(["twobody", "bound", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_missing_config_file(tmp_path):
    assert main(["group-check", "--config", str(tmp_path / "nope.json")]) == 2


def test_unequal_masses_rejected_by_threebody(tmp_path):
    cfg = _config(tmp_path, m3=900.0, **SMALL_3B)
    assert main(["threebody", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_config_round_trip():
    cfg = RunConfig(seed=4, k_list=(10.0, 20.0))
    assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ParameterError):
        RunConfig(k_list=(0.0,))
