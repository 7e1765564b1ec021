import json
import math

import pytest

from meanaction.main import run
from meanaction.verify_suite import EXPECTED_W

SLOPE_A = repr(1.0 + math.e / 30.0)


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text(
        """
[quadrature]
area_nx = 64
area_ny = 8

[search]
seed_nx = 4
seed_ny = 4

[run]
threads = 1
        """,
        encoding="utf-8",
    )
    return str(path)


@pytest.fixture()
def rotation_spec(tmp_path):
    path = tmp_path / "rotation.json"
    path.write_text(json.dumps({"kind": "rigid", "theta0": 0.5}), encoding="utf-8")
    return str(path)


def _json_output(capsys):
    return json.loads(capsys.readouterr().out)


def test_analyze_rotation(capsys, config_path, rotation_spec):
    assert run(["--config", config_path, "analyze", rotation_spec]) == 0

    document = _json_output(capsys)
    assert document["command"] == "analyze"
    assert document["status"] == "ok"
    assert document["result"]["flux"] == pytest.approx(1.0)
    assert document["result"]["calabi"] == pytest.approx(0.5)
    assert document["result"]["admissibility"]["admissible"]
    assert document["provenance"]["area_grid"] == [64, 8]


def test_analyze_with_offset_shifts_every_invariant(capsys, config_path, rotation_spec):
    assert run(["--config", config_path, "analyze", rotation_spec, "--offset", "1"]) == 0

    result = _json_output(capsys)["result"]
    assert result["offset"] == 1
    assert result["y_plus"] == pytest.approx(1.5)
    assert result["y_minus"] == pytest.approx(1.5)
    assert result["flux"] == pytest.approx(3.0)
    assert result["calabi"] == pytest.approx(1.5)
    assert result["invariants"]["flux"] == pytest.approx(result["flux"])
    assert result["invariants"]["calabi"] == pytest.approx(result["calabi"])


def test_bound_and_classify(capsys, config_path, rotation_spec):
    assert run(["--config", config_path, "bound", rotation_spec, "--N", "0", "1"]) == 0
    bounds = _json_output(capsys)["rows"]
    assert [row["N"] for row in bounds] == [0, 1]
    assert bounds[0]["bound"] == pytest.approx(0.5)

    assert run(["--config", config_path, "classify", rotation_spec]) == 0
    classification = _json_output(capsys)["result"]["classification"]
    assert classification["case"] in ("1a", "1b")
    assert classification["hypothesis_holds"]
    assert classification["y_plus_rational"]


def test_ech_wk(capsys, config_path):
    assert run(["--config", config_path, "ech", "wk", "--a", SLOPE_A, "--p", "3", "--kmax", "11"]) == 0

    assert tuple(_json_output(capsys)["result"]["w"]) == EXPECTED_W


def test_ech_index_with_oracle_as_table(capsys, config_path):
    argv = ["--config", config_path, "--format", "table", "ech", "index", "--a", SLOPE_A, "--p", "3"]

    assert run(argv + ["--mplus", "3", "--mminus", "0", "--oracle"]) == 0
    assert capsys.readouterr().out.startswith("ech index (meanaction")


def test_ech_nseq_as_csv(capsys, config_path):
    argv = ["--config", config_path, "--format", "csv", "ech", "nseq", "--a", "1", "--b", "1", "--count", "5"]

    assert run(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# version=")
    body = [line for line in lines if not line.startswith("#")]
    assert body[0] == "k,N,guard_eps"
    assert [row.split(",")[1] for row in body[1:]] == ["0.0", "1.0", "1.0", "2.0", "2.0"]


def test_usage_error_goes_to_stderr(capsys, config_path):
    assert run(["--config", config_path, "ech", "wk", "--a", "1.1"]) == 1

    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["status"] == "error"
    assert error["error"] == "usage_error"


def test_inconsistent_slopes_rejected(capsys, config_path):
    argv = ["--config", config_path, "ech", "index", "--a", SLOPE_A, "--b", "2.5", "--p", "3"]

    assert run(argv + ["--mplus", "3", "--mminus", "0"]) == 1
    assert "usage_error" in capsys.readouterr().err


def test_bad_map_spec(capsys, config_path, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"kind": "spiral"}), encoding="utf-8")

    assert run(["--config", config_path, "analyze", str(path)]) == 1
    assert "map_spec_error" in capsys.readouterr().err


def test_floor_guard_exit_code(capsys, config_path):
    argv = ["--config", config_path, "ech", "index", "--a", "1.5", "--p", "3", "--mplus", "3", "--mminus", "0"]

    assert run(argv) == 2
    assert "floor_guard_tripped" in capsys.readouterr().err
