import json

import pytest

from vsd.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main

SMALL = {
    "name": "small",
    "exponent": {"a0": 0.5, "slope": 0.25},
    "N": 8,
    "Nt": 10,
    "source": {"kind": "modes", "constant": 1.0, "modes": [[1, 1, 1.0]]},
    "noise": {"delta": 0.05, "seed": 3},
    "algorithm": {"kind": "thresholding", "max_outer": 5},
    "oracle": {"M": 8, "Nt_fine": 200},
}


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("VSD_OUT", str(tmp_path / "out"))
    return tmp_path / "out"


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return p


def test_forward_writes_outputs(cfg_path, out, capsys):
    assert main(["forward", "--config", str(cfg_path)]) == EXIT_OK
    d = out / "small" / "forward"
    assert (d / "source.csv").exists() and (d / "trajectory" / "index.csv").exists()
    assert (d / "snapshots.png").stat().st_size > 0
    assert "forward:" in capsys.readouterr().out


def test_invert_and_reuse_data(cfg_path, out):
    assert main(["invert", "--config", str(cfg_path)]) == EXIT_OK
    d = out / "small" / "invert"
    for name in ("reconstruction.csv", "truth.csv", "convergence.csv", "data.csv", "data.json", "metadata.json",
                 "reconstruction.png", "convergence.png"):
        assert (d / name).exists(), name
    meta = json.loads((d / "metadata.json").read_text())
    assert meta["result"]["iterations"] == 5 and meta["config"]["noise"]["seed"] == 3
    saved = d.parent / "data_copy.csv"
    saved.write_bytes((d / "data.csv").read_bytes())
    saved.with_suffix(".json").write_bytes((d / "data.json").read_bytes())
    assert main(["invert", "--config", str(cfg_path), "--data", str(saved), "--no-plots"]) == EXIT_OK
    assert json.loads((d / "metadata.json").read_text())["result"]["rel_error"] == meta["result"]["rel_error"]


def test_invert_seed_override(cfg_path, out):
    assert main(["invert", "--config", str(cfg_path), "--seed", "11", "--no-plots"]) == EXIT_OK
    meta = json.loads((out / "small" / "invert" / "metadata.json").read_text())
    assert meta["result"]["seed"] == 11 and meta["config"]["noise"]["seed"] == 11


def test_oracle_check_coarse_grid_fails(cfg_path, out, capsys):
    # eight cells are far too coarse for the 1e-2 oracle tolerance
    assert main(["oracle-check", "--config", str(cfg_path), "--no-plots"]) == EXIT_RUNTIME
    assert "FAIL" in capsys.readouterr().out
    assert (out / "small" / "oracle" / "oracle_report.csv").exists()


def test_invalid_config_exit_code(tmp_path, out, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({**SMALL, "surprise": 1}))
    assert main(["forward", "--config", str(p)]) == EXIT_INVALID
    assert "surprise" in capsys.readouterr().err
    assert main(["forward", "--config", str(tmp_path / "missing.json")]) == EXIT_INVALID
    assert main(["forward"]) == EXIT_INVALID
    assert main(["forward", "--preset", "nope"]) == EXIT_INVALID
    assert main(["forward", "--preset", "ex1a", "--config", str(p)]) == EXIT_INVALID


def test_bad_data_shape_is_runtime_error(cfg_path, tmp_path, out):
    p = tmp_path / "data.csv"
    p.write_text("1,2\n3,4\n")
    assert main(["invert", "--config", str(cfg_path), "--data", str(p), "--no-plots"]) == EXIT_RUNTIME


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as info:
        main(["explode"])
    assert info.value.code == 2


def test_verify_fast(out, capsys):
    assert main(["verify", "--fast", "--no-plots"]) == EXIT_OK
    text = capsys.readouterr().out
    for check in ("kernel_bounds", "oracle", "adjoint_duality", "duhamel"):
        assert check in text
    assert (out / "verify" / "verify_report.csv").exists()
