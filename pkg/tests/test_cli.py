import csv
import json

import numpy as np
import pytest

from adiabatic_switch.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, build_parser, main
from adiabatic_switch.harness import ExperimentConfig


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_schedule_command(tmp_path):
    assert main(["schedule", "--out", str(tmp_path), "--k-max", "3", "--points", "11"]) == EXIT_OK
    rows = read_csv(tmp_path / "schedule.csv")
    assert rows[0] == ["s", "f", "d1", "d2", "d3"] and len(rows) == 12
    assert float(rows[6][1]) == pytest.approx(0.5)


def test_ham_command(tmp_path):
    assert main(["ham", "--out", str(tmp_path), "--delta", "0.2", "--points", "3"]) == EXIT_OK
    rows = read_csv(tmp_path / "ham.csv")
    assert rows[0] == ["s", "E0", "E1", "gap"]
    assert float(rows[2][3]) == pytest.approx(0.4, abs=1e-12)


def test_expand_command(tmp_path):
    assert main(["expand", "--out", str(tmp_path), "--N", "1", "--delta", "0.3"]) == EXIT_OK
    payload = json.loads((tmp_path / "expand.json").read_text())
    assert payload["N"] == 1 and len(payload["nodes"]) == 65
    assert np.asarray(payload["B"]).shape == (2, 65, 2, 2, 2)
    rows = read_csv(tmp_path / "expand_norms.csv")
    assert rows[0] == ["s", "B0", "B1", "Bdot0", "Bdot1"] and len(rows) == 66


def test_evolve_command(tmp_path):
    assert main(["evolve", "--out", str(tmp_path), "--tau", "100", "--samples", "5"]) == EXIT_OK
    rows = read_csv(tmp_path / "evolve.csv")
    assert rows[0] == ["s", "dist", "norm_drift", "gap"] and len(rows) == 6


def test_sweep_command_with_config(tmp_path):
    cfg = ExperimentConfig(taus=(100.0, 200.0, 400.0), deltas=(0.3,), s_points=(0.5,))
    p = tmp_path / "cfg.json"
    p.write_text(cfg.to_json())
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(p), "--out", str(out), "--threads", "2"]) == EXIT_OK
    assert len(read_csv(out / "sweep.csv")) == 4
    assert (out / "fits.json").exists()


def test_bounds_command(tmp_path, capsys):
    rc = main(["bounds", "--out", str(tmp_path), "--g", "0.4", "--C", "2", "--R", "1.5",
               "--n", "2", "--k", "1", "--tau", "1e30"])
    assert rc == EXIT_OK
    data = json.loads((tmp_path / "bounds.json").read_text())
    assert data["plan"]["N_opt"] >= 0 and "tau_threshold" in data


def test_verify_appendix_exit_code(tmp_path):
    rc = main(["verify-appendix", "--out", str(tmp_path)])
    rows = read_csv(tmp_path / "appendix.csv")
    failed = any(r[-1] == "fail" for r in rows[1:])
    assert rc == (EXIT_FAILED if failed else EXIT_OK)


def test_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 7}')
    assert main(["sweep", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_parser_lists_subcommands():
    parser = build_parser()
    text = parser.format_help()
    for name in ("schedule", "ham", "expand", "evolve", "sweep", "bounds",
                 "verify-appendix", "runtime-check"):
        assert name in text
