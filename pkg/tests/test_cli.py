# -*- coding: utf-8 -*-
"""Tests for the command-line entry point (in-process)"""
import json
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

import pandas as pd
import pytest

import main as cli
from src.config import load_scenario


def run_json(capsys, *argv):
    code = cli.main([*argv, "--json-out"])
    out = capsys.readouterr().out
    return code, json.loads(out)


# --- phase ---

def test_phase_lab_classical(capsys):
    code, payload = run_json(capsys, "phase", "--config", "paper:lab-classical")
    assert code == cli.EXIT_OK
    assert payload["phase"] == pytest.approx(9.332e-4, rel=1e-3)
    assert payload["winding"] == 10 ** 12
    assert payload["regime"] == "classical"
    assert payload["interaction_energy"] < 0


def test_phase_with_overrides(capsys):
    code, payload = run_json(capsys, "phase", "--mass", "1e18 kg", "--radius", "1e4 m",
                             "--wavelength", "5000 angstrom", "--winding", "1")
    assert code == cli.EXIT_OK
    assert payload["phase"] == pytest.approx(9.332e-3, rel=1e-3)
    assert payload["weak_field"] is True


def test_phase_bare_numbers_are_si(capsys):
    _, with_units = run_json(capsys, "phase", "--mass", "2e5 kg")
    _, bare = run_json(capsys, "phase", "--mass", "2e5")
    assert bare["phase"] == with_units["phase"]


def test_phase_quantum_ratio(capsys):
    code, payload = run_json(capsys, "phase", "--config", "paper:lab-quantum")
    assert code == cli.EXIT_OK
    assert payload["phase"] == pytest.approx(5.599e-4, rel=1e-3)
    assert payload["quantum_to_classical_ratio"] == pytest.approx(2e7, rel=1e-12)


def test_phase_console_output(capsys):
    assert cli.main(["phase"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "=" * 60 in out
    assert "[Phase]" in out


# --- design ---

def test_design_named_scenario(capsys):
    code, payload = run_json(capsys, "design", "paper:lab-quantum")
    assert code == cli.EXIT_OK
    (row,) = payload["designs"]
    assert row["name"] == "lab-quantum"
    assert row["phase"] == pytest.approx(5.599e-4, rel=1e-3)
    assert row["duration"] == pytest.approx(0.1, rel=0.01)
    assert row["feasible"] is False


def test_design_all_scenarios(capsys):
    code, payload = run_json(capsys, "design")
    assert code == cli.EXIT_OK
    assert [r["name"] for r in payload["designs"]] == ["astrophysical", "lab-classical", "lab-quantum"]


def test_design_sweep_csv(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    code = cli.main(["design", "paper:lab-classical", "--sweep", "winding=1e6:1e12:7:log",
                     "--csv", str(path), "--json-out"])
    assert code == cli.EXIT_OK
    df = pd.read_csv(path)
    assert len(df) == 7
    assert df["phase"].is_monotonic_increasing
    assert len(json.loads(capsys.readouterr().out)["sweep"]) == 7


def test_design_target_phase(capsys):
    code, payload = run_json(capsys, "design", "paper:lab-classical", "--target-phase", "9.332e-4 rad")
    assert code == cli.EXIT_OK
    assert payload["designs"][0]["winding"] == pytest.approx(10 ** 12, rel=1e-3)


def test_design_emit_reloads(tmp_path, capsys):
    path = tmp_path / "emitted.yaml"
    assert cli.main(["design", "paper:lab-quantum", "--emit", str(path)]) == cli.EXIT_OK
    assert "[INFO] Scenario written" in capsys.readouterr().out
    assert load_scenario(path).scenario.winding == 10 ** 6


# --- simulate ---

def test_simulate_is_deterministic(tmp_path, capsys):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (first, second):
        code = cli.main(["simulate", "paper:lab-quantum", "--seed", "42", "--shots", "200",
                         "--csv", str(path), "--json-out"])
        assert code == cli.EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    df = pd.read_csv(first)
    assert list(df.columns) == ["shot", "counts_bright", "counts_dark"]
    assert len(df) == 200


def test_simulate_zero_mass_is_dark(capsys):
    code, payload = run_json(capsys, "simulate", "paper:lab-classical", "--matched", "--mass", "0")
    assert code == cli.EXIT_OK
    assert payload["net_phase"] == 0.0
    assert payload["I_dark"] == 0.0
    assert payload["dominant_segment"] is None


def test_simulate_fringe_sweep(tmp_path, capsys):
    path = tmp_path / "fringe.csv"
    code = cli.main(["simulate", "paper:lab-quantum", "--fringe-sweep", "11", "--csv", str(path), "--json-out"])
    assert code == cli.EXIT_OK
    df = pd.read_csv(path)
    assert list(df.columns) == ["delta", "net_phase", "I_bright", "I_dark"]
    assert len(df) == 11


def test_simulate_timing_conflict(tmp_path, capsys):
    path = tmp_path / "early.yaml"
    path.write_text(
        "name: early\n"
        "shell: {mass: 1e5 kg, radius: 3.3 m}\n"
        "pulse: {wavelength: 5000 angstrom}\n"
        "design: {mode: classical, winding: 10, cycle_path_length: 16.2 m}\n"
        "layout: {m1_bs1_distance: 330 m, matched: true}\n"
        "schedule:\n  exit_remove:\n    upper: {cycle: 3, fraction: 0.9}\n",
        encoding="utf-8",
    )
    assert cli.main(["simulate", str(path)]) == cli.EXIT_TIMING_CONFLICT
    assert "Timing conflict" in capsys.readouterr().err


# --- kdp ---

def test_kdp_verify(tmp_path, capsys):
    matrices = tmp_path / "matrices.csv"
    code, payload = run_json(capsys, "kdp", "verify", "--dump-matrices", str(matrices))
    assert code == cli.EXIT_OK
    assert payload["passed"] is True
    assert payload["failed"] == []
    assert payload["checks"]["algebra_residual"] == 0.0
    assert matrices.exists()


def test_kdp_verify_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "_verify_checks", lambda: {"algebra_residual": 1e-3})
    assert cli.main(["kdp", "verify"]) == cli.EXIT_VERIFY_FAILED
    assert "[FAIL]" in capsys.readouterr().out


def test_kdp_evolve_with_potential_and_gauge_kick(tmp_path, capsys):
    path = tmp_path / "evolve.csv"
    code, summary = run_json(capsys, "kdp", "evolve", "--grid", "64", "--steps", "20", "--mode-number", "2",
                             "--potential=-1e-27 J", "--gauge-kick", "--csv", str(path))
    assert code == cli.EXIT_OK
    assert summary["grid"] == [64]
    assert summary["final_expected_phase"] < 0
    assert summary["max_phase_error"] < 1e-10
    assert summary["total_s0_drift"] < 1e-10
    assert summary["gauge_kick"] is True
    assert len(pd.read_csv(path)) == 21


def test_kdp_evolve_from_scenario(capsys):
    code, summary = run_json(capsys, "kdp", "evolve", "--config", "paper:lab-quantum", "--steps", "5")
    assert code == cli.EXIT_OK
    assert summary["grid"] == [256]
    assert summary["potential"] == -1e-27
    assert summary["integrator"] == "spectral-exact"


# --- errors ---

@pytest.mark.parametrize("argv", [
    ["phase", "--mass", "3 parsecs"],
    ["design", "paper:lunar"],
    ["design", "paper:lab-classical", "--sweep", "charge=1:2:3"],
    ["design", "paper:lab-classical", "--target-phase", "0 rad"],
    ["simulate", "paper:lab-quantum", "--shots", "0"],
    ["kdp", "evolve", "--grid", "64", "--steps", "2", "--potential=1e-23 J"],
])
def test_validation_errors_exit_1(argv, capsys):
    assert cli.main(argv) == cli.EXIT_VALIDATION
    assert "[ERROR]" in capsys.readouterr().err
