"""
gravphase - Gravity-induced topological phase of light

Usage:
    python main.py phase --config paper:lab-classical
    python main.py phase --mass "1e18 kg" --radius "1e4 m" --wavelength "5000 angstrom"
    python main.py design paper:lab-quantum
    python main.py design paper:lab-classical --sweep winding=1e3:1e9:7:log --csv sweep.csv
    python main.py simulate paper:lab-quantum --seed 42 --shots 10000 --csv counts.csv
    python main.py kdp verify
    python main.py kdp evolve --potential "1e-25 J" --steps 1000 --csv evolve.csv
"""

import argparse
import logging
import sys
import traceback
from dataclasses import replace
from typing import List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from src import report
from src.config import (
    ConfigError, EvolutionSpec, LayoutSpec, ScenarioFile, dump_scenario, resolve_scenario,
)
from src.designer import (
    InfeasibleDesign, evaluate_scenario, paper_scenarios, parse_sweep, required_winding, sweep,
)
from src.interferometer import (
    TimingConflict, dynamical_cancellation_report, fringe_sweep, run_pulse, sample_counts,
)
from src.kdp_algebra import dump_matrices, verify_matrices
from src.kdp_field import (
    Coupling, EvolutionConfig, Integrator, constraint_residual, evolve, init_plane_wave,
    measure_phase, random_gauge_field, step, write_snapshot,
)
from src.phase_core import (
    LightPulse, PhaseKind, ShellSpec, classical_phase, effective_permittivity, index_excess,
    interaction_energy, photon_mass_parameter, quantum_phase, transit_time,
)
from src.units import ScalarKind, default_constants, parse_quantity

# --- Config ---
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_VERIFY_FAILED = 2
EXIT_TIMING_CONFLICT = 3

DEFAULT_SCENARIO = "paper:lab-classical"
DEFAULT_COURANT = 0.1
VERIFY_TOLERANCE = 1e-10

logger = logging.getLogger("gravphase")


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------

def cli_quantity(text: str, kind: ScalarKind) -> float:
    """コマンドライン値: 単位付き、または単位なしの数値（SI とみなす）"""
    try:
        return float(text)
    except ValueError:
        return float(parse_quantity(text, kind))


def cli_signed_energy(text: str) -> float:
    text = text.strip()
    sign = -1.0 if text.startswith("-") else 1.0
    return sign * cli_quantity(text.lstrip("+-"), ScalarKind.ENERGY)


def add_physics_overrides(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("scenario overrides")
    group.add_argument("--mass", help="Shell mass (e.g. '1e5 kg'; bare numbers are SI)")
    group.add_argument("--radius", help="Shell radius (e.g. '3.3 m')")
    group.add_argument("--wavelength", help="Wavelength (e.g. '5000 angstrom')")
    group.add_argument("--energy", help="Pulse energy (e.g. '1 J')")
    group.add_argument("--mean-photons", type=float, help="Mean photon number N")
    group.add_argument("--mode", choices=[k.value for k in PhaseKind], help="Phase formula")
    group.add_argument("--winding", type=float, help="Winding number n_w (1e12 accepted)")
    group.add_argument("--eps0", type=float, help="Relative vacuum permittivity (default 1)")


def apply_overrides(sf: ScenarioFile, args) -> ScenarioFile:
    """CLI 引数でシナリオを上書き（質量・半径を変えたら厚さ・密度は外す）"""
    s = sf.scenario
    shell, pulse = s.shell, s.pulse
    if args.mass is not None or args.radius is not None:
        shell = ShellSpec(
            mass=cli_quantity(args.mass, ScalarKind.MASS) if args.mass is not None else shell.mass,
            radius=cli_quantity(args.radius, ScalarKind.LENGTH) if args.radius is not None else shell.radius,
        )
    if args.wavelength is not None or args.energy is not None or args.mean_photons is not None:
        # 上書きしなかった方の量は、矛盾しうるなら落とす
        energy = pulse.energy if args.mean_photons is None and args.wavelength is None else None
        if args.energy is not None:
            energy = cli_quantity(args.energy, ScalarKind.ENERGY)
        mean_photons = pulse.mean_photons if args.energy is None else None
        if args.mean_photons is not None:
            mean_photons = args.mean_photons
        pulse = LightPulse(
            wavelength=cli_quantity(args.wavelength, ScalarKind.LENGTH)
            if args.wavelength is not None else pulse.wavelength,
            energy=energy,
            mean_photons=mean_photons,
            statistics=pulse.statistics,
            duration=pulse.duration,
        )
    changes = {"shell": shell, "pulse": pulse}
    if args.mode is not None:
        changes["mode"] = PhaseKind(args.mode)
    if args.winding is not None:
        changes["winding"] = int(args.winding)
    if args.eps0 is not None:
        changes["eps0"] = args.eps0
    if shell.radius * 2 > s.cycle_path_length:
        changes["cycle_path_length"] = 8 * shell.radius
    return replace(sf, scenario=replace(s, **changes))


def load(args, ref: Optional[str] = None) -> ScenarioFile:
    target = ref or args.config or DEFAULT_SCENARIO
    sf = resolve_scenario(target)
    if hasattr(args, "mass"):
        sf = apply_overrides(sf, args)
    return sf


def emit(args, payload: dict, df: Optional[pd.DataFrame] = None):
    """--json-out なら JSON、--csv があれば CSV も書く"""
    if args.json_out:
        report.print_json(payload)
    if args.csv:
        frame = df if df is not None else pd.DataFrame([payload])
        report.write_csv(frame, args.csv)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_phase(args) -> int:
    sf = load(args)
    s, k = sf.scenario, sf.constants
    if s.mode is PhaseKind.QUANTUM:
        result = quantum_phase(s.shell, s.pulse, winding=s.winding, constants=k)
    else:
        result = classical_phase(s.shell, s.pulse, eps0=s.eps0, winding=s.winding,
                                 exact=args.exact, constants=k)

    pulse_energy = s.pulse.total_energy(k)
    energy_for_hint = pulse_energy if pulse_energy is not None else s.pulse.photon_energy(k)
    payload = {
        "scenario": s.name,
        "mode": s.mode.value,
        "phase": result.phase,
        "per_pass": result.per_pass,
        "winding": result.winding,
        "eps_g_over_eps0": effective_permittivity(s.shell, s.eps0, k) / s.eps0,
        "index_excess": index_excess(s.shell, s.eps0, True, k),
        "interaction_energy": interaction_energy(s.shell, energy_for_hint, k),
        "interaction_energy_basis": "pulse" if pulse_energy is not None else "photon",
        "transit_time": transit_time(s.shell, k),
        "mean_photons": s.pulse.photon_count(k),
        "pulse_energy": pulse_energy,
        "pulse_duration": s.pulse.duration,
        "regime": s.pulse.regime,
        "photon_mass_parameter": photon_mass_parameter(s.pulse.angular_frequency(k), k),
        "weak_field": s.shell.is_weak_field(k),
    }
    if s.pulse.mean_photons is not None:
        classical = classical_phase(s.shell, s.pulse, eps0=1.0, constants=k).per_pass
        quantum = quantum_phase(s.shell, s.pulse, constants=k).per_pass
        payload["quantum_to_classical_ratio"] = quantum / classical if classical > 0 else None

    if not args.json_out:
        report.banner(f"Gravity-induced phase: {s.name}")
        report.print_section("Phase", {k_: payload[k_] for k_ in ("mode", "phase", "per_pass", "winding")})
        report.print_section("Shell", {
            "eps_g/eps0": payload["eps_g_over_eps0"],
            "n - sqrt(eps0)": payload["index_excess"],
            "H_int [J]": payload["interaction_energy"],
            "transit [s]": payload["transit_time"],
            "weak field": payload["weak_field"],
        })
        report.print_section("Pulse", {
            "mean photons": payload["mean_photons"],
            "energy [J]": payload["pulse_energy"],
            "duration [s]": payload["pulse_duration"],
            "regime": payload["regime"],
            "m [kg]": payload["photon_mass_parameter"],
        })
    emit(args, payload)
    return EXIT_OK


def _design_row(scenario, result) -> dict:
    return {
        "name": scenario.name,
        "mode": scenario.mode.value,
        "winding": scenario.winding,
        "phase": result.phase,
        "per_pass": result.per_pass,
        "duration": result.duration,
        "loss_floor": result.required_loss_floor,
        "loss_margin": result.loss_margin,
        "feasible": result.feasible,
        "reasons": "; ".join(result.reasons),
    }


def cmd_design(args) -> int:
    ref = args.scenario or args.config
    if ref is None and args.sweep is None and args.emit is None and args.target_phase is None:
        pairs = paper_scenarios()
    else:
        sf = load(args, ref)
        if args.emit:
            dump_scenario(sf, args.emit)
            if not args.json_out:
                print(f"[INFO] Scenario written: {args.emit}")
        if args.sweep:
            param, values = parse_sweep(args.sweep)
            df = sweep(sf.scenario, param, values, sf.constants, progress=not args.json_out)
            if not args.json_out:
                report.banner(f"Sweep {param}: {sf.name}")
                print(df.to_string(index=False))
            emit(args, {"scenario": sf.name, "sweep": df.to_dict(orient="records")}, df)
            return EXIT_OK
        if args.target_phase is not None:
            target = cli_quantity(args.target_phase, ScalarKind.PHASE)
            s = sf.scenario
            n = required_winding(target, s.shell, s.pulse, s.mode, s.eps0, sf.constants)
            sf = replace(sf, scenario=replace(s, winding=n))
            if not args.json_out:
                print(f"[INFO] Required winding for {target:.6g} rad: {n}")
        pairs = [(sf.scenario, evaluate_scenario(sf.scenario, sf.constants))]

    rows = [_design_row(s, r) for s, r in pairs]
    df = pd.DataFrame(rows)
    if not args.json_out:
        report.banner("Experiment design")
        for s, r in pairs:
            report.print_section(s.name, {
                "mode": s.mode.value,
                "winding": s.winding,
                "phase [rad]": r.phase,
                "duration [s]": r.duration,
                "duration [h]": r.duration / 3600,
                "loss floor r": r.required_loss_floor,
                "1 - r": r.loss_margin,
                "feasible": r.feasible,
            })
            for reason in r.reasons:
                print(f"    - {reason}")
    emit(args, {"designs": rows}, df)
    return EXIT_OK


def cmd_simulate(args) -> int:
    sf = load(args, args.scenario)
    if args.matched:
        base = sf.layout or LayoutSpec(m1_bs1_distance=100 * sf.scenario.shell.radius)
        sf = replace(sf, layout=replace(base, matched=True))
    s, k = sf.scenario, sf.constants
    layout = sf.build_layout()
    schedule = sf.build_schedule(layout)

    if args.fringe_sweep:
        df = fringe_sweep(layout, schedule, s.pulse, s.mode, points=args.fringe_sweep, eps0=s.eps0, constants=k)
        if not args.json_out:
            report.banner(f"Fringe sweep: {s.name}")
            print(df.to_string(index=False, max_rows=20))
        emit(args, {"scenario": s.name, "fringe": df.to_dict(orient="records")}, df)
        return EXIT_OK

    outcome = run_pulse(layout, schedule, s.pulse, s.mode, s.eps0, constants=k)
    cancel = dynamical_cancellation_report(layout, schedule, s.pulse, s.mode, s.eps0, k)
    payload = {
        "scenario": s.name,
        "winding": schedule.winding,
        "topological_phase": outcome.topological_phase,
        "dynamical_phase_upper": outcome.dynamical_phase_upper,
        "dynamical_phase_lower": outcome.dynamical_phase_lower,
        "dynamical_difference": outcome.dynamical_difference,
        "net_phase": outcome.net_phase,
        "I_bright": outcome.i_bright,
        "I_dark": outcome.i_dark,
        "visibility": outcome.visibility,
        "transmission": outcome.transmission,
        "total_duration": outcome.total_duration,
        "residual_dynamical_phase": cancel.residual_phase,
        "dominant_segment": cancel.dominant_segment,
        "events": len(outcome.events),
        "warnings": list(outcome.warnings),
    }

    df = None
    if outcome.expected_counts is not None:
        bright, dark = sample_counts(outcome, s.pulse, args.seed, args.shots, k)
        payload.update({
            "expected_bright": outcome.expected_counts[0],
            "expected_dark": outcome.expected_counts[1],
            "mean_bright": float(np.mean(bright)),
            "mean_dark": float(np.mean(dark)),
            "seed": args.seed,
            "shots": args.shots,
        })
        df = pd.DataFrame({"shot": np.arange(args.shots), "counts_bright": bright, "counts_dark": dark})
    elif not args.json_out:
        print("[INFO] Pulse has no photon number: skipping count sampling")

    if not args.json_out:
        report.banner(f"Circulating interferometer: {s.name}")
        report.print_section("Phases", {key: payload[key] for key in (
            "topological_phase", "net_phase", "residual_dynamical_phase", "dominant_segment")})
        report.print_section("Ports", {key: payload[key] for key in (
            "I_bright", "I_dark", "visibility", "transmission", "total_duration")})
        if df is not None:
            report.print_section("Counts", {key: payload[key] for key in (
                "expected_dark", "mean_dark", "expected_bright", "mean_bright", "shots")})
    emit(args, payload, df if df is not None else pd.DataFrame([
        {key: value for key, value in payload.items() if key != "warnings"}
    ]))
    return EXIT_OK


def _verify_checks() -> dict:
    kc = default_constants()
    checks = dict(verify_matrices())
    # 平面波の制約とディスパージョン
    n, spacing = 64, 1.0
    kvec = (2 * np.pi * 3 / (n * spacing), 0.0, 0.0)
    state = init_plane_wave(kvec, (0.0, 0.0, 1.0), n, spacing, 1.0, constants=kc)
    checks["plane_wave_constraint"] = constraint_residual(state)
    dt = DEFAULT_COURANT * spacing / kc.c
    nxt = step(state, EvolutionConfig(dt=dt), kc)
    omega = measure_phase(state, nxt) / dt
    expected = kc.c * kvec[0]
    checks["dispersion_relative_error"] = abs(omega - expected) / expected
    return checks


def cmd_kdp_verify(args) -> int:
    if args.dump_matrices:
        dump_matrices(args.dump_matrices)
    checks = _verify_checks()
    failed = [name for name, value in checks.items() if not value <= VERIFY_TOLERANCE]
    payload = {"checks": checks, "passed": not failed, "failed": failed}
    if not args.json_out:
        report.banner("KDP verification")
        report.print_section("Residuals", checks)
        print(f"\n[{'OK' if not failed else 'FAIL'}] {len(checks) - len(failed)}/{len(checks)} checks passed")
    emit(args, payload, pd.DataFrame([{"check": k_, "value": v} for k_, v in checks.items()]))
    return EXIT_OK if not failed else EXIT_VERIFY_FAILED


def cmd_kdp_evolve(args) -> int:
    spec = EvolutionSpec()
    constants = None
    if args.config:
        sf = resolve_scenario(args.config)
        spec = sf.evolution or spec
        constants = sf.constants
    overrides = {}
    for key in ("grid", "dimensions", "steps", "mode_number"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.spacing is not None:
        overrides["spacing"] = cli_quantity(args.spacing, ScalarKind.LENGTH)
    if args.dt is not None:
        overrides["dt"] = cli_quantity(args.dt, ScalarKind.TIME)
    if args.potential is not None:
        overrides["potential"] = cli_signed_energy(args.potential)
    if args.integrator is not None:
        overrides["integrator"] = Integrator(args.integrator)
    if args.coupling is not None:
        overrides["coupling"] = Coupling(args.coupling)
    if args.mass_param is not None:
        overrides["mass_param"] = args.mass_param
    spec = replace(spec, **overrides)

    kc = constants or default_constants()
    shape = spec.grid if spec.dimensions == 1 else (spec.grid,) * 3
    kvec = (2 * np.pi * spec.mode_number / (spec.grid * spec.spacing), 0.0, 0.0)
    dt = spec.dt if spec.dt is not None else DEFAULT_COURANT * spec.spacing / kc.c
    config = EvolutionConfig(dt=dt, integrator=spec.integrator, potential=spec.potential,
                             steps=spec.steps, coupling=spec.coupling)
    state = init_plane_wave(kvec, spec.polarization, shape, spec.spacing, spec.mass_param, constants=kc)
    kick = random_gauge_field(state, args.seed) if args.gauge_kick else None

    final, df = evolve(state, config, kc, progress=not args.json_out, gauge_kick=kick)
    phase_error = float(np.max(np.abs(df["measured_phase"] - df["expected_phase"])))
    s0 = df["total_s0"].to_numpy()
    drift = float(np.max(np.abs(s0 - s0[0])) / s0[0]) if s0[0] > 0 else 0.0
    summary = {
        "grid": list(state.shape),
        "steps": config.steps,
        "dt": dt,
        "potential": config.potential,
        "integrator": config.integrator.value,
        "coupling": config.coupling.value,
        "gauge_kick": bool(args.gauge_kick),
        "final_time": final.time,
        "final_measured_phase": float(df["measured_phase"].iloc[-1]),
        "final_expected_phase": float(df["expected_phase"].iloc[-1]),
        "max_phase_error": phase_error,
        "total_s0_drift": drift,
        "max_constraint_residual": float(df["constraint_residual"].max()),
    }
    if args.snapshot:
        write_snapshot(final, args.snapshot)
    if not args.json_out:
        report.banner("KDP lattice evolution")
        report.print_section("Summary", summary)
    if args.json_out:
        report.print_json(summary)
    if args.csv:
        report.write_csv(df, args.csv)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Scenario YAML file or paper:<name>")
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default: 0)")
    common.add_argument("--csv", help="Write results as CSV to this path")
    common.add_argument("--json-out", action="store_true", help="Print machine-readable JSON")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--quiet", action="store_true", help="Warnings only")

    parser = argparse.ArgumentParser(description="Gravity-induced topological phase of light")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase", parents=[common], help="Closed-form phase shift")
    add_physics_overrides(p)
    p.add_argument("--exact", action="store_true", help="Use the exact refractive index")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("design", parents=[common], help="Experiment design / sweeps")
    p.add_argument("scenario", nargs="?", help="paper:<name> or YAML file (default: all paper scenarios)")
    add_physics_overrides(p)
    p.add_argument("--sweep", help="param=a:b:n[:log]")
    p.add_argument("--emit", help="Write the resolved scenario as YAML")
    p.add_argument("--target-phase", help="Solve for the winding number reaching this phase")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", parents=[common], help="Circulating Mach-Zehnder simulation")
    p.add_argument("scenario", nargs="?", help="paper:<name> or YAML file")
    add_physics_overrides(p)
    p.add_argument("--shots", type=int, default=1, help="Number of sampled pulses")
    p.add_argument("--fringe-sweep", type=int, default=0, help="Emit N-point fringe sweep")
    p.add_argument("--matched", action="store_true", help="Force exactly matched arm lengths")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("kdp", help="KDP formalism checks and lattice evolution")
    kdp_sub = p.add_subparsers(dest="kdp_command", required=True)
    v = kdp_sub.add_parser("verify", parents=[common], help="Algebra / constraint checks")
    v.add_argument("--dump-matrices", help="Write the matrix set as CSV")
    v.set_defaults(func=cmd_kdp_verify)
    e = kdp_sub.add_parser("evolve", parents=[common], help="Lattice evolution time series")
    e.add_argument("--grid", type=int)
    e.add_argument("--dimensions", type=int, choices=[1, 3])
    e.add_argument("--steps", type=int)
    e.add_argument("--mode-number", type=int)
    e.add_argument("--spacing", help="Grid spacing (e.g. '1 m')")
    e.add_argument("--dt", help="Time step (e.g. '1 ns')")
    e.add_argument("--potential", help="Constant H_int (e.g. '1e-25 J', may be negative)")
    e.add_argument("--integrator", choices=[i.value for i in Integrator])
    e.add_argument("--coupling", choices=[c.value for c in Coupling])
    e.add_argument("--mass-param", type=float)
    e.add_argument("--gauge-kick", action="store_true", help="Apply a random gauge shift at t=0")
    e.add_argument("--snapshot", help="Write the final state as CSV")
    e.set_defaults(func=cmd_kdp_evolve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='[%(levelname)s] %(message)s')
    logging.getLogger().setLevel(level)

    try:
        return args.func(args)
    except TimingConflict as e:
        print(f"[ERROR] Timing conflict: {e}", file=sys.stderr)
        return EXIT_TIMING_CONFLICT
    except (ConfigError, InfeasibleDesign, ValueError, KeyError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print("\n\n[INFO] Interrupted by user.")
        return EXIT_OK
    except Exception as e:
        print(f"\n[FATAL] {e}")
        traceback.print_exc()
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
