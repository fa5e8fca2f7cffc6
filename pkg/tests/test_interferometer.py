# -*- coding: utf-8 -*-
"""Tests for the circulating Mach-Zehnder simulation"""
import math
import sys
from dataclasses import replace
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from src.interferometer import (
    ENTRY_MIRRORS, EXIT_MIRRORS, InterferometerLayout, MirrorAction, MirrorOp, MirrorSchedule,
    PathSegment, SegmentTag, TimingConflict, default_removal, default_schedule,
    dynamical_cancellation_report, exchange_arms, fringe_sweep, height_for_cycle,
    layout_from_geometry, port_intensities, run_pulse, sample_counts, shell_passes,
    transmission, validate_schedule,
)
from src.phase_core import LightPulse, PhaseKind, ShellSpec, Statistics, classical_phase, quantum_phase
from src.units import default_constants

K = default_constants()
LAMBDA = 5000e-10
LAB_SHELL = ShellSpec(mass=1e5, radius=3.3)
QUANTUM_SHELL = ShellSpec(mass=3e3, radius=1.5)
LIGHT = LightPulse(wavelength=LAMBDA)
LASER = LightPulse(wavelength=LAMBDA, mean_photons=1e7, statistics=Statistics.COHERENT_LASER)


def lab_layout(shell=LAB_SHELL, matched=True, cycle=16.2, **kwargs):
    height = height_for_cycle(shell, cycle, 0.1)
    return layout_from_geometry(shell, 330.0, gap=0.1, height=height, matched=matched, **kwargs)


def schedule_with(layout, winding, entry=(1, 0.5), removal=None):
    ops = []
    for arm in ("upper", "lower"):
        ops.append(MirrorOp(ENTRY_MIRRORS[arm], MirrorAction.INSERT, *entry))
        cycle, fraction = removal or default_removal(layout, arm, winding)
        ops.append(MirrorOp(EXIT_MIRRORS[arm], MirrorAction.REMOVE, cycle, fraction))
    return MirrorSchedule(winding=winding, operations=tuple(ops))


# --- layout ---

def test_layout_geometry():
    layout = lab_layout()
    assert layout.loop_length("upper") == pytest.approx(16.2, rel=1e-12)
    assert layout.per_cycle_difference() == 0.0
    assert layout.shell_arm == "upper"
    assert [s.label for s in layout.upper_arm] == [
        "m14-m11", "m11-m12", "m12-shell", "shell", "shell-m13", "m13-m14"]
    assert layout.upper_arm[3].tag is SegmentTag.THROUGH_SHELL
    assert layout.lower_arm[3].tag is SegmentTag.FREE


def test_inclined_leg_is_longer():
    layout = lab_layout(matched=False)
    width = 0.2 + 6.6
    assert layout.per_cycle_difference() == pytest.approx(width - width * math.hypot(1, 3.3 / 330.0), rel=1e-12)
    assert layout.per_cycle_difference() < 0


def test_layout_validation():
    free = PathSegment(1.0)
    shell = PathSegment(2 * LAB_SHELL.radius, SegmentTag.THROUGH_SHELL, "shell")
    with pytest.raises(ValueError, match="Exactly one arm"):
        InterferometerLayout((free, shell, free), (free, shell, free), LAB_SHELL, 330.0)
    with pytest.raises(ValueError, match="Exactly one arm"):
        InterferometerLayout((free, free, free), (free, free, free), LAB_SHELL, 330.0)
    with pytest.raises(ValueError, match="shell diameter"):
        InterferometerLayout((free, PathSegment(1.0, SegmentTag.THROUGH_SHELL), free),
                             (free, free, free), LAB_SHELL, 330.0)
    with pytest.raises(ValueError, match=">= 3 segments"):
        InterferometerLayout((free, shell), (free, free), LAB_SHELL, 330.0)
    with pytest.raises(ValueError, match="bs_split_ratio"):
        InterferometerLayout((free, shell, free), (free, free, free), LAB_SHELL, 330.0, bs_split_ratio=1.0)
    with pytest.raises(ValueError, match="Segment length"):
        PathSegment(0.0)


def test_height_for_cycle_too_short():
    with pytest.raises(ValueError, match="too short"):
        height_for_cycle(LAB_SHELL, 10.0)


# --- schedule ---

def test_default_schedule_gives_winding_passes():
    layout = lab_layout()
    schedule = default_schedule(layout, 10 ** 12)
    for arm in ("upper", "lower"):
        exit_cycle, passes = shell_passes(layout, arm, schedule.op(EXIT_MIRRORS[arm]))
        assert passes == 10 ** 12
        assert exit_cycle == 10 ** 12 + 1
    events = validate_schedule(layout, schedule, LIGHT)
    assert len(events) == 4
    assert [e.time for e in events] == sorted(e.time for e in events)
    assert {e.mirror for e in events} == {"m14", "m24", "m11", "m21"}


def test_early_removal_is_a_timing_conflict():
    layout = lab_layout()
    cycle, fraction = default_removal(layout, "upper", 5)
    schedule = schedule_with(layout, 5, removal=(cycle - 1, fraction))
    with pytest.raises(TimingConflict, match="4 shell passes") as info:
        validate_schedule(layout, schedule, LIGHT)
    assert info.value.cycle == cycle - 1
    assert info.value.arm == "upper"


def test_entry_must_close_in_first_cycle():
    layout = lab_layout()
    with pytest.raises(TimingConflict, match="first return"):
        validate_schedule(layout, schedule_with(layout, 5, entry=(2, 0.5)), LIGHT)


def test_entry_mirror_cannot_close_on_the_pulse():
    layout = lab_layout()
    with pytest.raises(TimingConflict, match="adjacent segment"):
        validate_schedule(layout, schedule_with(layout, 5, entry=(1, 0.0)), LIGHT)


def test_exit_mirror_cannot_open_on_the_pulse():
    layout = lab_layout()
    f_exit = layout.boundary_position("upper", 1) / layout.loop_length("upper")
    schedule = schedule_with(layout, 5, removal=(5, f_exit + 0.001))
    with pytest.raises(TimingConflict, match="removed while the pulse"):
        validate_schedule(layout, schedule, LIGHT)


def test_schedule_requires_all_operations():
    op = MirrorOp("m14", MirrorAction.INSERT, 1, 0.5)
    with pytest.raises(ValueError, match="exactly once"):
        MirrorSchedule(winding=1, operations=(op,))
    with pytest.raises(ValueError, match="fraction"):
        MirrorOp("m14", MirrorAction.INSERT, 1, 1.0)


def test_timing_conflict_is_a_value_error():
    assert issubclass(TimingConflict, ValueError)


# --- phases and ports ---

def test_balanced_zero_mass_is_dark():
    shell = ShellSpec(mass=0.0, radius=3.3)
    layout = lab_layout(shell)
    outcome = run_pulse(layout, default_schedule(layout, 100), LIGHT)
    assert outcome.net_phase == 0.0
    assert outcome.i_dark == 0.0
    assert outcome.i_bright == 1.0


def test_lab_classical_net_phase_is_topological():
    layout = lab_layout()
    outcome = run_pulse(layout, default_schedule(layout, 10 ** 12), LIGHT)
    expected = classical_phase(LAB_SHELL, LIGHT, winding=10 ** 12).phase
    assert outcome.topological_phase == expected
    assert outcome.net_phase == expected
    assert outcome.i_dark == pytest.approx(math.sin(expected / 2) ** 2, abs=1e-12)
    assert outcome.total_duration == pytest.approx(10 ** 12 * 16.2 / K.c, rel=1e-6)
    assert any("Long circulation" in w for w in outcome.warnings)


def test_dynamical_phases_cancel_in_matched_arms():
    layout = lab_layout()
    outcome = run_pulse(layout, default_schedule(layout, 1000), LIGHT)
    assert outcome.dynamical_phase_upper == outcome.dynamical_phase_lower
    report = dynamical_cancellation_report(layout, default_schedule(layout, 1000), LIGHT)
    assert report.residual_phase == 0.0
    assert report.dominant_segment is None


def test_unmatched_arms_report_inclined_leg():
    layout = lab_layout(matched=False)
    schedule = default_schedule(layout, 1000)
    report = dynamical_cancellation_report(layout, schedule, LIGHT)
    assert report.dominant_segment == "m24-m21"
    assert report.residual_phase == pytest.approx(2 * math.pi / LAMBDA * layout.per_cycle_difference(), rel=1e-12)
    assert report.total_residual_phase == pytest.approx(1000 * report.residual_phase, rel=1e-15)
    assert report.topological_ratio > 1


@pytest.mark.parametrize("extra", [0.0, 0.25])
def test_net_phase_balance_holds_at_large_winding(extra):
    layout = lab_layout(matched=False)
    winding = 10 ** 12
    outcome = run_pulse(layout, default_schedule(layout, winding), LIGHT, extra_phase=extra)
    k = 2 * math.pi / LAMBDA
    assert outcome.dynamical_difference == k * winding * layout.per_cycle_difference()
    assert outcome.net_phase == outcome.phase_balance()
    assert outcome.net_phase == outcome.topological_phase + outcome.dynamical_difference + extra
    # 各アームの位相は ~1e20 rad なので差は丸め誤差の範囲でしか一致しない
    naive = outcome.dynamical_phase_upper - outcome.dynamical_phase_lower
    assert abs(naive - outcome.dynamical_difference) <= 1e-12 * outcome.dynamical_phase_upper


def test_residual_ratio_shrinks_with_mirror_distance():
    height = height_for_cycle(LAB_SHELL, 16.2, 0.1)
    ratios = []
    for distance in (100 * 3.3, 1000 * 3.3):
        layout = layout_from_geometry(LAB_SHELL, distance, gap=0.1, height=height, matched=False)
        report = dynamical_cancellation_report(layout, default_schedule(layout, 1000), LIGHT)
        ratios.append(report.topological_ratio)
    assert ratios[1] < ratios[0]
    # 傾き (R/D)² に比例
    assert ratios[0] / ratios[1] == pytest.approx(100.0, rel=1e-3)


def test_one_wavelength_mismatch_is_full_cycle():
    wavelength = 2.0 ** -21
    base = layout_from_geometry(QUANTUM_SHELL, 150.0, gap=0.25, height=4.0, matched=True)
    longer = PathSegment(4.0 + wavelength, SegmentTag.FREE, "m13-m14")
    layout = replace(base, upper_arm=base.upper_arm[:-1] + (longer,))
    assert layout.per_cycle_difference() == wavelength
    pulse = LightPulse(wavelength=wavelength)
    report = dynamical_cancellation_report(layout, default_schedule(layout, 1), pulse)
    assert report.residual_phase == 2 * math.pi


def test_exchanging_arms_negates_net_phase():
    layout = lab_layout(matched=False)
    swapped = exchange_arms(layout)
    assert swapped.shell_arm == "lower"
    net = run_pulse(layout, default_schedule(layout, 1000), LIGHT).net_phase
    swapped_net = run_pulse(swapped, default_schedule(swapped, 1000), LIGHT).net_phase
    assert swapped_net == pytest.approx(-net, rel=1e-15)


def test_lossless_ports_sum_to_one():
    for phase in np.linspace(-2 * np.pi, 2 * np.pi, 100):
        bright, dark = port_intensities(float(phase))
        assert bright + dark == pytest.approx(1.0, abs=1e-12)
        assert dark == pytest.approx(math.sin(phase / 2) ** 2, abs=1e-12)


def test_unbalanced_splitter_limits_visibility():
    bright, dark = port_intensities(math.pi, 1.0, 0.3)
    assert dark == pytest.approx(4 * 0.3 * 0.7, rel=1e-15)
    assert bright == pytest.approx(1 - 0.84, abs=1e-15)


def test_mirror_loss_transmission():
    layout = lab_layout(mirror_loss=1 - 1e-3)
    outcome = run_pulse(layout, default_schedule(layout, 100), LIGHT)
    expected = math.exp(2 * 4 * 100 * math.log(1 - 1e-3))
    assert outcome.transmission == pytest.approx(expected, rel=1e-12)
    assert outcome.i_bright + outcome.i_dark == pytest.approx(expected, rel=1e-12)
    assert any("Low transmission" in w for w in outcome.warnings)


def test_transmission_underflow_warns():
    layout = lab_layout(mirror_loss=0.5)
    assert transmission(layout, 10 ** 12) == 0.0
    outcome = run_pulse(layout, default_schedule(layout, 10 ** 12), LIGHT)
    assert outcome.i_bright == 0.0
    assert any("underflow" in w for w in outcome.warnings)


def test_extra_phase_shifts_fringe():
    layout = lab_layout()
    schedule = default_schedule(layout, 1)
    base = run_pulse(layout, schedule, LIGHT)
    shifted = run_pulse(layout, schedule, LIGHT, extra_phase=math.pi)
    assert shifted.net_phase == pytest.approx(base.net_phase + math.pi, rel=1e-15)
    assert shifted.i_dark == pytest.approx(math.cos(base.net_phase / 2) ** 2, abs=1e-12)


def test_fringe_sweep():
    layout = lab_layout()
    df = fringe_sweep(layout, default_schedule(layout, 1), LIGHT, points=101)
    assert list(df.columns) == ["delta", "net_phase", "I_bright", "I_dark"]
    assert len(df) == 101
    np.testing.assert_allclose(df["I_bright"] + df["I_dark"], 1.0, atol=1e-12)
    assert df["I_dark"].max() == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError, match=">= 2 points"):
        fringe_sweep(layout, default_schedule(layout, 1), LIGHT, points=1)


# --- photon counting ---

@pytest.fixture(scope="module")
def quantum_outcome():
    layout = lab_layout(QUANTUM_SHELL, cycle=30.0)
    return run_pulse(layout, default_schedule(layout, 10 ** 6), LASER, PhaseKind.QUANTUM)


def test_quantum_run_phase(quantum_outcome):
    expected = quantum_phase(QUANTUM_SHELL, LASER, winding=10 ** 6).phase
    assert quantum_outcome.net_phase == expected
    assert quantum_outcome.expected_counts[1] == pytest.approx(1e7 * quantum_outcome.i_dark, rel=1e-15)


def test_quantum_mode_needs_photons():
    layout = lab_layout(QUANTUM_SHELL, cycle=30.0)
    with pytest.raises(ValueError, match="mean_photons"):
        run_pulse(layout, default_schedule(layout, 10), LIGHT, PhaseKind.QUANTUM)


def test_sampling_is_reproducible(quantum_outcome):
    first = sample_counts(quantum_outcome, LASER, seed=42, shots=500)
    second = sample_counts(quantum_outcome, LASER, seed=42, shots=500)
    other = sample_counts(quantum_outcome, LASER, seed=43, shots=500)
    assert np.array_equal(first[0], second[0])
    assert np.array_equal(first[1], second[1])
    assert not np.array_equal(first[0], other[0])


def test_sampled_means_converge(quantum_outcome):
    bright, dark = sample_counts(quantum_outcome, LASER, seed=2024, shots=10 ** 4)
    assert bright.shape == dark.shape == (10 ** 4,)
    expected_bright, expected_dark = quantum_outcome.expected_counts
    assert abs(dark.mean() - expected_dark) / expected_dark < 0.05
    assert abs(bright.mean() - expected_bright) / expected_bright < 0.05


def test_sampling_needs_photon_number():
    layout = lab_layout()
    outcome = run_pulse(layout, default_schedule(layout, 1), LIGHT)
    assert outcome.expected_counts is None
    with pytest.raises(ValueError, match="mean_photons"):
        sample_counts(outcome, LIGHT, seed=0)
    with pytest.raises(ValueError, match="shots"):
        sample_counts(outcome, LASER, seed=0, shots=0)


def test_lab_classical_dark_counts_per_pulse():
    layout = lab_layout()
    outcome = run_pulse(layout, default_schedule(layout, 10 ** 12), LASER)
    assert outcome.i_dark == pytest.approx(2.2e-7, rel=0.02)
    assert outcome.expected_counts[1] == pytest.approx(2.2, rel=0.02)
    _, dark = sample_counts(outcome, LASER, seed=11, shots=10 ** 4)
    assert abs(dark.mean() - 2.2) / 2.2 < 0.05
