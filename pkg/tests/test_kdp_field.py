# -*- coding: utf-8 -*-
"""Tests for the KDP lattice evolution"""
import math
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pandas as pd
import pytest

from src.kdp_algebra import pack_fields
from src.kdp_field import (
    Coupling, Derivative, EvolutionConfig, Integrator, LatticeState, apply_gauge,
    constraint_residual, current, dalembert_residual, evolve, init_plane_wave,
    mass_independence_check, maxwell_residual, measure_phase, random_gauge_field, real_fields,
    step, write_snapshot,
)
from src.units import default_constants

K = default_constants()
N = 256
SPACING = 1.0
MODE = 4
KVEC = (2 * math.pi * MODE / (N * SPACING), 0.0, 0.0)
POL = (0.0, 1.0, 0.0)
DT = 0.1 * SPACING / K.c


def plane_wave(n=N, spacing=SPACING, mode=MODE, m=1.0):
    k = (2 * math.pi * mode / (n * spacing), 0.0, 0.0)
    return init_plane_wave(k, POL, n, spacing, m)


@pytest.fixture(scope="module")
def free_run():
    state = plane_wave()
    return evolve(state, EvolutionConfig(dt=DT, steps=1000))


# --- initial state ---

def test_plane_wave_satisfies_constraint():
    state = plane_wave()
    assert constraint_residual(state) < 1e-12
    E, H, A, A0 = state.fields()
    assert np.allclose(E[1], np.exp(1j * KVEC[0] * np.arange(N)))
    assert np.allclose(H[2], E[1])
    assert np.all(A0 == 0)


@pytest.mark.parametrize("k, pol, match", [
    ((0.0, 0.0, 0.0), POL, "k != 0"),
    ((0.123, 0.0, 0.0), POL, "commensurate"),
    ((KVEC[0], 0.1, 0.0), POL, "only supports k along x"),
    (KVEC, (1.0, 0.0, 0.0), "transverse"),
])
def test_plane_wave_rejects_bad_input(k, pol, match):
    with pytest.raises(ValueError, match=match):
        init_plane_wave(k, pol, N, SPACING, 1.0)


def test_lattice_state_validation():
    with pytest.raises(ValueError, match="sites"):
        LatticeState(psi=np.zeros((10, 4)), spacing=1.0, time=0.0, mass_param=1.0)
    with pytest.raises(ValueError, match="shape"):
        LatticeState(psi=np.zeros((9, 16)), spacing=1.0, time=0.0, mass_param=1.0)
    with pytest.raises(ValueError, match="mass_param"):
        LatticeState(psi=np.zeros((10, 16)), spacing=1.0, time=0.0, mass_param=0.0)


def test_evolution_config_validation():
    with pytest.raises(ValueError, match="dt"):
        EvolutionConfig(dt=0.0)
    with pytest.raises(ValueError, match="steps"):
        EvolutionConfig(dt=DT, steps=-1)
    rk4 = EvolutionConfig(dt=SPACING / K.c, integrator=Integrator.RK4_FINITE_DIFFERENCE)
    with pytest.raises(ValueError, match="CFL"):
        step(plane_wave(), rk4)


# --- Maxwell equivalence ---

def test_dispersion_relation():
    state = plane_wave()
    after = step(state, EvolutionConfig(dt=DT))
    omega = measure_phase(state, after) / DT
    expected = K.c * KVEC[0]
    assert abs(omega - expected) / expected < 1e-10
    assert after.time == DT


def test_oblique_dispersion_3d():
    n = 16
    k = (2 * math.pi / n, 2 * math.pi / n, 0.0)
    state = init_plane_wave(k, (0.0, 0.0, 1.0), (n, n, n), SPACING, 1.0)
    assert state.shape == (n, n, n)
    assert constraint_residual(state) < 1e-12
    dt = 0.1 * SPACING / K.c
    after = state
    for _ in range(5):
        after = step(after, EvolutionConfig(dt=dt))
    omega = measure_phase(state, after) / (5 * dt)
    expected = K.c * math.hypot(k[0], k[1])
    assert abs(omega - expected) / expected < 1e-10
    assert constraint_residual(after) < 1e-10


def test_constraint_and_energy_preserved_over_1000_steps(free_run):
    final, df = free_run
    assert len(df) == 1001
    assert df["constraint_residual"].max() < 1e-10
    s0 = df["total_s0"].to_numpy()
    assert np.max(np.abs(s0 - s0[0])) / s0[0] < 1e-10
    assert final.time == pytest.approx(1000 * DT, rel=1e-12)


def test_evolve_columns(free_run):
    _, df = free_run
    assert list(df.columns) == [
        "step", "time", "total_s0", "constraint_residual", "curl_E_residual",
        "curl_H_residual", "measured_phase", "expected_phase",
    ]
    assert (df["expected_phase"] == 0).all()


def _maxwell_residuals(dt, initial=None):
    s0 = initial if initial is not None else plane_wave()
    s1 = step(s0, EvolutionConfig(dt=dt))
    s2 = step(s1, EvolutionConfig(dt=dt))
    curl_e, curl_h = maxwell_residual(s0, s1, dt)
    return curl_e, curl_h, dalembert_residual([s0, s1, s2], dt)


def test_maxwell_residuals_converge_second_order():
    coarse = _maxwell_residuals(0.5 * SPACING / K.c)
    fine = _maxwell_residuals(0.25 * SPACING / K.c)
    for a, b in zip(coarse, fine):
        slope = math.log2(a / b)
        assert 1.8 <= slope <= 2.2


def test_finite_difference_converges_second_order_in_space():
    length, mode, steps = 64.0, 2, 100
    dt = 0.025 / K.c
    config = EvolutionConfig(dt=dt, integrator=Integrator.RK4_FINITE_DIFFERENCE)

    def error(n):
        spacing = length / n
        state = plane_wave(n, spacing, mode)
        initial = state
        for _ in range(steps):
            state = step(state, config)
        k = 2 * math.pi * mode / length
        x = np.arange(n) * spacing
        exact = np.exp(1j * (k * x - K.c * k * state.time))
        assert constraint_residual(initial) < 1e-12
        return float(np.max(np.abs(state.fields()[0][1] - exact)))

    slope = math.log2(error(64) / error(128))
    assert 1.8 <= slope <= 2.2


def test_superposition_dalembert_stays_second_order():
    first, second = plane_wave(mode=4), plane_wave(mode=8)
    mixed = LatticeState(psi=first.psi + second.psi, spacing=SPACING, time=0.0, mass_param=1.0)
    assert constraint_residual(mixed) < 1e-12
    dt = 0.5 * SPACING / K.c
    single = [_maxwell_residuals(dt, s)[2] for s in (first, second)]
    coarse = _maxwell_residuals(dt, mixed)[2]
    fine = _maxwell_residuals(dt / 2, mixed)[2]
    # □ は線形: 重ね合わせの残差は各波の残差の和以下、大きい方の残差以上
    assert max(single) * (1 - 1e-9) <= coarse <= sum(single) * (1 + 1e-9)
    assert 1.8 <= math.log2(coarse / fine) <= 2.2


def test_static_uniform_field_has_no_maxwell_residual():
    E = np.zeros((3, N), dtype=complex)
    E[1] = 1.0
    zeros = np.zeros((3, N), dtype=complex)
    state = LatticeState(psi=pack_fields(E, zeros, zeros, np.zeros(N), 1.0),
                         spacing=SPACING, time=0.0, mass_param=1.0)
    assert constraint_residual(state) < 1e-12
    after = step(state, EvolutionConfig(dt=DT))
    curl_e, curl_h = maxwell_residual(state, after, DT)
    assert curl_e < 1e-12
    assert curl_h < 1e-12
    # ∂H/∂t = 0
    assert np.max(np.abs(after.fields()[1])) < 1e-14


def _with_fields(state, E, H, A, A0):
    return LatticeState(psi=pack_fields(E, H, A, A0, state.mass_param), spacing=state.spacing,
                        time=state.time, mass_param=state.mass_param)


def test_constraint_residual_detects_divergence_spike():
    state = plane_wave()
    E, H, A, A0 = state.fields()
    base = constraint_residual(state, Derivative.FINITE_DIFFERENCE)

    def spiked(amount):
        E_spiked = E.copy()
        E_spiked[0, 10] += amount
        return constraint_residual(_with_fields(state, E_spiked, H, A, A0), Derivative.FINITE_DIFFERENCE)

    # 中心差分の div E は隣のサイトで amount/(2·spacing)
    assert base < 1e-2
    assert spiked(2.0) == pytest.approx(1.0, rel=1e-9)
    assert spiked(4.0) == pytest.approx(2.0, rel=1e-9)


def test_constraint_residual_detects_magnetic_spike():
    state = plane_wave()
    E, H, A, A0 = state.fields()
    H_spiked = H.copy()
    H_spiked[2, 10] += 0.5
    assert constraint_residual(state) < 1e-12
    assert constraint_residual(_with_fields(state, E, H_spiked, A, A0)) == pytest.approx(0.5, rel=1e-9)


def test_dalembert_needs_three_states():
    state = plane_wave()
    with pytest.raises(ValueError, match="3 consecutive"):
        dalembert_residual([state, state], DT)


def test_grid_mismatch_rejected():
    with pytest.raises(ValueError, match="Lattice mismatch"):
        maxwell_residual(plane_wave(), plane_wave(n=128), DT)


# --- constant potential ---

def test_constant_potential_phase_factorizes():
    potential = 0.01 * K.hbar / DT
    state = plane_wave()
    _, df = evolve(state, EvolutionConfig(dt=DT, steps=1000, potential=potential))
    error = np.max(np.abs(df["measured_phase"] - df["expected_phase"]))
    assert error < 1e-10
    assert df["expected_phase"].iloc[-1] == pytest.approx(10.0, rel=1e-12)


def test_negative_potential_gives_negative_phase():
    potential = -0.01 * K.hbar / DT
    _, df = evolve(plane_wave(), EvolutionConfig(dt=DT, steps=50, potential=potential))
    assert df["measured_phase"].iloc[-1] == pytest.approx(-0.5, abs=1e-10)


def test_large_potential_phase_per_step_is_rejected():
    with pytest.raises(ValueError, match="per step"):
        evolve(plane_wave(), EvolutionConfig(dt=DT, steps=10, potential=4 * K.hbar / DT))
    with pytest.raises(ValueError, match="per step"):
        evolve(plane_wave(), EvolutionConfig(dt=DT, steps=10, potential=-3.5 * K.hbar / DT))


def test_potential_just_below_wrap_still_tracks_phase():
    potential = 3.0 * K.hbar / DT
    _, df = evolve(plane_wave(), EvolutionConfig(dt=DT, steps=10, potential=potential))
    assert df["expected_phase"].iloc[-1] == pytest.approx(30.0, rel=1e-12)
    assert np.max(np.abs(df["measured_phase"] - df["expected_phase"])) < 1e-9


def test_beta0_squared_coupling_does_not_factorize():
    potential = 0.01 * K.hbar / DT
    config = EvolutionConfig(dt=DT, steps=100, potential=potential, coupling=Coupling.BETA0_SQUARED)
    _, df = evolve(plane_wave(), config)
    assert np.max(np.abs(df["measured_phase"] - df["expected_phase"])) > 1e-3


def test_potential_shifts_real_fringes():
    state = plane_wave()
    free = step(state, EvolutionConfig(dt=DT))
    shifted = step(state, EvolutionConfig(dt=DT, potential=0.3 * K.hbar / DT))
    E_free = real_fields(free)[0]
    E_shift = real_fields(shifted)[0]
    assert np.isrealobj(E_free)
    assert not np.allclose(E_free, E_shift)


# --- invariances ---

def test_gauge_leaves_physical_content_exact():
    state = plane_wave()
    chi = random_gauge_field(state, seed=7)
    gauged = apply_gauge(state, chi)
    assert np.array_equal(gauged.dynamical(), state.dynamical())
    assert np.array_equal(current(gauged).s0, current(state).s0)
    after = step(state, EvolutionConfig(dt=DT))
    gauged_after = apply_gauge(after, chi)
    assert maxwell_residual(gauged, gauged_after, DT) == maxwell_residual(state, after, DT)


def test_gauge_kick_leaves_energy_series(free_run):
    _, reference = free_run
    kick = random_gauge_field(plane_wave(), seed=3)
    _, kicked = evolve(plane_wave(), EvolutionConfig(dt=DT, steps=1000), gauge_kick=kick)
    np.testing.assert_allclose(kicked["total_s0"], reference["total_s0"], rtol=1e-12, atol=0)


def test_random_gauge_field_is_reproducible():
    state = plane_wave()
    assert np.array_equal(random_gauge_field(state, 1), random_gauge_field(state, 1))
    assert not np.array_equal(random_gauge_field(state, 1), random_gauge_field(state, 2))
    with pytest.raises(ValueError, match="does not match"):
        apply_gauge(state, np.zeros((10, 8)))


def test_mass_parameter_drops_out():
    assert mass_independence_check(KVEC, N, SPACING, 1.0, 4.0, steps=100) < 1e-12


def test_s0_non_negative_on_random_states():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        psi = rng.standard_normal((10, 8)) + 1j * rng.standard_normal((10, 8))
        diag = current(LatticeState(psi=psi, spacing=1.0, time=0.0, mass_param=rng.uniform(0.1, 10)))
        assert np.all(diag.s0 >= 0)
        assert diag.total_s0 >= 0


def test_flux_along_propagation():
    diag = current(plane_wave())
    # E = ŷ, H = ẑ -> E × H* = x̂
    assert np.allclose(diag.flux[0], 1.0)
    assert np.allclose(diag.flux[1:], 0.0)


def test_spectral_and_fd_constraint_agree_on_smooth_state():
    state = plane_wave(mode=1)
    assert constraint_residual(state, Derivative.FINITE_DIFFERENCE) < 1e-3
    assert constraint_residual(state, Derivative.SPECTRAL) < 1e-12


def test_write_snapshot(tmp_path):
    state = plane_wave(n=16)
    path = tmp_path / "snapshot.csv"
    write_snapshot(state, path)
    df = pd.read_csv(path)
    assert len(df) == 16
    assert list(df.columns[:2]) == ["site", "time"]
    assert "Hz_re" in df.columns and "mA0_im" in df.columns
