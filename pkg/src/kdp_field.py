"""
KDP lattice evolution

周期格子上で Schrödinger 形式の Maxwell 方程式 iħ∂_t(γψ) = (H₀ + H_int)(γψ) を
時間発展させ、等価性・不変性の診断量を計算する。

- γ セクタ (E, H): ∂_t(γψ) = -c β̃ᵢ∂ᵢ(γψ) - (i/ħ) H_int (γψ)
- (1-γ) セクタ (A, A₀): 制約方程式から ∂_t A = -c(E + ∇A₀), ∂_t A₀ = 0

ψ は解析信号（正周波数）表現の複素場。積分器は
  SpectralExact: フーリエ空間で U(k) = expm(G(k)dt)（周期格子で厳密）
  RK4FiniteDifference: 2 次中心差分 + RK4
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import fft as sfft
from scipy.linalg import expm
from tqdm import tqdm

from src.kdp_algebra import (
    A0_INDEX, COMPONENT_NAMES, DIM, KdpMatrixSet, build_matrices,
    pack_fields, unpack_fields,
)
from src.units import PhysConstants, default_constants

logger = logging.getLogger(__name__)

# --- Config ---
MIN_SITES = 8
RK4_CFL_LIMIT = 0.5
COMMENSURATE_TOLERANCE = 1e-9
TRANSVERSE_TOLERANCE = 1e-12
DEFAULT_GRID = 256
PROPAGATOR_CACHE_SIZE = 32


class Integrator(Enum):
    SPECTRAL_EXACT = "spectral-exact"
    RK4_FINITE_DIFFERENCE = "rk4-fd"


class Coupling(Enum):
    """H_int の掛け方（γ セクタの恒等 / β₀²）"""
    DYNAMICAL_IDENTITY = "identity"
    BETA0_SQUARED = "beta0-squared"


class Derivative(Enum):
    SPECTRAL = "spectral"
    FINITE_DIFFERENCE = "fd"


@lru_cache(maxsize=1)
def _matrices() -> KdpMatrixSet:
    return build_matrices()


@dataclass(frozen=True)
class LatticeState:
    """
    格子上の ψ（shape (10, N) または (10, N, N, N)）

    Args:
        psi: 10 成分複素場
        spacing: 格子間隔 [m]
        time: 時刻 [s]
        mass_param: 質量パラメータ m（全サイト共通）
    """
    psi: np.ndarray
    spacing: float
    time: float
    mass_param: float

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape[0] != DIM or psi.ndim not in (2, 4):
            raise ValueError(f"psi must have shape (10, N) or (10, N, N, N), got {psi.shape}")
        if min(psi.shape[1:]) < MIN_SITES:
            raise ValueError(f"Grid needs >= {MIN_SITES} sites per dimension, got {psi.shape[1:]}")
        if not (self.spacing > 0):
            raise ValueError(f"spacing must be > 0, got {self.spacing!r}")
        if not (self.mass_param > 0):
            raise ValueError(f"mass_param must be > 0, got {self.mass_param!r}")
        object.__setattr__(self, "psi", psi)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.psi.shape[1:]

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.ndim

    def fields(self):
        """(E, H, A, A0) を返す（m に依存しない物理場）"""
        return unpack_fields(self.psi, self.mass_param)

    def dynamical(self) -> np.ndarray:
        """γψ（先頭 6 成分）"""
        return self.psi[:6]


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    integrator: Integrator = Integrator.SPECTRAL_EXACT
    potential: float = 0.0
    steps: int = 1
    coupling: Coupling = Coupling.DYNAMICAL_IDENTITY

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError(f"steps must be a non-negative integer, got {self.steps!r}")

    def courant(self, spacing: float, constants: Optional[PhysConstants] = None) -> float:
        k = constants or default_constants()
        return k.c * self.dt / spacing

    def check_cfl(self, spacing: float, constants: Optional[PhysConstants] = None):
        if self.integrator is Integrator.RK4_FINITE_DIFFERENCE:
            courant = self.courant(spacing, constants)
            if courant > RK4_CFL_LIMIT:
                raise ValueError(
                    f"CFL violation for RK4: c·dt/spacing = {courant:.4g} > {RK4_CFL_LIMIT}"
                )


@dataclass(frozen=True)
class CurrentDiagnostic:
    s0: np.ndarray
    flux: np.ndarray
    total_s0: float


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------

def _generator_parts(m: float):
    """
    G(k) = c[Σᵢ Mᵢ(ikᵢ) + N] + V の Mᵢ, N

    Mᵢ = -γβ̃ᵢγ - (1-γ)β₀²β₀βᵢ,  N = i·m·(1-γ)β₀²β₀γ
    """
    mats = _matrices()
    gamma = mats.gamma
    rest = np.eye(DIM) - gamma
    b0 = mats.beta[0]
    b0sq = mats.beta0_squared
    M = np.stack([
        -gamma @ mats.beta_tilde[i] @ gamma - rest @ b0sq @ b0 @ mats.beta[i + 1]
        for i in range(3)
    ])
    N = 1j * m * rest @ b0sq @ b0 @ gamma
    return M, N


def _potential_matrix(potential: float, coupling: Coupling, constants: PhysConstants) -> np.ndarray:
    """ポテンシャル項 V（H_int の掛け方はここだけで決まる）"""
    mats = _matrices()
    weight = mats.gamma if coupling is Coupling.DYNAMICAL_IDENTITY else mats.beta0_squared
    return -1j * potential / constants.hbar * weight


def _wavenumbers(shape: Tuple[int, ...], spacing: float) -> List[np.ndarray]:
    """k_x, k_y, k_z（1D 格子は x のみ、他は 0）"""
    axes = [2 * np.pi * sfft.fftfreq(n, d=spacing) for n in shape]
    if len(shape) == 1:
        kx = axes[0]
        return [kx, np.zeros_like(kx), np.zeros_like(kx)]
    return list(np.meshgrid(*axes, indexing="ij"))


@lru_cache(maxsize=PROPAGATOR_CACHE_SIZE)
def _propagator(shape: Tuple[int, ...], spacing: float, dt: float, m: float,
                potential: float, coupling: Coupling, constants: PhysConstants) -> np.ndarray:
    """U(k) = expm(G(k)dt)、shape (*grid, 10, 10)"""
    M, N = _generator_parts(m)
    V = _potential_matrix(potential, coupling, constants)
    ks = _wavenumbers(shape, spacing)
    G = constants.c * (N + sum(1j * k[..., None, None] * M[i] for i, k in enumerate(ks)))
    G = G + V
    logger.debug(f"[LATTICE] Building spectral propagator for grid {shape}")
    return expm(G * dt)


def _spatial_axes(ndim: int) -> Tuple[int, ...]:
    return tuple(range(1, ndim + 1))


def _derivative(f: np.ndarray, axis_index: int, spacing: float, ndim: int,
                method: Derivative) -> np.ndarray:
    """
    f (shape (C, *grid)) の空間微分 ∂_{axis_index}

    1D 格子では y, z 微分は 0。
    """
    if axis_index >= ndim:
        return np.zeros_like(f)
    axis = axis_index + 1
    if method is Derivative.SPECTRAL:
        n = f.shape[axis]
        k = 2 * np.pi * sfft.fftfreq(n, d=spacing)
        shape = [1] * f.ndim
        shape[axis] = n
        return sfft.ifft(1j * k.reshape(shape) * sfft.fft(f, axis=axis), axis=axis)
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * spacing)


def _gradient(f: np.ndarray, spacing: float, ndim: int, method: Derivative) -> List[np.ndarray]:
    return [_derivative(f, i, spacing, ndim, method) for i in range(3)]


def _curl(v: np.ndarray, spacing: float, ndim: int, method: Derivative) -> np.ndarray:
    d = _gradient(v, spacing, ndim, method)   # d[i][j] = ∂_i v_j
    return np.stack([
        d[1][2] - d[2][1],
        d[2][0] - d[0][2],
        d[0][1] - d[1][0],
    ])


def _divergence(v: np.ndarray, spacing: float, ndim: int, method: Derivative) -> np.ndarray:
    d = _gradient(v, spacing, ndim, method)
    return d[0][0] + d[1][1] + d[2][2]


def _apply(matrix: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.einsum("ab,b...->a...", matrix, psi)


def _time_derivative(state: LatticeState, config: EvolutionConfig,
                     constants: PhysConstants) -> np.ndarray:
    """実空間（差分）での ∂_t ψ"""
    M, N = _generator_parts(state.mass_param)
    V = _potential_matrix(config.potential, config.coupling, constants)
    grads = _gradient(state.psi, state.spacing, state.ndim, Derivative.FINITE_DIFFERENCE)
    rhs = _apply(N, state.psi)
    for i in range(3):
        if i < state.ndim:
            rhs = rhs + _apply(M[i], grads[i])
    return constants.c * rhs + _apply(V, state.psi)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def init_plane_wave(k: Sequence[float], polarization: Sequence[float], shape: Union[int, Tuple[int, ...]],
                    spacing: float, m: float, amplitude: float = 1.0,
                    constants: Optional[PhysConstants] = None) -> LatticeState:
    """
    平面波 E = E₀ ê e^{ik·x}, H = k̂×E, A = -i(c/ω)E, A₀ = 0 で格子を初期化

    Args:
        k: 波数ベクトル [rad/m]（周期格子と整合する整数モード）
        polarization: 偏光ベクトル（k に直交、内部で正規化）
        shape: N（1D）または (N, N, N)
        spacing: 格子間隔 [m]
        m: 質量パラメータ
    Raises:
        ValueError: 非整合な k / 縦偏光 / k = 0
    """
    kc = constants or default_constants()
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    if len(shape) not in (1, 3):
        raise ValueError(f"Lattice must be 1D or 3D, got shape {shape}")
    k = np.asarray(k, dtype=float)
    pol = np.asarray(polarization, dtype=float)
    kmag = float(np.linalg.norm(k))
    if kmag == 0:
        raise ValueError("Plane wave needs k != 0")

    for axis in range(3):
        if axis >= len(shape):
            if k[axis] != 0:
                raise ValueError(f"1D lattice only supports k along x, got k = {k.tolist()}")
            continue
        modes = k[axis] * shape[axis] * spacing / (2 * np.pi)
        if abs(modes - round(modes)) > COMMENSURATE_TOLERANCE * max(1.0, abs(modes)):
            raise ValueError(
                f"k[{axis}] = {k[axis]!r} is not commensurate with the periodic grid "
                f"(mode number {modes:.6g})"
            )

    pol_norm = float(np.linalg.norm(pol))
    if pol_norm == 0:
        raise ValueError("Polarization vector must be non-zero")
    if abs(float(k @ pol)) > TRANSVERSE_TOLERANCE * kmag * pol_norm:
        raise ValueError("Polarization must be transverse to k (div E = 0)")
    pol = pol / pol_norm

    coords = np.meshgrid(*[np.arange(n) * spacing for n in shape], indexing="ij")
    phase = sum(k[i] * coords[i] for i in range(len(shape)))
    wave = amplitude * np.exp(1j * phase)

    E = pol[:, None] * wave.reshape(1, -1)
    E = E.reshape((3,) + shape)
    H = np.cross(k / kmag, pol)[:, None] * wave.reshape(1, -1)
    H = H.reshape((3,) + shape)
    omega = kc.c * kmag
    A = -1j * (kc.c / omega) * E
    A0 = np.zeros(shape, dtype=complex)

    return LatticeState(psi=pack_fields(E, H, A, A0, m), spacing=spacing, time=0.0, mass_param=m)


def step(state: LatticeState, config: EvolutionConfig,
         constants: Optional[PhysConstants] = None) -> LatticeState:
    """ψ を dt だけ進める"""
    kc = constants or default_constants()
    config.check_cfl(state.spacing, kc)
    dt = config.dt

    if config.integrator is Integrator.SPECTRAL_EXACT:
        U = _propagator(state.shape, state.spacing, dt, state.mass_param,
                        config.potential, config.coupling, kc)
        axes = _spatial_axes(state.ndim)
        psi_hat = sfft.fftn(state.psi, axes=axes)
        psi_hat = np.einsum("...ab,b...->a...", U, psi_hat)
        psi = sfft.ifftn(psi_hat, axes=axes)
    else:
        def deriv(psi_):
            return _time_derivative(replace(state, psi=psi_), config, kc)
        k1 = deriv(state.psi)
        k2 = deriv(state.psi + 0.5 * dt * k1)
        k3 = deriv(state.psi + 0.5 * dt * k2)
        k4 = deriv(state.psi + dt * k3)
        psi = state.psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    return replace(state, psi=psi, time=state.time + dt)


def constraint_residual(state: LatticeState, derivative: Derivative = Derivative.SPECTRAL) -> float:
    """
    制約 iβᵢβ₀²∂ᵢψ + m(1-β₀²)γψ の最大ノルム

    H 成分は √m(H - curl A)、A₀ 成分は div E/√m に比例するので、
    それぞれ √m で正規化して max(|div E|, |H - curl A|) を返す。
    """
    mats = _matrices()
    b0sq = mats.beta0_squared
    m = state.mass_param
    projected = _apply(b0sq, state.psi)
    grads = _gradient(projected, state.spacing, state.ndim, derivative)
    lhs = m * _apply((np.eye(DIM) - b0sq) @ mats.gamma, state.psi)
    for i in range(3):
        if i < state.ndim:
            lhs = lhs + 1j * _apply(mats.beta[i + 1], grads[i])

    h_part = float(np.max(np.abs(lhs[3:6]))) / np.sqrt(m)
    div_part = float(np.max(np.abs(lhs[A0_INDEX]))) * np.sqrt(m)
    return max(h_part, div_part)


def _check_same_grid(*states: LatticeState):
    first = states[0]
    for other in states[1:]:
        if other.shape != first.shape or other.spacing != first.spacing:
            raise ValueError(
                f"Lattice mismatch: {first.shape}@{first.spacing} vs {other.shape}@{other.spacing}"
            )


def maxwell_residual(state_t0: LatticeState, state_t1: LatticeState, dt: float,
                     derivative: Derivative = Derivative.SPECTRAL,
                     constants: Optional[PhysConstants] = None) -> Tuple[float, float]:
    """
    curl E = -(1/c)∂H/∂t, curl H = (1/c)∂E/∂t の中心差分残差

    時間微分は前進差分、curl は 2 時刻の平均（中点評価なので O(dt²)）。
    Returns:
        (curl_E_residual, curl_H_residual)
    """
    _check_same_grid(state_t0, state_t1)
    kc = constants or default_constants()
    E0, H0, _, _ = state_t0.fields()
    E1, H1, _, _ = state_t1.fields()
    sp, nd = state_t0.spacing, state_t0.ndim
    curl_E = 0.5 * (_curl(E0, sp, nd, derivative) + _curl(E1, sp, nd, derivative))
    curl_H = 0.5 * (_curl(H0, sp, nd, derivative) + _curl(H1, sp, nd, derivative))
    res_E = curl_E + (H1 - H0) / (kc.c * dt)
    res_H = curl_H - (E1 - E0) / (kc.c * dt)
    return float(np.max(np.abs(res_E))), float(np.max(np.abs(res_H)))


def dalembert_residual(states: Sequence[LatticeState], dt: float,
                       derivative: Derivative = Derivative.SPECTRAL,
                       constants: Optional[PhysConstants] = None) -> float:
    """□(γψ) = (1/c²)∂²_t(γψ) - ∇²(γψ) の最大ノルム（3 時刻の 2 階差分）"""
    if len(states) != 3:
        raise ValueError(f"dalembert_residual needs 3 consecutive states, got {len(states)}")
    _check_same_grid(*states)
    kc = constants or default_constants()
    sector = [np.concatenate(s.fields()[:2]) for s in states]
    mid = states[1]
    second = (sector[2] - 2 * sector[1] + sector[0]) / (kc.c2 * dt * dt)
    lap = np.zeros_like(sector[1])
    for i in range(mid.ndim):
        first = _derivative(sector[1], i, mid.spacing, mid.ndim, derivative)
        lap = lap + _derivative(first, i, mid.spacing, mid.ndim, derivative)
    return float(np.max(np.abs(second - lap)))


def current(state: LatticeState) -> CurrentDiagnostic:
    """s₀ = ½(|E|² + |H|²), flux = Re(E × H*)"""
    E, H, _, _ = state.fields()
    s0 = 0.5 * (np.sum(np.abs(E) ** 2, axis=0) + np.sum(np.abs(H) ** 2, axis=0))
    flux = np.real(np.cross(E, np.conj(H), axis=0))
    # 平坦化した C 順序で総和（再現性のため順序固定）
    total = float(np.sum(s0.ravel()) * state.cell_volume)
    return CurrentDiagnostic(s0=s0, flux=flux, total_s0=total)


def apply_gauge(state: LatticeState, chi_field: np.ndarray) -> LatticeState:
    """格子全体にゲージ変換 ψ -> ψ + (1-γ)χ を適用"""
    chi = np.asarray(chi_field, dtype=complex)
    if chi.shape != state.psi.shape:
        raise ValueError(f"chi grid {chi.shape} does not match state grid {state.psi.shape}")
    mats = _matrices()
    return replace(state, psi=state.psi + _apply(np.eye(DIM) - mats.gamma, chi))


def random_gauge_field(state: LatticeState, seed: int, scale: float = 1.0) -> np.ndarray:
    """再現可能な乱数 χ（ゲージキック用）"""
    rng = np.random.default_rng(seed)
    shape = state.psi.shape
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def measure_phase(reference: LatticeState, shifted: LatticeState) -> float:
    """
    γ セクタの内積から位相差を測る: -arg⟨ref, shifted⟩

    shifted = ref·e^{-iφ} なら φ を返す（(-π, π] に折り返し）。
    """
    _check_same_grid(reference, shifted)
    overlap = np.vdot(reference.dynamical().ravel(), shifted.dynamical().ravel())
    if overlap == 0:
        return 0.0
    return float(-np.angle(overlap))


def real_fields(state: LatticeState):
    """解析信号の実部（実 Maxwell 場）。一定ポテンシャルは縞のずれとして現れる"""
    E, H, A, A0 = state.fields()
    return np.real(E), np.real(H), np.real(A), np.real(A0)


def mass_independence_check(k: Sequence[float], shape, spacing: float, m1: float, m2: float,
                            steps: int, dt: Optional[float] = None,
                            polarization: Sequence[float] = (0.0, 1.0, 0.0),
                            constants: Optional[PhysConstants] = None) -> float:
    """
    同じ (E, H) を m1, m2 で詰めて発展させ、(E, H) 軌跡の最大相対差を返す
    """
    if not (m1 > 0 and m2 > 0):
        raise ValueError(f"Mass parameters must be > 0, got {m1!r}, {m2!r}")
    kc = constants or default_constants()
    if dt is None:
        dt = 0.25 * spacing / kc.c
    config = EvolutionConfig(dt=dt, steps=steps)
    s1 = init_plane_wave(k, polarization, shape, spacing, m1, constants=kc)
    s2 = init_plane_wave(k, polarization, shape, spacing, m2, constants=kc)

    worst = 0.0
    for _ in range(steps + 1):
        E1, H1, _, _ = s1.fields()
        E2, H2, _, _ = s2.fields()
        scale = max(float(np.max(np.abs(E1))), float(np.max(np.abs(H1))), np.finfo(float).tiny)
        diff = max(float(np.max(np.abs(E1 - E2))), float(np.max(np.abs(H1 - H2))))
        worst = max(worst, diff / scale)
        s1 = step(s1, config, kc)
        s2 = step(s2, config, kc)
    return worst


def evolve(state: LatticeState, config: EvolutionConfig, constants: Optional[PhysConstants] = None,
           derivative: Derivative = Derivative.SPECTRAL, progress: bool = False,
           gauge_kick: Optional[np.ndarray] = None) -> Tuple[LatticeState, pd.DataFrame]:
    """
    config.steps だけ発展させ、診断量の時系列を返す

    列: step, time, total_s0, constraint_residual, curl_E_residual, curl_H_residual,
        measured_phase, expected_phase
    measured_phase は自由発展（H_int = 0）との位相差（unwrap 済み）。

    Args:
        gauge_kick: 初期状態に加える χ（ゲージ不変性の確認用）
    Raises:
        ValueError: |H_int|·dt/ħ >= π（1 ステップの位相が折り返し、unwrap できない）
    """
    kc = constants or default_constants()
    config.check_cfl(state.spacing, kc)
    phase_per_step = abs(config.potential) * config.dt / kc.hbar
    if phase_per_step >= math.pi:
        raise ValueError(
            f"Potential phase per step |H_int|·dt/ħ = {phase_per_step:.4g} rad >= π; "
            f"reduce dt below {math.pi * kc.hbar / abs(config.potential):.4g} s"
        )
    if gauge_kick is not None:
        state = apply_gauge(state, gauge_kick)

    free_config = replace(config, potential=0.0)
    reference = state
    rows = []

    def record(i, current_state, prev_state, ref_state):
        if prev_state is None:
            res_E = res_H = 0.0
        else:
            res_E, res_H = maxwell_residual(prev_state, current_state, config.dt, derivative, kc)
        rows.append({
            "step": i,
            "time": current_state.time,
            "total_s0": current(current_state).total_s0,
            "constraint_residual": constraint_residual(current_state, derivative),
            "curl_E_residual": res_E,
            "curl_H_residual": res_H,
            "measured_phase": measure_phase(ref_state, current_state),
            "expected_phase": config.potential * current_state.time / kc.hbar,
        })

    logger.info(
        f"[LATTICE] Evolving grid {state.shape} for {config.steps} steps "
        f"({config.integrator.value}, H_int = {config.potential:.6g} J)"
    )
    record(0, state, None, reference)
    prev = state
    for i in tqdm(range(1, config.steps + 1), desc="Evolving", disable=not progress):
        current_state = step(prev, config, kc)
        if config.potential != 0.0:
            reference = step(reference, free_config, kc)
        else:
            reference = current_state
        record(i, current_state, prev, reference)
        prev = current_state

    df = pd.DataFrame(rows)
    df["measured_phase"] = np.unwrap(df["measured_phase"].to_numpy())
    return prev, df


def write_snapshot(state: LatticeState, path: Union[str, Path]) -> pd.DataFrame:
    """
    状態を CSV に書き出す（1 行 = 1 サイト）

    列: site, (ix, iy, iz), time, 各成分の re/im
    """
    flat = state.psi.reshape(DIM, -1)
    data = {"site": np.arange(flat.shape[1])}
    if state.ndim == 3:
        idx = np.unravel_index(data["site"], state.shape)
        data.update({"ix": idx[0], "iy": idx[1], "iz": idx[2]})
    data["time"] = np.full(flat.shape[1], state.time)
    for c, name in enumerate(COMPONENT_NAMES):
        data[f"{name}_re"] = flat[c].real
        data[f"{name}_im"] = flat[c].imag
    df = pd.DataFrame(data)
    df.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"[LATTICE] Snapshot written: {path} ({len(df)} sites)")
    return df
