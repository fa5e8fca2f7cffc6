"""
KDP matrix algebra

10×10 Kemmer-Duffin-Petiau 行列（β⁰..β³）、γ 射影、β̃ᵢ、ψ 成分配置を構築・検証する。

構成方針:
  反対称テンソル ψ_[μν] とベクトル ψ_μ からなる 10 次元表現を作り、
  対角相似変換 diag(-1×6, -i×4) で ψ = (-E, H, -mA, mA₀)/√m の並びへ移す。
  成分は 0, ±1, ±i のみなので代数関係は厳密（許容誤差なし）に成立する。
  保存しているのは反変行列 β^μ。β̃ᵢ = β₀βᵢ - βᵢβ₀。
"""
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# --- Config ---
DIM = 10
METRIC = np.diag([1.0, -1.0, -1.0, -1.0])

# 抽象基底でのスロット番号
TENSOR_SLOTS = {(0, 1): 0, (0, 2): 1, (0, 3): 2, (2, 3): 3, (3, 1): 4, (1, 2): 5}
VECTOR_SLOTS = {1: 6, 2: 7, 3: 8, 0: 9}

# ψ の成分名（CSV 出力・スナップショット用）
COMPONENT_NAMES = (
    "-Ex", "-Ey", "-Ez", "Hx", "Hy", "Hz", "-mAx", "-mAy", "-mAz", "mA0",
)

E_SLICE = slice(0, 3)
H_SLICE = slice(3, 6)
A_SLICE = slice(6, 9)
A0_INDEX = 9


def _tensor_slot(mu: int, nu: int) -> Tuple[int, int]:
    """(μ,ν) -> (スロット, 符号)。ψ_[νμ] = -ψ_[μν]"""
    if (mu, nu) in TENSOR_SLOTS:
        return TENSOR_SLOTS[(mu, nu)], 1
    return TENSOR_SLOTS[(nu, mu)], -1


def _abstract_beta(lam: int) -> np.ndarray:
    """テンソル⊕ベクトル基底での β^λ"""
    b = np.zeros((DIM, DIM), dtype=complex)

    # ベクトル -> テンソル: (β^λψ)_[μν] = δ^λ_μ ψ_ν - δ^λ_ν ψ_μ
    for (mu, nu), slot in TENSOR_SLOTS.items():
        if lam == mu:
            b[slot, VECTOR_SLOTS[nu]] += 1
        if lam == nu:
            b[slot, VECTOR_SLOTS[mu]] -= 1

    # テンソル -> ベクトル: (β^λψ)_ν = g^{λλ} ψ_[λν]
    for nu in range(4):
        if nu == lam:
            continue
        slot, sign = _tensor_slot(lam, nu)
        b[VECTOR_SLOTS[nu], slot] += METRIC[lam, lam] * sign
    return b


# 抽象基底 -> 物理基底（ψ_phys = D ψ_abs）
_BASIS_CHANGE = -np.diag([1, 1, 1, 1, 1, 1, 1j, 1j, 1j, 1j])


@dataclass(frozen=True)
class KdpMatrixSet:
    """β^μ (4,10,10), γ (10,10), β̃ᵢ (3,10,10), 計量 g"""
    beta: np.ndarray
    gamma: np.ndarray
    beta_tilde: np.ndarray
    metric: np.ndarray

    @property
    def beta0_squared(self) -> np.ndarray:
        return self.beta[0] @ self.beta[0]

    def with_beta(self, index: int, matrix: np.ndarray) -> "KdpMatrixSet":
        """β の一つを差し替えた集合（摂動テスト用）。β̃ も再計算する"""
        beta = self.beta.copy()
        beta[index] = matrix
        return KdpMatrixSet(beta=beta, gamma=self.gamma,
                            beta_tilde=_beta_tilde(beta), metric=self.metric)


def _beta_tilde(beta: np.ndarray) -> np.ndarray:
    return np.stack([beta[0] @ beta[i] - beta[i] @ beta[0] for i in (1, 2, 3)])


def build_matrices() -> KdpMatrixSet:
    """
    KDP 行列集合を構築する

    Returns:
        KdpMatrixSet（成分は 0, ±1, ±i）
    Raises:
        RuntimeError: 代数関係が成立しない（構築の欠陥）
    """
    inv = np.linalg.inv(_BASIS_CHANGE)
    beta = np.stack([_BASIS_CHANGE @ _abstract_beta(lam) @ inv for lam in range(4)])
    # 相似変換の丸めを除去（成分は 0, ±1, ±i）
    beta = np.round(beta.real) + 1j * np.round(beta.imag)
    gamma = np.diag([1.0] * 6 + [0.0] * 4).astype(complex)

    matrices = KdpMatrixSet(beta=beta, gamma=gamma,
                            beta_tilde=_beta_tilde(beta), metric=METRIC.copy())
    for name, residual in (("algebra", algebra_residual(matrices)),
                           ("gamma", gamma_residual(matrices))):
        if residual != 0:
            raise RuntimeError(f"KDP {name} relation violated (residual {residual!r})")
    logger.debug("[KDP] Matrix set built: algebra and gamma relations exact")
    return matrices


def algebra_residual(matrices: KdpMatrixSet) -> float:
    """
    max |β_μβ_νβ_λ + β_λβ_νβ_μ - β_μ g_νλ - β_λ g_νμ| （64 通りの組）

    正しい集合では厳密に 0。
    """
    beta, g = matrices.beta, matrices.metric
    worst = 0.0
    for mu, nu, lam in itertools.product(range(4), repeat=3):
        lhs = beta[mu] @ beta[nu] @ beta[lam] + beta[lam] @ beta[nu] @ beta[mu]
        rhs = beta[mu] * g[nu, lam] + beta[lam] * g[nu, mu]
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def gamma_residual(matrices: KdpMatrixSet) -> float:
    """γβ_μ + β_μγ - β_μ の最大ノルム、γ² - γ も含む"""
    g = matrices.gamma
    worst = float(np.max(np.abs(g @ g - g)))
    for mu in range(4):
        b = matrices.beta[mu]
        worst = max(worst, float(np.max(np.abs(g @ b + b @ g - b))))
    return worst


def verify_matrices(matrices: Optional[KdpMatrixSet] = None) -> Dict[str, float]:
    """`kdp verify` 用の検査値一覧（すべて 0 / 期待値なら合格）"""
    m = matrices or build_matrices()
    expected_tilde = _beta_tilde(m.beta)
    return {
        "algebra_residual": algebra_residual(m),
        "gamma_residual": gamma_residual(m),
        "gamma_trace_minus_6": float(abs(np.trace(m.gamma) - 6)),
        "gamma_offdiag": float(np.max(np.abs(m.gamma - np.diag(np.diag(m.gamma))))),
        "beta_tilde_residual": float(np.max(np.abs(m.beta_tilde - expected_tilde))),
        "det_beta0": float(abs(np.linalg.det(m.beta[0]))),
    }


# ---------------------------------------------------------------------------
# ψ layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldVector:
    """ψ = (-E, H, -mA, mA₀)/√m の 10 成分"""
    components: np.ndarray
    mass_param: float

    def __post_init__(self):
        if not (self.mass_param > 0):
            raise ValueError(f"mass_param must be > 0, got {self.mass_param!r}")
        comps = np.asarray(self.components, dtype=complex)
        if comps.shape != (DIM,):
            raise ValueError(f"FieldVector needs {DIM} components, got shape {comps.shape}")
        object.__setattr__(self, "components", comps)

    def __getitem__(self, index):
        return self.components[index]


def pack_fields(E, H, A, A0, m: float) -> np.ndarray:
    """
    場 (E, H, A, A₀) を ψ 配列に詰める（格子全体でも可）

    Args:
        E, H, A: shape (3, ...) の配列
        A0: shape (...) の配列
        m: 質量パラメータ (> 0)
    Returns:
        shape (10, ...) の complex 配列
    """
    if not (m > 0):
        raise ValueError(f"Mass parameter must be > 0, got {m!r}")
    E = np.asarray(E, dtype=complex)
    H = np.asarray(H, dtype=complex)
    A = np.asarray(A, dtype=complex)
    A0 = np.asarray(A0, dtype=complex)
    root = np.sqrt(m)
    psi = np.empty((DIM,) + A0.shape, dtype=complex)
    psi[E_SLICE] = -E / root
    psi[H_SLICE] = H / root
    psi[A_SLICE] = -m * A / root
    psi[A0_INDEX] = m * A0 / root
    return psi


def unpack_fields(psi, m: float):
    """pack_fields の逆。(E, H, A, A0) を返す"""
    if not (m > 0):
        raise ValueError(f"Mass parameter must be > 0, got {m!r}")
    psi = np.asarray(psi, dtype=complex)
    root = np.sqrt(m)
    E = -psi[E_SLICE] * root
    H = psi[H_SLICE] * root
    A = -psi[A_SLICE] * root / m
    A0 = psi[A0_INDEX] * root / m
    return E, H, A, A0


def pack_psi(E, H, A, A0, m: float) -> FieldVector:
    """単一サイトの場を FieldVector にする"""
    return FieldVector(pack_fields(E, H, A, A0, m), float(m))


def unpack_psi(psi: FieldVector):
    E, H, A, A0 = unpack_fields(psi.components, psi.mass_param)
    return E, H, A, complex(A0)


def gauge_shift(psi: FieldVector, chi: FieldVector,
                matrices: Optional[KdpMatrixSet] = None) -> FieldVector:
    """
    ゲージ変換 ψ -> ψ + (1-γ)χ

    γ(1-γ) = 0 なので E, H 成分は変わらない。
    Raises:
        ValueError: mass_param が異なる
    """
    if psi.mass_param != chi.mass_param:
        raise ValueError(
            f"Gauge shift needs matching mass_param ({psi.mass_param!r} != {chi.mass_param!r})"
        )
    m = matrices or build_matrices()
    projector = np.eye(DIM) - m.gamma
    return FieldVector(psi.components + projector @ chi.components, psi.mass_param)


def dump_matrices(path: Union[str, Path], matrices: Optional[KdpMatrixSet] = None) -> pd.DataFrame:
    """
    行列集合を CSV に書き出す（1 行 = 1 成分、非ゼロのみ）

    列: matrix, row, col, re, im
    """
    m = matrices or build_matrices()
    named = [(f"beta{mu}", m.beta[mu]) for mu in range(4)]
    named += [("gamma", m.gamma)]
    named += [(f"beta_tilde{i + 1}", m.beta_tilde[i]) for i in range(3)]

    rows = []
    for name, mat in named:
        for r, c in zip(*np.nonzero(mat)):
            rows.append({"matrix": name, "row": int(r), "col": int(c),
                         "re": float(mat[r, c].real), "im": float(mat[r, c].imag)})
    df = pd.DataFrame(rows, columns=["matrix", "row", "col", "re", "im"])
    df.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"[KDP] Matrix dump written: {path} ({len(df)} entries)")
    return df
