"""
Experiment designer

位相公式を逆算して実験パラメータを設計する。
必要な巻き数 n_w、所要時間、ミラー損失の許容下限、組み込み 3 シナリオ（astro, lab-classical, lab-quantum）、グリッド掃引。

所要時間 = n_w × (1 周の光路長) / c
損失下限 r = exp(ln(v) / (2·反射数·n_w))   （1 - r は expm1 で桁落ちなしに計算）
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.interferometer import DEFAULT_REFLECTIONS_PER_CYCLE
from src.phase_core import (
    LightPulse, PhaseKind, ShellSpec, Statistics, per_pass_phase,
)
from src.units import PhysConstants, default_constants

logger = logging.getLogger(__name__)

# --- Config ---
DEFAULT_MIN_VISIBILITY = 0.5
MIN_DETECTABLE_PHASE = 1e-4          # [rad]
MAX_PRACTICAL_DURATION = 86400.0     # [s]
BEST_MIRROR_LOSS = 1e-6              # 現実的な 1 反射あたり損失の下限
SWEEP_PARAMETERS = ("winding", "mass", "mean_photons", "wavelength", "radius", "cycle_path_length")
SWEEP_COLUMNS = ["parameter", "value", "winding", "phase", "duration", "loss_floor", "loss_margin", "feasible"]


class InfeasibleDesign(ValueError):
    """設計が原理的に成立しない（例: 1 パス位相が 0）"""


@dataclass(frozen=True)
class Scenario:
    """
    実験シナリオ

    cycle_path_length はループ 1 周の光路長。ループの幾何は与えられていないため
    所要時間から逆算した値を各シナリオに持たせる。
    """
    name: str
    shell: ShellSpec
    pulse: LightPulse
    winding: int
    mode: PhaseKind
    cycle_path_length: float
    eps0: float = 1.0
    reflections_per_cycle: int = DEFAULT_REFLECTIONS_PER_CYCLE
    min_visibility: float = DEFAULT_MIN_VISIBILITY
    notes: str = ""

    def __post_init__(self):
        if int(self.winding) != self.winding or self.winding < 1:
            raise ValueError(f"Scenario '{self.name}': winding must be an integer >= 1, got {self.winding!r}")
        object.__setattr__(self, "winding", int(self.winding))
        if self.cycle_path_length < 2 * self.shell.radius:
            raise ValueError(
                f"Scenario '{self.name}': cycle_path_length {self.cycle_path_length!r} m "
                f"< shell diameter {2 * self.shell.radius!r} m"
            )
        if not (0 < self.min_visibility <= 1):
            raise ValueError(f"min_visibility must be in (0,1], got {self.min_visibility!r}")
        if self.mode is PhaseKind.QUANTUM and self.pulse.mean_photons is None:
            raise ValueError(f"Scenario '{self.name}': quantum mode needs pulse.mean_photons")


@dataclass(frozen=True)
class DesignResult:
    phase: float
    per_pass: float
    duration: float
    required_loss_floor: float
    loss_margin: float
    feasible: bool
    reasons: Tuple[str, ...] = ()


def required_winding(target_phase: float, shell: ShellSpec, pulse: LightPulse,
                     mode: PhaseKind = PhaseKind.CLASSICAL, eps0: float = 1.0,
                     constants: Optional[PhysConstants] = None) -> int:
    """
    n_w × (1 パス位相) >= target を満たす最小の n_w

    Raises:
        ValueError: target <= 0
        InfeasibleDesign: 1 パス位相が 0（M = 0 など）
    """
    if not (target_phase > 0):
        raise ValueError(f"target_phase must be > 0, got {target_phase!r}")
    per_pass = per_pass_phase(shell, pulse, mode, eps0, constants)
    if per_pass <= 0:
        raise InfeasibleDesign(f"Per-pass phase is {per_pass!r}: no winding reaches {target_phase!r} rad")

    n = max(1, math.ceil(target_phase / per_pass))
    # 除算の丸め補正（位相は per_pass * n で計算されるのでそれに合わせる）
    while per_pass * n < target_phase:
        n += 1
    while n > 1 and per_pass * (n - 1) >= target_phase:
        n -= 1
    return n


def duration_estimate(scenario: Scenario, constants: Optional[PhysConstants] = None) -> float:
    """winding × cycle_path_length / c"""
    kc = constants or default_constants()
    return scenario.winding * scenario.cycle_path_length / kc.c


def loss_margin(winding: int, min_visibility: float,
                reflections_per_cycle: int = DEFAULT_REFLECTIONS_PER_CYCLE) -> float:
    """1 - r（許容される 1 反射あたりの損失）"""
    if not (0 < min_visibility <= 1):
        raise ValueError(f"min_visibility must be in (0,1], got {min_visibility!r}")
    exponent = math.log(min_visibility) / (2 * reflections_per_cycle * winding)
    return -math.expm1(exponent)


def loss_floor(scenario: Scenario, min_visibility: Optional[float] = None) -> float:
    """
    可視度 min_visibility を保つための 1 反射あたり振幅保持率の下限 r

    r^(2·反射数·n_w) >= min_visibility
    """
    v = scenario.min_visibility if min_visibility is None else min_visibility
    if not (0 < v <= 1):
        raise ValueError(f"min_visibility must be in (0,1], got {v!r}")
    return math.exp(math.log(v) / (2 * scenario.reflections_per_cycle * scenario.winding))


def evaluate_scenario(scenario: Scenario, constants: Optional[PhysConstants] = None) -> DesignResult:
    """シナリオの位相・時間・損失下限と実現性（助言のみ、例外にしない）"""
    kc = constants or default_constants()
    per_pass = per_pass_phase(scenario.shell, scenario.pulse, scenario.mode, scenario.eps0, kc)
    phase = per_pass * scenario.winding
    duration = duration_estimate(scenario, kc)
    floor = loss_floor(scenario)
    margin = loss_margin(scenario.winding, scenario.min_visibility, scenario.reflections_per_cycle)

    reasons = []
    if phase < MIN_DETECTABLE_PHASE:
        reasons.append(f"phase {phase:.3g} rad below detectable {MIN_DETECTABLE_PHASE:g} rad")
    if duration > MAX_PRACTICAL_DURATION:
        reasons.append(f"duration {duration:.3g} s exceeds {MAX_PRACTICAL_DURATION:g} s")
    if margin < BEST_MIRROR_LOSS:
        reasons.append(
            f"mirrors must lose < {margin:.3g} per reflection (best available ~{BEST_MIRROR_LOSS:g})"
        )
    if not scenario.shell.is_weak_field(kc):
        reasons.append("shell outside the weak-field regime")

    for r in reasons:
        logger.warning(f"[DESIGN] {scenario.name}: {r}")
    return DesignResult(
        phase=phase,
        per_pass=per_pass,
        duration=duration,
        required_loss_floor=floor,
        loss_margin=margin,
        feasible=not reasons,
        reasons=tuple(reasons),
    )


# ---------------------------------------------------------------------------
# Shipped scenarios
# ---------------------------------------------------------------------------

WAVELENGTH_5000A = 5000e-10

PAPER_SCENARIO_NOTES = {
    "astrophysical": "Classical light around a 1e18 kg shell, single pass. "
                     "Radius 1e4 m and loop 6e4 m are assumed (phase is radius-independent).",
    "lab-classical": "Steel shell R = 3.3 m, t = 10 cm; n_w = 1e12. "
                     "cycle_path_length 16.2 m back-implied from a 15 h circulation.",
    "lab-quantum": "Shell R = 1.5 m, t = 1 cm; laser pulse with N = 1e7 photons, n_w = 1e6. "
                   "cycle_path_length 30 m back-implied from a 0.1 s circulation.",
}


def paper_scenario(name: str) -> Scenario:
    """
    名前付きシナリオ

    Raises:
        KeyError: 未知の名前（利用可能な名前をメッセージに含む）
    """
    if name == "astrophysical":
        return Scenario(
            name=name,
            shell=ShellSpec(mass=1e18, radius=1e4),
            pulse=LightPulse(wavelength=WAVELENGTH_5000A),
            winding=1,
            mode=PhaseKind.CLASSICAL,
            cycle_path_length=6e4,
            notes=PAPER_SCENARIO_NOTES[name],
        )
    if name == "lab-classical":
        return Scenario(
            name=name,
            shell=ShellSpec(mass=1e5, radius=3.3, thickness=0.1, density=7.3e3),
            pulse=LightPulse(wavelength=WAVELENGTH_5000A),
            winding=10 ** 12,
            mode=PhaseKind.CLASSICAL,
            cycle_path_length=16.2,
            notes=PAPER_SCENARIO_NOTES[name],
        )
    if name == "lab-quantum":
        return Scenario(
            name=name,
            shell=ShellSpec(mass=3e3, radius=1.5, thickness=0.01, density=1.06e4),
            pulse=LightPulse(wavelength=WAVELENGTH_5000A, mean_photons=1e7,
                             statistics=Statistics.COHERENT_LASER),
            winding=10 ** 6,
            mode=PhaseKind.QUANTUM,
            cycle_path_length=30.0,
            notes=PAPER_SCENARIO_NOTES[name],
        )
    raise KeyError(f"Unknown scenario '{name}' (available: {', '.join(PAPER_SCENARIO_NOTES)})")


def paper_scenarios(constants: Optional[PhysConstants] = None) -> List[Tuple[Scenario, DesignResult]]:
    """3 シナリオとその評価結果"""
    results = []
    for name in PAPER_SCENARIO_NOTES:
        scenario = paper_scenario(name)
        results.append((scenario, evaluate_scenario(scenario, constants)))
    return results


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def parse_sweep(spec: str) -> Tuple[str, np.ndarray]:
    """
    "param=a:b:n[:log]" を (param, 値の配列) に変換

    Raises:
        ValueError: 書式違反・未知のパラメータ
    """
    if "=" not in spec:
        raise ValueError(f"Sweep must look like param=a:b:n[:log], got '{spec}'")
    param, rng = spec.split("=", 1)
    param = param.strip()
    if param not in SWEEP_PARAMETERS:
        raise ValueError(f"Cannot sweep '{param}' (allowed: {', '.join(SWEEP_PARAMETERS)})")
    parts = rng.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise ValueError(f"Sweep range must be a:b:n[:log], got '{rng}'")
    start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise ValueError(f"Sweep needs n >= 1, got {count}")
    if len(parts) == 4:
        if start <= 0 or stop <= 0:
            raise ValueError("Log sweep bounds must be > 0")
        values = np.geomspace(start, stop, count)
    else:
        values = np.linspace(start, stop, count)
    return param, values


def _with_parameter(scenario: Scenario, param: str, value: float) -> Scenario:
    shell, pulse = scenario.shell, scenario.pulse
    if param == "winding":
        return replace(scenario, winding=max(1, int(round(value))))
    if param == "mass":
        return replace(scenario, shell=ShellSpec(mass=value, radius=shell.radius))
    if param == "radius":
        return replace(scenario, shell=ShellSpec(mass=shell.mass, radius=value))
    if param == "mean_photons":
        return replace(scenario, pulse=replace(pulse, mean_photons=value, energy=None))
    if param == "wavelength":
        return replace(scenario, pulse=replace(pulse, wavelength=value, energy=None))
    if param == "cycle_path_length":
        return replace(scenario, cycle_path_length=value)
    raise ValueError(f"Cannot sweep '{param}'")


def sweep(scenario: Scenario, param: str, values: Sequence[float],
          constants: Optional[PhysConstants] = None, progress: bool = False) -> pd.DataFrame:
    """
    1 パラメータのグリッド掃引

    列: parameter, value, winding, phase, duration, loss_floor, loss_margin, feasible
    """
    rows = []
    for value in tqdm(values, desc=f"Sweep {param}", disable=not progress):
        s = _with_parameter(scenario, param, float(value))
        result = evaluate_scenario(s, constants)
        rows.append({
            "parameter": param,
            "value": float(s.winding) if param == "winding" else float(value),
            "winding": s.winding,
            "phase": result.phase,
            "duration": result.duration,
            "loss_floor": result.required_loss_floor,
            "loss_margin": result.loss_margin,
            "feasible": result.feasible,
        })
    logger.info(f"[DESIGN] Sweep over {param}: {len(rows)} rows")
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)
