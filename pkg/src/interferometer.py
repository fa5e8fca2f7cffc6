"""
Circulating Mach-Zehnder simulation

改良型マッハツェンダー干渉計（各アームが周回ループ、片方のアームに球殻）の
ミラースケジュール検証・位相の収支・出力ポート強度・光子数サンプリング。

タイムラインモデル:
  各ループは PathSegment の列。入口ミラー (m14/m24) は境界 0、
  出口ミラー (m11/m21) は exit_boundary にある。パルスは t_in = D/c に境界 0 から
  ループに入り、イベントは (周回 cycle, ループ内の割合 fraction) で指定する。
  検証はイベントあたり O(1)（n_w = 10¹² でも周回を数えない）。
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Set, Tuple

import numpy as np
import pandas as pd

from src.phase_core import (
    LightPulse, PhaseKind, ShellSpec, per_pass_phase,
)
from src.units import PhysConstants, default_constants

logger = logging.getLogger(__name__)

# --- Config ---
ARMS = ("upper", "lower")
FIXED_MIRRORS = ("m12", "m13", "m22", "m23")
ENTRY_MIRRORS = {"upper": "m14", "lower": "m24"}
EXIT_MIRRORS = {"upper": "m11", "lower": "m21"}
DEFAULT_REFLECTIONS_PER_CYCLE = 4
DEFAULT_ENTRY_INSERT = (1, 0.5)        # 最初の周回の半分で入口ミラーを閉じる
SHELL_LENGTH_TOLERANCE = 1e-12
TRANSMISSION_WARN = 0.5
LONG_DURATION_WARN = 3600.0            # [s]


class SegmentTag(Enum):
    FREE = "free"
    THROUGH_SHELL = "through_shell"


class MirrorAction(Enum):
    INSERT = "insert"
    REMOVE = "remove"


class TimingConflict(ValueError):
    """ミラー操作がパルス位置と衝突した"""

    def __init__(self, message: str, cycle: int, arm: str):
        super().__init__(f"{message} (arm={arm}, cycle={cycle})")
        self.cycle = cycle
        self.arm = arm


@dataclass(frozen=True)
class PathSegment:
    length: float
    tag: SegmentTag = SegmentTag.FREE
    label: str = ""

    def __post_init__(self):
        if not (self.length > 0):
            raise ValueError(f"Segment length must be > 0, got {self.length!r} ({self.label})")


@dataclass(frozen=True)
class InterferometerLayout:
    """
    2 本のループアームと球殻

    Args:
        upper_arm, lower_arm: ループを構成する区間（境界 0 が入口ミラー）
        shell: 球殻（ちょうど一方のアームに through_shell 区間 2R がある）
        bs_split_ratio: ビームスプリッタの反射率 s ∈ (0,1)
        mirror_loss: 1 反射あたりの振幅保持率 ∈ (0,1]
        m1_bs1_distance: M1-BS1 間距離 [m]
        exit_boundary: 出口ミラーの位置（区間境界の番号）
    """
    upper_arm: Tuple[PathSegment, ...]
    lower_arm: Tuple[PathSegment, ...]
    shell: ShellSpec
    m1_bs1_distance: float
    bs_split_ratio: float = 0.5
    mirror_loss: float = 1.0
    reflections_per_cycle: int = DEFAULT_REFLECTIONS_PER_CYCLE
    exit_boundary: int = 1

    def __post_init__(self):
        object.__setattr__(self, "upper_arm", tuple(self.upper_arm))
        object.__setattr__(self, "lower_arm", tuple(self.lower_arm))
        if not (0 < self.bs_split_ratio < 1):
            raise ValueError(f"bs_split_ratio must be in (0,1), got {self.bs_split_ratio!r}")
        if not (0 < self.mirror_loss <= 1):
            raise ValueError(f"mirror_loss must be in (0,1], got {self.mirror_loss!r}")
        if self.m1_bs1_distance < 0:
            raise ValueError(f"m1_bs1_distance must be >= 0, got {self.m1_bs1_distance!r}")
        if int(self.reflections_per_cycle) != self.reflections_per_cycle or self.reflections_per_cycle < 1:
            raise ValueError(f"reflections_per_cycle must be an integer >= 1, got {self.reflections_per_cycle!r}")

        for arm in ARMS:
            segments = self.arm(arm)
            if len(segments) < 3:
                raise ValueError(f"{arm} arm needs >= 3 segments, got {len(segments)}")
            if not (1 <= self.exit_boundary < len(segments)):
                raise ValueError(
                    f"exit_boundary must be in [1, {len(segments) - 1}] for the {arm} arm, "
                    f"got {self.exit_boundary}"
                )

        shell_arms = [arm for arm in ARMS if self._shell_segments(arm)]
        if len(shell_arms) != 1:
            raise ValueError(f"Exactly one arm must contain the shell, found {len(shell_arms)}")
        segments = self._shell_segments(shell_arms[0])
        if len(segments) != 1:
            raise ValueError(f"Shell arm must have exactly one through_shell segment, found {len(segments)}")
        diameter = 2 * self.shell.radius
        if abs(segments[0].length - diameter) > SHELL_LENGTH_TOLERANCE * diameter:
            raise ValueError(
                f"through_shell segment length {segments[0].length!r} m != shell diameter {diameter!r} m"
            )

    def arm(self, name: str) -> Tuple[PathSegment, ...]:
        if name == "upper":
            return self.upper_arm
        if name == "lower":
            return self.lower_arm
        raise ValueError(f"Unknown arm '{name}' (upper | lower)")

    def _shell_segments(self, arm: str) -> List[PathSegment]:
        return [s for s in self.arm(arm) if s.tag is SegmentTag.THROUGH_SHELL]

    @property
    def shell_arm(self) -> str:
        return "upper" if self._shell_segments("upper") else "lower"

    def loop_length(self, arm: str) -> float:
        return math.fsum(s.length for s in self.arm(arm))

    def boundary_position(self, arm: str, index: int) -> float:
        return math.fsum(s.length for s in self.arm(arm)[:index])

    def per_cycle_difference(self) -> float:
        """L_upper - L_lower（fsum で厳密に近い差）"""
        return math.fsum([s.length for s in self.upper_arm] + [-s.length for s in self.lower_arm])


@dataclass(frozen=True)
class MirrorOp:
    mirror: str
    action: MirrorAction
    cycle: int
    fraction: float

    def __post_init__(self):
        if not (0 <= self.fraction < 1):
            raise ValueError(f"fraction must be in [0,1), got {self.fraction!r} ({self.mirror})")
        if int(self.cycle) != self.cycle:
            raise ValueError(f"cycle must be an integer, got {self.cycle!r} ({self.mirror})")


@dataclass(frozen=True)
class MirrorSchedule:
    """
    可動ミラー操作

    m11/m21 は最初から挿入済み（cycle 0）。operations には
    m14/m24 の挿入と m11/m21 の除去をちょうど 1 回ずつ含める。
    """
    winding: int
    operations: Tuple[MirrorOp, ...]

    def __post_init__(self):
        if int(self.winding) != self.winding or self.winding < 1:
            raise ValueError(f"Winding number must be an integer >= 1, got {self.winding!r}")
        object.__setattr__(self, "winding", int(self.winding))
        object.__setattr__(self, "operations", tuple(self.operations))
        expected = {(ENTRY_MIRRORS[a], MirrorAction.INSERT) for a in ARMS}
        expected |= {(EXIT_MIRRORS[a], MirrorAction.REMOVE) for a in ARMS}
        seen = [(op.mirror, op.action) for op in self.operations]
        if sorted(seen, key=str) != sorted(expected, key=str):
            raise ValueError(
                "Schedule must insert m14, m24 and remove m11, m21 exactly once each, got "
                + ", ".join(f"{m}:{a.value}" for m, a in seen)
            )

    def op(self, mirror: str) -> MirrorOp:
        return next(op for op in self.operations if op.mirror == mirror)


def default_removal(layout: InterferometerLayout, arm: str, winding: int) -> Tuple[int, float]:
    """
    出口ミラーを除去する (cycle, fraction)

    ミラーの反対側（半周ずれた位置）で、ちょうど winding 回球殻を通過した後に除去する。
    """
    f_exit = _exit_fraction(layout, arm)
    f_remove = (f_exit + 0.5) % 1.0
    exit_cycle = winding + (0 if _shell_before_exit(layout) else 1)
    cycle = exit_cycle if f_remove < f_exit else exit_cycle - 1
    return cycle, f_remove


def default_schedule(layout: InterferometerLayout, winding: int,
                     entry_insert: Tuple[int, float] = DEFAULT_ENTRY_INSERT) -> MirrorSchedule:
    ops = []
    for arm in ARMS:
        ops.append(MirrorOp(ENTRY_MIRRORS[arm], MirrorAction.INSERT, *entry_insert))
        cycle, fraction = default_removal(layout, arm, winding)
        ops.append(MirrorOp(EXIT_MIRRORS[arm], MirrorAction.REMOVE, cycle, fraction))
    return MirrorSchedule(winding=winding, operations=tuple(ops))


def _shell_before_exit(layout: InterferometerLayout) -> bool:
    """球殻区間（もう一方のアームでは同じ番号の置換区間）が出口境界より手前か"""
    index = next(i for i, s in enumerate(layout.arm(layout.shell_arm))
                 if s.tag is SegmentTag.THROUGH_SHELL)
    return index < layout.exit_boundary


def _exit_fraction(layout: InterferometerLayout, arm: str) -> float:
    return layout.boundary_position(arm, layout.exit_boundary) / layout.loop_length(arm)


@dataclass(frozen=True)
class TimingEvent:
    time: float
    arm: str
    mirror: str
    action: MirrorAction
    cycle: int
    fraction: float
    pulse_segment: Optional[int]


def _segment_at(layout: InterferometerLayout, arm: str, fraction: float) -> int:
    """ループ内の割合 fraction にある区間番号"""
    position = fraction * layout.loop_length(arm)
    cumulative = 0.0
    segments = layout.arm(arm)
    for i, s in enumerate(segments):
        cumulative += s.length
        if position < cumulative:
            return i
    return len(segments) - 1


def _occupied(layout: InterferometerLayout, arm: str, fraction: float, extent: float) -> Set[int]:
    """パルス（中心 fraction、空間長 extent）が掛かっている区間の集合"""
    loop = layout.loop_length(arm)
    half = 0.5 * extent / loop
    return {_segment_at(layout, arm, (fraction + d) % 1.0) for d in (-half, 0.0, half)}


def _adjacent(layout: InterferometerLayout, arm: str, boundary: int) -> Tuple[int, int]:
    n = len(layout.arm(arm))
    return (boundary - 1) % n, boundary % n


def _event_time(layout: InterferometerLayout, arm: str, cycle: int, fraction: float,
                constants: PhysConstants) -> float:
    t_in = layout.m1_bs1_distance / constants.c
    return t_in + ((cycle - 1) + fraction) * layout.loop_length(arm) / constants.c


def shell_passes(layout: InterferometerLayout, arm: str, removal: MirrorOp) -> Tuple[int, int]:
    """
    除去操作から (出口周回, 球殻区間の通過回数) を求める

    球殻のないアームでは置換区間（同じ位置の区間）を数える。
    """
    f_exit = _exit_fraction(layout, arm)
    exit_cycle = removal.cycle if removal.fraction < f_exit else removal.cycle + 1
    passes = (exit_cycle - 1) + (1 if _shell_before_exit(layout) else 0)
    return exit_cycle, max(passes, 0)


def exit_time(layout: InterferometerLayout, arm: str, removal: MirrorOp,
              constants: Optional[PhysConstants] = None) -> float:
    """パルスが出口ミラー位置からループを出る時刻"""
    kc = constants or default_constants()
    exit_cycle, _ = shell_passes(layout, arm, removal)
    return _event_time(layout, arm, exit_cycle, _exit_fraction(layout, arm), kc)


def validate_schedule(layout: InterferometerLayout, schedule: MirrorSchedule,
                      pulse: Optional[LightPulse] = None,
                      constants: Optional[PhysConstants] = None) -> List[TimingEvent]:
    """
    可動ミラー操作のタイムラインを作り、物理的整合性を検証する

    Returns:
        時刻順の TimingEvent（m14, m24 挿入と m11, m21 除去の 4 件）
    Raises:
        TimingConflict: パルスがミラーの隣接区間にいる / 通過回数が winding と違う 等
    """
    kc = constants or default_constants()
    events = []
    for arm in ARMS:
        n_seg = len(layout.arm(arm))
        extent = pulse.duration * kc.c if pulse is not None else 0.0
        entry = schedule.op(ENTRY_MIRRORS[arm])
        removal = schedule.op(EXIT_MIRRORS[arm])

        # 入口ミラー: パルスが入ってから最初に戻るまでの間
        if entry.cycle != 1:
            raise TimingConflict(
                f"{entry.mirror} must be inserted after the pulse enters and before its first return",
                entry.cycle, arm,
            )
        seg = _segment_at(layout, arm, entry.fraction)
        if _occupied(layout, arm, entry.fraction, extent) & set(_adjacent(layout, arm, 0)):
            raise TimingConflict(
                f"{entry.mirror} inserted while the pulse is on adjacent segment {seg}", entry.cycle, arm,
            )
        events.append(TimingEvent(
            time=_event_time(layout, arm, entry.cycle, entry.fraction, kc), arm=arm,
            mirror=entry.mirror, action=MirrorAction.INSERT, cycle=entry.cycle,
            fraction=entry.fraction, pulse_segment=seg,
        ))

        # 出口ミラー: winding 回通過した後、パルスがミラーにいない時に除去
        exit_cycle, passes = shell_passes(layout, arm, removal)
        if passes != schedule.winding:
            raise TimingConflict(
                f"{removal.mirror} removal gives {passes} shell passes, expected winding {schedule.winding}",
                removal.cycle, arm,
            )
        seg = _segment_at(layout, arm, removal.fraction) if removal.cycle >= 1 else None
        if seg is not None and (
            _occupied(layout, arm, removal.fraction, extent) & set(_adjacent(layout, arm, layout.exit_boundary))
        ):
            raise TimingConflict(
                f"{removal.mirror} removed while the pulse is on adjacent segment {seg}", removal.cycle, arm,
            )
        if (removal.cycle, removal.fraction) <= (entry.cycle, entry.fraction) and schedule.winding > 1:
            raise TimingConflict(
                f"{removal.mirror} removed before {entry.mirror} closes the loop", removal.cycle, arm,
            )
        events.append(TimingEvent(
            time=_event_time(layout, arm, removal.cycle, removal.fraction, kc), arm=arm,
            mirror=removal.mirror, action=MirrorAction.REMOVE, cycle=removal.cycle,
            fraction=removal.fraction, pulse_segment=seg,
        ))
        logger.debug(f"[SIM] {arm} arm: exit at cycle {exit_cycle}, {passes} passes ({n_seg} segments)")

    events.sort(key=lambda e: (e.time, e.arm))
    return events


@dataclass(frozen=True)
class SimOutcome:
    topological_phase: float
    dynamical_phase_upper: float
    dynamical_phase_lower: float
    # k·n_w·(L_upper - L_lower) を直接計算した値。upper - lower の引き算は大きな n_w で桁落ちする
    dynamical_difference: float
    net_phase: float
    port_intensities: Tuple[float, float]
    visibility: float
    transmission: float
    total_duration: float
    expected_counts: Optional[Tuple[float, float]]
    events: Tuple[TimingEvent, ...] = ()
    warnings: Tuple[str, ...] = ()
    extra_phase: float = 0.0

    def phase_balance(self) -> float:
        """topological + dynamical_difference + extra_phase（net_phase と一致する）"""
        return self.topological_phase + self.dynamical_difference + self.extra_phase

    @property
    def i_bright(self) -> float:
        return self.port_intensities[0]

    @property
    def i_dark(self) -> float:
        return self.port_intensities[1]


def transmission(layout: InterferometerLayout, winding: int) -> float:
    """T = mirror_loss^(2·reflections_per_cycle·n_w)（対数で計算、アンダーフロー時 0）"""
    if layout.mirror_loss == 1:
        return 1.0
    exponent = 2 * layout.reflections_per_cycle * winding * math.log(layout.mirror_loss)
    return math.exp(exponent)


def port_intensities(net_phase: float, transmitted: float = 1.0,
                     split_ratio: float = 0.5) -> Tuple[float, float]:
    """
    (I_bright, I_dark)

    I_dark = T·4s(1-s)·sin²(φ/2), I_bright = T - I_dark
    """
    contrast = 4 * split_ratio * (1 - split_ratio)
    dark = transmitted * contrast * math.sin(net_phase / 2) ** 2
    return transmitted - dark, dark


def wavenumber(pulse: LightPulse, eps0: float = 1.0) -> float:
    """k = 2π√ε₀/λ"""
    return 2 * math.pi * math.sqrt(eps0) / pulse.wavelength


def run_pulse(layout: InterferometerLayout, schedule: MirrorSchedule, pulse: LightPulse,
              mode: PhaseKind = PhaseKind.CLASSICAL, eps0: float = 1.0, extra_phase: float = 0.0,
              constants: Optional[PhysConstants] = None) -> SimOutcome:
    """
    1 パルスを干渉計に通す

    topological = n_w × (1 パス位相)、球殻が下側アームなら符号反転。
    dynamical = k·n_w·(ループ長)。共通の入出射経路は両アームで打ち消すので含めない。
    net = topological + k·n_w·(L_upper - L_lower) + extra_phase

    Raises:
        TimingConflict: スケジュール不整合
        ValueError: Quantum モードで mean_photons がない
    """
    kc = constants or default_constants()
    events = validate_schedule(layout, schedule, pulse, kc)
    winding = schedule.winding
    warnings = []

    per_pass = per_pass_phase(layout.shell, pulse, mode, eps0, kc)
    sign = 1.0 if layout.shell_arm == "upper" else -1.0
    topological = sign * per_pass * winding

    k = wavenumber(pulse, eps0)
    dyn_upper = k * winding * layout.loop_length("upper")
    dyn_lower = k * winding * layout.loop_length("lower")
    dyn_diff = k * winding * layout.per_cycle_difference()
    net = topological + dyn_diff + extra_phase

    T = transmission(layout, winding)
    if T == 0.0:
        msg = (f"Transmission underflow: mirror_loss={layout.mirror_loss!r} over "
               f"{2 * layout.reflections_per_cycle * winding} reflections leaves no light")
        warnings.append(msg)
    elif T < TRANSMISSION_WARN:
        warnings.append(f"Low transmission T = {T:.3g} (visibility below {TRANSMISSION_WARN})")
    bright, dark = port_intensities(net, T, layout.bs_split_ratio)
    visibility = T * 4 * layout.bs_split_ratio * (1 - layout.bs_split_ratio)

    duration = max(exit_time(layout, arm, schedule.op(EXIT_MIRRORS[arm]), kc) for arm in ARMS)
    if duration > LONG_DURATION_WARN:
        warnings.append(f"Long circulation: {duration:.4g} s ({duration / 3600:.3g} h)")

    photons = pulse.photon_count(kc)
    expected = (photons * bright, photons * dark) if photons is not None else None

    for w in warnings:
        logger.warning(f"[SIM] {w}")

    return SimOutcome(
        topological_phase=topological,
        dynamical_phase_upper=dyn_upper,
        dynamical_phase_lower=dyn_lower,
        dynamical_difference=dyn_diff,
        net_phase=net,
        port_intensities=(bright, dark),
        visibility=visibility,
        transmission=T,
        total_duration=duration,
        expected_counts=expected,
        events=tuple(events),
        warnings=tuple(warnings),
        extra_phase=extra_phase,
    )


@dataclass(frozen=True)
class CancellationReport:
    residual_phase: float              # 1 周あたり k·(L_upper - L_lower)
    total_residual_phase: float        # × n_w
    dominant_segment: Optional[str]
    topological_ratio: Optional[float]  # |residual| / |1 パス位相|


def dynamical_cancellation_report(layout: InterferometerLayout, schedule: MirrorSchedule,
                                  pulse: LightPulse, mode: PhaseKind = PhaseKind.CLASSICAL,
                                  eps0: float = 1.0,
                                  constants: Optional[PhysConstants] = None) -> CancellationReport:
    """
    両アームの動的位相の打ち消し残差と、最大の非対応区間

    区間は長さの多重集合として対応づける（through_shell も同じ長さの free 区間と対応）。
    """
    k = wavenumber(pulse, eps0)
    residual = k * layout.per_cycle_difference()

    unmatched = []
    remaining = [s for s in layout.lower_arm]
    for seg in layout.upper_arm:
        match = next((i for i, other in enumerate(remaining) if other.length == seg.length), None)
        if match is None:
            unmatched.append(seg)
        else:
            remaining.pop(match)
    unmatched.extend(remaining)
    dominant = max(unmatched, key=lambda s: s.length) if unmatched else None
    dominant_name = (dominant.label or dominant.tag.value) if dominant else None

    per_pass = per_pass_phase(layout.shell, pulse, mode, eps0, constants)
    ratio = abs(residual) / per_pass if per_pass > 0 else None
    return CancellationReport(
        residual_phase=residual,
        total_residual_phase=residual * schedule.winding,
        dominant_segment=dominant_name,
        topological_ratio=ratio,
    )


def sample_counts(outcome: SimOutcome, pulse: LightPulse, seed: int, shots: int = 1,
                  constants: Optional[PhysConstants] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    各ポートの光子数を Poisson(N̄·I_port) でサンプリング

    Philox（カウンタベース）なので seed ごとに再現可能。
    Returns:
        (counts_bright, counts_dark) それぞれ shape (shots,)
    Raises:
        ValueError: 平均光子数が不明
    """
    photons = pulse.photon_count(constants)
    if photons is None:
        raise ValueError("Photon sampling requires pulse.mean_photons (or pulse energy)")
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    means = np.array([photons * outcome.i_bright, photons * outcome.i_dark])
    counts = rng.poisson(means, size=(shots, 2))
    return counts[:, 0], counts[:, 1]


def layout_from_geometry(shell: ShellSpec, m1_bs1_distance: float, gap: float = 0.1,
                         height: float = 1.0, matched: bool = False, shell_arm: str = "upper",
                         mirror_loss: float = 1.0, bs_split_ratio: float = 0.5,
                         reflections_per_cycle: int = DEFAULT_REFLECTIONS_PER_CYCLE) -> InterferometerLayout:
    """
    矩形ループ 2 本の幾何からレイアウトを作る

    幅 w = 2·gap + 2R、高さ height。球殻のないアームの戻り区間 (m24-m21 / m14-m11) は
    球殻半径が距離 D に張る角だけ傾き、長さ w·√(1+(R/D)²) になる（matched なら w）。
    """
    if gap <= 0 or height <= 0:
        raise ValueError(f"gap and height must be > 0, got gap={gap!r}, height={height!r}")
    if shell_arm not in ARMS:
        raise ValueError(f"shell_arm must be upper or lower, got '{shell_arm}'")
    R = shell.radius
    width = 2 * gap + 2 * R
    if matched or m1_bs1_distance == 0:
        inclined = width
    else:
        inclined = width * math.hypot(1.0, R / m1_bs1_distance)

    def loop(prefix: str, with_shell: bool) -> Tuple[PathSegment, ...]:
        a, b, c, d = (f"m{prefix}{i}" for i in (1, 2, 3, 4))
        return (
            PathSegment(width if with_shell else inclined, SegmentTag.FREE, f"{d}-{a}"),
            PathSegment(height, SegmentTag.FREE, f"{a}-{b}"),
            PathSegment(gap, SegmentTag.FREE, f"{b}-shell"),
            PathSegment(2 * R, SegmentTag.THROUGH_SHELL if with_shell else SegmentTag.FREE,
                        "shell" if with_shell else "shell-bypass"),
            PathSegment(gap, SegmentTag.FREE, f"shell-{c}"),
            PathSegment(height, SegmentTag.FREE, f"{c}-{d}"),
        )

    return InterferometerLayout(
        upper_arm=loop("1", shell_arm == "upper"),
        lower_arm=loop("2", shell_arm == "lower"),
        shell=shell,
        m1_bs1_distance=m1_bs1_distance,
        bs_split_ratio=bs_split_ratio,
        mirror_loss=mirror_loss,
        reflections_per_cycle=reflections_per_cycle,
        exit_boundary=1,
    )


def height_for_cycle(shell: ShellSpec, cycle_path_length: float, gap: float = 0.1) -> float:
    """ループ長 2w + 2·height が cycle_path_length になる高さ"""
    width = 2 * gap + 2 * shell.radius
    height = (cycle_path_length - 2 * width) / 2
    if height <= 0:
        raise ValueError(
            f"cycle_path_length {cycle_path_length!r} m too short for shell width {width!r} m"
        )
    return height


def exchange_arms(layout: InterferometerLayout) -> InterferometerLayout:
    """上下のアームを入れ替える（球殻の位置も入れ替わる）"""
    return replace(layout, upper_arm=layout.lower_arm, lower_arm=layout.upper_arm)


def fringe_sweep(layout: InterferometerLayout, schedule: MirrorSchedule, pulse: LightPulse,
                 mode: PhaseKind = PhaseKind.CLASSICAL, points: int = 101, eps0: float = 1.0,
                 constants: Optional[PhysConstants] = None) -> pd.DataFrame:
    """
    人工位相 δ を [0, 2π] で掃引した干渉縞

    列: delta, net_phase, I_bright, I_dark
    """
    if points < 2:
        raise ValueError(f"Fringe sweep needs >= 2 points, got {points}")
    base = run_pulse(layout, schedule, pulse, mode, eps0, constants=constants)
    rows = []
    for delta in np.linspace(0.0, 2 * np.pi, points):
        net = base.net_phase + float(delta)
        bright, dark = port_intensities(net, base.transmission, layout.bs_split_ratio)
        rows.append({"delta": float(delta), "net_phase": net, "I_bright": bright, "I_dark": dark})
    return pd.DataFrame(rows, columns=["delta", "net_phase", "I_bright", "I_dark"])
