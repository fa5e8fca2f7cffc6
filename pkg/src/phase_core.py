"""
Gravity-induced phase shift (closed forms)

薄い球殻内部の一定ポテンシャル -GM/R を光が通過する際の
相互作用エネルギー・実効誘電率・屈折率・古典/量子位相シフトを計算する。

- 古典:  φ_cl = (2π/λ)(2R)(n - √ε₀) ≈ 2πGM√ε₀/(λc²)
- 量子:  φ_qm = |H_int|·t/ħ = 4πGMN̄/(λc²)   (ε₀ = 1)

位相はデフォルトで一次近似の閉形式を使う（弱場で n - √ε₀ を素直に
引き算すると桁落ちするため）。exact モードは補償付きの平方根差を使う。
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from src.units import PhysConstants, default_constants

logger = logging.getLogger(__name__)

# --- Config ---
THIN_SHELL_TOLERANCE = 0.01       # mass vs 4πR²tρ の許容相対誤差
THIN_SHELL_RATIO_WARN = 0.1       # thickness/radius がこれを超えたら警告
WEAK_FIELD_LIMIT = 1e-3           # GM/(Rc²) の弱場判定しきい値
PULSE_CONSISTENCY_TOLERANCE = 1e-9
DEFAULT_PULSE_DURATION = 1e-12    # ピコ秒パルスレーザー


class Statistics(Enum):
    CLASSICAL_POISSONIAN = "classical-poissonian"
    COHERENT_LASER = "coherent-laser"


class PhaseKind(Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"


@dataclass(frozen=True)
class ShellSpec:
    """
    薄い球殻（質量・半径・任意で厚さと密度）

    mass = 0 は縮退ケースとして許容し（位相 0）、警告のみ出す。
    """
    mass: float
    radius: float
    thickness: Optional[float] = None
    density: Optional[float] = None

    def __post_init__(self):
        if not (self.radius > 0):
            raise ValueError(f"Shell radius must be > 0, got {self.radius!r}")
        if self.mass < 0:
            raise ValueError(f"Shell mass must be >= 0, got {self.mass!r}")
        if self.mass == 0:
            logger.warning("[PHASE] Shell mass is 0: degenerate shell, all phases vanish")
        if self.thickness is not None and self.thickness < 0:
            raise ValueError(f"Shell thickness must be >= 0, got {self.thickness!r}")
        if self.density is not None and self.density < 0:
            raise ValueError(f"Shell density must be >= 0, got {self.density!r}")

        if self.thickness is not None and self.density is not None:
            geometric = 4 * math.pi * self.radius ** 2 * self.thickness * self.density
            if abs(self.mass - geometric) > THIN_SHELL_TOLERANCE * max(self.mass, geometric):
                raise ValueError(
                    f"Shell mass {self.mass:.6g} kg inconsistent with 4πR²tρ = {geometric:.6g} kg "
                    f"(tolerance {THIN_SHELL_TOLERANCE:.0%})"
                )
        if self.thickness is not None and self.thickness > THIN_SHELL_RATIO_WARN * self.radius:
            logger.warning(
                f"[PHASE] thickness/radius = {self.thickness / self.radius:.3f}: "
                "thin-shell approximation is questionable"
            )

    def compactness(self, constants: Optional[PhysConstants] = None) -> float:
        """GM/(Rc²)"""
        k = constants or default_constants()
        return k.G * self.mass / (self.radius * k.c2)

    def is_weak_field(self, constants: Optional[PhysConstants] = None) -> bool:
        return self.compactness(constants) < WEAK_FIELD_LIMIT


@dataclass(frozen=True)
class LightPulse:
    """
    光パルス（波長、エネルギー / 平均光子数 N̄、統計）

    energy と mean_photons の片方だけ与えられた場合、もう片方は
    E = N̄hc/λ から導出できる（photon_count / total_energy）。
    """
    wavelength: float
    energy: Optional[float] = None
    mean_photons: Optional[float] = None
    statistics: Statistics = Statistics.CLASSICAL_POISSONIAN
    duration: float = DEFAULT_PULSE_DURATION

    def __post_init__(self):
        if not (self.wavelength > 0):
            raise ValueError(f"Wavelength must be > 0, got {self.wavelength!r}")
        if self.energy is not None and self.energy < 0:
            raise ValueError(f"Pulse energy must be >= 0, got {self.energy!r}")
        if self.mean_photons is not None and self.mean_photons < 0:
            raise ValueError(f"Mean photon number must be >= 0, got {self.mean_photons!r}")
        if self.duration < 0:
            raise ValueError(f"Pulse duration must be >= 0, got {self.duration!r}")
        if self.energy is not None and self.mean_photons is not None:
            expected = self.mean_photons * self.photon_energy()
            scale = max(abs(expected), abs(self.energy))
            if scale > 0 and abs(self.energy - expected) > PULSE_CONSISTENCY_TOLERANCE * scale:
                raise ValueError(
                    f"Pulse energy {self.energy:.9g} J inconsistent with N̄·hc/λ = {expected:.9g} J"
                )

    def photon_energy(self, constants: Optional[PhysConstants] = None) -> float:
        """hc/λ"""
        k = constants or default_constants()
        return k.h * k.c / self.wavelength

    def photon_count(self, constants: Optional[PhysConstants] = None) -> Optional[float]:
        if self.mean_photons is not None:
            return self.mean_photons
        if self.energy is not None:
            return self.energy / self.photon_energy(constants)
        return None

    def total_energy(self, constants: Optional[PhysConstants] = None) -> Optional[float]:
        if self.energy is not None:
            return self.energy
        if self.mean_photons is not None:
            return self.mean_photons * self.photon_energy(constants)
        return None

    def angular_frequency(self, constants: Optional[PhysConstants] = None) -> float:
        return angular_frequency(self.wavelength, constants)

    @property
    def regime(self) -> str:
        """古典極限は N̄ << 1 または Poisson 統計の古典光"""
        if self.statistics is Statistics.CLASSICAL_POISSONIAN:
            return "classical"
        if self.mean_photons is not None and self.mean_photons < 1:
            return "classical"
        return "quantum"


@dataclass(frozen=True)
class PhaseResult:
    phase: float
    kind: PhaseKind
    winding: int
    per_pass: float

    @property
    def breakdown(self):
        return self.per_pass, self.winding


def _check_winding(winding: int) -> int:
    if int(winding) != winding or winding < 1:
        raise ValueError(f"Winding number must be an integer >= 1, got {winding!r}")
    return int(winding)


def _result(per_pass: float, kind: PhaseKind, winding: int) -> PhaseResult:
    winding = _check_winding(winding)
    return PhaseResult(phase=per_pass * winding, kind=kind, winding=winding, per_pass=per_pass)


def angular_frequency(wavelength: float, constants: Optional[PhysConstants] = None) -> float:
    """ω = 2πc/λ"""
    k = constants or default_constants()
    return 2 * math.pi * k.c / wavelength


def interaction_energy(shell: ShellSpec, pulse_energy: float,
                       constants: Optional[PhysConstants] = None) -> float:
    """H_int = -(GM/R)(E/c²)  (常に <= 0)"""
    if pulse_energy < 0:
        raise ValueError(f"Pulse energy must be >= 0, got {pulse_energy!r}")
    k = constants or default_constants()
    return -(k.G * shell.mass / shell.radius) * (pulse_energy / k.c2)


def effective_permittivity(shell: ShellSpec, eps0: float = 1.0,
                           constants: Optional[PhysConstants] = None) -> float:
    """ε_g = ε₀·GM/(Rc²)"""
    _check_eps0(eps0)
    return eps0 * shell.compactness(constants)


def refractive_index(shell: ShellSpec, eps0: float = 1.0,
                     constants: Optional[PhysConstants] = None) -> float:
    """n = √(ε₀ + ε_g)（厳密形。弱場では float で √ε₀ に丸まる点に注意）"""
    return math.sqrt(eps0 + effective_permittivity(shell, eps0, constants))


def refractive_index_first_order(shell: ShellSpec, eps0: float = 1.0,
                                 constants: Optional[PhysConstants] = None) -> float:
    """n ≈ √ε₀(1 + GM/(2Rc²))"""
    _check_eps0(eps0)
    return math.sqrt(eps0) * (1 + shell.compactness(constants) / 2)


def index_excess(shell: ShellSpec, eps0: float = 1.0, exact: bool = True,
                 constants: Optional[PhysConstants] = None) -> float:
    """
    n - √ε₀ を桁落ちなしで返す

    exact=True:  √ε₀·x/(1 + √(1+x))   （x = GM/(Rc²)、√(1+x)-1 の有理化）
    exact=False: √ε₀·x/2               （一次近似）
    """
    _check_eps0(eps0)
    x = shell.compactness(constants)
    if exact:
        return math.sqrt(eps0) * x / (1 + math.sqrt(1 + x))
    return math.sqrt(eps0) * x / 2


def classical_phase(shell: ShellSpec, pulse: LightPulse, eps0: float = 1.0, winding: int = 1,
                    exact: bool = False, constants: Optional[PhysConstants] = None) -> PhaseResult:
    """
    古典光の重力誘起トポロジカル位相

    exact=False: 2πGM√ε₀/(λc²)
    exact=True:  (2π/λ)(2R)(n - √ε₀) を index_excess で評価
    パルスのエネルギーには依存しない（真空の線形性）。
    """
    k = constants or default_constants()
    _check_eps0(eps0)
    if exact:
        per_pass = (2 * math.pi / pulse.wavelength) * (2 * shell.radius) * index_excess(shell, eps0, True, k)
    else:
        per_pass = 2 * math.pi * k.G * shell.mass * math.sqrt(eps0) / (pulse.wavelength * k.c2)
    return _result(per_pass, PhaseKind.CLASSICAL, winding)


def quantum_phase(shell: ShellSpec, pulse: LightPulse, transit: Optional[float] = None,
                  winding: int = 1, method: str = "closed_form",
                  constants: Optional[PhysConstants] = None) -> PhaseResult:
    """
    レーザーパルスの位相（Schrödinger 形式からの予言、ε₀ = 1）

    Args:
        transit: 球殻内の通過時間。None なら 2R/c（"hamiltonian" のみ）
        method: "closed_form" -> 4πGMN̄/(λc²)
                "hamiltonian" -> |H_int|·t/ħ, E = N̄hc/λ
    Raises:
        ValueError: mean_photons が無い、closed_form に transit を渡した
    """
    if pulse.mean_photons is None:
        raise ValueError("quantum_phase requires pulse.mean_photons")
    if transit is not None and method == "closed_form":
        raise ValueError("transit applies only to method='hamiltonian' (closed_form assumes 2R/c)")
    k = constants or default_constants()
    n_bar = pulse.mean_photons

    if method == "closed_form":
        per_pass = 4 * math.pi * k.G * shell.mass * n_bar / (pulse.wavelength * k.c2)
    elif method == "hamiltonian":
        t = transit_time(shell, k) if transit is None else transit
        if t < 0:
            raise ValueError(f"Transit time must be >= 0, got {t!r}")
        pulse_energy = n_bar * k.h * k.c / pulse.wavelength
        per_pass = abs(interaction_energy(shell, pulse_energy, k)) * t / k.hbar
    else:
        raise ValueError(f"Unknown method '{method}' (closed_form | hamiltonian)")
    return _result(per_pass, PhaseKind.QUANTUM, winding)


def photon_mass_parameter(omega: float, constants: Optional[PhysConstants] = None) -> float:
    """m = sħω/c²（s = 2 はスピン縮退度）"""
    if not (omega > 0):
        raise ValueError(f"Angular frequency must be > 0, got {omega!r}")
    k = constants or default_constants()
    return 2 * k.hbar * omega / k.c2


def shell_mass_from_geometry(radius: float, thickness: float, density: float) -> float:
    """薄殻近似 M = 4πR²tρ"""
    for name, value in (("radius", radius), ("thickness", thickness), ("density", density)):
        if value < 0:
            raise ValueError(f"{name} must be >= 0, got {value!r}")
    result = 4 * math.pi * radius ** 2 * thickness * density
    if result == 0:
        logger.warning("[PHASE] Degenerate shell geometry: zero mass")
    return result


def transit_time(shell: ShellSpec, constants: Optional[PhysConstants] = None) -> float:
    """球殻の直径を真空中で横切る時間 2R/c"""
    k = constants or default_constants()
    return 2 * shell.radius / k.c


def _check_eps0(eps0: float):
    if not (eps0 > 0):
        raise ValueError(f"eps0 must be > 0, got {eps0!r}")


def per_pass_phase(shell: ShellSpec, pulse: LightPulse, mode: PhaseKind, eps0: float = 1.0,
                   constants: Optional[PhysConstants] = None) -> float:
    """モードに応じた 1 パスあたりの位相（量子は ε₀ = 1 固定）"""
    if mode is PhaseKind.QUANTUM:
        return quantum_phase(shell, pulse, constants=constants).per_pass
    return classical_phase(shell, pulse, eps0=eps0, constants=constants).per_pass
