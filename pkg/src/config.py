"""
Scenario file (YAML)

シナリオファイルの読み込み・書き出し。キーは厳密に検査し、
次元量はすべて単位付き文字列（"3.3 m", "5000 angstrom"）で受け付ける。

セクション: name, notes, constants, shell, pulse, design, layout, schedule, evolution
"paper:<name>" で組み込みシナリオを参照できる。
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from src.designer import PAPER_SCENARIO_NOTES, Scenario, paper_scenario
from src.interferometer import (
    ARMS, DEFAULT_ENTRY_INSERT, ENTRY_MIRRORS, EXIT_MIRRORS, InterferometerLayout,
    MirrorAction, MirrorOp, MirrorSchedule, default_removal, height_for_cycle,
    layout_from_geometry,
)
from src.kdp_field import Coupling, DEFAULT_GRID, Integrator
from src.phase_core import LightPulse, PhaseKind, ShellSpec, Statistics
from src.units import (
    CONSTANT_UNITS, PhysConstants, ScalarKind, constants_from_env, parse_constant_block,
    parse_quantity,
)

logger = logging.getLogger(__name__)

# --- Config ---
PAPER_PREFIX = "paper:"
SHIPPED_DIR = Path(__file__).parent.parent / "scenarios"

SECTION_KEYS = {
    "top": {"name", "notes", "constants", "shell", "pulse", "design", "layout", "schedule", "evolution"},
    "shell": {"mass", "radius", "thickness", "density"},
    "pulse": {"wavelength", "energy", "mean_photons", "statistics", "duration"},
    "design": {"mode", "winding", "cycle_path_length", "eps0", "reflections_per_cycle", "min_visibility"},
    "layout": {"m1_bs1_distance", "gap", "height", "matched", "shell_arm", "mirror_loss", "bs_split_ratio"},
    "schedule": {"entry_insert", "exit_remove"},
    "evolution": {"grid", "dimensions", "spacing", "dt", "steps", "integrator", "potential",
                  "coupling", "mode_number", "polarization", "mass_param"},
}
REQUIRED_KEYS = {
    "shell": {"mass", "radius"},
    "pulse": {"wavelength"},
    "design": {"mode", "winding", "cycle_path_length"},
}


class ConfigError(ValueError):
    """シナリオファイルの不正（行・列が分かる場合はメッセージに含む）"""


@dataclass(frozen=True)
class LayoutSpec:
    m1_bs1_distance: float
    gap: float = 0.1
    height: Optional[float] = None
    matched: bool = False
    shell_arm: str = "upper"
    mirror_loss: float = 1.0
    bs_split_ratio: float = 0.5


@dataclass(frozen=True)
class ScheduleSpec:
    entry_insert: tuple = DEFAULT_ENTRY_INSERT
    exit_remove: Dict[str, tuple] = field(default_factory=dict)


@dataclass(frozen=True)
class EvolutionSpec:
    grid: int = DEFAULT_GRID
    dimensions: int = 1
    spacing: float = 1.0
    dt: Optional[float] = None
    steps: int = 100
    integrator: Integrator = Integrator.SPECTRAL_EXACT
    potential: float = 0.0
    coupling: Coupling = Coupling.DYNAMICAL_IDENTITY
    mode_number: int = 1
    polarization: tuple = (0.0, 1.0, 0.0)
    mass_param: float = 1.0


@dataclass(frozen=True)
class ScenarioFile:
    scenario: Scenario
    constants: PhysConstants
    constant_overrides: Dict[str, float] = field(default_factory=dict)
    layout: Optional[LayoutSpec] = None
    schedule: Optional[ScheduleSpec] = None
    evolution: Optional[EvolutionSpec] = None

    @property
    def name(self) -> str:
        return self.scenario.name

    def build_layout(self) -> InterferometerLayout:
        """layout セクション（無ければ既定値）から InterferometerLayout を作る"""
        spec = self.layout or LayoutSpec(m1_bs1_distance=100 * self.scenario.shell.radius)
        shell = self.scenario.shell
        height = spec.height
        if height is None:
            height = height_for_cycle(shell, self.scenario.cycle_path_length, spec.gap)
        return layout_from_geometry(
            shell, spec.m1_bs1_distance, gap=spec.gap, height=height, matched=spec.matched,
            shell_arm=spec.shell_arm, mirror_loss=spec.mirror_loss,
            bs_split_ratio=spec.bs_split_ratio,
            reflections_per_cycle=self.scenario.reflections_per_cycle,
        )

    def build_schedule(self, layout: InterferometerLayout) -> MirrorSchedule:
        spec = self.schedule or ScheduleSpec()
        winding = self.scenario.winding
        ops = []
        for arm in ARMS:
            ops.append(MirrorOp(ENTRY_MIRRORS[arm], MirrorAction.INSERT, *spec.entry_insert))
            removal = spec.exit_remove.get(arm) or default_removal(layout, arm, winding)
            ops.append(MirrorOp(EXIT_MIRRORS[arm], MirrorAction.REMOVE, *removal))
        return MirrorSchedule(winding=winding, operations=tuple(ops))


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def _check_keys(section: str, data: Any, path: str) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    unknown = set(data) - SECTION_KEYS[section]
    if unknown:
        raise ConfigError(
            f"{path}: unknown key(s) {', '.join(sorted(map(str, unknown)))} "
            f"(allowed: {', '.join(sorted(SECTION_KEYS[section]))})"
        )
    missing = REQUIRED_KEYS.get(section, set()) - set(data)
    if missing:
        raise ConfigError(f"{path}: missing key(s) {', '.join(sorted(missing))}")
    return data


def _quantity(data: Dict[str, Any], key: str, kind: ScalarKind, path: str,
              default: Optional[float] = None) -> Optional[float]:
    if key not in data or data[key] is None:
        return default
    try:
        return float(parse_quantity(data[key], kind))
    except ValueError as e:
        raise ConfigError(f"{path}.{key}: {e}") from e


def _signed_energy(data: Dict[str, Any], key: str, path: str) -> float:
    """符号付きエネルギー（H_int は負になりうる）"""
    if key not in data or data[key] is None:
        return 0.0
    text = str(data[key]).strip()
    sign = -1.0 if text.startswith("-") else 1.0
    magnitude = _quantity({key: text.lstrip("+-")}, key, ScalarKind.ENERGY, path)
    return sign * magnitude


def _as_float(data: Dict[str, Any], key: str, path: str, default: Optional[float] = None) -> Optional[float]:
    """無次元数。YAML 1.1 は '1e12' を文字列として読むので文字列も受け付ける"""
    if key not in data or data[key] is None:
        return default
    value = data[key]
    if isinstance(value, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got a boolean")
    try:
        return float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}.{key}: expected a dimensionless number, got {value!r}") from e


def _as_int(data: Dict[str, Any], key: str, path: str, default: Optional[int] = None) -> Optional[int]:
    value = _as_float(data, key, path)
    if value is None:
        return default
    if value != int(value):
        raise ConfigError(f"{path}.{key}: expected an integer, got {data[key]!r}")
    return int(value)


def _enum(enum_cls, data: Dict[str, Any], key: str, path: str, default):
    if key not in data:
        return default
    try:
        return enum_cls(str(data[key]))
    except ValueError as e:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ConfigError(f"{path}.{key}: '{data[key]}' is not one of {allowed}") from e


def _cycle_fraction(value: Any, path: str) -> tuple:
    if not isinstance(value, dict) or set(value) != {"cycle", "fraction"}:
        raise ConfigError(f"{path}: expected {{cycle: <int>, fraction: <0..1>}}")
    cycle = _as_int(value, "cycle", path)
    fraction = _as_float(value, "fraction", path)
    return cycle, fraction


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

def _parse_shell(data: Any) -> ShellSpec:
    d = _check_keys("shell", data, "shell")
    return ShellSpec(
        mass=_quantity(d, "mass", ScalarKind.MASS, "shell"),
        radius=_quantity(d, "radius", ScalarKind.LENGTH, "shell"),
        thickness=_quantity(d, "thickness", ScalarKind.LENGTH, "shell"),
        density=_quantity(d, "density", ScalarKind.DENSITY, "shell"),
    )


def _parse_pulse(data: Any) -> LightPulse:
    d = _check_keys("pulse", data, "pulse")
    kwargs = dict(
        wavelength=_quantity(d, "wavelength", ScalarKind.LENGTH, "pulse"),
        energy=_quantity(d, "energy", ScalarKind.ENERGY, "pulse"),
        mean_photons=_as_float(d, "mean_photons", "pulse"),
        statistics=_enum(Statistics, d, "statistics", "pulse", Statistics.CLASSICAL_POISSONIAN),
    )
    duration = _quantity(d, "duration", ScalarKind.TIME, "pulse")
    if duration is not None:
        kwargs["duration"] = duration
    return LightPulse(**kwargs)


def _parse_layout(data: Any) -> LayoutSpec:
    d = _check_keys("layout", data, "layout")
    if "m1_bs1_distance" not in d:
        raise ConfigError("layout: missing key m1_bs1_distance")
    matched = d.get("matched", False)
    if not isinstance(matched, bool):
        raise ConfigError(f"layout.matched: expected true/false, got {matched!r}")
    shell_arm = str(d.get("shell_arm", "upper"))
    if shell_arm not in ARMS:
        raise ConfigError(f"layout.shell_arm: expected upper or lower, got '{shell_arm}'")
    return LayoutSpec(
        m1_bs1_distance=_quantity(d, "m1_bs1_distance", ScalarKind.LENGTH, "layout"),
        gap=_quantity(d, "gap", ScalarKind.LENGTH, "layout", 0.1),
        height=_quantity(d, "height", ScalarKind.LENGTH, "layout"),
        matched=matched,
        shell_arm=shell_arm,
        mirror_loss=_as_float(d, "mirror_loss", "layout", 1.0),
        bs_split_ratio=_as_float(d, "bs_split_ratio", "layout", 0.5),
    )


def _parse_schedule(data: Any) -> ScheduleSpec:
    d = _check_keys("schedule", data, "schedule")
    entry = _cycle_fraction(d["entry_insert"], "schedule.entry_insert") if "entry_insert" in d \
        else DEFAULT_ENTRY_INSERT
    exit_remove = {}
    raw = d.get("exit_remove") or {}
    if not isinstance(raw, dict) or set(raw) - set(ARMS):
        raise ConfigError("schedule.exit_remove: expected a mapping with keys upper / lower")
    for arm, value in raw.items():
        exit_remove[arm] = _cycle_fraction(value, f"schedule.exit_remove.{arm}")
    return ScheduleSpec(entry_insert=entry, exit_remove=exit_remove)


def _parse_evolution(data: Any) -> EvolutionSpec:
    d = _check_keys("evolution", data, "evolution")
    dims = _as_int(d, "dimensions", "evolution", 1)
    if dims not in (1, 3):
        raise ConfigError(f"evolution.dimensions: expected 1 or 3, got {dims}")
    pol = d.get("polarization", [0.0, 1.0, 0.0])
    if not isinstance(pol, (list, tuple)) or len(pol) != 3:
        raise ConfigError("evolution.polarization: expected a list of 3 numbers")
    return EvolutionSpec(
        grid=_as_int(d, "grid", "evolution", DEFAULT_GRID),
        dimensions=dims,
        spacing=_quantity(d, "spacing", ScalarKind.LENGTH, "evolution", 1.0),
        dt=_quantity(d, "dt", ScalarKind.TIME, "evolution"),
        steps=_as_int(d, "steps", "evolution", 100),
        integrator=_enum(Integrator, d, "integrator", "evolution", Integrator.SPECTRAL_EXACT),
        potential=_signed_energy(d, "potential", "evolution"),
        coupling=_enum(Coupling, d, "coupling", "evolution", Coupling.DYNAMICAL_IDENTITY),
        mode_number=_as_int(d, "mode_number", "evolution", 1),
        polarization=tuple(float(p) for p in pol),
        mass_param=_as_float(d, "mass_param", "evolution", 1.0),
    )


def parse_scenario(data: Any, source: str = "<scenario>",
                   base_constants: Optional[PhysConstants] = None) -> ScenarioFile:
    """
    YAML から読んだ辞書を ScenarioFile に変換

    Raises:
        ConfigError: キー・単位・値の不正
    """
    d = _check_keys("top", data, source)
    for key in ("shell", "pulse", "design"):
        if key not in d:
            raise ConfigError(f"{source}: missing section '{key}'")

    overrides = {}
    if d.get("constants"):
        if not isinstance(d["constants"], dict):
            raise ConfigError("constants: expected a mapping")
        try:
            overrides = parse_constant_block(d["constants"])
        except ValueError as e:
            raise ConfigError(f"constants: {e}") from e
    constants = (base_constants or constants_from_env()).with_overrides(overrides)

    try:
        shell = _parse_shell(d["shell"])
        pulse = _parse_pulse(d["pulse"])
        design = _check_keys("design", d["design"], "design")
        scenario = Scenario(
            name=str(d.get("name", Path(source).stem)),
            shell=shell,
            pulse=pulse,
            winding=_as_int(design, "winding", "design"),
            mode=_enum(PhaseKind, design, "mode", "design", PhaseKind.CLASSICAL),
            cycle_path_length=_quantity(design, "cycle_path_length", ScalarKind.LENGTH, "design"),
            eps0=_as_float(design, "eps0", "design", 1.0),
            reflections_per_cycle=_as_int(design, "reflections_per_cycle", "design", 4),
            min_visibility=_as_float(design, "min_visibility", "design", 0.5),
            notes=str(d.get("notes", "") or ""),
        )
        layout = _parse_layout(d["layout"]) if d.get("layout") is not None else None
        schedule = _parse_schedule(d["schedule"]) if d.get("schedule") is not None else None
        evolution = _parse_evolution(d["evolution"]) if d.get("evolution") is not None else None
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from e

    return ScenarioFile(scenario=scenario, constants=constants, constant_overrides=overrides,
                        layout=layout, schedule=schedule, evolution=evolution)


def load_scenario(path: Union[str, Path], base_constants: Optional[PhysConstants] = None) -> ScenarioFile:
    """
    シナリオファイルを読む

    Raises:
        ConfigError: YAML 構文エラー（行・列付き）や内容の不正
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Scenario file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        if mark is not None:
            raise ConfigError(
                f"{path}: malformed YAML at line {mark.line + 1}, column {mark.column + 1}: "
                f"{getattr(e, 'problem', e)}"
            ) from e
        raise ConfigError(f"{path}: malformed YAML: {e}") from e
    if data is None:
        raise ConfigError(f"{path}: empty scenario file")
    logger.info(f"[CONFIG] Loaded scenario file: {path}")
    return parse_scenario(data, str(path), base_constants)


def resolve_scenario(ref: str, base_constants: Optional[PhysConstants] = None) -> ScenarioFile:
    """
    "paper:<name>" / シナリオ名 / ファイルパスを解決

    Raises:
        ConfigError: 未知の名前（利用可能な名前を列挙）
    """
    name = ref[len(PAPER_PREFIX):] if ref.startswith(PAPER_PREFIX) else ref
    if name in PAPER_SCENARIO_NOTES:
        shipped = SHIPPED_DIR / f"{name.replace('-', '_')}.yaml"
        if shipped.exists():
            return load_scenario(shipped, base_constants)
        constants = base_constants or constants_from_env()
        return ScenarioFile(scenario=paper_scenario(name), constants=constants)
    if ref.startswith(PAPER_PREFIX) or not Path(ref).exists():
        raise ConfigError(
            f"Unknown scenario '{ref}' (available: "
            + ", ".join(PAPER_PREFIX + n for n in PAPER_SCENARIO_NOTES) + ", or a YAML file path)"
        )
    return load_scenario(ref, base_constants)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _q(value: float, unit: str) -> str:
    return f"{value!r} {unit}"


def scenario_to_dict(sf: ScenarioFile) -> Dict[str, Any]:
    """再読み込みで同じシナリオになる辞書（数値は repr で完全精度）"""
    s = sf.scenario
    out: Dict[str, Any] = {"name": s.name}
    if s.notes:
        out["notes"] = s.notes
    if sf.constant_overrides:
        out["constants"] = {k: _q(v, CONSTANT_UNITS[k]) for k, v in sf.constant_overrides.items()}

    shell = {"mass": _q(s.shell.mass, "kg"), "radius": _q(s.shell.radius, "m")}
    if s.shell.thickness is not None:
        shell["thickness"] = _q(s.shell.thickness, "m")
    if s.shell.density is not None:
        shell["density"] = _q(s.shell.density, "kg/m^3")
    out["shell"] = shell

    pulse: Dict[str, Any] = {"wavelength": _q(s.pulse.wavelength, "m")}
    if s.pulse.energy is not None:
        pulse["energy"] = _q(s.pulse.energy, "J")
    if s.pulse.mean_photons is not None:
        pulse["mean_photons"] = float(s.pulse.mean_photons)
    pulse["statistics"] = s.pulse.statistics.value
    pulse["duration"] = _q(s.pulse.duration, "s")
    out["pulse"] = pulse

    out["design"] = {
        "mode": s.mode.value,
        "winding": int(s.winding),
        "cycle_path_length": _q(s.cycle_path_length, "m"),
        "eps0": float(s.eps0),
        "reflections_per_cycle": int(s.reflections_per_cycle),
        "min_visibility": float(s.min_visibility),
    }

    if sf.layout is not None:
        lay = sf.layout
        out["layout"] = {
            "m1_bs1_distance": _q(lay.m1_bs1_distance, "m"),
            "gap": _q(lay.gap, "m"),
            "matched": lay.matched,
            "shell_arm": lay.shell_arm,
            "mirror_loss": float(lay.mirror_loss),
            "bs_split_ratio": float(lay.bs_split_ratio),
        }
        if lay.height is not None:
            out["layout"]["height"] = _q(lay.height, "m")

    if sf.schedule is not None:
        sch = sf.schedule
        out["schedule"] = {
            "entry_insert": {"cycle": int(sch.entry_insert[0]), "fraction": float(sch.entry_insert[1])},
        }
        if sch.exit_remove:
            out["schedule"]["exit_remove"] = {
                arm: {"cycle": int(c), "fraction": float(f)} for arm, (c, f) in sch.exit_remove.items()
            }

    if sf.evolution is not None:
        ev = sf.evolution
        evo: Dict[str, Any] = {
            "grid": ev.grid, "dimensions": ev.dimensions, "spacing": _q(ev.spacing, "m"),
            "steps": ev.steps, "integrator": ev.integrator.value,
            "potential": _q(ev.potential, "J"), "coupling": ev.coupling.value,
            "mode_number": ev.mode_number, "polarization": [float(p) for p in ev.polarization],
            "mass_param": float(ev.mass_param),
        }
        if ev.dt is not None:
            evo["dt"] = _q(ev.dt, "s")
        out["evolution"] = evo
    return out


def dump_scenario(sf: ScenarioFile, path: Union[str, Path]) -> Path:
    path = Path(path)
    text = yaml.safe_dump(scenario_to_dict(sf), sort_keys=False, allow_unicode=True)
    path.write_text(text, encoding="utf-8")
    logger.info(f"[CONFIG] Scenario written: {path}")
    return path
