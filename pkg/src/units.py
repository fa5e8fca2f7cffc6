"""
Physical constants & dimensioned scalars

全モジュール共通の単位系（SI）と物理定数を定義する。
定数はソースに固定し、シナリオファイルまたは環境変数で上書き可能。

ε₀ は相対誘電率（無次元、既定値 1）として扱う。
"""
import math
import os
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Union

import yaml
from scipy import constants as sc

# --- Config ---
CONSTANTS_ENV_VAR = "GRAVPHASE_CONSTANTS"

# scipy.constants (CODATA 2018) をそのまま格納値とする
DEFAULT_G = sc.G            # 6.67430e-11 m^3 kg^-1 s^-2
DEFAULT_C = sc.c            # 299792458 m/s
DEFAULT_HBAR = sc.hbar      # 1.054571817e-34 J s

# 定数上書きブロックで要求する単位表記
CONSTANT_UNITS = {
    "G": "m^3 kg^-1 s^-2",
    "c": "m/s",
    "hbar": "J s",
}


@dataclass(frozen=True)
class PhysConstants:
    """G, c, ħ, h（h は常に 2π·ħ として保持）"""
    G: float = DEFAULT_G
    c: float = DEFAULT_C
    hbar: float = DEFAULT_HBAR
    h: float = field(init=False)

    def __post_init__(self):
        for name in ("G", "c", "hbar"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"Physical constant {name} must be positive and finite, got {value!r}")
        object.__setattr__(self, "h", 2 * math.pi * self.hbar)

    @property
    def c2(self) -> float:
        return self.c * self.c

    def with_overrides(self, overrides: Dict[str, float]) -> "PhysConstants":
        unknown = set(overrides) - set(CONSTANT_UNITS)
        if unknown:
            raise ValueError(f"Unknown constant(s): {', '.join(sorted(unknown))}")
        return replace(self, **overrides)


def default_constants() -> PhysConstants:
    """CODATA 準拠の既定定数を返す"""
    return PhysConstants()


def constants_from_env(base: Optional[PhysConstants] = None) -> PhysConstants:
    """
    環境変数 GRAVPHASE_CONSTANTS が指す YAML から定数を読み込む

    ファイル形式は scenario の constants ブロックと同じ
    （例: ``c: "2.998e8 m/s"``）。未設定なら base をそのまま返す。
    """
    base = base or default_constants()
    path = os.getenv(CONSTANTS_ENV_VAR)
    if not path:
        return base
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if "constants" in data:
        data = data["constants"]
    return base.with_overrides(parse_constant_block(data))


def parse_constant_block(block: Dict[str, str]) -> Dict[str, float]:
    """constants ブロック（単位付き文字列）を SI の float 辞書に変換"""
    values = {}
    for name, text in block.items():
        if name not in CONSTANT_UNITS:
            raise ValueError(f"Unknown constant '{name}' (allowed: {', '.join(CONSTANT_UNITS)})")
        number, unit = _split_number_unit(str(text))
        expected = CONSTANT_UNITS[name]
        if _normalize_unit(unit) != _normalize_unit(expected):
            raise ValueError(f"Constant '{name}' must be given in '{expected}', got '{unit}'")
        values[name] = number
    return values


class ScalarKind(Enum):
    MASS = "mass"
    LENGTH = "length"
    TIME = "time"
    ENERGY = "energy"
    PHASE = "phase"
    FREQUENCY = "frequency"
    PERMITTIVITY = "permittivity"
    PHOTON_NUMBER = "photon_number"
    DENSITY = "density"

    @property
    def si_unit(self) -> str:
        return _SI_UNITS[self]

    @property
    def non_negative(self) -> bool:
        return self is not ScalarKind.PHASE


_SI_UNITS = {
    ScalarKind.MASS: "kg",
    ScalarKind.LENGTH: "m",
    ScalarKind.TIME: "s",
    ScalarKind.ENERGY: "J",
    ScalarKind.PHASE: "rad",
    ScalarKind.FREQUENCY: "rad/s",
    ScalarKind.PERMITTIVITY: "",
    ScalarKind.PHOTON_NUMBER: "",
    ScalarKind.DENSITY: "kg/m^3",
}

# 単位表記 -> SI 係数（FREQUENCY は角周波数 rad/s に換算）
UNIT_FACTORS = {
    ScalarKind.MASS: {"kg": 1.0, "g": sc.gram, "t": 1e3, "tonne": 1e3},
    ScalarKind.LENGTH: {
        "m": 1.0, "km": sc.kilo, "cm": sc.centi, "mm": sc.milli,
        "um": sc.micro, "nm": sc.nano, "angstrom": sc.angstrom, "Å": sc.angstrom,
    },
    ScalarKind.TIME: {
        "s": 1.0, "ms": sc.milli, "us": sc.micro, "ns": sc.nano, "ps": sc.pico,
        "fs": sc.femto, "min": sc.minute, "h": sc.hour, "hour": sc.hour,
    },
    ScalarKind.ENERGY: {"J": 1.0, "eV": sc.eV, "keV": sc.kilo * sc.eV, "erg": sc.erg},
    ScalarKind.PHASE: {"rad": 1.0, "mrad": sc.milli, "urad": sc.micro, "deg": sc.degree},
    ScalarKind.FREQUENCY: {
        "rad/s": 1.0, "Hz": 2 * math.pi, "kHz": 2 * math.pi * sc.kilo,
        "MHz": 2 * math.pi * sc.mega, "GHz": 2 * math.pi * sc.giga, "THz": 2 * math.pi * sc.tera,
    },
    ScalarKind.PERMITTIVITY: {"": 1.0},
    ScalarKind.PHOTON_NUMBER: {"": 1.0},
    ScalarKind.DENSITY: {"kg/m^3": 1.0, "kg/m3": 1.0, "g/cm^3": 1e3, "g/cm3": 1e3},
}


@dataclass(frozen=True)
class DimScalar:
    """
    次元付きスカラー（値は常に SI で保持）

    Args:
        value: SI 単位での値
        kind: ScalarKind
    """
    value: float
    kind: ScalarKind

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.kind.value} must be finite, got {self.value!r}")
        if self.kind.non_negative and self.value < 0:
            raise ValueError(f"{self.kind.value} must be >= 0, got {self.value!r}")

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        unit = self.kind.si_unit
        return f"{self.value:.17g} {unit}".rstrip()


_NUMBER_UNIT = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def _split_number_unit(text: str):
    match = _NUMBER_UNIT.match(text)
    if not match:
        raise ValueError(f"Cannot parse quantity '{text}' (expected '<number> <unit>')")
    return float(match.group(1)), match.group(2)


def _normalize_unit(unit: str) -> str:
    return " ".join(unit.replace("*", " ").split())


def parse_quantity(text: Union[str, int, float], kind: ScalarKind) -> DimScalar:
    """
    "3.3 m" / "5000 angstrom" のような単位付き文字列を DimScalar に変換する

    無次元量（PERMITTIVITY, PHOTON_NUMBER）は単位なしの数値のみ受け付ける。
    次元量で単位が省略された場合はエラー。

    Raises:
        ValueError: 数値が読めない / 単位が無い / 単位の種類が違う
    """
    table = UNIT_FACTORS[kind]
    if isinstance(text, bool):
        raise ValueError(f"Expected a {kind.value} quantity, got a boolean")
    if isinstance(text, (int, float)):
        if "" not in table:
            raise ValueError(f"{kind.value} value {text!r} needs an explicit unit (e.g. '{text} {kind.si_unit}')")
        return DimScalar(float(text), kind)

    number, unit = _split_number_unit(str(text))
    unit = _normalize_unit(unit)
    if unit not in table:
        allowed = ", ".join(repr(u) for u in table)
        if not unit:
            raise ValueError(f"{kind.value} value '{text}' needs an explicit unit (one of {allowed})")
        raise ValueError(f"Unknown {kind.value} unit '{unit}' in '{text}' (allowed: {allowed})")
    return DimScalar(number * table[unit], kind)
