"""
Report writers

コンソール表示（バナー + key: value）、CSV（17 桁）、JSON の出力。
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# --- Config ---
BANNER_WIDTH = 60
FLOAT_FORMAT = "%.17g"


def banner(title: str):
    print("=" * BANNER_WIDTH)
    print(title)
    print("=" * BANNER_WIDTH)


def print_section(title: str, values: Mapping[str, Any]):
    """
    key: value の一覧を表示

    float は 6 桁の指数表記、それ以外は str()。
    """
    print(f"\n[{title}]")
    width = max((len(k) for k in values), default=0)
    for key, value in values.items():
        print(f"  {key:<{width}} : {format_value(value)}")


def format_value(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6e}"
    if isinstance(value, (tuple, list)):
        return "(" + ", ".join(format_value(v) for v in value) + ")"
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "value") and not isinstance(value, (int, str)):
        return value.value
    return value


def to_json(payload: Mapping[str, Any]) -> str:
    """JSON 文字列（float は repr による完全精度）"""
    return json.dumps(_jsonable(payload), ensure_ascii=False, indent=2)


def print_json(payload: Mapping[str, Any]):
    print(to_json(payload))


def write_csv(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """float を 17 有効桁で書き出す（同じ入力なら同じバイト列）"""
    path = Path(path)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"[REPORT] CSV written: {path} ({len(df)} rows)")
    return path
