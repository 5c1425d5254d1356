"""実行結果の書き出し (report.json と各種 CSV)。

数値は 17 桁の有効数字で書き出し、他言語実装との比較でビット単位の一致を確認できるようにする。
"""
from __future__ import annotations

import csv
import json
import math
import os
import subprocess
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from mfsi import __version__
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

SPECTRUM_COLUMNS = ("re", "im", "residual", "energy_residual")
RESOLVENT_COLUMNS = ("k", "norm", "k_times_norm")
FIELDS_COLUMNS = ("k", "component", "x", "z", "re", "im")
MMS_COLUMNS = ("h", "error_u", "error_eta1", "error_d", "observed_order", "recipe")


def format_number(value: Any) -> str:
    """17 桁の有効数字で数値を文字列化する。整数と文字列はそのまま。"""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def version_string() -> str:
    """``git describe`` 形式のバージョン。git が使えない場合はパッケージのバージョンを返す。"""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError) as exc:
        logger.debug("git describe unavailable: %s", exc)
    return f"v{__version__}"


def to_jsonable(value: Any) -> Any:
    """numpy 配列や複素数を JSON で表現可能な値へ変換する。"""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(value.real)), "im": to_jsonable(float(value.imag))}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_report(out_dir: str, payload: Dict[str, Any]) -> Path:
    path = Path(out_dir) / "report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(payload), indent=2, ensure_ascii=False), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_csv(out_dir: str, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
            count += 1
    logger.info("Wrote %s (%d rows)", path, count)
    return path


def write_spectrum(out_dir: str, report) -> Path:
    rows = zip(report.eigenvalues.real, report.eigenvalues.imag, report.residuals, report.energy_residuals)
    return write_csv(out_dir, "spectrum.csv", SPECTRUM_COLUMNS, rows)


def write_resolvent(out_dir: str, scan: List[Dict[str, float]]) -> Path:
    return write_csv(out_dir, "resolvent.csv", RESOLVENT_COLUMNS, ([r[c] for c in RESOLVENT_COLUMNS] for r in scan))


def write_mms_convergence(out_dir: str, rows: List[Dict[str, float]]) -> Path:
    return write_csv(out_dir, "mms_convergence.csv", MMS_COLUMNS, ([r[c] for c in MMS_COLUMNS] for r in rows))


def field_rows(grid, state, ks: Optional[Iterable[int]] = None):
    """各調和の場を (k, 成分, x, z, 実部, 虚部) の行として列挙する。負の k は共役なので省略する。"""
    u1x, u1z = np.meshgrid(grid.s_nodes, grid.z_centers, indexing="ij")
    u3x, u3z = np.meshgrid(grid.x_centers, grid.z_faces, indexing="ij")
    px, pz = np.meshgrid(grid.x_centers, grid.z_centers, indexing="ij")
    sx, sz = np.meshgrid(grid.s_nodes, grid.z_solid, indexing="ij")
    plate_z = np.zeros_like(grid.s_nodes)
    for k in ks if ks is not None else range(state.K + 1):
        idx = k + state.K
        u1, u3 = grid.split_velocity(state.u[idx])
        dx, dz = grid.split_solid(state.d1[idx])
        blocks = (
            ("u1", u1x, u1z, u1),
            ("u3", u3x, u3z, u3),
            ("p", px, pz, grid.pressure_field(state.p[idx])),
            ("eta1", grid.s_nodes, plate_z, state.eta1[idx]),
            ("eta2", grid.s_nodes, plate_z, state.eta2[idx]),
            ("d1x", sx, sz, dx),
            ("d1z", sx, sz, dz),
        )
        for name, x, z, values in blocks:
            for xi, zi, v in zip(np.ravel(x), np.ravel(z), np.ravel(values)):
                yield (k, name, xi, zi, v.real, v.imag)


def write_fields(out_dir: str, grid, state) -> Path:
    return write_csv(out_dir, "fields_k.csv", FIELDS_COLUMNS, field_rows(grid, state))
