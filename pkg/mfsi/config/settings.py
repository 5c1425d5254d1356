"""プロセス単位の設定を環境変数から読み込む。"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional


def _env_int(key: str, default: int) -> int:
    try:
        return int(os.getenv(key, default))
    except (TypeError, ValueError):
        return default


def _default_workers() -> int:
    return os.cpu_count() or 1


@dataclass(frozen=True)
class AppSettings:
    """ログ出力と計算資源に関する設定を一元管理する。"""

    log_level: str = "INFO"
    log_format: str = "plain"
    log_file: Optional[str] = None
    workers: int = 1
    output_dir: str = "output"
    dense_dof_limit: int = 4000

    @staticmethod
    def from_env() -> "AppSettings":
        log_format = os.getenv("LOG_FORMAT", "plain").lower()
        if log_format not in {"plain", "json"}:
            log_format = "plain"

        workers = _env_int("MFSI_WORKERS", _default_workers())
        if workers < 1:
            workers = _default_workers()

        return AppSettings(
            log_level=os.getenv("LOG_LEVEL", "INFO").upper(),
            log_format=log_format,
            log_file=os.getenv("LOG_FILE") or None,
            workers=workers,
            output_dir=os.getenv("MFSI_OUTPUT_DIR", "output"),
            dense_dof_limit=_env_int("MFSI_DENSE_DOF_LIMIT", 4000),
        )


@lru_cache()
def get_settings() -> AppSettings:
    """環境変数から設定を読み込み、プロセス内で1回だけ評価する。"""
    return AppSettings.from_env()
