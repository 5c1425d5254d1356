"""mfsi 全体で共有する例外階層。

数値計算モジュールは失敗を型付き例外で通知し、サービス層が ``(success, reason)``
形式へ変換する。``reason`` は CLI の終了コードへ対応付けられる。
"""
from __future__ import annotations

from typing import Iterable, List, Optional


class MfsiError(Exception):
    """mfsi が送出するすべての例外の基底クラス。"""

    reason = "solver-error"


class InvalidInputError(MfsiError, ValueError):
    """形状不一致やゼロベクトルなど、入力の前提条件違反。"""


class ConfigValidationError(MfsiError):
    """設定値の不変条件違反をまとめて保持する。"""

    reason = "config-invalid"

    def __init__(self, violations: Iterable[str]):
        self.violations: List[str] = list(violations)
        super().__init__("; ".join(self.violations))


class GridError(MfsiError, ValueError):
    """格子サイズやカットオフ幅が不正な場合。"""

    reason = "config-invalid"


class CompatibilityError(MfsiError):
    """流束の整合条件や平均ゼロ条件を満たさないデータ。"""

    def __init__(self, message: str, measured: float):
        self.measured = measured
        super().__init__(f"{message} (measured integral {measured:.3e})")


class SmallnessViolationError(MfsiError):
    """板変位が δ₀ を超え、変換が微分同相でなくなる場合。"""

    reason = "smallness-violation"

    def __init__(self, attained: float, delta0: float, sample: Optional[int] = None):
        self.attained = attained
        self.delta0 = delta0
        self.sample = sample
        where = "" if sample is None else f" at time sample {sample}"
        super().__init__(f"max|eta1| = {attained:.6e} exceeds delta0 = {delta0:.6e}{where}")


class InverseMapError(MfsiError):
    """逆写像 Y の Newton 反復が収束しなかった。"""


class SingularSystemError(MfsiError):
    """調和ごとの連立系または解像作用素が特異。"""

    reason = "singular-system"

    def __init__(self, k: int, nearest_eigenvalue: Optional[complex] = None):
        self.k = k
        self.nearest_eigenvalue = nearest_eigenvalue
        detail = "" if nearest_eigenvalue is None else f", nearest eigenvalue {nearest_eigenvalue:.6e}"
        super().__init__(f"harmonic system singular for k={k}{detail}")


class UnstableSpectrumError(MfsiError):
    """スペクトル上界が負でなく、虚軸上のリゾルベントが一様に有界とは言えない。"""

    reason = "singular-system"

    def __init__(self, bound: float):
        self.bound = bound
        super().__init__(f"spectral bound {bound:.6e} is not negative; the resolvent scan needs a stable operator")


class UnsupportedDimensionError(MfsiError):
    """実装されていない空間次元での実行要求。"""

    reason = "unsupported-dimension"

    def __init__(self, dim: int, operation: str):
        self.dim = dim
        self.operation = operation
        super().__init__(f"{operation} is implemented for dim=2 only (requested dim={dim})")


class DofBudgetError(MfsiError):
    """密行列の組み立てが自由度上限を超える。"""

    def __init__(self, dofs: int, limit: int):
        self.dofs = dofs
        self.limit = limit
        super().__init__(
            f"dense assembly needs {dofs} unknowns (limit {limit}); "
            "coarsen the grid or raise MFSI_DENSE_DOF_LIMIT"
        )


class PicardError(MfsiError):
    """固定点反復の失敗。``report`` に途中までの履歴を保持する。"""

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class PicardDivergenceError(PicardError):
    reason = "picard-divergence"


class PicardMaxIterationsError(PicardError):
    reason = "picard-maxit"


__all__ = [
    "CompatibilityError",
    "ConfigValidationError",
    "DofBudgetError",
    "GridError",
    "InvalidInputError",
    "InverseMapError",
    "MfsiError",
    "PicardDivergenceError",
    "PicardError",
    "PicardMaxIterationsError",
    "SingularSystemError",
    "SmallnessViolationError",
    "UnstableSpectrumError",
    "UnsupportedDimensionError",
]
