"""実験設定 (JSON) の読み込み、上書き、検証。

設定はセクションごとの frozen dataclass で保持する。``--set section.key=value``
形式の上書きは JSON リテラルとして解釈し、失敗した場合は文字列として扱う。
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from mfsi.errors import ConfigValidationError

MODES = ("solve", "spectrum", "resolvent", "mms-verify", "decouple-check")
RECIPES = ("rest", "standing-wave", "sloshing", "curved-layer")
MIN_CELLS = 6
DIMENSIONS = (2, 3)


@dataclass(frozen=True)
class GeometryConfig:
    dim: int = 2
    L: float = 1.0
    H_f: float = 1.0
    H_s: float = 0.5
    alpha: float = 0.25
    n_h: int = 24
    n_zf: int = 24
    n_zs: int = 16


@dataclass(frozen=True)
class PhysicsConfig:
    mu_s: float = 1.0
    lambda_s: float = 1.0
    delta: float = 0.5
    T: float = 1.0

    @property
    def omega0(self) -> float:
        """基本角周波数 2π/T。"""
        return 2.0 * math.pi / self.T


@dataclass(frozen=True)
class DiscretizationConfig:
    K: int = 4
    M: Optional[int] = None

    @property
    def samples(self) -> int:
        """時間サンプル数。未指定なら 4K+4。"""
        return self.M if self.M is not None else 4 * self.K + 4


@dataclass(frozen=True)
class ForcingConfig:
    recipe: str = "standing-wave"
    amplitude: float = 1e-3
    components: Tuple[str, ...] = ("f", "g", "h")
    # recipes refined by mms-verify
    verify_recipes: Tuple[str, ...] = ("standing-wave", "curved-layer")


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    tol_res: float = 1e-6
    maxit: int = 50
    resolvent_kmax: int = 64
    refinements: int = 3


_SECTIONS = {
    "geometry": GeometryConfig,
    "physics": PhysicsConfig,
    "discretization": DiscretizationConfig,
    "forcing": ForcingConfig,
    "solver": SolverConfig,
}


@dataclass(frozen=True)
class Config:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    mode: str = "solve"
    output: Optional[str] = None
    seed: int = 0
    workers: Optional[int] = None

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "Config":
        """辞書から設定を構築する。未知のキーは検証エラーとして報告する。"""
        errors: List[str] = []
        kwargs: Dict[str, Any] = {}
        for key, value in data.items():
            if key in _SECTIONS:
                section_cls = _SECTIONS[key]
                if not isinstance(value, dict):
                    errors.append(f"{key}: expected an object")
                    continue
                known = {f.name for f in fields(section_cls)}
                unknown = sorted(set(value) - known)
                errors.extend(f"{key}.{name}: unknown key" for name in unknown)
                section_values = {k: v for k, v in value.items() if k in known}
                for name in ("components", "verify_recipes"):
                    entry = section_values.get(name)
                    if entry is not None:
                        section_values[name] = (entry,) if isinstance(entry, str) else tuple(entry)
                kwargs[key] = section_cls(**section_values)
            elif key in {"mode", "output", "seed", "workers"}:
                kwargs[key] = value
            else:
                errors.append(f"{key}: unknown key")
        if errors:
            raise ConfigValidationError(errors)
        return Config(**kwargs)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["forcing"]["components"] = list(self.forcing.components)
        data["forcing"]["verify_recipes"] = list(self.forcing.verify_recipes)
        return data

    def with_overrides(self, overrides: Iterable[str]) -> "Config":
        """``section.key=value`` 形式の上書きを適用した新しい設定を返す。"""
        data = self.to_dict()
        errors: List[str] = []
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                errors.append(f"override '{item}' is not of the form key=value")
                continue
            value = _parse_literal(raw)
            path = key.strip().split(".")
            target = data
            for part in path[:-1]:
                if not isinstance(target.get(part), dict):
                    errors.append(f"override '{key}': unknown section '{part}'")
                    target = None
                    break
                target = target[part]
            if target is not None:
                target[path[-1]] = value
        if errors:
            raise ConfigValidationError(errors)
        return Config.from_dict(data)

    def with_geometry(self, **changes: Any) -> "Config":
        return replace(self, geometry=replace(self.geometry, **changes))

    def validate(self) -> "Config":
        """すべての不変条件を検査し、違反を一度にまとめて送出する。"""
        violations = list(_violations(self))
        if violations:
            raise ConfigValidationError(violations)
        return self


def _parse_literal(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _positive(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0


def _violations(cfg: Config) -> Sequence[str]:
    out: List[str] = []
    g, ph, disc, frc, sol = cfg.geometry, cfg.physics, cfg.discretization, cfg.forcing, cfg.solver

    if g.dim not in DIMENSIONS:
        out.append(f"geometry.dim={g.dim}: must be one of {DIMENSIONS}")
    for name in ("L", "H_f", "H_s", "alpha"):
        if not _positive(getattr(g, name)):
            out.append(f"geometry.{name} must be positive")
    for name in ("n_h", "n_zf", "n_zs"):
        value = getattr(g, name)
        if not isinstance(value, int) or value < MIN_CELLS:
            out.append(f"geometry.{name}={value}: at least {MIN_CELLS} cells required")
    if _positive(g.alpha) and _positive(g.H_f) and _positive(g.H_s) and g.alpha >= min(g.H_f, g.H_s):
        out.append(f"geometry.alpha={g.alpha}: cutoff exceeds domain (alpha < min(H_f, H_s) required)")

    if not _positive(ph.mu_s):
        out.append("physics.mu_s must be positive (strong ellipticity)")
    if not isinstance(ph.lambda_s, (int, float)) or ph.mu_s + ph.lambda_s <= 0:
        out.append("physics.mu_s + physics.lambda_s must be positive (strong ellipticity)")
    if not _positive(ph.delta):
        out.append("physics.delta must be positive: viscoelastic damping is required")
    if not _positive(ph.T):
        out.append("physics.T must be positive")

    if not isinstance(disc.K, int) or disc.K < 1:
        out.append("discretization.K must be an integer >= 1")
    elif disc.M is not None and (not isinstance(disc.M, int) or disc.M < 2 * (2 * disc.K + 1)):
        out.append(f"discretization.M must be >= 2(2K+1) = {2 * (2 * disc.K + 1)}")

    if frc.recipe not in RECIPES:
        out.append(f"forcing.recipe '{frc.recipe}' is not one of {', '.join(RECIPES)}")
    unknown_recipes = sorted(set(frc.verify_recipes) - set(RECIPES))
    if not frc.verify_recipes or unknown_recipes:
        out.append(f"forcing.verify_recipes must name known recipes (unknown: {unknown_recipes})")
    if not isinstance(frc.amplitude, (int, float)) or frc.amplitude < 0:
        out.append("forcing.amplitude must be non-negative")
    bad = sorted(set(frc.components) - {"f", "g", "h"})
    if bad:
        out.append(f"forcing.components has unknown entries {bad}")

    if not _positive(sol.tol) or not _positive(sol.tol_res):
        out.append("solver.tol and solver.tol_res must be positive")
    if not isinstance(sol.maxit, int) or sol.maxit < 1:
        out.append("solver.maxit must be >= 1")
    if not isinstance(sol.resolvent_kmax, int) or sol.resolvent_kmax < 1:
        out.append("solver.resolvent_kmax must be >= 1")
    if not isinstance(sol.refinements, int) or sol.refinements < 2:
        out.append("solver.refinements must be >= 2")

    if cfg.mode not in MODES:
        out.append(f"mode '{cfg.mode}' is not one of {', '.join(MODES)}")
    if cfg.workers is not None and (not isinstance(cfg.workers, int) or cfg.workers < 1):
        out.append("workers must be a positive integer")
    return out


def load_config(path: Optional[str], overrides: Iterable[str] = ()) -> Config:
    """JSON ファイルを読み込み、上書きを適用して検証済みの設定を返す。"""
    data: Dict[str, Any] = {}
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigValidationError([f"cannot read config '{path}': {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigValidationError([f"config '{path}' must contain a JSON object"])
    return Config.from_dict(data).with_overrides(overrides).validate()
