"""CLI の各モードを実行するサービス関数。

各関数は ``(成功可否, 理由, 結果)`` を返し、標準出力には書き込まない。
数値モジュールの型付き例外はここで捕捉してログに記録し、理由文字列へ変換する。
"""
from __future__ import annotations

import math
import time
from contextlib import contextmanager
from functools import wraps
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

from mfsi.config.run_config import MIN_CELLS, Config
from mfsi.config.settings import get_settings
from mfsi.errors import MfsiError, UnsupportedDimensionError
from mfsi.services import report_service
from mfsi.solver.grid import Grid, build_grid, build_operators
from mfsi.solver.harmonic_solver import (
    HarmonicSolver,
    crosscheck_operator_form,
    recover_pressure_constant,
    solve_periodic_linear,
)
from mfsi.solver.liftings import LiftingSolvers
from mfsi.solver.mfs_operator import MfsOperator, assemble_amfs_dense, build_block_operators, verify_decoupling
from mfsi.solver.mms import MMS_ERRORS, fitted_order, mms_errors, mms_generate, observed_orders
from mfsi.solver.picard import solve_fixed_point
from mfsi.solver.spectral import (
    block_spectra,
    compute_spectrum,
    energy_gram,
    energy_weight,
    resolvent_scan,
    resolvent_trend,
)
from mfsi.solver.transform import Cutoff
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

Result = Tuple[bool, str, Dict[str, Any]]

# tail of the resolvent scan, in |k|, checked for decay
DECAY_FROM = 8


def _workers(config: Config) -> int:
    return config.workers or get_settings().workers


def _output_dir(config: Config, out_dir: Optional[str]) -> str:
    return out_dir or config.output or get_settings().output_dir


def mesh_summary(grid: Grid) -> Dict[str, Any]:
    return {
        "n_h": grid.n_h,
        "n_zf": grid.n_zf,
        "n_zs": grid.n_zs,
        "h": grid.h,
        "hz_f": grid.hz_f,
        "hz_s": grid.hz_s,
        "dofs": grid.dof_counts(),
    }


@contextmanager
def _phase(timings: Dict[str, float], name: str) -> Iterator[None]:
    started = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = time.perf_counter() - started


def _mode(name: str):
    """モード関数を包み、例外の変換、計時、report.json の書き出しを共通化する。"""

    def decorator(fn: Callable[[Config, str, Dict[str, float], Dict[str, Any]], None]):
        @wraps(fn)
        def wrapper(config: Config, out_dir: Optional[str] = None) -> Result:
            out = _output_dir(config, out_dir)
            timings: Dict[str, float] = {}
            results: Dict[str, Any] = {}
            started = time.perf_counter()
            logger.info("=== Starting %s ===", name)
            try:
                if config.geometry.dim != 2:
                    raise UnsupportedDimensionError(config.geometry.dim, f"mode '{name}'")
                fn(config, out, timings, results)
                success, reason = True, "ok"
            except MfsiError as exc:
                logger.error("%s failed (%s): %s", name, exc.reason, exc)
                success, reason = False, exc.reason
                results["error"] = str(exc)
                report = getattr(exc, "report", None)
                if report is not None:
                    results["picard"] = report.to_dict()
            except Exception as exc:
                logger.exception("%s failed with an unexpected error: %s", name, exc)
                success, reason = False, MfsiError.reason
                results["error"] = f"{type(exc).__name__}: {exc}"
            timings["total"] = time.perf_counter() - started

            payload = {
                "mode": name,
                "version": report_service.version_string(),
                "success": success,
                "reason": reason,
                "config": config.to_dict(),
                "timings": timings,
                "results": results,
            }
            report_service.write_report(out, payload)
            logger.info("=== %s finished: %s (%.2fs) ===", name, reason, timings["total"])
            return success, reason, payload

        return wrapper

    return decorator


def _build_solver(config: Config, grid: Grid) -> HarmonicSolver:
    ph = config.physics
    ops = build_operators(grid, ph.mu_s, ph.lambda_s)
    return HarmonicSolver(ops, ph.delta, ph.T, workers=_workers(config))


def _build_lifting(config: Config, grid: Grid) -> LiftingSolvers:
    ph = config.physics
    return LiftingSolvers(build_operators(grid, ph.mu_s, ph.lambda_s), ph.delta)


@_mode("solve")
def run_solve(config: Config, out: str, timings: Dict[str, float], results: Dict[str, Any]) -> None:
    """周期外力に対する非線形周期解を Picard 反復で求める。"""
    with _phase(timings, "setup"):
        grid = build_grid(config)
        solver = _build_solver(config, grid)
        frc, disc = config.forcing, config.discretization
        _, forcing, info = mms_generate(frc.recipe, grid, config.physics, disc.K, frc.amplitude, check=False)
        forcing = forcing.only(frc.components)
    results["mesh"] = mesh_summary(grid)
    logger.info("Mesh: %s, K=%d, M=%d, recipe=%s", results["mesh"]["dofs"], disc.K, disc.samples, frc.recipe)

    with _phase(timings, "picard"):
        sol = config.solver
        state, report = solve_fixed_point(
            solver, grid, forcing, tol=sol.tol, tol_res=sol.tol_res, maxit=sol.maxit, M=disc.samples
        )
    with _phase(timings, "post"):
        constants = recover_pressure_constant(solver, state, forcing)
        report_service.write_fields(out, grid, state)

    results.update(
        {
            "picard": report.to_dict(),
            "contraction": report.contraction,
            "residual": report.residual,
            "smallness_margin": report.smallness_margin,
            "delta0": Cutoff(grid.alpha).delta0,
            "pressure_constant": constants,
            "plate_multiplier": state.c,
            "recipe": info["recipe"],
            "state_max_abs": state.max_abs(),
        }
    )
    logger.info(
        "Picard: iterates=%d contraction=%s residual=%.3e margin=%.3f",
        report.iterations,
        report.contraction,
        report.residual,
        report.smallness_margin,
    )


def coarser_meshes(config: Config, count: int) -> List[Config]:
    """格子を半分ずつ粗くした設定列 (粗い順)。最小セル数を下回る手前で打ち切る。"""
    geo = config.geometry
    out = [config]
    for j in range(1, count):
        factor = 2**j
        sizes = {name: getattr(geo, name) // factor for name in ("n_h", "n_zf", "n_zs")}
        if any(getattr(geo, name) % factor or sizes[name] < MIN_CELLS for name in sizes):
            break
        out.append(config.with_geometry(**sizes))
    return out[::-1]


@_mode("spectrum")
def run_spectrum(config: Config, out: str, timings: Dict[str, float], results: Dict[str, Any]) -> None:
    """A_mfs の全固有値とエネルギー恒等式の残差を計算する。"""
    workers = _workers(config)
    refinement: List[Dict[str, Any]] = []
    meshes = coarser_meshes(config, config.solver.refinements)
    for level, cfg in enumerate(meshes[:-1]):
        with _phase(timings, f"coarse_{level}"):
            grid = build_grid(cfg)
            A, _ = assemble_amfs_dense(MfsOperator(_build_lifting(cfg, grid)), workers=workers)
            report = compute_spectrum(A, mesh=mesh_summary(grid))
        refinement.append({"n_h": grid.n_h, "h": grid.h, "spectral_bound": report.spectral_bound})

    with _phase(timings, "assemble"):
        grid = build_grid(config)
        blocks = build_block_operators(_build_lifting(config, grid), workers=workers)
    with _phase(timings, "eig"):
        report = compute_spectrum(blocks.A, blocks, mesh=mesh_summary(grid))
    with _phase(timings, "blocks"):
        parts = block_spectra(blocks)
    refinement.append({"n_h": grid.n_h, "h": grid.h, "spectral_bound": report.spectral_bound})
    report_service.write_spectrum(out, report)

    variation = None
    if len(refinement) >= 2:
        a, b = refinement[-2]["spectral_bound"], refinement[-1]["spectral_bound"]
        variation = abs(a - b) / abs(b) if b else math.inf
    results.update(
        {
            "spectrum": report.to_dict(),
            "all_stable": bool(report.unstable.size == 0),
            "refinement": refinement,
            "bound_variation": variation,
            "fluid_structure_bound": parts["fluid_structure_bound"],
            "thick_bound": parts["thick_bound"],
            "coupled_bound": parts["coupled_bound"],
            "companion_residual": parts["companion_residual"],
        }
    )
    logger.info(
        "Spectral bound %.6e (decay rate %.6e), %d unstable",
        report.spectral_bound,
        report.decay_rate,
        report.unstable.size,
    )


@_mode("resolvent")
def run_resolvent(config: Config, out: str, timings: Dict[str, float], results: Dict[str, Any]) -> None:
    """虚軸上のシフト ik ω0 におけるリゾルベントノルムをエネルギーノルムで走査する。

    走査の前にスペクトル上界が負であることを確認する。``tail_decay`` は
    k ≥ DECAY_FROM の値がすべて k = DECAY_FROM の値を下回ることを表す。
    """
    workers = _workers(config)
    with _phase(timings, "assemble"):
        grid = build_grid(config)
        operator = MfsOperator(_build_lifting(config, grid))
        A, ground = assemble_amfs_dense(operator, workers=workers)
        weight = energy_weight(energy_gram(operator, ground))
    with _phase(timings, "scan"):
        kmax = config.solver.resolvent_kmax
        rows = resolvent_scan(A, config.physics.omega0, kmax, workers=workers, weight=weight)
    report_service.write_resolvent(out, rows)

    trend = resolvent_trend(rows, DECAY_FROM)
    results.update(
        {
            "mesh": mesh_summary(grid),
            "kmax": kmax,
            "norm": "energy",
            "decay_from": DECAY_FROM,
            **trend,
        }
    )


def refined_meshes(config: Config, count: int) -> List[Config]:
    geo = config.geometry
    return [
        config.with_geometry(n_h=geo.n_h * 2**j, n_zf=geo.n_zf * 2**j, n_zs=geo.n_zs * 2**j) for j in range(count)
    ]


@_mode("mms-verify")
def run_mms_verify(config: Config, out: str, timings: Dict[str, float], results: Dict[str, Any]) -> None:
    """製造解による線形周期ソルバーの収束次数の検証。``forcing.verify_recipes`` の各レシピを細分する。"""
    frc, disc, ph = config.forcing, config.discretization, config.physics
    meshes = refined_meshes(config, config.solver.refinements)
    table: List[Dict[str, Any]] = []
    per_recipe: Dict[str, Any] = {}
    for recipe in frc.verify_recipes:
        rows: List[Dict[str, Any]] = []
        constants: List[Dict[str, Any]] = []
        for level, cfg in enumerate(meshes):
            with _phase(timings, f"{recipe}_mesh_{level}"):
                grid = build_grid(cfg)
                solver = _build_solver(cfg, grid)
                exact, forcing, info = mms_generate(recipe, grid, ph, disc.K, frc.amplitude)
                state = solve_periodic_linear(solver, forcing)
                errors = mms_errors(state, exact, ph.delta)
                recovered = recover_pressure_constant(solver, state, forcing)
            rows.append({"recipe": recipe, "h": grid.h, **errors})
            offset = info["pressure_offset"][disc.K + 1]
            constants.append({"h": grid.h, "offset": offset, "recovered": recovered[disc.K + 1]})
            logger.info("MMS %s n_h=%d: %s", recipe, grid.n_h, {k: f"{v:.3e}" for k, v in errors.items()})

        h = [r["h"] for r in rows]
        orders = {name: observed_orders(h, [r[name] for r in rows]) for name in MMS_ERRORS}
        for i, row in enumerate(rows):
            values = [orders[name][i] for name in orders]
            row["observed_order"] = math.nan if any(math.isnan(v) for v in values) else min(values)
        fitted = {name: fitted_order(h, [r[name] for r in rows]) for name in MMS_ERRORS}
        per_recipe[recipe] = {
            "rows": rows,
            "orders": orders,
            "fitted_order": fitted,
            "min_fitted_order": min(fitted.values()),
            "pressure_constant": constants,
        }
        table.extend(rows)
    report_service.write_mms_convergence(out, table)
    results.update({"recipes": list(frc.verify_recipes), "per_recipe": per_recipe})


@_mode("decouple-check")
def run_decouple_check(config: Config, out: str, timings: Dict[str, float], results: Dict[str, Any]) -> None:
    """相似変換 S A S^-1 と明示的なブロック式の一致を、結合版と非結合版の両方で確認する。

    非結合版ではスペクトルが 2 つの対角ブロックのスペクトルの和集合になることを、
    結合版では ``forcing.verify_recipes`` の各外力について作用素形式と一体型解法の一致を確かめる。
    """
    workers = _workers(config)
    frc, ph, disc = config.forcing, config.physics, config.discretization
    grid = build_grid(config)
    lift = _build_lifting(config, grid)
    for coupled in (True, False):
        label = "coupled" if coupled else "uncoupled"
        with _phase(timings, label):
            blocks = build_block_operators(lift, coupled=coupled, workers=workers)
            results[label] = verify_decoupling(blocks, workers=workers)
            parts = block_spectra(blocks)
            results[label]["union_defect"] = parts["union_defect"]
            if coupled:
                results["companion_residual"] = parts["companion_residual"]
                results["thick_bound"] = parts["thick_bound"]
        if coupled:
            with _phase(timings, "operator_form"):
                solver = _build_solver(config, grid)
                checks = {}
                for recipe in frc.verify_recipes:
                    _, forcing, _ = mms_generate(recipe, grid, ph, disc.K, frc.amplitude)
                    state = solve_periodic_linear(solver, forcing)
                    checks[recipe] = crosscheck_operator_form(
                        solver, lift, forcing, state, A=blocks.A, ground=blocks.ground
                    )
                results["operator_form"] = checks
                results["operator_form_max"] = max(check["max"] for check in checks.values())
    results["max"] = max(results["coupled"]["max"], results["uncoupled"]["max"])
    results["mesh"] = mesh_summary(grid)


MODE_RUNNERS: Dict[str, Callable[..., Result]] = {
    "solve": run_solve,
    "spectrum": run_spectrum,
    "resolvent": run_resolvent,
    "mms-verify": run_mms_verify,
    "decouple-check": run_decouple_check,
}


def run(config: Config, out_dir: Optional[str] = None) -> Result:
    """設定のモードに対応するサービス関数を実行する。"""
    return MODE_RUNNERS[config.mode](config, out_dir)


__all__ = [
    "MODE_RUNNERS",
    "coarser_meshes",
    "mesh_summary",
    "refined_meshes",
    "run",
    "run_decouple_check",
    "run_mms_verify",
    "run_resolvent",
    "run_solve",
    "run_spectrum",
]