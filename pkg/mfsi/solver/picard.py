"""Fixed-point driver ``v -> Phi(v)``: linear periodic solve with the nonlinear terms of ``v`` as extra forcing."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from mfsi.errors import PicardDivergenceError, PicardError, PicardMaxIterationsError
from mfsi.solver.grid import Grid
from mfsi.solver.harmonic_solver import HarmonicSolver
from mfsi.solver.nonlinear import nonlinear_rhs_harmonics
from mfsi.solver.state import HarmonicForcing, PeriodicState, to_samples
from mfsi.solver.transform import Cutoff
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

DIVERGENCE_WINDOW = 3


@dataclass
class SolveReport:
    iterations: int = 0
    update_norms: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    smallness_margins: List[float] = field(default_factory=list)
    residual: float = math.nan
    wall_time: float = 0.0
    converged: bool = False

    @property
    def contraction(self) -> Optional[float]:
        """Last measured ratio of successive update norms."""
        return self.ratios[-1] if self.ratios else None

    @property
    def smallness_margin(self) -> float:
        return max(self.smallness_margins) if self.smallness_margins else 0.0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["contraction"] = self.contraction
        data["smallness_margin"] = self.smallness_margin
        return data


def _l2(values: np.ndarray, weight: float) -> float:
    return math.sqrt(weight) * float(np.linalg.norm(values))


def periodic_norm(state: PeriodicState, solver: HarmonicSolver) -> float:
    """Parseval sum over harmonics of discrete L2 pieces standing in for the maximal-regularity norm.

    Only ``d1 + delta d2`` enters with second derivatives.
    """
    ops, g, delta = solver.ops, solver.grid, solver.delta
    wf, wp, ws = g.h * g.hz_f, g.h, g.h * g.hz_s
    total = 0.0
    for idx in range(2 * state.K + 1):
        u, p = state.u[idx], state.p[idx]
        eta1, eta2 = state.eta1[idx], state.eta2[idx]
        d1, d2 = state.d1[idx], state.d2[idx]
        w = d1 + delta * d2

        def grad(d):
            return math.sqrt(max(float(np.real(np.vdot(d, -(ops.lap_solid @ d)))) * ws, 0.0))

        pieces = (
            _l2(u, wf) + _l2(ops.lap0 @ u, wf)
            + _l2(p, wf) + _l2(ops.G @ p, wf)
            + _l2(eta1, wp) + _l2(ops.bilap @ eta1, wp)
            + _l2(eta2, wp) + _l2(ops.lap_p @ eta2, wp)
            + _l2(d1, ws) + grad(d1)
            + _l2(d2, ws)
            + grad(w) + _l2(ops.lap_solid @ w, ws)
        )
        total += pieces**2
    return math.sqrt(total)


def phi_map(
    solver: HarmonicSolver,
    grid: Grid,
    v: PeriodicState,
    forcing: HarmonicForcing,
    M: Optional[int] = None,
    cutoff: Optional[Cutoff] = None,
) -> PeriodicState:
    """Linear periodic solution with right-hand side ``(F(v) + f, P_m G(v) + g, h)``."""
    if v.max_abs() == 0.0:
        return solver.solve(forcing)
    nonlinear = nonlinear_rhs_harmonics(v, grid, M=M, cutoff=cutoff, workers=solver.workers)
    return solver.solve(forcing.combine(nonlinear))


def smallness_margin(state: PeriodicState, cutoff: Cutoff, M: int) -> float:
    return float(np.max(np.abs(to_samples(state.eta1, M)))) / cutoff.delta0


def solve_fixed_point(
    solver: HarmonicSolver,
    grid: Grid,
    forcing: HarmonicForcing,
    tol: float = 1e-10,
    tol_res: float = 1e-6,
    maxit: int = 50,
    M: Optional[int] = None,
    cutoff: Optional[Cutoff] = None,
) -> Tuple[PeriodicState, SolveReport]:
    """Undamped Picard iteration from ``v = 0``.

    Raises :class:`PicardDivergenceError` when an iterate leaves the smallness
    ball (``max|eta1| > delta0`` on the time samples) or once the update ratio
    exceeds 1 for three consecutive iterates, and
    :class:`PicardMaxIterationsError` after ``maxit``. Both carry the partial
    report. :class:`SmallnessViolationError` is left to callers that hand an
    inadmissible state to :func:`phi_map` directly.
    """
    cutoff = cutoff or Cutoff(grid.alpha)
    M = M or 4 * forcing.K + 4
    report = SolveReport()
    started = time.perf_counter()
    v = PeriodicState.zeros(grid, solver.T, forcing.K)

    for n in range(1, maxit + 1):
        v_new = phi_map(solver, grid, v, forcing, M=M, cutoff=cutoff)
        update = periodic_norm(v_new.combine(v, -1.0), solver)
        size = periodic_norm(v_new, solver)
        if report.update_norms and report.update_norms[-1] > 0.0:
            report.ratios.append(update / report.update_norms[-1])
        report.update_norms.append(update)
        report.smallness_margins.append(smallness_margin(v_new, cutoff, M))
        report.iterations = n
        v = v_new
        logger.debug(
            "Picard iterate %d: update=%.3e relative=%.3e ratio=%s margin=%.3f",
            n,
            update,
            update / size if size > 0.0 else 0.0,
            f"{report.ratios[-1]:.3e}" if report.ratios else "-",
            report.smallness_margins[-1],
        )

        if report.smallness_margins[-1] > 1.0:
            report.wall_time = time.perf_counter() - started
            raise PicardDivergenceError(
                f"iterate {n} left the smallness ball (max|eta1| = {report.smallness_margins[-1]:.3f} delta0)", report
            )

        if update <= tol * size or update == 0.0:
            report.residual = nonlinear_residual(solver, grid, v, forcing, M=M, cutoff=cutoff)
            report.wall_time = time.perf_counter() - started
            if report.residual > tol_res:
                raise PicardError(
                    f"updates converged but the nonlinear residual {report.residual:.3e} exceeds tol_res={tol_res:.1e}",
                    report,
                )
            report.converged = True
            logger.info(
                "Picard converged in %d iterate(s): contraction=%s residual=%.3e margin=%.3f",
                n,
                f"{report.contraction:.3e}" if report.contraction is not None else "-",
                report.residual,
                report.smallness_margin,
            )
            return v, report

        recent = report.ratios[-DIVERGENCE_WINDOW:]
        if len(recent) == DIVERGENCE_WINDOW and all(r > 1.0 for r in recent):
            report.wall_time = time.perf_counter() - started
            raise PicardDivergenceError(
                f"update ratio above 1 for {DIVERGENCE_WINDOW} consecutive iterates (last {recent[-1]:.3e})", report
            )

    report.wall_time = time.perf_counter() - started
    raise PicardMaxIterationsError(f"no convergence within maxit={maxit} iterates", report)


def nonlinear_residual(
    solver: HarmonicSolver,
    grid: Grid,
    v: PeriodicState,
    forcing: HarmonicForcing,
    M: Optional[int] = None,
    cutoff: Optional[Cutoff] = None,
) -> float:
    """Max residual of the transformed periodic system relative to the largest right-hand side.

    The interface pressure is eliminated with the half-cell balance and the
    plate multiplier with the mean of the plate row; ``v = 0`` gives 1 for any
    nonzero forcing.
    """
    ops = solver.ops
    total = forcing
    if v.max_abs() > 0.0:
        total = forcing.combine(nonlinear_rhs_harmonics(v, grid, M=M, cutoff=cutoff, workers=solver.workers))

    worst, scale = 0.0, 0.0
    sl = solver.slices
    for k in range(-v.K, v.K + 1):
        idx = k + v.K
        s = solver.shift(k)
        x = np.zeros(solver.size, dtype=complex)
        for name in ("u", "p", "eta1", "eta2", "d1", "d2"):
            x[sl[name]] = getattr(v, name)[idx]
        gam = ops.Q @ (ops.Pm @ v.eta2[idx])
        u = v.u[idx]
        x[sl["g"]] = gam
        x[sl["p_gamma"]] = (
            ops.E_top @ v.p[idx]
            + 0.5 * grid.hz_f * total.f_gamma[idx]
            - 0.5 * grid.hz_f * (s * gam - ops.lap_gamma @ gam)
            - (gam - ops.Rb @ u) / grid.hz_f
        )
        A = solver.system_matrix(k)
        b = solver.rhs(k, total)
        r = A @ x - b
        x[sl["c"]] = -np.mean(r[sl["eta2"]])
        r = A @ x - b
        worst = max(worst, float(np.max(np.abs(r))))
        scale = max(scale, float(np.max(np.abs(b))))
    if scale == 0.0:
        return 0.0 if worst == 0.0 else math.inf
    return worst / scale
