"""Linear time-periodic coupled problem, one monolithic complex solve per harmonic.

Unknown blocks of the harmonic system, in order::

    u     interior face velocities              g     interface row of u3
    p     cell pressures                        q     continuity multiplier
    p_g   interface pressure (half-cell balance)
    eta1, eta2  plate pair                      c     plate mean multiplier
    d1, d2      thick-layer pair

Only ``k >= 0`` is solved; negative harmonics are conjugates.
"""
from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from mfsi.config.settings import get_settings
from mfsi.errors import InvalidInputError, SingularSystemError
from mfsi.solver.grid import DiscreteOperators
from mfsi.solver.liftings import LiftingSolvers
from mfsi.solver.mfs_operator import GroundSpace, MfsOperator, assemble_amfs_dense, build_ground_space
from mfsi.solver.state import HarmonicForcing, PeriodicState, symmetrize, to_samples
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

BLOCKS = ("u", "g", "p", "q", "p_gamma", "eta1", "eta2", "c", "d1", "d2")
REALITY_TOL = 1e-10


class HarmonicSolver:
    """Assembles and caches the factorized harmonic systems for one grid and parameter set."""

    def __init__(self, ops: DiscreteOperators, delta: float, T: float, workers: Optional[int] = None):
        self.ops = ops
        self.grid = ops.grid
        self.delta = float(delta)
        self.T = float(T)
        self.omega0 = 2.0 * np.pi / self.T
        self.workers = workers or get_settings().workers
        self._factors: Dict[int, spla.SuperLU] = {}
        self._lock = threading.Lock()

        g = self.grid
        sizes = (g.n_u, g.n_h, g.n_p, 1, g.n_h, g.n_w, g.n_w, 1, g.n_d, g.n_d)
        edges = np.cumsum((0,) + sizes)
        self.slices = {name: slice(int(a), int(b)) for name, a, b in zip(BLOCKS, edges[:-1], edges[1:])}
        self.size = int(edges[-1])

    def shift(self, k: int) -> complex:
        return 1j * k * self.omega0

    def system_matrix(self, k: int) -> sps.csc_matrix:
        ops, g, delta = self.ops, self.grid, self.delta
        s = self.shift(k)
        hzf, hzs = g.hz_f, g.hz_s
        I_u, I_h, I_w, I_d = (sps.identity(n, format="csr") for n in (g.n_u, g.n_h, g.n_w, g.n_d))
        ones_p = sps.csr_matrix(np.ones((g.n_p, 1)))
        ones_w = sps.csr_matrix(np.ones((g.n_w, 1)))
        Pm = sps.csr_matrix(ops.Pm)
        QPm = ops.Q @ Pm
        KB = ops.K_B @ Pm
        LB = ops.lame_b @ Pm

        rows = [
            # momentum, interior faces
            [s * I_u - ops.lap0, -ops.lap_g, ops.G, None, None, None, None, None, None, None],
            # half-cell momentum of the interface row
            [-ops.Rb / hzf, 0.5 * hzf * (s * I_h - ops.lap_gamma) + I_h / hzf, -ops.E_top, None, I_h,
             None, None, None, None, None],
            # continuity
            [ops.D, ops.D_g, None, ones_p, None, None, None, None, None, None],
            # pressure gauge
            [None, None, ones_p.T, None, None, None, None, None, None, None],
            # kinematic coupling
            [None, I_h, None, None, None, None, -QPm, None, None, None],
            # plate
            [None, None, None, None, None, s * I_w, -I_w, None, None, None],
            [None, None, None, None, -ops.Q.T, ops.bilap - KB, (1.0 + 0.5 * hzs) * s * I_w - ops.lap_p - delta * KB,
             ones_w, -ops.K_I, -delta * ops.K_I],
            # plate volume constraint
            [None, None, None, None, None, ones_w.T, None, None, None, None],
            # thick layer
            [None, None, None, None, None, None, None, None, s * I_d, -I_d],
            [None, None, None, None, None, -LB, -delta * LB, None, -ops.lame0, s * I_d - delta * ops.lame0],
        ]
        return sps.bmat(rows, format="csc", dtype=complex)

    def factor(self, k: int) -> spla.SuperLU:
        with self._lock:
            cached = self._factors.get(k)
        if cached is not None:
            return cached
        started = time.perf_counter()
        try:
            lu = spla.splu(self.system_matrix(k))
        except RuntimeError as exc:
            raise SingularSystemError(k) from exc
        logger.debug("Factorized harmonic k=%d (n=%d, %.3fs)", k, self.size, time.perf_counter() - started)
        with self._lock:
            self._factors.setdefault(k, lu)
            return self._factors[k]

    def rhs(self, k: int, forcing: HarmonicForcing) -> np.ndarray:
        g = self.grid
        part = forcing.harmonic(k)
        b = np.zeros(self.size, dtype=complex)
        b[self.slices["u"]] = part["f"]
        b[self.slices["g"]] = 0.5 * g.hz_f * part["f_gamma"]
        b[self.slices["eta2"]] = part["g"] + 0.5 * g.hz_s * part["h_gamma"]
        b[self.slices["d2"]] = part["h"]
        return b

    def solve_harmonic(self, k: int, forcing: HarmonicForcing) -> Dict[str, np.ndarray]:
        b = self.rhs(k, forcing)
        x = self.factor(k).solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularSystemError(k)
        return {name: x[sl] for name, sl in self.slices.items()}

    def split(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        return {name: x[sl] for name, sl in self.slices.items()}

    def pack(self, state: PeriodicState, k: int) -> np.ndarray:
        K = state.K
        x = np.zeros(self.size, dtype=complex)
        for name in ("u", "p", "eta1", "eta2", "d1", "d2"):
            x[self.slices[name]] = getattr(state, name)[k + K]
        x[self.slices["g"]] = state.g[k + K]
        x[self.slices["p_gamma"]] = state.p_gamma[k + K]
        x[self.slices["c"]] = state.c[k + K]
        return x

    def solve(self, forcing: HarmonicForcing) -> PeriodicState:
        """Solve every harmonic of ``forcing``; the result inherits its reality symmetry."""
        defect = forcing.conjugate_defect()
        if defect > REALITY_TOL:
            raise InvalidInputError(f"forcing harmonics are not conjugate-symmetric (defect {defect:.3e})")
        K = forcing.K
        started = time.perf_counter()
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            parts = list(pool.map(lambda k: self.solve_harmonic(k, forcing), range(K + 1)))

        n = 2 * K + 1
        out = {name: np.zeros((n, parts[0][name].size), dtype=complex) for name in BLOCKS}
        for k, part in enumerate(parts):
            for name in BLOCKS:
                out[name][K + k] = part[name]
        for name in BLOCKS:
            out[name] = symmetrize(out[name])
        logger.debug("Solved %d harmonics in %.3fs", K + 1, time.perf_counter() - started)
        return PeriodicState(
            T=self.T,
            K=K,
            u=out["u"],
            p=out["p"],
            eta1=out["eta1"],
            eta2=out["eta2"],
            d1=out["d1"],
            d2=out["d2"],
            g=out["g"],
            p_gamma=out["p_gamma"],
            c=out["c"][:, 0],
        )

    def residual(self, state: PeriodicState, forcing: HarmonicForcing) -> np.ndarray:
        """Relative residual ``||A x - b|| / (||A|| ||x|| + ||b||)`` per harmonic, ordered ``-K..K``."""
        out = np.zeros(2 * state.K + 1)
        for k in range(-state.K, state.K + 1):
            A = self.system_matrix(k)
            x = self.pack(state, k)
            b = self.rhs(k, forcing)
            scale = spla.norm(A, np.inf) * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf)
            out[k + state.K] = 0.0 if scale == 0.0 else np.linalg.norm(A @ x - b, np.inf) / scale
        return out


def solve_periodic_linear(solver: HarmonicSolver, forcing: HarmonicForcing) -> PeriodicState:
    return solver.solve(forcing)


def recover_pressure_constant(solver: HarmonicSolver, state: PeriodicState, forcing: HarmonicForcing) -> np.ndarray:
    """Per-harmonic constant ``c`` such that ``p + c`` balances the mean of the plate equation.

    The mean of ``bilap eta1`` is the clamped-boundary flux of the plate moment;
    the remaining means are the solid normal stress and the plate loads.
    """
    ops, g, delta = solver.ops, solver.grid, solver.delta
    out = np.zeros(2 * state.K + 1, dtype=complex)
    for idx in range(2 * state.K + 1):
        eta1, eta2 = state.eta1[idx], state.eta2[idx]
        b = ops.Pm @ (eta1 + delta * eta2)
        stress = ops.stress_trace_raw(state.d1[idx] + delta * state.d2[idx], b)
        balance = (
            ops.bilap @ eta1
            - ops.lap_p @ eta2
            - stress
            - forcing.g[idx]
            - 0.5 * g.hz_s * forcing.h_gamma[idx]
        )
        out[idx] = balance.mean() - (ops.Q.T @ state.p_gamma[idx]).mean()
    return out


def pressure_constant_samples(constants: np.ndarray, M: int) -> np.ndarray:
    """Time samples of the recovered constant."""
    return to_samples(constants[:, None], M)[:, 0]


def crosscheck_operator_form(
    solver: HarmonicSolver,
    lift: LiftingSolvers,
    forcing: HarmonicForcing,
    state: PeriodicState,
    A: Optional[np.ndarray] = None,
    ground: Optional[GroundSpace] = None,
) -> Dict[str, float]:
    """Re-solve each harmonic through the reduced operator and compare with the monolithic state.

    ``A`` is the dense operator in ``ground`` coordinates; it is assembled when missing.
    """
    operator = MfsOperator(lift)
    if A is None or ground is None:
        A, ground = assemble_amfs_dense(operator, ground=ground or build_ground_space(solver.grid, solver.ops.D))
    n = ground.size
    ops = solver.ops
    worst: Dict[str, float] = {name: 0.0 for name in ("u", "p", "eta1", "eta2", "d1", "d2", "velocity_split")}
    scale = max(state.max_abs(), 1e-300)

    for k in range(-state.K, state.K + 1):
        idx = k + state.K
        s = solver.shift(k)
        part = forcing.harmonic(k)
        rhs = operator.forcing(part["f"], part["f_gamma"], part["g"], part["h"], part["h_gamma"])
        y = np.linalg.solve(s * np.eye(n) - A, ground.from_physical(rhs))
        x = ground.to_physical(y)
        u, _ = operator.velocity(x.v, x.eta2)
        p = operator.pressure(x.v, x.eta2, s, part["f"])
        reduced = {"u": u, "p": p, "eta1": x.eta1, "eta2": x.eta2, "d1": x.d1, "d2": x.d2}
        for name, value in reduced.items():
            diff = float(np.max(np.abs(value - getattr(state, name)[idx]))) / scale
            worst[name] = max(worst[name], diff)

        # u = Pu + (I - P) D_fl eta2
        mono_u = state.u[idx]
        w, _ = lift.stokes_lift(ops.Pm @ state.eta2[idx], check=False)
        split = lift.helmholtz_project(mono_u) + (w - lift.helmholtz_project(w))
        worst["velocity_split"] = max(worst["velocity_split"], float(np.max(np.abs(split - mono_u))) / scale)

    worst["max"] = max(worst.values())
    logger.info("Operator-form cross-check: max discrepancy %.3e", worst["max"])
    return worst
