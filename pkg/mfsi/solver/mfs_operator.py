"""Multilayered fluid-structure operator on the discrete ground space.

State layout ``(v, eta1, eta2, d1, d2)``: ``v`` is the solenoidal velocity
(interior faces), the plate pair lives on the interior vertices and is kept
mean-zero, the thick-layer pair on the interior solid nodes. The action is
matrix free; :func:`assemble_amfs_dense` turns it into a dense matrix in the
orthonormal coordinates of :class:`GroundSpace`.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from mfsi.config.settings import get_settings
from mfsi.errors import DofBudgetError, InvalidInputError
from mfsi.solver.grid import Grid
from mfsi.solver.liftings import LiftingSolvers
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

NULL_RCOND = 1e-8
COLUMN_CHUNK = 64


class MfsState(NamedTuple):
    v: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


@dataclass(frozen=True)
class GroundSpace:
    """Orthonormal coordinates of X0: solenoidal velocities, mean-zero plate pair, raw solid values."""

    grid: Grid
    V_sigma: np.ndarray
    V_m: np.ndarray

    @property
    def sizes(self) -> Tuple[int, int, int, int, int]:
        n_s, n_m, n_d = self.V_sigma.shape[1], self.V_m.shape[1], self.grid.n_d
        return n_s, n_m, n_m, n_d, n_d

    @property
    def size(self) -> int:
        return int(sum(self.sizes))

    @property
    def first_size(self) -> int:
        """Dimension of the fluid-plate part ``(v, eta1, eta2)``."""
        n_s, n_m, _, _, _ = self.sizes
        return n_s + 2 * n_m

    def slices(self) -> Tuple[slice, ...]:
        edges = np.cumsum((0,) + self.sizes)
        return tuple(slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]))

    def to_physical(self, y: np.ndarray) -> MfsState:
        s_v, s_1, s_2, s_d1, s_d2 = self.slices()
        return MfsState(self.V_sigma @ y[s_v], self.V_m @ y[s_1], self.V_m @ y[s_2], y[s_d1], y[s_d2])

    def from_physical(self, x: MfsState) -> np.ndarray:
        return np.concatenate(
            [self.V_sigma.T @ x.v, self.V_m.T @ x.eta1, self.V_m.T @ x.eta2, x.d1, x.d2]
        )


def build_ground_space(grid: Grid, D: sps.spmatrix) -> GroundSpace:
    V_sigma = sla.null_space(D.toarray(), rcond=NULL_RCOND)
    V_m = sla.null_space(np.ones((1, grid.n_w)))
    logger.debug("Ground space: solenoidal=%d plate=%d solid=%d", V_sigma.shape[1], V_m.shape[1], grid.n_d)
    return GroundSpace(grid=grid, V_sigma=V_sigma, V_m=V_m)


class MfsOperator:
    """Matrix-free action of A_mfs; ``coupled=False`` drops the thick-plate coupling blocks B and C."""

    def __init__(self, lift: LiftingSolvers, coupled: bool = True):
        self.lift = lift
        self.ops = lift.ops
        self.grid = lift.grid
        self.delta = lift.delta
        self.coupled = coupled

    # building blocks ---------------------------------------------------------
    def lift_plate(self, eta: np.ndarray) -> np.ndarray:
        """D_s applied to the vertical interface data ``P_m eta``."""
        return self.lift.lame_lift(self.ops.Pm @ eta)

    def velocity(self, v: np.ndarray, eta2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Full velocity ``u = v + grad N1 eta2`` and its interface row ``g = Q P_m eta2``."""
        ops = self.ops
        u = v + ops.G @ self.lift.neumann_interface(eta2)
        return u, ops.Q @ (ops.Pm @ eta2)

    def interface_stress(self, v: np.ndarray, eta2: np.ndarray) -> np.ndarray:
        """Viscous-pressure load on the plate, before mean removal and added-mass inversion."""
        ops, g = self.ops, self.grid
        u, gam = self.velocity(v, eta2)
        p_visc = self.lift.neumann_viscous(u, gam)
        return ops.Q.T @ (ops.E_top @ p_visc + 0.5 * g.hz_f * (ops.lap_gamma @ gam) - (gam - ops.Rb @ u) / g.hz_f)

    def pressure(self, v: np.ndarray, eta2: np.ndarray, s: complex, f: Optional[np.ndarray] = None) -> np.ndarray:
        """Pressure reconstructed from the reduced state at the shift ``s``."""
        u, gam = self.velocity(v, eta2)
        p = self.lift.neumann_viscous(u, gam) - s * self.lift.neumann_interface(eta2)
        if f is not None:
            p = p + self.lift.weak_neumann(f)
        return p

    def fluid_row(self, v: np.ndarray, eta2: np.ndarray) -> np.ndarray:
        lift = self.lift
        w, _ = lift.stokes_lift(eta2, check=False)
        return lift.helmholtz_project(self.ops.lap0 @ (v - lift.helmholtz_project(w)))

    def _plate_load(self, v, eta1, eta2) -> Tuple[np.ndarray, np.ndarray]:
        ops = self.ops
        b = ops.Pm @ (eta1 + self.delta * eta2)
        load = self.interface_stress(v, eta2) - ops.bilap @ eta1 + ops.lap_p @ eta2 + ops.K_B @ b
        return load, b

    # action ------------------------------------------------------------------
    def apply(self, x: MfsState) -> MfsState:
        ops, lift = self.ops, self.lift
        eta1, eta2 = ops.Pm @ x.eta1, ops.Pm @ x.eta2
        w = x.d1 + self.delta * x.d2

        load, b = self._plate_load(x.v, eta1, eta2)
        if self.coupled:
            load = load + ops.K_I @ w
            thick = ops.lame0 @ (w - lift.lame_lift(b))
        else:
            thick = ops.lame0 @ w
        return MfsState(
            self.fluid_row(x.v, eta2),
            eta2,
            lift.inertia_solve(load),
            x.d2,
            thick,
        )

    def forcing(self, f, f_gamma, g, h, h_gamma) -> MfsState:
        """Right-hand side of the operator form for one set of forcing harmonics."""
        ops, grid, lift = self.ops, self.grid, self.lift
        plate = g + 0.5 * grid.hz_s * h_gamma + ops.Q.T @ (ops.E_top @ lift.weak_neumann(f) + 0.5 * grid.hz_f * f_gamma)
        zeros = np.zeros(grid.n_w, dtype=np.result_type(plate, complex))
        return MfsState(lift.helmholtz_project(f), zeros, lift.inertia_solve(plate), np.zeros_like(h), h)

    def transformed_apply(self, x: MfsState) -> MfsState:
        """Block formulas of the decoupled operator ``S A S^-1`` applied directly."""
        ops, lift = self.ops, self.lift
        eta1, eta2 = ops.Pm @ x.eta1, ops.Pm @ x.eta2
        w = x.d1 + self.delta * x.d2

        load, b = self._plate_load(x.v, eta1, eta2)
        lifted = lift.lame_lift(b)
        if self.coupled:
            top_left = lift.inertia_solve(load + ops.K_I @ lifted)
            top_right = lift.inertia_solve(ops.K_I @ w)
            bottom_right = ops.lame0 @ w - self.lift_plate(top_right)
            bottom_left = -self.lift_plate(top_left)
        else:
            top_left = lift.inertia_solve(load)
            top_right = np.zeros_like(top_left)
            bottom_right = ops.lame0 @ w
            bottom_left = -self.lift_plate(top_left) + ops.lame0 @ lifted
        return MfsState(
            self.fluid_row(x.v, eta2),
            eta2,
            top_left + top_right,
            x.d2,
            bottom_left + bottom_right,
        )

    # sparse diagonal blocks -------------------------------------------------
    def plate_block(self) -> sps.csr_matrix:
        """``(0, I; -P_m bilap, lap_p)`` on the plate pair."""
        ops, n = self.ops, self.grid.n_w
        return sps.bmat(
            [[None, sps.identity(n)], [-(sps.csr_matrix(ops.Pm) @ ops.bilap), ops.lap_p]], format="csr"
        )

    def thick_block(self) -> sps.csr_matrix:
        """``(0, I; L0, delta L0)`` on the thick-layer pair."""
        ops, n = self.ops, self.grid.n_d
        return sps.bmat([[None, sps.identity(n)], [ops.lame0, self.delta * ops.lame0]], format="csr")


def apply_amfs(operator: MfsOperator, state: MfsState) -> MfsState:
    grid = operator.grid
    expected = (grid.n_u, grid.n_w, grid.n_w, grid.n_d, grid.n_d)
    for name, value, n in zip(MfsState._fields, state, expected):
        if np.shape(value)[0] != n:
            raise InvalidInputError(f"state component {name} has length {np.shape(value)[0]}, expected {n}")
    return operator.apply(state)


def _assemble(ground: GroundSpace, action: Callable[[MfsState], MfsState], workers: Optional[int]) -> np.ndarray:
    n = ground.size
    out = np.empty((n, n))
    starts = list(range(0, n, COLUMN_CHUNK))

    def column_chunk(start: int) -> Tuple[int, np.ndarray]:
        stop = min(start + COLUMN_CHUNK, n)
        basis = np.zeros((n, stop - start))
        basis[np.arange(start, stop), np.arange(stop - start)] = 1.0
        return start, ground.from_physical(action(ground.to_physical(basis)))

    with ThreadPoolExecutor(max_workers=workers or get_settings().workers) as pool:
        for start, block in pool.map(column_chunk, starts):
            out[:, start: start + block.shape[1]] = block
    return out


def assemble_amfs_dense(
    operator: MfsOperator,
    ground: Optional[GroundSpace] = None,
    dof_limit: Optional[int] = None,
    workers: Optional[int] = None,
) -> Tuple[np.ndarray, GroundSpace]:
    """Dense A_mfs in ground-space coordinates, column by column."""
    ground = ground or build_ground_space(operator.grid, operator.ops.D)
    limit = dof_limit or get_settings().dense_dof_limit
    if ground.size > limit:
        raise DofBudgetError(ground.size, limit)
    started = time.perf_counter()
    A = _assemble(ground, operator.apply, workers)
    elapsed = time.perf_counter() - started
    logger.info("Assembled dense A_mfs: n=%d coupled=%s (%.2fs)", ground.size, operator.coupled, elapsed)
    return A, ground


def similarity_transform(
    operator: MfsOperator, ground: GroundSpace, zero_lifting: bool = False
) -> Tuple[np.ndarray, np.ndarray]:
    """``S = I + N`` with ``N`` lifting the plate pair into the thick layer; ``N^2 = 0`` gives ``S^-1 = I - N``."""
    n = ground.size
    N = np.zeros((n, n))
    if not zero_lifting:
        _, s_1, s_2, s_d1, s_d2 = ground.slices()
        lifted = operator.lift_plate(ground.V_m)
        N[s_d1, s_1] = -lifted
        N[s_d2, s_2] = -lifted
    eye = np.eye(n)
    return eye + N, eye - N


@dataclass(frozen=True)
class BlockOperatorSet:
    operator: MfsOperator
    ground: GroundSpace
    A: np.ndarray
    S: np.ndarray
    S_inv: np.ndarray

    @property
    def coupled(self) -> bool:
        return self.operator.coupled

    def split(self, matrix: np.ndarray) -> Dict[str, np.ndarray]:
        n1 = self.ground.first_size
        return {
            "top_left": matrix[:n1, :n1],
            "top_right": matrix[:n1, n1:],
            "bottom_left": matrix[n1:, :n1],
            "bottom_right": matrix[n1:, n1:],
        }

    def fluid_structure_block(self) -> np.ndarray:
        return self.split(self.A)["top_left"]

    def thick_layer_block(self) -> np.ndarray:
        return self.split(self.A)["bottom_right"]

    def transformed(self) -> np.ndarray:
        return self.S @ self.A @ self.S_inv


def build_block_operators(
    lift: LiftingSolvers,
    coupled: bool = True,
    dof_limit: Optional[int] = None,
    workers: Optional[int] = None,
    zero_lifting: bool = False,
) -> BlockOperatorSet:
    operator = MfsOperator(lift, coupled=coupled)
    A, ground = assemble_amfs_dense(operator, dof_limit=dof_limit, workers=workers)
    S, S_inv = similarity_transform(operator, ground, zero_lifting=zero_lifting)
    return BlockOperatorSet(operator=operator, ground=ground, A=A, S=S, S_inv=S_inv)


def verify_decoupling(blocks: BlockOperatorSet, workers: Optional[int] = None) -> Dict[str, float]:
    """Relative Frobenius residual per block between ``S A S^-1`` and the explicit block formulas."""
    transformed = blocks.transformed()
    explicit = _assemble(blocks.ground, blocks.operator.transformed_apply, workers)
    scale = float(np.linalg.norm(blocks.A))
    report: Dict[str, float] = {}
    numeric, exact = blocks.split(transformed), blocks.split(explicit)
    for name in numeric:
        ref = float(np.linalg.norm(exact[name]))
        report[name] = float(np.linalg.norm(numeric[name] - exact[name])) / (ref if ref > 0.0 else scale)
    report["max"] = max(report.values())
    logger.info("Decoupling residuals: %s", {k: f"{v:.3e}" for k, v in report.items()})
    return report
