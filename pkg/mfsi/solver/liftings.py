"""Stationary solution operators used to reduce the coupled system to operator form.

One sparse LU per problem, computed once and shared. Every solve accepts a
single vector or a 2-D array of columns.
"""
from __future__ import annotations

import threading
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from mfsi.errors import CompatibilityError
from mfsi.solver.grid import DiscreteOperators
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

COMPAT_TOL = 1e-10
ILL_CONDITIONED = 1e8


def lu_solve_any(lu: spla.SuperLU, rhs: np.ndarray) -> np.ndarray:
    """Solve with a real factorization; complex right-hand sides are split into parts."""
    rhs = np.asarray(rhs)
    if np.iscomplexobj(rhs):
        return lu_solve_any(lu, rhs.real) + 1j * lu_solve_any(lu, rhs.imag)
    return lu.solve(np.ascontiguousarray(rhs, dtype=float))


def _pad(rhs: np.ndarray, extra: int) -> np.ndarray:
    return np.concatenate([rhs, np.zeros((extra,) + rhs.shape[1:], dtype=rhs.dtype)])


class LiftingSolvers:
    """Factorized Neumann, Stokes and Lamé problems plus the dense added-mass matrix."""

    def __init__(self, ops: DiscreteOperators, delta: float):
        self.ops = ops
        self.grid = ops.grid
        self.delta = float(delta)
        self.mu_s = ops.mu_s
        self.lambda_s = ops.lambda_s
        self._lock = threading.Lock()

        g = self.grid
        ones_p = sps.csr_matrix(np.ones((g.n_p, 1)))
        neumann = sps.bmat([[ops.D @ ops.G, ones_p], [ones_p.T, None]], format="csc")
        self._neumann_lu = spla.splu(neumann)

        stokes = sps.bmat(
            [
                [-ops.lap0, ops.G, None],
                [ops.D, None, ones_p],
                [None, ones_p.T, None],
            ],
            format="csc",
        )
        self._stokes_lu = spla.splu(stokes)
        self._lame_lu = spla.splu(ops.lame0.tocsc())

        self._mass, mass_full, inertia_full = self._assemble_added_mass()
        self._mass_lu = sla.lu_factor(mass_full)
        self._inertia_lu = sla.lu_factor(inertia_full)
        self.mass_condition = float(np.linalg.cond(mass_full))
        if self.mass_condition > ILL_CONDITIONED:
            logger.warning("Added-mass matrix is ill-conditioned: cond=%.3e", self.mass_condition)
        logger.debug("Lifting solvers factorized (added-mass cond=%.3e)", self.mass_condition)

    def _solve(self, lu: spla.SuperLU, rhs: np.ndarray) -> np.ndarray:
        with self._lock:
            return lu_solve_any(lu, rhs)

    def project_mean(self, field: np.ndarray) -> np.ndarray:
        return self.ops.Pm @ field

    # ------------------------------------------------------------------ Neumann
    def _neumann_cells(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs)
        sol = self._solve(self._neumann_lu, _pad(rhs, 1))
        phi = sol[: self.grid.n_p]
        return phi - phi.mean(axis=0, keepdims=True)

    def neumann_solve(
        self,
        flux_top: np.ndarray,
        flux_bottom: Optional[np.ndarray] = None,
        flux_left: Optional[np.ndarray] = None,
        flux_right: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Harmonic potential with outward normal derivative data on the four sides of the fluid box."""
        g = self.grid
        zeros_h = np.zeros(g.n_h)
        zeros_v = np.zeros(g.n_zf)
        top = np.asarray(flux_top, dtype=float)
        bottom = zeros_h if flux_bottom is None else np.asarray(flux_bottom, dtype=float)
        left = zeros_v if flux_left is None else np.asarray(flux_left, dtype=float)
        right = zeros_v if flux_right is None else np.asarray(flux_right, dtype=float)

        total = g.h * (top.sum() + bottom.sum()) + g.hz_f * (left.sum() + right.sum())
        scale = g.h * (np.abs(top).sum() + np.abs(bottom).sum()) + g.hz_f * (np.abs(left).sum() + np.abs(right).sum())
        if abs(total) > COMPAT_TOL * max(scale, 1.0):
            raise CompatibilityError("boundary flux does not integrate to zero", float(total))

        rhs = np.zeros((g.n_h, g.n_zf))
        rhs[:, -1] -= top / g.hz_f
        rhs[:, 0] -= bottom / g.hz_f
        rhs[0, :] -= left / g.h
        rhs[-1, :] -= right / g.h
        return self._neumann_cells(rhs.ravel())

    def neumann_interface(self, c: np.ndarray) -> np.ndarray:
        """N1: potential with flux ``P_m c`` through the interface and zero flux elsewhere."""
        ops = self.ops
        return self._neumann_cells(-(ops.D_g @ (ops.Q @ (ops.Pm @ c))))

    def weak_neumann(self, f: np.ndarray) -> np.ndarray:
        """N2: weak Neumann potential of a face field."""
        return self._neumann_cells(self.ops.D @ f)

    def helmholtz_project(self, f: np.ndarray) -> np.ndarray:
        return f - self.ops.G @ self.weak_neumann(f)

    def neumann_viscous(self, u: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Pressure part driven by the normal trace of the viscous term."""
        ops = self.ops
        return self.weak_neumann(ops.lap0 @ u + ops.lap_g @ g)

    # ------------------------------------------------------------------ Stokes
    def stokes_lift(self, b: np.ndarray, check: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """Stationary Stokes flow with interface velocity ``b e3`` (vertex data); returns ``(w, psi)``."""
        ops, g = self.ops, self.grid
        b = np.asarray(b)
        if check:
            mean = np.abs(b.mean(axis=0))
            scale = np.maximum(np.abs(b).max(axis=0), 1.0)
            if np.any(mean > COMPAT_TOL * scale):
                raise CompatibilityError("interface data for the Stokes lifting must be mean-zero", float(np.max(mean)))
        gamma = ops.Q @ b
        rhs = np.concatenate([ops.lap_g @ gamma, -(ops.D_g @ gamma), np.zeros((1,) + b.shape[1:], dtype=b.dtype)])
        sol = self._solve(self._stokes_lu, rhs)
        w = sol[: g.n_u]
        psi = sol[g.n_u: g.n_u + g.n_p]
        return w, psi - psi.mean(axis=0, keepdims=True)

    # ------------------------------------------------------------------ Lamé
    def lame_lift(self, bz: np.ndarray, bx: Optional[np.ndarray] = None) -> np.ndarray:
        """Static Lamé displacement with interface data ``(bx, bz)`` and zero data elsewhere."""
        ops = self.ops
        rhs = -(ops.lame_bz @ bz)
        if bx is not None:
            rhs = rhs - ops.lame_bx @ bx
        return self._solve(self._lame_lu, rhs)

    # ------------------------------------------------------------------ added mass
    def _assemble_added_mass(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``M_s = Id + gamma_m N1`` on mean-zero data, its invertible completion and the plate-row inertia.

        The trace of ``N1 f`` is the top-cell value advanced half a cell along
        the known interface flux ``Q P_m f``.
        """
        ops, g = self.ops, self.grid
        Pm = ops.Pm
        # columns of P_m span the mean-zero subspace
        n1 = self.neumann_interface(Pm)
        trace = Pm @ (ops.Q.T @ (ops.E_top @ n1 + 0.5 * g.hz_f * (ops.Q @ Pm)))
        mass = Pm + trace
        constants = np.eye(g.n_w) - Pm
        # the coupled rows also accelerate the solid half cell between z = 0 and the first interior node
        inertia = mass + 0.5 * g.hz_s * Pm
        return mass, mass + constants, inertia + constants

    def added_mass_matrix(self) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
        return self._mass, self._mass_lu

    def added_mass_apply(self, f: np.ndarray) -> np.ndarray:
        return self._mass @ f

    def added_mass_solve(self, f: np.ndarray) -> np.ndarray:
        """Inverse of the added-mass operator on mean-zero data."""
        return sla.lu_solve(self._mass_lu, self.project_mean(f))

    def inertia_solve(self, f: np.ndarray) -> np.ndarray:
        """Inverse of ``M_s + (hz_s / 2) P_m``, the mass seen by the plate row of the coupled system."""
        return sla.lu_solve(self._inertia_lu, self.project_mean(f))

    # ------------------------------------------------------------------ stress traces
    def stress_trace_K(self, f: np.ndarray, b: Optional[np.ndarray] = None) -> np.ndarray:
        """K: mean-free normal stress of the solid at the interface.

        One-sided three-point derivative of the vertical component; ``b`` is
        the vertical interface value. The horizontal interface value is zero,
        so the ``lambda_s`` horizontal divergence drops out at z = 0.
        """
        g = self.grid
        _, fz = g.split_solid(f)
        b = np.zeros(fz.shape[:1] + fz.shape[2:], dtype=fz.dtype) if b is None else np.asarray(b)
        lam2 = 2.0 * self.mu_s + self.lambda_s
        normal = (-3.0 * b + 4.0 * fz[:, 0] - fz[:, 1]) / (2.0 * g.hz_s)
        return self.project_mean(lam2 * normal)

    def thick_traction(self, d1, d2, b1=None, b2=None) -> np.ndarray:
        """T_s(d1, d2) = K(d1 + delta d2)."""
        b = None
        if b1 is not None or b2 is not None:
            b = (0.0 if b1 is None else b1) + self.delta * (0.0 if b2 is None else b2)
        return self.stress_trace_K(d1 + self.delta * d2, b)
