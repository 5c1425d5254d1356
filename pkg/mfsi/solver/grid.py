"""Reference geometry and the sparse difference operators shared by every solver module.

Layout (dim = 2):

* fluid box ``(0, L) x (-H_f, 0)`` on a MAC grid. Pressure sits at cell centres,
  ``u1`` on interior vertical faces, ``u3`` on interior horizontal faces. The
  interface row of ``u3`` (z = 0) is carried separately as ``g``.
* plate unknowns on the interior vertices ``s_i = i h`` of ``omega = (0, L)``;
  clamped ends ``eta_0 = eta_n = 0`` with the even ghost ``eta_{-1} = eta_1``.
* solid box ``(0, L) x (0, H_s)`` node-centred; unknowns on interior nodes, the
  interface row ``z = 0`` carries ``(0, P_m eta)``.

All arrays are flattened in C order with the horizontal index first.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Tuple

import numpy as np
import scipy.sparse as sps

from mfsi.errors import GridError, InvalidInputError, UnsupportedDimensionError
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

MIN_CELLS = 6


@dataclass(frozen=True)
class Grid:
    dim: int
    L: float
    H_f: float
    H_s: float
    alpha: float
    n_h: int
    n_zf: int
    n_zs: int

    @property
    def h(self) -> float:
        return self.L / self.n_h

    @property
    def hz_f(self) -> float:
        return self.H_f / self.n_zf

    @property
    def hz_s(self) -> float:
        return self.H_s / self.n_zs

    # DOF counts
    @property
    def n_u1(self) -> int:
        return (self.n_h - 1) * self.n_zf

    @property
    def n_u3(self) -> int:
        return self.n_h * (self.n_zf - 1)

    @property
    def n_u(self) -> int:
        return self.n_u1 + self.n_u3

    @property
    def n_p(self) -> int:
        return self.n_h * self.n_zf

    @property
    def n_w(self) -> int:
        """Interior plate vertices."""
        return self.n_h - 1

    @property
    def n_sx(self) -> int:
        return self.n_h - 1

    @property
    def n_sz(self) -> int:
        return self.n_zs - 1

    @property
    def n_d(self) -> int:
        return 2 * self.n_sx * self.n_sz

    @property
    def omega_measure(self) -> float:
        return self.L

    # coordinates
    @cached_property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.n_h) + 0.5) * self.h

    @cached_property
    def s_nodes(self) -> np.ndarray:
        """Interior plate vertices (also the interior vertical fluid faces)."""
        return np.arange(1, self.n_h) * self.h

    @cached_property
    def s_all(self) -> np.ndarray:
        return np.arange(self.n_h + 1) * self.h

    @cached_property
    def z_centers(self) -> np.ndarray:
        return -self.H_f + (np.arange(self.n_zf) + 0.5) * self.hz_f

    @cached_property
    def z_faces(self) -> np.ndarray:
        """Interior horizontal fluid faces, bottom to top."""
        return -self.H_f + np.arange(1, self.n_zf) * self.hz_f

    @cached_property
    def z_solid(self) -> np.ndarray:
        return np.arange(1, self.n_zs) * self.hz_s

    def dof_counts(self) -> Dict[str, int]:
        return {
            "velocity": self.n_u,
            "interface_velocity": self.n_h,
            "pressure": self.n_p,
            "plate": self.n_w,
            "solid": self.n_d,
        }

    # reshaping helpers; trailing axes (batched columns) are preserved
    def split_velocity(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        tail = u.shape[1:]
        u1 = u[: self.n_u1].reshape((self.n_h - 1, self.n_zf) + tail)
        u3 = u[self.n_u1:].reshape((self.n_h, self.n_zf - 1) + tail)
        return u1, u3

    def join_velocity(self, u1: np.ndarray, u3: np.ndarray) -> np.ndarray:
        tail = u1.shape[2:]
        return np.concatenate([u1.reshape((self.n_u1,) + tail), u3.reshape((self.n_u3,) + tail)])

    def split_solid(self, d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        tail = d.shape[1:]
        half = self.n_d // 2
        shape = (self.n_sx, self.n_sz) + tail
        return d[:half].reshape(shape), d[half:].reshape(shape)

    def join_solid(self, dx: np.ndarray, dz: np.ndarray) -> np.ndarray:
        tail = dx.shape[2:]
        half = self.n_d // 2
        return np.concatenate([dx.reshape((half,) + tail), dz.reshape((half,) + tail)])

    def pressure_field(self, p: np.ndarray) -> np.ndarray:
        return p.reshape((self.n_h, self.n_zf) + p.shape[1:])


def build_grid(config: Any) -> Grid:
    """Build a :class:`Grid` from a ``Config`` (or its geometry section)."""
    geo = getattr(config, "geometry", config)
    dim = int(geo.dim)
    if dim not in (2, 3):
        raise GridError(f"dim={dim} is not a spatial dimension of this model")
    if dim == 3:
        raise UnsupportedDimensionError(dim, "build_grid")
    for name in ("L", "H_f", "H_s", "alpha"):
        if not getattr(geo, name) > 0:
            raise GridError(f"{name} must be positive")
    for name in ("n_h", "n_zf", "n_zs"):
        if int(getattr(geo, name)) < MIN_CELLS:
            raise GridError(f"{name}={getattr(geo, name)} is below the stencil minimum of {MIN_CELLS} cells")
    if geo.alpha >= min(geo.H_f, geo.H_s):
        raise GridError(f"cutoff exceeds domain: alpha={geo.alpha} >= min(H_f, H_s)={min(geo.H_f, geo.H_s)}")

    grid = Grid(
        dim=dim,
        L=float(geo.L),
        H_f=float(geo.H_f),
        H_s=float(geo.H_s),
        alpha=float(geo.alpha),
        n_h=int(geo.n_h),
        n_zf=int(geo.n_zf),
        n_zs=int(geo.n_zs),
    )
    logger.debug("Grid built: h=%.4g hz_f=%.4g hz_s=%.4g dofs=%s", grid.h, grid.hz_f, grid.hz_s, grid.dof_counts())
    return grid


# ---------------------------------------------------------------------------
# 1-D stencils


def second_difference(n: int, spacing: float, ends: str = "dirichlet") -> sps.csr_matrix:
    """``[1, -2, 1] / spacing^2``; ``ends='reflect'`` uses the odd ghost ``-u`` at both ends."""
    main = -2.0 * np.ones(n)
    if ends == "reflect":
        main[0] = main[-1] = -3.0
    off = np.ones(n - 1)
    return sps.diags([off, main, off], [-1, 0, 1], format="csr") / spacing**2


def center_to_face(n: int, spacing: float) -> sps.csr_matrix:
    """Forward difference from ``n`` cell values to the ``n - 1`` faces between them."""
    ones = np.ones(n - 1)
    return sps.diags([-ones, ones], [0, 1], shape=(n - 1, n), format="csr") / spacing


def centered_first(n: int, spacing: float) -> sps.csr_matrix:
    ones = np.ones(n - 1)
    return sps.diags([-ones, ones], [-1, 1], format="csr") / (2.0 * spacing)


def clamped_bilaplacian(n: int, spacing: float) -> sps.csr_matrix:
    """Pentadiagonal clamped stencil; the even ghost turns the end diagonal into 7."""
    main = 6.0 * np.ones(n)
    main[0] = main[-1] = 7.0
    return sps.diags(
        [np.ones(n - 2), -4.0 * np.ones(n - 1), main, -4.0 * np.ones(n - 1), np.ones(n - 2)],
        [-2, -1, 0, 1, 2],
        format="csr",
    ) / spacing**4


def _unit_row(n: int, index: int) -> sps.csr_matrix:
    return sps.csr_matrix(([1.0], ([index], [0])), shape=(n, 1))


# ---------------------------------------------------------------------------
# assembled operators


@dataclass(frozen=True)
class DiscreteOperators:
    """Sparse fluid, plate and solid operators. Immutable once built."""

    grid: Grid
    mu_s: float
    lambda_s: float
    # fluid
    G: sps.csr_matrix
    D: sps.csr_matrix
    D_g: sps.csr_matrix
    lap0: sps.csr_matrix
    lap_g: sps.csr_matrix
    lap_gamma: sps.csr_matrix
    Rb: sps.csr_matrix
    E_top: sps.csr_matrix
    Q: sps.csr_matrix
    # plate
    lap_p: sps.csr_matrix
    bilap: sps.csr_matrix
    Pm: np.ndarray
    # solid
    lame0: sps.csr_matrix
    lame_bx: sps.csr_matrix
    lame_bz: sps.csr_matrix
    lap_solid: sps.csr_matrix
    K_I: sps.csr_matrix
    K_B: sps.csr_matrix

    @property
    def lame_b(self) -> sps.csr_matrix:
        return self.lame_bz

    def plate_mean(self, eta: np.ndarray) -> np.ndarray:
        return eta.mean(axis=0)

    def stress_trace_raw(self, d: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Normal stress at the interface before mean removal (``b`` = vertical interface data)."""
        return self.K_I @ d + self.K_B @ b


def build_operators(grid: Grid, mu_s: float = 1.0, lambda_s: float = 1.0) -> DiscreteOperators:
    n_h, n_zf, n_w = grid.n_h, grid.n_zf, grid.n_w
    h, hz = grid.h, grid.hz_f

    # fluid MAC operators
    G1 = sps.kron(center_to_face(n_h, h), sps.identity(n_zf))
    G3 = sps.kron(sps.identity(n_h), center_to_face(n_zf, hz))
    G = sps.vstack([G1, G3]).tocsr()
    D = (-G.T).tocsr()

    lap_u1 = sps.kron(second_difference(n_h - 1, h), sps.identity(n_zf)) + sps.kron(
        sps.identity(n_h - 1), second_difference(n_zf, hz, ends="reflect")
    )
    lap_u3 = sps.kron(second_difference(n_h, h, ends="reflect"), sps.identity(n_zf - 1)) + sps.kron(
        sps.identity(n_h), second_difference(n_zf - 1, hz)
    )
    lap0 = sps.block_diag([lap_u1, lap_u3], format="csr")

    top_face = grid.n_u1 + np.arange(n_h) * (n_zf - 1) + (n_zf - 2)
    Rb = sps.csr_matrix((np.ones(n_h), (np.arange(n_h), top_face)), shape=(n_h, grid.n_u))
    top_cell = np.arange(n_h) * n_zf + (n_zf - 1)
    E_top = sps.csr_matrix((np.ones(n_h), (np.arange(n_h), top_cell)), shape=(n_h, grid.n_p))
    lap_g = (Rb.T / hz**2).tocsr()
    D_g = (E_top.T / hz).tocsr()
    lap_gamma = second_difference(n_h, h, ends="reflect")

    # vertex -> centre average with clamped zeros at both ends
    rows = np.concatenate([np.arange(1, n_h), np.arange(0, n_h - 1)])
    cols = np.concatenate([np.arange(0, n_w), np.arange(0, n_w)])
    Q = sps.csr_matrix((0.5 * np.ones(rows.size), (rows, cols)), shape=(n_h, n_w))

    # plate
    lap_p = second_difference(n_w, h)
    bilap = clamped_bilaplacian(n_w, h)
    Pm = np.eye(n_w) - np.full((n_w, n_w), 1.0 / n_w)

    # solid Lamé operator on interior nodes
    n_sx, n_sz, hzs = grid.n_sx, grid.n_sz, grid.hz_s
    lam2 = 2.0 * mu_s + lambda_s
    mix = mu_s + lambda_s
    Ix, Iz = sps.identity(n_sx), sps.identity(n_sz)
    Dxx = sps.kron(second_difference(n_sx, h), Iz)
    Dzz = sps.kron(Ix, second_difference(n_sz, hzs))
    Cx = centered_first(n_sx, h)
    Dxz = sps.kron(Cx, centered_first(n_sz, hzs))
    lxx = lam2 * Dxx + mu_s * Dzz
    lzz = mu_s * Dxx + lam2 * Dzz
    lxz = mix * Dxz
    lame0 = sps.bmat([[lxx, lxz], [lxz, lzz]], format="csr")
    lap_s = sps.block_diag([Dxx + Dzz, Dxx + Dzz], format="csr")

    # interface data enters the first interior row j = 1
    E1 = sps.kron(Ix, _unit_row(n_sz, 0))
    lame_bz = sps.vstack([(-mix / (2.0 * hzs)) * (E1 @ Cx), (lam2 / hzs**2) * E1]).tocsr()
    lame_bx = sps.vstack([(mu_s / hzs**2) * E1, (-mix / (2.0 * hzs)) * (E1 @ Cx)]).tocsr()

    # stress trace: boundary residual of the symmetric stiffness, so K_I = hz_s * lame_bz^T
    K_I = (hzs * lame_bz.T).tocsr()
    K_B = (-(lam2 / hzs) * sps.identity(n_w) + mu_s * (hzs / 2.0) * second_difference(n_w, h)).tocsr()

    logger.debug("Operators assembled for n_h=%d n_zf=%d n_zs=%d", grid.n_h, grid.n_zf, grid.n_zs)
    return DiscreteOperators(
        grid=grid,
        mu_s=float(mu_s),
        lambda_s=float(lambda_s),
        G=G,
        D=D,
        D_g=D_g,
        lap0=lap0,
        lap_g=lap_g,
        lap_gamma=lap_gamma,
        Rb=Rb,
        E_top=E_top,
        Q=Q,
        lap_p=lap_p,
        bilap=bilap,
        Pm=Pm,
        lame0=lame0,
        lame_bx=lame_bx,
        lame_bz=lame_bz,
        lap_solid=lap_s,
        K_I=K_I,
        K_B=K_B,
    )


# ---------------------------------------------------------------------------
# projections and traces


def mean_project(grid: Grid, field: np.ndarray) -> np.ndarray:
    """Remove the discrete mean on omega (interior vertices or interface centres) or on the fluid cells.

    Plate fields vanish at the clamped ends, so the trapezoid rule on omega
    reduces to uniform interior weights.
    """
    values = np.asarray(field)
    if values.shape[0] not in (grid.n_w, grid.n_h, grid.n_p):
        raise InvalidInputError(
            f"field of length {values.shape[0]} matches neither omega ({grid.n_w}/{grid.n_h}) nor fluid ({grid.n_p})"
        )
    return values - values.mean(axis=0, keepdims=True)


def trace_interface(grid: Grid, field: np.ndarray) -> np.ndarray:
    """Second-order trace of a cell-centred fluid field at z = 0, sampled on the interior vertices."""
    values = np.asarray(field)
    if values.shape[0] == grid.n_p:
        values = grid.pressure_field(values)
    if values.shape[:2] != (grid.n_h, grid.n_zf):
        raise InvalidInputError(f"expected a cell-centred field of shape ({grid.n_h}, {grid.n_zf})")
    top = 1.5 * values[:, -1] - 0.5 * values[:, -2]
    return 0.5 * (top[:-1] + top[1:])


def gamma_m(grid: Grid, field: np.ndarray) -> np.ndarray:
    """Modified trace: interface restriction followed by mean removal."""
    return mean_project(grid, trace_interface(grid, field))


def vertex_laplacian_with_ghost(grid: Grid, eta: np.ndarray) -> np.ndarray:
    """Second difference on all vertices ``0..n`` using ``eta_0 = eta_n = 0`` and the clamped ghost."""
    full = np.concatenate([[eta[0]], [0.0], eta, [0.0], [eta[-1]]])
    return (full[2:] - 2.0 * full[1:-1] + full[:-2]) / grid.h**2
