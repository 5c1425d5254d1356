"""Shear diffeomorphism ``X(y) = (y1, y3 + psi(y3) eta(y1))`` and the coefficient fields it induces.

Conventions: index 0 is horizontal, index 1 vertical. ``a = Cof(grad Y)^T``,
``b = Cof(grad X)^T`` and every field is sampled at reference points ``y``;
fields named ``...(X)`` in the formulas below are compositions with ``X``.
Derivatives with respect to ``x`` are obtained from ``y``-derivatives through
``(grad Y)(X) = (grad X)^{-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import make_interp_spline

from mfsi.errors import InverseMapError, SmallnessViolationError
from mfsi.solver.grid import Grid
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

NEWTON_TOL = 1e-13


@dataclass(frozen=True)
class Cutoff:
    """C² cutoff: 1 on ``|z| <= alpha/2``, 0 on ``|z| >= alpha``, quintic smoothstep in between."""

    alpha: float

    @property
    def max_abs_derivative(self) -> float:
        # smoothstep slope peaks at 15/8 in the middle of the transition
        return 1.875 / (0.5 * self.alpha)

    @property
    def delta0(self) -> float:
        return 1.0 / (2.0 * self.max_abs_derivative)

    def derivatives(self, z) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return ``psi, psi', psi'', psi'''``; the third derivative is piecewise (jumps at the joins)."""
        z = np.asarray(z, dtype=float)
        half = 0.5 * self.alpha
        az = np.abs(z)
        sgn = np.sign(z)
        t = np.clip((az - half) / half, 0.0, 1.0)
        inside = (az > half) & (az < self.alpha)

        s0 = t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
        s1 = 30.0 * t**2 * (1.0 - t) ** 2
        s2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
        s3 = 60.0 * (6.0 * t**2 - 6.0 * t + 1.0)

        k = 1.0 / half
        psi = 1.0 - s0
        d1 = np.where(inside, -s1 * k * sgn, 0.0)
        d2 = np.where(inside, -s2 * k**2, 0.0)
        d3 = np.where(inside, -s3 * k**3 * sgn, 0.0)
        return psi, d1, d2, d3


def cutoff_eval(z, alpha: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    psi, d1, d2, _ = Cutoff(alpha).derivatives(z)
    return psi, d1, d2


@dataclass(frozen=True)
class SmallnessCheck:
    ok: bool
    attained: float
    delta0: float

    @property
    def margin(self) -> float:
        return self.attained / self.delta0

    def raise_if_violated(self, sample: Optional[int] = None) -> "SmallnessCheck":
        if not self.ok:
            raise SmallnessViolationError(self.attained, self.delta0, sample)
        return self


def check_smallness(eta1: np.ndarray, delta0: float) -> SmallnessCheck:
    attained = float(np.max(np.abs(eta1))) if np.size(eta1) else 0.0
    return SmallnessCheck(ok=attained <= delta0, attained=attained, delta0=float(delta0))


@dataclass(frozen=True)
class DiffeoFields:
    """Transform coefficients at reference points ``(y1, y3)``; arrays share the points' shape."""

    y1: np.ndarray
    y3: np.ndarray
    psi: np.ndarray
    eta: np.ndarray
    deta: np.ndarray
    X3: np.ndarray
    detJ: np.ndarray
    gradX: np.ndarray   # [row, col, ...]
    cof: np.ndarray     # Cof(grad X)
    b: np.ndarray       # Cof(grad X)^T
    aX: np.ndarray      # a(X) = grad X / det grad X
    Yx: np.ndarray      # (grad Y)(X), [l, j] = dY_l/dx_j
    dA: np.ndarray      # [j, i, k] = d a_ik / d x_j (X)
    d2A: np.ndarray     # [j, i, k] = d^2 a_ik / d x_j^2 (X)
    d2Y: np.ndarray     # [l, j] = d^2 Y_l / d x_j^2 (X)
    dtX: np.ndarray     # [l]
    dta: np.ndarray     # [i, k] = (d_t a)(X)
    dtY: np.ndarray     # [l] = (d_t Y)(X)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.y1.shape


def shear_fields(
    cutoff: Cutoff,
    y1: np.ndarray,
    y3: np.ndarray,
    eta_jet: Sequence[np.ndarray],
    rate_jet: Sequence[np.ndarray],
) -> DiffeoFields:
    """Closed-form shear coefficients from the jets ``(eta, eta', eta'', eta''')`` and ``(eta_t, eta_t')``."""
    y1, y3 = np.broadcast_arrays(np.asarray(y1, dtype=float), np.asarray(y3, dtype=float))
    e0, e1, e2, e3 = (np.broadcast_to(np.asarray(e, dtype=float), y1.shape) for e in eta_jet)
    v0, v1 = (np.broadcast_to(np.asarray(v, dtype=float), y1.shape) for v in rate_jet)
    p0, p1, p2, p3 = cutoff.derivatives(y3)
    zero = np.zeros(y1.shape)
    one = np.ones(y1.shape)

    J = 1.0 + p1 * e0
    m = p0 * e1
    r = 1.0 / J

    # y-derivatives, index 0 = y1, 1 = y3
    Jd = (p1 * e1, p2 * e0)
    md = (p0 * e2, p1 * e1)
    Jdd = ((p1 * e2, p2 * e1), (p2 * e1, p3 * e0))
    mdd = ((p0 * e3, p1 * e2), (p1 * e2, p2 * e1))
    rd = tuple(-Jd[q] / J**2 for q in range(2))
    rdd = tuple(tuple(-Jdd[q][n] / J**2 + 2.0 * Jd[q] * Jd[n] / J**3 for n in range(2)) for q in range(2))

    A = np.array([[r, zero], [m * r, one]])
    Yx = np.array([[one, zero], [-m * r, r]])
    dA_y = np.array([[[rd[q], zero], [md[q] * r + m * rd[q], zero]] for q in range(2)])
    ddA_y = np.array(
        [
            [
                [[rdd[n][q], zero], [mdd[n][q] * r + md[q] * rd[n] + md[n] * rd[q] + m * rdd[n][q], zero]]
                for q in range(2)
            ]
            for n in range(2)
        ]
    )
    dYx_y = np.array([[[zero, zero], [-(md[n] * r + m * rd[n]), rd[n]]] for n in range(2)])

    # d a / d x_j (X) = sum_l d_{y_l} A * Yx[l, j]
    dA = np.einsum("lik...,lj...->jik...", dA_y, Yx)
    # d_{y_n} of the above
    d_dA = np.einsum("nlik...,lj...->njik...", ddA_y, Yx) + np.einsum("lik...,nlj...->njik...", dA_y, dYx_y)
    d2A = np.einsum("njik...,nj...->jik...", d_dA, Yx)
    d2Y = np.einsum("nlj...,nj...->lj...", dYx_y, Yx)

    # time derivatives; X moves only vertically with rate psi * eta_t
    Jt = p1 * v0
    mt = p0 * v1
    rt = -Jt / J**2
    dtA = np.array([[rt, zero], [mt * r + m * rt, zero]])
    vertical_rate = r * p0 * v0
    dta = dtA - dA_y[1] * vertical_rate
    dtY = np.array([zero, -vertical_rate])
    dtX = np.array([zero, p0 * v0])

    gradX = np.array([[one, zero], [m, J]])
    cof = np.array([[J, -m], [zero, one]])
    b = np.array([[J, zero], [-m, one]])

    return DiffeoFields(
        y1=y1,
        y3=y3,
        psi=p0,
        eta=e0,
        deta=e1,
        X3=y3 + p0 * e0,
        detJ=J,
        gradX=gradX,
        cof=cof,
        b=b,
        aX=A,
        Yx=Yx,
        dA=dA,
        d2A=d2A,
        d2Y=d2Y,
        dtX=dtX,
        dta=dta,
        dtY=dtY,
    )


def plate_jets(grid: Grid, eta: np.ndarray, x: np.ndarray, order: int = 3) -> Tuple[np.ndarray, ...]:
    """Values and horizontal derivatives of a plate field at positions ``x``.

    The field is extended by its clamped zeros and interpolated by a quintic
    spline, so the third derivative stays accurate up to the walls.
    """
    values = np.concatenate([[0.0], np.asarray(eta, dtype=float), [0.0]])
    spline = make_interp_spline(grid.s_all, values, k=5)
    x = np.asarray(x, dtype=float)
    return tuple(spline(x, nu=q) for q in range(order + 1))


def augmented_axes(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Cell centres of the fluid box padded with the boundary coordinates."""
    xa = np.concatenate([[0.0], grid.x_centers, [grid.L]])
    za = np.concatenate([[-grid.H_f], grid.z_centers, [0.0]])
    return xa, za


def build_diffeo(
    eta1: np.ndarray,
    eta2: np.ndarray,
    grid: Grid,
    cutoff: Optional[Cutoff] = None,
    points: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> DiffeoFields:
    """Transform fields for plate displacement ``eta1`` and velocity ``eta2``.

    ``points`` defaults to the padded cell-centre mesh used by the nonlinear terms.
    Raises :class:`SmallnessViolationError` when ``max|eta1| > delta0``.
    """
    cutoff = cutoff or Cutoff(grid.alpha)
    check_smallness(eta1, cutoff.delta0).raise_if_violated()
    if points is None:
        xa, za = augmented_axes(grid)
        y1, y3 = np.meshgrid(xa, za, indexing="ij")
    else:
        y1, y3 = np.broadcast_arrays(*points)
    eta_jet = plate_jets(grid, eta1, y1, order=3)
    rate_jet = plate_jets(grid, eta2, y1, order=1)
    return shear_fields(cutoff, y1, y3, eta_jet, rate_jet)


def invert_vertical(
    cutoff: Cutoff, eta: np.ndarray, x3: np.ndarray, tol: float = NEWTON_TOL, maxiter: int = 200
) -> np.ndarray:
    """Solve ``y3 + psi(y3) eta = x3`` pointwise by Newton's method with a bisection safeguard."""
    eta, x3 = np.broadcast_arrays(np.asarray(eta, dtype=float), np.asarray(x3, dtype=float))
    width = np.abs(eta)
    lo = x3 - width
    hi = x3 + width
    y = x3.copy()
    scale = np.maximum(1.0, np.abs(x3))
    for _ in range(maxiter):
        psi, dpsi, _, _ = cutoff.derivatives(y)
        residual = y + psi * eta - x3
        done = np.abs(residual) <= tol * scale
        if np.all(done):
            return y
        lo = np.where(residual < 0.0, y, lo)
        hi = np.where(residual > 0.0, y, hi)
        step = y - residual / (1.0 + dpsi * eta)
        rejected = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        y = np.where(done, y, np.where(rejected, 0.5 * (lo + hi), step))
    raise InverseMapError(f"inverse shear map did not converge in {maxiter} iterations")


def inverse_map(grid: Grid, eta1: np.ndarray, x1: np.ndarray, x3: np.ndarray, cutoff: Optional[Cutoff] = None):
    """``Y(x)`` for physical points ``(x1, x3)``; the horizontal coordinate is unchanged."""
    cutoff = cutoff or Cutoff(grid.alpha)
    eta_at = plate_jets(grid, eta1, np.asarray(x1, dtype=float), order=0)[0]
    return np.asarray(x1, dtype=float), invert_vertical(cutoff, eta_at, x3)


def forward_map(grid: Grid, eta1: np.ndarray, y1: np.ndarray, y3: np.ndarray, cutoff: Optional[Cutoff] = None):
    cutoff = cutoff or Cutoff(grid.alpha)
    eta_at = plate_jets(grid, eta1, np.asarray(y1, dtype=float), order=0)[0]
    psi = cutoff.derivatives(y3)[0]
    return np.asarray(y1, dtype=float), np.asarray(y3, dtype=float) + psi * eta_at


def transform_estimates(grid: Grid, eta1: np.ndarray, cutoff: Optional[Cutoff] = None) -> dict:
    """Sup-norm deviations of the transform from the identity, scaled by ``||eta1||_{C^1}``."""
    fields = build_diffeo(eta1, np.zeros_like(eta1), grid, cutoff)
    eye = np.eye(2)[:, :, None, None]
    c1 = float(np.max(np.abs(fields.eta)) + np.max(np.abs(fields.deta)))
    if c1 == 0.0:
        return {"c1_norm": 0.0, "gradX": 0.0, "a": 0.0, "det": 0.0, "det_min": 1.0, "det_max": 1.0}
    return {
        "c1_norm": c1,
        "gradX": float(np.max(np.abs(fields.gradX - eye))) / c1,
        "a": float(np.max(np.abs(fields.aX - eye))) / c1,
        "det": float(np.max(np.abs(fields.detJ - 1.0))) / c1,
        "det_min": float(fields.detJ.min()),
        "det_max": float(fields.detJ.max()),
    }
