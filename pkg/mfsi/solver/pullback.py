"""Exact values of F and G obtained by pulling back defects from the moving domain.

A :class:`FieldSet` prescribes reference-frame velocity and pressure in closed
form together with a clamped plate motion. The physical fields are pushed
forward through the shear map, which is inverted pointwise with Newton's
method. The physical momentum defect and the plate traction are then evaluated
with five-point differences at the image points. Only the cutoff and the
definition of the map are shared with :mod:`mfsi.solver.transform`; none of
its coefficient fields is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import newton

from mfsi.errors import InvalidInputError
from mfsi.solver.grid import Grid
from mfsi.solver.mms import plate_shape, shape_peak
from mfsi.solver.transform import Cutoff
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

STEP = 5e-4
NEWTON_TOL = 1e-14
_OFFSETS = (-2, -1, 0, 1, 2)
_FIRST = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_SECOND = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass(frozen=True)
class FieldSet:
    """Reference velocity ``cos(t) U(y)``, pressure ``cos(t) P(y)`` and plate ``eta(t, s)``.

    ``U1 = horizontal sin(pi x / L) zeta (1 - zeta)`` and
    ``U3 = vertical sin(wave pi x / L) zeta^2`` with ``zeta = (z + H_f) / H_f``
    vanish on the walls; ``U3`` carries the interface value. The plate is
    ``eta = fraction delta0 sin(t + phase) chi(s) / max|chi|``.
    """

    name: str
    plate_mode: float = 1.0
    plate_fraction: float = 0.5
    phase: float = 0.0
    horizontal: float = 1.0
    vertical: float = 1.0
    wave: int = 1
    pressure: float = 1.0
    time: float = 0.0


FIELD_SETS: Dict[str, FieldSet] = {
    "rising": FieldSet("rising", plate_fraction=0.5, phase=0.4, horizontal=0.5, wave=1, time=0.3),
    "rocking": FieldSet(
        "rocking", plate_fraction=0.6, phase=1.3, horizontal=-0.8, vertical=0.6, wave=2, pressure=0.5, time=1.1
    ),
    "pressing": FieldSet(
        "pressing",
        plate_mode=1.5,
        plate_fraction=0.4,
        phase=2.2,
        horizontal=0.3,
        vertical=-0.7,
        pressure=2.0,
        time=2.0,
    ),
}


def _stencil(func: Callable[[float], np.ndarray], step: float = STEP) -> Tuple[np.ndarray, np.ndarray]:
    """First and second derivative of ``func(offset)`` at offset zero."""
    values = [func(k * step) for k in _OFFSETS]
    first = sum(c * v for c, v in zip(_FIRST, values)) / step
    second = sum(c * v for c, v in zip(_SECOND, values)) / step**2
    return first, second


class MovingFrame:
    """Closed-form fields of one :class:`FieldSet` in both frames."""

    def __init__(self, field_set: FieldSet, grid: Grid, cutoff: Optional[Cutoff] = None):
        self.fields = field_set
        self.grid = grid
        self.cutoff = cutoff or Cutoff(grid.alpha)
        self.amplitude = field_set.plate_fraction * self.cutoff.delta0 / shape_peak(field_set.plate_mode)
        if field_set.plate_fraction >= 1.0:
            raise InvalidInputError(f"field set '{field_set.name}' leaves the smallness ball")

    # ------------------------------------------------------------------ plate
    def plate(self, t, s, order: int = 0) -> np.ndarray:
        fs = self.fields
        return self.amplitude * np.sin(t + fs.phase) * plate_shape(fs.plate_mode, self.grid.L, s, order)

    def plate_rate(self, t, s) -> np.ndarray:
        fs = self.fields
        return self.amplitude * np.cos(t + fs.phase) * plate_shape(fs.plate_mode, self.grid.L, s)

    # ------------------------------------------------------------------ reference frame
    def velocity(self, t, y1, y3) -> np.ndarray:
        fs, g = self.fields, self.grid
        y1, y3 = np.broadcast_arrays(np.asarray(y1, dtype=float), np.asarray(y3, dtype=float))
        zeta = (y3 + g.H_f) / g.H_f
        u1 = fs.horizontal * np.sin(math.pi * y1 / g.L) * zeta * (1.0 - zeta)
        u3 = fs.vertical * np.sin(fs.wave * math.pi * y1 / g.L) * zeta**2
        return np.cos(t) * np.array([u1, u3])

    def pressure(self, t, y1, y3) -> np.ndarray:
        fs, g = self.fields, self.grid
        zeta = (np.asarray(y3, dtype=float) + g.H_f) / g.H_f
        return fs.pressure * np.cos(t) * np.cos(math.pi * np.asarray(y1, dtype=float) / g.L) * np.cos(math.pi * zeta)

    # ------------------------------------------------------------------ the map
    def forward(self, t, y1, y3) -> np.ndarray:
        return y3 + self.cutoff.derivatives(y3)[0] * self.plate(t, y1)

    def backward(self, t, x1, x3) -> np.ndarray:
        """Reference height of the physical point ``(x1, x3)``."""
        eta, x3 = np.broadcast_arrays(self.plate(t, x1), np.asarray(x3, dtype=float))
        eta, x3 = np.atleast_1d(eta).astype(float), np.atleast_1d(x3).astype(float)

        def residual(y):
            return y + self.cutoff.derivatives(y)[0] * eta - x3

        def slope(y):
            return 1.0 + self.cutoff.derivatives(y)[1] * eta

        return newton(residual, x3.copy(), fprime=slope, tol=NEWTON_TOL, maxiter=50)

    def _jacobian(self, t, y1, y3) -> Tuple[np.ndarray, np.ndarray]:
        """``J = det grad X`` and ``m = psi eta'`` at reference points."""
        psi, dpsi = self.cutoff.derivatives(y3)[:2]
        return 1.0 + dpsi * self.plate(t, y1), psi * self.plate(t, y1, 1)

    # ------------------------------------------------------------------ physical frame
    def physical_velocity(self, t, x1, x3) -> np.ndarray:
        """``a u(Y)`` with ``a = grad X / det grad X`` composed with ``Y``."""
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        y3 = self.backward(t, x1, x3)
        J, m = self._jacobian(t, x1, y3)
        u = self.velocity(t, x1, y3)
        return np.array([u[0] / J, (m * u[0] + J * u[1]) / J])

    def physical_pressure(self, t, x1, x3) -> np.ndarray:
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        return self.pressure(t, x1, self.backward(t, x1, x3))

    def momentum_defect(self, t, x1, x3) -> np.ndarray:
        """``d_t u - Lap u + (u . grad) u + grad pi`` of the physical fields."""
        u = self.physical_velocity(t, x1, x3)
        du1, d11 = _stencil(lambda e: self.physical_velocity(t, x1 + e, x3))
        du3, d33 = _stencil(lambda e: self.physical_velocity(t, x1, x3 + e))
        dut, _ = _stencil(lambda e: self.physical_velocity(t + e, x1, x3))
        dp1, _ = _stencil(lambda e: self.physical_pressure(t, x1 + e, x3))
        dp3, _ = _stencil(lambda e: self.physical_pressure(t, x1, x3 + e))
        return dut - (d11 + d33) + u[0] * du1 + u[1] * du3 + np.array([dp1, dp3])

    # ------------------------------------------------------------------ pulled-back defects
    def exact_F(self, t, y1, y3) -> np.ndarray:
        """``d_t u - Lap u + grad pi - b (physical defect)(X)`` at reference points."""
        y1 = np.atleast_1d(np.asarray(y1, dtype=float))
        y3 = np.atleast_1d(np.asarray(y3, dtype=float))
        dut, _ = _stencil(lambda e: self.velocity(t + e, y1, y3))
        _, d11 = _stencil(lambda e: self.velocity(t, y1 + e, y3))
        _, d33 = _stencil(lambda e: self.velocity(t, y1, y3 + e))
        dp1, _ = _stencil(lambda e: self.pressure(t, y1 + e, y3))
        dp3, _ = _stencil(lambda e: self.pressure(t, y1, y3 + e))
        physical = self.momentum_defect(t, y1, self.forward(t, y1, y3))
        J, m = self._jacobian(t, y1, y3)
        pulled = np.array([J * physical[0], physical[1] - m * physical[0]])
        return dut - (d11 + d33) + np.array([dp1, dp3]) - pulled

    def exact_G(self, t, s) -> np.ndarray:
        """Reference normal viscous stress minus the physical one on the deformed interface."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        eta = self.plate(t, s)
        reference, _ = _stencil(lambda e: self.velocity(t, s, e)[1])
        d1, _ = _stencil(lambda e: self.physical_velocity(t, s + e, eta))
        d3, _ = _stencil(lambda e: self.physical_velocity(t, s, eta + e))
        return 2.0 * reference - 2.0 * d3[1] + self.plate(t, s, 1) * (d1[1] + d3[0])

    # ------------------------------------------------------------------ discrete samples
    def sample(self, t: Optional[float] = None) -> Dict[str, np.ndarray]:
        """Fields on the MAC layout at time ``t`` (default: the field set's time)."""
        g = self.grid
        t = self.fields.time if t is None else t
        x1, z1 = np.meshgrid(g.s_nodes, g.z_centers, indexing="ij")
        x3, z3 = np.meshgrid(g.x_centers, g.z_faces, indexing="ij")
        xp, zp = np.meshgrid(g.x_centers, g.z_centers, indexing="ij")
        u = g.join_velocity(self.velocity(t, x1, z1)[0], self.velocity(t, x3, z3)[1])
        return {
            "u": u,
            "p": self.pressure(t, xp, zp).ravel(),
            "eta1": self.plate(t, g.s_nodes),
            "eta2": self.plate_rate(t, g.s_nodes),
            "g": self.velocity(t, g.x_centers, 0.0)[1],
        }


def pullback_defects(
    grid: Grid, field_set: FieldSet, cutoff: Optional[Cutoff] = None
) -> Tuple[Dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """Discrete sample of ``field_set`` with exact F at the cell centres and exact G at the plate vertices."""
    frame = MovingFrame(field_set, grid, cutoff)
    t = field_set.time
    yc1, yc3 = np.meshgrid(grid.x_centers, grid.z_centers, indexing="ij")
    F = frame.exact_F(t, yc1.ravel(), yc3.ravel()).reshape((2, grid.n_h, grid.n_zf))
    G = frame.exact_G(t, grid.s_nodes)
    logger.debug(
        "Pulled-back defects for '%s': max|F|=%.3e max|G|=%.3e", field_set.name, np.abs(F).max(), np.abs(G).max()
    )
    return frame.sample(t), F, G
