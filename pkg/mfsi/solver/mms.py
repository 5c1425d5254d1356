"""Manufactured periodic solutions with closed-form forcings.

Every recipe oscillates in the first harmonic only. The plate shape is the
clamped, mean-free profile ``chi_m(s) = sin(2 m a) sin(a)^2`` with ``a = pi s / L``.
The fluid velocity is the curl of ``C Phi(x) B(zeta)``, where ``Phi' = chi_m``
and ``B = 3 zeta^2 - 2 zeta^3``, so it vanishes on the bottom and lateral walls
and matches the plate velocity on the interface. The solid displacement
carries the plate on ``z = 0`` and vanishes on its outer walls; its vertical
component decays linearly across the layer, or along
``q(zeta) = cos(pi zeta / 2) + sin(pi zeta) / 2`` for curved recipes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from mfsi.errors import CompatibilityError, InvalidInputError
from mfsi.solver.grid import Grid
from mfsi.solver.nonlinear import nonlinear_rhs_harmonics
from mfsi.solver.state import HarmonicForcing, PeriodicState
from mfsi.solver.transform import Cutoff, check_smallness
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

COMPATIBILITY_TOL = 1e-12
MMS_ERRORS = ("error_u", "error_eta1", "error_d")
_FINE_SAMPLES = 4001


@dataclass(frozen=True)
class Recipe:
    """Plate mode plus pressure, shear and pressure-offset coefficients relative to the amplitude."""

    name: str
    mode: float
    pressure: complex = 0.0
    shear: complex = 0.0
    offset: complex = 0.0
    still: bool = False
    curved: bool = False


CATALOGUE: Dict[str, Recipe] = {
    "rest": Recipe("rest", 1, still=True),
    "standing-wave": Recipe("standing-wave", 1, pressure=1.0),
    "sloshing": Recipe("sloshing", 2, pressure=1j, shear=0.5j, offset=0.25),
    "curved-layer": Recipe("curved-layer", 1, pressure=0.5, shear=0.25, curved=True),
}


def get_recipe(recipe: Union[str, Recipe]) -> Recipe:
    if isinstance(recipe, Recipe):
        return recipe
    try:
        return CATALOGUE[recipe]
    except KeyError:
        raise InvalidInputError(f"unknown recipe '{recipe}' (known: {', '.join(CATALOGUE)})") from None


def _terms(mode: float) -> Tuple[Tuple[float, float], ...]:
    # sin(2ma) sin(a)^2 as a sum of sines
    return ((2.0 * mode, 0.5), (2.0 * mode + 2.0, -0.25), (2.0 * mode - 2.0, -0.25))


def plate_shape(mode: float, L: float, s: np.ndarray, order: int = 0) -> np.ndarray:
    """``d^order chi / ds^order`` at ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for n, c in _terms(mode):
        if n == 0.0:
            continue
        k = n * math.pi / L
        out += c * k**order * np.sin(k * s + 0.5 * order * math.pi)
    return out


def plate_primitive(mode: float, L: float, s: np.ndarray) -> np.ndarray:
    """``Phi(s) = int_0^s chi``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for n, c in _terms(mode):
        if n == 0.0:
            continue
        k = n * math.pi / L
        out += c * (1.0 - np.cos(k * s)) / k
    return out


def _profile(zeta: np.ndarray, order: int) -> np.ndarray:
    if order == 0:
        return 3.0 * zeta**2 - 2.0 * zeta**3
    if order == 1:
        return 6.0 * zeta - 6.0 * zeta**2
    if order == 2:
        return 6.0 - 12.0 * zeta
    return np.full_like(zeta, -12.0)


def _solid_profile(zeta: np.ndarray, order: int, curved: bool) -> np.ndarray:
    """Vertical decay of the solid displacement, ``q(0) = 1`` and ``q(1) = 0``, differentiated in ``zeta``."""
    zeta = np.asarray(zeta, dtype=float)
    if not curved:
        return (1.0 - zeta, np.full_like(zeta, -1.0), np.zeros_like(zeta))[order]
    a, b = 0.5 * math.pi * zeta, math.pi * zeta
    if order == 0:
        return np.cos(a) + 0.5 * np.sin(b)
    if order == 1:
        return -0.5 * math.pi * np.sin(a) + 0.5 * math.pi * np.cos(b)
    return -0.25 * math.pi**2 * np.cos(a) - 0.5 * math.pi**2 * np.sin(b)


def shape_peak(mode: float) -> float:
    s = np.linspace(0.0, 1.0, _FINE_SAMPLES)
    return float(np.max(np.abs(plate_shape(mode, 1.0, s))))


def amplitude_for_margin(
    grid: Grid, recipe: Union[str, Recipe], fraction: float, cutoff: Optional[Cutoff] = None
) -> float:
    """Amplitude giving ``max|eta1| = fraction * delta0``."""
    cutoff = cutoff or Cutoff(grid.alpha)
    return fraction * cutoff.delta0 / shape_peak(get_recipe(recipe).mode)


def _check_compatibility(recipe: Recipe, L: float) -> None:
    ends = np.array([0.0, L])
    defects = {
        "clamped value": np.abs(plate_shape(recipe.mode, L, ends)).max(),
        "clamped slope": np.abs(plate_shape(recipe.mode, L, ends, 1)).max() * L,
        "wall flux": abs(float(plate_primitive(recipe.mode, L, np.array([L]))[0])) / L,
    }
    for name, value in defects.items():
        if value > COMPATIBILITY_TOL:
            raise CompatibilityError(f"recipe '{recipe.name}' violates the {name} condition", float(value))


def _embed(first: np.ndarray, K: int) -> np.ndarray:
    out = np.zeros((2 * K + 1,) + first.shape, dtype=complex)
    out[K + 1] = first
    out[K - 1] = np.conj(first)
    return out


def mms_generate(
    recipe: Union[str, Recipe],
    grid: Grid,
    physics: Any,
    K: int,
    amplitude: float,
    nonlinear: bool = False,
    M: Optional[int] = None,
    pressure_offset: Optional[complex] = None,
    cutoff: Optional[Cutoff] = None,
    check: bool = True,
) -> Tuple[PeriodicState, HarmonicForcing, Dict[str, Any]]:
    """Exact periodic state, its forcing harmonics and the pressure offset harmonics.

    ``eta1(t) = amplitude sin(omega0 t) chi(s)``. With ``nonlinear=True`` the
    nonlinear terms of the exact state are subtracted from the forcing, so the
    exact state solves the full transformed system. ``check=False`` skips the
    smallness test when only the forcing is wanted.
    """
    rec = get_recipe(recipe)
    if K < 1:
        raise InvalidInputError("manufactured solutions need K >= 1")
    _check_compatibility(rec, grid.L)
    cutoff = cutoff or Cutoff(grid.alpha)
    if rec.still:
        amplitude = 0.0
    s_fine = np.linspace(0.0, grid.L, _FINE_SAMPLES)
    if check:
        check_smallness(amplitude * plate_shape(rec.mode, grid.L, s_fine), cutoff.delta0).raise_if_violated()

    mu, lam, delta = float(physics.mu_s), float(physics.lambda_s), float(physics.delta)
    s1 = 1j * physics.omega0
    damp = 1.0 + s1 * delta
    lam2, mix = 2.0 * mu + lam, mu + lam
    L, Hf, Hs, m = grid.L, grid.H_f, grid.H_s, rec.mode
    kx, kf, ks = math.pi / L, math.pi / Hf, math.pi / Hs

    A = -0.5j * amplitude
    C = s1 * A
    P = rec.pressure * amplitude
    S = rec.shear * amplitude
    offset = rec.offset * amplitude if pressure_offset is None else complex(pressure_offset)

    def chi(x, order=0):
        return plate_shape(m, L, x, order)

    # fluid on the MAC faces
    x1, z1 = np.meshgrid(grid.s_nodes, grid.z_centers, indexing="ij")
    x3, z3 = np.meshgrid(grid.x_centers, grid.z_faces, indexing="ij")
    zeta1, zeta3 = (z1 + Hf) / Hf, (z3 + Hf) / Hf
    u1 = -C * plate_primitive(m, L, x1) * _profile(zeta1, 1) / Hf
    u3 = C * chi(x3) * _profile(zeta3, 0)
    lap_u1 = -C * (chi(x1, 1) * _profile(zeta1, 1) / Hf + plate_primitive(m, L, x1) * _profile(zeta1, 3) / Hf**3)
    lap_u3 = C * (chi(x3, 2) * _profile(zeta3, 0) + chi(x3) * _profile(zeta3, 2) / Hf**2)
    dpx = -P * kx * np.sin(kx * x1) * np.cos(kf * z1)
    dpz = -P * kf * np.cos(kx * x3) * np.sin(kf * z3)
    f1 = s1 * u1 - lap_u1 + dpx
    f3 = s1 * u3 - lap_u3 + dpz

    xc = grid.x_centers
    gam = C * chi(xc)
    f_gamma = s1 * gam - C * (chi(xc, 2) - 6.0 * chi(xc) / Hf**2)

    xp, zp = np.meshgrid(grid.x_centers, grid.z_centers, indexing="ij")
    p = (P * np.cos(kx * xp) * np.cos(kf * zp)).ravel()
    p = p - p.mean()

    # plate
    s = grid.s_nodes
    eta1 = A * chi(s)
    eta2 = s1 * eta1

    def q(z, order=0):
        return _solid_profile(z / Hs, order, rec.curved) / Hs**order

    zero = np.zeros_like(s)
    sigma33 = lam2 * damp * eta1 * q(zero, 1)
    g = s1 * eta2 + A * chi(s, 4) - s1 * A * chi(s, 2) - (P * np.cos(kx * s) + offset) - sigma33

    # solid on the interior nodes
    def lame_z(x, z):
        return mu * A * (chi(x, 2) * q(z) + chi(x) * q(z, 2)) + mix * (
            S * kx * ks * np.cos(kx * x) * np.cos(ks * z) + A * chi(x) * q(z, 2)
        )

    xs, zs = np.meshgrid(grid.s_nodes, grid.z_solid, indexing="ij")
    dx = S * np.sin(kx * xs) * np.sin(ks * zs)
    dz = A * chi(xs) * q(zs)
    lame_x = -mu * (kx**2 + ks**2) * dx + mix * (-kx**2 * dx + A * chi(xs, 1) * q(zs, 1))
    d1 = grid.join_solid(dx, dz)
    h = grid.join_solid(s1**2 * dx - damp * lame_x, s1**2 * dz - damp * lame_z(xs, zs))
    h_gamma = s1**2 * eta1 - damp * lame_z(s, zero)

    exact = PeriodicState(
        T=float(physics.T),
        K=K,
        u=_embed(grid.join_velocity(u1, u3), K),
        p=_embed(p, K),
        eta1=_embed(eta1, K),
        eta2=_embed(eta2, K),
        d1=_embed(d1, K),
        d2=_embed(s1 * d1, K),
        g=_embed(gam, K),
        p_gamma=_embed(P * np.cos(kx * xc), K),
    )
    forcing = HarmonicForcing(
        K=K,
        f=_embed(grid.join_velocity(f1, f3), K),
        f_gamma=_embed(f_gamma, K),
        g=_embed(g, K),
        h=_embed(h, K),
        h_gamma=_embed(h_gamma, K),
    )
    if nonlinear and amplitude > 0.0:
        forcing = forcing.combine(nonlinear_rhs_harmonics(exact, grid, M=M, cutoff=cutoff), -1.0)

    info = {
        "recipe": rec.name,
        "amplitude": float(amplitude),
        "pressure_offset": _embed(np.array([offset]), K)[:, 0],
        "smallness_margin": float(amplitude * shape_peak(m) / cutoff.delta0),
        "nonlinear": bool(nonlinear),
    }
    logger.debug("Manufactured solution '%s' (amplitude=%.3e, K=%d, nonlinear=%s)", rec.name, amplitude, K, nonlinear)
    return exact, forcing, info


def mms_errors(state: PeriodicState, exact: PeriodicState, delta: float) -> Dict[str, float]:
    """Max-norm errors over all harmonics for ``u``, ``eta1`` and ``d1 + delta d2``."""
    solid = (state.d1 + delta * state.d2) - (exact.d1 + delta * exact.d2)
    return {
        "error_u": float(np.max(np.abs(state.u - exact.u))),
        "error_eta1": float(np.max(np.abs(state.eta1 - exact.eta1))),
        "error_d": float(np.max(np.abs(solid))),
    }


def observed_orders(h: Sequence[float], errors: Sequence[float]) -> list:
    """``log(e_{k-1}/e_k) / log(h_{k-1}/h_k)``; the first entry is NaN."""
    rates = [math.nan]
    for i in range(1, len(errors)):
        if errors[i] > 0.0 and errors[i - 1] > 0.0:
            rates.append(math.log(errors[i - 1] / errors[i]) / math.log(h[i - 1] / h[i]))
        else:
            rates.append(math.nan)
    return rates


def fitted_order(h: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``; NaN unless every error is positive."""
    h, errors = np.asarray(h, dtype=float), np.asarray(errors, dtype=float)
    if h.size < 2 or np.any(errors <= 0.0):
        return math.nan
    return float(np.polyfit(np.log(h), np.log(errors), 1)[0])
