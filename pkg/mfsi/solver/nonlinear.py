"""Transformed nonlinear terms F (fluid momentum) and G (plate load) and their harmonics.

Fields are collocated on the padded cell-centre mesh of the fluid box, with
velocity boundary values (zero walls, plate velocity on top) in the padding.
Face values are carried to the centres and differentiated with cubic
interpolating splines along each axis; every coefficient coming from the
transform is analytic in ``eta``. The pressure enters through
``(det grad X (grad Y)(grad Y)^T - I) grad pi``, which vanishes with the plate.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields as dc_fields, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import make_interp_spline

from mfsi.config.settings import get_settings
from mfsi.errors import InvalidInputError
from mfsi.solver.grid import Grid
from mfsi.solver.state import HarmonicForcing, PeriodicState, from_samples
from mfsi.solver.transform import Cutoff, DiffeoFields, augmented_axes, build_diffeo, check_smallness
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

INTERIOR = (slice(1, -1), slice(1, -1))
TOP = (slice(None), -1)


def interface_row(grid: Grid, eta2: np.ndarray) -> np.ndarray:
    """Plate velocity averaged to the interface cell centres (``Q P_m eta2``)."""
    eta2 = np.asarray(eta2)
    padded = np.concatenate([[0.0], eta2 - eta2.mean(), [0.0]])
    return 0.5 * (padded[:-1] + padded[1:])


@dataclass(frozen=True)
class TimeSampleState:
    """Real fields at one time sample together with the transform built from its plate pair."""

    grid: Grid
    u: np.ndarray
    p: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    g: np.ndarray
    fields: DiffeoFields
    d1: Optional[np.ndarray] = None
    d2: Optional[np.ndarray] = None
    index: Optional[int] = None

    @classmethod
    def build(
        cls,
        grid: Grid,
        u: np.ndarray,
        p: np.ndarray,
        eta1: np.ndarray,
        eta2: np.ndarray,
        g: Optional[np.ndarray] = None,
        d1: Optional[np.ndarray] = None,
        d2: Optional[np.ndarray] = None,
        cutoff: Optional[Cutoff] = None,
        index: Optional[int] = None,
    ) -> "TimeSampleState":
        cutoff = cutoff or Cutoff(grid.alpha)
        check_smallness(eta1, cutoff.delta0).raise_if_violated(index)
        g = interface_row(grid, eta2) if g is None else np.asarray(g, dtype=float)
        return cls(
            grid=grid,
            u=np.asarray(u, dtype=float),
            p=np.asarray(p, dtype=float),
            eta1=np.asarray(eta1, dtype=float),
            eta2=np.asarray(eta2, dtype=float),
            g=g,
            fields=build_diffeo(eta1, eta2, grid, cutoff),
            d1=d1,
            d2=d2,
            index=index,
        )


def restrict(fields: DiffeoFields, where: Tuple) -> DiffeoFields:
    """Slice every coefficient array over its trailing point axes."""
    key = (Ellipsis,) + tuple(where)
    return replace(fields, **{f.name: getattr(fields, f.name)[key] for f in dc_fields(fields)})


def collocated_velocity(grid: Grid, u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``(2, n_h + 2, n_zf + 2)`` cell-centre velocity padded with its boundary values."""
    u1, u3 = grid.split_velocity(np.asarray(u, dtype=float))
    n_h, n_zf = grid.n_h, grid.n_zf
    g = np.asarray(g, dtype=float)
    z_all = np.concatenate([[-grid.H_f], grid.z_faces, [0.0]])
    faces1 = np.pad(u1, ((1, 1), (0, 0)))
    faces3 = np.concatenate([np.zeros((n_h, 1)), u3, g[:, None]], axis=1)

    out = np.zeros((2, n_h + 2, n_zf + 2))
    out[0, 1:-1, 1:-1] = make_interp_spline(grid.s_all, faces1, k=3, axis=0)(grid.x_centers)
    out[1, 1:-1, 1:-1] = make_interp_spline(z_all, faces3, k=3, axis=1)(grid.z_centers)
    out[1, 1:-1, -1] = g
    return out


def _spline_derivatives(nodes: np.ndarray, values: np.ndarray, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    spline = make_interp_spline(nodes, values, k=3, axis=axis)
    return spline.derivative(1)(nodes), spline.derivative(2)(nodes)


def velocity_derivatives(grid: Grid, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """``dU[k, l] = du_k/dy_l`` and ``d2U[k, l, m] = d2u_k/dy_l dy_m`` on the padded mesh."""
    xa, za = augmented_axes(grid)
    dU = np.empty((2, 2) + U.shape[1:])
    d2U = np.empty((2, 2, 2) + U.shape[1:])
    dU[:, 0], d2U[:, 0, 0] = _spline_derivatives(xa, U, axis=1)
    dU[:, 1], d2U[:, 1, 1] = _spline_derivatives(za, U, axis=2)
    # both orders of the mixed derivative, averaged
    mixed = _spline_derivatives(za, dU[:, 0], axis=2)[0] + _spline_derivatives(xa, dU[:, 1], axis=1)[0]
    d2U[:, 0, 1] = d2U[:, 1, 0] = 0.5 * mixed
    return dU, d2U


def pressure_gradient(grid: Grid, p: np.ndarray) -> np.ndarray:
    P = grid.pressure_field(np.asarray(p, dtype=float))
    return np.array(np.gradient(P, grid.x_centers, grid.z_centers, edge_order=2))


def convective_term(U: np.ndarray, dU: np.ndarray) -> np.ndarray:
    return np.einsum("l...,al...->a...", U, dU)


def momentum_terms(
    fields: DiffeoFields, U: np.ndarray, dU: np.ndarray, d2U: np.ndarray, dP: np.ndarray
) -> np.ndarray:
    """Pointwise F from the transform coefficients and the state derivatives at the same points."""
    b, a, Yx, det = fields.b, fields.aX, fields.Yx, fields.detJ
    dA, d2A = fields.dA, fields.d2A
    metric = np.einsum("lj...,mj...->lm...", Yx, Yx) - np.eye(2).reshape((2, 2) + (1,) * det.ndim)

    out = np.einsum("ai...,jik...,k...->a...", b, d2A, U)
    out += 2.0 * np.einsum("ai...,jik...,kl...,lj...->a...", b, dA, dU, Yx, optimize=True)
    out += np.einsum("alm...,lm...->a...", d2U, metric)
    out += np.einsum("al...,lj...->a...", dU, fields.d2Y)
    out -= det * np.einsum("k...,ak...->a...", dP, metric) + (det - 1.0) * dP
    out -= np.einsum("ai...,jik...,jm...,k...,m...->a...", b, dA, a, U, U, optimize=True)
    out -= convective_term(U, dU) / det
    out -= np.einsum("ai...,ik...,k...->a...", b, fields.dta, U)
    out -= np.einsum("al...,l...->a...", dU, fields.dtY)
    return out


def coupling_terms(fields: DiffeoFields, U: np.ndarray, dU: np.ndarray) -> np.ndarray:
    """Pointwise G on interface points; the second group is summed over the gradient column ``j``."""
    dA, a, Yx, deta = fields.dA, fields.aX, fields.Yx, fields.deta
    first = np.zeros_like(deta)
    second = np.zeros_like(deta)
    for k in range(2):
        first += (deta * (dA[1, 0, k] + dA[0, 1, k]) - 2.0 * dA[1, 1, k]) * U[k]
        for j in range(2):
            defect = a[1, k] * Yx[j, 1] - (1.0 if k == j == 1 else 0.0)
            coef = deta * (a[0, k] * Yx[j, 1] + a[1, k] * Yx[j, 0]) - 2.0 * defect
            second += coef * dU[k, j]
    return first + second


def eval_F(sample: TimeSampleState) -> np.ndarray:
    """F at the fluid cell centres, shape ``(2, n_h, n_zf)``."""
    grid = sample.grid
    U = collocated_velocity(grid, sample.u, sample.g)
    dU, d2U = velocity_derivatives(grid, U)
    dP = pressure_gradient(grid, sample.p)
    inner = (Ellipsis,) + INTERIOR
    return momentum_terms(restrict(sample.fields, INTERIOR), U[inner], dU[inner], d2U[inner], dP)


def eval_G(sample: TimeSampleState) -> np.ndarray:
    """G on the interior plate vertices (no mean removal)."""
    grid = sample.grid
    U = collocated_velocity(grid, sample.u, sample.g)
    dU, _ = velocity_derivatives(grid, U)
    top = (Ellipsis,) + TOP
    values = coupling_terms(restrict(sample.fields, TOP), U[top], dU[top])
    xa, _ = augmented_axes(grid)
    return make_interp_spline(xa, values, k=3)(grid.s_nodes)


def faces_from_centers(grid: Grid, F: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Average a cell-centre field to the MAC faces; the interface row is extrapolated to z = 0."""
    f1 = 0.5 * (F[0, :-1, :] + F[0, 1:, :])
    f3 = 0.5 * (F[1, :, :-1] + F[1, :, 1:])
    f_gamma = 1.5 * F[1, :, -1] - 0.5 * F[1, :, -2]
    return grid.join_velocity(f1, f3), f_gamma


def _evaluate_sample(sample: TimeSampleState) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    f, f_gamma = faces_from_centers(sample.grid, eval_F(sample))
    return f, f_gamma, eval_G(sample)


def nonlinear_rhs_harmonics(
    state: PeriodicState,
    grid: Grid,
    M: Optional[int] = None,
    cutoff: Optional[Cutoff] = None,
    workers: Optional[int] = None,
) -> HarmonicForcing:
    """Harmonics of ``(F, P_m G)`` by sampling ``state`` at ``M`` times (default ``4K + 4``)."""
    K = state.K
    M = M or 4 * K + 4
    if M < 2 * (2 * K + 1):
        raise InvalidInputError(f"M={M} is below the dealiasing threshold 2(2K+1)={2 * (2 * K + 1)}")
    cutoff = cutoff or Cutoff(grid.alpha)
    values = state.samples(M, ("u", "p", "eta1", "eta2"))
    for j in range(M):
        check_smallness(values["eta1"][j], cutoff.delta0).raise_if_violated(sample=j)

    def work(j: int):
        sample = TimeSampleState.build(
            grid, values["u"][j], values["p"][j], values["eta1"][j], values["eta2"][j], cutoff=cutoff, index=j
        )
        return _evaluate_sample(sample)

    with ThreadPoolExecutor(max_workers=workers or get_settings().workers) as pool:
        results = list(pool.map(work, range(M)))

    f = from_samples(np.array([r[0] for r in results]), K)
    f_gamma = from_samples(np.array([r[1] for r in results]), K)
    G = from_samples(np.array([r[2] for r in results]), K)
    G = G - G.mean(axis=1, keepdims=True)
    zeros = np.zeros((2 * K + 1, grid.n_d), dtype=complex)
    logger.debug("Nonlinear harmonics from %d samples: max|F|=%.3e max|G|=%.3e", M, np.abs(f).max(), np.abs(G).max())
    return HarmonicForcing(
        K=K,
        f=f,
        f_gamma=f_gamma,
        g=G,
        h=zeros,
        h_gamma=np.zeros((2 * K + 1, grid.n_w), dtype=complex),
    )


def _sample_norms(grid: Grid, fields: Dict[str, np.ndarray], scale: float) -> Tuple[float, float]:
    sample = TimeSampleState.build(
        grid,
        scale * fields["u"],
        scale * fields["p"],
        scale * fields["eta1"],
        scale * fields["eta2"],
        g=None if fields.get("g") is None else scale * fields["g"],
    )
    return float(np.max(np.abs(eval_F(sample)))), float(np.max(np.abs(eval_G(sample))))


def quadratic_scaling(
    grid: Grid, fields: Dict[str, np.ndarray], eps: Sequence[float] = (1e-3, 1e-4)
) -> Dict[str, list]:
    """``max|F(eps v)| / eps^2`` and ``max|G(eps v)| / eps^2`` for each ``eps``, plus the relative change."""
    F_ratio, G_ratio = [], []
    for e in eps:
        nf, ng = _sample_norms(grid, fields, e)
        F_ratio.append(nf / e**2)
        G_ratio.append(ng / e**2)

    def change(values):
        ref = abs(values[-1])
        return abs(values[0] - values[-1]) / ref if ref > 0.0 else 0.0

    return {"eps": list(eps), "F": F_ratio, "G": G_ratio, "F_change": change(F_ratio), "G_change": change(G_ratio)}


def _state_norm(fields: Dict[str, np.ndarray]) -> float:
    return max(float(np.max(np.abs(fields[name]))) for name in ("u", "p", "eta1", "eta2"))


def lipschitz_ratio(grid: Grid, first: Dict[str, np.ndarray], second: Dict[str, np.ndarray]) -> Dict[str, float]:
    """Discrete Lipschitz quotient of ``F`` and ``G`` between two states, and its ratio to the ball radius."""
    samples = [
        TimeSampleState.build(grid, v["u"], v["p"], v["eta1"], v["eta2"], g=v.get("g")) for v in (first, second)
    ]
    dF = float(np.max(np.abs(eval_F(samples[0]) - eval_F(samples[1]))))
    dG = float(np.max(np.abs(eval_G(samples[0]) - eval_G(samples[1]))))
    diff = _state_norm({name: first[name] - second[name] for name in ("u", "p", "eta1", "eta2")})
    if diff == 0.0:
        raise InvalidInputError("Lipschitz quotient needs two distinct states")
    radius = max(_state_norm(first), _state_norm(second))
    ratio = max(dF, dG) / diff
    return {"F": dF / diff, "G": dG / diff, "ratio": ratio, "ratio_over_radius": ratio / radius}
