"""Eigenanalysis and resolvent diagnostics for the dense discrete A_mfs."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from mfsi.config.settings import get_settings
from mfsi.errors import InvalidInputError, SingularSystemError, UnstableSpectrumError
from mfsi.solver.mfs_operator import BlockOperatorSet, GroundSpace, MfsOperator
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

EIG_RESIDUAL_TOL = 1e-8
SINGULAR_RTOL = 1e-13


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    energy_residuals: np.ndarray
    spectral_bound: float
    mesh: Dict[str, Any] = field(default_factory=dict)
    resolvent: List[Dict[str, float]] = field(default_factory=list)

    @property
    def decay_rate(self) -> float:
        return -self.spectral_bound

    @property
    def unstable(self) -> np.ndarray:
        """Indices of eigenvalues with ``Re >= 0``."""
        return np.flatnonzero(self.eigenvalues.real >= 0.0)

    @property
    def min_modulus(self) -> float:
        return float(np.min(np.abs(self.eigenvalues)))

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def max_energy_residual(self) -> Optional[float]:
        finite = self.energy_residuals[np.isfinite(self.energy_residuals)]
        return float(finite.max()) if finite.size else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "spectral_bound": self.spectral_bound,
            "decay_rate": self.decay_rate,
            "eigenvalue_count": int(self.eigenvalues.size),
            "unstable_count": int(self.unstable.size),
            "min_modulus": self.min_modulus,
            "max_eig_residual": self.max_residual,
            "max_energy_residual": self.max_energy_residual,
            "mesh": self.mesh,
        }


def _inner(a: np.ndarray, b: np.ndarray) -> complex:
    """``sum a * conj(b)``."""
    return complex(np.vdot(b, a))


def energy_identity_terms(operator: MfsOperator, lam: complex, x) -> Dict[str, complex]:
    """Terms of the energy balance obtained by testing the eigenvalue problem with the eigenvector itself."""
    ops, g, delta = operator.ops, operator.grid, operator.delta
    h, hzf, hzs = g.h, g.hz_f, g.hz_s
    eta1, eta2 = ops.Pm @ x.eta1, ops.Pm @ x.eta2
    u, gam = operator.velocity(x.v, eta2)

    kinetic = (
        h * hzf * _inner(u, u)
        + 0.5 * hzf * h * _inner(gam, gam)
        + (1.0 + 0.5 * hzs) * h * _inner(eta2, eta2)
        + h * hzs * _inner(x.d2, x.d2)
    )
    viscous = -h * hzf * _inner(ops.lap0 @ u + ops.lap_g @ gam, u) + h * _inner(
        -0.5 * hzf * (ops.lap_gamma @ gam) + (gam - ops.Rb @ u) / hzf, gam
    )
    bending = h * _inner(ops.bilap @ eta1, eta1)
    plate_damping = -h * _inner(ops.lap_p @ eta2, eta2)

    def elastic(w: np.ndarray, b: np.ndarray) -> complex:
        return -h * hzs * _inner(ops.lame0 @ w + ops.lame_b @ b, w) - h * _inner(ops.stress_trace_raw(w, b), b)

    return {
        "kinetic": lam * kinetic,
        "viscous": viscous,
        "bending": np.conj(lam) * bending,
        "plate_damping": plate_damping,
        "elastic": np.conj(lam) * elastic(x.d1, eta1),
        "solid_damping": delta * elastic(x.d2, eta2),
    }


def energy_identity_residual(operator: MfsOperator, ground: GroundSpace, lam: complex, vector: np.ndarray) -> float:
    """``|sum of terms| / sum |terms|`` for an eigenpair given in ground-space coordinates."""
    vector = np.asarray(vector)
    if not np.any(vector):
        raise InvalidInputError("the zero vector is not an eigenvector")
    terms = energy_identity_terms(operator, lam, ground.to_physical(vector))
    total = sum(terms.values())
    scale = sum(abs(t) for t in terms.values())
    return float(abs(total) / scale)


def compute_spectrum(
    A: np.ndarray,
    blocks: Optional[BlockOperatorSet] = None,
    energy_count: int = 10,
    mesh: Optional[Dict[str, Any]] = None,
) -> SpectralReport:
    """Dense eigendecomposition sorted by descending real part.

    With ``blocks`` the energy identity is evaluated for the ``energy_count``
    rightmost eigenpairs; the remaining entries are NaN.
    """
    started = time.perf_counter()
    try:
        w, V = sla.eig(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        logger.error("Eigensolver failed for a %dx%d matrix: %s", A.shape[0], A.shape[1], exc)
        raise
    order = np.argsort(-w.real, kind="stable")
    w, V = w[order], V[:, order]
    residuals = np.linalg.norm(A @ V - V * w, axis=0) / np.linalg.norm(V, axis=0)

    energy = np.full(w.size, np.nan)
    if blocks is not None:
        for i in range(min(energy_count, w.size)):
            energy[i] = energy_identity_residual(blocks.operator, blocks.ground, w[i], V[:, i])

    report = SpectralReport(
        eigenvalues=w,
        residuals=residuals,
        energy_residuals=energy,
        spectral_bound=float(w.real.max()),
        mesh=dict(mesh or {}),
    )
    if report.unstable.size:
        logger.warning("%d eigenvalue(s) with Re >= 0 found", report.unstable.size)
    logger.info(
        "Spectrum: n=%d bound=%.6e max residual=%.2e (%.2fs)",
        w.size,
        report.spectral_bound,
        report.max_residual,
        time.perf_counter() - started,
    )
    return report


def energy_gram(operator: MfsOperator, ground: GroundSpace) -> np.ndarray:
    """Gram matrix of the discrete energy norm in ground-space coordinates.

    The quadratic form is the kinetic energy plus the bending energy plus the
    elastic energy of the thick layer, i.e. the real parts of the terms that
    :func:`energy_identity_terms` multiplies by ``lam``.
    """
    ops, g = operator.ops, operator.grid
    h, hzf, hzs = g.h, g.hz_f, g.hz_s
    x = ground.to_physical(np.eye(ground.size))
    eta1, eta2 = ops.Pm @ x.eta1, ops.Pm @ x.eta2
    u, gam = operator.velocity(x.v, eta2)

    gram = (
        h * hzf * (u.T @ u)
        + 0.5 * hzf * h * (gam.T @ gam)
        + (1.0 + 0.5 * hzs) * h * (eta2.T @ eta2)
        + h * hzs * (x.d2.T @ x.d2)
        + h * (eta1.T @ (ops.bilap @ eta1))
        - h * hzs * (x.d1.T @ (ops.lame0 @ x.d1 + ops.lame_b @ eta1))
        - h * (eta1.T @ ops.stress_trace_raw(x.d1, eta1))
    )
    return 0.5 * (gram + gram.T)


def energy_weight(gram: np.ndarray) -> np.ndarray:
    """Upper Cholesky factor ``W`` with ``gram = W^T W``; ``||x||_E = ||W x||``."""
    try:
        return sla.cholesky(gram, lower=False)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError(f"energy Gram matrix is not positive definite: {exc}") from exc


def weighted_generator(A: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """``W A W^-1``, whose spectral norms are energy-norm operator norms of ``A``."""
    inverse = sla.solve_triangular(weight, np.eye(weight.shape[0]), lower=False)
    return weight @ A @ inverse


def require_stable(A: np.ndarray) -> float:
    """Spectral bound of ``A``; raises :class:`UnstableSpectrumError` unless it is negative."""
    bound = float(sla.eigvals(A).real.max())
    if bound >= 0.0:
        logger.error("Resolvent scan refused: spectral bound %.6e", bound)
        raise UnstableSpectrumError(bound)
    return bound


def resolvent_norm(A: np.ndarray, shift: complex, k: int = 0) -> float:
    """Spectral norm of ``(shift - A)^-1`` via the smallest singular value."""
    sv = sla.svdvals(shift * np.eye(A.shape[0]) - A)
    if sv[-1] <= SINGULAR_RTOL * sv[0]:
        raise SingularSystemError(k)
    return float(1.0 / sv[-1])


def resolvent_scan(
    A: np.ndarray,
    omega0: float,
    K: int,
    workers: Optional[int] = None,
    weight: Optional[np.ndarray] = None,
) -> List[Dict[str, float]]:
    """``||(i k omega0 - A)^-1||`` for ``k = -K..K``; negative ``k`` mirror positive ones for real ``A``.

    ``A`` must have a negative spectral bound. With ``weight`` (see
    :func:`energy_weight`) the norms are taken in the energy norm, otherwise
    in the Euclidean norm of the ground-space coordinates.
    """
    started = time.perf_counter()
    bound = require_stable(A)
    B = A if weight is None else weighted_generator(A, weight)
    with ThreadPoolExecutor(max_workers=workers or get_settings().workers) as pool:
        norms = list(pool.map(lambda k: resolvent_norm(B, 1j * k * omega0, k), range(K + 1)))
    rows = []
    for k in range(-K, K + 1):
        norm = norms[abs(k)]
        rows.append({"k": k, "norm": norm, "k_times_norm": abs(k) * norm})
    sup = max(rows, key=lambda row: row["norm"])
    elapsed = time.perf_counter() - started
    logger.info(
        "Resolvent scan: K=%d norm=%s bound=%.6e sup=%.6e at k=%d (%.2fs)",
        K,
        "energy" if weight is not None else "euclidean",
        bound,
        sup["norm"],
        sup["k"],
        elapsed,
    )
    return rows


def resolvent_trend(rows: List[Dict[str, float]], decay_from: int) -> Dict[str, Any]:
    """Summary of a scan: where the supremum sits and how the tail behaves from ``decay_from`` on.

    ``tail_decay`` holds when every norm beyond ``decay_from`` stays below the
    norm at ``decay_from``; ``monotone`` additionally asks for a non-increasing
    tail. Eigenvalues on the sector rays of the plate make small bumps in the
    tail possible, so only ``tail_decay`` is expected of a stable operator.
    """
    positive = {int(r["k"]): r["norm"] for r in rows if r["k"] >= 0}
    sup_k = max(positive, key=positive.get)
    tail = [positive[k] for k in sorted(positive) if k >= decay_from]
    return {
        "sup_norm": positive[sup_k],
        "sup_k": sup_k,
        "tail_decay": bool(len(tail) < 2 or max(tail[1:]) < tail[0]),
        "monotone": bool(all(b <= a for a, b in zip(tail, tail[1:]))),
        "max_k_times_norm": max(r["k_times_norm"] for r in rows),
    }


def distance_to_spectrum(eigenvalues: np.ndarray, shift: complex) -> float:
    return float(np.min(np.abs(eigenvalues - shift)))


def spectrum_match_defect(first: np.ndarray, second: np.ndarray) -> float:
    """Largest distance in an optimal one-to-one pairing of two spectra, relative to the larger modulus."""
    if first.size != second.size:
        raise InvalidInputError(f"spectra of different sizes ({first.size} vs {second.size})")
    if first.size == 0:
        return 0.0
    cost = np.abs(first[:, None] - second[None, :])
    rows, cols = linear_sum_assignment(cost)
    scale = max(float(np.abs(first).max()), float(np.abs(second).max()), 1e-300)
    return float(cost[rows, cols].max() / scale)


def block_spectra(blocks: BlockOperatorSet) -> Dict[str, Any]:
    """Spectra of the fluid-plate and thick-layer diagonal blocks, with the damped-wave companion check.

    ``union_defect`` compares the full spectrum with the union of the two block
    spectra; it vanishes when the off-diagonal blocks do.
    """
    parts = blocks.split(blocks.A)
    fs = sla.eigvals(parts["top_left"])
    thick = sla.eigvals(parts["bottom_right"])
    coupled = sla.eigvals(blocks.A)
    mu = sla.eigvalsh(blocks.operator.ops.lame0.toarray())
    delta = blocks.operator.delta

    defect = np.abs(thick[:, None] ** 2 - (1.0 + delta * thick[:, None]) * mu[None, :])
    scale = np.abs(thick[:, None]) ** 2 + np.abs(1.0 + delta * thick[:, None]) * np.abs(mu[None, :])
    companion = float(np.max(np.min(defect / scale, axis=1)))
    union = spectrum_match_defect(coupled, np.concatenate([fs, thick]))
    logger.debug("Block spectra: coupled=%s union defect=%.3e", blocks.coupled, union)
    return {
        "fluid_structure": fs,
        "thick": thick,
        "coupled": coupled,
        "lame": mu,
        "fluid_structure_bound": float(fs.real.max()),
        "thick_bound": float(thick.real.max()),
        "coupled_bound": float(coupled.real.max()),
        "companion_residual": companion,
        "union_defect": union,
    }
