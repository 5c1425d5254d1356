"""Truncated Fourier representation of time-periodic fields.

Coefficients are stored as ``(2K+1, n)`` complex arrays indexed by ``k + K``.
Convention: ``v_hat_k = fft(v)[k] / M`` and ``v(t_j) = M * ifft(v_hat)[j]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
import scipy.fft as sfft

from mfsi.errors import InvalidInputError
from mfsi.solver.grid import Grid

STATE_FIELDS = ("u", "p", "eta1", "eta2", "d1", "d2")
FORCING_FIELDS = ("f", "f_gamma", "g", "h", "h_gamma")


def sample_times(T: float, M: int) -> np.ndarray:
    return np.arange(M) * (T / M)


def to_samples(coeffs: np.ndarray, M: int) -> np.ndarray:
    """Real samples at ``t_j = jT/M`` from harmonics ``-K..K``."""
    coeffs = np.asarray(coeffs)
    K = (coeffs.shape[0] - 1) // 2
    if M < 2 * K + 1:
        raise InvalidInputError(f"M={M} samples cannot represent K={K} harmonics")
    spectrum = np.zeros((M,) + coeffs.shape[1:], dtype=complex)
    for k in range(-K, K + 1):
        spectrum[k % M] = coeffs[k + K]
    return (M * sfft.ifft(spectrum, axis=0)).real


def from_samples(values: np.ndarray, K: int) -> np.ndarray:
    """Harmonics ``-K..K`` of real samples; higher frequencies are discarded."""
    values = np.asarray(values, dtype=float)
    M = values.shape[0]
    if M < 2 * K + 1:
        raise InvalidInputError(f"M={M} samples cannot resolve K={K} harmonics")
    spectrum = sfft.fft(values, axis=0) / M
    out = np.empty((2 * K + 1,) + values.shape[1:], dtype=complex)
    for k in range(-K, K + 1):
        out[k + K] = spectrum[k % M]
    return out


def conjugate_defect(coeffs: np.ndarray) -> float:
    """``max |c_{-k} - conj(c_k)|`` relative to ``max |c|``."""
    coeffs = np.asarray(coeffs)
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(coeffs[::-1] - np.conj(coeffs)))) / scale


def symmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Overwrite negative harmonics with the conjugates of the positive ones."""
    coeffs = np.array(coeffs, dtype=complex)
    K = (coeffs.shape[0] - 1) // 2
    coeffs[K] = coeffs[K].real
    coeffs[:K] = np.conj(coeffs[:K:-1])
    return coeffs


class _Harmonics:
    """Shared arithmetic for the coefficient containers."""

    _names: Tuple[str, ...] = ()

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self._names}

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.arrays().items())

    def map(self, fn):
        return replace(self, **{name: fn(value) for name, value in self.items()})

    def scaled(self, factor: float):
        return self.map(lambda value: factor * value)

    def combine(self, other, alpha: float = 1.0):
        """``self + alpha * other`` on the primary fields."""
        return replace(self, **{name: value + alpha * getattr(other, name) for name, value in self.items()})

    def harmonic(self, k: int) -> Dict[str, np.ndarray]:
        K = self.K
        if abs(k) > K:
            raise InvalidInputError(f"harmonic {k} outside -{K}..{K}")
        return {name: value[k + K] for name, value in self.items()}

    def conjugate_defect(self) -> float:
        return max(conjugate_defect(value) for _, value in self.items())

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(value))) if value.size else 0.0 for _, value in self.items())


@dataclass(frozen=True)
class HarmonicForcing(_Harmonics):
    """Forcing harmonics: fluid ``f`` (faces), ``f_gamma`` (interface row), plate ``g``,
    solid ``h`` (interior nodes) and ``h_gamma`` (vertical solid load on the interface row)."""

    K: int
    f: np.ndarray
    f_gamma: np.ndarray
    g: np.ndarray
    h: np.ndarray
    h_gamma: np.ndarray

    _names = FORCING_FIELDS

    @classmethod
    def zeros(cls, grid: Grid, K: int) -> "HarmonicForcing":
        n = 2 * K + 1
        return cls(
            K=K,
            f=np.zeros((n, grid.n_u), dtype=complex),
            f_gamma=np.zeros((n, grid.n_h), dtype=complex),
            g=np.zeros((n, grid.n_w), dtype=complex),
            h=np.zeros((n, grid.n_d), dtype=complex),
            h_gamma=np.zeros((n, grid.n_w), dtype=complex),
        )

    def only(self, components) -> "HarmonicForcing":
        """Keep the listed components (``f``, ``g``, ``h``); the interface parts follow their parent."""
        keep = set(components)
        kept = {
            "f": "f" in keep,
            "f_gamma": "f" in keep,
            "g": "g" in keep,
            "h": "h" in keep,
            "h_gamma": "h" in keep,
        }
        return replace(self, **{name: value if kept[name] else np.zeros_like(value) for name, value in self.items()})


@dataclass(frozen=True)
class PeriodicState(_Harmonics):
    """Harmonics of ``(u, p, eta1, eta2, d1, d2)`` plus the auxiliary interface unknowns of the monolithic solve."""

    T: float
    K: int
    u: np.ndarray
    p: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    g: Optional[np.ndarray] = field(default=None, compare=False)
    p_gamma: Optional[np.ndarray] = field(default=None, compare=False)
    c: Optional[np.ndarray] = field(default=None, compare=False)

    _names = STATE_FIELDS

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi / self.T

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @classmethod
    def zeros(cls, grid: Grid, T: float, K: int) -> "PeriodicState":
        n = 2 * K + 1
        return cls(
            T=float(T),
            K=K,
            u=np.zeros((n, grid.n_u), dtype=complex),
            p=np.zeros((n, grid.n_p), dtype=complex),
            eta1=np.zeros((n, grid.n_w), dtype=complex),
            eta2=np.zeros((n, grid.n_w), dtype=complex),
            d1=np.zeros((n, grid.n_d), dtype=complex),
            d2=np.zeros((n, grid.n_d), dtype=complex),
            g=np.zeros((n, grid.n_h), dtype=complex),
            p_gamma=np.zeros((n, grid.n_h), dtype=complex),
            c=np.zeros(n, dtype=complex),
        )

    def map(self, fn):
        aux = {name: None if getattr(self, name) is None else fn(getattr(self, name)) for name in ("g", "p_gamma")}
        c = None if self.c is None else fn(self.c)
        return replace(self, **{name: fn(value) for name, value in self.items()}, **aux, c=c)

    def combine(self, other, alpha: float = 1.0):
        merged = {name: value + alpha * getattr(other, name) for name, value in self.items()}
        for name in ("g", "p_gamma", "c"):
            mine, theirs = getattr(self, name), getattr(other, name)
            merged[name] = None if mine is None or theirs is None else mine + alpha * theirs
        return replace(self, **merged)

    def samples(self, M: int, names: Tuple[str, ...] = STATE_FIELDS) -> Dict[str, np.ndarray]:
        """Real time samples ``(M, n)`` of the requested fields."""
        return {name: to_samples(getattr(self, name), M) for name in names}

    @classmethod
    def from_samples(cls, values: Dict[str, np.ndarray], T: float, K: int) -> "PeriodicState":
        return cls(T=float(T), K=K, **{name: from_samples(values[name], K) for name in STATE_FIELDS})
