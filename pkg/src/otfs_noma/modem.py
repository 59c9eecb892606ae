"""QAM constellations and the OTFS transmit/receive transforms.

Delay-Doppler frames are M x N grids (M delay bins, N Doppler bins),
vectorized column-major. The transmit transform is s = (F_N^H kron A_cp) x
where A_cp stacks the last N_cp rows of I_M on top of I_M (per-block cyclic
prefix); the receive transform is y = (F_N kron R_cp) r with
R_cp = [0_{M x N_cp}, I_M], so that R_cp A_cp = I_M.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DimensionError
from .numerics import LinearOperator

__all__ = [
    "QamConstellation",
    "DelayDopplerFrame",
    "CpConfig",
    "build_constellation",
    "modulate",
    "demodulate",
    "modulation_operator",
    "demodulation_operator",
    "superimpose",
    "random_frame",
]

_SUPPORTED_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class QamConstellation:
    """Unit-energy square QAM: points {(2a-1)d + (2b-1)d j}."""

    order: int
    half_distance: float
    points: np.ndarray = field(repr=False)

    @property
    def levels(self) -> np.ndarray:
        """Per-axis amplitude levels, ascending: (2a-1)d for a = -side/2+1..side/2."""
        side = int(round(np.sqrt(self.order)))
        return self.half_distance * (2 * np.arange(side) - (side - 1))

    @property
    def boundaries(self) -> np.ndarray:
        """Per-axis decision boundaries 2 a d, a = -side/2+1 .. side/2-1."""
        side = int(round(np.sqrt(self.order)))
        a = np.arange(-side // 2 + 1, side // 2)
        return 2.0 * a * self.half_distance


def build_constellation(order: int) -> QamConstellation:
    """Build the unit-average-energy square QAM constellation of given order."""
    if order not in _SUPPORTED_ORDERS:
        raise ConfigurationError(
            f"unsupported QAM order {order}; expected one of {_SUPPORTED_ORDERS}")
    # Unit average energy: E|p|^2 = 2 d^2 (A-1)/3 = 1.
    d = np.sqrt(3.0 / (2.0 * (order - 1)))
    side = int(round(np.sqrt(order)))
    levels = d * (2 * np.arange(side) - (side - 1))
    points = (levels[:, None] + 1j * levels[None, :]).ravel()
    return QamConstellation(order=order, half_distance=float(d), points=points)


@dataclass(frozen=True)
class CpConfig:
    """Per-block cyclic prefix length, 0 <= n_cp < M."""

    n_cp: int

    def __post_init__(self):
        if self.n_cp < 0:
            raise ConfigurationError(f"n_cp must be nonnegative, got {self.n_cp}")


@dataclass(frozen=True)
class DelayDopplerFrame:
    """M x N grid of delay-Doppler symbols; x = vec(X) column-major."""

    grid: np.ndarray  # complex, shape (M, N)

    @property
    def m(self) -> int:
        return self.grid.shape[0]

    @property
    def n(self) -> int:
        return self.grid.shape[1]

    def vec(self) -> np.ndarray:
        return self.grid.reshape(-1, order="F")

    @staticmethod
    def from_vec(x, m: int, n: int) -> "DelayDopplerFrame":
        x = np.asarray(x, dtype=np.complex128)
        if x.size != m * n:
            raise DimensionError(f"vector of length {x.size} is not {m}x{n}")
        return DelayDopplerFrame(x.reshape(m, n, order="F"))


def _check_cp(m: int, cp: CpConfig):
    if not 0 <= cp.n_cp < m:
        raise ConfigurationError(f"need 0 <= n_cp < M, got n_cp={cp.n_cp}, M={m}")


def modulate(x, m: int, n: int, cp: CpConfig) -> np.ndarray:
    """Delay-Doppler -> time: s = (F_N^H kron A_cp) x, length N*(M+n_cp).

    Accepts x of shape (MN,) or (MN, batch).
    """
    _check_cp(m, cp)
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[0] != m * n:
        raise DimensionError(f"expected length {m*n}, got {x.shape[0]}")
    batch = x.shape[1:] if x.ndim > 1 else ()
    grid = x.reshape((m, n) + batch, order="F")
    dt = np.fft.ifft(grid, axis=1, norm="ortho")  # X F_N^H
    blocks = np.concatenate([dt[m - cp.n_cp:], dt], axis=0)  # A_cp X F_N^H
    return blocks.reshape((n * (m + cp.n_cp),) + batch, order="F")


def modulate_adjoint(s, m: int, n: int, cp: CpConfig) -> np.ndarray:
    """Adjoint of modulate: (F_N kron A_cp^T) s."""
    _check_cp(m, cp)
    s = np.asarray(s, dtype=np.complex128)
    lt = n * (m + cp.n_cp)
    if s.shape[0] != lt:
        raise DimensionError(f"expected length {lt}, got {s.shape[0]}")
    batch = s.shape[1:] if s.ndim > 1 else ()
    blocks = s.reshape((m + cp.n_cp, n) + batch, order="F")
    body = blocks[cp.n_cp:].copy()
    if cp.n_cp:
        body[m - cp.n_cp:] += blocks[:cp.n_cp]  # J_cp^T folds CP samples back
    out = np.fft.fft(body, axis=1, norm="ortho")
    return out.reshape((m * n,) + batch, order="F")


def demodulate(r, m: int, n: int, cp: CpConfig) -> np.ndarray:
    """Time -> delay-Doppler: y = (F_N kron R_cp) r, length MN."""
    _check_cp(m, cp)
    r = np.asarray(r, dtype=np.complex128)
    lt = n * (m + cp.n_cp)
    if r.shape[0] != lt:
        raise DimensionError(f"expected length {lt}, got {r.shape[0]}")
    batch = r.shape[1:] if r.ndim > 1 else ()
    blocks = r.reshape((m + cp.n_cp, n) + batch, order="F")
    body = blocks[cp.n_cp:]  # R_cp drops CP samples
    out = np.fft.fft(body, axis=1, norm="ortho")
    return out.reshape((m * n,) + batch, order="F")


def demodulate_adjoint(y, m: int, n: int, cp: CpConfig) -> np.ndarray:
    """Adjoint of demodulate: (F_N^H kron R_cp^T) y."""
    _check_cp(m, cp)
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[0] != m * n:
        raise DimensionError(f"expected length {m*n}, got {y.shape[0]}")
    batch = y.shape[1:] if y.ndim > 1 else ()
    grid = np.fft.ifft(y.reshape((m, n) + batch, order="F"), axis=1, norm="ortho")
    blocks = np.concatenate(
        [np.zeros((cp.n_cp, n) + batch, dtype=np.complex128), grid], axis=0)
    return blocks.reshape((n * (m + cp.n_cp),) + batch, order="F")


def modulation_operator(m: int, n: int, cp: CpConfig) -> LinearOperator:
    return LinearOperator(n * (m + cp.n_cp), m * n,
                          lambda x: modulate(x, m, n, cp),
                          lambda s: modulate_adjoint(s, m, n, cp))


def demodulation_operator(m: int, n: int, cp: CpConfig) -> LinearOperator:
    return LinearOperator(m * n, n * (m + cp.n_cp),
                          lambda r: demodulate(r, m, n, cp),
                          lambda y: demodulate_adjoint(y, m, n, cp))


def superimpose(x1, x2, p1: float, p2: float) -> np.ndarray:
    """Power-domain superposition sqrt(p1) x1 + sqrt(p2) x2; p1 + p2 = 1."""
    if abs(p1 + p2 - 1.0) > 1e-12:
        raise ConfigurationError(f"power coefficients must sum to 1, got {p1 + p2}")
    if p1 < 0 or p2 < 0:
        raise ConfigurationError("power coefficients must be nonnegative")
    x1 = np.asarray(x1, dtype=np.complex128)
    x2 = np.asarray(x2, dtype=np.complex128)
    if x1.shape != x2.shape:
        raise DimensionError(f"shape mismatch {x1.shape} vs {x2.shape}")
    return np.sqrt(p1) * x1 + np.sqrt(p2) * x2


def random_frame(constellation: QamConstellation, m: int, n: int,
                 rng) -> DelayDopplerFrame:
    """Draw an M x N frame of i.i.d. uniform constellation symbols."""
    rng = np.random.default_rng(rng)
    idx = rng.integers(0, constellation.order, size=(m, n))
    return DelayDopplerFrame(constellation.points[idx])
