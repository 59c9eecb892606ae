"""Reliability-zone detection, the iterative equalize/detect/cancel loop,
the MMSE-SIC benchmark, and fractional transmit power allocation.

The iterative detector alternates a damped LSQR equalization of the
superimposed symbol vector with per-user reliability-zone decisions, then
subtracts the contribution of every newly decided symbol from the received
vector. Thresholds shrink linearly each round so all symbols are decided
within K rounds. After the first round the equalizer only solves for the
still-undecided coordinates (the decided ones have been cancelled from the
received vector) and warm-starts from the previous round's estimate, so the
limited per-round iteration budget keeps refining one shrinking problem
instead of restarting a full-size one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConfigurationError, DimensionError, NumericalRankError
from .lsqr import LsqrConfig, lsqr_solve
from .modem import QamConstellation
from .numerics import (ColumnSubsetOperator, DampedAugmentedOperator,
                       LinearOperator)

__all__ = [
    "ReliabilityZone",
    "ThresholdSchedule",
    "PowerAllocation",
    "is_unreliable",
    "quantize",
    "rz_detect",
    "detect_iterative",
    "mmse_sic_detect",
    "ftpa_allocate",
]


@dataclass(frozen=True)
class PowerAllocation:
    p1: float
    p2: float

    def __post_init__(self):
        if abs(self.p1 + self.p2 - 1.0) > 1e-12:
            raise ConfigurationError(
                f"power fractions must sum to 1, got {self.p1 + self.p2}")
        if self.p1 < 0 or self.p2 < 0:
            raise ConfigurationError("power fractions must be nonnegative")


def ftpa_allocate(snr1_db: float, snr2_db: float,
                  alpha: float = 1.0) -> PowerAllocation:
    """Fractional transmit power allocation: p_i proportional to SNR_i^-alpha."""
    if alpha < 0:
        raise ConfigurationError("alpha must be nonnegative")
    g1 = 10.0 ** (snr1_db / 10.0)
    g2 = 10.0 ** (snr2_db / 10.0)
    w1 = g1 ** (-alpha)
    w2 = g2 ** (-alpha)
    return PowerAllocation(p1=w1 / (w1 + w2), p2=w2 / (w1 + w2))


@dataclass(frozen=True)
class ReliabilityZone:
    """Bands of width T centred on the per-axis QAM decision boundaries.

    mode "union": a value is unreliable if either coordinate falls in a band
    (the default; a decision is only safe when both coordinates are safe).
    mode "intersection": both coordinates must fall in a band.
    """

    constellation: QamConstellation
    threshold: float
    mode: str = "union"

    def __post_init__(self):
        if self.threshold < 0:
            raise ConfigurationError("threshold must be nonnegative")
        if self.mode not in ("union", "intersection"):
            raise ConfigurationError(f"unknown zone mode {self.mode!r}")


def _coord_in_band(u, boundaries: np.ndarray, threshold: float):
    """True where u lies strictly within T/2 of some decision boundary."""
    if threshold == 0.0:
        return np.zeros(np.shape(u), dtype=bool)
    dist = np.min(np.abs(np.subtract.outer(np.asarray(u, float), boundaries)),
                  axis=-1)
    return dist < threshold / 2.0


def is_unreliable(v, zone: ReliabilityZone):
    """Membership test for the unreliable zone (scalar or array input)."""
    b = zone.constellation.boundaries
    re_in = _coord_in_band(np.real(v), b, zone.threshold)
    im_in = _coord_in_band(np.imag(v), b, zone.threshold)
    out = re_in | im_in if zone.mode == "union" else re_in & im_in
    return bool(out) if np.isscalar(v) or np.ndim(v) == 0 else out


def quantize(v, c: QamConstellation):
    """Nearest constellation point, per axis. Boundary ties round down
    (toward the smaller real part, then the smaller imaginary part)."""
    levels = c.levels
    d = c.half_distance
    side = levels.size

    def _axis(u):
        # tie at u = 2ad falls exactly between levels; ceil(t - 0.5) picks
        # the lower one.
        t = (np.asarray(u, float) - levels[0]) / (2.0 * d)
        idx = np.ceil(t - 0.5).astype(int)
        return levels[np.clip(idx, 0, side - 1)]

    out = _axis(np.real(v)) + 1j * _axis(np.imag(v))
    return complex(out) if np.isscalar(v) or np.ndim(v) == 0 else out


def rz_detect(estimates: np.ndarray, active: np.ndarray,
              zone: ReliabilityZone, c: QamConstellation):
    """Split the active indices into reliable ones and their quantizations.

    Returns (reliable_indices, quantized_values); indices not in `active`
    are never examined.
    """
    active = np.asarray(active, dtype=int)
    if active.size == 0:
        return active, np.array([], dtype=np.complex128)
    vals = estimates[active]
    keep = ~is_unreliable(vals, zone)
    reliable = active[keep]
    return reliable, quantize(vals[keep], c)


@dataclass(frozen=True)
class ThresholdSchedule:
    """Per-round RZ thresholds, shrinking linearly and clamped at zero.

    Round k >= 2 uses T1(k) = T1(1)*(1 - k/(K-1)) for user 1 and
    T2(k) = T2(1)*(1 - k/K) for user 2; round 1 uses the starting values.
    User 1's threshold hits zero by round K-1, user 2's by round K, which
    forces every remaining symbol to be decided.
    """

    t1_start: float
    t2_start: float
    max_rounds: int  # K

    def __post_init__(self):
        if self.t1_start < 0 or self.t2_start < 0:
            raise ConfigurationError("starting thresholds must be nonnegative")
        if self.max_rounds < 2:
            raise ConfigurationError("need at least 2 rounds")

    def threshold(self, user: int, k: int) -> float:
        if k < 1:
            raise ValueError("rounds are 1-based")
        if k == 1:
            return self.t1_start if user == 1 else self.t2_start
        if user == 1:
            return max(0.0, self.t1_start * (1.0 - k / (self.max_rounds - 1)))
        return max(0.0, self.t2_start * (1.0 - k / self.max_rounds))


# Optimality-test tolerance for the warm-started per-round solves. Once
# the search is warm the optimal residual is dominated by noise, so the
# relative-residual test alone would burn the whole iteration budget.
WARM_OPTIMALITY_TOL = 1e-6


def detect_iterative(G: LinearOperator, y, alloc: PowerAllocation,
                     c1: QamConstellation, c2: QamConstellation,
                     sched: ThresholdSchedule, lsqr_cfg: LsqrConfig,
                     user: int, zone_mode: str = "union",
                     x_init=None) -> np.ndarray:
    """Iterative LSQR + RZ detection at User `user`'s receiver.

    Returns that user's hard symbol decisions (length MN, every entry a
    constellation point). User 2 symbols only become eligible once the
    same-index User 1 symbol has been decided in an earlier round.

    Each round solves the damped least-squares problem restricted to the
    still-undecided coordinates, warm-started from the previous round's
    estimate: with reference point x0 the correction solves
    min ||(yk - A x0) - A d||^2 + damp^2 ||x0 + d||^2 over the active
    columns A of the channel operator. The damping is folded into a stacked
    operator so the warm start regularizes toward the prior estimate.

    `x_init` optionally seeds the first round's warm start with an external
    estimate of the superimposed symbol vector (e.g. a cheap approximate
    equalization of y); the first LSQR solve then only has to correct it.
    """
    if user not in (1, 2):
        raise ConfigurationError("user must be 1 or 2")
    if user == 2 and alloc.p2 == 0:
        raise ConfigurationError("user 2 has zero power allocated")
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[0] != G.out_dim or y.ndim != 1:
        raise DimensionError("received vector does not match the operator")
    mn = G.in_dim
    sqrt_p1 = np.sqrt(alloc.p1)
    sqrt_p2 = np.sqrt(alloc.p2)

    inner_cfg = LsqrConfig(
        max_iterations=lsqr_cfg.max_iterations,
        tolerance=lsqr_cfg.tolerance,
        damp=0.0,  # damping lives in the stacked operator below
        optimality_tolerance=(lsqr_cfg.optimality_tolerance
                              or WARM_OPTIMALITY_TOL))

    yk = y.copy()
    if x_init is None:
        x0 = np.zeros(mn, dtype=np.complex128)  # warm start, superimposed domain
    else:
        x0 = np.asarray(x_init, dtype=np.complex128).copy()
        if x0.shape != (mn,):
            raise DimensionError("x_init does not match the operator's input")
    xhat1 = np.zeros(mn, dtype=np.complex128)
    xhat2 = np.zeros(mn, dtype=np.complex128)
    undetected1 = np.ones(mn, dtype=bool)  # index sets kept as masks
    undetected2 = np.ones(mn, dtype=bool)
    detected1 = ~undetected1

    for k in range(1, sched.max_rounds + 1):
        if user == 1 and not undetected1.any():
            break
        if user == 2 and not undetected2.any():
            break
        if not undetected1.any() and not undetected2.any():
            break

        active = np.flatnonzero(undetected1 | undetected2)
        sub = ColumnSubsetOperator(G, active)
        aug = DampedAugmentedOperator(sub, lsqr_cfg.damp)
        x0a = x0[active]
        rhs = np.concatenate([yk - sub.apply(x0a), -lsqr_cfg.damp * x0a])
        delta = lsqr_solve(aug, rhs, inner_cfg).x
        x_sup = np.zeros(mn, dtype=np.complex128)
        x_sup[active] = x0a + delta
        cancel = np.zeros(mn, dtype=np.complex128)

        if alloc.p1 > 0:
            zone1 = ReliabilityZone(c1, sched.threshold(1, k), zone_mode)
            est1 = x_sup / sqrt_p1
            rel1, q1 = rz_detect(est1, np.flatnonzero(undetected1), zone1, c1)
            xhat1[rel1] = q1
            cancel[rel1] += sqrt_p1 * q1

        if alloc.p2 > 0:
            zone2 = ReliabilityZone(c2, sched.threshold(2, k), zone_mode)
            est2 = x_sup / sqrt_p2
            eligible2 = np.flatnonzero(undetected2 & detected1)
            rel2, q2 = rz_detect(est2, eligible2, zone2, c2)
            xhat2[rel2] = q2
            cancel[rel2] += sqrt_p2 * q2

        if np.any(cancel):
            yk = yk - G.apply(cancel)

        # Next round's warm start: the refined estimate minus what was just
        # decided and cancelled (decided coordinates leave the active set).
        x0 = x_sup - cancel
        undetected1 = xhat1 == 0
        undetected2 = xhat2 == 0
        detected1 = ~undetected1

    out = xhat1 if user == 1 else xhat2
    return out


def mmse_sic_detect(G_dense, y, alloc: PowerAllocation,
                    c1: QamConstellation, c2: QamConstellation,
                    noise_std: float, user: int) -> np.ndarray:
    """Packet-level MMSE-SIC benchmark on a densified effective channel.

    Stage 1 equalizes with a Tikhonov-regularized dense solve and quantizes
    every User 1 symbol. For User 2, the quantized User 1 packet is
    subtracted and the equalizer is re-run on the cleaned signal.
    """
    if user not in (1, 2):
        raise ConfigurationError("user must be 1 or 2")
    if user == 2 and alloc.p2 == 0:
        raise ConfigurationError("user 2 has zero power allocated")
    G = np.asarray(G_dense, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    n = G.shape[1]

    # Both stages solve against the same regularized normal matrix; factor once.
    A = G.conj().T @ G
    if noise_std > 0:
        A[np.diag_indices(n)] += noise_std ** 2
    try:
        factor = scipy.linalg.cho_factor(A, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalRankError("singular effective channel") from exc

    x_sup = scipy.linalg.cho_solve(factor, G.conj().T @ y, check_finite=False)
    xhat1 = quantize(x_sup / np.sqrt(alloc.p1), c1)
    if user == 1:
        return xhat1

    y2 = y - G @ (np.sqrt(alloc.p1) * xhat1)
    x2 = scipy.linalg.cho_solve(factor, G.conj().T @ y2, check_finite=False)
    return quantize(x2 / np.sqrt(alloc.p2), c2)
