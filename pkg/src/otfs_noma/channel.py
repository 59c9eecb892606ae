"""Linear time-varying channels: TDL profiles, Jakes Doppler, AWGN.

A channel realization is a list of paths (complex gain, integer sample delay,
Doppler in Hz). Applying it to a length-L time-domain signal costs O(P*L).
The end-to-end effective operator G = Demod o Channel o Mod acts on
delay-Doppler vectors of length MN and never forms a dense matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, DimensionError
from .modem import CpConfig, demodulate, demodulate_adjoint, modulate, modulate_adjoint
from .numerics import LinearOperator

__all__ = [
    "TapProfile",
    "LtvChannel",
    "tdl_c_profile",
    "identity_profile",
    "load_profile",
    "generate_channel",
    "doppler_from_speed",
    "apply_channel",
    "effective_operator",
    "block_fd_equalize",
    "add_noise",
]

SPEED_OF_LIGHT = 299792458.0

# 3GPP TS 38.901 Table 7.7.2-3, TDL-C: (normalized delay, power in dB).
_TDL_C = (
    (0.0000, -4.4), (0.2099, -1.2), (0.2219, -3.5), (0.2329, -5.2),
    (0.2176, -2.5), (0.6366, 0.0), (0.6448, -2.2), (0.6560, -3.9),
    (0.6584, -7.4), (0.7935, -7.1), (0.8213, -10.7), (0.9336, -11.1),
    (1.2285, -5.1), (1.3083, -6.8), (2.1704, -8.7), (2.7105, -13.2),
    (4.2589, -13.9), (4.6003, -13.9), (5.4902, -15.8), (5.6077, -17.1),
    (6.3065, -16.0), (6.6374, -15.7), (7.0427, -21.6), (8.6523, -22.8),
)


@dataclass(frozen=True)
class TapProfile:
    """Power-delay profile: normalized delays scaled by a delay-spread."""

    normalized_delays: np.ndarray = field(repr=False)
    powers_db: np.ndarray = field(repr=False)
    delay_spread_s: float = 300e-9
    sample_period_s: float = 1.0 / 4.95e6

    def __post_init__(self):
        d = np.asarray(self.normalized_delays, dtype=float)
        p = np.asarray(self.powers_db, dtype=float)
        if d.shape != p.shape or d.ndim != 1 or d.size == 0:
            raise ConfigurationError("delays and powers must be equal-length 1D")
        if np.any(d < 0):
            raise ConfigurationError("tap delays must be nonnegative")
        order = np.argsort(d, kind="stable")
        object.__setattr__(self, "normalized_delays", d[order])
        object.__setattr__(self, "powers_db", p[order])

    @property
    def linear_powers(self) -> np.ndarray:
        """Linear tap powers, normalized to sum to 1."""
        p = 10.0 ** (self.powers_db / 10.0)
        return p / p.sum()

    @property
    def delays_s(self) -> np.ndarray:
        return self.normalized_delays * self.delay_spread_s

    @property
    def delays_samples(self) -> np.ndarray:
        # Fractional delays round to the nearest sample (no interpolation).
        return np.rint(self.delays_s / self.sample_period_s).astype(int)

    @property
    def max_delay_samples(self) -> int:
        return int(self.delays_samples.max())


def tdl_c_profile(delay_spread_s: float = 300e-9,
                  sample_period_s: float = 1.0 / 4.95e6) -> TapProfile:
    """TDL-C profile from TS 38.901 at the given delay spread."""
    arr = np.array(_TDL_C)
    return TapProfile(arr[:, 0], arr[:, 1], delay_spread_s, sample_period_s)


def identity_profile(sample_period_s: float = 1.0 / 4.95e6) -> TapProfile:
    """Single unit-power tap at zero delay (test/override profile)."""
    return TapProfile(np.array([0.0]), np.array([0.0]), 0.0, sample_period_s)


def load_profile(path, delay_spread_s: float = 300e-9,
                 sample_period_s: float = 1.0 / 4.95e6) -> TapProfile:
    """Read a profile from a text file with columns: normalized_delay power_db.

    Blank lines and lines starting with '#' are ignored.
    """
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigurationError(
                f"{path}: expected 2 columns per line, got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    if not rows:
        raise ConfigurationError(f"{path}: no taps found")
    arr = np.array(rows)
    return TapProfile(arr[:, 0], arr[:, 1], delay_spread_s, sample_period_s)


@dataclass(frozen=True)
class LtvChannel:
    """One realization of a P-path linear time-varying channel."""

    gains: np.ndarray  # complex, shape (P,)
    delays: np.ndarray  # int samples, shape (P,)
    dopplers_hz: np.ndarray  # shape (P,)
    frame_len: int
    sample_period_s: float

    def __post_init__(self):
        if np.any(self.delays < 0) or np.any(self.delays >= self.frame_len):
            raise ConfigurationError("tap delay outside the frame")

    @cached_property
    def path_coeffs(self) -> np.ndarray:
        """c_p[n] = h_p exp(j 2 pi nu_p (n - l_p) Ts), shape (P, frame_len).

        Cached: the realization is immutable and the operator pipeline
        applies it hundreds of times per detection.
        """
        n = np.arange(self.frame_len)
        phase = np.exp(2j * np.pi * self.dopplers_hz[:, None]
                       * (n[None, :] - self.delays[:, None])
                       * self.sample_period_s)
        return self.gains[:, None] * phase

    @cached_property
    def coeffs_by_delay(self) -> list:
        """[(delay, summed coefficient sequence)] with one entry per distinct
        sample delay; paths sharing a delay add linearly."""
        coeffs = self.path_coeffs
        out = []
        for l in np.unique(self.delays):
            out.append((int(l), coeffs[self.delays == l].sum(axis=0)))
        return out


def doppler_from_speed(v_kmh: float, f_c_hz: float) -> float:
    """Maximum Doppler shift in Hz for a given speed and carrier frequency."""
    if v_kmh < 0:
        raise ConfigurationError("speed must be nonnegative")
    return f_c_hz * (v_kmh / 3.6) / SPEED_OF_LIGHT


def generate_channel(profile: TapProfile, v_max_hz: float, frame_len: int,
                     rng) -> LtvChannel:
    """Draw one channel realization: Rayleigh taps + Jakes Doppler shifts.

    Per tap p: gain ~ CN(0, power_p), Doppler = v_max * cos(theta) with theta
    uniform on [0, 2pi). Tap powers are normalized in expectation.
    """
    if v_max_hz < 0:
        raise ConfigurationError("v_max must be nonnegative")
    rng = np.random.default_rng(rng)
    powers = profile.linear_powers
    p = powers.size
    gains = np.sqrt(powers / 2.0) * (rng.standard_normal(p)
                                     + 1j * rng.standard_normal(p))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=p)
    dopplers = v_max_hz * np.cos(theta)
    return LtvChannel(gains=gains, delays=profile.delays_samples.copy(),
                      dopplers_hz=dopplers, frame_len=frame_len,
                      sample_period_s=profile.sample_period_s)


def apply_channel(ch: LtvChannel, s) -> np.ndarray:
    """r[n] = sum_p h_p e^{j 2 pi nu_p (n - l_p) Ts} s[n - l_p], s[m<0] = 0."""
    s = np.asarray(s, dtype=np.complex128)
    if s.shape[0] != ch.frame_len:
        raise DimensionError(
            f"expected signal of length {ch.frame_len}, got {s.shape[0]}")
    r = np.zeros_like(s)
    for l, c in ch.coeffs_by_delay:
        if s.ndim == 1:
            r[l:] += c[l:] * s[:ch.frame_len - l]
        else:
            r[l:] += c[l:, None] * s[:ch.frame_len - l]
    return r


def apply_channel_adjoint(ch: LtvChannel, r) -> np.ndarray:
    """Adjoint map: x[m] = sum_p conj(c_p[m + l_p]) r[m + l_p]."""
    r = np.asarray(r, dtype=np.complex128)
    if r.shape[0] != ch.frame_len:
        raise DimensionError(
            f"expected signal of length {ch.frame_len}, got {r.shape[0]}")
    x = np.zeros_like(r)
    for l, c in ch.coeffs_by_delay:
        l = int(l)
        if r.ndim == 1:
            x[:ch.frame_len - l] += np.conj(c[l:]) * r[l:]
        else:
            x[:ch.frame_len - l] += np.conj(c[l:, None]) * r[l:]
    return x


def channel_operator(ch: LtvChannel) -> LinearOperator:
    return LinearOperator(ch.frame_len, ch.frame_len,
                          lambda s: apply_channel(ch, s),
                          lambda r: apply_channel_adjoint(ch, r))


def effective_operator(ch: LtvChannel, cp: CpConfig, m: int,
                       n: int) -> LinearOperator:
    """End-to-end delay-Doppler operator G = Demod o Channel o Mod (MN -> MN)."""
    lt = n * (m + cp.n_cp)
    if ch.frame_len != lt:
        raise DimensionError(
            f"channel frame length {ch.frame_len} != N*(M+n_cp) = {lt}")
    if ch.delays.size and int(ch.delays.max()) > cp.n_cp:
        raise ConfigurationError(
            f"max tap delay {int(ch.delays.max())} exceeds n_cp={cp.n_cp}")

    def _apply(x):
        return demodulate(apply_channel(ch, modulate(x, m, n, cp)), m, n, cp)

    def _adjoint(y):
        return modulate_adjoint(
            apply_channel_adjoint(ch, demodulate_adjoint(y, m, n, cp)), m, n, cp)

    return LinearOperator(m * n, m * n, _apply, _adjoint)


def block_fd_equalize(ch: LtvChannel, cp: CpConfig, m: int, n: int, y,
                      noise_std: float, g=None) -> np.ndarray:
    """Approximate regularized equalization via per-block frequency bins.

    With a per-block CP covering the delay spread, each retained output
    block depends on its own input block only, so the effective channel is
    unitarily equivalent (by the Doppler-axis DFT) to N independent M x M
    blocks. Freezing every path's Doppler phase at the block's centre
    sample makes each block circulant, hence diagonal in the M-point
    frequency domain; the Tikhonov-regularized inverse is then a per-bin
    scalar. Cost O(MN log MN).

    The only approximation is the intra-block Doppler rotation (about
    2 pi nu_max (M/2) Ts radians at the block edges), so the result is an
    accurate starting estimate for an iterative refinement, not an exact
    solve. Passing the exact effective operator as ``g`` applies one
    correction solve against its damped-least-squares residual, which
    cancels the first-order part of that Doppler mismatch at the price of
    one extra operator apply.
    """
    lt = n * (m + cp.n_cp)
    if ch.frame_len != lt:
        raise DimensionError(
            f"channel frame length {ch.frame_len} != N*(M+n_cp) = {lt}")
    if ch.delays.size and int(ch.delays.max()) > cp.n_cp:
        raise ConfigurationError(
            f"max tap delay {int(ch.delays.max())} exceeds n_cp={cp.n_cp}")
    y = np.asarray(y, dtype=np.complex128)
    if y.ndim != 1 or y.shape[0] != m * n:
        raise DimensionError(f"expected received vector of length {m * n}")

    # Per-block impulse responses with phases frozen at the block centre
    # of the retained (post-CP) samples.
    t_ref = (np.arange(n) * (m + cp.n_cp) + cp.n_cp + (m - 1) / 2.0)
    h = np.zeros((m, n), dtype=np.complex128)
    for gain, l, nu in zip(ch.gains, ch.delays, ch.dopplers_hz):
        h[int(l)] += gain * np.exp(
            2j * np.pi * nu * (t_ref - int(l)) * ch.sample_period_s)
    lam = np.fft.fft(h, axis=0)  # per-block frequency response, (M, N)
    denom = np.abs(lam) ** 2 + noise_std ** 2
    np.maximum(denom, np.finfo(float).tiny, out=denom)

    def to_bins(v):
        # Doppler-axis IDFT followed by the per-block M-point DFT, in
        # which the frozen-phase channel acts as a diagonal multiply.
        w = np.fft.ifft(v.reshape(m, n, order="F"), axis=1, norm="ortho")
        return np.fft.fft(w, axis=0)

    def from_bins(b):
        u = np.fft.ifft(b, axis=0)
        return np.fft.fft(u, axis=1, norm="ortho").reshape(-1, order="F")

    x = from_bins(np.conj(lam) * to_bins(y) / denom)
    if g is None:
        return x

    # One correction solve: the exact solution of the damped normal
    # equations satisfies (G^H G + s^2 I) x* = G^H y, so the correction
    # d = x* - x solves the same system with right-hand side
    # G^H (y - G x) - s^2 x, which the per-bin inverse approximates.
    residual = y - g.apply(x)
    rhs_bins = np.conj(lam) * to_bins(residual) - noise_std ** 2 * to_bins(x)
    return x + from_bins(rhs_bins / denom)


def add_noise(r, noise_var: float, rng) -> np.ndarray:
    """Add i.i.d. CN(0, noise_var) samples."""
    if noise_var <= 0:
        raise ConfigurationError("noise variance must be positive")
    rng = np.random.default_rng(rng)
    r = np.asarray(r, dtype=np.complex128)
    w = np.sqrt(noise_var / 2.0) * (rng.standard_normal(r.shape)
                                    + 1j * rng.standard_normal(r.shape))
    return r + w
