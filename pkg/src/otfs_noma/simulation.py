"""Monte Carlo engine: trials, sweeps, seeding, persistence, benchmarks.

Every trial is a pure function of (config, trial index, master seed); the
per-trial RNG streams are derived with a hash so results are identical no
matter how trials are ordered or distributed across workers.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel import (add_noise, apply_channel, block_fd_equalize,
                      doppler_from_speed, effective_operator,
                      generate_channel, identity_profile, load_profile,
                      tdl_c_profile)
from .detection import (PowerAllocation, ThresholdSchedule, detect_iterative,
                        ftpa_allocate, mmse_sic_detect)
from .exceptions import ConfigurationError
from .lsqr import LsqrConfig
from .modem import (CpConfig, build_constellation, demodulate, modulate,
                    random_frame, superimpose)
from .numerics import densify

__all__ = [
    "SimConfig",
    "TrialResult",
    "SweepRow",
    "SweepResult",
    "derive_seed",
    "run_trial",
    "sweep",
    "export_results",
    "read_results",
    "benchmark_complexity",
]

DETECTOR_PROPOSED = "proposed"
DETECTOR_MMSE_SIC = "mmse-sic"
_DETECTORS = (DETECTOR_PROPOSED, DETECTOR_MMSE_SIC)

CSV_HEADER = "sweep_axis,sweep_value,user,detector,trials,symbols,errors,ser,wall_ms"


@dataclass(frozen=True)
class SimConfig:
    """All tunables of one simulation point. Defaults reproduce the reference
    setup: 64x16 grid, 5.9 GHz carrier, 4.95 MHz bandwidth, 15 dB SNR gap,
    TDL-C 300 ns, K=10 detection rounds, LSQR U=15 / tol 1e-2, starting
    thresholds of twice each user's QAM half-distance."""

    m: int = 64
    n: int = 16
    n_cp: int | None = None  # None: smallest CP covering the profile's max delay
    f_c_hz: float = 5.9e9
    bandwidth_hz: float = 4.95e6
    qam_order_1: int = 4
    qam_order_2: int = 4
    snr1_db: float = 20.0
    snr_gap_db: float = 15.0
    snr2_db: float | None = None  # None: snr1_db + snr_gap_db
    noiseless: bool = False
    speed_kmh: float = 200.0
    doppler_hz: float | None = None  # None: derived from speed_kmh and f_c_hz
    ftpa_alpha: float = 1.0
    p1: float | None = None  # explicit power split overriding FTPA
    t1_multiplier: float = 2.0  # starting threshold = multiplier * d_i
    t2_multiplier: float = 2.0
    k_rounds: int = 10
    lsqr_max_iterations: int = 15
    lsqr_tolerance: float = 1e-2
    trials: int = 1000
    seed: int = 0
    detectors: tuple[str, ...] = (DETECTOR_PROPOSED, DETECTOR_MMSE_SIC)
    channel: str = "tdlc"  # "tdlc" | "identity" | path to a profile file
    delay_spread_ns: float = 300.0
    zone_mode: str = "union"
    workers: int = 1

    def __post_init__(self):
        for name in ("m", "n", "trials", "k_rounds", "lsqr_max_iterations"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.bandwidth_hz <= 0 or self.f_c_hz <= 0:
            raise ConfigurationError("frequencies must be positive")
        for det in self.detectors:
            if det not in _DETECTORS:
                raise ConfigurationError(
                    f"unknown detector {det!r}; expected one of {_DETECTORS}")
        if self.p1 is not None and not 0 <= self.p1 <= 1:
            raise ConfigurationError("p1 must lie in [0, 1]")

    @property
    def sample_period_s(self) -> float:
        return 1.0 / self.bandwidth_hz

    def resolved_snr2_db(self) -> float:
        return self.snr2_db if self.snr2_db is not None else (
            self.snr1_db + self.snr_gap_db)

    def tap_profile(self):
        if self.channel == "identity":
            return identity_profile(self.sample_period_s)
        if self.channel == "tdlc":
            return tdl_c_profile(self.delay_spread_ns * 1e-9,
                                 self.sample_period_s)
        return load_profile(self.channel, self.delay_spread_ns * 1e-9,
                            self.sample_period_s)

    def resolved_n_cp(self) -> int:
        profile = self.tap_profile()
        n_cp = self.n_cp if self.n_cp is not None else profile.max_delay_samples
        if n_cp < profile.max_delay_samples:
            raise ConfigurationError(
                f"n_cp={n_cp} is below the profile's max delay of "
                f"{profile.max_delay_samples} samples")
        if n_cp >= self.m:
            raise ConfigurationError(f"n_cp={n_cp} must be < M={self.m}")
        return n_cp

    def allocation(self) -> PowerAllocation:
        if self.p1 is not None:
            return PowerAllocation(self.p1, 1.0 - self.p1)
        return ftpa_allocate(self.snr1_db, self.resolved_snr2_db(),
                             self.ftpa_alpha)

    def max_doppler_hz(self) -> float:
        if self.doppler_hz is not None:
            return self.doppler_hz
        return doppler_from_speed(self.speed_kmh, self.f_c_hz)

    def noise_vars(self) -> tuple[float, float]:
        """Per-user noise variance; average received SNR_i = 1 / sigma_i^2."""
        if self.noiseless:
            return 0.0, 0.0
        return (10.0 ** (-self.snr1_db / 10.0),
                10.0 ** (-self.resolved_snr2_db() / 10.0))


@dataclass
class TrialResult:
    trial_index: int
    symbols_per_user: int
    errors: dict = field(default_factory=dict)  # (user, detector) -> int
    elapsed_s: dict = field(default_factory=dict)  # (user, detector) -> float


@dataclass(frozen=True)
class SweepRow:
    sweep_axis: str
    sweep_value: float
    user: int
    detector: str
    trials: int
    symbols: int
    errors: int
    wall_ms: float

    @property
    def ser(self) -> float:
        return self.errors / self.symbols if self.symbols else 0.0


@dataclass
class SweepResult:
    rows: list
    config: SimConfig


def derive_seed(master_seed: int, trial_index: int, stream_tag: str) -> int:
    """Deterministic, collision-resistant 128-bit stream seed."""
    digest = hashlib.sha256(
        f"{master_seed}/{trial_index}/{stream_tag}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def _stream_rng(cfg: SimConfig, trial_index: int, tag: str):
    return np.random.default_rng(derive_seed(cfg.seed, trial_index, tag))


def _receiver_inputs(cfg: SimConfig, trial_index: int):
    """Simulate one frame up to each user's receiver input.

    Yields (user, G, y, noise_std, truth, x_init) for both users, where G
    is the matrix-free effective channel seen by that user, y the
    demodulated received vector, and x_init the cheap per-block
    frequency-domain equalization of y used to seed the iterative detector.
    """
    c1 = build_constellation(cfg.qam_order_1)
    c2 = build_constellation(cfg.qam_order_2)
    alloc = cfg.allocation()
    profile = cfg.tap_profile()
    n_cp = cfg.resolved_n_cp()
    cp = CpConfig(n_cp)
    frame_len = cfg.n * (cfg.m + n_cp)
    v_max = cfg.max_doppler_hz()
    noise_vars = cfg.noise_vars()

    x1 = random_frame(c1, cfg.m, cfg.n,
                      _stream_rng(cfg, trial_index, "frame-user1")).vec()
    x2 = random_frame(c2, cfg.m, cfg.n,
                      _stream_rng(cfg, trial_index, "frame-user2")).vec()
    s = superimpose(modulate(x1, cfg.m, cfg.n, cp),
                    modulate(x2, cfg.m, cfg.n, cp), alloc.p1, alloc.p2)
    truths = {1: x1, 2: x2}

    for user in (1, 2):
        ch = generate_channel(profile, v_max, frame_len,
                              _stream_rng(cfg, trial_index, f"channel-user{user}"))
        r = apply_channel(ch, s)
        sigma2 = noise_vars[user - 1]
        if sigma2 > 0:
            r = add_noise(r, sigma2,
                          _stream_rng(cfg, trial_index, f"noise-user{user}"))
        y = demodulate(r, cfg.m, cfg.n, cp)
        G = effective_operator(ch, cp, cfg.m, cfg.n)
        noise_std = float(np.sqrt(sigma2))
        x_init = block_fd_equalize(ch, cp, cfg.m, cfg.n, y, noise_std, g=G)
        yield user, G, y, noise_std, truths[user], x_init


def run_trial(cfg: SimConfig, trial_index: int) -> TrialResult:
    """Simulate one frame end to end for both users and all detectors."""
    c1 = build_constellation(cfg.qam_order_1)
    c2 = build_constellation(cfg.qam_order_2)
    alloc = cfg.allocation()
    result = TrialResult(trial_index=trial_index,
                         symbols_per_user=cfg.m * cfg.n)

    for user, G, y, noise_std, truth, x_init in _receiver_inputs(cfg,
                                                                 trial_index):
        for detector in cfg.detectors:
            t0 = time.perf_counter()
            if detector == DETECTOR_PROPOSED:
                sched = ThresholdSchedule(
                    cfg.t1_multiplier * c1.half_distance,
                    cfg.t2_multiplier * c2.half_distance, cfg.k_rounds)
                lsqr_cfg = LsqrConfig(cfg.lsqr_max_iterations,
                                      cfg.lsqr_tolerance, damp=noise_std)
                xhat = detect_iterative(G, y, alloc, c1, c2, sched, lsqr_cfg,
                                        user, cfg.zone_mode, x_init=x_init)
            else:
                xhat = mmse_sic_detect(densify(G), y, alloc, c1, c2,
                                       noise_std, user)
            elapsed = time.perf_counter() - t0
            errors = int(np.count_nonzero(np.abs(xhat - truth) > 1e-9))
            result.errors[(user, detector)] = errors
            result.elapsed_s[(user, detector)] = elapsed

    return result


def _timed(fn) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def _point_worker(args):
    cfg_dict, trial_index = args
    return run_trial(SimConfig(**cfg_dict), trial_index)


def _run_point(cfg: SimConfig) -> list:
    """Run cfg.trials trials, optionally on a process pool; order-independent."""
    indices = range(cfg.trials)
    if cfg.workers > 1:
        cfg_dict = dataclasses.asdict(cfg)
        cfg_dict["detectors"] = tuple(cfg_dict["detectors"])
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_point_worker,
                                 [(cfg_dict, i) for i in indices],
                                 chunksize=8))
    return [run_trial(cfg, i) for i in indices]


def _cfg_for_value(cfg: SimConfig, axis: str, value: float) -> SimConfig:
    if axis == "snr":
        return dataclasses.replace(cfg, snr1_db=float(value), snr2_db=None)
    if axis == "doppler":
        return dataclasses.replace(cfg, doppler_hz=float(value))
    if axis == "threshold":
        return dataclasses.replace(cfg, t1_multiplier=float(value))
    raise ConfigurationError(f"unknown sweep axis {axis!r}")


def sweep(cfg: SimConfig, axis: str, values) -> SweepResult:
    """Run cfg.trials trials per sweep value and aggregate error counts."""
    values = list(values)
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    rows = []
    for value in values:
        point_cfg = _cfg_for_value(cfg, axis, value)
        trials = _run_point(point_cfg)
        for user in (1, 2):
            for detector in cfg.detectors:
                errors = sum(t.errors[(user, detector)] for t in trials)
                symbols = sum(t.symbols_per_user for t in trials)
                wall_ms = 1e3 * sum(t.elapsed_s[(user, detector)]
                                    for t in trials)
                rows.append(SweepRow(axis, float(value), user, detector,
                                     len(trials), symbols, errors, wall_ms))
    return SweepResult(rows=rows, config=cfg)


def _config_json(cfg: SimConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["detectors"] = list(d["detectors"])
    return d


def config_hash(cfg: SimConfig) -> str:
    blob = json.dumps(_config_json(cfg), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def export_results(res: SweepResult, path) -> Path:
    """Write the sweep as CSV plus a JSON sidecar with the full config."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [CSV_HEADER]
        for r in res.rows:
            lines.append(f"{r.sweep_axis},{r.sweep_value!r},{r.user},"
                         f"{r.detector},{r.trials},{r.symbols},{r.errors},"
                         f"{r.ser!r},{r.wall_ms!r}")
        path.write_text("\n".join(lines) + "\n")
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps({
            "config": _config_json(res.config),
            "master_seed": res.config.seed,
            "code_version": __version__,
            "config_hash": config_hash(res.config),
        }, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing results to {path}: {exc}") from exc
    return path


def read_results(path) -> list:
    """Parse a CSV produced by export_results back into SweepRow objects."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected CSV header")
    rows = []
    for line in lines[1:]:
        axis, value, user, detector, trials, symbols, errors, _ser, wall = \
            line.split(",")
        rows.append(SweepRow(axis, float(value), int(user), detector,
                             int(trials), int(symbols), int(errors),
                             float(wall)))
    return rows


def benchmark_complexity(sizes, dense_max_mn: int = 1024,
                         seed: int = 0, repeats: int = 3) -> dict:
    """Time the detectors per grid size and fit log-log scaling exponents.

    Times the detection calls only (best of `repeats`, summed over both
    users): channel generation and densification of the effective operator
    are setup shared by either path, not part of the per-detection cost
    being compared. The dense path is skipped above `dense_max_mn`.
    """
    results = []
    for (m, n) in sizes:
        cfg = SimConfig(m=m, n=n, trials=1, seed=seed)
        c1 = build_constellation(cfg.qam_order_1)
        c2 = build_constellation(cfg.qam_order_2)
        alloc = cfg.allocation()
        sched = ThresholdSchedule(cfg.t1_multiplier * c1.half_distance,
                                  cfg.t2_multiplier * c2.half_distance,
                                  cfg.k_rounds)
        entry = {"m": m, "n": n, "mn": m * n, "proposed_s": 0.0}
        if m * n <= dense_max_mn:
            entry["mmse_s"] = 0.0
        for user, G, y, noise_std, _truth, x_init in _receiver_inputs(cfg, 0):
            lsqr_cfg = LsqrConfig(cfg.lsqr_max_iterations,
                                  cfg.lsqr_tolerance, damp=noise_std)
            entry["proposed_s"] += min(
                _timed(lambda: detect_iterative(
                    G, y, alloc, c1, c2, sched, lsqr_cfg, user,
                    cfg.zone_mode, x_init=x_init))
                for _ in range(repeats))
            if "mmse_s" in entry:
                g_dense = densify(G)
                entry["mmse_s"] += min(
                    _timed(lambda: mmse_sic_detect(
                        g_dense, y, alloc, c1, c2, noise_std, user))
                    for _ in range(repeats))
        results.append(entry)

    def _fit(key):
        pts = [(e["mn"], e[key]) for e in results if key in e]
        if len(pts) < 2:
            return None
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        return float(np.polyfit(x, y, 1)[0])

    return {"points": results,
            "proposed_exponent": _fit("proposed_s"),
            "mmse_exponent": _fit("mmse_s")}
