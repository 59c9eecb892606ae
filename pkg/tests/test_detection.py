import numpy as np
import pytest

from otfs_noma.detection import (PowerAllocation, ReliabilityZone,
                                 ThresholdSchedule, detect_iterative,
                                 ftpa_allocate, is_unreliable, mmse_sic_detect,
                                 quantize, rz_detect)
from otfs_noma.exceptions import ConfigurationError, DimensionError
from otfs_noma.lsqr import LsqrConfig, lsqr_solve
from otfs_noma.modem import build_constellation, random_frame, superimpose
from otfs_noma.numerics import (IdentityOperator, MatrixOperator,
                                dense_regularized_solve)

C4 = build_constellation(4)
C16 = build_constellation(16)
D4 = C4.half_distance
D16 = C16.half_distance

LSQR_EXACT = LsqrConfig(max_iterations=50, tolerance=1e-12, damp=0.0)


class TestFtpa:
    def test_equal_snrs(self):
        a = ftpa_allocate(20.0, 20.0, 1.0)
        assert (a.p1, a.p2) == (0.5, 0.5)

    def test_alpha_zero(self):
        a = ftpa_allocate(5.0, 30.0, 0.0)
        assert (a.p1, a.p2) == (0.5, 0.5)

    def test_15db_gap(self):
        a = ftpa_allocate(20.0, 35.0, 1.0)
        assert a.p1 == pytest.approx(0.96935, abs=1e-5)
        assert a.p2 == pytest.approx(0.03065, abs=1e-5)
        assert a.p1 > a.p2

    def test_negative_alpha_rejected(self):
        with pytest.raises(ConfigurationError):
            ftpa_allocate(0.0, 10.0, -1.0)


class TestIsUnreliable:
    def test_qpsk_near_boundary(self):
        zone = ReliabilityZone(C4, 2 * D4)
        assert is_unreliable(0.1 + 0.8j, zone)  # real part inside the band

    def test_zero_threshold_everything_reliable(self):
        for c in (C4, C16):
            zone = ReliabilityZone(c, 0.0)
            vals = np.array([0.0, 1e-300 + 1e-300j, 0.5 - 0.5j])
            assert not np.any(is_unreliable(vals, zone))

    def test_16qam_inner_boundary(self):
        # 0.633 sits within 0.1 of the boundary at 2d ~ 0.6325.
        zone = ReliabilityZone(C16, 0.2)
        assert is_unreliable(0.633 + 0.633j, zone)

    def test_union_vs_intersection(self):
        v = 0.1 + 0.8j  # real in band, imag not (4-QAM, T = 2d)
        assert is_unreliable(v, ReliabilityZone(C4, 2 * D4, "union"))
        assert not is_unreliable(v, ReliabilityZone(C4, 2 * D4, "intersection"))
        w = 0.1 + 0.2j  # both coordinates in band
        assert is_unreliable(w, ReliabilityZone(C4, 2 * D4, "intersection"))

    def test_open_interval_boundary(self):
        # At exactly T/2 from a boundary the value is reliable (strict <).
        zone = ReliabilityZone(C4, 2 * D4)
        assert not is_unreliable(D4 + 2j, zone)


class TestQuantize:
    def test_qpsk_nearest(self):
        assert quantize(0.5 + 0.9j, C4) == pytest.approx(D4 + 1j * D4)

    def test_idempotent_on_constellation(self):
        out = quantize(C16.points, C16)
        np.testing.assert_array_equal(out, C16.points)

    def test_tie_rounds_down(self):
        assert quantize(0.0 + 0.0j, C16) == pytest.approx(-D16 - 1j * D16)
        assert quantize(2 * D16 + 0.5j, C16) == pytest.approx(D16 + 1j * D16)

    def test_clipping_outside_grid(self):
        assert quantize(10 - 10j, C4) == pytest.approx(D4 - 1j * D4)


class TestRzDetect:
    def test_zero_threshold_decides_all(self):
        est = np.array([0.01 + 0.01j, -0.5 + 0.2j, 1.0 - 1.0j])
        active = np.array([0, 1, 2])
        rel, q = rz_detect(est, active, ReliabilityZone(C4, 0.0), C4)
        np.testing.assert_array_equal(rel, active)
        assert np.all(np.isin(q, C4.points))

    def test_empty_active(self):
        rel, q = rz_detect(np.ones(4, complex), np.array([], dtype=int),
                           ReliabilityZone(C4, 1.0), C4)
        assert rel.size == 0 and q.size == 0

    def test_qpsk_example(self):
        est = np.array([0.8 + 0.8j, 0.1 + 0.9j])
        rel, q = rz_detect(est, np.array([0, 1]),
                           ReliabilityZone(C4, 2 * D4), C4)
        np.testing.assert_array_equal(rel, [0])
        assert q[0] == pytest.approx(D4 + 1j * D4)

    def test_shrinking_threshold_grows_reliable_set(self):
        rng = np.random.default_rng(0)
        est = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        active = np.arange(64)
        prev = set()
        for t in [2 * D16, 1.5 * D16, D16, 0.5 * D16, 0.0]:
            rel, _ = rz_detect(est, active, ReliabilityZone(C16, t), C16)
            assert prev <= set(rel.tolist())
            prev = set(rel.tolist())
        assert prev == set(active.tolist())


class TestThresholdSchedule:
    def test_monotone_and_clamped(self):
        sched = ThresholdSchedule(2 * D4, 2 * D4, 10)
        t1 = [sched.threshold(1, k) for k in range(1, 11)]
        t2 = [sched.threshold(2, k) for k in range(1, 11)]
        assert all(a >= b for a, b in zip(t1, t1[1:]))
        assert all(a >= b for a, b in zip(t2, t2[1:]))
        assert all(t >= 0 for t in t1 + t2)
        # User 1 hits zero by round K-1, user 2 by round K.
        assert t1[10 - 2] == 0.0
        assert t2[10 - 1] == 0.0

    def test_round_two_values(self):
        sched = ThresholdSchedule(1.8, 0.9, 10)
        assert sched.threshold(1, 2) == pytest.approx(1.8 * (1 - 2 / 9))
        assert sched.threshold(2, 2) == pytest.approx(0.9 * (1 - 2 / 10))

    def test_clamp_at_negative_formula_values(self):
        sched = ThresholdSchedule(1.0, 1.0, 10)
        assert sched.threshold(1, 10) == 0.0  # raw formula is negative here

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            ThresholdSchedule(-1.0, 1.0, 10)
        with pytest.raises(ConfigurationError):
            ThresholdSchedule(1.0, 1.0, 1)


def _reference_two_user_loop(y, p1, p2, c, k_max, t_start):
    """Literal re-implementation of the detection loop for identity channel,
    zero noise: exact equalizer, explicit index sets, interval tests."""
    mn = y.size
    d = c.half_distance
    boundaries = c.boundaries
    xhat1 = np.zeros(mn, complex)
    xhat2 = np.zeros(mn, complex)
    n1 = set(range(mn))
    n2 = set(range(mn))
    d1 = set()
    yk = y.copy()

    def unreliable(v, t):
        def in_band(u):
            return any(abs(u - b) < t / 2 for b in boundaries)
        return in_band(v.real) or in_band(v.imag)

    def nearest(v):
        return min(c.points, key=lambda p: abs(p - v))

    for k in range(1, k_max + 1):
        t1 = t_start if k == 1 else max(0.0, t_start * (1 - k / (k_max - 1)))
        t2 = t_start if k == 1 else max(0.0, t_start * (1 - k / k_max))
        x_sup = yk.copy()  # exact equalization for identity channel
        q1 = np.zeros(mn, complex)
        q2 = np.zeros(mn, complex)
        for i in sorted(n1):
            v = x_sup[i] / np.sqrt(p1)
            if not unreliable(v, t1):
                q1[i] = nearest(v)
        for i in sorted(n2 & d1):
            v = x_sup[i] / np.sqrt(p2)
            if not unreliable(v, t2):
                q2[i] = nearest(v)
        yk = yk - (np.sqrt(p1) * q1 + np.sqrt(p2) * q2)
        xhat1 = np.where(q1 != 0, q1, xhat1)
        xhat2 = np.where(q2 != 0, q2, xhat2)
        n1 = {i for i in range(mn) if xhat1[i] == 0}
        n2 = {i for i in range(mn) if xhat2[i] == 0}
        d1 = set(range(mn)) - n1
        if not n1 and not n2:
            break
    return xhat1, xhat2


class TestDetectIterative:
    def test_degenerate_single_user(self):
        rng = np.random.default_rng(1)
        x1 = random_frame(C4, 2, 2, rng).vec()
        alloc = PowerAllocation(1.0, 0.0)
        sched = ThresholdSchedule(2 * D4, 2 * D4, 10)
        out = detect_iterative(IdentityOperator(4), x1, alloc, C4, C4, sched,
                               LSQR_EXACT, user=1)
        np.testing.assert_allclose(out, x1, atol=1e-9)

    def test_two_users_identity_zero_noise_mn4(self):
        rng = np.random.default_rng(2)
        alloc = ftpa_allocate(20.0, 35.0, 1.0)
        sched = ThresholdSchedule(2 * D4, 2 * D4, 10)
        for _ in range(20):
            x1 = random_frame(C4, 2, 2, rng).vec()
            x2 = random_frame(C4, 2, 2, rng).vec()
            y = superimpose(x1, x2, alloc.p1, alloc.p2)
            got1 = detect_iterative(IdentityOperator(4), y, alloc, C4, C4,
                                    sched, LSQR_EXACT, user=1)
            got2 = detect_iterative(IdentityOperator(4), y, alloc, C4, C4,
                                    sched, LSQR_EXACT, user=2)
            np.testing.assert_allclose(got1, x1, atol=1e-9)
            np.testing.assert_allclose(got2, x2, atol=1e-9)
            # Cross-check the whole loop against the naive reference.
            ref1, ref2 = _reference_two_user_loop(y, alloc.p1, alloc.p2, C4,
                                                  10, 2 * D4)
            np.testing.assert_allclose(got1, ref1, atol=1e-9)
            np.testing.assert_allclose(got2, ref2, atol=1e-9)

    def test_all_decisions_made_and_in_constellation(self):
        # Noisy random channel: outputs must still be complete and valid.
        rng = np.random.default_rng(3)
        mn = 16
        g = MatrixOperator(np.eye(mn) + 0.3 * (rng.standard_normal((mn, mn))
                                               + 1j * rng.standard_normal((mn, mn))))
        alloc = ftpa_allocate(10.0, 25.0, 1.0)
        x1 = random_frame(C16, 4, 4, rng).vec()
        x2 = random_frame(C16, 4, 4, rng).vec()
        y = g.apply(superimpose(x1, x2, alloc.p1, alloc.p2))
        y += 0.05 * (rng.standard_normal(mn) + 1j * rng.standard_normal(mn))
        sched = ThresholdSchedule(2 * D16, 2 * D16, 10)
        cfg = LsqrConfig(15, 1e-2, 0.05)
        for user, c in ((1, C16), (2, C16)):
            out = detect_iterative(g, y, alloc, C16, C16, sched, cfg, user)
            assert not np.any(out == 0)
            assert np.all(np.isin(np.round(out, 9), np.round(c.points, 9)))

    def test_cancellation_exactness_zero_noise(self):
        rng = np.random.default_rng(4)
        alloc = ftpa_allocate(20.0, 35.0, 1.0)
        x1 = random_frame(C16, 8, 4, rng).vec()
        x2 = random_frame(C16, 8, 4, rng).vec()
        y = superimpose(x1, x2, alloc.p1, alloc.p2)
        g = IdentityOperator(32)
        sched = ThresholdSchedule(2 * D16, 2 * D16, 10)
        got1 = detect_iterative(g, y, alloc, C16, C16, sched, LSQR_EXACT, 1)
        got2 = detect_iterative(g, y, alloc, C16, C16, sched, LSQR_EXACT, 2)
        resid = y - superimpose(got1, got2, alloc.p1, alloc.p2)
        assert np.linalg.norm(resid) <= 1e-9 * np.linalg.norm(y)

    def test_user2_requires_power(self):
        with pytest.raises(ConfigurationError):
            detect_iterative(IdentityOperator(4), np.zeros(4),
                             PowerAllocation(1.0, 0.0), C4, C4,
                             ThresholdSchedule(1.0, 1.0, 10), LSQR_EXACT, 2)

    def test_warm_start_matches_cold_when_exact(self):
        # With an exact initial estimate the first-round solve starts at
        # the same point the cold start converges to, so decisions agree.
        rng = np.random.default_rng(5)
        alloc = ftpa_allocate(20.0, 35.0, 1.0)
        x1 = random_frame(C4, 2, 2, rng).vec()
        x2 = random_frame(C4, 2, 2, rng).vec()
        y = superimpose(x1, x2, alloc.p1, alloc.p2)
        sched = ThresholdSchedule(2 * D4, 2 * D4, 10)
        g = IdentityOperator(4)
        for user in (1, 2):
            cold = detect_iterative(g, y, alloc, C4, C4, sched, LSQR_EXACT,
                                    user)
            warm = detect_iterative(g, y, alloc, C4, C4, sched, LSQR_EXACT,
                                    user, x_init=y.copy())
            np.testing.assert_allclose(warm, cold, atol=1e-9)

    def test_x_init_wrong_shape_rejected(self):
        with pytest.raises(DimensionError):
            detect_iterative(IdentityOperator(4), np.zeros(4),
                             PowerAllocation(0.8, 0.2), C4, C4,
                             ThresholdSchedule(1.0, 1.0, 10), LSQR_EXACT, 1,
                             x_init=np.zeros(5))


class TestMmseSic:
    def test_degenerate_single_user(self):
        rng = np.random.default_rng(5)
        x1 = random_frame(C4, 4, 4, rng).vec()
        out = mmse_sic_detect(np.eye(16), x1, PowerAllocation(1.0, 0.0),
                              C4, C4, 0.0, user=1)
        np.testing.assert_allclose(out, x1, atol=1e-9)

    def test_identity_zero_noise_two_stages_mn4(self):
        rng = np.random.default_rng(6)
        alloc = ftpa_allocate(20.0, 35.0, 1.0)
        x1 = random_frame(C4, 2, 2, rng).vec()
        x2 = random_frame(C4, 2, 2, rng).vec()
        y = superimpose(x1, x2, alloc.p1, alloc.p2)
        # Stage 1 by hand: quantize y / sqrt(p1) per entry.
        expected1 = quantize(y / np.sqrt(alloc.p1), C4)
        got1 = mmse_sic_detect(np.eye(4), y, alloc, C4, C4, 0.0, user=1)
        np.testing.assert_allclose(got1, expected1, atol=1e-12)
        # Stage 2 by hand: cancel and quantize the remainder.
        y2 = y - np.sqrt(alloc.p1) * expected1
        expected2 = quantize(y2 / np.sqrt(alloc.p2), C4)
        got2 = mmse_sic_detect(np.eye(4), y, alloc, C4, C4, 0.0, user=2)
        np.testing.assert_allclose(got2, expected2, atol=1e-12)
        np.testing.assert_allclose(got1, x1, atol=1e-9)
        np.testing.assert_allclose(got2, x2, atol=1e-9)

    def test_stage1_equalizer_matches_lsqr(self):
        rng = np.random.default_rng(7)
        mn = 32
        g = rng.standard_normal((mn, mn)) + 1j * rng.standard_normal((mn, mn))
        y = rng.standard_normal(mn) + 1j * rng.standard_normal(mn)
        sigma = 0.4
        dense = dense_regularized_solve(g, y, sigma)
        krylov = lsqr_solve(MatrixOperator(g), y,
                            LsqrConfig(500, 1e-12, sigma)).x
        assert np.linalg.norm(dense - krylov) <= 1e-6 * np.linalg.norm(dense)

    def test_agreement_with_iterative_degenerate_case(self):
        rng = np.random.default_rng(8)
        x1 = random_frame(C16, 4, 4, rng).vec()
        alloc = PowerAllocation(1.0, 0.0)
        sched = ThresholdSchedule(2 * D16, 2 * D16, 10)
        a = detect_iterative(IdentityOperator(16), x1, alloc, C16, C16,
                             sched, LSQR_EXACT, 1)
        b = mmse_sic_detect(np.eye(16), x1, alloc, C16, C16, 0.0, 1)
        np.testing.assert_allclose(a, b, atol=1e-12)
