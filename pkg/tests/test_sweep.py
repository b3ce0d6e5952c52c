import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pnrkit.core import DetectorParams, DomainError, RecoveryCalibration, fit_sqrt_coefficient, fwhm_to_sigma
from pnrkit.multigauss import build_model, pnr_quality
from pnrkit.sweep import (
    SweepResult,
    UnreachableError,
    min_lk_for_quality,
    quality_vs_lk,
    sweep_delta_t,
    sweep_jitter,
    tradeoff_report,
)

SIGMA1 = fwhm_to_sigma(33.0)
A_ONE_POINT = 47.0 / math.sqrt(872.0)
DEVICE_LKS = [165.0, 244.0, 320.0, 400.0, 475.0, 550.0, 640.0, 750.0, 872.0]


class TestDeltaT:
    def test_limits(self):
        r = sweep_delta_t(SIGMA1, 1.5, [0.1 * SIGMA1, 20 * SIGMA1])
        assert r.q(1)[1] > 0.999
        # overlapping peaks: only the amplitude share of n = 1 is left
        floor = build_model(1.5, 1.0, SIGMA1).relative_areas[0]
        assert r.q(1)[0] == pytest.approx(floor, abs=0.1)

    def test_monotone_and_ordered(self):
        dts = np.linspace(1, 150, 150)
        r = sweep_delta_t(SIGMA1, 1.5, dts)
        assert np.all(np.diff(r.quality_per_n, axis=1) >= 0)
        assert np.all(r.q(1) >= r.q(2) - 1e-12) and np.all(r.q(2) >= r.q(3) - 1e-12)

    def test_sigmoidal(self):
        dts = np.linspace(1, 150, 300)
        q = sweep_delta_t(SIGMA1, 1.5, dts).q(2)
        slope = np.diff(q)
        peak = int(np.argmax(slope))
        assert 0 < peak < len(slope) - 1
        assert q[0] < 0.5 < q[-1]

    def test_47ps_regime(self):
        r = sweep_delta_t(SIGMA1, 1.5, [47.0])
        assert r.q(1)[0] == pytest.approx(0.96, abs=0.05)

    def test_result_invariants(self):
        with pytest.raises(DomainError):
            SweepResult("x", np.array([1.0, 1.0]), np.zeros((2, 2)))
        with pytest.raises(DomainError):
            SweepResult("x", np.array([1.0, 2.0]), np.full((2, 2), 1.5))


class TestLk:
    def test_identity_with_delta_t(self):
        lks = np.linspace(50, 5000, 40)
        a = 1.6
        np.testing.assert_allclose(quality_vs_lk(a, SIGMA1, 1.5, lks).quality_per_n,
                                   sweep_delta_t(SIGMA1, 1.5, a * np.sqrt(lks)).quality_per_n, atol=1e-12)

    def test_four_times_lk_doubles_dt(self):
        a = 1.6
        r = quality_vs_lk(a, SIGMA1, 1.5, [200.0, 800.0])
        q = sweep_delta_t(SIGMA1, 1.5, [a * math.sqrt(200), 2 * a * math.sqrt(200)]).quality_per_n
        np.testing.assert_allclose(r.quality_per_n, q, atol=1e-12)

    def test_monotone(self):
        r = quality_vs_lk(1.6, SIGMA1, 1.5, np.geomspace(10, 20000, 80))
        assert np.all(np.diff(r.quality_per_n, axis=1) >= 0)


class TestJitter:
    def test_10ps(self):
        r = sweep_jitter(47.0, 1.5, [10.0])
        assert np.all(r.quality_per_n[:3, 0] > 0.99)

    def test_tiny_jitter(self):
        r = sweep_jitter(47.0, 1.5, [0.01])
        np.testing.assert_allclose(r.quality_per_n[:, 0], 1.0, atol=1e-12)

    def test_60ps_ordering(self):
        q = sweep_jitter(47.0, 1.5, [60.0]).quality_per_n[:, 0]
        assert q[2] < q[1] < q[0] < 1

    def test_monotone(self):
        r = sweep_jitter(47.0, 1.5, np.linspace(1, 120, 120))
        assert np.all(np.diff(r.quality_per_n, axis=1) <= 0)


class TestMinLk:
    def test_bisection_contract(self):
        for n in (1, 2, 3):
            lk = min_lk_for_quality(0.99, n, A_ONE_POINT, SIGMA1, 1.5)
            q = lambda x: pnr_quality(build_model(1.5, A_ONE_POINT * math.sqrt(x), SIGMA1)).quality[n - 1]
            assert q(lk - 1) < 0.99 <= q(lk)

    def test_ordering(self):
        lks = [min_lk_for_quality(0.99, n, A_ONE_POINT, SIGMA1, 1.5) for n in (1, 2, 3)]
        assert lks[0] < lks[1] < lks[2]

    def test_floor(self):
        # Q_1 is ~0.9 at the floor already, above a 0.5 target
        assert min_lk_for_quality(0.5, 1, A_ONE_POINT, SIGMA1, 1.5, lk_floor_nH=872.0) == 872.0

    def test_unreachable(self):
        with pytest.raises(UnreachableError):
            min_lk_for_quality(0.99, 1, 1e-4, SIGMA1, 1.5)

    def test_validation(self):
        with pytest.raises(DomainError):
            min_lk_for_quality(1.0, 1, A_ONE_POINT, SIGMA1, 1.5)
        with pytest.raises(DomainError):
            min_lk_for_quality(0.9, 5, A_ONE_POINT, SIGMA1, 1.5)

    @given(st.floats(0.3, 0.98), st.integers(1, 3))
    def test_inverse_of_sweep(self, target, n):
        lk = min_lk_for_quality(target, n, A_ONE_POINT, SIGMA1, 1.5)
        q = quality_vs_lk(A_ONE_POINT, SIGMA1, 1.5, [lk]).q(n)[0]
        assert q >= target


class TestTradeoff:
    def test_reference_device_rows(self):
        a = fit_sqrt_coefficient([(165, 21), (872, 47)])
        rows = tradeoff_report([DetectorParams(872), DetectorParams(165)], a)
        assert [r.kinetic_inductance_nH for r in rows] == [165, 872]
        assert rows[0].max_rate_hz == pytest.approx(165e6, rel=0.02)
        assert rows[1].tau_rec_ns == pytest.approx(68.11)
        assert rows[1].max_rate_hz == pytest.approx(1e9 / 68.11)

    def test_single_device(self):
        rows = tradeoff_report([DetectorParams(400)], 1.6)
        assert len(rows) == 1
        assert rows[0].delta_t12_ps == pytest.approx(1.6 * 20)

    def test_nine_device_table(self):
        a = fit_sqrt_coefficient([(165, 21), (872, 47)])
        rows = tradeoff_report([DetectorParams(x) for x in reversed(DEVICE_LKS)], a)
        lk = [r.kinetic_inductance_nH for r in rows]
        rate = np.array([r.max_rate_hz for r in rows])
        q = np.array([r.quality_per_n for r in rows])
        assert lk == sorted(lk)
        assert np.all(np.diff(rate) < 0)
        assert np.all(np.diff(q, axis=0) >= 0)

    def test_custom_calibration(self):
        cal = RecoveryCalibration(((100.0, 10.0), (200.0, 20.0)))
        rows = tradeoff_report([DetectorParams(150)], 1.6, calibration=cal)
        assert rows[0].tau_rec_ns == pytest.approx(15.0)

    def test_empty(self):
        with pytest.raises(DomainError):
            tradeoff_report([], 1.6)
