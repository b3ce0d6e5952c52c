import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pnrkit.core import DomainError, MeasurementContext, click_probability, poisson_pmf
from pnrkit.multigauss import (
    GaussianPeak,
    MultiGaussianModel,
    adjacent_intersections,
    build_model,
    build_model_from_gaps,
    evaluate_density,
    gaussian_mass,
    photon_statistics,
    pnr_quality,
)


def random_model(rng, n=4):
    areas = rng.uniform(0.05, 1.0, n)
    gaps = rng.uniform(5.0, 60.0, n - 1)
    means = np.concatenate([[0.0], -np.cumsum(gaps)])
    sigmas = rng.uniform(4.0, 25.0, n)
    return MultiGaussianModel.from_arrays(areas, means, sigmas)


def brute_force_matrix(model, points=1_000_000):
    """Quality matrix by trapezoidal integration of every peak over every bin."""
    d = model.orientation
    bounds, _ = adjacent_intersections(model)
    u_means, sig = d * model.means, model.sigmas
    lo_span = float(np.min(u_means - 8 * sig))
    hi_span = float(np.max(u_means + 8 * sig))
    edges = np.concatenate([[lo_span], np.clip(d * bounds, lo_span, hi_span), [hi_span]])
    n = model.n_max
    per_bin = points // n
    w = np.empty((n, n))
    for m in range(n):
        if edges[m + 1] == edges[m]:
            # zero-width bin: the integral ratio tends to the density ratio at the point
            u = np.array([edges[m]])
            w[m] = [p.amplitude * np.exp(-0.5 * ((u[0] - u_means[k]) / sig[k]) ** 2)
                    for k, p in enumerate(model.peaks)]
            continue
        u = np.linspace(edges[m], edges[m + 1], per_bin)
        for k, p in enumerate(model.peaks):
            g = p.amplitude * np.exp(-0.5 * ((u - u_means[k]) / sig[k]) ** 2)
            w[m, k] = np.trapezoid(g, u)
    return w / w.sum(axis=1, keepdims=True)


class TestBuildModel:
    def test_area_ratio(self):
        m = build_model(1.5, 47, 14, 4)
        assert m.areas[1] / m.areas[0] == pytest.approx(0.75, rel=1e-12)
        assert m.areas.sum() == pytest.approx(1.0, rel=1e-12)

    def test_small_mu_limit(self):
        m = build_model(1e-9, 47, 14, 4)
        assert m.areas[0] == pytest.approx(1.0, abs=1e-8)
        assert np.all(m.areas[1:] < 1e-8)

    def test_fig4c_structure(self):
        m = build_model(1.5, 47.0, 14.0, 4)
        # n = 2 region is visible as its own local maximum of the summed density
        t = np.linspace(-150, 60, 4001)
        f = evaluate_density(m, t)
        peaks = np.flatnonzero((f[1:-1] > f[:-2]) & (f[1:-1] > f[2:])) + 1
        assert np.any(np.abs(t[peaks] - m.means[1]) < 5)
        assert m.orientation == -1

    def test_scaling_invariant(self):
        m = build_model(2.0, 30.0, 12.0, 6)
        np.testing.assert_allclose(m.sigmas * np.sqrt(np.arange(1, 7)), 12.0, rtol=1e-9)

    @pytest.mark.parametrize("kw", [dict(mu_eff=0), dict(delta_t12_ps=0), dict(sigma1_ps=-1), dict(n_max=0),
                                    dict(n_max=11)])
    def test_invalid(self, kw):
        args = dict(mu_eff=1.5, delta_t12_ps=47, sigma1_ps=14, n_max=4)
        args.update(kw)
        with pytest.raises(DomainError):
            build_model(**args)

    def test_model_invariants(self):
        with pytest.raises(DomainError):
            MultiGaussianModel((GaussianPeak(1, 1, 0, 1), GaussianPeak(3, 1, 1, 1)))
        with pytest.raises(DomainError):
            MultiGaussianModel.from_arrays([1, 1, 1], [0, -5, 3], [1, 1, 1])
        with pytest.raises(DomainError):
            GaussianPeak(1, -1.0, 0.0, 1.0)


class TestDensity:
    def test_peak_value(self):
        m = MultiGaussianModel((GaussianPeak(1, 2.5, 10.0, 3.0),))
        assert evaluate_density(m, 10.0) == pytest.approx(2.5, rel=1e-15)

    def test_far_tails(self):
        m = build_model(1.5, 47, 14, 4)
        assert evaluate_density(m, 1e6) == 0.0
        assert evaluate_density(m, -1e6) == 0.0

    def test_symmetry(self):
        m = MultiGaussianModel.from_arrays([1, 1], [0, -40], [10, 10])
        x = np.linspace(0, 100, 51)
        np.testing.assert_allclose(evaluate_density(m, -20 + x), evaluate_density(m, -20 - x), rtol=1e-12)


class TestIntersections:
    def test_midpoint(self):
        m = MultiGaussianModel.from_arrays([1, 1], [0, -40], [10, 10])
        b, flags = adjacent_intersections(m)
        assert b[0] == pytest.approx(-20.0, abs=1e-12)
        assert flags == (False,)

    @given(st.floats(5, 200), st.floats(1, 50))
    def test_amplitude_two_to_one(self, d, s):
        # peaks as amplitudes A_1 = 2 A_2 at 0 and d, equal widths
        m = MultiGaussianModel((GaussianPeak(1, 2.0, 0.0, s), GaussianPeak(2, 1.0, d, s)))
        expected = d / 2 + s * s / d * math.log(2)
        if 0 < expected < d:
            b, flags = adjacent_intersections(m)
            assert b[0] == pytest.approx(expected, rel=1e-9, abs=1e-9)
            assert not flags[0]

    def test_fig3g(self):
        m = build_model_from_gaps(2.66, [49, 23, 15], 16.3)
        b, flags = adjacent_intersections(m)
        assert len(b) == 3
        assert np.all(np.diff(b) < 0)
        means = m.means
        assert np.all((b < means[:-1]) & (b > means[1:]))

    def test_dominated_fallback(self):
        m = MultiGaussianModel((GaussianPeak(1, 1.0, 0.0, 30.0), GaussianPeak(2, 1e-6, -5.0, 1.0)))
        b, flags = adjacent_intersections(m)
        assert flags == (True,)
        # threshold sits on the dominated peak's mean, where the crossing leaves the interval
        assert b[0] == -5.0
        rep = pnr_quality(m)
        assert rep.dominated == (True,)
        np.testing.assert_allclose(rep.p_matrix.sum(axis=1), 1.0)

    def test_zero_width_bin_uses_point_densities(self):
        # peak 2 is dominated by both neighbours, so both thresholds land on its mean
        m = MultiGaussianModel((GaussianPeak(1, 1.0, 0.0, 20.0), GaussianPeak(2, 1e-3, -3.0, 1.0),
                                GaussianPeak(3, 1.0, -6.0, 20.0)))
        b, flags = adjacent_intersections(m)
        assert flags == (True, True) and b[0] == b[1] == -3.0
        rep = pnr_quality(m)
        dens = np.array([p.density(-3.0) for p in m.peaks])
        np.testing.assert_allclose(rep.p_matrix[1], dens / dens.sum(), rtol=1e-12)


class TestQuality:
    def test_far_apart(self):
        m = MultiGaussianModel.from_arrays([1, 1], [0, -1000], [10, 10])
        np.testing.assert_allclose(pnr_quality(m).quality, [1, 1], atol=1e-9)

    def test_rows_normalized(self, rng):
        for _ in range(20):
            rep = pnr_quality(random_model(rng, int(rng.integers(2, 8))))
            np.testing.assert_allclose(rep.p_matrix.sum(axis=1), 1.0, atol=1e-9)

    def test_fig3h_n1(self):
        q = pnr_quality(build_model_from_gaps(2.66, [49, 23, 15], 16.3)).quality
        assert q[0] == pytest.approx(0.96, abs=0.05)

    def test_coincident_means_rejected(self):
        with pytest.raises(DomainError):
            MultiGaussianModel.from_arrays([1, 1], [0, 0], [1, 2])

    def test_brute_force_oracle_small(self, rng):
        for _ in range(5):
            m = random_model(rng)
            np.testing.assert_allclose(pnr_quality(m).p_matrix, brute_force_matrix(m, 200_000), atol=1e-6)

    def test_far_tail_mass_precision(self):
        # both ends far in the upper tail: naive differencing would return 0
        v = gaussian_mass(10.0, 11.0, 0.0, 1.0)
        assert v == pytest.approx(7.6198530241604e-24, rel=1e-10)

    @given(st.integers(0, 2**32 - 1))
    def test_reflection_shift_scale_invariance(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, int(rng.integers(2, 7)))
        base = pnr_quality(m)
        np.testing.assert_allclose(pnr_quality(m.reflected()).quality, base.quality, atol=1e-12)
        np.testing.assert_allclose(pnr_quality(m.shifted(rng.uniform(-1e4, 1e4))).p_matrix,
                                   base.p_matrix, atol=1e-12)
        np.testing.assert_allclose(pnr_quality(m.scaled(rng.uniform(1e-3, 1e3))).p_matrix,
                                   base.p_matrix, atol=1e-12)

    @given(st.floats(0.2, 4.0), st.floats(3.0, 30.0))
    def test_monotone_in_separation(self, mu, s1):
        dts = np.linspace(0.5, 200, 60)
        q = np.array([pnr_quality(build_model(mu, dt, s1, 4)).quality for dt in dts])
        assert np.all(np.diff(q, axis=0) >= -1e-12)


class TestPhotonStatistics:
    def test_no_clicks(self):
        ps = photon_statistics(build_model(1.5, 47, 14), MeasurementContext(1e6, 0.0))
        assert ps.probs == (1.0, 0.0, 0.0, 0.0, 0.0)

    def test_vacuum_exact(self):
        mu = 1.7
        ctx = MeasurementContext(1e6, 1e6 * click_probability(mu))
        ps = photon_statistics(build_model(mu, 47, 14), ctx)
        assert ps.probs[0] == pytest.approx(math.exp(-mu), rel=1e-12)
        assert sum(ps.probs) == pytest.approx(1.0, abs=1e-12)
        # probs[n] = (CR/RR) R_n
        np.testing.assert_allclose(ps.probs[1:], ctx.click_probability * build_model(mu, 47, 14).relative_areas)

    def test_large_n_max_close_to_poisson(self):
        mu = 1.05
        ctx = MeasurementContext(1e6, 1e6 * click_probability(mu))
        ps = photon_statistics(build_model(mu, 47, 14, 10), ctx)
        np.testing.assert_allclose(ps.probs, poisson_pmf(mu, np.arange(11)), atol=1e-7)


class TestSerialization:
    @given(st.integers(0, 2**32 - 1))
    def test_bit_exact_round_trip(self, seed):
        m = random_model(np.random.default_rng(seed), 5)
        m2 = MultiGaussianModel.from_dict(json.loads(json.dumps(m.to_dict())))
        assert m2 == m
        for a, b in zip(m.peaks, m2.peaks):
            assert (a.amplitude, a.mean_ps, a.sigma_ps) == (b.amplitude, b.mean_ps, b.sigma_ps)

    def test_wrong_format(self):
        with pytest.raises(DomainError):
            MultiGaussianModel.from_dict({"format": "other", "peaks": []})

    def test_orientation_mismatch(self):
        doc = build_model(1.5, 47, 14).to_dict()
        doc["orientation"] = 1
        with pytest.raises(DomainError):
            MultiGaussianModel.from_dict(doc)
