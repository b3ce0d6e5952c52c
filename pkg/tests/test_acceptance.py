"""Acceptance criteria 1-8.

Each test prints one ``CRITERION k: PASS|FAIL ...`` line straight to the
terminal (outside pytest capture) so the summary is visible in a plain
``pytest -v`` log. Tolerances are fixed here and never loosened; a criterion
that the model cannot meet stays red and is explained in the decisions ledger.
"""

import math
import time

import numpy as np
import pytest

from pnrkit.config import RunConfig
from pnrkit.core import (
    DetectorParams,
    MeasurementContext,
    fit_sqrt_coefficient,
    fwhm_to_sigma,
    max_count_rate,
    poisson_statistics,
)
from pnrkit.fitting import FitConfig, fit_multigauss
from pnrkit.multigauss import build_model, build_model_from_gaps, photon_statistics, pnr_quality
from pnrkit.report import run_report
from pnrkit.simulate import (
    DeadTimeRecovery,
    auto_latency_histogram,
    extract_recovery_time,
    simulate_iat,
    simulate_latencies,
)
from pnrkit.sweep import min_lk_for_quality, quality_vs_lk, sweep_delta_t, sweep_jitter

from .test_multigauss import brute_force_matrix, random_model

SIGMA_33 = fwhm_to_sigma(33.0)


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def test_criterion_1_oracle_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(100):
        model = random_model(rng, 4)
        worst = max(worst, float(np.max(np.abs(pnr_quality(model).p_matrix - brute_force_matrix(model)))))
    dt = time.perf_counter() - t0
    report(1, worst <= 1e-6 and dt < 30, f"max |closed form - brute force| = {worst:.2e} (<= 1e-6), {dt:.1f} s (< 30 s)")


def test_criterion_2_fig3h(report):
    t0 = time.perf_counter()
    model = build_model_from_gaps(2.66, [49.0, 23.0, 15.0], 16.3)
    q = pnr_quality(model).quality
    dt = time.perf_counter() - t0
    ok = abs(q[0] - 0.96) <= 0.05 and abs(q[3] - 0.49) <= 0.07 and dt < 1
    report(2, ok, f"Q_1 = {q[0]:.3f} (0.96 +- 0.05), Q_4 = {q[3]:.3f} (0.49 +- 0.07), {dt:.2f} s")


def test_criterion_3_sweeps(report):
    t0 = time.perf_counter()
    dts = np.linspace(1, 150, 300)
    r = sweep_delta_t(SIGMA_33, 1.5, dts)
    monotone = bool(np.all(np.diff(r.quality_per_n, axis=1) >= -1e-12))
    sigmoidal = True
    for n in (1, 2, 3):
        slope = np.diff(r.q(n))
        peak = int(np.argmax(slope))
        # rises slowly, steepest in the interior, then saturates
        sigmoidal &= 0 < peak < len(slope) - 1 and slope[-1] < slope[peak] and r.q(n)[-1] > 0.99
    q10 = sweep_jitter(47.0, 1.5, [10.0]).quality_per_n[:3, 0]
    dt = time.perf_counter() - t0
    ok = monotone and sigmoidal and bool(np.all(q10 > 0.99)) and dt < 5
    report(3, ok, f"monotone={monotone} sigmoidal={sigmoidal} Q_1..3 at 10 ps = "
                  f"{np.round(q10, 4).tolist()} (> 0.99), {dt:.2f} s")


def test_criterion_4_tradeoff_deltas(report):
    t0 = time.perf_counter()
    a = fit_sqrt_coefficient([(165.0, 21.0), (872.0, 47.0)])
    r = quality_vs_lk(a, SIGMA_33, 1.5, [165.0, 872.0])
    dq = r.quality_per_n[:3, 1] - r.quality_per_n[:3, 0]
    want = np.array([0.12, 0.31, 0.23])
    dt = time.perf_counter() - t0
    ok = bool(np.all(np.abs(dq - want) <= 0.10)) and dt < 5
    report(4, ok, f"dQ = {np.round(dq, 3).tolist()} vs {want.tolist()} (+- 0.10), {dt:.2f} s")


def test_criterion_5_min_lk(report):
    t0 = time.perf_counter()
    a = 47.0 / math.sqrt(872.0)
    lks = [min_lk_for_quality(0.99, n, a, SIGMA_33, 1.5) for n in (1, 2, 3)]
    ref = [1200.0, 3500.0, 7000.0]
    ordered = lks[0] < lks[1] < lks[2]
    in_band = [r / 2 <= v <= 2 * r for v, r in zip(lks, ref)]
    dt = time.perf_counter() - t0
    ok = ordered and all(in_band) and dt < 5
    report(5, ok, f"L_min = {lks} nH vs {ref} (factor 2), ordered={ordered} in_band={in_band}, {dt:.2f} s")


def test_criterion_6_round_trip(report):
    t0 = time.perf_counter()
    pulses, mu = 1_000_000, 1.5
    s = simulate_latencies(build_model(mu, 47.0, 14.0), mu, pulses, seed=2024)
    res = fit_multigauss(auto_latency_histogram(s.latency_ps), config=FitConfig(mode="constrained"))
    ctx = MeasurementContext.from_counts(pulses, s.events, 1e6)
    est = photon_statistics(res.model, ctx)
    tv = est.total_variation(poisson_statistics(mu, res.model.n_max))
    dt = time.perf_counter() - t0
    d_dt = res.model.delta_t12_ps - 47.0
    d_s = float(res.model.sigmas[0]) - 14.0
    ok = abs(d_dt) <= 2 and abs(d_s) <= 1 and tv < 0.02 and dt < 60
    report(6, ok, f"delta_t error {d_dt:+.2f} ps (+-2), sigma_1 error {d_s:+.2f} ps (+-1), "
                  f"TV = {tv:.4f} (< 0.02), {dt:.1f} s")


def test_criterion_7_iat(report):
    t0 = time.perf_counter()
    h = simulate_iat(DetectorParams(165), 1e7, 1.0, seed=3, recovery=DeadTimeRecovery(20_000.0))
    dead = extract_recovery_time(h, 1e7).tau_rec_ns
    dead_ok = abs(dead - 20.0) <= h.bin_width_ps / 1000
    tau = {}
    for lk in (165.0, 872.0):
        tau[lk] = extract_recovery_time(simulate_iat(DetectorParams(lk), 1e7, 0.5, seed=6), 1e7).tau_rec_ns
    ratio = tau[872.0] / tau[165.0]
    ratio_ok = abs(ratio / (872 / 165) - 1) <= 0.20
    rate = max_count_rate(5.99)
    rate_ok = abs(rate - 166.9e6) / 166.9e6 <= 1e-3 and abs(rate - 165e6) / 165e6 <= 0.02
    dt = time.perf_counter() - t0
    ok = dead_ok and ratio_ok and rate_ok and dt < 60
    report(7, ok, f"dead time {dead:.2f} ns (20 +- {h.bin_width_ps / 1000} ns), tau ratio {ratio:.2f} "
                  f"(5.28 +- 20%), R_max(5.99 ns) = {rate / 1e6:.1f} Mcps (165 +- 2%), {dt:.1f} s")


def test_criterion_8_report_determinism(report, tmp_path):
    outs = []
    for k in range(2):
        cfg = RunConfig()
        cfg.simulate.seed = 7
        run_report(cfg, tmp_path / f"run{k}", timestamps=False)
        outs.append(tmp_path / f"run{k}")
    names = sorted(p.name for p in outs[0].iterdir())
    same = names == sorted(p.name for p in outs[1].iterdir()) and all(
        (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names)
    report(8, same, f"{len(names)} files byte-identical across two seeded runs: {same}")
