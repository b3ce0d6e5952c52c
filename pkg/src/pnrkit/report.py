"""Regenerate the figure set (jitter, recovery, latency histograms, quality sweeps).

Every figure is written as a CSV table plus an SVG. Given the same
configuration the tables are byte-identical between runs; the manifest
carries a wall-clock timestamp unless ``timestamps=False``.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import math
from pathlib import Path

import numpy as np

from . import plotting
from .config import RunConfig
from .core import (
    DetectorParams,
    MeasurementContext,
    RecoveryCalibration,
    fit_sqrt_coefficient,
    fwhm_to_sigma,
    poisson_statistics,
    sigma_to_fwhm,
)
from .fitting import FitConfig, fit_multigauss
from .io import sweep_table, tradeoff_table, write_table
from .multigauss import build_model, build_model_from_gaps, photon_statistics, pnr_quality
from .simulate import auto_latency_histogram, extract_recovery_time, simulate_iat, simulate_latencies
from .sweep import UnreachableError, min_lk_for_quality, quality_vs_lk, sweep_delta_t, sweep_jitter, tradeoff_report

log = logging.getLogger(__name__)

# per-figure seed offsets so figures never share random streams
_SEED_FIG2B, _SEED_FIG2D, _SEED_FIG3, _SEED_FIG4D = 0, 100, 200, 300


def _fit_config(cfg: RunConfig, n_max: int, mode: str | None = None) -> FitConfig:
    f = cfg.fit
    return FitConfig(mode=mode or f.mode, n_max=n_max, max_iterations=f.max_iterations,
                     convergence_tol=f.convergence_tol, smoothing_window_bins=f.smoothing_window_bins)


def _hist_rows(hist, model):
    w = hist.bin_width_ps
    fit = w * np.sum([p.density(hist.centers) for p in model.peaks], axis=0)
    return [(float(c), int(k), float(f)) for c, k, f in zip(hist.centers, hist.counts, fit)]


def fig2b(cfg: RunConfig, out: Path) -> list[Path]:
    """Single-photon latency histogram and its Gaussian jitter fit."""
    m = cfg.model
    sigma = fwhm_to_sigma(m.jitter_fwhm_ps)
    mu_low = 0.05
    truth = build_model(mu_low, m.delta_t12_ps, sigma, 1)
    s = simulate_latencies(truth, mu_low, cfg.simulate.pulses, cfg.simulate.seed + _SEED_FIG2B)
    hist = auto_latency_histogram(s.latency_ps, cfg.simulate.bin_width_ps)
    res = fit_multigauss(hist, config=_fit_config(cfg, 1, "free"))
    write_table(out / "fig2b_histogram.csv", ["latency_ps", "counts", "fit"], _hist_rows(hist, res.model))
    write_table(out / "fig2b_jitter.csv", ["quantity", "value"], [
        ("true_fwhm_ps", m.jitter_fwhm_ps),
        ("fitted_fwhm_ps", sigma_to_fwhm(float(res.model.sigmas[0]))),
        ("fitted_sigma_ps", float(res.model.sigmas[0])),
        ("events", s.events),
    ])
    svg = plotting.histogram_with_model(out / "fig2b.svg", hist, res.model, "single-photon jitter",
                                        components=False)
    return [out / "fig2b_histogram.csv", out / "fig2b_jitter.csv", svg]


def fig2d(cfg: RunConfig, out: Path) -> list[Path]:
    """Recovery time from simulated IAT histograms, next to the linear calibration."""
    i = cfg.iat
    cal = RecoveryCalibration(tuple(tuple(p) for p in cfg.tradeoff.recovery_points))
    rows = []
    for k, lk in enumerate(i.lk_values_nH):
        hist = simulate_iat(DetectorParams(lk), i.cw_rate_hz, i.events / i.cw_rate_hz,
                            cfg.simulate.seed + _SEED_FIG2D + k, exponent=i.exponent,
                            bin_width_ps=i.bin_width_ps)
        rr = extract_recovery_time(hist, i.cw_rate_hz)
        rows.append((lk, rr.tau_rec_ns, rr.max_rate_hz, cal.tau_rec_ns(lk),
                     1e9 / cal.tau_rec_ns(lk)))
    write_table(out / "fig2d_recovery.csv",
                ["kinetic_inductance_nH", "tau_rec_sim_ns", "max_rate_sim_hz",
                 "tau_rec_calibration_ns", "max_rate_calibration_hz"], rows)
    lks = [r[0] for r in rows]
    grid = np.linspace(min(lks + [p[0] for p in cal.points]), max(lks + [p[0] for p in cal.points]), 50)
    svg = plotting.xy(out / "fig2d.svg", {
        "simulated IAT": (lks, [r[1] for r in rows]),
        "calibration": (grid, [cal.tau_rec_ns(x) for x in grid]),
        "anchors": ([p[0] for p in cal.points], [p[1] for p in cal.points]),
    }, "kinetic inductance (nH)", "recovery time (ns)", "recovery time vs L_k",
        styles={"calibration": "-", "anchors": "kx"})
    return [out / "fig2d_recovery.csv", svg]


def fig3(cfg: RunConfig, out: Path) -> list[Path]:
    """Latency histograms with their fits at several mean photon numbers, plus the quality matrix."""
    r = cfg.report
    truth = build_model_from_gaps(r.fig3g_mu_eff, r.fig3g_gaps_ps, r.fig3g_sigma1_ps)
    n_max = truth.n_max
    files = []
    stats_rows, param_rows = [], []
    for k, mu in enumerate(r.histogram_mu_values):
        tag = "abc"[k] if k < 3 else f"x{k}"
        s = simulate_latencies(truth, mu, r.histogram_pulses, cfg.simulate.seed + _SEED_FIG3 + k)
        hist = auto_latency_histogram(s.latency_ps, cfg.simulate.bin_width_ps)
        # free mode: these gaps do not follow the constrained 1/sqrt(n) law exactly
        res = fit_multigauss(hist, config=_fit_config(cfg, n_max, "free"))
        name = f"fig3{tag}_histogram.csv"
        write_table(out / name, ["latency_ps", "counts", "fit"], _hist_rows(hist, res.model))
        files += [out / name, plotting.histogram_with_model(out / f"fig3{tag}.svg", hist, res.model,
                                                            f"mu = {mu}")]
        ctx = MeasurementContext.from_counts(r.histogram_pulses, s.events,
                                             cfg.simulate.repetition_rate_hz)
        est = photon_statistics(res.model, ctx)
        ref = poisson_statistics(mu, n_max)
        for n in range(n_max + 1):
            stats_rows.append((mu, n, est.lumped()[n], ref.lumped()[n]))
        for p in res.model.peaks:
            param_rows.append((mu, p.n, p.mean_ps, p.sigma_ps, p.area))
    write_table(out / "fig3def_statistics.csv", ["mu_eff", "n", "reconstructed", "poisson"], stats_rows)
    write_table(out / "fig3g_fit_parameters.csv", ["mu_eff", "n", "mean_ps", "sigma_ps", "area"],
                param_rows)
    mus = list(r.histogram_mu_values)
    ns = [str(n) for n in range(n_max + 1)]
    series = {}
    for mu in mus:
        series[f"mu={mu} fit"] = [row[2] for row in stats_rows if row[0] == mu]
        series[f"mu={mu} Poisson"] = [row[3] for row in stats_rows if row[0] == mu]
    files += [out / "fig3def_statistics.csv", out / "fig3g_fit_parameters.csv",
              plotting.bars(out / "fig3def.svg", ns, series, "probability", "photon statistics")]

    rep = pnr_quality(truth)
    write_table(out / "fig3g_model.csv", ["n", "mean_ps", "sigma_ps", "area"],
                [(p.n, p.mean_ps, p.sigma_ps, p.area) for p in truth.peaks])
    write_table(out / "fig3h_quality.csv", ["m"] + [f"P_n{n}" for n in range(1, n_max + 1)],
                [(m + 1, *rep.p_matrix[m]) for m in range(n_max)])
    files += [out / "fig3g_model.csv", out / "fig3h_quality.csv",
              plotting.bars(out / "fig3h.svg", [str(n) for n in range(1, n_max + 1)],
                            {"diagonal quality": rep.quality}, "PNR quality", "quality per n")]
    return files


def fig4(cfg: RunConfig, out: Path) -> list[Path]:
    """Separation versus L_k, quality sweeps, minimum L_k and the trade-off table."""
    m, w = cfg.model, cfg.sweep
    sigma1 = fwhm_to_sigma(m.jitter_fwhm_ps)
    a = fit_sqrt_coefficient([tuple(p) for p in w.sqrt_law_points])
    files = []

    # 4d: simulated device histograms and the fitted separation
    rows = []
    for k, lk in enumerate(w.sqrt_law_points):
        lk_nH = lk[0]
        truth = build_model(m.mu_eff, a * math.sqrt(lk_nH), sigma1, m.n_max, m.width_law)
        s = simulate_latencies(truth, m.mu_eff, cfg.simulate.pulses, cfg.simulate.seed + _SEED_FIG4D + k)
        hist = auto_latency_histogram(s.latency_ps, cfg.simulate.bin_width_ps)
        res = fit_multigauss(hist, config=_fit_config(cfg, m.n_max))
        rows.append((lk_nH, lk[1], a * math.sqrt(lk_nH), res.model.delta_t12_ps, res.converged))
        files.append(plotting.histogram_with_model(out / f"fig4d_{int(lk_nH)}nH.svg", hist, res.model,
                                                   f"L_k = {lk_nH:g} nH"))
    write_table(out / "fig4d_separation.csv",
                ["kinetic_inductance_nH", "delta_t12_anchor_ps", "delta_t12_law_ps",
                 "delta_t12_fit_ps", "converged"], rows)
    files.append(out / "fig4d_separation.csv")

    dts = sweep_delta_t(sigma1, m.mu_eff, w.dt_values_ps, m.n_max, m.width_law)
    (out / "fig4e_dt_sweep.csv").write_text(sweep_table(dts))
    files += [out / "fig4e_dt_sweep.csv",
              plotting.sweep_curves(out / "fig4e.svg", dts, title="quality vs separation",
                                    xlabel="delta_t12 (ps)")]

    lks = quality_vs_lk(a, sigma1, m.mu_eff, w.lk_values_nH, m.n_max, m.width_law)
    (out / "fig4f_lk_sweep.csv").write_text(sweep_table(lks))
    mins = []
    for n in range(1, min(3, m.n_max) + 1):
        try:
            lk_min = min_lk_for_quality(w.target_quality, n, a, sigma1, m.mu_eff, m.n_max,
                                        width_law=m.width_law)
        except UnreachableError:
            lk_min = float("nan")
        mins.append((n, w.target_quality, lk_min))
    write_table(out / "fig4f_min_lk.csv", ["n", "target_quality", "min_kinetic_inductance_nH"], mins)
    files += [out / "fig4f_lk_sweep.csv", out / "fig4f_min_lk.csv",
              plotting.sweep_curves(out / "fig4f.svg", lks, logx=True, title="quality vs L_k",
                                    xlabel="kinetic inductance (nH)", target=w.target_quality)]

    jit = sweep_jitter(m.delta_t12_ps, m.mu_eff, w.jitter_values_ps, m.n_max, m.width_law)
    (out / "fig4g_jitter_sweep.csv").write_text(sweep_table(jit))
    files += [out / "fig4g_jitter_sweep.csv",
              plotting.sweep_curves(out / "fig4g.svg", jit, title="quality vs jitter",
                                    xlabel="jitter FWHM (ps)")]

    cal = RecoveryCalibration(tuple(tuple(p) for p in cfg.tradeoff.recovery_points))
    rows = tradeoff_report(cfg.device_params(), a, m.mu_eff, m.n_max, cal, m.width_law)
    (out / "tradeoff.csv").write_text(tradeoff_table(rows))
    lk_axis = [r.kinetic_inductance_nH for r in rows]
    files += [out / "tradeoff.csv", plotting.xy(
        out / "tradeoff.svg",
        {f"Q_{n}": (lk_axis, [r.quality_per_n[n - 1] for r in rows]) for n in range(1, min(3, m.n_max) + 1)},
        "kinetic inductance (nH)", "PNR quality", "quality vs count rate",
        twin={"max rate": (lk_axis, [r.max_rate_hz / 1e6 for r in rows], "max count rate (Mcps)")})]
    return files


FIGURES = {"fig2b": fig2b, "fig2d": fig2d, "fig3": fig3, "fig4": fig4}


def run_report(cfg: RunConfig, out_dir, timestamps: bool = True, only: list[str] | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, fn in FIGURES.items():
        if only and name not in only:
            continue
        log.info("report: %s", name)
        written += [Path(p).name for p in fn(cfg, out)]
    manifest = {"format": "pnrkit-report", "version": 1, "seed": cfg.simulate.seed,
                "files": sorted(written)}
    if timestamps:
        manifest["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
