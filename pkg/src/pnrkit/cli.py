"""Command-line entry point: ``pnrkit <subcommand> ...``.

Failures print one JSON line ``{"error": ..., "message": ..., "details": [...]}``
to stderr and exit nonzero (2 for bad input or configuration, 1 otherwise).
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import secrets
import sys
import warnings
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .core import (
    DetectorParams,
    DomainError,
    InsufficientDataError,
    MeasurementContext,
    RecoveryCalibration,
    fit_sqrt_coefficient,
    fwhm_to_sigma,
    poisson_statistics,
)
from .fitting import DegenerateFitError, FitConfig, fit_multigauss
from .io import (
    InputError,
    dumps,
    latencies_from_timetags,
    load_model,
    read_samples,
    read_timetags,
    sweep_table,
    synthesize_timetags,
    tradeoff_table,
    write_samples,
    write_timetags,
)
from .multigauss import MultiGaussianModel, build_model, photon_statistics, pnr_quality
from .simulate import (
    DeadTimeRecovery,
    Histogram,
    auto_latency_histogram,
    extract_recovery_time,
    simulate_iat,
    simulate_latencies,
)
from .sweep import UnreachableError, min_lk_for_quality, quality_vs_lk, sweep_delta_t, sweep_jitter, tradeoff_report

OUTPUT_DIR_ENV = "PNRKIT_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "pnrkit-output"

log = logging.getLogger("pnrkit")


# ------------------------------------------------------------------ helpers

def _open_in(path: str | None):
    if path in (None, "-"):
        return sys.stdin
    return open(path, "r")


def _emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        log.warning("no --seed given; using seed %d", args.seed)
    else:
        log.info("seed %d", args.seed)
    return args.seed


def _sigma1(args, cfg: RunConfig) -> float:
    if getattr(args, "sigma1", None) is not None:
        return args.sigma1
    fwhm = args.jitter_fwhm if getattr(args, "jitter_fwhm", None) is not None else cfg.model.jitter_fwhm_ps
    return fwhm_to_sigma(fwhm)


def _pick(value, default):
    return default if value is None else value


def _read_latency_input(args, cfg: RunConfig) -> tuple[Histogram, dict]:
    """Latency data in any supported input format, detected from the content."""
    with _open_in(args.input) as fh:
        text = fh.read()
    head = text.lstrip()[:64]
    info = {}
    if head.startswith("{"):
        doc = json.loads(text)
        if doc.get("format") != "pnrkit-histogram":
            raise InputError(f"expected a histogram document, got format={doc.get('format')!r}")
        hist = Histogram.from_dict(doc)
        info.update(doc.get("context", {}))
        return hist, info
    width = _pick(args.bin_width, cfg.simulate.bin_width_ps)
    if head.startswith("#pnrkit-timetags"):
        tags = read_timetags(io.StringIO(text))
        lat, dropped = latencies_from_timetags(tags, args.trigger_channel, args.detector_channel)
        if len(lat) == 0:
            raise InsufficientDataError("no detector events after the first trigger")
        trig = int((tags.channel == args.trigger_channel).sum())
        info.update(pulses=trig, events=int(len(lat)), dropped=dropped)
        return auto_latency_histogram(lat.astype(float), width), info
    samples = read_samples(io.StringIO(text))
    if samples.events == 0:
        raise InsufficientDataError("no events in the sample file")
    info.update(pulses=samples.pulses, events=samples.events)
    return auto_latency_histogram(samples.latency_ps, width), info


# ------------------------------------------------------------- subcommands

def cmd_simulate(args, cfg: RunConfig) -> int:
    m = cfg.model
    mu = _pick(args.mu, m.mu_eff)
    n_max = _pick(args.n_max, m.n_max)
    model = build_model(mu, _pick(args.dt, m.delta_t12_ps), _sigma1(args, cfg), n_max,
                        _pick(args.width_law, m.width_law))
    seed = _seed(args)
    pulses = _pick(args.pulses, cfg.simulate.pulses)
    s = simulate_latencies(model, mu, pulses, seed, _pick(args.workers, cfg.simulate.workers))
    log.info("simulated %d events from %d pulses", s.events, pulses)
    if args.format == "histogram":
        hist = auto_latency_histogram(s.latency_ps, _pick(args.bin_width, cfg.simulate.bin_width_ps))
        doc = hist.to_dict()
        doc["context"] = {"pulses": pulses, "events": s.events, "seed": seed}
        _emit(dumps(doc), args.out)
    elif args.format == "timetags":
        rr = _pick(args.rep_rate, cfg.simulate.repetition_rate_hz)
        buf = io.StringIO()
        write_timetags(buf, synthesize_timetags(s, rr, trigger_channel=args.trigger_channel,
                                                detector_channel=args.detector_channel))
        _emit(buf.getvalue(), args.out)
    else:
        buf = io.StringIO()
        write_samples(buf, s, blind=args.blind)
        _emit(buf.getvalue(), args.out)
    if args.model_out:
        Path(args.model_out).write_text(dumps(model.to_dict()))
    return 0


def cmd_fit(args, cfg: RunConfig) -> int:
    hist, info = _read_latency_input(args, cfg)
    mode = args.mode or cfg.fit.mode
    f = cfg.fit
    fc = FitConfig(mode=mode, n_max=_pick(args.n_max, cfg.model.n_max), max_iterations=f.max_iterations,
                   convergence_tol=f.convergence_tol, smoothing_window_bins=f.smoothing_window_bins)
    res = fit_multigauss(hist, config=fc)
    doc = res.to_dict()
    doc["delta_t12_ps"] = res.model.delta_t12_ps
    doc["sigma1_ps"] = float(res.model.sigmas[0])
    if "pulses" in info and "events" in info and info["events"] < info["pulses"]:
        ctx = MeasurementContext.from_counts(info["pulses"], info["events"],
                                             cfg.simulate.repetition_rate_hz)
        est = photon_statistics(res.model, ctx)
        ref = poisson_statistics(est.mu_eff, res.model.n_max)
        doc["photon_statistics"] = {"mu_eff": est.mu_eff, "probs": list(est.probs),
                                    "total_variation_vs_poisson": est.total_variation(ref)}
    if not res.converged:
        log.warning("fit did not converge in %d iterations", res.iterations)
    _emit(dumps(doc), args.out)
    return 0


def _model_from_args(args, cfg: RunConfig) -> MultiGaussianModel:
    if args.model:
        return load_model(args.model)
    m = cfg.model
    return build_model(_pick(args.mu, m.mu_eff), _pick(args.dt, m.delta_t12_ps), _sigma1(args, cfg),
                       _pick(args.n_max, m.n_max), _pick(args.width_law, m.width_law))


def cmd_quality(args, cfg: RunConfig) -> int:
    rep = pnr_quality(_model_from_args(args, cfg))
    _emit(dumps({"diagonal": [float(q) for q in rep.quality], **rep.to_dict()}), args.out)
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    model = _model_from_args(args, cfg)
    ctx = MeasurementContext.from_counts(args.pulses, args.events, cfg.simulate.repetition_rate_hz)
    est = photon_statistics(model, ctx)
    ref = poisson_statistics(est.mu_eff, model.n_max)
    _emit(dumps({"mu_eff": est.mu_eff, "probs": list(est.probs),
                 "poisson": [float(p) for p in ref.lumped()],
                 "total_variation": est.total_variation(ref)}), args.out)
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    m, w = cfg.model, cfg.sweep
    mu = _pick(args.mu, m.mu_eff)
    n_max = _pick(args.n_max, m.n_max)
    law = _pick(args.width_law, m.width_law)
    values = args.values
    a = fit_sqrt_coefficient([tuple(p) for p in w.sqrt_law_points])
    if args.axis == "dt":
        res = sweep_delta_t(_sigma1(args, cfg), mu, values or w.dt_values_ps, n_max, law)
    elif args.axis == "jitter":
        res = sweep_jitter(_pick(args.dt, m.delta_t12_ps), mu, values or w.jitter_values_ps, n_max, law)
    else:
        res = quality_vs_lk(a, _sigma1(args, cfg), mu, values or w.lk_values_nH, n_max, law)
    text = sweep_table(res)
    if args.min_lk:
        target = _pick(args.target, w.target_quality)
        lines = []
        for n in range(1, min(3, n_max) + 1):
            try:
                lk = min_lk_for_quality(target, n, a, _sigma1(args, cfg), mu, n_max, width_law=law)
            except UnreachableError:
                lk = float("nan")
            lines.append(f"# min_lk n={n} Q>={target}: {lk!r} nH")
        text += "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


def cmd_iat(args, cfg: RunConfig) -> int:
    i = cfg.iat
    seed = _seed(args)
    rate = _pick(args.cw_rate, i.cw_rate_hz)
    events = _pick(args.events, i.events)
    width = _pick(args.bin_width, i.bin_width_ps)
    lk = _pick(args.lk, i.lk_values_nH[0])
    rec = DeadTimeRecovery(args.dead_time * 1000.0) if args.dead_time is not None else None
    hist = simulate_iat(DetectorParams(lk), rate, events / rate, seed, _pick(args.exponent, i.exponent),
                        recovery=rec, bin_width_ps=width)
    rr = extract_recovery_time(hist, rate)
    if args.histogram_out:
        Path(args.histogram_out).write_text(dumps(hist.to_dict()))
    _emit(dumps({"kinetic_inductance_nH": lk, "tau_rec_ns": rr.tau_rec_ns, "max_rate_hz": rr.max_rate_hz,
                 "envelope_rate_hz": rr.envelope_rate_hz, "events": hist.total_events, "seed": seed}),
          args.out)
    return 0


def cmd_tradeoff(args, cfg: RunConfig) -> int:
    m, t = cfg.model, cfg.tradeoff
    a = fit_sqrt_coefficient([tuple(p) for p in cfg.sweep.sqrt_law_points])
    cal = RecoveryCalibration(tuple(tuple(p) for p in t.recovery_points))
    rows = tradeoff_report(cfg.device_params(), a, _pick(args.mu, m.mu_eff), m.n_max, cal,
                           _pick(args.width_law, m.width_law))
    _emit(tradeoff_table(rows), args.out)
    return 0


def cmd_report(args, cfg: RunConfig) -> int:
    from .report import run_report

    if args.seed is not None:
        cfg.simulate.seed = args.seed
    log.info("seed %d", cfg.simulate.seed)
    out = args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR
    manifest = run_report(cfg, out, timestamps=not args.no_timestamps, only=args.only)
    sys.stdout.write(dumps({"output_dir": str(out), "files": manifest["files"]}))
    return 0


# ------------------------------------------------------------------- parser

def _model_flags(p, with_model_file=False):
    g = p.add_argument_group("model")
    if with_model_file:
        g.add_argument("--model", help="model or fit JSON (overrides the flags below)")
    g.add_argument("--mu", type=float, help="effective mean photon number")
    g.add_argument("--dt", type=float, help="delta_t12 in ps")
    g.add_argument("--sigma1", type=float, help="single-photon sigma in ps")
    g.add_argument("--jitter-fwhm", type=float, help="single-photon jitter FWHM in ps")
    g.add_argument("--n-max", type=int)
    g.add_argument("--width-law", choices=["inverse_sqrt", "constant"])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pnrkit", description="Photon-number-resolution analysis toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Monte Carlo latency events")
    _model_flags(s)
    s.add_argument("--pulses", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--format", choices=["histogram", "samples", "timetags"], default="histogram")
    s.add_argument("--blind", action="store_true", help="omit the true photon number from samples")
    s.add_argument("--bin-width", type=float)
    s.add_argument("--rep-rate", type=float, help="repetition rate for time tags (Hz)")
    s.add_argument("--trigger-channel", type=int, default=1)
    s.add_argument("--detector-channel", type=int, default=2)
    s.add_argument("--model-out", help="also write the generating model JSON here")
    s.add_argument("--out", "-o")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit a multi-Gaussian model to latency data")
    f.add_argument("input", nargs="?", default="-", help="latency data file (format autodetected)")
    mode = f.add_mutually_exclusive_group()
    mode.add_argument("--constrained", dest="mode", action="store_const", const="constrained")
    mode.add_argument("--free", dest="mode", action="store_const", const="free")
    f.add_argument("--n-max", type=int)
    f.add_argument("--bin-width", type=float)
    f.add_argument("--trigger-channel", type=int, default=1)
    f.add_argument("--detector-channel", type=int, default=2)
    f.add_argument("--out", "-o")
    f.set_defaults(func=cmd_fit, mode=None)

    q = sub.add_parser("quality", help="PNR quality matrix of a model")
    _model_flags(q, with_model_file=True)
    q.add_argument("--out", "-o")
    q.set_defaults(func=cmd_quality)

    st = sub.add_parser("stats", help="photon statistics from a model and click counts")
    _model_flags(st, with_model_file=True)
    st.add_argument("--pulses", type=int, required=True)
    st.add_argument("--events", type=int, required=True)
    st.add_argument("--out", "-o")
    st.set_defaults(func=cmd_stats)

    w = sub.add_parser("sweep", help="quality sweeps")
    _model_flags(w)
    w.add_argument("--axis", choices=["dt", "jitter", "lk"], required=True)
    w.add_argument("--values", type=float, nargs="+", help="axis values (defaults from config)")
    w.add_argument("--min-lk", action="store_true", help="append minimum-L_k extrapolation")
    w.add_argument("--target", type=float)
    w.add_argument("--out", "-o")
    w.set_defaults(func=cmd_sweep)

    i = sub.add_parser("iat", help="simulate an IAT histogram and extract the recovery time")
    i.add_argument("--lk", type=float, help="kinetic inductance (nH)")
    i.add_argument("--dead-time", type=float, help="use a hard dead time (ns) instead")
    i.add_argument("--cw-rate", type=float)
    i.add_argument("--events", type=int)
    i.add_argument("--exponent", type=float)
    i.add_argument("--bin-width", type=float)
    i.add_argument("--seed", type=int)
    i.add_argument("--histogram-out")
    i.add_argument("--out", "-o")
    i.set_defaults(func=cmd_iat)

    t = sub.add_parser("tradeoff", help="quality versus maximum count rate per device")
    t.add_argument("--mu", type=float)
    t.add_argument("--width-law", choices=["inverse_sqrt", "constant"])
    t.add_argument("--out", "-o")
    t.set_defaults(func=cmd_tradeoff)

    r = sub.add_parser("report", help="regenerate every figure table and SVG")
    r.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or ./{DEFAULT_OUTPUT_DIR})")
    r.add_argument("--seed", type=int)
    r.add_argument("--no-timestamps", action="store_true", help="omit wall-clock metadata")
    r.add_argument("--only", nargs="+", choices=["fig2b", "fig2d", "fig3", "fig4"])
    r.set_defaults(func=cmd_report)
    return p


def _error_line(exc: BaseException, details=None) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "details": details or []})


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="pnrkit: %(levelname)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args, cfg)
    except ConfigError as exc:
        print(_error_line(exc, exc.errors), file=sys.stderr)
        return 2
    except (InputError, DomainError, InsufficientDataError, UnreachableError, FileNotFoundError,
            json.JSONDecodeError, ValueError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 2
    except DegenerateFitError as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
