"""Seeded Monte Carlo for latency events and inter-arrival times, plus rising-edge waveforms.

Random streams come from numpy's Philox4x64-10 counter-based generator keyed by
``SeedSequence(seed, spawn_key=(stream, shard))``. Work is split into fixed-size
shards, so output does not depend on how many workers run them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import isotonic_regression, minimize_scalar

from .core import (
    FWHM_PER_SIGMA,
    PS_PER_NS,
    DetectorParams,
    DomainError,
    InsufficientDataError,
    _require,
    max_count_rate,
)
from .multigauss import MultiGaussianModel

RNG_ALGORITHM = "numpy.random.Philox (Philox4x64-10) via SeedSequence"
SHARD_SIZE = 1 << 18
SEED_MASK = (1 << 64) - 1

STREAM_LATENCY = 0
STREAM_IAT = 1
STREAM_WAVEFORM = 2

DEFAULT_LATENCY_BIN_PS = 2.0
DEFAULT_IAT_BIN_PS = 500.0


def substream(seed: int, stream: int, shard: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=(stream, shard))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------- histograms

@dataclass(frozen=True)
class Histogram:
    """Half-open bins ``[start + k w, start + (k+1) w)``; out-of-range events are tallied."""

    start_ps: float
    bin_width_ps: float
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    def __post_init__(self):
        _require(self.bin_width_ps > 0, "bin_width_ps must be > 0")
        c = np.asarray(self.counts)
        _require(c.ndim == 1 and len(c) > 0, "counts must be a non-empty 1-D array")
        _require(bool(np.all(c >= 0)), "counts must be >= 0")
        object.__setattr__(self, "counts", c)

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    @property
    def total_events(self) -> int:
        return int(self.counts.sum())

    @property
    def edges(self) -> np.ndarray:
        return self.start_ps + self.bin_width_ps * np.arange(self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.start_ps + self.bin_width_ps * (np.arange(self.n_bins) + 0.5)

    def shifted_bins(self, k: int) -> "Histogram":
        """Same counts with the start moved by ``k`` bin widths."""
        return type(self)(self.start_ps + k * self.bin_width_ps, self.bin_width_ps,
                          self.counts.copy(), self.underflow, self.overflow)

    def to_dict(self) -> dict:
        counts = self.counts
        as_int = np.issubdtype(counts.dtype, np.integer)
        return {
            "format": "pnrkit-histogram",
            "kind": self.kind,
            "start_ps": float(self.start_ps),
            "bin_width_ps": float(self.bin_width_ps),
            "counts": [int(x) for x in counts] if as_int else [float(x) for x in counts],
            "underflow": int(self.underflow),
            "overflow": int(self.overflow),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Histogram":
        if doc.get("format", "pnrkit-histogram") != "pnrkit-histogram":
            raise DomainError(f"not a histogram document: format={doc.get('format')!r}")
        kind = doc.get("kind", "latency")
        target = {"latency": LatencyHistogram, "iat": IatHistogram}.get(kind)
        if target is None:
            raise DomainError(f"unknown histogram kind {kind!r}")
        raw = doc["counts"]
        counts = np.array(raw, dtype=np.int64 if all(isinstance(x, int) for x in raw) else float)
        return target(float(doc["start_ps"]), float(doc["bin_width_ps"]), counts,
                      int(doc.get("underflow", 0)), int(doc.get("overflow", 0)))

    kind = "generic"


class LatencyHistogram(Histogram):
    kind = "latency"


class IatHistogram(Histogram):
    kind = "iat"


def bin_events(samples, start_ps: float, bin_width_ps: float, n_bins: int,
               kind: type[Histogram] = LatencyHistogram) -> Histogram:
    _require(n_bins >= 1, "n_bins must be >= 1")
    _require(bin_width_ps > 0, "bin_width_ps must be > 0")
    x = np.asarray(samples, dtype=float).ravel()
    edges = start_ps + bin_width_ps * np.arange(n_bins + 1)
    idx = np.searchsorted(edges, x, side="right") - 1
    under = int(np.count_nonzero(idx < 0))
    over = int(np.count_nonzero(idx >= n_bins))
    inside = idx[(idx >= 0) & (idx < n_bins)]
    counts = np.bincount(inside, minlength=n_bins).astype(np.int64)
    return kind(float(start_ps), float(bin_width_ps), counts, under, over)


def auto_latency_histogram(samples, bin_width_ps: float = DEFAULT_LATENCY_BIN_PS,
                           pad_ps: float = 50.0) -> LatencyHistogram:
    """Histogram whose grid (aligned to multiples of the bin width) covers every sample."""
    x = np.asarray(samples, dtype=float)
    _require(x.size > 0, "no samples to bin")
    lo = math.floor((x.min() - pad_ps) / bin_width_ps) * bin_width_ps
    hi = math.ceil((x.max() + pad_ps) / bin_width_ps) * bin_width_ps
    n = max(1, int(round((hi - lo) / bin_width_ps)))
    return bin_events(x, lo, bin_width_ps, n)


# ------------------------------------------------------------------ latencies

@dataclass(frozen=True)
class LatencySamples:
    """One row per detection event, in pulse order."""

    pulse_index: np.ndarray
    n_true: np.ndarray
    latency_ps: np.ndarray
    pulses: int

    @property
    def events(self) -> int:
        return len(self.latency_ps)


def _latency_shard(model, mu_eff, seed, shard, size):
    rng = substream(seed, STREAM_LATENCY, shard)
    n = rng.poisson(mu_eff, size)
    hit = np.flatnonzero(n > 0)
    k = np.minimum(n[hit], model.n_max) - 1
    t = rng.normal(model.means[k], model.sigmas[k])
    return hit + shard * SHARD_SIZE, n[hit], t


def simulate_latencies(model: MultiGaussianModel, mu_eff: float, pulses: int, seed: int,
                       workers: int = 1) -> LatencySamples:
    """Draw n ~ Poisson(mu) per pulse; each n >= 1 (clipped to N_max) emits one latency.

    Only peak means and widths are used; relative peak areas follow from the
    Poisson draw itself.
    """
    _require(pulses >= 1, "pulses must be >= 1")
    _require(mu_eff >= 0, "mu_eff must be >= 0")
    n_shards = -(-pulses // SHARD_SIZE)
    sizes = [min(SHARD_SIZE, pulses - i * SHARD_SIZE) for i in range(n_shards)]
    job = lambda i: _latency_shard(model, mu_eff, seed, i, sizes[i])
    if workers > 1 and n_shards > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, range(n_shards)))
    else:
        parts = [job(i) for i in range(n_shards)]
    return LatencySamples(
        np.concatenate([p[0] for p in parts]).astype(np.int64),
        np.concatenate([p[1] for p in parts]).astype(np.int64),
        np.concatenate([p[2] for p in parts]),
        pulses,
    )


# ------------------------------------------------------------------- waveform

@dataclass(frozen=True)
class WaveformResult:
    rise_time_ps: float
    slew_rate_mV_per_ps: float
    latency_ps: float
    jitter_ps: float
    noisy_latency_ps: float | None = None


def rise_time_ps(params: DetectorParams, n: int) -> float:
    """Lumped-circuit time constant L_k / (n R_1 + Z_0)."""
    _require(n >= 1, "n must be >= 1")
    r_total = n * params.hotspot_resistance_ohm + params.load_impedance_ohm
    return params.kinetic_inductance_nH / r_total * PS_PER_NS


def _crossing(v_peak, tau, threshold):
    return -tau * np.log1p(-np.asarray(threshold) / v_peak)


def synthesize_waveform(params: DetectorParams, n: int, threshold_mV: float,
                        seed: int | None = None) -> WaveformResult:
    """Threshold crossing of V(t) = V_peak (1 - exp(-t / tau_rise(n))).

    With a seed, one crossing is also drawn with the threshold perturbed by
    amplitude noise of FWHM ``noise_fwhm_mV``.
    """
    v = params.peak_voltage_mV
    if not 0 < threshold_mV < v:
        raise DomainError(f"threshold {threshold_mV} mV never crossed (V_peak = {v} mV)")
    tau = rise_time_ps(params, n)
    t_cross = float(_crossing(v, tau, threshold_mV))
    slew = (v - threshold_mV) / tau
    noisy = None
    if seed is not None:
        noisy = float(noisy_crossings(params, n, threshold_mV, 1, seed)[0])
    return WaveformResult(tau, slew, t_cross, params.noise_fwhm_mV / slew, noisy)


def noisy_crossings(params: DetectorParams, n: int, threshold_mV: float, reps: int,
                    seed: int) -> np.ndarray:
    """Crossing times under Gaussian amplitude noise; NaN where no crossing exists."""
    _require(reps >= 1, "reps must be >= 1")
    rng = substream(seed, STREAM_WAVEFORM, n)
    sd = params.noise_fwhm_mV / FWHM_PER_SIGMA
    thr = threshold_mV + rng.normal(0.0, sd, reps) if sd > 0 else np.full(reps, threshold_mV)
    v = params.peak_voltage_mV
    out = np.full(reps, np.nan)
    ok = (thr > 0) & (thr < v)
    out[ok] = _crossing(v, rise_time_ps(params, n), thr[ok])
    return out


def empirical_sqrt_scaling(value_ref: float, lk_ref_nH: float, lk_nH):
    """Scale a rise time or jitter measured at ``lk_ref_nH`` as sqrt(L_k)."""
    return value_ref * np.sqrt(np.asarray(lk_nH, dtype=float) / lk_ref_nH)


# ------------------------------------------------------------------- recovery

class RecoveryModel:
    """Detection efficiency versus time since the last accepted event (ps)."""

    full_recovery_ps: float

    def efficiency(self, t_ps):
        raise NotImplementedError

    def sample_intervals(self, rng: np.random.Generator, rate_per_ps: float, size: int) -> np.ndarray:
        """Intervals of the renewal process with hazard ``rate * efficiency(t)``."""
        t_end = self.full_recovery_ps
        grid = np.linspace(0.0, t_end, 40001)
        eta = self.efficiency(grid)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (eta[1:] + eta[:-1]) * np.diff(grid))])
        cum *= rate_per_ps
        e = rng.exponential(1.0, size)
        inside = e <= cum[-1]
        out = np.empty(size)
        out[inside] = np.interp(e[inside], cum, grid)
        out[~inside] = t_end + (e[~inside] - cum[-1]) / rate_per_ps
        return out


@dataclass(frozen=True)
class ExponentialRecovery(RecoveryModel):
    """eta(t) = (1 - exp(-t / tau))^s, with arrivals below ``cutoff`` dropped."""

    tau_ps: float
    exponent: float = 2.0
    cutoff: float = 0.01

    def __post_init__(self):
        _require(self.tau_ps > 0, "tau_ps must be > 0")
        _require(self.exponent > 0, "exponent must be > 0")

    @classmethod
    def for_detector(cls, params: DetectorParams, exponent: float = 2.0, cutoff: float = 0.01):
        return cls(params.electrical_time_constant_ps, exponent, cutoff)

    @property
    def full_recovery_ps(self) -> float:
        # eta > 1 - 1e-12 beyond this point
        return self.tau_ps * math.log(self.exponent / 1e-12 + 1.0)

    def efficiency(self, t_ps):
        t = np.asarray(t_ps, dtype=float)
        eta = (-np.expm1(-np.maximum(t, 0.0) / self.tau_ps)) ** self.exponent
        return np.where(eta < self.cutoff, 0.0, eta)

    def recovery_time_ps(self, level: float = 0.99) -> float:
        """Exact time at which efficiency reaches ``level``."""
        return -self.tau_ps * math.log1p(-level ** (1.0 / self.exponent))


@dataclass(frozen=True)
class DeadTimeRecovery(RecoveryModel):
    """Step efficiency: blind for ``dead_time_ps``, fully efficient afterwards."""

    dead_time_ps: float

    @property
    def full_recovery_ps(self) -> float:
        return self.dead_time_ps

    def efficiency(self, t_ps):
        return (np.asarray(t_ps, dtype=float) >= self.dead_time_ps).astype(float)

    def sample_intervals(self, rng, rate_per_ps, size):
        return self.dead_time_ps + rng.exponential(1.0 / rate_per_ps, size)


def thinned_intervals(recovery: RecoveryModel, rate_per_ps: float, duration_ps: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Literal thinning of homogeneous Poisson arrivals; slow reference path."""
    out = []
    last = None
    t = 0.0
    chunk = 65536
    while True:
        gaps = rng.exponential(1.0 / rate_per_ps, chunk)
        u = rng.random(chunk)
        for g, ui in zip(gaps, u):
            t += g
            if t > duration_ps:
                return np.array(out)
            if last is None:
                last = t
                continue
            if ui < recovery.efficiency(t - last):
                out.append(t - last)
                last = t


def sample_iat(recovery: RecoveryModel, cw_rate_hz: float, duration_s: float, seed: int,
               method: str = "renewal") -> np.ndarray:
    """Inter-arrival times (ps) between accepted events under CW illumination."""
    _require(cw_rate_hz > 0, "cw_rate_hz must be > 0")
    _require(duration_s > 0, "duration_s must be > 0")
    rate = cw_rate_hz * 1e-12
    duration_ps = duration_s * 1e12
    if method == "thinning":
        return thinned_intervals(recovery, rate, duration_ps, substream(seed, STREAM_IAT, 1 << 20))
    _require(method == "renewal", f"unknown IAT method {method!r}")
    parts, elapsed, shard = [], 0.0, 0
    # mean interval is at least 1/rate; draw shards until the duration is covered
    while elapsed < duration_ps:
        iv = recovery.sample_intervals(substream(seed, STREAM_IAT, shard), rate, SHARD_SIZE)
        csum = np.cumsum(iv) + elapsed
        stop = np.searchsorted(csum, duration_ps, side="right")
        parts.append(iv[:stop])
        elapsed = csum[-1] if stop == len(iv) else duration_ps
        shard += 1
    return np.concatenate(parts)


def simulate_iat(params: DetectorParams, cw_rate_hz: float, duration_s: float, seed: int,
                 exponent: float = 2.0, recovery: RecoveryModel | None = None,
                 bin_width_ps: float = DEFAULT_IAT_BIN_PS, max_iat_ps: float | None = None,
                 method: str = "renewal") -> IatHistogram:
    """IAT histogram for a CW-illuminated detector.

    The default recovery model uses the electrical time constant L_k / Z_0.
    """
    rec = recovery if recovery is not None else ExponentialRecovery.for_detector(params, exponent)
    iv = sample_iat(rec, cw_rate_hz, duration_s, seed, method)
    if max_iat_ps is None:
        max_iat_ps = rec.full_recovery_ps + 8.0e12 / cw_rate_hz
    n_bins = max(1, int(math.ceil(max_iat_ps / bin_width_ps)))
    return bin_events(iv, 0.0, bin_width_ps, n_bins, kind=IatHistogram)


@dataclass(frozen=True)
class RecoveryResult:
    tau_rec_ns: float
    max_rate_hz: float
    envelope_rate_hz: float
    ratio: np.ndarray
    recovered: np.ndarray

    def __post_init__(self):
        _require(abs(self.max_rate_hz * self.tau_rec_ns * 1e-9 - 1.0) < 1e-9,
                 "max_rate_hz must equal 1 / tau_rec")


def _envelope_mle(t, n):
    """Poisson MLE of (c, r) for expected counts c * exp(-r t); c is profiled out."""
    total = n.sum()
    t0 = t - t[0]

    def nll(r):
        return r * np.dot(n, t0) + total * np.log(np.exp(-r * t0).sum())

    hi = 50.0 / max(np.ptp(t0), 1e-300)
    res = minimize_scalar(nll, bounds=(0.0, hi), method="bounded",
                          options={"xatol": 1e-12 * hi})
    r = float(res.x)
    c = total / np.exp(-r * t).sum()
    return c, r


def _recovery_edge(counts, t, last, tail_start, level, cw_rate_hz):
    sel = (t >= tail_start) & (t <= t[last])
    if np.count_nonzero(counts[sel] > 0) < 3:
        raise InsufficientDataError("too few populated tail bins for the envelope fit")
    c, r = _envelope_mle(t[sel], counts[sel])
    if not r > 0:
        if cw_rate_hz is None:
            raise InsufficientDataError("tail shows no exponential decay")
        r = cw_rate_hz * 1e-12
        c = counts[sel].sum() / np.exp(-r * t[sel]).sum()
    expected = c * np.exp(-r * t[: last + 1])
    ratio = counts[: last + 1] / expected
    # weighted monotone fit: once reached, the level is never left again
    recovered = isotonic_regression(ratio, weights=expected).x
    reached = np.flatnonzero(recovered >= level)
    if len(reached) == 0:
        raise InsufficientDataError("efficiency never reaches the recovery level")
    return int(reached[0]), r, ratio, recovered


def extract_recovery_time(iat: Histogram, cw_rate_hz: float | None = None,
                          tail_start_ps: float | None = None, level: float = 0.99,
                          refine: int = 5) -> RecoveryResult:
    """Recovery time from an IAT histogram.

    Counts are divided by an exponential envelope ``c exp(-r t)`` fitted by
    Poisson likelihood on the tail. The count/envelope ratio is smoothed by a
    weighted isotonic (non-decreasing) regression, and the recovery time is the
    left edge of the first bin where it reaches ``level``; being monotone it
    stays above from there on.

    The tail starts at ``tail_start_ps`` when given. Otherwise the first pass
    starts at twice the mode of the (lightly smoothed) histogram, or the last
    half of the occupied support if that leaves too little, and up to
    ``refine`` further passes refit from 1.5 times the current estimate, which
    keeps the envelope extrapolation short. ``cw_rate_hz`` is the envelope-rate fallback when the
    tail shows no decay.
    """
    counts = np.asarray(iat.counts, dtype=float)
    nz = np.flatnonzero(counts > 0)
    if counts.sum() < 100 or len(nz) < 4:
        raise InsufficientDataError("IAT histogram has too few counts")
    t = iat.centers
    last = int(nz[-1])
    if tail_start_ps is not None:
        i, r, ratio, rec = _recovery_edge(counts, t, last, tail_start_ps, level, cw_rate_hz)
    else:
        mode = t[int(np.argmax(np.convolve(counts, np.ones(5) / 5, mode="same")))]
        tail = 2.0 * mode
        if np.count_nonzero(counts[(t >= tail) & (t <= t[last])] > 0) < 3:
            tail = 0.5 * (t[nz[0]] + t[last])
        i, r, ratio, rec = _recovery_edge(counts, t, last, tail, level, cw_rate_hz)
        for _ in range(refine):
            tail = max(1.5 * iat.edges[i], iat.edges[i] + 4 * iat.bin_width_ps)
            if tail >= t[last]:
                break
            i_new, r, ratio, rec = _recovery_edge(counts, t, last, tail, level, cw_rate_hz)
            if i_new == i:
                break
            i = i_new
    # a detector recovered from the first bin is resolution-limited to one bin
    tau_ns = max(float(iat.edges[i]), float(iat.bin_width_ps)) / PS_PER_NS
    return RecoveryResult(tau_ns, max_count_rate(tau_ns), r * 1e12, ratio, rec)
