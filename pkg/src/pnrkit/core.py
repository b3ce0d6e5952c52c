"""Domain types and closed-form conversions between physical quantities.

All times are picoseconds internally. Nanoseconds appear only in the names of
arguments that take them (``tau_dec_ns``, ``tau_rec_ns``); inductance is in nH
and resistance in ohm, so ``nH / ohm`` is a time in ns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))  # 2.354820045...
PS_PER_NS = 1000.0
DEFAULT_N_MAX = 4
MAX_N_MAX = 10


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class InsufficientDataError(ValueError):
    """Too few counts for the requested estimate."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class DetectorParams:
    """Electrical and geometric description of one nanowire device."""

    kinetic_inductance_nH: float
    length_um: float = 200.0
    width_nm: float = 100.0
    load_impedance_ohm: float = 50.0
    critical_current_uA: float = 7.6
    bias_fraction: float = 0.8
    peak_voltage_mV: float = 200.0
    noise_fwhm_mV: float = 2.0
    # not a measured quantity; only used by the waveform sandbox
    hotspot_resistance_ohm: float = 1000.0
    jitter_fwhm_ps: float = 33.0

    def __post_init__(self):
        errors = self.violations()
        if errors:
            raise DomainError("; ".join(errors))

    def violations(self) -> list[str]:
        errs = []
        if not self.kinetic_inductance_nH > 0:
            errs.append("kinetic_inductance_nH must be > 0")
        if not self.load_impedance_ohm > 0:
            errs.append("load_impedance_ohm must be > 0")
        if not 0 < self.bias_fraction < 1:
            errs.append("bias_fraction must lie in (0, 1)")
        if not self.noise_fwhm_mV >= 0:
            errs.append("noise_fwhm_mV must be >= 0")
        if not self.hotspot_resistance_ohm > 0:
            errs.append("hotspot_resistance_ohm must be > 0")
        if not self.jitter_fwhm_ps > 0:
            errs.append("jitter_fwhm_ps must be > 0")
        if not self.peak_voltage_mV > 0:
            errs.append("peak_voltage_mV must be > 0")
        return errs

    @property
    def bias_current_uA(self) -> float:
        return self.bias_fraction * self.critical_current_uA

    @property
    def electrical_time_constant_ps(self) -> float:
        """L_k / Z_0 in ps."""
        return self.kinetic_inductance_nH / self.load_impedance_ohm * PS_PER_NS


@dataclass(frozen=True)
class MeasurementContext:
    repetition_rate_hz: float
    count_rate_hz: float
    total_pulses: int = 0

    def __post_init__(self):
        _require(self.repetition_rate_hz > 0, "repetition_rate_hz must be > 0")
        _require(
            0 <= self.count_rate_hz < self.repetition_rate_hz,
            "count_rate_hz must satisfy 0 <= CR < RR (saturated detector otherwise)",
        )
        _require(self.total_pulses >= 0, "total_pulses must be >= 0")

    @property
    def click_probability(self) -> float:
        return self.count_rate_hz / self.repetition_rate_hz

    @classmethod
    def from_counts(cls, pulses: int, events: int, repetition_rate_hz: float = 1e6):
        """Context for ``events`` clicks observed over ``pulses`` laser pulses."""
        _require(pulses > 0, "pulses must be > 0")
        _require(0 <= events < pulses, "events must satisfy 0 <= events < pulses")
        return cls(repetition_rate_hz, repetition_rate_hz * events / pulses, pulses)


@dataclass(frozen=True)
class PhotonStatistics:
    """Photon-number distribution ``probs[n]`` for n = 0..N plus the mass above N."""

    mu_eff: float
    probs: tuple[float, ...]
    overflow: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        _require(all(p >= 0 for p in self.probs) and self.overflow >= 0,
                 "probabilities must be >= 0")
        total = math.fsum(self.probs) + self.overflow
        _require(abs(total - 1.0) < 1e-9, f"probabilities sum to {total!r}, not 1")

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def lumped(self) -> np.ndarray:
        """probs with the overflow folded into the last entry (n >= N_max)."""
        p = np.array(self.probs)
        p[-1] += self.overflow
        return p

    def total_variation(self, other: "PhotonStatistics") -> float:
        _require(self.n_max == other.n_max, "distributions have different N_max")
        return 0.5 * float(np.abs(self.lumped() - other.lumped()).sum())


def fwhm_to_sigma(fwhm_ps: float) -> float:
    _require(fwhm_ps > 0, "FWHM must be > 0")
    return fwhm_ps / FWHM_PER_SIGMA


def sigma_to_fwhm(sigma_ps: float) -> float:
    _require(sigma_ps > 0, "sigma must be > 0")
    return sigma_ps * FWHM_PER_SIGMA


def effective_mean_photons(ctx: MeasurementContext) -> float:
    """Mean detected photon number from the click ratio, -ln(1 - CR/RR)."""
    return -math.log1p(-ctx.click_probability)


def click_probability(mu_eff: float) -> float:
    """Inverse of :func:`effective_mean_photons`: 1 - exp(-mu)."""
    _require(mu_eff >= 0, "mu_eff must be >= 0")
    return -math.expm1(-mu_eff)


def poisson_pmf(mu_eff: float, n):
    """Poisson probability mu^n e^-mu / n!; ``n`` may be an int or an integer array."""
    _require(mu_eff >= 0, "mu_eff must be >= 0")
    n_arr = np.asarray(n)
    _require(bool(np.all(n_arr >= 0)), "n must be >= 0")
    if mu_eff == 0:
        out = (n_arr == 0).astype(float)
    else:
        out = np.exp(n_arr * math.log(mu_eff) - mu_eff - gammaln(n_arr + 1))
    return float(out) if out.ndim == 0 else out


def poisson_statistics(mu_eff: float, n_max: int = DEFAULT_N_MAX) -> PhotonStatistics:
    """Poisson distribution over 0..n_max with an explicit overflow bucket."""
    _require(1 <= n_max, "n_max must be >= 1")
    p = poisson_pmf(mu_eff, np.arange(n_max + 1))
    overflow = max(0.0, 1.0 - math.fsum(p))
    return PhotonStatistics(mu_eff, tuple(p), overflow)


def kinetic_inductance_from_decay(tau_dec_ns: float, z0_ohm: float = 50.0) -> float:
    """L_k (nH) = Z_0 (ohm) * tau_dec (ns)."""
    _require(tau_dec_ns > 0, "tau_dec_ns must be > 0")
    _require(z0_ohm > 0, "z0_ohm must be > 0")
    return z0_ohm * tau_dec_ns


def max_count_rate(tau_rec_ns: float) -> float:
    """Maximum count rate in Hz, the inverse of the recovery time."""
    _require(tau_rec_ns > 0, "tau_rec_ns must be > 0")
    return 1e9 / tau_rec_ns


def sigma_for_n(sigma1_ps: float, n):
    """Width of the n-photon peak, sigma_1 / sqrt(n)."""
    _require(sigma1_ps > 0, "sigma1_ps must be > 0")
    n_arr = np.asarray(n)
    _require(bool(np.all(n_arr >= 1)), "n must be >= 1 (vacuum has no latency peak)")
    out = sigma1_ps / np.sqrt(n_arr)
    return float(out) if out.ndim == 0 else out


def mean_gaps(delta_t12_ps: float, n_max: int) -> np.ndarray:
    """Unsigned spacing between peaks n and n+1 for n = 1..n_max-1."""
    _require(delta_t12_ps > 0, "delta_t12_ps must be > 0")
    _require(n_max >= 1, "n_max must be >= 1")
    return delta_t12_ps / np.sqrt(np.arange(1, n_max))


def mean_positions(delta_t12_ps: float, n_max: int) -> np.ndarray:
    """Peak centres with mu_1 = 0 and latency decreasing with photon number.

    mu_n = mu_{n-1} - delta_t12 / sqrt(n - 1).
    """
    gaps = mean_gaps(delta_t12_ps, n_max)
    return np.concatenate([[0.0], -np.cumsum(gaps)])


def fit_sqrt_coefficient(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares ``a`` in delta_t = a * sqrt(L_k); closed form sum(dt*sqrt(L)) / sum(L)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    _require(len(pts) >= 1, "need at least one (L_k, delta_t) point")
    _require(bool(np.all(pts > 0)), "all points must be positive")
    lk, dt = pts[:, 0], pts[:, 1]
    return float(np.sum(dt * np.sqrt(lk)) / np.sum(lk))


@dataclass(frozen=True)
class RecoveryCalibration:
    """Linear tau_rec(L_k) through two (L_k nH, tau_rec ns) anchor points."""

    points: tuple[tuple[float, float], tuple[float, float]] = ((165.0, 5.99), (872.0, 68.11))

    @property
    def slope_ns_per_nH(self) -> float:
        (l0, t0), (l1, t1) = self.points
        return (t1 - t0) / (l1 - l0)

    @property
    def intercept_ns(self) -> float:
        l0, t0 = self.points[0]
        return t0 - self.slope_ns_per_nH * l0

    def tau_rec_ns(self, lk_nH: float) -> float:
        tau = self.intercept_ns + self.slope_ns_per_nH * lk_nH
        _require(tau > 0, f"calibration gives non-positive recovery time at {lk_nH} nH")
        return tau
