"""Quality sweeps along one device parameter at a time."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_N_MAX,
    DetectorParams,
    RecoveryCalibration,
    _require,
    fwhm_to_sigma,
    max_count_rate,
)
from .multigauss import build_model, pnr_quality

DEFAULT_MU_EFF = 1.5
DEFAULT_JITTER_FWHM_PS = 33.0
LK_RESOLUTION_NH = 1.0
LK_CAP_NH = 100_000.0


class UnreachableError(ValueError):
    """The requested quality is not reached below the inductance cap."""


@dataclass(frozen=True)
class SweepResult:
    axis_name: str
    axis_values: np.ndarray
    quality_per_n: np.ndarray  # shape (n_max, len(axis_values))
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ax = np.asarray(self.axis_values, dtype=float)
        _require(ax.ndim == 1 and len(ax) >= 1, "axis must be a non-empty 1-D array")
        _require(bool(np.all(np.diff(ax) > 0)), "axis values must be strictly increasing")
        q = np.asarray(self.quality_per_n, dtype=float)
        _require(q.shape[1:] == ax.shape, "quality matrix does not match the axis")
        _require(bool(np.all((q >= 0) & (q <= 1 + 1e-12))), "quality outside [0, 1]")
        object.__setattr__(self, "axis_values", ax)
        object.__setattr__(self, "quality_per_n", q)

    @property
    def n_max(self) -> int:
        return self.quality_per_n.shape[0]

    def q(self, n: int) -> np.ndarray:
        return self.quality_per_n[n - 1]


def _qualities(mu_eff, dts, sigmas, n_max, width_law):
    out = np.empty((n_max, len(dts)))
    for j, (dt, s1) in enumerate(zip(dts, sigmas)):
        out[:, j] = pnr_quality(build_model(mu_eff, dt, s1, n_max, width_law)).quality
    return out


def sweep_delta_t(sigma1_ps: float, mu_eff: float, dt_values: Sequence[float],
                  n_max: int = DEFAULT_N_MAX, width_law: str = "inverse_sqrt") -> SweepResult:
    dts = np.asarray(dt_values, dtype=float)
    _require(sigma1_ps > 0 and mu_eff > 0 and bool(np.all(dts > 0)), "parameters must be > 0")
    q = _qualities(mu_eff, dts, np.full(len(dts), sigma1_ps), n_max, width_law)
    return SweepResult("delta_t12_ps", dts, q,
                       {"mu_eff": mu_eff, "sigma1_ps": sigma1_ps, "width_law": width_law})


def quality_vs_lk(a_coef: float, sigma1_ps: float, mu_eff: float, lk_values_nH: Sequence[float],
                  n_max: int = DEFAULT_N_MAX, width_law: str = "inverse_sqrt") -> SweepResult:
    """Quality along L_k with the peak separation a * sqrt(L_k)."""
    _require(a_coef > 0, "a_coef must be > 0")
    lk = np.asarray(lk_values_nH, dtype=float)
    _require(bool(np.all(lk > 0)), "inductances must be > 0")
    dt = sweep_delta_t(sigma1_ps, mu_eff, a_coef * np.sqrt(lk), n_max, width_law)
    return SweepResult("kinetic_inductance_nH", lk, dt.quality_per_n,
                       {**dt.metadata, "a_ps_per_sqrt_nH": a_coef})


def sweep_jitter(delta_t12_ps: float, mu_eff: float, jitter_fwhm_values_ps: Sequence[float],
                 n_max: int = DEFAULT_N_MAX, width_law: str = "inverse_sqrt") -> SweepResult:
    """Quality versus single-photon jitter (FWHM) at fixed separation."""
    j = np.asarray(jitter_fwhm_values_ps, dtype=float)
    _require(delta_t12_ps > 0 and mu_eff > 0 and bool(np.all(j > 0)), "parameters must be > 0")
    sig = np.array([fwhm_to_sigma(x) for x in j])
    q = _qualities(mu_eff, np.full(len(j), delta_t12_ps), sig, n_max, width_law)
    return SweepResult("jitter_fwhm_ps", j, q,
                       {"mu_eff": mu_eff, "delta_t12_ps": delta_t12_ps, "width_law": width_law})


def min_lk_for_quality(target_q: float, n: int, a_coef: float, sigma1_ps: float, mu_eff: float,
                       n_max: int = DEFAULT_N_MAX, lk_floor_nH: float = LK_RESOLUTION_NH,
                       lk_cap_nH: float = LK_CAP_NH, width_law: str = "inverse_sqrt") -> float:
    """Smallest L_k on a 1 nH grid (from ``lk_floor_nH``) with Q_n >= target.

    Bisection over the monotone Q_n(L_k) curve; raises
    :class:`UnreachableError` if even ``lk_cap_nH`` falls short.
    """
    _require(0 < target_q < 1, "target_q must lie in (0, 1)")
    _require(1 <= n <= n_max, "n must lie in 1..n_max")

    def q_at(k: int) -> float:
        lk = lk_floor_nH + k * LK_RESOLUTION_NH
        return pnr_quality(build_model(mu_eff, a_coef * math.sqrt(lk), sigma1_ps, n_max,
                                       width_law)).quality[n - 1]

    lo, hi = 0, int(math.floor((lk_cap_nH - lk_floor_nH) / LK_RESOLUTION_NH))
    if q_at(lo) >= target_q:
        return lk_floor_nH
    if q_at(hi) < target_q:
        raise UnreachableError(f"Q_{n} < {target_q} even at {lk_cap_nH} nH")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if q_at(mid) >= target_q:
            hi = mid
        else:
            lo = mid
    return lk_floor_nH + hi * LK_RESOLUTION_NH


@dataclass(frozen=True)
class TradeoffRow:
    kinetic_inductance_nH: float
    delta_t12_ps: float
    quality_per_n: tuple[float, ...]
    tau_rec_ns: float
    max_rate_hz: float


def tradeoff_report(devices: Sequence[DetectorParams], a_coef: float,
                    mu_eff: float = DEFAULT_MU_EFF, n_max: int = DEFAULT_N_MAX,
                    calibration: RecoveryCalibration = RecoveryCalibration(),
                    width_law: str = "inverse_sqrt") -> list[TradeoffRow]:
    """Quality and maximum count rate per device, sorted by L_k.

    Each device's own jitter sets sigma_1; the recovery time comes from the
    linear L_k calibration.
    """
    _require(len(devices) > 0, "need at least one device")
    rows = []
    for d in sorted(devices, key=lambda d: d.kinetic_inductance_nH):
        lk = d.kinetic_inductance_nH
        dt = a_coef * math.sqrt(lk)
        q = pnr_quality(build_model(mu_eff, dt, fwhm_to_sigma(d.jitter_fwhm_ps), n_max,
                                    width_law)).quality
        tau = calibration.tau_rec_ns(lk)
        rows.append(TradeoffRow(lk, dt, tuple(float(x) for x in q), tau, max_count_rate(tau)))
    return rows
