"""Truncated multi-Gaussian latency model and the photon-number assignment quality.

Peak ``n`` is ``A_n * exp(-(t - mu_n)^2 / (2 sigma_n^2))``. Latency decreases with
photon number by default, so peak 1 sits at the largest latency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .core import (
    DEFAULT_N_MAX,
    MAX_N_MAX,
    DomainError,
    MeasurementContext,
    PhotonStatistics,
    _require,
    effective_mean_photons,
    mean_gaps,
    poisson_pmf,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)
WIDTH_LAWS = ("inverse_sqrt", "constant")


@dataclass(frozen=True)
class GaussianPeak:
    n: int
    amplitude: float
    mean_ps: float
    sigma_ps: float

    def __post_init__(self):
        _require(self.n >= 1, "peak photon number must be >= 1")
        _require(self.amplitude >= 0, "amplitude must be >= 0")
        _require(self.sigma_ps > 0, "sigma_ps must be > 0")

    @property
    def area(self) -> float:
        return self.amplitude * self.sigma_ps * SQRT_2PI

    def density(self, t):
        z = (np.asarray(t, dtype=float) - self.mean_ps) / self.sigma_ps
        return self.amplitude * np.exp(-0.5 * z * z)


@dataclass(frozen=True)
class MultiGaussianModel:
    """Peaks ordered by photon number 1..N_max.

    ``orientation`` is -1 when latency decreases with n and +1 otherwise.
    """

    peaks: tuple[GaussianPeak, ...]
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        peaks = tuple(self.peaks)
        object.__setattr__(self, "peaks", peaks)
        _require(1 <= len(peaks) <= MAX_N_MAX, f"need 1..{MAX_N_MAX} peaks")
        _require([p.n for p in peaks] == list(range(1, len(peaks) + 1)),
                 "peaks must be numbered 1..N_max in order")
        if len(peaks) > 1:
            steps = np.diff(self.means)
            _require(bool(np.all(steps < 0) or np.all(steps > 0)),
                     "peak means must be strictly monotone in n")

    @property
    def n_max(self) -> int:
        return len(self.peaks)

    @property
    def orientation(self) -> int:
        if self.n_max == 1:
            return -1
        return -1 if self.peaks[1].mean_ps < self.peaks[0].mean_ps else 1

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.peaks])

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean_ps for p in self.peaks])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([p.sigma_ps for p in self.peaks])

    @property
    def areas(self) -> np.ndarray:
        return self.amplitudes * self.sigmas * SQRT_2PI

    @property
    def normalization(self) -> float:
        return float(self.areas.sum())

    @property
    def relative_areas(self) -> np.ndarray:
        a = self.areas
        return a / a.sum()

    @property
    def delta_t12_ps(self) -> float:
        _require(self.n_max >= 2, "delta_t12 needs two peaks")
        return abs(self.peaks[0].mean_ps - self.peaks[1].mean_ps)

    @classmethod
    def from_arrays(cls, areas, means, sigmas, metadata=None) -> "MultiGaussianModel":
        """Build from per-peak areas (not heights), means and widths."""
        areas, means, sigmas = (np.asarray(x, dtype=float) for x in (areas, means, sigmas))
        _require(areas.shape == means.shape == sigmas.shape, "array lengths differ")
        _require(bool(np.all(sigmas > 0)), "sigmas must be > 0")
        peaks = tuple(
            GaussianPeak(i + 1, float(r / (s * SQRT_2PI)), float(m), float(s))
            for i, (r, m, s) in enumerate(zip(areas, means, sigmas))
        )
        return cls(peaks, dict(metadata or {}))

    def shifted(self, offset_ps: float) -> "MultiGaussianModel":
        return MultiGaussianModel(
            tuple(GaussianPeak(p.n, p.amplitude, p.mean_ps + offset_ps, p.sigma_ps) for p in self.peaks),
            dict(self.metadata),
        )

    def scaled(self, factor: float) -> "MultiGaussianModel":
        return MultiGaussianModel(
            tuple(GaussianPeak(p.n, p.amplitude * factor, p.mean_ps, p.sigma_ps) for p in self.peaks),
            dict(self.metadata),
        )

    def reflected(self) -> "MultiGaussianModel":
        return MultiGaussianModel(
            tuple(GaussianPeak(p.n, p.amplitude, -p.mean_ps, p.sigma_ps) for p in self.peaks),
            dict(self.metadata),
        )

    def to_dict(self) -> dict:
        return {
            "format": "pnrkit-model",
            "version": 1,
            "orientation": self.orientation,
            "peaks": [
                {"n": p.n, "amplitude": p.amplitude, "mean_ps": p.mean_ps, "sigma_ps": p.sigma_ps}
                for p in self.peaks
            ],
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MultiGaussianModel":
        if doc.get("format", "pnrkit-model") != "pnrkit-model":
            raise DomainError(f"not a model document: format={doc.get('format')!r}")
        peaks = tuple(
            GaussianPeak(int(p["n"]), float(p["amplitude"]), float(p["mean_ps"]), float(p["sigma_ps"]))
            for p in doc["peaks"]
        )
        model = cls(peaks, dict(doc.get("metadata", {})))
        if "orientation" in doc and model.n_max > 1 and doc["orientation"] != model.orientation:
            raise DomainError("orientation flag disagrees with peak means")
        return model


def poisson_areas(mu_eff: float, n_max: int) -> np.ndarray:
    """Poisson weights of n = 1..n_max renormalized over the detected, truncated range."""
    _require(mu_eff > 0, "mu_eff must be > 0")
    q = poisson_pmf(mu_eff, np.arange(1, n_max + 1))
    return q / q.sum()


def _widths(sigma1_ps: float, n_max: int, width_law: str) -> np.ndarray:
    _require(sigma1_ps > 0, "sigma1_ps must be > 0")
    _require(width_law in WIDTH_LAWS, f"width_law must be one of {WIDTH_LAWS}")
    n = np.arange(1, n_max + 1)
    if width_law == "constant":
        return np.full(n_max, float(sigma1_ps))
    return sigma1_ps / np.sqrt(n)


def build_model(
    mu_eff: float,
    delta_t12_ps: float,
    sigma1_ps: float,
    n_max: int = DEFAULT_N_MAX,
    width_law: str = "inverse_sqrt",
) -> MultiGaussianModel:
    """Model from the scaling laws: Poisson areas, 1/sqrt(n) widths and gaps.

    ``width_law="constant"`` keeps every peak at ``sigma1_ps``; it exists for
    comparison only and is not the default.
    """
    _require(1 <= n_max <= MAX_N_MAX, f"n_max must be in 1..{MAX_N_MAX}")
    _require(delta_t12_ps > 0, "delta_t12_ps must be > 0")
    return build_model_from_gaps(mu_eff, mean_gaps(delta_t12_ps, n_max), sigma1_ps, width_law,
                                 delta_t12_ps=delta_t12_ps)


def build_model_from_gaps(
    mu_eff: float,
    gaps_ps: Sequence[float],
    sigma1_ps: float,
    width_law: str = "inverse_sqrt",
    **metadata,
) -> MultiGaussianModel:
    """Model with explicitly given (unsigned) spacings between consecutive peaks."""
    gaps = np.asarray(gaps_ps, dtype=float)
    _require(bool(np.all(gaps > 0)), "gaps must be > 0")
    n_max = len(gaps) + 1
    _require(n_max <= MAX_N_MAX, f"at most {MAX_N_MAX} peaks")
    means = np.concatenate([[0.0], -np.cumsum(gaps)])
    meta = {"mu_eff": mu_eff, "sigma1_ps": sigma1_ps, "width_law": width_law,
            "source": "scaling-laws", **metadata}
    return MultiGaussianModel.from_arrays(
        poisson_areas(mu_eff, n_max), means, _widths(sigma1_ps, n_max, width_law), meta
    )


def evaluate_density(model: MultiGaussianModel, t):
    """Summed density at ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    out = np.zeros_like(t_arr)
    for p in model.peaks:
        out = out + p.density(t_arr)
    return float(out) if out.ndim == 0 else out


def gaussian_mass(lo, hi, mean, sigma):
    """Probability mass of Normal(mean, sigma) on [lo, hi]; infinite bounds allowed.

    Takes the difference on whichever side of the mean keeps both terms small,
    so far-tail intervals keep their relative precision.
    """
    za = (np.asarray(lo, dtype=float) - mean) / sigma
    zb = (np.asarray(hi, dtype=float) - mean) / sigma
    upper = ndtr(-za) - ndtr(-zb)
    lower = ndtr(zb) - ndtr(za)
    return np.where(za > 0, upper, lower)


@dataclass(frozen=True)
class PnrQualityReport:
    """``p_matrix[m-1, n-1]`` is the probability that an event in bin m carried n photons."""

    boundaries_ps: tuple[float, ...]
    p_matrix: np.ndarray
    dominated: tuple[bool, ...]

    @property
    def quality(self) -> np.ndarray:
        return np.diag(self.p_matrix).copy()

    def to_dict(self) -> dict:
        return {
            "boundaries_ps": list(self.boundaries_ps),
            "p_matrix": self.p_matrix.tolist(),
            "quality": self.quality.tolist(),
            "dominated": list(self.dominated),
        }


def _pair_root(a1, m1, s1, a2, m2, s2) -> float | None:
    """Single crossing of a1*G(m1,s1) and a2*G(m2,s2) strictly between m1 and m2."""
    if a1 <= 0 or a2 <= 0:
        return None
    d = m2 - m1
    qa = 1.0 / s2**2 - 1.0 / s1**2
    qb = -2.0 * d / s2**2
    qc = d * d / s2**2 + 2.0 * math.log(a1 / a2)
    if abs(qa) * d * d <= 1e-14 * abs(qb * d):
        roots = [-qc / qb]
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0:
            return None
        q = -0.5 * (qb + math.copysign(math.sqrt(disc), qb))
        roots = [q / qa]
        if q != 0:
            roots.append(qc / q)
    lo, hi = min(0.0, d), max(0.0, d)
    inside = [x for x in roots if lo < x < hi]
    if len(inside) != 1:
        return None
    return m1 + inside[0]


def _dominated_boundary(a: GaussianPeak, b: GaussianPeak) -> float:
    """Fallback threshold: the mean of whichever peak is weaker at the midpoint.

    This is where the equal-density crossing leaves the interval between the
    means, so thresholds (and qualities) stay continuous as peaks separate.
    """
    mid = 0.5 * (a.mean_ps + b.mean_ps)
    return b.mean_ps if a.density(mid) >= b.density(mid) else a.mean_ps


def adjacent_intersections(model: MultiGaussianModel) -> tuple[np.ndarray, tuple[bool, ...]]:
    """Thresholds between peaks m and m+1 and a per-threshold "dominated" flag.

    Where one weighted peak dominates the other everywhere between their means
    the threshold falls back to the mean of the dominated peak.
    """
    _require(model.n_max >= 2, "need at least two peaks")
    pk = model.peaks
    out, flags = [], []
    for a, b in zip(pk[:-1], pk[1:]):
        _require(a.mean_ps != b.mean_ps, "coincident peak means")
        t = _pair_root(a.amplitude, a.mean_ps, a.sigma_ps, b.amplitude, b.mean_ps, b.sigma_ps)
        flags.append(t is None)
        out.append(_dominated_boundary(a, b) if t is None else t)
    return np.array(out), tuple(flags)


def pnr_quality(model: MultiGaussianModel) -> PnrQualityReport:
    """Assignment probabilities between threshold-delimited latency bins.

    Bin m runs between the thresholds on either side of peak m; the outermost
    bins extend to infinity. Every bin's row is normalized over all peaks.
    """
    _require(model.n_max >= 2, "need at least two peaks")
    means = model.means
    _require(len(np.unique(means)) == len(means), "degenerate model: coincident means")
    bounds, flags = adjacent_intersections(model)
    # work in u = orientation-corrected time so bins run left to right with n
    d = float(model.orientation)
    u_edges = np.concatenate([[-np.inf], d * bounds, [np.inf]])
    u_means = d * means
    sig = model.sigmas
    areas = model.areas
    mass = gaussian_mass(u_edges[:-1, None], u_edges[1:, None], u_means[None, :], sig[None, :])
    w = mass * areas[None, :]
    denom = w.sum(axis=1, keepdims=True)
    empty = denom[:, 0] <= 0
    if np.any(empty):
        # zero-width bin (coinciding fallback thresholds): the ratio of
        # integrals tends to the ratio of the weighted densities at that point
        for m in np.flatnonzero(empty):
            t = float(bounds[min(m, len(bounds) - 1)])
            w[m] = [p.density(t) for p in model.peaks]
        denom = w.sum(axis=1, keepdims=True)
        _require(bool(np.all(denom > 0)), "a latency bin carries no probability mass")
    return PnrQualityReport(tuple(float(b) for b in bounds), w / denom, flags)


def photon_statistics(model: MultiGaussianModel, ctx: MeasurementContext) -> PhotonStatistics:
    """Photon-number distribution: vacuum from missed pulses, the rest from peak areas."""
    click = ctx.click_probability
    probs = [1.0 - click] + list(click * model.relative_areas)
    return PhotonStatistics(effective_mean_photons(ctx), tuple(probs), 0.0)


def quality_diagonal(models: Iterable[MultiGaussianModel]) -> np.ndarray:
    return np.array([pnr_quality(m).quality for m in models])
