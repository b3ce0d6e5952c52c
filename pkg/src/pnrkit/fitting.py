"""Recover a multi-Gaussian latency model from a binned histogram.

Model counts are Gaussian masses integrated over each bin, so bin width never
biases the widths. Internally everything runs in ``x = t - start_ps``, which
makes fits exactly equivariant under shifting the histogram grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_widths
from scipy.special import ndtr

from .core import DEFAULT_N_MAX, FWHM_PER_SIGMA, InsufficientDataError, _require
from .multigauss import SQRT_2PI, MultiGaussianModel
from .simulate import Histogram

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class DegenerateFitError(ArithmeticError):
    """Normal equations are singular; the parameters are not identifiable."""


@dataclass(frozen=True)
class FitConfig:
    mode: str = "constrained"  # or "free"
    n_max: int = DEFAULT_N_MAX
    max_iterations: int = 200
    convergence_tol: float = 1e-9
    smoothing_window_bins: int = 5
    seed_threshold: float = 0.05
    lambda0: float = 1e-3
    min_sigma_bins: float = 0.1

    def __post_init__(self):
        errs = self.violations()
        if errs:
            raise ValueError("; ".join(errs))

    def violations(self) -> list[str]:
        errs = []
        if self.mode not in ("free", "constrained"):
            errs.append("mode must be 'free' or 'constrained'")
        if not 1 <= self.n_max <= 10:
            errs.append("n_max must be in 1..10")
        if not self.max_iterations >= 1:
            errs.append("max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            errs.append("convergence_tol must be > 0")
        if not self.smoothing_window_bins >= 1:
            errs.append("smoothing_window_bins must be >= 1")
        if not 0 < self.seed_threshold < 1:
            errs.append("seed_threshold must lie in (0, 1)")
        return errs


@dataclass
class FitResult:
    model: MultiGaussianModel
    chi2: float
    chi2_reduced: float
    residuals: np.ndarray
    converged: bool
    iterations: int
    mode: str
    chi2_trace: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": "pnrkit-fit",
            "version": 1,
            "model": self.model.to_dict(),
            "mode": self.mode,
            "chi2": self.chi2,
            "chi2_reduced": self.chi2_reduced,
            "converged": self.converged,
            "iterations": self.iterations,
            "residuals": [float(r) for r in self.residuals],
            "warnings": list(self.warnings),
        }


# ------------------------------------------------------------------- seeding

def _smooth(counts: np.ndarray, k: int) -> np.ndarray:
    if k <= 1:
        return counts.astype(float)
    ker = np.ones(k)
    num = np.convolve(counts, ker, mode="same")
    den = np.convolve(np.ones_like(counts, dtype=float), ker, mode="same")
    return num / den


def seed_peaks(hist: Histogram, config: FitConfig = FitConfig(),
               gap_ps: float | None = None, sigma_scale: float = 1.0) -> MultiGaussianModel:
    """Initial peaks from local maxima of the smoothed histogram.

    Maxima above ``seed_threshold`` of the global maximum (and clear of the
    smoothing noise) become peaks n = 1, 2, ... in order of decreasing latency.
    Missing higher peaks are placed with the 1/sqrt(n) gap rule, using
    ``gap_ps`` as delta_t12 when given; ``sigma_scale`` narrows or widens
    every seeded width. Areas are in counts; the metadata
    records how many peaks were found directly.
    """
    counts = np.asarray(hist.counts, dtype=float)
    if counts.sum() <= 0:
        raise InsufficientDataError("histogram has no counts")
    k = config.smoothing_window_bins
    s = _smooth(counts, k)
    top = s.max()
    noise = math.sqrt(2.0 * top / k)
    min_prom = max(config.seed_threshold * top, 5.0 * noise)
    idx, props = find_peaks(s, height=config.seed_threshold * top, prominence=min_prom)
    if len(idx) == 0:
        raise InsufficientDataError("no local maxima clear of the noise above threshold")
    if len(idx) > config.n_max:
        keep = np.sort(np.argsort(props["prominences"])[::-1][: config.n_max])
        idx = idx[keep]
    idx = idx[::-1]  # largest latency first: n = 1
    w = hist.bin_width_ps
    widths = peak_widths(s, idx, rel_height=0.5)[0]
    var_box = (k * k - 1) / 12.0
    sig_bins = np.sqrt(np.maximum((widths / FWHM_PER_SIGMA) ** 2 - var_box, 0.25))
    x = (idx + 0.5) * w
    sig = sig_bins * w * sigma_scale
    areas = s[idx] * sig * SQRT_2PI / w

    n_found = len(idx)
    if n_found < config.n_max:
        if gap_ps is not None:
            dt = gap_ps
        elif n_found >= 2:
            strong = np.sort(np.argsort(s[idx])[::-1][:2])
            i, j = int(strong[0]), int(strong[1])
            span = sum(1.0 / math.sqrt(m) for m in range(i + 1, j + 1))
            dt = abs(x[i] - x[j]) / span
        else:
            dt = sig[0] * FWHM_PER_SIGMA
        xs, sg, ar = list(x), list(sig), list(areas)
        for n in range(n_found + 1, config.n_max + 1):
            xn = xs[-1] - dt / math.sqrt(n - 1)
            xs.append(xn)
            sg.append(sig[0] / math.sqrt(n))
            b = int(math.floor(xn / w))
            height = s[b] if 0 <= b < len(s) else 0.0
            ar.append(max(height * sg[-1] * SQRT_2PI / w, 1e-3 * areas.max()))
        x, sig, areas = np.array(xs), np.array(sg), np.array(ar)
    return MultiGaussianModel.from_arrays(
        areas, x + hist.start_ps, np.maximum(sig, config.min_sigma_bins * w * 1.01),
        {"source": "seed", "peaks_found": n_found},
    )


# ------------------------------------------------------------------- fitting

def _bin_masses(lo, hi, mu, sig):
    """Mass of each Gaussian on each bin with its mean and width derivatives; shapes (bins, peaks)."""
    za = (lo[:, None] - mu[None, :]) / sig[None, :]
    zb = (hi[:, None] - mu[None, :]) / sig[None, :]
    mass = np.where(za > 0, ndtr(-za) - ndtr(-zb), ndtr(zb) - ndtr(za))
    pa = _INV_SQRT_2PI * np.exp(-0.5 * za * za)
    pb = _INV_SQRT_2PI * np.exp(-0.5 * zb * zb)
    d_mu = -(pb - pa) / sig[None, :]
    d_sig = -(zb * pb - za * pa) / sig[None, :]
    return mass, d_mu, d_sig


class _Param:
    """Maps a flat parameter vector to (areas, means, sigmas) and their Jacobian."""

    def __init__(self, mode: str, n: int, orientation: int):
        self.mode = mode if n > 1 else "free"
        self.n = n
        self.o = orientation
        k = np.arange(1, n + 1)
        self.inv_sqrt_n = 1.0 / np.sqrt(k)
        # cumulative gap weights: mu_n = mu_1 + o * dt * c_n
        self.c = np.concatenate([[0.0], np.cumsum(1.0 / np.sqrt(np.arange(1, n)))])

    def size(self) -> int:
        return 3 * self.n if self.mode == "free" else self.n + 3

    def pack(self, areas, means, sigmas) -> np.ndarray:
        if self.mode == "free":
            return np.concatenate([areas, means, sigmas])
        dt = abs(means[0] - means[1])
        return np.concatenate([areas, [means[0], dt, sigmas[0]]])

    def unpack(self, p):
        n = self.n
        if self.mode == "free":
            return p[:n], p[n:2 * n], p[2 * n:]
        areas = p[:n]
        mu1, dt, s1 = p[n:]
        return areas, mu1 + self.o * dt * self.c, s1 * self.inv_sqrt_n

    def model_and_jacobian(self, p, lo, hi):
        areas, mu, sig = self.unpack(p)
        mass, d_mu, d_sig = _bin_masses(lo, hi, mu, sig)
        m = mass @ areas
        n = self.n
        J = np.empty((len(lo), self.size()))
        J[:, :n] = mass
        gm = d_mu * areas[None, :]
        gs = d_sig * areas[None, :]
        if self.mode == "free":
            J[:, n:2 * n] = gm
            J[:, 2 * n:] = gs
        else:
            J[:, n] = gm.sum(axis=1)
            J[:, n + 1] = gm @ (self.o * self.c)
            J[:, n + 2] = gs @ self.inv_sqrt_n
        return m, J


def _valid(param: _Param, p, min_sigma, span) -> bool:
    areas, mu, sig = param.unpack(p)
    if not np.all(np.isfinite(p)) or np.any(areas < 0) or np.any(sig <= min_sigma):
        return False
    # peaks stay within one grid span of the data and no wider than it
    if np.any(mu < -span) or np.any(mu > 2.0 * span) or np.any(sig > span):
        return False
    if param.mode == "constrained" and not p[param.n + 1] > 0:
        return False
    if param.n > 1:
        steps = np.diff(mu)
        if not (np.all(steps < 0) or np.all(steps > 0)):
            return False
    return True


# restart grid used when seeding misses peaks: delta_t12 in units of the
# seeded n=1 width, and a scale applied to every seeded width
_GAP_FACTORS = (0.5, 1.0, 1.5, 2.0, 3.0)
_WIDTH_SCALES = (1.0, 0.6)


def fit_multigauss(hist: Histogram, init: MultiGaussianModel | None = None,
                   config: FitConfig = FitConfig()) -> FitResult:
    """Fit from ``init``, or from seeded peaks when it is omitted.

    When seeding resolves fewer than ``n_max`` peaks, merged peaks make the
    seeded separation and widths unreliable, so the fit is also restarted
    from a small grid of separation and width guesses and the lowest
    chi-square converged result is returned. Restarts are centred on the
    data centroid rather than on the tallest maximum.
    """
    if init is not None:
        return _fit_from(hist, init, config)
    seed = seed_peaks(hist, config)
    starts = [seed]
    if config.n_max >= 2 and seed.metadata.get("peaks_found", 0) < config.n_max:
        sigma0 = float(seed.sigmas[0])
        centroid = float(np.average(hist.centers, weights=hist.counts))
        for k in _WIDTH_SCALES:
            for f in _GAP_FACTORS:
                st = seed_peaks(hist, config, gap_ps=f * sigma0, sigma_scale=k)
                # place the start so its area-weighted centre matches the data
                starts.append(st.shifted(centroid - float(np.average(st.means, weights=st.areas))))
    best = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for start in starts:
            try:
                res = _fit_from(hist, start, config)
            except (ValueError, DegenerateFitError):
                continue
            key = (not res.converged, res.chi2)
            if best is None or key < best[0]:
                best = (key, res)
    for msg in dict.fromkeys(str(w.message) for w in caught):
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if best is None:
        return _fit_from(hist, seed, config)
    return best[1]


def _fit_from(hist: Histogram, init: MultiGaussianModel, config: FitConfig) -> FitResult:
    """Damped least squares with Poisson weights ``1 / max(count, 1)``.

    Free mode fits every peak parameter independently. Constrained mode fits
    the areas plus the first peak's position and width and ``delta_t12``; the
    other means and widths follow from the 1/sqrt(n) laws. Exhausting ``max_iterations`` returns a result
    flagged ``converged=False``.
    """
    counts = np.asarray(hist.counts, dtype=float)
    if counts.sum() <= 0:
        raise InsufficientDataError("histogram has no counts")
    w = hist.bin_width_ps
    span = w * hist.n_bins
    lo = w * np.arange(hist.n_bins, dtype=float)
    hi = lo + w
    min_sigma = config.min_sigma_bins * w
    param = _Param(config.mode, init.n_max, init.orientation)
    weights = 1.0 / np.maximum(counts, 1.0)
    sw = np.sqrt(weights)

    notes = []
    n_par = param.size()
    support = int(np.count_nonzero(counts))
    if support < 5 * n_par:
        msg = f"only {support} populated bins for {n_par} free parameters"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    p = param.pack(init.areas, init.means - hist.start_ps, init.sigmas)
    p = p.astype(float)
    if param.mode == "constrained":
        p[-1] = max(p[-1], min_sigma * 1.01)
    _require(_valid(param, p, min_sigma, span), "initial parameters violate the fit bounds")

    m, J = param.model_and_jacobian(p, lo, hi)
    r = (counts - m) * sw
    chi2 = float(r @ r)
    trace = [chi2]
    if np.any(np.all(J == 0, axis=0)):
        raise DegenerateFitError("a parameter has no influence on any bin")
    lam = config.lambda0
    converged = False
    it = 0
    while it < config.max_iterations:
        it += 1
        Jw = J * sw[:, None]
        A = Jw.T @ Jw
        g = Jw.T @ r
        diag = np.diag(A).copy()
        diag = np.maximum(diag, 1e-12 * diag.max())
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError as exc:
                raise DegenerateFitError("singular normal equations") from exc
            if not np.all(np.isfinite(step)):
                raise DegenerateFitError("non-finite LM step")
            trial = p + step
            trial[: param.n] = np.maximum(trial[: param.n], 0.0)
            if _valid(param, trial, min_sigma, span):
                m_t, J_t = param.model_and_jacobian(trial, lo, hi)
                r_t = (counts - m_t) * sw
                chi2_t = float(r_t @ r_t)
                if chi2_t < chi2:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            # no descent step exists at machine precision: a stationary point
            converged = True
            break
        rel = (chi2 - chi2_t) / max(chi2, 1e-300)
        p, m, J, r, chi2 = trial, m_t, J_t, r_t, chi2_t
        trace.append(chi2)
        lam = max(lam / 10.0, 1e-12)
        if rel < config.convergence_tol:
            converged = True
            break

    areas, mu, sig = param.unpack(p)
    dof = max(hist.n_bins - n_par, 1)
    model = MultiGaussianModel.from_arrays(
        areas, mu + hist.start_ps, sig,
        {"source": "fit", "mode": param.mode, "converged": converged},
    )
    if not converged:
        notes.append(f"not converged after {it} iterations")
    return FitResult(model, chi2, chi2 / dof, counts - m, converged, it, param.mode, trace, notes)
