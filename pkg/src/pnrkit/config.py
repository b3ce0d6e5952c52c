"""Run configuration: TOML file <-> nested dataclasses with strict validation.

Unknown sections or keys are rejected, and validation reports every violated
field at once.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .core import MAX_N_MAX, DetectorParams


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ModelSection:
    mu_eff: float = 1.5
    delta_t12_ps: float = 47.0
    jitter_fwhm_ps: float = 33.0
    n_max: int = 4
    width_law: str = "inverse_sqrt"


@dataclass
class SimulateSection:
    pulses: int = 1_000_000
    seed: int = 7
    repetition_rate_hz: float = 1e6
    bin_width_ps: float = 2.0
    workers: int = 1


@dataclass
class FitSection:
    mode: str = "constrained"
    max_iterations: int = 200
    convergence_tol: float = 1e-9
    smoothing_window_bins: int = 5


@dataclass
class SweepSection:
    dt_values_ps: list[float] = field(default_factory=lambda: [float(x) for x in range(2, 121, 2)])
    jitter_values_ps: list[float] = field(default_factory=lambda: [float(x) for x in range(10, 61, 2)])
    lk_values_nH: list[float] = field(
        default_factory=lambda: [float(x) for x in range(100, 10001, 100)])
    # (L_k nH, delta_t12 ps) anchors for the sqrt(L_k) separation law
    sqrt_law_points: list[list[float]] = field(default_factory=lambda: [[165.0, 21.0], [872.0, 47.0]])
    target_quality: float = 0.99


@dataclass
class IatSection:
    cw_rate_hz: float = 1e7
    events: int = 2_000_000
    exponent: float = 2.0
    bin_width_ps: float = 500.0
    lk_values_nH: list[float] = field(default_factory=lambda: [165.0, 872.0])


@dataclass
class DeviceEntry:
    kinetic_inductance_nH: float
    jitter_fwhm_ps: float = 33.0


def _default_devices():
    # 165/244/550/872 nH appear in the source measurements; the rest fill the range
    lks = [165.0, 244.0, 320.0, 400.0, 475.0, 550.0, 640.0, 750.0, 872.0]
    return [DeviceEntry(lk) for lk in lks]


@dataclass
class TradeoffSection:
    recovery_points: list[list[float]] = field(default_factory=lambda: [[165.0, 5.99], [872.0, 68.11]])
    devices: list[DeviceEntry] = field(default_factory=_default_devices)


@dataclass
class ReportSection:
    histogram_mu_values: list[float] = field(default_factory=lambda: [1.05, 1.46, 2.55])
    histogram_pulses: int = 1_000_000
    fig3g_gaps_ps: list[float] = field(default_factory=lambda: [49.0, 23.0, 15.0])
    fig3g_sigma1_ps: float = 16.3
    fig3g_mu_eff: float = 2.66


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    fit: FitSection = field(default_factory=FitSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    iat: IatSection = field(default_factory=IatSection)
    tradeoff: TradeoffSection = field(default_factory=TradeoffSection)
    report: ReportSection = field(default_factory=ReportSection)

    def device_params(self) -> list[DetectorParams]:
        return [DetectorParams(d.kinetic_inductance_nH, jitter_fwhm_ps=d.jitter_fwhm_ps)
                for d in self.tradeoff.devices]


# ---------------------------------------------------------------- conversion

def _coerce(value: Any, typ: Any, path: str, errors: list[str]):
    origin = getattr(typ, "__origin__", None)
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{path}: expected a number, got {value!r}")
            return None
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{path}: expected an integer, got {value!r}")
            return None
        return value
    if typ is str:
        if not isinstance(value, str):
            errors.append(f"{path}: expected a string, got {value!r}")
            return None
        return value
    if origin is list:
        if not isinstance(value, list):
            errors.append(f"{path}: expected a list, got {value!r}")
            return None
        (inner,) = typ.__args__
        items = [_coerce(v, inner, f"{path}[{i}]", errors) for i, v in enumerate(value)]
        # malformed entries are already reported; drop them so validation sees real values
        return [v for v in items if v is not None]
    if dataclasses.is_dataclass(typ):
        return _build(typ, value, path, errors)
    raise TypeError(f"unsupported config type {typ!r}")


def _build(cls, data: Any, path: str, errors: list[str]):
    if not isinstance(data, dict):
        errors.append(f"{path}: expected a table, got {data!r}")
        return None
    hints = {f.name: f for f in dataclasses.fields(cls)}
    types = _resolved_types(cls)
    for key in data:
        if key not in hints:
            errors.append(f"{path}.{key}: unknown key" if path else f"{key}: unknown section")
    kwargs = {}
    for name, f in hints.items():
        where = f"{path}.{name}" if path else name
        if name in data:
            kwargs[name] = _coerce(data[name], types[name], where, errors)
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            errors.append(f"{where}: required")
    try:
        return cls(**{k: v for k, v in kwargs.items() if v is not None})
    except TypeError:
        return None


def _resolved_types(cls):
    import typing
    return typing.get_type_hints(cls)


def validate(cfg: RunConfig) -> list[str]:
    e = []
    m = cfg.model
    if not m.mu_eff > 0:
        e.append("model.mu_eff: must be > 0")
    if not m.delta_t12_ps > 0:
        e.append("model.delta_t12_ps: must be > 0")
    if not m.jitter_fwhm_ps > 0:
        e.append("model.jitter_fwhm_ps: must be > 0")
    if not 1 <= m.n_max <= MAX_N_MAX:
        e.append(f"model.n_max: must be in 1..{MAX_N_MAX}")
    if m.width_law not in ("inverse_sqrt", "constant"):
        e.append("model.width_law: must be 'inverse_sqrt' or 'constant'")
    s = cfg.simulate
    if not s.pulses >= 1:
        e.append("simulate.pulses: must be >= 1")
    if not 0 <= s.seed < 2**64:
        e.append("simulate.seed: must be a 64-bit unsigned integer")
    if not s.repetition_rate_hz > 0:
        e.append("simulate.repetition_rate_hz: must be > 0")
    if not s.bin_width_ps > 0:
        e.append("simulate.bin_width_ps: must be > 0")
    if not s.workers >= 1:
        e.append("simulate.workers: must be >= 1")
    f = cfg.fit
    if f.mode not in ("free", "constrained"):
        e.append("fit.mode: must be 'free' or 'constrained'")
    if not f.max_iterations >= 1:
        e.append("fit.max_iterations: must be >= 1")
    if not f.convergence_tol > 0:
        e.append("fit.convergence_tol: must be > 0")
    if not f.smoothing_window_bins >= 1:
        e.append("fit.smoothing_window_bins: must be >= 1")
    w = cfg.sweep
    for name in ("dt_values_ps", "jitter_values_ps", "lk_values_nH"):
        vals = getattr(w, name)
        if not vals or any(v <= 0 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
            e.append(f"sweep.{name}: must be positive and strictly increasing")
    if not w.sqrt_law_points or any(len(p) != 2 or min(p) <= 0 for p in w.sqrt_law_points):
        e.append("sweep.sqrt_law_points: need positive [L_k, delta_t] pairs")
    if not 0 < w.target_quality < 1:
        e.append("sweep.target_quality: must lie in (0, 1)")
    i = cfg.iat
    if not i.cw_rate_hz > 0:
        e.append("iat.cw_rate_hz: must be > 0")
    if not i.events >= 100:
        e.append("iat.events: must be >= 100")
    if not i.exponent > 0:
        e.append("iat.exponent: must be > 0")
    if not i.bin_width_ps > 0:
        e.append("iat.bin_width_ps: must be > 0")
    if not i.lk_values_nH or any(v <= 0 for v in i.lk_values_nH):
        e.append("iat.lk_values_nH: must be positive")
    t = cfg.tradeoff
    rp = t.recovery_points
    if len(rp) != 2 or any(len(p) != 2 or min(p) <= 0 for p in rp) or (len(rp) == 2 and rp[0][0] == rp[1][0]):
        e.append("tradeoff.recovery_points: need two positive [L_k, tau_rec] pairs at distinct L_k")
    if not t.devices:
        e.append("tradeoff.devices: need at least one device")
    for k, d in enumerate(t.devices):
        if not d.kinetic_inductance_nH > 0:
            e.append(f"tradeoff.devices[{k}].kinetic_inductance_nH: must be > 0")
        if not d.jitter_fwhm_ps > 0:
            e.append(f"tradeoff.devices[{k}].jitter_fwhm_ps: must be > 0")
    r = cfg.report
    if not r.histogram_mu_values or any(v <= 0 for v in r.histogram_mu_values):
        e.append("report.histogram_mu_values: must be positive")
    if not r.histogram_pulses >= 1:
        e.append("report.histogram_pulses: must be >= 1")
    if not r.fig3g_gaps_ps or any(v <= 0 for v in r.fig3g_gaps_ps):
        e.append("report.fig3g_gaps_ps: must be positive")
    if not r.fig3g_sigma1_ps > 0:
        e.append("report.fig3g_sigma1_ps: must be > 0")
    if not r.fig3g_mu_eff > 0:
        e.append("report.fig3g_mu_eff: must be > 0")
    return e


def from_dict(data: dict) -> RunConfig:
    errors: list[str] = []
    cfg = _build(RunConfig, data, "", errors)
    if cfg is None:
        raise ConfigError(errors or ["invalid configuration"])
    # fields that failed to parse kept their defaults, so value checks still see the rest
    errors += validate(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
    return from_dict(data)


def to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))
