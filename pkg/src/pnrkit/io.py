"""File formats: JSON documents, delimited sample dumps, time tags and result tables.

Floats are written with Python's shortest round-trip ``repr`` so every format
reads back bit-exact.
"""

from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .multigauss import MultiGaussianModel
from .simulate import Histogram, LatencySamples
from .sweep import SweepResult, TradeoffRow

TIMETAG_VERSION_LINE = "#pnrkit-timetags v1"
TIMETAG_HEADER = "channel,timestamp_ps"
SAMPLES_HEADER = "pulse_index,n_true,latency_ps"
SAMPLES_HEADER_BLIND = "pulse_index,latency_ps"


class InputError(ValueError):
    """Malformed or inconsistent input data."""


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_json(path, doc: dict) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def load_model(path) -> MultiGaussianModel:
    doc = read_json(path)
    if doc.get("format") == "pnrkit-fit":
        doc = doc["model"]
    return MultiGaussianModel.from_dict(doc)


def load_histogram(path) -> Histogram:
    return Histogram.from_dict(read_json(path))


# -------------------------------------------------------------- sample dumps

def write_samples(out: TextIO, samples: LatencySamples, blind: bool = False) -> None:
    """One event per line; ``blind`` drops the true photon number."""
    out.write(f"# pulses={samples.pulses}\n")
    if blind:
        out.write(SAMPLES_HEADER_BLIND + "\n")
        out.writelines(f"{i},{t!r}\n" for i, t in zip(samples.pulse_index.tolist(),
                                                       samples.latency_ps.tolist()))
    else:
        out.write(SAMPLES_HEADER + "\n")
        out.writelines(f"{i},{n},{t!r}\n" for i, n, t in zip(samples.pulse_index.tolist(),
                                                            samples.n_true.tolist(),
                                                            samples.latency_ps.tolist()))


def read_samples(src: TextIO) -> LatencySamples:
    pulses = None
    header = None
    for line in src:
        line = line.strip()
        if line.startswith("# pulses="):
            pulses = int(line.split("=", 1)[1])
        elif line.startswith("#") or not line:
            continue
        else:
            header = line
            break
    if header not in (SAMPLES_HEADER, SAMPLES_HEADER_BLIND):
        raise InputError(f"unrecognised sample header {header!r}")
    data = np.loadtxt(src, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.empty((0, 3 if header == SAMPLES_HEADER else 2))
    idx = data[:, 0].astype(np.int64)
    if header == SAMPLES_HEADER:
        n_true, lat = data[:, 1].astype(np.int64), data[:, 2]
    else:
        n_true, lat = np.full(len(idx), -1, dtype=np.int64), data[:, 1]
    if pulses is None:
        pulses = int(idx.max()) + 1 if len(idx) else 0
    return LatencySamples(idx, n_true, lat, pulses)


# ----------------------------------------------------------------- time tags

@dataclass(frozen=True)
class TimeTagRecord:
    channel: int
    timestamp_ps: int


@dataclass(frozen=True)
class TimeTags:
    """Column-oriented time-tag stream."""

    channel: np.ndarray
    timestamp_ps: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channel, dtype=np.int64)
        ts = np.asarray(self.timestamp_ps, dtype=np.int64)
        if ch.shape != ts.shape:
            raise InputError("channel and timestamp columns differ in length")
        for c in np.unique(ch):
            if np.any(np.diff(ts[ch == c]) < 0):
                raise InputError(f"timestamps decrease on channel {int(c)}")
        object.__setattr__(self, "channel", ch)
        object.__setattr__(self, "timestamp_ps", ts)

    @classmethod
    def from_records(cls, records: Iterable[TimeTagRecord]) -> "TimeTags":
        recs = list(records)
        return cls(np.array([r.channel for r in recs], dtype=np.int64),
                   np.array([r.timestamp_ps for r in recs], dtype=np.int64))

    def records(self) -> list[TimeTagRecord]:
        return [TimeTagRecord(int(c), int(t)) for c, t in zip(self.channel, self.timestamp_ps)]

    def __len__(self):
        return len(self.channel)


def write_timetags(out: TextIO, tags: TimeTags) -> None:
    out.write(TIMETAG_VERSION_LINE + "\n" + TIMETAG_HEADER + "\n")
    out.writelines(f"{c},{t}\n" for c, t in zip(tags.channel.tolist(), tags.timestamp_ps.tolist()))


def read_timetags(src: TextIO) -> TimeTags:
    first = src.readline().strip()
    if first != TIMETAG_VERSION_LINE:
        raise InputError(f"expected {TIMETAG_VERSION_LINE!r}, got {first!r}")
    header = src.readline().strip()
    if header != TIMETAG_HEADER:
        raise InputError(f"expected header {TIMETAG_HEADER!r}, got {header!r}")
    data = np.loadtxt(src, delimiter=",", dtype=np.int64, ndmin=2)
    if data.size == 0:
        return TimeTags(np.empty(0, np.int64), np.empty(0, np.int64))
    return TimeTags(data[:, 0], data[:, 1])


def latencies_from_timetags(tags: TimeTags | Sequence[TimeTagRecord], trigger_channel: int,
                            detector_channel: int) -> tuple[np.ndarray, int]:
    """Start-stop latencies: each detector event minus the latest trigger at or before it.

    Returns ``(latencies_ps, dropped)`` where ``dropped`` counts detector
    events preceding the first trigger.
    """
    if not isinstance(tags, TimeTags):
        tags = TimeTags.from_records(tags)
    present = set(np.unique(tags.channel).tolist())
    missing = [c for c in (trigger_channel, detector_channel) if c not in present]
    if missing:
        raise InputError(f"channel(s) {missing} not present in the time-tag stream")
    trig = tags.timestamp_ps[tags.channel == trigger_channel]
    det = tags.timestamp_ps[tags.channel == detector_channel]
    k = np.searchsorted(trig, det, side="right") - 1
    dropped = int(np.count_nonzero(k < 0))
    if dropped:
        warnings.warn(f"{dropped} detector event(s) before the first trigger dropped",
                      RuntimeWarning, stacklevel=2)
    ok = k >= 0
    return det[ok] - trig[k[ok]], dropped


def synthesize_timetags(samples: LatencySamples, repetition_rate_hz: float = 1e6,
                        offset_ps: int = 100_000, trigger_channel: int = 1,
                        detector_channel: int = 2) -> TimeTags:
    """Time-tag stream for simulated pulses; latencies are rounded to whole ps."""
    period = 1e12 / repetition_rate_hz
    if not period == int(period):
        raise InputError("repetition period must be a whole number of ps")
    period = int(period)
    trig = np.arange(samples.pulses, dtype=np.int64) * period
    det = trig[samples.pulse_index] + offset_ps + np.rint(samples.latency_ps).astype(np.int64)
    ch = np.concatenate([np.full(len(trig), trigger_channel), np.full(len(det), detector_channel)])
    ts = np.concatenate([trig, det])
    order = np.argsort(ts, kind="stable")
    return TimeTags(ch[order], ts[order])


# -------------------------------------------------------------------- tables

def sweep_table(result: SweepResult) -> str:
    cols = [result.axis_name] + [f"Q_{n}" for n in range(1, result.n_max + 1)]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for j, x in enumerate(result.axis_values.tolist()):
        row = [repr(x)] + [repr(float(v)) for v in result.quality_per_n[:, j]]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def read_sweep_table(text: str, metadata: dict | None = None) -> SweepResult:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return SweepResult(head[0], data[:, 0], data[:, 1:].T.copy(), dict(metadata or {}))


def tradeoff_table(rows: Sequence[TradeoffRow]) -> str:
    n = len(rows[0].quality_per_n)
    cols = ["kinetic_inductance_nH", "delta_t12_ps"] + [f"Q_{k}" for k in range(1, n + 1)] + [
        "tau_rec_ns", "max_rate_hz"]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for r in rows:
        vals = [r.kinetic_inductance_nH, r.delta_t12_ps, *r.quality_per_n, r.tau_rec_ns, r.max_rate_hz]
        buf.write(",".join(repr(float(v)) for v in vals) + "\n")
    return buf.getvalue()


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Generic CSV writer with lossless float rendering."""
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        return str(v)
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")
