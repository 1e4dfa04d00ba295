"""High-rate power trace processing: exact rectangular integration,
per-kernel segmentation, ramp-up detection, and a simulator for the coarse
built-in current sensors that phones expose.

Power is in mW, time in seconds, energy in mJ (mW * s). Sample k holds over
[t0 + k/rate, t0 + (k+1)/rate); a window's energy is the sum of sample powers
weighted by their overlap with the window, so boundary samples contribute
fractionally. Sums use math.fsum, so whenever the individual contributions
are exactly representable the result is too, and adjacent windows add up
bit-exactly.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field


class TraceError(ValueError):
    pass


@dataclass
class PowerTrace:
    sample_rate: float              # Hz
    samples_mw: list[float]
    t0: float = 0.0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise TraceError(f"sample_rate must be > 0, got {self.sample_rate}")
        if not self.samples_mw:
            raise TraceError("trace has no samples")
        for i, p in enumerate(self.samples_mw):
            if p < 0:
                raise TraceError(f"sample {i} is negative ({p} mW)")

    @property
    def duration_s(self) -> float:
        return len(self.samples_mw) / self.sample_rate

    @property
    def end_s(self) -> float:
        return self.t0 + self.duration_s

    def sample_start(self, k: int) -> float:
        return self.t0 + k / self.sample_rate


@dataclass(frozen=True)
class KernelWindow:
    kernel_index: int
    start_s: float
    duration_s: float

    def __post_init__(self):
        if self.duration_s <= 0:
            raise TraceError(f"window {self.kernel_index}: duration must be > 0")

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class SegmentEnergy:
    kernel_index: int
    energy_mj: float
    avg_power_mw: float


@dataclass(frozen=True)
class RampUpReport:
    ramp_duration_s: float
    ramp_mean_power_mw: float
    flat_mean_power_mw: float
    settled: bool


def integrate_energy(trace: PowerTrace, start_s: float, duration_s: float) -> float:
    """Energy in mJ over [start_s, start_s + duration_s], rectangular rule."""
    if duration_s <= 0:
        raise TraceError(f"duration must be > 0, got {duration_s}")
    end_s = start_s + duration_s
    if start_s < trace.t0 or end_s > trace.end_s:
        raise TraceError(
            f"window [{start_s}, {end_s}] exceeds trace extent "
            f"[{trace.t0}, {trace.end_s}]")
    rate = trace.sample_rate
    k_first = max(0, math.floor((start_s - trace.t0) * rate))
    k_last = min(len(trace.samples_mw) - 1, math.ceil((end_s - trace.t0) * rate))
    parts = []
    for k in range(k_first, k_last + 1):
        s = trace.sample_start(k)
        e = trace.sample_start(k + 1)
        lo = s if s > start_s else start_s
        hi = e if e < end_s else end_s
        if hi > lo:
            parts.append(trace.samples_mw[k] * (hi - lo))
    return math.fsum(parts)


def segment_kernels(trace: PowerTrace, windows: list[KernelWindow]) -> list[SegmentEnergy]:
    prev_end = None
    for w in windows:
        if prev_end is not None and w.start_s < prev_end:
            raise TraceError(
                f"window {w.kernel_index} starts at {w.start_s} before previous "
                f"window ends at {prev_end}")
        prev_end = w.end_s
    out = []
    for w in windows:
        e = integrate_energy(trace, w.start_s, w.duration_s)
        out.append(SegmentEnergy(w.kernel_index, e, e / w.duration_s))
    return out


def detect_ramp_up(trace: PowerTrace, window: KernelWindow,
                   settle_tolerance: float = 0.05,
                   settle_span_s: float = 0.005) -> RampUpReport:
    """Time from window start until power first stays inside the settle band.

    The band is +-settle_tolerance around the median of the window's final
    settle_span_s. The ramp ends at the earliest instant t where every sample
    in [t, t + settle_span_s] sits inside the band. If no such t exists the
    full window is reported as ramp and the result is flagged unsettled.
    """
    if settle_tolerance <= 0 or settle_span_s <= 0:
        raise TraceError("settle_tolerance and settle_span_s must be > 0")
    if settle_span_s > window.duration_s:
        raise TraceError("settle span exceeds window duration")
    rate = trace.sample_rate

    def samples_in(lo: float, hi: float) -> list[float]:
        k0 = max(0, math.floor((lo - trace.t0) * rate))
        k1 = min(len(trace.samples_mw), math.ceil((hi - trace.t0) * rate))
        vals = []
        for k in range(k0, k1):
            s = trace.sample_start(k)
            e = trace.sample_start(k + 1)
            if e > lo and s < hi:
                vals.append(trace.samples_mw[k])
        return vals

    tail = samples_in(window.end_s - settle_span_s, window.end_s)
    if not tail:
        raise TraceError("no samples in the settle reference span")
    center = statistics.median(tail)
    lo_band = center * (1 - settle_tolerance)
    hi_band = center * (1 + settle_tolerance)

    def span_ok(t: float) -> bool:
        return all(lo_band <= v <= hi_band
                   for v in samples_in(t, t + settle_span_s))

    # candidate settle starts: window start, then each sample boundary inside
    limit = window.end_s - settle_span_s
    candidates = [window.start_s]
    k = math.floor((window.start_s - trace.t0) * rate) + 1
    while True:
        t = trace.sample_start(k)
        if t > limit:
            break
        if t > candidates[-1]:
            candidates.append(t)
        k += 1
    for t in candidates:
        if span_ok(t):
            ramp = t - window.start_s
            flat_mean = integrate_energy(trace, t, window.end_s - t) / (window.end_s - t)
            ramp_mean = (integrate_energy(trace, window.start_s, ramp) / ramp
                         if ramp > 0 else 0.0)
            return RampUpReport(ramp, ramp_mean, flat_mean, settled=True)
    mean = integrate_energy(trace, window.start_s, window.duration_s) / window.duration_s
    return RampUpReport(window.duration_s, mean, mean, settled=False)


def simulate_bic_sensor(trace: PowerTrace, sensor_period_s: float,
                        phase_s: float = 0.0) -> PowerTrace:
    """Point-sample the trace at phase + k*period, nearest-sample lookup."""
    if sensor_period_s <= 0:
        raise TraceError("sensor period must be > 0")
    if phase_s < 0:
        raise TraceError("phase must be >= 0")
    picks = []
    k = 0
    n = len(trace.samples_mw)
    while True:
        t = trace.t0 + phase_s + k * sensor_period_s
        if t >= trace.end_s:
            break
        idx = int(round((t - trace.t0) * trace.sample_rate))
        idx = min(max(idx, 0), n - 1)
        picks.append(trace.samples_mw[idx])
        k += 1
    if not picks:
        raise TraceError("no sensor sample lands inside the trace")
    return PowerTrace(sample_rate=1.0 / sensor_period_s,
                      samples_mw=picks,
                      t0=trace.t0 + phase_s)


def sensor_energy_estimate(sensor: PowerTrace, start_s: float, duration_s: float) -> float:
    """Energy estimate from a coarse sensor: mean of in-window samples * duration."""
    if duration_s <= 0:
        raise TraceError("duration must be > 0")
    end_s = start_s + duration_s
    vals = []
    for k in range(len(sensor.samples_mw)):
        t = sensor.sample_start(k)
        if start_s <= t < end_s:
            vals.append(sensor.samples_mw[k])
    if not vals:
        raise TraceError(
            f"no sensor sample lands in window [{start_s}, {end_s}]")
    return (math.fsum(vals) / len(vals)) * duration_s


TRACE_HEADER = ("time_s", "power_mw")
WINDOW_HEADER = ("kernel_index", "start_s", "duration_s")


def trace_to_csv(trace: PowerTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for k, p in enumerate(trace.samples_mw):
        w.writerow([repr(trace.sample_start(k)), repr(p)])
    return buf.getvalue()


def trace_from_csv(text: str) -> PowerTrace:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != list(TRACE_HEADER):
        raise TraceError(f"trace file must start with header {','.join(TRACE_HEADER)}")
    times, powers = [], []
    for i, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise TraceError(f"trace line {i}: expected 2 columns, got {len(row)}")
        try:
            times.append(float(row[0]))
            powers.append(float(row[1]))
        except ValueError as e:
            raise TraceError(f"trace line {i}: {e}") from e
    if len(times) < 2:
        raise TraceError("trace needs at least 2 samples")
    step = times[1] - times[0]
    if step <= 0:
        raise TraceError("trace time must be strictly increasing")
    for i in range(1, len(times)):
        d = times[i] - times[i - 1]
        if abs(d - step) > 1e-9 * max(1.0, abs(step)):
            raise TraceError(
                f"trace line {i + 2}: non-constant time step ({d} vs {step})")
    return PowerTrace(sample_rate=1.0 / step, samples_mw=powers, t0=times[0])


def windows_to_csv(windows: list[KernelWindow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(WINDOW_HEADER)
    for win in windows:
        w.writerow([win.kernel_index, repr(win.start_s), repr(win.duration_s)])
    return buf.getvalue()


def windows_from_csv(text: str) -> list[KernelWindow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != list(WINDOW_HEADER):
        raise TraceError(f"window file must start with header {','.join(WINDOW_HEADER)}")
    out = []
    for i, row in enumerate(reader, start=2):
        try:
            out.append(KernelWindow(int(row["kernel_index"]),
                                    float(row["start_s"]),
                                    float(row["duration_s"])))
        except (TypeError, ValueError) as e:
            raise TraceError(f"window line {i}: {e}") from e
    return out
