"""Synthetic measurement campaign: kernel/model/app energy records, their CSV
formats, the config sampler, model variant generation, and a closed-form
energy oracle that stands in for a powered-up device.

The oracle's per-family form is E = a*core + b*vol3 + c where core is the
family's arithmetic term (quadratic in KS, linear in channels) and vol3 is a
cubic-in-hw working-set term that captures the superlinear growth published
for large feature maps. Labels can carry multiplicative noise; ground-truth
queries never do.

Measurement traces mimic a benchmarking loop: each kernel run opens with a
boosted power segment (DVFS transient) whose tail is compensated so the
window energy equals the oracle value exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .forest import derived_seed
from .fusion import (KernelInstance, KernelSequence, config_arity,
                     config_family, config_from_columns, config_to_columns,
                     kernel_signature)
from .graph import (ModelGraph, TensorShape, copy_graph, op_output_shape,
                    topological_order)
from .trace import (KernelWindow, PowerTrace, integrate_energy,
                    sensor_energy_estimate, simulate_bic_sensor)

HW_CHOICES = (1, 7, 8, 13, 14, 27, 28, 32, 56, 112, 224)
KS_CHOICES = (1, 3, 5, 7, 9)
STRIDE_CHOICES = (1, 2, 4)
CHANNEL_LO, CHANNEL_HI = 8, 1024

PROCESSORS = ("cpu", "gpu")
DELEGATES = ("cpu1", "cpu4", "gpu", "nnapi")

# Reference workload matrix: which delegates each benchmark DNN supports.
DNN_DELEGATES = {
    "dnn1": ("cpu1", "cpu4", "nnapi"),
    "dnn2": ("cpu1", "cpu4", "nnapi"),
    "dnn3": ("cpu1", "cpu4", "nnapi"),
    "dnn4": ("cpu1", "cpu4", "nnapi"),
    "dnn5": ("cpu1", "cpu4", "gpu", "nnapi"),
    "dnn6": ("cpu1", "cpu4", "nnapi"),
    "dnn7": ("cpu1", "cpu4", "gpu", "nnapi"),
    "dnn8": ("cpu1", "cpu4", "nnapi"),
    "dnn9": ("cpu1", "gpu"),
    "dnn10": ("cpu4",),
    "dnn11": ("cpu1", "cpu4", "nnapi"),
    "dnn12": ("cpu1", "cpu4", "nnapi"),
}

DNN_APPLICATION = {
    "dnn1": "image_detection",
    "dnn2": "image_detection",
    "dnn3": "image_detection",
    "dnn4": "image_detection",
    "dnn5": "image_classification",
    "dnn6": "image_classification",
    "dnn7": "image_classification",
    "dnn8": "image_classification",
    "dnn9": "super_resolution",
    "dnn10": "image_segmentation",
    "dnn11": "question_answering",
    "dnn12": "speech_recognition",
}

APPLICATIONS = tuple(sorted(set(DNN_APPLICATION.values())))


class DatasetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# records

@dataclass
class KernelEnergyRecord:
    device: str
    processor: str
    kernel_type: str
    config: tuple[int, ...]
    energy_mj: float
    latency_ms: float | None = None
    avg_power_mw: float | None = None

    def signature(self) -> str:
        return kernel_signature(self.kernel_type, self.config)

    def validate(self, where: str = "record"):
        if self.processor not in PROCESSORS:
            raise DatasetError(f"{where}: unknown processor {self.processor!r}")
        if self.energy_mj <= 0:
            raise DatasetError(f"{where}: energy must be > 0, got {self.energy_mj}")
        if len(self.config) != config_arity(self.kernel_type):
            raise DatasetError(
                f"{where}: {self.kernel_type} expects "
                f"{config_arity(self.kernel_type)} config entries, got {len(self.config)}")
        if self.latency_ms is not None and self.avg_power_mw is not None:
            implied = self.avg_power_mw * self.latency_ms / 1000.0
            if abs(self.energy_mj - implied) > 0.01 * self.energy_mj:
                raise DatasetError(
                    f"{where}: energy {self.energy_mj} inconsistent with "
                    f"power*latency {implied}")


@dataclass
class ModelEnergyRecord:
    device: str
    processor: str
    model_family: str
    variant_id: str
    energy_mj: float
    flops: int
    kernel_seq: str  # path to the kernel sequence file, relative to the csv

    def validate(self, where: str = "record"):
        if self.processor not in PROCESSORS:
            raise DatasetError(f"{where}: unknown processor {self.processor!r}")
        if self.energy_mj <= 0:
            raise DatasetError(f"{where}: energy must be > 0")
        if self.flops <= 0:
            raise DatasetError(f"{where}: flops must be > 0")


@dataclass
class AppEnergyRecord:
    device: str
    application: str
    dnn_id: str
    delegate: str
    avg_power_mw: float
    latency_ms: float
    energy_mj: float

    def validate(self, where: str = "record"):
        if self.dnn_id not in DNN_DELEGATES:
            raise DatasetError(f"{where}: unknown dnn_id {self.dnn_id!r}")
        if self.delegate not in DELEGATES:
            raise DatasetError(f"{where}: unknown delegate {self.delegate!r}")
        if self.delegate not in DNN_DELEGATES[self.dnn_id]:
            raise DatasetError(
                f"{where}: delegate {self.delegate!r} not supported by {self.dnn_id}")
        if self.application != DNN_APPLICATION[self.dnn_id]:
            raise DatasetError(
                f"{where}: {self.dnn_id} belongs to {DNN_APPLICATION[self.dnn_id]!r}, "
                f"not {self.application!r}")
        if self.energy_mj <= 0 or self.avg_power_mw <= 0 or self.latency_ms <= 0:
            raise DatasetError(f"{where}: energy, power and latency must be > 0")


# ---------------------------------------------------------------------------
# kernel dataset CSV

KERNEL_HEADER = ("device", "processor", "kernel_type", "hw", "cin", "cout",
                 "ks", "stride", "cin2", "cin3", "cin4",
                 "energy_mj", "latency_ms", "avg_power_mw")


def kernel_records_to_csv(records: list[KernelEnergyRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=KERNEL_HEADER, lineterminator="\n")
    w.writeheader()
    for r in records:
        row = {name: "" for name in KERNEL_HEADER}
        row["device"] = r.device
        row["processor"] = r.processor
        row["kernel_type"] = r.kernel_type
        row.update({k: str(v) for k, v in
                    config_to_columns(r.kernel_type, r.config).items()})
        row["energy_mj"] = repr(r.energy_mj)
        row["latency_ms"] = "" if r.latency_ms is None else repr(r.latency_ms)
        row["avg_power_mw"] = "" if r.avg_power_mw is None else repr(r.avg_power_mw)
        w.writerow(row)
    return buf.getvalue()


def load_kernel_dataset(text: str) -> list[KernelEnergyRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != list(KERNEL_HEADER):
        raise DatasetError(
            f"kernel dataset must start with header {','.join(KERNEL_HEADER)}")
    records = []
    seen: set[tuple[str, str, str]] = set()
    for lineno, row in enumerate(reader, start=2):
        where = f"line {lineno}"
        try:
            ktype = row["kernel_type"]
            config = config_from_columns(ktype, row)
            rec = KernelEnergyRecord(
                device=row["device"],
                processor=row["processor"],
                kernel_type=ktype,
                config=config,
                energy_mj=float(row["energy_mj"]),
                latency_ms=float(row["latency_ms"]) if row["latency_ms"] else None,
                avg_power_mw=float(row["avg_power_mw"]) if row["avg_power_mw"] else None,
            )
        except DatasetError:
            raise
        except (KeyError, ValueError) as e:
            raise DatasetError(f"{where}: {e}") from e
        rec.validate(where)
        key = (rec.device, rec.processor, rec.signature())
        if key in seen:
            raise DatasetError(f"{where}: duplicate record for {key}")
        seen.add(key)
        records.append(rec)
    return records


MODEL_HEADER = ("device", "processor", "model_family", "variant_id",
                "energy_mj", "flops", "kernel_seq")


def model_records_to_csv(records: list[ModelEnergyRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MODEL_HEADER)
    for r in records:
        w.writerow([r.device, r.processor, r.model_family, r.variant_id,
                    repr(r.energy_mj), r.flops, r.kernel_seq])
    return buf.getvalue()


def load_model_dataset(text: str) -> list[ModelEnergyRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != list(MODEL_HEADER):
        raise DatasetError(
            f"model dataset must start with header {','.join(MODEL_HEADER)}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        try:
            rec = ModelEnergyRecord(
                device=row["device"], processor=row["processor"],
                model_family=row["model_family"], variant_id=row["variant_id"],
                energy_mj=float(row["energy_mj"]), flops=int(row["flops"]),
                kernel_seq=row["kernel_seq"])
        except (KeyError, ValueError, TypeError) as e:
            raise DatasetError(f"line {lineno}: {e}") from e
        rec.validate(f"line {lineno}")
        records.append(rec)
    return records


APP_HEADER = ("device", "application", "dnn_id", "delegate",
              "avg_power_mw", "latency_ms", "energy_mj")


def app_records_to_csv(records: list[AppEnergyRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(APP_HEADER)
    for r in records:
        w.writerow([r.device, r.application, r.dnn_id, r.delegate,
                    repr(r.avg_power_mw), repr(r.latency_ms), repr(r.energy_mj)])
    return buf.getvalue()


def load_app_dataset(text: str) -> list[AppEnergyRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != list(APP_HEADER):
        raise DatasetError(f"app dataset must start with header {','.join(APP_HEADER)}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        try:
            rec = AppEnergyRecord(
                device=row["device"], application=row["application"],
                dnn_id=row["dnn_id"], delegate=row["delegate"],
                avg_power_mw=float(row["avg_power_mw"]),
                latency_ms=float(row["latency_ms"]),
                energy_mj=float(row["energy_mj"]))
        except (KeyError, ValueError, TypeError) as e:
            raise DatasetError(f"line {lineno}: {e}") from e
        rec.validate(f"line {lineno}")
        records.append(rec)
    return records


# ---------------------------------------------------------------------------
# config sampling

def _log_uniform_channel(rng) -> int:
    u = rng.uniform(math.log(CHANNEL_LO), math.log(CHANNEL_HI))
    return min(max(int(round(math.exp(u))), CHANNEL_LO), CHANNEL_HI)


def _domain_size(kernel_type: str) -> int:
    nch = CHANNEL_HI - CHANNEL_LO + 1
    fam = config_family(kernel_type)
    if fam == "fc":
        return nch * nch
    total = 0
    for hw in HW_CHOICES:
        ks_n = sum(1 for k in KS_CHOICES if k <= hw)
        s_n = sum(1 for s in STRIDE_CHOICES if s <= hw)
        if fam == "conv":
            total += ks_n * s_n * nch * nch
        elif fam in ("dwconv", "pool"):
            total += ks_n * s_n * nch
        elif fam == "concat":
            total += nch ** 2 + nch ** 3 + nch ** 4
        else:  # globalpool / elementwise
            total += nch
    return total


def _sample_one(kernel_type: str, rng) -> tuple[int, ...]:
    fam = config_family(kernel_type)
    if fam == "fc":
        return (_log_uniform_channel(rng), _log_uniform_channel(rng))
    hw = int(rng.choice(HW_CHOICES))
    if fam in ("conv", "dwconv", "pool"):
        ks = int(rng.choice([k for k in KS_CHOICES if k <= hw]))
        stride = int(rng.choice([s for s in STRIDE_CHOICES if s <= hw]))
        if fam == "conv":
            return (hw, _log_uniform_channel(rng), _log_uniform_channel(rng), ks, stride)
        return (hw, _log_uniform_channel(rng), ks, stride)
    if fam == "concat":
        m = int(rng.integers(2, 5))
        chans = [_log_uniform_channel(rng) for _ in range(m)] + [0] * (4 - m)
        return (hw, *chans)
    return (hw, _log_uniform_channel(rng))


def sample_kernel_configs(kernel_type: str, n: int, seed: int) -> list[tuple[int, ...]]:
    """n distinct config tuples for the kernel type, deterministic per seed."""
    if n < 1:
        raise DatasetError("n must be >= 1")
    if n > 1_000_000:
        raise DatasetError("n too large")
    size = _domain_size(kernel_type)
    if n > size:
        raise DatasetError(
            f"domain exhausted: {kernel_type} has {size} distinct configs, requested {n}")
    rng = np.random.default_rng(derived_seed(seed, "configs", kernel_type))
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []
    while len(out) < n:
        cfg = _sample_one(kernel_type, rng)
        if cfg not in seen:
            seen.add(cfg)
            out.append(cfg)
    return out


# ---------------------------------------------------------------------------
# model variants

def generate_model_variants(base: ModelGraph, count: int, seed: int,
                            padding: str = "same") -> list[ModelGraph]:
    """Resample every conv layer's Cout over [0.2, 1.8]x the base value and
    every conv/dwconv kernel size from the standard set (clipped to the
    layer's input hw). Downstream channel counts follow by inference."""
    variants = []
    for i in range(count):
        rng = np.random.default_rng(derived_seed(seed, base.name, "variant", i))
        g = copy_graph(base)
        g.name = f"{base.name}_v{i}"
        for op in g.ops:
            op.hw = None
            op.cin = None
        # one incremental pass: mutate each layer before computing its output
        # shape, so every layer sees its post-mutation input hw
        outs: dict[str, TensorShape] = {}
        for op in topological_order(g):
            feeds = [g.input_shape] if not op.inputs else [outs[r] for r in op.inputs]
            hw = feeds[0].hw
            if op.kind == "conv":
                base_cout = base.op(op.id).cout
                lo = max(1, math.ceil(0.2 * base_cout))
                hi = max(lo, math.floor(1.8 * base_cout))
                op.cout = int(rng.integers(lo, hi + 1))
                op.ks = int(rng.choice([k for k in KS_CHOICES if k <= hw]))
            elif op.kind == "dwconv":
                op.ks = int(rng.choice([k for k in KS_CHOICES if k <= hw]))
            outs[op.id] = op_output_shape(op, feeds, padding)
        variants.append(g)
    return variants


# ---------------------------------------------------------------------------
# the oracle

DEFAULT_COEFFICIENTS = {
    "cpu": {
        "conv": (1.25e-8, 6.0e-9, 0.02),
        "dwconv": (6.0e-8, 2.0e-9, 0.01),
        "pool": (4.0e-8, 0.0, 0.01),
        "globalpool": (1.0e-6, 0.0, 0.005),
        "fc": (5.0e-8, 2.0e-6, 0.01),
        "concat": (5.0e-8, 0.0, 0.005),
        "elementwise": (2.0e-7, 0.0, 0.005),
    },
    "gpu": {
        "conv": (1.0185e-9, 6.6667e-10, 0.008),
        "dwconv": (6.0e-9, 1.5e-9, 0.006),
        "pool": (4.0e-9, 8.0e-10, 0.004),
        "globalpool": (2.0e-7, 0.0, 0.003),
        "fc": (1.2e-8, 3.0e-6, 0.006),
        "concat": (1.5e-8, 0.0, 0.003),
        "elementwise": (5.0e-8, 0.0, 0.003),
    },
}

DEFAULT_FLAT_POWER_MW = {"cpu": 2000.0, "gpu": 3000.0}


@dataclass
class SyntheticOracle:
    processor: str = "cpu"
    coefficients: dict = field(default_factory=dict)
    flat_power_mw: float = 0.0
    noise_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.processor not in PROCESSORS:
            raise DatasetError(f"unknown processor {self.processor!r}")
        if not self.coefficients:
            self.coefficients = dict(DEFAULT_COEFFICIENTS[self.processor])
        if not self.flat_power_mw:
            self.flat_power_mw = DEFAULT_FLAT_POWER_MW[self.processor]
        if not (0.0 <= self.noise_fraction <= 0.1):
            raise DatasetError(
                f"noise_fraction must be in [0, 0.1], got {self.noise_fraction}")


def _oracle_terms(k: KernelInstance) -> tuple[str, float, float]:
    """(family, core term, cubic working-set term) for the oracle form."""
    fam = config_family(k.kernel_type)
    if fam == "conv":
        hw, cin, cout, ks, stride = k.config
        o = math.ceil(hw / stride)
        return fam, float(o * o * ks * ks * cin * cout), float(o ** 3 * cout)
    if fam == "dwconv":
        hw, cin, ks, stride = k.config
        o = math.ceil(hw / stride)
        return fam, float(o * o * ks * ks * cin), float(o ** 3 * cin)
    if fam == "pool":
        hw, cin, ks, stride = k.config
        o = math.ceil(hw / stride)
        return fam, float(o * o * ks * ks * cin), float(o ** 3 * cin)
    if fam == "globalpool":
        hw, cin = k.config
        return fam, float(hw * hw * cin), 0.0
    if fam == "fc":
        cin, cout = k.config
        return fam, float(cin * cout), float(cout)
    if fam == "concat":
        hw = k.config[0]
        return fam, float(hw * hw * sum(k.config[1:])), 0.0
    hw, cin = k.config
    return "elementwise", float(hw * hw * cin), 0.0


def synth_energy(oracle: SyntheticOracle, k: KernelInstance) -> float:
    """Deterministic ground-truth energy in mJ. Never noisy."""
    fam, core, vol3 = _oracle_terms(k)
    if fam not in oracle.coefficients:
        raise DatasetError(
            f"oracle has no coefficients for kernel type {k.kernel_type!r} (family {fam})")
    a, b, c = oracle.coefficients[fam]
    e = a * core + b * vol3 + c
    if e <= 0:
        raise DatasetError(f"oracle produced non-positive energy for {k.signature()}")
    return e


def noisy_energy(oracle: SyntheticOracle, k: KernelInstance, tag) -> float:
    """Label with multiplicative noise in [1-nf, 1+nf]; for record generation."""
    e = synth_energy(oracle, k)
    if oracle.noise_fraction == 0.0:
        return e
    rng = np.random.default_rng(derived_seed(oracle.seed, "noise", tag, k.signature()))
    return e * (1.0 + oracle.noise_fraction * rng.uniform(-1.0, 1.0))


def model_energy(oracle: SyntheticOracle, seq: KernelSequence) -> float:
    return math.fsum(synth_energy(oracle, k) for k in seq)


def latency_s(oracle: SyntheticOracle, energy_mj: float) -> float:
    return energy_mj / oracle.flat_power_mw


def make_kernel_records(oracle: SyntheticOracle, counts: dict[str, int],
                        device: str, seed: int) -> list[KernelEnergyRecord]:
    records = []
    for ktype in counts:
        for i, cfg in enumerate(sample_kernel_configs(ktype, counts[ktype], seed)):
            k = KernelInstance(ktype, cfg)
            e_true = synth_energy(oracle, k)
            e_label = noisy_energy(oracle, k, i)
            lat_ms = latency_s(oracle, e_true) * 1000.0
            records.append(KernelEnergyRecord(
                device=device, processor=oracle.processor,
                kernel_type=ktype, config=cfg,
                energy_mj=e_label, latency_ms=lat_ms,
                avg_power_mw=e_label / (lat_ms / 1000.0)))
    return records


# ---------------------------------------------------------------------------
# trace synthesis

def _shaped_segments(energy_mj: float, duration_s: float,
                     ramp_duration_s: float, ramp_gain: float):
    """Piecewise-constant power segments: boosted head, compensated tail."""
    if ramp_gain < 1.0:
        raise DatasetError("ramp_gain must be >= 1")
    head = min(ramp_duration_s, duration_s / 2.0)
    if head <= 0 or ramp_gain == 1.0:
        return [(duration_s, energy_mj / duration_s)]
    flat = energy_mj / (ramp_gain * head + (duration_s - head))
    return [(head, ramp_gain * flat), (duration_s - head, flat)]


def _segments_to_trace(segments, sample_rate: float) -> PowerTrace:
    """Sample piecewise-constant power so each sample holds its bin average."""
    total = math.fsum(d for d, _ in segments)
    n = max(1, math.ceil(total * sample_rate - 1e-12))
    energy = np.zeros(n)
    t = 0.0
    for dur, p in segments:
        end = t + dur
        k0 = min(n - 1, int(math.floor(t * sample_rate)))
        k1 = min(n - 1, int(math.floor(end * sample_rate - 1e-12)))
        if k0 == k1:
            energy[k0] += p * dur
        else:
            energy[k0] += p * ((k0 + 1) / sample_rate - t)
            if k1 > k0 + 1:
                energy[k0 + 1:k1] += p / sample_rate
            energy[k1] += p * (end - k1 / sample_rate)
        t = end
    return PowerTrace(sample_rate=sample_rate,
                      samples_mw=[float(v) for v in energy * sample_rate])


def synth_trace(oracle: SyntheticOracle, seq: KernelSequence,
                sample_rate: float = 5000.0,
                ramp_duration_s: float = 0.010,
                ramp_gain: float = 1.4) -> tuple[PowerTrace, list[KernelWindow]]:
    """Back-to-back execution trace for a kernel sequence.

    Every kernel window opens with a boosted segment (at most half the window)
    and a compensated flat tail, so integrating a window recovers the oracle
    energy up to one sample quantum.
    """
    if sample_rate < 1000:
        raise DatasetError("sample_rate must be >= 1000 Hz")
    segments = []
    windows = []
    t = 0.0
    for i, k in enumerate(seq):
        e = synth_energy(oracle, k)
        dur = latency_s(oracle, e)
        segments.extend(_shaped_segments(e, dur, ramp_duration_s, ramp_gain))
        windows.append(KernelWindow(i, t, dur))
        t += dur
    if not windows:
        raise DatasetError("empty kernel sequence")
    return _segments_to_trace(segments, sample_rate), windows


@dataclass
class KernelRunSlice:
    """One benchmarking run of a single kernel: `runs` back-to-back executions."""
    kernel: KernelInstance
    trace: PowerTrace
    window: KernelWindow
    runs: int
    latency_s: float
    energy_mj: float  # per-execution label energy


def synth_kernel_run(oracle: SyntheticOracle, k: KernelInstance, index: int = 0,
                     sample_rate: float = 5000.0,
                     ramp_duration_s: float = 0.010,
                     ramp_gain: float = 1.4,
                     min_run_s: float = 0.05,
                     noisy: bool = True) -> KernelRunSlice:
    e = noisy_energy(oracle, k, index) if noisy else synth_energy(oracle, k)
    lat = latency_s(oracle, e)
    runs = max(1, math.ceil(min_run_s / lat))
    total = runs * lat
    segments = _shaped_segments(runs * e, total, ramp_duration_s, ramp_gain)
    trace = _segments_to_trace(segments, sample_rate)
    window = KernelWindow(index, 0.0, total)
    return KernelRunSlice(kernel=k, trace=trace, window=window,
                          runs=runs, latency_s=lat, energy_mj=e)


def fullrate_label(slice_: KernelRunSlice) -> float:
    """Per-execution energy recovered by integrating the full-rate trace."""
    total = integrate_energy(slice_.trace, slice_.window.start_s,
                             min(slice_.window.duration_s, slice_.trace.duration_s))
    return total / slice_.runs


def bic_label(slice_: KernelRunSlice, sensor_period_s: float = 0.1,
              phase_s: float = 0.0) -> float:
    """Per-execution energy as a coarse current sensor would report it:
    mean of the in-window sensor readings times the execution latency."""
    sensor = simulate_bic_sensor(slice_.trace, sensor_period_s, phase_s)
    window_s = min(slice_.window.duration_s, slice_.trace.duration_s)
    est = sensor_energy_estimate(sensor, slice_.window.start_s, window_s)
    return (est / window_s) * slice_.latency_s


def make_labeled_kernel_records(oracle: SyntheticOracle, counts: dict[str, int],
                                device: str, seed: int, labeler: str = "fullrate",
                                sample_rate: float = 5000.0,
                                ramp_duration_s: float = 0.010,
                                ramp_gain: float = 1.4,
                                sensor_period_s: float = 0.1) -> list[KernelEnergyRecord]:
    """Kernel records whose energies come from simulated measurement runs
    rather than the oracle closed form. labeler is "fullrate" or "bic"."""
    if labeler not in ("fullrate", "bic"):
        raise DatasetError(f"unknown labeler {labeler!r}")
    slices = make_kernel_runs(oracle, counts, seed, sample_rate=sample_rate,
                              ramp_duration_s=ramp_duration_s, ramp_gain=ramp_gain)
    records = []
    for sl in slices:
        if labeler == "fullrate":
            e_label = fullrate_label(sl)
        else:
            e_label = bic_label(sl, sensor_period_s)
        records.append(run_slice_record(sl, e_label, device, oracle.processor))
    return records


def make_kernel_runs(oracle: SyntheticOracle, counts: dict[str, int], seed: int,
                     sample_rate: float = 5000.0,
                     ramp_duration_s: float = 0.010,
                     ramp_gain: float = 1.4) -> list[KernelRunSlice]:
    """Simulated benchmarking runs for a sampled kernel population.

    Same configs as make_kernel_records with the same counts and seed, so a
    trace-labeled dataset covers exactly the kernels the oracle-labeled one
    does."""
    slices = []
    for ktype in counts:
        for i, cfg in enumerate(sample_kernel_configs(ktype, counts[ktype], seed)):
            k = KernelInstance(ktype, cfg)
            slices.append(synth_kernel_run(oracle, k, index=i,
                                           sample_rate=sample_rate,
                                           ramp_duration_s=ramp_duration_s,
                                           ramp_gain=ramp_gain))
    return slices


def run_slice_record(sl: KernelRunSlice, energy_mj: float,
                     device: str, processor: str) -> KernelEnergyRecord:
    lat_ms = sl.latency_s * 1000.0
    return KernelEnergyRecord(device=device, processor=processor,
                              kernel_type=sl.kernel.kernel_type,
                              config=sl.kernel.config,
                              energy_mj=energy_mj, latency_ms=lat_ms,
                              avg_power_mw=energy_mj / (lat_ms / 1000.0))


# ---------------------------------------------------------------------------
# synthetic model families

def _triple(ops, name, inputs, ks, stride, cout):
    ops.append({"id": name, "kind": "conv", "inputs": inputs,
                "ks": ks, "stride": stride, "cout": cout})
    ops.append({"id": f"{name}_bn", "kind": "bn", "inputs": [name]})
    ops.append({"id": f"{name}_act", "kind": "relu", "inputs": [f"{name}_bn"]})
    return f"{name}_act"


def _dw_triple(ops, name, inputs, ks, stride):
    ops.append({"id": name, "kind": "dwconv", "inputs": inputs,
                "ks": ks, "stride": stride})
    ops.append({"id": f"{name}_bn", "kind": "bn", "inputs": [name]})
    ops.append({"id": f"{name}_act", "kind": "relu", "inputs": [f"{name}_bn"]})
    return f"{name}_act"


def _bn_relu(ops, name, inputs):
    ops.append({"id": f"{name}_bn", "kind": "bn", "inputs": inputs})
    ops.append({"id": f"{name}_act", "kind": "relu", "inputs": [f"{name}_bn"]})
    return f"{name}_act"


def _pool(ops, name, kind, inputs, ks, stride):
    ops.append({"id": name, "kind": kind, "inputs": inputs, "ks": ks, "stride": stride})
    return name


def _gpool(ops, name, inputs):
    ops.append({"id": name, "kind": "globalpool", "inputs": inputs})
    return name


def _fc(ops, name, inputs, cout):
    ops.append({"id": name, "kind": "fc", "inputs": inputs, "cout": cout})
    return name


def synthetic_families() -> dict[str, ModelGraph]:
    """Four hand-built base models covering the trained kernel types."""
    from .graph import model_graph_from_dict

    fams = {}

    ops: list = []
    h = _triple(ops, "c1", [], 5, 1, 96)
    h = _triple(ops, "c2", [h], 5, 1, 128)
    h = _pool(ops, "p1", "maxpool", [h], 3, 2)
    h = _triple(ops, "c3", [h], 5, 1, 192)
    h = _triple(ops, "c4", [h], 5, 1, 256)
    h = _triple(ops, "c5", [h], 7, 1, 96)
    h = _triple(ops, "c6", [h], 5, 1, 192)
    h = _gpool(ops, "p2", [h])
    h = _fc(ops, "f1", [h], 256)
    h = _fc(ops, "f2", [h], 100)
    fams["plainconv"] = model_graph_from_dict(
        {"name": "plainconv", "input_hw": 112, "input_channels": 64, "ops": ops})

    ops = []
    h = _dw_triple(ops, "d1", [], 7, 1)
    h = _dw_triple(ops, "d2", [h], 9, 1)
    h = _dw_triple(ops, "d3", [h], 7, 1)
    h = _dw_triple(ops, "d4", [h], 9, 1)
    h = _pool(ops, "p1", "maxpool", [h], 3, 2)
    h = _triple(ops, "c1", [h], 5, 1, 64)
    h = _triple(ops, "c2", [h], 5, 1, 512)
    h = _dw_triple(ops, "d5", [h], 7, 1)
    h = _triple(ops, "c3", [h], 5, 1, 96)
    h = _gpool(ops, "p2", [h])
    h = _fc(ops, "f1", [h], 128)
    h = _fc(ops, "f2", [h], 10)
    fams["depthwise"] = model_graph_from_dict(
        {"name": "depthwise", "input_hw": 112, "input_channels": 512, "ops": ops})

    ops = []
    h = _triple(ops, "c1", [], 5, 1, 96)
    h = _pool(ops, "p1", "maxpool", [h], 3, 2)
    h = _triple(ops, "c2", [h], 7, 1, 128)
    h = _pool(ops, "p2", "avgpool", [h], 3, 1)
    h = _triple(ops, "c3", [h], 5, 1, 192)
    h = _pool(ops, "p3", "maxpool", [h], 3, 1)
    h = _triple(ops, "c4", [h], 5, 1, 224)
    h = _pool(ops, "p4", "avgpool", [h], 3, 1)
    h = _triple(ops, "c5", [h], 7, 1, 96)
    h = _pool(ops, "p5", "maxpool", [h], 3, 2)
    h = _gpool(ops, "p6", [h])
    h = _fc(ops, "f1", [h], 192)
    h = _fc(ops, "f2", [h], 10)
    fams["poolheavy"] = model_graph_from_dict(
        {"name": "poolheavy", "input_hw": 112, "input_channels": 64, "ops": ops})

    ops = []
    h = _triple(ops, "c1", [], 5, 1, 96)
    h = _pool(ops, "p1", "maxpool", [h], 3, 2)
    h = _bn_relu(ops, "n1", [h])
    h = _triple(ops, "c2", [h], 7, 1, 160)
    h = _pool(ops, "p2", "avgpool", [h], 3, 1)
    h = _bn_relu(ops, "n2", [h])
    h = _triple(ops, "c3", [h], 5, 1, 192)
    h = _pool(ops, "p3", "maxpool", [h], 3, 1)
    h = _bn_relu(ops, "n3", [h])
    h = _triple(ops, "c4", [h], 5, 1, 128)
    h = _triple(ops, "c5", [h], 7, 1, 96)
    h = _gpool(ops, "p4", [h])
    h = _fc(ops, "f1", [h], 64)
    fams["bnrelu"] = model_graph_from_dict(
        {"name": "bnrelu", "input_hw": 112, "input_channels": 96, "ops": ops})

    return fams


# ---------------------------------------------------------------------------
# app-level synthesis

def synth_app_records(devices: list[str], seed: int) -> list[AppEnergyRecord]:
    records = []
    for device in devices:
        for dnn_id in sorted(DNN_DELEGATES):
            for delegate in DNN_DELEGATES[dnn_id]:
                rng = np.random.default_rng(
                    derived_seed(seed, "app", device, dnn_id, delegate))
                energy = math.exp(rng.uniform(math.log(3.0), math.log(300.0)))
                lat_ms = math.exp(rng.uniform(math.log(5.0), math.log(200.0)))
                records.append(AppEnergyRecord(
                    device=device, application=DNN_APPLICATION[dnn_id],
                    dnn_id=dnn_id, delegate=delegate,
                    avg_power_mw=energy / (lat_ms / 1000.0),
                    latency_ms=lat_ms, energy_mj=energy))
    return records


def synth_device_profiles(devices: list[str], seed: int) -> list[tuple[str, float]]:
    out = []
    for device in devices:
        rng = np.random.default_rng(derived_seed(seed, "tdp", device))
        out.append((device, float(round(rng.uniform(2000.0, 6000.0), 1))))
    return out
