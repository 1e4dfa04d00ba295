"""HTTP service exposing fusion, prediction, trace analysis, and scoring.

The app is a thin layer over the library: requests are validated pydantic
models, domain errors surface as 400s, and prediction requires a bundle
loaded either at startup (create_app(bundle_path=...)) or via POST /bundle.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .dataset import AppEnergyRecord, DatasetError
from .evaluation import EvaluationError, metrics
from .fusion import FusionError, KernelInstance, fuse_kernels
from .graph import GraphError, model_graph_from_dict, validate_shapes
from .predictor import (PredictorError, load_bundle, predict_kernel_energy,
                        predict_model_energy)
from .scoring import DeviceProfile, ScoringError, benchmark_device
from .trace import (KernelWindow, PowerTrace, TraceError, detect_ramp_up,
                    segment_kernels, sensor_energy_estimate,
                    simulate_bic_sensor)

DOMAIN_ERRORS = (GraphError, FusionError, DatasetError, PredictorError,
                 EvaluationError, ScoringError, TraceError, ValueError)


class OpSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    id: str
    kind: str
    inputs: list[str] = Field(default_factory=list)
    ks: int | None = None
    stride: int | None = None
    cout: int | None = None
    num_units: int | None = None
    hw: int | None = None
    cin: int | None = None


class ModelSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    input_hw: int
    input_channels: int
    multi_input: bool = False
    ops: list[OpSpec]

    def to_graph(self):
        doc = {
            "name": self.name,
            "input_hw": self.input_hw,
            "input_channels": self.input_channels,
            "multi_input": self.multi_input,
            "ops": [op.model_dump(exclude_none=True) for op in self.ops],
        }
        return model_graph_from_dict(doc)


class FuseRequest(BaseModel):
    model: ModelSpec
    padding: str = "same"


class KernelOut(BaseModel):
    index: int
    kernel_type: str
    signature: str
    config: list[int]


class FuseResponse(BaseModel):
    model: str
    kernels: list[KernelOut]
    warnings: list[str]


class PredictKernelRequest(BaseModel):
    kernel_type: str
    config: list[int]


class PredictKernelResponse(BaseModel):
    kernel_type: str
    signature: str
    energy_mj: float


class PredictModelRequest(BaseModel):
    model: ModelSpec
    padding: str = "same"
    allow_unknown: bool = False


class KernelPredictionOut(BaseModel):
    index: int
    kernel_type: str
    signature: str
    energy_mj: float


class PredictModelResponse(BaseModel):
    model: str
    processor: str
    total_mj: float
    kernels: list[KernelPredictionOut]
    warnings: list[str]


class WindowIn(BaseModel):
    kernel_index: int
    start_s: float
    duration_s: float


class TraceRequest(BaseModel):
    sample_rate: float
    samples_mw: list[float]
    t0: float = 0.0
    windows: list[WindowIn] = Field(default_factory=list)
    settle_tolerance: float = 0.05
    settle_span_s: float = 0.005
    sensor_period_s: float = 0.0


class SegmentOut(BaseModel):
    kernel_index: int
    energy_mj: float
    avg_power_mw: float
    sensor_energy_mj: float | None = None


class TraceResponse(BaseModel):
    duration_s: float
    total_energy_mj: float
    ramp_duration_s: float
    ramp_settled: bool
    ramp_mean_power_mw: float
    flat_mean_power_mw: float
    segments: list[SegmentOut]


class AppRecordIn(BaseModel):
    device: str
    application: str
    dnn_id: str
    delegate: str
    avg_power_mw: float
    latency_ms: float
    energy_mj: float


class ProfileIn(BaseModel):
    device: str
    tdp_mw: float


class ScoreRequest(BaseModel):
    records: list[AppRecordIn]
    profiles: list[ProfileIn]


class ScoreCardOut(BaseModel):
    device: str
    tdp_mw: float
    n_records: int
    pcs: float
    iecs: float
    warnings: list[str]


class MetricsRequest(BaseModel):
    pairs: list[tuple[float, float]]


class MetricsResponse(BaseModel):
    rmse_mj: float
    rmspe_pct: float
    acc10_pct: float
    acc15_pct: float
    n: int


class BundleRequest(BaseModel):
    path: str


def create_app(bundle_path: str | None = None) -> FastAPI:
    app = FastAPI(title="edgewatt", version=__version__)
    app.state.bundle = load_bundle(bundle_path) if bundle_path else None

    def need_bundle():
        if app.state.bundle is None:
            raise HTTPException(status_code=409,
                                detail="no predictor bundle loaded; POST /bundle first")
        return app.state.bundle

    @app.get("/health")
    def health():
        b = app.state.bundle
        return {"status": "ok", "version": __version__,
                "bundle_loaded": b is not None,
                "kernel_types": b.kernel_types() if b else []}

    @app.post("/bundle")
    def set_bundle(req: BundleRequest):
        try:
            app.state.bundle = load_bundle(req.path)
        except (OSError, PredictorError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {"loaded": True,
                "kernel_types": app.state.bundle.kernel_types()}

    @app.post("/fuse", response_model=FuseResponse)
    def fuse(req: FuseRequest):
        try:
            g = req.model.to_graph()
            warnings = [str(w) for w in validate_shapes(g, padding=req.padding)]
            seq = fuse_kernels(g, padding=req.padding)
        except DOMAIN_ERRORS as e:
            raise HTTPException(status_code=400, detail=str(e))
        return FuseResponse(
            model=g.name,
            kernels=[KernelOut(index=i, kernel_type=k.kernel_type,
                               signature=k.signature(), config=list(k.config))
                     for i, k in enumerate(seq)],
            warnings=warnings)

    @app.post("/predict/kernel", response_model=PredictKernelResponse)
    def predict_kernel(req: PredictKernelRequest):
        bundle = need_bundle()
        try:
            k = KernelInstance(req.kernel_type, tuple(req.config))
            e, _ = predict_kernel_energy(bundle, k)
        except DOMAIN_ERRORS as e:
            raise HTTPException(status_code=400, detail=str(e))
        return PredictKernelResponse(kernel_type=k.kernel_type,
                                     signature=k.signature(), energy_mj=e)

    @app.post("/predict/model", response_model=PredictModelResponse)
    def predict_model(req: PredictModelRequest):
        bundle = need_bundle()
        try:
            g = req.model.to_graph()
            seq = fuse_kernels(g, padding=req.padding)
            pred = predict_model_energy(bundle, seq,
                                        allow_unknown=req.allow_unknown)
        except DOMAIN_ERRORS as e:
            raise HTTPException(status_code=400, detail=str(e))
        return PredictModelResponse(
            model=pred.model_name, processor=pred.processor,
            total_mj=pred.total_mj,
            kernels=[KernelPredictionOut(index=k.index, kernel_type=k.kernel_type,
                                         signature=k.signature,
                                         energy_mj=k.energy_mj)
                     for k in pred.kernels],
            warnings=pred.warnings)

    @app.post("/trace/analyze", response_model=TraceResponse)
    def analyze(req: TraceRequest):
        try:
            trace = PowerTrace(sample_rate=req.sample_rate,
                               samples_mw=req.samples_mw, t0=req.t0)
            windows = [KernelWindow(w.kernel_index, w.start_s, w.duration_s)
                       for w in req.windows]
            segments = segment_kernels(trace, windows) if windows else []
            whole = KernelWindow(0, trace.t0, trace.duration_s)
            ramp = detect_ramp_up(trace, whole,
                                  settle_tolerance=req.settle_tolerance,
                                  settle_span_s=req.settle_span_s)
            sensor = (simulate_bic_sensor(trace, req.sensor_period_s)
                      if req.sensor_period_s > 0 else None)
            out = []
            for win, seg in zip(windows, segments):
                sensor_e = None
                if sensor is not None:
                    try:
                        sensor_e = sensor_energy_estimate(sensor, win.start_s,
                                                          win.duration_s)
                    except TraceError:
                        sensor_e = None
                out.append(SegmentOut(kernel_index=seg.kernel_index,
                                      energy_mj=seg.energy_mj,
                                      avg_power_mw=seg.avg_power_mw,
                                      sensor_energy_mj=sensor_e))
            total = math.fsum(s.energy_mj for s in segments)
        except DOMAIN_ERRORS as e:
            raise HTTPException(status_code=400, detail=str(e))
        return TraceResponse(duration_s=trace.duration_s, total_energy_mj=total,
                             ramp_duration_s=ramp.ramp_duration_s,
                             ramp_settled=ramp.settled,
                             ramp_mean_power_mw=ramp.ramp_mean_power_mw,
                             flat_mean_power_mw=ramp.flat_mean_power_mw,
                             segments=out)

    @app.post("/score", response_model=list[ScoreCardOut])
    def score(req: ScoreRequest):
        try:
            records = [AppEnergyRecord(**r.model_dump()) for r in req.records]
            for i, r in enumerate(records):
                r.validate(f"records[{i}]")
            profiles = {p.device: DeviceProfile(p.device, p.tdp_mw)
                        for p in req.profiles}
            by_device: dict[str, list[AppEnergyRecord]] = {}
            for r in records:
                by_device.setdefault(r.device, []).append(r)
            missing = sorted(set(by_device) - set(profiles))
            if missing:
                raise ScoringError(
                    f"no TDP profile for device(s): {', '.join(missing)}")
            cards = [benchmark_device(by_device[d], profiles[d])
                     for d in sorted(by_device)]
        except DOMAIN_ERRORS as e:
            raise HTTPException(status_code=400, detail=str(e))
        return [ScoreCardOut(device=c.device, tdp_mw=c.tdp_mw,
                             n_records=c.n_records, pcs=c.pcs, iecs=c.iecs,
                             warnings=c.warnings) for c in cards]

    @app.post("/metrics", response_model=MetricsResponse)
    def compute_metrics(req: MetricsRequest):
        try:
            m = metrics(req.pairs)
        except DOMAIN_ERRORS as e:
            raise HTTPException(status_code=400, detail=str(e))
        return MetricsResponse(rmse_mj=m.rmse_mj, rmspe_pct=m.rmspe_pct,
                               acc10_pct=m.acc10_pct, acc15_pct=m.acc15_pct,
                               n=m.n)

    return app


app = create_app()
