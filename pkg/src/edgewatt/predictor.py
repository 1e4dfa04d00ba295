"""Per-kernel-type energy predictors and the model-level summation.

A bundle holds one regression forest per kernel type, all trained for a
single processor. Features are the kernel's config tuple plus four derived
cost terms (flops, parameter count, input and output activation volumes), so
types with different config arities get forests with different widths.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .cost import kernel_cost
from .dataset import (KernelEnergyRecord, KernelRunSlice, bic_label,
                      fullrate_label, run_slice_record)
from .forest import (ForestError, Hyperparams, RegressionForest,
                     RegressionTree, TreeNode, derived_seed, train_forest)
from .fusion import KernelInstance, KernelSequence, config_arity

FEATURE_SCHEMA = 1
FEATURE_EXTRAS = ("flops", "params", "input_volume", "output_volume")

BUNDLE_FORMAT = "edgewatt-bundle"
BUNDLE_VERSION = 1


class PredictorError(ValueError):
    pass


def kernel_features(k: KernelInstance) -> list[float]:
    """Feature vector: config columns plus derived cost terms."""
    c = kernel_cost(k)
    return ([float(v) for v in k.config]
            + [float(c.flops), float(c.params),
               float(c.input_volume), float(c.output_volume)])


def n_features_for(kernel_type: str) -> int:
    return config_arity(kernel_type) + len(FEATURE_EXTRAS)


def training_fingerprint(records: list[KernelEnergyRecord]) -> str:
    lines = sorted(f"{r.device},{r.processor},{r.signature()},{repr(r.energy_mj)}"
                   for r in records)
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


@dataclass
class PredictorBundle:
    processor: str
    forests: dict[str, RegressionForest]
    hyperparams: Hyperparams
    seed: int
    fingerprint: str
    feature_schema: int = FEATURE_SCHEMA

    def kernel_types(self) -> list[str]:
        return sorted(self.forests)


def train_bundle(records: list[KernelEnergyRecord],
                 hp: Hyperparams | None = None, seed: int = 0,
                 threads: int = 1) -> PredictorBundle:
    """One forest per kernel type present in the records.

    All records must target the same processor. Per-type master seeds are
    derived from the bundle seed and the type name, so adding a type never
    perturbs the others and the thread count never changes the result.
    """
    if not records:
        raise PredictorError("no training records")
    processors = {r.processor for r in records}
    if len(processors) != 1:
        raise PredictorError(
            f"records mix processors {sorted(processors)}; train one bundle per processor")
    processor = processors.pop()
    by_type: dict[str, list[KernelEnergyRecord]] = {}
    for r in records:
        by_type.setdefault(r.kernel_type, []).append(r)
    hp = hp or Hyperparams()
    forests = {}
    for ktype in sorted(by_type):
        group = by_type[ktype]
        if len(group) < 2:
            raise PredictorError(
                f"kernel type {ktype!r} has {len(group)} record(s); need at least 2")
        rows = [kernel_features(KernelInstance(r.kernel_type, r.config)) for r in group]
        targets = [r.energy_mj for r in group]
        try:
            forests[ktype] = train_forest(rows, targets, hp,
                                          seed=derived_seed(seed, "forest", ktype),
                                          threads=threads)
        except ForestError as e:
            raise PredictorError(f"kernel type {ktype!r}: {e}") from e
    return PredictorBundle(processor=processor, forests=forests,
                           hyperparams=hp, seed=seed,
                           fingerprint=training_fingerprint(records))


def _records_from_runs(slices: list[KernelRunSlice], device: str, processor: str,
                       label_fn) -> list[KernelEnergyRecord]:
    if not slices:
        raise PredictorError("no kernel runs")
    return [run_slice_record(sl, label_fn(sl), device, processor) for sl in slices]


def train_fullrate_baseline(slices: list[KernelRunSlice], device: str,
                            processor: str, hp: Hyperparams | None = None,
                            seed: int = 0, threads: int = 1) -> PredictorBundle:
    """Bundle trained on per-kernel energies integrated from full-rate traces."""
    records = _records_from_runs(slices, device, processor, fullrate_label)
    return train_bundle(records, hp, seed, threads)


def train_bic_baseline(slices: list[KernelRunSlice], device: str,
                       processor: str, hp: Hyperparams | None = None,
                       seed: int = 0, sensor_period_s: float = 0.1,
                       phase_s: float = 0.0, threads: int = 1) -> PredictorBundle:
    """Bundle trained on the same runs but labeled the way a slow builtin
    current sensor would: mean sensor power over the run window times the
    per-execution latency. Everything after labeling matches train_bundle."""
    records = _records_from_runs(
        slices, device, processor,
        lambda sl: bic_label(sl, sensor_period_s, phase_s))
    return train_bundle(records, hp, seed, threads)


def predict_kernel_energy(bundle: PredictorBundle, k: KernelInstance,
                          allow_unknown: bool = False) -> tuple[float, str | None]:
    """(energy_mj, warning). Unknown kernel types raise unless allow_unknown,
    in which case they contribute 0 with a warning string."""
    forest = bundle.forests.get(k.kernel_type)
    if forest is None:
        msg = (f"no predictor for kernel type {k.kernel_type!r}; "
               f"trained types: {', '.join(bundle.kernel_types())}")
        if allow_unknown:
            return 0.0, msg
        raise PredictorError(msg)
    feats = kernel_features(k)
    if len(feats) != forest.n_features:
        raise PredictorError(
            f"{k.kernel_type!r} features have width {len(feats)}, "
            f"forest expects {forest.n_features}")
    e = forest.predict_one(feats)
    if e <= 0:
        raise PredictorError(
            f"non-positive prediction {e} for {k.signature()}")
    return e, None


@dataclass
class KernelEnergyEstimate:
    index: int
    kernel_type: str
    signature: str
    energy_mj: float


@dataclass
class ModelPrediction:
    model_name: str
    processor: str
    total_mj: float
    kernels: list[KernelEnergyEstimate] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def predict_model_energy(bundle: PredictorBundle, seq: KernelSequence,
                         allow_unknown: bool = False) -> ModelPrediction:
    """Sum of per-kernel predictions, in kernel order."""
    estimates = []
    warnings = []
    for i, k in enumerate(seq):
        e, warning = predict_kernel_energy(bundle, k, allow_unknown)
        if warning:
            warnings.append(f"kernel {i}: {warning}")
        estimates.append(KernelEnergyEstimate(i, k.kernel_type, k.signature(), e))
    total = math.fsum(est.energy_mj for est in estimates)
    return ModelPrediction(model_name=seq.model_name, processor=bundle.processor,
                           total_mj=total, kernels=estimates, warnings=warnings)


# ---------------------------------------------------------------------------
# model-level flops baseline

@dataclass
class FlopsBaseline:
    slope: float
    intercept: float


def train_flops_baseline(pairs: list[tuple[float, float]]) -> FlopsBaseline:
    """Least-squares line through model-level (flops, energy_mj) points."""
    if len(pairs) < 2:
        raise PredictorError("flops baseline needs at least 2 models")
    fs = [float(f) for f, _ in pairs]
    es = [float(e) for _, e in pairs]
    fbar = math.fsum(fs) / len(fs)
    ebar = math.fsum(es) / len(es)
    sxx = math.fsum((f - fbar) ** 2 for f in fs)
    if sxx == 0.0:
        raise PredictorError("all models have identical flops; baseline is degenerate")
    sxy = math.fsum((f - fbar) * (e - ebar) for f, e in zip(fs, es))
    slope = sxy / sxx
    return FlopsBaseline(slope=slope, intercept=ebar - slope * fbar)


def predict_flops_energy(b: FlopsBaseline, flops: float) -> float:
    return max(0.0, b.slope * flops + b.intercept)


# ---------------------------------------------------------------------------
# bundle serialization

def bundle_to_dict(bundle: PredictorBundle) -> dict:
    return {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "feature_schema": bundle.feature_schema,
        "processor": bundle.processor,
        "seed": bundle.seed,
        "fingerprint": bundle.fingerprint,
        "hyperparams": {
            "n_trees": bundle.hyperparams.n_trees,
            "max_depth": bundle.hyperparams.max_depth,
            "min_samples_leaf": bundle.hyperparams.min_samples_leaf,
        },
        "kernel_types": {
            ktype: {
                "n_features": forest.n_features,
                "trees": [t.root.to_dict() for t in forest.trees],
            }
            for ktype, forest in sorted(bundle.forests.items())
        },
    }


def serialize_bundle(bundle: PredictorBundle) -> str:
    return json.dumps(bundle_to_dict(bundle), sort_keys=True,
                      separators=(",", ":")) + "\n"


def bundle_from_dict(d: dict) -> PredictorBundle:
    if not isinstance(d, dict) or d.get("format") != BUNDLE_FORMAT:
        raise PredictorError("not a predictor bundle file")
    if d.get("version") != BUNDLE_VERSION:
        raise PredictorError(
            f"unsupported bundle version {d.get('version')!r}, expected {BUNDLE_VERSION}")
    if d.get("feature_schema") != FEATURE_SCHEMA:
        raise PredictorError(
            f"unsupported feature schema {d.get('feature_schema')!r}")
    try:
        hp = Hyperparams(**d["hyperparams"])
        hp.validate()
        processor = d["processor"]
        seed = d["seed"]
        fingerprint = d["fingerprint"]
        forests = {}
        for ktype, spec in d["kernel_types"].items():
            nf = spec["n_features"]
            if nf != n_features_for(ktype):
                raise PredictorError(
                    f"kernel type {ktype!r} stored with {nf} features, "
                    f"schema expects {n_features_for(ktype)}")
            trees = [RegressionTree(root=TreeNode.from_dict(t), n_features=nf)
                     for t in spec["trees"]]
            forests[ktype] = RegressionForest(trees=trees, n_features=nf,
                                              hyperparams=hp, seed=seed)
    except PredictorError:
        raise
    except (KeyError, TypeError, ValueError, ForestError) as e:
        raise PredictorError(f"malformed bundle: {e}") from e
    return PredictorBundle(processor=processor, forests=forests, hyperparams=hp,
                           seed=seed, fingerprint=fingerprint,
                           feature_schema=d["feature_schema"])


def save_bundle(bundle: PredictorBundle, path: str):
    import os
    import tempfile
    text = serialize_bundle(bundle)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_bundle(path: str) -> PredictorBundle:
    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as e:
        raise PredictorError(f"bundle is not valid JSON: {e}") from e
    return bundle_from_dict(d)
