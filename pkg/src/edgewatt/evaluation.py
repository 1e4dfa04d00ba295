"""Accuracy metrics and the model-level evaluation protocol.

The headline comparison is leave-one-family-out: the flops baseline is
refit per held-out family on the remaining families' model totals, while
kernel-level bundles are trained once (they never see model totals at all)
and just evaluated per family.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .fusion import KernelSequence
from .predictor import (ModelPrediction, PredictorBundle, predict_model_energy,
                        predict_flops_energy, train_flops_baseline)


class EvaluationError(ValueError):
    pass


def relative_error(measured: float, truth: float) -> float:
    """Absolute percentage deviation of a measurement from the truth."""
    if truth <= 0:
        raise EvaluationError(f"truth must be > 0, got {truth}")
    return 100.0 * abs(measured - truth) / truth


@dataclass(frozen=True)
class EvalMetrics:
    rmse_mj: float
    rmspe_pct: float
    acc10_pct: float
    acc15_pct: float
    n: int


def metrics(pairs: list[tuple[float, float]]) -> EvalMetrics:
    """pairs of (predicted, ground_truth). Accuracy thresholds are inclusive."""
    if not pairs:
        raise EvaluationError("no prediction pairs")
    errs = [relative_error(p, g) for p, g in pairs]
    n = len(pairs)
    rmse = math.sqrt(math.fsum((p - g) ** 2 for p, g in pairs) / n)
    rmspe = math.sqrt(math.fsum(e * e for e in errs) / n)
    acc10 = 100.0 * sum(1 for e in errs if e <= 10.0) / n
    acc15 = 100.0 * sum(1 for e in errs if e <= 15.0) / n
    return EvalMetrics(rmse_mj=rmse, rmspe_pct=rmspe,
                       acc10_pct=acc10, acc15_pct=acc15, n=n)


@dataclass
class ModelCase:
    """One evaluation model: its kernel sequence, cost, and measured energy."""
    family: str
    name: str
    seq: KernelSequence
    flops: int
    truth_mj: float


@dataclass(frozen=True)
class EvalRow:
    predictor: str
    family: str
    n_models: int
    rmse_mj: float
    rmspe_pct: float
    acc10_pct: float
    acc15_pct: float


def _rows_from_family_pairs(predictor: str,
                            by_family: dict[str, list[tuple[float, float]]]) -> list[EvalRow]:
    rows = []
    per_family = []
    for family in sorted(by_family):
        m = metrics(by_family[family])
        per_family.append(m)
        rows.append(EvalRow(predictor, family, m.n, m.rmse_mj, m.rmspe_pct,
                            m.acc10_pct, m.acc15_pct))
    k = len(per_family)
    rows.append(EvalRow(
        predictor, "overall", sum(m.n for m in per_family),
        math.fsum(m.rmse_mj for m in per_family) / k,
        math.fsum(m.rmspe_pct for m in per_family) / k,
        math.fsum(m.acc10_pct for m in per_family) / k,
        math.fsum(m.acc15_pct for m in per_family) / k))
    return rows


def evaluate_bundle(name: str, bundle: PredictorBundle,
                    cases: list[ModelCase],
                    allow_unknown: bool = False) -> list[EvalRow]:
    """Per-family rows plus an overall row (unweighted mean over families)."""
    if not cases:
        raise EvaluationError("no evaluation cases")
    by_family: dict[str, list[tuple[float, float]]] = {}
    for c in cases:
        pred = predict_model_energy(bundle, c.seq, allow_unknown=allow_unknown)
        by_family.setdefault(c.family, []).append((pred.total_mj, c.truth_mj))
    return _rows_from_family_pairs(name, by_family)


def evaluate_flops_baseline(cases: list[ModelCase],
                            name: str = "flops") -> list[EvalRow]:
    """Leave-one-family-out: the line is refit on the other families' models
    before predicting each held-out family."""
    if not cases:
        raise EvaluationError("no evaluation cases")
    families = sorted({c.family for c in cases})
    if len(families) < 2:
        raise EvaluationError(
            "leave-one-family-out needs at least 2 families, got "
            f"{len(families)}")
    by_family: dict[str, list[tuple[float, float]]] = {}
    for family in families:
        train = [(c.flops, c.truth_mj) for c in cases if c.family != family]
        held = [c for c in cases if c.family == family]
        baseline = train_flops_baseline(train)
        by_family[family] = [(predict_flops_energy(baseline, c.flops), c.truth_mj)
                             for c in held]
    return _rows_from_family_pairs(name, by_family)


EVAL_HEADER = ("predictor", "family", "n_models", "rmse_mj", "rmspe_pct",
               "acc10_pct", "acc15_pct")


def eval_rows_to_csv(rows: list[EvalRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVAL_HEADER)
    for r in rows:
        w.writerow([r.predictor, r.family, r.n_models, repr(r.rmse_mj),
                    repr(r.rmspe_pct), repr(r.acc10_pct), repr(r.acc15_pct)])
    return buf.getvalue()


@dataclass(frozen=True)
class TypeShare:
    kernel_type: str
    energy_mj: float
    share_pct: float


def breakdown_by_kernel_type(pred: ModelPrediction) -> list[TypeShare]:
    """Energy grouped by kernel type, largest first. Shares sum to 100."""
    if pred.total_mj <= 0:
        raise EvaluationError("prediction total must be > 0")
    sums: dict[str, list[float]] = {}
    for k in pred.kernels:
        sums.setdefault(k.kernel_type, []).append(k.energy_mj)
    shares = [TypeShare(t, math.fsum(v), 100.0 * math.fsum(v) / pred.total_mj)
              for t, v in sums.items()]
    return sorted(shares, key=lambda s: (-s.energy_mj, s.kernel_type))


def config_overlap(train_signatures: set[str], eval_seqs: list[KernelSequence]) -> float:
    """Percentage of distinct evaluation kernel configs seen in training."""
    eval_sigs = {k.signature() for seq in eval_seqs for k in seq}
    if not eval_sigs:
        raise EvaluationError("no evaluation kernels")
    return 100.0 * len(eval_sigs & train_signatures) / len(eval_sigs)
