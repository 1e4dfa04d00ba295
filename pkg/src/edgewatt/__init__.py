"""Kernel-level energy prediction and efficiency scoring for on-device DNNs."""

__version__ = "0.1.0"

from .graph import (GraphError, ModelGraph, PrimitiveOp, TensorShape,
                    infer_shapes, load_model_graph, parse_model_graph,
                    serialize_model_graph, validate_graph, validate_shapes)
from .fusion import (FusionError, KernelInstance, KernelSequence,
                     fuse_kernels, kernel_signature)
from .cost import CostError, KernelCost, kernel_cost, model_cost
from .trace import (PowerTrace, KernelWindow, SegmentEnergy, RampUpReport,
                    TraceError, detect_ramp_up, integrate_energy,
                    segment_kernels, sensor_energy_estimate,
                    simulate_bic_sensor)
from .forest import Hyperparams, RegressionForest, derived_seed, train_forest
from .dataset import (AppEnergyRecord, DatasetError, KernelEnergyRecord,
                      KernelRunSlice, ModelEnergyRecord, SyntheticOracle,
                      generate_model_variants, make_kernel_runs,
                      sample_kernel_configs, synth_energy, synth_trace,
                      synthetic_families)
from .predictor import (FlopsBaseline, ModelPrediction, PredictorBundle,
                        PredictorError, load_bundle, predict_kernel_energy,
                        predict_model_energy, save_bundle, train_bic_baseline,
                        train_bundle, train_flops_baseline,
                        train_fullrate_baseline)
from .evaluation import (EvalMetrics, EvaluationError, ModelCase,
                         breakdown_by_kernel_type, evaluate_bundle,
                         evaluate_flops_baseline, metrics, relative_error)
from .scoring import (DeviceProfile, ScoreCard, ScoringError,
                      benchmark_device, iec, iecs, pcs, power_efficiency)
