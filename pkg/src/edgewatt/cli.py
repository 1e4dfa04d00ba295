"""Command-line entry points.

Subcommands cover the full loop: synthesize a measurement campaign, train
per-kernel-type predictors, predict model energy, evaluate against the flops
baseline, analyze power traces, and score devices. All file outputs are
written atomically; exit code is 0 unless an error occurred (warnings go to
stderr and do not change it).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

from . import __version__
from .cost import kernel_cost, model_cost
from .dataset import (DatasetError, SyntheticOracle, generate_model_variants,
                      load_app_dataset, load_kernel_dataset,
                      load_model_dataset, make_kernel_records,
                      make_labeled_kernel_records, model_energy,
                      model_records_to_csv, app_records_to_csv,
                      kernel_records_to_csv, synth_app_records,
                      synth_device_profiles, synth_trace, synthetic_families,
                      ModelEnergyRecord)
from .evaluation import (EvaluationError, ModelCase, eval_rows_to_csv,
                         evaluate_bundle, evaluate_flops_baseline)
from .forest import Hyperparams
from .fusion import FusionError, fuse_kernels, sequence_from_csv, sequence_to_csv
from .graph import (GraphError, load_model_graph, serialize_model_graph,
                    validate_shapes)
from .predictor import (PredictorError, load_bundle, predict_model_energy,
                        save_bundle, serialize_bundle, train_bundle)
from .scoring import (DeviceProfile, ScoringError, benchmark_device,
                      load_profiles, profiles_to_csv, score_cards_to_csv)
from .trace import (TraceError, detect_ramp_up, integrate_energy,
                    KernelWindow, segment_kernels, sensor_energy_estimate,
                    simulate_bic_sensor, trace_from_csv, trace_to_csv,
                    windows_from_csv, windows_to_csv)

DEFAULT_COUNTS = {
    "conv_bn_relu": 1500,
    "dwconv_bn_relu": 225,
    "maxpool": 75,
    "avgpool": 75,
    "globalpool": 50,
    "fc": 25,
    "bn_relu": 50,
}


def _write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _warn(msg: str):
    print(f"warning: {msg}", file=sys.stderr)


def _parse_counts(items: list[str]) -> dict[str, int]:
    counts = dict(DEFAULT_COUNTS)
    for item in items or []:
        if "=" not in item:
            raise DatasetError(f"--counts entries look like type=N, got {item!r}")
        ktype, _, num = item.partition("=")
        n = int(num)
        if n <= 0:
            counts.pop(ktype, None)
        else:
            counts[ktype] = n
    return counts


# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    oracle = SyntheticOracle(processor=args.processor,
                             noise_fraction=args.noise, seed=args.seed)
    counts = _parse_counts(args.counts)
    out = args.out
    os.makedirs(out, exist_ok=True)

    records = make_kernel_records(oracle, counts, device="dev0", seed=args.seed)
    _write_atomic(os.path.join(out, "kernels.csv"), kernel_records_to_csv(records))
    print(f"kernels.csv: {len(records)} records "
          f"({', '.join(f'{t}={n}' for t, n in sorted(counts.items()))})")

    if args.sensor_period:
        for labeler, fname in (("fullrate", "kernels_fullrate.csv"),
                               ("bic", "kernels_bic.csv")):
            labeled = make_labeled_kernel_records(
                oracle, counts, device="dev0", seed=args.seed, labeler=labeler,
                sample_rate=args.sample_rate, ramp_duration_s=args.ramp,
                ramp_gain=args.ramp_gain, sensor_period_s=args.sensor_period)
            _write_atomic(os.path.join(out, fname), kernel_records_to_csv(labeled))
            print(f"{fname}: {len(labeled)} records")

    model_records = []
    first_seq = None
    for family, base in sorted(synthetic_families().items()):
        for g in generate_model_variants(base, args.variants, args.seed,
                                         padding=args.padding):
            seq = fuse_kernels(g, padding=args.padding)
            if first_seq is None:
                first_seq = seq
            _write_atomic(os.path.join(out, "models", f"{g.name}.json"),
                          serialize_model_graph(g))
            costs = [kernel_cost(k, padding=args.padding) for k in seq]
            _write_atomic(os.path.join(out, "seqs", f"{g.name}.csv"),
                          sequence_to_csv(seq, costs=costs))
            model_records.append(ModelEnergyRecord(
                device="dev0", processor=args.processor, model_family=family,
                variant_id=g.name, energy_mj=model_energy(oracle, seq),
                flops=model_cost(seq, padding=args.padding).flops,
                kernel_seq=f"seqs/{g.name}.csv"))
    _write_atomic(os.path.join(out, "models.csv"),
                  model_records_to_csv(model_records))
    print(f"models.csv: {len(model_records)} models")

    devices = [f"dev{i}" for i in range(args.devices)]
    apps = synth_app_records(devices, args.seed)
    _write_atomic(os.path.join(out, "apps.csv"), app_records_to_csv(apps))
    profiles = [DeviceProfile(d, tdp) for d, tdp in
                synth_device_profiles(devices, args.seed)]
    _write_atomic(os.path.join(out, "profiles.csv"), profiles_to_csv(profiles))
    print(f"apps.csv: {len(apps)} records over {len(devices)} devices")

    trace, windows = synth_trace(oracle, first_seq, sample_rate=args.sample_rate,
                                 ramp_duration_s=args.ramp, ramp_gain=args.ramp_gain)
    _write_atomic(os.path.join(out, "trace.csv"), trace_to_csv(trace))
    _write_atomic(os.path.join(out, "windows.csv"), windows_to_csv(windows))
    print(f"trace.csv: {len(trace.samples_mw)} samples at {trace.sample_rate:g} Hz "
          f"({first_seq.model_name})")
    return 0


def cmd_train(args) -> int:
    with open(args.data) as f:
        records = load_kernel_dataset(f.read())
    hp = Hyperparams(n_trees=args.trees, max_depth=args.max_depth,
                     min_samples_leaf=args.min_leaf)
    by_type: dict[str, int] = {}
    for r in records:
        by_type[r.kernel_type] = by_type.get(r.kernel_type, 0) + 1
    t0 = time.monotonic()
    bundle = train_bundle(records, hp=hp, seed=args.seed, threads=args.threads)
    dt = time.monotonic() - t0
    save_bundle(bundle, args.out)
    for ktype in sorted(by_type):
        print(f"{ktype}: {by_type[ktype]} records")
    print(f"trained {len(bundle.forests)} forests "
          f"({hp.n_trees} trees each) in {dt:.1f}s -> {args.out}")
    return 0


def _prediction_dict(pred) -> dict:
    return {
        "model": pred.model_name,
        "processor": pred.processor,
        "total_mj": pred.total_mj,
        "kernels": [{"index": k.index, "kernel_type": k.kernel_type,
                     "signature": k.signature, "energy_mj": k.energy_mj}
                    for k in pred.kernels],
        "warnings": pred.warnings,
    }


def cmd_predict(args) -> int:
    g = load_model_graph(args.model)
    for w in validate_shapes(g, padding=args.padding):
        _warn(str(w))
    if args.server:
        import httpx
        with open(args.model) as f:
            doc = json.load(f)
        resp = httpx.post(f"{args.server.rstrip('/')}/predict/model",
                          json={"model": doc, "padding": args.padding,
                                "allow_unknown": args.allow_unknown},
                          timeout=60.0)
        if resp.status_code != 200:
            raise PredictorError(f"server returned {resp.status_code}: {resp.text}")
        out = resp.json()
    else:
        bundle = load_bundle(args.bundle)
        seq = fuse_kernels(g, padding=args.padding)
        pred = predict_model_energy(bundle, seq, allow_unknown=args.allow_unknown)
        for w in pred.warnings:
            _warn(w)
        out = _prediction_dict(pred)
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        _write_atomic(args.out, text)
        print(f"{out['model']}: {out['total_mj']:.3f} mJ -> {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_evaluate(args) -> int:
    bundle = load_bundle(args.bundle)
    with open(args.models) as f:
        model_records = load_model_dataset(f.read())
    base_dir = os.path.dirname(os.path.abspath(args.models))
    cases = []
    for r in model_records:
        seq_path = os.path.join(base_dir, r.kernel_seq)
        with open(seq_path) as f:
            seq = sequence_from_csv(f.read(), model_name=r.variant_id)
        cases.append(ModelCase(family=r.model_family, name=r.variant_id,
                               seq=seq, flops=r.flops, truth_mj=r.energy_mj))
    rows = evaluate_bundle("kernel", bundle, cases,
                           allow_unknown=args.allow_unknown)
    rows += evaluate_flops_baseline(cases)
    if args.bic_bundle:
        rows += evaluate_bundle("bic", load_bundle(args.bic_bundle), cases,
                                allow_unknown=args.allow_unknown)
    for row in rows:
        if row.family == "overall":
            print(f"{row.predictor}: rmspe {row.rmspe_pct:.1f}% "
                  f"acc10 {row.acc10_pct:.1f}% acc15 {row.acc15_pct:.1f}% "
                  f"({row.n_models} models)")
    if args.out:
        _write_atomic(args.out, eval_rows_to_csv(rows))
        print(f"wrote {args.out}")
    return 0


SEGMENT_HEADER = ("kernel_index", "start_s", "duration_s", "energy_mj",
                  "avg_power_mw")


def cmd_trace(args) -> int:
    with open(args.trace) as f:
        trace = trace_from_csv(f.read())
    with open(args.windows) as f:
        windows = windows_from_csv(f.read())
    segments = segment_kernels(trace, windows)

    import csv as _csv
    import io as _io
    buf = _io.StringIO()
    w = _csv.writer(buf, lineterminator="\n")
    w.writerow(SEGMENT_HEADER)
    for win, seg in zip(windows, segments):
        w.writerow([seg.kernel_index, repr(win.start_s), repr(win.duration_s),
                    repr(seg.energy_mj), repr(seg.avg_power_mw)])
    total = math.fsum(s.energy_mj for s in segments)
    print(f"{len(segments)} windows, total {total:.3f} mJ")

    whole = KernelWindow(0, trace.t0, trace.duration_s)
    ramp = detect_ramp_up(trace, whole, settle_tolerance=args.ramp_tolerance,
                          settle_span_s=args.settle_span)
    state = "settled" if ramp.settled else "never settled"
    print(f"ramp-up: {ramp.ramp_duration_s * 1000:.1f} ms ({state}), "
          f"ramp mean {ramp.ramp_mean_power_mw:.0f} mW, "
          f"flat mean {ramp.flat_mean_power_mw:.0f} mW")

    if args.sensor_period:
        sensor = simulate_bic_sensor(trace, args.sensor_period)
        devs = []
        for win, seg in zip(windows, segments):
            try:
                est = sensor_energy_estimate(sensor, win.start_s, win.duration_s)
            except TraceError:
                continue
            if seg.energy_mj > 0:
                devs.append(100.0 * abs(est - seg.energy_mj) / seg.energy_mj)
        covered = len(devs)
        if covered:
            mean_dev = math.fsum(devs) / covered
            print(f"coarse sensor ({args.sensor_period * 1000:.0f} ms period): "
                  f"{covered}/{len(windows)} windows sampled, "
                  f"mean deviation {mean_dev:.1f}%")
        else:
            print(f"coarse sensor ({args.sensor_period * 1000:.0f} ms period): "
                  f"no window contains a sample")

    if args.out:
        _write_atomic(args.out, buf.getvalue())
        print(f"wrote {args.out}")
    return 0


def cmd_score(args) -> int:
    with open(args.apps) as f:
        records = load_app_dataset(f.read())
    with open(args.profiles) as f:
        profiles = load_profiles(f.read())
    by_device: dict[str, list] = {}
    for r in records:
        by_device.setdefault(r.device, []).append(r)
    profiled = {p.device: p for p in profiles}
    missing = sorted(set(by_device) - set(profiled))
    if missing:
        raise ScoringError(f"no TDP profile for device(s): {', '.join(missing)}")
    cards = []
    for device in sorted(by_device):
        card = benchmark_device(by_device[device], profiled[device])
        for w in card.warnings:
            _warn(f"{device}: {w}")
        cards.append(card)
        print(f"{device}: pcs {card.pcs:.2f}, iecs {card.iecs:.2f} "
              f"({card.n_records} records, tdp {card.tdp_mw:g} mW)")
    if args.out:
        _write_atomic(args.out, score_cards_to_csv(cards))
        print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(bundle_path=args.bundle)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="edgewatt",
        description="kernel-level energy prediction for on-device DNNs")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, processor=False, padding=False):
        sp.add_argument("--seed", type=int, default=42)
        if processor:
            sp.add_argument("--processor", choices=("cpu", "gpu"), default="cpu")
        if padding:
            sp.add_argument("--padding", choices=("same", "valid"), default="same")

    sp = sub.add_parser("synth", help="generate a synthetic measurement campaign")
    sp.add_argument("--out", required=True, help="output directory")
    common(sp, processor=True, padding=True)
    sp.add_argument("--noise", type=float, default=0.0,
                    help="label noise fraction in [0, 0.1]")
    sp.add_argument("--counts", nargs="*", metavar="TYPE=N",
                    help="override per-type record counts (N<=0 drops the type)")
    sp.add_argument("--variants", type=int, default=5)
    sp.add_argument("--devices", type=int, default=2)
    sp.add_argument("--sensor-period", type=float, default=0.0,
                    help="also write sensor-labeled kernel datasets (seconds)")
    sp.add_argument("--sample-rate", type=float, default=5000.0)
    sp.add_argument("--ramp", type=float, default=0.010)
    sp.add_argument("--ramp-gain", type=float, default=1.4)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="fit per-kernel-type forests")
    sp.add_argument("--data", required=True, help="kernel dataset csv")
    sp.add_argument("--out", required=True, help="bundle json path")
    common(sp)
    sp.add_argument("--trees", type=int, default=100)
    sp.add_argument("--max-depth", type=int, default=16)
    sp.add_argument("--min-leaf", type=int, default=2)
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="predict a model description's energy")
    sp.add_argument("--model", required=True, help="model json path")
    sp.add_argument("--bundle", help="bundle json path (local prediction)")
    sp.add_argument("--server", help="base URL of a running service")
    sp.add_argument("--padding", choices=("same", "valid"), default="same")
    sp.add_argument("--allow-unknown", action="store_true",
                    help="untrained kernel types contribute 0 with a warning")
    sp.add_argument("--out", help="write prediction json here")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="model-level accuracy vs the flops baseline")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--models", required=True, help="model dataset csv")
    sp.add_argument("--bic-bundle", help="bundle trained on coarse-sensor labels")
    sp.add_argument("--allow-unknown", action="store_true")
    sp.add_argument("--out", help="write per-family metric rows here")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("trace", help="segment a power trace into kernel energies")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--windows", required=True)
    sp.add_argument("--ramp-tolerance", type=float, default=0.05)
    sp.add_argument("--settle-span", type=float, default=0.005)
    sp.add_argument("--sensor-period", type=float, default=0.0)
    sp.add_argument("--out", help="write per-window segment energies here")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("score", help="device efficiency scorecards")
    sp.add_argument("--apps", required=True)
    sp.add_argument("--profiles", required=True)
    sp.add_argument("--out", help="write scorecards here")
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--bundle", help="bundle to load at startup")
    sp.set_defaults(func=cmd_serve)

    return p


ERRORS = (GraphError, FusionError, DatasetError, PredictorError,
          EvaluationError, ScoringError, TraceError, ValueError,
          OSError, json.JSONDecodeError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "predict" and not args.server and not args.bundle:
        parser.error("predict needs --bundle or --server")
    try:
        return args.func(args)
    except ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
