"""Kernel fusion: group primitive ops into the composite kernels that edge
runtimes actually schedule, and derive each kernel's configuration tuple.

A compute op (conv / dwconv / fc) absorbs an immediately following chain of
elementwise ops from {bn, relu, relu6}. An op is absorbed only when the chain
tail feeds it exclusively and the op itself has at most one consumer; a tensor
with several consumers must be materialized, which bars fusion across it.
A standalone bn followed by relu/relu6 pairs up the same way.

Kernel types are the member kinds joined with underscores ("conv_bn_relu").
Kinds with no dedicated handling (reshape, softmax, split) become "others".

Configuration tuples by family:
    conv*                 (HW, Cin, Cout, KS, S)
    dwconv*               (HW, Cin, KS, S)
    avgpool / maxpool     (HW, Cin, KS, S)
    fc*                   (Cin, Cout)
    concat                (HW, Cin1, Cin2, Cin3, Cin4)   zero-padded
    everything else       (HW, Cin)

HW and Cin describe the kernel's input; fc flattens hw*hw*channels into Cin.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .graph import (COMPUTE, ModelGraph, PrimitiveOp, TensorShape,
                    _shape_pass, topological_order)

FUSABLE = ("bn", "relu", "relu6")
OTHERS = frozenset({"reshape", "softmax", "split"})

CONFIG_COLUMNS = ("hw", "cin", "cout", "ks", "stride", "cin2", "cin3", "cin4")


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class KernelInstance:
    kernel_type: str
    config: tuple[int, ...]
    source_ops: tuple[str, ...] = ()

    def signature(self) -> str:
        return kernel_signature(self.kernel_type, self.config)


@dataclass
class KernelSequence:
    model_name: str
    kernels: list[KernelInstance] = field(default_factory=list)

    def __iter__(self):
        return iter(self.kernels)

    def __len__(self):
        return len(self.kernels)


def kernel_signature(kernel_type: str, config: tuple[int, ...]) -> str:
    return f"{kernel_type}({','.join(str(c) for c in config)})"


def config_family(kernel_type: str) -> str:
    """Map a kernel type to the family that fixes its config layout."""
    head = kernel_type.split("_", 1)[0]
    if head == "conv":
        return "conv"
    if head == "dwconv":
        return "dwconv"
    if head == "fc":
        return "fc"
    if kernel_type in ("avgpool", "maxpool"):
        return "pool"
    if kernel_type == "globalpool":
        return "globalpool"
    if kernel_type == "concat":
        return "concat"
    return "elementwise"


def config_arity(kernel_type: str) -> int:
    return {"conv": 5, "dwconv": 4, "pool": 4, "fc": 2, "concat": 5,
            "globalpool": 2, "elementwise": 2}[config_family(kernel_type)]


def config_to_columns(kernel_type: str, config: tuple[int, ...]) -> dict[str, int]:
    """Spread a config tuple over the shared tabular columns."""
    fam = config_family(kernel_type)
    layout = {
        "conv": ("hw", "cin", "cout", "ks", "stride"),
        "dwconv": ("hw", "cin", "ks", "stride"),
        "pool": ("hw", "cin", "ks", "stride"),
        "fc": ("cin", "cout"),
        "concat": ("hw", "cin", "cin2", "cin3", "cin4"),
        "globalpool": ("hw", "cin"),
        "elementwise": ("hw", "cin"),
    }[fam]
    if len(config) != len(layout):
        raise FusionError(
            f"{kernel_type} config has {len(config)} entries, expected {len(layout)}")
    return dict(zip(layout, config))


def config_from_columns(kernel_type: str, row: dict) -> tuple[int, ...]:
    cols = config_to_columns(kernel_type, (0,) * config_arity(kernel_type))
    out = []
    for name in cols:
        v = row.get(name, "")
        if v in ("", None):
            raise FusionError(f"{kernel_type}: missing config column {name!r}")
        out.append(int(v))
    return tuple(out)


def _flat_cin(shape: TensorShape) -> int:
    return shape.hw * shape.hw * shape.channels


def _kernel_config(seed_op: PrimitiveOp, in_shapes: list[TensorShape]) -> tuple[str, tuple[int, ...]]:
    s = in_shapes[0]
    kind = seed_op.kind
    if kind == "conv":
        return kind, (s.hw, s.channels, seed_op.cout, seed_op.ks, seed_op.stride)
    if kind == "dwconv":
        return kind, (s.hw, s.channels, seed_op.ks, seed_op.stride)
    if kind in ("avgpool", "maxpool"):
        return kind, (s.hw, s.channels, seed_op.ks, seed_op.stride)
    if kind == "globalpool":
        return kind, (s.hw, s.channels)
    if kind == "fc":
        return kind, (_flat_cin(s), seed_op.cout)
    if kind == "concat":
        chans = [sh.channels for sh in in_shapes]
        if len(chans) > 4:
            raise FusionError(f"concat {seed_op.id!r} has {len(chans)} inputs, at most 4 supported")
        chans += [0] * (4 - len(chans))
        return kind, (s.hw, *chans)
    if kind in OTHERS:
        return "others", (s.hw, s.channels)
    # bn, relu, relu6, add
    return kind, (s.hw, s.channels)


def fuse_kernels(g: ModelGraph, padding: str = "same") -> KernelSequence:
    order = topological_order(g)
    _, _, in_lists, _ = _shape_pass(g, padding)

    consumers: dict[str, list[str]] = {op.id: [] for op in g.ops}
    by_id = {op.id: op for op in g.ops}
    for op in g.ops:
        for ref in op.inputs:
            consumers[ref].append(op.id)

    def absorbable(tail: PrimitiveOp, allowed: tuple[str, ...]) -> PrimitiveOp | None:
        outs = consumers[tail.id]
        if len(outs) != 1:
            return None
        nxt = by_id[outs[0]]
        if nxt.kind not in allowed:
            return None
        if len(consumers[nxt.id]) > 1:
            return None
        return nxt

    taken: set[str] = set()
    kernels: list[KernelInstance] = []
    for op in order:
        if op.id in taken:
            continue
        members = [op]
        if op.kind in COMPUTE or op.kind == "bn":
            allowed = FUSABLE if op.kind in COMPUTE else ("relu", "relu6")
            tail = op
            while True:
                nxt = absorbable(tail, allowed)
                if nxt is None or nxt.id in taken:
                    break
                members.append(nxt)
                tail = nxt
        for m in members:
            taken.add(m.id)
        base_kind, config = _kernel_config(op, in_lists[op.id])
        ktype = "_".join([base_kind] + [m.kind for m in members[1:]])
        kernels.append(KernelInstance(
            kernel_type=ktype,
            config=config,
            source_ops=tuple(m.id for m in members),
        ))
    return KernelSequence(model_name=g.name, kernels=kernels)


SEQ_HEADER = ("index", "kernel_type") + CONFIG_COLUMNS + ("flops", "params", "signature")


def sequence_to_rows(seq: KernelSequence, costs=None) -> list[dict]:
    rows = []
    for i, k in enumerate(seq):
        row = {name: "" for name in SEQ_HEADER}
        row["index"] = i
        row["kernel_type"] = k.kernel_type
        row.update(config_to_columns(k.kernel_type, k.config))
        if costs is not None:
            row["flops"] = costs[i].flops
            row["params"] = costs[i].params
        row["signature"] = k.signature()
        rows.append(row)
    return rows


def sequence_to_csv(seq: KernelSequence, costs=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SEQ_HEADER, lineterminator="\n")
    w.writeheader()
    for row in sequence_to_rows(seq, costs):
        w.writerow(row)
    return buf.getvalue()


def sequence_from_csv(text: str, model_name: str = "") -> KernelSequence:
    reader = csv.DictReader(io.StringIO(text))
    kernels = []
    for row in reader:
        ktype = row["kernel_type"]
        kernels.append(KernelInstance(ktype, config_from_columns(ktype, row)))
    return KernelSequence(model_name=model_name, kernels=kernels)
