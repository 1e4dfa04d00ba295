"""Model graph IR: primitive ops, shape inference, and the on-disk model format.

A model file is a JSON document:

    {
      "name": "alexnet1",
      "input_hw": 224,
      "input_channels": 3,
      "ops": [
        {"id": "conv1", "kind": "conv", "inputs": [], "ks": 5, "stride": 4, "cout": 89},
        {"id": "relu1", "kind": "relu", "inputs": ["conv1"]},
        ...
      ]
    }

Ops may carry explicit "hw"/"cin" entries describing their *input* shape.
Declared values are authoritative (published kernel tables are not always
consistent with plain shape inference); disagreements with inference are
reported as warnings, never errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

OP_KINDS = frozenset({
    "conv", "dwconv", "bn", "relu", "relu6", "avgpool", "maxpool",
    "globalpool", "fc", "concat", "add", "reshape", "softmax", "split",
})

# kinds whose output hw depends on ks/stride
WINDOWED = frozenset({"conv", "dwconv", "avgpool", "maxpool"})
COMPUTE = frozenset({"conv", "dwconv", "fc"})
PADDING_MODES = ("same", "valid")


class GraphError(ValueError):
    """Malformed model document or graph structure."""


@dataclass(frozen=True)
class TensorShape:
    hw: int
    channels: int

    def __post_init__(self):
        if self.hw < 1 or self.channels < 1:
            raise GraphError(f"shape dimensions must be >= 1, got {self.hw}x{self.channels}")


@dataclass
class PrimitiveOp:
    id: str
    kind: str
    inputs: list[str] = field(default_factory=list)
    ks: int | None = None
    stride: int | None = None
    cout: int | None = None
    hw: int | None = None    # declared input hw override
    cin: int | None = None   # declared input channels override


@dataclass
class ModelGraph:
    name: str
    input_shape: TensorShape
    ops: list[PrimitiveOp]
    multi_input: bool = False

    def op(self, op_id: str) -> PrimitiveOp:
        for op in self.ops:
            if op.id == op_id:
                return op
        raise GraphError(f"no op with id {op_id!r}")


def _require_attr(op: PrimitiveOp, name: str):
    if getattr(op, name) is None:
        raise GraphError(f"op {op.id!r} (kind {op.kind}) is missing required attribute {name!r}")


def validate_graph(g: ModelGraph) -> None:
    seen: set[str] = set()
    for op in g.ops:
        if op.id in seen:
            raise GraphError(f"duplicate op id {op.id!r}")
        seen.add(op.id)
        if op.kind not in OP_KINDS:
            raise GraphError(f"op {op.id!r} has unknown kind {op.kind!r}")
        if op.kind in ("conv", "dwconv"):
            _require_attr(op, "ks")
            _require_attr(op, "stride")
            if op.kind == "conv":
                _require_attr(op, "cout")
        elif op.kind in ("avgpool", "maxpool"):
            _require_attr(op, "ks")
            _require_attr(op, "stride")
        elif op.kind == "fc":
            _require_attr(op, "cout")
        for a in ("ks", "stride", "cout", "hw", "cin"):
            v = getattr(op, a)
            if v is not None and v < 1:
                raise GraphError(f"op {op.id!r}: attribute {a} must be >= 1, got {v}")
    for op in g.ops:
        for ref in op.inputs:
            if ref not in seen:
                raise GraphError(f"op {op.id!r} references unknown input {ref!r}")
    roots = [op.id for op in g.ops if not op.inputs]
    if not g.ops:
        raise GraphError("graph has no ops")
    if len(roots) != 1 and not g.multi_input:
        raise GraphError(f"expected exactly one input op, found {len(roots)}: {roots}")
    topological_order(g)  # raises on cycles


def topological_order(g: ModelGraph) -> list[PrimitiveOp]:
    """Stable topological order; ties broken by declaration order."""
    emitted: set[str] = set()
    order: list[PrimitiveOp] = []
    pending = list(g.ops)
    while pending:
        progressed = False
        remaining = []
        for op in pending:
            if all(ref in emitted for ref in op.inputs):
                order.append(op)
                emitted.add(op.id)
                progressed = True
            else:
                remaining.append(op)
        if not progressed:
            cyc = ", ".join(op.id for op in remaining)
            raise GraphError(f"cycle detected among ops: {cyc}")
        pending = remaining
    return order


def out_hw(hw: int, ks: int, stride: int, padding: str) -> int:
    if padding == "same":
        return math.ceil(hw / stride)
    if padding == "valid":
        if ks > hw:
            raise GraphError(f"valid padding underflow: ks {ks} exceeds input hw {hw}")
        return (hw - ks) // stride + 1
    raise GraphError(f"unknown padding mode {padding!r}")


@dataclass(frozen=True)
class ShapeWarning:
    op_id: str
    field: str
    declared: int
    inferred: int

    def __str__(self):
        return (f"op {self.op_id!r}: declared {self.field}={self.declared} "
                f"disagrees with inferred {self.inferred}")


def _input_shapes(g: ModelGraph, out_shapes: dict[str, TensorShape],
                  op: PrimitiveOp) -> list[TensorShape]:
    if not op.inputs:
        return [g.input_shape]
    return [out_shapes[ref] for ref in op.inputs]


def op_output_shape(op: PrimitiveOp, feeds: list[TensorShape],
                    padding: str) -> TensorShape:
    """Output shape of one op given its effective input shapes."""
    eff = feeds[0]
    hw, cin = eff.hw, eff.channels
    if op.kind == "conv":
        return TensorShape(out_hw(hw, op.ks, op.stride, padding), op.cout)
    if op.kind in ("dwconv", "avgpool", "maxpool"):
        return TensorShape(out_hw(hw, op.ks, op.stride, padding), cin)
    if op.kind == "globalpool":
        return TensorShape(1, cin)
    if op.kind == "fc":
        return TensorShape(1, op.cout)
    if op.kind == "concat":
        for s in feeds[1:]:
            if s.hw != hw:
                raise GraphError(
                    f"concat {op.id!r}: input hw mismatch ({s.hw} vs {hw})")
        return TensorShape(hw, sum(s.channels for s in feeds))
    if op.kind == "add":
        for s in feeds[1:]:
            if (s.hw, s.channels) != (hw, cin):
                raise GraphError(
                    f"add {op.id!r}: input shape mismatch "
                    f"({s.hw}x{s.channels} vs {hw}x{cin})")
        return eff
    # bn, relu, relu6, reshape, softmax, split: shape-preserving
    return eff


def _shape_pass(g: ModelGraph, padding: str):
    """One inference pass. Returns (output shapes, effective input shapes,
    per-input shape lists, warnings)."""
    if padding not in PADDING_MODES:
        raise GraphError(f"unknown padding mode {padding!r}")
    outs: dict[str, TensorShape] = {}
    ins: dict[str, TensorShape] = {}
    in_lists: dict[str, list[TensorShape]] = {}
    warnings: list[ShapeWarning] = []
    for op in topological_order(g):
        feeds = _input_shapes(g, outs, op)
        first = feeds[0]
        hw, cin = first.hw, first.channels
        if op.hw is not None:
            if op.hw != hw:
                warnings.append(ShapeWarning(op.id, "hw", op.hw, hw))
            hw = op.hw
        if op.cin is not None:
            if op.cin != cin:
                warnings.append(ShapeWarning(op.id, "cin", op.cin, cin))
            cin = op.cin
        eff = TensorShape(hw, cin)
        in_lists[op.id] = [eff] + feeds[1:]
        ins[op.id] = eff
        outs[op.id] = op_output_shape(op, in_lists[op.id], padding)
    return outs, ins, in_lists, warnings


def infer_shapes(g: ModelGraph, padding: str = "same") -> dict[str, TensorShape]:
    """Output shape of every op under the given padding mode."""
    return _shape_pass(g, padding)[0]


def resolve_input_shapes(g: ModelGraph, padding: str = "same") -> dict[str, list[TensorShape]]:
    """Effective input shape list per op (declared hw/cin overrides applied)."""
    return _shape_pass(g, padding)[2]


def validate_shapes(g: ModelGraph, padding: str = "same") -> list[ShapeWarning]:
    """Warnings where declared hw/cin disagree with plain inference."""
    return _shape_pass(g, padding)[3]


def _op_from_obj(obj: dict, index: int) -> PrimitiveOp:
    if not isinstance(obj, dict):
        raise GraphError(f"ops[{index}]: expected an object, got {type(obj).__name__}")
    if "id" not in obj or "kind" not in obj:
        raise GraphError(f"ops[{index}]: missing 'id' or 'kind'")
    known = {"id", "kind", "inputs", "ks", "stride", "cout", "hw", "cin", "num_units"}
    extra = set(obj) - known
    if extra:
        raise GraphError(f"ops[{index}] ({obj.get('id')!r}): unknown fields {sorted(extra)}")
    cout = obj.get("cout")
    if cout is None and "num_units" in obj:
        cout = obj["num_units"]
    return PrimitiveOp(
        id=str(obj["id"]),
        kind=str(obj["kind"]),
        inputs=[str(x) for x in obj.get("inputs", [])],
        ks=obj.get("ks"),
        stride=obj.get("stride"),
        cout=cout,
        hw=obj.get("hw"),
        cin=obj.get("cin"),
    )


def model_graph_from_dict(doc: dict) -> ModelGraph:
    for key in ("name", "input_hw", "input_channels", "ops"):
        if key not in doc:
            raise GraphError(f"model document missing field {key!r}")
    g = ModelGraph(
        name=str(doc["name"]),
        input_shape=TensorShape(int(doc["input_hw"]), int(doc["input_channels"])),
        ops=[_op_from_obj(o, i) for i, o in enumerate(doc["ops"])],
        multi_input=bool(doc.get("multi_input", False)),
    )
    validate_graph(g)
    return g


def parse_model_graph(text: str) -> ModelGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise GraphError(f"model document syntax error at line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise GraphError("model document must be a JSON object")
    return model_graph_from_dict(doc)


def model_graph_to_dict(g: ModelGraph) -> dict:
    doc: dict = {
        "name": g.name,
        "input_hw": g.input_shape.hw,
        "input_channels": g.input_shape.channels,
    }
    if g.multi_input:
        doc["multi_input"] = True
    ops = []
    for op in g.ops:
        entry: dict = {"id": op.id, "kind": op.kind, "inputs": list(op.inputs)}
        for a in ("ks", "stride", "cout", "hw", "cin"):
            v = getattr(op, a)
            if v is not None:
                entry[a] = v
        ops.append(entry)
    doc["ops"] = ops
    return doc


def serialize_model_graph(g: ModelGraph) -> str:
    return json.dumps(model_graph_to_dict(g), indent=2) + "\n"


def load_model_graph(path) -> ModelGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model_graph(fh.read())


def copy_graph(g: ModelGraph) -> ModelGraph:
    return ModelGraph(
        name=g.name,
        input_shape=g.input_shape,
        ops=[replace(op, inputs=list(op.inputs)) for op in g.ops],
        multi_input=g.multi_input,
    )
