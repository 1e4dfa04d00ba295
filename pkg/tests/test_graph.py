"""Model graph IR: parsing, validation, shape inference, serialization."""

import pytest

from edgewatt.graph import (GraphError, ModelGraph, PrimitiveOp, TensorShape,
                            copy_graph, infer_shapes, model_graph_from_dict,
                            model_graph_to_dict, out_hw, parse_model_graph,
                            serialize_model_graph, topological_order,
                            validate_shapes)


def chain_doc():
    return {
        "name": "chain",
        "input_hw": 112,
        "input_channels": 64,
        "ops": [
            {"id": "c1", "kind": "conv", "inputs": [], "ks": 3, "stride": 1, "cout": 128},
            {"id": "r1", "kind": "relu", "inputs": ["c1"]},
            {"id": "p1", "kind": "maxpool", "inputs": ["r1"], "ks": 3, "stride": 2},
            {"id": "f1", "kind": "fc", "inputs": ["p1"], "cout": 10},
        ],
    }


# ---------------------------------------------------------------------------
# parsing and serialization

def test_parse_serialize_round_trip():
    g = model_graph_from_dict(chain_doc())
    text = serialize_model_graph(g)
    g2 = parse_model_graph(text)
    assert model_graph_to_dict(g) == model_graph_to_dict(g2)
    assert text.endswith("\n")


def test_serialized_doc_omits_unset_attributes():
    g = model_graph_from_dict(chain_doc())
    doc = model_graph_to_dict(g)
    relu = next(o for o in doc["ops"] if o["id"] == "r1")
    assert set(relu) == {"id", "kind", "inputs"}
    assert "multi_input" not in doc


def test_parse_reports_syntax_error_position():
    with pytest.raises(GraphError, match=r"syntax error at line 2 column"):
        parse_model_graph('{\n "name": oops}')


def test_parse_rejects_non_object_document():
    with pytest.raises(GraphError, match="must be a JSON object"):
        parse_model_graph("[1, 2]")


def test_missing_top_level_field():
    doc = chain_doc()
    del doc["input_hw"]
    with pytest.raises(GraphError, match="missing field 'input_hw'"):
        model_graph_from_dict(doc)


def test_num_units_is_an_alias_for_cout():
    doc = chain_doc()
    op = doc["ops"][0]
    del op["cout"]
    op["num_units"] = 77
    g = model_graph_from_dict(doc)
    assert g.op("c1").cout == 77


def test_explicit_cout_wins_over_num_units():
    doc = chain_doc()
    doc["ops"][0]["num_units"] = 999
    g = model_graph_from_dict(doc)
    assert g.op("c1").cout == 128


def test_unknown_op_field_rejected():
    doc = chain_doc()
    doc["ops"][0]["dilation"] = 2
    with pytest.raises(GraphError, match="unknown fields.*dilation"):
        model_graph_from_dict(doc)


def test_fixture_models_parse_with_seventeen_ops(alexnet1, alexnet2):
    assert len(alexnet1.ops) == 17
    assert len(alexnet2.ops) == 17
    assert alexnet1.name == "alexnet1"
    assert [op.kind for op in alexnet1.ops].count("conv") == 5


def test_copy_graph_is_independent():
    g = model_graph_from_dict(chain_doc())
    g2 = copy_graph(g)
    g2.op("c1").cout = 7
    g2.op("c1").inputs.append("r1")
    assert g.op("c1").cout == 128
    assert g.op("c1").inputs == []


# ---------------------------------------------------------------------------
# structural validation

def test_duplicate_op_id():
    doc = chain_doc()
    doc["ops"][1]["id"] = "c1"
    with pytest.raises(GraphError, match="duplicate op id 'c1'"):
        model_graph_from_dict(doc)


def test_unknown_kind():
    doc = chain_doc()
    doc["ops"][1]["kind"] = "gelu"
    with pytest.raises(GraphError, match="unknown kind 'gelu'"):
        model_graph_from_dict(doc)


def test_conv_requires_ks_stride_cout():
    for missing in ("ks", "stride", "cout"):
        doc = chain_doc()
        del doc["ops"][0][missing]
        with pytest.raises(GraphError, match=f"missing required attribute '{missing}'"):
            model_graph_from_dict(doc)


def test_pool_requires_ks_and_stride():
    doc = chain_doc()
    del doc["ops"][2]["stride"]
    with pytest.raises(GraphError, match="missing required attribute 'stride'"):
        model_graph_from_dict(doc)


def test_attributes_must_be_at_least_one():
    doc = chain_doc()
    doc["ops"][0]["stride"] = 0
    with pytest.raises(GraphError, match="stride must be >= 1"):
        model_graph_from_dict(doc)


def test_dangling_input_reference():
    doc = chain_doc()
    doc["ops"][3]["inputs"] = ["nope"]
    with pytest.raises(GraphError, match="references unknown input 'nope'"):
        model_graph_from_dict(doc)


def test_multiple_roots_rejected_unless_multi_input():
    doc = {
        "name": "two_roots",
        "input_hw": 14,
        "input_channels": 8,
        "ops": [
            {"id": "a", "kind": "relu", "inputs": []},
            {"id": "b", "kind": "relu", "inputs": []},
            {"id": "cat", "kind": "concat", "inputs": ["a", "b"]},
        ],
    }
    with pytest.raises(GraphError, match="exactly one input op"):
        model_graph_from_dict(doc)
    doc["multi_input"] = True
    g = model_graph_from_dict(doc)
    assert infer_shapes(g)["cat"] == TensorShape(14, 16)


def test_cycle_detection():
    doc = {
        "name": "loop",
        "input_hw": 14,
        "input_channels": 8,
        "ops": [
            {"id": "root", "kind": "relu", "inputs": []},
            {"id": "a", "kind": "relu", "inputs": ["root", "b"]},
            {"id": "b", "kind": "relu", "inputs": ["a"]},
        ],
        "multi_input": True,
    }
    with pytest.raises(GraphError, match="cycle detected among ops: a, b"):
        model_graph_from_dict(doc)


def test_empty_graph_rejected():
    with pytest.raises(GraphError, match="no ops"):
        model_graph_from_dict({"name": "x", "input_hw": 1,
                               "input_channels": 1, "ops": []})


def test_shape_dimensions_must_be_positive():
    with pytest.raises(GraphError, match="must be >= 1"):
        TensorShape(0, 8)


# ---------------------------------------------------------------------------
# topological order

def test_topological_order_keeps_declaration_order_on_chain():
    g = model_graph_from_dict(chain_doc())
    assert [op.id for op in topological_order(g)] == ["c1", "r1", "p1", "f1"]


def test_topological_order_diamond_tie_break():
    doc = {
        "name": "diamond",
        "input_hw": 14,
        "input_channels": 8,
        "ops": [
            {"id": "a", "kind": "relu", "inputs": []},
            {"id": "c", "kind": "relu", "inputs": ["a"]},
            {"id": "b", "kind": "relu", "inputs": ["a"]},
            {"id": "d", "kind": "concat", "inputs": ["b", "c"]},
        ],
    }
    g = model_graph_from_dict(doc)
    assert [op.id for op in topological_order(g)] == ["a", "c", "b", "d"]


# ---------------------------------------------------------------------------
# output size arithmetic

def test_out_hw_same_padding_is_ceil_division():
    assert out_hw(224, 7, 4, "same") == 56
    assert out_hw(224, 5, 4, "same") == 56
    assert out_hw(13, 3, 2, "same") == 7
    assert out_hw(1, 1, 1, "same") == 1


def test_out_hw_valid_padding():
    assert out_hw(224, 7, 4, "valid") == 55
    assert out_hw(224, 5, 4, "valid") == 55
    assert out_hw(13, 3, 2, "valid") == 6
    assert out_hw(1, 1, 1, "valid") == 1


def test_same_and_valid_agree_for_unit_window_unit_stride():
    for hw in (1, 7, 13, 28, 224):
        assert out_hw(hw, 1, 1, "same") == out_hw(hw, 1, 1, "valid") == hw


def test_valid_padding_underflow():
    with pytest.raises(GraphError, match="valid padding underflow"):
        out_hw(5, 7, 1, "valid")


def test_unknown_padding_mode():
    with pytest.raises(GraphError, match="unknown padding mode 'reflect'"):
        out_hw(14, 3, 1, "reflect")


# ---------------------------------------------------------------------------
# shape inference and declared overrides

def test_infer_shapes_chain():
    g = model_graph_from_dict(chain_doc())
    shapes = infer_shapes(g)
    assert shapes["c1"] == TensorShape(112, 128)
    assert shapes["p1"] == TensorShape(56, 128)
    assert shapes["f1"] == TensorShape(1, 10)


def test_declared_override_wins_and_warns():
    doc = chain_doc()
    doc["ops"][2]["hw"] = 100       # pool input declared 100, inferred 112
    doc["ops"][2]["cin"] = 128      # matches inference: no warning
    g = model_graph_from_dict(doc)
    warnings = validate_shapes(g)
    assert [(w.op_id, w.field, w.declared, w.inferred) for w in warnings] == \
        [("p1", "hw", 100, 112)]
    assert "declared hw=100 disagrees with inferred 112" in str(warnings[0])
    assert infer_shapes(g)["p1"] == TensorShape(50, 128)


def test_fixture_override_warnings(alexnet1):
    warned = {(w.op_id, w.field) for w in validate_shapes(alexnet1)}
    assert warned == {("pool1", "hw"), ("conv2", "hw"), ("conv3", "hw"),
                      ("gpool", "hw"), ("fc3", "cin")}


def test_concat_input_hw_mismatch():
    doc = {
        "name": "bad_cat",
        "input_hw": 14,
        "input_channels": 8,
        "ops": [
            {"id": "a", "kind": "relu", "inputs": []},
            {"id": "p", "kind": "maxpool", "inputs": ["a"], "ks": 2, "stride": 2},
            {"id": "cat", "kind": "concat", "inputs": ["a", "p"]},
        ],
    }
    g = model_graph_from_dict(doc)
    with pytest.raises(GraphError, match="input hw mismatch"):
        infer_shapes(g)


def test_add_shape_mismatch():
    doc = {
        "name": "bad_add",
        "input_hw": 14,
        "input_channels": 8,
        "ops": [
            {"id": "a", "kind": "relu", "inputs": []},
            {"id": "c", "kind": "conv", "inputs": ["a"], "ks": 1, "stride": 1, "cout": 16},
            {"id": "s", "kind": "add", "inputs": ["a", "c"]},
        ],
    }
    g = model_graph_from_dict(doc)
    with pytest.raises(GraphError, match="input shape mismatch"):
        infer_shapes(g)


def test_op_lookup_missing_id():
    g = model_graph_from_dict(chain_doc())
    with pytest.raises(GraphError, match="no op with id 'zz'"):
        g.op("zz")
