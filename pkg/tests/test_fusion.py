"""Kernel fusion: merging compute ops with elementwise followers."""

from collections import Counter

import pytest

from edgewatt.fusion import (FusionError, KernelInstance, KernelSequence,
                             config_arity, config_family, config_from_columns,
                             config_to_columns, fuse_kernels, kernel_signature,
                             sequence_from_csv, sequence_to_csv)
from edgewatt.cost import kernel_cost
from edgewatt.dataset import synthetic_families
from edgewatt.graph import COMPUTE, model_graph_from_dict


def graph(ops, hw=112, cin=64, multi_input=False):
    return model_graph_from_dict({"name": "m", "input_hw": hw,
                                  "input_channels": cin, "ops": ops,
                                  "multi_input": multi_input})


# ---------------------------------------------------------------------------
# fusion rules

def test_conv_bn_relu_chain_fuses_into_one_kernel():
    g = graph([
        {"id": "c", "kind": "conv", "inputs": [], "ks": 3, "stride": 1, "cout": 128},
        {"id": "b", "kind": "bn", "inputs": ["c"]},
        {"id": "r", "kind": "relu", "inputs": ["b"]},
    ])
    seq = fuse_kernels(g)
    assert len(seq) == 1
    k = seq.kernels[0]
    assert k.kernel_type == "conv_bn_relu"
    assert k.config == (112, 64, 128, 3, 1)
    assert k.signature() == "conv_bn_relu(112,64,128,3,1)"
    assert k.source_ops == ("c", "b", "r")


def test_relu6_variant_named_from_members():
    g = graph([
        {"id": "c", "kind": "conv", "inputs": [], "ks": 1, "stride": 1, "cout": 8},
        {"id": "r", "kind": "relu6", "inputs": ["c"]},
    ])
    assert fuse_kernels(g).kernels[0].kernel_type == "conv_relu6"


def test_dwconv_triple():
    g = graph([
        {"id": "d", "kind": "dwconv", "inputs": [], "ks": 5, "stride": 2},
        {"id": "b", "kind": "bn", "inputs": ["d"]},
        {"id": "r", "kind": "relu", "inputs": ["b"]},
    ])
    k = fuse_kernels(g).kernels[0]
    assert k.kernel_type == "dwconv_bn_relu"
    assert k.config == (112, 64, 5, 2)


def test_multi_consumer_blocks_absorption():
    # bn feeds both a relu and a second conv, so the first conv cannot
    # absorb it and bn itself stays standalone.
    g = graph([
        {"id": "c1", "kind": "conv", "inputs": [], "ks": 3, "stride": 1, "cout": 32},
        {"id": "b", "kind": "bn", "inputs": ["c1"]},
        {"id": "r", "kind": "relu", "inputs": ["b"]},
        {"id": "c2", "kind": "conv", "inputs": ["b"], "ks": 1, "stride": 1, "cout": 16},
    ])
    types = [k.kernel_type for k in fuse_kernels(g)]
    assert types == ["conv", "bn", "relu", "conv"]


def test_pools_absorb_nothing():
    g = graph([
        {"id": "p", "kind": "maxpool", "inputs": [], "ks": 3, "stride": 2},
        {"id": "b", "kind": "bn", "inputs": ["p"]},
        {"id": "r", "kind": "relu", "inputs": ["b"]},
    ])
    types = [k.kernel_type for k in fuse_kernels(g)]
    assert types == ["maxpool", "bn_relu"]


def test_standalone_bn_absorbs_following_relu_only():
    g = graph([
        {"id": "p", "kind": "avgpool", "inputs": [], "ks": 2, "stride": 2},
        {"id": "b", "kind": "bn", "inputs": ["p"]},
        {"id": "r", "kind": "relu6", "inputs": ["b"]},
        {"id": "b2", "kind": "bn", "inputs": ["r"]},
    ])
    types = [k.kernel_type for k in fuse_kernels(g)]
    assert types == ["avgpool", "bn_relu6", "bn"]


def test_compute_chain_absorbs_across_consecutive_elementwise_blocks():
    # conv -> bn -> relu -> bn -> relu with single consumers collapses into
    # one kernel; only a non-fusable op in between would stop the chain.
    g = graph([
        {"id": "c", "kind": "conv", "inputs": [], "ks": 3, "stride": 1, "cout": 8},
        {"id": "b1", "kind": "bn", "inputs": ["c"]},
        {"id": "r1", "kind": "relu", "inputs": ["b1"]},
        {"id": "b2", "kind": "bn", "inputs": ["r1"]},
        {"id": "r2", "kind": "relu", "inputs": ["b2"]},
    ])
    types = [k.kernel_type for k in fuse_kernels(g)]
    assert types == ["conv_bn_relu_bn_relu"]


def test_compute_never_absorbs_compute():
    g = graph([
        {"id": "c1", "kind": "conv", "inputs": [], "ks": 1, "stride": 1, "cout": 8},
        {"id": "c2", "kind": "conv", "inputs": ["c1"], "ks": 1, "stride": 1, "cout": 8},
        {"id": "f", "kind": "fc", "inputs": ["c2"], "cout": 4},
    ])
    assert [k.kernel_type for k in fuse_kernels(g)] == ["conv", "conv", "fc"]


def test_fc_input_is_flattened():
    g = graph([
        {"id": "p", "kind": "maxpool", "inputs": [], "ks": 2, "stride": 2},
        {"id": "f", "kind": "fc", "inputs": ["p"], "cout": 10},
    ], hw=8, cin=16)
    k = fuse_kernels(g).kernels[-1]
    assert k.kernel_type == "fc"
    assert k.config == (4 * 4 * 16, 10)


def test_concat_config_zero_pads_to_four_inputs():
    g = graph([
        {"id": "a", "kind": "relu", "inputs": []},
        {"id": "c1", "kind": "conv", "inputs": ["a"], "ks": 1, "stride": 1, "cout": 32},
        {"id": "c2", "kind": "conv", "inputs": ["a"], "ks": 1, "stride": 1, "cout": 48},
        {"id": "cat", "kind": "concat", "inputs": ["c1", "c2"]},
    ], hw=14, cin=8)
    k = next(k for k in fuse_kernels(g) if k.kernel_type == "concat")
    assert k.config == (14, 32, 48, 0, 0)


def test_concat_with_more_than_four_inputs_rejected():
    branches = [{"id": "a", "kind": "relu", "inputs": []}]
    for i in range(5):
        branches.append({"id": f"c{i}", "kind": "conv", "inputs": ["a"],
                         "ks": 1, "stride": 1, "cout": 8})
    branches.append({"id": "cat", "kind": "concat",
                     "inputs": [f"c{i}" for i in range(5)]})
    g = graph(branches, hw=14, cin=8)
    with pytest.raises(FusionError, match="at most 4"):
        fuse_kernels(g)


def test_unhandled_kinds_map_to_others():
    g = graph([
        {"id": "s", "kind": "softmax", "inputs": []},
        {"id": "q", "kind": "reshape", "inputs": ["s"]},
        {"id": "a", "kind": "add", "inputs": ["q"]},
    ], hw=7, cin=10)
    types = [k.kernel_type for k in fuse_kernels(g)]
    assert types == ["others", "others", "add"]
    assert fuse_kernels(g).kernels[0].config == (7, 10)


def test_fusion_partitions_every_op_exactly_once():
    for name, g in synthetic_families().items():
        seq = fuse_kernels(g)
        covered = [op_id for k in seq for op_id in k.source_ops]
        assert sorted(covered) == sorted(op.id for op in g.ops), name


def test_no_kernel_contains_two_compute_ops():
    for name, g in synthetic_families().items():
        kinds = {op.id: op.kind for op in g.ops}
        for k in fuse_kernels(g):
            n_compute = sum(1 for op_id in k.source_ops if kinds[op_id] in COMPUTE)
            assert n_compute <= 1, (name, k.kernel_type)


def test_fixture_fuses_to_twelve_kernels(alexnet1):
    seq = fuse_kernels(alexnet1)
    assert len(seq) == 12
    assert Counter(k.kernel_type for k in seq) == Counter(
        {"conv_relu": 5, "maxpool": 3, "globalpool": 1, "fc": 3})
    assert [k.signature() for k in seq] == [
        "conv_relu(224,3,89,5,4)",
        "maxpool(224,89,3,2)",
        "conv_relu(28,89,153,7,1)",
        "maxpool(28,153,3,2)",
        "conv_relu(13,153,460,5,1)",
        "conv_relu(13,460,230,1,1)",
        "conv_relu(13,230,204,7,1)",
        "maxpool(13,204,3,2)",
        "globalpool(1,204)",
        "fc(204,3686)",
        "fc(3686,6144)",
        "fc(3686,1000)",
    ]


def test_second_fixture_fuses_to_twelve_kernels(alexnet2):
    seq = fuse_kernels(alexnet2)
    assert len(seq) == 12
    assert Counter(k.kernel_type for k in seq) == Counter(
        {"conv_relu": 5, "maxpool": 3, "globalpool": 1, "fc": 3})
    assert seq.kernels[0].config == (224, 3, 70, 7, 4)
    assert seq.kernels[1].config == (55, 70, 3, 2)


# ---------------------------------------------------------------------------
# config layouts

def test_config_family_and_arity():
    assert config_family("conv_bn_relu6") == "conv"
    assert config_family("dwconv_bn_relu") == "dwconv"
    assert config_family("maxpool") == "pool"
    assert config_family("avgpool") == "pool"
    assert config_family("globalpool") == "globalpool"
    assert config_family("fc") == "fc"
    assert config_family("concat") == "concat"
    assert config_family("bn_relu") == "elementwise"
    assert config_family("others") == "elementwise"
    assert config_arity("conv_bn_relu") == 5
    assert config_arity("dwconv_bn_relu") == 4
    assert config_arity("maxpool") == 4
    assert config_arity("fc") == 2
    assert config_arity("concat") == 5
    assert config_arity("bn_relu") == 2


def test_config_columns_round_trip():
    cases = [
        ("conv_bn_relu", (112, 64, 128, 3, 1)),
        ("dwconv_bn_relu", (56, 144, 5, 2)),
        ("maxpool", (28, 96, 3, 2)),
        ("fc", (1024, 1000)),
        ("concat", (14, 32, 48, 0, 0)),
        ("globalpool", (7, 204)),
        ("bn_relu", (28, 64)),
    ]
    for ktype, config in cases:
        cols = config_to_columns(ktype, config)
        row = {name: str(v) for name, v in cols.items()}
        assert config_from_columns(ktype, row) == config


def test_config_to_columns_rejects_wrong_arity():
    with pytest.raises(FusionError, match="expected 5"):
        config_to_columns("conv", (112, 64, 128, 3))


def test_config_from_columns_reports_missing_column():
    with pytest.raises(FusionError, match="missing config column 'cout'"):
        config_from_columns("conv", {"hw": "112", "cin": "64",
                                     "ks": "3", "stride": "1"})


def test_kernel_signature_format():
    assert kernel_signature("fc", (204, 3686)) == "fc(204,3686)"


# ---------------------------------------------------------------------------
# sequence CSV

def test_sequence_csv_round_trip(alexnet1):
    seq = fuse_kernels(alexnet1)
    text = sequence_to_csv(seq)
    back = sequence_from_csv(text, model_name=seq.model_name)
    assert [(k.kernel_type, k.config) for k in back] == \
        [(k.kernel_type, k.config) for k in seq]
    assert back.model_name == "alexnet1"


def test_sequence_csv_carries_costs(alexnet1):
    seq = fuse_kernels(alexnet1)
    costs = [kernel_cost(k) for k in seq]
    lines = sequence_to_csv(seq, costs=costs).splitlines()
    assert lines[0] == "index,kernel_type,hw,cin,cout,ks,stride,cin2,cin3,cin4,flops,params,signature"
    first = lines[1].split(",")
    assert first[0] == "0"
    assert int(first[10]) == costs[0].flops
    assert int(first[11]) == costs[0].params


def test_kernel_sequence_iterates_in_order():
    ks = [KernelInstance("fc", (8, 4)), KernelInstance("fc", (4, 2))]
    seq = KernelSequence("m", ks)
    assert list(seq) == ks
    assert len(seq) == 2
