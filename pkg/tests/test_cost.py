"""Analytic FLOPs / parameter / volume costs for fused kernels."""

import json
import math
from importlib import resources

import pytest

from edgewatt.cost import CostError, KernelCost, default_out_hw, kernel_cost, model_cost
from edgewatt.fusion import KernelInstance, fuse_kernels
from edgewatt.graph import parse_model_graph


def kc(ktype, config, padding="same"):
    return kernel_cost(KernelInstance(ktype, config), padding=padding)


# ---------------------------------------------------------------------------
# frozen single-kernel values

def test_conv_valid_padding_frozen_values():
    c = kc("conv", (224, 3, 70, 7, 4), padding="valid")
    # out = floor((224 - 7) / 4) + 1 = 55
    assert c.flops == 2 * 55 * 55 * 7 * 7 * 3 * 70 == 62_254_500
    assert c.params == 7 * 7 * 3 * 70 == 10_290
    assert c.input_volume == 224 * 224 * 3 == 150_528
    assert c.output_volume == 55 * 55 * 70 == 211_750


def test_conv_triple_frozen_values():
    c = kc("conv_bn_relu", (28, 96, 128, 3, 1))
    # conv: 2*28*28*9*96*128; bn + relu: one 28*28*128 pass each; bn adds 2*128 params
    assert c.flops == 2 * 28 * 28 * 9 * 96 * 128 + 2 * 28 * 28 * 128 == 173_608_960
    assert c.params == 9 * 96 * 128 + 2 * 128 == 110_848
    assert c.input_volume == 28 * 28 * 96 == 75_264
    assert c.output_volume == 28 * 28 * 128 == 100_352


def test_fc_frozen_values():
    assert kc("fc", (204, 3686)).flops == 2 * 204 * 3686 == 1_503_888
    assert kc("fc", (204, 3686)).params == 204 * 3686 == 751_944
    assert kc("fc", (9216, 81)).flops == 1_492_992
    assert kc("fc", (9216, 81)).params == 746_496


def test_pool_frozen_values():
    c = kc("maxpool", (28, 153, 3, 2))
    assert c.flops == 14 * 14 * 9 * 153 == 269_892
    assert c.params == 0
    assert c.output_volume == 14 * 14 * 153


def test_globalpool_cost():
    c = kc("globalpool", (13, 204))
    assert c.flops == 13 * 13 * 204
    assert c.params == 0
    assert c.output_volume == 204


def test_elementwise_costs():
    assert kc("bn", (28, 64)).flops == 28 * 28 * 64
    assert kc("bn", (28, 64)).params == 2 * 64
    assert kc("bn_relu", (28, 64)).flops == 2 * 28 * 28 * 64
    assert kc("others", (28, 64)).flops == 0
    assert kc("add", (28, 64)).flops == 28 * 28 * 64


def test_concat_cost_is_volume_only():
    c = kc("concat", (14, 32, 48, 0, 0))
    assert c.flops == 0
    assert c.params == 0
    assert c.output_volume == 14 * 14 * 80


def test_dwconv_cost():
    c = kc("dwconv_bn_relu", (56, 144, 5, 2))
    o = math.ceil(56 / 2)
    assert c.flops == 2 * o * o * 25 * 144 + 2 * o * o * 144
    assert c.params == 25 * 144 + 2 * 144


# ---------------------------------------------------------------------------
# structural identities

def test_kernel_size_doubling_scales_conv_flops_by_four():
    # the kernel-size term is quadratic; under same padding out_hw is fixed,
    # so doubling ks multiplies flops by exactly four
    f3 = kc("conv", (56, 32, 64, 3, 1)).flops
    f6 = kc("conv", (56, 32, 64, 6, 1)).flops
    assert f6 == 4 * f3


def test_fused_suffix_adds_one_output_pass_per_member():
    plain = kc("conv", (28, 96, 128, 3, 1))
    with_bn = kc("conv_bn", (28, 96, 128, 3, 1))
    triple = kc("conv_bn_relu", (28, 96, 128, 3, 1))
    out_vol = 28 * 28 * 128
    assert with_bn.flops - plain.flops == out_vol == 100_352
    assert triple.flops - with_bn.flops == out_vol
    assert with_bn.params - plain.params == 2 * 128
    assert triple.params == with_bn.params


def test_cost_addition():
    a = KernelCost(1, 2, 3, 4)
    b = KernelCost(10, 20, 30, 40)
    assert a + b == KernelCost(11, 22, 33, 44)


def test_monotonicity_in_cout_and_stride():
    lo = kc("conv", (56, 32, 64, 3, 1))
    hi = kc("conv", (56, 32, 128, 3, 1))
    assert hi.flops > lo.flops and hi.params > lo.params
    strided = kc("conv", (56, 32, 64, 3, 2))
    assert strided.flops < lo.flops
    assert strided.params == lo.params  # weights unaffected by stride


def test_default_out_hw():
    def out(ktype, config, padding):
        return default_out_hw(KernelInstance(ktype, config), padding)

    assert out("conv", (224, 3, 70, 7, 4), "same") == 56
    assert out("conv", (224, 3, 70, 7, 4), "valid") == 55
    assert out("maxpool", (13, 204, 3, 2), "same") == 7
    assert out("maxpool", (13, 204, 3, 2), "valid") == 6
    assert out("fc", (204, 10), "same") == 1
    assert out("globalpool", (13, 204), "valid") == 1
    assert out("bn_relu", (28, 64), "same") == 28


def test_valid_padding_underflow_rejected():
    with pytest.raises(CostError, match="valid padding underflow"):
        kc("conv", (5, 8, 8, 7, 1), padding="valid")


def test_unknown_padding_rejected():
    with pytest.raises(CostError, match="unknown padding"):
        kc("conv", (28, 8, 8, 3, 1), padding="reflect")


# ---------------------------------------------------------------------------
# model-level totals

def test_model_cost_is_sum_of_kernel_costs(alexnet1):
    seq = fuse_kernels(alexnet1)
    total = model_cost(seq)
    by_hand = KernelCost(0, 0, 0, 0)
    for k in seq:
        by_hand = by_hand + kernel_cost(k)
    assert total == by_hand


def test_fixture_model_totals_frozen(alexnet1):
    total = model_cost(fuse_kernels(alexnet1))
    assert total.flops == 2_560_774_786
    assert total.params == 31_923_016
    assert total.input_volume == 4_990_643
    assert total.output_volume == 1_717_576


def test_second_fixture_against_independent_walk(alexnet2):
    """Recompute every cost from the raw fixture JSON with standalone
    arithmetic (no package helpers) and compare with the fused totals."""
    doc = json.loads(
        (resources.files("edgewatt") / "fixtures" / "alexnet2.json").read_text())
    shapes = {}  # op id -> (hw, channels) of its OUTPUT
    flops = params = in_vol = out_vol = 0
    for op in doc["ops"]:
        if op["inputs"]:
            hw, cin = shapes[op["inputs"][0]]
        else:
            hw, cin = doc["input_hw"], doc["input_channels"]
        # declared attributes override the propagated input shape
        hw = op.get("hw", hw)
        cin = op.get("cin", cin)
        kind = op["kind"]
        ks, stride = op.get("ks"), op.get("stride")
        cout = op.get("cout") or op.get("num_units")
        fused = False  # absorbed ops add flops but no tensor volume of their own
        if kind == "conv":
            o = math.ceil(hw / stride)
            flops += 2 * o * o * ks * ks * cin * cout
            params += ks * ks * cin * cout
            out = (o, cout)
        elif kind in ("maxpool", "avgpool"):
            o = math.ceil(hw / stride)
            flops += o * o * ks * ks * cin
            out = (o, cin)
        elif kind == "globalpool":
            flops += hw * hw * cin
            out = (1, cin)
        elif kind == "fc":
            flat = hw * hw * cin
            flops += 2 * flat * cout
            params += flat * cout
            out = (1, cout)
        elif kind in ("relu", "relu6"):
            # every activation in this fixture trails a conv and merges into
            # its kernel, so it contributes one pass of flops only
            flops += hw * hw * cin
            out = (hw, cin)
            fused = True
        else:  # pragma: no cover - fixture holds no other kinds
            raise AssertionError(kind)
        if not fused:
            in_vol += hw * hw * cin
            out_vol += out[0] * out[0] * out[1]
        shapes[op["id"]] = out

    total = model_cost(fuse_kernels(alexnet2))
    assert total.flops == flops
    assert total.params == params
    assert total.input_volume == in_vol
    assert total.output_volume == out_vol


def test_unrecognised_type_falls_back_to_single_pass_elementwise():
    c = kc("mystery", (28, 64))
    assert c.flops == 28 * 28 * 64
    assert c.params == 0
    assert c.output_volume == 28 * 28 * 64
