"""Analytic cost counters for kernels: flops, params, tensor volumes.

Conventions: one multiply-accumulate = 2 flops; pool and elementwise ops
count 1 flop per produced (pool) or touched (elementwise) element; concat
and reshape move data but compute nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .fusion import KernelInstance, KernelSequence, config_family


class CostError(ValueError):
    pass


@dataclass(frozen=True)
class KernelCost:
    flops: int
    params: int
    input_volume: int
    output_volume: int

    def __add__(self, other: "KernelCost") -> "KernelCost":
        return KernelCost(
            self.flops + other.flops,
            self.params + other.params,
            self.input_volume + other.input_volume,
            self.output_volume + other.output_volume,
        )


ZERO_COST = KernelCost(0, 0, 0, 0)


def default_out_hw(k: KernelInstance, padding: str = "same") -> int:
    """Output hw implied by the kernel's own config under the padding mode."""
    fam = config_family(k.kernel_type)
    if fam in ("conv", "dwconv", "pool"):
        hw = k.config[0]
        ks, stride = k.config[-2], k.config[-1]
        if padding == "same":
            return math.ceil(hw / stride)
        if padding == "valid":
            if ks > hw:
                raise CostError(f"valid padding underflow for {k.signature()}")
            return (hw - ks) // stride + 1
        raise CostError(f"unknown padding mode {padding!r}")
    if fam in ("fc", "globalpool"):
        return 1
    return k.config[0]


def _suffix_kinds(k: KernelInstance) -> list[str]:
    return k.kernel_type.split("_")[1:]


def kernel_cost(k: KernelInstance, out_hw: int | None = None,
                padding: str = "same") -> KernelCost:
    if out_hw is None:
        out_hw = default_out_hw(k, padding)
    fam = config_family(k.kernel_type)
    suffix = _suffix_kinds(k)

    if fam == "conv":
        hw, cin, cout, ks, _ = k.config
        flops = 2 * out_hw * out_hw * ks * ks * cin * cout
        params = ks * ks * cin * cout
        out_c = cout
        in_vol = hw * hw * cin
    elif fam == "dwconv":
        hw, cin, ks, _ = k.config
        flops = 2 * out_hw * out_hw * ks * ks * cin
        params = ks * ks * cin
        out_c = cin
        in_vol = hw * hw * cin
    elif fam == "pool":
        hw, cin, ks, _ = k.config
        flops = out_hw * out_hw * ks * ks * cin
        params = 0
        out_c = cin
        in_vol = hw * hw * cin
    elif fam == "globalpool":
        hw, cin = k.config
        flops = hw * hw * cin
        params = 0
        out_c = cin
        in_vol = hw * hw * cin
    elif fam == "fc":
        cin, cout = k.config
        flops = 2 * cin * cout
        params = cin * cout
        out_c = cout
        in_vol = cin
    elif fam == "concat":
        hw = k.config[0]
        chans = [c for c in k.config[1:] if c > 0]
        flops = 0
        params = 0
        out_c = sum(chans)
        in_vol = hw * hw * out_c
    else:  # elementwise: bn, relu, relu6, add, bn_relu, others, ...
        hw, cin = k.config
        base = k.kernel_type.split("_")[0]
        passes = 1 + len(suffix)
        if base == "others":
            passes = 0
        flops = passes * hw * hw * cin
        params = 2 * cin if base == "bn" else 0
        out_c = cin
        in_vol = hw * hw * cin
        out_hw = hw
        suffix = []

    # fused elementwise followers each make one pass over the output tensor
    for kind in suffix:
        flops += out_hw * out_hw * out_c
        if kind == "bn":
            params += 2 * out_c
    return KernelCost(flops, params, in_vol, out_hw * out_hw * out_c)


def model_cost(seq: KernelSequence, padding: str = "same") -> KernelCost:
    total = ZERO_COST
    for k in seq:
        total = total + kernel_cost(k, padding=padding)
    return total
