"""Analytical cost model for precision-scalable MAC array configurations.

Everything here is derived from the architecture parameters alone, without
running a simulation: register file layout, per-cycle operand and output
bandwidth versus precision, throughput and utilization, and structural
hardware counts (shifter trees, adder nodes, register bits) that stand in
for synthesis-derived area and energy figures.

Conventions shared with the simulator:
  * every level is a 4x4 grid; the vertical dimension hosts weight
    bit-groups and the weight-varying loop, the horizontal dimension hosts
    activation bit-groups and the activation-varying loop;
  * hybrid sharing broadcasts activations by default (the vertical
    dimension varies weights, the horizontal one reduces outputs); the
    flipped orientation swaps the operand roles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .taxonomy import (ArchConfig, BgPlacement, LevelSharing, Unrolling,
                       supported_precisions, validate_config)
from .workload import Precision, bg_loop_dims

FAN = 4                 # children per level dimension
UNITS_PER_LEVEL = 16    # 4x4 children per unit
N_L1 = 4096             # 16^3 multipliers under one L4
L1_PRODUCT_MAX = 9      # 3 * 3, the largest 2-bit x 2-bit product
INPUT_WORD_BITS = 8     # register file words are sized for full precision
OUT_HEADROOM_BITS = 4   # accumulation headroom added to output words
BS_INTERNAL_REGS = 256  # one two-stage register pair per L2 unit
BS_INTERNAL_BITS = 14   # 8-bit reduction result plus 6-bit shift headroom


class DimRole(Enum):
    """What loop a level dimension unrolls."""

    IS_LOOP = "is"   # activations broadcast; weights and outputs vary
    WS_LOOP = "ws"   # weights broadcast; activations and outputs vary
    OS_DIM = "os"    # reduction; operands vary, outputs merge


def level_dim_roles(sharing: LevelSharing,
                    weight_broadcast_hs: bool = False
                    ) -> tuple[DimRole, DimRole]:
    """(vertical, horizontal) roles of a level's two dimensions."""
    if sharing is LevelSharing.IS:
        return DimRole.IS_LOOP, DimRole.WS_LOOP
    if sharing is LevelSharing.OS:
        return DimRole.OS_DIM, DimRole.OS_DIM
    if weight_broadcast_hs:
        return DimRole.OS_DIM, DimRole.WS_LOOP
    return DimRole.IS_LOOP, DimRole.OS_DIM


def width_for_max(max_value: int) -> int:
    """Bits needed to hold max_value: ceil(log2(max_value + 1))."""
    if max_value < 0:
        raise ValueError("max_value must be non-negative")
    return int(max_value).bit_length()


def width_of(children: list[tuple[int, int]]) -> int:
    """Width of a reduction node from its children's (max value, left
    shift) pairs, by exact worst-case propagation."""
    return width_for_max(sum(m << s for m, s in children))


def _shift_weight_sum(n: int) -> int:
    """Sum of 4**i for i below n: the worst-case growth of a shift-add
    over n bit-group positions."""
    return ((1 << (2 * n)) - 1) // 3


# ---------------------------------------------------------------------------
# Factor algebra: distinct operand values, output groups and merge counts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelProfile:
    """Counts contributed by one level at one precision.

    out_factor is the number of output lanes written per cycle; out_span
    is the number of distinct outputs accumulated per tile, which differs
    only for sub-word designs without L2 sharing, where the diagonal
    subword pairs sweep an s x s output square over s cycles.
    """

    act_factor: int      # distinct activation values (multiplicative)
    w_factor: int        # distinct weight values
    out_factor: int      # output lanes written per cycle
    out_span: int        # distinct outputs accumulated per tile
    os_merge: int        # plain reductions into each lane
    bg_merge: bool       # level hosts the spatial bit-group shift-add
    sub_parallel: int    # SWU diagonal subword pairs (1 elsewhere)


def _role_counts(role: DimRole, size: int) -> tuple[int, int, int, int]:
    """(act, w, out, os_merge) multipliers of one plain dimension factor."""
    if role is DimRole.IS_LOOP:
        return 1, size, size, 1
    if role is DimRole.WS_LOOP:
        return size, 1, size, 1
    return size, size, 1, size


def level_profile(c: ArchConfig, p: Precision, level: int) -> LevelProfile:
    """Counts for level 2, 3 or 4 at precision p."""
    sharing = {2: c.l2, 3: c.l3, 4: c.l4}[level]
    roles = level_dim_roles(sharing, c.hs_weight_broadcast)
    bg = bg_loop_dims(p)
    hosts_bg = (c.bg is BgPlacement.L2 and level == 2) or \
               (c.bg is BgPlacement.L3 and level == 3)

    if c.fu_swu is Unrolling.SWU and level == 2:
        # Diagonal subword blocks: s independent (act, w) pairs per cycle,
        # each occupying an n_a x n_w bit-group block; off-diagonal blocks
        # are gated.
        s = FAN // bg.n_a
        if sharing is LevelSharing.IS:
            out, span, os_merge = s, s * s, 1
        else:
            out, span, os_merge = 1, 1, s
        return LevelProfile(act_factor=s, w_factor=s, out_factor=out,
                            out_span=span, os_merge=os_merge, bg_merge=True,
                            sub_parallel=s)

    if hosts_bg:
        act = w = out = os_merge = 1
        residuals = ((roles[0], FAN // bg.n_w), (roles[1], FAN // bg.n_a))
        for role, size in residuals:
            a, ww, o, m = _role_counts(role, size)
            act *= a
            w *= ww
            out *= o
            os_merge *= m
        return LevelProfile(act, w, out, out, os_merge, bg_merge=True,
                            sub_parallel=1)

    act = w = out = os_merge = 1
    for role in roles:
        a, ww, o, m = _role_counts(role, FAN)
        act *= a
        w *= ww
        out *= o
        os_merge *= m
    return LevelProfile(act, w, out, out, os_merge, bg_merge=False,
                        sub_parallel=1)


def operand_counts(c: ArchConfig, p: Precision) -> tuple[int, int, int]:
    """(act values, w values, output groups) consumed or produced per cycle
    by the whole array at precision p."""
    act = w = out = 1
    for level in (2, 3, 4):
        prof = level_profile(c, p, level)
        act *= prof.act_factor
        w *= prof.w_factor
        out *= prof.out_factor
    return act, w, out


def output_span(c: ArchConfig, p: Precision) -> int:
    """Distinct outputs accumulated concurrently (register requirement)."""
    span = 1
    for level in (2, 3, 4):
        span *= level_profile(c, p, level).out_span
    return span


def word_counts(c: ArchConfig, p: Precision) -> tuple[int, int, int]:
    """Register file word counts at precision p.

    Fully unrolled designs keep one value per word slot, so words equal
    distinct values. Sub-word designs pack the diagonal subword values of
    one L2 unit into a single fixed-width word. Output words cover every
    output accumulated within a tile, including the full rotation square
    of sub-word designs without L2 sharing.
    """
    act, w, _ = operand_counts(c, p)
    if c.fu_swu is Unrolling.SWU:
        s = FAN // bg_loop_dims(p).n_a
        act //= s
        w //= s
    return act, w, output_span(c, p)


# ---------------------------------------------------------------------------
# Width chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WidthChain:
    """Worst-case values at each reduction stage for one precision.

    All bounds are exact maxima: the all-operands-at-maximum workload
    reaches every one of them.
    """

    l1_product: int
    l1_shifted: int          # after the per-unit shifter (bit-groups at L2)
    l2_out: int
    l2_out_shifted: int      # after the shared shifter (bit-groups at L3)
    l3_out: int
    l4_out: int
    bs_phase_reg: int        # first internal register resident value
    bs_transfer_reg: int     # second internal register resident value


def width_chain(c: ArchConfig, p: Precision) -> WidthChain:
    bg = bg_loop_dims(p)
    grow = _shift_weight_sum(bg.n_a) * _shift_weight_sum(bg.n_w)
    max_shift = 2 * (bg.n_a - 1 + bg.n_w - 1)
    prof2 = level_profile(c, p, 2)
    prof3 = level_profile(c, p, 3)
    prof4 = level_profile(c, p, 4)

    bs_phase = bs_transfer = 0
    l1_shifted = L1_PRODUCT_MAX
    l2_shifted = 0

    if c.bg is BgPlacement.BS_L2:
        # Same-significance sum each cycle, accumulated over activation
        # bit-groups in the first register, folded across weight bit-groups
        # in the second. Residents stay below 2**14 with max operands.
        step = L1_PRODUCT_MAX * prof2.os_merge
        bs_phase = step * _shift_weight_sum(bg.n_a)
        resident = 0
        for _ in range(bg.n_w):
            resident = (resident >> 2) + bs_phase
        bs_transfer = resident
        l2 = step * grow
    elif c.bg is BgPlacement.L2:
        # Covers SWU as well: each diagonal block recombines its own
        # bit-group grid, and OS merges the s block products.
        l1_shifted = L1_PRODUCT_MAX << max_shift
        l2 = L1_PRODUCT_MAX * grow * prof2.os_merge
    else:  # bit-groups at L3
        l2 = L1_PRODUCT_MAX * prof2.os_merge
        l2_shifted = l2 << max_shift

    if c.bg is BgPlacement.L3:
        l3 = l2 * grow * prof3.os_merge
    else:
        l3 = l2 * prof3.os_merge
    l4 = l3 * prof4.os_merge

    return WidthChain(l1_product=L1_PRODUCT_MAX, l1_shifted=l1_shifted,
                      l2_out=l2, l2_out_shifted=l2_shifted, l3_out=l3,
                      l4_out=l4, bs_phase_reg=bs_phase,
                      bs_transfer_reg=bs_transfer)


# ---------------------------------------------------------------------------
# Register layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegisterLayout:
    act_words: int
    act_word_bits: int
    w_words: int
    w_word_bits: int
    out_words: int
    out_word_bits: int
    bs_internal_regs: int
    bs_internal_bits: int

    @property
    def total_bits(self) -> int:
        return (self.act_words * self.act_word_bits
                + self.w_words * self.w_word_bits
                + self.out_words * self.out_word_bits
                + self.bs_internal_regs * self.bs_internal_bits)


def register_layout(c: ArchConfig) -> RegisterLayout:
    """Peripheral register sizing.

    Word counts are taken at the lowest supported precision, where the
    residual sharing occupies the whole bit-group level (the worst case for
    every sharing dimension). Input words are fixed at 8 bits; the output
    word width is the worst-case single-tile result width across all
    supported precisions plus 4 bits of accumulation headroom.
    """
    precisions = supported_precisions(c)
    lowest = precisions[-1]
    act_words, w_words, out_words = word_counts(c, lowest)
    worst_out = max(width_for_max(width_chain(c, p).l4_out)
                    for p in precisions)
    is_bs = c.bg is BgPlacement.BS_L2
    return RegisterLayout(
        act_words=act_words,
        act_word_bits=INPUT_WORD_BITS,
        w_words=w_words,
        w_word_bits=INPUT_WORD_BITS,
        out_words=out_words,
        out_word_bits=worst_out + OUT_HEADROOM_BITS,
        bs_internal_regs=BS_INTERNAL_REGS if is_bs else 0,
        bs_internal_bits=BS_INTERNAL_BITS if is_bs else 0,
    )


# ---------------------------------------------------------------------------
# Bandwidth, throughput, structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandwidthRow:
    precision: Precision
    act_values: int
    w_values: int
    out_groups: int
    act_bits_per_cycle: int
    w_bits_per_cycle: int
    out_bits_per_cycle: int


def io_bandwidth(c: ArchConfig, p: Precision) -> BandwidthRow:
    """Array-boundary traffic per cycle at precision p. Operand bits count
    data bits (distinct values times their width); output bits count output
    groups times the exact result width at this precision."""
    if p not in supported_precisions(c):
        raise ValueError(f"precision {p} not supported by this configuration")
    act, w, out = operand_counts(c, p)
    out_width = width_for_max(width_chain(c, p).l4_out)
    return BandwidthRow(
        precision=p,
        act_values=act,
        w_values=w,
        out_groups=out,
        act_bits_per_cycle=act * p.act_bits,
        w_bits_per_cycle=w * p.w_bits,
        out_bits_per_cycle=out * out_width,
    )


@dataclass(frozen=True)
class ThroughputRow:
    precision: Precision
    l1_ops_per_cycle: int
    paper_ops_per_cycle: int
    utilization: float


def throughput(c: ArchConfig, p: Precision) -> ThroughputRow:
    """Multiplier occupancy at precision p under a filling workload.

    Fully unrolled designs keep all 4096 multipliers busy at every
    precision. Sub-word designs activate the diagonal subword blocks only:
    4 * n_a multipliers per L2 unit, which is all 16 at full precision,
    half at 4-bit and a quarter at 2-bit.
    """
    if p not in supported_precisions(c):
        raise ValueError(f"precision {p} not supported by this configuration")
    bg = bg_loop_dims(p)
    if c.fu_swu is Unrolling.SWU:
        active = BS_INTERNAL_REGS * FAN * bg.n_a  # 256 L2 units * 4 * n_a
    else:
        active = N_L1
    full_ops = active // (bg.n_a * bg.n_w)
    return ThroughputRow(
        precision=p,
        l1_ops_per_cycle=active,
        paper_ops_per_cycle=2 * full_ops,
        utilization=active / N_L1,
    )


@dataclass(frozen=True)
class StructuralCounts:
    shifter_trees: int
    shifter_count: int
    configurable_shifters: bool
    adder_nodes_by_level: dict[int, int] = field(default_factory=dict)
    adder_width_by_level: dict[int, int] = field(default_factory=dict)
    adder_node_count: int = 0
    total_adder_input_bits: int = 0
    total_register_bits: int = 0


def structural_counts(c: ArchConfig) -> StructuralCounts:
    """Hardware inventory at full precision.

    Spatial bit-groups at L2 need a shifter tree inside every L2 unit (256
    trees, not amortized); at L3 a single tree per L3 unit serves all 16 L2
    results (16 trees). Bit-serial designs shift temporally through their
    internal registers and have no configurable shifters at all. Sub-word
    designs keep the per-L2 trees but with fixed shift amounts.
    """
    if validate_config(c):
        raise ValueError("invalid configuration")
    full = supported_precisions(c)[0]
    chain = width_chain(c, full)

    if c.bg is BgPlacement.BS_L2:
        trees, per_tree, configurable = 0, 0, False
    elif c.bg is BgPlacement.L3:
        trees, per_tree, configurable = 16, UNITS_PER_LEVEL, True
    else:
        trees, per_tree = 256, UNITS_PER_LEVEL
        configurable = c.fu_swu is not Unrolling.SWU

    # Output lanes per unit at full precision, walking up the hierarchy.
    lanes_l2 = level_profile(c, full, 2).out_factor
    lanes_l3 = lanes_l2 * level_profile(c, full, 3).out_factor
    nodes = {}
    # A level with out_factor f turns 16 lane-inputs into f lane-outputs,
    # each merging 16 / f children: (16 / f - 1) adders per output lane.
    f2 = level_profile(c, full, 2).out_factor
    nodes[2] = 256 * f2 * (UNITS_PER_LEVEL // f2 - 1)
    f3 = level_profile(c, full, 3).out_factor
    nodes[3] = 16 * lanes_l2 * f3 * (UNITS_PER_LEVEL // f3 - 1)
    f4 = level_profile(c, full, 4).out_factor
    nodes[4] = lanes_l3 * f4 * (UNITS_PER_LEVEL // f4 - 1)

    widths = {
        2: width_for_max(chain.l2_out),
        3: width_for_max(chain.l3_out),
        4: width_for_max(chain.l4_out),
    }
    layout = register_layout(c)
    return StructuralCounts(
        shifter_trees=trees,
        shifter_count=trees * per_tree,
        configurable_shifters=configurable,
        adder_nodes_by_level=nodes,
        adder_width_by_level=widths,
        adder_node_count=sum(nodes.values()),
        total_adder_input_bits=sum(nodes[k] * widths[k] for k in nodes),
        total_register_bits=layout.total_bits,
    )


@dataclass(frozen=True)
class CostReport:
    config: ArchConfig
    layout: RegisterLayout
    bandwidth: dict[Precision, BandwidthRow]
    throughput: dict[Precision, ThroughputRow]
    structural: StructuralCounts


def cost_report(c: ArchConfig) -> CostReport:
    precisions = supported_precisions(c)
    return CostReport(
        config=c,
        layout=register_layout(c),
        bandwidth={p: io_bandwidth(c, p) for p in precisions},
        throughput={p: throughput(c, p) for p in precisions},
        structural=structural_counts(c),
    )
