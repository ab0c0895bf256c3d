"""Elaboration and bit-exact cycle simulation of MAC array configurations.

The array is fixed at four levels: 4096 two-bit multipliers (L1) grouped
16 per L2 unit, 16 L2 per L3, 16 L3 per L4. Elaboration turns an
architecture point plus a precision into static per-multiplier routing:
which activation and weight each unit reads, which bit-group significance
it handles, which output it feeds, and whether it is gated. Simulation
then walks the workload tile by tile and reproduces the exact reduction
the hardware would perform, including shift alignment, the bit-serial
two-phase schedule and the register width checks.

Simulation is vectorized over tiles: all tiles share the same routing, so
operand gathers and reduction-tree sums run as batched integer array
operations. Every value is tracked against the declared width of the node
or register that holds it; exceeding a declared width is a fatal modeling
error, never a silent wraparound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .costmodel import (BS_INTERNAL_BITS, FAN, L1_PRODUCT_MAX, N_L1,
                        UNITS_PER_LEVEL, DimRole, RegisterLayout,
                        level_dim_roles, level_profile, register_layout,
                        width_chain, width_for_max)
from .taxonomy import (ArchConfig, BgPlacement, LevelSharing, Unrolling,
                       supported_precisions, validate_config)
from .workload import Precision, Workload, bg_loop_dims


class SimulationOverflowError(RuntimeError):
    """A value reached the declared width of its node or register. This
    indicates a width-model bug (or a deliberately narrowed width) and
    aborts the simulation rather than wrapping silently."""


class WorkloadTooSmallError(ValueError):
    """Raised under strict fill when a workload cannot cover the spatial
    mapping exactly."""


@dataclass(frozen=True)
class ArrayGeometry:
    levels: int = 4
    fan_per_level: int = FAN
    total_l1: int = N_L1


GEOMETRY = ArrayGeometry()


def l1_multiply(a: int, w: int) -> int:
    """One L1 unit: an exact 2-bit by 2-bit unsigned multiply."""
    if not 0 <= a <= 3 or not 0 <= w <= 3:
        raise ValueError(f"L1 operands must be 2-bit values, got {a}, {w}")
    return a * w


def swu_gating_mask(p: Precision) -> np.ndarray:
    """Active-unit mask of one L2 unit in a sub-word unrolled design.

    The 4x4 grid splits into (4/n) x (4/n) blocks of n x n bit-group
    positions, n being the bit-group count per operand. Each diagonal
    block computes one full product of an (activation, weight) subword
    pair; off-diagonal blocks are gated. Active units: 16 at 8-bit, 8 at
    4-bit, 4 at 2-bit.
    """
    if p.act_bits != p.w_bits:
        raise ValueError("sub-word designs scale both operands together")
    n = bg_loop_dims(p).n_a
    u, v = np.indices((FAN, FAN))
    return (u // n) == (v // n)


# ---------------------------------------------------------------------------
# Elaboration
# ---------------------------------------------------------------------------

# Factor kinds used in the mixed-radix decomposition of each level
# dimension. Loop kinds consume workload loop sizes; bg kinds select a
# bit-group significance; sub kinds index subword blocks in SWU designs.
_ROLE_KIND = {DimRole.IS_LOOP: "is", DimRole.WS_LOOP: "ws",
              DimRole.OS_DIM: "os"}


def _dim_factor_lists(c: ArchConfig, p: Precision,
                      level: int) -> tuple[list, list]:
    """(vertical, horizontal) factor lists, outermost first. The vertical
    dimension hosts weight bit-groups, the horizontal one activation
    bit-groups."""
    sharing = {2: c.l2, 3: c.l3, 4: c.l4}[level]
    u_role, v_role = level_dim_roles(sharing, c.hs_weight_broadcast)
    bg = bg_loop_dims(p)
    if c.fu_swu is Unrolling.SWU and level == 2:
        s = FAN // bg.n_a
        return ([("sub_u", s), ("bg_w", bg.n_w)],
                [("sub_v", s), ("bg_act", bg.n_a)])
    hosts_bg = (c.bg is BgPlacement.L2 and level == 2) or \
               (c.bg is BgPlacement.L3 and level == 3)
    if hosts_bg:
        return ([("bg_w", bg.n_w), (_ROLE_KIND[u_role], FAN // bg.n_w)],
                [("bg_act", bg.n_a), (_ROLE_KIND[v_role], FAN // bg.n_a)])
    return [(_ROLE_KIND[u_role], FAN)], [(_ROLE_KIND[v_role], FAN)]


@dataclass(frozen=True)
class UnitMap:
    """Static routing of all 4096 L1 units (tile-local coordinates).

    The activation operand of unit u is act[ws_index[u], os_index[u]], the
    weight operand w[is_index[u], os_index[u]]; its product lands in output
    group (ws_index[u], is_index[u]) with a left shift of
    2 * (act_bg[u] + w_bg[u]) positions. For bit-serial designs the
    bit-group indices advance with the cycle counter instead and are -1
    here. gated marks sub-word units idle at the elaborated precision.
    """

    is_index: np.ndarray
    ws_index: np.ndarray
    os_index: np.ndarray
    act_bg: np.ndarray
    w_bg: np.ndarray
    gated: np.ndarray


@dataclass(frozen=True)
class StageSpec:
    """One reduction stage: `groups` outputs, each summing `fan_in`
    inputs, with `shift_span` the (min, max) left shift applied to the
    inputs and `width` the declared output width in bits."""

    name: str
    groups: int
    fan_in: int
    shift_span: tuple[int, int]
    width: int


@dataclass
class _Variant:
    """One static routing variant (sub-word rotation step)."""

    act_idx: np.ndarray          # per active unit, gather offset term
    w_idx: np.ndarray
    act_uniq: np.ndarray         # deduplicated offsets (broadcast sharing)
    act_inv: np.ndarray          # unit -> position in act_uniq
    w_uniq: np.ndarray
    w_inv: np.ndarray
    is_idx: np.ndarray           # tile-local indices of active units
    ws_idx: np.ndarray
    os_idx: np.ndarray
    g2: int
    s2: int
    g3: int
    s3: int
    g4: int
    s4: int
    shift2_mult: np.ndarray | None   # (g2,) multipliers for bit-groups at L3
    out_cols: np.ndarray             # (g4,) lane positions, ws * is_sp + is


@dataclass
class ArrayInstance:
    """An architecture point elaborated for one precision and one workload
    shape. Reusable across workloads of identical shape and precision."""

    config: ArchConfig
    precision: Precision
    is_size: int
    ws_size: int
    os_size: int
    is_sp: int
    ws_sp: int
    os_sp: int
    n_is_t: int
    n_ws_t: int
    n_os_t: int
    cycles_per_tile: int
    cycles: int
    active_per_cycle: int
    act_values_per_cycle: int
    w_values_per_cycle: int
    act_words_per_cycle: int
    w_words_per_cycle: int
    output_groups: int
    units: UnitMap
    registers: RegisterLayout
    reduction_tree: list[StageSpec]
    declared_widths: dict[str, int]
    bounds: dict[str, int]
    variants: list[_Variant] = field(repr=False, default_factory=list)
    _bg: object = field(repr=False, default=None)
    _dtype: object = field(repr=False, default=None)


def _mixed_radix(digit: np.ndarray, factors: list) -> list:
    """Split a base-4 digit into (kind, size, value) parts, outer first."""
    parts = []
    inner = FAN
    for kind, size in factors:
        inner //= size
        parts.append((kind, size, (digit // inner) % size))
    return parts


def elaborate(c: ArchConfig, p: Precision, w: Workload, *,
              strict_fill: bool = False,
              width_overrides: dict[str, int] | None = None) -> ArrayInstance:
    """Instantiate a configuration for a precision and a workload shape.

    Only the workload's loop sizes and precision are used; the returned
    instance can simulate any workload with the same shape. Workloads
    smaller than the spatial mapping are padded with idle slots unless
    strict_fill is set, in which case the deficient loop categories are
    reported as an error.
    """
    violations = validate_config(c)
    if violations:
        raise ValueError("invalid configuration: "
                         + "; ".join(str(v) for v in violations))
    if p not in supported_precisions(c):
        raise ValueError(f"precision {p} not supported by this "
                         f"configuration (mode {c.mode})")
    if p != w.precision:
        raise ValueError(f"workload precision {w.precision} does not match "
                         f"requested precision {p}")
    bg = bg_loop_dims(p)
    swu = c.fu_swu is Unrolling.SWU
    if swu and bg.n_a != bg.n_w:
        raise ValueError("sub-word designs require symmetric precision")

    digits = np.indices((FAN,) * 6).reshape(6, N_L1)
    l4f = digits[0] * FAN + digits[1]
    l3f = digits[2] * FAN + digits[3]
    l2f = digits[4] * FAN + digits[5]

    zeros = np.zeros(N_L1, dtype=np.int64)
    is_idx, ws_idx, os_idx = zeros.copy(), zeros.copy(), zeros.copy()
    act_bg, w_bg = zeros.copy(), zeros.copy()
    sub_u, sub_v = zeros.copy(), zeros.copy()
    is_sp = ws_sp = os_sp = 1

    dim_digits = {(4, 0): digits[0], (4, 1): digits[1],
                  (3, 0): digits[2], (3, 1): digits[3],
                  (2, 0): digits[4], (2, 1): digits[5]}
    for level in (4, 3, 2):
        factor_lists = _dim_factor_lists(c, p, level)
        for dim in (0, 1):
            for kind, size, q in _mixed_radix(dim_digits[(level, dim)],
                                              factor_lists[dim]):
                if kind == "is":
                    is_idx = is_idx * size + q
                    is_sp *= size
                elif kind == "ws":
                    ws_idx = ws_idx * size + q
                    ws_sp *= size
                elif kind == "os":
                    os_idx = os_idx * size + q
                    os_sp *= size
                elif kind == "bg_act":
                    act_bg = q
                elif kind == "bg_w":
                    w_bg = q
                elif kind == "sub_u":
                    sub_u = q
                elif kind == "sub_v":
                    sub_v = q

    s = FAN // bg.n_a if swu else 1
    if swu and s > 1:
        if c.l2 is LevelSharing.OS:
            # Diagonal subword pairs extend the reduction: one more os
            # factor of size s per L2 unit.
            os_idx = os_idx * s + sub_v
            os_sp *= s
        else:
            # Independent diagonal pairs: activation and weight subword
            # indices advance together, covering an s x s output square
            # over s rotation steps.
            ws_idx = ws_idx * s + sub_v
            is_idx = is_idx * s + sub_u
            ws_sp *= s
            is_sp *= s

    if c.bg is BgPlacement.BS_L2:
        act_bg = np.full(N_L1, -1, dtype=np.int64)
        w_bg = np.full(N_L1, -1, dtype=np.int64)

    rotations = s if (swu and c.l2 is LevelSharing.IS) else 1
    gated0 = (sub_u != sub_v) if swu else np.zeros(N_L1, dtype=bool)
    units = UnitMap(is_index=is_idx, ws_index=ws_idx, os_index=os_idx,
                    act_bg=act_bg, w_bg=w_bg, gated=gated0)

    if c.bg is BgPlacement.L3:
        # Every L1 unit inside one L2 must carry the same significance so
        # the shifter can be shared per L2 result.
        for arr in (act_bg, w_bg):
            per_l2 = arr.reshape(256, UNITS_PER_LEVEL)
            assert (per_l2 == per_l2[:, :1]).all(), \
                "bit-groups at L3 require uniform significance per L2"

    if strict_fill:
        deficient = [name for name, size, sp in
                     (("is", w.is_size, is_sp), ("ws", w.ws_size, ws_sp),
                      ("os", w.os_size, os_sp))
                     if size % sp != 0]
        if deficient:
            raise WorkloadTooSmallError(
                "workload does not fill the spatial mapping exactly; "
                f"deficient categories: {', '.join(deficient)} "
                f"(spatial factors is={is_sp}, ws={ws_sp}, os={os_sp})")

    n_is_t = -(-w.is_size // is_sp)
    n_ws_t = -(-w.ws_size // ws_sp)
    n_os_t = -(-w.os_size // os_sp)
    os_pad = n_os_t * os_sp
    ws_pad = n_ws_t * ws_sp
    is_pad = n_is_t * is_sp

    # Bounds and declared widths. Stage bounds come from the analytical
    # width chain; the accumulator additionally scales with the temporal
    # reduction depth of this workload shape.
    chain = width_chain(c, p)
    prof2 = level_profile(c, p, 2)
    bounds: dict[str, int] = {
        "act_word": p.act_max,
        "w_word": p.w_max,
        "l2_out": chain.l2_out,
        "l3_out": chain.l3_out,
        "l4_out": chain.l4_out,
        "accumulator": chain.l4_out * n_os_t,
    }
    if c.bg is BgPlacement.L2:
        # The raw 4-bit product is folded into the shifter here, so only
        # the shifted value is an observable node.
        bounds["l1_shifted"] = chain.l1_shifted
    elif c.bg is BgPlacement.L3:
        bounds["l1_product"] = L1_PRODUCT_MAX
        bounds["l2_out_shifted"] = chain.l2_out_shifted
    else:
        bounds["l1_product"] = L1_PRODUCT_MAX
        bounds["l2_step_sum"] = L1_PRODUCT_MAX * prof2.os_merge
        bounds["bs_phase_reg"] = chain.bs_phase_reg
        bounds["bs_transfer_reg"] = chain.bs_transfer_reg

    widths = {k: width_for_max(v) for k, v in bounds.items()}
    widths["act_word"] = 8
    widths["w_word"] = 8
    if c.bg is BgPlacement.BS_L2:
        widths["bs_phase_reg"] = BS_INTERNAL_BITS
        widths["bs_transfer_reg"] = BS_INTERNAL_BITS
    if width_overrides:
        unknown = set(width_overrides) - set(widths)
        if unknown:
            raise ValueError(f"unknown width classes: {sorted(unknown)}")
        widths.update(width_overrides)

    compute_bound = max(v for k, v in bounds.items() if k != "accumulator")
    dtype = np.int32 if compute_bound < (1 << 31) else np.int64

    # Gather offsets into the padded slice tensors. Slices interleave
    # innermost, (ws, os, slice) and (is, os, slice), so the bit-group
    # reads of one unit group stay contiguous in memory.
    if c.bg is BgPlacement.BS_L2:
        act_base = (ws_idx * os_pad + os_idx) * bg.n_a
        w_base = (is_idx * os_pad + os_idx) * bg.n_w
    else:
        act_base = (ws_idx * os_pad + os_idx) * bg.n_a + act_bg
        w_base = (is_idx * os_pad + os_idx) * bg.n_w + w_bg

    variants = []
    g_out = ws_idx * is_sp + is_idx
    seen_groups: set[int] = set()
    for r in range(rotations):
        active = ~gated0 if rotations == 1 else \
            (sub_u == (sub_v + r) % s)
        sel = np.flatnonzero(active)
        order = np.lexsort((l2f[sel], l3f[sel], l4f[sel], g_out[sel]))
        sel = sel[order]

        key2 = (g_out[sel] * UNITS_PER_LEVEL + l4f[sel]) * UNITS_PER_LEVEL \
            + l3f[sel]
        key3 = g_out[sel] * UNITS_PER_LEVEL + l4f[sel]
        key4 = g_out[sel]
        g2, s2 = _uniform_groups(key2)
        g3, s3 = _uniform_groups(key3[::s2])
        g4, s4 = _uniform_groups(key4[::s2 * s3])
        out_cols = key4[:: s2 * s3 * s4].astype(np.int64)
        seen_groups.update(out_cols.tolist())

        shift2_mult = None
        if c.bg is BgPlacement.L3:
            shift = 2 * (act_bg[sel] + w_bg[sel])
            first = shift[::s2]
            assert (shift.reshape(g2, s2) == first[:, None]).all()
            shift2_mult = (1 << first).astype(dtype)

        # The per-output-group uniqueness of (activation, weight,
        # significance) tuples guarantees no term is double counted.
        tup = np.stack([g_out[sel], ws_idx[sel], is_idx[sel], os_idx[sel],
                        act_bg[sel], w_bg[sel]])
        assert np.unique(tup, axis=1).shape[1] == sel.size

        act_uniq, act_inv = np.unique(act_base[sel], return_inverse=True)
        w_uniq, w_inv = np.unique(w_base[sel], return_inverse=True)
        variants.append(_Variant(
            act_idx=act_base[sel], w_idx=w_base[sel],
            act_uniq=act_uniq, act_inv=act_inv.astype(np.int32),
            w_uniq=w_uniq, w_inv=w_inv.astype(np.int32),
            is_idx=is_idx[sel], ws_idx=ws_idx[sel], os_idx=os_idx[sel],
            g2=g2, s2=s2, g3=g3, s3=s3, g4=g4, s4=s4,
            shift2_mult=shift2_mult, out_cols=out_cols))

    assert len(seen_groups) == is_sp * ws_sp, \
        "output groups must cover the spatial is x ws rectangle"

    v0 = variants[0]
    ungated = np.flatnonzero(~gated0)
    act_vals = np.unique(ws_idx[ungated] * os_sp + os_idx[ungated]).size
    w_vals = np.unique(is_idx[ungated] * os_sp + os_idx[ungated]).size

    if c.bg is BgPlacement.BS_L2:
        cpt = bg.n_a * bg.n_w
    else:
        cpt = rotations
    n_tiles = n_is_t * n_ws_t * n_os_t

    tree = _tree_description(c, p, v0, widths)
    inst = ArrayInstance(
        config=c, precision=p,
        is_size=w.is_size, ws_size=w.ws_size, os_size=w.os_size,
        is_sp=is_sp, ws_sp=ws_sp, os_sp=os_sp,
        n_is_t=n_is_t, n_ws_t=n_ws_t, n_os_t=n_os_t,
        cycles_per_tile=cpt, cycles=n_tiles * cpt,
        active_per_cycle=int(v0.act_idx.size),
        act_values_per_cycle=int(act_vals),
        w_values_per_cycle=int(w_vals),
        act_words_per_cycle=int(act_vals) // (s if swu else 1),
        w_words_per_cycle=int(w_vals) // (s if swu else 1),
        output_groups=is_sp * ws_sp,
        units=units,
        registers=register_layout(c),
        reduction_tree=tree,
        declared_widths=widths,
        bounds=bounds,
        variants=variants,
        _bg=bg,
        _dtype=dtype,
    )
    return inst


def _uniform_groups(keys: np.ndarray) -> tuple[int, int]:
    """Number of groups and the uniform group size of a sorted key array."""
    groups = int(np.unique(keys).size)
    size, rem = divmod(keys.size, groups)
    assert rem == 0
    assert (keys.reshape(groups, size) == keys.reshape(groups, size)[:, :1]
            ).all(), "reduction groups must be uniform"
    return groups, size


def _tree_description(c: ArchConfig, p: Precision, v: _Variant,
                      widths: dict[str, int]) -> list[StageSpec]:
    bg = bg_loop_dims(p)
    max_shift = 2 * (bg.n_a - 1 + bg.n_w - 1)
    stages = []
    if c.bg is BgPlacement.L2:
        stages.append(StageSpec("l2", v.g2, v.s2, (0, max_shift),
                                widths["l2_out"]))
        stages.append(StageSpec("l3", v.g3, v.s3, (0, 0), widths["l3_out"]))
    elif c.bg is BgPlacement.L3:
        stages.append(StageSpec("l2", v.g2, v.s2, (0, 0), widths["l2_out"]))
        stages.append(StageSpec("l3", v.g3, v.s3, (0, max_shift),
                                widths["l3_out"]))
    else:
        stages.append(StageSpec("l2", v.g2, v.s2, (0, 0), widths["l2_out"]))
        stages.append(StageSpec("l3", v.g3, v.s3, (0, 0), widths["l3_out"]))
    stages.append(StageSpec("l4", v.g4, v.s4, (0, 0), widths["l4_out"]))
    return stages


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimResult:
    """Outcome of one run. outputs has shape (ws_size, is_size) and must
    equal the golden reference exactly for a correct model."""

    outputs: np.ndarray
    cycles: int
    l1_ops: int
    paper_ops: int
    utilization: float
    activity: dict[str, int]
    max_values: dict[str, int]
    declared_widths: dict[str, int]
    output_groups: int
    out_lanes_per_cycle: int
    active_l1_per_cycle: int
    act_values_per_cycle: int
    w_values_per_cycle: int
    act_words_per_cycle: int
    w_words_per_cycle: int


_CHUNK_ELEMS = 3_000_000


class _Tracker:
    def __init__(self, widths: dict[str, int]):
        self.widths = widths
        self.maxima: dict[str, int] = {}

    def track(self, cls: str, value: int) -> None:
        value = int(value)
        if value > self.maxima.get(cls, -1):
            self.maxima[cls] = value
        if value >= (1 << self.widths[cls]):
            raise SimulationOverflowError(
                f"{cls} reached {value}, exceeding its declared "
                f"{self.widths[cls]}-bit width")


def _padded_slices(src: np.ndarray, n_slices: int, rows_pad: int,
                   cols_pad: int, dtype, shifted: bool) -> np.ndarray:
    """Zero-padded 2-bit slices of an operand table, slice index innermost:
    element (row, col, k) holds bits 2k..2k+1, left-aligned back to its
    significance when shifted is set."""
    rows, cols = src.shape
    out = np.zeros((rows_pad, cols_pad, n_slices), dtype=dtype)
    for k in range(n_slices):
        sl = (src >> (2 * k)) & 3
        if shifted:
            sl = sl << (2 * k)
        out[:rows, :cols, k] = sl
    return out.reshape(-1)


def simulate(inst: ArrayInstance, w: Workload, *,
             trace_path: str | None = None,
             disable_shifts: bool = False) -> SimResult:
    """Run a workload through an elaborated array.

    The workload must match the shape and precision the instance was
    elaborated for. disable_shifts drops all significance alignment (a
    correctness canary for tests: results must then diverge from the
    golden reference whenever more than one bit-group is in play).
    """
    if (w.is_size, w.ws_size, w.os_size) != \
            (inst.is_size, inst.ws_size, inst.os_size):
        raise ValueError("workload shape does not match the elaboration")
    if w.precision != inst.precision:
        raise ValueError("workload precision does not match the elaboration")

    c = inst.config
    bg = inst._bg
    dtype = inst._dtype
    tracker = _Tracker(inst.declared_widths)
    tracker.track("act_word", w.act.max())
    tracker.track("w_word", w.w.max())

    is_bs = c.bg is BgPlacement.BS_L2
    os_pad = inst.n_os_t * inst.os_sp
    ws_pad = inst.n_ws_t * inst.ws_sp
    is_pad = inst.n_is_t * inst.is_sp
    shifted = (c.bg is BgPlacement.L2) and not disable_shifts
    act_flat = _padded_slices(w.act, bg.n_a, ws_pad, os_pad, dtype, shifted)
    w_flat = _padded_slices(w.w, bg.n_w, is_pad, os_pad, dtype, shifted)

    lanes = inst.ws_sp * inst.is_sp
    n_out_tiles = inst.n_is_t * inst.n_ws_t
    acc = np.zeros((n_out_tiles, lanes), dtype=np.int64)

    n_os_t = inst.n_os_t
    chunk_tiles = max(1, _CHUNK_ELEMS // max(1, inst.active_per_cycle))
    idx_dtype = np.int32 if max(act_flat.size, w_flat.size) < (1 << 31) \
        else np.int64

    def compute(v: _Variant, t0: int, t1: int) -> np.ndarray:
        ts = np.arange(t0, t1, dtype=idx_dtype)
        os_t = ts % n_os_t
        rest = ts // n_os_t
        ws_t = rest % inst.n_ws_t
        is_t = rest // inst.n_ws_t
        act_off = (ws_t * (inst.ws_sp * os_pad)
                   + os_t * inst.os_sp) * bg.n_a
        w_off = (is_t * (inst.is_sp * os_pad) + os_t * inst.os_sp) * bg.n_w
        n = t1 - t0

        def gather(flat, off, v_idx, v_uniq, v_inv, extra=0):
            # Broadcast sharing makes many units read the same word; when
            # the deduplication is worthwhile, gather distinct words first
            # and expand from that small, cache-resident block.
            if v_uniq.size * 2 <= v_idx.size:
                uniq = v_uniq.astype(idx_dtype, copy=False)
                small = np.take(flat, off[:, None] + (uniq + extra)[None, :])
                return np.take(small, v_inv, axis=1)
            idx = v_idx.astype(idx_dtype, copy=False)
            return np.take(flat, off[:, None] + (idx + extra)[None, :])

        if not is_bs:
            a = gather(act_flat, act_off, v.act_idx, v.act_uniq, v.act_inv)
            ww = gather(w_flat, w_off, v.w_idx, v.w_uniq, v.w_inv)
            prod = a * ww
            cls = "l1_shifted" if c.bg is BgPlacement.L2 else "l1_product"
            tracker.track(cls, prod.max())
            x = prod.reshape(n, v.g2, v.s2).sum(axis=2, dtype=dtype)
            tracker.track("l2_out", x.max())
            if v.shift2_mult is not None:
                if not disable_shifts:
                    x = x * v.shift2_mult[None, :]
                tracker.track("l2_out_shifted", x.max())
        else:
            total = np.zeros((n, v.g2), dtype=np.int64)
            rho = np.zeros((n, v.g2), dtype=np.int64)
            for j in range(bg.n_w):
                phase = np.zeros((n, v.g2), dtype=np.int64)
                wv = gather(w_flat, w_off, v.w_idx, v.w_uniq, v.w_inv,
                            extra=idx_dtype(j))
                for i in range(bg.n_a):
                    a = gather(act_flat, act_off, v.act_idx, v.act_uniq,
                               v.act_inv, extra=idx_dtype(i))
                    prod = a * wv
                    tracker.track("l1_product", prod.max())
                    step = prod.reshape(n, v.g2, v.s2).sum(axis=2,
                                                           dtype=np.int64)
                    tracker.track("l2_step_sum", step.max())
                    phase += (step << (2 * i)) if not disable_shifts \
                        else step
                tracker.track("bs_phase_reg", phase.max())
                total += (phase << (2 * j)) if not disable_shifts else phase
                rho = (rho >> 2) + phase
                tracker.track("bs_transfer_reg", rho.max())
            x = total
            tracker.track("l2_out", x.max())

        x = x.reshape(n, v.g3, v.s3).sum(axis=2,
                                         dtype=np.int64 if is_bs else dtype)
        tracker.track("l3_out", x.max())
        x = x.reshape(n, v.g4, v.s4).sum(axis=2, dtype=np.int64)
        tracker.track("l4_out", x.max())
        return x

    n_tiles = n_out_tiles * n_os_t
    for v in inst.variants:
        t = 0
        while t < n_tiles:
            run = t // n_os_t
            if n_os_t <= chunk_tiles:
                n_runs = min(max(1, chunk_tiles // n_os_t),
                             n_out_tiles - run)
                t1 = t + n_runs * n_os_t
                vals = compute(v, t, t1)
                acc[run:run + n_runs, v.out_cols] += \
                    vals.reshape(n_runs, n_os_t, v.g4).sum(axis=1)
            else:
                run_end = (run + 1) * n_os_t
                t1 = min(t + chunk_tiles, run_end)
                acc[run, v.out_cols] += compute(v, t, t1).sum(axis=0)
            t = t1
    tracker.track("accumulator", acc.max())

    out = acc.reshape(inst.n_is_t, inst.n_ws_t, inst.ws_sp, inst.is_sp)
    out = out.transpose(1, 2, 0, 3).reshape(ws_pad, is_pad)
    outputs = np.ascontiguousarray(out[:w.ws_size, :w.is_size])

    l1_ops = _useful_ops(inst, w)
    per_mac = bg.n_a * bg.n_w
    cycles = inst.cycles
    activity = _activity_counters(inst)
    if trace_path is not None:
        _write_trace(inst, trace_path)

    return SimResult(
        outputs=outputs,
        cycles=cycles,
        l1_ops=l1_ops,
        paper_ops=2 * (l1_ops // per_mac),
        utilization=l1_ops / (N_L1 * cycles),
        activity=activity,
        max_values=dict(tracker.maxima),
        declared_widths=dict(inst.declared_widths),
        output_groups=inst.output_groups,
        out_lanes_per_cycle=inst.variants[0].g4,
        active_l1_per_cycle=inst.active_per_cycle,
        act_values_per_cycle=inst.act_values_per_cycle,
        w_values_per_cycle=inst.w_values_per_cycle,
        act_words_per_cycle=inst.act_words_per_cycle,
        w_words_per_cycle=inst.w_words_per_cycle,
    )


def _useful_ops(inst: ArrayInstance, w: Workload) -> int:
    """Two-bit multiplies on real (non padded) operands, over the run."""
    is_rem = w.is_size - (inst.n_is_t - 1) * inst.is_sp
    ws_rem = w.ws_size - (inst.n_ws_t - 1) * inst.ws_sp
    os_rem = w.os_size - (inst.n_os_t - 1) * inst.os_sp
    per_unit_steps = inst.cycles_per_tile if \
        inst.config.bg is BgPlacement.BS_L2 else 1
    total = 0
    for v in inst.variants:
        is_ok = v.is_idx < is_rem
        ws_ok = v.ws_idx < ws_rem
        os_ok = v.os_idx < os_rem
        for a in (0, 1):
            n_a_tiles = 1 if a else inst.n_is_t - 1
            if n_a_tiles == 0:
                continue
            va = is_ok if a else np.ones_like(is_ok)
            for b in (0, 1):
                n_b_tiles = 1 if b else inst.n_ws_t - 1
                if n_b_tiles == 0:
                    continue
                vb = ws_ok if b else np.ones_like(ws_ok)
                for cc in (0, 1):
                    n_c_tiles = 1 if cc else inst.n_os_t - 1
                    if n_c_tiles == 0:
                        continue
                    vc = os_ok if cc else np.ones_like(os_ok)
                    count = int((va & vb & vc).sum())
                    total += count * n_a_tiles * n_b_tiles * n_c_tiles
    return total * per_unit_steps


def _activity_counters(inst: ArrayInstance) -> dict[str, int]:
    """Deterministic structural activity over the whole run.

    Adder invocations count two-input additions in the reduction stages
    plus accumulator updates; register writes count bits written to input
    words, internal bit-serial registers and output accumulators; shifter
    invocations count values crossing a configurable shifter.
    """
    v = inst.variants[0]
    c = inst.config
    n_tiles = inst.n_is_t * inst.n_ws_t * inst.n_os_t
    cpt = inst.cycles_per_tile
    active = inst.active_per_cycle
    layout = inst.registers
    input_bits = (inst.act_words_per_cycle + inst.w_words_per_cycle) * 8

    if c.bg is BgPlacement.BS_L2:
        bgn = inst._bg
        per_tile_adds = cpt * (active - v.g2) + cpt * v.g2  # tree + phase reg
        per_tile_adds += (v.g2 - v.g3) + (v.g3 - v.g4) + v.g4
        adds = n_tiles * per_tile_adds
        reg_bits = n_tiles * (
            cpt * input_bits
            + cpt * v.g2 * BS_INTERNAL_BITS            # first stage write
            + bgn.n_w * v.g2 * BS_INTERNAL_BITS        # transfer write
            + v.g4 * layout.out_word_bits)
        shifts = 0
    else:
        per_cycle_adds = (active - v.g2) + (v.g2 - v.g3) + (v.g3 - v.g4) \
            + v.g4
        adds = n_tiles * cpt * per_cycle_adds
        reg_bits = n_tiles * cpt * (input_bits
                                    + v.g4 * layout.out_word_bits)
        if c.bg is BgPlacement.L3:
            shifts = n_tiles * cpt * v.g2
        elif c.fu_swu is Unrolling.SWU:
            shifts = 0  # fixed wiring, nothing configurable toggles
        else:
            shifts = n_tiles * cpt * active
    return {
        "adder_invocations": int(adds),
        "register_write_bits": int(reg_bits),
        "shifter_invocations": int(shifts),
    }


def _write_trace(inst: ArrayInstance, path: str) -> None:
    """Per-cycle JSON-lines trace: cycle number, schedule phase, active
    multipliers and register bits written."""
    c = inst.config
    v = inst.variants[0]
    layout = inst.registers
    input_bits = (inst.act_words_per_cycle + inst.w_words_per_cycle) * 8
    bgn = inst._bg
    cycle = 0
    with open(path, "w", encoding="utf-8") as fh:
        for _tile in range(inst.n_is_t * inst.n_ws_t * inst.n_os_t):
            if c.bg is BgPlacement.BS_L2:
                for j in range(bgn.n_w):
                    for i in range(bgn.n_a):
                        writes = input_bits + v.g2 * BS_INTERNAL_BITS
                        if i == bgn.n_a - 1:
                            writes += v.g2 * BS_INTERNAL_BITS
                        if (j, i) == (bgn.n_w - 1, bgn.n_a - 1):
                            writes += v.g4 * layout.out_word_bits
                        fh.write(json.dumps({
                            "cycle": cycle, "phase": f"w{j}a{i}",
                            "active_l1": inst.active_per_cycle,
                            "register_writes": writes}) + "\n")
                        cycle += 1
            else:
                for r in range(len(inst.variants)):
                    phase = "compute" if len(inst.variants) == 1 \
                        else f"rot{r}"
                    writes = input_bits + v.g4 * layout.out_word_bits
                    fh.write(json.dumps({
                        "cycle": cycle, "phase": phase,
                        "active_l1": inst.active_per_cycle,
                        "register_writes": writes}) + "\n")
                    cycle += 1
