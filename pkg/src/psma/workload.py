"""Workloads for precision-scalable MAC arrays.

A workload collapses the classic nested DNN loops into three category
products: input-sharing (IS) loops, weight-sharing (WS) loops and
output-sharing (OS) loops. Together with an operand precision this fully
determines the computation:

    out[ws, is] = sum over os of act[ws, os] * w[is, os]

Operands are unsigned. Activations depend on the (ws, os) indices only,
weights on (is, os), so there are is_size * ws_size distinct outputs, each
a dot product of length os_size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Seed-based operand generation uses numpy's PCG64 stream; the algorithm
# name is recorded in benchmark metadata so results stay reproducible.
RNG_ALGORITHM = "numpy-pcg64"

WORKLOAD_SCHEMA_VERSION = 1

# Smallest loop sizes that keep every array configuration fully utilized at
# every precision: 4096 multipliers need 64 * 64 outputs when every level
# shares inputs, and a 4096-long reduction when every level shares outputs.
IDEAL_IS_SIZE = 64
IDEAL_WS_SIZE = 64
IDEAL_OS_SIZE = 4096

_VALID_BITS = (2, 4, 8)


@dataclass(frozen=True)
class Precision:
    """Operand precision as an (activation bits, weight bits) pair."""

    act_bits: int
    w_bits: int

    def __post_init__(self) -> None:
        if self.act_bits not in _VALID_BITS or self.w_bits not in _VALID_BITS:
            raise ValueError(f"precision bits must be one of {_VALID_BITS}, "
                             f"got {self.act_bits}x{self.w_bits}")
        if self.act_bits < self.w_bits:
            raise ValueError("activation precision cannot be below weight "
                             f"precision, got {self.act_bits}x{self.w_bits}")

    @property
    def act_max(self) -> int:
        return (1 << self.act_bits) - 1

    @property
    def w_max(self) -> int:
        return (1 << self.w_bits) - 1

    def __str__(self) -> str:
        return f"{self.act_bits}x{self.w_bits}"

    @staticmethod
    def parse(text: str) -> "Precision":
        """Parse an 'AxW' string such as '8x4'."""
        parts = text.lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"expected precision as AxW, got {text!r}")
        try:
            a, w = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"expected precision as AxW, got {text!r}") from exc
        return Precision(a, w)


@dataclass(frozen=True)
class BgDims:
    """Number of 2-bit bit-groups per operand: n_a activation, n_w weight."""

    n_a: int
    n_w: int


def bg_loop_dims(p: Precision) -> BgDims:
    """Bit-group loop sizes for a precision. The base group is 2 bits wide
    (the width of one multiplier input), so an 8-bit operand has 4 groups
    and a 2-bit operand has a single group, i.e. no bit-group loop left to
    unroll."""
    return BgDims(p.act_bits // 2, p.w_bits // 2)


@dataclass(frozen=True)
class Workload:
    """Collapsed loop sizes plus the operand tables they index.

    act has shape (ws_size, os_size), w has shape (is_size, os_size), both
    unsigned values stored as int64.
    """

    precision: Precision
    act: np.ndarray
    w: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.act.ndim != 2 or self.w.ndim != 2:
            raise ValueError("operand tables must be 2-D")
        if self.act.shape[1] != self.w.shape[1]:
            raise ValueError("act and w must agree on the os dimension")
        if self.act.shape[0] < 1 or self.w.shape[0] < 1 or self.act.shape[1] < 1:
            raise ValueError("loop sizes must be at least 1")
        if self.act.min() < 0 or self.act.max() > self.precision.act_max:
            raise ValueError("activation values exceed the declared precision")
        if self.w.min() < 0 or self.w.max() > self.precision.w_max:
            raise ValueError("weight values exceed the declared precision")

    @property
    def is_size(self) -> int:
        return self.w.shape[0]

    @property
    def ws_size(self) -> int:
        return self.act.shape[0]

    @property
    def os_size(self) -> int:
        return self.act.shape[1]


def make_workload(precision: Precision, is_size: int, ws_size: int,
                  os_size: int, seed: int) -> Workload:
    """Generate a workload with operands drawn uniformly from the precision
    range. The draw order (activations first, then weights) is part of the
    serialization contract: a seed fully determines the operands."""
    rng = np.random.default_rng(seed)
    act = rng.integers(0, 1 << precision.act_bits, size=(ws_size, os_size),
                       dtype=np.int64)
    w = rng.integers(0, 1 << precision.w_bits, size=(is_size, os_size),
                     dtype=np.int64)
    return Workload(precision=precision, act=act, w=w, seed=seed)


def make_ideal_workload(precision: Precision, seed: int) -> Workload:
    """The 64 x 64 x 4096 workload that fills every design at every
    precision."""
    return make_workload(precision, IDEAL_IS_SIZE, IDEAL_WS_SIZE,
                         IDEAL_OS_SIZE, seed)


def make_constant_workload(precision: Precision, is_size: int, ws_size: int,
                           os_size: int, act_value: int | None = None,
                           w_value: int | None = None) -> Workload:
    """Workload with every operand set to a constant (defaults to the
    precision maximum). Used to drive worst-case values through the array."""
    if act_value is None:
        act_value = precision.act_max
    if w_value is None:
        w_value = precision.w_max
    act = np.full((ws_size, os_size), act_value, dtype=np.int64)
    w = np.full((is_size, os_size), w_value, dtype=np.int64)
    return Workload(precision=precision, act=act, w=w, seed=None)


def golden_outputs(w: Workload) -> np.ndarray:
    """Reference output table, shape (ws_size, is_size).

    Computed as an exact integer matrix product at unlimited width; every
    array configuration must reproduce it bit for bit.
    """
    bound = w.os_size * w.precision.act_max * w.precision.w_max
    if bound < (1 << 62):
        return w.act @ w.w.T
    # Exact fallback for extreme os sizes; never hit by the shipped sizes.
    return (w.act.astype(object) @ w.w.T.astype(object)).astype(object)


def workload_to_json(w: Workload) -> str:
    """Versioned JSON form. Operands are regenerated from the seed on load,
    never stored, so only seeded workloads serialize."""
    if w.seed is None:
        raise ValueError("only seed-generated workloads can be serialized")
    doc = {
        "version": WORKLOAD_SCHEMA_VERSION,
        "is_size": w.is_size,
        "ws_size": w.ws_size,
        "os_size": w.os_size,
        "act_bits": w.precision.act_bits,
        "w_bits": w.precision.w_bits,
        "seed": w.seed,
    }
    return json.dumps(doc, indent=2)


def workload_from_json(text: str) -> Workload:
    doc = json.loads(text)
    version = doc.get("version")
    if version != WORKLOAD_SCHEMA_VERSION:
        raise ValueError(f"unsupported workload schema version: {version}")
    precision = Precision(doc["act_bits"], doc["w_bits"])
    return make_workload(precision, doc["is_size"], doc["ws_size"],
                         doc["os_size"], doc["seed"])
