"""Taxonomy of precision-scalable MAC array architectures.

An architecture point is described by six parameters: the spatial sharing
mode of levels L4, L3 and L2 (input/hybrid/output sharing), where the
bit-group loops unroll (spatially inside L2, spatially across L3, or
temporally with bit-serial registers at L2), whether the design is fully
unrolled (FU) or sub-word unrolled (SWU), and which precision scalability
mode it supports.

For spatial bit-group unrolling the stored sharing of the hosting level is
the residual sharing that appears once the precision drops below maximum;
at full precision that level is entirely occupied by bit-group positions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .workload import Precision


class LevelSharing(Enum):
    """Spatial unrolling of one 4x4 level.

    IS shares inputs and weights by broadcast (16 independent outputs),
    HS broadcasts one operand and sums along the other dimension (4
    outputs), OS sums everything through an adder tree (1 output).
    """

    IS = "IS"
    HS = "HS"
    OS = "OS"

    def __str__(self) -> str:
        return self.value


class BgPlacement(Enum):
    """Where the bit-group loops unroll."""

    L2 = "L2"
    L3 = "L3"
    BS_L2 = "BS-L2"

    def __str__(self) -> str:
        return self.value


class Unrolling(Enum):
    """Bandwidth vs utilization trade-off: fully unrolled designs keep all
    multipliers busy at every precision at the cost of growing operand
    bandwidth; sub-word unrolled designs keep bandwidth fixed and gate
    multipliers instead."""

    FU = "FU"
    SWU = "SWU"

    def __str__(self) -> str:
        return self.value


class ScalabilityMode(Enum):
    ONE_D = "1D"
    TWO_D_ASYM = "2D-A"
    TWO_D_SYM = "2D-S"

    def __str__(self) -> str:
        return self.value


# Precision sets per scalability mode, widest first. The asymmetric set
# includes 4x2, which follows from independent activation/weight scaling;
# reports tag it as an extended point.
MODE_PRECISIONS: dict[ScalabilityMode, tuple[Precision, ...]] = {
    ScalabilityMode.ONE_D: (
        Precision(8, 8), Precision(8, 4), Precision(8, 2),
    ),
    ScalabilityMode.TWO_D_ASYM: (
        Precision(8, 8), Precision(8, 4), Precision(8, 2),
        Precision(4, 4), Precision(4, 2), Precision(2, 2),
    ),
    ScalabilityMode.TWO_D_SYM: (
        Precision(8, 8), Precision(4, 4), Precision(2, 2),
    ),
}

EXTENDED_PRECISIONS = frozenset({Precision(4, 2)})


@dataclass(frozen=True)
class ArchConfig:
    """One point of the architecture space.

    l4/l3/l2 store the residual (lowest-precision) sharing of each level.
    hs_weight_broadcast flips the hybrid-sharing orientation from the
    default (activations broadcast, weights vary) to the mirrored form.
    """

    l4: LevelSharing
    l3: LevelSharing
    l2: LevelSharing
    bg: BgPlacement
    fu_swu: Unrolling
    mode: ScalabilityMode
    hs_weight_broadcast: bool = field(default=False)


@dataclass(frozen=True)
class ConstraintViolation:
    number: int
    message: str

    def __str__(self) -> str:
        return f"constraint {self.number}: {self.message}"


def validate_config(c: ArchConfig) -> list[ConstraintViolation]:
    """Check an architecture point against the template constraints.

    Returns every violation, not just the first; an empty list means the
    configuration is buildable.
    """
    violations = []
    if c.bg is BgPlacement.L3 and c.l2 is LevelSharing.IS:
        violations.append(ConstraintViolation(
            1, "bit-groups unrolled at L3 require L2 output sharing so the "
               "shifters can be shared; L2 cannot be IS"))
    if c.bg is BgPlacement.BS_L2 and c.l2 is not LevelSharing.OS:
        violations.append(ConstraintViolation(
            2, "bit-serial designs keep one internal register per L2 unit, "
               "which requires L2 to be OS"))
    if c.fu_swu is Unrolling.SWU:
        if c.bg is not BgPlacement.L2:
            violations.append(ConstraintViolation(
                3, "sub-word unrolled designs unroll bit-groups inside L2"))
        if c.l2 not in (LevelSharing.IS, LevelSharing.OS):
            violations.append(ConstraintViolation(
                3, "sub-word unrolled designs support only OS or no sharing "
                   "(IS) at L2"))
        if c.mode is not ScalabilityMode.TWO_D_SYM:
            violations.append(ConstraintViolation(
                3, "sub-word unrolled designs scale activations and weights "
                   "together (symmetric mode only)"))
    return violations


# The eight legal (unrolling, bg placement, L2 sharing) columns, in the
# canonical design-table order.
_COLUMNS: tuple[tuple[Unrolling, BgPlacement, LevelSharing], ...] = (
    (Unrolling.FU, BgPlacement.L2, LevelSharing.IS),
    (Unrolling.FU, BgPlacement.L2, LevelSharing.HS),
    (Unrolling.FU, BgPlacement.L2, LevelSharing.OS),
    (Unrolling.FU, BgPlacement.L3, LevelSharing.HS),
    (Unrolling.FU, BgPlacement.L3, LevelSharing.OS),
    (Unrolling.FU, BgPlacement.BS_L2, LevelSharing.OS),
    (Unrolling.SWU, BgPlacement.L2, LevelSharing.IS),
    (Unrolling.SWU, BgPlacement.L2, LevelSharing.OS),
)

_LEVEL_ORDER = (LevelSharing.IS, LevelSharing.HS, LevelSharing.OS)


def enumerate_design_space() -> list[ArchConfig]:
    """All 72 buildable designs: 3 L4 sharings x 3 L3 sharings x 8 columns.

    The scalability mode is fixed to the widest each column supports
    (asymmetric for FU, symmetric for SWU); it is a run-time axis, not a
    structural one. Ordering is L4-major, then L3, then column order.
    """
    designs = []
    for l4 in _LEVEL_ORDER:
        for l3 in _LEVEL_ORDER:
            for fu_swu, bg, l2 in _COLUMNS:
                mode = (ScalabilityMode.TWO_D_SYM if fu_swu is Unrolling.SWU
                        else ScalabilityMode.TWO_D_ASYM)
                designs.append(ArchConfig(l4=l4, l3=l3, l2=l2, bg=bg,
                                          fu_swu=fu_swu, mode=mode))
    return designs


def design_id(c: ArchConfig) -> str:
    """Stable identifier of the form L4-L3/CONFIG-BG-L2, e.g.
    'IS-OS/FU-L3-OS'."""
    return f"{c.l4}-{c.l3}/{c.fu_swu}-{c.bg}-{c.l2}"


class UnsupportedPresetError(ValueError):
    """Raised for published designs the uniform template cannot express."""


# Published accelerator mappings. Each entry stores the residual sharings
# (the low-precision rows of the mapping), the bit-group placement, the
# unrolling style and the scalability mode the silicon supports.
_PRESETS: dict[str, ArchConfig] = {
    "DNPU": ArchConfig(LevelSharing.IS, LevelSharing.OS, LevelSharing.IS,
                       BgPlacement.L2, Unrolling.FU, ScalabilityMode.ONE_D),
    "BitFusion": ArchConfig(LevelSharing.IS, LevelSharing.OS, LevelSharing.OS,
                            BgPlacement.L2, Unrolling.FU,
                            ScalabilityMode.TWO_D_ASYM),
    "BitBlade": ArchConfig(LevelSharing.IS, LevelSharing.OS, LevelSharing.OS,
                           BgPlacement.L3, Unrolling.FU,
                           ScalabilityMode.TWO_D_ASYM),
    "Ghodrati": ArchConfig(LevelSharing.IS, LevelSharing.OS, LevelSharing.OS,
                           BgPlacement.L3, Unrolling.FU,
                           ScalabilityMode.TWO_D_ASYM),
    "Stripes": ArchConfig(LevelSharing.IS, LevelSharing.IS, LevelSharing.OS,
                          BgPlacement.BS_L2, Unrolling.FU,
                          ScalabilityMode.ONE_D),
    "Loom": ArchConfig(LevelSharing.IS, LevelSharing.IS, LevelSharing.OS,
                       BgPlacement.BS_L2, Unrolling.FU,
                       ScalabilityMode.TWO_D_ASYM),
    "Envision": ArchConfig(LevelSharing.IS, LevelSharing.IS, LevelSharing.IS,
                           BgPlacement.L2, Unrolling.SWU,
                           ScalabilityMode.TWO_D_SYM),
    "ST": ArchConfig(LevelSharing.IS, LevelSharing.OS, LevelSharing.OS,
                     BgPlacement.L2, Unrolling.SWU,
                     ScalabilityMode.TWO_D_SYM),
}

PRESET_NAMES = tuple(_PRESETS)


def sota_preset(name: str) -> ArchConfig:
    """Look up a published design by name. UNPU is rejected explicitly: it
    is a bit-serial design with input sharing at L2 (registers at L1),
    which the uniform template does not support."""
    canonical = {k.lower(): k for k in _PRESETS}
    key = canonical.get(name.lower())
    if key is not None:
        return _PRESETS[key]
    if name.lower() == "unpu":
        raise UnsupportedPresetError(
            "UNPU is a bit-serial design with internal registers at L1 "
            "(L2 input sharing), which the uniform template does not "
            "support")
    raise ValueError(f"unknown preset {name!r}; known presets: "
                     f"{', '.join(PRESET_NAMES)} (UNPU is unsupported)")


def supported_precisions(c: ArchConfig) -> list[Precision]:
    """Precisions the configuration can run, widest first."""
    violations = validate_config(c)
    if violations:
        raise ValueError("invalid configuration: "
                         + "; ".join(str(v) for v in violations))
    return list(MODE_PRECISIONS[c.mode])


def config_to_dict(c: ArchConfig) -> dict:
    doc = {
        "l4": c.l4.value,
        "l3": c.l3.value,
        "l2": c.l2.value,
        "bg": c.bg.value,
        "config": c.fu_swu.value,
        "mode": c.mode.value,
    }
    if c.hs_weight_broadcast:
        doc["hs_flip"] = True
    return doc


def config_to_json(c: ArchConfig) -> str:
    return json.dumps(config_to_dict(c), indent=2)


def config_from_dict(doc: dict) -> ArchConfig:
    try:
        return ArchConfig(
            l4=LevelSharing(doc["l4"]),
            l3=LevelSharing(doc["l3"]),
            l2=LevelSharing(doc["l2"]),
            bg=BgPlacement(doc["bg"]),
            fu_swu=Unrolling(doc["config"]),
            mode=ScalabilityMode(doc["mode"]),
            hs_weight_broadcast=bool(doc.get("hs_flip", False)),
        )
    except KeyError as exc:
        raise ValueError(f"missing configuration field: {exc}") from exc


def config_from_json(text: str) -> ArchConfig:
    return config_from_dict(json.loads(text))
