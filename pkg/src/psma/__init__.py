"""Bit-exact simulator and analytical cost model for precision-scalable
MAC arrays."""

from .costmodel import (BandwidthRow, CostReport, RegisterLayout,
                        StructuralCounts, ThroughputRow, cost_report,
                        io_bandwidth, register_layout, structural_counts,
                        throughput, width_chain, width_for_max, width_of)
from .simulator import (ArrayInstance, SimResult, SimulationOverflowError,
                        WorkloadTooSmallError, elaborate, l1_multiply,
                        simulate, swu_gating_mask)
from .taxonomy import (ArchConfig, BgPlacement, ConstraintViolation,
                       LevelSharing, ScalabilityMode, Unrolling,
                       UnsupportedPresetError, config_from_json,
                       config_to_json, design_id, enumerate_design_space,
                       sota_preset, supported_precisions, validate_config)
from .workload import (BgDims, Precision, Workload, bg_loop_dims,
                       golden_outputs, make_constant_workload,
                       make_ideal_workload, make_workload,
                       workload_from_json, workload_to_json)

__version__ = "0.1.0"
