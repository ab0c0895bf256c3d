"""Report emission: benchmark CSV rows and text comparison matrices.

The CSV schema is versioned; any column change bumps REPORT_SCHEMA_VERSION.
Run metadata (tool version, RNG algorithm, timestamp, resolved run spec)
lives in a sidecar JSON file so that reruns of the same spec produce byte
identical CSV files.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .costmodel import CostReport
from .simulator import SimResult
from .taxonomy import ArchConfig, BgPlacement, LevelSharing, Unrolling
from .workload import Precision

REPORT_SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "design_id", "precision", "seed", "extended", "oracle_pass",
    "cycles", "l1_ops", "paper_ops", "utilization",
    "act_bw_bits", "w_bw_bits", "out_bw_bits",
    "act_words", "w_words", "out_words", "out_word_bits", "register_bits",
    "shifter_trees", "shifter_count", "adder_nodes", "adder_bits",
    "bs_internal_regs", "bs_internal_bits",
    "adder_invocations", "register_write_bits", "shifter_invocations",
]

# Column labels of the 8 (unrolling / bit-group placement / L2) combos, in
# canonical design-table order.
MATRIX_COLUMNS = [
    "FU-L2-IS", "FU-L2-HS", "FU-L2-OS",
    "FU-L3-HS", "FU-L3-OS", "FU-BS-L2-OS",
    "SWU-L2-IS", "SWU-L2-OS",
]
MATRIX_ROWS = ["IS/IS", "IS/HS", "IS/OS",
               "HS/IS", "HS/HS", "HS/OS",
               "OS/IS", "OS/HS", "OS/OS"]


def column_label(c: ArchConfig) -> str:
    return f"{c.fu_swu}-{c.bg}-{c.l2}"


def row_label(c: ArchConfig) -> str:
    return f"{c.l4}/{c.l3}"


@dataclass(frozen=True)
class BenchRow:
    """One (design, precision, seed) benchmark record."""

    design_id: str
    precision: Precision
    seed: int
    extended: bool
    oracle_pass: bool
    sim: SimResult
    cost: CostReport

    def as_record(self) -> dict:
        bw = self.cost.bandwidth[self.precision]
        layout = self.cost.layout
        st = self.cost.structural
        return {
            "design_id": self.design_id,
            "precision": str(self.precision),
            "seed": self.seed,
            "extended": str(self.extended).lower(),
            "oracle_pass": str(self.oracle_pass).lower(),
            "cycles": self.sim.cycles,
            "l1_ops": self.sim.l1_ops,
            "paper_ops": self.sim.paper_ops,
            "utilization": repr(self.sim.utilization),
            "act_bw_bits": bw.act_bits_per_cycle,
            "w_bw_bits": bw.w_bits_per_cycle,
            "out_bw_bits": bw.out_bits_per_cycle,
            "act_words": layout.act_words,
            "w_words": layout.w_words,
            "out_words": layout.out_words,
            "out_word_bits": layout.out_word_bits,
            "register_bits": layout.total_bits,
            "shifter_trees": st.shifter_trees,
            "shifter_count": st.shifter_count,
            "adder_nodes": st.adder_node_count,
            "adder_bits": st.total_adder_input_bits,
            "bs_internal_regs": layout.bs_internal_regs,
            "bs_internal_bits": layout.bs_internal_bits,
            "adder_invocations": self.sim.activity["adder_invocations"],
            "register_write_bits": self.sim.activity["register_write_bits"],
            "shifter_invocations": self.sim.activity["shifter_invocations"],
        }


def rows_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_record())
    return buf.getvalue()


def render_matrix(cells: dict[tuple[str, str], object], metric: str,
                  precision: str) -> str:
    """Plain-text pivot: one row per L4/L3 mode, one column per
    unrolling/bit-group/L2 combo. Missing cells render as '-'."""
    col_w = max(len(metric), 12,
                *(len(str(v)) for v in cells.values())) + 2 \
        if cells else 14
    head = f"{metric} at {precision}"
    lines = [head, ""]
    header = "L4/L3".ljust(8) + "".join(col.rjust(col_w)
                                        for col in MATRIX_COLUMNS)
    lines.append(header)
    lines.append("-" * len(header))
    for row in MATRIX_ROWS:
        cells_txt = "".join(
            str(cells.get((row, col), "-")).rjust(col_w)
            for col in MATRIX_COLUMNS)
        lines.append(row.ljust(8) + cells_txt)
    return "\n".join(lines) + "\n"


def matrix_from_rows(rows: list[BenchRow], configs: dict[str, ArchConfig],
                     metric: str, precision: str) -> str:
    cells = {}
    for row in rows:
        if str(row.precision) != precision:
            continue
        c = configs[row.design_id]
        key = (row_label(c), column_label(c))
        if key not in cells:
            cells[key] = row.as_record()[metric]
    return render_matrix(cells, metric, precision)
