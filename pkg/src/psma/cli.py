"""Command line front end.

Subcommands: enumerate, validate, preset, simulate, bench, report. The
bench sweep writes a versioned CSV (deterministic byte-for-byte for a
given run spec), a sidecar metadata JSON (tool version, RNG algorithm,
timestamp, resolved spec) and a plain-text comparison matrix. Exit code 0
means every simulated row matched the golden reference bit-exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .costmodel import cost_report
from .report import (CSV_COLUMNS, REPORT_SCHEMA_VERSION, BenchRow,
                     matrix_from_rows, render_matrix, rows_to_csv)
from .simulator import elaborate, simulate
from .taxonomy import (EXTENDED_PRECISIONS, PRESET_NAMES, ArchConfig,
                       BgPlacement, LevelSharing, ScalabilityMode,
                       Unrolling, UnsupportedPresetError, config_from_dict,
                       config_to_dict, design_id, enumerate_design_space,
                       sota_preset, supported_precisions, validate_config)
from .workload import (RNG_ALGORITHM, Precision, golden_outputs,
                       make_workload, workload_from_json)

DESK_IS, DESK_WS, DESK_OS = 64, 64, 256
PAPER_OS = 4096


def _parse_filters(pairs: list[str]) -> dict[str, str]:
    filters = {}
    for pair in pairs:
        if "=" not in pair:
            raise SystemExit(f"malformed filter {pair!r}, expected key=value")
        key, value = pair.split("=", 1)
        if key not in ("l4", "l3", "l2", "bg", "config", "mode", "preset"):
            raise SystemExit(f"unknown filter key {key!r}")
        filters[key] = value
    return filters


def _matches(c: ArchConfig, filters: dict[str, str]) -> bool:
    doc = config_to_dict(c)
    for key, value in filters.items():
        if key == "preset":
            try:
                ref = sota_preset(value)
            except (ValueError, UnsupportedPresetError) as exc:
                raise SystemExit(str(exc)) from exc
            if (c.l4, c.l3, c.l2, c.bg, c.fu_swu) != \
                    (ref.l4, ref.l3, ref.l2, ref.bg, ref.fu_swu):
                return False
        elif doc.get(key) != value:
            return False
    return True


def _select_designs(filters: dict[str, str]) -> list[ArchConfig]:
    return [c for c in enumerate_design_space() if _matches(c, filters)]


def _config_from_args(args) -> ArchConfig:
    """Resolve a single configuration from --preset, --config or parts."""
    if args.preset is None and args.config is None and args.l4 is None:
        raise SystemExit("specify a design via --preset, --config, or "
                         "--l4/--l3/--l2/--bg/--unroll/--mode")
    if args.preset is not None:
        c = sota_preset(args.preset)
        if args.mode is not None:
            c = dataclasses.replace(c, mode=ScalabilityMode(args.mode))
    elif args.config is not None:
        text = args.config
        if not text.lstrip().startswith("{"):
            with open(text, encoding="utf-8") as fh:
                text = fh.read()
        c = config_from_dict(json.loads(text))
        if args.mode is not None:
            c = dataclasses.replace(c, mode=ScalabilityMode(args.mode))
    else:
        missing = [name for name in ("l4", "l3", "l2", "bg", "unroll")
                   if getattr(args, name) is None]
        if missing:
            raise SystemExit(f"missing config flags: {missing}")
        c = ArchConfig(l4=LevelSharing(args.l4), l3=LevelSharing(args.l3),
                       l2=LevelSharing(args.l2), bg=BgPlacement(args.bg),
                       fu_swu=Unrolling(args.unroll),
                       mode=ScalabilityMode(args.mode or "2D-A"))
    return c


def _add_config_flags(sub) -> None:
    sub.add_argument("--preset", help="published design name "
                     f"({', '.join(PRESET_NAMES)})")
    sub.add_argument("--config", help="configuration JSON (path or inline)")
    sub.add_argument("--l4", choices=["IS", "HS", "OS"])
    sub.add_argument("--l3", choices=["IS", "HS", "OS"])
    sub.add_argument("--l2", choices=["IS", "HS", "OS"])
    sub.add_argument("--bg", choices=["L2", "L3", "BS-L2"])
    sub.add_argument("--unroll", choices=["FU", "SWU"])
    sub.add_argument("--mode", choices=["1D", "2D-A", "2D-S"],
                     help="precision scalability mode (overrides preset)")


def _add_workload_flags(sub) -> None:
    sub.add_argument("--is-size", type=int, default=DESK_IS)
    sub.add_argument("--ws-size", type=int, default=DESK_WS)
    sub.add_argument("--os-size", type=int, default=None)
    sub.add_argument("--paper-scale", action="store_true",
                     help=f"use the full {PAPER_OS}-deep reduction instead "
                          f"of the desk-scale default ({DESK_OS})")


def _resolve_os(args) -> int:
    if args.os_size is not None:
        return args.os_size
    return PAPER_OS if args.paper_scale else DESK_OS


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_enumerate(args) -> int:
    filters = _parse_filters(args.filter or [])
    designs = _select_designs(filters)
    if args.format == "json":
        text = json.dumps([{"id": design_id(c), **config_to_dict(c)}
                           for c in designs], indent=2) + "\n"
    elif args.format == "csv":
        lines = ["id,l4,l3,l2,bg,config,mode"]
        for c in designs:
            d = config_to_dict(c)
            lines.append(",".join([design_id(c), d["l4"], d["l3"], d["l2"],
                                   d["bg"], d["config"], d["mode"]]))
        text = "\n".join(lines) + "\n"
    else:
        lines = [f"{design_id(c):<24} mode={c.mode}" for c in designs]
        lines.append(f"{len(designs)} designs")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


def cmd_validate(args) -> int:
    try:
        c = _config_from_args(args)
    except UnsupportedPresetError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return 1
    violations = validate_config(c)
    if violations:
        for v in violations:
            print(str(v))
        return 1
    print(f"ok: {design_id(c)}")
    return 0


def cmd_preset(args) -> int:
    try:
        c = sota_preset(args.name)
    except (ValueError, UnsupportedPresetError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if args.format == "json":
        print(json.dumps({"id": design_id(c), **config_to_dict(c)},
                         indent=2))
    else:
        doc = config_to_dict(c)
        print(f"{args.name}: {design_id(c)}")
        for key in ("l4", "l3", "l2", "bg", "config", "mode"):
            print(f"  {key:<6} {doc[key]}")
        print("  precisions "
              + " ".join(str(p) for p in supported_precisions(c)))
    return 0


def _bench_one(c: ArchConfig, p: Precision, seeds: list[int],
               is_size: int, ws_size: int, os_size: int,
               trace_dir: str | None = None) -> list[BenchRow]:
    rows = []
    inst = None
    cost = cost_report(c)
    for seed in seeds:
        w = make_workload(p, is_size, ws_size, os_size, seed)
        if inst is None:
            inst = elaborate(c, p, w)
        trace_path = None
        if trace_dir:
            safe = design_id(c).replace("/", "_")
            trace_path = os.path.join(trace_dir, f"{safe}-{p}-s{seed}.jsonl")
        res = simulate(inst, w, trace_path=trace_path)
        ok = bool(np.array_equal(res.outputs, golden_outputs(w)))
        rows.append(BenchRow(design_id=design_id(c), precision=p,
                             seed=seed, extended=p in EXTENDED_PRECISIONS,
                             oracle_pass=ok, sim=res, cost=cost))
    return rows


def cmd_simulate(args) -> int:
    c = _config_from_args(args)
    violations = validate_config(c)
    if violations:
        for v in violations:
            print(str(v), file=sys.stderr)
        return 1
    p = Precision.parse(args.precision)
    if args.workload:
        with open(args.workload, encoding="utf-8") as fh:
            w = workload_from_json(fh.read())
        if w.precision != p:
            raise SystemExit("workload precision differs from --precision")
    else:
        w = make_workload(p, args.is_size, args.ws_size, _resolve_os(args),
                          args.seed)
    inst = elaborate(c, p, w)
    res = simulate(inst, w, trace_path=args.trace)
    ok = bool(np.array_equal(res.outputs, golden_outputs(w)))
    row = BenchRow(design_id=design_id(c), precision=p, seed=w.seed,
                   extended=p in EXTENDED_PRECISIONS, oracle_pass=ok,
                   sim=res, cost=cost_report(c))
    doc = row.as_record()
    doc["max_values"] = res.max_values
    doc["declared_widths"] = res.declared_widths
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0 if ok else 1


def cmd_bench(args) -> int:
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = json.load(fh)["run"]
        designs = [config_from_dict(d) for d in spec["designs"]]
        precisions = spec["precisions"]
        seeds = spec["seeds"]
        is_size, ws_size, os_size = (spec["is_size"], spec["ws_size"],
                                     spec["os_size"])
    else:
        if args.preset:
            designs = [sota_preset(name) for name in args.preset]
        else:
            designs = _select_designs(_parse_filters(args.filter or []))
        precisions = args.precision or None
        seeds = [int(s) for s in args.seeds.split(",")]
        is_size, ws_size = args.is_size, args.ws_size
        os_size = _resolve_os(args)
    if not designs:
        raise SystemExit("no designs selected")

    if args.trace:
        os.makedirs(args.trace, exist_ok=True)

    rows: list[BenchRow] = []
    configs: dict[str, ArchConfig] = {}
    for c in designs:
        configs[design_id(c)] = c
        supported = supported_precisions(c)
        if precisions is None:
            run_precisions = list(supported)
        else:
            wanted = [Precision.parse(t) for t in precisions]
            run_precisions = [p for p in supported if p in wanted]
            skipped = [t for t in precisions
                       if Precision.parse(t) not in supported]
            if skipped:
                print(f"note: {design_id(c)} skips unsupported "
                      f"{','.join(skipped)}", file=sys.stderr)
        for p in run_precisions:
            rows.extend(_bench_one(c, p, seeds, is_size, ws_size, os_size,
                                   trace_dir=args.trace))

    csv_text = rows_to_csv(rows)
    matrix = matrix_from_rows(rows, configs, args.matrix_metric,
                              args.matrix_precision)
    run_spec = {
        "designs": [config_to_dict(c) for c in designs],
        "precisions": precisions,
        "seeds": seeds,
        "is_size": is_size, "ws_size": ws_size, "os_size": os_size,
    }
    meta = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "run": run_spec,
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        base = args.out[:-4] if args.out.endswith(".csv") else args.out
        with open(base + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
        with open(base + ".matrix.txt", "w", encoding="utf-8") as fh:
            fh.write(matrix)
    else:
        sys.stdout.write(csv_text)
        sys.stdout.write("\n" + matrix)

    failed = [r for r in rows if not r.oracle_pass]
    if failed:
        for r in failed:
            print(f"ORACLE MISMATCH: {r.design_id} {r.precision} "
                  f"seed {r.seed}", file=sys.stderr)
        return 1
    print(f"{len(rows)} rows, all oracle checks passed", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    import csv as csv_mod
    with open(args.csv, encoding="utf-8") as fh:
        records = list(csv_mod.DictReader(fh))
    if args.metric not in CSV_COLUMNS:
        raise SystemExit(f"unknown metric {args.metric!r}")
    cells = {}
    for rec in records:
        if rec["precision"] != args.precision:
            continue
        if int(rec["seed"]) != args.seed:
            continue
        l4_l3, combo = rec["design_id"].split("/")
        key = (l4_l3.replace("-", "/"), combo)
        if key not in cells:
            cells[key] = rec[args.metric]
    sys.stdout.write(render_matrix(cells, args.metric, args.precision))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psma",
        description="Bit-exact simulator and cost model for "
                    "precision-scalable MAC arrays")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_enum = sub.add_parser("enumerate", help="list the 72-design space")
    p_enum.add_argument("--filter", action="append", metavar="KEY=VALUE",
                        help="l4/l3/l2/bg/config/mode/preset filters")
    p_enum.add_argument("--format", choices=["table", "csv", "json"],
                        default="table")
    p_enum.add_argument("--out")
    p_enum.set_defaults(func=cmd_enumerate)

    p_val = sub.add_parser("validate", help="check a configuration against "
                                            "the template constraints")
    _add_config_flags(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_pre = sub.add_parser("preset", help="show a published design mapping")
    p_pre.add_argument("name")
    p_pre.add_argument("--format", choices=["table", "json"],
                       default="table")
    p_pre.set_defaults(func=cmd_preset)

    p_sim = sub.add_parser("simulate", help="simulate one design")
    _add_config_flags(p_sim)
    _add_workload_flags(p_sim)
    p_sim.add_argument("--workload", help="workload JSON file (overrides "
                                          "size and seed flags)")
    p_sim.add_argument("--precision", required=True, metavar="AxW")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--trace", help="write a per-cycle JSON-lines trace")
    p_sim.add_argument("--out")
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("bench", help="sweep designs and emit reports")
    p_bench.add_argument("--filter", action="append", metavar="KEY=VALUE")
    p_bench.add_argument("--preset", action="append",
                         help="benchmark presets instead of the full space")
    p_bench.add_argument("--precision", action="append", metavar="AxW",
                         help="restrict precisions (default: all supported)")
    p_bench.add_argument("--seeds", default="0",
                         help="comma-separated seed list")
    _add_workload_flags(p_bench)
    p_bench.add_argument("--out", help="CSV path; writes .meta.json and "
                                       ".matrix.txt next to it")
    p_bench.add_argument("--trace", help="directory for per-row traces")
    p_bench.add_argument("--spec", help="rerun a serialized run spec "
                                        "(.meta.json)")
    p_bench.add_argument("--matrix-metric", default="register_bits",
                         choices=CSV_COLUMNS)
    p_bench.add_argument("--matrix-precision", default="8x8")
    p_bench.set_defaults(func=cmd_bench)

    p_rep = sub.add_parser("report", help="render a comparison matrix from "
                                          "a bench CSV")
    p_rep.add_argument("--csv", required=True)
    p_rep.add_argument("--metric", required=True)
    p_rep.add_argument("--precision", default="8x8")
    p_rep.add_argument("--seed", type=int, default=0)
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
