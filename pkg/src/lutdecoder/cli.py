"""Command-line entry point: table building, size reports and memory experiments."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from typing import Sequence

from . import clut as clut_mod
from . import lut as lut_mod
from .decoder import LutBackend, OracleBackend, decode_trial
from .harness import (
    BACKENDS,
    BuildError,
    ExperimentSpec,
    paired_ratio,
    run_experiment,
    write_csv,
)
from .layout import build_layout
from .noise import NoiseParams, read_trace, sample_trial, write_trace

TABLE_CONFIGS = ((3, 2), (3, 3), (4, 2), (4, 3), (5, 2))
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _types(arg: str) -> tuple[str, ...]:
    return ("Z", "X") if arg == "both" else (arg.upper(),)


def _table_path(out: str, d: int, m: int, t: str, ext: str) -> str:
    return os.path.join(out, f"d{d}_m{m}_{t.lower()}.{ext}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lutdecoder", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def config_flags(p, distance_required=True):
        p.add_argument("--distance", type=int, required=distance_required)
        p.add_argument("--rounds", type=int, required=distance_required)

    p = sub.add_parser("build-lut", help="program lookup tables and write them to disk")
    config_flags(p)
    p.add_argument("--type", choices=("x", "z", "both"), default="both")
    p.add_argument("--weight-cutoff", type=int)
    p.add_argument("--force-full", action="store_true")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("compress-lut", help="compress tables (from --in or freshly built)")
    config_flags(p, distance_required=False)
    p.add_argument("--type", choices=("x", "z", "both"), default="both")
    p.add_argument("--weight-cutoff", type=int)
    p.add_argument("--in", dest="inputs", action="append", default=[], help="table file (repeatable)")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("report-sizes", help="address/entry widths and table sizes")
    config_flags(p, distance_required=False)

    for name, help_text in (("run", "estimate logical error rates"), ("sweep", "LER over several window sizes")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--distance", type=int, required=True)
        if name == "run":
            p.add_argument("--rounds", type=int, required=True)
        else:
            p.add_argument("--rounds", type=int, action="append", required=True, help="repeatable")
        p.add_argument("--cycles", type=int, default=5)
        p.add_argument("--pphys", type=float, action="append", help="physical error rate (repeatable)")
        p.add_argument("--trials", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--backend", choices=BACKENDS, default="lut")
        p.add_argument("--weight-cutoff", type=int)
        p.add_argument("--force-full", action="store_true")
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="CSV path (default: stdout)")
        if name == "run":
            p.add_argument("--trace", help="also write the sampled trials as JSON lines")

    p = sub.add_parser("verify", help="replay a trace through the table and the matcher")
    config_flags(p)
    p.add_argument("--in", dest="inputs", action="append", required=True, help="trace file")
    p.add_argument("--out", help="per-trial results (default: stdout)")
    return parser


# -- commands ---------------------------------------------------------------


def cmd_build_lut(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    for t in _types(args.type):
        cfg = lut_mod.DecoderConfig(args.distance, args.rounds, t)
        table = lut_mod.build_table(cfg, W=args.weight_cutoff, force_full=args.force_full)
        path = _table_path(args.out, args.distance, args.rounds, t, "lut")
        lut_mod.serialize(table, path)
        print(f"{path}: {len(table.entries)} entries")
    return 0


def _cutoff(args) -> int:
    return lut_mod.DEFAULT_WEIGHT_CUTOFF if args.weight_cutoff is None else args.weight_cutoff


def cmd_compress_lut(args) -> int:
    tables = [lut_mod.deserialize(path) for path in args.inputs]
    if not tables:
        if args.distance is None or args.rounds is None:
            raise UsageError("compress-lut needs --in or both --distance and --rounds")
        for t in _types(args.type):
            cfg = lut_mod.DecoderConfig(args.distance, args.rounds, t)
            frame = (args.distance, args.rounds) == (3, 2) and args.weight_cutoff is None
            w = None if frame else _cutoff(args)
            tables.append(lut_mod.build_table(cfg, W=w))
    cluts = {}
    for table in tables:
        cfg = table.config
        if isinstance(table, lut_mod.Lut) and (cfg.d, cfg.m) == (3, 2) and args.weight_cutoff is None:
            c = clut_mod.compress_frame(table)
        else:
            if args.weight_cutoff is None and isinstance(table, lut_mod.SparseLut):
                w = table.weight_cutoff
            else:
                w = _cutoff(args)
            c = clut_mod.compress_rank(table, W=w)
        cluts[cfg.stab_type] = c
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            path = _table_path(args.out, cfg.d, cfg.m, cfg.stab_type, "clut")
            clut_mod.serialize(c, path)
            print(f"{path}: {c.entry_count} entries")
    rep = clut_mod.memory_report(cluts)
    for row in rep["rows"]:
        print(
            f"{row['type']}: {lut_mod.format_bytes(row['clut_bytes'])} compressed, "
            f"{lut_mod.format_bytes(row['full_bytes'])} full ({row['ratio']:.1f}x)"
        )
    print(
        f"total: {lut_mod.format_bytes(rep['clut_total'])} vs {lut_mod.format_bytes(rep['full_total'])} "
        f"({rep['ratio']:.1f}x)"
    )
    return 0


def cmd_report_sizes(args) -> int:
    if (args.distance is None) != (args.rounds is None):
        raise UsageError("give both --distance and --rounds, or neither")
    configs = TABLE_CONFIGS if args.distance is None else ((args.distance, args.rounds),)
    for d, m in configs:
        print(lut_mod.format_size_row(lut_mod.size_report(d, m)))
    return 0


def _spec(args, m: int) -> ExperimentSpec:
    if not args.pphys:
        raise UsageError("at least one --pphys is required")
    return ExperimentSpec(
        d=args.distance,
        m=m,
        cycles=args.cycles,
        trials=args.trials,
        seed=args.seed,
        p_list=tuple(args.pphys),
        backend=args.backend,
        weight_cutoff=args.weight_cutoff,
        force_full=args.force_full,
    )


def _write_points(points, out: str | None) -> None:
    if out:
        write_csv(out, points)
    else:
        write_csv(sys.stdout, points)


def cmd_run(args) -> int:
    spec = _spec(args, args.rounds)
    report = run_experiment(spec, workers=args.workers)
    _write_points(report.points, args.out)
    if args.trace:
        layout = build_layout(spec.d)
        with open(args.trace, "w") as fh:
            for p in spec.p_list:
                params = NoiseParams(p, spec.cycles, spec.seed)
                write_trace(fh, layout, params, ((i, sample_trial(layout, params, i)) for i in range(spec.trials)))
    return 0


def cmd_sweep(args) -> int:
    base = _spec(args, args.rounds[0])
    reports = [run_experiment(replace(base, m=m), workers=args.workers, keep_outcomes=True) for m in args.rounds]
    _write_points([pt for r in reports for pt in r.points], args.out)
    for a, b in zip(reports, reports[1:]):
        for p in base.p_list:
            try:
                ratio, se = paired_ratio(a.outcomes[p], b.outcomes[p])
            except ValueError:
                continue
            print(f"p={p:g} LER(m={a.spec.m})/LER(m={b.spec.m}) = {ratio:.3f} +- {se:.3f}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    layout = build_layout(args.distance)
    backends = {}
    for t in ("Z", "X"):
        cfg = lut_mod.DecoderConfig(args.distance, args.rounds, t)
        backends[t] = (LutBackend(lut_mod.build_table(cfg)), OracleBackend(cfg))
    out = open(args.out, "w") if args.out else sys.stdout
    mismatches = total = 0
    try:
        out.write("trial_index,logical_error,decoder_failures\n")
        for path in args.inputs:
            with open(path) as fh:
                for index, record in read_trace(fh, layout):
                    table = decode_trial(layout, record, {t: pair[0] for t, pair in backends.items()})
                    oracle = decode_trial(layout, record, {t: pair[1] for t, pair in backends.items()})
                    total += 1
                    mismatches += table != oracle
                    out.write(f"{index},{int(table.logical_error)},{table.decoder_failures}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"{total} trials replayed, {mismatches} mismatches", file=sys.stderr)
    return 0 if mismatches == 0 else EXIT_DATA


COMMANDS = {
    "build-lut": cmd_build_lut,
    "compress-lut": cmd_compress_lut,
    "report-sizes": cmd_report_sizes,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BuildError, ValueError, OSError, KeyError) as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
