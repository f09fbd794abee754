"""``bench`` command line: run the sweep, render ratio grids, print the model.

    bench sweep --spatial 14,28 --channels 64,128 --out results.csv
    bench ratio --in results.csv
    bench model --arch a53
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from ..errors import BitserialError
from ..perfmodel import BUILTIN_PROFILES, load_profiles, model_table
from .harness import (ALL_METHODS, RUN_METADATA, SweepConfig, emit_csv, emit_ratio_grid,
                      expected_record_count, read_csv, run_sweep)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pairs(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for item in text.split(","):
        parts = item.strip().lower().split("x")
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise argparse.ArgumentTypeError(f"expected AxB items like 2x2, got {item!r}")
        out.append((int(parts[0]), int(parts[1])))
    return tuple(out)


def _kernels(text: str) -> tuple[int, ...]:
    ks = []
    for a, b in _pairs(text):
        if a != b:
            raise argparse.ArgumentTypeError(f"kernels must be square, got {a}x{b}")
        ks.append(a)
    return tuple(ks)


def _methods(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    defaults = SweepConfig()
    sw = sub.add_parser("sweep", help="time all methods over the layer grid")
    sw.add_argument("--kernels", type=_kernels, default=defaults.kernels, help="e.g. 1x1,3x3")
    sw.add_argument("--spatial", type=_int_list, default=defaults.spatial_sizes)
    sw.add_argument("--channels", type=_int_list, default=defaults.channel_sizes)
    sw.add_argument("--bits", type=_pairs, default=defaults.bit_pairs, help="e.g. 1x1,2x2,3x3")
    sw.add_argument("--methods", type=_methods, default=defaults.methods,
                    help=f"subset of {','.join(ALL_METHODS)}")
    sw.add_argument("--repeats", type=int, default=defaults.repeats)
    sw.add_argument("--warmup", type=int, default=defaults.warmup)
    sw.add_argument("--seed", type=int, default=defaults.seed)
    sw.add_argument("--mem-budget-mb", type=float, default=defaults.mem_budget_mb)
    sw.add_argument("--out", required=True, type=Path, help="CSV output path")
    sw.add_argument("-q", "--quiet", action="store_true")

    ra = sub.add_parser("ratio", help="render ratio grids from a sweep CSV")
    ra.add_argument("--in", dest="path", required=True, type=Path)

    mo = sub.add_parser("model", help="print the analytical throughput model")
    mo.add_argument("--arch", default="a7", help="a7, a53, or a profile file")
    return parser


def _sweep(args) -> int:
    cfg = SweepConfig(kernels=args.kernels, spatial_sizes=args.spatial,
                      channel_sizes=args.channels, bit_pairs=args.bits,
                      methods=args.methods, repeats=args.repeats, warmup=args.warmup,
                      seed=args.seed, mem_budget_mb=args.mem_budget_mb)
    total = expected_record_count(cfg)
    done = 0

    def progress(rec):
        nonlocal done
        done += 1
        if args.quiet:
            return
        what = f"{rec.method} {rec.bits_a}x{rec.bits_w}" if rec.method == "bitserial" else rec.method
        where = f"k={rec.kernel} S={rec.spatial} C={rec.channels}"
        status = "skipped" if rec.skipped else f"{rec.median_seconds * 1e3:9.3f} ms {rec.gops:8.3f} GOP/s"
        print(f"[{done}/{total}] {where:<22} {what:<16} {status}", file=sys.stderr)

    t0 = time.perf_counter()
    records = run_sweep(cfg, progress=progress)
    meta = dict(RUN_METADATA, seed=str(cfg.seed), repeats=str(cfg.repeats), warmup=str(cfg.warmup))
    emit_csv(records, args.out, meta)
    if not args.quiet:
        print(f"wrote {len(records)} records to {args.out} "
              f"in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return 0


def _ratio(args) -> int:
    records, _ = read_csv(args.path)
    sys.stdout.write(emit_ratio_grid(records))
    return 0


def _model(args) -> int:
    if args.arch in BUILTIN_PROFILES:
        profiles = [BUILTIN_PROFILES[args.arch]]
    else:
        profiles = list(load_profiles(args.arch).values())
    print("\n\n".join(model_table(p) for p in profiles))
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    handler = {"sweep": _sweep, "ratio": _ratio, "model": _model}[args.command]
    try:
        return handler(args)
    except (BitserialError, OSError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
