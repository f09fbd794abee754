"""Layer-shape sweep: time every method on every grid point, report GOP/s.

Protocol: batch 1, single thread, median of ``repeats`` timed runs after
``warmup`` untimed ones.  Weight-side work (packing, lowering, Winograd
filter transform) happens before the clock starts; everything done to the
activation at inference time (quantize, lower, pack) is inside it.
"""
from __future__ import annotations

import csv
import io
import itertools
import logging
import os
import statistics
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from threadpoolctl import threadpool_limits

from ..baselines import WinogradConv3x3, gemm_f32_ref, gemm_i8_i32
from ..convolution import BitserialConv, ConvShape, QuantTensor, conv_gop_count, im2col_array
from ..errors import ConfigurationError
from ..quantize import BIPOLAR, QuantParams

log = logging.getLogger(__name__)

BASELINE_METHODS = ("f32_ref", "i8_ref", "winograd_ref")
ALL_METHODS = ("bitserial",) + BASELINE_METHODS

CSV_HEADER = ("method", "kernel", "spatial", "channels", "bits_a", "bits_w",
              "median_seconds", "gops", "ratio_vs_best_baseline")

# nominal operand widths written for the baseline rows
_BASELINE_BITS = {"f32_ref": (32, 32), "i8_ref": (8, 8), "winograd_ref": (32, 32)}

RUN_METADATA = {
    "timed_region": "bitserial=activation quantize+im2col+pack+affine gemm, weights pre-packed; "
                    "f32_ref/i8_ref=im2col+gemm, weights pre-lowered; "
                    "winograd_ref=input transform+products+output transform, filter transform cached",
    "gop_convention": "2 ops per multiply-accumulate",
    "padding": "same (pad=1) for 3x3, none for 1x1 (assumed)",
    "threads": "1",
    "baselines": "ref implementations, not tuned library kernels",
}


@dataclass
class SweepConfig:
    kernels: tuple[int, ...] = (1, 3)
    spatial_sizes: tuple[int, ...] = (14, 28, 56, 104)
    channel_sizes: tuple[int, ...] = (64, 128, 256, 384, 512, 768, 1024)
    bit_pairs: tuple[tuple[int, int], ...] = ((1, 1), (2, 2), (3, 3))
    methods: tuple[str, ...] = ALL_METHODS
    repeats: int = 5
    warmup: int = 2
    seed: int = 0
    mem_budget_mb: float = 1024.0

    def __post_init__(self):
        if self.repeats < 3:
            raise ConfigurationError("repeats must be >= 3 for a meaningful median")
        if self.warmup < 0:
            raise ConfigurationError("warmup must be >= 0")
        if any(k not in (1, 3) for k in self.kernels):
            raise ConfigurationError(f"kernels must be 1 or 3, got {self.kernels}")
        if any(s < 1 for s in self.spatial_sizes) or any(c < 1 for c in self.channel_sizes):
            raise ConfigurationError("spatial and channel sizes must be >= 1")
        if any(not (1 <= a <= 8 and 1 <= w <= 8) for a, w in self.bit_pairs):
            raise ConfigurationError(f"bit widths must be in 1..8, got {self.bit_pairs}")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ConfigurationError(f"unknown methods {sorted(unknown)}; choose from {ALL_METHODS}")
        if self.mem_budget_mb <= 0:
            raise ConfigurationError("mem_budget_mb must be > 0")


@dataclass
class BenchRecord:
    method: str
    kernel: int
    spatial: int
    channels: int
    bits_a: int
    bits_w: int
    median_seconds: float | None
    gops: float | None
    ratio_vs_best_baseline: float | None = None
    note: str = field(default="", compare=False)

    @property
    def skipped(self) -> bool:
        return self.median_seconds is None


def applicable(method: str, kernel: int) -> bool:
    return method != "winograd_ref" or kernel == 3


def expected_record_count(cfg: SweepConfig) -> int:
    n = 0
    for k in cfg.kernels:
        per_point = sum(
            len(cfg.bit_pairs) if m == "bitserial" else int(applicable(m, k))
            for m in cfg.methods
        )
        n += per_point * len(cfg.spatial_sizes) * len(cfg.channel_sizes)
    return n


# -- timing -----------------------------------------------------------------

class FakeTimer:
    """Deterministic clock: every reading advances by ``tick`` seconds."""

    def __init__(self, tick: float = 1e-3):
        self.tick = tick
        self.now = 0.0

    def __call__(self) -> float:
        self.now += self.tick
        return self.now


def default_timer() -> Callable[[], float]:
    if os.environ.get("BENCH_NO_TIME") == "1":
        return FakeTimer()
    return time.perf_counter


def median_time(fn: Callable[[], object], repeats: int, warmup: int,
                timer: Callable[[], float]) -> float:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeats):
        t0 = timer()
        fn()
        samples.append(timer() - t0)
    return statistics.median(samples)


# -- per-method setup ---------------------------------------------------------

def point_rng(seed: int, kernel: int, spatial: int, channels: int) -> np.random.Generator:
    return np.random.default_rng([seed, kernel, spatial, channels])


def activation_params(bits: int) -> QuantParams:
    # unsigned activations on [0, 1]
    return QuantParams(bits, 0.0, 1.0 / ((1 << bits) - 1))


def weight_params(bits: int) -> QuantParams:
    # symmetric weights on [-1, 1]; 1 bit is the bipolar code
    return BIPOLAR if bits == 1 else QuantParams(bits, -1.0, 2.0 / ((1 << bits) - 1))


def estimate_bytes(shape: ConvShape) -> int:
    """Rough peak working set: float64 lowered activations dominate."""
    rows = shape.out_spatial ** 2
    return 8 * (rows * shape.reduction + shape.out_channels * shape.reduction
                + 2 * rows * shape.out_channels)


def prepare(method: str, shape: ConvShape, seed: int,
            bits: tuple[int, int] | None = None) -> Callable[[], np.ndarray]:
    """Build inputs and pre-processed weights; return the timed closure.

    Inputs are drawn from ``seed`` and the grid point only, so repeated
    preparation yields identical operands.
    """
    rng = point_rng(seed, shape.kernel, shape.spatial, shape.in_channels)
    if method == "bitserial":
        bits_a, bits_w = bits
        pa, pw = activation_params(bits_a), weight_params(bits_w)
        act = QuantTensor(rng.integers(0, 1 << bits_a, shape.input_dims), pa)
        wts = QuantTensor(rng.integers(0, 1 << bits_w, shape.weight_dims), pw)
        layer = BitserialConv(wts, shape, workers=1)
        x = act.dequantize()
        return lambda: layer.forward_real(x, pa)
    if method == "f32_ref":
        x = rng.standard_normal(shape.input_dims).astype(np.float32)
        w = rng.standard_normal(shape.weight_dims).astype(np.float32)
        w_cols = np.ascontiguousarray(w.reshape(shape.out_channels, -1).T)
        n = shape.out_spatial

        def run():
            cols = im2col_array(x, shape, 0.0)
            return gemm_f32_ref(cols, w_cols).T.reshape(shape.out_channels, n, n)
        return run
    if method == "i8_ref":
        x = rng.integers(-128, 128, shape.input_dims).astype(np.int8)
        w = rng.integers(-128, 128, shape.weight_dims).astype(np.int8)
        w_rows = np.ascontiguousarray(w.reshape(shape.out_channels, -1))
        a_zero, w_zero = -3, 2
        n = shape.out_spatial

        def run():
            cols = im2col_array(x, shape, a_zero)
            return gemm_i8_i32(cols, a_zero, w_rows, w_zero).T.reshape(shape.out_channels, n, n)
        return run
    if method == "winograd_ref":
        x = rng.standard_normal(shape.input_dims).astype(np.float32)
        w = rng.standard_normal(shape.weight_dims).astype(np.float32)
        layer = WinogradConv3x3(w, shape)
        return lambda: layer(x)
    raise ConfigurationError(f"unknown method {method!r}")


# -- sweep --------------------------------------------------------------------

def _point_jobs(cfg: SweepConfig, kernel: int):
    for m in cfg.methods:
        if not applicable(m, kernel):
            continue
        if m == "bitserial":
            for pair in cfg.bit_pairs:
                yield m, pair
        else:
            yield m, _BASELINE_BITS[m]


def fill_ratios(records: list[BenchRecord]) -> None:
    """Set ``ratio_vs_best_baseline`` on bitserial rows, in place."""
    best: dict[tuple[int, int, int], float] = {}
    for r in records:
        if r.method != "bitserial" and not r.skipped:
            key = (r.kernel, r.spatial, r.channels)
            best[key] = max(best.get(key, 0.0), r.gops)
    for r in records:
        if r.method == "bitserial" and not r.skipped:
            b = best.get((r.kernel, r.spatial, r.channels))
            r.ratio_vs_best_baseline = r.gops / b if b else None


def run_sweep(cfg: SweepConfig, timer: Callable[[], float] | None = None,
              progress: Callable[[BenchRecord], None] | None = None) -> list[BenchRecord]:
    timer = timer or default_timer()
    budget = cfg.mem_budget_mb * 2 ** 20
    records: list[BenchRecord] = []
    grid = itertools.product(cfg.kernels, cfg.spatial_sizes, cfg.channel_sizes)
    with threadpool_limits(limits=1):
        for kernel, s, c in grid:
            shape = ConvShape(s, c, c, kernel)
            need = estimate_bytes(shape)
            for method, bits in _point_jobs(cfg, kernel):
                rec = BenchRecord(method, kernel, s, c, bits[0], bits[1], None, None)
                if need > budget:
                    rec.note = f"skipped: needs ~{need / 2**20:.0f} MB > budget {cfg.mem_budget_mb:g} MB"
                    log.warning("%s k=%d S=%d C=%d %s", method, kernel, s, c, rec.note)
                else:
                    fn = prepare(method, shape, cfg.seed, bits if method == "bitserial" else None)
                    rec.median_seconds = median_time(fn, cfg.repeats, cfg.warmup, timer)
                    rec.gops = conv_gop_count(shape) / rec.median_seconds / 1e9
                records.append(rec)
                if progress:
                    progress(rec)
    fill_ratios(records)
    return records


# -- CSV ------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def emit_csv(records: Iterable[BenchRecord], path, metadata: dict | None = None) -> None:
    """Write records as CSV; ``metadata`` becomes leading ``# key=value`` lines."""
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}={value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
        if r.note:
            buf.write(f"# note {r.method},{r.kernel},{r.spatial},{r.channels}: {r.note}\n")
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> tuple[list[BenchRecord], dict[str, str]]:
    """Parse a file written by :func:`emit_csv`; returns ``(records, metadata)``."""
    records, metadata = [], {}
    data_lines = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body and not body.startswith("note "):
                key, value = body.split("=", 1)
                metadata[key] = value
            continue
        data_lines.append(line)
    reader = csv.reader(data_lines)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ConfigurationError(f"{path}: unexpected CSV header {header}")
    types = {f.name: f.type for f in fields(BenchRecord)}
    for row in reader:
        values = {}
        for name, raw in zip(CSV_HEADER, row):
            if raw == "":
                values[name] = None
            elif name == "method":
                values[name] = raw
            elif "float" in str(types[name]):
                values[name] = float(raw)
            else:
                values[name] = int(raw)
        records.append(BenchRecord(**values))
    return records, metadata


# -- ratio grid ----------------------------------------------------------------

MISSING = "—"
_CORNER = "C \\ S"


def emit_ratio_grid(records: Iterable[BenchRecord]) -> str:
    """Render one C x S table of bitserial/best-baseline GOP/s ratios per (kernel, bits)."""
    records = list(records)
    best: dict[tuple[int, int, int], float] = {}
    for r in records:
        if r.method != "bitserial" and r.gops:
            key = (r.kernel, r.spatial, r.channels)
            best[key] = max(best.get(key, 0.0), r.gops)

    panels: dict[tuple[int, int, int], dict[tuple[int, int], float | None]] = {}
    for r in records:
        if r.method != "bitserial":
            continue
        cells = panels.setdefault((r.kernel, r.bits_a, r.bits_w), {})
        b = best.get((r.kernel, r.spatial, r.channels))
        cells[(r.channels, r.spatial)] = r.gops / b if (b and r.gops) else None

    blocks = []
    for (kernel, ba, bw) in sorted(panels):
        cells = panels[(kernel, ba, bw)]
        cs = sorted({c for c, _ in cells})
        ss = sorted({s for _, s in cells})
        lines = [f"kernel {kernel}x{kernel}, bits {ba}x{bw}: bitserial GOP/s / best baseline GOP/s",
                 f"{_CORNER:>8}" + "".join(f"{s:>8}" for s in ss)]
        for c in cs:
            row = []
            for s in ss:
                v = cells.get((c, s))
                row.append(f"{v:>8.2f}" if v is not None else f"{MISSING:>8}")
            lines.append(f"{c:>8}" + "".join(row))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
