"""
A small timing sweep
====================

The same sweep is available from the shell:

    bench sweep --spatial 14 --channels 64,256 --kernels 1x1 --out sweep.csv
    bench ratio --in sweep.csv
"""
import tempfile
from pathlib import Path

from bitserial.bench import SweepConfig, emit_csv, emit_ratio_grid, read_csv, run_sweep

cfg = SweepConfig(kernels=(1, 3), spatial_sizes=(14,), channel_sizes=(64, 256),
                  bit_pairs=((1, 1), (2, 2)), repeats=3, warmup=1)
records = run_sweep(cfg)
for r in records:
    print(f"{r.method:<13} k={r.kernel} C={r.channels:<4} bits={r.bits_a}x{r.bits_w:<3}"
          f" {r.median_seconds * 1e3:8.3f} ms {r.gops:7.2f} GOP/s")

out = Path(tempfile.mkdtemp()) / "sweep.csv"
emit_csv(records, out, {"seed": cfg.seed})
back, _ = read_csv(out)
print()
print(emit_ratio_grid(back))
