"""Peak-throughput model for float32 / int8 / binary inner loops.

Each profile records how many useful operations per cycle the best inner
loop of each kind sustains.  On the Cortex-A7 these are VMLA.F32 (float32),
VMULL.U8 + VPADAL.U16 (int8) and VEOR + VCNT.8 (binary).  An ``a x b``-bit
product costs ``a * b`` binary inner products, so the ideal speedup over
the best conventional kernel is

    binary_rate / (a * b * max(f32_rate, i8_rate))

Memory traffic and packing overhead are deliberately ignored.  For A7 and
A53 the 1-bit bounds come out as 16.8x and 10.625x; they are usually quoted
rounded as "10-16x".
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import ConfigurationError

METHODS = ("f32", "i8", "binary")


@dataclass(frozen=True)
class ArchProfile:
    name: str
    f32_ops_per_cycle: float
    i8_ops_per_cycle: float
    binary_ops_per_cycle: float
    freq_ghz: float

    def __post_init__(self):
        rates = (self.f32_ops_per_cycle, self.i8_ops_per_cycle,
                 self.binary_ops_per_cycle, self.freq_ghz)
        if not all(math.isfinite(r) and r > 0 for r in rates):
            raise ConfigurationError(f"profile {self.name!r}: all rates must be > 0")

    def rate(self, method: str) -> float:
        try:
            return {"f32": self.f32_ops_per_cycle,
                    "i8": self.i8_ops_per_cycle,
                    "binary": self.binary_ops_per_cycle}[method]
        except KeyError:
            raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}") from None

    @property
    def best_baseline_rate(self) -> float:
        return max(self.f32_ops_per_cycle, self.i8_ops_per_cycle)


CORTEX_A7 = ArchProfile("cortex-a7", 2.0, 2.5, 42.0, 1.2)
CORTEX_A53 = ArchProfile("cortex-a53", 8.0, 5.3, 85.0, 1.4)

BUILTIN_PROFILES = {"a7": CORTEX_A7, "a53": CORTEX_A53}


def speedup_bound(profile: ArchProfile, bits_a: int, bits_w: int) -> float:
    if bits_a < 1 or bits_w < 1:
        raise ConfigurationError("bit widths must be >= 1")
    return profile.binary_ops_per_cycle / (bits_a * bits_w * profile.best_baseline_rate)


def max_bit_product(profile: ArchProfile) -> int:
    """Largest ``bits_a * bits_w`` whose modeled speedup is still > 1."""
    # exact rational arithmetic so e.g. 85 / 8.5 == 10 does not round up
    binary = Fraction(str(profile.binary_ops_per_cycle))
    best = Fraction(str(profile.best_baseline_rate))
    return math.ceil(binary / best) - 1


def predicted_gops(profile: ArchProfile, method: str) -> float:
    """Modeled peak in G(FL)OP/s: ops per cycle times clock in GHz."""
    return profile.rate(method) * profile.freq_ghz


def load_profiles(path) -> dict[str, ArchProfile]:
    """Read profiles from a text file, one per line.

    Each line is ``name f32 i8 binary freq_ghz`` (whitespace or comma
    separated); blank lines and ``#`` comments are skipped.
    """
    profiles = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ConfigurationError(f"{path}:{lineno}: expected name and four numbers")
        try:
            nums = [float(f) for f in fields[1:]]
        except ValueError:
            raise ConfigurationError(f"{path}:{lineno}: non-numeric rate") from None
        profiles[fields[0]] = ArchProfile(fields[0], *nums)
    if not profiles:
        raise ConfigurationError(f"{path}: no profiles found")
    return profiles


def model_table(profile: ArchProfile, max_bits: int = 4) -> str:
    """Human-readable summary: peak rates and the speedup bound grid."""
    lines = [
        f"profile {profile.name} @ {profile.freq_ghz:g} GHz",
        f"  {'method':<8}{'ops/cycle':>10}{'peak GOP/s':>12}",
    ]
    for m in METHODS:
        lines.append(f"  {m:<8}{profile.rate(m):>10g}{predicted_gops(profile, m):>12.3f}")
    lines.append(f"  max bit product with speedup > 1: {max_bit_product(profile)}")
    lines.append("  speedup bound (rows bits_a, cols bits_w):")
    lines.append("      " + "".join(f"{b:>9}" for b in range(1, max_bits + 1)))
    for a in range(1, max_bits + 1):
        cells = "".join(f"{speedup_bound(profile, a, b):>9.3f}" for b in range(1, max_bits + 1))
        lines.append(f"  {a:>4}" + cells)
    return "\n".join(lines)
