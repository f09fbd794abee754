"""Bit-plane packing.

A ``b``-bit level matrix is split into ``b`` binary planes; plane ``k`` holds
bit ``k`` of every element.  Each plane row is packed into 64-bit words,
little-endian within the word (column ``j`` -> bit ``j % 64`` of word
``j // 64``), and zero-padded to a whole number of words so the kernels
never need masks.

Layout of ``PackedBitMatrix.planes`` is ``(bits, rows, words_per_row)``,
plane-major, since the GEMM walks one plane pair at a time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import CorruptInputError, IntegrityError, ParamsError
from .quantize import LevelMatrix, QuantParams, _check_finite

WORD_BITS = 64


def words_for(cols: int) -> int:
    return -(-cols // WORD_BITS)


@dataclass(frozen=True)
class PackedBitMatrix:
    planes: np.ndarray              # uint64, (bits, rows, words_per_row)
    logical_cols: int
    row_weighted_sums: np.ndarray   # int64, sum of levels in each row
    params: QuantParams

    @property
    def bits(self) -> int:
        return self.planes.shape[0]

    @property
    def rows(self) -> int:
        return self.planes.shape[1]

    @property
    def words_per_row(self) -> int:
        return self.planes.shape[2]

    def pad_mask(self) -> np.ndarray:
        """Per-word mask of the logical bits; pad bits are 0 in the mask."""
        mask = np.full(self.words_per_row, np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
        tail = self.logical_cols % WORD_BITS
        if tail:
            mask[-1] = np.uint64((1 << tail) - 1)
        return mask

    def check(self) -> None:
        """Raise :class:`IntegrityError` if any invariant is broken."""
        if self.planes.dtype != np.uint64 or self.planes.ndim != 3:
            raise IntegrityError("planes must be a 3-D uint64 array")
        if self.words_per_row != words_for(self.logical_cols):
            raise IntegrityError(
                f"{self.words_per_row} words per row cannot hold exactly "
                f"{self.logical_cols} columns"
            )
        if self.bits != self.params.bits:
            raise IntegrityError("plane count does not match params.bits")
        if np.any(self.planes & ~self.pad_mask()):
            raise IntegrityError("nonzero pad bit beyond logical_cols")

    def dump(self) -> str:
        """Text dump of every plane, one line per (plane, row)."""
        lines = [f"logical_cols={self.logical_cols}"]
        for k in range(self.bits):
            for i in range(self.rows):
                words = " ".join(f"{int(w):016x}" for w in self.planes[k, i])
                lines.append(f"plane={k} row={i}: {words}")
        return "\n".join(lines) + "\n"


def _row_weighted_sums(planes: np.ndarray) -> np.ndarray:
    sums = np.zeros(planes.shape[1], dtype=np.int64)
    for k in range(planes.shape[0]):
        sums += np.bitwise_count(planes[k]).sum(axis=1, dtype=np.int64) << k
    return sums


def pack_bit_planes(levels: LevelMatrix, params: QuantParams) -> PackedBitMatrix:
    if isinstance(levels, LevelMatrix):
        if levels.bits != params.bits:
            raise ParamsError(
                f"level matrix has {levels.bits} bits but params have {params.bits}"
            )
        lv = levels.levels
    else:
        lv = np.asarray(levels)
        if lv.ndim != 2:
            raise ParamsError(f"expected a 2-D level array, got shape {lv.shape}")
    # LevelMatrix validates on construction, but its array is still mutable
    if lv.size and (lv.min() < 0 or lv.max() > params.max_level):
        raise CorruptInputError(f"level outside 0..{params.max_level}")
    lv = lv.astype(np.uint8, copy=False)
    rows, cols = lv.shape
    words = words_for(cols)
    padded = np.zeros((rows, words * WORD_BITS), dtype=np.uint8)
    padded[:, :cols] = lv
    planes = np.empty((params.bits, rows, words), dtype=np.uint64)
    for k in range(params.bits):
        bits = (padded >> k) & 1
        packed = np.packbits(bits, axis=1, bitorder="little")
        planes[k] = packed.view("<u8").astype(np.uint64, copy=False).reshape(rows, words)
    return PackedBitMatrix(planes, cols, _row_weighted_sums(planes), params)


def unpack_bit_planes(packed: PackedBitMatrix) -> LevelMatrix:
    packed.check()
    bits, rows, words = packed.planes.shape
    levels = np.zeros((rows, words * WORD_BITS), dtype=np.uint8)
    for k in range(bits):
        raw = packed.planes[k].astype("<u8").view(np.uint8).reshape(rows, words * 8)
        levels |= np.unpackbits(raw, axis=1, bitorder="little") << k
    return LevelMatrix(levels[:, : packed.logical_cols], bits)


@numba.njit(nogil=True, cache=True, inline="always")
def _level_of(v, thresholds, offset, inv_scale):
    # number of thresholds <= v, the rule quantize_levels applies
    n_thr = thresholds.shape[0]
    if n_thr <= 15:
        # branchless: random activations make the comparisons unpredictable
        level = 0
        for m in range(n_thr):
            level += thresholds[m] <= v
        return level
    t = (v - offset) * inv_scale + 0.5
    level = 0
    if t > 0.0:
        level = min(int(t), n_thr)
    while level < n_thr and thresholds[level] <= v:
        level += 1
    while level > 0 and thresholds[level - 1] > v:
        level -= 1
    return level


@numba.njit(nogil=True, cache=True)
def _quantize_pack_kernel(values, thresholds, offset, inv_scale, planes):
    bits = planes.shape[0]
    rows, cols = values.shape
    n_words = planes.shape[2]
    one = np.uint64(1)
    for i in range(rows):
        for w in range(n_words):
            j0 = w * 64
            for k in range(bits):
                planes[k, i, w] = 0
            for j in range(j0, min(j0 + 64, cols)):
                level = np.uint64(_level_of(values[i, j], thresholds, offset, inv_scale))
                sh = np.uint64(j - j0)
                for k in range(bits):
                    planes[k, i, w] |= ((level >> np.uint64(k)) & one) << sh


def quantize_and_pack(values, params: QuantParams) -> PackedBitMatrix:
    """Quantize a real matrix straight into bit planes in one pass.

    Bit-identical to ``pack_bit_planes(quantize_uniform(values, params), params)``.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ParamsError(f"expected a 2-D matrix, got shape {values.shape}")
    _check_finite(values)
    rows, cols = values.shape
    planes = np.zeros((params.bits, rows, words_for(cols)), dtype=np.uint64)
    _quantize_pack_kernel(values, params.thresholds(), params.offset, 1.0 / params.scale, planes)
    return PackedBitMatrix(planes, cols, _row_weighted_sums(planes), params)
