"""Popcount dot products, the register-tile microkernel and the bitserial GEMM.

For unsigned levels ``x = sum_k 2^k x_k`` and ``y = sum_l 2^l y_l`` the
inner product factors over bit planes::

    x . y = sum_k sum_l 2^(k+l) popcount(x_k AND y_l)

so an ``(a, b)``-bit GEMM is ``a * b`` binary GEMMs.  For 1-bit bipolar
(+/-1) operands the classic identity ``x . y = N - 2 popcount(x XOR y)``
applies instead.

The compiled kernels keep popcount partial sums in 16-bit lanes and spill
them into 32-bit accumulators every ``k_block_words`` words.  A word adds at
most 64 to a lane, so ``k_block_words * 64 <= 65535`` rules out overflow.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
from numba import types
from numba.extending import intrinsic

from .bitpack import WORD_BITS, PackedBitMatrix
from .errors import ConfigurationError, OverflowRiskError, ShapeError

LANE_MAX = 0xFFFF
ACC_LIMIT = 1 << 31

_BYTE_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def popcount_lut(words) -> np.ndarray:
    """Per-word popcount via a 256-entry byte table, for CPUs without popcnt."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    per_byte = _BYTE_POPCOUNT[words.view(np.uint8)].reshape(words.shape + (8,))
    return per_byte.sum(axis=-1, dtype=np.uint8)


def popcount(words, method: str = "native") -> np.ndarray:
    if method == "native":
        return np.bitwise_count(np.asarray(words, dtype=np.uint64))
    if method == "lut":
        return popcount_lut(words)
    raise ValueError(f"unknown popcount method {method!r}")


def _word_pair(a_words, b_words, logical_len):
    a = np.asarray(a_words, dtype=np.uint64)
    b = np.asarray(b_words, dtype=np.uint64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"word vectors differ in shape: {a.shape} vs {b.shape}")
    if not 0 <= logical_len <= a.size * WORD_BITS:
        raise ShapeError(f"logical_len {logical_len} does not fit in {a.size} words")
    return a, b


def and_dot(a_words, b_words, logical_len: int, method: str = "native") -> int:
    """Number of positions where both 0/1 vectors are set."""
    a, b = _word_pair(a_words, b_words, logical_len)
    return int(popcount(a & b, method).sum(dtype=np.int64))


def xnor_dot(a_words, b_words, logical_len: int, method: str = "native") -> int:
    """Inner product of two bipolar (+/-1) vectors stored as sign bits.

    Pad bits must be zero in both operands.  Zero pads never show up in the
    XOR, and using ``logical_len`` rather than the padded length keeps the
    pads from being counted as agreeing (-1)(-1) pairs.
    """
    a, b = _word_pair(a_words, b_words, logical_len)
    return logical_len - 2 * int(popcount(a ^ b, method).sum(dtype=np.int64))


@dataclass(frozen=True)
class TileConfig:
    m_tile: int = 4
    n_tile: int = 4
    k_block_words: int = 256
    l1_block_rows: int = 64

    def __post_init__(self):
        if self.m_tile < 1 or self.n_tile < 1:
            raise ConfigurationError("m_tile and n_tile must be >= 1")
        if self.k_block_words < 1 or self.k_block_words * WORD_BITS > LANE_MAX:
            raise ConfigurationError(
                f"k_block_words={self.k_block_words} lets a 16-bit lane exceed "
                f"{LANE_MAX}; need 1 <= k_block_words <= {LANE_MAX // WORD_BITS}"
            )
        if self.l1_block_rows < 1:
            raise ConfigurationError("l1_block_rows must be >= 1")


DEFAULT_TILE = TileConfig()


@intrinsic
def _ctpop(typingctx, x):
    sig = types.uint64(types.uint64)

    def codegen(context, builder, signature, args):
        return builder.ctpop(args[0])

    return sig, codegen


@numba.njit(nogil=True, cache=True, inline="always")
def _tile_plane_pair(a, ai, mt, b, bj, nt, kbw, shift, lanes, out, oi, oj):
    # a: (rows, words) plane of A, b: (rows, words) plane of B.
    # Accumulates popcount(a[ai+ii] & b[bj+jj]) << shift into out[oi+ii, oj+jj].
    n_words = a.shape[1]
    for w0 in range(0, n_words, kbw):
        w1 = min(w0 + kbw, n_words)
        for ii in range(mt):
            for jj in range(nt):
                lanes[ii, jj] = 0
        for w in range(w0, w1):
            for ii in range(mt):
                aw = a[ai + ii, w]
                for jj in range(nt):
                    lanes[ii, jj] += np.uint16(_ctpop(aw & b[bj + jj, w]))
        for ii in range(mt):
            for jj in range(nt):
                out[oi + ii, oj + jj] += np.int32(lanes[ii, jj]) << shift


@numba.njit(nogil=True, cache=True)
def _microkernel(a, b, kbw, out):
    lanes = np.zeros((a.shape[0], b.shape[0]), dtype=np.uint16)
    _tile_plane_pair(a, 0, a.shape[0], b, 0, b.shape[0], kbw, 0, lanes, out, 0, 0)


@numba.njit(nogil=True, cache=True)
def _gemm_rows(a_planes, b_planes, row0, row1, m_tile, n_tile, kbw, l1_rows, out):
    n_rows_b = b_planes.shape[1]
    lanes = np.zeros((m_tile, n_tile), dtype=np.uint16)
    for ib in range(row0, row1, l1_rows):
        ie = min(ib + l1_rows, row1)
        for jb in range(0, n_rows_b, l1_rows):
            je = min(jb + l1_rows, n_rows_b)
            for ti in range(ib, ie, m_tile):
                mt = min(m_tile, ie - ti)
                for tj in range(jb, je, n_tile):
                    nt = min(n_tile, je - tj)
                    for k in range(a_planes.shape[0]):
                        for l in range(b_planes.shape[0]):
                            _tile_plane_pair(a_planes[k], ti, mt, b_planes[l], tj, nt,
                                             kbw, k + l, lanes, out, ti, tj)


def microkernel(a_tile, b_tile, cfg: TileConfig = DEFAULT_TILE) -> np.ndarray:
    """Binary product ``A . B^T`` of two packed single-plane tiles.

    ``a_tile`` is ``(M_T, words)`` and ``b_tile`` is ``(N_T, words)``, both
    uint64.  Returns the ``(M_T, N_T)`` int32 matrix of AND-popcounts.
    """
    a = np.ascontiguousarray(a_tile, dtype=np.uint64)
    b = np.ascontiguousarray(b_tile, dtype=np.uint64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"tiles must be (rows, words) with equal words: {a.shape}, {b.shape}")
    if a.shape[1] * WORD_BITS >= ACC_LIMIT:
        raise OverflowRiskError("reduction length does not fit a 32-bit accumulator")
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.int32)
    _microkernel(a, b, cfg.k_block_words, out)
    return out


def accumulator_bound(bits_a: int, bits_b: int, k: int) -> int:
    """Largest value any output entry can reach: ``(2^a - 1)(2^b - 1) K``."""
    return ((1 << bits_a) - 1) * ((1 << bits_b) - 1) * k


def _check_operands(A: PackedBitMatrix, B: PackedBitMatrix) -> None:
    if A.logical_cols != B.logical_cols or A.words_per_row != B.words_per_row:
        raise ShapeError(
            f"reduction lengths differ: {A.logical_cols} vs {B.logical_cols}"
        )
    if accumulator_bound(A.bits, B.bits, A.logical_cols) >= ACC_LIMIT:
        raise OverflowRiskError(
            f"{A.bits}x{B.bits}-bit product over K={A.logical_cols} can reach "
            f"{accumulator_bound(A.bits, B.bits, A.logical_cols)} >= 2^31"
        )


def _row_splits(rows: int, parts: int, align: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, rows))
    step = -(-rows // parts)
    step = -(-step // align) * align
    return [(r, min(r + step, rows)) for r in range(0, rows, step)]


def bitserial_gemm(A: PackedBitMatrix, B: PackedBitMatrix, cfg: TileConfig = DEFAULT_TILE,
                   workers: int = 1) -> np.ndarray:
    """Integer product of the level matrices behind ``A`` (M x K) and ``B`` (N x K).

    Returns an ``(M, N)`` int32 array equal to ``levels_A @ levels_B.T``.
    With ``workers > 1`` the rows of ``A`` are split into contiguous chunks
    computed on a thread pool; every output entry is produced by the same
    sequence of operations either way, so results do not depend on
    ``workers`` or ``cfg``.
    """
    _check_operands(A, B)
    out = np.zeros((A.rows, B.rows), dtype=np.int32)
    if A.rows == 0 or B.rows == 0:
        return out
    args = (A.planes, B.planes)
    tail = (cfg.m_tile, cfg.n_tile, cfg.k_block_words, cfg.l1_block_rows, out)
    if workers <= 1:
        _gemm_rows(*args, 0, A.rows, *tail)
        return out
    splits = _row_splits(A.rows, workers, cfg.m_tile)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_gemm_rows, *args, r0, r1, *tail) for r0, r1 in splits]
        for f in futures:
            f.result()
    return out


def affine_gemm(A: PackedBitMatrix, B: PackedBitMatrix, cfg: TileConfig = DEFAULT_TILE,
                workers: int = 1) -> np.ndarray:
    """Real-valued ``deq(A) @ deq(B).T`` computed from the packed levels.

    Expanding ``sum_t (oA + sA LA[i,t]) (oB + sB LB[j,t])`` gives

        K oA oB + oA sB S_B[j] + oB sA S_A[i] + sA sB (LA LB^T)[i, j]

    where ``S`` are the cached per-row level sums.  Only the last term needs
    the bitserial GEMM.
    """
    G = bitserial_gemm(A, B, cfg, workers)
    pa, pb = A.params, B.params
    K = A.logical_cols
    out = (pa.scale * pb.scale) * G.astype(np.float64)
    out += (pb.offset * pa.scale) * A.row_weighted_sums[:, None].astype(np.float64)
    out += (pa.offset * pb.scale) * B.row_weighted_sums[None, :].astype(np.float64)
    out += K * pa.offset * pb.offset
    return out
