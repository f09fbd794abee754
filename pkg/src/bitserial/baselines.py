"""Reference float32 / int8 baselines and a Winograd F(2x2, 3x3) convolution.

These are honest references, compiled with numba but not tuned.  They
stand in for the float32 and int8 library baselines when timing the
bitserial path and double as test oracles.
"""
from __future__ import annotations

import hashlib
import threading

import numba
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .convolution import ConvShape, im2col_array
from .errors import OverflowRiskError, ShapeError, UnsupportedShapeError


@numba.njit(nogil=True, cache=True)
def _gemm_naive(a, b, c):
    m, kk = a.shape
    n = b.shape[1]
    for i in range(m):
        for t in range(kk):
            av = a[i, t]
            for j in range(n):
                c[i, j] += av * b[t, j]


@numba.njit(nogil=True, cache=True)
def _gemm_blocked(a, b, c, mb, kb, nb):
    m, kk = a.shape
    n = b.shape[1]
    for i0 in range(0, m, mb):
        i1 = min(i0 + mb, m)
        for t0 in range(0, kk, kb):
            t1 = min(t0 + kb, kk)
            for j0 in range(0, n, nb):
                j1 = min(j0 + nb, n)
                for i in range(i0, i1):
                    for t in range(t0, t1):
                        av = a[i, t]
                        for j in range(j0, j1):
                            c[i, j] += av * b[t, j]


def gemm_f32_ref(A, B, blocked: bool = False, block: tuple[int, int, int] = (64, 128, 256)) -> np.ndarray:
    """``A @ B`` in float32 with a plain triple loop (or its cache-blocked twin)."""
    a = np.ascontiguousarray(A, dtype=np.float32)
    b = np.ascontiguousarray(B, dtype=np.float32)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    c = np.zeros((a.shape[0], b.shape[1]), dtype=np.float32)
    if blocked:
        _gemm_blocked(a, b, c, *block)
    else:
        _gemm_naive(a, b, c)
    return c


@numba.njit(nogil=True, cache=True)
def _gemm_i8(a, a_zero, b, b_zero, c):
    m, kk = a.shape
    n = b.shape[0]
    for i in range(m):
        for j in range(n):
            acc = np.int32(0)
            for t in range(kk):
                acc += np.int32(np.int16(a[i, t]) - a_zero) * np.int32(np.int16(b[j, t]) - b_zero)
            c[i, j] = acc


def gemm_i8_i32(A, a_zero: int, B, b_zero: int) -> np.ndarray:
    """Zero-point int8 GEMM: ``out[i, j] = sum_t (A[i,t] - a_zero) (B[j,t] - b_zero)``.

    ``B`` is laid out ``(N, K)`` like the packed operands.  Each product fits
    in 16 bits, so 32-bit accumulation is exact for ``K < 2**15``.
    """
    a = np.asarray(A)
    b = np.asarray(B)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"int8 GEMM needs (M, K) and (N, K) operands, got {a.shape}, {b.shape}")
    for name, arr in (("A", a), ("B", b)):
        if arr.size and (arr.min() < -128 or arr.max() > 127):
            raise ShapeError(f"{name} has entries outside the int8 range")
    for name, z in (("a_zero", a_zero), ("b_zero", b_zero)):
        if not -128 <= z <= 127:
            raise ShapeError(f"{name}={z} outside the int8 range")
    if a.shape[1] >= 1 << 15:
        raise OverflowRiskError(f"K={a.shape[1]} can overflow a 32-bit accumulator")
    c = np.empty((a.shape[0], b.shape[0]), dtype=np.int32)
    _gemm_i8(a.astype(np.int8), np.int16(a_zero), b.astype(np.int8), np.int16(b_zero), c)
    return c


@numba.njit(nogil=True, cache=True)
def _conv_direct(xp, w, stride, out):
    c_out, c_in, k, _ = w.shape
    n_out = out.shape[1]
    for o in range(c_out):
        for oy in range(n_out):
            for ox in range(n_out):
                acc = 0.0
                for c in range(c_in):
                    for ky in range(k):
                        for kx in range(k):
                            acc += xp[c, oy * stride + ky, ox * stride + kx] * w[o, c, ky, kx]
                out[o, oy, ox] = acc


def conv_f32_direct(input, weights, shape: ConvShape, pad_value: float = 0.0,
                    dtype=np.float64) -> np.ndarray:
    """Textbook direct convolution; the padded border is filled with ``pad_value``.

    Used as the oracle for every other convolution path.  Computes in
    float64 unless ``dtype`` says otherwise.
    """
    x = np.asarray(input, dtype=dtype)
    w = np.ascontiguousarray(weights, dtype=dtype)
    if x.shape != shape.input_dims:
        raise ShapeError(f"input has dims {x.shape}, expected {shape.input_dims}")
    if w.shape != shape.weight_dims:
        raise ShapeError(f"weights have dims {w.shape}, expected {shape.weight_dims}")
    p = shape.pad
    xp = np.pad(x, ((0, 0), (p, p), (p, p)), constant_values=pad_value)
    out = np.empty((shape.out_channels, shape.out_spatial, shape.out_spatial), dtype=dtype)
    _conv_direct(np.ascontiguousarray(xp), w, shape.stride, out)
    return out


def conv_f32_im2col(input, weights, shape: ConvShape, blocked: bool = False) -> np.ndarray:
    """float32 convolution as im2col + :func:`gemm_f32_ref`."""
    cols = im2col_array(np.asarray(input, dtype=np.float32), shape, 0.0)
    w = np.asarray(weights, dtype=np.float32).reshape(shape.out_channels, -1)
    res = gemm_f32_ref(cols, np.ascontiguousarray(w.T), blocked=blocked)
    n = shape.out_spatial
    return res.T.reshape(shape.out_channels, n, n)


# F(2x2, 3x3): Y = A^T [(G g G^T) * (B^T d B)] A
WINO_BT = np.array([[1, 0, -1, 0],
                    [0, 1, 1, 0],
                    [0, -1, 1, 0],
                    [0, 1, 0, -1]], dtype=np.float32)
WINO_G = np.array([[1.0, 0.0, 0.0],
                   [0.5, 0.5, 0.5],
                   [0.5, -0.5, 0.5],
                   [0.0, 0.0, 1.0]], dtype=np.float32)
WINO_AT = np.array([[1, 1, 1, 0],
                    [0, 1, -1, -1]], dtype=np.float32)

_filter_cache: dict[tuple, np.ndarray] = {}
_cache_lock = threading.Lock()
_transform_count = 0


def filter_transform_count() -> int:
    """How many filter banks have been Winograd-transformed so far (cache probe)."""
    return _transform_count


def clear_filter_cache() -> None:
    global _transform_count
    with _cache_lock:
        _filter_cache.clear()
        _transform_count = 0


def _transform_filters(w: np.ndarray) -> np.ndarray:
    global _transform_count
    with _cache_lock:
        _transform_count += 1
    # (C_out, C_in, 3, 3) -> (C_out, C_in, 4, 4)
    return np.einsum("ai,ocij,bj->ocab", WINO_G, w, WINO_G).astype(np.float32)


def _check_3x3(shape: ConvShape) -> None:
    if shape.kernel != 3 or shape.stride != 1 or shape.pad != 1:
        raise UnsupportedShapeError(
            f"Winograd F(2x2,3x3) needs kernel=3, stride=1, pad=1; got {shape}"
        )


def transformed_filters(weights, use_cache: bool = True) -> np.ndarray:
    """Winograd-domain filters ``G g G^T``, memoized on the weight bytes."""
    w = np.ascontiguousarray(weights, dtype=np.float32)
    if w.ndim != 4 or w.shape[2:] != (3, 3):
        raise UnsupportedShapeError(f"expected (C_out, C_in, 3, 3) filters, got {w.shape}")
    if not use_cache:
        return _transform_filters(w)
    key = (w.shape, hashlib.blake2b(w.tobytes(), digest_size=16).digest())
    hit = _filter_cache.get(key)
    if hit is not None:
        return hit
    u = _transform_filters(w)
    with _cache_lock:
        # concurrent misses compute identical transforms; first insert wins
        return _filter_cache.setdefault(key, u)


def _to_half(x: np.ndarray) -> np.ndarray:
    # round-to-nearest-even onto the 10-bit-mantissa grid, back in float32
    return x.astype(np.float16).astype(np.float32)


def _winograd_apply(x, u, shape: ConvShape, half: bool) -> np.ndarray:
    c_in, s, _ = x.shape
    n_out = shape.out_spatial
    tiles = -(-n_out // 2)
    span = 2 * tiles + 2
    xp = np.zeros((c_in, span, span), dtype=np.float32)
    xp[:, 1:1 + s, 1:1 + s] = x
    d = sliding_window_view(xp, (4, 4), axis=(1, 2))[:, ::2, ::2]      # (C, T, T, 4, 4)
    v = np.einsum("ai,ctuij,bj->abctu", WINO_BT, d, WINO_BT, optimize=True)
    if half:
        u = _to_half(u)
        v = _to_half(v)
    # 16 independent (C_out x C_in) @ (C_in x T^2) products
    uu = u.transpose(2, 3, 0, 1).reshape(16, shape.out_channels, c_in)
    vv = v.reshape(16, c_in, tiles * tiles)
    m = np.matmul(uu, vv).reshape(4, 4, shape.out_channels, tiles, tiles)
    y = np.einsum("ia,abotu,jb->otiuj", WINO_AT, m, WINO_AT, optimize=True)
    y = y.reshape(shape.out_channels, 2 * tiles, 2 * tiles)
    return y[:, :n_out, :n_out]


def winograd_conv_3x3(input, weights, shape: ConvShape,
                      half_precision_intermediates: bool = False,
                      use_cache: bool = True) -> np.ndarray:
    """3x3 / stride 1 / pad 1 convolution via Winograd F(2x2, 3x3) in float32.

    The filter transform is cached per weight set.  With
    ``half_precision_intermediates`` both transformed tiles (input and
    filter) are rounded to float16 before the elementwise products.
    """
    _check_3x3(shape)
    x = np.asarray(input, dtype=np.float32)
    if x.shape != shape.input_dims:
        raise ShapeError(f"input has dims {x.shape}, expected {shape.input_dims}")
    w = np.asarray(weights, dtype=np.float32)
    if w.shape != shape.weight_dims:
        raise ShapeError(f"weights have dims {w.shape}, expected {shape.weight_dims}")
    u = transformed_filters(w, use_cache)
    return _winograd_apply(x, u, shape, half_precision_intermediates)


class WinogradConv3x3:
    """Layer form of :func:`winograd_conv_3x3` holding its transformed filters."""

    def __init__(self, weights, shape: ConvShape, half_precision_intermediates: bool = False):
        _check_3x3(shape)
        w = np.asarray(weights, dtype=np.float32)
        if w.shape != shape.weight_dims:
            raise ShapeError(f"weights have dims {w.shape}, expected {shape.weight_dims}")
        self.shape = shape
        self.half = half_precision_intermediates
        self.u = transformed_filters(w)

    def __call__(self, input) -> np.ndarray:
        x = np.asarray(input, dtype=np.float32)
        if x.shape != self.shape.input_dims:
            raise ShapeError(f"input has dims {x.shape}, expected {self.shape.input_dims}")
        return _winograd_apply(x, self.u, self.shape, self.half)
