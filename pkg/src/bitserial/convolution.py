"""Quantized convolution lowered to bitserial GEMM (batch 1, square inputs).

Lowering happens in level space: padding inserts level 0, which dequantizes
to ``params.offset``.  That is a true zero only when ``offset == 0``; with
HWGQ-style activations (offset >= 0, ReLU zeros at level 0) this is the
natural choice and keeps padding inside the zero-pad-bit packing format.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .bitpack import PackedBitMatrix, pack_bit_planes, quantize_and_pack
from .errors import CorruptInputError, ShapeError
from .kernels import DEFAULT_TILE, TileConfig, affine_gemm
from .quantize import LevelMatrix, QuantParams, quantize_levels


@dataclass(frozen=True)
class ConvShape:
    spatial: int
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    pad: int | None = None   # None -> "same" for odd kernels: (kernel - 1) // 2

    def __post_init__(self):
        if self.pad is None:
            object.__setattr__(self, "pad", (self.kernel - 1) // 2)
        for name in ("spatial", "in_channels", "out_channels", "kernel", "stride"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be >= 1")
        if self.pad < 0:
            raise ShapeError("pad must be >= 0")
        span = self.spatial + 2 * self.pad - self.kernel
        if span < 0 or span % self.stride:
            raise ShapeError(
                f"S={self.spatial}, pad={self.pad}, kernel={self.kernel}, "
                f"stride={self.stride} does not give an integral output size"
            )

    @property
    def out_spatial(self) -> int:
        return (self.spatial + 2 * self.pad - self.kernel) // self.stride + 1

    @property
    def input_dims(self) -> tuple[int, int, int]:
        return self.in_channels, self.spatial, self.spatial

    @property
    def weight_dims(self) -> tuple[int, int, int, int]:
        return self.out_channels, self.in_channels, self.kernel, self.kernel

    @property
    def reduction(self) -> int:
        return self.in_channels * self.kernel * self.kernel


@dataclass(frozen=True)
class QuantTensor:
    """Levels of a quantized tensor plus the (per-tensor) quantizer that made them.

    Activations are ``(C, H, W)``; a filter bank is ``(C_out, C_in, k, k)``.
    """

    levels: np.ndarray
    params: QuantParams

    def __post_init__(self):
        levels = np.asarray(self.levels)
        if levels.size and (levels.min() < 0 or levels.max() > self.params.max_level):
            raise CorruptInputError(f"levels out of range for {self.params.bits}-bit params")
        object.__setattr__(self, "levels", levels.astype(np.uint8, copy=False))

    @classmethod
    def from_real(cls, values, params: QuantParams) -> "QuantTensor":
        return cls(quantize_levels(values, params), params)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.levels.shape

    def dequantize(self) -> np.ndarray:
        return self.params.offset + self.params.scale * self.levels.astype(np.float64)

    def as_level_matrix(self) -> LevelMatrix:
        """Rows = leading axis, columns = everything else flattened."""
        return LevelMatrix(self.levels.reshape(self.levels.shape[0], -1), self.params.bits)


def conv_gop_count(shape: ConvShape) -> int:
    """Operations in one convolution, counting a multiply-accumulate as 2."""
    return 2 * shape.out_spatial ** 2 * shape.out_channels * shape.reduction


def _lower(x: np.ndarray, shape: ConvShape, pad_value) -> np.ndarray:
    k, s, p = shape.kernel, shape.stride, shape.pad
    if p:
        x = np.pad(x, ((0, 0), (p, p), (p, p)), constant_values=pad_value)
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
    # (C, oy, ox, ky, kx) -> (oy, ox, C, ky, kx)
    out = shape.out_spatial
    return win.transpose(1, 2, 0, 3, 4).reshape(out * out, shape.reduction)


def im2col_array(x, shape: ConvShape, pad_value=0) -> np.ndarray:
    """im2col on a plain ``(C, S, S)`` array; columns in (channel, ky, kx) order."""
    x = np.asarray(x)
    if x.shape != shape.input_dims:
        raise ShapeError(f"input has dims {x.shape}, expected {shape.input_dims}")
    return _lower(x, shape, pad_value)


def im2col(input: QuantTensor, shape: ConvShape) -> LevelMatrix:
    """Lower a quantized activation to a ``(out^2, k^2 C_in)`` level matrix.

    Row ``r`` holds the receptive field of output pixel ``r`` (row-major),
    padding positions contribute level 0.
    """
    return LevelMatrix(im2col_array(input.levels, shape, 0), input.params.bits)


def lower_weights(weights: QuantTensor, shape: ConvShape) -> LevelMatrix:
    if weights.shape != shape.weight_dims:
        raise ShapeError(f"weights have dims {weights.shape}, expected {shape.weight_dims}")
    return weights.as_level_matrix()


class BitserialConv:
    """A convolution layer whose weights are lowered and packed once.

    Calling the layer lowers and packs the activation, then runs one
    affine bitserial GEMM.
    """

    def __init__(self, weights: QuantTensor, shape: ConvShape,
                 cfg: TileConfig = DEFAULT_TILE, workers: int = 1):
        self.shape = shape
        self.cfg = cfg
        self.workers = workers
        self.packed_weights: PackedBitMatrix = pack_bit_planes(
            lower_weights(weights, shape), weights.params
        )

    def __call__(self, input: QuantTensor) -> np.ndarray:
        cols = pack_bit_planes(im2col(input, self.shape), input.params)
        return self._finish(cols)

    def forward_real(self, x, act_params: QuantParams) -> np.ndarray:
        """Quantize a real ``(C, S, S)`` activation with ``act_params`` and convolve.

        Lowers the reals first, padding with ``offset`` (which quantizes to
        level 0), then quantizes and packs in one fused pass.  The result is
        identical to ``self(QuantTensor.from_real(x, act_params))``.
        """
        x = np.asarray(x, dtype=np.float64)
        cols = quantize_and_pack(im2col_array(x, self.shape, act_params.offset), act_params)
        return self._finish(cols)

    def _finish(self, cols: PackedBitMatrix) -> np.ndarray:
        res = affine_gemm(cols, self.packed_weights, self.cfg, self.workers)
        out = self.shape.out_spatial
        return res.T.reshape(self.shape.out_channels, out, out)


def conv_bitserial(input: QuantTensor, weights: QuantTensor, shape: ConvShape,
                   cfg: TileConfig = DEFAULT_TILE, workers: int = 1) -> np.ndarray:
    """One-shot quantized convolution; returns a ``(C_out, out, out)`` float array."""
    return BitserialConv(weights, shape, cfg, workers)(input)
