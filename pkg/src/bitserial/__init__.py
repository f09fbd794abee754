"""Bitserial (bit-plane / popcount) GEMM and convolution for quantized inference."""

from .bitpack import PackedBitMatrix, pack_bit_planes, quantize_and_pack, unpack_bit_planes
from .convolution import BitserialConv, ConvShape, QuantTensor, conv_bitserial, conv_gop_count, im2col
from .kernels import TileConfig, affine_gemm, and_dot, bitserial_gemm, microkernel, xnor_dot
from .quantize import (
    BIPOLAR,
    LevelMatrix,
    QuantParams,
    dequantize,
    fit_uniform_quantizer,
    quantization_mse,
    quantize_levels,
    quantize_uniform,
)

__version__ = "0.1.0"
