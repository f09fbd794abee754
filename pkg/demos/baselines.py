"""
Reference baselines: float32, int8 and Winograd
===============================================

"""
import numpy as np

from bitserial import ConvShape
from bitserial.baselines import (conv_f32_direct, conv_f32_im2col, filter_transform_count,
                                 gemm_i8_i32, winograd_conv_3x3)

rng = np.random.default_rng(3)
shape = ConvShape(14, 8, 8, 3)
x = rng.standard_normal(shape.input_dims)
w = rng.standard_normal(shape.weight_dims)

direct = conv_f32_direct(x, w, shape)


def rel(a):
    return np.abs(a - direct).max() / np.abs(direct).max()


print("im2col + float32 GEMM   rel err %.1e" % rel(conv_f32_im2col(x, w, shape)))
print("Winograd F(2x2,3x3)     rel err %.1e" % rel(winograd_conv_3x3(x, w, shape)))
print("  with float16 tiles    rel err %.1e"
      % rel(winograd_conv_3x3(x, w, shape, half_precision_intermediates=True)))

# transformed filters are cached per weight set
n = filter_transform_count()
winograd_conv_3x3(x, w, shape)
print("filter transforms on a repeat call:", filter_transform_count() - n)

# int8 GEMM with zero points
a = rng.integers(-128, 128, (4, 300))
b = rng.integers(-128, 128, (5, 300))
print("int8 GEMM exact:", np.array_equal(gemm_i8_i32(a, 3, b, -7), (a - 3) @ (b + 7).T))
