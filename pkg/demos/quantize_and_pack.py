"""
Quantizing activations and packing them into bit planes
=======================================================

"""
import numpy as np

from bitserial import (BIPOLAR, QuantParams, fit_uniform_quantizer, pack_bit_planes,
                       quantization_mse, quantize_and_pack, quantize_uniform, unpack_bit_planes)

rng = np.random.default_rng(0)

# ReLU outputs look roughly half-Gaussian
acts = np.abs(rng.standard_normal((4, 100)))

# fit a 2-bit uniform quantizer: levels offset + scale * {0, 1, 2, 3}
params, history = fit_uniform_quantizer(acts.ravel(), bits=2, return_history=True)
print("fitted", params)
print("MSE per iteration:", np.round(history, 5))

levels = quantize_uniform(acts, params)
print("level histogram:", np.bincount(levels.levels.ravel(), minlength=4))
print("MSE of the fitted quantizer: %.5f" % quantization_mse(acts, params))

# a 2-bit matrix becomes two binary planes of 64-bit words
packed = pack_bit_planes(levels, params)
print("planes shape (bits, rows, words):", packed.planes.shape)
print("row level sums:", packed.row_weighted_sums)
print(packed.dump().splitlines()[1])

# unpacking gives the levels back exactly
assert np.array_equal(unpack_bit_planes(packed).levels, levels.levels)

# quantizing and packing can be fused into one pass
fused = quantize_and_pack(acts, params)
assert np.array_equal(fused.planes, packed.planes)

# 1-bit weights use the sign code: bit 1 means +1, bit 0 means -1
signs = quantize_and_pack(np.array([[0.3, -2.0, 1.0, 5.0]]), BIPOLAR)
print("sign bits of [0.3, -2, 1, 5]: %s" % bin(int(signs.planes[0, 0, 0])))

# a wider quantizer on the same data has lower error
wide = fit_uniform_quantizer(acts.ravel(), bits=4)
print("4-bit MSE: %.6f" % quantization_mse(acts, wide))
print("uniform 3-bit on [0, 1]:", QuantParams(3, 0.0, 1 / 7).range)
