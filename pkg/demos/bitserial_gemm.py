"""
Integer matrix products from AND and popcount
=============================================

"""
import time

import numpy as np

from bitserial import (BIPOLAR, LevelMatrix, QuantParams, TileConfig, affine_gemm,
                       and_dot, bitserial_gemm, pack_bit_planes, xnor_dot)

rng = np.random.default_rng(1)

# one binary dot product is AND then popcount
print("and_dot(1011, 0110) =", and_dot([0b1011], [0b0110], 4))
# for +/-1 vectors it is XNOR then popcount
print("xnor_dot(1011, 1011) =", xnor_dot([0b1011], [0b1011], 4))

# a 2-bit x 3-bit product is a weighted sum of 6 binary products
unit2, unit3 = QuantParams(2, 0, 1), QuantParams(3, 0, 1)
la = rng.integers(0, 4, (32, 500))
lb = rng.integers(0, 8, (16, 500))
A = pack_bit_planes(LevelMatrix(la, 2), unit2)
B = pack_bit_planes(LevelMatrix(lb, 3), unit3)
G = bitserial_gemm(A, B)
print("exact integer product:", np.array_equal(G, la @ lb.T))

# tile shape, k blocking and thread count never change the answer
for cfg, workers in [(TileConfig(1, 1, 1), 1), (TileConfig(8, 2, 1023), 4)]:
    assert np.array_equal(bitserial_gemm(A, B, cfg, workers), G)
print("blocking and worker count agree")

# affine quantizers: the row sums cached at packing time handle the offsets
pa, pb = QuantParams(2, 0.1, 0.3), QuantParams(3, -1.0, 2 / 7)
A = pack_bit_planes(LevelMatrix(la, 2), pa)
B = pack_bit_planes(LevelMatrix(lb, 3), pb)
real = (pa.offset + pa.scale * la) @ (pb.offset + pb.scale * lb).T
print("affine max error: %.2e" % np.abs(affine_gemm(A, B) - real).max())

# binary networks: both sides bipolar
sa, sb = rng.integers(0, 2, (64, 4096)), rng.integers(0, 2, (64, 4096))
A, B = pack_bit_planes(LevelMatrix(sa, 1), BIPOLAR), pack_bit_planes(LevelMatrix(sb, 1), BIPOLAR)
t0 = time.perf_counter()
out = affine_gemm(A, B)
dt = time.perf_counter() - t0
print("bipolar 64x64x4096: %.2f ms, matches +/-1 product: %s"
      % (dt * 1e3, np.array_equal(out, (2 * sa - 1) @ (2 * sb - 1).T)))
