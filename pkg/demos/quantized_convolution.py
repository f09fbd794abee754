"""
A quantized convolution layer
=============================

"""
import numpy as np

from bitserial import BitserialConv, ConvShape, QuantParams, QuantTensor, conv_gop_count
from bitserial.baselines import conv_f32_direct

rng = np.random.default_rng(2)

shape = ConvShape(spatial=14, in_channels=32, out_channels=16, kernel=3)
print(shape, "-> output", shape.out_spatial, "x", shape.out_spatial)
print("GOPs per call: %.4f" % (conv_gop_count(shape) / 1e9))

act = QuantParams(2, 0.0, 1 / 3)        # unsigned 2-bit activations on [0, 1]
wgt = QuantParams(2, -1.0, 2 / 3)       # symmetric 2-bit weights on [-1, 1]
weights = QuantTensor(rng.integers(0, 4, shape.weight_dims), wgt)

# weights are lowered and packed once, when the layer is built
layer = BitserialConv(weights, shape)

x = np.clip(rng.standard_normal(shape.input_dims), 0, None)
y = layer.forward_real(x, act)
print("output", y.shape)

# same thing through a float convolution of the dequantized tensors
xq = QuantTensor.from_real(x, act)
ref = conv_f32_direct(xq.dequantize(), weights.dequantize(), shape, pad_value=act.offset)
print("max |bitserial - float reference| = %.2e" % np.abs(y - ref).max())
