import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitserial.bitpack import pack_bit_planes
from bitserial.convolution import (BitserialConv, ConvShape, QuantTensor, conv_bitserial,
                                   conv_gop_count, im2col, im2col_array, lower_weights)
from bitserial.errors import CorruptInputError, ShapeError
from bitserial.kernels import TileConfig, affine_gemm
from bitserial.quantize import BIPOLAR, QuantParams
from oracles import conv_loops, rel_err


def rand_tensor(rng, dims, params):
    return QuantTensor(rng.integers(0, params.n_levels, dims), params)


ACT = QuantParams(2, 0.0, 0.5)
WGT = QuantParams(2, -1.0, 2 / 3)


class TestConvShape:
    def test_same_padding_default(self):
        assert ConvShape(14, 8, 8, 3).pad == 1
        assert ConvShape(14, 8, 8, 1).pad == 0
        assert ConvShape(14, 8, 8, 3).out_spatial == 14

    def test_valid_conv(self):
        assert ConvShape(5, 1, 1, 3, pad=0).out_spatial == 3

    def test_stride(self):
        assert ConvShape(7, 1, 1, 3, stride=2).out_spatial == 4

    def test_non_integral_output(self):
        with pytest.raises(ShapeError):
            ConvShape(6, 1, 1, 3, stride=2)

    def test_kernel_larger_than_input(self):
        with pytest.raises(ShapeError):
            ConvShape(2, 1, 1, 5, pad=0)

    @pytest.mark.parametrize("field", ["spatial", "in_channels", "out_channels", "kernel"])
    def test_non_positive(self, field):
        kw = dict(spatial=4, in_channels=1, out_channels=1, kernel=1)
        kw[field] = 0
        with pytest.raises(ShapeError):
            ConvShape(**kw)


class TestGopCount:
    def test_pointwise(self):
        assert conv_gop_count(ConvShape(14, 64, 64, 1)) == 1_605_632

    def test_three_by_three(self):
        assert conv_gop_count(ConvShape(14, 64, 64, 3)) == 14_450_688

    def test_trivial(self):
        assert conv_gop_count(ConvShape(1, 1, 1, 1)) == 2


class TestIm2col:
    def test_pointwise_is_reshape(self, rng):
        x = rng.integers(0, 4, (3, 5, 5))
        cols = im2col_array(x, ConvShape(5, 3, 1, 1))
        assert np.array_equal(cols, x.reshape(3, 25).T)

    def test_valid_single_row(self):
        x = np.arange(9).reshape(1, 3, 3)
        cols = im2col_array(x, ConvShape(3, 1, 1, 3, pad=0))
        assert cols.tolist() == [list(range(9))]

    def test_padding_is_level_zero(self):
        t = QuantTensor(np.full((1, 2, 2), 3), ACT)
        lm = im2col(t, ConvShape(2, 1, 1, 3))
        assert lm.levels.shape == (4, 9)
        # top-left output pixel sees zeros along its top row and left column
        assert lm.levels[0].tolist() == [0, 0, 0, 0, 3, 3, 0, 3, 3]

    def test_column_order_channel_major(self):
        x = np.stack([np.zeros((3, 3)), np.ones((3, 3))]).astype(int)
        cols = im2col_array(x, ConvShape(3, 2, 1, 3, pad=0))
        assert cols.tolist() == [[0] * 9 + [1] * 9]

    def test_input_dims_checked(self):
        with pytest.raises(ShapeError):
            im2col_array(np.zeros((2, 4, 4)), ConvShape(4, 3, 1, 1))

    def test_weight_dims_checked(self):
        w = QuantTensor(np.zeros((2, 3, 3, 3)), WGT)
        with pytest.raises(ShapeError):
            lower_weights(w, ConvShape(4, 3, 2, 1))


class TestQuantTensor:
    def test_out_of_range(self):
        with pytest.raises(CorruptInputError):
            QuantTensor(np.array([4]), ACT)

    def test_from_real_round_trip(self):
        t = QuantTensor.from_real(np.array([[[0.0, 0.5, 1.4]]]), ACT)
        assert t.levels.tolist() == [[[0, 1, 3]]]
        assert t.dequantize().tolist() == [[[0.0, 0.5, 1.5]]]


class TestBitserialConv:
    @pytest.mark.parametrize("k", [1, 3])
    @pytest.mark.parametrize("bits", [1, 2, 3])
    def test_matches_direct_oracle(self, rng, k, bits):
        act = QuantParams(bits, 0.0, 1.0 / ((1 << bits) - 1))
        wgt = BIPOLAR if bits == 1 else QuantParams(bits, -1.0, 2.0 / ((1 << bits) - 1))
        shape = ConvShape(6, 5, 4, k)
        x = rand_tensor(rng, shape.input_dims, act)
        w = rand_tensor(rng, shape.weight_dims, wgt)
        got = conv_bitserial(x, w, shape)
        want = conv_loops(x.dequantize(), w.dequantize(), shape.pad, pad_value=act.offset)
        assert got.shape == (4, 6, 6)
        assert rel_err(got, want) <= 1e-9

    def test_offset_padding(self, rng):
        # nonzero activation offset: padding dequantizes to the offset
        act = QuantParams(2, 0.25, 0.5)
        shape = ConvShape(4, 2, 3, 3)
        x = rand_tensor(rng, shape.input_dims, act)
        w = rand_tensor(rng, shape.weight_dims, WGT)
        want = conv_loops(x.dequantize(), w.dequantize(), 1, pad_value=0.25)
        assert rel_err(conv_bitserial(x, w, shape), want) <= 1e-9

    def test_stride_two(self, rng):
        shape = ConvShape(7, 3, 2, 3, stride=2)
        x = rand_tensor(rng, shape.input_dims, ACT)
        w = rand_tensor(rng, shape.weight_dims, WGT)
        want = conv_loops(x.dequantize(), w.dequantize(), 1, stride=2)
        assert rel_err(conv_bitserial(x, w, shape), want) <= 1e-9

    def test_pointwise_is_affine_gemm(self, rng):
        shape = ConvShape(5, 6, 4, 1)
        x = rand_tensor(rng, shape.input_dims, ACT)
        w = rand_tensor(rng, shape.weight_dims, WGT)
        A = pack_bit_planes(x.as_level_matrix().levels.T.copy(), ACT)
        B = pack_bit_planes(w.levels.reshape(4, 6), WGT)
        want = affine_gemm(A, B).T.reshape(4, 5, 5)
        assert np.array_equal(conv_bitserial(x, w, shape), want)

    def test_zero_weights_give_constant(self, rng):
        # all weights at level 0 dequantize to the offset -1
        shape = ConvShape(5, 3, 2, 3)
        x = rand_tensor(rng, shape.input_dims, ACT)
        w = QuantTensor(np.zeros(shape.weight_dims), WGT)
        got = conv_bitserial(x, w, shape)
        want = conv_loops(x.dequantize(), w.dequantize(), 1)
        assert np.allclose(got, want)
        assert np.allclose(got[0], got[1])

    def test_translation(self, rng):
        # shifting the input by one pixel shifts the interior of the output
        shape = ConvShape(8, 2, 2, 3)
        levels = rng.integers(0, 4, shape.input_dims)
        shifted = np.zeros_like(levels)
        shifted[:, 1:, :] = levels[:, :-1, :]
        w = rand_tensor(rng, shape.weight_dims, WGT)
        layer = BitserialConv(w, shape)
        a = layer(QuantTensor(levels, ACT))
        b = layer(QuantTensor(shifted, ACT))
        assert np.allclose(b[:, 2:-1, 1:-1], a[:, 1:-2, 1:-1])

    def test_forward_real_matches_call(self, rng):
        shape = ConvShape(9, 4, 3, 3)
        w = rand_tensor(rng, shape.weight_dims, WGT)
        layer = BitserialConv(w, shape, TileConfig(2, 3, 1, 4), workers=2)
        x = rng.uniform(-0.5, 2.0, shape.input_dims)
        got = layer.forward_real(x, ACT)
        assert np.array_equal(got, layer(QuantTensor.from_real(x, ACT)))

    @settings(max_examples=20, deadline=None)
    @given(s=st.integers(1, 7), cin=st.integers(1, 5), cout=st.integers(1, 4),
           k=st.sampled_from([1, 3]), ba=st.integers(1, 3), bw=st.integers(1, 3),
           seed=st.integers(0, 2**32 - 1))
    def test_oracle_property(self, s, cin, cout, k, ba, bw, seed):
        rng = np.random.default_rng(seed)
        act = QuantParams(ba, 0.0, 0.3)
        wgt = QuantParams(bw, -0.7, 0.4)
        shape = ConvShape(s, cin, cout, k)
        x = rand_tensor(rng, shape.input_dims, act)
        w = rand_tensor(rng, shape.weight_dims, wgt)
        want = conv_loops(x.dequantize(), w.dequantize(), shape.pad)
        assert rel_err(conv_bitserial(x, w, shape), want) <= 1e-9
