import pytest
from hypothesis import given
from hypothesis import strategies as st

from bitserial.errors import ConfigurationError
from bitserial.perfmodel import (BUILTIN_PROFILES, CORTEX_A7, CORTEX_A53, ArchProfile,
                                 load_profiles, max_bit_product, model_table, predicted_gops,
                                 speedup_bound)

rate = st.floats(0.1, 500, allow_nan=False)
profiles = st.builds(ArchProfile, st.just("x"), rate, rate, rate, st.floats(0.1, 5))


class TestProfiles:
    def test_builtin_rates_exact(self):
        assert (CORTEX_A7.f32_ops_per_cycle, CORTEX_A7.i8_ops_per_cycle,
                CORTEX_A7.binary_ops_per_cycle) == (2, 2.5, 42)
        assert (CORTEX_A53.f32_ops_per_cycle, CORTEX_A53.i8_ops_per_cycle,
                CORTEX_A53.binary_ops_per_cycle) == (8, 5.3, 85)
        assert (CORTEX_A7.freq_ghz, CORTEX_A53.freq_ghz) == (1.2, 1.4)
        assert BUILTIN_PROFILES == {"a7": CORTEX_A7, "a53": CORTEX_A53}

    @pytest.mark.parametrize("i", range(4))
    def test_non_positive_rejected(self, i):
        vals = [1.0, 1.0, 1.0, 1.0]
        vals[i] = 0.0
        with pytest.raises(ConfigurationError):
            ArchProfile("bad", *vals)

    def test_unknown_method(self):
        with pytest.raises(ConfigurationError):
            CORTEX_A7.rate("f64")


class TestSpeedupBound:
    def test_a7(self):
        assert speedup_bound(CORTEX_A7, 1, 1) == pytest.approx(16.8, abs=1e-9)

    def test_a53(self):
        assert speedup_bound(CORTEX_A53, 1, 1) == pytest.approx(10.625, abs=1e-9)

    def test_brackets_quoted_range(self):
        lo, hi = sorted(speedup_bound(p, 1, 1) for p in (CORTEX_A7, CORTEX_A53))
        assert round(lo) == 11 and int(lo) == 10 and int(hi) == 16

    def test_bad_bits(self):
        with pytest.raises(ConfigurationError):
            speedup_bound(CORTEX_A7, 0, 1)

    @given(p=profiles, a=st.integers(1, 8), b=st.integers(1, 8))
    def test_doubling_quarters(self, p, a, b):
        assert speedup_bound(p, 2 * a, 2 * b) == pytest.approx(speedup_bound(p, a, b) / 4,
                                                               rel=1e-12)

    @given(p=profiles, a=st.integers(1, 8), b=st.integers(1, 8))
    def test_depends_on_product_only(self, p, a, b):
        assert speedup_bound(p, a, b) == pytest.approx(speedup_bound(p, a * b, 1), rel=1e-12)
        assert speedup_bound(p, a, b) == pytest.approx(speedup_bound(p, b, a), rel=1e-12)

    @given(p=profiles, n=st.integers(1, 63))
    def test_strictly_decreasing(self, p, n):
        assert speedup_bound(p, n + 1, 1) < speedup_bound(p, n, 1)


class TestMaxBitProduct:
    def test_values(self):
        assert max_bit_product(CORTEX_A7) == 16
        assert max_bit_product(CORTEX_A53) == 10

    def test_consistent_with_measured_break_even(self):
        assert all(max_bit_product(p) >= 9 for p in (CORTEX_A7, CORTEX_A53))

    def test_exact_ratio(self):
        # binary / best == 10 exactly: P = 10 gives speedup 1, not > 1
        assert max_bit_product(ArchProfile("x", 8.5, 1, 85, 1)) == 9

    @given(p=profiles)
    def test_bracket(self, p):
        pmax = max_bit_product(p)
        best, binary = p.best_baseline_rate, p.binary_ops_per_cycle
        assert pmax * best < binary * (1 + 1e-12)
        assert binary <= (pmax + 1) * best * (1 + 1e-12)


class TestPredictedGops:
    def test_a7_f32(self):
        assert predicted_gops(CORTEX_A7, "f32") == pytest.approx(2.4)

    def test_a53_binary(self):
        assert predicted_gops(CORTEX_A53, "binary") == pytest.approx(119)

    @given(p=profiles, k=st.floats(0.5, 4), m=st.sampled_from(["f32", "i8", "binary"]))
    def test_linear_in_frequency(self, p, k, m):
        q = ArchProfile("y", p.f32_ops_per_cycle, p.i8_ops_per_cycle,
                        p.binary_ops_per_cycle, p.freq_ghz * k)
        assert predicted_gops(q, m) == pytest.approx(k * predicted_gops(p, m), rel=1e-12)


class TestConfigFile:
    def test_load(self, tmp_path):
        f = tmp_path / "cpus.txt"
        f.write_text("# name f32 i8 binary ghz\n\nmine 4 4 64 2.0  # desk box\nother,1,2,3,1\n")
        got = load_profiles(f)
        assert got["mine"] == ArchProfile("mine", 4, 4, 64, 2.0)
        assert speedup_bound(got["mine"], 1, 1) == 16
        assert got["other"].binary_ops_per_cycle == 3

    @pytest.mark.parametrize("text", ["x 1 2 3\n", "x 1 2 three 4\n", "# nothing\n",
                                      "x 1 2 3 -1\n"])
    def test_bad_files(self, tmp_path, text):
        f = tmp_path / "bad.txt"
        f.write_text(text)
        with pytest.raises(ConfigurationError):
            load_profiles(f)

    def test_model_table(self):
        text = model_table(CORTEX_A7, max_bits=2)
        assert "16.800" in text and "4.200" in text
        assert "max bit product with speedup > 1: 16" in text
