"""Data-model construction rules and the serialized byte layout."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoszp import (
    BadMagic,
    BlockView,
    CompressedStream,
    GeometryMismatch,
    OpReport,
    OutlierOverflow,
    QuantArray,
    QuantOverflow,
    QuantParams,
    TruncatedStream,
    VersionMismatch,
    deserialize,
    serialize,
)
from hoszp.model import MAGIC

from conftest import random_stream


class TestQuantParams:
    def test_basic(self):
        p = QuantParams(eps=0.01, dims=(2, 2))
        assert p.element_count == 4
        assert p.block_len == 32
        assert p.block_count == 1
        assert p.numpy_dtype == np.float32
        assert p.raw_nbytes == 16

    @pytest.mark.parametrize("eps", [0.0, -1.0, float("nan"), float("inf")])
    def test_bad_eps(self, eps):
        with pytest.raises(ValueError):
            QuantParams(eps=eps, dims=(4,))

    @pytest.mark.parametrize("dims", [(), (0,), (3, -1)])
    def test_bad_dims(self, dims):
        with pytest.raises(ValueError):
            QuantParams(eps=0.1, dims=dims)

    def test_bad_block_len_and_dtype(self):
        with pytest.raises(ValueError):
            QuantParams(eps=0.1, dims=(4,), block_len=0)
        with pytest.raises(ValueError):
            QuantParams(eps=0.1, dims=(4,), dtype="f16")

    def test_partial_block_geometry(self):
        p = QuantParams(eps=0.1, dims=(7,), block_len=3)
        assert p.block_count == 3
        assert list(p.block_lengths()) == [3, 3, 1]
        assert list(p.block_starts()) == [0, 3, 6]

    def test_block_len_may_exceed_element_count(self):
        p = QuantParams(eps=0.1, dims=(5,), block_len=32)
        assert p.block_count == 1
        assert list(p.block_lengths()) == [5]


class TestQuantArray:
    def test_length_checked(self):
        p = QuantParams(eps=0.1, dims=(4,))
        with pytest.raises(ValueError):
            QuantArray(np.zeros(3, dtype=np.int64), p)

    def test_63_bit_magnitude_enforced(self):
        p = QuantParams(eps=0.1, dims=(2,))
        QuantArray(np.array([2**63 - 1, -(2**63 - 1)]), p)  # fits
        with pytest.raises(QuantOverflow):
            QuantArray(np.array([0, np.iinfo(np.int64).min]), p)


class TestBlockView:
    def test_from_signed(self):
        v = BlockView.from_signed(-1, [0, 0, -2, 0])
        assert v.outlier == -1
        assert list(v.residual_mags) == [0, 0, 2, 0]
        assert list(v.signs) == [0, 0, 1, 0]
        assert v.width == 2
        assert not v.is_constant
        assert v.signed_residuals() == [0, 0, -2, 0]

    def test_constant(self):
        v = BlockView.from_signed(7, [0, 0, 0])
        assert v.is_constant and v.width == 0

    def test_first_residual_must_be_zero(self):
        with pytest.raises(ValueError):
            BlockView.from_signed(0, [1, 0])

    def test_width_consistency_checked(self):
        with pytest.raises(ValueError):
            BlockView(0, np.array([0, 3], dtype=np.uint64),
                      np.array([0, 0], dtype=np.uint8), width=1, is_constant=False)
        with pytest.raises(ValueError):
            BlockView(0, np.array([0, 0], dtype=np.uint64),
                      np.array([0, 0], dtype=np.uint8), width=0, is_constant=False)


class TestCompressedStreamConstruction:
    def test_section_sizes_cross_checked(self, example_stream):
        p = example_stream.params
        with pytest.raises(GeometryMismatch):
            CompressedStream(p, example_stream.widths, example_stream.outliers,
                             b"", example_stream.payload)
        with pytest.raises(GeometryMismatch):
            CompressedStream(p, example_stream.widths, example_stream.outliers,
                             example_stream.sign_planes, example_stream.payload + b"\x00")

    def test_outlier_32bit_enforced(self, example_stream):
        with pytest.raises(OutlierOverflow):
            CompressedStream(example_stream.params, example_stream.widths,
                             np.array([2**31]), example_stream.sign_planes,
                             example_stream.payload)


class TestSerializeGoldens:
    def test_example_block_sections(self, example_stream):
        assert list(example_stream.widths) == [2]
        assert list(example_stream.outliers) == [-1]
        assert example_stream.sign_planes == b"\x20"  # bits 0,0,1,0 MSB-first
        assert example_stream.payload == b"\x08"  # (00001000)_2

    def test_example_block_full_dump(self, example_stream):
        # documented worked example in FORMAT.md
        expected = bytes.fromhex(
            "48535a50"          # magic "HSZP"
            "01"                # version 1
            "00"                # dtype f32
            "0200"              # ndim 2
            "7b14ae47e17a843f"  # eps 0.01 (f64 LE)
            "20000000"          # block_len 32
            "0200000000000000"  # dim 2
            "0200000000000000"  # dim 2
            "02"                # widths
            "ffffffff"          # outlier -1 (i32 LE)
            "20"                # sign plane
            "08"                # payload
        )
        assert serialize(example_stream) == expected

    def test_all_zero_field_has_empty_sections(self):
        from hoszp import RawArray, compress

        p = QuantParams(eps=0.1, dims=(64,), block_len=32, dtype="f32")
        s = compress(RawArray(np.zeros(64, dtype=np.float32), (64,), "f32"), p)
        assert list(s.widths) == [0, 0]
        assert list(s.outliers) == [0, 0]
        assert s.sign_planes == b"" and s.payload == b""

    def test_deterministic(self, example_stream):
        assert serialize(example_stream) == serialize(example_stream)


class TestRoundTrip:
    def test_random_streams(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            s = random_stream(rng)
            data = serialize(s)
            s2 = deserialize(data)
            assert s2 == s
            assert serialize(s2) == data

    def test_serialized_size_formula(self):
        rng = np.random.default_rng(43)
        for _ in range(100):
            s = random_stream(rng)
            p = s.params
            header = 20 + 8 * len(p.dims)
            lengths = p.block_lengths()
            widths = s.widths.astype(np.int64)
            expected = header + 5 * p.block_count
            expected += int(((lengths + 7) // 8)[widths > 0].sum())
            expected += int(((lengths * widths + 7) // 8).sum())
            assert len(serialize(s)) == expected == s.serialized_size


class TestDeserializeErrors:
    def test_bad_magic(self, example_stream):
        data = bytearray(serialize(example_stream))
        data[0] = ord("X")
        with pytest.raises(BadMagic):
            deserialize(bytes(data))

    def test_version_mismatch(self, example_stream):
        data = bytearray(serialize(example_stream))
        data[4] = 99
        with pytest.raises(VersionMismatch):
            deserialize(bytes(data))

    def test_unknown_dtype_code(self, example_stream):
        data = bytearray(serialize(example_stream))
        data[5] = 7
        with pytest.raises(GeometryMismatch):
            deserialize(bytes(data))

    @pytest.mark.parametrize("keep", [2, 10, 21, 28, 37, 41, 42])
    def test_truncation_everywhere(self, example_stream, keep):
        data = serialize(example_stream)
        assert len(data) == 43
        with pytest.raises(TruncatedStream):
            deserialize(data[:keep])

    def test_corrupt_dim_is_geometry_mismatch(self):
        rng = np.random.default_rng(5)
        p = QuantParams(eps=0.1, dims=(64,), block_len=32, dtype="f32")
        s = random_stream(rng, params=p)
        assert p.block_count == 2
        data = bytearray(serialize(s))
        data[20] = 32  # dim 64 -> 32: sections now end before the data does
        with pytest.raises(GeometryMismatch):
            deserialize(bytes(data))

    def test_trailing_garbage(self, example_stream):
        with pytest.raises(GeometryMismatch):
            deserialize(serialize(example_stream) + b"\x00")

    def test_not_even_magic(self):
        with pytest.raises(BadMagic):
            deserialize(b"zz")
        with pytest.raises(TruncatedStream):
            deserialize(MAGIC)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_round_trip_property(seed):
    s = random_stream(seed)
    assert deserialize(serialize(s)) == s


class TestOpReport:
    def test_throughput(self):
        r = OpReport("compress", 2.0, bytes_in=100, bytes_out=10, compression_ratio=10.0)
        assert r.throughput == 50.0
        assert OpReport("x", 0.0, 1, 1, 1.0).throughput == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            OpReport("x", -1.0, 1, 1, 1.0)
        with pytest.raises(ValueError):
            OpReport("x", 1.0, 1, 1, 0.0)
