"""Data model and binary layout of compressed streams.

A compressed stream is a header followed by four sections, in this order:

    widths      one unsigned byte per block (bits per residual magnitude)
    outliers    one signed little-endian 32-bit integer per block
    sign planes one bit per element of every *non-constant* block, in block
                order, each block's plane padded to a byte boundary
    payload     bit-packed residual magnitudes of every non-constant block,
                ``width`` bits per element (MSB first), each block's payload
                padded to a byte boundary

Constant blocks (width 0) contribute no sign bits and no payload bytes.
The exact byte layout, including a worked hex dump, is documented in
FORMAT.md at the repository root.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    GeometryMismatch,
    OutlierOverflow,
    TruncatedStream,
    VersionMismatch,
)

MAGIC = b"HSZP"
VERSION = 1

#: dtype name -> (header code, numpy dtype, bytes per element)
DTYPES = {"f32": (0, np.float32, 4), "f64": (1, np.float64, 8)}
_DTYPE_BY_CODE = {code: name for name, (code, _, _) in DTYPES.items()}

_I32_MIN = -(2**31)
_I32_MAX = 2**31 - 1

# little-endian: magic, version, dtype code, ndim, eps, block_len
_HEADER = struct.Struct("<4sBBHdI")


@dataclass(frozen=True)
class QuantParams:
    """Compression parameters governing every lossy step.

    ``eps`` is the absolute error bound: each reconstructed value differs
    from its original by at most ``eps``.  Blocks are formed over the
    row-major linearization of the array; the last block may be partial.
    """

    eps: float
    dims: tuple[int, ...]
    block_len: int = 32
    dtype: str = "f32"

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        eps = float(self.eps)
        object.__setattr__(self, "eps", eps)
        if not (eps > 0.0 and np.isfinite(eps)):
            raise ValueError(f"eps must be positive and finite, got {eps}")
        if not self.dims or any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be non-empty positive integers, got {self.dims}")
        if self.block_len < 1:
            raise ValueError(f"block_len must be >= 1, got {self.block_len}")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {sorted(DTYPES)}, got {self.dtype!r}")

    @property
    def element_count(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    @property
    def block_count(self) -> int:
        n = self.element_count
        return -(-n // self.block_len)

    @property
    def numpy_dtype(self):
        return DTYPES[self.dtype][1]

    @property
    def raw_nbytes(self) -> int:
        return self.element_count * DTYPES[self.dtype][2]

    def block_lengths(self) -> np.ndarray:
        """Actual length of each block (the last one may be partial)."""
        n, k = self.element_count, self.block_len
        lengths = np.full(self.block_count, k, dtype=np.int64)
        if n % k:
            lengths[-1] = n % k
        return lengths

    def block_starts(self) -> np.ndarray:
        return np.arange(self.block_count, dtype=np.int64) * self.block_len


@dataclass(eq=False)
class QuantArray:
    """Array of signed quantization bins: the partially-decompressed domain
    where multiplicative operations and reductions run.

    Every bin magnitude must fit in 63 bits; the reconstruction value of a
    bin ``rho`` is ``2 * eps * rho``.
    """

    bins: np.ndarray
    params: QuantParams

    def __post_init__(self):
        bins = np.ascontiguousarray(self.bins, dtype=np.int64)
        if bins.ndim != 1 or bins.shape[0] != self.params.element_count:
            raise ValueError(
                f"expected {self.params.element_count} bins, got shape {bins.shape}"
            )
        # int64 min has a 64-bit magnitude and is the one int64 value we reject
        if bins.size and np.any(bins == np.iinfo(np.int64).min):
            from .errors import QuantOverflow

            raise QuantOverflow("bin magnitude does not fit in 63 bits")
        self.bins = bins

    def __eq__(self, other):
        if not isinstance(other, QuantArray):
            return NotImplemented
        return self.params == other.params and np.array_equal(self.bins, other.bins)


@dataclass(eq=False)
class BlockView:
    """Decoded per-block working set.

    ``residual_mags[0]`` is always 0: the block's first bin is carried by
    ``outlier`` instead of a residual.  A sign bit attached to a zero
    magnitude is meaningless and decodes to 0 either way.
    """

    outlier: int
    residual_mags: np.ndarray  # uint64
    signs: np.ndarray  # uint8, 0 = non-negative, 1 = negative
    width: int
    is_constant: bool

    def __post_init__(self):
        mags = np.ascontiguousarray(self.residual_mags, dtype=np.uint64)
        signs = np.ascontiguousarray(self.signs, dtype=np.uint8)
        if mags.shape != signs.shape or mags.ndim != 1 or mags.size == 0:
            raise ValueError("residual_mags and signs must be 1-D and equally sized")
        if mags[0] != 0:
            raise ValueError("first residual of a block must be 0 (held by the outlier)")
        expected = int(mags.max()).bit_length()
        if self.width != expected:
            raise ValueError(f"width {self.width} != required bit length {expected}")
        if self.is_constant != (self.width == 0):
            raise ValueError("is_constant must hold exactly when width == 0")
        self.residual_mags = mags
        self.signs = signs

    @classmethod
    def from_signed(cls, outlier: int, signed_residuals) -> "BlockView":
        """Build a canonical view from signed residuals (index 0 must be 0)."""
        res = [int(r) for r in signed_residuals]
        mags = np.asarray([abs(r) for r in res], dtype=np.uint64)
        signs = np.asarray([1 if r < 0 else 0 for r in res], dtype=np.uint8)
        width = int(mags.max()).bit_length()
        return cls(int(outlier), mags, signs, width, width == 0)

    def signed_residuals(self) -> list[int]:
        return [
            -int(m) if s else int(m) for m, s in zip(self.residual_mags, self.signs)
        ]


def _as_int32_outliers(outliers) -> np.ndarray:
    arr = np.ascontiguousarray(outliers)
    if arr.dtype != np.int32:
        wide = arr.astype(np.int64)
        if wide.size and (wide.min() < _I32_MIN or wide.max() > _I32_MAX):
            raise OutlierOverflow(
                f"outlier out of signed 32-bit range: {int(wide[np.argmax(np.abs(wide))])}"
            )
        arr = wide.astype(np.int32)
    return arr


@dataclass(eq=False)
class CompressedStream:
    """The serialized artifact: header parameters plus the four sections.

    Instances are immutable by contract and safe to share across threads.
    Construction normalizes and cross-checks section sizes, so any stream
    object in circulation is structurally valid.
    """

    params: QuantParams
    widths: np.ndarray
    outliers: np.ndarray
    sign_planes: bytes
    payload: bytes

    def __post_init__(self):
        widths = np.ascontiguousarray(self.widths, dtype=np.uint8)
        outliers = _as_int32_outliers(self.outliers)
        b = self.params.block_count
        if widths.shape != (b,) or outliers.shape != (b,):
            raise GeometryMismatch(
                f"expected {b} widths/outliers, got {widths.shape}/{outliers.shape}"
            )
        if widths.size and int(widths.max()) > 64:
            raise GeometryMismatch(f"width {int(widths.max())} exceeds 64 bits")
        self.widths = widths
        self.outliers = outliers
        self.sign_planes = bytes(self.sign_planes)
        self.payload = bytes(self.payload)
        if len(self.sign_planes) != int(self.sign_sizes().sum()):
            raise GeometryMismatch(
                f"sign section is {len(self.sign_planes)} bytes, "
                f"expected {int(self.sign_sizes().sum())}"
            )
        if len(self.payload) != int(self.payload_sizes().sum()):
            raise GeometryMismatch(
                f"payload section is {len(self.payload)} bytes, "
                f"expected {int(self.payload_sizes().sum())}"
            )

    def sign_sizes(self) -> np.ndarray:
        """Per-block sign-plane size in bytes (0 for constant blocks)."""
        lengths = self.params.block_lengths()
        sizes = (lengths + 7) // 8
        sizes[self.widths == 0] = 0
        return sizes

    def payload_sizes(self) -> np.ndarray:
        """Per-block payload size in bytes (0 for constant blocks)."""
        lengths = self.params.block_lengths()
        sizes = (lengths * self.widths.astype(np.int64) + 7) // 8
        return sizes

    @property
    def serialized_size(self) -> int:
        header = _HEADER.size + 8 * len(self.params.dims)
        return (
            header
            + 5 * self.params.block_count
            + len(self.sign_planes)
            + len(self.payload)
        )

    @property
    def compression_ratio(self) -> float:
        return self.params.raw_nbytes / self.serialized_size

    def __eq__(self, other):
        if not isinstance(other, CompressedStream):
            return NotImplemented
        return (
            self.params == other.params
            and np.array_equal(self.widths, other.widths)
            and np.array_equal(self.outliers, other.outliers)
            and self.sign_planes == other.sign_planes
            and self.payload == other.payload
        )


@dataclass
class OpReport:
    """Timing/size record emitted by the CLI, the benchmark harness, and the
    distributed simulator."""

    op_name: str
    elapsed_seconds: float
    bytes_in: int
    bytes_out: int
    compression_ratio: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.elapsed_seconds < 0 or self.bytes_in < 0 or self.bytes_out < 0:
            raise ValueError("sizes and elapsed time must be non-negative")
        if not self.compression_ratio > 0:
            raise ValueError("compression_ratio must be positive")

    @property
    def throughput(self) -> float:
        """Bytes processed per second (0.0 when elapsed time is 0)."""
        if self.elapsed_seconds > 0:
            return self.bytes_in / self.elapsed_seconds
        return 0.0


def serialize(stream: CompressedStream) -> bytes:
    """Encode a stream to its canonical byte form.

    Deterministic: equal streams produce equal bytes.
    """
    p = stream.params
    _as_int32_outliers(stream.outliers)  # re-assert the 32-bit contract
    parts = [
        _HEADER.pack(MAGIC, VERSION, DTYPES[p.dtype][0], len(p.dims), p.eps, p.block_len),
        np.asarray(p.dims, dtype="<u8").tobytes(),
        stream.widths.tobytes(),
        stream.outliers.astype("<i4").tobytes(),
        stream.sign_planes,
        stream.payload,
    ]
    return b"".join(parts)


def deserialize(data: bytes) -> CompressedStream:
    """Parse canonical bytes back into a stream, validating every section
    length against the header-derived expectation."""
    data = bytes(data)
    if len(data) < _HEADER.size:
        if data[: len(MAGIC)] != MAGIC[: len(data)]:
            raise BadMagic("not a compressed stream (magic mismatch)")
        raise TruncatedStream(f"{len(data)} bytes is shorter than the fixed header")
    magic, version, dtype_code, ndim, eps, block_len = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"unsupported stream version {version}")
    if dtype_code not in _DTYPE_BY_CODE:
        raise GeometryMismatch(f"unknown dtype code {dtype_code}")
    if ndim < 1:
        raise GeometryMismatch("header declares zero dimensions")
    if not (eps > 0.0 and np.isfinite(eps)):
        raise GeometryMismatch(f"invalid error bound {eps}")

    pos = _HEADER.size
    dims_end = pos + 8 * ndim
    if len(data) < dims_end:
        raise TruncatedStream("byte sequence ends inside the dims table")
    dims = tuple(int(d) for d in np.frombuffer(data[pos:dims_end], dtype="<u8"))
    if any(d < 1 for d in dims):
        raise GeometryMismatch(f"non-positive dim in {dims}")
    if block_len < 1:
        raise GeometryMismatch(f"invalid block_len {block_len}")
    params = QuantParams(eps=eps, dims=dims, block_len=block_len, dtype=_DTYPE_BY_CODE[dtype_code])

    pos = dims_end
    b = params.block_count
    if len(data) < pos + b:
        raise TruncatedStream("byte sequence ends inside the widths section")
    widths = np.frombuffer(data[pos : pos + b], dtype=np.uint8)
    pos += b
    if widths.size and int(widths.max()) > 64:
        raise GeometryMismatch(f"width {int(widths.max())} exceeds 64 bits")
    if len(data) < pos + 4 * b:
        raise TruncatedStream("byte sequence ends inside the outliers section")
    outliers = np.frombuffer(data[pos : pos + 4 * b], dtype="<i4").astype(np.int32)
    pos += 4 * b

    lengths = params.block_lengths()
    sign_total = int(((lengths + 7) // 8)[widths > 0].sum())
    payload_total = int((((lengths * widths.astype(np.int64)) + 7) // 8).sum())
    if len(data) < pos + sign_total:
        raise TruncatedStream("byte sequence ends inside the sign-plane section")
    sign_planes = data[pos : pos + sign_total]
    pos += sign_total
    if len(data) < pos + payload_total:
        raise TruncatedStream("byte sequence ends inside the payload section")
    payload = data[pos : pos + payload_total]
    pos += payload_total
    if pos != len(data):
        raise GeometryMismatch(
            f"{len(data) - pos} trailing bytes beyond the declared sections"
        )
    return CompressedStream(params, widths.copy(), outliers, sign_planes, payload)
