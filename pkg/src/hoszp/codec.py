"""Three-stage lossy codec: quantization, 1-D blockwise decorrelation, and
blockwise fixed-length bit packing.

Quantization is the only lossy stage; its bin for a value ``x`` is
``floor((x + eps) / (2 * eps))`` and the reconstruction is ``2 * eps * bin``,
so every round-tripped value stays within ``eps`` of the original.  The
decorrelation stage stores, per block, the first bin as an *outlier* plus
the differences of consecutive bins split into sign bits and magnitudes.
Blocks whose residuals are all zero are *constant* and carry no sign or
payload bytes.

Besides full ``compress``/``decompress``, the module exposes the partial
entry points the homomorphic operations build on: ``decode_to_quant`` /
``encode_from_quant`` stop at the quantized-bin domain and never touch the
floating-point reconstruction.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import GeometryMismatch, QuantOverflow
from .model import BlockView, CompressedStream, DTYPES, QuantArray, QuantParams

_POW2 = np.asarray([1 << i for i in range(64)], dtype=np.uint64)
_I64_MAX = 2**63 - 1
# beyond this bin magnitude, int64 differences of two bins may overflow
_FAST_BIN_LIMIT = 2**62 - 1
# elements handled per vectorized packing chunk (bounds bit-matrix temporaries)
_CHUNK_ELEMS = 1 << 20


@dataclass(eq=False)
class RawArray:
    """Flat row-major array of finite reals plus its logical geometry."""

    values: np.ndarray
    dims: tuple[int, ...]
    dtype: str = "f32"

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        values = np.ascontiguousarray(self.values, dtype=DTYPES[self.dtype][1]).ravel()
        n = 1
        for d in self.dims:
            n *= d
        if values.shape[0] != n:
            raise ValueError(f"got {values.shape[0]} values for dims {self.dims}")
        if not np.isfinite(values).all():
            raise ValueError("raw data must be finite (no NaN/Inf)")
        self.values = values

    @property
    def nbytes(self) -> int:
        return self.values.size * DTYPES[self.dtype][2]

    def __eq__(self, other):
        if not isinstance(other, RawArray):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.dtype == other.dtype
            and np.array_equal(self.values, other.values)
        )


def read_raw(path, dims, dtype: str = "f32") -> RawArray:
    """Read a headerless flat little-endian IEEE-754 binary file."""
    code = "<f4" if dtype == "f32" else "<f8"
    values = np.fromfile(path, dtype=code)
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(np.asarray(dims, dtype=np.int64)))
    if values.size != n:
        raise GeometryMismatch(
            f"file holds {values.size} {dtype} values but dims {dims} imply {n}"
        )
    return RawArray(values, dims, dtype)


def write_raw(raw: RawArray, path) -> None:
    code = "<f4" if raw.dtype == "f32" else "<f8"
    raw.values.astype(code).tofile(path)


def resolve_eps(raw: RawArray, eps: float, mode: str = "abs") -> float:
    """Resolve a relative error bound against the input's value range.

    ``rel`` mode returns ``eps * (max - min)``; the resolved absolute bound
    is what gets stored in the stream header.
    """
    if mode == "abs":
        return float(eps)
    if mode == "rel":
        lo = float(raw.values.min())
        hi = float(raw.values.max())
        return float(eps) * (hi - lo)
    raise ValueError(f"eps mode must be 'abs' or 'rel', got {mode!r}")


# ---------------------------------------------------------------------------
# quantization


def _reconstruct_f64(bins: np.ndarray, params: QuantParams) -> np.ndarray:
    """Exact reconstruction grid ``2 * eps * bin`` in double precision."""
    return (2.0 * params.eps) * bins.astype(np.float64)


def _dequant_values(bins: np.ndarray, params: QuantParams) -> np.ndarray:
    # f32 streams round the f64 grid value to the nearest float32, which can
    # add up to half an ulp of representation noise on top of the eps bound
    return _reconstruct_f64(bins, params).astype(params.numpy_dtype)


def quantize(raw: RawArray, params: QuantParams) -> QuantArray:
    """Map each value to its quantization bin, guaranteeing that the
    double-precision reconstruction ``2 * eps * bin`` stays within ``eps``
    of the input.

    The floor division runs in float64 (exact promotion for f32 inputs);
    a repair pass then nudges any bin whose reconstructed value violates
    the bound by a floating-point rounding ulp.
    """
    if raw.dims != params.dims or raw.dtype != params.dtype:
        raise ValueError(
            f"raw geometry {raw.dims}/{raw.dtype} does not match params "
            f"{params.dims}/{params.dtype}"
        )
    eps = params.eps
    x = raw.values.astype(np.float64)
    with np.errstate(over="ignore"):  # extreme value/eps ratios hit inf below
        q = np.floor((x + eps) / (2.0 * eps))
    if np.any(np.abs(q) >= 2.0**63):
        raise QuantOverflow("quantization bin exceeds 63-bit range; eps too small")
    bins = q.astype(np.int64)
    err = x - _reconstruct_f64(bins, params)
    bad = np.flatnonzero(np.abs(err) > eps)
    if bad.size:
        # nudge ulp-level violators one bin toward the input; inputs sitting
        # exactly on a bin boundary may evaluate a hair beyond eps on both
        # sides, so keep whichever neighbor reconstructs nearer
        step = np.where(err[bad] > 0, 1, -1).astype(np.int64)
        moved = bins[bad] + step
        err2 = x[bad] - _reconstruct_f64(moved, params)
        keep = np.abs(err2) < np.abs(err[bad])
        bins[bad[keep]] = moved[keep]
        final = np.abs(x[bad] - _reconstruct_f64(bins[bad], params))
        if np.any(final > eps * (1.0 + 1e-9)):
            raise QuantOverflow(
                "error bound unattainable at this precision (eps below resolution)"
            )
    return QuantArray(bins, params)


def dequantize(q: QuantArray) -> RawArray:
    """Reverse quantization: ``2 * eps * bin`` in the stream's dtype."""
    return RawArray(_dequant_values(q.bins, q.params), q.params.dims, q.params.dtype)


def quantize_nearest(values: np.ndarray, params: QuantParams) -> np.ndarray:
    """Requantize real values to bins with round-to-nearest, ties away from
    zero.  This is the multiplicative-operation rescale rule; the standard
    pipeline uses the floor form above."""
    t = np.asarray(values, dtype=np.float64) / (2.0 * params.eps)
    mag = np.floor(np.abs(t) + 0.5)
    if np.any(mag >= 2.0**63):
        raise QuantOverflow("requantized bin exceeds 63-bit range")
    return np.where(t < 0, -mag, mag).astype(np.int64)


# ---------------------------------------------------------------------------
# residual split / rebuild (decorrelation stage)


def _split_residuals(bins: np.ndarray, params: QuantParams):
    """Per-element residual magnitudes and signs plus per-block outliers.

    Residual ``i`` is ``bins[i] - bins[i-1]`` inside a block; the slot at
    each block start stays 0 because the outlier carries the first bin.
    """
    starts = params.block_starts()
    n = params.element_count
    maxabs = int(np.abs(bins).max()) if n else 0
    if maxabs <= _FAST_BIN_LIMIT:
        resid = np.empty(n, dtype=np.int64)
        resid[0] = 0
        np.subtract(bins[1:], bins[:-1], out=resid[1:])
        resid[starts] = 0
        signs = (resid < 0).astype(np.uint8)
        mags = np.abs(resid).astype(np.uint64)
        return bins[starts].astype(np.int64), mags, signs
    # magnitudes near the 63-bit cap: differences need Python integers
    py = bins.tolist()
    mags_py = [0] * n
    signs_py = [0] * n
    for i in range(1, n):
        if i % params.block_len == 0:
            continue
        d = py[i] - py[i - 1]
        if d < 0:
            mags_py[i] = -d
            signs_py[i] = 1
        else:
            mags_py[i] = d
    return (
        bins[starts].astype(np.int64),
        np.asarray(mags_py, dtype=np.uint64),
        np.asarray(signs_py, dtype=np.uint8),
    )


def _block_widths(mags: np.ndarray, params: QuantParams) -> np.ndarray:
    """Bits needed for the largest residual magnitude of each block."""
    k = params.block_len
    n = params.element_count
    nfull = n // k
    maxes = np.zeros(params.block_count, dtype=np.uint64)
    if nfull:
        maxes[:nfull] = mags[: nfull * k].reshape(nfull, k).max(axis=1)
    if n % k:
        maxes[-1] = mags[nfull * k :].max()
    return np.searchsorted(_POW2, maxes, side="right").astype(np.uint8)


def _bins_from_resid(outliers: np.ndarray, mags: np.ndarray, signs: np.ndarray,
                     params: QuantParams) -> np.ndarray:
    """Prefix-sum residuals back into bins, exactly and overflow-checked."""
    n = params.element_count
    k = params.block_len
    maxmag = int(mags.max()) if n else 0
    maxout = int(np.abs(outliers.astype(np.int64)).max()) if len(outliers) else 0
    # every prefix sum equals a true bin, bounded by |O| + (k-1) * maxmag
    if maxout + k * maxmag <= _I64_MAX:
        bins = np.where(signs.astype(bool), -(mags.astype(np.int64)), mags.astype(np.int64))
        nfull = n // k
        if nfull:
            mat = bins[: nfull * k].reshape(nfull, k)
            mat[:, 0] = outliers[:nfull]
            np.cumsum(mat, axis=1, out=mat)
        if n % k:
            seg = bins[nfull * k :]
            seg[0] = outliers[-1]
            np.cumsum(seg, out=seg)
        return bins
    # oversized magnitudes (width near 64): exact Python prefix sums
    bins = np.empty(n, dtype=np.int64)
    mags_py = mags.tolist()
    signs_py = signs.tolist()
    for b in range(params.block_count):
        s = b * k
        e = min(s + k, n)
        acc = int(outliers[b])
        for i in range(s, e):
            if i > s:
                acc += -mags_py[i] if signs_py[i] else mags_py[i]
            if not -_I64_MAX <= acc <= _I64_MAX:
                raise QuantOverflow(f"prefix sum overflows 63 bits in block {b}")
            bins[i] = acc
    return bins


# ---------------------------------------------------------------------------
# bit packing


def _lane(w: int):
    # smallest big-endian integer lane that holds w bits
    if w <= 8:
        return 1, ">u1"
    if w <= 16:
        return 2, ">u2"
    if w <= 32:
        return 4, ">u4"
    return 8, ">u8"


def _pack_mag_rows(mat: np.ndarray, w: int) -> np.ndarray:
    """Pack a (blocks, k) magnitude matrix into per-block byte rows,
    ``w`` bits per element, MSB first, each row zero-padded to a byte."""
    g, k = mat.shape
    nb, dt = _lane(w)
    bits = np.unpackbits(mat.astype(dt).view(np.uint8).reshape(g * k, nb), axis=1)
    return np.packbits(bits[:, nb * 8 - w :].reshape(g, k * w), axis=1)


def _unpack_mag_rows(rows: np.ndarray, k: int, w: int) -> np.ndarray:
    g = rows.shape[0]
    nb, dt = _lane(w)
    bits = np.unpackbits(rows, axis=1)[:, : k * w].reshape(g * k, w)
    full = np.zeros((g * k, nb * 8), dtype=np.uint8)
    full[:, nb * 8 - w :] = bits
    return np.packbits(full, axis=1).view(dt).astype(np.uint64).reshape(g, k)


def _section_offsets(sizes: np.ndarray) -> np.ndarray:
    offs = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offs[1:])
    return offs


def _iter_chunks(ids: np.ndarray, k: int):
    step = max(1, _CHUNK_ELEMS // max(k, 1))
    for i in range(0, len(ids), step):
        yield ids[i : i + step]


def _pack_block_range(params, mags, signs, widths, sign_offs, payload_offs, b0, b1):
    """Serialize sign planes and payload for blocks [b0, b1) into two buffers."""
    k = params.block_len
    n = params.element_count
    nfull = n // k
    sign_base = int(sign_offs[b0])
    payload_base = int(payload_offs[b0])
    sign_buf = np.zeros(int(sign_offs[b1]) - sign_base, dtype=np.uint8)
    payload_buf = np.zeros(int(payload_offs[b1]) - payload_base, dtype=np.uint8)

    full_hi = min(b1, nfull)
    nc = b0 + np.flatnonzero(widths[b0:full_hi] > 0)
    if nc.size:
        signs_mat = signs[: nfull * k].reshape(nfull, k)
        srow = (k + 7) // 8
        for ids in _iter_chunks(nc, k):
            rows = np.packbits(signs_mat[ids], axis=1)
            idx = (sign_offs[ids] - sign_base)[:, None] + np.arange(srow)
            sign_buf[idx] = rows
        mags_mat = mags[: nfull * k].reshape(nfull, k)
        for w in np.unique(widths[nc]):
            w = int(w)
            sel = nc[widths[nc] == w]
            prow = (k * w + 7) // 8
            for ids in _iter_chunks(sel, k):
                rows = _pack_mag_rows(mags_mat[ids], w)
                idx = (payload_offs[ids] - payload_base)[:, None] + np.arange(prow)
                payload_buf[idx] = rows
    # partial tail block
    if n % k and b1 == params.block_count and int(widths[-1]) > 0:
        w = int(widths[-1])
        row = np.packbits(signs[nfull * k :][None, :], axis=1)[0]
        off = int(sign_offs[params.block_count - 1]) - sign_base
        sign_buf[off : off + len(row)] = row
        row = _pack_mag_rows(mags[nfull * k :][None, :], w)[0]
        off = int(payload_offs[params.block_count - 1]) - payload_base
        payload_buf[off : off + len(row)] = row
    return sign_buf.tobytes(), payload_buf.tobytes()


def _unpack_block_range(stream, mags, signs, sign_offs, payload_offs, b0, b1):
    """Decode blocks [b0, b1) into the shared mags/signs element arrays."""
    params = stream.params
    k = params.block_len
    n = params.element_count
    nfull = n // k
    widths = stream.widths
    sign_bytes = np.frombuffer(stream.sign_planes, dtype=np.uint8)
    payload_bytes = np.frombuffer(stream.payload, dtype=np.uint8)

    full_hi = min(b1, nfull)
    nc = b0 + np.flatnonzero(widths[b0:full_hi] > 0)
    if nc.size:
        signs_mat = signs[: nfull * k].reshape(nfull, k)
        srow = (k + 7) // 8
        for ids in _iter_chunks(nc, k):
            idx = sign_offs[ids][:, None] + np.arange(srow)
            signs_mat[ids] = np.unpackbits(sign_bytes[idx], axis=1)[:, :k]
        mags_mat = mags[: nfull * k].reshape(nfull, k)
        for w in np.unique(widths[nc]):
            w = int(w)
            sel = nc[widths[nc] == w]
            prow = (k * w + 7) // 8
            for ids in _iter_chunks(sel, k):
                idx = payload_offs[ids][:, None] + np.arange(prow)
                mags_mat[ids] = _unpack_mag_rows(payload_bytes[idx], k, w)
    if n % k and b1 == params.block_count and int(widths[-1]) > 0:
        r = n % k
        w = int(widths[-1])
        off = int(sign_offs[params.block_count - 1])
        srow = (r + 7) // 8
        signs[nfull * k :] = np.unpackbits(sign_bytes[off : off + srow][None, :], axis=1)[0, :r]
        off = int(payload_offs[params.block_count - 1])
        prow = (r * w + 7) // 8
        mags[nfull * k :] = _unpack_mag_rows(payload_bytes[off : off + prow][None, :], r, w)[0]


def _thread_ranges(block_count: int, threads: int):
    threads = max(1, min(threads, block_count))
    step = -(-block_count // threads)
    return [(i, min(i + step, block_count)) for i in range(0, block_count, step)]


def _pack_stream(params: QuantParams, outliers, mags, signs, widths,
                 threads: int = 1) -> CompressedStream:
    lengths = params.block_lengths()
    sign_sizes = (lengths + 7) // 8
    sign_sizes[widths == 0] = 0
    payload_sizes = (lengths * widths.astype(np.int64) + 7) // 8
    sign_offs = _section_offsets(sign_sizes)
    payload_offs = _section_offsets(payload_sizes)
    ranges = _thread_ranges(params.block_count, threads)
    if len(ranges) == 1:
        parts = [_pack_block_range(params, mags, signs, widths, sign_offs,
                                   payload_offs, 0, params.block_count)]
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            parts = list(
                pool.map(
                    lambda r: _pack_block_range(params, mags, signs, widths,
                                                sign_offs, payload_offs, *r),
                    ranges,
                )
            )
    sign_planes = b"".join(p[0] for p in parts)
    payload = b"".join(p[1] for p in parts)
    return CompressedStream(params, widths, outliers, sign_planes, payload)


def _unpack_stream(stream: CompressedStream, threads: int = 1):
    """Inverse of the packing stage: per-element residual magnitudes and
    sign bits (zeros for constant blocks)."""
    params = stream.params
    n = params.element_count
    mags = np.zeros(n, dtype=np.uint64)
    signs = np.zeros(n, dtype=np.uint8)
    sign_offs = _section_offsets(stream.sign_sizes())
    payload_offs = _section_offsets(stream.payload_sizes())
    ranges = _thread_ranges(params.block_count, threads)
    if len(ranges) == 1:
        _unpack_block_range(stream, mags, signs, sign_offs, payload_offs,
                            0, params.block_count)
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            list(
                pool.map(
                    lambda r: _unpack_block_range(stream, mags, signs, sign_offs,
                                                  payload_offs, *r),
                    ranges,
                )
            )
    return mags, signs


def _encode_bins(bins: np.ndarray, params: QuantParams, threads: int = 1) -> CompressedStream:
    outliers, mags, signs = _split_residuals(bins, params)
    widths = _block_widths(mags, params)
    return _pack_stream(params, outliers, mags, signs, widths, threads)


def _decode_bins(stream: CompressedStream, threads: int = 1) -> np.ndarray:
    mags, signs = _unpack_stream(stream, threads)
    return _bins_from_resid(stream.outliers.astype(np.int64), mags, signs, stream.params)


# ---------------------------------------------------------------------------
# public pipeline


def lorenzo_encode(q: QuantArray) -> list[BlockView]:
    """Decorrelate a quantized array into per-block views (outlier, residual
    magnitudes, signs, width, constancy)."""
    params = q.params
    outliers, mags, signs = _split_residuals(q.bins, params)
    widths = _block_widths(mags, params)
    n, k = params.element_count, params.block_len
    views = []
    for b in range(params.block_count):
        s, e = b * k, min(b * k + k, n)
        w = int(widths[b])
        views.append(BlockView(int(outliers[b]), mags[s:e], signs[s:e], w, w == 0))
    return views


def lorenzo_decode(blocks, params: QuantParams) -> QuantArray:
    """Exact inverse of :func:`lorenzo_encode` (per-block prefix sums)."""
    lengths = params.block_lengths()
    if len(blocks) != params.block_count:
        raise ValueError(f"expected {params.block_count} blocks, got {len(blocks)}")
    n = params.element_count
    mags = np.empty(n, dtype=np.uint64)
    signs = np.empty(n, dtype=np.uint8)
    outliers = np.empty(params.block_count, dtype=np.int64)
    pos = 0
    for b, view in enumerate(blocks):
        if view.residual_mags.size != lengths[b]:
            raise ValueError(f"block {b} has {view.residual_mags.size} residuals, "
                             f"expected {int(lengths[b])}")
        mags[pos : pos + lengths[b]] = view.residual_mags
        signs[pos : pos + lengths[b]] = view.signs
        outliers[b] = view.outlier
        pos += int(lengths[b])
    return QuantArray(_bins_from_resid(outliers, mags, signs, params), params)


def compress(raw: RawArray, params: QuantParams, threads: int = 1) -> CompressedStream:
    """quantize -> decorrelate -> bit-pack.  Deterministic: one canonical
    output per (input, params), independent of the thread count."""
    return _encode_bins(quantize(raw, params).bins, params, threads)


def decompress(stream: CompressedStream, threads: int = 1,
               out_dtype=None) -> RawArray:
    """bit-unpack -> prefix-sum -> dequantize.

    ``out_dtype=np.float64`` returns the exact reconstruction grid
    ``2 * eps * bin`` in double precision regardless of the stream dtype
    (used by the traditional-workflow reference path).
    """
    bins = _decode_bins(stream, threads)
    params = stream.params
    if out_dtype is np.float64 and params.dtype == "f32":
        values = (2.0 * params.eps) * bins.astype(np.float64)
        return RawArray(values, params.dims, "f64")
    return RawArray(_dequant_values(bins, params), params.dims, params.dtype)


def decode_to_quant(stream: CompressedStream, threads: int = 1) -> QuantArray:
    """Partial decompression: stop at the quantized-bin domain (no inverse
    quantization).  The operand domain for multiplication and reductions."""
    return QuantArray(_decode_bins(stream, threads), stream.params)


def encode_from_quant(q: QuantArray, threads: int = 1) -> CompressedStream:
    """Inverse of :func:`decode_to_quant`: decorrelate and re-pack."""
    return _encode_bins(q.bins, q.params, threads)
