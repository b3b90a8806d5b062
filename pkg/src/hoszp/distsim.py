"""In-process simulator of distributed sum aggregation over compressed data.

Worker "nodes" each compress one chunk and hand the stream to a root.  The
root aggregates two ways over identical inputs:

* traditional - fully decompress every stream, sum in the value domain,
  recompress the aggregate once;
* homomorphic - combine the streams in the residual/outlier domain
  (the element-wise-addition core applied as a left fold, decoding each
  incoming stream once and re-packing once at the end).

Both aggregates must decompress bit-identically; the report records the
timing of each path and their ratio.  The "network" is an in-memory
hand-off; an optional per-byte latency models transfer cost and applies
equally to both paths (the payload sent is the same).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import codec, ops
from .codec import RawArray
from .errors import ParamsMismatch, VerificationMismatch
from .model import CompressedStream, QuantParams


@dataclass
class SimScenario:
    node_arrays: list[RawArray]
    eps: float
    block_len: int = 32
    repetitions: int = 1
    latency_per_byte: float = 0.0
    threads: int = 1

    def __post_init__(self):
        if len(self.node_arrays) < 2:
            raise ValueError("need at least 2 nodes")
        first = self.node_arrays[0]
        for raw in self.node_arrays[1:]:
            if raw.dims != first.dims or raw.dtype != first.dtype:
                raise ParamsMismatch("all node chunks must share dims and dtype")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @property
    def node_count(self) -> int:
        return len(self.node_arrays)

    @property
    def params(self) -> QuantParams:
        first = self.node_arrays[0]
        return QuantParams(self.eps, first.dims, self.block_len, first.dtype)


@dataclass
class SimReport:
    node_count: int
    eps: float
    bytes_in: int
    bytes_compressed: int
    t_traditional: float
    t_homomorphic: float
    max_abs_diff: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def speedup(self) -> float:
        return self.t_traditional / self.t_homomorphic if self.t_homomorphic > 0 else 0.0

    @property
    def compression_ratio(self) -> float:
        return self.bytes_in / self.bytes_compressed


def _aggregate_homomorphic(streams, threads: int) -> CompressedStream:
    """Left fold of element-wise addition in the residual domain: each
    stream is decoded once, the accumulator is packed once."""
    for s in streams[1:]:
        ops._check_params(streams[0], s)
    if not _headroom(streams):
        # oversized residuals: fall back to the stream-level pairwise fold
        acc = streams[0]
        for s in streams[1:]:
            acc = ops.elementwise_add(acc, s, threads)
        return acc
    out_acc, res_acc, _ = ops._unpack_signed(streams[0], threads)
    for s in streams[1:]:
        o, r, _ = ops._unpack_signed(s, threads)
        out_acc += o
        res_acc += r
    return ops._pack_signed(streams[0].params, out_acc, res_acc, threads)


def _headroom(streams) -> bool:
    # residual accumulation stays in int64 when total magnitude is bounded;
    # this also guarantees every stream width is <= 62 (no slow decodes)
    total = sum((1 << int(s.widths.max())) - 1 if s.widths.size else 0 for s in streams)
    return total <= 2**63 - 1


def _aggregate_traditional(streams, threads: int) -> CompressedStream:
    """Fully decompress every stream, sum values, recompress once."""
    params = streams[0].params
    total = codec.decompress(streams[0], threads, out_dtype=np.float64).values.copy()
    for s in streams[1:]:
        total += codec.decompress(s, threads, out_dtype=np.float64).values
    p64 = QuantParams(params.eps, params.dims, params.block_len, "f64")
    return codec.compress(RawArray(total, params.dims, "f64"), p64, threads)


def simulate(scn: SimScenario) -> SimReport:
    params = scn.params
    streams = [codec.compress(raw, params, scn.threads) for raw in scn.node_arrays]
    bytes_compressed = sum(s.serialized_size for s in streams)
    transfer = scn.latency_per_byte * bytes_compressed

    t_homo = t_trad = float("inf")
    for _ in range(scn.repetitions):
        t0 = time.perf_counter()
        homo = _aggregate_homomorphic(streams, scn.threads)
        t_homo = min(t_homo, time.perf_counter() - t0)
        t0 = time.perf_counter()
        trad = _aggregate_traditional(streams, scn.threads)
        t_trad = min(t_trad, time.perf_counter() - t0)

    v_homo = codec.decompress(homo, scn.threads, out_dtype=np.float64).values
    v_trad = codec.decompress(trad, scn.threads, out_dtype=np.float64).values
    if not np.array_equal(v_homo, v_trad):
        raise VerificationMismatch(
            "homomorphic and traditional aggregates decompress differently "
            f"(max abs diff {np.max(np.abs(v_homo - v_trad))})"
        )
    return SimReport(
        node_count=scn.node_count,
        eps=params.eps,
        bytes_in=sum(raw.nbytes for raw in scn.node_arrays),
        bytes_compressed=bytes_compressed,
        t_traditional=t_trad + transfer,
        t_homomorphic=t_homo + transfer,
    )
