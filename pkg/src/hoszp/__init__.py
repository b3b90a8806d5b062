"""Homomorphic error-bounded lossy compression for scientific arrays."""

from .codec import (
    RawArray,
    compress,
    decode_to_quant,
    decompress,
    dequantize,
    encode_from_quant,
    lorenzo_decode,
    lorenzo_encode,
    quantize,
    quantize_nearest,
    read_raw,
    resolve_eps,
    write_raw,
)
from .distsim import SimReport, SimScenario, simulate
from .errors import (
    BadMagic,
    FormatError,
    GeometryMismatch,
    HoszpError,
    OutlierOverflow,
    ParamsMismatch,
    QuantOverflow,
    TruncatedStream,
    VerificationMismatch,
    VersionMismatch,
)
from .model import (
    BlockView,
    CompressedStream,
    OpReport,
    QuantArray,
    QuantParams,
    deserialize,
    serialize,
)
from .ops import (
    ScalarBin,
    block_means,
    covariance,
    elementwise_add,
    elementwise_sub,
    hadamard,
    mean,
    negate,
    oracle_apply,
    oracle_reduction,
    oracle_stream,
    scalar_add,
    scalar_mul,
    scalar_sub,
    ssim_global,
    stddev,
    variance,
)
from .synth import random_field, smooth_field

__version__ = "0.1.0"
