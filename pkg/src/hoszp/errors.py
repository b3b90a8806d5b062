"""Exception hierarchy shared by the codec, the operations, and the CLI."""


class HoszpError(Exception):
    """Base class for all errors raised by this package."""


class QuantOverflow(HoszpError):
    """A quantization bin (or an intermediate bin computation) exceeds the
    signed 64-bit working range, usually because the error bound is too
    small for the value range of the data."""


class OutlierOverflow(HoszpError):
    """A block outlier does not fit the signed 32-bit slot of the stream
    format."""


class ParamsMismatch(HoszpError):
    """Two operands of a bivariate operation do not share identical
    compression parameters (error bound, dims, block length, dtype)."""


class FormatError(HoszpError):
    """Base class for errors while parsing serialized stream bytes."""


class BadMagic(FormatError):
    """The byte sequence does not start with the stream magic."""


class VersionMismatch(FormatError):
    """The stream was written by an unsupported format version."""


class TruncatedStream(FormatError):
    """The byte sequence ends before all declared sections are complete."""


class GeometryMismatch(FormatError):
    """Header fields and section sizes are mutually inconsistent."""


class VerificationMismatch(HoszpError):
    """A homomorphic result disagrees with the traditional-workflow result."""
