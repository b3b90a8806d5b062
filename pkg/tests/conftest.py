import numpy as np
import pytest

from hoszp import QuantArray, QuantParams, RawArray, compress, encode_from_quant

#: the worked single-block example: eps=0.01 reproduces the documented bins,
#: outlier, residuals, sign bits, and packed payload byte
EXAMPLE_EPS = 0.01
EXAMPLE_VALUES = [-0.025, -0.025, -0.051, -0.052]
EXAMPLE_BINS = [-1, -1, -3, -3]


@pytest.fixture
def example_params():
    return QuantParams(eps=EXAMPLE_EPS, dims=(2, 2), block_len=32, dtype="f32")


@pytest.fixture
def example_raw(example_params):
    return RawArray(np.array(EXAMPLE_VALUES, dtype=np.float32), (2, 2), "f32")


@pytest.fixture
def example_stream(example_raw, example_params):
    return compress(example_raw, example_params)


def random_params(rng, dtypes=("f32", "f64"), eps_choices=(1e-1, 1e-2, 1e-3, 0.25),
                  max_dim=40, max_ndim=3):
    nd = int(rng.integers(1, max_ndim + 1))
    dims = tuple(int(d) for d in rng.integers(1, max_dim, nd))
    return QuantParams(
        eps=float(rng.choice(eps_choices)),
        dims=dims,
        block_len=int(rng.choice([1, 4, 8, 32, 33])),
        dtype=str(rng.choice(dtypes)),
    )


def random_bins(rng, params, hi=2**20):
    """Valid random bins: block-start bins stay in int32 (they become
    outliers), interior bins may be anything up to ``hi``."""
    n = params.element_count
    bins = rng.integers(-hi, hi, n)
    starts = slice(None, None, params.block_len)
    lo32 = max(-(2**31), -hi)
    hi32 = min(2**31 - 1, hi)
    bins[starts] = rng.integers(lo32, hi32, bins[starts].size)
    return bins


def random_stream(rng, params=None, hi=2**20, **kwargs):
    rng = np.random.default_rng(rng) if isinstance(rng, int) else rng
    params = params or random_params(rng, **kwargs)
    return encode_from_quant(QuantArray(random_bins(rng, params, hi), params))
