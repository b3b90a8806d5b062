#!/usr/bin/env python3
"""Time every homomorphic operation against the traditional workflow
(decompress -> operate -> recompress) on a synthetic or real field, for a
grid of error bounds.  Emits the standard CSV report schema.

    python scripts/bench_ops.py --dims 512x512x64 --eps 1e-2 1e-4
    python scripts/bench_ops.py --input CLOUDf48.bin.f32 --dims 500x500x100
"""

import argparse
import os
import sys

from hoszp.cli import CSV_COLUMNS, _emit, _parse_dims, bench_rows
from hoszp.codec import read_raw, resolve_eps
from hoszp.model import QuantParams
from hoszp.synth import smooth_field


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=_parse_dims, required=True)
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-2, 1e-4])
    ap.add_argument("--eps-mode", choices=["abs", "rel"], default="abs")
    ap.add_argument("--dtype", choices=["f32", "f64"], default="f32")
    ap.add_argument("--block-len", type=int, default=32)
    ap.add_argument("--input", help="flat little-endian binary field")
    ap.add_argument("--scalar", type=float, default=3.14)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    if args.input:
        raw = read_raw(args.input, args.dims, args.dtype)
    else:
        raw = smooth_field(args.dims, args.seed, args.dtype)

    rows = []
    for eps in args.eps:
        params = QuantParams(resolve_eps(raw, eps, args.eps_mode), args.dims,
                             args.block_len, args.dtype)
        for row in bench_rows(raw, params, scalar=args.scalar, threads=args.threads):
            row["eps"] = eps
            rows.append(row)
    _emit(rows, "csv")
    from hoszp.ops import STREAM_OPS

    bad = [r["op"] for r in rows
           if r["op"] in STREAM_OPS and float(r["max_abs_diff"] or 0) != 0.0]
    if bad:
        print(f"warning: nonzero homomorphic/traditional differences: {bad}",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
