#!/usr/bin/env python3
"""Sweep the distributed sum-aggregation simulator over node counts and
error bounds, printing one CSV row per cell (the speedup table analogue).

    python scripts/run_distsim.py --dims 512x512 --nodes 4 8 16 --eps 1e-5 1e-4 1e-3
"""

import argparse
import os
import sys

from hoszp.cli import _emit, _parse_dims, _row
from hoszp.distsim import SimScenario, simulate
from hoszp.model import OpReport
from hoszp.synth import smooth_field


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=_parse_dims, required=True)
    ap.add_argument("--nodes", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-5, 1e-4, 1e-3])
    ap.add_argument("--dtype", choices=["f32", "f64"], default="f32")
    ap.add_argument("--block-len", type=int, default=32)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--latency-per-byte", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    rows = []
    for eps in args.eps:
        for nodes in args.nodes:
            arrays = [smooth_field(args.dims, args.seed + i, args.dtype)
                      for i in range(nodes)]
            rep = simulate(SimScenario(arrays, eps, args.block_len, args.reps,
                                       args.latency_per_byte, args.threads))
            report = OpReport("distsim_sum", rep.t_homomorphic, rep.bytes_in,
                              rep.bytes_compressed, rep.compression_ratio)
            rows.append(_row(report, rep.t_traditional, rep.max_abs_diff,
                             node_count=nodes, eps=eps))
    _emit(rows, "csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
