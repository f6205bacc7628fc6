"""Per-instance table of solver intervals against the grid oracle.

Draws random mixed networks with influence queries (the same generator as
the soundness/tightness acceptance run) and prints one line per instance:
free parameters, program size, grid and solver intervals, solver status and
the Hausdorff distance.

    python scripts/credal_sweep.py --seed 2026 --count 100 --time-limit 29
"""

import argparse
import time

import numpy as np

from sqpn.compile import pose_influence_query
from sqpn.generate import count_free_parameters, random_query, random_sqpn
from sqpn.model import EvidenceImpossible, NetworkError
from sqpn.oracle import grid_bounds
from sqpn.solver import SolverOptions, solve


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=2026)
    parser.add_argument("--count", type=int, default=100)
    parser.add_argument("--gap", type=float, default=1e-4)
    parser.add_argument("--time-limit", type=float, default=29.0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    options = SolverOptions(gap=args.gap, time_limit=args.time_limit)
    n = failed = 0
    while n < args.count:
        net = random_sqpn(rng)
        query = random_query(rng, net)
        try:
            grid = grid_bounds(net, query)
            prog = pose_influence_query(net, query)
        except (NetworkError, EvidenceImpossible):
            continue
        start = time.perf_counter()
        lo = solve(prog.with_sense("min"), options)
        hi = solve(prog.with_sense("max"), options)
        elapsed = time.perf_counter() - start
        dist = max(abs(lo.bound - grid.lo), abs(hi.bound - grid.hi))
        ok = (lo.bound <= grid.lo + 1e-7 and hi.bound >= grid.hi - 1e-7
              and dist <= max(5e-3, 2 * grid.step) and elapsed <= 60.0)
        failed += not ok
        print(f"{n:3d} free={count_free_parameters(net)} vars={len(prog.variables):3d} "
              f"grid=[{grid.lo:+.4f},{grid.hi:+.4f}] step={grid.step:.3f} "
              f"solver=[{lo.bound:+.4f},{hi.bound:+.4f}] {lo.status}/{hi.status} "
              f"t={elapsed:.1f}s H={dist:.4f} {'ok' if ok else 'FAIL'}", flush=True)
        n += 1
    print(f"{args.count - failed}/{args.count} within tolerance")


if __name__ == "__main__":
    main()
