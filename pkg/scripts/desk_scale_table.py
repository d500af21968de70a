"""Reduction and error table for desk-scale fixtures.

Reduces synthetic RC ladders and an RLCk line, then evaluates DC, S-parameter
and transient errors of every ROM against its original model.

    python3 scripts/desk_scale_table.py --out results/desk_table.csv
    python3 scripts/desk_scale_table.py --quick      # skip the N ~ 2000 line
"""
import argparse
import logging
import os
import time

import numpy as np

from rlcmor.analysis import ErrorReport, FrequencySweep, compare, dc_solve, sp_sweep, step_input, transient, write_report
from rlcmor.bt import ReductionConfig, balance_svd, gramian_factors, reduce
from rlcmor.fixtures import ladder_model, line_model


def epsilon_for_order(model, r):
    """Smallest budget whose order rule lands on ``r`` (midway between tails r and r-1)."""
    zp, zq = gramian_factors(model, ReductionConfig(mode="dense", rom_order=1))
    s = balance_svd(zp, zq)[1].sigma
    return 2 * s[r:].sum() * (1 + 1e-9)


def evaluate(name, model, cfg, sweep, dt, horizon):
    t0 = time.perf_counter()
    rom = reduce(model, cfg)
    t_red = time.perf_counter() - t0
    n = int(round(horizon / dt))
    u = step_input(model.p, n)
    row = ErrorReport(
        model=name,
        original_order=model.N,
        rom_order=rom.order,
        reduction_pct=(1 - rom.order / model.N) * 100,
        reduction_time_s=t_red,
        peak_mem_gb=rom.provenance["peak_mem_estimate"],
    )
    row.dc_mre, row.dc_max_re = compare(dc_solve(model), dc_solve(rom.model))
    row.sp_mre, row.sp_max_re = compare(sp_sweep(model, sweep), sp_sweep(rom.model, sweep))
    row.tr_mre, row.tr_max_re = compare(transient(model, u, dt, horizon), transient(rom.model, u, dt, horizon))
    return row


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilon", type=float, default=1e-3, help="error budget for the desk-scale models")
    ap.add_argument("--small-order", type=int, default=17, help="target ROM order of the 48-state ladder")
    ap.add_argument("--quick", action="store_true", help="skip the N ~ 2000 line")
    ap.add_argument("--out", default=None, help="CSV path for the table")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    sweep = FrequencySweep.make()
    rows = []
    small = ladder_model(nodes=48)
    eps48 = epsilon_for_order(small, args.small_order)
    rows.append(evaluate("rc_ladder_48", small, ReductionConfig(epsilon=eps48), sweep, 1e-12, 2e-10))
    rows.append(evaluate("rc_ladder_500", ladder_model(nodes=500), ReductionConfig(epsilon=args.epsilon), sweep, 1e-12, 2e-10))
    if not args.quick:
        rows.append(
            evaluate("rlck_line_1999", line_model(), ReductionConfig(mode="lowrank", epsilon=args.epsilon), sweep, 1e-12, 2e-10)
        )

    print(f"epsilon for rc_ladder_48: {eps48:.4g}")
    head = f"{'model':<16}{'N':>6}{'r':>5}{'red %':>8}{'DC MRE':>10}{'DC MAX':>10}{'SP MRE':>10}{'SP MAX':>10}{'TR MRE':>10}{'time s':>8}{'mem GB':>8}"
    print(head)
    for r in rows:
        print(
            f"{r.model:<16}{r.original_order:>6}{r.rom_order:>5}{r.reduction_pct:>8.2f}"
            f"{r.dc_mre:>10.2e}{r.dc_max_re:>10.2e}{r.sp_mre:>10.2e}{r.sp_max_re:>10.2e}"
            f"{r.tr_mre:>10.2e}{r.reduction_time_s:>8.2f}{r.peak_mem_gb:>8.3f}"
        )
    if args.out:
        cols = [
            "model", "original_order", "rom_order", "reduction_pct", "dc_mre", "dc_max_re",
            "sp_mre", "sp_max_re", "tr_mre", "tr_max_re", "reduction_time_s", "peak_mem_gb",
        ]
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        write_report(rows, args.out, cols)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
