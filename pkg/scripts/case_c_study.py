"""Case C study: analytic versus AAA-fitted coefficient expansions.

Builds sp presamples at equidistant shifts for the chain with frequency-
dependent layers and compares the avg-compressed two-sided ROM error per
order when the Taylor coefficients come from the analytic functions or from
their AAA fits.

    python3 scripts/case_c_study.py --n 200 --shifts 34 --orders 10 20 30 40
"""

import argparse
import math
import time

import numpy as np

from somor import aaa, interp, select
from somor.metrics import FrequencyGrid, linf_rel_error, sweep
from somor.reduce import make_pair, project
from somor.system import SyntheticModelSpec, generate_synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--shifts", type=int, default=34)
    ap.add_argument("--orders", type=int, nargs="+", default=[10, 20, 30, 40])
    ap.add_argument("--aaa-points", type=int, default=400)
    args = ap.parse_args()

    band = (1.0, 250.0)
    sys = generate_synthetic(SyntheticModelSpec("chainC", args.n, seed=args.seed))
    grid = FrequencyGrid.linspace_hz(*band, 300)
    fom = sweep(sys, grid)
    fits = aaa.fit_coefficients(sys, 2j * math.pi * np.linspace(*band, args.aaa_points))
    for key, apx in fits.items():
        print(f"AAA fit {key}: q={apx.q}, residual {apx.residual:.1e}, converged={apx.converged}")
    shifts = select.equi_shifts(*band, args.shifts).shifts

    for label, rz in (("analytic", None), ("aaa", fits)):
        t0 = time.perf_counter()
        ell = interp.sp_order(sys, shifts, realizations=rz)
        right = interp.presample(sys, "sp", shifts, "input", order=ell, realizations=rz)
        left = interp.presample(sys, "sp", shifts, "output", order=ell, realizations=rz)
        errs = []
        for r in args.orders:
            sel = select.compress("avg", right, left, r)
            rom = project(sys, make_pair("tsimag", sel.V, sel.W, r))
            errs.append(linf_rel_error(fom, sweep(rom, grid)))
        secs = time.perf_counter() - t0
        cells = "  ".join(f"r={r}: {e:.2e}" for r, e in zip(args.orders, errs))
        print(f"{label:8s} (sp order {ell}, {secs:.1f} s)  {cells}")


if __name__ == "__main__":
    main()
