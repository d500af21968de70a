"""Residual history of the extended Krylov Gramian solver.

Runs both Gramian problems of a fixture with the energy and the Euclidean
inner product and writes one residual-per-iteration CSV per run.

    python3 scripts/eks_convergence.py --fixture line --outdir results/eks
"""
import argparse
import csv
import os
import time
import warnings

from rlcmor.fixtures import ladder_model, line_model
from rlcmor.lyapunov import EksOptions, LyapunovError, LyapunovProblem, solve_eks

FIXTURES = {"ladder": ladder_model, "line": line_model}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixture", choices=sorted(FIXTURES), default="line")
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--maxiter", type=int, default=100)
    ap.add_argument("--outdir", default="results/eks")
    args = ap.parse_args()

    model = FIXTURES[args.fixture]()
    opts = EksOptions(maxiter=args.maxiter, tol=args.tol)
    os.makedirs(args.outdir, exist_ok=True)
    print(f"{args.fixture}: N={model.N} p={model.p}")
    factors = {}
    for energy in (True, False):
        for kind in ("controllability", "observability"):
            tag = f"{kind[:3]}_{'energy' if energy else 'euclid'}"
            prob = LyapunovProblem.from_model(model, kind, factors=factors, energy=energy)
            t0 = time.perf_counter()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    fac = solve_eks(prob, opts)
            except LyapunovError as exc:
                print(f"  {tag:<16} failed: {exc}")
                continue
            dt = time.perf_counter() - t0
            path = os.path.join(args.outdir, f"{args.fixture}_{tag}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["iteration", "basis_size", "residual"])
                step = fac.basis_size // max(len(fac.residual_history), 1)
                for i, r in enumerate(fac.residual_history, start=1):
                    w.writerow([i, i * step, f"{r:.6g}"])
            print(
                f"  {tag:<16} iters={fac.iterations:>3} rank={fac.rank:>4} basis={fac.basis_size:>4} "
                f"final={fac.residual_history[-1]:.2e} converged={fac.converged} {dt:.2f}s -> {path}"
            )


if __name__ == "__main__":
    main()
