"""Write a fixture netlist and a matching run config for the CLI.

    python3 scripts/make_example.py --outdir results/example
    rlcmor reduce results/example/run.cfg --verbose
"""
import argparse
import os

from rlcmor.fixtures import rc_ladder, rlck_line
from rlcmor.netlist import format_netlist

CONFIG = """\
# balanced-truncation run on {name}
netlist={name}.sp
epsilon={epsilon}
mode=auto
sweep_start_hz=1e8
sweep_stop_hz=1e11
sweep_points=201
analyses=dc,sp,transient
transient_dt=1e-12
transient_horizon=2e-10
outdir=out
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixture", choices=("ladder", "line"), default="ladder")
    ap.add_argument("--size", type=int, default=None, help="ladder nodes or line segments")
    ap.add_argument("--epsilon", type=float, default=1e-3)
    ap.add_argument("--outdir", default="results/example")
    args = ap.parse_args()

    if args.fixture == "ladder":
        net = rc_ladder(nodes=args.size or 500)
    else:
        net = rlck_line(segments=args.size or 666)
    name = args.fixture
    os.makedirs(args.outdir, exist_ok=True)
    with open(os.path.join(args.outdir, f"{name}.sp"), "w") as fh:
        fh.write(format_netlist(net))
    cfg = os.path.join(args.outdir, "run.cfg")
    with open(cfg, "w") as fh:
        fh.write(CONFIG.format(name=name, epsilon=args.epsilon))
    print(f"wrote {cfg}")


if __name__ == "__main__":
    main()
