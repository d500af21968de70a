"""Command line: ``rlcmor reduce <config> [--dry-run] [--verbose]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, dump_config, load_config
from .pipeline import PipelineError, check_outdir, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rlcmor", description="Balanced-truncation reduction of RLCk models.")
    sub = ap.add_subparsers(dest="command", required=True)
    red = sub.add_parser("reduce", help="reduce the model named in a config file and verify the ROM")
    red.add_argument("config", help="key=value configuration file")
    red.add_argument("--dry-run", action="store_true", help="validate the config and exit")
    red.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO if args.verbose else logging.WARNING
    stderr = logging.StreamHandler()
    stderr.setLevel(level)  # run.log captures INFO regardless
    stderr.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.basicConfig(level=level, handlers=[stderr])
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"rlcmor: config error: {exc}", file=sys.stderr)
        return 2
    if args.dry_run:
        try:
            check_outdir(cfg.outdir)
        except PipelineError as exc:
            print(f"rlcmor: {exc}", file=sys.stderr)
            return 1
        sys.stdout.write(dump_config(cfg))
        return 0
    try:
        art = run(cfg)
    except PipelineError as exc:
        print(f"rlcmor: {exc}", file=sys.stderr)
        return 1
    r = art.row
    print(f"{r.model}: N={r.original_order} -> r={r.rom_order} ({r.reduction_pct:.2f}% reduction)")
    print(f"report: {art.report}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
