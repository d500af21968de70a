"""End-to-end run: ingest, reduce, analyse both models, compare, write artifacts."""
from __future__ import annotations

import csv
import logging
import os
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis as an
from .bt import Rom, reduce, write_rom
from .config import RunConfig, dump_config
from .mna import StateSpaceModel, assemble_mna, load_matrices, to_state_space
from .netlist import read_netlist
from .touchstone import write_plot_csvs, write_touchstone

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass
class RunArtifacts:
    outdir: Path
    rom_files: dict = field(default_factory=dict)
    touchstone: list = field(default_factory=list)
    plots: list = field(default_factory=list)
    report: Path | None = None
    performance: Path | None = None
    provenance: Path | None = None
    log: Path | None = None
    extra: list = field(default_factory=list)
    row: an.ErrorReport | None = None


def check_outdir(outdir) -> Path:
    """Create ``outdir`` if needed and prove it is writable."""
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out, prefix=".probe"):
            pass
    except OSError as exc:
        raise PipelineError("setup", f"output directory {out} is not writable: {exc}") from None
    return out


@contextmanager
def _stage(name: str, times: dict):
    t0 = time.perf_counter()
    log.info("stage %s: start", name)
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        log.error("stage %s failed: %s", name, exc)
        raise PipelineError(name, f"{type(exc).__name__}: {exc}") from exc
    finally:
        times[name] = time.perf_counter() - t0
        log.info("stage %s: %.3f s", name, times[name])


def ingest(cfg: RunConfig) -> tuple[str, StateSpaceModel]:
    if cfg.netlist is not None:
        return Path(cfg.netlist).stem, to_state_space(assemble_mna(read_netlist(cfg.netlist)))
    return Path(cfg.matrices["G"]).stem, load_matrices(cfg.matrices)


def _write_hankel(rom: Rom, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "sigma", "kept"])
        for i, s in enumerate(rom.spectrum.sigma, start=1):
            w.writerow([i, f"{s:.6g}", int(i <= rom.order)])


def _write_transient(ref: an.TransientResult, test: an.TransientResult, path: Path) -> None:
    q = ref.outputs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s"] + [f"y{i + 1}_original" for i in range(q)] + [f"y{i + 1}_rom" for i in range(q)])
        for t, a, b in zip(ref.times, ref.outputs, test.outputs):
            w.writerow([f"{t:.6g}"] + [f"{v:.6g}" for v in a] + [f"{v:.6g}" for v in b])


def run(cfg: RunConfig) -> RunArtifacts:
    """Run the whole flow; raises :class:`PipelineError` naming the failed stage."""
    out = check_outdir(cfg.outdir)
    art = RunArtifacts(outdir=out, log=out / "run.log")
    handler = logging.FileHandler(art.log, mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    pkg_log = logging.getLogger("rlcmor")
    pkg_log.addHandler(handler)
    old_level = pkg_log.level
    if pkg_log.getEffectiveLevel() > logging.INFO:
        pkg_log.setLevel(logging.INFO)
    try:
        _run(cfg, art)
    finally:
        pkg_log.removeHandler(handler)
        pkg_log.setLevel(old_level)
        handler.close()
    return art


def _run(cfg: RunConfig, art: RunArtifacts) -> None:
    out = art.outdir
    times: dict[str, float] = {}
    (out / "effective.cfg").write_text(dump_config(cfg))

    with _stage("ingest", times):
        name, model = ingest(cfg)
        log.info("model %s: N=%d, p=%d, q=%d", name, model.N, model.p, model.q)

    with _stage("reduce", times):
        rom = reduce(model, cfg.reduction())
        # reduction artifacts are committed before any verification runs
        art.rom_files = write_rom(rom, out)
        art.provenance = art.rom_files.pop("provenance")
        _write_hankel(rom, out / "hankel.csv")
        art.extra.append(out / "hankel.csv")
        p = rom.provenance
        log.info(
            "reduction: N=%d r=%d (%.2f%%) mode=%s bound=%.3e time=%.3f s mem=%.3f GB",
            p["original_order"], p["rom_order"], p["reduction_pct"], p["mode"],
            p["error_bound"], p["wall_time_s"], p["peak_mem_estimate"],
        )

    row = an.ErrorReport(
        model=name,
        original_order=model.N,
        rom_order=rom.order,
        reduction_pct=rom.provenance["reduction_pct"],
        reduction_time_s=rom.provenance["wall_time_s"],
        peak_mem_gb=rom.provenance["peak_mem_estimate"],
    )
    romm = rom.model

    if "dc" in cfg.analyses:
        with _stage("dc", times):
            row.dc_mre, row.dc_max_re = an.compare(an.dc_solve(model), an.dc_solve(romm))
            log.info("dc: MRE %.4g%% MAX_RE %.4g%%", row.dc_mre, row.dc_max_re)

    if "sp" in cfg.analyses:
        with _stage("sp", times):
            sweep = cfg.sweep()
            s_rom = an.sp_sweep(romm, sweep, cfg.z0)
            art.touchstone.append(write_touchstone(s_rom, out / "rom", comment=f"{name} reduced, r={rom.order}"))
            art.plots += write_plot_csvs(s_rom, out / "plots", "rom")
            bad = an.passivity_violations(s_rom)
            if bad:
                f, sv = max(bad, key=lambda t: t[1])
                log.warning("ROM not passive at %d frequencies (max |S| = %.6g at %.6g Hz)", len(bad), sv, f)
            if model.N <= cfg.sweep_cap:
                s_orig = an.sp_sweep(model, sweep, cfg.z0)
                art.touchstone.insert(0, write_touchstone(s_orig, out / "original", comment=f"{name}, N={model.N}"))
                art.plots += write_plot_csvs(s_orig, out / "plots", "original")
                row.sp_mre, row.sp_max_re = an.compare(s_orig, s_rom)
                log.info("sp: MRE %.4g%% MAX_RE %.4g%%", row.sp_mre, row.sp_max_re)
            else:
                log.warning("original model order %d above sweep cap %d; S-parameters of the ROM only",
                            model.N, cfg.sweep_cap)

    if "transient" in cfg.analyses:
        with _stage("transient", times):
            n = int(round(cfg.transient_horizon / cfg.transient_dt))
            u = an.step_input(model.p, n)
            ref = an.transient(model, u, cfg.transient_dt, cfg.transient_horizon)
            test = an.transient(romm, u, cfg.transient_dt, cfg.transient_horizon)
            row.tr_mre, row.tr_max_re = an.compare(ref, test)
            _write_transient(ref, test, out / "transient.csv")
            art.extra.append(out / "transient.csv")
            log.info("transient: MRE %.4g%% MAX_RE %.4g%%", row.tr_mre, row.tr_max_re)

    with _stage("report", times):
        art.report = out / "report.csv"
        an.write_report([row], art.report)
        art.performance = out / "performance.csv"
        an.write_report([row], art.performance, an.PERFORMANCE_COLUMNS)
    art.row = row
    log.info("stage times: %s", ", ".join(f"{k}={v:.3f}s" for k, v in times.items()))
