"""Touchstone v1 S-parameter files and per-entry plot CSVs."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .analysis import SParameterSet


def _entry_order(p: int) -> list[tuple[int, int]]:
    # v1 quirk: two-port data is written column-major (S11 S21 S12 S22), everything else row-major
    if p == 2:
        return [(0, 0), (1, 0), (0, 1), (1, 1)]
    return [(i, j) for i in range(p) for j in range(p)]


def write_touchstone(sps: SParameterSet, path, comment: str | None = None) -> Path:
    """Write ``sps`` as ``<path>`` (extension ``.s{p}p`` is enforced), RI format."""
    p = sps.ports
    path = Path(path)
    if path.suffix.lower() != f".s{p}p":
        path = path.with_suffix(f".s{p}p")
    order = _entry_order(p)
    with open(path, "w") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"! {line}\n")
        fh.write(f"# HZ S RI R {sps.z0:g}\n")
        for f, S in zip(sps.freqs, sps.data):
            vals = [f"{S[i, j].real: .12e} {S[i, j].imag: .12e}" for i, j in order]
            # at most four complex entries per line; continuation lines start with whitespace
            per_line = 4 if p <= 2 else min(4, p)
            rows = []
            if p <= 2:
                rows.append(vals)
            else:
                for i in range(p):
                    rv = vals[i * p:(i + 1) * p]
                    rows += [rv[k:k + per_line] for k in range(0, p, per_line)]
            fh.write(f"{f:.12e} " + "  ".join(rows[0]) + "\n")
            for r in rows[1:]:
                fh.write(" " * 19 + "  ".join(r) + "\n")
    return path


def read_touchstone(path) -> SParameterSet:
    """Read a v1 file in RI format with an ``.s{p}p`` extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        p = int(suffix[2:-1])
    except ValueError:
        raise ValueError(f"cannot infer port count from extension {suffix!r}") from None
    z0 = 50.0
    unit = 1.0
    numbers: list[float] = []
    with open(path) as fh:
        for line in fh:
            line = line.split("!", 1)[0].strip()
            if not line:
                continue
            if line.startswith("#"):
                opts = line[1:].upper().split()
                if "S" not in opts or "RI" not in opts:
                    raise ValueError(f"only S-parameters in RI format are supported: {line!r}")
                unit = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}[opts[0]]
                if "R" in opts:
                    z0 = float(opts[opts.index("R") + 1])
                continue
            numbers += [float(t) for t in line.split()]
    width = 1 + 2 * p * p
    if len(numbers) % width:
        raise ValueError(f"{path}: {len(numbers)} numbers is not a multiple of {width}")
    arr = np.array(numbers).reshape(-1, width)
    data = np.empty((arr.shape[0], p, p), dtype=complex)
    for k, (i, j) in enumerate(_entry_order(p)):
        data[:, i, j] = arr[:, 1 + 2 * k] + 1j * arr[:, 2 + 2 * k]
    return SParameterSet(arr[:, 0] * unit, data, z0)


def write_plot_csvs(sps: SParameterSet, outdir, stem: str) -> list[Path]:
    """One CSV per S entry with columns ``freq_hz, mag_db, phase_deg``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(sps.ports):
        for j in range(sps.ports):
            v = sps.data[:, i, j]
            mag = 20.0 * np.log10(np.maximum(np.abs(v), 1e-300))
            phase = np.degrees(np.angle(v))
            path = outdir / f"{stem}_S{i + 1}{j + 1}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["freq_hz", "mag_db", "phase_deg"])
                for f, m, ph in zip(sps.freqs, mag, phase):
                    w.writerow([f"{f:.6g}", f"{m:.6g}", f"{ph:.6g}"])
            paths.append(path)
    return paths
