"""Flat ``key=value`` run configuration.

Blank lines and ``#`` comments are ignored. Relative paths are resolved
against the directory holding the config file. Recognised keys::

    netlist=               (or all four of matrix_g= matrix_c= matrix_b= matrix_l=)
    epsilon= | rom_order=  (exactly one)
    outdir=
    mode=auto|dense|lowrank        dense_cutoff=5000
    eks_tol=1e-8                   eks_maxiter=100
    sweep_start_hz=1e8  sweep_stop_hz=1e11  sweep_points=201  sweep_scale=log|linear
    z0=50
    analyses=dc,sp[,transient]
    transient_dt=  transient_horizon=
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .analysis import FrequencySweep
from .bt import ReductionConfig
from .lyapunov import DENSE_CUTOFF, EksOptions

MATRIX_KEYS = ("matrix_g", "matrix_c", "matrix_b", "matrix_l")
KEYS = (
    "netlist", *MATRIX_KEYS, "mode", "epsilon", "rom_order", "dense_cutoff", "eks_tol", "eks_maxiter",
    "sweep_start_hz", "sweep_stop_hz", "sweep_points", "sweep_scale", "z0", "analyses",
    "transient_dt", "transient_horizon", "outdir",
)
ANALYSES = ("dc", "sp", "transient")
#: original models above this order are not swept (ROM-only S-parameters)
SWEEP_CAP = 20000


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    outdir: str
    netlist: str | None = None
    matrices: dict | None = None  # {"G": path, "C": ..., "B": ..., "L": ...}
    mode: str = "auto"
    epsilon: float | None = None
    rom_order: int | None = None
    dense_cutoff: int = DENSE_CUTOFF
    eks_tol: float = 1e-8
    eks_maxiter: int = 100
    sweep_start_hz: float = 1e8
    sweep_stop_hz: float = 1e11
    sweep_points: int = 201
    sweep_scale: str = "log"
    z0: float = 50.0
    analyses: tuple[str, ...] = ("dc", "sp")
    transient_dt: float | None = None
    transient_horizon: float | None = None
    # not a file key; set from code
    sweep_cap: int = field(default=SWEEP_CAP, compare=False)

    def __post_init__(self):
        if (self.netlist is None) == (self.matrices is None):
            raise ConfigError("give either netlist= or the four matrix_* keys, not both or neither")
        if self.matrices is not None and set(self.matrices) != {"G", "C", "B", "L"}:
            raise ConfigError("matrix input needs all of matrix_g, matrix_c, matrix_b, matrix_l")
        if not self.analyses:
            raise ConfigError("select at least one analysis")
        bad = [a for a in self.analyses if a not in ANALYSES]
        if bad:
            raise ConfigError(f"unknown analyses {bad}; choose from {', '.join(ANALYSES)}")
        if len(set(self.analyses)) != len(self.analyses):
            raise ConfigError("analyses listed twice")
        if "transient" in self.analyses and (self.transient_dt is None or self.transient_horizon is None):
            raise ConfigError("transient analysis needs transient_dt and transient_horizon")
        for name in ("transient_dt", "transient_horizon"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be > 0")
        if not self.z0 > 0:
            raise ConfigError("z0 must be > 0")
        try:
            self.reduction()
            self.sweep()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def reduction(self) -> ReductionConfig:
        return ReductionConfig(
            mode=self.mode,
            rom_order=self.rom_order,
            epsilon=self.epsilon,
            dense_cutoff=self.dense_cutoff,
            eks=EksOptions(maxiter=self.eks_maxiter, tol=self.eks_tol),
        )

    def sweep(self) -> FrequencySweep:
        return FrequencySweep.make(self.sweep_start_hz, self.sweep_stop_hz, self.sweep_points, self.sweep_scale)


_CASTS = {
    "epsilon": float, "rom_order": int, "dense_cutoff": int, "eks_tol": float, "eks_maxiter": int,
    "sweep_start_hz": float, "sweep_stop_hz": float, "sweep_points": int, "z0": float,
    "transient_dt": float, "transient_horizon": float,
}


def parse_config(text: str, base_dir=".") -> RunConfig:
    """Parse config text; relative paths are taken relative to ``base_dir``."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: {key} already set on line {raw[key][1]}")
        if not val:
            raise ConfigError(f"line {lineno}: empty value for {key}")
        raw[key] = (val, lineno)

    if "epsilon" in raw and "rom_order" in raw:
        raise ConfigError("rom_order and epsilon are mutually exclusive")
    if "epsilon" not in raw and "rom_order" not in raw:
        raise ConfigError("missing required key: epsilon or rom_order")
    if "outdir" not in raw:
        raise ConfigError("missing required key: outdir")
    given = [k for k in MATRIX_KEYS if k in raw]
    if "netlist" in raw and given:
        raise ConfigError("netlist and matrix_* inputs are mutually exclusive")
    if "netlist" not in raw and len(given) != 4:
        missing = [k for k in MATRIX_KEYS if k not in raw]
        raise ConfigError(f"missing required key(s): {'netlist' if not given else ', '.join(missing)}")

    base = Path(base_dir)

    def path(v: str) -> str:
        return os.path.normpath(str(base / Path(v).expanduser()))

    kw: dict = {}
    for key, (val, lineno) in raw.items():
        try:
            if key in _CASTS:
                kw[key] = _CASTS[key](val)
            elif key == "analyses":
                kw[key] = tuple(a.strip().lower() for a in val.split(",") if a.strip())
            elif key in ("netlist", "outdir"):
                kw[key] = path(val)
            elif key in MATRIX_KEYS:
                kw.setdefault("matrices", {})[key[-1].upper()] = path(val)
            else:
                kw[key] = val.lower()
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {val!r} for {key}") from None
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), base_dir=path.resolve().parent)


def dump_config(cfg: RunConfig) -> str:
    """Effective configuration (every key, absolute paths) in the file format."""
    lines = []
    for f in fields(RunConfig):
        name = f.name
        val = getattr(cfg, name)
        if name == "sweep_cap" or val is None:
            continue
        if name == "matrices":
            for k in MATRIX_KEYS:
                lines.append(f"{k}={os.path.abspath(val[k[-1].upper()])}")
        elif name in ("netlist", "outdir"):
            lines.append(f"{name}={os.path.abspath(val)}")
        elif name == "analyses":
            lines.append(f"analyses={','.join(val)}")
        elif isinstance(val, float):
            lines.append(f"{name}={val!r}")
        else:
            lines.append(f"{name}={val}")
    return "\n".join(lines) + "\n"
