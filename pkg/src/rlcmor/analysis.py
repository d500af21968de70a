"""DC, S-parameter and transient analysis of original and reduced models."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, fields

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .mna import StateSpaceModel

log = logging.getLogger(__name__)

#: denominator floor of the relative error
REL_FLOOR = 1e-12
DEFAULT_Z0 = 50.0


class AnalysisError(RuntimeError):
    pass


@dataclass(frozen=True)
class FrequencySweep:
    points: np.ndarray
    scale: str = "log"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if self.scale not in ("log", "linear"):
            raise ValueError(f"scale must be log or linear, got {self.scale!r}")
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("sweep needs at least one frequency")
        if np.any(pts <= 0):
            raise ValueError("sweep frequencies must be > 0 (DC is handled by dc_solve)")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("sweep frequencies must be strictly increasing")

    @classmethod
    def make(cls, start: float = 1e8, stop: float = 1e11, n: int = 201, scale: str = "log") -> "FrequencySweep":
        if n < 1:
            raise ValueError("sweep needs at least one point")
        if scale == "log":
            if not 0 < start:
                raise ValueError("log sweep needs start > 0")
            pts = np.logspace(np.log10(start), np.log10(stop), n)
        else:
            pts = np.linspace(start, stop, n)
        return cls(pts, scale)

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class SParameterSet:
    freqs: np.ndarray
    data: np.ndarray  # (nfreq, p, p) complex
    z0: float = DEFAULT_Z0

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != len(self.freqs) or self.data.shape[1] != self.data.shape[2]:
            raise ValueError(f"S data shape {self.data.shape} does not match {len(self.freqs)} frequencies")

    @property
    def ports(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class TransientResult:
    times: np.ndarray
    outputs: np.ndarray  # (ntimes, q)
    dt: float
    scheme: str = "backward-euler"


@dataclass
class ErrorReport:
    """One row of the error report; ``None`` marks analyses that were not run."""

    model: str = ""
    original_order: int | None = None
    rom_order: int | None = None
    reduction_pct: float | None = None
    dc_mre: float | None = None
    dc_max_re: float | None = None
    sp_mre: float | None = None
    sp_max_re: float | None = None
    tr_mre: float | None = None
    tr_max_re: float | None = None
    reduction_time_s: float | None = None
    peak_mem_gb: float | None = None


# ---------------------------------------------------------------- solves


class _ShiftedSolver:
    """Factorization of ``a C - G`` (plus an optional low-rank term) for one shift."""

    def __init__(self, model: StateSpaceModel, a: complex, extra=None, what: str = "s"):
        M = a * model.C - model.G
        if extra is not None:
            M = M + extra
        self.label = f"{what}={a:.6g}"
        try:
            if sp.issparse(M):
                self._lu = spla.splu(sp.csc_matrix(M))
                self._dense = False
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", la.LinAlgWarning)
                    self._lu = la.lu_factor(np.asarray(M), check_finite=True)
                self._dense = True
        except (RuntimeError, la.LinAlgError, la.LinAlgWarning, ValueError) as exc:
            raise AnalysisError(f"shifted matrix is singular at {self.label}: {exc}") from None

    def solve(self, rhs):
        rhs = np.asarray(rhs)
        if self._dense:
            out = la.lu_solve(self._lu, rhs)
        else:
            dtype = np.result_type(rhs.dtype, self._lu.U.dtype)
            out = self._lu.solve(np.asarray(rhs, dtype=dtype))
        if not np.all(np.isfinite(out)):
            raise AnalysisError(f"shifted matrix is singular at {self.label}")
        return out


def transfer_function(model: StateSpaceModel, s: complex) -> np.ndarray:
    """``H(s) = L (sC - G)^{-1} B`` from one factorization and ``p`` solves."""
    return model.L @ _ShiftedSolver(model, s).solve(model.B)


def _floating_groups(model: StateSpaceModel) -> list[list[str]]:
    """State groups of ``G`` whose diagonal block is singular (no DC path to ground)."""
    G = sp.csr_matrix(model.G)
    pattern = (abs(G) + abs(G).T).tocsr()
    ncomp, labels = csgraph.connected_components(pattern, directed=False)
    names = model.meta.get("state_names") or [f"x{i}" for i in range(model.N)]
    bad = []
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        block = G[idx][:, idx].toarray()
        if idx.size > 2000:
            continue  # too large to test densely; reported only through the main error
        sv = la.svdvals(block)
        if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
            bad.append([names[i] for i in idx])
    return bad


def dc_solve(model: StateSpaceModel) -> np.ndarray:
    """Port DC matrix ``H(0) = -L G^{-1} B``.

    A singular ``G`` means part of the network has no DC path to ground; the
    error lists the states of each such part.
    """
    try:
        return transfer_function(model, 0.0).real
    except AnalysisError:
        groups = _floating_groups(model)
        detail = "; ".join("{" + ", ".join(g[:10]) + (", ..." if len(g) > 10 else "") + "}" for g in groups)
        raise AnalysisError(
            "G is singular at DC: floating subcircuit(s) with no path to ground"
            + (f": {detail}" if detail else "")
        ) from None


def z_to_s(Z: np.ndarray, z0: float = DEFAULT_Z0) -> np.ndarray:
    """``S = (Z - z0 I)(Z + z0 I)^{-1}`` for one impedance matrix."""
    I = np.eye(Z.shape[0])
    try:
        return la.solve((Z + z0 * I).T, (Z - z0 * I).T).T
    except la.LinAlgError:
        raise AnalysisError("Z + z0 I is singular") from None


def sp_sweep(model: StateSpaceModel, sweep: FrequencySweep, z0: float = DEFAULT_Z0) -> SParameterSet:
    """S-parameters of the port impedance matrix ``H`` over ``sweep``.

    Evaluated on the network with every port terminated in ``z0``:
    ``S = (2/z0) L (sC - G + B L / z0)^{-1} B - I``, which equals
    ``(Z - z0)(Z + z0)^{-1}`` and stays defined when ``Z`` itself does not
    exist (ports joined by a floating series element).
    """
    if model.p != model.q:
        raise AnalysisError(f"S-parameters need as many outputs as inputs (p={model.p}, q={model.q})")
    if not z0 > 0:
        raise ValueError("z0 must be > 0")
    if sp.issparse(model.C):
        load = sp.csc_matrix(model.B) @ sp.csc_matrix(model.L) / z0
    else:
        load = model.B @ model.L / z0
    I = np.eye(model.p)
    data = np.empty((len(sweep), model.p, model.p), dtype=complex)
    for k, f in enumerate(sweep.points):
        s = 2j * np.pi * f
        try:
            X = _ShiftedSolver(model, s, extra=load).solve(model.B)
        except AnalysisError as exc:
            raise AnalysisError(f"terminated network singular at f={f:.6g} Hz") from exc
        data[k] = (2.0 / z0) * (model.L @ X) - I
    return SParameterSet(sweep.points.copy(), data, z0)


def passivity_violations(sps: SParameterSet, tol: float = 1e-6) -> list[tuple[float, float]]:
    """Frequencies where the largest singular value of ``S`` exceeds ``1 + tol``."""
    sv = np.array([la.svdvals(S)[0] for S in sps.data])
    bad = np.flatnonzero(sv > 1.0 + tol)
    return [(float(sps.freqs[i]), float(sv[i])) for i in bad]


# ---------------------------------------------------------------- transient


def step_input(p: int, n_steps: int, amplitude: float = 1.0) -> np.ndarray:
    """Unit step on every port, sampled at ``n_steps + 1`` grid points."""
    u = np.full((n_steps + 1, p), amplitude)
    u[0] = 0.0
    return u


def transient(model: StateSpaceModel, u: np.ndarray, dt: float, horizon: float) -> TransientResult:
    """Backward Euler: ``(C/dt - G) x_{k+1} = (C/dt) x_k + B u_{k+1}``, ``x_0 = 0``.

    ``u`` holds one row per grid point ``t_k = k dt`` and must cover ``horizon``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    n = int(round(horizon / dt))
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != model.p:
        raise ValueError(f"input must have shape (steps, {model.p}), got {u.shape}")
    if u.shape[0] < n + 1:
        raise ValueError(f"input covers {u.shape[0]} samples, need {n + 1} for horizon {horizon:g} s")
    solver = _ShiftedSolver(model, 1.0 / dt, what="1/dt")
    Cdt = model.C / dt
    x = np.zeros(model.N)
    y = np.zeros((n + 1, model.q))
    for k in range(n):
        x = solver.solve(Cdt @ x + model.B @ u[k + 1])
        y[k + 1] = model.L @ x
    return TransientResult(dt * np.arange(n + 1), y, dt)


# ---------------------------------------------------------------- errors


def relative_errors(ref: np.ndarray, test: np.ndarray, floor: float = REL_FLOOR) -> np.ndarray:
    ref = np.asarray(ref)
    test = np.asarray(test)
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {test.shape}")
    return np.abs(test - ref) / np.maximum(np.abs(ref), floor)


def compare(ref, test, floor: float = REL_FLOOR) -> tuple[float, float]:
    """(MRE, MAX_RE) in percent, over every port entry and sample."""
    if isinstance(ref, SParameterSet):
        if not isinstance(test, SParameterSet):
            raise TypeError("cannot compare S-parameters with " + type(test).__name__)
        if ref.freqs.shape != test.freqs.shape or not np.array_equal(ref.freqs, test.freqs):
            raise ValueError("frequency grids differ")
        a, b = ref.data, test.data
    elif isinstance(ref, TransientResult):
        if not isinstance(test, TransientResult):
            raise TypeError("cannot compare transient result with " + type(test).__name__)
        if ref.times.shape != test.times.shape or not np.allclose(ref.times, test.times, rtol=1e-12, atol=0):
            raise ValueError("time grids differ")
        a, b = ref.outputs, test.outputs
    else:
        a, b = np.asarray(ref), np.asarray(test)
    e = relative_errors(a, b, floor)
    if e.size == 0:
        return 0.0, 0.0
    return float(e.mean() * 100.0), float(e.max() * 100.0)


# ---------------------------------------------------------------- report


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


REPORT_COLUMNS = [
    "model", "original_order", "rom_order", "reduction_pct",
    "dc_mre", "dc_max_re", "sp_mre", "sp_max_re", "tr_mre", "tr_max_re",
]
PERFORMANCE_COLUMNS = ["model", "reduction_time_s", "peak_mem_gb"]


def write_report(rows: list[ErrorReport], path, columns=REPORT_COLUMNS) -> None:
    """CSV with fixed 6-significant-digit formatting; empty cells for analyses not run."""
    valid = {f.name for f in fields(ErrorReport)}
    unknown = set(columns) - valid
    if unknown:
        raise ValueError(f"unknown report columns {sorted(unknown)}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(getattr(row, c)) for c in columns])
