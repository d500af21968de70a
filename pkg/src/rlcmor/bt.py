"""Square-root balanced truncation with dense or low-rank Gramian factors."""
from __future__ import annotations

import logging
import math
import resource
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .lyapunov import (
    DENSE_CUTOFF,
    EksOptions,
    LowRankFactor,
    LyapunovProblem,
    _Factor,
    solve_dense,
    solve_eks,
)
from .mna import StateSpaceModel, write_matrices

log = logging.getLogger(__name__)

#: balancing refuses orders whose last kept Hankel value is below this fraction of the first
MIN_SIGMA_RATIO = 1e-14
#: tolerance on T @ Tinv = I
BIORTH_TOL = 1e-8
#: relative gap under which two Hankel values count as tied at the truncation boundary
TIE_RTOL = 1e-10


class ReductionError(RuntimeError):
    pass


@dataclass
class ReductionConfig:
    """How to reduce: Gramian back-end and either a target order or an error budget.

    ``epsilon`` bounds the H-infinity error through ``2 * sum(truncated sigma)``.
    """

    mode: str = "auto"
    rom_order: int | None = None
    epsilon: float | None = None
    dense_cutoff: int = DENSE_CUTOFF
    eks: EksOptions = field(default_factory=EksOptions)
    concurrent: bool = True

    def __post_init__(self):
        if self.mode not in ("dense", "lowrank", "auto"):
            raise ValueError(f"mode must be dense, lowrank or auto, got {self.mode!r}")
        if (self.rom_order is None) == (self.epsilon is None):
            raise ValueError("set exactly one of rom_order and epsilon")
        if self.rom_order is not None and self.rom_order < 1:
            raise ValueError("rom_order must be >= 1")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")

    def resolved_mode(self, N: int) -> str:
        if self.mode != "auto":
            return self.mode
        return "dense" if N <= self.dense_cutoff else "lowrank"


@dataclass(frozen=True)
class HankelSpectrum:
    sigma: np.ndarray

    @property
    def count(self) -> int:
        return self.sigma.size

    def tail(self, r: int) -> float:
        """Sum of the values discarded when keeping ``r``."""
        return float(self.sigma[r:].sum())


@dataclass(frozen=True)
class BalancingTransform:
    T: np.ndarray  # r x N
    Tinv: np.ndarray  # N x r


@dataclass(frozen=True)
class Rom:
    Gt: np.ndarray
    Ct: np.ndarray
    Bt: np.ndarray
    Lt: np.ndarray
    spectrum: HankelSpectrum
    transform: BalancingTransform
    provenance: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.Gt.shape[0]

    @property
    def model(self) -> StateSpaceModel:
        return StateSpaceModel(C=self.Ct, G=self.Gt, B=self.Bt, L=self.Lt, meta={"rom": True})

    @property
    def error_bound(self) -> float:
        return 2.0 * self.spectrum.tail(self.order)


def _dense_factor(P: np.ndarray) -> LowRankFactor:
    """``Z = U S^{1/2}`` from the eigendecomposition of a PSD Gramian."""
    w, U = la.eigh(P)
    w, U = w[::-1], U[:, ::-1]
    keep = w > 0.0  # negative round-off eigenvalues are clamped away
    return LowRankFactor(U[:, keep] * np.sqrt(w[keep]), converged=True)


def gramian_factors(model: StateSpaceModel, cfg: ReductionConfig) -> tuple[LowRankFactor, LowRankFactor]:
    """Factors ``Z_P``, ``Z_Q`` with ``P = Z_P Z_P^T`` and ``Q = Z_Q Z_Q^T``."""
    mode = cfg.resolved_mode(model.N)
    factors = {"C": _Factor(model.C, "C")}
    if mode == "dense":
        if model.N > cfg.dense_cutoff:
            raise ReductionError(f"order {model.N} exceeds dense cutoff {cfg.dense_cutoff}")
        G = model.G.toarray() if sp.issparse(model.G) else np.asarray(model.G)
        A = factors["C"].solve(G)
        jobs = [
            lambda: _dense_factor(solve_dense(LyapunovProblem.from_dense(A, factors["C"].solve(model.B), "P"), cfg.dense_cutoff)),
            lambda: _dense_factor(solve_dense(LyapunovProblem.from_dense(A.T, model.L.T, "Q"), cfg.dense_cutoff)),
        ]
    else:
        factors["G"] = _Factor(model.G, "G")
        probs = [LyapunovProblem.from_model(model, kind, factors) for kind in ("controllability", "observability")]
        jobs = [lambda pr=pr: solve_eks(pr, cfg.eks) for pr in probs]
    if cfg.concurrent:
        with ThreadPoolExecutor(max_workers=2) as pool:
            zp, zq = (f.result() for f in [pool.submit(j) for j in jobs])
    else:
        zp, zq = (j() for j in jobs)
    return zp, zq


def balance_svd(Zp: LowRankFactor, Zq: LowRankFactor) -> tuple[np.ndarray, HankelSpectrum, np.ndarray]:
    """Thin SVD ``Z_Q^T Z_P = U diag(sigma) V^T``.

    Returns ``U`` (r_q x k), the spectrum and ``V`` (r_p x k); the spectrum is
    empty when the product vanishes (nothing both reachable and observable).
    """
    Mp = Zp.Z if isinstance(Zp, LowRankFactor) else Zp
    Mq = Zq.Z if isinstance(Zq, LowRankFactor) else Zq
    if Mp.shape[0] != Mq.shape[0]:
        raise ValueError(f"factor row counts differ: {Mp.shape[0]} vs {Mq.shape[0]}")
    M = Mq.T @ Mp
    if M.size == 0 or not np.any(M):
        return np.zeros((Mq.shape[1], 0)), HankelSpectrum(np.zeros(0)), np.zeros((Mp.shape[1], 0))
    U, s, Vt = la.svd(M, full_matrices=False)
    return U, HankelSpectrum(s), Vt.T


def select_order(spectrum: HankelSpectrum, rom_order: int | None = None, epsilon: float | None = None) -> int:
    """Reduced order from an explicit target or from the error budget.

    With ``epsilon`` the result is the smallest ``r >= 1`` whose discarded
    tail satisfies ``2 * sum(sigma[r:]) <= epsilon``. Either way ``r`` grows
    past values tied with the last kept one.
    """
    if spectrum.count == 0:
        raise ReductionError("empty Hankel spectrum")
    if (rom_order is None) == (epsilon is None):
        raise ValueError("give exactly one of rom_order and epsilon")
    s = spectrum.sigma
    if rom_order is not None:
        r = min(rom_order, s.size)
    else:
        # tails[r] = sum(s[r:])
        tails = np.concatenate([np.cumsum(s[::-1])[::-1], [0.0]])
        ok = np.flatnonzero(2.0 * tails <= epsilon)
        r = max(int(ok[0]), 1)
    while r < s.size and s[r - 1] > 0 and s[r - 1] - s[r] <= TIE_RTOL * s[r - 1]:
        r += 1
    return r


def build_rom(
    model: StateSpaceModel,
    Zp: LowRankFactor,
    Zq: LowRankFactor,
    U: np.ndarray,
    spectrum: HankelSpectrum,
    V: np.ndarray,
    r: int,
    c_factor=None,
) -> Rom:
    """Project onto the ``r`` dominant balanced states.

    ``T = S^{-1/2} U^T Z_Q^T`` and ``Tinv = Z_P V S^{-1/2}`` balance the
    standard-form system ``(C^{-1} G, C^{-1} B, L)`` whose Gramians were
    computed, so the reduced model is returned with ``Ct = I``:
    ``Gt = T C^{-1} G Tinv``, ``Bt = T C^{-1} B``, ``Lt = L Tinv``.
    """
    if not 1 <= r <= spectrum.count:
        raise ReductionError(f"order r={r} outside 1..{spectrum.count}")
    s = spectrum.sigma
    if s[r - 1] < MIN_SIGMA_RATIO * s[0]:
        raise ReductionError(
            f"sigma_{r} = {s[r - 1]:.3e} is below {MIN_SIGMA_RATIO:g} * sigma_1; balancing is "
            f"ill-conditioned, use an order of at most {int(np.sum(s >= MIN_SIGMA_RATIO * s[0]))}"
        )
    Mp = Zp.Z if isinstance(Zp, LowRankFactor) else Zp
    Mq = Zq.Z if isinstance(Zq, LowRankFactor) else Zq
    isq = 1.0 / np.sqrt(s[:r])
    T = (U[:, :r] * isq).T @ Mq.T
    Tinv = Mp @ (V[:, :r] * isq)
    bi_err = np.abs(T @ Tinv - np.eye(r)).max()
    if bi_err > BIORTH_TOL:
        raise ReductionError(
            f"balancing transform not bi-orthogonal at r={r} (|T Tinv - I| = {bi_err:.2e}); "
            "use a smaller order"
        )
    cf = c_factor or _Factor(model.C, "C")
    Gt = T @ cf.solve(model.G @ Tinv)
    Bt = T @ cf.solve(model.B)
    Lt = model.L @ Tinv
    return Rom(
        Gt=Gt,
        Ct=np.eye(r),
        Bt=Bt,
        Lt=Lt,
        spectrum=spectrum,
        transform=BalancingTransform(T, Tinv),
        provenance={"biorth_error": float(bi_err)},
    )


def peak_memory_gb() -> float:
    """Peak resident set size of this process (informational)."""
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024**2


def reduce(model: StateSpaceModel, cfg: ReductionConfig) -> Rom:
    """Balanced truncation of ``model`` according to ``cfg``."""
    t0 = time.perf_counter()
    mode = cfg.resolved_mode(model.N)
    Zp, Zq = gramian_factors(model, cfg)
    t_gram = time.perf_counter() - t0
    U, spectrum, V = balance_svd(Zp, Zq)
    if spectrum.count == 0:
        raise ReductionError("model has no state that is both reachable and observable")
    r = select_order(spectrum, cfg.rom_order, cfg.epsilon)
    rom = build_rom(model, Zp, Zq, U, spectrum, V, r)
    wall = time.perf_counter() - t0
    prov = dict(rom.provenance)
    prov.update(
        original_order=model.N,
        rom_order=r,
        ports=model.p,
        mode=mode,
        rule=f"rom_order={cfg.rom_order}" if cfg.rom_order is not None else f"epsilon={cfg.epsilon:g}",
        error_bound=2.0 * spectrum.tail(r),
        reduction_pct=(1.0 - r / model.N) * 100.0,
        rank_p=Zp.rank,
        rank_q=Zq.rank,
        eks_iterations=f"{Zp.iterations},{Zq.iterations}" if mode == "lowrank" else "n/a",
        eks_converged=Zp.converged and Zq.converged,
        peak_basis_size=max(Zp.basis_size, Zq.basis_size) if mode == "lowrank" else "n/a",
        residuals=",".join(
            f"{h[-1]:.3e}" for h in (Zp.residual_history, Zq.residual_history)
        ) if mode == "lowrank" else "n/a",
        gramian_time_s=t_gram,
        wall_time_s=wall,
        peak_mem_estimate=peak_memory_gb(),
    )
    log.info(
        "reduced N=%d -> r=%d (%s, %.1f%%) in %.2f s, bound %.3e",
        model.N, r, mode, prov["reduction_pct"], wall, prov["error_bound"],
    )
    return Rom(rom.Gt, rom.Ct, rom.Bt, rom.Lt, rom.spectrum, rom.transform, prov)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def write_rom(rom: Rom, outdir, prefix: str = "rom_") -> dict:
    """Write the reduced matrices (Matrix Market) and ``provenance.txt``."""
    paths = write_matrices(rom.model, outdir, prefix=prefix)
    prov_path = Path(outdir) / "provenance.txt"
    with open(prov_path, "w") as fh:
        for key, val in rom.provenance.items():
            fh.write(f"{key}={_fmt(val)}\n")
    paths["provenance"] = prov_path
    return paths
