"""Dense and low-rank solvers for ``A P + P A^T = -F F^T``.

The dense path is a Bartels-Stewart solve on the real Schur form. The
low-rank path is the extended Krylov subspace method: the basis is grown
with ``A`` and ``A^{-1}`` applied to the right-hand-side block, the equation
is projected onto it and solved densely, and the small solution is lifted
back as a factor ``Z`` with ``P ~ Z Z^T``.

For circuit models ``A = C^{-1} G`` is never formed on the low-rank path;
products and solves go through sparse LU factors of ``C`` and ``G``.
"""
from __future__ import annotations

import csv
import logging
import threading
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg.lapack import dtrsyl

log = logging.getLogger(__name__)

DENSE_CUTOFF = 5000


class LyapunovError(RuntimeError):
    pass


class NotHurwitzError(LyapunovError):
    """The system matrix has an eigenvalue with nonnegative real part."""


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class EksOptions:
    maxiter: int = 100
    tol: float = 1e-8
    deflation_tol: float = 1e-10

    def __post_init__(self):
        if self.maxiter < 1 or not self.tol > 0 or not self.deflation_tol > 0:
            raise ValueError(f"invalid EKS options {self}")


class _Factor:
    """LU of a square matrix, sparse or dense, with transposed solves.

    Solves are serialized: the Gramian jobs share factors across threads and
    scipy's dense ``getrs`` wrapper shifts the pivot array in place while it
    runs, so unguarded concurrent solves corrupt each other.
    """

    def __init__(self, mat, what: str):
        self.what = what
        self._lock = threading.Lock()
        self.sparse = sp.issparse(mat)
        try:
            if self.sparse:
                self._lu = spla.splu(sp.csc_matrix(mat))
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", la.LinAlgWarning)
                    self._lu = la.lu_factor(np.asarray(mat))
        except (RuntimeError, la.LinAlgWarning, la.LinAlgError) as exc:
            raise LyapunovError(f"cannot factor {what}: {exc}") from None

    def solve(self, X, trans: bool = False):
        with self._lock:
            if self.sparse:
                return self._lu.solve(np.asarray(X, dtype=float), trans="T" if trans else "N")
            return la.lu_solve(self._lu, X, trans=1 if trans else 0)


class LyapunovProblem:
    """``A P + P A^T = -F F^T`` with ``A`` available through products and solves.

    Build with :meth:`from_dense` for an explicit ``A`` or with
    :meth:`from_model` for the two Gramians of a descriptor model.

    ``inner`` is the SPD matrix of the inner product used to orthogonalize
    Krylov bases (``None`` is Euclidean). ``lift`` maps a factor of this
    problem's solution to a factor of the Gramian the caller asked for.
    """

    def __init__(
        self,
        F: np.ndarray,
        apply: Callable[[np.ndarray], np.ndarray],
        solve: Callable[[np.ndarray], np.ndarray],
        dense: Callable[[], np.ndarray],
        label: str = "",
        inner=None,
        lift: Callable[[np.ndarray], np.ndarray] | None = None,
    ):
        F = np.asarray(F, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        self.F = F
        self.N = F.shape[0]
        self._apply = apply
        self._solve = solve
        self._dense = dense
        self.label = label
        self.inner = inner
        self.lift = lift

    def apply(self, X: np.ndarray) -> np.ndarray:
        return self._apply(X)

    def solve(self, X: np.ndarray) -> np.ndarray:
        return self._solve(X)

    def dense_matrix(self) -> np.ndarray:
        return self._dense()

    def weigh(self, X: np.ndarray) -> np.ndarray:
        """Inner-product matrix times ``X``."""
        return X if self.inner is None else self.inner @ X

    @classmethod
    def from_dense(cls, A, F, label: str = "") -> "LyapunovProblem":
        A = np.asarray(A, dtype=float)
        lu = []

        def solve(X):
            if not lu:
                lu.append(_Factor(A, "A"))
            return lu[0].solve(X)

        return cls(F, lambda X: A @ X, solve, lambda: A, label)

    @classmethod
    def from_model(
        cls,
        model,
        kind: str = "controllability",
        factors: dict | None = None,
        energy: bool | None = None,
    ) -> "LyapunovProblem":
        """Gramian problems of ``C x' = G x + B u, y = L x``.

        ``kind='controllability'`` is ``A = C^{-1} G``, ``F = C^{-1} B``.
        ``kind='observability'`` targets ``Q`` with ``A^T Q + Q A = -L^T L``.

        With ``energy`` (default: whenever ``C`` is symmetric) bases are
        orthogonalized in the ``C`` inner product. For passive models
        ``G + G^T <= 0``, which keeps every projected matrix stable. The
        observability side is then posed on the dual pair ``C^{-1} G^T``,
        ``C^{-1} L^T``, whose solution ``Qd`` gives ``Q = C Qd C``; the
        returned problem lifts factors accordingly. Without ``energy`` it is
        ``(C^{-1} G)^T`` with ``L^T`` directly.

        ``factors`` may be shared between the two problems of one model so
        that ``C`` and ``G`` are factored once.
        """
        if factors is None:
            factors = {}
        C, G = model.C, model.G
        if energy is None:
            energy = _is_symmetric(C)

        def lu(name):
            if name not in factors:
                factors[name] = _Factor({"C": C, "G": G}[name], name)
            return factors[name]

        def dense_G():
            return G.toarray() if sp.issparse(G) else np.asarray(G)

        if kind == "controllability":
            return cls(
                lu("C").solve(model.B),
                apply=lambda X: lu("C").solve(G @ X),
                solve=lambda X: lu("G").solve(C @ X),
                dense=lambda: lu("C").solve(dense_G()),
                label="P",
                inner=C if energy else None,
            )
        if kind != "observability":
            raise ValueError(f"unknown Gramian kind {kind!r}")
        if energy:
            return cls(
                lu("C").solve(model.L.T),
                apply=lambda X: lu("C").solve(G.T @ X),
                solve=lambda X: lu("G").solve(C @ X, trans=True),
                dense=lambda: lu("C").solve(dense_G().T),
                label="Q",
                inner=C,
                lift=lambda Z: C @ Z,
            )
        return cls(
            model.L.T,
            apply=lambda X: G.T @ lu("C").solve(X, trans=True),
            solve=lambda X: C.T @ lu("G").solve(X, trans=True),
            dense=lambda: lu("C").solve(dense_G()).T,
            label="Q",
        )


def _is_symmetric(M) -> bool:
    if sp.issparse(M):
        D = abs(M - M.T)
        return D.nnz == 0 or D.max() <= 1e-14 * abs(M).max()
    M = np.asarray(M)
    return np.allclose(M, M.T, rtol=0, atol=1e-14 * np.abs(M).max())


def _schur_real_parts(T: np.ndarray) -> np.ndarray:
    """Real parts of the eigenvalues of a real quasi-triangular Schur factor."""
    d = np.diag(T).copy()
    N = T.shape[0]
    i = 0
    while i < N - 1:
        if T[i + 1, i] != 0.0:
            d[i] = d[i + 1] = 0.5 * (T[i, i] + T[i + 1, i + 1])
            i += 2
        else:
            i += 1
    return d


def solve_dense(problem: LyapunovProblem, cutoff: int = DENSE_CUTOFF) -> np.ndarray:
    """Dense solve of the Lyapunov equation; returns the symmetric solution ``P``."""
    if problem.N > cutoff:
        raise LyapunovError(f"order {problem.N} exceeds dense cutoff {cutoff}; use the low-rank solver")
    A = problem.dense_matrix()
    F = problem.F
    if problem.N == 0:
        return np.zeros((0, 0))
    T, U = la.schur(A, output="real")
    re = _schur_real_parts(T)
    if np.any(re >= 0):
        raise NotHurwitzError(
            f"{problem.label or 'A'} is not Hurwitz: max Re(eig) = {re.max():.3e}"
        )
    Fh = U.T @ F
    rhs = -(Fh @ Fh.T)
    Y, scale, info = dtrsyl(T, T, rhs, trana="N", tranb="T", isgn=1)
    if info < 0:
        raise LyapunovError(f"trsyl argument {-info} invalid")
    Y = Y / scale
    P = U @ Y @ U.T
    return 0.5 * (P + P.T)


def lyapunov_residual(A: np.ndarray, P: np.ndarray, F: np.ndarray) -> float:
    """Relative residual ``|A P + P A^T + F F^T|_F / |F F^T|_F`` for explicit matrices."""
    FF = F @ F.T
    return la.norm(A @ P + P @ A.T + FF) / la.norm(FF)


@dataclass
class LowRankFactor:
    Z: np.ndarray
    converged: bool = True
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    basis_size: int = 0

    @property
    def rank(self) -> int:
        return self.Z.shape[1]

    def gramian(self) -> np.ndarray:
        return self.Z @ self.Z.T


@dataclass
class EksState:
    K: np.ndarray
    AK: np.ndarray
    j: int
    plus: np.ndarray  # column indices of the newest A-side sub-block
    minus: np.ndarray  # column indices of the newest A^{-1}-side sub-block
    A_small: np.ndarray | None = None
    R_small: np.ndarray | None = None
    X_small: np.ndarray | None = None
    residual_history: list = field(default_factory=list)
    stagnated: bool = False

    @property
    def size(self) -> int:
        return self.K.shape[1]


def _orth(V: np.ndarray, K: np.ndarray, problem: LyapunovProblem, deflation_tol: float) -> np.ndarray:
    """Orthonormalize the columns of ``V`` against ``K`` and each other.

    Classical Gram-Schmidt with a full second pass in the problem's inner
    product; a column is dropped when what survives is below
    ``deflation_tol`` times its incoming norm.
    """
    N = V.shape[0]
    MK = problem.weigh(K)
    out = np.empty((N, 0))
    Mout = np.empty((N, 0))
    for i in range(V.shape[1]):
        v = V[:, i]
        pre = np.sqrt(max(v @ problem.weigh(v), 0.0))
        if pre == 0.0:
            continue
        v = v / pre
        for _ in range(2):
            if K.shape[1]:
                v = v - K @ (MK.T @ v)
            if out.shape[1]:
                v = v - out @ (Mout.T @ v)
        Mv = problem.weigh(v)
        nv = np.sqrt(max(v @ Mv, 0.0))
        if nv <= deflation_tol:
            continue
        out = np.column_stack([out, v / nv])
        Mout = np.column_stack([Mout, Mv / nv])
    return out


def eks_init(problem: LyapunovProblem, opts: EksOptions | None = None) -> EksState:
    """First basis block ``orth([F, A^{-1} F])`` (j = 1)."""
    opts = opts or EksOptions()
    F = problem.F
    empty = np.empty((problem.N, 0))
    Kp = _orth(F, empty, problem, opts.deflation_tol)
    Km = _orth(problem.solve(F), Kp, problem, opts.deflation_tol)
    K = np.column_stack([Kp, Km])
    return EksState(
        K=K,
        AK=problem.apply(K) if K.shape[1] else empty,
        j=1,
        plus=np.arange(Kp.shape[1]),
        minus=np.arange(Kp.shape[1], K.shape[1]),
    )


def eks_expand(state: EksState, problem: LyapunovProblem, opts: EksOptions | None = None) -> EksState:
    """Append the next block built from ``A`` times the newest A-side columns
    and ``A^{-1}`` times the newest A^{-1}-side columns.

    Sub-block widths are tracked individually, so deflation in one iteration
    shrinks the following ones. When every candidate column deflates the basis
    is returned unchanged with ``stagnated=True``.
    """
    opts = opts or EksOptions()
    K = state.K
    Vp = state.AK[:, state.plus]
    Vm = problem.solve(K[:, state.minus]) if state.minus.size else np.empty((K.shape[0], 0))
    Kp = _orth(Vp, K, problem, opts.deflation_tol)
    Km = _orth(Vm, np.column_stack([K, Kp]), problem, opts.deflation_tol)
    new = np.column_stack([Kp, Km])
    k0 = K.shape[1]
    if new.shape[1] == 0:
        return replace(state, stagnated=True)
    return replace(
        state,
        K=np.column_stack([K, new]),
        AK=np.column_stack([state.AK, problem.apply(new)]),
        j=state.j + 1,
        plus=np.arange(k0, k0 + Kp.shape[1]),
        minus=np.arange(k0 + Kp.shape[1], k0 + new.shape[1]),
        A_small=None,
        R_small=None,
        X_small=None,
        residual_history=list(state.residual_history),
        stagnated=False,
    )


def solve_projected(state: EksState, problem: LyapunovProblem) -> EksState:
    """Galerkin projection onto the basis and dense solve of the small equation."""
    MK = problem.weigh(state.K)
    A_small = MK.T @ state.AK
    R_small = MK.T @ problem.F
    small = LyapunovProblem.from_dense(A_small, R_small, label=f"projected {problem.label} (j={state.j})")
    X = solve_dense(small, cutoff=max(DENSE_CUTOFF, A_small.shape[0]))
    return replace(state, A_small=A_small, R_small=R_small, X_small=X)


def residual_norm(state: EksState, problem: LyapunovProblem) -> float:
    """Relative residual of ``P_j = K X K^T`` without forming ``P_j``.

    Writing ``A K = K H + W`` and ``F = K R + Fo`` the residual is
    ``Y M Y^T`` with ``Y = [K, W, Fo]`` and a small symmetric ``M`` built
    from the projected residual, ``X`` and ``R``; its Frobenius norm is
    ``sqrt(tr(M S M S))`` with the Gram matrix ``S = Y^T Y``.
    """
    if state.X_small is None:
        return 1.0
    F = problem.F
    ff = la.norm(F.T @ F)
    if ff == 0.0:
        return 0.0
    K, H, X, R = state.K, state.A_small, state.X_small, state.R_small
    k, p = K.shape[1], F.shape[1]
    W = state.AK - K @ H
    Fo = F - K @ R
    Y = np.column_stack([K, W, Fo])
    M = np.zeros((2 * k + p, 2 * k + p))
    M[:k, :k] = H @ X + X @ H.T + R @ R.T
    M[:k, k : 2 * k] = X
    M[k : 2 * k, :k] = X
    M[:k, 2 * k :] = R
    M[2 * k :, :k] = R.T
    M[2 * k :, 2 * k :] = np.eye(p)
    S = Y.T @ Y
    MS = M @ S
    res2 = np.sum(MS * MS.T)
    return float(np.sqrt(max(res2, 0.0)) / ff)


def extract_factor(state: EksState, opts: EksOptions | None = None) -> LowRankFactor:
    """``Z = K U S^{1/2}`` from the symmetric eigendecomposition of ``X``."""
    opts = opts or EksOptions()
    X = 0.5 * (state.X_small + state.X_small.T)
    w, U = la.eigh(X)
    w, U = w[::-1], U[:, ::-1]
    wmax = w[0] if w.size else 0.0
    if wmax <= 0.0:
        return LowRankFactor(np.empty((state.K.shape[0], 0)), True, state.j, list(state.residual_history))
    if w[-1] < -opts.deflation_tol * wmax:
        raise LyapunovError(f"projected solution is indefinite: min eig {w[-1]:.3e}, max {wmax:.3e}")
    keep = w > opts.deflation_tol * wmax
    Z = state.K @ (U[:, keep] * np.sqrt(w[keep]))
    return LowRankFactor(Z, True, state.j, list(state.residual_history))


def solve_eks(problem: LyapunovProblem, opts: EksOptions | None = None) -> LowRankFactor:
    """Low-rank factor of the Lyapunov solution by the extended Krylov method.

    Stops when the relative residual drops to ``opts.tol``. If ``maxiter``
    blocks are reached first, the last factor is returned with
    ``converged=False`` and a :class:`ConvergenceWarning` is issued.
    """
    opts = opts or EksOptions()
    state = eks_init(problem, opts)
    if state.size == 0:
        return LowRankFactor(np.empty((problem.N, 0)), True, 0, [0.0])
    history = []
    converged = False
    while True:
        state = solve_projected(state, problem)
        res = residual_norm(state, problem)
        history.append(res)
        log.debug("EKS %s j=%d basis=%d residual=%.3e", problem.label, state.j, state.size, res)
        if res <= opts.tol:
            converged = True
            break
        if state.j >= opts.maxiter:
            break
        state = eks_expand(state, problem, opts)
        if state.stagnated:
            raise LyapunovError(
                f"EKS basis exhausted at j={state.j} with residual {res:.3e} > tol {opts.tol:.1e}"
            )
    state.residual_history = history
    factor = extract_factor(state, opts)
    factor.converged = converged
    factor.basis_size = state.size
    if problem.lift is not None:
        factor.Z = problem.lift(factor.Z)
    if not converged:
        warnings.warn(
            f"EKS ({problem.label}) stopped at maxiter={opts.maxiter} with residual {history[-1]:.3e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return factor


def write_residual_history(factor: LowRankFactor, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual"])
        for i, r in enumerate(factor.residual_history, start=1):
            w.writerow([i, f"{r:.6e}"])
