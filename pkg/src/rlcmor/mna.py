"""Modified nodal analysis assembly and the descriptor state-space form.

The MNA system of an RLCk network with ``n`` non-ground nodes and ``m``
inductive branches is::

    [Gn  E] [v]   [Cn 0] [v']   [B1]
    [-E' 0] [i] + [0  M] [i'] = [0 ] u,      y = [L1 0] [v; i]

and is rewritten as ``C x' = G x + B u, y = L x`` with
``G = -[[Gn, E], [-E', 0]]``, ``C = blkdiag(Cn, M)``.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .netlist import GROUND, RlckNetlist

log = logging.getLogger(__name__)

#: capacitance added to empty diagonal entries of Cn so that C is invertible
C_REG = 1e-18


@dataclass(frozen=True)
class MnaSystem:
    Gn: sp.csr_matrix
    Cn: sp.csr_matrix
    M: sp.csr_matrix
    E: sp.csr_matrix
    B1: np.ndarray
    L1: np.ndarray
    node_names: tuple[str, ...] = ()
    port_names: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.Gn.shape[0]

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @property
    def p(self) -> int:
        return self.B1.shape[1]

    @property
    def q(self) -> int:
        return self.L1.shape[0]


@dataclass(frozen=True)
class StateSpaceModel:
    """Descriptor system ``C x' = G x + B u``, ``y = L x``.

    ``C`` and ``G`` are scipy sparse matrices for assembled circuits and dense
    arrays for reduced models; every consumer in the package accepts both.
    ``meta`` carries bookkeeping such as the block sizes and which diagonal
    entries of ``C`` were regularized.
    """

    C: object
    G: object
    B: np.ndarray
    L: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        N = self.C.shape[0]
        if self.C.shape != (N, N) or self.G.shape != (N, N):
            raise ValueError(f"C {self.C.shape} and G {self.G.shape} must both be {N}x{N}")
        if self.B.ndim != 2 or self.B.shape[0] != N:
            raise ValueError(f"B has shape {self.B.shape}, expected ({N}, p)")
        if self.L.ndim != 2 or self.L.shape[1] != N:
            raise ValueError(f"L has shape {self.L.shape}, expected (q, {N})")

    @property
    def N(self) -> int:
        return self.C.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.L.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.C)


def assemble_mna(net: RlckNetlist) -> MnaSystem:
    """Stamp every element of ``net`` into the MNA matrices."""
    net.validate()
    idx = net.node_index()
    n, m = len(net.nodes), len(net.inductors)

    def stamp2(rows, cols, vals, a, b, g):
        ia = idx.get(a) if a != GROUND else None
        ib = idx.get(b) if b != GROUND else None
        if ia is not None:
            rows.append(ia), cols.append(ia), vals.append(g)
        if ib is not None:
            rows.append(ib), cols.append(ib), vals.append(g)
        if ia is not None and ib is not None:
            rows += [ia, ib]
            cols += [ib, ia]
            vals += [-g, -g]

    gr, gc, gv = [], [], []
    for el in net.resistors:
        stamp2(gr, gc, gv, el.node_a, el.node_b, 1.0 / el.value)
    cr, cc, cv = [], [], []
    for el in net.capacitors:
        stamp2(cr, cc, cv, el.node_a, el.node_b, el.value)

    er, ec, ev = [], [], []
    for k, el in enumerate(net.inductors):
        if el.node_a != GROUND:
            er.append(idx[el.node_a]), ec.append(k), ev.append(1.0)
        if el.node_b != GROUND:
            er.append(idx[el.node_b]), ec.append(k), ev.append(-1.0)

    mr = list(range(m))
    mc = list(range(m))
    mv = [el.value for el in net.inductors]
    for k in net.mutual_inductors:
        mr += [k.index_a, k.index_b]
        mc += [k.index_b, k.index_a]
        mv += [k.value, k.value]

    p = len(net.ports)
    B1 = np.zeros((n, p))
    for j, (_, nd) in enumerate(net.ports):
        B1[idx[nd], j] = 1.0

    return MnaSystem(
        Gn=sp.csr_matrix((gv, (gr, gc)), shape=(n, n)),
        Cn=sp.csr_matrix((cv, (cr, cc)), shape=(n, n)),
        M=sp.csr_matrix((mv, (mr, mc)), shape=(m, m)),
        E=sp.csr_matrix((ev, (er, ec)), shape=(n, m)),
        B1=B1,
        L1=B1.T.copy(),
        node_names=tuple(net.nodes),
        port_names=tuple(name for name, _ in net.ports),
    )


def to_state_space(mna: MnaSystem, c_reg: float = C_REG) -> StateSpaceModel:
    """Block substitution into ``C x' = G x + B u``.

    Zero diagonal entries of ``Cn`` get ``c_reg`` farads so that ``C`` is
    invertible; pass ``c_reg=0`` to keep the matrices untouched (fine for
    frequency-domain analysis, not for reduction).
    """
    n, m = mna.n, mna.m
    Cn = mna.Cn.tocsr(copy=True)
    diag = Cn.diagonal()
    reg_idx = np.flatnonzero(diag == 0.0)
    if c_reg and reg_idx.size:
        Cn = Cn + sp.csr_matrix((np.full(reg_idx.size, c_reg), (reg_idx, reg_idx)), shape=(n, n))
        log.info("regularized %d empty capacitance diagonal entries with %g F", reg_idx.size, c_reg)
    else:
        reg_idx = reg_idx[:0]

    G = -sp.bmat([[mna.Gn, mna.E], [-mna.E.T, None]], format="csc") if m else -mna.Gn.tocsc()
    C = sp.block_diag([Cn, mna.M], format="csc") if m else Cn.tocsc()
    B = np.vstack([mna.B1, np.zeros((m, mna.p))])
    L = np.hstack([mna.L1, np.zeros((mna.q, m))])
    meta = {
        "n": n,
        "m": m,
        "c_reg": c_reg if reg_idx.size else 0.0,
        "regularized": reg_idx.tolist(),
        "state_names": list(mna.node_names) + [f"i{k}" for k in range(m)],
        "port_names": list(mna.port_names),
    }
    return StateSpaceModel(C=C, G=G.tocsc(), B=B, L=L, meta=meta)


def split_blocks(model: StateSpaceModel) -> MnaSystem:
    """Recover the MNA blocks from a model produced by :func:`to_state_space`."""
    n, m = model.meta["n"], model.meta["m"]
    G = sp.csr_matrix(-model.G)
    C = sp.csr_matrix(model.C)
    Cn = C[:n, :n].tolil()
    for i in model.meta.get("regularized", []):
        Cn[i, i] = 0.0
    return MnaSystem(
        Gn=G[:n, :n].tocsr(),
        Cn=Cn.tocsr(),
        M=C[n:, n:].tocsr(),
        E=G[:n, n:].tocsr(),
        B1=model.B[:n].copy(),
        L1=model.L[:, :n].copy(),
    )


def _read_mtx(path) -> np.ndarray | sp.spmatrix:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"matrix file not found: {path}")
    mat = scipy.io.mmread(str(path))
    dtype = mat.dtype
    if np.issubdtype(dtype, np.complexfloating):
        raise ValueError(f"{path}: complex entries are not supported")
    if sp.issparse(mat):
        return mat.astype(float).tocsc()
    return np.asarray(mat, dtype=float)


def load_matrices(paths: dict) -> StateSpaceModel:
    """Load ``{"G": ..., "C": ..., "B": ..., "L": ...}`` Matrix Market files."""
    missing = {"G", "C", "B", "L"} - set(paths)
    if missing:
        raise ValueError(f"missing matrix paths: {sorted(missing)}")
    mats = {k: _read_mtx(paths[k]) for k in ("G", "C", "B", "L")}
    G = sp.csc_matrix(mats["G"])
    C = sp.csc_matrix(mats["C"])
    B = mats["B"].toarray() if sp.issparse(mats["B"]) else np.atleast_2d(mats["B"])
    L = mats["L"].toarray() if sp.issparse(mats["L"]) else np.atleast_2d(mats["L"])
    N = G.shape[0]
    if G.shape != (N, N):
        raise ValueError(f"G must be square, got {G.shape}")
    if C.shape != (N, N):
        raise ValueError(f"dimension mismatch: C is {C.shape}, G is {G.shape}")
    if B.shape[0] != N:
        raise ValueError(f"dimension mismatch: B has {B.shape[0]} rows, model order is {N}")
    if L.shape[1] != N:
        raise ValueError(f"dimension mismatch: L has {L.shape[1]} columns, model order is {N}")
    asym = abs(C - C.T).max() if C.nnz else 0.0
    if asym > 1e-12 * (abs(C).max() if C.nnz else 1.0):
        log.warning("C is not symmetric (max asymmetry %g)", asym)
    return StateSpaceModel(C=C, G=G, B=B, L=L, meta={"source": {k: str(v) for k, v in paths.items()}})


def write_matrices(model: StateSpaceModel, outdir, prefix: str = "") -> dict:
    """Write G, C, B, L as Matrix Market files; return the paths written."""
    os.makedirs(outdir, exist_ok=True)
    paths = {}
    for key in ("G", "C", "B", "L"):
        mat = getattr(model, key)
        path = Path(outdir) / f"{prefix}{key}.mtx"
        scipy.io.mmwrite(str(path), sp.coo_matrix(mat), precision=17, symmetry="general")
        paths[key] = path
    return paths
