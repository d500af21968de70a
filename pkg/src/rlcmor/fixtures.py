"""Synthetic circuits and random systems used by tests and scripts."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mna import StateSpaceModel, assemble_mna, to_state_space
from .netlist import Element, Mutual, RlckNetlist


def rc_ladder(
    nodes: int = 500,
    r_total: float = 20.0,
    c_total: float = 200e-15,
    r_term: float = 1e3,
) -> RlckNetlist:
    """Two-port RC line: ``nodes`` nodes joined by series resistors, a shunt
    capacitor at every node and a termination resistor at both ends."""
    net = RlckNetlist()
    names = [str(i + 1) for i in range(nodes)]
    net.nodes = list(names)
    rseg = r_total / max(nodes - 1, 1)
    cnode = c_total / nodes
    for i in range(nodes - 1):
        net.resistors.append(Element(f"R{i + 1}", names[i], names[i + 1], rseg))
    net.resistors.append(Element("Rt1", names[0], "0", r_term))
    net.resistors.append(Element("Rt2", names[-1], "0", r_term))
    for i in range(nodes):
        net.capacitors.append(Element(f"C{i + 1}", names[i], "0", cnode))
    net.ports = [("P1", names[0]), ("P2", names[-1])]
    return net


def rlck_line(
    segments: int = 666,
    r_total: float = 20.0,
    l_total: float = 1e-9,
    c_total: float = 200e-15,
    r_skin_total: float = 50.0,
    k_coupling: tuple[float, ...] = (0.2, 0.05),
    r_term: float = 50.0,
) -> RlckNetlist:
    """Two-port RLCk interconnect line with a skin-effect ladder per segment.

    Each segment is a series resistor into an inductor that is shunted by a
    resistor (the usual ladder that makes series loss grow with frequency);
    every node has a shunt capacitor and both ends are terminated to ground.
    Inductor ``i`` couples to inductor ``i + d`` through
    ``k_coupling[d - 1] * L_seg``. The state order is ``3 * segments + 1``.

    Without the shunt resistors every mode of the line is damped at the same
    rate and the Gramians are not low-rank.
    """
    if 2 * sum(k_coupling) >= 1.0:
        raise ValueError("coupling coefficients too large for a positive definite inductance matrix")
    net = RlckNetlist()
    names = ["n0"]
    for s in range(segments):
        names += [f"m{s}", f"n{s + 1}"]
    net.nodes = list(names)
    rseg = r_total / segments
    lseg = l_total / segments
    cnode = c_total / len(names)
    for s in range(segments):
        net.resistors.append(Element(f"R{s}", f"n{s}", f"m{s}", rseg))
        net.inductors.append(Element(f"L{s}", f"m{s}", f"n{s + 1}", lseg))
        if r_skin_total:
            net.resistors.append(Element(f"Rs{s}", f"m{s}", f"n{s + 1}", r_skin_total / segments))
    net.resistors.append(Element("Rt1", names[0], "0", r_term))
    net.resistors.append(Element("Rt2", names[-1], "0", r_term))
    for i, nd in enumerate(names):
        net.capacitors.append(Element(f"C{i}", nd, "0", cnode))
    for d, k in enumerate(k_coupling, start=1):
        for s in range(segments - d):
            net.mutual_inductors.append(Mutual(f"K{d}_{s}", s, s + d, k * lseg))
    net.ports = [("P1", names[0]), ("P2", names[-1])]
    return net


def ladder_model(**kw) -> StateSpaceModel:
    return to_state_space(assemble_mna(rc_ladder(**kw)))


def line_model(**kw) -> StateSpaceModel:
    return to_state_space(assemble_mna(rlck_line(**kw)))


def random_stable_matrix(rng: np.random.Generator, N: int, skew: float = 1.0) -> np.ndarray:
    """Dense ``A`` with negative definite symmetric part (so every Galerkin
    projection of it stays Hurwitz)."""
    X = rng.standard_normal((N, N))
    S = X @ X.T / N + 0.1 * np.eye(N)
    K = rng.standard_normal((N, N))
    return -S + skew * (K - K.T) / np.sqrt(N)


def random_sparse_stable(rng: np.random.Generator, N: int, density: float = 0.02) -> sp.csc_matrix:
    """Sparse ``A = -(D + S S^T) + (W - W^T)``: symmetric part negative definite."""
    D = sp.diags(rng.uniform(1.0, 10.0, N))
    S = sp.random(N, N, density=density, random_state=rng, data_rvs=rng.standard_normal)
    W = sp.random(N, N, density=density, random_state=rng, data_rvs=rng.standard_normal)
    return sp.csc_matrix(-(D + S @ S.T) + (W - W.T))


def random_stable_model(
    rng: np.random.Generator,
    N: int,
    p: int,
    q: int | None = None,
    descriptor: bool = False,
) -> StateSpaceModel:
    """Random stable dense model; with ``descriptor=True`` ``C`` is a random
    SPD matrix and ``G = C A`` so that ``C^{-1} G`` is still Hurwitz."""
    q = p if q is None else q
    A = random_stable_matrix(rng, N)
    B = rng.standard_normal((N, p))
    L = rng.standard_normal((q, N))
    if descriptor:
        X = rng.standard_normal((N, N))
        C = X @ X.T / N + np.eye(N)
        return StateSpaceModel(C=C, G=C @ A, B=C @ B, L=L)
    return StateSpaceModel(C=np.eye(N), G=A, B=B, L=L)
