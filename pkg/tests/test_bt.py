import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given
from hypothesis import strategies as st

from rlcmor.analysis import transfer_function
from rlcmor.bt import (
    HankelSpectrum,
    ReductionConfig,
    ReductionError,
    balance_svd,
    build_rom,
    gramian_factors,
    reduce,
    select_order,
    write_rom,
)
from rlcmor.fixtures import ladder_model, line_model, random_stable_model
from rlcmor.lyapunov import LowRankFactor
from rlcmor.mna import StateSpaceModel, load_matrices

SQ2 = math.sqrt(2.0)


def scalar_model(a=1.0, b=SQ2, l=SQ2):
    return StateSpaceModel(C=np.eye(1), G=np.array([[-a]]), B=np.array([[b]]), L=np.array([[l]]))


def sweep_err(m1, m2, w):
    return max(np.linalg.norm(transfer_function(m1, 1j * x) - transfer_function(m2, 1j * x), 2) for x in w)


def test_config_exclusive():
    with pytest.raises(ValueError):
        ReductionConfig(rom_order=3, epsilon=1e-3)
    with pytest.raises(ValueError):
        ReductionConfig()
    with pytest.raises(ValueError):
        ReductionConfig(rom_order=0)
    with pytest.raises(ValueError):
        ReductionConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        ReductionConfig(epsilon=1.0, mode="fast")
    assert ReductionConfig(epsilon=1.0).resolved_mode(5000) == "dense"
    assert ReductionConfig(epsilon=1.0).resolved_mode(5001) == "lowrank"


@pytest.mark.parametrize("mode", ["dense", "lowrank"])
def test_scalar_factors(mode):
    zp, zq = gramian_factors(scalar_model(), ReductionConfig(mode=mode, rom_order=1))
    assert abs(zp.Z[0, 0]) == pytest.approx(1.0, rel=1e-12)
    assert abs(zq.Z[0, 0]) == pytest.approx(1.0, rel=1e-12)


def test_symmetric_model_p_equals_q():
    model = ladder_model(nodes=30)  # C^{-1} G is symmetric only for uniform C; scale it away
    C = model.C.toarray()
    d = 1.0 / np.sqrt(np.diag(C))
    sym = StateSpaceModel(
        C=np.eye(model.N), G=d[:, None] * model.G.toarray() * d[None, :], B=d[:, None] * model.B, L=model.L * d[None, :]
    )
    zp, zq = gramian_factors(sym, ReductionConfig(mode="dense", rom_order=1))
    P, Q = zp.gramian(), zq.gramian()
    assert la.norm(P - Q) <= 1e-10 * la.norm(P)


def test_dense_lowrank_gramians_agree(rng):
    model = random_stable_model(rng, 300, 2)
    dz = gramian_factors(model, ReductionConfig(mode="dense", rom_order=1))
    lz = gramian_factors(model, ReductionConfig(mode="lowrank", rom_order=1))
    for a, b in zip(dz, lz):
        assert la.norm(a.gramian() - b.gramian()) <= 1e-6 * la.norm(a.gramian())


def test_balance_unit_columns():
    e1 = np.eye(4)[:, :1]
    U, hsv, V = balance_svd(LowRankFactor(e1), LowRankFactor(e1))
    assert hsv.sigma.tolist() == [1.0]
    assert abs(U[0, 0]) == 1.0 and abs(V[0, 0]) == 1.0


@pytest.mark.parametrize("a, b, l", [(1.0, SQ2, SQ2), (3.0, 2.0, 0.5), (0.1, 1.0, 7.0)])
def test_scalar_hankel_value(a, b, l):
    zp, zq = gramian_factors(scalar_model(a, b, l), ReductionConfig(mode="dense", rom_order=1))
    _, hsv, _ = balance_svd(zp, zq)
    assert hsv.sigma[0] == pytest.approx(b * l / (2 * a), rel=1e-12)


def test_empty_product():
    e1, e2 = np.eye(3)[:, :1], np.eye(3)[:, 1:2]
    _, hsv, _ = balance_svd(LowRankFactor(e1), LowRankFactor(e2))
    assert hsv.count == 0
    with pytest.raises(ReductionError):
        select_order(hsv, rom_order=1)


def test_unobservable_model_refused():
    model = StateSpaceModel(C=np.eye(2), G=-np.eye(2), B=np.array([[1.0], [0.0]]), L=np.array([[0.0, 1.0]]))
    with pytest.raises(ReductionError, match="reachable and observable"):
        reduce(model, ReductionConfig(mode="dense", rom_order=1))


def test_orthogonal_invariance(rng):
    model = random_stable_model(rng, 15, 2)
    zp, zq = gramian_factors(model, ReductionConfig(mode="dense", rom_order=1))
    W = la.qr(rng.standard_normal((zp.rank, zp.rank)))[0]
    s1 = balance_svd(zp, zq)[1].sigma
    s2 = balance_svd(LowRankFactor(zp.Z @ W), zq)[1].sigma
    np.testing.assert_allclose(s2, s1, rtol=0, atol=1e-12 * s1[0])


def test_similarity_invariance(rng):
    model = random_stable_model(rng, 12, 2)
    T = rng.standard_normal((12, 12)) + 4 * np.eye(12)
    Ti = np.linalg.inv(T)
    moved = StateSpaceModel(C=np.eye(12), G=T @ model.G @ Ti, B=T @ model.B, L=model.L @ Ti)
    cfg = ReductionConfig(mode="dense", rom_order=1)
    s1 = balance_svd(*gramian_factors(model, cfg))[1].sigma
    s2 = balance_svd(*gramian_factors(moved, cfg))[1].sigma
    np.testing.assert_allclose(s2[:12], s1[:12], rtol=0, atol=1e-10 * s1[0])


def test_select_examples():
    assert select_order(HankelSpectrum(np.array([1.0, 1e-9])), epsilon=1e-6) == 1
    assert select_order(HankelSpectrum(np.array([1.0])), rom_order=5) == 1
    assert select_order(HankelSpectrum(np.array([1.0, 0.5, 0.1])), epsilon=math.inf) == 1
    # 2 * (0.1 + 0.01) = 0.22
    s = HankelSpectrum(np.array([1.0, 0.5, 0.1, 0.01]))
    assert select_order(s, epsilon=0.22) == 2
    assert select_order(s, epsilon=0.2199) == 3


def test_select_tie_keeps_pair():
    s = HankelSpectrum(np.array([1.0, 0.3, 0.3, 0.01]))
    assert select_order(s, rom_order=2) == 3
    # 2 * (0.3 + 0.01) <= 0.7 stops at r = 2, which would split the pair
    assert select_order(s, epsilon=0.7) == 3


@given(
    st.lists(st.floats(1e-12, 1e3), min_size=1, max_size=20),
    st.lists(st.floats(1e-10, 1e4), min_size=2, max_size=8),
)
def test_select_monotone_in_epsilon(vals, eps):
    hsv = HankelSpectrum(np.sort(np.array(vals))[::-1])
    rs = [select_order(hsv, epsilon=e) for e in sorted(eps)]
    assert all(a >= b for a, b in zip(rs, rs[1:]))
    for e, r in zip(sorted(eps), rs):
        assert 1 <= r <= hsv.count
        assert 2 * hsv.tail(r) <= e or r == hsv.count


def test_scalar_rom_identity():
    model = scalar_model(2.0, 3.0, 0.5)
    rom = reduce(model, ReductionConfig(mode="dense", rom_order=1))
    assert rom.Gt[0, 0] == pytest.approx(-2.0, rel=1e-12)
    assert rom.Bt[0, 0] * rom.Lt[0, 0] == pytest.approx(1.5, rel=1e-12)
    assert abs(rom.Bt[0, 0]) == pytest.approx(abs(rom.Lt[0, 0]), rel=1e-12)  # balanced


@pytest.mark.parametrize("descriptor", [False, True])
def test_full_order_identity(rng, descriptor):
    model = random_stable_model(rng, 8, 2, descriptor=descriptor)
    rom = reduce(model, ReductionConfig(mode="dense", rom_order=8))
    assert rom.order == 8
    for w in np.logspace(-2, 2, 20):
        H, Hr = transfer_function(model, 1j * w), transfer_function(rom.model, 1j * w)
        assert np.linalg.norm(H - Hr) <= 1e-8 * np.linalg.norm(H)


def test_two_state_bound():
    # symmetric balanced realization: A sig + sig A = -b b^T with L = B^T
    sig = np.array([1.0, 1e-6])
    b = np.array([1.0, 1e-3])
    A = -np.outer(b, b) / (sig[:, None] + sig[None, :])
    model = StateSpaceModel(C=np.eye(2), G=A, B=b[:, None], L=b[None, :])
    rom = reduce(model, ReductionConfig(mode="dense", rom_order=1))
    np.testing.assert_allclose(rom.spectrum.sigma, sig, rtol=1e-8)
    w = np.concatenate([[0.0], np.logspace(-3, 3, 50)])
    assert sweep_err(model, rom.model, w) <= 2e-6 + 1e-12


def test_biorthogonality_and_provenance():
    model = ladder_model(nodes=60)
    rom = reduce(model, ReductionConfig(mode="dense", epsilon=1e-4))
    T, Ti = rom.transform.T, rom.transform.Tinv
    assert np.abs(T @ Ti - np.eye(rom.order)).max() <= 1e-8
    p = rom.provenance
    assert p["original_order"] == 60 and p["rom_order"] == rom.order and p["mode"] == "dense"
    assert rom.error_bound <= 1e-4


def test_refuses_tiny_sigma():
    # second state is nearly unreachable
    model = StateSpaceModel(
        C=np.eye(2), G=np.diag([-1.0, -2.0]), B=np.array([[1.0], [1e-9]]), L=np.array([[1.0, 1e-9]])
    )
    zp, zq = gramian_factors(model, ReductionConfig(mode="dense", rom_order=2))
    U, hsv, V = balance_svd(zp, zq)
    assert hsv.sigma[1] < 1e-14 * hsv.sigma[0]
    with pytest.raises(ReductionError, match="at most 1"):
        build_rom(model, zp, zq, U, hsv, V, 2)


def test_epsilon_infinite_gives_one_state():
    rom = reduce(ladder_model(nodes=40), ReductionConfig(mode="dense", epsilon=math.inf))
    assert rom.order == 1
    assert np.all(np.isfinite(transfer_function(rom.model, 1j)))


def test_dense_lowrank_rom_agree_line500():
    from rlcmor.analysis import FrequencySweep, compare, sp_sweep

    model = line_model(segments=166)
    a = reduce(model, ReductionConfig(mode="dense", epsilon=1e-3))
    b = reduce(model, ReductionConfig(mode="lowrank", epsilon=1e-3))
    assert a.order == b.order
    sw = FrequencySweep.make(n=51)
    Ha = np.array([transfer_function(a.model, 2j * np.pi * f) for f in sw.points])
    Hb = np.array([transfer_function(b.model, 2j * np.pi * f) for f in sw.points])
    assert np.max(np.abs(Ha - Hb) / np.abs(Ha)) <= 1e-4
    # within 10x the EKS tolerance in S-parameter terms
    assert compare(sp_sweep(a.model, sw), sp_sweep(b.model, sw))[1] / 100 <= 1e-7


def test_write_rom(tmp_path):
    rom = reduce(ladder_model(nodes=30), ReductionConfig(mode="dense", rom_order=4))
    paths = write_rom(rom, tmp_path)
    model = load_matrices({k: paths[k] for k in "GCBL"})
    np.testing.assert_array_equal(model.G.toarray(), rom.Gt)
    kv = dict(line.split("=", 1) for line in paths["provenance"].read_text().splitlines())
    for key in ("original_order", "rom_order", "mode", "eks_iterations", "residuals", "wall_time_s", "peak_mem_estimate"):
        assert key in kv
    assert kv["rom_order"] == "4" and kv["original_order"] == "30"


@pytest.mark.parametrize("mode", ["dense", "lowrank"])
def test_concurrent_matches_serial(rng, mode):
    model = random_stable_model(rng, 300, 2)
    serial = gramian_factors(model, ReductionConfig(mode=mode, rom_order=1, concurrent=False))
    for _ in range(3):
        conc = gramian_factors(model, ReductionConfig(mode=mode, rom_order=1, concurrent=True))
        for a, b in zip(serial, conc):
            np.testing.assert_array_equal(a.Z, b.Z)
