import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from rlcmor.analysis import transfer_function
from rlcmor.fixtures import line_model, rlck_line
from rlcmor.mna import C_REG, assemble_mna, load_matrices, split_blocks, to_state_space, write_matrices
from rlcmor.netlist import Element, Mutual, RlckNetlist, parse_netlist


def dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def test_single_resistor_stamp():
    mna = assemble_mna(parse_netlist("R1 1 0 50\nP1 1"))
    assert dense(mna.Gn).tolist() == [[0.02]]
    assert dense(mna.Cn).tolist() == [[0.0]]
    assert mna.m == 0
    assert mna.B1.tolist() == [[1.0]] and mna.L1.tolist() == [[1.0]]


def test_single_inductor_stamp():
    mna = assemble_mna(parse_netlist("L1 1 0 1n\nP1 1"))
    assert dense(mna.E).tolist() == [[1.0]]
    assert dense(mna.M).tolist() == [[1e-9]]
    assert dense(mna.Gn).tolist() == [[0.0]]


def test_resistor_only_state_space():
    model = to_state_space(assemble_mna(parse_netlist("R1 1 2 10\nR2 2 0 5\nP1 1")))
    assert model.N == 2
    np.testing.assert_allclose(dense(model.G), -np.array([[0.1, -0.1], [-0.1, 1 / 10 + 1 / 5]]), rtol=1e-15)
    np.testing.assert_array_equal(dense(model.C), C_REG * np.eye(2))
    assert model.meta["regularized"] == [0, 1]


def test_rl_state_space_blocks():
    model = to_state_space(assemble_mna(parse_netlist("R1 1 0 50\nL1 1 0 1n\nP1 1")))
    np.testing.assert_array_equal(dense(model.G), -np.array([[0.02, 1.0], [-1.0, 0.0]]))
    np.testing.assert_array_equal(dense(model.C), np.diag([C_REG, 1e-9]))
    assert model.N == 2
    np.testing.assert_array_equal(model.B, [[1.0], [0.0]])
    np.testing.assert_array_equal(model.L, [[1.0, 0.0]])


def test_order_arithmetic():
    # n node voltages plus m inductor currents
    n, m = 3084, 2347
    assert n + m == 5431
    net = rlck_line(segments=10)
    model = to_state_space(assemble_mna(net))
    assert model.N == len(net.nodes) + len(net.inductors) == 31


def _random_netlist(rng, n_elem=10, n_nodes=4):
    net = RlckNetlist(nodes=[str(i + 1) for i in range(n_nodes)])
    nodes = ["0"] + net.nodes
    for i in range(n_elem):
        a, b = rng.choice(len(nodes), 2, replace=False)
        kind = "RCL"[i % 3]
        el = Element(f"{kind}{i}", nodes[a], nodes[b], float(rng.uniform(0.5, 2.0)))
        {"R": net.resistors, "C": net.capacitors, "L": net.inductors}[kind].append(el)
    if len(net.inductors) >= 2:
        la, lb = net.inductors[0].value, net.inductors[1].value
        net.mutual_inductors.append(Mutual("K0", 0, 1, 0.3 * np.sqrt(la * lb)))
    net.ports = [("P1", "1"), ("P2", "2")]
    return net


def _sub(net, **only):
    return RlckNetlist(
        nodes=net.nodes,
        ports=net.ports,
        resistors=only.get("resistors", []),
        capacitors=only.get("capacitors", []),
        inductors=only.get("inductors", []),
        mutual_inductors=only.get("mutual_inductors", []),
    )


@pytest.mark.parametrize("seed", range(5))
def test_stamp_superposition(seed):
    rng = np.random.default_rng(seed)
    net = _random_netlist(rng)
    full = assemble_mna(net)
    Gn = sum(dense(assemble_mna(_sub(net, resistors=[r])).Gn) for r in net.resistors)
    Cn = sum(dense(assemble_mna(_sub(net, capacitors=[c])).Cn) for c in net.capacitors)
    np.testing.assert_array_equal(dense(full.Gn), Gn)
    np.testing.assert_array_equal(dense(full.Cn), Cn)
    # each inductor alone fills its own column of E and its diagonal entry of M
    m = len(net.inductors)
    M = np.zeros((m, m))
    for k in net.mutual_inductors:
        M[k.index_a, k.index_b] = M[k.index_b, k.index_a] = k.value
    for k, el in enumerate(net.inductors):
        alone = assemble_mna(_sub(net, inductors=[el]))
        np.testing.assert_array_equal(dense(full.E)[:, k], dense(alone.E)[:, 0])
        M[k, k] = el.value
    np.testing.assert_array_equal(dense(full.M), M)
    for mat in (full.Gn, full.Cn, full.M):
        d = dense(mat)
        assert np.array_equal(d, d.T)
    E = dense(full.E)
    assert set(np.unique(E)) <= {-1.0, 0.0, 1.0}
    assert np.all(np.count_nonzero(E, axis=0) <= 2)
    assert np.all(np.linalg.eigvalsh(dense(full.M)) > 0)


@pytest.mark.parametrize("seed", range(3))
def test_split_blocks_inverse(seed):
    mna = assemble_mna(_random_netlist(np.random.default_rng(seed), n_elem=12))
    back = split_blocks(to_state_space(mna))
    for name in ("Gn", "Cn", "M", "E"):
        np.testing.assert_array_equal(dense(getattr(back, name)), dense(getattr(mna, name)))
    np.testing.assert_array_equal(back.B1, mna.B1)


def test_reciprocity():
    model = line_model(segments=20)
    rng = np.random.default_rng(3)
    for _ in range(10):
        s = complex(rng.uniform(0, 1e10), rng.uniform(-1e11, 1e11))
        H = transfer_function(model, s)
        assert np.allclose(H, H.T, rtol=1e-10, atol=0)


def _write(path, mat):
    import scipy.io

    scipy.io.mmwrite(str(path), sp.coo_matrix(np.atleast_2d(mat)))


def test_load_matrices_consistent(tmp_path):
    G, C, B, L = -np.eye(2), np.eye(2), np.ones((2, 1)), np.ones((1, 2))
    paths = {}
    for k, v in zip("GCBL", (G, C, B, L)):
        paths[k] = tmp_path / f"{k}.mtx"
        _write(paths[k], v)
    model = load_matrices(paths)
    assert (model.N, model.p, model.q) == (2, 1, 1)


def test_load_matrices_mismatch(tmp_path):
    paths = {}
    for k, v in zip("GCBL", (-np.eye(2), np.eye(2), np.ones((3, 1)), np.ones((1, 2)))):
        paths[k] = tmp_path / f"{k}.mtx"
        _write(paths[k], v)
    with pytest.raises(ValueError, match="dimension mismatch"):
        load_matrices(paths)


def test_load_matrices_missing_and_complex(tmp_path):
    paths = {k: tmp_path / f"{k}.mtx" for k in "GCBL"}
    with pytest.raises(FileNotFoundError):
        load_matrices(paths)
    for k in "GCBL":
        _write(paths[k], np.eye(2))
    _write(paths["G"], np.eye(2) * (1 + 1j))
    with pytest.raises(ValueError, match="complex"):
        load_matrices(paths)


@given(st.integers(1, 12), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_write_read_round_trip(N, p, seed):
    import tempfile

    from rlcmor.fixtures import random_stable_model

    model = random_stable_model(np.random.default_rng(seed), N, p, descriptor=True)
    with tempfile.TemporaryDirectory() as d:
        paths = write_matrices(model, d)
        back = load_matrices(paths)
    for k in "GCBL":
        np.testing.assert_array_equal(dense(getattr(back, k)), dense(getattr(model, k)))
