import numpy as np
import pytest

from rlcmor.analysis import FrequencySweep, SParameterSet, sp_sweep
from rlcmor.fixtures import ladder_model
from rlcmor.touchstone import read_touchstone, write_plot_csvs, write_touchstone


def random_set(rng, p, n=7):
    data = rng.standard_normal((n, p, p)) + 1j * rng.standard_normal((n, p, p))
    return SParameterSet(np.logspace(8, 11, n), data, 50.0)


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_round_trip(tmp_path, rng, p):
    sps = random_set(rng, p)
    path = write_touchstone(sps, tmp_path / "x")
    assert path.name == f"x.s{p}p"
    back = read_touchstone(path)
    np.testing.assert_allclose(back.freqs, sps.freqs, rtol=1e-12)
    np.testing.assert_allclose(back.data, sps.data, rtol=1e-11, atol=1e-12)
    assert back.z0 == 50.0


def test_header_and_two_port_order(tmp_path):
    data = np.array([[[11 + 0j, 12], [21, 22]]], dtype=complex)
    path = write_touchstone(SParameterSet(np.array([1e9]), data), tmp_path / "t", comment="hello")
    lines = path.read_text().splitlines()
    assert lines[0] == "! hello"
    assert lines[1] == "# HZ S RI R 50"
    vals = [float(v) for v in lines[2].split()]
    # two-port records are S11 S21 S12 S22
    assert vals[1::2] == [11.0, 21.0, 12.0, 22.0]


def test_reads_ghz_units(tmp_path):
    path = tmp_path / "g.s1p"
    path.write_text("# GHZ S RI R 75\n1.5 0.25 -0.5\n")
    sps = read_touchstone(path)
    assert sps.freqs[0] == 1.5e9 and sps.z0 == 75.0
    assert sps.data[0, 0, 0] == 0.25 - 0.5j


def test_plot_csvs(tmp_path):
    sps = sp_sweep(ladder_model(nodes=10), FrequencySweep.make(n=5))
    paths = write_plot_csvs(sps, tmp_path, "orig")
    assert sorted(p.name for p in paths) == [f"orig_S{i}{j}.csv" for i in (1, 2) for j in (1, 2)]
    rows = paths[1].read_text().splitlines()
    assert rows[0] == "freq_hz,mag_db,phase_deg"
    f, mag, ph = (float(v) for v in rows[1].split(","))
    s = sps.data[0, 0, 1]
    assert mag == pytest.approx(20 * np.log10(abs(s)), rel=1e-5)
    assert ph == pytest.approx(np.degrees(np.angle(s)), rel=1e-5, abs=1e-5)
