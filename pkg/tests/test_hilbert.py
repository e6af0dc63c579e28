import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakmass.hilbert import (
    Grid1D,
    GridError,
    GridTooCoarseError,
    JointState,
    NotNormalizedError,
    PacketClippedError,
    QubitState,
    WavePacket,
    class_overlap,
    expectation,
    make_gaussian,
    momentum_uncertainty,
    read_csv,
    to_momentum,
    to_position,
    write_csv,
)


@pytest.fixture
def grid():
    return Grid1D(1024, 40.0)


def random_packet(grid, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
    return WavePacket(grid, amps).normalized()


def test_qubit_normalization():
    q = QubitState.from_amplitudes(3, 4j)
    assert abs(abs(q.amp_g) ** 2 + abs(q.amp_e) ** 2 - 1) < 1e-12
    with pytest.raises(NotNormalizedError):
        QubitState(1.0, 1.0)


def test_grid_invariants(grid):
    assert grid.spacing * grid.n_points == grid.extent
    mom = grid.conjugate()
    assert math.isclose(mom.spacing * grid.spacing, 2 * math.pi / grid.n_points, rel_tol=1e-14)
    assert mom.conjugate() == grid
    with pytest.raises(GridError):
        Grid1D(100, 1.0)
    with pytest.raises(GridError):
        Grid1D(8, 1.0)


def test_gaussian_moments(grid):
    psi = make_gaussian(grid, 1.0)
    assert abs(psi.norm2() - 1) < 1e-10
    assert abs(expectation(psi, "x2") - 1.0) < 1e-10
    sigma = momentum_uncertainty(1.0)
    var_p = expectation(psi, "p2") - expectation(psi, "p") ** 2
    assert abs(var_p - sigma**2) < 1e-8
    # minimum-uncertainty product
    assert abs(math.sqrt(expectation(psi, "x2")) * math.sqrt(var_p) - 0.5) < 1e-8


def test_gaussian_centres(grid):
    psi = make_gaussian(grid, 1.5, center_x=2.0, center_p=-1.25)
    assert abs(expectation(psi, "x") - 2.0) < 1e-9
    assert abs(expectation(psi, "p") + 1.25) < 1e-9


def test_gaussian_on_momentum_grid():
    mgrid = Grid1D(1024, 40.0, "momentum")
    psi = make_gaussian(mgrid, 0.5)
    assert abs(expectation(psi, "p2") - 1.0) < 1e-8
    assert abs(expectation(psi, "x2") - 0.25) < 1e-8


def test_gaussian_guards():
    with pytest.raises(GridTooCoarseError):
        make_gaussian(Grid1D(64, 64.0), 1.0)
    with pytest.raises(PacketClippedError):
        make_gaussian(Grid1D(1024, 8.0), 1.0)


def test_calcium_width_ratio():
    hbar = 1.054571817e-34
    delta, lam = 1e-6, 0.4e-6
    k = 2 * math.pi / lam
    ratio = hbar * k / momentum_uncertainty(delta, hbar)
    assert ratio == pytest.approx(4 * math.pi * delta / lam)
    assert ratio == pytest.approx(31.4, abs=0.05)


def test_class_overlap_negligible():
    # the quoted exp(-480.5) uses the rounded ratio 31; the unrounded one gives exp(-493.5)
    ov = class_overlap(1e-6 * 2 * math.pi / 0.4e-6, 1.0)
    assert ov == pytest.approx(math.exp(-(4 * math.pi / 0.4) ** 2 / 2), rel=1e-9)
    assert ov < math.exp(-480.5)
    # on a grid the residual overlap comes only from the truncated tails
    g = Grid1D(4096, 64 * math.pi)
    psi = make_gaussian(g, 15.0)
    x = g.values
    shifted = WavePacket(g, psi.amplitudes * np.exp(2j * x))
    assert abs(psi.inner(shifted)) < 1e-10


def test_fourier_pair(grid):
    psi = make_gaussian(grid, 2.0)
    mom = to_momentum(psi)
    sigma = momentum_uncertainty(2.0)
    p = mom.grid.values
    expected = (2 * math.pi * sigma**2) ** -0.25 * np.exp(-(p**2) / (4 * sigma**2))
    assert np.max(np.abs(mom.amplitudes - expected)) < 1e-10


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_roundtrip_and_parseval(seed):
    grid = Grid1D(256, 20.0)
    psi = random_packet(grid, seed)
    mom = to_momentum(psi)
    assert abs(mom.norm2() - psi.norm2()) < 1e-12
    back = to_position(mom)
    assert np.max(np.abs(back.amplitudes - psi.amplitudes)) < 1e-12


def test_transform_direction_checked(grid):
    psi = make_gaussian(grid, 1.0)
    with pytest.raises(GridError):
        to_position(psi)
    with pytest.raises(GridError):
        to_momentum(to_momentum(psi))


def test_shift_theorem_against_quadrature():
    grid = Grid1D(2048, 16 * math.pi)
    k = 1.0
    base = make_gaussian(grid, 3.0)
    x = grid.values
    mod = WavePacket(grid, base.amplitudes * np.exp(2j * k * x))
    mom = to_momentum(mod)
    # direct Riemann quadrature of (2 pi)^-1/2 int psi(x) e^{-ipx} dx at a few momenta
    for p in (2 * k - 0.1, 2 * k, 2 * k + 0.25):
        direct = np.sum(mod.amplitudes * np.exp(-1j * p * x)) * grid.spacing / math.sqrt(2 * math.pi)
        i = int(np.argmin(np.abs(mom.grid.values - p)))
        if abs(mom.grid.values[i] - p) < 1e-12:
            assert abs(mom.amplitudes[i] - direct) < 1e-12
    assert abs(expectation(mom, "p") - 2 * k) < 1e-10
    assert mom.grid.values[np.argmax(np.abs(mom.amplitudes))] == pytest.approx(2 * k)


def test_two_spike_packet():
    mgrid = Grid1D(256, 64.0, "momentum")
    p = mgrid.values
    p0 = 8.0
    amps = np.zeros(256, complex)
    amps[np.isclose(p, p0)] = 1
    amps[np.isclose(p, -p0)] = 1
    psi = WavePacket(mgrid, amps).normalized()
    assert abs(expectation(psi, "p")) < 1e-12
    assert expectation(psi, "p2") == pytest.approx(p0**2)


def test_expectation_requires_normalized(grid):
    psi = make_gaussian(grid, 1.0).scaled(2.0)
    with pytest.raises(NotNormalizedError):
        expectation(psi, "x2")


def test_joint_state_norm(grid):
    q = QubitState.from_amplitudes(0.6, 0.8j)
    js = JointState.product(q, make_gaussian(grid, 1.0))
    assert abs(js.norm2() - 1) < 1e-10
    with pytest.raises(GridError):
        JointState(make_gaussian(grid, 1.0), make_gaussian(Grid1D(512, 40.0), 1.0))


def test_csv_roundtrip(tmp_path, grid):
    psi = make_gaussian(grid, 1.0, 0.5, 1.0)
    path = tmp_path / "psi.csv"
    write_csv(psi, path)
    assert path.read_text().splitlines()[0] == "grid_value,re,im"
    back = read_csv(path)
    assert back.grid == psi.grid
    assert np.array_equal(back.amplitudes, psi.amplitudes)
