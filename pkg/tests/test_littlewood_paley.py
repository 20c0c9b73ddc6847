import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_field
from wavelab.errors import IndexOutOfRange
from wavelab.littlewood_paley import (
    DyadicDecomposition,
    besov_norm,
    control_norms,
    dyadic_block,
    product_norm,
    smooth_step,
    sobolev_norm,
    zygmund_norm,
)
from wavelab.paracalc import fit_slope
from wavelab.spectral_core import PeriodicGrid
from wavelab.waterwave_core import DiffState, PhysParams, WaveState


@pytest.fixture
def g256():
    return PeriodicGrid(256)


def test_smooth_step_limits():
    x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert np.allclose(smooth_step(x), [0, 0, 0.5, 1, 1])


@pytest.mark.parametrize("n", [8, 64, 1024])
def test_partition_of_unity(n):
    dec = DyadicDecomposition(PeriodicGrid(n))
    assert np.abs(dec.blocks.sum(axis=0) - 1).max() < 1e-15
    assert dec.blocks.min() >= -1e-15


def test_block_support_is_dyadic(g256):
    dec = DyadicDecomposition(g256)
    a = np.abs(g256.xi)
    for k in range(1, dec.n_blocks - 1):
        on = dec.blocks[k] > 0
        assert a[on].min() > 2 ** (k - 1) - 1e-12 and a[on].max() < 2 ** (k + 1) + 1e-12


def test_single_mode_sits_in_one_block(g256):
    f = g256.mode(-32)
    assert np.abs(dyadic_block(g256, f, 5) - f).max() < 1e-13
    for k in (0, 1, 2, 3, 7):
        assert np.abs(dyadic_block(g256, f, k)).max() < 1e-14


def test_constant_in_first_block(g256):
    f = np.full(256, 3.0 + 0j)
    assert np.abs(dyadic_block(g256, f, 0) - f).max() < 1e-14


def test_separated_modes_split(g256):
    f, h = g256.mode(-2), g256.mode(64)
    blocks = DyadicDecomposition(g256).all_blocks(f + h)
    assert np.abs(blocks[1] - f).max() < 1e-13
    assert np.abs(blocks[6] - h).max() < 1e-13


def test_blocks_resum(g256, rng):
    f = random_field(g256, rng, kmax=127)
    assert np.abs(DyadicDecomposition(g256).all_blocks(f).sum(axis=0) - f).max() < 1e-13


def test_block_index_checked(g256):
    with pytest.raises(IndexOutOfRange):
        dyadic_block(g256, np.zeros(256), 99)
    with pytest.raises(IndexOutOfRange):
        dyadic_block(g256, np.zeros(256), -1)


def test_besov_zero(g256):
    assert besov_norm(g256, np.zeros(256, complex), 1.0) == 0


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5])
def test_zygmund_single_block(g256, s):
    assert zygmund_norm(g256, g256.mode(-32), s) == pytest.approx(2 ** (5 * s), rel=0.1)


def test_bernstein_scaling():
    g = PeriodicGrid(512)
    s = 1.3
    ks = list(range(3, 8))
    norms = [zygmund_norm(g, g.mode(-(3 * 2**k) // 2), s) for k in ks]
    assert abs(fit_slope(ks, norms) - s) < 0.1


@given(st.integers(0, 2**31 - 1), st.floats(-1, 2), st.floats(0.01, 1))
def test_zygmund_monotone_in_s(seed, s, ds):
    g = PeriodicGrid(64)
    f = random_field(g, np.random.default_rng(seed), kmax=31)
    assert zygmund_norm(g, f, s + ds) >= zygmund_norm(g, f, s)


def test_besov_rejects_bad_exponent(g256):
    with pytest.raises(ValueError):
        besov_norm(g256, np.zeros(256), 1.0, p=0.5)


def test_sobolev_examples(g256):
    assert sobolev_norm(g256, g256.mode(-1), 0) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-13)
    assert sobolev_norm(g256, g256.mode(-32), 1) == pytest.approx(np.sqrt(2 * np.pi * 1025), rel=1e-13)


def test_sobolev_besov_equivalence(g256, rng):
    ratios = []
    for _ in range(20):
        f = random_field(g256, rng, kmax=int(rng.integers(1, 128)))
        s = rng.uniform(0, 2)
        ratios.append(sobolev_norm(g256, f, s) / besov_norm(g256, f, s, 2, 2))
    assert 0.25 < min(ratios) and max(ratios) < 4


def test_sobolev_controls_zygmund(g256, rng):
    # one constant fitted on a calibration batch must hold on a fresh batch
    def ratio(f):
        return zygmund_norm(g256, f, 1.0) / sobolev_norm(g256, f, 1.5)

    calib = max(ratio(random_field(g256, rng, kmax=int(rng.integers(1, 128)))) for _ in range(20))
    fresh = [ratio(random_field(g256, rng, kmax=int(rng.integers(1, 128)))) for _ in range(20)]
    assert max(fresh) <= 2 * calib


def test_product_norm_examples(g256):
    z = np.zeros(256, complex)
    assert product_norm(g256, (z, z), 1.0) == 0
    e1 = g256.mode(-1)
    assert product_norm(g256, (e1, z), 0.0) == pytest.approx(sobolev_norm(g256, e1, 0.5))
    assert product_norm(g256, (e1, z), 0.0, "W") == pytest.approx(zygmund_norm(g256, e1, 0.5))
    with pytest.raises(ValueError):
        product_norm(g256, (e1, z), 0.0, "X")


def test_product_norm_monotone(g256, rng):
    pair = (random_field(g256, rng, holo=True), random_field(g256, rng, holo=True))
    vals = [product_norm(g256, pair, s) for s in (0.0, 0.5, 1.0, 2.0)]
    assert vals == sorted(vals)


def test_control_norms_zero():
    g = PeriodicGrid(64)
    z = np.zeros(64, complex)
    assert control_norms(WaveState(z, z, PhysParams(1, 1, 0.5), g)) == (0.0, 0.0)


def test_control_norms_single_mode():
    g = PeriodicGrid(64)
    d = 1e-3
    st_ = WaveState(d * g.mode(-1), np.zeros(64, complex), PhysParams(1, 1, 0), g)
    A, B = control_norms(st_)
    # the derivative -i d e^{-i alpha} lives entirely in block 0
    assert A == pytest.approx(d, rel=1e-12)
    assert B == pytest.approx(d, rel=1e-12)


def test_control_norms_homogeneous(rng):
    g = PeriodicGrid(128)
    Wb = 1e-2 * random_field(g, rng, kmax=20, holo=True)
    R = 1e-2 * random_field(g, rng, kmax=20, holo=True)
    p = PhysParams(1, 1, 0.7)
    A1, B1 = control_norms(DiffState(Wb, R, p, g))
    A2, B2 = control_norms(DiffState(2 * Wb, 2 * R, p, g))
    assert A2 == pytest.approx(2 * A1, rel=1e-12)
    assert B2 == pytest.approx(2 * B1, rel=1e-12)
