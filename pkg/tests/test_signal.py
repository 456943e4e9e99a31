import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ZC3_ROOT1
from ultdoa.signal import SrsConfig, generate_srs_sequence, largest_prime_at_most, map_to_grid, zadoff_chu_length

SMALL = SrsConfig(k_tc=2, m_sc=3, n_sc=6, n_fft=8, oversampling=1)


def test_zc_length_three_root_one():
    np.testing.assert_allclose(generate_srs_sequence(SMALL, 1), ZC3_ROOT1, atol=1e-15)


def test_zc_cyclic_extension_repeats_the_head():
    cfg = SrsConfig(k_tc=2, m_sc=4, n_sc=8, n_fft=8, oversampling=1)
    seq = generate_srs_sequence(cfg, 1)
    assert zadoff_chu_length(4) == 3
    assert seq[3] == seq[0]


@pytest.mark.parametrize("root", [0, 3, -1, 10])
def test_rejects_roots_outside_range(root):
    with pytest.raises(ValueError):
        generate_srs_sequence(SMALL, root)


def test_default_zc_length_is_largest_prime_at_or_below_m_sc():
    assert largest_prime_at_most(636) == 631
    assert zadoff_chu_length(SrsConfig().m_sc) == 631


@given(st.integers(1, 630))
def test_unit_modulus_and_deterministic(root):
    cfg = SrsConfig()
    a = generate_srs_sequence(cfg, root)
    assert a.shape == (cfg.m_sc,)
    assert np.max(np.abs(np.abs(a) - 1)) <= 1e-12
    np.testing.assert_array_equal(a, generate_srs_sequence(cfg, root))


def test_comb_occupancy_small():
    cfg = SrsConfig(k_tc=2, m_sc=4, n_sc=8, n_fft=8, oversampling=1)
    grid = map_to_grid(np.arange(1, 5).astype(complex), cfg)
    assert set(np.flatnonzero(grid[0, 0, 0])) == {0, 2, 4, 6}


def test_symbols_are_copies_and_energy_is_m_sc():
    cfg = SrsConfig(n_symb_srs=2, n_rx=2, p_rx=2)
    grid = map_to_grid(generate_srs_sequence(cfg, 25), cfg)
    np.testing.assert_array_equal(grid[:, :, 0], grid[:, :, 1])
    energy = np.sum(np.abs(grid) ** 2, axis=-1)
    np.testing.assert_allclose(energy, cfg.m_sc)


@given(
    k_tc=st.sampled_from([2, 4, 8]),
    m_sc=st.integers(2, 40),
    extra=st.integers(0, 7),
    k0_frac=st.floats(0, 1),
)
def test_exactly_m_sc_nonzero_per_symbol(k_tc, m_sc, extra, k0_frac):
    n_sc = m_sc * k_tc + extra
    n_fft = 1 << int(np.ceil(np.log2(n_sc)))
    k0 = int(k0_frac * (n_sc - 1 - (m_sc - 1) * k_tc))
    cfg = SrsConfig(k_tc=k_tc, m_sc=m_sc, n_sc=n_sc, n_fft=n_fft, k0=k0, oversampling=2)
    grid = map_to_grid(np.ones(m_sc, complex), cfg)
    nz = np.flatnonzero(grid[0, 0, 0])
    np.testing.assert_array_equal(nz, k0 + k_tc * np.arange(m_sc))


def test_map_rejects_wrong_length():
    with pytest.raises(ValueError):
        map_to_grid(np.ones(5), SMALL)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(k_tc=3),
        dict(n_fft=1000),
        dict(oversampling=3),
        dict(n_sc=4096),
        dict(m_sc=700),
        dict(k0=2),
        dict(n_rx=0),
        dict(k0=-1),
        dict(sample_period_s=0.0),
    ],
)
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        SrsConfig(**kwargs)


def test_config_defaults_match_the_100mhz_numerology():
    cfg = SrsConfig()
    assert cfg.oversampling == 16
    assert cfg.sample_period_s == 1 / 61.44e6
    assert cfg.subcarrier_spacing_hz == pytest.approx(30e3)
    assert cfg.m_sc == 636 and cfg.n_sc == 1272  # 106 PRB
