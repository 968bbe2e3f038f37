"""Channel generation, cascaded-channel structure, scaling coefficients."""
import numpy as np
import pytest

from bdris.channel import (ChannelSet, build_cascaded, cascaded_block,
                           generate_channel_set, reference_block,
                           scaling_coefficients)
from bdris.config import make_config
from bdris.errors import DegenerateReference
from bdris.linalg import numerical_rank, unvec, vec
from bdris.schedule import haar_unitary


def test_same_seed_is_bit_identical():
    cfg = make_config(8, 4, 2, 2, tau=40, rng_seed=42)
    a = generate_channel_set(cfg)
    b = generate_channel_set(cfg)
    assert np.array_equal(a.G, b.G)
    assert np.array_equal(a.R, b.R)
    assert np.array_equal(a.D, b.D)
    c = generate_channel_set(cfg, seed=43)
    assert not np.array_equal(a.G, c.G)


def test_rank_of_ris_bs_channel_is_min_dim():
    cfg = make_config(8, 4, tau=16, rng_seed=7)
    ch = generate_channel_set(cfg)
    s = np.linalg.svd(ch.G, compute_uv=False)
    assert s[3] > 1e-9 * s[0]
    assert ch.q == 4 == numerical_rank(ch.G)


def test_entry_variance_matches_model():
    # 10^5 entries; the sample second moment must sit within 5%
    cfg = make_config(1000, 100, tau=2000, rng_seed=3)
    ch = generate_channel_set(cfg)
    want_g = cfg.pathloss_rb * cfg.num_ris_elements
    got_g = np.mean(np.abs(ch.G) ** 2)
    assert abs(got_g - want_g) < 0.05 * want_g
    got_r = np.mean(np.abs(ch.R[0]) ** 2)
    assert abs(got_r - cfg.pathloss_ur[0]) < 0.05 * cfg.pathloss_ur[0]


def test_single_element_cascade_degenerates_to_scaled_g():
    cfg = make_config(1, 1, 1, 1, tau=2, rng_seed=5)
    ch = generate_channel_set(cfg)
    j = build_cascaded(ch)
    assert j.shape == (1, 1, 1)
    assert np.allclose(j[0], ch.R[0, 0, 0] * ch.G)


@pytest.mark.parametrize("seed", range(5))
def test_vectorization_identity_against_physical_product(seed):
    # unvec(J vec(Phi)) must reproduce G Phi R for unitary Phi
    cfg = make_config(4, 3, 1, 2, tau=12, rng_seed=seed)
    ch = generate_channel_set(cfg)
    j = build_cascaded(ch)[0]
    phi = haar_unitary(4, np.random.default_rng(seed + 100))
    lhs = unvec(j @ vec(phi), 3, 2)
    rhs = ch.G @ phi @ ch.R[0]
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_cascaded_shapes():
    cfg = make_config(5, 4, 2, 3, tau=40, rng_seed=1)
    ch = generate_channel_set(cfg)
    j = build_cascaded(ch)
    assert j.shape == (2, 3 * 4, 25)


def test_every_subblock_is_scaled_reference():
    cfg = make_config(4, 3, 2, 2, tau=20, rng_seed=11)
    ch = generate_channel_set(cfg)
    j = build_cascaded(ch)
    sc = scaling_coefficients(ch)
    q111 = reference_block(ch)
    for k in range(2):
        for u in range(2):
            for m in range(4):
                block = cascaded_block(j[k], u, m, 3, 4)
                want = sc.B[k, m, u] * q111
                assert np.linalg.norm(block - want) <= 1e-12 * np.linalg.norm(want)
                stacked = np.stack([vec(block), vec(ch.G)], axis=1)
                s = np.linalg.svd(stacked, compute_uv=False)
                assert s[1] <= 1e-9 * s[0]


def test_reference_scaling_is_one():
    cfg = make_config(3, 2, 2, 2, tau=17, rng_seed=2)
    sc = scaling_coefficients(generate_channel_set(cfg))
    assert sc.B[0, 0, 0] == 1.0 + 0.0j


def test_scaling_matrix_layout_single_antenna_user():
    # with one user and one antenna nothing is left for phase 2; the
    # reference antenna's remaining coefficients live in column (1,1)
    cfg = make_config(3, 2, 1, 1, tau=6, rng_seed=9)
    ch = generate_channel_set(cfg)
    sc = scaling_coefficients(ch)
    assert sc.B_bar.shape == (3, 0)
    assert sc.b_bar.shape == (0,)
    r = ch.R[0, :, 0]
    assert np.allclose(sc.B[0, 1:, 0], r[1:] / r[0])


def test_scaling_matrix_layout_multiuser():
    cfg = make_config(3, 2, 2, 2, tau=17, rng_seed=12)
    ch = generate_channel_set(cfg)
    sc = scaling_coefficients(ch)
    assert sc.B_bar.shape == (3, 3)
    # column order: user 1 antenna 2, user 2 antenna 1, user 2 antenna 2
    assert np.allclose(sc.B_bar[:, 0], sc.B[0, :, 1])
    assert np.allclose(sc.B_bar[:, 1], sc.B[1, :, 0])
    assert np.allclose(sc.B_bar[:, 2], sc.B[1, :, 1])
    assert np.allclose(sc.b_bar, sc.B_bar.reshape(-1, order="F"))


def test_degenerate_reference_raises():
    cfg = make_config(3, 2, 1, 1, tau=6, rng_seed=4)
    ch = generate_channel_set(cfg)
    r = ch.R.copy()
    r[0, 0, 0] = 0.0
    broken = ChannelSet(G=ch.G, R=r, D=ch.D, q=ch.q)
    with pytest.raises(DegenerateReference):
        scaling_coefficients(broken)
