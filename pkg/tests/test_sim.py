"""Receive-signal synthesis, pair differencing, reference stripping."""
import numpy as np
import pytest

from bdris.channel import build_cascaded, generate_channel_set, reference_block
from bdris.config import make_config
from bdris.errors import DimensionMismatch, PhasePairingViolation
from bdris.linalg import vec
from bdris.schedule import (PilotSchedule, Tag, build_schedule, ls_schedule,
                            theta1_matrix)
from bdris.sim import pair_difference, strip_reference, synthesize_rx
from bdris.channel import scaling_coefficients


def _identity_schedule(m, n_instants, pilot=1.0):
    scattering = np.broadcast_to(np.eye(m, dtype=complex),
                                 (n_instants, m, m)).copy()
    pilots = np.full((n_instants, 1, 1), pilot, dtype=complex)
    tags = np.full(n_instants, Tag.PHASE1_FIRST_HALF, dtype=np.int8)
    return PilotSchedule(scattering=scattering, pilots=pilots, tags=tags)


def test_identity_scattering_special_case():
    cfg = make_config(3, 2, 1, 1, tau=6, noise_variance=0.0, rng_seed=0)
    ch = generate_channel_set(cfg)
    rx = synthesize_rx(ch, _identity_schedule(3, 1), cfg, np.random.default_rng(0))
    want = np.sqrt(cfg.tx_power) * ch.G @ ch.R[0, :, 0]
    assert np.allclose(rx.y[0], want)


@pytest.mark.parametrize("seed", range(4))
def test_physical_form_matches_vectorized_form(seed):
    cfg = make_config(4, 3, 2, 2, tau=23, noise_variance=0.0, rng_seed=seed)
    ch = generate_channel_set(cfg)
    sched = build_schedule(cfg, np.random.default_rng(seed + 50))
    rx = synthesize_rx(ch, sched, cfg, np.random.default_rng(0))
    j = build_cascaded(ch)
    for t in range(len(sched)):
        phibar = vec(sched.scattering[t])
        # oracle: the kron(a^T, I_N) J vec(Phi) form, summed over users
        want = sum(np.sqrt(cfg.tx_power)
                   * (np.kron(sched.pilots[t, k][None, :], np.eye(3)) @ (j[k] @ phibar))
                   for k in range(2))
        assert np.linalg.norm(rx.y[t] - want) <= 1e-12 * np.linalg.norm(want)


def test_noise_covariance_scale():
    cfg = make_config(2, 4, 1, 1, tau=4, noise_variance=0.3, rng_seed=1)
    ch = generate_channel_set(cfg)
    sched = _identity_schedule(2, 100_000, pilot=0.0)   # silent user: pure noise
    rx = synthesize_rx(ch, sched, cfg, np.random.default_rng(2))
    cov_trace = np.mean(np.sum(np.abs(rx.y) ** 2, axis=1))
    assert abs(cov_trace - 4 * 0.3) < 0.05 * 4 * 0.3


def test_pair_difference_matches_reference_column_model():
    cfg = make_config(6, 4, 1, 2, tau=20, noise_variance=0.0,
                      phase_theta=1.1, rng_seed=3)
    ch = generate_channel_set(cfg)
    sched = build_schedule(cfg, np.random.default_rng(4))
    rx = synthesize_rx(ch, sched, cfg, np.random.default_rng(5))
    diff = pair_difference(rx)
    q111 = reference_block(ch)
    a = sched.pilots[sched.instants(Tag.PHASE1_FIRST_HALF), 0, 0]
    scale = np.sqrt(cfg.tx_power) * (np.exp(1.1j) - 1)
    for t in range(cfg.delta):
        want = scale * a[t] * q111 @ sched.scattering[t][:, 0]
        assert np.linalg.norm(diff.ybar[:, t] - want) <= 1e-12 * np.linalg.norm(want)


def test_pair_difference_vanishes_as_theta_goes_to_zero():
    cfg = make_config(4, 3, 1, 1, tau=8, noise_variance=0.0,
                      phase_theta=1e-9, rng_seed=6)
    ch = generate_channel_set(cfg)
    sched = build_schedule(cfg, np.random.default_rng(7))
    rx = synthesize_rx(ch, sched, cfg, np.random.default_rng(8))
    diff = pair_difference(rx)
    assert np.linalg.norm(diff.ybar) <= 1e-6 * np.linalg.norm(rx.y)


def test_pair_difference_noise_doubling():
    # zero channel: differences are pure noise with variance 2 sigma^2
    sigma2 = 0.05
    cfg = make_config(2, 1, 1, 1, tau=4, noise_variance=sigma2, rng_seed=9)
    ch = generate_channel_set(cfg)
    zero = type(ch)(G=np.zeros_like(ch.G), R=ch.R, D=ch.D, q=0)
    delta = 50_000
    scattering = np.broadcast_to(np.eye(2, dtype=complex),
                                 (2 * delta, 2, 2)).copy()
    pilots = np.ones((2 * delta, 1, 1), dtype=complex)
    tags = np.concatenate([np.full(delta, Tag.PHASE1_FIRST_HALF, np.int8),
                           np.full(delta, Tag.PHASE1_SECOND_HALF, np.int8)])
    sched = PilotSchedule(scattering=scattering, pilots=pilots, tags=tags,
                          delta=delta)
    rx = synthesize_rx(zero, sched, cfg, np.random.default_rng(10))
    diff = pair_difference(rx)
    got = np.mean(np.abs(diff.ybar) ** 2)
    assert diff.noise_variance == 2 * sigma2
    assert abs(got - 2 * sigma2) < 0.05 * 2 * sigma2


def test_pair_difference_requires_phase1_tags():
    cfg = make_config(3, 2, 1, 1, tau=6, rng_seed=11)
    ch = generate_channel_set(cfg)
    sched = ls_schedule(3, 1, 1, 6, np.random.default_rng(12))
    rx = synthesize_rx(ch, sched, cfg, np.random.default_rng(13))
    with pytest.raises(PhasePairingViolation):
        pair_difference(rx)


def test_strip_reference_reveals_scaling_regressor():
    cfg = make_config(5, 3, 1, 1, tau=10, noise_variance=0.0, rng_seed=14)
    ch = generate_channel_set(cfg)
    sched = build_schedule(cfg, np.random.default_rng(15))
    rx = synthesize_rx(ch, sched, cfg, np.random.default_rng(16))
    q111 = reference_block(ch)
    ytilde = strip_reference(rx, q111)
    theta1 = theta1_matrix(q111, sched, cfg.tx_power)
    beta1 = scaling_coefficients(ch).B[0, 1:, 0]
    want = theta1 @ beta1
    assert np.linalg.norm(ytilde - want) <= 1e-12 * np.linalg.norm(want)


def test_strip_reference_single_element_leaves_nothing():
    cfg = make_config(1, 2, 1, 1, tau=2, noise_variance=0.0, rng_seed=17)
    ch = generate_channel_set(cfg)
    sched = build_schedule(cfg, np.random.default_rng(18))
    rx = synthesize_rx(ch, sched, cfg, np.random.default_rng(19))
    ytilde = strip_reference(rx, reference_block(ch))
    assert np.linalg.norm(ytilde) <= 1e-14


def test_strip_reference_perturbation_bound():
    cfg = make_config(4, 3, 1, 1, tau=8, noise_variance=0.0, rng_seed=20)
    ch = generate_channel_set(cfg)
    sched = build_schedule(cfg, np.random.default_rng(21))
    rx = synthesize_rx(ch, sched, cfg, np.random.default_rng(22))
    q111 = reference_block(ch)
    err = 1e-3 * np.linalg.norm(q111) * np.eye(3, 4)
    base = strip_reference(rx, q111)
    perturbed = strip_reference(rx, q111 + err)
    first = sched.instants(Tag.PHASE1_FIRST_HALF)
    a_max = np.abs(sched.pilots[first, 0, 0]).max()
    bound = (np.sqrt(cfg.tx_power) * a_max * np.linalg.norm(err, 2)
             * 1.0 * np.sqrt(len(first)))
    assert np.linalg.norm(perturbed - base) <= bound + 1e-12


def test_strip_reference_shape_check():
    cfg = make_config(3, 2, 1, 1, tau=6, rng_seed=23)
    ch = generate_channel_set(cfg)
    sched = build_schedule(cfg, np.random.default_rng(24))
    rx = synthesize_rx(ch, sched, cfg, np.random.default_rng(25))
    with pytest.raises(DimensionMismatch):
        strip_reference(rx, np.zeros((3, 3)))


def test_synthesis_determinism_and_dimension_checks():
    cfg = make_config(3, 2, 1, 1, tau=6, rng_seed=26)
    ch = generate_channel_set(cfg)
    sched = build_schedule(cfg, np.random.default_rng(27))
    a = synthesize_rx(ch, sched, cfg, np.random.default_rng(1))
    b = synthesize_rx(ch, sched, cfg, np.random.default_rng(1))
    assert np.array_equal(a.y, b.y)
    wrong = make_config(4, 2, 1, 1, tau=8, rng_seed=28)
    with pytest.raises(DimensionMismatch):
        synthesize_rx(generate_channel_set(wrong), sched, wrong,
                      np.random.default_rng(2))
