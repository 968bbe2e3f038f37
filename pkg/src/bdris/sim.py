"""Received-signal synthesis and the conditioning steps feeding the estimators.

The synthesized record already has the known direct-channel contribution
removed, so each receive vector is

    y_t = sum_k sqrt(p) G Phi_t R_k a_{k,t} + n_t,    n_t ~ CN(0, sigma^2 I).

Synthesis uses this physical product form; the equivalent vectorized form
sum_k sqrt(p) (a_{k,t}^T kron I_N) J_k vec(Phi_t) serves as the test oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .config import SystemConfig
from .errors import DimensionMismatch, PhasePairingViolation
from .linalg import complex_gaussian
from .schedule import PilotSchedule, Tag


@dataclass(frozen=True)
class RxRecord:
    """Effective received vectors for a whole schedule, one row per instant."""

    y: np.ndarray                  # (T, N)
    noise_variance: float
    tx_power: float
    schedule: PilotSchedule
    seed: int | None = None


@dataclass(frozen=True)
class DiffRecord:
    """Column-stacked paired differences y_{delta+t} - y_t of phase 1.

    Differencing cancels everything but the first-element column and doubles
    the noise variance.
    """

    ybar: np.ndarray               # (N, delta)
    noise_variance: float          # 2 sigma^2


def synthesize_rx(channels: ChannelSet, schedule: PilotSchedule,
                  cfg: SystemConfig, rng: np.random.Generator,
                  seed: int | None = None) -> RxRecord:
    """Simulate the BS-side effective receive vectors under a schedule."""
    n, m = channels.G.shape
    if schedule.num_ris_elements != m:
        raise DimensionMismatch("schedule and channels disagree on M")
    if (schedule.num_users != channels.num_users
            or schedule.antennas_per_user != channels.antennas_per_user):
        raise DimensionMismatch("schedule and channels disagree on users/antennas")
    if cfg.num_bs_antennas != n:
        raise DimensionMismatch("config and channels disagree on N")
    # sum_k R_k a_{k,t} collapses the users before the M x M products
    v = np.einsum("kmu,tku->tm", channels.R, schedule.pilots)
    w = np.einsum("tij,tj->ti", schedule.scattering, v)
    y = np.sqrt(cfg.tx_power) * (w @ channels.G.T)
    if cfg.noise_variance > 0:
        y = y + complex_gaussian(rng, y.shape, var=cfg.noise_variance)
    return RxRecord(y=y, noise_variance=cfg.noise_variance,
                    tx_power=cfg.tx_power, schedule=schedule, seed=seed)


def pair_difference(rx: RxRecord, delta: int | None = None) -> DiffRecord:
    """Subtract each first-half receive vector from its phase-rotated twin."""
    sched = rx.schedule
    first = sched.instants(Tag.PHASE1_FIRST_HALF)
    second = sched.instants(Tag.PHASE1_SECOND_HALF)
    if delta is None:
        delta = sched.delta if sched.delta is not None else len(first)
    if len(first) != delta or len(second) != delta or delta == 0:
        raise PhasePairingViolation("record does not carry paired phase-1 halves")
    ybar = (rx.y[second] - rx.y[first]).T
    return DiffRecord(ybar=ybar, noise_variance=2.0 * rx.noise_variance)


def strip_reference(rx: RxRecord, q_hat: np.ndarray,
                    schedule: PilotSchedule | None = None,
                    delta: int | None = None) -> np.ndarray:
    """Remove the first reflecting element's contribution from phase-1 data.

    Returns the stacked vector [y_1 - sqrt(p) a_1 Q phi_{1,1}; ...] over the
    first half, which is linear in the remaining scaling coefficients.
    """
    sched = rx.schedule if schedule is None else schedule
    first = sched.instants(Tag.PHASE1_FIRST_HALF)
    if delta is not None:
        first = first[:delta]
    n, m = rx.y.shape[1], sched.num_ris_elements
    if q_hat.shape != (n, m):
        raise DimensionMismatch(f"expected a {(n, m)} reference block")
    a = sched.pilots[first, 0, 0]
    ref = a[:, None] * (sched.scattering[first, :, 0] @ q_hat.T)
    return (rx.y[first] - np.sqrt(rx.tx_power) * ref).ravel()


def phase2_stack(rx: RxRecord) -> np.ndarray:
    """All phase-2 receive vectors stacked into one column."""
    idx = rx.schedule.instants(Tag.PHASE2_MINIMAL, Tag.PHASE2_EXTRA)
    return rx.y[idx].ravel()
