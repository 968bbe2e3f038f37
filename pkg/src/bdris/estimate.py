"""Estimators for the two-phase protocol, the LS baseline, and the NMSE metric.

Noise-free estimators are plain least-squares solves and are exact whenever
the corresponding design matrix has full column rank.  Noisy-case estimators
are LMMSE solves of the form

    x_hat = C Theta^H (Theta C Theta^H + sigma^2 I)^{-1} y,

with scaled-identity priors C; each is evaluated through whichever of the
covariance/information forms is smaller (they are algebraically identical
for an invertible prior).  All estimated channels are reassembled from the
reference block and the scaling coefficients:
Q_hat_{k,u,m} = beta_hat_{k,u,m} Q_hat_{1,1,1}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .config import SystemConfig
from .errors import (DimensionMismatch, RankDeficientPsi, RankDeficientTheta1,
                     RankDeficientTheta2, SingularRegularizedMatrix, ZeroChannel)
from .linalg import complex_gaussian, min_norm_lstsq, numerical_rank, unvec
from .sim import RxRecord, pair_difference, phase2_stack, strip_reference
from .schedule import PilotSchedule, psi1_matrix, theta1_matrix, theta2_matrix

# Calibration ensemble for the scaling-coefficient prior scale: the second
# moment of a ratio of independent CN variables diverges, so a robust median
# over a fixed-seed ensemble stands in for it.
_CALIBRATION_SEED = 987654321
_CALIBRATION_DRAWS = 10_000


@dataclass
class EstimationResult:
    q_hat: np.ndarray              # (N, M) reference block
    beta1_hat: np.ndarray          # (M-1,) reference-antenna scalings
    b_hat: np.ndarray              # (M(KU-1),) remaining scalings
    j_hat: np.ndarray              # (K, UN, M^2) reconstructed cascaded channels
    nmse: float = field(default=float("nan"))


# ---------------------------------------------------------------------------
# noise-free (exact) estimators
# ---------------------------------------------------------------------------

def estimate_reference_noisefree(diff, psi1: np.ndarray, theta: float,
                                 tx_power: float) -> np.ndarray:
    """Exact reference block from paired differences:
    Q = (sqrt(p)(e^{j theta}-1))^{-1} Ybar Psi^H (Psi Psi^H)^{-1}."""
    m = psi1.shape[0]
    if numerical_rank(psi1) < m:
        raise RankDeficientPsi("pilot/column matrix is rank deficient")
    scale = np.sqrt(tx_power) * (np.exp(1j * theta) - 1.0)
    gram = psi1 @ psi1.conj().T
    w = np.linalg.solve(gram, psi1 @ diff.ybar.conj().T)
    return w.conj().T / scale


def estimate_phase1_scalings_noisefree(ytilde1: np.ndarray,
                                       theta1: np.ndarray) -> np.ndarray:
    """Exact scaling coefficients of the reference antenna, phase-1 data."""
    x, rank = min_norm_lstsq(theta1, ytilde1)
    if rank < theta1.shape[1]:
        raise RankDeficientTheta1(
            f"phase-1 regressor rank {rank} < {theta1.shape[1]}")
    return x


def estimate_phase2_scalings_noisefree(y2: np.ndarray,
                                       theta2: np.ndarray) -> np.ndarray:
    """Exact remaining scaling coefficients from phase-2 data."""
    if theta2.shape[1] == 0:
        return np.zeros(0, dtype=complex)
    x, rank = min_norm_lstsq(theta2, y2)
    if rank < theta2.shape[1]:
        raise RankDeficientTheta2(
            f"phase-2 regressor rank {rank} < {theta2.shape[1]}")
    return x


# ---------------------------------------------------------------------------
# priors and LMMSE estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorCovariances:
    c_q: np.ndarray                # (M, M) prior for the reference block
    c_beta1: np.ndarray            # (M-1, M-1)
    c_b: np.ndarray                # (M(KU-1), M(KU-1))


@lru_cache(maxsize=1)
def _ratio_scale() -> float:
    rng = np.random.default_rng(_CALIBRATION_SEED)
    num = np.abs(complex_gaussian(rng, _CALIBRATION_DRAWS)) ** 2
    den = np.abs(complex_gaussian(rng, _CALIBRATION_DRAWS)) ** 2
    return float(np.median(num / den))


def compute_priors(cfg: SystemConfig) -> PriorCovariances:
    """Scaled-identity priors for the three LMMSE stages.

    The reference-block prior is the analytic E[Q^H Q] under the channel
    model.  Scaling-coefficient priors use the calibration-median magnitude
    of a CN ratio, scaled per user by its path-loss relative to user 1.
    """
    m, n = cfg.num_ris_elements, cfg.num_bs_antennas
    k, u = cfg.num_users, cfg.antennas_per_user
    c_q = cfg.pathloss_ur[0] * cfg.pathloss_rb * m * n * np.eye(m)
    scale = _ratio_scale()
    c_beta1 = scale * np.eye(m - 1)
    col_user = [0] * (u - 1) + [ki for ki in range(1, k) for _ in range(u)]
    col_scales = np.array([scale * cfg.pathloss_ur[ki] / cfg.pathloss_ur[0]
                           for ki in col_user])
    c_b = np.diag(np.repeat(col_scales, m)) if col_scales.size else \
        np.zeros((0, 0))
    return PriorCovariances(c_q=c_q, c_beta1=c_beta1, c_b=c_b)


def estimate_reference_lmmse(diff, psi1: np.ndarray, theta: float,
                             tx_power: float, c_q: np.ndarray,
                             noise_variance: float | None = None) -> np.ndarray:
    """LMMSE reference block:
    Q = scale^{-1} Ybar (Psi^H C_Q Psi + sigma_z^2 I)^{-1} Psi^H C_Q."""
    sigma_z2 = diff.noise_variance if noise_variance is None else noise_variance
    delta = psi1.shape[1]
    scale = np.sqrt(tx_power) * (np.exp(1j * theta) - 1.0)
    a = psi1.conj().T @ c_q @ psi1 + sigma_z2 * np.eye(delta)
    try:
        w = np.linalg.solve(a, psi1.conj().T @ c_q)
    except np.linalg.LinAlgError as exc:
        raise SingularRegularizedMatrix(
            "zero-noise LMMSE with a singular normal matrix; "
            "use the noise-free estimator") from exc
    return (diff.ybar @ w) / scale


def _lmmse_solve(theta: np.ndarray, prior: np.ndarray, noise_variance: float,
                 y: np.ndarray) -> np.ndarray:
    """Evaluate C T^H (T C T^H + s I)^{-1} y via the smaller normal matrix."""
    rows, cols = theta.shape
    if cols == 0:
        return np.zeros(0, dtype=complex)
    try:
        if rows <= cols or noise_variance == 0.0:
            gram = theta @ prior @ theta.conj().T
            gram += noise_variance * np.eye(rows)
            return prior @ (theta.conj().T @ np.linalg.solve(gram, y))
        inv_prior = np.linalg.solve(prior, np.eye(cols))
        a = theta.conj().T @ theta + noise_variance * inv_prior
        return np.linalg.solve(a, theta.conj().T @ y)
    except np.linalg.LinAlgError as exc:
        raise SingularRegularizedMatrix(str(exc)) from exc


def estimate_phase1_scalings_lmmse(ytilde1: np.ndarray, theta1_hat: np.ndarray,
                                   c_beta1: np.ndarray,
                                   noise_variance: float) -> np.ndarray:
    """LMMSE reference-antenna scalings, treating the rebuilt regressor as
    exact (the propagated reference-block error is dropped)."""
    return _lmmse_solve(theta1_hat, c_beta1, noise_variance, ytilde1)


def estimate_phase2_scalings_lmmse(y2: np.ndarray, theta2_hat: np.ndarray,
                                   c_b: np.ndarray,
                                   noise_variance: float) -> np.ndarray:
    """LMMSE remaining scalings from phase-2 data."""
    return _lmmse_solve(theta2_hat, c_b, noise_variance, y2)


# ---------------------------------------------------------------------------
# reconstruction and metric
# ---------------------------------------------------------------------------

def reconstruct_cascaded(q_hat: np.ndarray, beta1_hat: np.ndarray,
                         b_hat: np.ndarray, num_users: int,
                         antennas_per_user: int) -> np.ndarray:
    """Assemble J_hat_k = B_hat_k^T kron Q_hat with beta_{1,1,1} = 1."""
    m = q_hat.shape[1]
    k, u = num_users, antennas_per_user
    if beta1_hat.shape != (m - 1,):
        raise DimensionMismatch("beta1_hat must have M-1 entries")
    if b_hat.shape != (m * (k * u - 1),):
        raise DimensionMismatch("b_hat must have M(KU-1) entries")
    b = np.empty((k, m, u), dtype=complex)
    b[0, :, 0] = np.concatenate([[1.0], beta1_hat])
    if k * u > 1:
        b_bar = unvec(b_hat, m, k * u - 1)
        cols = iter(range(k * u - 1))
        for ui in range(1, u):
            b[0, :, ui] = b_bar[:, next(cols)]
        for ki in range(1, k):
            for ui in range(u):
                b[ki, :, ui] = b_bar[:, next(cols)]
    return np.stack([np.kron(b[ki].T, q_hat) for ki in range(k)])


def nmse(j_hat, j_true) -> float:
    """Per-user normalized squared error, averaged over users (one trial)."""
    j_hat = np.asarray(j_hat)
    j_true = np.asarray(j_true)
    if j_hat.shape != j_true.shape:
        raise DimensionMismatch("estimate/truth shapes differ")
    denom = np.linalg.norm(j_true, axis=(1, 2)) ** 2
    if np.any(denom == 0.0):
        raise ZeroChannel("a cascaded channel has zero norm")
    num = np.linalg.norm(j_hat - j_true, axis=(1, 2)) ** 2
    return float(np.mean(num / denom))


# ---------------------------------------------------------------------------
# end-to-end pipelines
# ---------------------------------------------------------------------------

def two_phase_pipeline(rx: RxRecord, cfg: SystemConfig, *, use_lmmse: bool,
                       priors: PriorCovariances | None = None) -> EstimationResult:
    """Run the full two-phase estimator on one received record.

    ``use_lmmse=False`` applies the plain least-squares (noise-free-exact)
    solves to whatever data it is given.
    """
    sched = rx.schedule
    p, theta = rx.tx_power, sched.theta
    diff = pair_difference(rx)
    psi = psi1_matrix(sched)
    if use_lmmse:
        if priors is None:
            priors = compute_priors(cfg)
        q_hat = estimate_reference_lmmse(diff, psi, theta, p, priors.c_q)
    else:
        q_hat = estimate_reference_noisefree(diff, psi, theta, p)

    ytilde = strip_reference(rx, q_hat)
    th1 = theta1_matrix(q_hat, sched, p)
    if use_lmmse:
        beta1 = estimate_phase1_scalings_lmmse(ytilde, th1, priors.c_beta1,
                                               rx.noise_variance)
    else:
        beta1 = estimate_phase1_scalings_noisefree(ytilde, th1)

    y2 = phase2_stack(rx)
    th2 = theta2_matrix(q_hat, sched, p)
    if use_lmmse:
        b_hat = estimate_phase2_scalings_lmmse(y2, th2, priors.c_b,
                                               rx.noise_variance)
    else:
        b_hat = estimate_phase2_scalings_noisefree(y2, th2)

    j_hat = reconstruct_cascaded(q_hat, beta1, b_hat, cfg.num_users,
                                 cfg.antennas_per_user)
    return EstimationResult(q_hat=q_hat, beta1_hat=beta1, b_hat=b_hat,
                            j_hat=j_hat)


def ls_baseline(rx: RxRecord, schedule: PilotSchedule | None = None,
                tx_power: float | None = None) -> np.ndarray:
    """Direct per-user least squares on all KUM^2 cascaded unknowns.

    Requires orthogonal-time pilots (one active user per instant).  Each BS
    antenna row solves the same stacked system; under-determined systems
    return the minimum-norm solution.
    """
    sched = rx.schedule if schedule is None else schedule
    p = rx.tx_power if tx_power is None else tx_power
    t, n = rx.y.shape
    m = sched.num_ris_elements
    k, u = sched.num_users, sched.antennas_per_user
    active = np.abs(sched.pilots).sum(axis=2) > 0      # (T, K)
    if np.any(active.sum(axis=1) > 1):
        raise ValueError("baseline requires orthogonal-time user pilots")
    j_hat = np.zeros((k, u * n, m * m), dtype=complex)
    phi_vecs = sched.scattering.transpose(0, 2, 1).reshape(t, m * m)
    for ki in range(k):
        idx = np.nonzero(active[:, ki])[0]
        a = (sched.pilots[idx, ki, :, None] * phi_vecs[idx, None, :])
        a = np.sqrt(p) * a.reshape(len(idx), u * m * m)
        x, _ = min_norm_lstsq(a, rx.y[idx])
        for ui in range(u):
            j_hat[ki, ui * n:(ui + 1) * n, :] = \
                x[ui * m * m:(ui + 1) * m * m, :].T
    return j_hat
