"""Scattering-matrix and pilot schedules for the two-phase estimation stage.

Every instant applies one unitary M x M scattering matrix at the BD-RIS
(the circuit constraint forbids switching individual elements off) and one
K x U pilot matrix at the users.  Phase 1 comes in two paired halves: the
second half repeats the first except that the first scattering column is
rotated by e^{j theta}, so subtracting paired receive vectors isolates the
contribution of RIS element 1.  Phase 2 reuses rows of a fixed unitary in a
circularly-shifted pattern, with on/off pilots assigned by a northwest-corner
allocation, which makes the stacked phase-2 regressor full rank at the
minimum possible length.
"""
from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np
from scipy.linalg import dft, null_space

from .config import SystemConfig, min_phase2_len
from .errors import (InfeasibleAllocation, InsufficientPhase2Length,
                     ScheduleRankFailure)
from .linalg import complex_gaussian, numerical_rank

_MAX_RETRIES = 8


class Tag(IntEnum):
    PHASE1_FIRST_HALF = 0
    PHASE1_SECOND_HALF = 1
    PHASE2_MINIMAL = 2
    PHASE2_EXTRA = 3
    BASELINE = 4


@dataclass(frozen=True)
class PilotSchedule:
    """Scattering matrices and pilots for a run of instants.

    ``scattering[t]`` is the unitary applied at instant t, ``pilots[t]`` the
    K x U pilot matrix, ``tags[t]`` a :class:`Tag` value.  Fragment builders
    fill the metadata they own; concatenation merges it.
    """

    scattering: np.ndarray            # (T, M, M) complex
    pilots: np.ndarray                # (T, K, U) complex
    tags: np.ndarray                  # (T,) int8
    theta: float | None = None        # phase-1 pairing shift
    delta: int | None = None          # phase-1 half length
    base_phase1: np.ndarray | None = None
    base_phase2: np.ndarray | None = None
    aux_alloc: np.ndarray | None = None   # northwest-corner matrix

    def __len__(self) -> int:
        return self.scattering.shape[0]

    @property
    def num_ris_elements(self) -> int:
        return self.scattering.shape[1]

    @property
    def num_users(self) -> int:
        return self.pilots.shape[1]

    @property
    def antennas_per_user(self) -> int:
        return self.pilots.shape[2]

    def instants(self, *tags: Tag) -> np.ndarray:
        """Indices of instants carrying any of the given tags."""
        wanted = np.isin(self.tags, [int(t) for t in tags])
        return np.nonzero(wanted)[0]

    def ref_pilot(self) -> np.ndarray:
        """Pilot of user 1, antenna 1 at every instant."""
        return self.pilots[:, 0, 0]

    def phase2_pilot_rows(self) -> np.ndarray:
        """Stacked pilot vectors of all antennas except (user 1, antenna 1)."""
        idx = self.instants(Tag.PHASE2_MINIMAL, Tag.PHASE2_EXTRA)
        return self.pilots[idx].reshape(len(idx), -1)[:, 1:]


def concat_schedules(first: PilotSchedule, second: PilotSchedule) -> PilotSchedule:
    def pick(a, b):
        return a if a is not None else b
    return PilotSchedule(
        scattering=np.concatenate([first.scattering, second.scattering]),
        pilots=np.concatenate([first.pilots, second.pilots]),
        tags=np.concatenate([first.tags, second.tags]),
        theta=pick(first.theta, second.theta),
        delta=pick(first.delta, second.delta),
        base_phase1=pick(first.base_phase1, second.base_phase1),
        base_phase2=pick(first.base_phase2, second.base_phase2),
        aux_alloc=pick(first.aux_alloc, second.aux_alloc),
    )


# ---------------------------------------------------------------------------
# unitary generators
# ---------------------------------------------------------------------------

def haar_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix.

    The R-factor's diagonal phases are folded into Q, which makes the
    distribution exactly Haar rather than merely unitary.
    """
    return haar_stack(m, 1, rng)[0]


def haar_stack(m: int, count: int, rng: np.random.Generator) -> np.ndarray:
    z = complex_gaussian(rng, (count, m, m))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def dft_unitary(m: int) -> np.ndarray:
    """Normalized DFT matrix: the deterministic default base unitary."""
    return dft(m) / np.sqrt(m)


def minimal_phase1_unitaries(m: int, q: int, base: np.ndarray,
                             rng: np.random.Generator) -> list[np.ndarray]:
    """Shortest unitary family whose leading rows walk through rows of ``base``.

    Returns ceil((M-1)/q) unitaries.  Matrix t pins rows (t-1)q+1 .. tq of
    ``base`` as its first rows (the last matrix pins the remaining
    M-1 - floor((M-1)/q)*q rows); the rest of each matrix is a random
    orthonormal completion that leaves the pinned rows untouched.  Together
    the pinned rows cover rows 1..M-1 of ``base``, which is what makes the
    stacked phase-1 regressor full rank even when the BS sees only q
    independent directions per instant.
    """
    if not 1 <= q <= m:
        raise ValueError("need 1 <= q <= M")
    eps = (m - 1) // q
    rho = (m - 1) - eps * q
    pinned_counts = [q] * eps + ([rho] if rho else [])
    out = []
    start = 0
    for count in pinned_counts:
        pinned = base[start:start + count]
        start += count
        comp = null_space(pinned)                       # (M, M-count), orthonormal
        mix = haar_stack(m - count, 1, rng)[0] if count < m else None
        rest = (comp @ mix).conj().T if mix is not None else np.zeros((0, m))
        out.append(np.vstack([pinned, rest]))
    return out


# ---------------------------------------------------------------------------
# phase 1
# ---------------------------------------------------------------------------

def _phase1_attempt(m, theta, delta, base, rng, num_users, antennas_per_user):
    scattering = np.empty((2 * delta, m, m), dtype=complex)
    ref_pilot = np.empty(delta, dtype=complex)
    n_min = min(m, delta)
    # instants 1..M: cyclic column rotations of the base unitary, so the
    # first columns sweep all M base columns and Psi_1 reaches rank M
    cols = (np.arange(m)[None, :] + np.arange(n_min)[:, None]) % m
    scattering[:n_min] = base[:, cols].transpose(1, 0, 2)
    ref_pilot[:n_min] = 1.0
    if delta > m:
        scattering[m:delta] = haar_stack(m, delta - m, rng)
        ref_pilot[m:delta] = complex_gaussian(rng, (delta - m,))
    # paired second half: same matrices with the first column rotated
    scattering[delta:] = scattering[:delta]
    scattering[delta:, :, 0] *= np.exp(1j * theta)
    pilots = np.zeros((2 * delta, num_users, antennas_per_user), dtype=complex)
    pilots[:delta, 0, 0] = ref_pilot
    pilots[delta:, 0, 0] = ref_pilot
    tags = np.concatenate([np.full(delta, Tag.PHASE1_FIRST_HALF, dtype=np.int8),
                           np.full(delta, Tag.PHASE1_SECOND_HALF, dtype=np.int8)])
    return PilotSchedule(scattering=scattering, pilots=pilots, tags=tags,
                         theta=theta, delta=delta, base_phase1=base)


def phase1_schedule(m: int, q: int, theta: float, delta: int,
                    rng: np.random.Generator, *, num_users: int = 1,
                    antennas_per_user: int = 1,
                    base: np.ndarray | None = None,
                    max_retries: int = _MAX_RETRIES) -> PilotSchedule:
    """Paired phase-1 fragment of 2*delta instants.

    Only user 1, antenna 1 transmits.  Construction is verified against a
    random rank-q probe: the pilot/column matrix must reach rank M and the
    scaling-coefficient regressor rank M-1.  On failure the base unitary is
    re-randomized, up to ``max_retries`` times.
    """
    if delta < m:
        raise ValueError("phase-1 half length must be at least M")
    if not 0.0 < theta < 2.0 * np.pi:
        raise ValueError("theta must lie strictly inside (0, 2pi)")
    if not 1 <= q <= m:
        raise ScheduleRankFailure(f"unusable rank budget q={q} for M={m}")
    attempt_base = dft_unitary(m) if base is None else np.asarray(base)
    for _ in range(max_retries + 1):
        frag = _phase1_attempt(m, theta, delta, attempt_base, rng,
                               num_users, antennas_per_user)
        probe = complex_gaussian(rng, (q, m))
        if (numerical_rank(psi1_matrix(frag)) == m
                and numerical_rank(theta1_matrix(probe, frag)) == m - 1):
            return frag
        attempt_base = haar_unitary(m, rng)
    raise ScheduleRankFailure("phase-1 design ranks not reached after retries")


# ---------------------------------------------------------------------------
# phase 2
# ---------------------------------------------------------------------------

def northwest_corner(tau2: int, q: int, m: int, u_tilde: int) -> np.ndarray:
    """Greedy feasible allocation of q supplies/row to M demands/column.

    Marches from the top-left cell, assigning min(remaining supply,
    remaining demand) and advancing whichever is exhausted.  Columns always
    sum to exactly M; rows sum to q until the demand runs out.
    """
    if tau2 * q < m * u_tilde:
        raise InfeasibleAllocation(
            f"supply {tau2}*{q} cannot cover demand {m}*{u_tilde}")
    alloc = np.zeros((tau2, u_tilde), dtype=int)
    supply = np.full(tau2, q)
    demand = np.full(u_tilde, m)
    i = j = 0
    while i < tau2 and j < u_tilde:
        grant = min(supply[i], demand[j])
        alloc[i, j] = grant
        supply[i] -= grant
        demand[j] -= grant
        if supply[i] == 0:
            i += 1
        elif demand[j] == 0:
            j += 1
    return alloc


def _phase2_attempt(m, q, num_users, antennas_per_user, tau2, base, rng):
    u_tilde = num_users * antennas_per_user - 1
    t2_min = -(-m * u_tilde // q)
    alloc = northwest_corner(t2_min, q, m, u_tilde) if u_tilde else None
    scattering = np.empty((tau2, m, m), dtype=complex)
    bar_pilots = np.zeros((tau2, u_tilde), dtype=complex)
    n_struct = min(t2_min, tau2)
    for t in range(n_struct):
        # rows of the base unitary, left-rotated by (t*q mod M): consecutive
        # instants pick up where the previous row allocation stopped
        order = np.roll(np.arange(m), -((t * q) % m))
        scattering[t] = base[order, :]
        bar_pilots[t] = alloc[t] != 0
    if tau2 > n_struct:
        scattering[n_struct:] = haar_stack(m, tau2 - n_struct, rng)
        bar_pilots[n_struct:] = complex_gaussian(rng, (tau2 - n_struct, u_tilde))
    pilots = np.zeros((tau2, num_users * antennas_per_user), dtype=complex)
    pilots[:, 1:] = bar_pilots                      # user 1 antenna 1 stays silent
    pilots = pilots.reshape(tau2, num_users, antennas_per_user)
    tags = np.concatenate([np.full(n_struct, Tag.PHASE2_MINIMAL, dtype=np.int8),
                           np.full(tau2 - n_struct, Tag.PHASE2_EXTRA, dtype=np.int8)])
    return PilotSchedule(scattering=scattering, pilots=pilots, tags=tags,
                         base_phase2=base, aux_alloc=alloc)


def phase2_schedule(m: int, q: int, num_users: int, antennas_per_user: int,
                    tau2: int, rng: np.random.Generator, *,
                    base: np.ndarray | None = None,
                    max_retries: int = _MAX_RETRIES) -> PilotSchedule:
    """Phase-2 fragment of tau2 instants.

    The first ceil(M(KU-1)/q) instants use the circular-shift row design with
    on/off pilots from the northwest-corner allocation; any surplus instants
    use Haar scattering with CN(0,1) pilots on all antennas but the reference
    one.  Verified to give a full-rank stacked regressor against a random
    rank-q probe, re-randomizing the base unitary on failure.
    """
    u_tilde = num_users * antennas_per_user - 1
    t2_min = -(-m * u_tilde // q)
    if tau2 < t2_min:
        raise InsufficientPhase2Length(f"tau2={tau2} below minimum {t2_min}")
    attempt_base = dft_unitary(m) if base is None else np.asarray(base)
    for _ in range(max_retries + 1):
        frag = _phase2_attempt(m, q, num_users, antennas_per_user, tau2,
                               attempt_base, rng)
        if u_tilde == 0 or tau2 == 0:
            return frag
        probe = complex_gaussian(rng, (q, m))
        if numerical_rank(theta2_matrix(probe, frag)) == m * u_tilde:
            return frag
        attempt_base = haar_unitary(m, rng)
    raise ScheduleRankFailure("phase-2 design rank not reached after retries")


# ---------------------------------------------------------------------------
# whole-stage composition, baseline schedule, overhead
# ---------------------------------------------------------------------------

def build_schedule(cfg: SystemConfig, rng: np.random.Generator) -> PilotSchedule:
    """Full estimation-stage schedule for a config: phase 1 then phase 2."""
    m, q = cfg.num_ris_elements, cfg.rank_q
    frag = phase1_schedule(m, q, cfg.phase_theta, cfg.delta, rng,
                           num_users=cfg.num_users,
                           antennas_per_user=cfg.antennas_per_user)
    if cfg.tau2 > 0:
        frag2 = phase2_schedule(m, q, cfg.num_users, cfg.antennas_per_user,
                                cfg.tau2, rng)
        frag = concat_schedules(frag, frag2)
    return frag


def ls_schedule(m: int, num_users: int, antennas_per_user: int, tau: int,
                rng: np.random.Generator) -> PilotSchedule:
    """Baseline schedule: users take turns in contiguous time slots.

    Haar scattering at every instant; the active user transmits CN(0,1)
    pilots on all its antennas, everyone else is silent.
    """
    scattering = haar_stack(m, tau, rng)
    pilots = np.zeros((tau, num_users, antennas_per_user), dtype=complex)
    bounds = np.linspace(0, tau, num_users + 1).astype(int)
    for k in range(num_users):
        span = bounds[k + 1] - bounds[k]
        pilots[bounds[k]:bounds[k + 1], k, :] = \
            complex_gaussian(rng, (span, antennas_per_user))
    tags = np.full(tau, Tag.BASELINE, dtype=np.int8)
    return PilotSchedule(scattering=scattering, pilots=pilots, tags=tags)


MinOverhead = namedtuple("MinOverhead", ["tau1", "tau2", "total"])


def min_overhead(m: int, n: int, k: int, u: int) -> MinOverhead:
    """Fewest instants for exact noise-free recovery: 2M + ceil(M(KU-1)/q)."""
    if min(m, n, k, u) < 1:
        raise ValueError("dimensions must be positive")
    tau2 = min_phase2_len(m, n, k, u)
    return MinOverhead(2 * m, tau2, 2 * m + tau2)


# ---------------------------------------------------------------------------
# regressor matrices derived from a schedule
# ---------------------------------------------------------------------------

def psi1_matrix(schedule: PilotSchedule) -> np.ndarray:
    """M x delta matrix of pilot-scaled first scattering columns, first half."""
    idx = schedule.instants(Tag.PHASE1_FIRST_HALF)
    a = schedule.pilots[idx, 0, 0]
    return (schedule.scattering[idx, :, 0] * a[:, None]).T


def theta1_matrix(q_mat: np.ndarray, schedule: PilotSchedule,
                  tx_power: float = 1.0) -> np.ndarray:
    """Stacked phase-1 regressor for the reference user's scaling coefficients.

    Rows N*(t-1)..N*t hold sqrt(p) a_t Q [phi_{2,t} .. phi_{M,t}].
    """
    idx = schedule.instants(Tag.PHASE1_FIRST_HALF)
    a = schedule.pilots[idx, 0, 0]
    blocks = np.einsum("nm,tmj->tnj", q_mat, schedule.scattering[idx, :, 1:])
    blocks = blocks * (np.sqrt(tx_power) * a)[:, None, None]
    n = q_mat.shape[0]
    return blocks.reshape(len(idx) * n, schedule.num_ris_elements - 1)


def theta2_matrix(q_mat: np.ndarray, schedule: PilotSchedule,
                  tx_power: float = 1.0,
                  n_instants: int | None = None) -> np.ndarray:
    """Stacked phase-2 regressor: rows sqrt(p) abar_t^T kron (Q Phi_t).

    ``n_instants`` truncates to the first so-many phase-2 instants, which is
    how rank sharpness below the minimum length is probed.
    """
    idx = schedule.instants(Tag.PHASE2_MINIMAL, Tag.PHASE2_EXTRA)
    if n_instants is not None:
        idx = idx[:n_instants]
    m = schedule.num_ris_elements
    u_tilde = schedule.num_users * schedule.antennas_per_user - 1
    n = q_mat.shape[0]
    if len(idx) == 0 or u_tilde == 0:
        return np.zeros((len(idx) * n, m * u_tilde), dtype=complex)
    bar = schedule.pilots[idx].reshape(len(idx), -1)[:, 1:]
    qphi = np.einsum("nm,tmj->tnj", q_mat, schedule.scattering[idx])
    blocks = np.sqrt(tx_power) * bar[:, None, :, None] * qphi[:, :, None, :]
    return blocks.reshape(len(idx) * n, u_tilde * m)
