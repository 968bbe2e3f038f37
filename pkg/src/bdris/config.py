"""System configuration for the BD-RIS assisted MU-MIMO uplink simulator.

Scenario: a BS with N antennas, one fully-connected BD-RIS with M passive
elements (scattering matrix constrained to be unitary), and K users with U
antennas each.  The estimation stage spans tau1 + tau2 pilot instants split
into two phases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts * 1000.0)


def pathloss_linear(distance_m: float, exponent: float,
                    ref_gain_db: float = -30.0, ref_distance_m: float = 1.0) -> float:
    """Distance power law: gain = g0 * (d / d0)^(-alpha), g0 given in dB."""
    return 10.0 ** (ref_gain_db / 10.0) * (distance_m / ref_distance_m) ** (-exponent)


# Link-budget defaults: 33 dBm transmit power; -169 dBm/Hz noise PSD over
# 1 MHz bandwidth; users 10 m from the RIS (exponent 2.8), RIS 50 m from
# the BS (exponent 2.2).  Direct user-BS paths are carried but never
# estimated, so their gain only needs to be plausible.
DEFAULT_TX_POWER_W = dbm_to_watts(33.0)
DEFAULT_NOISE_VAR_W = dbm_to_watts(-169.0 + 10.0 * math.log10(1e6))
DEFAULT_PATHLOSS_UR = pathloss_linear(10.0, 2.8)
DEFAULT_PATHLOSS_RB = pathloss_linear(50.0, 2.2)
DEFAULT_PATHLOSS_DIRECT = pathloss_linear(60.0, 3.5)
DEFAULT_THETA = math.pi


def min_phase2_len(m: int, n: int, k: int, u: int) -> int:
    """ceil(M (KU-1) / q) with q = min(M, N): full-rank minimum for phase 2."""
    q = min(m, n)
    return -(-m * (k * u - 1) // q)


@dataclass(frozen=True)
class SystemConfig:
    """Immutable scenario description; all powers and gains are linear watts."""

    num_bs_antennas: int                 # N
    num_ris_elements: int                # M
    num_users: int                       # K
    antennas_per_user: int               # U
    tau1: int                            # phase-1 length, even, >= 2M
    tau2: int                            # phase-2 length, >= ceil(M(KU-1)/q)
    tx_power: float = DEFAULT_TX_POWER_W
    noise_variance: float = DEFAULT_NOISE_VAR_W
    phase_theta: float = DEFAULT_THETA   # pairing phase shift, in (0, 2pi)
    pathloss_ur: tuple = ()              # per-user user->RIS gain, length K
    pathloss_rb: float = DEFAULT_PATHLOSS_RB
    pathloss_direct: float = DEFAULT_PATHLOSS_DIRECT
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.num_bs_antennas, self.num_ris_elements,
               self.num_users, self.antennas_per_user) < 1:
            raise ValueError("all dimensions must be positive")
        if not self.pathloss_ur:
            object.__setattr__(self, "pathloss_ur",
                               (DEFAULT_PATHLOSS_UR,) * self.num_users)
        if len(self.pathloss_ur) != self.num_users:
            raise ValueError("pathloss_ur must have one entry per user")
        if min(self.pathloss_ur) <= 0 or self.pathloss_rb <= 0 or self.pathloss_direct <= 0:
            raise ValueError("path-loss gains must be strictly positive")
        if self.tx_power <= 0:
            raise ValueError("tx_power must be strictly positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")
        if not 0.0 < self.phase_theta < 2.0 * math.pi:
            raise ValueError("phase_theta must lie strictly inside (0, 2pi)")
        if self.tau1 % 2 != 0 or self.tau1 < 2 * self.num_ris_elements:
            raise ValueError("tau1 must be even and at least 2M")
        if self.tau2 < self.min_tau2:
            raise ValueError("tau2 below the full-rank minimum ceil(M(KU-1)/q)")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must fit in 64 unsigned bits")

    # -- derived quantities ------------------------------------------------

    @property
    def rank_q(self) -> int:
        return min(self.num_ris_elements, self.num_bs_antennas)

    @property
    def delta(self) -> int:
        return self.tau1 // 2

    @property
    def tau(self) -> int:
        return self.tau1 + self.tau2

    @property
    def min_tau2(self) -> int:
        return min_phase2_len(self.num_ris_elements, self.num_bs_antennas,
                              self.num_users, self.antennas_per_user)

    @property
    def min_tau(self) -> int:
        return 2 * self.num_ris_elements + self.min_tau2

    def with_lengths(self, tau1: int, tau2: int) -> "SystemConfig":
        return replace(self, tau1=tau1, tau2=tau2)


def split_lengths(m: int, n: int, k: int, u: int, tau: int, rho: float):
    """Split a total pilot budget into (tau1, tau2).

    The minimum 2M + ceil(M(KU-1)/q) is always granted; a fraction ``rho``
    of the surplus goes to phase 1, rounded down to an even instant count
    (phase-1 halves must match).  With a single user antenna phase 2 carries
    no unknowns, so the whole surplus goes to phase 1.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    t2min = min_phase2_len(m, n, k, u)
    surplus = tau - (2 * m + t2min)
    if surplus < 0:
        raise ValueError(f"tau={tau} below the minimum {2 * m + t2min}")
    if k * u == 1:
        extra1 = 2 * (surplus // 2)
    else:
        extra1 = 2 * int(rho * surplus / 2)
    tau1 = 2 * m + extra1
    return tau1, tau - tau1


def make_config(m: int, n: int, k: int = 1, u: int = 1, tau: int | None = None,
                rho: float = 0.0, **overrides) -> SystemConfig:
    """Build a config from dimensions and a total pilot budget.

    ``tau=None`` uses the minimum overhead.  Extra keyword arguments map to
    :class:`SystemConfig` fields.
    """
    t2min = min_phase2_len(m, n, k, u)
    if tau is None:
        tau = 2 * m + t2min
    tau1, tau2 = split_lengths(m, n, k, u, tau, rho)
    return SystemConfig(num_bs_antennas=n, num_ris_elements=m, num_users=k,
                        antennas_per_user=u, tau1=tau1, tau2=tau2, **overrides)
