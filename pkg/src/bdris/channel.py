"""Ground-truth channel generation and derived cascaded-channel objects.

All channels are i.i.d. circularly-symmetric complex Gaussian:

    G entries    ~ CN(0, pathloss_rb * M)     RIS -> BS,  shape (N, M)
    r_{k,u,m}    ~ CN(0, pathloss_ur[k])      user k antenna u -> element m
    D_k entries  ~ CN(0, pathloss_direct)     direct user -> BS (known, never
                                              estimated; carried so the
                                              simulator can subtract it)

The cascaded channel of user k is J_k = R_k^T kron G, an (UN x M^2) matrix
whose (u, m) sub-block equals r_{k,u,m} G.  Every sub-block is therefore a
scalar multiple of the reference block Q_{1,1,1} = r_{1,1,1} G, with scaling
coefficient beta_{k,u,m} = r_{k,u,m} / r_{1,1,1}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import DegenerateReference
from .linalg import complex_gaussian, numerical_rank

# |r_{1,1,1}| below this fraction of the RMS coefficient magnitude counts as
# a pathological draw; the generator redraws, a direct call raises.
DEGENERATE_REF_RTOL = 1e-12
_MAX_REDRAWS = 64


@dataclass(frozen=True)
class ChannelSet:
    """One realization of all physical channels plus the rank of G."""

    G: np.ndarray          # (N, M)
    R: np.ndarray          # (K, M, U); R[k, m, u] = r_{k,u+1,m+1}
    D: np.ndarray          # (K, N, U)
    q: int                 # numerical rank of G

    @property
    def num_bs_antennas(self) -> int:
        return self.G.shape[0]

    @property
    def num_ris_elements(self) -> int:
        return self.G.shape[1]

    @property
    def num_users(self) -> int:
        return self.R.shape[0]

    @property
    def antennas_per_user(self) -> int:
        return self.R.shape[2]

    @property
    def reference_coeff(self) -> complex:
        return complex(self.R[0, 0, 0])


def _reference_is_degenerate(r: np.ndarray) -> bool:
    rms = np.sqrt(np.mean(np.abs(r) ** 2))
    return np.abs(r[0, 0, 0]) < DEGENERATE_REF_RTOL * rms


def generate_channel_set(cfg: SystemConfig, seed: int | None = None) -> ChannelSet:
    """Draw one channel realization; identical seed gives identical output.

    Redraws the user->RIS coefficients in the probability-zero event that
    the reference coefficient r_{1,1,1} is numerically degenerate.
    """
    rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
    n, m = cfg.num_bs_antennas, cfg.num_ris_elements
    k, u = cfg.num_users, cfg.antennas_per_user

    g = complex_gaussian(rng, (n, m), var=cfg.pathloss_rb * m)
    for _ in range(_MAX_REDRAWS):
        r = np.empty((k, m, u), dtype=complex)
        for ki in range(k):
            r[ki] = complex_gaussian(rng, (m, u), var=cfg.pathloss_ur[ki])
        if not _reference_is_degenerate(r):
            break
    else:
        raise DegenerateReference("could not draw a usable reference coefficient")
    d = complex_gaussian(rng, (k, n, u), var=cfg.pathloss_direct)
    return ChannelSet(G=g, R=r, D=d, q=numerical_rank(g))


def build_cascaded(channels: ChannelSet) -> np.ndarray:
    """All cascaded channels J_k = R_k^T kron G, stacked as (K, UN, M^2)."""
    return np.stack([np.kron(channels.R[k].T, channels.G)
                     for k in range(channels.num_users)])


def cascaded_block(j_k: np.ndarray, u: int, m: int,
                   num_bs_antennas: int, num_ris_elements: int) -> np.ndarray:
    """The (u, m) sub-block of one cascaded channel (0-based indices)."""
    n, me = num_bs_antennas, num_ris_elements
    return j_k[u * n:(u + 1) * n, m * me:(m + 1) * me]


def reference_block(channels: ChannelSet) -> np.ndarray:
    """Q_{1,1,1} = r_{1,1,1} G."""
    return channels.R[0, 0, 0] * channels.G


@dataclass(frozen=True)
class ScalingCoefficients:
    """Per-user scaling matrices relating sub-blocks to the reference block.

    ``B[k][:, u]`` holds beta_{k,u,1..M}; ``B_bar`` drops the (user 1,
    antenna 1) column and ``b_bar`` is its column-stacked vectorization:
    exactly the unknowns left for phase 2.
    """

    B: np.ndarray          # (K, M, U)
    B_bar: np.ndarray      # (M, KU-1)
    b_bar: np.ndarray      # (M(KU-1),)


def scaling_coefficients(channels: ChannelSet) -> ScalingCoefficients:
    """beta_{k,u,m} = r_{k,u,m} / r_{1,1,1} for every (k, u, m)."""
    if _reference_is_degenerate(channels.R):
        raise DegenerateReference("reference coefficient r_{1,1,1} is ~0")
    b = channels.R / channels.R[0, 0, 0]
    b[0, 0, 0] = 1.0          # exact by definition; avoids z/z rounding
    k, m, u = b.shape
    # columns: user 1 antennas 2..U, then users 2..K antennas 1..U
    cols = [b[0, :, ui] for ui in range(1, u)]
    for ki in range(1, k):
        cols.extend(b[ki, :, ui] for ui in range(u))
    b_bar_mat = (np.stack(cols, axis=1) if cols
                 else np.zeros((m, 0), dtype=complex))
    return ScalingCoefficients(B=b, B_bar=b_bar_mat,
                               b_bar=b_bar_mat.reshape(-1, order="F"))
