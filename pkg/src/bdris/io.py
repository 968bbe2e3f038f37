"""Text dumps for cross-implementation regression and audit.

Channel dumps carry a header line ``N M K U seed`` followed by row-major
matrix sections; schedule dumps carry one record per instant with the phase
tag, the pilot matrix, and the scattering matrix.  Complex entries are
written as ``<re>(+|-)<im>j`` with 17 significant digits so a round-trip is
bit-exact.
"""
from __future__ import annotations

import numpy as np

from .channel import ChannelSet
from .linalg import numerical_rank
from .schedule import PilotSchedule, Tag
from .sim import RxRecord


def _fmt(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def _write_matrix(fh, name: str, mat: np.ndarray) -> None:
    fh.write(f"# {name} {mat.shape[0]} {mat.shape[1]}\n")
    for row in mat:
        fh.write(" ".join(_fmt(z) for z in row) + "\n")


def _read_matrix(lines, idx):
    header = lines[idx].split()
    rows, cols = int(header[-2]), int(header[-1])
    block = [[complex(tok) for tok in lines[idx + 1 + r].split()]
             for r in range(rows)]
    return np.array(block, dtype=complex).reshape(rows, cols), idx + 1 + rows


def dump_channels(channels: ChannelSet, path, seed: int = 0) -> None:
    k = channels.num_users
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{channels.num_bs_antennas} {channels.num_ris_elements} "
                 f"{k} {channels.antennas_per_user} {seed}\n")
        _write_matrix(fh, "G", channels.G)
        for ki in range(k):
            _write_matrix(fh, f"R{ki}", channels.R[ki])
        for ki in range(k):
            _write_matrix(fh, f"D{ki}", channels.D[ki])


def load_channels(path) -> ChannelSet:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    n, m, k, u, _seed = (int(tok) for tok in lines[0].split())
    idx = 1
    g, idx = _read_matrix(lines, idx)
    rs, ds = [], []
    for _ in range(k):
        r, idx = _read_matrix(lines, idx)
        rs.append(r)
    for _ in range(k):
        d, idx = _read_matrix(lines, idx)
        ds.append(d)
    if g.shape != (n, m) or rs[0].shape != (m, u):
        raise ValueError("channel dump header disagrees with matrix shapes")
    return ChannelSet(G=g, R=np.stack(rs), D=np.stack(ds),
                      q=numerical_rank(g))


def dump_schedule(schedule: PilotSchedule, path) -> None:
    t, k, u = schedule.pilots.shape
    m = schedule.num_ris_elements
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        theta = "" if schedule.theta is None else f" theta={schedule.theta:.17g}"
        fh.write(f"{t} {m} {k} {u}{theta}\n")
        for ti in range(t):
            fh.write(f"t {ti} {Tag(schedule.tags[ti]).name}\n")
            _write_matrix(fh, "pilots", schedule.pilots[ti])
            _write_matrix(fh, "scattering", schedule.scattering[ti])


def load_schedule(path) -> PilotSchedule:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    head = lines[0].split()
    t, m, k, u = (int(tok) for tok in head[:4])
    theta = None
    for tok in head[4:]:
        if tok.startswith("theta="):
            theta = float(tok[len("theta="):])
    pilots = np.zeros((t, k, u), dtype=complex)
    scattering = np.zeros((t, m, m), dtype=complex)
    tags = np.zeros(t, dtype=np.int8)
    idx = 1
    for ti in range(t):
        parts = lines[idx].split()
        tags[ti] = Tag[parts[2]]
        idx += 1
        pilots[ti], idx = _read_matrix(lines, idx)
        scattering[ti], idx = _read_matrix(lines, idx)
    first = np.count_nonzero(tags == Tag.PHASE1_FIRST_HALF)
    return PilotSchedule(scattering=scattering, pilots=pilots, tags=tags,
                         theta=theta, delta=first or None)


def dump_rx(rx: RxRecord, path) -> None:
    t, n = rx.y.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{t} {n} noise={rx.noise_variance:.17g} "
                 f"power={rx.tx_power:.17g}\n")
        _write_matrix(fh, "y", rx.y)
