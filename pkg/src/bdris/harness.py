"""Monte-Carlo experiment orchestration, theorem verification, CSV output.

Experiments sweep one axis (total pilot length, RIS size, user count, or the
pilot-split fraction rho) and run seeded independent trials per point.  The
fraction rho of surplus pilots granted to phase 1 can be fixed or picked per
scenario by a grid search over {0.0, 0.1, ..., 0.9} on mean NMSE.  Channel
draws are keyed by trial index only, so sweep points and rho candidates see
common channels; schedules and noise are keyed by (scenario, trial,
candidate).  Results are emitted sorted, which makes runs byte-reproducible
regardless of worker scheduling (wall-time columns aside).
"""
from __future__ import annotations

import configparser
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import estimate
from .channel import build_cascaded, generate_channel_set
from .config import SystemConfig, make_config
from .errors import BdrisError
from .linalg import complex_gaussian, numerical_rank
from .schedule import (build_schedule, ls_schedule, min_overhead,
                       phase1_schedule, phase2_schedule, psi1_matrix,
                       theta1_matrix, theta2_matrix)
from .sim import synthesize_rx

ESTIMATOR_NAMES = ("proposed_lmmse", "proposed_noisefree", "ls_baseline")
SWEEP_AXES = ("total_tau", "M", "K", "rho")
RHO_GRID = tuple(round(0.1 * i, 1) for i in range(10))
CSV_HEADER = "scenario,M,N,K,U,tau,tau1,tau2,rho,estimator,trial,seed,nmse,ms"
WORKERS_ENV = "BDRIS_WORKERS"
DEFAULT_TRIALS = 200
DEFAULT_MASTER_SEED = 20240101


@dataclass(frozen=True)
class ExperimentSpec:
    base: SystemConfig
    axis: str
    values: tuple
    trials: int = DEFAULT_TRIALS
    estimators: tuple = ("proposed_lmmse",)
    rho: float | None = None          # None: grid search per scenario
    master_seed: int = DEFAULT_MASTER_SEED
    label: str = "exp"

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}")
        if self.trials < 1:
            raise ValueError("trials must be positive")


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    m: int
    n: int
    k: int
    u: int
    tau: int
    tau1: int
    tau2: int
    rho: float
    estimator: str
    trial: int
    seed: int
    nmse: float
    ms: float


def _rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed,
                                                        spawn_key=tuple(key)))


def _scenario_dims(spec: ExperimentSpec, value):
    """(m, n, k, u, tau, rho_candidates) for one axis value."""
    base = spec.base
    m, n = base.num_ris_elements, base.num_bs_antennas
    k, u = base.num_users, base.antennas_per_user
    tau = base.tau
    rhos = RHO_GRID if spec.rho is None else (spec.rho,)
    if spec.axis == "total_tau":
        tau = int(value)
    elif spec.axis == "M":
        m = int(value)
    elif spec.axis == "K":
        k = int(value)
    elif spec.axis == "rho":
        rhos = (float(value),)
    return m, n, k, u, tau, rhos


def _scenario_config(spec: ExperimentSpec, value, rho: float) -> SystemConfig:
    m, n, k, u, tau, _ = _scenario_dims(spec, value)
    base = spec.base
    overrides = dict(tx_power=base.tx_power, noise_variance=base.noise_variance,
                     phase_theta=base.phase_theta, pathloss_rb=base.pathloss_rb,
                     pathloss_direct=base.pathloss_direct,
                     rng_seed=base.rng_seed)
    if k == base.num_users:
        # path-loss defaults are rederived when the user count is swept
        overrides["pathloss_ur"] = base.pathloss_ur
    return make_config(m, n, k, u, tau=tau, rho=rho, **overrides)


# ---------------------------------------------------------------------------
# per-trial work units (top level so a process pool can pickle them)
# ---------------------------------------------------------------------------

def _proposed_unit(args):
    """One trial of the two-phase pipeline over every rho candidate."""
    spec, scen_idx, value, trial, use_lmmse = args
    m, n, k, u, tau, rhos = _scenario_dims(spec, value)
    # one channel seed per trial: rho candidates and estimators share draws
    ch_seed = int(_rng(spec.master_seed, 0, trial).integers(2 ** 63))
    out = []
    for cand, rho in enumerate(rhos):
        t0 = time.perf_counter()
        cfg = _scenario_config(spec, value, rho)
        channels = generate_channel_set(cfg, seed=ch_seed)
        sched_rng = _rng(spec.master_seed, 1, scen_idx, trial, cand)
        noise_rng = _rng(spec.master_seed, 2, scen_idx, trial, cand)
        try:
            sched = build_schedule(cfg, sched_rng)
            rx = synthesize_rx(channels, sched, cfg, noise_rng)
            result = estimate.two_phase_pipeline(rx, cfg, use_lmmse=use_lmmse)
            value_nmse = estimate.nmse(result.j_hat, build_cascaded(channels))
            err = ""
        except BdrisError as exc:
            value_nmse, err = float("nan"), type(exc).__name__
        ms = (time.perf_counter() - t0) * 1e3
        out.append((rho, cfg.tau1, cfg.tau2, value_nmse, ms, err))
    return out


def _ls_unit(args):
    """One trial of the direct least-squares baseline."""
    spec, scen_idx, value, trial = args
    m, n, k, u, tau, _ = _scenario_dims(spec, value)
    ch_seed = int(_rng(spec.master_seed, 0, trial).integers(2 ** 63))
    t0 = time.perf_counter()
    cfg = _scenario_config(spec, value, 0.0)
    channels = generate_channel_set(cfg, seed=ch_seed)
    sched_rng = _rng(spec.master_seed, 3, scen_idx, trial)
    noise_rng = _rng(spec.master_seed, 4, scen_idx, trial)
    try:
        sched = ls_schedule(m, k, u, tau, sched_rng)
        rx = synthesize_rx(channels, sched, cfg, noise_rng)
        j_hat = estimate.ls_baseline(rx)
        value_nmse = estimate.nmse(j_hat, build_cascaded(channels))
        err = ""
    except BdrisError as exc:
        value_nmse, err = float("nan"), type(exc).__name__
    ms = (time.perf_counter() - t0) * 1e3
    return value_nmse, ms, err


def _map(fn, args_list, workers: int):
    if workers <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(args_list) // (8 * workers))
        return list(pool.map(fn, args_list, chunksize=chunk))


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(WORKERS_ENV, "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------

def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> list[ResultRow]:
    """Run every (scenario, estimator, trial) and return sorted result rows."""
    workers = resolve_workers(workers)
    rows: list[ResultRow] = []
    for scen_idx, value in enumerate(spec.values):
        m, n, k, u, tau, _ = _scenario_dims(spec, value)
        scenario = f"{spec.label}-{spec.axis}={value}"
        for name in spec.estimators:
            if name == "ls_baseline":
                args = [(spec, scen_idx, value, t) for t in range(spec.trials)]
                results = _map(_ls_unit, args, workers)
                for trial, (val, ms, err) in enumerate(results):
                    tag = name if not err else f"{name}:error:{err}"
                    # the baseline has no two-phase split; record tau1=tau
                    rows.append(ResultRow(scenario, m, n, k, u, tau, tau, 0,
                                          float("nan"), tag, trial,
                                          spec.master_seed, val, ms))
                continue
            use_lmmse = name == "proposed_lmmse"
            args = [(spec, scen_idx, value, t, use_lmmse)
                    for t in range(spec.trials)]
            per_trial = _map(_proposed_unit, args, workers)
            n_cand = len(per_trial[0])
            means = []
            for cand in range(n_cand):
                vals = np.array([per_trial[t][cand][3] for t in range(spec.trials)])
                means.append(np.inf if np.all(np.isnan(vals))
                             else np.nanmean(vals))
            best = int(np.argmin(means))
            for trial in range(spec.trials):
                rho, tau1, tau2, val, ms, err = per_trial[trial][best]
                tag = name if not err else f"{name}:error:{err}"
                rows.append(ResultRow(scenario, m, n, k, u, tau, tau1, tau2,
                                      rho, tag, trial, spec.master_seed,
                                      val, ms))
    rows.sort(key=lambda r: (r.scenario, r.estimator, r.trial))
    return rows


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(f"{r.scenario},{r.m},{r.n},{r.k},{r.u},{r.tau},{r.tau1},"
                  f"{r.tau2},{r.rho:g},{r.estimator},{r.trial},{r.seed},"
                  f"{r.nmse:.17g},{r.ms:.3f}\n")
    return buf.getvalue()


def write_csv(rows: list[ResultRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(rows_to_csv(rows))


def mean_nmse(rows: list[ResultRow], scenario: str, estimator: str) -> float:
    vals = [r.nmse for r in rows
            if r.scenario == scenario and r.estimator == estimator]
    return float(np.nanmean(vals)) if vals else float("nan")


def bootstrap_mean_ci(values, n_boot: int = 2000, alpha: float = 0.05,
                      seed: int = 0):
    """Percentile bootstrap interval for the mean."""
    vals = np.asarray(values, dtype=float)
    vals = vals[~np.isnan(vals)]
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(vals), size=(n_boot, len(vals)))
    means = vals[idx].mean(axis=1)
    return (float(np.quantile(means, alpha / 2)),
            float(np.quantile(means, 1 - alpha / 2)))


# ---------------------------------------------------------------------------
# theorem verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportEntry:
    dims: tuple                 # (M, N, K, U)
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    entries: tuple

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def summary(self) -> str:
        lines = []
        for e in self.entries:
            status = "PASS" if e.passed else "FAIL"
            dims = "M={} N={} K={} U={}".format(*e.dims)
            detail = f"  ({e.detail})" if e.detail else ""
            lines.append(f"[{status}] {dims}: {e.name}{detail}")
        n_fail = sum(not e.passed for e in self.entries)
        lines.append(f"{len(self.entries) - n_fail}/{len(self.entries)} checks passed")
        return "\n".join(lines)


DEFAULT_VERIFY_GRID = tuple((m, n, k, u)
                            for m in range(2, 11) for n in range(1, 9)
                            for k in (1, 2) for u in (1, 2))


def _alloc_invariants(alloc: np.ndarray, q: int, m: int) -> tuple[bool, str]:
    rows, cols = alloc.shape
    if np.any(alloc.sum(axis=0) != m):
        return False, "column sums differ from M"
    row_sums = alloc.sum(axis=1)
    if np.any(row_sums > q) or np.any(row_sums[:-1] != q) or row_sums[-1] < 1:
        return False, "row sums violate the supply pattern"
    prev_lo = prev_hi = 0
    for i in range(rows):
        nz = np.nonzero(alloc[i])[0]
        if nz.size == 0 or np.any(np.diff(nz) != 1):
            return False, f"row {i} support not contiguous"
        lo, hi = int(nz[0]), int(nz[-1])
        if lo < prev_lo or hi < prev_hi or lo < prev_hi:
            return False, "support is not a northwest-southeast staircase"
        prev_lo, prev_hi = lo, hi
    return True, ""


def verify_theorems(grid=None, seed: int = 0) -> VerificationReport:
    """Check the rank guarantees of both phases on a grid of dimensions.

    For each (M, N, K, U): the phase-1 design must give a rank-M pilot
    matrix and a rank-(M-1) scaling regressor; the minimal phase-2 design a
    full-rank regressor that necessarily loses rank one instant short; the
    northwest-corner allocation must satisfy its row/column/staircase
    invariants.  Single-antenna single-user grids mark phase 2 vacuous.
    """
    grid = DEFAULT_VERIFY_GRID if grid is None else tuple(grid)
    entries = []

    def add(dims, name, ok, detail=""):
        entries.append(ReportEntry(dims, name, bool(ok), detail))

    for dims in grid:
        m, n, k, u = dims
        q = min(m, n)
        rng = _rng(seed, m, n, k, u)
        probe = complex_gaussian(rng, (n, m))
        sched1 = phase1_schedule(m, q, np.pi, m, rng,
                                 num_users=k, antennas_per_user=u)
        r_psi = numerical_rank(psi1_matrix(sched1))
        add(dims, "phase1 pilot matrix rank M", r_psi == m, f"rank={r_psi}")
        r_th1 = numerical_rank(theta1_matrix(probe, sched1))
        add(dims, "phase1 regressor rank M-1", r_th1 == m - 1, f"rank={r_th1}")
        u_tilde = k * u - 1
        if u_tilde == 0:
            add(dims, "phase2 checks", True, "vacuous: no phase-2 unknowns")
            continue
        t2_min = min_overhead(m, n, k, u).tau2
        sched2 = phase2_schedule(m, q, k, u, t2_min, rng)
        full = m * u_tilde
        r_th2 = numerical_rank(theta2_matrix(probe, sched2))
        add(dims, "phase2 regressor full rank at minimum length",
            r_th2 == full, f"rank={r_th2}/{full}")
        r_short = numerical_rank(theta2_matrix(probe, sched2,
                                               n_instants=t2_min - 1))
        add(dims, "phase2 regressor deficient one instant short",
            r_short < full, f"rank={r_short}/{full}")
        ok, why = _alloc_invariants(sched2.aux_alloc, q, m)
        add(dims, "allocation invariants", ok, why)
    return VerificationReport(entries=tuple(entries))


# ---------------------------------------------------------------------------
# figure presets (desk scale)
# ---------------------------------------------------------------------------

def _figure_specs(name: str, trials: int, master_seed: int) -> list[ExperimentSpec]:
    if name == "fig3":
        return [ExperimentSpec(base=make_config(8, 4, 1, 2, tau=tau),
                               axis="rho", values=RHO_GRID, trials=trials,
                               estimators=("proposed_lmmse",),
                               master_seed=master_seed,
                               label=f"fig3-tau{tau}")
                for tau in (30, 50, 80, 130)]
    presets = {
        "fig4": dict(dims=(8, 4, 1, 2), axis="total_tau",
                     values=(20, 40, 60, 80, 100, 120), tau=20),
        "fig5": dict(dims=(16, 12, 1, 4), axis="total_tau",
                     values=(40, 60, 80, 100, 120, 140), tau=40),
        "fig6": dict(dims=(16, 8, 1, 4), axis="M",
                     values=(4, 8, 12, 16, 20), tau=160),
        "fig7": dict(dims=(16, 8, 3, 4), axis="total_tau",
                     values=(100, 175, 250, 325, 400), tau=100),
        "fig8": dict(dims=(16, 8, 1, 2), axis="K",
                     values=(1, 2, 3, 4), tau=64),
    }
    if name not in presets:
        raise ValueError(f"unknown figure {name!r}; choose fig3..fig8")
    p = presets[name]
    m, n, k, u = p["dims"]
    base = make_config(m, n, k, u, tau=p["tau"])
    return [ExperimentSpec(base=base, axis=p["axis"], values=p["values"],
                           trials=trials,
                           estimators=("proposed_lmmse", "ls_baseline"),
                           master_seed=master_seed, label=name)]


def reproduce_figure(name: str, trials: int = DEFAULT_TRIALS,
                     master_seed: int = DEFAULT_MASTER_SEED,
                     workers: int | None = None) -> list[ResultRow]:
    """Run the sweep behind one of the study figures and return its rows."""
    rows = []
    for spec in _figure_specs(name, trials, master_seed):
        rows.extend(run_experiment(spec, workers=workers))
    return rows


# ---------------------------------------------------------------------------
# experiment spec files
# ---------------------------------------------------------------------------

def parse_spec_file(path) -> ExperimentSpec:
    """Read an experiment description from an INI-style key-value file.

    Schema (see the README for the full reference)::

        [config]
        m = 8            ; RIS elements
        n = 4            ; BS antennas
        k = 1            ; users
        u = 2            ; antennas per user
        tau = 60         ; base total pilot length
        seed = 123       ; master seed
        ; optional: tx_power_dbm, noise_dbm, theta, pathloss_ur,
        ;           pathloss_rb, pathloss_direct

        [sweep]
        axis = total_tau ; one of total_tau, M, K, rho
        values = 20 40 60
        trials = 200
        rho = auto       ; or a number in [0, 1]

        [estimators]
        proposed_lmmse = yes
        ls_baseline = yes
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    c = parser["config"]
    m, n = c.getint("m"), c.getint("n")
    k, u = c.getint("k", fallback=1), c.getint("u", fallback=1)
    tau = c.getint("tau", fallback=None)
    overrides = {}
    if "tx_power_dbm" in c:
        overrides["tx_power"] = 10 ** (c.getfloat("tx_power_dbm") / 10) / 1000
    if "tx_power_w" in c:
        overrides["tx_power"] = c.getfloat("tx_power_w")
    if "noise_dbm" in c:
        overrides["noise_variance"] = 10 ** (c.getfloat("noise_dbm") / 10) / 1000
    if "noise_w" in c:
        overrides["noise_variance"] = c.getfloat("noise_w")
    if "theta" in c:
        overrides["phase_theta"] = c.getfloat("theta")
    if "pathloss_ur" in c:
        overrides["pathloss_ur"] = (c.getfloat("pathloss_ur"),) * k
    if "pathloss_rb" in c:
        overrides["pathloss_rb"] = c.getfloat("pathloss_rb")
    if "pathloss_direct" in c:
        overrides["pathloss_direct"] = c.getfloat("pathloss_direct")
    base = make_config(m, n, k, u, tau=tau, **overrides)

    s = parser["sweep"]
    axis = s.get("axis", fallback="total_tau").strip()
    raw = s.get("values").replace(",", " ").split()
    values = tuple(float(v) if axis == "rho" else int(v) for v in raw)
    trials = s.getint("trials", fallback=DEFAULT_TRIALS)
    rho_raw = s.get("rho", fallback="auto").strip().lower()
    rho = None if rho_raw == "auto" else float(rho_raw)
    label = s.get("label", fallback="exp").strip()
    master_seed = c.getint("seed", fallback=DEFAULT_MASTER_SEED)

    chosen = []
    if parser.has_section("estimators"):
        for name in ESTIMATOR_NAMES:
            if parser["estimators"].getboolean(name, fallback=False):
                chosen.append(name)
    if not chosen:
        chosen = ["proposed_lmmse"]
    return ExperimentSpec(base=base, axis=axis, values=values, trials=trials,
                          estimators=tuple(chosen), rho=rho,
                          master_seed=master_seed, label=label)
