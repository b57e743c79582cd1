"""Discrete-time Metropolis chain: single steps, seeded trajectories,
hitting-time measurement.

One Markov step is one attempted flip: a site uniform on the box, one of the
two alternative spin values with probability 1/2, acceptance exp(-beta [dH]+).
Trajectories are reproducible given (seed, parameters, start); the random
stream is consumed in fixed-size blocks (see kernels.CHUNK_STEPS), and the
numba and pure-Python backends consume the same blocks, so they produce
identical runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import InvalidParametersError
from .lattice import Site
from .model import (
    PERIODIC,
    Parameters,
    SpinConfiguration,
    _label_clusters,
    delta_h,
    flip_cost,
    gibbs_ratio,
    hamiltonian,
    homogeneous,
    lattice_energy,
    neighbor_spin_sum,
    neighbor_sum_array,
)

RNG_NAME = "PCG64"  # numpy default_rng bit generator, recorded in output files


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# -- targets -------------------------------------------------------------------

_NAMED = {"plus1": kernels.TARGET_PLUS, "minus1": kernels.TARGET_MINUS, "zero": kernels.TARGET_ZERO}
_HOMOGENEOUS_VALUE = {"plus1": 1, "minus1": -1, "zero": 0}


@dataclass(frozen=True)
class TargetSet:
    """Set of configuration predicates the chain can hit: homogeneous states
    by name and/or one plus-count manifold."""

    names: tuple[str, ...]
    mask: int
    manifold_n: int = -1

    def member_hit(self, counts: Sequence[int], n_sites: int) -> Optional[str]:
        n_minus, n_zero, n_plus = counts
        for name in self.names:
            if name == "plus1" and n_plus == n_sites:
                return name
            if name == "minus1" and n_minus == n_sites:
                return name
            if name == "zero" and n_zero == n_sites:
                return name
            if name.startswith("manifold:") and n_plus == self.manifold_n:
                return name
        return None


def parse_targets(spec: str | Iterable[str]) -> TargetSet:
    """Accepts "plus1", "minus1", "zero", "manifold:N", or an iterable /
    comma-separated combination."""
    if isinstance(spec, str):
        parts = [s.strip() for s in spec.split(",") if s.strip()]
    else:
        parts = [str(s).strip() for s in spec]
    if not parts:
        raise ValueError("empty target specification")
    mask = 0
    manifold_n = -1
    for part in parts:
        if part in _NAMED:
            mask |= _NAMED[part]
        elif part.startswith("manifold:"):
            if manifold_n >= 0:
                raise ValueError("at most one manifold target is supported")
            manifold_n = int(part.split(":", 1)[1])
            if manifold_n < 0:
                raise ValueError("manifold plus-count must be >= 0")
            mask |= kernels.TARGET_MANIFOLD
        else:
            raise ValueError(f"unknown target {part!r}")
    return TargetSet(tuple(parts), mask, manifold_n)


# -- records -------------------------------------------------------------------

@dataclass(frozen=True)
class SupercriticalEvent:
    """First time the plus count reached the threshold: centroid and size of
    the largest plus cluster at that moment."""

    step: int
    centroid: tuple[float, float]
    size: int
    n_clusters: int = 1


@dataclass(frozen=True)
class TrajectoryTrace:
    steps: np.ndarray
    energy: np.ndarray
    n_plus: np.ndarray
    n_zero: np.ndarray
    n_minus: np.ndarray


@dataclass(frozen=True)
class HittingRecord:
    replica: int
    seed: int
    tau: int
    hit: Optional[str]  # None on timeout
    timed_out: bool
    supercritical: Optional[SupercriticalEvent]
    final: SpinConfiguration
    trace: Optional[TrajectoryTrace] = None
    rng_name: str = RNG_NAME

    def sweeps(self, p: Parameters) -> float:
        return self.tau / p.n_sites


# -- chain state and the single-step API ----------------------------------------

@dataclass
class ChainState:
    """Mutable chain state owned by one worker: current spins, step count,
    seedable generator state, and the incrementally maintained energy."""

    spins: np.ndarray
    rng: np.random.Generator
    params: Parameters
    step_count: int = 0
    energy: float = 0.0

    @property
    def config(self) -> SpinConfiguration:
        return SpinConfiguration(self.spins)

    def resync_energy(self) -> float:
        self.energy = float(
            lattice_energy(self.spins, self.params.J, self.params.lam, self.params.h, self.params.boundary)
        )
        return self.energy


def make_chain(p: Parameters, start: SpinConfiguration, seed: int) -> ChainState:
    if start.L != p.L:
        raise ValueError("start configuration does not match parameter box side")
    state = ChainState(start.writable_spins(), make_rng(seed), p)
    state.resync_energy()
    return state


_ALT = kernels.alternative_table()


def step(state: ChainState) -> bool:
    """Advance by one attempted move; returns True if the flip was accepted."""
    p = state.params
    L = p.L
    flat = int(state.rng.integers(0, L * L))
    choice = int(state.rng.integers(0, 2))
    u = float(state.rng.random())
    x, y = flat // L + 1, flat % L + 1
    cur = int(state.spins[x - 1, y - 1])
    new = int(_ALT[cur + 1, choice])
    d = flip_cost(cur, new, neighbor_sum_array(state.spins, x, y, p.boundary), p)
    state.step_count += 1
    accept = u < (math.exp(-p.beta * d) if d > 0 else 1.0)
    if accept:
        state.spins[x - 1, y - 1] = new
        state.energy += d
    return accept


# -- transition matrix entries ---------------------------------------------------

def transition_probability(eta: SpinConfiguration, eta_prime: SpinConfiguration, p: Parameters) -> float:
    """Metropolis transition matrix entry, including the diagonal."""
    if eta.L != eta_prime.L:
        return 0.0
    diff = np.argwhere(eta.spins != eta_prime.spins)
    if len(diff) > 1:
        return 0.0
    norm = 1.0 / (2.0 * p.n_sites)
    if len(diff) == 1:
        site = (int(diff[0][0]) + 1, int(diff[0][1]) + 1)
        d = delta_h(eta, site, eta_prime.spin_at(site), p)
        return norm * (math.exp(-p.beta * d) if d > 0 else 1.0)
    total = 0.0
    for x in range(1, p.L + 1):
        for y in range(1, p.L + 1):
            cur = eta.spin_at((x, y))
            for new in (-1, 0, 1):
                if new == cur:
                    continue
                d = flip_cost(cur, new, neighbor_spin_sum(eta, (x, y), p), p)
                total += norm * (math.exp(-p.beta * d) if d > 0 else 1.0)
    return 1.0 - total


def detailed_balance_check(p: Parameters, samples: int, seed: int = 0) -> float:
    """Max relative violation of mu(eta) p(eta,eta') = mu(eta') p(eta',eta)
    over random communicating pairs."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = make_rng(seed)
    L = p.L
    grids = rng.integers(-1, 2, size=(samples, L, L)).astype(np.int8)
    xs = rng.integers(1, L + 1, size=samples)
    ys = rng.integers(1, L + 1, size=samples)
    shifts = rng.integers(1, 3, size=samples)
    worst = 0.0
    for i in range(samples):
        eta = SpinConfiguration(grids[i])
        site = (int(xs[i]), int(ys[i]))
        cur = eta.spin_at(site)
        new = ((cur + 1 + int(shifts[i])) % 3) - 1  # one of the two other values
        eta_prime = eta.with_flip(site, new)
        p_fwd = transition_probability(eta, eta_prime, p)
        p_bwd = transition_probability(eta_prime, eta, p)
        ratio = gibbs_ratio(eta_prime, eta, p)  # mu(eta)/mu(eta')
        violation = abs(ratio * p_fwd - p_bwd) / p_bwd
        worst = max(worst, violation)
    return worst


# -- hitting runs ----------------------------------------------------------------

def default_supercritical_threshold(p: Parameters) -> int:
    """Plus-count threshold marking a post-saddle droplet: n+_c + 2 for
    lam > h, and the zero-background analogue otherwise."""
    if p.lam > p.h:
        l_c = math.floor((2.0 * p.J + p.lam - p.h) / (2.0 * p.h)) + 1
        return l_c * (l_c - 1) + 2
    n_tilde = math.floor(2.0 * p.J / (p.lam + p.h)) + 1
    return n_tilde * n_tilde + 2


def _cluster_event(spins: np.ndarray, step: int, periodic: bool) -> Optional[SupercriticalEvent]:
    """Centroid and size of the largest plus cluster (None if no plus spins)."""
    mask = spins == 1
    labels = _label_clusters(mask, periodic)
    ids, sizes = np.unique(labels[labels > 0], return_counts=True)
    if len(ids) == 0:
        return None
    big = ids[int(np.argmax(sizes))]
    xs, ys = np.nonzero(labels == big)
    if periodic:
        xs = _unwrap(xs, spins.shape[0])
        ys = _unwrap(ys, spins.shape[1])
    L = spins.shape[0]
    cx = float(np.mean(xs)) % L + 1.0
    cy = float(np.mean(ys)) % L + 1.0
    return SupercriticalEvent(step, (cx, cy), int(sizes.max()), len(ids))


def _unwrap(coords: np.ndarray, L: int) -> np.ndarray:
    """Shift wrapped 0-based coordinates so a seam-straddling cluster is contiguous."""
    present = np.zeros(L, dtype=bool)
    present[coords] = True
    if present[0] and present[-1] and not present.all():
        gap = int(np.argmin(present))  # first absent coordinate
        coords = coords.astype(np.int64).copy()
        coords[coords >= gap] -= L
    return coords


def run_until_hit(
    p: Parameters,
    start: SpinConfiguration,
    targets: TargetSet | str,
    max_steps: int,
    seed: int,
    *,
    stride: int = 100,
    supercrit_threshold: Optional[int] = None,
    record_trace: bool = True,
    skip_initial: bool = False,
    replica: int = 0,
) -> HittingRecord:
    """Run the chain until a target predicate holds or max_steps is reached.

    Records the first time the plus count reaches the supercritical threshold
    while forming a single plus cluster (pass ``supercrit_threshold=0`` to
    disable).  Timeouts set a flag instead of raising.
    """
    if max_steps <= 0:
        raise ValueError("max_steps must be > 0")
    if isinstance(targets, str):
        targets = parse_targets(targets)
    if start.L != p.L:
        raise ValueError("start configuration does not match parameter box side")

    L = p.L
    n_sites = p.n_sites
    periodic = p.boundary == PERIODIC
    spins = start.writable_spins()
    flat = spins.reshape(-1)
    counts = np.zeros(3, dtype=np.int64)
    for v in (-1, 0, 1):
        counts[v + 1] = int(np.count_nonzero(flat == v))
    energy = float(lattice_energy(spins, p.J, p.lam, p.h, p.boundary))

    thr = default_supercritical_threshold(p) if supercrit_threshold is None else supercrit_threshold
    armed = 1
    supercrit: Optional[SupercriticalEvent] = None
    if thr > 0 and counts[2] >= thr:
        supercrit = _cluster_event(spins, 0, periodic)
        thr = 0

    trace_steps: list[np.ndarray] = []
    trace_e: list[np.ndarray] = []
    trace_np_: list[np.ndarray] = []
    trace_n0: list[np.ndarray] = []
    trace_nm: list[np.ndarray] = []
    stride_eff = stride if record_trace else 0
    if stride_eff > 0:
        trace_steps.append(np.array([0], dtype=np.int64))
        trace_e.append(np.array([energy]))
        trace_np_.append(np.array([counts[2]], dtype=np.int64))
        trace_n0.append(np.array([counts[1]], dtype=np.int64))
        trace_nm.append(np.array([counts[0]], dtype=np.int64))

    def finish(tau, hit, timed_out):
        trace = None
        if stride_eff > 0:
            trace = TrajectoryTrace(
                np.concatenate(trace_steps),
                np.concatenate(trace_e),
                np.concatenate(trace_np_),
                np.concatenate(trace_n0),
                np.concatenate(trace_nm),
            )
        return HittingRecord(
            replica, seed, tau, hit, timed_out, supercrit, SpinConfiguration(spins), trace
        )

    if not skip_initial:
        hit = targets.member_hit(tuple(counts), n_sites)
        if hit is not None:
            return finish(0, hit, False)

    rng = make_rng(seed)
    nbr = kernels.neighbor_table(L, periodic)
    acc, dh_table = kernels.flip_tables(p.J, p.lam, p.h, p.beta)
    alt = kernels.alternative_table()
    chunk = kernels.CHUNK_STEPS
    buf = chunk // stride + 2 if stride_eff > 0 else 1
    t_step = np.zeros(buf, dtype=np.int64)
    t_e = np.zeros(buf, dtype=np.float64)
    t_np = np.zeros(buf, dtype=np.int64)
    t_n0 = np.zeros(buf, dtype=np.int64)
    t_nm = np.zeros(buf, dtype=np.int64)

    steps_done = 0
    next_trace = stride if stride_eff > 0 else -1
    while steps_done < max_steps:
        sites = rng.integers(0, n_sites, size=chunk, dtype=np.int64)
        choices = rng.integers(0, 2, size=chunk, dtype=np.int64)
        uniforms = rng.random(chunk)
        n_this = int(min(chunk, max_steps - steps_done))
        offset = 0
        while offset < n_this:
            done, reason, energy, armed, next_trace, n_trace = kernels.run_chunk(
                flat,
                nbr,
                acc,
                dh_table,
                alt,
                sites[offset:n_this],
                choices[offset:n_this],
                uniforms[offset:n_this],
                n_this - offset,
                counts,
                energy,
                targets.mask,
                targets.manifold_n,
                thr,
                armed,
                steps_done,
                next_trace,
                stride_eff,
                t_step,
                t_e,
                t_np,
                t_n0,
                t_nm,
            )
            steps_done += done
            offset += done
            if n_trace > 0:
                trace_steps.append(t_step[:n_trace].copy())
                trace_e.append(t_e[:n_trace].copy())
                trace_np_.append(t_np[:n_trace].copy())
                trace_n0.append(t_n0[:n_trace].copy())
                trace_nm.append(t_nm[:n_trace].copy())
            if reason == kernels.TARGET_HIT:
                hit = targets.member_hit(tuple(counts), n_sites)
                return finish(steps_done, hit, False)
            if reason == kernels.SUPERCRIT_PAUSE:
                supercrit = _cluster_event(spins, steps_done, periodic)
                thr = 0  # only the first crossing is recorded
        # guard against energy drift from incremental updates
        energy = float(lattice_energy(spins, p.J, p.lam, p.h, p.boundary))
    return finish(max_steps, None, True)


def sample_exit_times(
    p: Parameters,
    start: SpinConfiguration,
    targets: TargetSet | str,
    replicas: int,
    max_steps: int,
    seed_base: int,
    *,
    stride: int = 100,
    supercrit_threshold: Optional[int] = None,
    record_trace: bool = False,
    skip_initial: bool = False,
    workers: int = 1,
) -> list[HittingRecord]:
    """Independent seeded runs (seed_base + replica index), optionally fanned
    out over a process pool.  Results are ordered by replica index, so the
    aggregate statistics do not depend on scheduling."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if isinstance(targets, str):
        targets = parse_targets(targets)
    kwargs = dict(
        stride=stride,
        supercrit_threshold=supercrit_threshold,
        record_trace=record_trace,
        skip_initial=skip_initial,
    )
    if workers <= 1 or replicas == 1:
        return [
            run_until_hit(p, start, targets, max_steps, seed_base + i, replica=i, **kwargs)
            for i in range(replicas)
        ]
    from concurrent.futures import ProcessPoolExecutor

    jobs = [(p, start, targets, max_steps, seed_base + i, i, kwargs) for i in range(replicas)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(_run_job, jobs, chunksize=max(1, replicas // (4 * workers))))
    return records


def _run_job(job):
    p, start, targets, max_steps, seed, replica, kwargs = job
    return run_until_hit(p, start, targets, max_steps, seed, replica=replica, **kwargs)


def aggregate_hitting(records: Sequence[HittingRecord], bootstrap: int = 200, seed: int = 0) -> dict:
    """Order-independent summary: mean/median tau over completed runs, the log
    of the mean (and the mean of logs), and a bootstrap standard error of the
    log-mean."""
    taus = np.array(sorted(r.tau for r in records if not r.timed_out), dtype=np.float64)
    n_timeout = sum(1 for r in records if r.timed_out)
    out = {
        "n": len(records),
        "n_timeouts": n_timeout,
        "mean_tau": float("nan"),
        "median_tau": float("nan"),
        "log_mean_tau": float("nan"),
        "mean_log_tau": float("nan"),
        "se_log_mean": float("nan"),
    }
    if len(taus) == 0:
        return out
    out["mean_tau"] = float(taus.mean())
    out["median_tau"] = float(np.median(taus))
    if (taus > 0).all():
        out["mean_log_tau"] = float(np.log(taus).mean())
    if taus.mean() > 0:
        out["log_mean_tau"] = float(np.log(taus.mean()))
        if bootstrap > 0 and len(taus) > 1:
            rng = make_rng(seed)
            resamples = rng.integers(0, len(taus), size=(bootstrap, len(taus)))
            means = taus[resamples].mean(axis=1)
            out["se_log_mean"] = float(np.log(means).std(ddof=1))
    return out


# -- CSV writers (trajectory and hitting-record formats) -------------------------

def write_trajectory_csv(path, record: HittingRecord, header_lines: Sequence[str] = ()) -> None:
    if record.trace is None:
        raise ValueError("record carries no trace")
    tr = record.trace
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("step,energy,n_plus,n_zero,n_minus\n")
        for i in range(len(tr.steps)):
            fh.write(
                f"{tr.steps[i]},{tr.energy[i]!r},{tr.n_plus[i]},{tr.n_zero[i]},{tr.n_minus[i]}\n"
            )


def write_hitting_csv(path, records: Sequence[HittingRecord], header_lines: Sequence[str] = ()) -> None:
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("replica,seed,tau,hit,supercrit_step,centroid_x,centroid_y,cluster_size\n")
        for r in records:
            hit = "timeout" if r.timed_out else (r.hit or "")
            if r.supercritical is None:
                extra = ",,,"
            else:
                ev = r.supercritical
                extra = f"{ev.step},{ev.centroid[0]!r},{ev.centroid[1]!r},{ev.size}"
            fh.write(f"{r.replica},{r.seed},{r.tau},{hit},{extra}\n")
