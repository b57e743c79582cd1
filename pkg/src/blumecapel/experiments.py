"""Experiment drivers behind the command-line front end: exit-time sweeps
with Arrhenius fits, nucleation-site maps, and the landscape verification
suite.  Everything here is deterministic given (config, seed)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import landscape as ls
from . import model
from .config import RunConfig
from .dynamics import (
    HittingRecord,
    aggregate_hitting,
    make_rng,
    parse_targets,
    sample_exit_times,
)
from .errors import ConfigError, InvalidParametersError
from .exact import StateSpace, communication_height_exact, communication_height_threshold
from .model import Parameters, SpinConfiguration, homogeneous, load_snapshot

MAX_STEP_CAP = 10_000_000_000
MIN_STEP_BUDGET = 100_000


def theoretical_barrier(p: Parameters) -> tuple[float, str]:
    """Barrier governing the exit from the metastable state: the corner-droplet
    barrier for lam > h, the zero-background droplet heuristic otherwise."""
    if p.lam > p.h > 0:
        return ls.critical_quantities(p).gamma, "corner droplet barrier"
    return 4.0 * p.J * p.J / (p.lam + p.h), "zero-background droplet barrier"


def default_max_steps(p: Parameters, beta: Optional[float] = None) -> int:
    """Timeout budget 50 e^{beta Gamma_est}, capped at 1e10."""
    beta = p.beta if beta is None else beta
    barrier, _ = theoretical_barrier(p)
    budget = 50.0 * math.exp(min(beta * barrier, 50.0))
    return int(min(max(budget, MIN_STEP_BUDGET), MAX_STEP_CAP))


def start_configuration(cfg: RunConfig) -> SpinConfiguration:
    named = {"minus1": -1, "zero": 0, "plus1": 1}
    if cfg.start in named:
        return homogeneous(named[cfg.start], cfg.L)
    eta, _ = load_snapshot(cfg.start)
    if eta.L != cfg.L:
        raise ConfigError(f"snapshot {cfg.start} has L={eta.L}, config says L={cfg.L}")
    return eta


# -- Arrhenius fits ------------------------------------------------------------

@dataclass(frozen=True)
class ArrheniusFit:
    """Least-squares line through (beta, log mean tau)."""

    slope: float
    intercept: float
    r_squared: float
    betas: tuple[float, ...]
    log_mean_tau: tuple[float, ...]
    mean_log_tau: tuple[float, ...]
    se_log_mean: tuple[float, ...]
    n_timeouts: tuple[int, ...]


def fit_arrhenius(betas: Sequence[float], per_beta: Sequence[dict]) -> ArrheniusFit:
    xs = np.asarray(betas, dtype=np.float64)
    ys = np.array([agg["log_mean_tau"] for agg in per_beta])
    if len(xs) < 2:
        raise ValueError("an Arrhenius fit needs at least two beta points")
    if not np.isfinite(ys).all():
        raise ValueError("an Arrhenius fit needs finite log-mean exit times")
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(((ys - pred) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return ArrheniusFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        betas=tuple(float(b) for b in xs),
        log_mean_tau=tuple(float(v) for v in ys),
        mean_log_tau=tuple(float(agg["mean_log_tau"]) for agg in per_beta),
        se_log_mean=tuple(float(agg["se_log_mean"]) for agg in per_beta),
        n_timeouts=tuple(int(agg["n_timeouts"]) for agg in per_beta),
    )


@dataclass(frozen=True)
class ExitTimeResult:
    fit: Optional[ArrheniusFit]
    records: dict  # beta -> list[HittingRecord]
    aggregates: dict  # beta -> aggregate dict
    aborted_betas: tuple[float, ...]


def run_exit_times(cfg: RunConfig, workers: int = 1, seed: Optional[int] = None) -> ExitTimeResult:
    """Replicated hitting runs across the beta grid, plus the Arrhenius fit.

    Refuses degenerate setups (fewer than two betas, start inside the target
    set) up front; if every replica times out at some beta the fit is aborted
    and the partial data returned.
    """
    if len(cfg.beta_grid) < 2:
        raise ConfigError("exit-times needs a beta_grid with at least two points")
    targets = parse_targets(cfg.target)
    start = start_configuration(cfg)
    seed = cfg.seed if seed is None else seed
    counts = start.counts()
    if targets.member_hit(counts, cfg.L * cfg.L) is not None:
        raise ConfigError("start configuration already lies in the target set; fit refused")
    records: dict = {}
    aggregates: dict = {}
    aborted = []
    for i, beta in enumerate(cfg.beta_grid):
        p = cfg.parameters(beta=beta)
        max_steps = cfg.max_steps or default_max_steps(p)
        recs = sample_exit_times(
            p,
            start,
            targets,
            cfg.replicas,
            max_steps,
            seed_base=seed + 100_000 * i,
            stride=cfg.stride,
            supercrit_threshold=cfg.supercritical_threshold,
            record_trace=False,
            workers=workers,
        )
        records[beta] = recs
        agg = aggregate_hitting(recs)
        aggregates[beta] = agg
        if agg["n_timeouts"] == len(recs):
            aborted.append(beta)
    fit = None
    if not aborted:
        fit = fit_arrhenius(list(cfg.beta_grid), [aggregates[b] for b in cfg.beta_grid])
    return ExitTimeResult(fit, records, aggregates, tuple(aborted))


# -- nucleation maps -----------------------------------------------------------

def chebyshev_corner_distance(x: float, y: float, L: int) -> float:
    return min(
        max(abs(x - cx), abs(y - cy))
        for cx, cy in ((1, 1), (L, 1), (1, L), (L, L))
    )


def uniform_corner_fraction(L: int, radius: float) -> float:
    """Fraction of lattice cells within Chebyshev ``radius`` of a corner (the
    null hypothesis for spatially homogeneous nucleation)."""
    hits = sum(
        1
        for x in range(1, L + 1)
        for y in range(1, L + 1)
        if chebyshev_corner_distance(x, y, L) <= radius
    )
    return hits / (L * L)


@dataclass(frozen=True)
class NucleationMap:
    histogram: np.ndarray  # (L, L) event counts, histogram[x-1, y-1]
    corner_fraction: float
    corner_radius: float
    expected_uniform: float
    n_events: int
    n_timeouts: int
    records: tuple[HittingRecord, ...]


def corner_radius_default(p: Parameters) -> float:
    """Chebyshev radius l_c + 1: the critical corner droplet sits in an
    (l_c + 1)-box at the corner."""
    if p.lam > p.h > 0:
        return ls.critical_quantities(p).l_c + 1.0
    return math.floor(2.0 * p.J / (p.lam + p.h)) + 2.0


def run_nucleation_map(cfg: RunConfig, workers: int = 1, seed: Optional[int] = None) -> NucleationMap:
    """Histogram of first-supercritical-cluster centroids over the box."""
    p = cfg.parameters()
    targets = parse_targets(cfg.target)
    start = start_configuration(cfg)
    max_steps = cfg.max_steps or default_max_steps(p)
    recs = sample_exit_times(
        p,
        start,
        targets,
        cfg.replicas,
        max_steps,
        seed_base=cfg.seed if seed is None else seed,
        stride=cfg.stride,
        supercrit_threshold=cfg.supercritical_threshold,
        record_trace=False,
        workers=workers,
    )
    L = cfg.L
    hist = np.zeros((L, L), dtype=np.int64)
    radius = corner_radius_default(p)
    near = 0
    n_events = 0
    for r in recs:
        if r.timed_out or r.supercritical is None:
            continue
        # bin to the nearest cell first: under periodic translation covariance
        # the binned cell is exactly uniform, which is what the null counts
        cx, cy = r.supercritical.centroid
        bx = min(max(round(cx), 1), L)
        by = min(max(round(cy), 1), L)
        hist[bx - 1, by - 1] += 1
        n_events += 1
        if chebyshev_corner_distance(bx, by, L) <= radius:
            near += 1
    return NucleationMap(
        histogram=hist,
        corner_fraction=near / n_events if n_events else float("nan"),
        corner_radius=radius,
        expected_uniform=uniform_corner_fraction(L, radius),
        n_events=n_events,
        n_timeouts=sum(1 for r in recs if r.timed_out),
        records=tuple(recs),
    )


# -- landscape verification suite ------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # pass | fail | skip
    detail: str


def _check(name: str, ok: bool, detail: str = "") -> CheckResult:
    return CheckResult(name, "pass" if ok else "fail", detail)


def _flip_table_exactness(p: Parameters, fault: float) -> CheckResult:
    """Every table row, every flip direction, realized in the bulk and (where
    the zero count allows) on an edge or at a corner."""
    L = max(p.L, 6)
    q = p.with_(L=L)
    worst = 0.0
    realized = 0
    for row in model.flip_cost_table(q):
        counts = (row.n_minus, row.n_zero, row.n_plus)
        for s, s_new, expected in (
            (-1, 0, row.cost_minus_to_zero),
            (-1, 1, row.cost_minus_to_plus),
            (0, 1, row.cost_zero_to_plus),
        ):
            placements = [("bulk", (3, 3))]
            if row.n_zero >= 1:
                placements.append(("edge", (3, 1)))
            if row.n_zero >= 2:
                placements.append(("corner", (1, 1)))
            for kind, site in placements:
                eta = _realize_neighborhood(q, site, s, counts)
                for direction in (+1, -1):
                    a, b = (s, s_new) if direction > 0 else (s_new, s)
                    base = eta if direction > 0 else eta.with_flip(site, s_new)
                    got = model.delta_h(base, site, b, q) + fault
                    want = expected * direction
                    worst = max(worst, abs(got - want) / max(1.0, abs(want)))
                    realized += 1
    return _check(
        "flip_table_exactness",
        worst <= 1e-12,
        f"{realized} realizations, max relative error {worst:.3g}",
    )


def _realize_neighborhood(p: Parameters, site, center: int, counts) -> SpinConfiguration:
    """Configuration whose given site has exactly (n_minus, n_zero, n_plus)
    neighbors, using out-of-box neighbors as zeros at edges and corners."""
    n_minus, n_zero, n_plus = counts
    x, y = site
    grid = np.zeros((p.L, p.L), dtype=np.int8)
    grid[x - 1, y - 1] = center
    slots = []
    for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
        if 1 <= nx <= p.L and 1 <= ny <= p.L:
            slots.append((nx, ny))
    missing = 4 - len(slots)  # out-of-box slots act as zeros
    if missing > n_zero:
        raise ValueError("placement has more out-of-box neighbors than zeros in the row")
    values = [-1] * n_minus + [0] * (n_zero - missing) + [1] * n_plus
    for (nx, ny), v in zip(slots, values):
        grid[nx - 1, ny - 1] = v
    return SpinConfiguration(grid)


def _frame_identities(p: Parameters) -> CheckResult:
    L = max(p.L, 12)
    q = p.with_(L=L)
    minus_energy = model.homogeneous_energy(-1, q)
    worst = 0.0
    for kind in ls.FrameKind:
        for ell in range(1, min(5, L - 4) + 1):
            built = ls.build_frame(ls.FrameSpec(kind, ell), q)
            delta = model.hamiltonian(built, q) - minus_energy
            want = ls.frame_energy_delta(kind, ell, q)
            worst = max(worst, abs(delta - want) / max(1.0, abs(want)))
    return _check("frame_identities", worst <= 1e-12, f"max relative error {worst:.3g}")


def _reference_path_check(p: Parameters) -> CheckResult:
    if not (p.lam > p.h > p.lam / 2):
        return CheckResult("reference_path_barrier", "skip", "needs lam > h > lam/2")
    q_small = ls.critical_quantities(p)
    L = max(p.L, q_small.l_c + 4)
    q = p.with_(L=L)
    try:
        path = ls.reference_path_minus_to_plus(q)
    except (InvalidParametersError, ls.GeometryError) as exc:
        return CheckResult("reference_path_barrier", "fail", str(exc))
    gamma = ls.critical_quantities(q).gamma
    gap = path.height() - model.homogeneous_energy(-1, q) - gamma
    top = path.argmax_indices()
    saddle = ls.saddle_configuration(q)
    at_saddle = len(top) == 1 and path.config_at(top[0]) == saddle
    ok = abs(gap) <= 1e-9 and at_saddle
    return _check(
        "reference_path_barrier",
        ok,
        f"height - H(-1) - Gamma = {gap:.3g}, unique max at saddle: {at_saddle}",
    )


def _oracle_agreement(p: Parameters) -> CheckResult:
    L = min(p.L, 3)
    q = p.with_(L=L)
    space = StateSpace(q)
    minus, plus = homogeneous(-1, L), homogeneous(1, L)
    phi, _ = communication_height_exact(minus, plus, q, space=space)
    phi_threshold = communication_height_threshold(minus, plus, q, space=space)
    return _check(
        "bottleneck_vs_threshold",
        phi == phi_threshold,
        f"bottleneck {phi!r} vs threshold {phi_threshold!r} at L={L}",
    )


def _detailed_balance(p: Parameters) -> CheckResult:
    from .dynamics import detailed_balance_check

    worst = detailed_balance_check(p.with_(L=min(p.L, 6)), samples=2000, seed=7)
    return _check("detailed_balance", worst < 1e-12, f"max relative violation {worst:.3g}")


def _local_minimum_classification(p: Parameters) -> CheckResult:
    L = max(p.L, 12)
    q = p.with_(L=L)
    zero_min = ls.is_local_minimum(homogeneous(0, L), q)
    minus_min = ls.is_local_minimum(homogeneous(-1, L), q)
    if p.h > p.lam:
        ok = zero_min and not minus_min
        detail = "h > lam: zero state is a local minimum, minus state is not"
    elif p.lam > p.h:
        ok = zero_min and minus_min
        detail = "lam > h: zero and minus states are local minima"
        if p.h > p.lam / 2 and p.lam + p.h < 2 * p.J:
            frames_ok = all(
                ls.is_local_minimum(ls.build_frame(ls.FrameSpec(kind, 2), q), q)
                for kind in ls.FrameKind
            )
            ok = ok and frames_ok
            detail += f"; all five frames local minima: {frames_ok}"
    else:
        return CheckResult("local_minimum_classification", "skip", "lam == h is degenerate")
    return _check("local_minimum_classification", ok, detail)


def _homogeneous_energies(p: Parameters) -> CheckResult:
    worst = 0.0
    for v in (-1, 0, 1):
        direct = model.hamiltonian(homogeneous(v, p.L), p)
        closed = model.homogeneous_energy(v, p)
        worst = max(worst, abs(direct - closed) / max(1.0, abs(closed)))
    return _check("homogeneous_energies", worst <= 1e-12, f"max relative error {worst:.3g}")


def _saddle_identities(p: Parameters) -> CheckResult:
    if not (p.lam > p.h > 0):
        return CheckResult("saddle_identities", "skip", "needs lam > h")
    q_small = ls.critical_quantities(p)
    if q_small.l_c < 2:
        return CheckResult("saddle_identities", "skip", "l_c < 2")
    L = max(p.L, q_small.l_c + 2)
    q = p.with_(L=L)
    droplet = model.hamiltonian(ls.critical_droplet(q), q)
    proto = model.hamiltonian(ls.critical_droplet_with_protuberance(q), q)
    saddle = model.hamiltonian(ls.saddle_configuration(q), q)
    e1 = abs(proto - droplet - (2 * q.J - (q.lam + q.h) + (q.lam - q.h)))
    e2 = abs(saddle - droplet - (2 * q.J - (q.lam + q.h) + 2 * (q.lam - q.h)))
    e3 = abs(saddle - proto - (q.lam - q.h))
    worst = max(e1, e2, e3)
    return _check("saddle_identities", worst <= 1e-9, f"max absolute error {worst:.3g}")


def landscape_verification(p: Parameters, inject_fault: bool = False) -> list[CheckResult]:
    """The full invariant suite driven by ``landscape-verify``.

    ``inject_fault`` offsets the flip-energy comparison to prove the harness
    notices corruption (testing hook)."""
    fault = 1e-3 if inject_fault else 0.0
    checks = [
        _flip_table_exactness(p, fault),
        _homogeneous_energies(p),
        _detailed_balance(p),
        _frame_identities(p),
        _saddle_identities(p),
        _reference_path_check(p),
        _oracle_agreement(p),
        _local_minimum_classification(p),
    ]
    return checks
