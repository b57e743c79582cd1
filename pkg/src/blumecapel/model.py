"""Three-state spin model on the L x L box with zero boundary conditions.

Spins live in {-1, 0, +1} on Lambda = {1..L}^2.  The energy of a
configuration is

    H(eta) = J * sum_bonds (eta_i - eta_j)^2
           + J * sum_{boundary sites} mult_i * eta_i^2
           - lam * sum_i eta_i^2  -  h * sum_i eta_i

where mult_i counts the out-of-box neighbors of site i (2 at corners, 1 on
edges, 0 in the bulk).  The boundary term is identical to freezing a frame
of zero spins around the box, so single-flip energy differences at the
boundary reuse the bulk formula with out-of-box neighbors counted as zeros.

A periodic variant (no boundary term, wrapped bonds) is available behind
the same interface for comparison experiments.

Configurations are immutable value types; mutation is explicit copy-and-flip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy import ndimage

from .errors import InconsistentParametersError
from .lattice import Site

SPIN_VALUES = (-1, 0, 1)
SPIN_CHARS = {-1: "-", 0: "0", 1: "+"}
CHAR_SPINS = {c: s for s, c in SPIN_CHARS.items()}

ZERO_BOUNDARY = "zero"
PERIODIC = "periodic"

# clusters are unions of closed unit squares centered at the sites, so squares
# touching at a corner are connected: 8-connectivity (unlike the 4-connected
# site sets of the lattice module)
_CLUSTER_STRUCTURE = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Parameters:
    """Model parameters: coupling J > 0, chemical potential lam, field h,
    box side L >= 2, inverse temperature beta (dynamics only)."""

    J: float
    lam: float
    h: float
    L: int
    beta: float = 1.0
    boundary: str = ZERO_BOUNDARY

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.boundary not in (ZERO_BOUNDARY, PERIODIC):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")

    @property
    def n_sites(self) -> int:
        return self.L * self.L

    def with_(self, **changes) -> "Parameters":
        return replace(self, **changes)


class SpinConfiguration:
    """Immutable L x L grid of spins in {-1, 0, +1}.

    ``spins[x-1, y-1]`` is the spin at site (x, y).  Two configurations are
    communicating iff they differ at most at one site.
    """

    __slots__ = ("spins",)

    def __init__(self, spins):
        arr = np.array(spins, dtype=np.int8)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square grid, got shape {arr.shape}")
        if not np.isin(arr, (-1, 0, 1)).all():
            raise ValueError("spins must lie in {-1, 0, +1}")
        arr.setflags(write=False)
        object.__setattr__(self, "spins", arr)

    def __setattr__(self, name, value):
        raise AttributeError("SpinConfiguration is immutable")

    @property
    def L(self) -> int:
        return self.spins.shape[0]

    def spin_at(self, site: Site) -> int:
        x, y = site
        return int(self.spins[x - 1, y - 1])

    def with_flip(self, site: Site, value: int) -> "SpinConfiguration":
        if value not in SPIN_VALUES:
            raise ValueError(f"invalid spin value {value}")
        x, y = site
        out = np.array(self.spins)
        out[x - 1, y - 1] = value
        return SpinConfiguration(out)

    def counts(self) -> tuple[int, int, int]:
        """(n_minus, n_zero, n_plus)."""
        flat = self.spins.ravel()
        return (
            int(np.count_nonzero(flat == -1)),
            int(np.count_nonzero(flat == 0)),
            int(np.count_nonzero(flat == 1)),
        )

    def communicates_with(self, other: "SpinConfiguration") -> bool:
        if self.L != other.L:
            return False
        return int(np.count_nonzero(self.spins != other.spins)) <= 1

    def writable_spins(self) -> np.ndarray:
        return np.array(self.spins)

    def __eq__(self, other):
        return isinstance(other, SpinConfiguration) and np.array_equal(
            self.spins, other.spins
        )

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash((self.L, self.spins.tobytes()))

    def __reduce__(self):
        # __setattr__ is blocked, so pickle through the constructor
        return (SpinConfiguration, (np.array(self.spins),))

    def __repr__(self):
        return f"SpinConfiguration(L={self.L})"

    def render(self) -> str:
        """Text rendering, row y=L first."""
        lines = []
        for y in range(self.L, 0, -1):
            lines.append("".join(SPIN_CHARS[int(s)] for s in self.spins[:, y - 1]))
        return "\n".join(lines)


def homogeneous(value: int, L: int) -> SpinConfiguration:
    if value not in SPIN_VALUES:
        raise ValueError(f"invalid spin value {value}")
    return SpinConfiguration(np.full((L, L), value, dtype=np.int8))


@lru_cache(maxsize=None)
def boundary_multiplicity(L: int) -> np.ndarray:
    """Out-of-box neighbor count per site: 2 at corners, 1 on edges, 0 in bulk."""
    mult = np.zeros((L, L), dtype=np.int8)
    mult[0, :] += 1
    mult[-1, :] += 1
    mult[:, 0] += 1
    mult[:, -1] += 1
    mult.setflags(write=False)
    return mult


def lattice_energy(spins, J: float, lam: float, h: float, boundary: str = ZERO_BOUNDARY):
    """Energy of one configuration or a batch (leading axes preserved).

    ``spins`` has shape (..., L, L); the result has shape (...,).
    """
    s = np.asarray(spins, dtype=np.float64)
    L = s.shape[-1]
    axes = (-2, -1)
    if boundary == ZERO_BOUNDARY:
        bonds = ((s[..., 1:, :] - s[..., :-1, :]) ** 2).sum(axis=axes) + (
            (s[..., :, 1:] - s[..., :, :-1]) ** 2
        ).sum(axis=axes)
        bterm = (boundary_multiplicity(L) * s * s).sum(axis=axes)
    elif boundary == PERIODIC:
        bonds = ((s - np.roll(s, 1, axis=-2)) ** 2).sum(axis=axes) + (
            (s - np.roll(s, 1, axis=-1)) ** 2
        ).sum(axis=axes)
        bterm = 0.0
    else:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    return J * bonds + J * bterm - lam * (s * s).sum(axis=axes) - h * s.sum(axis=axes)


def hamiltonian(eta: SpinConfiguration, p: Parameters) -> float:
    if eta.L != p.L:
        raise ValueError(f"configuration side {eta.L} != parameter side {p.L}")
    return float(lattice_energy(eta.spins, p.J, p.lam, p.h, p.boundary))


def homogeneous_energy(value: int, p: Parameters) -> float:
    """Closed form H(+-1) = 4JL - L^2 (lam +- h), H(0) = 0 (zero boundary)."""
    if p.boundary != ZERO_BOUNDARY:
        return hamiltonian(homogeneous(value, p.L), p)
    if value == 0:
        return 0.0
    return 4.0 * p.J * p.L - p.L * p.L * (p.lam + value * p.h)


def flip_cost(s: int, s_new: int, nbr_sum: int, p: Parameters) -> float:
    """Energy difference for flipping a spin s -> s_new given the sum of its
    four neighbor values (out-of-box neighbors count as zeros)."""
    ds2 = float(s_new * s_new - s * s)
    ds = float(s_new - s)
    return p.J * (4.0 * ds2 - 2.0 * ds * nbr_sum) - p.lam * ds2 - p.h * ds


def neighbor_sum_array(spins: np.ndarray, x: int, y: int, boundary: str = ZERO_BOUNDARY) -> int:
    """Sum of the four neighbor spins of site (x, y); out-of-box counts as 0."""
    L = spins.shape[0]
    if boundary == PERIODIC:
        return (
            int(spins[x % L, y - 1])
            + int(spins[(x - 2) % L, y - 1])
            + int(spins[x - 1, y % L])
            + int(spins[x - 1, (y - 2) % L])
        )
    total = 0
    if x < L:
        total += int(spins[x, y - 1])
    if x > 1:
        total += int(spins[x - 2, y - 1])
    if y < L:
        total += int(spins[x - 1, y])
    if y > 1:
        total += int(spins[x - 1, y - 2])
    return total


def neighbor_spin_sum(eta: SpinConfiguration, site: Site, p: Parameters) -> int:
    x, y = site
    return neighbor_sum_array(eta.spins, x, y, p.boundary)


def delta_h(eta: SpinConfiguration, site: Site, new_spin: int, p: Parameters) -> float:
    """O(1) energy difference H(eta') - H(eta) for a single-site flip.

    Reproduces the closed-form flip table exactly; out-of-box neighbors enter
    as zeros, which is what the boundary interaction term prescribes.
    """
    if eta.L != p.L:
        raise ValueError(f"configuration side {eta.L} != parameter side {p.L}")
    x, y = site
    if not (1 <= x <= p.L and 1 <= y <= p.L):
        raise ValueError(f"site {site} outside the {p.L}x{p.L} box")
    if new_spin not in SPIN_VALUES:
        raise ValueError(f"invalid spin value {new_spin}")
    s = eta.spin_at(site)
    if new_spin == s:
        raise ValueError(f"flip at {site} must change the spin (currently {s})")
    return flip_cost(s, new_spin, neighbor_spin_sum(eta, site, p), p)


@dataclass(frozen=True)
class FlipCostRow:
    """Closed-form flip costs for one neighborhood (counts sum to 4)."""

    n_minus: int
    n_zero: int
    n_plus: int
    cost_minus_to_zero: float
    cost_minus_to_plus: float
    cost_zero_to_plus: float


def flip_cost_table(p: Parameters) -> list[FlipCostRow]:
    """All 15 neighborhood rows; reversed flips carry the opposite sign."""
    rows = []
    for n_minus in range(4, -1, -1):
        for n_zero in range(4 - n_minus, -1, -1):
            n_plus = 4 - n_minus - n_zero
            nbr_sum = n_plus - n_minus
            rows.append(
                FlipCostRow(
                    n_minus,
                    n_zero,
                    n_plus,
                    flip_cost(-1, 0, nbr_sum, p),
                    flip_cost(-1, 1, nbr_sum, p),
                    flip_cost(0, 1, nbr_sum, p),
                )
            )
    return rows


@dataclass(frozen=True)
class HierarchyReport:
    """Computed homogeneous-state energies and their ordering."""

    energies: dict
    ordering: tuple  # spin values, ascending energy
    expected: tuple
    consistent: bool
    degenerate: bool  # lam == h


def energy_hierarchy(p: Parameters, strict: bool = True) -> HierarchyReport:
    """Order H(+1), H(0), H(-1) by direct evaluation and compare with the
    theoretical ordering for the (lam, h) region: (+1, 0, -1) for h >= lam,
    (+1, -1, 0) for h < lam.

    The theoretical ordering holds only for L large enough; a mismatch at
    small L raises (or is reported with ``strict=False``).
    """
    energies = {v: homogeneous_energy(v, p) for v in (1, 0, -1)}
    ordering = tuple(sorted(energies, key=energies.get))
    expected = (1, 0, -1) if p.h >= p.lam else (1, -1, 0)
    consistent = ordering == expected and len(set(energies.values())) == 3
    if strict and not consistent:
        raise InconsistentParametersError(
            "homogeneous-state energies "
            f"{ {k: round(v, 6) for k, v in energies.items()} } do not realize the "
            f"theoretical ordering {expected} (L too small or parameters outside "
            "the smallness condition)"
        )
    return HierarchyReport(energies, ordering, expected, consistent, p.lam == p.h)


def _label_clusters(mask: np.ndarray, periodic: bool = False) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=_CLUSTER_STRUCTURE)
    if periodic and n > 1:
        # merge labels across the two seams, including the diagonal contacts
        pairs = set()
        L = mask.shape[0]
        for i in range(L):
            for k in (-1, 0, 1):
                j = (i + k) % L
                a, b = labels[0, i], labels[-1, j]
                if a and b and a != b:
                    pairs.add((a, b))
                a, b = labels[i, 0], labels[j, -1]
                if a and b and a != b:
                    pairs.add((a, b))
        parent = list(range(n + 1))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a, b in pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        remap = np.array([find(i) for i in range(n + 1)])
        labels = remap[labels]
    return labels


def clusters_of(eta: SpinConfiguration, value: int, periodic: bool = False) -> list[frozenset[Site]]:
    """Clusters of {site : eta(site) = value}, sorted by smallest member.

    A cluster is a maximal connected union of closed unit squares centered at
    the sites; squares sharing only a corner point still connect.
    """
    mask = eta.spins == value
    labels = _label_clusters(mask, periodic)
    out = {}
    xs, ys = np.nonzero(labels)
    for x, y in zip(xs, ys):
        out.setdefault(int(labels[x, y]), set()).add((int(x) + 1, int(y) + 1))
    parts = [frozenset(s) for s in out.values()]
    parts.sort(key=min)
    return parts


def gibbs_ratio(eta: SpinConfiguration, eta_prime: SpinConfiguration, p: Parameters) -> float:
    """mu_beta(eta') / mu_beta(eta) = exp(-beta (H(eta') - H(eta))); the
    partition function never enters."""
    if eta.L != eta_prime.L:
        raise ValueError("configurations must share the same box")
    return math.exp(-p.beta * (hamiltonian(eta_prime, p) - hamiltonian(eta, p)))


# -- validity of the asymptotic-regime assumptions ---------------------------

NON_INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class ConditionItem:
    passed: bool
    detail: str
    applicable: bool = True


@dataclass(frozen=True)
class ConditionReport:
    """Per-item report for the smallness / box-size / non-integrality gates."""

    item1: ConditionItem
    item2: ConditionItem  # asymptotic only: rarely satisfiable at desk scale
    item3: ConditionItem
    ratios: dict = field(default_factory=dict)

    @property
    def hard_pass(self) -> bool:
        """Items 1 and 3; item 2 is informational."""
        return self.item1.passed and self.item3.passed


def validate_condition(p: Parameters, smallness: float = 10.0) -> ConditionReport:
    """Check the three parameter gates: 0 < lam, h << J (operationalized as
    lam, h < J/smallness), L > (2J/(lam-h))^3 when lam > h, and
    non-integrality of the four critical ratios (tolerance 1e-9)."""
    ok1 = 0 < p.h < p.J / smallness and 0 < p.lam < p.J / smallness
    item1 = ConditionItem(
        ok1,
        f"requires 0 < lam, h < J/{smallness:g} = {p.J / smallness:g}; "
        f"lam={p.lam:g}, h={p.h:g}",
    )

    if p.lam > p.h:
        threshold = (2.0 * p.J / (p.lam - p.h)) ** 3
        item2 = ConditionItem(
            p.L > threshold,
            f"asymptotic_only: requires L > (2J/(lam-h))^3 = {threshold:.6g}; L={p.L}",
        )
    else:
        item2 = ConditionItem(
            False,
            "undefined for lam <= h (ratio 2J/(lam-h) has no positive cube)",
            applicable=False,
        )

    ratios = {}
    ok3 = True
    specs = [
        ("2J/(lam+h)", 2.0 * p.J, p.lam + p.h),
        ("2J/(lam-h)", 2.0 * p.J, p.lam - p.h),
        ("(2J+lam-h)/(lam+h)", 2.0 * p.J + p.lam - p.h, p.lam + p.h),
        ("(J+lam+h)/h", p.J + p.lam + p.h, p.h),
    ]
    for name, num, den in specs:
        if den == 0:
            ratios[name] = (math.inf, False)
            ok3 = False
            continue
        value = num / den
        non_integer = abs(value - round(value)) > NON_INTEGER_TOL
        ratios[name] = (value, non_integer)
        ok3 = ok3 and non_integer
    item3 = ConditionItem(ok3, "all four ratios must be non-integer (tol 1e-9)")
    return ConditionReport(item1, item2, item3, ratios)


# -- snapshot text format -----------------------------------------------------

def save_snapshot(path, eta: SpinConfiguration, p: Parameters) -> None:
    """Write ``L J lambda h`` then L rows of {-,0,+}, row y=L first."""
    with open(path, "w") as fh:
        fh.write(f"{eta.L} {p.J!r} {p.lam!r} {p.h!r}\n")
        fh.write(eta.render())
        fh.write("\n")


def load_snapshot(path) -> tuple[SpinConfiguration, dict]:
    """Read the snapshot text format back; bit-exact round trip."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError(f"{path}: malformed snapshot header")
        L = int(header[0])
        meta = {"J": float(header[1]), "lam": float(header[2]), "h": float(header[3])}
        grid = np.zeros((L, L), dtype=np.int8)
        rows = fh.read().splitlines()
        if len(rows) != L:
            raise ValueError(f"{path}: expected {L} grid rows, got {len(rows)}")
        for row, line in enumerate(rows):
            if len(line) != L:
                raise ValueError(f"{path}: row {row + 1} has length {len(line)} != {L}")
            y = L - row
            for i, ch in enumerate(line):
                if ch not in CHAR_SPINS:
                    raise ValueError(f"{path}: invalid spin character {ch!r}")
                grid[i, y - 1] = CHAR_SPINS[ch]
    return SpinConfiguration(grid), meta
