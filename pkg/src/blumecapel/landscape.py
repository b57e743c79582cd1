"""Energy-landscape structure: paths, droplet frames, critical quantities,
reference paths, and manifold minima.

All constructions here assume zero boundary conditions and a sea of minuses
unless stated otherwise.  The five local-minimum frames are an internal plus
square of side ell wrapped by a one-site zero layer whose shape depends on
where the square sits (bulk, against a wall, near or in a corner); the zero
layer never includes the diagonal ring corners.  Canonical placements anchor
at the south-west; the other corners and walls are reached by reflecting the
canonical configuration, which is an exact symmetry of the energy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .errors import GeometryError, InconsistentParametersError, InvalidParametersError, UnsupportedSizeError
from .lattice import Site
from .model import (
    ZERO_BOUNDARY,
    Parameters,
    SpinConfiguration,
    flip_cost,
    hamiltonian,
    homogeneous,
    homogeneous_energy,
    lattice_energy,
    neighbor_sum_array,
    validate_condition,
)

HEIGHT_TOL = 1e-9


# -- paths ---------------------------------------------------------------------

class Path:
    """Sequence of single-flip-communicating configurations.

    Stored sparsely as the start configuration plus a flip list; per-step
    energies are maintained incrementally.  ``marks`` maps milestone names to
    indices into the energy sequence.
    """

    def __init__(self, start: SpinConfiguration, p: Parameters):
        if start.L != p.L:
            raise ValueError("start configuration does not match parameter box side")
        self._p = p
        self._start = start
        self._scratch = start.writable_spins()
        self._flips: list[tuple[Site, int, int]] = []  # (site, old, new)
        self._energies = [hamiltonian(start, p)]
        self.marks: dict[str, int] = {}

    @property
    def params(self) -> Parameters:
        return self._p

    @property
    def start(self) -> SpinConfiguration:
        return self._start

    @property
    def end(self) -> SpinConfiguration:
        return SpinConfiguration(self._scratch)

    @property
    def flips(self) -> tuple[tuple[Site, int, int], ...]:
        return tuple(self._flips)

    @property
    def energies(self) -> np.ndarray:
        return np.array(self._energies)

    def __len__(self) -> int:
        return len(self._flips) + 1

    def append_flip(self, site: Site, new_spin: int) -> None:
        x, y = site
        if not (1 <= x <= self._p.L and 1 <= y <= self._p.L):
            raise ValueError(f"site {site} outside the box")
        cur = int(self._scratch[x - 1, y - 1])
        if new_spin == cur:
            raise ValueError(f"flip at {site} must change the spin (currently {cur})")
        d = flip_cost(cur, new_spin, neighbor_sum_array(self._scratch, x, y, self._p.boundary), self._p)
        self._scratch[x - 1, y - 1] = new_spin
        self._flips.append((site, cur, new_spin))
        self._energies.append(self._energies[-1] + d)

    def mark(self, name: str) -> None:
        self.marks[name] = len(self._flips)

    def height(self) -> float:
        return max(self._energies)

    def argmax_indices(self, tol: float = 0.0) -> list[int]:
        top = max(self._energies)
        return [i for i, e in enumerate(self._energies) if e >= top - tol]

    def config_at(self, index: int) -> SpinConfiguration:
        if not 0 <= index <= len(self._flips):
            raise IndexError(index)
        spins = self._start.writable_spins()
        for (x, y), _, new in self._flips[:index]:
            spins[x - 1, y - 1] = new
        return SpinConfiguration(spins)

    def configs(self):
        spins = self._start.writable_spins()
        yield SpinConfiguration(spins)
        for (x, y), _, new in self._flips:
            spins[x - 1, y - 1] = new
            yield SpinConfiguration(spins)

    @classmethod
    def from_flips(cls, start: SpinConfiguration, p: Parameters, flips: Iterable[tuple[Site, int]]) -> "Path":
        path = cls(start, p)
        for site, new in flips:
            path.append_flip(site, new)
        return path


def path_height(path: Path) -> float:
    """Maximal energy along the path (a constant path has its own energy)."""
    energies = path.energies
    if len(energies) == 0:
        raise ValueError("empty path has no height")
    return float(max(energies))


def is_local_minimum(eta: SpinConfiguration, p: Parameters) -> bool:
    """True iff every one of the 2 L^2 single-spin flips strictly increases energy."""
    spins = eta.spins
    for x in range(1, p.L + 1):
        for y in range(1, p.L + 1):
            cur = int(spins[x - 1, y - 1])
            total = neighbor_sum_array(spins, x, y, p.boundary)
            for new in (-1, 0, 1):
                if new == cur:
                    continue
                if flip_cost(cur, new, total, p) <= 0:
                    return False
    return True


# -- droplet frames --------------------------------------------------------------

class FrameKind(str, Enum):
    FRAME = "frame"
    BOUNDARY_FRAME = "boundary_frame"
    CORNER_FRAME = "corner_frame"
    CHOPPED_CORNER_FRAME = "chopped_corner_frame"
    CHOPPED_BOUNDARY_FRAME = "chopped_boundary_frame"


@dataclass(frozen=True)
class FrameSpec:
    """A frame kind with its internal plus-square side and placement.

    ``anchor`` is kind-dependent: the square's min corner for FRAME, the
    square's lowest row for the two wall kinds (west wall; other walls via
    ``reflect``), ignored for the corner kinds.  ``corner`` picks one of
    sw/se/nw/ne for the corner kinds.
    """

    kind: FrameKind
    ell: int
    anchor: Optional[Site] = None
    corner: str = "sw"
    wall: str = "w"


_CORNERS = ("sw", "se", "nw", "ne")
_WALLS = ("w", "e", "s", "n")


def _reflect_to_corner(spins: np.ndarray, corner: str) -> np.ndarray:
    if corner not in _CORNERS:
        raise ValueError(f"unknown corner {corner!r}")
    out = spins
    if corner in ("se", "ne"):
        out = out[::-1, :]
    if corner in ("nw", "ne"):
        out = out[:, ::-1]
    return np.ascontiguousarray(out)


def _reflect_to_wall(spins: np.ndarray, wall: str) -> np.ndarray:
    if wall not in _WALLS:
        raise ValueError(f"unknown wall {wall!r}")
    if wall == "w":
        return spins
    if wall == "e":
        return np.ascontiguousarray(spins[::-1, :])
    if wall == "s":
        return np.ascontiguousarray(spins.T)
    return np.ascontiguousarray(spins.T[:, ::-1])  # north


def build_frame(spec: FrameSpec, p: Parameters) -> SpinConfiguration:
    """Construct a frame configuration in the sea of minuses.

    The placement must leave the zero layer's outer neighbors inside the box
    (that is what makes the closed-form energies exact), otherwise a
    GeometryError is raised.
    """
    _require_zero_boundary(p)
    L, ell = p.L, spec.ell
    if ell < 1:
        raise GeometryError("internal square side must be >= 1")
    grid = np.full((L, L), -1, dtype=np.int8)

    def plus_block(x0, y0, w, h):
        grid[x0 - 1 : x0 - 1 + w, y0 - 1 : y0 - 1 + h] = 1

    def zero_run(x0, y0, w, h):
        grid[x0 - 1 : x0 - 1 + w, y0 - 1 : y0 - 1 + h] = 0

    kind = spec.kind
    if kind == FrameKind.FRAME:
        if ell > L - 4:
            raise GeometryError(f"frame with ell={ell} does not fit in L={L}")
        cx, cy = spec.anchor if spec.anchor else ((L - ell) // 2 + 1, (L - ell) // 2 + 1)
        if not (3 <= cx and 3 <= cy and cx + ell + 1 <= L and cy + ell + 1 <= L):
            raise GeometryError("frame must sit at least two sites away from every wall")
        plus_block(cx, cy, ell, ell)
        zero_run(cx - 1, cy, 1, ell)
        zero_run(cx + ell, cy, 1, ell)
        zero_run(cx, cy - 1, ell, 1)
        zero_run(cx, cy + ell, ell, 1)
    elif kind == FrameKind.BOUNDARY_FRAME:
        cy = spec.anchor[1] if spec.anchor else (L - ell) // 2 + 1
        if not (3 <= cy and cy + ell + 1 <= L and ell + 3 <= L):
            raise GeometryError(f"boundary frame with ell={ell} does not fit in L={L}")
        plus_block(2, cy, ell, ell)
        zero_run(1, cy - 1, 1, ell + 2)  # wall-side column, extended both ways
        zero_run(2, cy + ell, ell, 1)
        zero_run(2, cy - 1, ell, 1)
        zero_run(ell + 2, cy, 1, ell)
        grid = _reflect_to_wall(grid, spec.wall)
    elif kind == FrameKind.CORNER_FRAME:
        if ell + 3 > L:
            raise GeometryError(f"corner frame with ell={ell} does not fit in L={L}")
        plus_block(2, 2, ell, ell)
        zero_run(1, 1, 1, ell + 2)  # wall column through the box corner
        zero_run(2, 1, ell + 1, 1)  # wall row, extended one past the square
        zero_run(2, ell + 2, ell, 1)
        zero_run(ell + 2, 2, 1, ell)
        grid = _reflect_to_corner(grid, spec.corner)
    elif kind == FrameKind.CHOPPED_CORNER_FRAME:
        if ell + 2 > L:
            raise GeometryError(f"chopped corner frame with ell={ell} does not fit in L={L}")
        plus_block(1, 1, ell, ell)
        zero_run(ell + 1, 1, 1, ell)
        zero_run(1, ell + 1, ell, 1)
        grid = _reflect_to_corner(grid, spec.corner)
    elif kind == FrameKind.CHOPPED_BOUNDARY_FRAME:
        cy = spec.anchor[1] if spec.anchor else (L - ell) // 2 + 1
        if not (3 <= cy and cy + ell + 1 <= L and ell + 2 <= L):
            raise GeometryError(f"chopped boundary frame with ell={ell} does not fit in L={L}")
        plus_block(1, cy, ell, ell)
        zero_run(ell + 1, cy, 1, ell)
        zero_run(1, cy + ell, ell, 1)
        zero_run(1, cy - 1, ell, 1)
        grid = _reflect_to_wall(grid, spec.wall)
    else:
        raise ValueError(f"unknown frame kind {kind!r}")
    return SpinConfiguration(grid)


def frame_energy_delta(kind: FrameKind, ell: int, p: Parameters) -> float:
    """Closed-form energy of the frame above the all-minus state."""
    if ell < 1:
        raise ValueError("internal square side must be >= 1")
    J, lam, h = p.J, p.lam, p.h
    d = lam - h
    if kind == FrameKind.FRAME:
        return -2 * h * ell**2 + 4 * J * ell + 4 * J * (ell + 2) + 4 * ell * d
    if kind == FrameKind.BOUNDARY_FRAME:
        return -2 * h * ell**2 + 4 * J * ell + 2 * J * (ell + 2) + (4 * ell + 2) * d
    if kind == FrameKind.CORNER_FRAME:
        return -2 * h * ell**2 + 4 * J * ell + (4 * ell + 3) * d
    if kind == FrameKind.CHOPPED_CORNER_FRAME:
        return -2 * h * ell**2 + 2 * J * ell + 2 * J * (ell + 1) - 2 * J + 2 * ell * d
    if kind == FrameKind.CHOPPED_BOUNDARY_FRAME:
        return -2 * h * ell**2 + 3 * J * ell + J * (3 * ell + 2) + 3 * ell * d
    raise ValueError(f"unknown frame kind {kind!r}")


# -- corner droplet rectangles and the critical configurations -------------------

def chopped_corner_rectangle(m: int, n: int, p: Parameters, corner: str = "sw") -> SpinConfiguration:
    """m-by-n plus rectangle in a box corner, wrapped by a one-site zero layer
    on its two interior sides, in a sea of minuses."""
    _require_zero_boundary(p)
    if m < 1 or n < 1:
        raise GeometryError("rectangle sides must be >= 1")
    if m + 1 > p.L or n + 1 > p.L:
        raise GeometryError(f"{m}x{n} corner rectangle does not fit in L={p.L}")
    grid = np.full((p.L, p.L), -1, dtype=np.int8)
    grid[:m, :n] = 1
    grid[m, :n] = 0
    grid[:m, n] = 0
    return SpinConfiguration(_reflect_to_corner(grid, corner))


def chopped_corner_rectangle_delta(m: int, n: int, p: Parameters) -> float:
    """Closed-form energy of the corner rectangle above the all-minus state:
    2J(n+m) + lam (n+m) - h (2mn + n + m).  Exact while the zero layer's outer
    neighbors are inside the box (m, n <= L-2)."""
    J, lam, h = p.J, p.lam, p.h
    return 2 * J * (n + m) + lam * (n + m) - h * (2 * m * n + n + m)


@dataclass(frozen=True)
class CriticalQuantities:
    """Derived droplet quantities for lam > h > 0."""

    l_c: int
    gamma: float
    gamma_star: float
    l_plus: int
    l_F: int
    l_tilde: int
    n_tilde: int
    n_plus_c: int

    def as_rows(self) -> list[tuple[str, float]]:
        return [
            ("l_c", self.l_c),
            ("gamma", self.gamma),
            ("gamma_star", self.gamma_star),
            ("l_plus", self.l_plus),
            ("l_F", self.l_F),
            ("l_tilde", self.l_tilde),
            ("n_tilde", self.n_tilde),
            ("n_plus_c", self.n_plus_c),
        ]


def critical_quantities(p: Parameters) -> CriticalQuantities:
    """Critical side length, energy barrier, and the auxiliary lengths."""
    if not (p.lam > p.h > 0):
        raise InvalidParametersError(
            f"critical quantities require lam > h > 0, got lam={p.lam}, h={p.h}"
        )
    J, lam, h = p.J, p.lam, p.h
    l_c = math.floor((2 * J + lam - h) / (2 * h)) + 1
    gamma = 4 * J * l_c + 2 * lam * l_c - 2 * h * l_c**2 - 2 * h
    return CriticalQuantities(
        l_c=l_c,
        gamma=gamma,
        gamma_star=2 * J * J / h,
        l_plus=math.ceil(2 * J / (lam + h)),
        l_F=math.floor((2 * J + lam - h) / h),
        l_tilde=math.floor((J + lam + h) / h),
        n_tilde=math.floor(2 * J / (lam + h)) + 1,
        n_plus_c=l_c * (l_c - 1),
    )


def _critical_flips(l_c: int) -> list[tuple[Site, int]]:
    # the two-flip protuberance and the further zero that tops the saddle
    return [((l_c + 1, 1), 0), ((l_c, 1), 1), ((l_c + 1, 2), 0)]


def critical_droplet(p: Parameters, corner: str = "sw") -> SpinConfiguration:
    """Minimal-energy configuration with l_c (l_c - 1) pluses: the quasi-square
    corner rectangle of sides l_c - 1 and l_c."""
    q = critical_quantities(p)
    _require_room(q.l_c, p)
    return chopped_corner_rectangle(q.l_c - 1, q.l_c, p, corner)


def critical_droplet_with_protuberance(p: Parameters, corner: str = "sw") -> SpinConfiguration:
    """Critical droplet plus a single protuberance along the wall: one more
    zero at distance one from the droplet, converted into the new plus."""
    q = critical_quantities(p)
    _require_room(q.l_c, p)
    grid = critical_droplet(p).writable_spins()
    for (x, y), new in _critical_flips(q.l_c)[:2]:
        grid[x - 1, y - 1] = new
    return SpinConfiguration(_reflect_to_corner(grid, corner))


def saddle_configuration(p: Parameters, corner: str = "sw") -> SpinConfiguration:
    """The protuberance droplet with the next wall-adjacent minus turned zero;
    optimal crossings of the barrier pass through this shape."""
    q = critical_quantities(p)
    _require_room(q.l_c, p)
    grid = critical_droplet(p).writable_spins()
    for (x, y), new in _critical_flips(q.l_c):
        grid[x - 1, y - 1] = new
    return SpinConfiguration(_reflect_to_corner(grid, corner))


def _require_room(l_c: int, p: Parameters) -> None:
    if l_c < 2:
        raise InvalidParametersError(
            f"critical side length l_c={l_c} < 2: no quasi-square droplet exists"
        )
    if l_c + 2 > p.L:
        raise GeometryError(f"critical droplet needs l_c + 2 = {l_c + 2} <= L = {p.L}")


def _require_zero_boundary(p: Parameters) -> None:
    if p.boundary != ZERO_BOUNDARY:
        raise InvalidParametersError("landscape constructions assume zero boundary conditions")


# -- reference paths ---------------------------------------------------------------

def _transpose_flips(flips):
    return [(((y, x)), v) for ((x, y)), v in flips]


def _vertical_growth_variants(m: int, n: int) -> list[list[tuple[Site, int]]]:
    """Flip sequences taking the m-by-n corner rectangle to m-by-(n+1).

    The row is laid down from the wall outward: minus -> zero one site ahead
    of each new plus.  The last plus of the row needs the zero above it and
    the zero at the old layer corner in place first (wall-first endgame) or
    accepts a bond with the minus above (interior-first endgame); which one
    peaks lower depends on the parameters, so both variants are returned.
    """
    if m == 1:
        return [[((1, n + 2), 0), ((2, n + 1), 0), ((1, n + 1), 1)]]
    base: list[tuple[Site, int]] = [((1, n + 2), 0), ((1, n + 1), 1)]
    for k in range(2, m):
        base += [((k, n + 2), 0), ((k, n + 1), 1)]
    zero_first = base + [((m, n + 2), 0), ((m + 1, n + 1), 0), ((m, n + 1), 1)]
    plus_first = base + [((m, n + 2), 0), ((m, n + 1), 1), ((m + 1, n + 1), 0)]
    return [zero_first, plus_first]


def _horizontal_growth_variants(m: int, n: int) -> list[list[tuple[Site, int]]]:
    return [_transpose_flips(v) for v in _vertical_growth_variants(n, m)]


def _peak_of(path: Path, flips) -> float:
    """Energy peak the flips would reach, evaluated on scratch and undone."""
    spins = path._scratch
    p = path.params
    saved = []
    e = path._energies[-1]
    peak = e
    for (x, y), new in flips:
        cur = int(spins[x - 1, y - 1])
        e += flip_cost(cur, new, neighbor_sum_array(spins, x, y, p.boundary), p)
        saved.append(((x, y), cur))
        spins[x - 1, y - 1] = new
        peak = max(peak, e)
    for (x, y), old in reversed(saved):
        spins[x - 1, y - 1] = old
    return peak


def _append_lowest_peak(path: Path, variants) -> None:
    best = min(variants, key=lambda fl: _peak_of(path, fl))
    for site, new in best:
        path.append_flip(site, new)


def reference_path_minus_to_plus(p: Parameters, check: bool = True) -> Path:
    """Flip-by-flip path from all-minus to all-plus through growing corner
    droplets: corner zeros, corner plus, then alternating vertical/horizontal
    layer growth through squares and quasi-squares, and a final sweep once the
    droplet spans the box.

    The path height above H(all-minus) equals the energy barrier, attained at
    the saddle configuration; with ``check=True`` this is verified to 1e-9 and
    violations raise (they occur only outside the quasi-square regime, e.g.
    l_c = 2 with lam + h < 2J, where every flip order pays an extra lam - h).
    """
    _require_zero_boundary(p)
    if not (p.lam > p.h > p.lam / 2):
        raise InvalidParametersError(
            f"reference path requires lam > h > lam/2, got lam={p.lam}, h={p.h}"
        )
    q = critical_quantities(p)
    _require_room(q.l_c, p)
    L = p.L
    path = Path(homogeneous(-1, L), p)

    # corner seed: three minus-to-zero flips, then the corner plus
    for site, new in [((1, 1), 0), ((2, 1), 0), ((1, 2), 0), ((1, 1), 1)]:
        path.append_flip(site, new)
    path.mark("F:1,1")

    m = n = 1
    while not (m == L - 1 and n == L - 1):
        if n == m:
            _append_lowest_peak(path, _vertical_growth_variants(m, n))
            n += 1
        else:
            _append_lowest_peak(path, _horizontal_growth_variants(m, n))
            m += 1
        path.mark(f"F:{m},{n}")

    # the droplet now spans all but the last column and row of zeros
    path.append_flip((L, L), 0)
    for k in range(1, L):
        path.append_flip((L, k), 1)
    for k in range(1, L):
        path.append_flip((k, L), 1)
    path.append_flip((L, L), 1)

    if path.end != homogeneous(1, L):
        raise AssertionError("reference path failed to terminate at all-plus")
    if check:
        gap = path.height() - (homogeneous_energy(-1, p) + q.gamma)
        if abs(gap) > HEIGHT_TOL:
            raise InconsistentParametersError(
                f"reference path height differs from the barrier by {gap:.3g}; "
                "these parameters are outside the regime where the quasi-square "
                "route attains the barrier exactly"
            )
    return path


def reference_path_zero_to_plus(p: Parameters, seed_site: Site = (1, 1)) -> Path:
    """Flip-by-flip nucleation path from all-zero to all-plus via plus
    rectangles growing as close to quasi-squares as the walls allow.  With a
    zero background the energy profile is independent of the seed site."""
    _require_zero_boundary(p)
    if p.lam + p.h <= 0:
        raise InvalidParametersError("zero-background growth requires lam + h > 0")
    n_tilde = math.floor(2 * p.J / (p.lam + p.h)) + 1
    if n_tilde + 1 > p.L:
        raise GeometryError(
            f"critical square side {n_tilde} + 1 exceeds L = {p.L}; no room to nucleate"
        )
    L = p.L
    sx, sy = seed_site
    if not (1 <= sx <= L and 1 <= sy <= L):
        raise GeometryError(f"seed site {seed_site} outside the box")
    path = Path(homogeneous(0, L), p)
    path.append_flip(seed_site, 1)
    x0 = x1 = sx
    y0 = y1 = sy
    path.mark("R:1x1")
    while (x1 - x0 + 1) < L or (y1 - y0 + 1) < L:
        w, ht = x1 - x0 + 1, y1 - y0 + 1
        grow_x = (w <= ht and (x1 < L or x0 > 1)) or ht == L
        if grow_x:
            if x1 < L:
                x1 += 1
                col = x1
            else:
                x0 -= 1
                col = x0
            for y in range(y0, y1 + 1):
                path.append_flip((col, y), 1)
        else:
            if y1 < L:
                y1 += 1
                row = y1
            else:
                y0 -= 1
                row = y0
            for x in range(x0, x1 + 1):
                path.append_flip((x, row), 1)
        path.mark(f"R:{x1 - x0 + 1}x{y1 - y0 + 1}")
    if path.end != homogeneous(1, L):
        raise AssertionError("growth path failed to terminate at all-plus")
    return path


# -- manifold minima ----------------------------------------------------------------

@dataclass(frozen=True)
class ManifoldMinimumReport:
    """Exhaustive minimum over all configurations with a fixed plus count."""

    n_plus: int
    n_states: int
    min_energy: float
    argmin: SpinConfiguration
    critical_energy: Optional[float]
    critical_attains: Optional[bool]
    smallness_ok: bool  # whether the J >> lam, h gate held (usually not, at desk scale)


def verify_manifold_minimum(
    p: Parameters, n_plus: Optional[int] = None, max_states: int = 1 << 22
) -> ManifoldMinimumReport:
    """Enumerate every configuration with exactly ``n_plus`` pluses (default
    n+_c) and report the energy minimizer, alongside the critical droplet's
    energy when it is defined and fits."""
    _require_zero_boundary(p)
    if n_plus is None:
        n_plus = critical_quantities(p).n_plus_c
    cells = p.n_sites
    if not 0 <= n_plus <= cells:
        raise ValueError(f"plus count {n_plus} outside 0..{cells}")
    free = cells - n_plus
    n_states = math.comb(cells, n_plus) * (1 << free)
    if n_states > max_states:
        raise UnsupportedSizeError(
            f"manifold has {n_states} states, above the enumeration cap {max_states}"
        )

    L = p.L
    best_energy = math.inf
    best_grid = None
    if free > 0:
        fill_bits = (np.arange(1 << free, dtype=np.int64)[:, None] >> np.arange(free)) & 1
        fills = (fill_bits - 1).astype(np.int8)  # 0 -> -1 (minus), 1 -> 0 (zero)
    else:
        fills = np.zeros((1, 0), dtype=np.int8)
    for plus_cells in itertools.combinations(range(cells), n_plus):
        rest = np.array(sorted(set(range(cells)) - set(plus_cells)), dtype=np.int64)
        batch = np.empty((fills.shape[0], cells), dtype=np.int8)
        batch[:, list(plus_cells)] = 1
        if free > 0:
            batch[:, rest] = fills
        energies = lattice_energy(batch.reshape(-1, L, L), p.J, p.lam, p.h, p.boundary)
        i = int(np.argmin(energies))
        if energies[i] < best_energy:
            best_energy = float(energies[i])
            best_grid = batch[i].reshape(L, L).copy()

    critical_energy = None
    attains = None
    if p.lam > p.h > 0:
        q = critical_quantities(p)
        if n_plus == q.n_plus_c and q.l_c >= 2 and q.l_c + 1 <= p.L:
            critical_energy = hamiltonian(
                chopped_corner_rectangle(q.l_c - 1, q.l_c, p), p
            )
            attains = abs(critical_energy - best_energy) <= HEIGHT_TOL
    return ManifoldMinimumReport(
        n_plus=n_plus,
        n_states=n_states,
        min_energy=best_energy,
        argmin=SpinConfiguration(best_grid),
        critical_energy=critical_energy,
        critical_attains=attains,
        smallness_ok=validate_condition(p).item1.passed,
    )


# -- witness path file format ---------------------------------------------------------

def save_path_file(path_file, path: Path) -> None:
    """Header ``L J lambda h`` then one ``x y old new energy_after`` line per step."""
    p = path.params
    energies = path.energies
    with open(path_file, "w") as fh:
        fh.write(f"{p.L} {p.J!r} {p.lam!r} {p.h!r}\n")
        for i, ((x, y), old, new) in enumerate(path.flips):
            fh.write(f"{x} {y} {old} {new} {float(energies[i + 1])!r}\n")


def load_path_steps(path_file) -> tuple[dict, list[tuple[Site, int, int, float]]]:
    """Read a witness path file back as (meta, [(site, old, new, energy_after)])."""
    steps = []
    with open(path_file) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError(f"{path_file}: malformed path header")
        meta = {
            "L": int(header[0]),
            "J": float(header[1]),
            "lam": float(header[2]),
            "h": float(header[3]),
        }
        for line in fh:
            if not line.strip():
                continue
            x, y, old, new, energy = line.split()
            steps.append(((int(x), int(y)), int(old), int(new), float(energy)))
    return meta, steps
