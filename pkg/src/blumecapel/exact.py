"""Exhaustive landscape analysis over the full configuration space at tiny L.

States are base-3 integers (digit = spin + 1 at flat site (x-1)L + (y-1)).
Two independent algorithms compute communication heights: a best-first search
keyed on the path bottleneck (the minimax analogue of Dijkstra) and a binary
search over energy thresholds combined with connectivity flood fill.  They
must agree exactly, since both select from the same finite set of energies.

L <= 3 (19683 states) is fully supported; L = 4 (43 million states) is
accepted behind ``allow_large=True`` and computes neighbors on the fly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import UnsupportedSizeError
from .landscape import Path
from .model import Parameters, SpinConfiguration, lattice_energy

_PRECOMPUTE_LIMIT = 9  # sites; above this, neighbor rows are generated lazily


class StateSpace:
    """Full configuration space with per-state energies and flip adjacency."""

    def __init__(self, p: Parameters, allow_large: bool = False):
        n_sites = p.n_sites
        if n_sites > 16:
            raise UnsupportedSizeError(f"3^{n_sites} states is out of reach (L={p.L})")
        if n_sites > _PRECOMPUTE_LIMIT and not allow_large:
            raise UnsupportedSizeError(
                f"L={p.L} has 3^{n_sites} states; pass allow_large=True to accept "
                "the memory cost"
            )
        self.p = p
        self.n_sites = n_sites
        self.n_states = 3**n_sites
        self.pow3 = np.array([3**k for k in range(n_sites)], dtype=np.int64)
        self.energies = self._all_energies()
        self._neighbors: Optional[np.ndarray] = None
        if n_sites <= _PRECOMPUTE_LIMIT:
            self._neighbors = self._neighbor_matrix()

    # -- encoding ---------------------------------------------------------

    def index_of(self, eta: SpinConfiguration) -> int:
        if eta.L != self.p.L:
            raise ValueError("configuration does not match the state space side")
        digits = (eta.spins.ravel().astype(np.int64) + 1)
        return int((digits * self.pow3).sum())

    def config_of(self, state: int) -> SpinConfiguration:
        digits = (state // self.pow3) % 3 - 1
        return SpinConfiguration(digits.reshape(self.p.L, self.p.L).astype(np.int8))

    def _all_energies(self) -> np.ndarray:
        L = self.p.L
        out = np.empty(self.n_states, dtype=np.float64)
        chunk = 1 << 18
        for lo in range(0, self.n_states, chunk):
            hi = min(lo + chunk, self.n_states)
            states = np.arange(lo, hi, dtype=np.int64)
            digits = (states[:, None] // self.pow3[None, :]) % 3 - 1
            grids = digits.reshape(-1, L, L)
            out[lo:hi] = lattice_energy(grids, self.p.J, self.p.lam, self.p.h, self.p.boundary)
        return out

    def _neighbor_matrix(self) -> np.ndarray:
        states = np.arange(self.n_states, dtype=np.int64)
        nbrs = np.empty((self.n_states, 2 * self.n_sites), dtype=np.int64)
        for k in range(self.n_sites):
            d = (states // self.pow3[k]) % 3
            alt1 = (d + 1) % 3
            alt2 = (d + 2) % 3
            nbrs[:, 2 * k] = states + (alt1 - d) * self.pow3[k]
            nbrs[:, 2 * k + 1] = states + (alt2 - d) * self.pow3[k]
        return nbrs

    def neighbors_of(self, state: int) -> list[int]:
        if self._neighbors is not None:
            return list(self._neighbors[state])
        out = []
        for k in range(self.n_sites):
            d = (state // int(self.pow3[k])) % 3
            for alt in ((d + 1) % 3, (d + 2) % 3):
                out.append(state + (alt - d) * int(self.pow3[k]))
        return out

    # -- bottleneck best-first search --------------------------------------

    def bottleneck_search(self, src: int, dst_set, record_witness: bool = True):
        """Minimize the path maximum of the energy from src to any state in
        dst_set (a set of indices or a boolean mask).  Returns
        (height, hit_state, witness-state-list or None)."""
        E = self.energies
        if isinstance(dst_set, (set, frozenset)):
            is_dst = lambda u: u in dst_set  # noqa: E731
        else:
            mask = dst_set
            is_dst = lambda u: bool(mask[u])  # noqa: E731
        dist = {src: float(E[src])}
        pred: dict[int, int] = {}
        done = set()
        heap = [(float(E[src]), src)]
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if is_dst(u):
                witness = None
                if record_witness:
                    witness = [u]
                    while witness[-1] != src:
                        witness.append(pred[witness[-1]])
                    witness.reverse()
                return d, u, witness
            for v in self.neighbors_of(u):
                if v in done:
                    continue
                nd = max(d, float(E[v]))
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    pred[v] = u
                    heapq.heappush(heap, (nd, v))
        raise RuntimeError("target set unreachable (cannot happen on a flip graph)")

    # -- threshold + flood-fill oracle --------------------------------------

    def _connected_under(self, src: int, dst: int, threshold: float) -> bool:
        E = self.energies
        if E[src] > threshold or E[dst] > threshold:
            return False
        if self._neighbors is None:
            # lazy generic BFS
            seen = {src}
            stack = [src]
            while stack:
                u = stack.pop()
                if u == dst:
                    return True
                for v in self.neighbors_of(u):
                    if v not in seen and E[v] <= threshold:
                        seen.add(v)
                        stack.append(v)
            return False
        allowed = E <= threshold
        visited = np.zeros(self.n_states, dtype=bool)
        visited[src] = True
        frontier = np.array([src], dtype=np.int64)
        while frontier.size:
            if visited[dst]:
                return True
            nxt = np.unique(self._neighbors[frontier].ravel())
            nxt = nxt[allowed[nxt] & ~visited[nxt]]
            visited[nxt] = True
            frontier = nxt
        return bool(visited[dst])

    def threshold_search(self, src: int, dst: int) -> float:
        """Smallest energy level whose sublevel graph connects src and dst."""
        levels = np.unique(self.energies)
        lo = max(float(self.energies[src]), float(self.energies[dst]))
        i = int(np.searchsorted(levels, lo))
        j = len(levels) - 1
        if not self._connected_under(src, dst, float(levels[j])):
            raise RuntimeError("states disconnected under the top level (cannot happen)")
        while i < j:
            mid = (i + j) // 2
            if self._connected_under(src, dst, float(levels[mid])):
                j = mid
            else:
                i = mid + 1
        return float(levels[i])

    # -- stability levels -----------------------------------------------------

    def stability_report(self, state: int) -> "StabilityReport":
        """V = Phi(state, {strictly lower states}) - H(state), with an optimal
        witness path ending strictly below; infinite for ground states."""
        E = self.energies
        h0 = float(E[state])
        lower = E < h0
        if not lower.any():
            return StabilityReport(state, math.inf, None, True)
        height, _, witness = self.bottleneck_search(state, lower)
        path = self.states_to_path(witness)
        return StabilityReport(state, height - h0, path, False)

    def states_to_path(self, states: list[int]) -> Path:
        path = Path(self.config_of(states[0]), self.p)
        prev = states[0]
        for u in states[1:]:
            delta = u - prev
            k = 0
            while delta % 3 == 0:
                delta //= 3
                k += 1
            x, y = k // self.p.L + 1, k % self.p.L + 1
            new_digit = (u // int(self.pow3[k])) % 3
            path.append_flip((x, y), int(new_digit) - 1)
            prev = u
        return path

    def stability_levels(self) -> np.ndarray:
        """Stability level of every state in one sweep.

        Process states by increasing energy, merging flip-adjacent sublevel
        components with union-find; a state's level resolves the first time
        its component acquires a strictly lower state.  Ground states stay
        infinite.
        """
        E = self.energies
        N = self.n_states
        V = np.full(N, np.inf)
        parent = np.arange(N, dtype=np.int64)
        comp_min = np.empty(N, dtype=np.float64)
        pending: dict[int, list[int]] = {}
        active = np.zeros(N, dtype=bool)

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = int(parent[i])
            return i

        order = np.argsort(E, kind="stable")
        pos = 0
        while pos < N:
            t = E[order[pos]]
            end = pos
            while end < N and E[order[end]] == t:
                end += 1
            level = [int(u) for u in order[pos:end]]
            for u in level:
                comp_min[u] = t
                pending[u] = [u]
                active[u] = True
            for u in level:
                for v in self.neighbors_of(u):
                    v = int(v)
                    if not active[v]:
                        continue
                    ru, rv = find(u), find(v)
                    if ru == rv:
                        continue
                    if comp_min[ru] > comp_min[rv]:
                        ru, rv = rv, ru
                    # ru has the lower (or equal) floor; rv merges into it
                    if comp_min[ru] < comp_min[rv]:
                        for w in pending.pop(rv, ()):  # all sit at comp_min[rv]
                            V[w] = t - E[w]
                    else:
                        pending.setdefault(ru, []).extend(pending.pop(rv, ()))
                    parent[rv] = ru
            pos = end
        return V

    def ground_states(self) -> np.ndarray:
        return np.flatnonzero(self.energies == self.energies.min())


@dataclass(frozen=True)
class StabilityReport:
    state: int
    level: float
    witness: Optional[Path]
    infinite: bool


# -- public wrappers ------------------------------------------------------------

def communication_height_exact(
    eta: SpinConfiguration,
    eta_prime: SpinConfiguration,
    p: Parameters,
    space: Optional[StateSpace] = None,
    allow_large: bool = False,
) -> tuple[float, Path]:
    """Min over paths of the max energy between two configurations, with an
    optimal witness path, via the bottleneck best-first search."""
    if space is None:
        space = StateSpace(p, allow_large=allow_large)
    src, dst = space.index_of(eta), space.index_of(eta_prime)
    if src == dst:
        return float(space.energies[src]), Path(eta, p)
    height, _, witness = space.bottleneck_search(src, {dst})
    return height, space.states_to_path(witness)


def communication_height_threshold(
    eta: SpinConfiguration,
    eta_prime: SpinConfiguration,
    p: Parameters,
    space: Optional[StateSpace] = None,
    allow_large: bool = False,
) -> float:
    """Independent oracle for the communication height (threshold bisection +
    flood fill); must agree exactly with the bottleneck search."""
    if space is None:
        space = StateSpace(p, allow_large=allow_large)
    src, dst = space.index_of(eta), space.index_of(eta_prime)
    if src == dst:
        return float(space.energies[src])
    return space.threshold_search(src, dst)


def stability_level_exact(
    eta: SpinConfiguration,
    p: Parameters,
    space: Optional[StateSpace] = None,
    allow_large: bool = False,
) -> StabilityReport:
    if space is None:
        space = StateSpace(p, allow_large=allow_large)
    return space.stability_report(space.index_of(eta))


def maximal_stability_level(space: StateSpace) -> tuple[float, int]:
    """Max stability level over non-ground states and one attaining state."""
    V = space.stability_levels()
    ground = np.zeros(space.n_states, dtype=bool)
    ground[space.ground_states()] = True
    candidates = np.flatnonzero(~ground)
    best = candidates[np.argmax(V[candidates])]
    return float(V[best]), int(best)
