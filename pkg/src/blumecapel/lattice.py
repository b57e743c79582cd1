"""Geometry of the L x L box: sites, boundaries, rectangles, bootstrap.

Sites are 1-based integer pairs (x, y) with both coordinates in [1, L].
All operations are pure functions over immutable inputs; site sets are
handled as frozensets of tuples so results can be compared directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

Site = tuple[int, int]

_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def in_box(site: Site, L: int) -> bool:
    x, y = site
    return 1 <= x <= L and 1 <= y <= L


def neighbors(site: Site, L: int) -> tuple[list[Site], int]:
    """Return the in-lattice nearest neighbors of ``site`` and the number of
    neighbors falling outside the box (0 in the bulk, 1 on an edge, 2 at a corner)."""
    if L < 1:
        raise ValueError(f"box side must be >= 1, got {L}")
    if not in_box(site, L):
        raise ValueError(f"site {site} outside the {L}x{L} box")
    x, y = site
    inside = []
    out = 0
    for dx, dy in _STEPS:
        n = (x + dx, y + dy)
        if in_box(n, L):
            inside.append(n)
        else:
            out += 1
    return inside, out


def internal_boundary(sites: Iterable[Site], L: int) -> frozenset[Site]:
    """Sites of I with a nearest neighbor outside I (out-of-box counts as outside)."""
    group = frozenset(sites)
    _check_in_box(group, L)
    result = []
    for s in group:
        inside, out = neighbors(s, L)
        if out > 0 or any(n not in group for n in inside):
            result.append(s)
    return frozenset(result)


def bulk(sites: Iterable[Site], L: int) -> frozenset[Site]:
    group = frozenset(sites)
    return group - internal_boundary(group, L)


class ExternalBoundary(NamedTuple):
    """In-lattice external boundary plus the virtual out-of-box sites adjacent to I."""

    inside: frozenset[Site]
    virtual: frozenset[Site]


def external_boundary(sites: Iterable[Site], L: int) -> ExternalBoundary:
    group = frozenset(sites)
    _check_in_box(group, L)
    inside: set[Site] = set()
    virtual: set[Site] = set()
    for x, y in group:
        for dx, dy in _STEPS:
            n = (x + dx, y + dy)
            if n in group:
                continue
            (inside if in_box(n, L) else virtual).add(n)
    return ExternalBoundary(frozenset(inside), frozenset(virtual))


def connected_components(sites: Iterable[Site]) -> list[frozenset[Site]]:
    """Maximal nearest-neighbor-connected subsets, sorted by smallest member."""
    remaining = set(sites)
    parts = []
    while remaining:
        seed = min(remaining)
        stack = [seed]
        remaining.discard(seed)
        comp = {seed}
        while stack:
            x, y = stack.pop()
            for dx, dy in _STEPS:
                n = (x + dx, y + dy)
                if n in remaining:
                    remaining.discard(n)
                    comp.add(n)
                    stack.append(n)
        parts.append(frozenset(comp))
    parts.sort(key=min)
    return parts


@dataclass(frozen=True, order=True)
class Rectangle:
    """Axis-aligned rectangle of lattice sites, anchored at its minimal corner."""

    x: int
    y: int
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("rectangle sides must be >= 1")

    @property
    def min_corner(self) -> Site:
        return (self.x, self.y)

    @property
    def max_corner(self) -> Site:
        return (self.x + self.width - 1, self.y + self.height - 1)

    @property
    def is_quasi_square(self) -> bool:
        lo, hi = sorted((self.width, self.height))
        return hi == lo + 1

    def contains(self, site: Site) -> bool:
        x, y = site
        return self.x <= x < self.x + self.width and self.y <= y < self.y + self.height

    def contains_rect(self, other: "Rectangle") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.x + other.width <= self.x + self.width
            and other.y + other.height <= self.y + self.height
        )

    def sites(self) -> frozenset[Site]:
        return frozenset(
            (x, y)
            for x in range(self.x, self.x + self.width)
            for y in range(self.y, self.y + self.height)
        )

    def overlaps(self, other: "Rectangle") -> bool:
        return not (
            self.x + self.width <= other.x
            or other.x + other.width <= self.x
            or self.y + self.height <= other.y
            or other.y + other.height <= self.y
        )


def rectangular_envelope(sites: Iterable[Site]) -> Rectangle:
    """Smallest axis-aligned rectangle containing the (nonempty) site set."""
    group = list(sites)
    if not group:
        raise ValueError("rectangular envelope of an empty set is undefined")
    xs = [s[0] for s in group]
    ys = [s[1] for s in group]
    return Rectangle(min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1)


def _adjacent_ring(rect: Rectangle) -> set[Site]:
    """Sites at Euclidean distance exactly 1 from the rectangle (no diagonal corners)."""
    ring: set[Site] = set()
    for x in range(rect.x, rect.x + rect.width):
        ring.add((x, rect.y - 1))
        ring.add((x, rect.y + rect.height))
    for y in range(rect.y, rect.y + rect.height):
        ring.add((rect.x - 1, y))
        ring.add((rect.x + rect.width, y))
    return ring


def rectangles_interacting(a: Rectangle, b: Rectangle) -> bool:
    """True iff some site outside both rectangles is at distance one from both."""
    if a.overlaps(b):
        raise ValueError("interaction is defined for disjoint rectangles")
    # ring(a) excludes a's own sites and ring(b) excludes b's, so any common
    # member is automatically outside both rectangles
    return bool(_adjacent_ring(a) & _adjacent_ring(b))


def _must_merge(a: Rectangle, b: Rectangle) -> bool:
    # Overlapping intermediates (possible after an envelope step) merge as well.
    if a.overlaps(b):
        return True
    return rectangles_interacting(a, b)


def bootstrap(sites: Iterable[Site]) -> list[Rectangle]:
    """Bootstrap construction: envelope connected components, then repeatedly
    merge maximal chains of pairwise-interacting rectangles (read as connected
    components of the interaction graph) until the family is pairwise
    non-interacting.  Deterministic output, sorted by minimal corner."""
    group = frozenset(sites)
    if not group:
        return []
    rects = [rectangular_envelope(c) for c in connected_components(group)]
    while True:
        n = len(rects)
        merged_any = False
        # connected components of the must-merge graph
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(n):
            for j in range(i + 1, n):
                if _must_merge(rects[i], rects[j]):
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[ri] = rj
                        merged_any = True
        if not merged_any:
            break
        groups: dict[int, list[Rectangle]] = {}
        for i in range(n):
            groups.setdefault(find(i), []).append(rects[i])
        rects = []
        for members in groups.values():
            combined: set[Site] = set()
            for r in members:
                combined |= r.sites()
            rects.append(rectangular_envelope(combined))
    rects.sort()
    return rects


def _check_in_box(sites: frozenset[Site], L: int) -> None:
    for s in sites:
        if not in_box(s, L):
            raise ValueError(f"site {s} outside the {L}x{L} box")
