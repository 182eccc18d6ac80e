"""Color refinement on graphs.

A coloring is an ordered partition of the vertex set. Refinement repeatedly
splits cells by the multiset of neighbor colors until the partition is
equitable. Cell order is canonical: cells created by splitting are ordered by
the sorted signature that created them (own color first, then the neighbor
multiset), so the order is stable under vertex relabeling and never depends
on vertex ids.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

from .graphs import Graph


@dataclass(frozen=True)
class Coloring:
    """Ordered partition of 0..n-1. color[v] is the cell index of v; cells
    lists each cell's vertices in ascending order."""

    color: tuple[int, ...]
    cells: tuple[tuple[int, ...], ...]

    @classmethod
    def from_color(cls, color) -> "Coloring":
        color = tuple(int(c) for c in color)
        k = max(color) + 1 if color else 0
        seen = set(color)
        if seen != set(range(k)):
            raise ValueError(f"cell ids must be contiguous 0..{k - 1}, got {sorted(seen)}")
        cells: list[list[int]] = [[] for _ in range(k)]
        for v, c in enumerate(color):
            cells[c].append(v)
        return cls(color, tuple(tuple(cell) for cell in cells))

    @classmethod
    def from_cells(cls, cells, n: int | None = None) -> "Coloring":
        flat = [v for cell in cells for v in cell]
        if n is None:
            n = len(flat)
        if sorted(flat) != list(range(n)):
            raise ValueError("cells do not partition the vertex set")
        color = [0] * n
        for i, cell in enumerate(cells):
            if not cell:
                raise ValueError("empty cell")
            for v in cell:
                color[v] = i
        return cls(tuple(color), tuple(tuple(sorted(cell)) for cell in cells))

    @property
    def n(self) -> int:
        return len(self.color)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def is_discrete(self) -> bool:
        return all(len(cell) == 1 for cell in self.cells)

    def to_json(self) -> str:
        return json.dumps([list(cell) for cell in self.cells])

    @classmethod
    def from_json(cls, text: str) -> "Coloring":
        return cls.from_cells(json.loads(text))


def initial_coloring(g: Graph) -> Coloring:
    """Uniform coloring, or cells by ascending node attribute when present."""
    if g.node_attrs is None:
        return Coloring.from_color([0] * g.n) if g.n else Coloring((), ())
    values = sorted(set(g.node_attrs))
    rank = {a: i for i, a in enumerate(values)}
    return Coloring.from_color([rank[a] for a in g.node_attrs])


def refine(g: Graph, pi: Coloring) -> Coloring:
    """Refine pi to the coarsest equitable coloring below it.

    Each round recolors every vertex by the signature (own color, sorted
    multiset of neighbor colors); signatures in sorted order receive new
    contiguous cell ids, which keeps earlier cells first and fixes the order
    of fresh splits. Stops at the first round that changes nothing.
    """
    if g.n != pi.n:
        raise ValueError(f"coloring size {pi.n} does not match graph size {g.n}")
    color = list(pi.color)
    while True:
        sigs = [
            (color[v], tuple(sorted(color[u] for u in g.adjacency[v])))
            for v in range(g.n)
        ]
        ids = {sig: i for i, sig in enumerate(sorted(set(sigs)))}
        new_color = [ids[s] for s in sigs]
        if new_color == color:
            return Coloring.from_color(color)
        color = new_color


def is_equitable(g: Graph, pi: Coloring) -> bool:
    """True iff every cell sees a constant neighbor-count vector per cell."""
    for cell in pi.cells:
        seen = None
        for v in cell:
            counts = [0] * pi.num_cells
            for u in g.adjacency[v]:
                counts[pi.color[u]] += 1
            if seen is None:
                seen = counts
            elif counts != seen:
                return False
    return True


def refines(a: Coloring, b: Coloring) -> bool:
    """True iff a refines b: every a-cell sits inside one b-cell and cell
    order is compatible (b-color(v) < b-color(w) implies a-color(v) < a-color(w))."""
    if a.n != b.n:
        return False
    last_b = -1
    for cell in a.cells:
        bc = {b.color[v] for v in cell}
        if len(bc) != 1:
            return False
        bcol = bc.pop()
        if bcol < last_b:
            return False
        last_b = bcol
    return True


def quotient_records(g: Graph, pi: Coloring) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Per-cell (size, neighbor-count-per-cell vector) in canonical cell order.

    Only meaningful for equitable colorings, where the count vector is the
    same from every vertex of a cell.
    """
    if not is_equitable(g, pi):
        raise ValueError("quotient records require an equitable coloring")
    records = []
    for cell in pi.cells:
        v = cell[0]
        counts = [0] * pi.num_cells
        for u in g.adjacency[v]:
            counts[pi.color[u]] += 1
        records.append((len(cell), tuple(counts)))
    return tuple(records)


def certificate(g: Graph, pi: Coloring) -> bytes:
    """128-bit digest of the quotient structure of an equitable coloring.

    Hashes the sorted list of per-cell (size, sorted neighbor-count vector)
    records with blake2b-128, so the digest depends on the quotient only and
    is invariant under vertex relabeling."""
    records = sorted(
        (size, tuple(sorted(counts))) for size, counts in quotient_records(g, pi)
    )
    h = hashlib.blake2b(digest_size=16)
    h.update(struct.pack("<II", g.n, len(records)))
    for size, counts in records:
        h.update(struct.pack("<I", size))
        h.update(struct.pack(f"<{len(counts)}I", *counts))
    return h.digest()
