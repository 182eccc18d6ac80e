"""Undirected graphs, vertex permutations, file formats, and generators.

Graphs are immutable: vertex count, a normalized edge set, optional integer
node attributes, and a precomputed adjacency table. File support covers the
graph6 line format (n <= 62) and a plain edge-list format ("n m" header, one
"u v" line per edge).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphFormatError


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1."""

    n: int
    edges: frozenset[tuple[int, int]]
    node_attrs: tuple[int, ...] | None = None
    adjacency: tuple[tuple[int, ...], ...] = field(compare=False, default=())

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges,
        node_attrs=None,
    ) -> "Graph":
        if n < 0:
            raise ValueError(f"vertex count must be non-negative, got {n}")
        norm = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u} not allowed")
            norm.add((min(u, v), max(u, v)))
        if node_attrs is not None:
            node_attrs = tuple(int(a) for a in node_attrs)
            if len(node_attrs) != n:
                raise ValueError(
                    f"node_attrs has length {len(node_attrs)}, expected {n}"
                )
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in norm:
            nbrs[u].append(v)
            nbrs[v].append(u)
        adjacency = tuple(tuple(sorted(a)) for a in nbrs)
        return cls(n, frozenset(norm), node_attrs, adjacency)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def degree_sequence(self) -> tuple[int, ...]:
        return tuple(sorted(len(a) for a in self.adjacency))

    def adjacency_matrix(self) -> np.ndarray:
        """Dense symmetric 0/1 matrix, float64."""
        m = np.zeros((self.n, self.n), dtype=np.float64)
        for u, v in self.edges:
            m[u, v] = 1.0
            m[v, u] = 1.0
        return m


@dataclass(frozen=True)
class Permutation:
    """Bijection on 0..n-1; mapping[v] is the image of v."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        n = len(self.mapping)
        if sorted(self.mapping) != list(range(n)):
            raise ValueError(f"not a permutation of 0..{n - 1}: {self.mapping}")

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, v: int) -> int:
        return self.mapping[v]

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for v, pv in enumerate(self.mapping):
            inv[pv] = v
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """Returns self after other: (self.compose(other))(v) == self(other(v))."""
        if self.n != other.n:
            raise ValueError("size mismatch")
        return Permutation(tuple(self.mapping[other.mapping[v]] for v in range(self.n)))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(tuple(int(x) for x in rng.permutation(n)))


def apply_permutation(g: Graph, p: Permutation) -> Graph:
    """Relabel g by p: vertex v of g becomes p(v) in the result."""
    if p.n != g.n:
        raise ValueError(f"permutation size {p.n} does not match graph size {g.n}")
    edges = {(p(u), p(v)) for u, v in g.edges}
    attrs = None
    if g.node_attrs is not None:
        out = [0] * g.n
        for v in range(g.n):
            out[p(v)] = g.node_attrs[v]
        attrs = tuple(out)
    return Graph.from_edges(g.n, edges, attrs)


# -- graph6 ------------------------------------------------------------------

_G6_HEADER = ">>graph6<<"


def parse_graph6(line: str) -> Graph:
    """Decode one graph6 line (n <= 62)."""
    if line.startswith(_G6_HEADER):
        line = line[len(_G6_HEADER):]
    data = line.rstrip("\n")
    if not data:
        raise GraphFormatError("empty graph6 line", 0)
    first = ord(data[0])
    if first == 126:
        raise GraphFormatError("extended graph6 size encoding not supported (n > 62)", 0)
    if not (63 <= first <= 126):
        raise GraphFormatError(f"invalid graph6 size byte {first}", 0)
    n = first - 63
    need_bits = n * (n - 1) // 2
    need_bytes = (need_bits + 5) // 6
    body = data[1:]
    if len(body) < need_bytes:
        raise GraphFormatError(
            f"truncated graph6 body: need {need_bytes} bytes, found {len(body)}",
            1 + len(body),
        )
    if len(body) > need_bytes:
        raise GraphFormatError("trailing bytes after graph6 body", 1 + need_bytes)
    bits = []
    for i, ch in enumerate(body):
        code = ord(ch)
        if not (63 <= code <= 126):
            raise GraphFormatError(f"invalid graph6 data byte {code}", 1 + i)
        val = code - 63
        bits.extend((val >> shift) & 1 for shift in range(5, -1, -1))
    edges = []
    k = 0
    for j in range(1, n):
        for i in range(j):
            if bits[k]:
                edges.append((i, j))
            k += 1
    return Graph.from_edges(n, edges)


def serialize_graph6(g: Graph) -> str:
    if g.n > 62:
        raise ValueError(f"graph6 output limited to n <= 62, got n={g.n}")
    bits = []
    for j in range(1, g.n):
        for i in range(j):
            bits.append(1 if g.has_edge(i, j) else 0)
    while len(bits) % 6:
        bits.append(0)
    out = [chr(g.n + 63)]
    for k in range(0, len(bits), 6):
        val = 0
        for b in bits[k:k + 6]:
            val = (val << 1) | b
        out.append(chr(val + 63))
    return "".join(out)


def read_graph6_file(path) -> list[Graph]:
    graphs = []
    with open(path, "r") as fh:
        for line in fh:
            line = line.strip()
            if line:
                graphs.append(parse_graph6(line))
    return graphs


def write_graph6_file(path, graphs) -> None:
    with open(path, "w") as fh:
        for g in graphs:
            fh.write(serialize_graph6(g) + "\n")


# -- edge-list format --------------------------------------------------------

def parse_edge_list(text: str) -> Graph:
    """Parse "n m" header followed by m "u v" lines."""
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise GraphFormatError("empty edge-list input", 0)
    head = lines[0].split()
    if len(head) != 2:
        raise GraphFormatError(f"bad header line {lines[0]!r}, expected 'n m'", 0)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise GraphFormatError(f"non-integer header line {lines[0]!r}", 0) from None
    if len(lines) - 1 != m:
        raise GraphFormatError(
            f"header promises {m} edges, found {len(lines) - 1} edge lines", 0
        )
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphFormatError(f"bad edge line {ln!r}", 0)
        edges.append((int(parts[0]), int(parts[1])))
    return Graph.from_edges(n, edges)


def serialize_edge_list(g: Graph) -> str:
    lines = [f"{g.n} {g.num_edges}"]
    for u, v in sorted(g.edges):
        lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"


def load_graph_file(path) -> list[Graph]:
    """Read a graph file, graph6 (.g6) or edge list (anything else)."""
    text = open(path, "r").read()
    if str(path).endswith(".g6"):
        return [parse_graph6(ln) for ln in text.splitlines() if ln.strip()]
    return [parse_edge_list(text)]


# -- generators --------------------------------------------------------------

def cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError(f"cycle needs n >= 3, got {n}")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path(n: int) -> Graph:
    if n < 1:
        raise ValueError(f"path needs n >= 1, got {n}")
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star(n: int) -> Graph:
    if n < 2:
        raise ValueError(f"star needs n >= 2, got {n}")
    return Graph.from_edges(n, [(0, i) for i in range(1, n)])


def circulant(n: int, skip: int) -> Graph:
    """Ring on n vertices plus chords at the given skip distance."""
    if n < 3:
        raise ValueError(f"circulant needs n >= 3, got {n}")
    if not (1 <= skip <= n - 1):
        raise ValueError(f"skip must lie in 1..{n - 1}, got {skip}")
    edges = set()
    for i in range(n):
        edges.add((i, (i + 1) % n))
        edges.add((i, (i + skip) % n))
    return Graph.from_edges(n, edges)


def rook4x4() -> Graph:
    """4x4 rook's graph: cells adjacent iff same row or same column."""
    edges = []
    for a in range(16):
        for b in range(a + 1, 16):
            if a // 4 == b // 4 or a % 4 == b % 4:
                edges.append((a, b))
    return Graph.from_edges(16, edges)


def shrikhande() -> Graph:
    """Cayley graph of Z4 x Z4 with connection set {+-(1,0), +-(0,1), +-(1,1)}."""
    conn = {(1, 0), (3, 0), (0, 1), (0, 3), (1, 1), (3, 3)}
    edges = []
    for x in range(4):
        for y in range(4):
            for dx, dy in conn:
                u = 4 * x + y
                v = 4 * ((x + dx) % 4) + ((y + dy) % 4)
                if u < v:
                    edges.append((u, v))
    return Graph.from_edges(16, edges)


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((i, j))
    return Graph.from_edges(n, edges)


def disjoint_union(*graphs: Graph) -> Graph:
    if not graphs:
        raise ValueError("disjoint_union needs at least one graph")
    n = 0
    edges = []
    any_attrs = any(g.node_attrs is not None for g in graphs)
    attrs: list[int] = []
    for g in graphs:
        edges.extend((u + n, v + n) for u, v in g.edges)
        if any_attrs:
            attrs.extend(g.node_attrs if g.node_attrs is not None else [0] * g.n)
        n += g.n
    return Graph.from_edges(n, edges, tuple(attrs) if any_attrs else None)


_SPEC_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z_0-9]*|\(|\)|,|-?\d+\.?\d*)")


def graph_from_spec(spec: str) -> Graph:
    """Build a graph from a spec string such as "circulant(41,2)" or
    "disjoint_union(cycle(3),cycle(3))"."""
    tokens = []
    pos = 0
    while pos < len(spec):
        m = _SPEC_TOKEN.match(spec, pos)
        if not m:
            raise ValueError(f"bad generator spec {spec!r} at position {pos}")
        tokens.append(m.group(1))
        pos = m.end()
    rest = list(reversed(tokens))

    def parse_value():
        tok = rest.pop()
        if re.fullmatch(r"-?\d+\.?\d*", tok):
            return float(tok) if "." in tok else int(tok)
        return parse_call(tok)

    def parse_call(name):
        fns = {
            "cycle": cycle,
            "path": path,
            "complete": complete,
            "star": star,
            "circulant": circulant,
            "rook4x4": rook4x4,
            "shrikhande": shrikhande,
            "erdos_renyi": erdos_renyi,
            "disjoint_union": disjoint_union,
        }
        if name not in fns:
            raise ValueError(f"unknown generator {name!r}")
        if not rest or rest[-1] != "(":
            raise ValueError(f"expected '(' after {name!r}")
        rest.pop()
        args = []
        if rest and rest[-1] == ")":
            rest.pop()
        else:
            while True:
                args.append(parse_value())
                tok = rest.pop() if rest else None
                if tok == ")":
                    break
                if tok != ",":
                    raise ValueError(f"bad generator spec {spec!r}: expected ',' or ')'")
        return fns[name](*args)

    g = parse_value()
    if rest:
        raise ValueError(f"trailing tokens in generator spec {spec!r}")
    if not isinstance(g, Graph):
        raise ValueError(f"spec {spec!r} did not produce a graph")
    return g
