"""Individualization-refinement search over colorings.

The tree roots at the refined initial coloring. Each inner node individualizes
every vertex of the target cell (the first non-singleton cell in canonical
order) and refines, one child per vertex in ascending vertex order. No
automorphism pruning: the tree is expanded in full, which keeps the canonical
form exact at the cost of tree size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DepthCapError, SearchBudgetError
from .graphs import Graph, Permutation
from .refine import Coloring, initial_coloring, refine

DEFAULT_NODE_BUDGET = 10**6


def target_cell(pi: Coloring) -> int:
    """Index of the first non-singleton cell in cell order."""
    for i, cell in enumerate(pi.cells):
        if len(cell) > 1:
            return i
    raise ValueError("no target cell: coloring is discrete")


def individualize(pi: Coloring, v: int) -> Coloring:
    """Split v out of its cell into a fresh singleton placed immediately
    before the rest of the cell."""
    c = pi.color[v]
    if len(pi.cells[c]) == 1:
        raise ValueError(f"vertex {v} is already in a singleton cell")
    cells = []
    for i, cell in enumerate(pi.cells):
        if i == c:
            cells.append((v,))
            cells.append(tuple(u for u in cell if u != v))
        else:
            cells.append(cell)
    return Coloring.from_cells(cells, pi.n)


@dataclass
class SearchTreeNode:
    coloring: Coloring
    path: tuple[int, ...]
    depth: int
    children: list["SearchTreeNode"] = field(default_factory=list)

    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> list["SearchTreeNode"]:
        if self.is_leaf():
            return [self]
        out = []
        for child in self.children:
            out.extend(child.leaves())
        return out


def build_tree(
    g: Graph,
    depth_cap: int | None = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
    root_coloring: Coloring | None = None,
) -> SearchTreeNode:
    """Expand the full search tree down to discrete colorings or depth_cap.

    Raises SearchBudgetError when the node count would exceed node_budget."""
    if depth_cap is None:
        depth_cap = g.n
    if root_coloring is None:
        root_coloring = initial_coloring(g)
    root = SearchTreeNode(refine(g, root_coloring), (), 0)
    count = 1
    stack = [root]
    while stack:
        node = stack.pop()
        if node.coloring.is_discrete() or node.depth >= depth_cap:
            continue
        cell = node.coloring.cells[target_cell(node.coloring)]
        for v in cell:
            count += 1
            if count > node_budget:
                raise SearchBudgetError(
                    f"search tree exceeded node budget {node_budget}"
                )
            child = SearchTreeNode(
                refine(g, individualize(node.coloring, v)),
                node.path + (v,),
                node.depth + 1,
            )
            node.children.append(child)
            stack.append(child)
    return root


def _leaf_encoding(g: Graph, pi: Coloring) -> bytes:
    """Adjacency bits of g relabeled so the vertex colored i sits at position i,
    packed row by row over the upper triangle."""
    pos = pi.color
    n = g.n
    bits = bytearray()
    acc = 0
    nbits = 0
    inv = [0] * n
    for v in range(n):
        inv[pos[v]] = v
    for i in range(n):
        vi = inv[i]
        row = set(g.adjacency[vi])
        for j in range(i + 1, n):
            acc = (acc << 1) | (1 if inv[j] in row else 0)
            nbits += 1
            if nbits == 8:
                bits.append(acc)
                acc = 0
                nbits = 0
    if nbits:
        bits.append(acc << (8 - nbits))
    if g.node_attrs is not None:
        for i in range(n):
            bits.extend(int(g.node_attrs[inv[i]]).to_bytes(8, "little", signed=True))
    return bytes(bits)


def canonical_form(
    g: Graph,
    depth_cap: int | None = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> tuple[bytes, Permutation]:
    """Exact canonical form: the lexicographically smallest leaf encoding over
    the full search tree, with a witness permutation achieving it.

    apply_permutation(g, witness) has the canonical adjacency encoding."""
    tree = build_tree(g, depth_cap=depth_cap, node_budget=node_budget)
    best: bytes | None = None
    best_pi: Coloring | None = None
    for leaf in tree.leaves():
        if not leaf.coloring.is_discrete():
            raise DepthCapError(
                f"depth cap too small: leaf at depth {leaf.depth} is not discrete"
            )
        enc = _leaf_encoding(g, leaf.coloring)
        if best is None or enc < best:
            best = enc
            best_pi = leaf.coloring
    if best is None or best_pi is None:
        raise DepthCapError("search tree produced no leaves")
    return best, Permutation(best_pi.color)


def iso_exact(g1: Graph, g2: Graph, node_budget: int = DEFAULT_NODE_BUDGET) -> bool:
    """Exact isomorphism test via canonical form equality."""
    if g1.n != g2.n or g1.num_edges != g2.num_edges:
        return False
    if g1.node_attrs is not None or g2.node_attrs is not None:
        a1 = sorted(g1.node_attrs or [0] * g1.n)
        a2 = sorted(g2.node_attrs or [0] * g2.n)
        if a1 != a2:
            return False
    c1, _ = canonical_form(g1, node_budget=node_budget)
    c2, _ = canonical_form(g2, node_budget=node_budget)
    return c1 == c2
