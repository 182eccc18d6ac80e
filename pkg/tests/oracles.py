"""Independent reference implementations used to pin expected test values.

Everything here is deliberately written without touching the package's
refinement or search machinery, so tests can compare the two routes.
"""

from pfgnn.graphs import Graph


def brute_force_isomorphic(g1: Graph, g2: Graph) -> bool:
    """Backtracking permutation search with degree pruning only."""
    n = g1.n
    if n != g2.n or g1.num_edges != g2.num_edges:
        return False
    if sorted(g1.degree(v) for v in range(n)) != sorted(g2.degree(v) for v in range(n)):
        return False
    a1 = g1.node_attrs or tuple([0] * n)
    a2 = g2.node_attrs or tuple([0] * n)
    if sorted(a1) != sorted(a2):
        return False
    order = sorted(range(n), key=lambda v: -g1.degree(v))
    mapping = [-1] * n
    used = [False] * n

    def extend(k: int) -> bool:
        if k == n:
            return True
        v = order[k]
        for w in range(n):
            if used[w] or g1.degree(v) != g2.degree(w) or a1[v] != a2[w]:
                continue
            good = True
            for prev in order[:k]:
                if g1.has_edge(v, prev) != g2.has_edge(w, mapping[prev]):
                    good = False
                    break
            if good:
                mapping[v] = w
                used[w] = True
                if extend(k + 1):
                    return True
                mapping[v] = -1
                used[w] = False
        return False

    return extend(0)


def triangle_count(g: Graph) -> int:
    """Brute-force triangle count over vertex triples."""
    count = 0
    for a in range(g.n):
        na = set(g.adjacency[a])
        for b in g.adjacency[a]:
            if b <= a:
                continue
            for c in g.adjacency[b]:
                if c > b and c in na:
                    count += 1
    return count


def decode_graph6_reference(line: str):
    """Second graph6 decoder, straight from the format description: size byte
    is chr(n+63); then n(n-1)/2 upper-triangle bits column by column, packed
    big-endian into 6-bit chunks, each offset by 63."""
    codes = [ord(c) - 63 for c in line.strip()]
    n = codes[0]
    stream = []
    for x in codes[1:]:
        stream.extend((x >> s) & 1 for s in (5, 4, 3, 2, 1, 0))
    edges = set()
    idx = 0
    for col in range(1, n):
        for row in range(col):
            if stream[idx]:
                edges.add((row, col))
            idx += 1
    return n, edges


def adjacency_bits_reference(g: Graph, position) -> str:
    """Upper-triangle adjacency bits of g relabeled so vertex v sits at
    position[v], row by row, as a 0/1 string."""
    n = g.n
    at = [0] * n
    for v in range(n):
        at[position[v]] = v
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            out.append("1" if g.has_edge(at[i], at[j]) else "0")
    return "".join(out)
