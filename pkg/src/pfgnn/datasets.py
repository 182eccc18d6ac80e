"""Benchmark dataset construction.

Every builder is deterministic in its seed. Datasets carry graphs plus
whatever supervision the task needs: class labels for classification tasks,
index pairs for isomorphism tasks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PfgnnError
from .graphs import (
    Graph,
    Permutation,
    apply_permutation,
    circulant,
    cycle,
    disjoint_union,
    erdos_renyi,
    read_graph6_file,
    rook4x4,
    shrikhande,
    write_graph6_file,
)
from .refine import certificate, initial_coloring, refine
from .search import iso_exact

# Chord skips for the cyclic classification task on 41 vertices. No two
# entries are related by s' = +-1/s mod 41, so all ten circulants are
# pairwise non-isomorphic while every one of them is 4-regular and
# vertex-transitive (hence indistinguishable by plain color refinement).
CSL_N = 41
CSL_SKIPS = (2, 3, 4, 5, 6, 9, 11, 12, 13, 16)
CSL_COPIES = 15

DATASET_SPECS = ("csl", "srg-pair", "wl1-pairs", "sr25-file", "triangles-small")


@dataclass
class Dataset:
    """Graphs plus task annotations.

    labels: per-graph integer class, or None for pair tasks.
    pairs:  (i, j) index pairs the isomorphism experiments operate on, or
            None for classification tasks.
    meta:   builder-specific extras (seed, generator parameters, splits).
    """

    name: str
    graphs: list[Graph]
    labels: np.ndarray | None = None
    pairs: list[tuple[int, int]] | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.graphs)


def _permuted_copy(g: Graph, rng: np.random.Generator) -> Graph:
    return apply_permutation(g, Permutation.random(g.n, rng))


def make_csl(seed: int = 0) -> Dataset:
    """Ten classes of chordal ring on 41 vertices, 15 seeded random
    permutations of each class representative."""
    rng = np.random.default_rng(seed)
    graphs: list[Graph] = []
    labels: list[int] = []
    for cls, skip in enumerate(CSL_SKIPS):
        rep = circulant(CSL_N, skip)
        for _ in range(CSL_COPIES):
            graphs.append(_permuted_copy(rep, rng))
            labels.append(cls)
    return Dataset(
        name="csl",
        graphs=graphs,
        labels=np.array(labels, dtype=np.int64),
        meta={"seed": seed, "n": CSL_N, "skips": list(CSL_SKIPS), "copies": CSL_COPIES},
    )


def verify_csl(ds: Dataset) -> None:
    """Check the classification task is as hard and as well-posed as
    intended: one representative per class must share its refinement
    certificate with every other class (so plain 1-WL is at chance), while
    exact search must separate every pair of classes.

    Raises PfgnnError on any violation.
    """
    reps = {}
    for cls in range(len(CSL_SKIPS)):
        idx = int(np.nonzero(ds.labels == cls)[0][0])
        reps[cls] = ds.graphs[idx]
    certs = {
        cls: certificate(g, refine(g, initial_coloring(g))) for cls, g in reps.items()
    }
    if len(set(certs.values())) != 1:
        raise PfgnnError(
            "class representatives are separable by color refinement alone"
        )
    for a in range(len(reps)):
        for b in range(a + 1, len(reps)):
            if iso_exact(reps[a], reps[b]):
                raise PfgnnError(f"classes {a} and {b} are isomorphic")


def make_srg_pair() -> Dataset:
    """The two strongly regular graphs with parameters (16, 6, 2, 2)."""
    return Dataset(
        name="srg-pair",
        graphs=[rook4x4(), shrikhande()],
        pairs=[(0, 1)],
        meta={"names": ["rook4x4", "shrikhande"], "isomorphic": [False]},
    )


def make_wl1_pairs() -> Dataset:
    """Pairs of non-isomorphic graphs that plain color refinement cannot
    separate: a single even cycle against a union of shorter odd/even cycles
    with the same vertex count (all 2-regular)."""
    combos = [
        (cycle(6), disjoint_union(cycle(3), cycle(3)), "C6 vs C3+C3"),
        (cycle(8), disjoint_union(cycle(3), cycle(5)), "C8 vs C3+C5"),
        (cycle(10), disjoint_union(cycle(5), cycle(5)), "C10 vs C5+C5"),
        (cycle(12), disjoint_union(cycle(4), cycle(8)), "C12 vs C4+C8"),
    ]
    graphs: list[Graph] = []
    pairs: list[tuple[int, int]] = []
    names: list[str] = []
    for a, b, tag in combos:
        pairs.append((len(graphs), len(graphs) + 1))
        graphs.extend([a, b])
        names.append(tag)
    return Dataset(
        name="wl1-pairs",
        graphs=graphs,
        pairs=pairs,
        meta={"names": names, "isomorphic": [False] * len(pairs)},
    )


def make_sr25_file(path) -> Dataset:
    """All graphs from a graph6 file, paired all-against-all. Intended for a
    strongly regular census file such as the (25, 12, 5, 6) family."""
    p = Path(path)
    if not p.exists():
        raise PfgnnError(
            f"graph file not found: {p}. Provide a graph6 file, one graph per "
            "line, via --path."
        )
    graphs = read_graph6_file(p)
    pairs = [
        (i, j) for i in range(len(graphs)) for j in range(i + 1, len(graphs))
    ]
    return Dataset(
        name="sr25-file",
        graphs=graphs,
        pairs=pairs,
        meta={"path": str(p), "count": len(graphs)},
    )


def count_triangles(g: Graph) -> int:
    """Brute force over vertex triples."""
    total = 0
    for u in range(g.n):
        nu = g.adjacency[u]
        for v in nu:
            if v <= u:
                continue
            for w in g.adjacency[v]:
                if w > v and w in nu:
                    total += 1
    return total


def make_triangles_small(
    seed: int = 0,
    train_count: int = 120,
    test_count: int = 40,
    train_sizes: tuple[int, ...] = (7, 8, 9),
    test_sizes: tuple[int, ...] = (10, 11, 12),
) -> Dataset:
    """Random graphs labeled by their triangle count (classes 0..9).

    Training graphs are small; the test split uses strictly larger graphs so
    accuracy there measures structural generalization, not interpolation.
    Edge probability scales as ~3.3/n to keep counts inside the class range;
    graphs with more than 9 triangles are rejected and redrawn.
    """
    rng = np.random.default_rng(seed)

    def draw(n: int) -> tuple[Graph, int]:
        p = min(3.3 / n, 0.9)
        while True:
            g = erdos_renyi(n, p, int(rng.integers(2**31)))
            t = count_triangles(g)
            if t <= 9:
                return g, t

    graphs: list[Graph] = []
    labels: list[int] = []
    split = []
    for _ in range(train_count):
        g, t = draw(int(rng.choice(train_sizes)))
        graphs.append(g)
        labels.append(t)
        split.append("train")
    for _ in range(test_count):
        g, t = draw(int(rng.choice(test_sizes)))
        graphs.append(g)
        labels.append(t)
        split.append("test")
    return Dataset(
        name="triangles-small",
        graphs=graphs,
        labels=np.array(labels, dtype=np.int64),
        meta={
            "seed": seed,
            "split": split,
            "train_sizes": list(train_sizes),
            "test_sizes": list(test_sizes),
        },
    )


def make_dataset(spec: str, seed: int = 0, path=None) -> Dataset:
    """Build a dataset by name. `path` is only consulted by file-backed
    specs."""
    if spec == "csl":
        return make_csl(seed)
    if spec == "srg-pair":
        return make_srg_pair()
    if spec == "wl1-pairs":
        return make_wl1_pairs()
    if spec == "sr25-file":
        return make_sr25_file(path)
    if spec == "triangles-small":
        return make_triangles_small(seed)
    raise ValueError(f"unknown dataset spec {spec!r}; choose from {DATASET_SPECS}")


def save_dataset(ds: Dataset, out_dir) -> None:
    """Write graphs (graph6), labels (csv), and metadata (json) under
    out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_graph6_file(out / "graphs.g6", ds.graphs)
    if ds.labels is not None:
        lines = ["index,label"]
        lines += [f"{i},{int(l)}" for i, l in enumerate(ds.labels)]
        (out / "labels.csv").write_text("\n".join(lines) + "\n")
    meta = dict(ds.meta)
    meta["name"] = ds.name
    meta["count"] = len(ds.graphs)
    if ds.pairs is not None:
        meta["pairs"] = [list(p) for p in ds.pairs]
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
