import numpy as np
import pytest

from pfgnn.errors import GraphFormatError
from pfgnn.graphs import (
    Graph,
    Permutation,
    apply_permutation,
    circulant,
    complete,
    cycle,
    disjoint_union,
    erdos_renyi,
    graph_from_spec,
    parse_edge_list,
    parse_graph6,
    path,
    rook4x4,
    serialize_edge_list,
    serialize_graph6,
    shrikhande,
    star,
)
from oracles import decode_graph6_reference


def random_graph(n, p, seed):
    return erdos_renyi(n, p, seed)


class TestGraph:
    def test_edge_normalization(self):
        g = Graph.from_edges(3, [(2, 0), (0, 2), (1, 2)])
        assert g.edges == frozenset({(0, 2), (1, 2)})
        assert g.num_edges == 2
        assert g.adjacency == ((2,), (2,), (0, 1))

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            Graph.from_edges(2, [(1, 1)])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            Graph.from_edges(2, [(0, 2)])

    def test_rejects_bad_attr_length(self):
        with pytest.raises(ValueError, match="node_attrs"):
            Graph.from_edges(2, [(0, 1)], node_attrs=[1])

    def test_adjacency_matrix(self):
        g = Graph.from_edges(3, [(0, 1)])
        m = g.adjacency_matrix()
        assert m.dtype == np.float64
        assert m.tolist() == [[0, 1, 0], [1, 0, 0], [0, 0, 0]]


class TestPermutation:
    def test_identity_and_inverse(self):
        p = Permutation((2, 0, 1))
        assert p.inverse().compose(p).mapping == (0, 1, 2)
        assert Permutation.identity(3).mapping == (0, 1, 2)

    def test_compose_order(self):
        p = Permutation((1, 2, 0))
        q = Permutation((0, 2, 1))
        assert p.compose(q)(1) == p(q(1))

    def test_rejects_non_bijection(self):
        with pytest.raises(ValueError):
            Permutation((0, 0, 1))

    def test_apply_preserves_degrees(self):
        g = random_graph(9, 0.4, 11)
        rng = np.random.default_rng(0)
        for _ in range(10):
            p = Permutation.random(g.n, rng)
            h = apply_permutation(g, p)
            assert h.degree_sequence() == g.degree_sequence()
            assert h.num_edges == g.num_edges

    def test_apply_moves_attrs(self):
        g = Graph.from_edges(3, [(0, 1)], node_attrs=[5, 6, 7])
        h = apply_permutation(g, Permutation((2, 0, 1)))
        assert h.node_attrs == (6, 7, 5)


class TestGraph6:
    def test_known_line(self):
        # D?{ is the 5-vertex star centered at vertex 4, cross-checked below
        # against a second decoder written from the format description.
        g = parse_graph6("D?{")
        assert g.n == 5
        assert g.edges == frozenset({(0, 4), (1, 4), (2, 4), (3, 4)})

    def test_matches_reference_decoder(self):
        rng = np.random.default_rng(7)
        for trial in range(50):
            n = int(rng.integers(1, 13))
            g = random_graph(n, float(rng.random()), 100 + trial)
            line = serialize_graph6(g)
            rn, redges = decode_graph6_reference(line)
            assert rn == g.n
            assert frozenset(redges) == g.edges

    def test_round_trip(self):
        for seed in range(20):
            g = random_graph(seed % 11 + 2, 0.5, seed)
            assert parse_graph6(serialize_graph6(g)) == g

    def test_serialize_parse_identity_on_strings(self):
        for line in ["D?{", "C~", "A_", "E?~o"]:
            assert serialize_graph6(parse_graph6(line)) == line

    def test_header_prefix_accepted(self):
        assert parse_graph6(">>graph6<<D?{").n == 5

    def test_truncated_body_offset(self):
        with pytest.raises(GraphFormatError) as err:
            parse_graph6("D?")
        assert err.value.offset == 2

    def test_bad_data_byte_offset(self):
        with pytest.raises(GraphFormatError) as err:
            parse_graph6("D?\x1f")
        assert err.value.offset == 2

    def test_extended_size_rejected(self):
        with pytest.raises(GraphFormatError, match="n > 62"):
            parse_graph6("~??~??????")

    def test_empty_line_rejected(self):
        with pytest.raises(GraphFormatError):
            parse_graph6("")

    def test_large_graph_serialization_rejected(self):
        g = Graph.from_edges(63, [])
        with pytest.raises(ValueError, match="62"):
            serialize_graph6(g)


class TestEdgeList:
    def test_round_trip(self):
        g = random_graph(8, 0.4, 3)
        assert parse_edge_list(serialize_edge_list(g)) == g

    def test_bad_header(self):
        with pytest.raises(GraphFormatError, match="header"):
            parse_edge_list("3\n0 1\n")

    def test_edge_count_mismatch(self):
        with pytest.raises(GraphFormatError, match="promises"):
            parse_edge_list("3 2\n0 1\n")


class TestGenerators:
    def test_cycle(self):
        g = cycle(6)
        assert g.degree_sequence() == (2,) * 6
        assert g.num_edges == 6

    def test_path_and_star_and_complete(self):
        assert path(4).degree_sequence() == (1, 1, 2, 2)
        assert star(5).degree_sequence() == (1, 1, 1, 1, 4)
        assert complete(5).num_edges == 10

    def test_circulant_regularity(self):
        g = circulant(41, 2)
        assert g.n == 41
        assert g.degree_sequence() == (4,) * 41
        assert g.has_edge(0, 1) and g.has_edge(0, 2) and g.has_edge(0, 39)

    def test_circulant_degenerate_skips(self):
        # skip 1 duplicates the ring, n/2 chords pair up: both stay valid
        # graphs, just not 4-regular
        assert circulant(6, 1).degree_sequence() == (2,) * 6
        assert circulant(6, 3).degree_sequence() == (3,) * 6

    def test_circulant_skip_validation(self):
        with pytest.raises(ValueError, match="skip"):
            circulant(10, 0)
        with pytest.raises(ValueError, match="skip"):
            circulant(10, 10)

    def test_erdos_renyi_seeded(self):
        assert erdos_renyi(10, 0.3, 5) == erdos_renyi(10, 0.3, 5)
        assert erdos_renyi(10, 0.3, 5) != erdos_renyi(10, 0.3, 6)
        with pytest.raises(ValueError, match="probability"):
            erdos_renyi(5, 1.5, 0)

    def test_disjoint_union(self):
        g = disjoint_union(cycle(3), cycle(4))
        assert g.n == 7
        assert g.num_edges == 7
        assert g.degree_sequence() == (2,) * 7

    def test_strongly_regular_parameters(self):
        # both rook4x4 and shrikhande must be srg(16, 6, 2, 2)
        for g in (rook4x4(), shrikhande()):
            assert g.n == 16
            assert g.degree_sequence() == (6,) * 16
            lambdas = set()
            mus = set()
            for a in range(16):
                for b in range(a + 1, 16):
                    common = len(set(g.adjacency[a]) & set(g.adjacency[b]))
                    (lambdas if g.has_edge(a, b) else mus).add(common)
            assert lambdas == {2}
            assert mus == {2}

    def test_neighborhood_subgraph_difference(self):
        # the classic local difference: every rook neighborhood induces two
        # disjoint triangles, every shrikhande neighborhood induces a 6-cycle
        def neighborhood_triangles(g, v):
            nbrs = g.adjacency[v]
            return sum(
                1
                for i, a in enumerate(nbrs)
                for j in range(i + 1, len(nbrs))
                for c in nbrs[j + 1:]
                if g.has_edge(a, nbrs[j]) and g.has_edge(nbrs[j], c) and g.has_edge(a, c)
            )

        rook, shr = rook4x4(), shrikhande()
        assert all(neighborhood_triangles(rook, v) == 2 for v in range(16))
        assert all(neighborhood_triangles(shr, v) == 0 for v in range(16))


class TestGraphSpec:
    def test_simple(self):
        assert graph_from_spec("cycle(6)") == cycle(6)
        assert graph_from_spec("circulant(41, 2)") == circulant(41, 2)

    def test_nested(self):
        assert graph_from_spec("disjoint_union(cycle(3),cycle(3))") == disjoint_union(
            cycle(3), cycle(3)
        )

    def test_float_arg(self):
        assert graph_from_spec("erdos_renyi(8, 0.5, 3)") == erdos_renyi(8, 0.5, 3)

    def test_no_arg_generator(self):
        assert graph_from_spec("rook4x4()") == rook4x4()

    def test_unknown_generator(self):
        with pytest.raises(ValueError, match="unknown generator"):
            graph_from_spec("petersen()")

    def test_malformed(self):
        with pytest.raises(ValueError):
            graph_from_spec("cycle(6")
