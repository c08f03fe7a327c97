import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gossip_sim.errors import (
    DisconnectedGraphError,
    InvalidTopologyError,
    UnconnectedGraphError,
)
from gossip_sim.graph import (
    Graph,
    build_cycle,
    build_random_geometric,
    default_rgg_radius,
    from_dict,
    from_text,
    incidence_matrix,
    incidence_row,
    laplacian,
    load_graph,
    save_graph,
    spectral_summary,
    to_dict,
    to_text,
)


def complete_graph(n):
    return Graph(n, itertools.combinations(range(n), 2))


@pytest.fixture(scope="module")
def rgg100():
    return build_random_geometric(100, seed=7)


class TestConstruction:
    def test_cycle_10(self):
        g = build_cycle(10)
        assert g.n == 10 and g.m == 10
        assert np.all(g.degrees == 2)

    def test_cycle_3_is_triangle(self):
        g = build_cycle(3)
        assert g.m == 3
        assert set(g.edge_list()) == {(0, 1), (1, 2), (0, 2)}

    def test_cycle_4_edges(self):
        assert set(build_cycle(4).edge_list()) == {(0, 1), (1, 2), (2, 3), (0, 3)}

    @pytest.mark.parametrize("n", [-1, 0, 1, 2])
    def test_cycle_too_small(self, n):
        with pytest.raises(InvalidTopologyError):
            build_cycle(n)

    def test_edges_normalized_low_high(self):
        g = Graph(3, [(2, 1), (0, 2)])
        assert g.edge_list() == [(1, 2), (0, 2)]

    @pytest.mark.parametrize(
        "edges",
        [[(0, 0), (0, 1)], [(0, 1), (1, 0)], [(0, 3)], [(-1, 0)]],
    )
    def test_invalid_edges(self, edges):
        with pytest.raises(InvalidTopologyError):
            Graph(3, edges)

    def test_disconnected_rejected(self):
        with pytest.raises(DisconnectedGraphError):
            Graph(4, [(0, 1), (2, 3)])

    def test_degree_sum(self, rgg100):
        assert rgg100.degrees.sum() == 2 * rgg100.m


class TestRandomGeometric:
    def test_default_radius(self):
        assert default_rgg_radius(100) == pytest.approx(math.sqrt(math.log(100) / 100))
        assert default_rgg_radius(100) == pytest.approx(0.21460, abs=5e-6)

    def test_n100_connected(self, rgg100):
        assert rgg100.is_connected()
        assert rgg100.coords.shape == (100, 2)

    def test_edges_match_brute_force_distances(self, rgg100):
        r = default_rgg_radius(100)
        xy = rgg100.coords
        expect = {
            (i, j)
            for i in range(100)
            for j in range(i + 1, 100)
            if math.dist(xy[i], xy[j]) < r
        }
        assert set(rgg100.edge_list()) == expect

    def test_two_nodes_max_radius(self):
        g = build_random_geometric(2, math.sqrt(2), seed=3)
        assert g.edge_list() == [(0, 1)]

    def test_tiny_radius_exhausts_retries(self):
        with pytest.raises(UnconnectedGraphError) as info:
            build_random_geometric(5, 1e-9, seed=0)
        assert info.value.attempts == 100
        assert "100 attempts" in str(info.value)

    def test_bit_exact_determinism(self):
        a = build_random_geometric(60, seed=11)
        b = build_random_geometric(60, seed=11)
        assert np.array_equal(a.edges, b.edges)
        assert np.array_equal(a.coords, b.coords)

    @pytest.mark.parametrize("n,r", [(1, 0.5), (5, 0.0), (5, 1.5)])
    def test_bad_arguments(self, n, r):
        with pytest.raises(InvalidTopologyError):
            build_random_geometric(n, r)


class TestIncidence:
    def test_single_edge(self):
        g = Graph(2, [(0, 1)])
        assert incidence_row(g, 0).tolist() == [1.0, -1.0]

    def test_triangle_edge(self):
        g = build_cycle(3)
        e = g.edge_list().index((1, 2))
        assert incidence_row(g, e).tolist() == [0.0, 1.0, -1.0]

    def test_rows_orthogonal_to_ones(self, rgg100):
        A = incidence_matrix(rgg100)
        assert np.all(A @ np.ones(100) == 0)
        for e in (0, 17, rgg100.m - 1):
            assert incidence_row(rgg100, e).sum() == 0.0
            assert np.count_nonzero(incidence_row(rgg100, e)) == 2

    @pytest.mark.parametrize("e", [-1, 3])
    def test_out_of_range(self, e):
        with pytest.raises(IndexError):
            incidence_row(build_cycle(3), e)


class TestSpectrum:
    def test_complete_k3(self):
        s = spectral_summary(complete_graph(3))
        assert s.alpha == pytest.approx(3.0, rel=1e-12)
        assert np.allclose(s.laplacian_eigenvalues, [3, 3, 0], atol=1e-12)

    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_complete_graph_eigenvalues(self, n):
        # L(K_n) = nI - 11^T has spectrum {0, n, ..., n}
        s = spectral_summary(complete_graph(n))
        assert np.allclose(s.laplacian_eigenvalues[:-1], n, rtol=1e-12)
        assert s.laplacian_eigenvalues[-1] == 0.0

    def test_cycle_10(self):
        s = spectral_summary(build_cycle(10))
        # closed-form cycle spectrum 2 - 2 cos(2 pi k / n)
        assert s.alpha == pytest.approx(2 - 2 * math.cos(2 * math.pi / 10), rel=1e-12)
        assert s.alpha == pytest.approx(0.381966, abs=1e-6)
        assert s.beta == pytest.approx(26.1803, abs=1e-4)

    def test_cycle_full_spectrum(self):
        n = 10
        s = spectral_summary(build_cycle(n))
        expect = sorted((2 - 2 * math.cos(2 * math.pi * k / n) for k in range(n)), reverse=True)
        assert np.allclose(s.laplacian_eigenvalues, expect, atol=1e-12)

    def test_k2(self):
        assert spectral_summary(Graph(2, [(0, 1)])).alpha == pytest.approx(2.0)

    def test_beta_alpha_product(self, rgg100):
        s = spectral_summary(rgg100)
        assert s.beta * s.alpha == pytest.approx(100, rel=1e-10)

    def test_disconnected(self):
        g = Graph(4, [(0, 1), (2, 3)], check_connected=False)
        with pytest.raises(DisconnectedGraphError):
            spectral_summary(g)

    def test_beta_inequality_random_vectors(self, rgg100):
        rng = np.random.default_rng(5)
        for g in (build_cycle(10), rgg100):
            beta = spectral_summary(g).beta
            iu, ju = np.triu_indices(g.n, 1)
            for _ in range(100):
                x = rng.normal(size=g.n)
                lhs = np.sum((x[ju] - x[iu]) ** 2)
                rhs = beta * np.sum((x[g.heads] - x[g.tails]) ** 2)
                assert (rhs - lhs) / lhs >= -1e-9

    def test_beta_is_tight_at_fiedler_vector(self):
        g = build_cycle(10)
        s = spectral_summary(g)
        w, v = np.linalg.eigh(laplacian(g))
        x = v[:, 1]
        iu, ju = np.triu_indices(g.n, 1)
        lhs = np.sum((x[ju] - x[iu]) ** 2)
        rhs = s.beta * np.sum((x[g.heads] - x[g.tails]) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(3, 12),
    extra=st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), max_size=20),
    seed=st.integers(0, 2**32 - 1),
)
def test_quadratic_form_matches_edge_sum(n, extra, seed):
    edges = {(i, (i + 1) % n) for i in range(n)}
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b and max(a, b) < n}
    edges = {(min(a, b), max(a, b)) for a, b in edges}
    g = Graph(n, sorted(edges))
    x = np.random.default_rng(seed).normal(size=n)
    quad = x @ laplacian(g) @ x
    direct = sum((x[i] - x[j]) ** 2 for i, j in g.edge_list())
    assert quad == pytest.approx(direct, rel=1e-10)


class TestSerialization:
    def test_text_roundtrip(self, rgg100):
        text = to_text(rgg100)
        assert text.splitlines()[0] == f"100 {rgg100.m}"
        assert from_text(text) == rgg100

    def test_dict_roundtrip_keeps_coords(self, rgg100):
        doc = to_dict(rgg100)
        g = from_dict(doc)
        assert g == rgg100
        assert np.array_equal(g.coords, rgg100.coords)

    @pytest.mark.parametrize("suffix", [".txt", ".json"])
    def test_file_roundtrip(self, tmp_path, suffix):
        g = build_cycle(7)
        path = save_graph(g, tmp_path / f"g{suffix}")
        assert load_graph(path) == g

    @pytest.mark.parametrize(
        "text", ["", "3\n0 1\n", "3 2\n0 1\n", "3 3\n0 1\n1 2\n0 x\n"]
    )
    def test_malformed_text(self, text):
        with pytest.raises(InvalidTopologyError):
            from_text(text)
