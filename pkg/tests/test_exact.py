import numpy as np
import pytest
from hypothesis import given, settings
from scipy.linalg import solve_triangular

from avgcons.errors import (
    Disconnected,
    EmptyColumn,
    NotStrictlyLowerTriangular,
    SizeMismatch,
    WrongWeighting,
)
from avgcons.exact import (
    LowerFactor,
    build_lower_factor,
    exact_ac_additions,
    exact_ac_backsub,
    exact_average,
    filter_polynomial,
    filter_roots,
    gamma,
    graph_filter,
    graph_filter_apply,
    graph_filter_factored,
    nilpotency_index,
    prepare_factor,
)
from avgcons.graph import build_graph, lower_support, path_graph
from avgcons.spectral import kernel_projection
from strategies import connected_graphs, graphs_with_values

W0_P3 = np.array([0.0, 3.0, 3.0])


class TestFactor:
    def test_path_unit(self, p3):
        f = build_lower_factor(p3, "unit-pm1")
        np.testing.assert_array_equal(f.matrix, [[1, 0], [-1, 1], [0, -1]])
        np.testing.assert_array_equal(f.laplacian(), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_path_column_normalized_is_the_same(self, p3):
        a = build_lower_factor(p3, "column-normalized").matrix
        b = build_lower_factor(p3, "unit-pm1").matrix
        np.testing.assert_array_equal(a, b)

    def test_empty_column(self):
        g = build_graph(3, [(1, 2), (1, 3)])
        with pytest.raises(EmptyColumn):
            build_lower_factor(g)

    def test_unknown_weighting(self, p3):
        with pytest.raises(ValueError):
            build_lower_factor(p3, "metropolis")

    def test_column_normalized_spreads_weight(self):
        g = build_graph(3, [(1, 2), (1, 3), (2, 3)])
        np.testing.assert_allclose(build_lower_factor(g).matrix, [[1, 0], [-0.5, 1], [-0.5, -1]])

    @settings(max_examples=50, deadline=None)
    @given(connected_graphs())
    def test_invariants(self, g):
        for weighting in ("column-normalized", "unit-pm1"):
            f, perm = prepare_factor(g, weighting)
            m = f.matrix
            assert m.shape == (g.n, g.n - 1)
            np.testing.assert_allclose(m.sum(axis=0), 0, atol=1e-14)
            assert np.all(np.diag(m) > 0)
            assert np.all(np.count_nonzero(np.tril(m, -1), axis=0) >= 1)
            assert np.all(np.triu(m, 1) == 0)
            support = lower_support(g.relabel(perm).skeleton())
            assert not np.any((m != 0) & ~support)
            if weighting == "unit-pm1":
                assert np.all(np.count_nonzero(np.tril(m, -1), axis=0) == 1)

    @settings(max_examples=50, deadline=None)
    @given(connected_graphs())
    def test_product_is_a_laplacian(self, g):
        f, _ = prepare_factor(g)
        lap = f.laplacian()
        np.testing.assert_allclose(lap, lap.T, atol=1e-14)
        np.testing.assert_allclose(lap.sum(axis=1), 0, atol=1e-12)
        vals = np.linalg.eigvalsh(lap)
        assert abs(vals[0]) < 1e-10
        assert np.all(vals[1:] > 1e-10)


class TestGamma:
    def test_two_nodes(self):
        f = LowerFactor(np.array([[1.0], [-1.0]]), "unit-pm1")
        assert gamma(f) == pytest.approx(0.5)

    def test_path(self, p3):
        assert build_lower_factor(p3, "unit-pm1").gamma == pytest.approx(1 / 3)

    @settings(max_examples=50, deadline=None)
    @given(connected_graphs())
    def test_at_most_one_and_equal_to_inverse_size(self, g):
        # zero column sums force the null vector of L^T to be 1, hence gamma = 1/n
        for weighting in ("column-normalized", "unit-pm1"):
            f, _ = prepare_factor(g, weighting)
            assert 0 < f.gamma <= 1
            assert f.gamma == pytest.approx(1 / g.n, rel=1e-10)


class TestBacksub:
    @pytest.mark.parametrize("a,b", [(1.0, 3.0), (-2.0, 5.5), (0.0, 0.0)])
    def test_two_nodes(self, a, b):
        f = build_lower_factor(path_graph(2))
        res = exact_ac_backsub(f, [a, b])
        np.testing.assert_allclose(res.value, (a + b) / 2)
        assert res.steps == 4

    def test_path(self, p3):
        res = exact_ac_backsub(build_lower_factor(p3, "unit-pm1"), W0_P3)
        np.testing.assert_allclose(res.value, [2, 2, 2], atol=1e-15)
        assert res.steps == 6

    def test_intermediates_on_path(self, p3):
        f = build_lower_factor(p3, "unit-pm1")
        w1 = solve_triangular(f.lbar, W0_P3[:2], lower=True)
        np.testing.assert_allclose(w1, [0, 3])
        wn = f.gamma * (f.b @ w1 - W0_P3[2])
        assert wn == pytest.approx(-2.0)
        np.testing.assert_allclose(f.b * wn, [0, 2])

    def test_consensus_fixed(self, p3):
        res = exact_ac_backsub(build_lower_factor(p3), np.full(3, -7.25))
        np.testing.assert_allclose(res.value, -7.25)

    def test_size_mismatch(self, p3):
        with pytest.raises(SizeMismatch):
            exact_ac_backsub(build_lower_factor(p3), [1.0, 2.0])

    @settings(max_examples=60, deadline=None)
    @given(graphs_with_values())
    def test_equals_projection_oracle(self, gv):
        g, w0 = gv
        f, perm = prepare_factor(g)
        w = perm.apply(w0)
        oracle = kernel_projection(f.matrix.T) @ w
        res = exact_ac_backsub(f, w)
        np.testing.assert_allclose(res.value, oracle, atol=1e-10 * max(1.0, np.abs(w0).max()))


class TestAdditions:
    def test_path(self, p3):
        f = build_lower_factor(p3, "unit-pm1")
        res = exact_ac_additions(f, W0_P3)
        np.testing.assert_allclose(res.value, [2, 2, 2])
        assert res.mults == np.count_nonzero(f.b) + 1 == 2
        assert res.adds <= 2 * len(p3.edges)

    def test_two_nodes(self):
        res = exact_ac_additions(build_lower_factor(path_graph(2), "unit-pm1"), [4.0, 0.0])
        np.testing.assert_allclose(res.value, [2, 2])

    def test_zero_input_costs_the_same(self, p3):
        f = build_lower_factor(p3, "unit-pm1")
        zero = exact_ac_additions(f, np.zeros(3))
        other = exact_ac_additions(f, W0_P3)
        np.testing.assert_array_equal(zero.value, 0)
        assert (zero.adds, zero.mults) == (other.adds, other.mults)

    def test_rejects_column_normalized(self, p3):
        with pytest.raises(WrongWeighting):
            exact_ac_additions(build_lower_factor(p3, "column-normalized"), W0_P3)

    @settings(max_examples=60, deadline=None)
    @given(graphs_with_values())
    def test_matches_backsub_and_counts(self, gv):
        g, w0 = gv
        f, perm = prepare_factor(g, "unit-pm1")
        w = perm.apply(w0)
        a = exact_ac_additions(f, w)
        b = exact_ac_backsub(f, w)
        np.testing.assert_allclose(a.value, b.value, atol=1e-12 * max(1.0, np.abs(w0).sum()))
        assert a.mults == np.count_nonzero(f.b) + 1
        assert a.adds <= 2 * len(g.edges)
        assert a.steps == 2 * g.n


class TestNilpotency:
    def test_one_by_one(self):
        assert nilpotency_index(np.zeros((1, 1))) == 1

    def test_path_three(self, p3):
        assert nilpotency_index(build_lower_factor(p3).l0) == 2

    @pytest.mark.parametrize("n", [3, 5, 9])
    def test_path(self, n):
        assert nilpotency_index(build_lower_factor(path_graph(n)).l0) == n - 1

    def test_rejects_diagonal(self):
        with pytest.raises(NotStrictlyLowerTriangular):
            nilpotency_index(np.eye(2))

    @settings(max_examples=50, deadline=None)
    @given(connected_graphs())
    def test_bound_and_definition(self, g):
        f, _ = prepare_factor(g)
        p = nilpotency_index(f.l0)
        assert 1 <= p <= g.n - 1
        assert np.all(np.linalg.matrix_power(f.l0, p) == 0)
        if p > 1:
            assert np.any(np.linalg.matrix_power(f.l0, p - 1) != 0)


class TestGraphFilter:
    def test_zero_shift_is_identity(self):
        gf = graph_filter(np.zeros((3, 3)))
        np.testing.assert_array_equal(graph_filter_apply(gf, np.array([1.0, 2.0, 3.0])), [1, 2, 3])

    def test_path(self, p3):
        gf = graph_filter(build_lower_factor(p3))
        np.testing.assert_allclose(graph_filter_apply(gf, np.array([1.0, 1.0])), [1, 2])

    def test_random_chain_matches_dense_solve(self, rng):
        n = 8
        l0 = np.diag(rng.normal(size=n - 1), -1)
        gf = graph_filter(l0)
        z0 = rng.normal(size=n)
        lbar = np.eye(n) + l0
        np.testing.assert_allclose(graph_filter_apply(gf, z0), np.linalg.solve(lbar, z0), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(
            graph_filter_apply(gf, z0, transpose=True), np.linalg.solve(lbar.T, z0), rtol=1e-12, atol=1e-12
        )

    def test_size_mismatch(self, p3):
        with pytest.raises(SizeMismatch):
            graph_filter_apply(graph_filter(build_lower_factor(p3)), np.ones(3))

    def test_path_root_and_polynomial(self, p3):
        f = build_lower_factor(p3)
        gf = graph_filter(f)
        np.testing.assert_allclose(gf.roots, [1.0], atol=1e-15)
        series = sum(np.linalg.matrix_power(-f.l0, k) for k in range(gf.degree + 1))
        np.testing.assert_allclose(series, [[1, 0], [1, 1]])
        np.testing.assert_allclose(np.linalg.inv(f.lbar), [[1, 0], [1, 1]])

    @pytest.mark.parametrize("degree", [1, 2, 5, 12, 28])
    def test_roots_on_unit_circle(self, degree):
        roots = filter_roots(degree)
        assert roots.size == degree
        np.testing.assert_allclose(np.abs(roots), 1.0, atol=1e-12)
        assert np.abs(filter_polynomial(roots, degree)).max() <= 1e-10

    def test_two_nodes(self):
        res = graph_filter_factored(build_lower_factor(path_graph(2)), [1.0, 5.0])
        np.testing.assert_allclose(res.value, [3, 3])
        assert res.matrix_iterations == 1

    def test_chain_of_six(self, rng):
        f = build_lower_factor(path_graph(6))
        w0 = rng.normal(size=6)
        a = graph_filter_factored(f, w0)
        b = exact_ac_backsub(f, w0)
        np.testing.assert_allclose(a.value, b.value, rtol=1e-8)
        assert a.matrix_iterations == 2 * (6 - 2) + 1

    def test_truncation_counts(self):
        g = build_graph(5, [(1, 5), (2, 5), (3, 5), (4, 5)])  # star: l0 vanishes after one power
        f = build_lower_factor(g)
        full = graph_filter_factored(f, np.arange(5.0))
        short = graph_filter_factored(f, np.arange(5.0), truncate=True)
        assert full.matrix_iterations == 2 * 3 + 1
        assert short.matrix_iterations == 1
        np.testing.assert_allclose(short.value, 2.0)
        np.testing.assert_allclose(full.value, 2.0)

    @settings(max_examples=50, deadline=None)
    @given(graphs_with_values())
    def test_factored_matches_backsub(self, gv):
        g, w0 = gv
        f, perm = prepare_factor(g)
        w = perm.apply(w0)
        ref = exact_ac_backsub(f, w).value
        scale = max(np.abs(ref).max(), 1e-12 * np.abs(w).max(), 1e-300)
        for truncate in (False, True):
            res = graph_filter_factored(f, w, truncate=truncate)
            assert np.abs(res.value - ref).max() <= 1e-8 * max(scale, np.abs(w).max())
            assert res.extra["imag_residue"] <= 1e-9


class TestPipeline:
    @settings(max_examples=40, deadline=None)
    @given(graphs_with_values())
    def test_all_methods_agree_in_original_numbering(self, gv):
        g, w0 = gv
        scale = max(1.0, np.abs(w0).max())
        for method in ("backsub", "additions", "filter"):
            res = exact_average(g, w0, method)
            assert np.abs(res.value - w0.mean()).max() <= 1e-8 * scale

    def test_directed_rejected(self, appendix):
        with pytest.raises(ValueError):
            exact_average(appendix, np.ones(20))

    def test_disconnected(self):
        with pytest.raises(Disconnected):
            exact_average(build_graph(4, [(1, 2), (3, 4)]), np.ones(4))

    def test_unknown_method(self, p3):
        with pytest.raises(ValueError):
            exact_average(p3, W0_P3, "cholesky")
