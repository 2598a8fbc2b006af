import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avgcons.diffusion import (
    DiffusionState,
    NetworkModel,
    diffuse_step,
    generate_stream,
    make_projector,
    msd_db,
    run_diffusion,
)
from avgcons.errors import SizeMismatch
from avgcons.graph import build_graph, path_graph, random_connected_graph
from strategies import connected_graphs


def _model(n=10, m=4, seed=3, **kw):
    return NetworkModel.common(n, m, seed, **kw)


class TestModel:
    def test_shape_checked(self):
        with pytest.raises(SizeMismatch):
            NetworkModel(n=3, m=2, w_true=np.zeros((2, 3)))

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            NetworkModel(n=2, m=1, w_true=np.zeros((2, 1)), noise_var=-1.0)

    def test_reference_is_node_mean(self):
        model = NetworkModel(n=2, m=1, w_true=np.array([[1.0], [3.0]]))
        assert not model.consistent
        np.testing.assert_array_equal(model.reference, [[2.0], [2.0]])

    def test_stream_deterministic(self):
        model = _model()
        a = list(generate_stream(model, 5, seed=9))
        b = list(generate_stream(model, 5, seed=9))
        for (d1, u1), (d2, u2) in zip(a, b):
            np.testing.assert_array_equal(d1, d2)
            np.testing.assert_array_equal(u1, u2)

    def test_noise_variance(self):
        model = _model(n=5, m=3, noise_var=0.2)
        resid = [d - u @ model.w_true[0] for d, u in generate_stream(model, 10_000, seed=1)]
        var = np.var(np.concatenate(resid))
        assert abs(var / 0.2 - 1) < 0.05

    def test_regressor_variance(self):
        model = _model(n=4, m=2, regressor_var=3.0)
        u = np.stack([u for _, u in generate_stream(model, 10_000, seed=2)])
        assert abs(u.var() / 3.0 - 1) < 0.05


class TestStep:
    def test_zero_step_size_keeps_estimates(self):
        g = path_graph(3)
        state = DiffusionState.zeros(3, 2)
        state.w[:] = 0.5
        data = next(generate_stream(_model(3, 2), 1, seed=0))
        out = diffuse_step(state, data, 0.0, make_projector(g))
        np.testing.assert_allclose(out.w, 0.5, atol=1e-15)

    def test_single_node_is_plain_lms(self):
        model = _model(n=1, m=3)
        d, u = next(generate_stream(model, 1, seed=0))
        out = diffuse_step(DiffusionState.zeros(1, 3), (d, u), 0.1, make_projector(build_graph(1, [])))
        np.testing.assert_allclose(out.w, 0.1 * u[0] * d[0])

    def test_two_nodes_average(self):
        state = DiffusionState(w=np.array([1.0, 3.0]), n=2, m=1)
        data = (np.zeros(2), np.zeros((2, 1)))
        out = diffuse_step(state, data, 0.3, make_projector(path_graph(2)))
        np.testing.assert_allclose(out.w, [2.0, 2.0])

    def test_shape_mismatch(self):
        with pytest.raises(SizeMismatch):
            diffuse_step(DiffusionState.zeros(3, 2), (np.zeros(2), np.zeros((2, 2))), 0.1, lambda x: x)

    def test_unknown_projector(self):
        with pytest.raises(ValueError):
            make_projector(path_graph(3), "gossip")

    @settings(max_examples=40, deadline=None)
    @given(connected_graphs(), st.integers(0, 2**31 - 1))
    def test_projectors_agree_with_dense(self, g, seed):
        x = np.random.default_rng(seed).normal(size=g.n)
        dense = make_projector(g, "dense")(x)
        np.testing.assert_allclose(dense, x.mean(), atol=1e-9)
        for kind in ("backsub", "additions", "filter"):
            np.testing.assert_allclose(make_projector(g, kind)(x), dense, atol=1e-9)


class TestRun:
    def test_deterministic(self):
        g = random_connected_graph(8, 0.5, seed=2)
        a = run_diffusion(_model(8, 3), g, 0.05, 50, seed=4)
        b = run_diffusion(_model(8, 3), g, 0.05, 50, seed=4)
        np.testing.assert_array_equal(a.msd_db, b.msd_db)
        np.testing.assert_array_equal(a.state.w, b.state.w)

    def test_zero_steps(self):
        res = run_diffusion(_model(4, 2), path_graph(4), 0.05, 0)
        assert res.msd_db.shape == (1,)
        np.testing.assert_array_equal(res.state.w, 0)
        assert not res.diverged

    def test_converges_and_stays_in_consensus(self):
        g = random_connected_graph(10, 0.4, seed=5)
        model = _model(10, 4, noise_var=0.0)
        proj = make_projector(g)
        state = DiffusionState.zeros(10, 4)
        for data in generate_stream(model, 300, seed=0):
            state = diffuse_step(state, data, 0.05, proj)
            assert state.spread() <= 1e-10
        assert msd_db(state.blocks, model.reference) < -100

    def test_divergence_flag(self):
        res = run_diffusion(_model(6, 4, noise_var=0.0), path_graph(6), 5.0, 200)
        assert res.diverged
        assert res.msd_db.size < 201

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatch):
            run_diffusion(_model(4, 2), path_graph(5), 0.05, 10)

    def test_noise_floor(self):
        model = _model(10, 4, noise_var=1e-3)
        res = run_diffusion(model, random_connected_graph(10, 0.4, seed=1), 0.05, 600)
        # a noisy stream settles at a finite floor well above the noiseless limit
        assert -60 < res.msd_db[-100:].mean() < -20
