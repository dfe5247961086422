import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from airfl.channel import Geometry, draw_node_positions
from airfl.errors import EmptyTestSet, IndivisibleSharding, InvalidConvexityParams
from airfl.fltrain import (
    Aggregation,
    ConvexityParams,
    DataShard,
    FlConfig,
    LinearModel,
    LossKind,
    Scenario,
    aggregate_ideal,
    bound_trajectory,
    convergence_bound,
    evaluate_accuracy,
    global_loss,
    global_update,
    least_squares_optimum,
    local_gradient,
    pool_shards,
    run_fl,
    shard_noniid,
)
from airfl.optimizer import AoConfig

from conftest import REGION, RIS, SERVER


def toy_shard(rng, k=12, f=5, c=3):
    return DataShard(rng.normal(size=(k, f)), rng.integers(0, c, k))


def random_model(rng, kind, c=3, f=5, reg=0.1):
    return LinearModel(rng.normal(size=(c, f)), kind, reg)


class TestModel:
    def test_least_squares_hand_gradient(self):
        u, v = np.array([1.0, -2.0, 0.5]), np.array([3.0, -1.0])
        shard = DataShard(u[None, :], [0], targets=v[None, :])
        model = LinearModel.zeros(2, 3, LossKind.LEAST_SQUARES)
        np.testing.assert_allclose(local_gradient(model, shard), (-v[:, None] * u[None, :]).reshape(-1))

    @pytest.mark.parametrize("kind", list(LossKind))
    def test_finite_differences(self, kind, rng):
        shard, model = toy_shard(rng), random_model(rng, kind)
        w, grad = model.flat(), model.gradient(shard)
        h = 1e-5
        fd = np.empty_like(w)
        for j in range(w.size):
            e = np.zeros_like(w)
            e[j] = h
            fd[j] = (model.with_flat(w + e).loss(shard) - model.with_flat(w - e).loss(shard)) / (2 * h)
        np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("kind", list(LossKind))
    def test_duplication_invariance(self, kind, rng):
        shard, model = toy_shard(rng), random_model(rng, kind)
        double = DataShard(np.vstack([shard.features] * 2), np.concatenate([shard.labels] * 2))
        np.testing.assert_allclose(model.gradient(double), model.gradient(shard), rtol=1e-12)

    def test_flat_round_trip(self, rng):
        model = random_model(rng, LossKind.CROSS_ENTROPY)
        np.testing.assert_array_equal(model.with_flat(model.flat()).weights, model.weights)
        assert model.dim == 15


class TestAggregation:
    def test_single_node(self, rng):
        g = rng.normal(size=7)
        np.testing.assert_allclose(aggregate_ideal([g], [5]), g)

    def test_cancellation(self, rng):
        g = rng.normal(size=4)
        np.testing.assert_allclose(aggregate_ideal([g, -g], [3, 3]), 0, atol=1e-15)

    @pytest.mark.parametrize("kind", list(LossKind))
    def test_pooled_gradient(self, kind, rng):
        shards = [toy_shard(rng, k) for k in (4, 9, 13)]
        model = random_model(rng, kind)
        grads = [model.gradient(s) for s in shards]
        np.testing.assert_allclose(aggregate_ideal(grads, [s.size for s in shards]), model.gradient(pool_shards(shards)))
        assert global_loss(model, shards) == pytest.approx(model.loss(pool_shards(shards)))

    def test_update_identities(self, rng):
        w, g = rng.normal(size=6), rng.normal(size=6)
        np.testing.assert_array_equal(global_update(w, 0 * g, 0.3), w)
        np.testing.assert_array_equal(global_update(w, g, 0.0), w)
        np.testing.assert_allclose(global_update(global_update(w, g, 0.1), g, 0.2), global_update(w, g, 0.3))


def sorted_labels(num, classes=10):
    return np.repeat(np.arange(classes), num // classes)


class TestSharding:
    def test_full_scale_sizes(self, rng):
        y = sorted_labels(60000)
        shards = shard_noniid(np.zeros((60000, 1)), y, 40, 2, 20, rng)
        assert [s.size for s in shards] == [3000] * 20

    def test_desk_scale_label_spread(self, rng):
        y = rng.permutation(sorted_labels(4000))
        x = np.arange(4000, dtype=float)[:, None]
        shards = shard_noniid(x, y, 40, 2, 20, rng)
        assert all(s.size == 200 for s in shards)
        assert all(np.unique(s.labels).size <= 4 for s in shards)

    def test_partition(self, rng):
        y = rng.integers(0, 10, 600)
        x = np.arange(600, dtype=float)[:, None]
        shards = shard_noniid(x, y, 12, 3, 4, rng)
        pooled = np.sort(np.concatenate([s.features[:, 0] for s in shards]))
        np.testing.assert_array_equal(pooled, x[:, 0])
        for s in shards:
            np.testing.assert_array_equal(y[s.features[:, 0].astype(int)], s.labels)

    def test_indivisible(self, rng):
        with pytest.raises(IndivisibleSharding):
            shard_noniid(np.zeros((100, 1)), np.zeros(100), 40, 2, 20, rng)
        with pytest.raises(IndivisibleSharding):
            shard_noniid(np.zeros((80, 1)), np.zeros(80), 40, 2, 10, rng)


class TestAccuracy:
    def test_constant_prediction(self):
        test = DataShard(np.ones((100, 2)), sorted_labels(100))
        model = LinearModel(np.vstack([[1.0, 1.0], np.zeros((9, 2))]))
        assert evaluate_accuracy(model, test) == pytest.approx(0.1)

    def test_separable(self, rng):
        y = rng.integers(0, 3, 60)
        x = np.eye(3)[y] + 0.05 * rng.normal(size=(60, 3))
        model = LinearModel(np.eye(3))
        assert evaluate_accuracy(model, DataShard(x, y)) == 1.0

    @given(st.floats(-100, 100), st.integers(0, 2**32 - 1))
    def test_shift_invariance(self, shift, seed):
        r = np.random.default_rng(seed)
        x, y = r.normal(size=(30, 4)), r.integers(0, 5, 30)
        w = r.normal(size=(5, 4))
        # a constant feature column carries the score offset
        xa = np.hstack([x, np.ones((30, 1))])
        base = LinearModel(np.hstack([w, np.zeros((5, 1))]))
        moved = LinearModel(np.hstack([w, np.full((5, 1), shift)]))
        assert evaluate_accuracy(base, DataShard(xa, y)) == evaluate_accuracy(moved, DataShard(xa, y))

    def test_empty(self):
        with pytest.raises(EmptyTestSet):
            evaluate_accuracy(LinearModel.zeros(2, 2), DataShard(np.zeros((0, 2)), []))


class TestBound:
    params = ConvexityParams(rho=2.0, mu=0.5)

    def test_noiseless_geometric(self):
        lam = self.params.lambda_conv
        for t in (1, 10, 100):
            assert convergence_bound(3.0, np.zeros(t), self.params) == pytest.approx(3.0 * lam**t)

    def test_single_round(self):
        lam = self.params.lambda_conv
        assert convergence_bound(3.0, [0.8], self.params) == pytest.approx(3.0 * lam + 0.8 / 4.0)

    def test_constant_error(self):
        lam, e, t = self.params.lambda_conv, 0.3, 25
        closed = e * (1 - lam**t) / (2 * 2.0 * (1 - lam))
        assert convergence_bound(0.0, np.full(t, e), self.params) == pytest.approx(closed)

    @given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(0, 10))
    def test_trajectory_matches_prefix_bounds(self, errs, gap0):
        traj = bound_trajectory(gap0, errs, self.params)
        for t in range(1, len(errs) + 1):
            assert traj[t - 1] == pytest.approx(convergence_bound(gap0, errs[:t], self.params), rel=1e-9, abs=1e-12)

    def test_invalid_params(self):
        for rho, mu in ((1.0, 1.0), (1.0, 0.0), (1.0, 2.0)):
            with pytest.raises(InvalidConvexityParams):
                ConvexityParams(rho=rho, mu=mu)

    def test_polyak_lojasiewicz_along_gd(self, rng):
        x, t = rng.normal(size=(80, 4)), rng.normal(size=(80, 2))
        reg = 0.05
        shard = DataShard(x, np.zeros(80), targets=t)
        params = ConvexityParams.from_features(x, reg)
        model = LinearModel.zeros(2, 4, LossKind.LEAST_SQUARES, reg)
        l_star = model.with_flat(least_squares_optimum(x, t, reg).reshape(-1)).loss(shard)
        w = model.flat()
        for _ in range(30):
            cur = model.with_flat(w)
            g = cur.gradient(shard)
            assert g @ g >= 2 * params.mu * (cur.loss(shard) - l_star) - 1e-12
            w = w - g / params.rho
        assert np.allclose(model.with_flat(least_squares_optimum(x, t, reg).reshape(-1)).gradient(shard), 0, atol=1e-12)


def synthetic_scenario(rng, num_nodes=3, features=1000, outputs=4, per_node=50, num_elements=8):
    shards = [
        DataShard(rng.normal(size=(per_node, features)), np.zeros(per_node), targets=rng.normal(size=(per_node, outputs)))
        for _ in range(num_nodes)
    ]
    geom = Geometry(SERVER, RIS, draw_node_positions(num_nodes, REGION, rng))
    return Scenario(
        shards=shards,
        model=LinearModel.zeros(outputs, features, LossKind.LEAST_SQUARES, 0.0),
        geometry=geom,
        num_elements=num_elements,
    )


class TestRunFl:
    def test_ideal_has_no_error(self, rng):
        sc = synthetic_scenario(rng, features=20)
        tr = run_fl(FlConfig(rounds=5, learning_rate=0.01, aggregation="ideal"), sc)
        np.testing.assert_array_equal(tr.error_sq, 0.0)
        assert tr.losses[-1] < tr.initial_loss

    @pytest.mark.parametrize("arm", [Aggregation.AIRCOMP, Aggregation.AIRCOMP_NO_RIS])
    def test_recorded_error_matches_prediction(self, arm):
        # independent node gradients, 4000 entries per round
        sc = synthetic_scenario(np.random.default_rng(3))
        tr = run_fl(FlConfig(rounds=2, learning_rate=1e-12, aggregation=arm), sc, AoConfig(outer_max_iters=10),
                    rng=np.random.default_rng(4), channel_seed=5)
        for r in tr.records:
            assert r.nmse == pytest.approx(r.predicted_mse, rel=0.05)

    def test_learning_rate_schedule(self):
        fl = FlConfig(rounds=3, learning_rate=[0.3, 0.2, 0.1])
        assert [fl.eta(t) for t in (1, 2, 3)] == [0.3, 0.2, 0.1]
        with pytest.raises(ValueError):
            FlConfig(rounds=3, learning_rate=[0.1, 0.2])

    def test_deterministic(self, rng):
        sc = synthetic_scenario(rng, features=10)
        cfg, ao = FlConfig(rounds=2, aggregation="active"), AoConfig(outer_max_iters=3)
        a = run_fl(cfg, sc, ao, rng=np.random.default_rng(1), channel_seed=2)
        b = run_fl(cfg, sc, ao, rng=np.random.default_rng(1), channel_seed=2)
        np.testing.assert_array_equal(a.final_weights, b.final_weights)
