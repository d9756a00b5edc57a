import warnings

import numpy as np
import pytest

from oracles import GRADIENT_CASES, rel_error
from unidnn.nn import (
    AdamState,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    Network,
    TrainConfig,
    TrainingError,
    adam_step,
    binary_accuracy,
    checkpoint,
    cross_entropy_loss,
    dense_backward,
    dense_forward,
    mlp,
    mse_loss,
    relu,
    relu_grad,
    sigmoid,
    train,
)
from unidnn.nn import functional as F
from unidnn.nn.checkpoint import CheckpointError
from unidnn.phy import StructureError


@pytest.mark.parametrize("case", list(GRADIENT_CASES))
def test_finite_difference_gradients(case):
    rng = np.random.default_rng(list(GRADIENT_CASES).index(case))
    worst = max(GRADIENT_CASES[case](rng) for _ in range(20))
    assert worst < 1e-4


class TestActivations:
    def test_relu_examples(self):
        np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0, 0, 2])
        np.testing.assert_array_equal(relu_grad(np.array([3.0, -3.0])), [1, 0])

    def test_sigmoid_examples(self):
        assert sigmoid(0.0) == 0.5
        assert abs(sigmoid(50.0) - 1.0) < 1e-12
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            out = sigmoid(np.array([-800.0, 800.0]))
        np.testing.assert_array_equal(out, [0.0, 1.0])

    def test_softmax_rows_sum_to_one(self):
        s = F.softmax(np.array([[1000.0, 0.0, -1000.0], [1.0, 2.0, 3.0]]))
        np.testing.assert_allclose(s.sum(axis=1), 1.0)
        assert np.all(np.isfinite(s))

    def test_float32_preserved(self):
        z = np.ones(3, np.float32)
        assert sigmoid(z).dtype == np.float32
        assert F.softmax(z).dtype == np.float32


class TestDense:
    def test_identity(self):
        x = np.random.default_rng(0).standard_normal((3, 8))
        np.testing.assert_array_equal(dense_forward(x, np.eye(8), np.zeros(8)), x)

    def test_l2_term(self):
        w = np.random.default_rng(1).standard_normal((4, 3))
        _, dw, _ = dense_backward(np.ones((2, 4)), w, np.zeros((2, 3)), l2=0.3)
        np.testing.assert_array_equal(dw, 0.3 * w)

    def test_width_mismatch(self):
        with pytest.raises(StructureError):
            dense_forward(np.ones((1, 3)), np.ones((4, 2)), np.zeros(2))


class TestConv1d:
    def test_channel_selector(self):
        x = np.random.default_rng(2).standard_normal((2, 12, 5))
        w = np.zeros((1, 5, 1))
        w[0, 2, 0] = 1.0
        np.testing.assert_array_equal(F.conv1d_forward(x, w, np.zeros(1))[..., 0], x[..., 2])

    @pytest.mark.parametrize("k", [1, 2, 3, 5])
    def test_brute_force_oracle(self, k):
        rng = np.random.default_rng(k)
        x, w, b = rng.standard_normal((1, 12, 5)), rng.standard_normal((k, 5, 5)), rng.standard_normal(5)
        left = (k - 1) // 2
        ref = np.zeros((12, 5))
        for t in range(12):
            for f in range(5):
                acc = b[f]
                for j in range(k):
                    src = t + j - left
                    if 0 <= src < 12:
                        for c in range(5):
                            acc += x[0, src, c] * w[j, c, f]
                ref[t, f] = acc
        np.testing.assert_allclose(F.conv1d_forward(x, w, b)[0], ref, atol=1e-9)

    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_same_length(self, k):
        layer = Conv1D(5, 7, k, "relu", np.random.default_rng(0))
        assert layer.forward(np.ones((3, 128, 5))).shape == (3, 128, 7)
        assert layer.output_shape((128, 5)) == (128, 7)

    def test_bad_input(self):
        with pytest.raises(StructureError):
            F.conv1d_forward(np.ones((12, 5)), np.ones((1, 5, 1)), np.zeros(1))
        with pytest.raises(StructureError):
            F.conv1d_forward(np.ones((1, 12, 4)), np.ones((1, 5, 1)), np.zeros(1))


class TestLosses:
    def test_mse_examples(self):
        assert mse_loss([1.0, 0.0], [1.0, 0.0])[0] == 0.0
        assert mse_loss([1.0, 0.0], [0.0, 0.0])[0] == pytest.approx(0.5)

    def test_ce_examples(self):
        assert cross_entropy_loss([[0, 1, 0]], [[0.0, 1.0, 0.0]])[0] == pytest.approx(0.0)
        assert cross_entropy_loss([[1, 0, 0, 0, 0]], [[0.2] * 5])[0] == pytest.approx(np.log(5))

    def test_ce_clamp_keeps_loss_finite(self):
        loss, grad = cross_entropy_loss([[1, 0]], [[0.0, 1.0]])
        assert loss == pytest.approx(-np.log(1e-12))
        assert np.all(np.isfinite(grad))

    def test_mse_gradient_precision(self):
        rng = np.random.default_rng(3)
        y, y_hat = rng.random(9), rng.random(9)
        from oracles import numeric_grad
        assert rel_error(mse_loss(y, y_hat)[1], numeric_grad(lambda: mse_loss(y, y_hat)[0], y_hat)) < 1e-6


class TestAccuracy:
    def test_examples(self):
        assert binary_accuracy([1.0], [0.9]) == 1.0
        assert binary_accuracy([1.0, 0.0], [0.1, 0.8]) == 0.0

    def test_matches_one_minus_ber(self):
        rng = np.random.default_rng(4)
        y = rng.integers(0, 2, 1000).astype(float)
        p = rng.random(1000)
        ber = np.mean((p > 0.5) != y)
        assert binary_accuracy(y, p) == pytest.approx(1 - ber)


class TestAdam:
    def test_first_step_is_signed_learning_rate(self):
        g = np.random.default_rng(5).standard_normal(10)
        p = {"w": np.zeros(10)}
        adam_step(p, {"w": g}, AdamState(), lr=1e-3)
        np.testing.assert_allclose(p["w"], -1e-3 * np.sign(g), atol=1e-6)

    def test_zero_gradient(self):
        p = {"w": np.arange(3.0)}
        adam_step(p, {"w": np.zeros(3)}, AdamState())
        np.testing.assert_array_equal(p["w"], np.arange(3.0))

    def test_decreases_quadratic(self):
        p, state = {"x": np.array([5.0])}, AdamState()
        losses = [(p["x"][0] - 3) ** 2]
        for _ in range(2):
            adam_step(p, {"x": 2 * (p["x"] - 3)}, state, lr=0.1)
            losses.append((p["x"][0] - 3) ** 2)
        assert losses[0] > losses[1] > losses[2]


class TestDropout:
    def test_expectation_preserved(self):
        out = Dropout(0.3).forward(np.ones((1, 100_000)), training=True, rng=np.random.default_rng(6))
        assert out.mean() == pytest.approx(1.0, rel=0.01)

    def test_identity_at_inference(self):
        x = np.arange(5.0)[None]
        np.testing.assert_array_equal(Dropout(0.5).forward(x), x)

    def test_rate_bounds(self):
        with pytest.raises(StructureError):
            Dropout(1.0)


class TestTraining:
    def test_learns_linear_map(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((64, 8)) / 8
        x = rng.standard_normal((3000, 64))
        y = x @ a
        net = Network([Dense(64, 8, "none", rng)], (64,), "mse")
        report = train(net, x, y, TrainConfig(learning_rate=1e-2, l2=0.0, batch_size=100, epochs=200, seed=1))
        x_test = rng.standard_normal((500, 64))
        assert np.mean((net.predict(x_test) - x_test @ a) ** 2) < 1e-3
        assert report.best_epoch >= 0

    def _fit(self, dropout):
        rng = np.random.default_rng(8)
        x, y = rng.standard_normal((300, 6)), rng.integers(0, 2, (300, 3)).astype(float)
        net = mlp(6, 10, 3, dropout=dropout, rng=np.random.default_rng(9))
        rep = train(net, x, y, TrainConfig(batch_size=50, epochs=5, seed=3))
        return net.get_params(), rep

    @pytest.mark.parametrize("dropout", [0.0, 0.2])
    def test_deterministic(self, dropout):
        (a, ra), (b, rb) = self._fit(dropout), self._fit(dropout)
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])
        assert ra.train_loss == rb.train_loss

    def test_split_disjoint(self):
        _, rep = self._fit(0.0)
        assert not set(rep.train_indices) & set(rep.val_indices)
        assert len(rep.train_indices) + len(rep.val_indices) == 300
        assert len(rep.train_indices) == 210

    def test_validation_never_trained_on(self):
        seen = []

        class Spy(Network):
            def forward(self, x, training=False, rng=None):
                if training:
                    seen.append(np.asarray(x).copy())
                return super().forward(x, training, rng)

        rng = np.random.default_rng(10)
        x = np.arange(40, dtype=float)[:, None] * np.ones((1, 2))
        net = Spy([Dense(2, 1, "sigmoid", rng)], (2,), "mse")
        rep = train(net, x, rng.random((40, 1)), TrainConfig(batch_size=8, epochs=2, seed=2))
        used = np.unique(np.concatenate(seen)[:, 0]).astype(int)
        np.testing.assert_array_equal(used, rep.train_indices)
        # 28 training samples in batches of 8 leave a final partial batch of 4
        assert sorted({len(s) for s in seen}) == [4, 8]

    def test_non_finite_loss(self):
        x = np.ones((20, 2))
        y = np.full((20, 1), np.nan)
        with pytest.raises(TrainingError):
            train(mlp(2, 3, 1), x, y, TrainConfig(batch_size=5, epochs=1))

    def test_batch_larger_than_training_set(self):
        with pytest.raises(StructureError):
            train(mlp(2, 3, 1), np.ones((10, 2)), np.ones((10, 1)), TrainConfig(batch_size=100, epochs=1))

    def test_label_width_checked(self):
        with pytest.raises(StructureError):
            train(mlp(2, 3, 1), np.ones((10, 2)), np.ones((10, 2)), TrainConfig(batch_size=2, epochs=1))


class TestNetwork:
    def test_input_shape_checked(self):
        with pytest.raises(StructureError):
            mlp(4, 3, 2).predict(np.ones((1, 5)))

    def test_astype_copy(self):
        net = mlp(4, 3, 2, rng=np.random.default_rng(11))
        low = net.astype(np.float32)
        assert low.dtype == np.float32 and net.dtype == np.float64
        x = np.random.default_rng(12).standard_normal((5, 4))
        np.testing.assert_allclose(low.predict(x), net.predict(x), rtol=1e-5)

    def test_version_tracks_parameter_changes(self):
        net = mlp(4, 3, 2)
        v = net.version
        net.set_params(net.get_params())
        assert net.version > v

    def test_parameter_count(self):
        assert mlp(128, 256, 112).n_parameters() == 128 * 256 + 256 + 256 * 112 + 112


class TestCheckpoint:
    def test_bit_exact_round_trip(self):
        rng = np.random.default_rng(13)
        net = Network([Conv1D(5, 5, 3, "relu", rng), Flatten(), Dense(40, 4, "sigmoid", rng)], (8, 5))
        back = checkpoint.loads(checkpoint.dumps(net))
        assert back.specs() == net.specs() and back.input_shape == net.input_shape
        for k, v in net.get_params().items():
            np.testing.assert_array_equal(back.get_params()[k], v)
        assert checkpoint.dumps(back) == checkpoint.dumps(net)

    def test_file_round_trip(self, tmp_path):
        net = mlp(3, 4, 2, output="softmax")
        checkpoint.save(net, tmp_path / "n.unn")
        assert checkpoint.load(tmp_path / "n.unn").loss == "cross_entropy"

    def test_corrupt_magic(self):
        data = bytearray(checkpoint.dumps(mlp(2, 2, 1)))
        data[0] ^= 0xFF
        with pytest.raises(CheckpointError):
            checkpoint.loads(bytes(data))

    def test_truncated(self):
        with pytest.raises(CheckpointError):
            checkpoint.loads(checkpoint.dumps(mlp(2, 2, 1))[:-8])
