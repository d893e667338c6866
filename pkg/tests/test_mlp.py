"""Baseline MLP: gradients, shared training harness, checkpoints."""

import numpy as np
import pytest

from conftest import rel_err
from kanshift.losses import LOG_MSRELU, PLAIN_MSRELU, LossSpec
from kanshift.mlp import MlpNetwork, load_mlp, save_mlp
from kanshift.network import CheckpointError, ParameterTape
from kanshift.training import TrainConfig, train_mlp_baseline


class TestMlpGradients:
    def test_gradient_check(self):
        net = MlpNetwork.build(3, hidden=(5, 4), seed=2)
        tape = ParameterTape(net)
        rng = np.random.default_rng(1)
        h = 1e-5
        for _ in range(4):
            x = rng.uniform(-1, 1, (1, 3))
            grad, _ = net.grad_batch(x, np.ones(1))
            p0 = tape.read()
            for i in range(len(tape)):
                p = p0.copy()
                p[i] += h
                tape.write(p)
                f1 = net.forward_batch(x)[0]
                p[i] -= 2 * h
                tape.write(p)
                f0 = net.forward_batch(x)[0]
                assert rel_err(grad[i], (f1 - f0) / (2 * h)) < 1e-5
            tape.write(p0)

    def test_input_gradient(self):
        net = MlpNetwork.build(2, seed=3)
        x = np.array([[0.4, -0.6]])
        _, d_x = net.grad_batch(x, np.ones(1))
        h = 1e-6
        for j in range(2):
            xp = x.copy(); xp[0, j] += h
            xm = x.copy(); xm[0, j] -= h
            fd = (net.forward_batch(xp)[0] - net.forward_batch(xm)[0]) / (2 * h)
            assert rel_err(d_x[0, j], fd) < 1e-5


class TestMlpTraining:
    def test_linear_target_via_shared_harness(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (256, 2))
        y = 0.5 * x[:, 0] + 0.2 * x[:, 1]
        spec = LossSpec(mode=PLAIN_MSRELU, theta_c=0.0, reg_weight=0.0)
        cfg = TrainConfig(epochs=400, batch_size=64, seed=5, lr=5e-3, weight_decay=0.0, patience=80)
        res = train_mlp_baseline(x, y, spec, cfg)
        assert res.best_val < 1e-4

    def test_seed_reproducibility(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, (64, 2))
        t = -np.exp(rng.uniform(0, 2, 64))
        spec = LossSpec(mode=LOG_MSRELU, theta_c=1.0)
        runs = []
        for _ in range(2):
            cfg = TrainConfig(epochs=20, batch_size=16, seed=9)
            res = train_mlp_baseline(x, t, spec, cfg)
            runs.append([r.as_tuple() for r in res.history])
        assert runs[0] == runs[1]


class TestMlpCheckpoints:
    def test_round_trip_preserves_forward(self):
        net = MlpNetwork.build(4, seed=7)
        net.set_input_norm_from_data(np.random.default_rng(0).uniform(-2, 2, (30, 4)))
        blob = save_mlp(net)
        net2 = load_mlp(blob)
        xs = np.random.default_rng(1).uniform(-2, 2, (50, 4))
        assert np.array_equal(net.forward_batch(xs), net2.forward_batch(xs))
        assert save_mlp(net2) == blob

    def test_kan_checkpoint_rejected(self):
        from kanshift.network import KanNetwork, save_network

        blob = save_network(KanNetwork.build([2, 2, 1], seed=0))
        with pytest.raises(CheckpointError, match="model"):
            load_mlp(blob)
