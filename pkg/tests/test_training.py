"""Loss, optimizer, epoch loop, and staged fine-tuning checks."""

import csv
import math

import numpy as np
import pytest
from scipy.special import expit

import oracles
from spectranet import autodiff as ad
from spectranet import model, training
from spectranet.errors import ConfigError, ShapeError
from spectranet.rng import stream


def toy_source(g, n=32, separation=2.0):
    """Linearly separable toy set: fakes get shifted fft features."""
    labels = np.zeros(n, np.int64)
    labels[1::2] = 1
    fft = g.standard_normal((n, 9)).astype(np.float32)
    fft[labels == 1] += separation
    return training.InMemoryViews(
        semantic=g.standard_normal((n, 768)).astype(np.float32),
        fft=fft,
        stat=g.standard_normal((n, 8)).astype(np.float32),
        patches=(0.1 * g.standard_normal((n, 2401, 243))).astype(np.float32),
        labels=labels,
    )


class TestConfig:
    def test_defaults(self):
        cfg = training.TrainConfig()
        assert cfg.lr == 2e-4
        assert cfg.betas == (0.9, 0.999)
        assert cfg.weight_decay == 0.01
        assert cfg.batch_size == 128
        assert cfg.epochs == 10

    def test_finetune_defaults(self):
        cfg = training.TrainConfig.finetune()
        assert cfg.lr == 1e-5
        assert cfg.batch_size == 16
        assert cfg.epochs == 50
        assert training.TrainConfig.finetune(lr=3e-6).lr == 3e-6

    def test_validation(self):
        with pytest.raises(ConfigError):
            training.TrainConfig(lr=-1e-4)
        with pytest.raises(ConfigError):
            training.TrainConfig(betas=(0.999, 0.9))
        with pytest.raises(ConfigError):
            training.TrainConfig(betas=(0.0, 0.999))
        with pytest.raises(ConfigError):
            training.TrainConfig(batch_size=0)
        with pytest.raises(ConfigError):
            training.TrainConfig(epochs=-1)
        # zero lr is the documented no-op edge, not an error
        assert training.TrainConfig(lr=0.0).lr == 0.0


class TestBCE:
    def test_symmetric_logit_gives_log2(self):
        z = ad.Tensor(np.zeros(4, np.float32))
        loss = training.bce_with_logits(z, np.array([0, 1, 0, 1]))
        assert loss.item() == pytest.approx(math.log(2.0), rel=1e-6)

    def test_confident_correct_logit(self):
        # softplus(-20) computed in float64: frozen reference value
        z = ad.Tensor(np.array([20.0], np.float32))
        loss = training.bce_with_logits(z, np.array([1]))
        assert float(loss.data) == pytest.approx(2.0611536224385579e-09, rel=1e-12)

    def test_large_magnitudes_stay_finite(self):
        z = ad.Tensor(np.array([500.0, -500.0], np.float32))
        loss = training.bce_with_logits(z, np.array([0, 1]))
        assert np.isfinite(loss.data)
        assert float(loss.data) == pytest.approx(500.0, rel=1e-6)

    def test_batch_mean_semantics(self, rng):
        z = rng.standard_normal(6).astype(np.float32)
        y = np.array([0, 1, 1, 0, 1, 0])
        whole = training.bce_with_logits(ad.Tensor(z), y).item()
        singles = [training.bce_with_logits(ad.Tensor(z[i:i + 1]), y[i:i + 1]).item()
                   for i in range(6)]
        assert whole == pytest.approx(np.mean(singles), rel=1e-6)

    def test_accepts_column_vector(self, rng):
        z = rng.standard_normal((5, 1)).astype(np.float32)
        y = np.array([1, 0, 1, 0, 1])
        a = training.bce_with_logits(ad.Tensor(z), y).item()
        b = training.bce_with_logits(ad.Tensor(z[:, 0]), y).item()
        assert a == b

    def test_gradient_is_sigmoid_minus_label_over_batch(self, rng):
        z = (3 * rng.standard_normal(8)).astype(np.float32)
        y = (rng.random(8) < 0.5).astype(np.int64)
        t = ad.Tensor(z, requires_grad=True)
        training.bce_with_logits(t, y).backward()
        expect = (expit(z.astype(np.float64)) - y) / 8
        np.testing.assert_allclose(t.grad, expect, rtol=1e-6, atol=1e-6)

    def test_bad_inputs_rejected(self):
        with pytest.raises(ShapeError):
            training.bce_with_logits(ad.Tensor(np.zeros((2, 3), np.float32)), np.zeros((2, 3)))
        with pytest.raises(ShapeError):
            training.bce_with_logits(ad.Tensor(np.zeros(0, np.float32)), np.zeros(0))
        with pytest.raises(ShapeError):
            training.bce_with_logits(ad.Tensor(np.zeros(3, np.float32)), np.zeros(4))
        with pytest.raises(ConfigError):
            training.bce_with_logits(ad.Tensor(np.zeros(3, np.float32)), np.array([0, 1, 2]))


class TestAdamW:
    def test_zero_grad_zero_decay_leaves_params(self):
        p = model.ModelParams.init(0)
        before = p.digest()
        opt = training.AdamW(p, training.TrainConfig(weight_decay=0.0))
        p.zero_grad()
        opt.step()
        assert p.digest() == before

    def test_zero_lr_leaves_params_bit_identical(self, rng):
        p = model.ModelParams.init(1)
        before = p.digest()
        opt = training.AdamW(p, training.TrainConfig(lr=0.0))
        for t in p.t.values():
            t.grad = rng.standard_normal(t.data.shape).astype(np.float32)
        opt.step()
        opt.step()
        assert p.digest() == before

    def test_first_step_hand_computed(self):
        # single named tensor with known grad; decay off isolates Adam
        p = model.ModelParams(
            {name: np.zeros(shape, np.float32) for name, shape in model.LAYOUT})
        p.t["fft.w1"].data[:] = 1.0
        cfg = training.TrainConfig(lr=0.1, weight_decay=0.0)
        opt = training.AdamW(p, cfg)
        p.zero_grad()
        p.t["fft.w1"].grad = np.full((9, 32), 2.0, np.float32)
        opt.step()
        # t=1: mhat = g, vhat = g^2, update = g/(|g|+eps) = ~1
        expect = 1.0 - 0.1 * (2.0 / (2.0 + 1e-8))
        np.testing.assert_allclose(p.t["fft.w1"].data, np.full((9, 32), expect), rtol=1e-6)

    def test_matches_reference_over_three_steps(self, rng):
        p = model.ModelParams.init(5)
        cfg = training.TrainConfig(lr=1e-3, weight_decay=0.0)
        opt = training.AdamW(p, cfg)
        name = "stat.w1"
        theta = p.t[name].data.copy()
        m = np.zeros_like(theta)
        v = np.zeros_like(theta)
        for t in range(1, 4):
            g = rng.standard_normal(theta.shape).astype(np.float32)
            p.zero_grad()
            p.t[name].grad = g.copy()
            opt.step()
            theta, m, v = oracles.adam_reference_step(
                theta, g, m, v, t, cfg.lr, cfg.betas[0], cfg.betas[1], opt.eps)
            np.testing.assert_array_equal(p.t[name].data, theta)
            np.testing.assert_array_equal(opt.m[name], m)
            np.testing.assert_array_equal(opt.v[name], v)

    def test_decay_shrinks_weights_not_biases(self):
        arrays = {name: np.full(shape, 0.5, np.float32) for name, shape in model.LAYOUT}
        p = model.ModelParams(arrays)
        opt = training.AdamW(p, training.TrainConfig(lr=0.01, weight_decay=0.1))
        p.zero_grad()
        opt.step()
        for name, _ in model.LAYOUT:
            val = p.t[name].data.ravel()[0]
            if model.is_bias(name):
                assert val == 0.5, name
            else:
                assert val == pytest.approx(0.5 - 0.01 * 0.1 * 0.5, rel=1e-5), name

    def test_state_round_trip_resumes_identically(self, rng):
        src = toy_source(np.random.default_rng(0), n=8)
        cfg = training.TrainConfig(lr=1e-3, batch_size=4, epochs=1, seed=3)

        p1 = model.ModelParams.init(9)
        opt1 = training.AdamW(p1, cfg)
        training.train_epoch(src, p1, opt1, cfg, stream(3, "shuffle"), stream(3, "dropout"))
        training.train_epoch(src, p1, opt1, cfg, stream(4, "shuffle"), stream(4, "dropout"))

        p2 = model.ModelParams.init(9)
        opt2 = training.AdamW(p2, cfg)
        training.train_epoch(src, p2, opt2, cfg, stream(3, "shuffle"), stream(3, "dropout"))
        state = {"t": opt2.t, "m": {k: v.copy() for k, v in opt2.m.items()},
                 "v": {k: v.copy() for k, v in opt2.v.items()}}
        opt3 = training.AdamW.from_state(p2, cfg, state)
        training.train_epoch(src, p2, opt3, cfg, stream(4, "shuffle"), stream(4, "dropout"))
        assert p2.digest() == p1.digest()

    def test_from_state_validates_shapes(self):
        p = model.ModelParams.init(0)
        cfg = training.TrainConfig()
        state = training.AdamW(p, cfg).state()
        state["m"]["fft.w1"] = np.zeros((3, 3), np.float32)
        with pytest.raises(ShapeError):
            training.AdamW.from_state(p, cfg, state)


class TestEpochLoop:
    def test_loss_decreases_on_separable_toy(self):
        src = toy_source(np.random.default_rng(1), n=32)
        p = model.ModelParams.init(0)
        cfg = training.TrainConfig(lr=1e-3, batch_size=8, epochs=5, seed=0)
        _, history = training.fit(src, p, cfg)
        losses = [loss for _, loss, _ in history]
        assert losses[-1] < losses[0]
        assert losses[-1] < math.log(2.0)

    def test_trajectory_reproducible_across_runs(self):
        src = toy_source(np.random.default_rng(2), n=16)
        cfg = training.TrainConfig(lr=1e-3, batch_size=4, epochs=2, seed=11)
        digests = []
        for _ in range(2):
            p = model.ModelParams.init(11)
            _, history = training.fit(src, p, cfg)
            digests.append((p.digest(), tuple(loss for _, loss, _ in history)))
        assert digests[0] == digests[1]

    def test_different_seed_different_trajectory(self):
        src = toy_source(np.random.default_rng(2), n=16)
        outs = []
        for seed in (0, 1):
            p = model.ModelParams.init(7)
            cfg = training.TrainConfig(lr=1e-3, batch_size=4, epochs=1, seed=seed)
            training.fit(src, p, cfg)
            outs.append(p.digest())
        assert outs[0] != outs[1]

    def test_zero_lr_epoch_is_noop_on_params(self):
        src = toy_source(np.random.default_rng(3), n=8)
        p = model.ModelParams.init(4)
        before = p.digest()
        cfg = training.TrainConfig(lr=0.0, weight_decay=0.0, batch_size=4, epochs=1, seed=0)
        opt = training.AdamW(p, cfg)
        loss = training.train_epoch(src, p, opt, cfg, stream(0, "shuffle"), stream(0, "dropout"))
        assert p.digest() == before
        assert math.isfinite(loss)
        assert opt.t == 2  # state still advances

    def test_partial_final_batch_weighting(self):
        # n=6, batch 4 -> batches of 4 and 2; loss must be sample-mean
        src = toy_source(np.random.default_rng(4), n=6, separation=0.0)
        p = model.ModelParams(
            {name: np.zeros(shape, np.float32) for name, shape in model.LAYOUT})
        cfg = training.TrainConfig(lr=0.0, weight_decay=0.0, batch_size=4, epochs=1, seed=0)
        opt = training.AdamW(p, cfg)
        loss = training.train_epoch(src, p, opt, cfg, stream(0, "shuffle"), stream(0, "dropout"))
        # zero params give z=0 for every sample regardless of batching
        assert loss == pytest.approx(math.log(2.0), rel=1e-6)

    def test_empty_source_rejected(self):
        src = toy_source(np.random.default_rng(0), n=2)
        src.labels = src.labels[:0]
        src.semantic = src.semantic[:0]
        src.fft = src.fft[:0]
        src.stat = src.stat[:0]
        src.patches = src.patches[:0]
        p = model.ModelParams.init(0)
        cfg = training.TrainConfig()
        with pytest.raises(ShapeError):
            training.train_epoch(src, p, training.AdamW(p, cfg), cfg,
                                 stream(0, "shuffle"), stream(0, "dropout"))

    def test_fit_writes_csv_log(self, tmp_path):
        src = toy_source(np.random.default_rng(5), n=8)
        p = model.ModelParams.init(1)
        cfg = training.TrainConfig(lr=1e-3, batch_size=4, epochs=3, seed=2)
        log = tmp_path / "log.csv"
        _, history = training.fit(src, p, cfg, log_path=log)
        with open(log) as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["epoch", "loss", "seconds"]
        assert len(rows) == 4
        for (epoch, loss, _), row in zip(history, rows[1:]):
            assert int(row[0]) == epoch
            assert float(row[1]) == pytest.approx(loss, abs=1e-7)


class TestViews:
    def test_shape_validation(self, rng):
        with pytest.raises(ShapeError):
            training.InMemoryViews(
                semantic=rng.standard_normal((4, 768)).astype(np.float32),
                fft=rng.standard_normal((4, 9)).astype(np.float32),
                stat=rng.standard_normal((3, 8)).astype(np.float32),
                patches=rng.standard_normal((4, 2401, 243)).astype(np.float32),
                labels=np.zeros(4, np.int64),
            )

    def test_views_index_consistency(self):
        src = toy_source(np.random.default_rng(6), n=8)
        sem, fft, stat, patches = src.views(np.array([3, 1]))
        np.testing.assert_array_equal(sem, src.semantic[[3, 1]])
        np.testing.assert_array_equal(patches, src.patches[[3, 1]])


class TestProgressiveFinetune:
    def test_stages_chain_and_emit_checkpoints(self, tmp_path):
        g = np.random.default_rng(7)
        base = model.ModelParams.init(3)
        base_path = tmp_path / "base.spck"
        model.save_checkpoint(base_path, base)

        sources = [lambda: toy_source(np.random.default_rng(10), n=8),
                   lambda: toy_source(np.random.default_rng(11), n=8)]
        cfg = training.TrainConfig(lr=1e-4, batch_size=4, epochs=1, seed=5)
        results = training.progressive_finetune(base_path, sources, cfg, tmp_path / "stages")

        assert [r.level_index for r in results] == [0, 1]
        assert results[0].init_digest == base.digest()
        assert results[0].final_digest != results[0].init_digest
        # stage 2 must start from stage 1's final weights
        assert results[1].init_digest == results[0].final_digest
        for r in results:
            assert r.checkpoint.exists()
            loaded, _ = model.load_checkpoint(r.checkpoint)
            assert loaded.digest() == r.final_digest
            assert len(r.losses) == 1

    def test_missing_base_checkpoint_rejected(self, tmp_path):
        cfg = training.TrainConfig()
        with pytest.raises(ConfigError):
            training.progressive_finetune(
                tmp_path / "nope.spck", [lambda: None], cfg, tmp_path)
