import math

import numpy as np
import pytest

from prefloop.envsim import (
    Action,
    ObservationRenderer,
    ReplayBuffer,
    ground_truth_return,
    make_task,
    reset_state,
    sample_segment_pairs,
    step,
)
from prefloop.numcore import Mlp, param_arrays, grad_check
from prefloop.reward.types import PreferenceDatum
from prefloop.vlm import (
    DegenerateEmbeddingError,
    FrozenEncoders,
    VlmTrainer,
    adapted_reward,
    base_reward,
    cosine,
    init_adapters,
    inverse_dynamics_loss,
    load_vlm_checkpoint,
    make_inverse_head,
    save_vlm_checkpoint,
    segment_return,
)
from prefloop.vlm.adapters import Adapters
from prefloop.numcore.mlp import identity_mlp


@pytest.fixture(scope="module")
def reach_setup():
    task = make_task("reach")
    renderer = ObservationRenderer()
    return task, renderer


def noiseless_encoders(task, renderer, seed=11, **kw):
    kw.setdefault("noise_scale", 0.0)
    return FrozenEncoders([task], renderer, seed=seed, **kw)


def fill_random_buffer(task, renderer, episodes=6, seed=0, capacity=4000):
    rng = np.random.default_rng(seed)
    buf = ReplayBuffer(capacity=capacity)
    for ep in range(episodes):
        state = reset_state(task, rng)
        for t in range(200):
            a = rng.uniform(-1, 1, 2)
            nxt, _ = step(state, Action(a), task)
            buf.add(state.to_vector(), a, nxt.to_vector(), 0.0,
                    renderer.observe(state), ep, t)
            state = nxt
    return buf


class TestCosine:
    def test_identical_vectors(self):
        v = np.array([0.3, -0.7, 0.1])
        assert cosine(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 5.0])) == pytest.approx(0.0)

    def test_hand_value(self):
        c = cosine(np.array([1.0, 0.0]), np.array([1.0, 1.0]) / math.sqrt(2))
        assert c == pytest.approx(1.0 / math.sqrt(2), abs=1e-4)

    def test_zero_norm_rejected(self):
        with pytest.raises(DegenerateEmbeddingError):
            cosine(np.zeros(3), np.ones(3))


class TestBaseReward:
    def test_forced_equal_embeddings(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        obs = renderer.observe_rows(np.zeros(8))[0]
        enc.language_table[task.language_token] = enc.encode_image(obs)
        assert base_reward(enc, task.language_token, obs) == pytest.approx(1.0)

    def test_range(self, reach_setup):
        task, renderer = reach_setup
        enc = FrozenEncoders([task], renderer, seed=3)
        rng = np.random.default_rng(0)
        for _ in range(20):
            obs = renderer.observe_rows(rng.uniform(-1, 1, 8))[0]
            r = base_reward(enc, task.language_token, obs)
            assert -1.0 <= r <= 1.0

    def test_unknown_token_rejected(self, reach_setup):
        task, renderer = reach_setup
        enc = FrozenEncoders([task], renderer, seed=3)
        with pytest.raises(KeyError):
            enc.encode_language(999)


class TestAdaptedReward:
    def test_identity_adapters_match_base(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        adapters = init_adapters(np.random.default_rng(0), jitter=0.0)
        obs = renderer.observe_rows(np.array([0.2, 0.1, 0, 0, 0, 0, 0.6, 0.6]))[0]
        assert adapted_reward(enc, adapters, task.language_token, obs) == \
            pytest.approx(base_reward(enc, task.language_token, obs), abs=1e-9)

    def test_cosine_scale_invariance(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        adapters = init_adapters(np.random.default_rng(0), jitter=0.01)
        obs = renderer.observe_rows(np.array([0.2, 0.1, 0, 0, 0, 0, 0.6, 0.6]))[0]
        before = adapted_reward(enc, adapters, task.language_token, obs)
        for lam in (0.5, 3.0, 17.0):
            scaled = Adapters(language=adapters.language,
                              image=_scaled_output(adapters.image, lam))
            after = adapted_reward(enc, scaled, task.language_token, obs)
            assert after == pytest.approx(before, abs=1e-12)

    def test_fitted_inverse_beats_base_on_matched_set(self, reach_setup):
        # adapters built to invert the gap analytically: image side computes
        # R^T (x - bias), language side stays identity
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer, seed=5, gap_strength=1.0,
                                 gap_bias_scale=1.0, noise_scale=0.02)
        inv = _affine_mlp(enc.gap_rotation.T, -enc.gap_rotation.T @ enc.gap_bias)
        adapters = Adapters(language=identity_mlp(64, 256),
                            image=inv)
        rng = np.random.default_rng(9)
        wins = 0
        n = 100
        for _ in range(n):
            state = np.concatenate([
                task.goal_pos + rng.uniform(-0.1, 0.1, 2),
                rng.uniform(-0.05, 0.05, 2),
                np.zeros(2),
                task.goal_pos,
            ])
            obs = renderer.observe_rows(state)[0]
            if adapted_reward(enc, adapters, task.language_token, obs) > \
                    base_reward(enc, task.language_token, obs):
                wins += 1
        assert wins >= 0.9 * n


def _scaled_output(mlp: Mlp, lam: float) -> Mlp:
    layers = [(w.copy(), b.copy()) for w, b in mlp.layers]
    w, b = layers[-1]
    layers[-1] = (w * lam, b * lam)
    return Mlp(layers, mlp.hidden_activation, mlp.output_activation,
               mlp.leaky_slope)


def _affine_mlp(matrix: np.ndarray, bias: np.ndarray, shift: float = 30.0) -> Mlp:
    # relu(Mx + c + shift) - shift == Mx + c on the operating range
    dim = matrix.shape[0]
    w1 = matrix.copy()
    b1 = bias + shift
    w2 = np.eye(dim)
    b2 = np.full(dim, -shift)
    return Mlp([(w1, b1), (w2, b2)], "relu", "identity")


class TestSegmentReturn:
    def test_single_step(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        obs = renderer.observe_rows(np.array([0.1, 0.3, 0, 0, 0, 0, 0.6, 0.6]))
        r = base_reward(enc, task.language_token, obs[0])
        assert segment_return(enc, None, task.language_token, obs) == \
            pytest.approx(r)

    def test_constant_sum(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        obs = renderer.observe_rows(np.array([0.1, 0.3, 0, 0, 0, 0, 0.6, 0.6]))
        seq = np.tile(obs, (5, 1))
        single = base_reward(enc, task.language_token, obs[0])
        assert segment_return(enc, None, task.language_token, seq) == \
            pytest.approx(5 * single)

    def test_order_independent(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        rng = np.random.default_rng(2)
        seq = renderer.observe_rows(rng.uniform(-1, 1, (10, 8)))
        fwd = segment_return(enc, None, task.language_token, seq)
        rev = segment_return(enc, None, task.language_token, seq[::-1])
        assert fwd == pytest.approx(rev)

    def test_empty_rejected(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        with pytest.raises(ValueError):
            segment_return(enc, None, task.language_token, np.zeros((0, 32)))


class TestInverseDynamics:
    def test_exact_prediction_zero_loss(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        adapters = init_adapters(np.random.default_rng(0), jitter=0.0)
        action = np.array([0.4, -0.2])
        head = _constant_head(action)
        obs = renderer.observe_rows(np.zeros(8))
        loss = inverse_dynamics_loss(enc, adapters, head, obs, obs, action)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_offset_prediction(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        adapters = init_adapters(np.random.default_rng(0), jitter=0.0)
        action = np.array([0.4, -0.2])
        head = _constant_head(action + np.array([0.1, 0.0]))
        obs = renderer.observe_rows(np.zeros(8))
        loss = inverse_dynamics_loss(enc, adapters, head, obs, obs, action)
        assert loss == pytest.approx(0.01, abs=1e-12)

    def test_gradient_vs_finite_differences(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        rng = np.random.default_rng(4)
        adapters = init_adapters(rng, jitter=0.05)
        head = make_inverse_head(rng)
        buf = fill_random_buffer(task, renderer, episodes=1)
        trans = buf.sample_observation_transitions(8, np.random.default_rng(5))
        trainer = VlmTrainer(enc, adapters, head, task.language_token,
                             id_weight=1.0, rng=np.random.default_rng(6))

        def loss_fn(params):
            return inverse_dynamics_loss(enc, adapters, head,
                                         trans["observations"],
                                         trans["next_observations"],
                                         trans["actions"])

        def grad_fn(params):
            _, _, grads = trainer.loss_and_grads([], trans)
            return grads

        report = grad_check(loss_fn, grad_fn, trainer._params, probe_count=64,
                            rng=np.random.default_rng(7))
        assert report.max_relative_error < 1e-4


def _constant_head(output: np.ndarray) -> Mlp:
    d = len(output)
    return Mlp([(np.zeros((d, 128)), output.astype(float))],
               output_activation="identity")


def _planar_rotation(direction: np.ndarray, theta: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Rotation by theta in the plane spanned by ``direction`` and a random
    orthogonal vector; identity on the complement."""
    d = len(direction)
    u = direction / np.linalg.norm(direction)
    w = rng.standard_normal(d)
    w -= (w @ u) * u
    w /= np.linalg.norm(w)
    plane = np.outer(u, u) + np.outer(w, w)
    skew = np.outer(w, u) - np.outer(u, w)
    return np.eye(d) - plane + np.cos(theta) * plane + np.sin(theta) * skew


class TestFinetune:
    def test_zero_steps_no_change(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        rng = np.random.default_rng(0)
        adapters = init_adapters(rng)
        head = make_inverse_head(rng)
        before = [p.copy() for p in param_arrays(adapters.image)]
        trainer = VlmTrainer(enc, adapters, head, task.language_token,
                             rng=np.random.default_rng(1))
        out = trainer.finetune([], None, steps=0)
        for p, q in zip(before, param_arrays(adapters.image)):
            np.testing.assert_array_equal(p, q)
        assert out["status"] == "noop"

    def test_empty_pref_zero_id_weight_noop(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        rng = np.random.default_rng(0)
        trainer = VlmTrainer(enc, init_adapters(rng), make_inverse_head(rng),
                             task.language_token, id_weight=0.0,
                             rng=np.random.default_rng(1))
        out = trainer.finetune([], {"actions": np.zeros((4, 2)),
                                    "observations": np.zeros((4, 32)),
                                    "next_observations": np.zeros((4, 32))},
                               steps=5)
        assert out["status"] == "noop"
        assert "warning" in out

    def test_preference_gradient_vs_finite_differences(self, reach_setup):
        task, renderer = reach_setup
        enc = noiseless_encoders(task, renderer)
        rng = np.random.default_rng(3)
        adapters = init_adapters(rng, jitter=0.05)
        head = make_inverse_head(rng)
        buf = fill_random_buffer(task, renderer, episodes=2)
        pairs = sample_segment_pairs(buf, 4, 20, np.random.default_rng(8))
        data = [PreferenceDatum(pair=p, label=(1.0, 0.0), source="human")
                for p in pairs]
        trainer = VlmTrainer(enc, adapters, head, task.language_token,
                             id_weight=0.0, rng=np.random.default_rng(9))

        def loss_fn(params):
            losses = []
            for d in data:
                r0 = segment_return(enc, adapters, task.language_token,
                                    d.pair[0].observations)
                r1 = segment_return(enc, adapters, task.language_token,
                                    d.pair[1].observations)
                z = r1 - r0
                losses.append(-np.log(1.0 / (1.0 + np.exp(z))))  # y = (1, 0)
            return float(np.mean(losses))

        def grad_fn(params):
            _, _, grads = trainer.loss_and_grads(data, None)
            return grads

        report = grad_check(loss_fn, grad_fn, trainer._params, probe_count=64,
                            rng=np.random.default_rng(10))
        assert report.max_relative_error < 1e-4

    def test_synthetic_rotation_recovery(self, reach_setup):
        # gap is a single planar rotation hitting the language direction:
        # base labels land near chance, fine-tuning restores held-out accuracy
        task, renderer = reach_setup
        enc = FrozenEncoders([task], renderer, seed=21, gap_strength=0.0,
                             gap_bias_scale=0.0, noise_scale=0.01)
        enc.gap_rotation = _planar_rotation(
            enc.encode_language(task.language_token), theta=2.5,
            rng=np.random.default_rng(99))
        rng = np.random.default_rng(1)
        adapters = init_adapters(rng)
        head = make_inverse_head(rng)
        buf = fill_random_buffer(task, renderer, episodes=8, seed=2)
        pairs = sample_segment_pairs(buf, 260, 50, np.random.default_rng(3))
        data = []
        for pair in pairs:
            g0 = ground_truth_return(pair[0], task)
            g1 = ground_truth_return(pair[1], task)
            label = (1.0, 0.0) if g0 > g1 else (0.0, 1.0)
            data.append(PreferenceDatum(pair=pair, label=label, source="human"))
        train, held_out = data[:200], data[200:]

        def accuracy():
            ok = 0
            for d in held_out:
                r0 = segment_return(enc, adapters, task.language_token,
                                    d.pair[0].observations)
                r1 = segment_return(enc, adapters, task.language_token,
                                    d.pair[1].observations)
                ok += ((1.0, 0.0) if r0 > r1 else (0.0, 1.0)) == d.label
            return ok / len(held_out)

        before = accuracy()
        trans = buf.sample_observation_transitions(512, np.random.default_rng(4))
        trainer = VlmTrainer(enc, adapters, head, task.language_token,
                             rng=np.random.default_rng(5))
        trainer.finetune(train, trans, steps=500)
        after = accuracy()
        assert before < 0.65
        assert after > 0.8


class TestFrozenCore:
    def test_checksum_unchanged_by_finetune(self, reach_setup):
        task, renderer = reach_setup
        enc = FrozenEncoders([task], renderer, seed=13)
        rng = np.random.default_rng(0)
        adapters = init_adapters(rng)
        head = make_inverse_head(rng)
        buf = fill_random_buffer(task, renderer, episodes=2)
        pairs = sample_segment_pairs(buf, 8, 20, np.random.default_rng(1))
        data = [PreferenceDatum(pair=p, label=(0.0, 1.0), source="human")
                for p in pairs]
        before = enc.frozen_checksum()
        trainer = VlmTrainer(enc, adapters, head, task.language_token,
                             rng=np.random.default_rng(2))
        trainer.finetune(data, buf.sample_observation_transitions(
            64, np.random.default_rng(3)), steps=10)
        assert enc.frozen_checksum() == before


class TestVlmCheckpoint:
    def test_roundtrip_byte_identical(self, tmp_path, reach_setup):
        task, renderer = reach_setup
        rng = np.random.default_rng(0)
        adapters = init_adapters(rng, jitter=0.05)
        head = make_inverse_head(rng)
        p1 = save_vlm_checkpoint(tmp_path / "a.json", adapters, head, seed=7,
                                 source_task="reach")
        loaded_adapters, loaded_head, meta = load_vlm_checkpoint(
            p1, init_adapters(np.random.default_rng(1)), make_inverse_head(
                np.random.default_rng(2)))
        assert meta == {"seed": 7, "source_task": "reach"}
        p2 = save_vlm_checkpoint(tmp_path / "b.json", loaded_adapters,
                                 loaded_head, seed=7, source_task="reach")
        assert p1.read_bytes() == p2.read_bytes()
        assert p1.with_suffix(".bin").read_bytes() == p2.with_suffix(".bin").read_bytes()

    def test_shape_mismatch_rejected(self, tmp_path, reach_setup):
        from prefloop.numcore.checkpoint import CheckpointError

        rng = np.random.default_rng(0)
        adapters = init_adapters(rng, embed_dim=2)
        head = make_inverse_head(rng, embed_dim=2)
        path = save_vlm_checkpoint(tmp_path / "small.json", adapters, head,
                                   seed=1, source_task="reach")
        with pytest.raises(CheckpointError):
            load_vlm_checkpoint(path, init_adapters(np.random.default_rng(1)),
                                make_inverse_head(np.random.default_rng(2)))

    def test_corrupt_file_rejected(self, tmp_path, reach_setup):
        from prefloop.numcore.checkpoint import CheckpointError

        path = tmp_path / "junk.json"
        path.write_text("{]")
        with pytest.raises(CheckpointError):
            load_vlm_checkpoint(path, init_adapters(np.random.default_rng(0)),
                                make_inverse_head(np.random.default_rng(1)))
