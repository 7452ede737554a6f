import numpy as np
import pytest

from prefloop.envsim import (
    Action,
    EnvState,
    NotEnoughExperienceError,
    ObservationRenderer,
    ReplayBuffer,
    ground_truth_return,
    make_task,
    reset_state,
    rollout_scripted_expert,
    sample_segment_pairs,
    step,
)
from prefloop.envsim.dynamics import HORIZON
from prefloop.envsim.tasks import _ARENA_DIAMETER


def state_at(agent, vel=(0.0, 0.0), obj=(0.0, 0.0), goal=(0.6, 0.6), t=0):
    return EnvState(
        agent_pos=np.asarray(agent, dtype=float),
        agent_vel=np.asarray(vel, dtype=float),
        object_pos=np.asarray(obj, dtype=float),
        goal_pos=np.asarray(goal, dtype=float),
        t=t,
    )


def reach_state_at_progress(task, p):
    # invert the saturating progress map along the (-1,-1) diagonal from the goal
    d = task.success_radius + (1.0 - p) * (_ARENA_DIAMETER - task.success_radius)
    direction = np.array([1.0, 1.0]) / np.sqrt(2.0)
    return state_at(task.goal_pos - d * direction)


class TestDynamics:
    def test_zero_action_zero_velocity(self):
        task = make_task("reach")
        s0 = state_at((0.2, -0.3))
        s1, done = step(s0, Action(np.zeros(2)), task)
        np.testing.assert_array_equal(s1.agent_pos, s0.agent_pos)
        assert not done

    def test_hand_evaluated_step(self):
        task = make_task("reach")
        s0 = state_at((0.0, 0.0))
        s1, _ = step(s0, Action(np.array([1.0, 0.0])), task)
        np.testing.assert_allclose(s1.agent_vel, [0.095, 0.0], atol=1e-12)
        np.testing.assert_allclose(s1.agent_pos, [0.0095, 0.0], atol=1e-12)

    def test_success_at_goal(self):
        task = make_task("reach")
        s = state_at(task.goal_pos)
        assert task.is_success(s)
        assert task.true_progress(s) == pytest.approx(1.0)

    def test_determinism(self):
        task = make_task("push")
        s0 = state_at((0.1, 0.1), vel=(0.3, -0.2), obj=(0.15, 0.1))
        a = Action(np.array([0.7, -0.4]))
        s1, _ = step(s0, a, task)
        s2, _ = step(s0, a, task)
        np.testing.assert_array_equal(s1.to_vector(), s2.to_vector())

    def test_done_at_horizon(self):
        task = make_task("reach")
        s = state_at((0.0, 0.0), t=HORIZON - 1)
        _, done = step(s, Action(np.zeros(2)), task)
        assert done

    def test_positions_stay_in_arena(self):
        task = make_task("reach")
        s = state_at((0.999, 0.999), vel=(1.0, 1.0))
        for _ in range(20):
            s, _ = step(s, Action(np.array([1.0, 1.0])), task)
        assert np.all(s.agent_pos <= 1.0) and np.all(s.agent_pos >= -1.0)
        assert np.linalg.norm(s.agent_vel) <= 1.0 + 1e-12

    def test_push_contact_carries_object(self):
        task = make_task("push")
        s = state_at((0.0, 0.0), obj=(0.05, 0.0))
        s1, _ = step(s, Action(np.array([1.0, 0.0])), task)
        # object moved by the agent displacement
        np.testing.assert_allclose(s1.object_pos - np.array([0.05, 0.0]),
                                   s1.agent_pos - np.zeros(2), atol=1e-12)

    def test_push_no_contact_object_static(self):
        task = make_task("push")
        s = state_at((0.0, 0.0), obj=(0.5, 0.0))
        s1, _ = step(s, Action(np.array([1.0, 0.0])), task)
        np.testing.assert_array_equal(s1.object_pos, s.object_pos)


class TestProgress:
    @pytest.mark.parametrize("task_id", ["reach", "push"])
    def test_bounds_on_random_states(self, task_id):
        task = make_task(task_id)
        rng = np.random.default_rng(0)
        states = np.concatenate(
            [
                rng.uniform(-1, 1, size=(200, 2)),   # agent pos
                rng.uniform(-1, 1, size=(200, 2)),   # vel
                rng.uniform(-1, 1, size=(200, 2)),   # object pos
                np.tile(task.goal_pos, (200, 1)),
            ],
            axis=1,
        )
        p = task.progress_rows(states)
        assert np.all(p >= 0.0) and np.all(p <= 1.0)

    @pytest.mark.parametrize("task_id", ["reach", "push"])
    def test_success_implies_near_max_progress(self, task_id):
        task = make_task(task_id)
        rng = np.random.default_rng(1)
        n = 500
        states = np.concatenate(
            [
                rng.uniform(-1, 1, size=(n, 2)),
                rng.uniform(-1, 1, size=(n, 2)),
                rng.uniform(-1, 1, size=(n, 2)),
                np.tile(task.goal_pos, (n, 1)),
            ],
            axis=1,
        )
        # plant the success condition on half the rows
        mover = slice(4, 6) if task.has_object else slice(0, 2)
        states[: n // 2, mover] = task.goal_pos + rng.uniform(
            -task.success_radius / 2, task.success_radius / 2, size=(n // 2, 2)
        )
        succ = task.success_rows(states)
        assert succ[: n // 2].all()
        p = task.progress_rows(states)
        assert np.all(p[succ] >= 0.99 * p.max())

    def test_monotone_in_goal_distance(self):
        task = make_task("reach")
        ds = np.linspace(0.0, 2.2, 50)
        ps = [task.true_progress(state_at(task.goal_pos - np.array([d, 0.0])))
              for d in ds]
        assert all(a >= b - 1e-12 for a, b in zip(ps, ps[1:]))


class TestRenderer:
    def test_deterministic(self):
        r = ObservationRenderer(seed=3)
        s = state_at((0.1, 0.2), vel=(0.0, 0.1))
        np.testing.assert_array_equal(r.observe(s), r.observe(s))

    def test_time_not_rendered(self):
        r = ObservationRenderer(seed=3)
        a = state_at((0.1, 0.2), t=0)
        b = state_at((0.1, 0.2), t=123)
        np.testing.assert_array_equal(r.observe(a), r.observe(b))

    def test_lipschitz_perturbation(self):
        r = ObservationRenderer(seed=3)
        s = state_at((0.1, 0.2))
        s2 = state_at((0.1 + 1e-9, 0.2))
        delta = np.max(np.abs(r.observe(s) - r.observe(s2)))
        assert delta <= r.lipschitz_bound() * 1e-9
        assert delta < 1e-6

    def test_two_renderers_same_seed_match(self):
        s = state_at((0.4, -0.4))
        np.testing.assert_array_equal(
            ObservationRenderer(seed=9).observe(s),
            ObservationRenderer(seed=9).observe(s),
        )


def fill_buffer(buf, task, renderer, episodes, steps_per_episode, seed=0):
    rng = np.random.default_rng(seed)
    for ep in range(episodes):
        state = reset_state(task, rng)
        for t in range(steps_per_episode):
            action = rng.uniform(-1, 1, size=2)
            nxt, _ = step(state, Action(action), task)
            buf.add(state.to_vector(), action, nxt.to_vector(), 0.0,
                    renderer.observe(state), ep, t)
            state = nxt


class TestReplay:
    def test_windows_never_straddle_episodes(self):
        task = make_task("reach")
        renderer = ObservationRenderer()
        buf = ReplayBuffer(capacity=1000)
        fill_buffer(buf, task, renderer, episodes=3, steps_per_episode=60)
        starts = buf.valid_window_starts(50)
        assert starts.size == 3 * 11
        for s in starts:
            seg = buf.segment(int(s), 50)
            ids = buf.episode_ids[(np.arange(50) + s) % buf.capacity]
            assert np.all(ids == ids[0])

    def test_two_windows_unique_pair(self):
        task = make_task("reach")
        renderer = ObservationRenderer()
        buf = ReplayBuffer(capacity=200)
        fill_buffer(buf, task, renderer, episodes=2, steps_per_episode=50)
        pairs = sample_segment_pairs(buf, 1, 50, np.random.default_rng(0))
        keys = {pairs[0][0].key(), pairs[0][1].key()}
        assert keys == {(0, 0), (1, 0)}

    def test_zero_pairs(self):
        buf = ReplayBuffer(capacity=200)
        assert sample_segment_pairs(buf, 0, 50, np.random.default_rng(0)) == []

    def test_insufficient_data_raises(self):
        buf = ReplayBuffer(capacity=200)
        with pytest.raises(NotEnoughExperienceError):
            sample_segment_pairs(buf, 1, 50, np.random.default_rng(0))

    def test_seeded_pair_sampling_reproducible(self):
        task = make_task("reach")
        renderer = ObservationRenderer()
        buf = ReplayBuffer(capacity=2000)
        fill_buffer(buf, task, renderer, episodes=5, steps_per_episode=80)
        a = sample_segment_pairs(buf, 10, 50, np.random.default_rng(42))
        b = sample_segment_pairs(buf, 10, 50, np.random.default_rng(42))
        assert [(x.key(), y.key()) for x, y in a] == [(x.key(), y.key()) for x, y in b]

    def test_relabel_touches_only_rewards(self):
        task = make_task("reach")
        renderer = ObservationRenderer()
        buf = ReplayBuffer(capacity=500)
        fill_buffer(buf, task, renderer, episodes=2, steps_per_episode=60)
        before = buf.immutable_checksum()
        count = buf.relabel_rewards(lambda s, a: np.full(len(s), 0.25))
        assert count == 120
        assert buf.immutable_checksum() == before
        assert np.all(buf.rewards[:120] == 0.25)

    def test_relabel_idempotent(self):
        task = make_task("reach")
        renderer = ObservationRenderer()
        buf = ReplayBuffer(capacity=500)
        fill_buffer(buf, task, renderer, episodes=1, steps_per_episode=60)
        fn = lambda s, a: np.tanh(s[:, 0] + a[:, 0])
        buf.relabel_rewards(fn)
        first = buf.rewards[:60].copy()
        buf.relabel_rewards(fn)
        np.testing.assert_array_equal(buf.rewards[:60], first)

    def test_ring_wrap_windows_stay_valid(self):
        task = make_task("reach")
        renderer = ObservationRenderer()
        buf = ReplayBuffer(capacity=100)
        fill_buffer(buf, task, renderer, episodes=4, steps_per_episode=60)
        for s in buf.valid_window_starts(50):
            sel = (np.arange(50) + s) % buf.capacity
            ids = buf.episode_ids[sel]
            steps = buf.step_in_episode[sel]
            assert np.all(ids == ids[0])
            assert np.all(np.diff(steps) == 1)


class TestGroundTruthReturn:
    def test_stationary_far_from_goal(self):
        task = make_task("reach")
        vec = state_at((-0.8, -0.8)).to_vector()
        seg_states = np.tile(vec, (50, 1))
        from prefloop.envsim.replay import Segment

        seg = Segment(seg_states, np.zeros((50, 2)), np.zeros((50, 32)),
                      seg_states.copy(), 0, 0)
        assert ground_truth_return(seg, task) == pytest.approx(0.0)

    def test_telescoping_progress(self):
        task = make_task("reach")
        T = 50
        progresses = np.linspace(0.3, 0.8, T + 1)
        states = np.stack(
            [reach_state_at_progress(task, p).to_vector() for p in progresses]
        )
        from prefloop.envsim.replay import Segment

        seg = Segment(states[:T], np.zeros((T, 2)), np.zeros((T, 32)),
                      states[1:], 0, 0)
        assert ground_truth_return(seg, task) == pytest.approx(0.5, abs=1e-9)

    def test_success_bonus(self):
        task = make_task("reach")
        vec = state_at(task.goal_pos).to_vector()
        states = np.tile(vec, (50, 1))
        from prefloop.envsim.replay import Segment

        seg = Segment(states, np.zeros((50, 2)), np.zeros((50, 32)),
                      states.copy(), 0, 0)
        assert ground_truth_return(seg, task) == pytest.approx(50.0)


class TestScriptedExpert:
    @pytest.mark.parametrize("task_id", ["reach", "push"])
    def test_expert_reaches_success(self, task_id):
        task = make_task(task_id)
        renderer = ObservationRenderer()
        rows = rollout_scripted_expert(task, renderer, np.random.default_rng(5))
        assert rows[-1]["true_progress"] > 0.99
        # progress field matches recomputation from the state
        mid = rows[len(rows) // 2]
        assert mid["true_progress"] == pytest.approx(
            task.progress_rows(np.asarray(mid["state"]))[0]
        )
