"""The full training loop: exploration, feedback sessions, SAC, relabeling.

Phases: (1) uniform-random collection, (2) unsupervised exploration on the
state-entropy bonus, (3) a seed feedback session that fits the reward model
and VLM on the initial human allocation, then (4) the main loop with a
feedback session every session_interval steps. Machine labels flow through
the KL filter; a budgeted uncertain subset goes to the human teacher (a
scripted oracle in headless mode, the annotation queue in interactive mode).
"""

from __future__ import annotations

import json
import logging
import time
from pathlib import Path

import numpy as np

from prefloop.agent import (
    IntrinsicRewardEstimator,
    SacConfig,
    make_critics,
    make_policy,
    sac_update,
)
from prefloop.agent.policy import act
from prefloop.agent.sac import make_optimizers
from prefloop.envsim import (
    Action,
    HORIZON,
    ObservationRenderer,
    ReplayBuffer,
    STATE_DIM,
    ground_truth_return,
    make_task,
    reset_state,
    sample_segment_pairs,
    step as env_step,
)
from prefloop.envsim.replay import NotEnoughExperienceError
from prefloop.feedback import (
    AnnotationQueue,
    FilterState,
    HumanBudget,
    compute_thresholds,
    partition,
    queue_roundtrip,
    scripted_annotate,
    scripted_label_for_pair,
    select_human_subset,
    vlm_annotate,
)
from prefloop.numcore import save_checkpoint
from prefloop.orchestrator.config import RunConfig, validate_config
from prefloop.orchestrator.metrics import RunMetrics
from prefloop.reward import make_ensemble, train_ensemble
from prefloop.reward.ensemble import datum_kl, ensemble_reward_rows, segment_return_rows
from prefloop.reward.types import PreferenceDatum
from prefloop.reward.training import relabel_buffer
from prefloop.vlm import (
    FrozenEncoders,
    VlmTrainer,
    init_adapters,
    load_vlm_checkpoint,
    make_inverse_head,
    save_vlm_checkpoint,
)
from prefloop.vlm.adapters import reward_rows

logger = logging.getLogger(__name__)


class Orchestrator:
    def __init__(self, config: RunConfig, annotation_queue: AnnotationQueue | None = None):
        validate_config(config)
        self.cfg = config
        self.task = make_task(config.task, config.env.success_radius)
        self.renderer = ObservationRenderer(config.env.obs_seed)
        all_tasks = [make_task(t, config.env.success_radius)
                     for t in ("reach", "push")]
        self.encoders = FrozenEncoders(
            all_tasks, self.renderer, seed=config.vlm.encoder_seed,
            gap_strength=config.vlm.gap_strength,
            gap_bias_scale=config.vlm.gap_bias_scale,
            noise_scale=config.vlm.noise_scale,
        )

        seeds = np.random.SeedSequence(config.seed).spawn(11)
        (s_init, s_env, s_act, s_sac, s_teacher, s_pairs, s_select,
         s_reward, s_vlm, s_eval, s_knn) = seeds
        self.rng_env = np.random.default_rng(s_env)
        self.rng_act = np.random.default_rng(s_act)
        self.rng_sac = np.random.default_rng(s_sac)
        self.rng_teacher = np.random.default_rng(s_teacher)
        self.rng_pairs = np.random.default_rng(s_pairs)
        self.rng_select = np.random.default_rng(s_select)
        self.rng_reward = np.random.default_rng(s_reward)
        self.rng_eval = np.random.default_rng(s_eval)
        self.rng_knn = np.random.default_rng(s_knn)

        rng_init = np.random.default_rng(s_init)
        self.ensemble = make_ensemble(
            STATE_DIM, 2, hidden=tuple(config.reward.hidden),
            learning_rate=config.reward.learning_rate, rng=rng_init,
        )
        self.policy = make_policy(STATE_DIM, 2, hidden=tuple(config.agent.hidden),
                                  rng=rng_init)
        self.critics = make_critics(STATE_DIM, 2, hidden=tuple(config.agent.hidden),
                                    tau=config.agent.tau, rng=rng_init)
        self.sac_opts = make_optimizers(self.policy, self.critics,
                                        config.agent.learning_rate)
        self.sac_cfg = SacConfig(discount=config.agent.discount,
                                 entropy_coef=config.agent.entropy_coef,
                                 learning_rate=config.agent.learning_rate,
                                 tau=config.agent.tau)

        self.adapters = init_adapters(rng_init, jitter=config.vlm.adapter_jitter)
        self.inverse_head = make_inverse_head(rng_init)
        if config.vlm_init:
            self.adapters, self.inverse_head, meta = load_vlm_checkpoint(
                config.vlm_init, self.adapters, self.inverse_head)
            logger.info("initialized VLM adapters from %s (source task %s)",
                        config.vlm_init, meta.get("source_task"))
        id_weight = 0.0 if config.mode == "no_inverse_dynamics" \
            else config.vlm.id_weight
        self.vlm_trainer = VlmTrainer(
            self.encoders, self.adapters, self.inverse_head,
            self.task.language_token,
            learning_rate=config.vlm.learning_rate, id_weight=id_weight,
            pref_minibatch=config.vlm.pref_minibatch,
            trans_minibatch=config.vlm.trans_minibatch,
            rng=np.random.default_rng(s_vlm),
        )
        self.published_adapters = self.adapters.snapshot()

        self.buffer = ReplayBuffer(capacity=config.env.replay_capacity)
        self.intrinsic = IntrinsicRewardEstimator(
            k=config.agent.knn_k,
            reference_size=config.agent.knn_reference_size)
        self.budget = HumanBudget(total=config.human_budget,
                                  total_feedback_cap=config.total_feedback_cap)
        self.filter_state = FilterState(alpha=config.filter.alpha,
                                        beta_min=config.filter.beta_min,
                                        beta_max=config.filter.beta_max,
                                        decay_rate=config.filter.decay_rate)
        self.queue = annotation_queue if annotation_queue is not None \
            else AnnotationQueue()
        self.human_labels: list = []       # cumulative H
        self.human_labeled_ids: set = set()
        self.metrics = RunMetrics()
        self.training_step = 0
        self.session_count = 0
        self.latest_vlm_accuracy: float | None = None

        flip = config.teacher_flip_probability()
        if config.teacher == "interactive":
            self._answer_fn = None
        else:
            self._answer_fn = lambda datum: scripted_annotate(
                self.task, datum.pair, flip_probability=flip,
                rng=self.rng_teacher).label

    # ------------------------------------------------------------------ env

    def _collection_reward(self, state_vec, action, obs) -> float:
        if self.cfg.mode == "vlm_as_reward":
            return float(reward_rows(self.encoders, None,
                                     self.task.language_token, obs)[0])
        return float(ensemble_reward_rows(self.ensemble, state_vec, action)[0])

    # ------------------------------------------------------------- sessions

    def _label_pairs_with_vlm(self, pairs, step):
        data = []
        correct = 0
        for pair in pairs:
            datum = vlm_annotate(self.encoders, self.published_adapters,
                                 self.task, pair, step=step)
            data.append(datum)
            correct += datum.label == scripted_label_for_pair(self.task, pair)
        self.latest_vlm_accuracy = correct / len(pairs) if pairs else None
        return data

    def _train_reward(self, dataset, steps):
        if not dataset:
            return None
        trace = train_ensemble(self.ensemble, dataset,
                               steps=steps,
                               batch_size=self.cfg.reward.batch_size,
                               rng=self.rng_reward)
        return trace[-1] if trace else None

    def _finetune_vlm(self, steps):
        if not self.cfg.uses_vlm() or not self.human_labels:
            return
        try:
            transitions = self.buffer.sample_observation_transitions(
                self.cfg.vlm.trans_pool_size, self.rng_pairs)
        except NotEnoughExperienceError:
            transitions = None
        self.vlm_trainer.finetune(self.human_labels, transitions, steps=steps)
        self.published_adapters = self.adapters.snapshot()

    def _human_roundtrip(self, selection, step):
        labeled, returned = queue_roundtrip(
            self.queue, selection, timeout=self.cfg.queue_timeout,
            answer_fn=self._answer_fn, step=step)
        if returned:
            logger.info("%d annotation items timed out and returned unlabeled",
                        len(returned))
        self.human_labels.extend(labeled)
        self.human_labeled_ids.update(d.datum_id for d in selection)
        return labeled

    def _seed_session(self, step: int):
        """Initial feedback allocation: fit the reward model and the VLM."""
        cfg = self.cfg
        n = cfg.initial_human
        if n <= 0:
            return
        try:
            pairs = sample_segment_pairs(self.buffer, n, cfg.segment_length,
                                         self.rng_pairs)
        except NotEnoughExperienceError:
            logger.warning("seed session skipped: not enough experience")
            return
        if cfg.mode == "vlm_pref_only":
            # no human path at all: machine labels bootstrap the reward model
            dataset = self._label_pairs_with_vlm(pairs, step)
            self.budget.machine_consumed += len(dataset)
            granted = 0
        else:
            placeholders = [self._transport_datum(p, step) for p in pairs]
            self._human_roundtrip(placeholders, step)
            self.budget.consumed += n
            dataset = self.human_labels
            granted = n
        reward_steps = cfg.reward.train_steps * cfg.reward.seed_steps_multiplier
        loss = self._train_reward(dataset, reward_steps)
        if dataset:
            kls = [datum_kl(self.ensemble, d) for d in dataset]
            self.filter_state.rho = max(max(kls), 1e-6)
        self._finetune_vlm(cfg.vlm.seed_finetune_steps)
        relabel_buffer(self.ensemble, self.buffer)
        self.session_count += 1
        self.metrics.add_session(
            step=step, session=self.session_count, clean=0, flipped=0,
            uncertain=0, human_granted=granted, m_h=self.budget.consumed,
            machine_labels=self.budget.machine_consumed,
            vlm_label_accuracy=self.latest_vlm_accuracy
            if cfg.mode == "vlm_pref_only" else None,
            reward_loss=loss,
        )

    @staticmethod
    def _transport_datum(pair, step):
        # placeholder carrying an unlabeled pair into the queue; the label is
        # overwritten by the annotator and never reaches any trainer
        return PreferenceDatum(pair=pair, label=(1.0, 0.0), source="human",
                               created_at_step=step)

    def _feedback_session(self, step: int):
        cfg = self.cfg
        if cfg.mode == "pebble_human_only":
            self._pebble_session(step)
            return
        n = min(cfg.pairs_per_session, self.budget.feedback_remaining())
        if n <= 0:
            logger.info("feedback cap reached; skipping session at step %d", step)
            return
        try:
            pairs = sample_segment_pairs(self.buffer, n, cfg.segment_length,
                                         self.rng_pairs)
        except NotEnoughExperienceError:
            logger.warning("session skipped at step %d: not enough experience",
                           step)
            return
        batch = self._label_pairs_with_vlm(pairs, step)
        self.budget.machine_consumed += len(batch)

        kls = [datum_kl(self.ensemble, d) for d in batch]
        compute_thresholds(self.filter_state, kls)
        result = partition(batch, self.ensemble, self.filter_state)

        granted = []
        if cfg.uses_human_labels() and self.budget.remaining > 0:
            pool = batch if cfg.mode == "no_selection" else result.uncertain
            selection, status = select_human_subset(
                pool, self.budget, n, self.rng_select,
                already_labeled_ids=self.human_labeled_ids)
            if selection:
                granted = self._human_roundtrip(selection, step)

        dataset = result.clean + result.flipped + self.human_labels
        loss = self._train_reward(dataset, cfg.reward.train_steps)
        self._finetune_vlm(cfg.vlm.finetune_steps)
        relabel_buffer(self.ensemble, self.buffer)

        self.session_count += 1
        self.metrics.add_session(
            step=step, session=self.session_count, clean=len(result.clean),
            flipped=len(result.flipped), uncertain=len(result.uncertain),
            human_granted=len(granted), m_h=self.budget.consumed,
            machine_labels=self.budget.machine_consumed,
            vlm_label_accuracy=self.latest_vlm_accuracy, reward_loss=loss,
        )

    def _pebble_session(self, step: int):
        cfg = self.cfg
        n = min(cfg.pairs_per_session, self.budget.remaining,
                self.budget.feedback_remaining())
        if n <= 0:
            return
        try:
            pairs = sample_segment_pairs(self.buffer, n, cfg.segment_length,
                                         self.rng_pairs)
        except NotEnoughExperienceError:
            return
        placeholders = [self._transport_datum(p, step) for p in pairs]
        self._human_roundtrip(placeholders, step)
        self.budget.consumed += n
        loss = self._train_reward(self.human_labels, cfg.reward.train_steps)
        relabel_buffer(self.ensemble, self.buffer)
        self.session_count += 1
        self.metrics.add_session(
            step=step, session=self.session_count, clean=0, flipped=0,
            uncertain=0, human_granted=n, m_h=self.budget.consumed,
            machine_labels=self.budget.machine_consumed,
            vlm_label_accuracy=None, reward_loss=loss,
        )

    # ------------------------------------------------------------- evaluate

    def _evaluate(self, step: int):
        cfg = self.cfg
        successes = 0
        returns = []
        for _ in range(cfg.eval_episodes):
            state = reset_state(self.task, self.rng_eval)
            true_return = 0.0
            for _ in range(HORIZON):
                action = act(self.policy, state.to_vector(),
                             deterministic=True)
                nxt, done = env_step(state, Action(action), self.task)
                true_return += (self.task.true_progress(nxt)
                                - self.task.true_progress(state))
                if self.task.is_success(nxt):
                    true_return += 1.0
                state = nxt
                if done:
                    break
            # episode success means finishing at the goal, not passing through
            successes += self.task.is_success(state)
            returns.append(true_return)
        ranking = self._ranking_accuracy()
        self.metrics.add_eval(step=step,
                              success_rate=successes / cfg.eval_episodes,
                              true_return_mean=float(np.mean(returns)),
                              ranking_accuracy=ranking)
        logger.info("step %d: success %.2f, true return %.2f", step,
                    successes / cfg.eval_episodes, float(np.mean(returns)))

    def _ranking_accuracy(self) -> float | None:
        try:
            pairs = sample_segment_pairs(self.buffer,
                                         self.cfg.reward.ranking_probe_pairs,
                                         self.cfg.segment_length, self.rng_eval)
        except NotEnoughExperienceError:
            return None
        ok = 0
        for s0, s1 in pairs:
            g0 = ground_truth_return(s0, self.task)
            g1 = ground_truth_return(s1, self.task)
            r0 = segment_return_rows(self.ensemble, s0)
            r1 = segment_return_rows(self.ensemble, s1)
            ok += (r0 > r1) == (g0 > g1)
        return ok / len(pairs)

    # ------------------------------------------------------------------ run

    def status(self) -> dict:
        return {
            "m_h": self.budget.consumed,
            "M_human": self.budget.total,
            "session": self.session_count,
            "pending_count": self.queue.pending_count(),
            "training_step": self.training_step,
        }

    def run(self, record_golden: bool = False) -> RunMetrics:
        cfg = self.cfg
        t_start = time.perf_counter()
        warmup_end = cfg.warmup_random + cfg.warmup_unsup
        state = reset_state(self.task, self.rng_env)
        episode_id = 0
        ep_step = 0

        for step_idx in range(cfg.total_steps):
            self.training_step = step_idx
            state_vec = state.to_vector()
            obs = self.renderer.observe_rows(state_vec)[0]
            if step_idx < cfg.warmup_random:
                action = self.rng_act.uniform(-1.0, 1.0, size=2)
            else:
                action = act(self.policy, state_vec, deterministic=False,
                             rng=self.rng_act)
            nxt, done = env_step(state, Action(action), self.task)
            reward = self._collection_reward(state_vec, action, obs)
            self.buffer.add(state_vec, action, nxt.to_vector(), reward, obs,
                            episode_id, ep_step)
            if done:
                state = reset_state(self.task, self.rng_env)
                episode_id += 1
                ep_step = 0
            else:
                state = nxt
                ep_step += 1

            if (step_idx >= cfg.warmup_random
                    and len(self.buffer) >= cfg.agent.batch_size
                    and (step_idx + 1) % cfg.agent.update_every == 0):
                batch = self.buffer.sample_transitions(cfg.agent.batch_size,
                                                       self.rng_sac)
                if step_idx < warmup_end:
                    batch = dict(batch)
                    batch["rewards"] = self.intrinsic.compute(
                        batch["states"], self.buffer, self.rng_knn)
                sac_update(self.policy, self.critics, self.sac_opts, batch,
                           self.sac_cfg, self.rng_sac)

            boundary = step_idx + 1
            if cfg.runs_feedback_sessions():
                if boundary == warmup_end:
                    self._seed_session(boundary)
                elif (boundary > warmup_end
                      and (boundary - warmup_end) % cfg.session_interval == 0):
                    self._feedback_session(boundary)
            if boundary % cfg.eval_every == 0 or boundary == cfg.total_steps:
                self._evaluate(boundary)

        self.metrics.wall_clock_seconds = time.perf_counter() - t_start
        if cfg.output_dir:
            self.save_outputs(Path(cfg.output_dir), record_golden=record_golden)
        return self.metrics

    def save_outputs(self, out_dir: Path, record_golden: bool = False):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.metrics.save_jsonl(out_dir / "metrics.jsonl")
        if record_golden:
            self.metrics.save_jsonl(out_dir / "metrics.golden.jsonl")
        save_checkpoint(out_dir / "policy.json", _mlp_tensors(self.policy.net),
                        meta={"task": self.cfg.task, "seed": self.cfg.seed,
                              "kind": "policy"})
        ensemble_tensors = {}
        for i, member in enumerate(self.ensemble.members):
            ensemble_tensors.update(_mlp_tensors(member, prefix=f"member{i}/"))
        save_checkpoint(out_dir / "reward_ensemble.json", ensemble_tensors,
                        meta={"task": self.cfg.task, "seed": self.cfg.seed,
                              "kind": "reward_ensemble"})
        save_vlm_checkpoint(out_dir / "vlm.json", self.adapters,
                            self.inverse_head, seed=self.cfg.seed,
                            source_task=self.cfg.task)
        summary = {
            "final_success_rate": self.metrics.final_success_rate(),
            "best_success_rate": self.metrics.best_success_rate(),
            "m_h": self.budget.consumed,
            "machine_labels": self.budget.machine_consumed,
            "sessions": self.session_count,
            "wall_clock_seconds": self.metrics.wall_clock_seconds,
        }
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))


def _mlp_tensors(mlp, prefix: str = "") -> dict:
    out = {}
    for i, (w, b) in enumerate(mlp.layers):
        out[f"{prefix}w{i}"] = w
        out[f"{prefix}b{i}"] = b
    return out


def run(config: RunConfig, annotation_queue=None) -> RunMetrics:
    """Execute one full training run; returns its metrics."""
    return Orchestrator(config, annotation_queue=annotation_queue).run()
