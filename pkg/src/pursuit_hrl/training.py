"""Training pipeline: upper pre-training on static allocation rewards, lower
pre-training on path rewards, then cross-training where the two layers
interact every H steps, H being refreshed from the ensemble's uncertainty.

All randomness is seeded per phase, so a fixed experiment seed reproduces
byte-identical logs. Wall-clock timings go to a sidecar JSON, never into the
deterministic CSVs.
"""
from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import allocation, ensemble, interaction, planner, sim
from .config import ExperimentConfig
from .nets import (Adam, load_checkpoint, load_mlp_tensors, mlp_tensors,
                   save_checkpoint)

TRAIN_LOG_HEADER = ["phase", "episode", "upper_return", "lower_return", "win"]
H_TRACE_HEADER = ["episode", "t", "v_hat", "h", "n", "mean_weight"]


@dataclass
class _PendingDecision:
    pursuer: int
    chosen: np.ndarray
    local_gain: float
    summary: np.ndarray
    rows: np.ndarray = None


@dataclass
class Orchestrator:
    exp: ExperimentConfig
    out_dir: Path

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        tr = self.exp.train
        arena = self.exp.arena
        self.upper = allocation.AllocationLearner(
            lr=tr.upper_lr, gamma=tr.upper_gamma, zeta=tr.refresh_factor,
            batch_size=tr.upper_batch, buffer_capacity=tr.upper_buffer,
            seed=tr.seed, warmup=tr.upper_warmup_updates)
        self.lower = planner.PlannerLearner(
            arena.n_pursuers, lr=tr.lower_lr, gamma=tr.lower_gamma,
            zeta=tr.refresh_factor, batch_size=tr.lower_batch,
            buffer_capacity=tr.lower_buffer, seed=tr.seed,
            policy_delay=tr.lower_policy_delay,
            actor_warmup=tr.lower_warmup_updates,
            vmax=arena.pursuer_vmax, d1=arena.d1)
        self.model = ensemble.EnsembleModel(seed=tr.seed)
        self.log_rows: list[list] = []
        self.h_trace_rows: list[list] = []
        self.timings: dict[str, float] = {}

    # ---------- instances ----------

    def instance(self, episode: int) -> sim.WorldState:
        pool = self.exp.train.instance_pool
        return sim.generate_instance(self.exp.arena, episode % pool)

    # ---------- upper pre-training ----------

    def _epsilon(self, episode: int, total: int) -> float:
        tr = self.exp.train
        half = max(total // 2, 1)
        if episode >= half:
            return tr.eps_end
        frac = episode / half
        return tr.eps_start + frac * (tr.eps_end - tr.eps_start)

    def _rolled_instance(self, episode: int,
                         rng: np.random.Generator) -> sim.WorldState:
        """Instance advanced a random stretch under the guidance teacher with
        a spreading allocation. Deployed allocators decide every few steps
        all episode long, so training them only on initial states leaves
        every mid-episode state out of distribution."""
        arena = self.exp.arena
        world = self.instance(episode)
        t_roll = int(rng.integers(0, arena.episode_len))
        for _ in range(t_roll):
            allocation.run_allocation_round(
                world, allocation.nearest_unassigned_choose)
            acts = {}
            for i in world.active_pursuers():
                if world.allocation[i].any():
                    obs = planner.build_observation(world, i)
                    acts[i] = planner.guidance_action(
                        obs, arena.pursuer_vmax, arena.d1)
            world, _ = sim.step_env(world, acts)
            if sim.check_termination(world).winner != "none-yet":
                # terminal states have no allocation round to train on
                return self.instance(episode)
        world.allocation = np.zeros_like(world.allocation)
        return world

    def pretrain_upper(self):
        """Sequential allocation rounds on states sampled along teacher
        rollouts (initial and mid-episode); the global share of the reward
        is granted to every decision of a finished round."""
        tr = self.exp.train
        rng = np.random.default_rng((tr.seed, 1))
        t_start = time.perf_counter()
        for e in range(tr.episodes_upper):
            world = self._rolled_instance(e, rng)
            eps = self._epsilon(e, tr.episodes_upper)
            decisions = []
            candidate_rows = []
            summaries = []
            e_prev = 0.0
            pursuers = world.active_pursuers()
            for i in pursuers:
                active, rows = allocation.encode_candidates(world, i)
                candidate_rows.append(rows)
                summaries.append(ensemble.global_summary(world))
                j = self.upper.select_target(world, i, eps, rng)
                chosen = rows[active.index(j)]
                world.allocation[i, j] = 1
                e_new = allocation.effectiveness(world.allocation, world)
                decisions.append((chosen, e_new - e_prev))
                e_prev = e_new
            e_final = e_prev
            ret = 0.0
            for k, (chosen, gain) in enumerate(decisions):
                r = tr.omega1 * gain + (1 - tr.omega1) * e_final / len(pursuers)
                ret += r
                last = k + 1 == len(decisions)
                self.upper.buffer.add(allocation.UpperTransition(
                    chosen=chosen, reward=r,
                    next_candidates=None if last else candidate_rows[k + 1],
                    terminal=last, summary=summaries[k],
                    candidates=candidate_rows[k]))
            for _ in decisions:
                for _ in range(tr.upper_updates):
                    self.upper.update()
            self.log_rows.append(["pretrain_upper", e, f"{ret:.6f}", "", ""])
        self.timings["pretrain_upper_s"] = time.perf_counter() - t_start
        self.save_checkpoint("upper", tr.episodes_upper)

    # ---------- lower pre-training ----------

    def _noise(self, episode: int, total: int) -> float:
        tr = self.exp.train
        if total <= 1:
            return tr.noise_end
        frac = min(episode / (total - 1), 1.0)
        return tr.noise_start + frac * (tr.noise_end - tr.noise_start)

    def _allocate(self, world: sim.WorldState, use_upper: bool,
                  rng: np.random.Generator, eps: float = 0.0):
        if use_upper:
            allocation.run_allocation_round(
                world, lambda w, i: self.upper.select_target(w, i, eps, rng))
        else:
            allocation.run_allocation_round(world, allocation.greedy_pairwise_choose)

    def _joint_step(self, world: sim.WorldState, noise: float):
        """Act with every unfrozen pursuer, advance the world, and return a
        joint transition plus the masked team path reward."""
        cfg = self.exp.arena
        n = cfg.n_pursuers
        obs = np.zeros((n, planner.OBS_WIDTH))
        acts = np.zeros((n, planner.ACTION_WIDTH))
        mask = np.zeros(n)
        env_actions = {}
        for i in world.active_pursuers():
            if not world.allocation[i].any():
                continue
            obs[i] = planner.build_observation(world, i)
            env_actions[i], acts[i] = self.lower.act(
                i, obs[i], noise, cfg.pursuer_vmax)
            mask[i] = 1.0
        world, events = sim.step_env(world, env_actions)
        rewards = np.zeros(n)
        for i in range(n):
            if mask[i]:
                rewards[i] = planner.pursuer_path_reward(world, i, self.exp.train)
        next_obs = np.zeros_like(obs)
        for i in range(n):
            if mask[i] and not world.pursuers[i].frozen:
                next_obs[i] = planner.build_observation(world, i)
        outcome = sim.check_termination(world)
        # The shaped path reward is dense, stationary and mostly negative, so
        # cutting the bootstrap at episode ends would teach the planner that
        # losing fast is the cheapest policy. Episode boundaries are treated
        # as time-limit resets: the critic always bootstraps through them.
        transition = planner.LowerTransition(
            obs=obs, actions=acts, rewards=rewards, next_obs=next_obs,
            done=False, mask=mask)
        return transition, float(rewards[mask > 0].sum()), events, outcome

    def pretrain_lower(self):
        tr = self.exp.train
        rng = np.random.default_rng((tr.seed, 2))
        use_upper = not tr.skip_upper_pretrain and tr.episodes_upper > 0
        t_start = time.perf_counter()
        for e in range(tr.episodes_lower):
            world = self.instance(e)
            self._allocate(world, use_upper, rng)
            noise = self._noise(e, tr.episodes_lower)
            nstep = planner.NStepAssembler(tr.lower_n_step, tr.lower_gamma)
            ret = 0.0
            win = ""
            for _ in range(self.exp.arena.episode_len):
                transition, team_r, _, outcome = self._joint_step(world, noise)
                for emitted in nstep.push(transition):
                    self.lower.buffer.add(emitted)
                for _ in range(tr.lower_updates):
                    self.lower.update()
                ret += team_r
                if outcome.winner != "none-yet":
                    win = outcome.winner
                    break
            for emitted in nstep.flush():
                self.lower.buffer.add(emitted)
            self.log_rows.append(["pretrain_lower", e, "", f"{ret:.6f}", win])
        self.timings["pretrain_lower_s"] = time.perf_counter() - t_start
        self.save_checkpoint("lower", tr.episodes_lower)

    # ---------- cross-training ----------

    def cross_train(self):
        tr = self.exp.train
        params = self.exp.interaction
        cfg = self.exp.arena
        rng = np.random.default_rng((tr.seed, 3))
        eps = tr.eps_end
        t_start = time.perf_counter()
        for e in range(tr.episodes_cross):
            world = self.instance(e)
            pending = self._allocation_round_with_pending(world, eps, rng, None)
            summary = ensemble.global_summary(world)
            h = self._refresh_h(e, 0, summary, params, tr)
            t0 = 0
            window_path = 0.0
            window_caps = 0
            upper_ret = 0.0
            lower_ret = 0.0
            win = ""
            nstep = planner.NStepAssembler(tr.lower_n_step, tr.lower_gamma)
            for t in range(1, cfg.episode_len + 1):
                transition, team_r, events, outcome = self._joint_step(world, tr.noise_end)
                for emitted in nstep.push(transition):
                    self.lower.buffer.add(emitted)
                for _ in range(tr.lower_updates):
                    self.lower.update()
                window_path += team_r
                lower_ret += team_r
                window_caps += len(events.captures)
                terminal = outcome.winner != "none-yet" or t == cfg.episode_len
                if t == t0 + h or terminal:
                    upper_ret += self._close_window(
                        world, pending, h, window_path, window_caps, terminal,
                        eps, rng)
                    if terminal:
                        win = outcome.winner if outcome.winner != "none-yet" else ""
                        break
                    pending = self._last_pending
                    summary = ensemble.global_summary(world)
                    h = self._refresh_h(e, t, summary, params, tr)
                    t0 = t
                    window_path = 0.0
                    window_caps = 0
            for emitted in nstep.flush():
                self.lower.buffer.add(emitted)
            self.log_rows.append(
                ["cross_train", e, f"{upper_ret:.6f}", f"{lower_ret:.6f}", win])
        self.timings["cross_train_s"] = time.perf_counter() - t_start
        self.save_checkpoint("final", tr.episodes_cross)

    def _refresh_h(self, episode: int, t: int, summary: np.ndarray,
                   params, tr) -> int:
        v_hat = self.model.uncertainty(summary)
        if tr.fixed_h is not None:
            h = tr.fixed_h
        else:
            h = interaction.adaptive_interaction_steps(v_hat, params)
        n = interaction.adaptive_depth(v_hat, params)
        w = interaction.sample_weight(v_hat, params)
        self.h_trace_rows.append(
            [episode, t, f"{v_hat:.6f}", h, n, f"{w:.6f}"])
        return h

    def _allocation_round_with_pending(self, world, eps, rng,
                                       prior: list[_PendingDecision] | None):
        """Run one allocation round, recording each decision for delayed
        reward assignment. If ``prior`` pending decisions exist, attach the
        candidate rows seen now as their bootstrap states."""
        world.allocation = np.zeros_like(world.allocation)
        pending = []
        e_prev = 0.0
        prior_map = {p.pursuer: p for p in (prior or [])}
        for i in world.active_pursuers():
            try:
                active, rows = allocation.encode_candidates(world, i)
            except allocation.RoundComplete:
                break
            if i in prior_map:
                prior_map[i].next_rows = rows  # type: ignore[attr-defined]
            j = self.upper.select_target(world, i, eps, rng)
            chosen = rows[active.index(j)]
            world.allocation[i, j] = 1
            e_new = allocation.effectiveness(world.allocation, world)
            pending.append(_PendingDecision(
                pursuer=i, chosen=chosen, local_gain=e_new - e_prev,
                summary=None, rows=rows))
            e_prev = e_new
        summary = ensemble.global_summary(world)
        for p in pending:
            p.summary = summary
        self._round_final_eff = e_prev
        self._round_size = max(len(pending), 1)
        return pending

    def _close_window(self, world, pending, h, path_sum, captures, terminal,
                      eps, rng) -> float:
        """Assign total rewards to the previous round's decisions, push them,
        update the model and the upper net, and (unless terminal) run the
        next allocation round."""
        tr = self.exp.train
        e_final = self._round_final_eff
        n_dec = self._round_size
        if not terminal:
            self._last_pending = self._allocation_round_with_pending(
                world, eps, rng, prior=pending)
            next_summary = ensemble.global_summary(world)
        else:
            self._last_pending = []
            next_summary = ensemble.global_summary(world)

        totals = []
        for p in pending:
            r_allo = tr.omega1 * p.local_gain + (1 - tr.omega1) * e_final / n_dec
            r_total = interaction.total_reward(h, r_allo, path_sum, captures)
            totals.append(r_total)
            next_rows = getattr(p, "next_rows", None)
            self.upper.buffer.add(allocation.UpperTransition(
                chosen=p.chosen, reward=r_total,
                next_candidates=None if terminal else next_rows,
                terminal=terminal or next_rows is None,
                summary=p.summary, next_summary=next_summary,
                candidates=p.rows))
        if pending:
            self.model.add_sample(pending[0].summary, next_summary,
                                  float(np.mean(totals)))
        self.model.update(n_steps=tr.model_updates)
        if len(self.upper.buffer) > 0:
            for _ in range(tr.upper_updates):
                batch = self.upper.buffer.sample(self.upper.batch_size)
                if tr.disable_multistep:
                    self.upper.update(batch)
                else:
                    interaction.expansion_update(
                        self.upper, self.model, batch, self.exp.interaction,
                        self.exp.arena, fixed_h=tr.fixed_h)
        return float(np.mean(totals)) if totals else 0.0

    # ---------- persistence ----------

    def config_hash(self) -> str:
        blob = json.dumps({
            "arena": vars(self.exp.arena), "train": vars(self.exp.train),
            "interaction": vars(self.exp.interaction)},
            sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def checkpoint_tensors(self) -> dict:
        tensors = {}
        tensors.update(mlp_tensors(self.upper.qnet, "upper.q"))
        tensors.update(mlp_tensors(self.upper.target, "upper.target"))
        tensors.update(self.upper.adam.state_tensors("upper.adam"))
        for a in range(self.lower.n_agents):
            tensors.update(mlp_tensors(self.lower.actors[a], f"lower.actor{a}"))
            tensors.update(mlp_tensors(self.lower.critics[a], f"lower.critic{a}"))
            tensors.update(mlp_tensors(self.lower.actor_targets[a], f"lower.actor_t{a}"))
            tensors.update(mlp_tensors(self.lower.critic_targets[a], f"lower.critic_t{a}"))
            tensors.update(self.lower.actor_adams[a].state_tensors(f"lower.actor_adam{a}"))
            tensors.update(self.lower.critic_adams[a].state_tensors(f"lower.critic_adam{a}"))
            tensors[f"lower.vnorm{a}"] = self.lower.value_norms[a].state()
        for b, net in enumerate(self.model.members):
            tensors.update(mlp_tensors(net, f"model.m{b}"))
            tensors.update(self.model.adams[b].state_tensors(f"model.adam{b}"))
        tensors["model.in_mean"] = self.model.in_norm.mean
        tensors["model.in_std"] = self.model.in_norm.std
        tensors["model.out_mean"] = self.model.out_norm.mean
        tensors["model.out_std"] = self.model.out_norm.std
        return tensors

    def load_checkpoint_tensors(self, tensors: dict):
        load_mlp_tensors(self.upper.qnet, "upper.q", tensors)
        load_mlp_tensors(self.upper.target, "upper.target", tensors)
        self.upper.adam.load_state_tensors("upper.adam", tensors)
        for a in range(self.lower.n_agents):
            load_mlp_tensors(self.lower.actors[a], f"lower.actor{a}", tensors)
            load_mlp_tensors(self.lower.critics[a], f"lower.critic{a}", tensors)
            load_mlp_tensors(self.lower.actor_targets[a], f"lower.actor_t{a}", tensors)
            load_mlp_tensors(self.lower.critic_targets[a], f"lower.critic_t{a}", tensors)
            self.lower.actor_adams[a].load_state_tensors(f"lower.actor_adam{a}", tensors)
            self.lower.critic_adams[a].load_state_tensors(f"lower.critic_adam{a}", tensors)
            self.lower.value_norms[a].load_state(tensors[f"lower.vnorm{a}"])
        for b, net in enumerate(self.model.members):
            load_mlp_tensors(net, f"model.m{b}", tensors)
            self.model.adams[b].load_state_tensors(f"model.adam{b}", tensors)
        self.model.in_norm.mean = tensors["model.in_mean"]
        self.model.in_norm.std = tensors["model.in_std"]
        self.model.out_norm.mean = tensors["model.out_mean"]
        self.model.out_norm.std = tensors["model.out_std"]

    def save_checkpoint(self, phase: str, episode: int):
        ckpt_dir = self.out_dir / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)
        save_checkpoint(ckpt_dir / f"{phase}.npz", self.checkpoint_tensors(), {
            "phase": phase, "episode": episode,
            "n_pursuers": self.exp.arena.n_pursuers,
            "n_evaders": self.exp.arena.n_evaders,
            "config_hash": self.config_hash()})
        manifest = {"phase": phase, "episode": episode,
                    "config_hash": self.config_hash()}
        (ckpt_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True))

    def load(self, path):
        tensors, meta = load_checkpoint(path)
        self.load_checkpoint_tensors(tensors)
        return meta

    # ---------- log emission ----------

    def write_logs(self):
        with open(self.out_dir / "train_log.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAIN_LOG_HEADER)
            w.writerows(self.log_rows)
        with open(self.out_dir / "h_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(H_TRACE_HEADER)
            w.writerows(self.h_trace_rows)
        (self.out_dir / "timings.json").write_text(
            json.dumps(self.timings, indent=2, sort_keys=True))

    def run_all(self):
        tr = self.exp.train
        if not tr.skip_upper_pretrain:
            self.pretrain_upper()
        if not tr.skip_lower_pretrain:
            self.pretrain_lower()
        self.cross_train()
        self.write_logs()


def run_ablation_suite(exp: ExperimentConfig, out_dir) -> Path:
    """Run the four pre-training variants with identical seeds and emit
    aligned cross-training learning curves."""
    import copy
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    variants = {
        "full": (False, False),
        "skip-upper": (True, False),
        "skip-lower": (False, True),
        "skip-both": (True, True),
    }
    curves = {}
    for name, (skip_u, skip_l) in variants.items():
        sub = copy.deepcopy(exp)
        sub.train.skip_upper_pretrain = skip_u
        sub.train.skip_lower_pretrain = skip_l
        orch = Orchestrator(sub, out_dir / name)
        orch.run_all()
        curves[name] = [
            float(r[2]) for r in orch.log_rows if r[0] == "cross_train"]
    path = out_dir / "ablation_curves.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        names = list(variants)
        w.writerow(["episode", *names])
        for e in range(exp.train.episodes_cross):
            w.writerow([e, *[f"{curves[n][e]:.6f}" for n in names]])
    return path
