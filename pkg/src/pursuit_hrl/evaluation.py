"""Deployment of trained checkpoints: greedy rollouts, the three evaluation
metrics (mean episode return, decision time, win rate), size generalization
by ability-class actor cloning, and trajectory export.

Decision time covers only allocation and planner inference; environment
stepping and file I/O are outside the timed sections. Timing is therefore
reported in JSON sidecars while the CSV reports stay deterministic.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import allocation, ensemble, interaction, planner, sim
from .config import ArenaConfig, ExperimentConfig
from .nets import Mlp, load_checkpoint, load_mlp_tensors


class IncompatibleEncodingError(RuntimeError):
    """Checkpoint feature widths do not match this scenario."""


@dataclass
class InstanceResult:
    instance: int
    episode_return: float
    win: bool
    decision_time_ms: float


@dataclass
class EvalReport:
    rows: list[InstanceResult]

    @property
    def win_rate(self) -> float:
        return 100.0 * sum(r.win for r in self.rows) / len(self.rows)

    @property
    def mean_return(self) -> float:
        return float(np.mean([r.episode_return for r in self.rows]))

    @property
    def mean_decision_ms(self) -> float:
        return float(np.mean([r.decision_time_ms for r in self.rows]))

    def write(self, out_dir: Path, name: str = "eval_report"):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{name}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance", "episode_return", "win"])
            for r in self.rows:
                w.writerow([r.instance, f"{r.episode_return:.6f}", int(r.win)])
        payload = {
            "aggregates": {
                "re_mean": self.mean_return,
                "ti_mean_ms": self.mean_decision_ms,
                "wr_percent": self.win_rate,
            },
            "rows": [
                {"instance": r.instance, "episode_return": r.episode_return,
                 "win": r.win, "decision_time_ms": r.decision_time_ms}
                for r in self.rows
            ],
        }
        (out_dir / f"{name}.json").write_text(json.dumps(payload, indent=2))
        return csv_path


class Deployment:
    """Trained networks bound to a (possibly different-size) scenario."""

    def __init__(self, exp: ExperimentConfig, checkpoint_path):
        tensors, meta = load_checkpoint(checkpoint_path)
        self.exp = exp
        self.meta = meta
        cfg = exp.arena
        if tensors["upper.q.w0"].shape[0] != allocation.ENCODING_WIDTH:
            raise IncompatibleEncodingError(
                "allocation encoding width mismatch between checkpoint and scenario")
        if tensors["lower.actor0.w0"].shape[0] != planner.OBS_WIDTH:
            raise IncompatibleEncodingError(
                "planner observation width mismatch between checkpoint and scenario")

        self.upper = allocation.AllocationLearner(seed=0)
        load_mlp_tensors(self.upper.qnet, "upper.q", tensors)
        load_mlp_tensors(self.upper.target, "upper.target", tensors)

        self.model = ensemble.EnsembleModel(seed=0)
        for b, net in enumerate(self.model.members):
            load_mlp_tensors(net, f"model.m{b}", tensors)
        self.model.in_norm.mean = tensors["model.in_mean"]
        self.model.in_norm.std = tensors["model.in_std"]
        self.model.out_norm.mean = tensors["model.out_mean"]
        self.model.out_norm.std = tensors["model.out_std"]

        # clone one actor per pursuer, matched by nearest capture radius
        trained_i = int(meta["n_pursuers"])
        radii = cfg.capture_radii
        self.actors = []
        for i in range(cfg.n_pursuers):
            want = cfg.pursuer_capture_radius(i)
            source = min(range(trained_i),
                         key=lambda a: (abs(radii[a % len(radii)] - want), a))
            actor = Mlp([planner.OBS_WIDTH, 64, 64, planner.ACTION_WIDTH],
                        head="linear")
            load_mlp_tensors(actor, f"lower.actor{source}", tensors)
            self.actors.append(actor)

    def _choose(self, world, i):
        return self.upper.select_target(world, i, 0.0,
                                        np.random.default_rng(0))

    def rollout(self, instance_seed: int, alloc_mode: str = "hrl",
                collect_trajectory: bool = False):
        """Greedy episode on one instance. Returns (InstanceResult, records)."""
        exp = self.exp
        cfg = exp.arena
        params = exp.interaction
        world = sim.generate_instance(cfg, instance_seed)
        rng = np.random.default_rng((instance_seed, 99))
        decision_s = 0.0
        records = [sim.trajectory_record(world)] if collect_trajectory else []

        def allocate():
            nonlocal decision_s
            t0 = time.perf_counter()
            world.allocation = np.zeros_like(world.allocation)
            gains = []
            e_prev = 0.0
            for i in world.active_pursuers():
                try:
                    if alloc_mode == "hrl":
                        j = self.upper.select_target(world, i, 0.0, rng)
                    elif alloc_mode == "random":
                        j = allocation.random_choose(world, i, rng)
                    elif alloc_mode == "greedy":
                        j = allocation.greedy_pairwise_choose(world, i)
                    else:
                        raise ValueError(f"unknown alloc mode {alloc_mode!r}")
                except allocation.RoundComplete:
                    break
                world.allocation[i, j] = 1
                e_new = allocation.effectiveness(world.allocation, world)
                gains.append(e_new - e_prev)
                e_prev = e_new
            decision_s += time.perf_counter() - t0
            return gains, e_prev

        gains, e_final = allocate()
        summary = ensemble.global_summary(world)
        h = interaction.adaptive_interaction_steps(
            self.model.uncertainty(summary), params)
        t0_step = 0
        window_path = 0.0
        window_caps = 0
        episode_return = 0.0
        win = False
        tr = exp.train
        for t in range(1, cfg.episode_len + 1):
            t_dec = time.perf_counter()
            env_actions = {}
            for i in world.active_pursuers():
                if not world.allocation[i].any():
                    continue
                obs = planner.build_observation(world, i)
                raw = self.actors[i].forward(obs[None, :], cache=False)[0]
                env_actions[i] = planner.residual_action(
                    obs, np.tanh(raw), cfg.pursuer_vmax, cfg.d1)
            decision_s += time.perf_counter() - t_dec
            world, events = sim.step_env(world, env_actions)
            for i in world.active_pursuers():
                if world.allocation[i].any():
                    window_path += planner.pursuer_path_reward(world, i, tr)
            window_caps += len(events.captures)
            if collect_trajectory:
                records.append(sim.trajectory_record(world))
            outcome = sim.check_termination(world)
            terminal = outcome.winner != "none-yet"
            if t == t0_step + h or terminal or t == cfg.episode_len:
                n_dec = max(len(gains), 1)
                r_allos = [tr.omega1 * g + (1 - tr.omega1) * e_final / n_dec
                           for g in gains]
                r_allo = float(np.mean(r_allos)) if r_allos else 0.0
                episode_return += interaction.total_reward(
                    h, r_allo, window_path, window_caps)
                if terminal:
                    win = outcome.winner == "pursuers"
                    break
                gains, e_final = allocate()
                summary = ensemble.global_summary(world)
                h = interaction.adaptive_interaction_steps(
                    self.model.uncertainty(summary), params)
                t0_step = t
                window_path = 0.0
                window_caps = 0
        result = InstanceResult(
            instance=instance_seed, episode_return=episode_return,
            win=win, decision_time_ms=decision_s * 1000.0)
        return result, records


def evaluate(exp: ExperimentConfig, checkpoint_path, n_instances: int,
             seed: int, alloc_mode: str = "hrl") -> EvalReport:
    dep = Deployment(exp, checkpoint_path)
    rows = []
    for k in range(n_instances):
        result, _ = dep.rollout(seed + k, alloc_mode=alloc_mode)
        rows.append(result)
    return EvalReport(rows=rows)


def export_trajectory(exp: ExperimentConfig, checkpoint_path,
                      instance_seed: int, out_path) -> Path:
    dep = Deployment(exp, checkpoint_path)
    _, records = dep.rollout(instance_seed, collect_trajectory=True)
    sim.write_trajectory(records, out_path)
    return Path(out_path)
