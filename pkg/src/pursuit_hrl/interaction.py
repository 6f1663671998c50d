"""Uncertainty-driven coupling between the allocation and planning layers.

The scalar model uncertainty shrinks three quantities linearly (with floors
and clamps): the number of environment steps between allocation rounds, the
depth of model-based value expansion, and the weight of model-generated loss
terms. The expansion mixes the stored real transition (step 0) with a mean
rollout of the ensemble model for the remaining steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .allocation import ENCODING_WIDTH, AllocationLearner, UpperTransition
from .config import ArenaConfig, InteractionParams
from .ensemble import SUMMARY_WIDTH, EnsembleModel
from .nets import soft_update


def adaptive_interaction_steps(v_hat: float, params: InteractionParams) -> int:
    """floor(-omega3 * V + H_base), clamped into [h_min, h_max]."""
    h = math.floor(-params.omega3 * v_hat + params.h_base)
    return int(min(max(h, params.h_min), params.h_max))


def adaptive_depth(v_hat: float, params: InteractionParams) -> int:
    """floor(-omega4 * V + N_base), clamped into [1, n_max]."""
    n = math.floor(-params.omega4 * v_hat + params.n_base)
    return int(min(max(n, 1), params.n_max))


def sample_weight(v_hat: float, params: InteractionParams) -> float:
    """-omega5 * V + weight_base, clamped into [weight_min, 1]."""
    w = -params.omega5 * v_hat + params.weight_base
    return float(min(max(w, params.weight_min), 1.0))


def total_reward(h: int, r_allo: float, path_sum: float, captures: int) -> float:
    """Upper-layer reward over one interaction window: the allocation reward
    scaled by its duration, plus team path rewards and captures."""
    return h * r_allo + path_sum + captures


def candidate_from_summary(summary: np.ndarray, cfg: ArenaConfig) -> np.ndarray:
    """Representative candidate encoding reconstructed from a pooled summary.

    Model rollouts predict summaries, not full states, so Q-values along the
    rollout are scored on this aggregate stand-in candidate.
    """
    mean_pe = float(summary[0])
    mean_speed = float(summary[6])
    mean_qbar = float(summary[7])
    active_p = float(summary[4])
    return np.array([
        mean_pe,
        0.0,
        -mean_speed,
        0.0,
        float(np.mean(cfg.capture_radii)),
        cfg.pursuer_vmax,
        float(np.mean(cfg.evader_vmax)),
        mean_qbar,
        active_p,
    ])


@dataclass
class RolloutPlan:
    """Trace of one multi-step expansion, for logging and inspection."""
    offsets: list = field(default_factory=list)       # H_0=0 < H_1 < ...
    uncertainties: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    rewards: list = field(default_factory=list)       # r at t, then predicted


def expansion_terms(tr: UpperTransition, model: EnsembleModel,
                    learner: AllocationLearner, params: InteractionParams,
                    gamma: float, cfg: ArenaConfig,
                    fixed_h: int | None = None):
    """Loss terms for one stored transition.

    Returns (rows, targets, weights, plan): Q-input rows (one per expansion
    step), their targets, per-term weights, and the rollout trace. Step 0 uses
    the real transition; steps 1..N-1 follow the model's mean rollout. With
    depth 1 and unit weight this reduces exactly to the one-step Q update.
    """
    plan = RolloutPlan(offsets=[0])
    v0 = model.uncertainty(tr.summary)
    plan.uncertainties.append(v0)
    plan.weights.append(sample_weight(v0, params))
    plan.rewards.append(tr.reward)
    h1 = fixed_h if fixed_h is not None else adaptive_interaction_steps(v0, params)
    plan.offsets.append(plan.offsets[-1] + h1)
    depth = adaptive_depth(v0, params)
    if tr.terminal or tr.next_candidates is None:
        depth = 1

    rows = [np.asarray(tr.chosen, dtype=float)]
    summaries = [tr.next_summary]  # predicted state after step n, n >= 1
    for n in range(1, depth):
        s_n = summaries[n - 1]
        if s_n is None or not np.all(np.isfinite(s_n)):
            depth = n  # truncate at the last finite prediction
            break
        v_n = model.uncertainty(s_n)
        plan.uncertainties.append(v_n)
        plan.weights.append(sample_weight(v_n, params))
        h_n = fixed_h if fixed_h is not None else adaptive_interaction_steps(v_n, params)
        plan.offsets.append(plan.offsets[-1] + h_n)
        if n == 1:
            # real next decision point: greedy candidate under the online net
            pick = learner.greedy_candidate(tr.next_candidates)
            rows.append(tr.next_candidates[pick])
        else:
            rows.append(candidate_from_summary(s_n, cfg))
        next_s, r_hat = model.predict(s_n)
        plan.rewards.append(r_hat)
        summaries.append(next_s)

    rows = rows[:depth]
    weights = np.array(plan.weights[:depth])
    r_hats = np.array(plan.rewards[:depth])

    if tr.terminal or tr.next_candidates is None:
        q_final = 0.0
    elif depth == 1:
        q_final = float(np.max(learner.q_values(tr.next_candidates, target=True)))
    else:
        tail = summaries[depth - 1]
        if tail is None or not np.all(np.isfinite(tail)):
            q_final = 0.0
        else:
            q_final = float(learner.q_values(
                candidate_from_summary(tail, cfg)[None, :], target=True)[0])

    targets = np.empty(depth)
    for n in range(depth):
        disc = gamma ** np.arange(depth - n)
        targets[n] = float(disc @ r_hats[n:]) + gamma ** (depth - n) * q_final
    return np.stack(rows), targets, weights, plan


def expansion_update(learner: AllocationLearner, model: EnsembleModel,
                     batch: list[UpperTransition], params: InteractionParams,
                     cfg: ArenaConfig, fixed_h: int | None = None) -> float:
    """Weighted multi-step Q update over a batch of stored transitions.
    While the learner is inside its imitation warmup, the step defers to the
    same teacher regression as the one-step update, so a desk-scale run uses
    one consistent training signal across phases."""
    learner.update_count += 1
    if learner.update_count <= learner.warmup:
        out = learner.imitation_update(batch)
        return 0.0 if out is None else out
    all_rows, all_targets, all_weights = [], [], []
    for tr in batch:
        rows, targets, weights, _ = expansion_terms(
            tr, model, learner, params, learner.gamma, cfg, fixed_h=fixed_h)
        all_rows.append(rows)
        all_targets.append(targets)
        all_weights.append(weights)
    rows = np.concatenate(all_rows)
    targets = np.concatenate(all_targets)
    weights = np.concatenate(all_weights)

    q = learner.qnet.forward(rows)[:, 0]
    err = q - targets
    loss = float(np.sum(weights * err ** 2) / len(batch))
    grad_out = (2.0 * weights * err / len(batch))[:, None]
    grads, _ = learner.qnet.backward(grad_out)
    learner.adam.step(learner.qnet.parameters(), grads)
    soft_update(learner.target.parameters(), learner.qnet.parameters(),
                learner.zeta)
    return loss
