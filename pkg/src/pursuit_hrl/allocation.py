"""Sequential target allocation: capture-probability scoring, reward shaping,
candidate encodings of fixed width, and the Q-learner over them.

One allocation round walks the pursuers in ascending index; each picks one
evader (rule: a pursuer holds at most one target, an evader may be shared).
Candidate features are aggregates, so the same network evaluates any swarm
size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import Adam, Mlp, ReplayBuffer, soft_update
from .sim import WorldState

ENCODING_WIDTH = 9


class RoundComplete(Exception):
    """Signal: no active evaders remain to allocate."""


def capture_prob(capture_radius: float, p_i, p_j) -> float:
    """rc / (rc + distance); 1 at zero distance, decaying with range."""
    d = float(np.linalg.norm(np.asarray(p_i, dtype=float) - np.asarray(p_j, dtype=float)))
    return capture_radius / (capture_radius + d)


def joint_capture_prob(qs) -> float:
    """Probability at least one assigned pursuer captures: 1 - prod(1 - q)."""
    out = 1.0
    for q in qs:
        out *= (1.0 - q)
    return 1.0 - out


def column_capture_prob(alloc: np.ndarray, world: WorldState, j: int) -> float:
    qs = [capture_prob(world.config.pursuer_capture_radius(i),
                       world.pursuers[i].p, world.evaders[j].p)
          for i in range(world.config.n_pursuers) if alloc[i, j]]
    return joint_capture_prob(qs)


def effectiveness(alloc: np.ndarray, world: WorldState) -> float:
    """Sum over active evaders of joint capture probability times the
    evader's speed class."""
    total = 0.0
    for j in world.active_evaders():
        total += column_capture_prob(alloc, world, j) * world.config.evader_speed(j)
    return total


def alloc_reward(e_prev: float, e_new: float, e_final: float | None,
                 n_pursuers: int, omega1: float) -> float:
    """Blend of the per-step effectiveness gain and the per-pursuer share of
    the finished round's effectiveness (zero while the round is open)."""
    local = e_new - e_prev
    global_part = 0.0 if e_final is None else e_final / n_pursuers
    return omega1 * local + (1.0 - omega1) * global_part


def encode_candidate(world: WorldState, i: int, j: int) -> np.ndarray:
    cfg = world.config
    p = world.pursuers[i]
    e = world.evaders[j]
    qbar = column_capture_prob(world.allocation, world, j)
    assigned = float(world.allocation[:, j].sum()) / cfg.n_pursuers
    return np.array([
        (e.p[0] - p.p[0]) / cfg.d1,
        (e.p[1] - p.p[1]) / cfg.d1,
        e.v[0] - p.v[0],
        e.v[1] - p.v[1],
        cfg.pursuer_capture_radius(i),
        cfg.pursuer_vmax,
        cfg.evader_speed(j),
        qbar,
        assigned,
    ])


def encode_candidates(world: WorldState, i: int) -> tuple[list[int], np.ndarray]:
    """Feature rows for every active evader as a candidate target of
    pursuer i. Raises RoundComplete when no evader is in play."""
    active = world.active_evaders()
    if not active:
        raise RoundComplete()
    rows = np.stack([encode_candidate(world, i, j) for j in active])
    return active, rows


@dataclass
class UpperTransition:
    chosen: np.ndarray               # encoding of the picked candidate
    reward: float
    next_candidates: np.ndarray | None   # candidate rows at the next decision
    terminal: bool
    summary: np.ndarray | None = None       # pooled state at decision time
    next_summary: np.ndarray | None = None  # pooled state at the next decision
    candidates: np.ndarray | None = None    # all rows at decision time


def spread_choice(rows: np.ndarray) -> int:
    """Row index of the nearest candidate that no pursuer holds yet this
    round, falling back to the nearest overall: the spreading teacher over
    candidate encodings (column 8 is the assigned share, columns 0-1 the
    normalized offset)."""
    d = np.hypot(rows[:, 0], rows[:, 1])
    free = np.flatnonzero(rows[:, 8] == 0)
    pool = free if free.size else np.arange(len(rows))
    return int(pool[np.argmin(d[pool])])


class AllocationLearner:
    """Q-network over candidate encodings with a slow-moving target copy."""

    def __init__(self, lr=1e-4, gamma=0.95, zeta=1e-2, batch_size=120,
                 buffer_capacity=50_000, hidden=(128, 128), seed=0,
                 warmup=0):
        rng = np.random.default_rng(seed)
        self.qnet = Mlp([ENCODING_WIDTH, *hidden, 1], head="linear", rng=rng)
        self.target = self.qnet.copy()
        self.adam = Adam(self.qnet.parameters(), lr=lr)
        self.buffer = ReplayBuffer(buffer_capacity, seed=seed + 1)
        self.gamma = gamma
        self.zeta = zeta
        self.batch_size = batch_size
        self.warmup = warmup
        self.update_count = 0

    def q_values(self, rows: np.ndarray, target=False) -> np.ndarray:
        net = self.target if target else self.qnet
        return net.forward(rows, cache=False)[:, 0]

    def select_target(self, world: WorldState, i: int, eps: float,
                      rng: np.random.Generator) -> int:
        """Epsilon-greedy pick of an evader index for pursuer i; greedy ties
        break toward the lowest index."""
        active, rows = encode_candidates(world, i)
        if eps > 0 and rng.random() < eps:
            return active[int(rng.integers(len(active)))]
        q = self.q_values(rows)
        return active[int(np.argmax(q))]

    def greedy_candidate(self, rows: np.ndarray) -> int:
        return int(np.argmax(self.q_values(rows)))

    def update(self, batch: list[UpperTransition] | None = None) -> float | None:
        """One squared-error step toward r + gamma * max target-Q, or -- for
        the first ``warmup`` updates -- one imitation step toward the
        spreading teacher. Returns the batch loss, or None when the buffer
        is empty."""
        if batch is None:
            if len(self.buffer) == 0:
                return None
            batch = self.buffer.sample(self.batch_size)
        self.update_count += 1
        if self.update_count <= self.warmup:
            return self.imitation_update(batch)
        ys = np.empty(len(batch))
        for k, tr in enumerate(batch):
            if tr.terminal or tr.next_candidates is None:
                ys[k] = tr.reward
            else:
                ys[k] = tr.reward + self.gamma * float(
                    np.max(self.q_values(tr.next_candidates, target=True)))
        rows = np.stack([tr.chosen for tr in batch])
        q = self.qnet.forward(rows)[:, 0]
        err = q - ys
        loss = float(np.mean(err ** 2))
        grad_out = (2.0 * err / len(batch))[:, None]
        grads, _ = self.qnet.backward(grad_out)
        self.adam.step(self.qnet.parameters(), grads)
        soft_update(self.target.parameters(), self.qnet.parameters(), self.zeta)
        return loss

    def imitation_update(self, batch: list[UpperTransition]) -> float | None:
        """Cross-entropy of the softmax over each decision's candidate
        Q-values against the spreading teacher's pick. An immature Q-net's
        own bootstrap targets are noise; while warming up, the greedy
        argmax is regressed onto the teacher instead, so the deployed
        allocator covers every evader from the start and Q-learning later
        refines a working policy."""
        total = 0.0
        acc = None
        n = 0
        for tr in batch:
            rows = tr.candidates
            if rows is None or len(rows) < 2:
                continue
            q = self.qnet.forward(rows)[:, 0]
            z = q - q.max()
            p = np.exp(z)
            p /= p.sum()
            t = spread_choice(rows)
            total += -math.log(max(float(p[t]), 1e-12))
            g = p.copy()
            g[t] -= 1.0
            grads, _ = self.qnet.backward(g[:, None])
            if acc is None:
                acc = [gr.copy() for gr in grads]
            else:
                for a, gr in zip(acc, grads):
                    a += gr
            n += 1
        if n == 0:
            return None
        for a in acc:
            a /= n
        self.adam.step(self.qnet.parameters(), acc)
        soft_update(self.target.parameters(), self.qnet.parameters(), self.zeta)
        return total / n


def run_allocation_round(world: WorldState, choose) -> np.ndarray:
    """Clear the allocation matrix and let each unfrozen pursuer pick in
    ascending index order. ``choose(world, i)`` returns an evader index."""
    world.allocation = np.zeros_like(world.allocation)
    for i in world.active_pursuers():
        try:
            j = choose(world, i)
        except RoundComplete:
            break
        world.allocation[i, j] = 1
    return world.allocation


def greedy_pairwise_choose(world: WorldState, i: int) -> int:
    """Fallback allocator: highest single capture probability."""
    active = world.active_evaders()
    if not active:
        raise RoundComplete()
    qs = [capture_prob(world.config.pursuer_capture_radius(i),
                       world.pursuers[i].p, world.evaders[j].p) for j in active]
    return active[int(np.argmax(qs))]


def nearest_unassigned_choose(world: WorldState, i: int) -> int:
    """Spreading allocator: nearest active evader that no pursuer holds yet
    this round, falling back to the nearest overall once all are covered."""
    active = world.active_evaders()
    if not active:
        raise RoundComplete()
    free = [j for j in active if not world.allocation[:, j].any()]
    pool = free or active
    ds = [np.linalg.norm(world.pursuers[i].p - world.evaders[j].p)
          for j in pool]
    return pool[int(np.argmin(ds))]


def random_choose(world: WorldState, i: int, rng: np.random.Generator) -> int:
    active = world.active_evaders()
    if not active:
        raise RoundComplete()
    return active[int(rng.integers(len(active)))]
