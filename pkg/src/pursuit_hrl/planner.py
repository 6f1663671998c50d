"""Per-pursuer path planning: local observations, shaped rewards, squashed
continuous actions, and the multi-agent actor-critic learner (centralized
critics, decentralized actors).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ArenaConfig, TrainConfig
from .nets import Adam, Mlp, ReplayBuffer, soft_update
from .sim import WorldState

OBS_WIDTH = 14
ACTION_WIDTH = 2


class UnassignedError(RuntimeError):
    """Observation requested for a pursuer with no allocated target."""


def assigned_evader(world: WorldState, i: int) -> int:
    row = np.flatnonzero(world.allocation[i])
    if len(row) == 0:
        raise UnassignedError(f"pursuer {i} has no target; run allocation first")
    return int(row[0])


def _nearest(p: np.ndarray, positions: list[tuple[int, np.ndarray]]):
    best = None
    best_d = math.inf
    for idx, q in positions:
        d = float(np.linalg.norm(p - q))
        if d < best_d:
            best, best_d = idx, d
    return best, best_d


def build_observation(world: WorldState, i: int) -> np.ndarray:
    """14 features: assigned evader, nearest unfrozen neighbor, nearest
    obstacle (each as relative position/velocity), plus own velocity.
    Distances are normalized by the arena length."""
    cfg = world.config
    me = world.pursuers[i]
    j = assigned_evader(world, i)
    ev = world.evaders[j]

    neighbors = [(k, world.pursuers[k].p) for k in range(cfg.n_pursuers)
                 if k != i and not world.pursuers[k].frozen]
    n_idx, _ = _nearest(me.p, neighbors)
    if n_idx is None:
        n_rel_p = np.zeros(2)
        n_rel_v = np.zeros(2)
    else:
        nb = world.pursuers[n_idx]
        n_rel_p = (nb.p - me.p) / cfg.d1
        n_rel_v = nb.v - me.v

    o_idx, _ = _nearest(me.p, [(k, o.p) for k, o in enumerate(world.obstacles)])
    if o_idx is None:
        o_rel_p = np.zeros(2)
        o_rel_v = np.zeros(2)
    else:
        ob = world.obstacles[o_idx]
        o_rel_p = (ob.p - me.p) / cfg.d1
        o_rel_v = ob.v - me.v

    return np.concatenate([
        (ev.p - me.p) / cfg.d1,
        ev.v - me.v,
        n_rel_p,
        n_rel_v,
        o_rel_p,
        o_rel_v,
        me.v,
    ])


def intrinsic_reward(distance: float, capture_radius: float, bonus: float) -> float:
    r = -distance / capture_radius
    if distance < capture_radius:
        r += bonus
    return r


def avoidance_reward(obstacle_dist: float | None, neighbor_dist: float | None,
                     agent_radius: float, obstacle_radius: float,
                     threat_margin: float, obstacle_penalty: float,
                     neighbor_penalty: float) -> float:
    """Zero outside the threat zones; inside, a penalty that deepens linearly
    as the separation closes."""
    total = 0.0
    zone_o = agent_radius + obstacle_radius + threat_margin
    if obstacle_dist is not None and obstacle_dist < zone_o:
        total += (obstacle_dist - zone_o) / zone_o - obstacle_penalty
    zone_n = 2 * agent_radius + threat_margin
    if neighbor_dist is not None and 2 * agent_radius < neighbor_dist < zone_n:
        total += (neighbor_dist - zone_n) / zone_n - neighbor_penalty
    return total


def path_reward(r_int: float, r_avo: float, omega2: float) -> float:
    return omega2 * r_int + (1.0 - omega2) * r_avo


def pursuer_path_reward(world: WorldState, i: int, train: TrainConfig) -> float:
    cfg = world.config
    me = world.pursuers[i]
    j = assigned_evader(world, i)
    d_ev = float(np.linalg.norm(me.p - world.evaders[j].p))
    r_int = intrinsic_reward(d_ev, cfg.pursuer_capture_radius(i),
                             train.reward_capture_bonus)
    _, d_obs = _nearest(me.p, [(k, o.p) for k, o in enumerate(world.obstacles)])
    _, d_nbr = _nearest(me.p, [(k, world.pursuers[k].p)
                               for k in range(cfg.n_pursuers)
                               if k != i and not world.pursuers[k].frozen])
    r_avo = avoidance_reward(
        None if math.isinf(d_obs) else d_obs,
        None if math.isinf(d_nbr) else d_nbr,
        cfg.agent_radius, cfg.obstacle_radius, train.threat_margin,
        train.reward_obstacle_penalty, train.reward_neighbor_penalty)
    return path_reward(r_int, r_avo, train.omega2)


def squash_action(u: np.ndarray, vmax: float) -> tuple[float, float]:
    """Map unbounded planner outputs to (speed, heading) via tanh."""
    s = np.tanh(u)
    speed = (s[0] + 1.0) / 2.0 * vmax
    heading = s[1] * math.pi
    return float(speed), float(heading)


# The guidance teacher: steer toward a block point projected ahead of the
# assigned evader along its current velocity. Because the evader's potential
# field always points at its goal, standing on that ray blocks its path; the
# proportional speed term parks the pursuer once the block point is reached.
# During the actor warmup the planner networks are regressed onto this
# teacher over their own replayed observations; afterwards they follow the
# critic gradient.
GUIDANCE_LEAD = 5.0  # seconds of velocity lead when projecting the block point
GUIDANCE_GAIN = 0.3  # proportional gain from block-point distance to speed

# Teacher targets stay strictly inside (-1, 1) so the actors never chase
# saturated tanh outputs.
_TARGET_CLIP = 0.995


def guidance_targets(obs: np.ndarray, vmax: float, d1: float) -> np.ndarray:
    """Squashed-action targets of the guidance teacher for a batch of
    observations: column 0 encodes speed, column 1 heading, both in the
    actors' tanh output space."""
    ev_rel = obs[:, 0:2] * d1
    ev_v = obs[:, 2:4] + obs[:, 12:14]
    aim = ev_rel + GUIDANCE_LEAD * ev_v
    dist = np.linalg.norm(aim, axis=1)
    speed = np.minimum(vmax, GUIDANCE_GAIN * dist)
    heading = np.arctan2(aim[:, 1], aim[:, 0])
    s = np.stack([2.0 * speed / vmax - 1.0, heading / math.pi], axis=1)
    return np.clip(s, -_TARGET_CLIP, _TARGET_CLIP)


def guidance_action(obs: np.ndarray, vmax: float, d1: float) -> tuple[float, float]:
    """(speed, heading) of the guidance teacher for one observation."""
    s = guidance_targets(obs[None, :], vmax, d1)[0]
    return (s[0] + 1.0) / 2.0 * vmax, float(s[1]) * math.pi


def residual_action(obs: np.ndarray, squashed: np.ndarray, vmax: float,
                    d1: float) -> tuple[float, float]:
    """Environment action of the residual policy: the guidance base plus the
    actor's bounded correction (speed shifted by up to vmax/2, heading
    rotated by up to pi, so the reachable action set stays complete).

    The base absorbs the discontinuities of near-optimal play -- the heading
    seam at +-pi of the squashed action encoding and the sign flips of the
    block-point bearing -- which a plain network head cannot represent: the
    optimal RESIDUAL is smooth (identically zero at the teacher), while the
    optimal raw action jumps."""
    g_speed, g_heading = guidance_action(obs, vmax, d1)
    speed = float(np.clip(g_speed + squashed[0] * vmax / 2.0, 0.0, vmax))
    heading = (g_heading + float(squashed[1]) * math.pi + math.pi) \
        % (2.0 * math.pi) - math.pi
    return speed, heading


@dataclass
class LowerTransition:
    obs: np.ndarray       # (I, 14)
    actions: np.ndarray   # (I, 2) squashed to [-1, 1]
    rewards: np.ndarray   # (I,) discounted sum over the transition's window
    next_obs: np.ndarray  # (I, 14)
    done: bool
    mask: np.ndarray      # (I,) 1 where the pursuer was active this step
    steps: int = 1        # window length; bootstrap uses gamma**steps


class NStepAssembler:
    """Turns the per-step joint transition stream into overlapping n-step
    transitions: reward is the discounted sum over the window and the
    bootstrap state is the window's final next observation. Multi-step
    targets propagate the long-horizon value of holding a position many
    times faster than one-step TD, which one-step critics misread as
    "approach the evader at all costs"."""

    def __init__(self, n: int, gamma: float):
        if n < 1:
            raise ValueError("n-step window must be >= 1")
        self.n = n
        self.gamma = gamma
        self.window: list[LowerTransition] = []

    def _emit(self, k: int) -> LowerTransition:
        first = self.window[0]
        last = self.window[k - 1]
        rewards = np.zeros_like(first.rewards)
        g = 1.0
        for tr in self.window[:k]:
            rewards = rewards + g * tr.rewards
            g *= self.gamma
        return LowerTransition(
            obs=first.obs, actions=first.actions, rewards=rewards,
            next_obs=last.next_obs, done=last.done, mask=first.mask, steps=k)

    def push(self, tr: LowerTransition) -> list[LowerTransition]:
        """Add one raw transition; returns the emitted n-step transition once
        the window is full."""
        self.window.append(tr)
        if len(self.window) >= self.n:
            out = [self._emit(self.n)]
            self.window.pop(0)
            return out
        return []

    def flush(self) -> list[LowerTransition]:
        """Emit the remaining shorter windows at an episode boundary."""
        out = []
        while self.window:
            out.append(self._emit(len(self.window)))
            self.window.pop(0)
        return out


class ValueNorm:
    """Running mean/std of value targets with bias-corrected streaming
    estimates. Critics are trained in this normalized space so that the
    per-parameter step size of the optimizer is not dwarfed by the raw
    magnitude of discounted returns."""

    def __init__(self, beta: float = 1e-2, floor: float = 1e-2):
        self.beta = beta
        self.floor = floor
        self.m1 = 0.0
        self.m2 = 0.0
        self.count = 0

    @property
    def mean(self) -> float:
        if self.count == 0:
            return 0.0
        return self.m1 / (1.0 - (1.0 - self.beta) ** self.count)

    @property
    def std(self) -> float:
        if self.count == 0:
            return 1.0
        corr = 1.0 - (1.0 - self.beta) ** self.count
        var = self.m2 / corr - (self.m1 / corr) ** 2
        return math.sqrt(max(var, self.floor ** 2))

    def update(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        self.count += 1
        self.m1 = (1.0 - self.beta) * self.m1 + self.beta * float(values.mean())
        self.m2 = (1.0 - self.beta) * self.m2 + self.beta * float((values ** 2).mean())

    def state(self) -> np.ndarray:
        return np.array([self.m1, self.m2, float(self.count)])

    def load_state(self, arr) -> None:
        self.m1, self.m2 = float(arr[0]), float(arr[1])
        self.count = int(arr[2])


def rescale_head(net: Mlp, old_mean: float, old_std: float,
                 new_mean: float, new_std: float) -> None:
    """Rewrite the output layer so real-space predictions are preserved when
    the normalization statistics move."""
    net.weights[-1] *= old_std / new_std
    net.biases[-1] = (old_std * net.biases[-1] + old_mean - new_mean) / new_std


class PlannerLearner:
    """One actor and one centralized critic per pursuer, with target copies.

    Critics predict normalized values; the running target statistics live in
    ``value_norms`` and the output heads are rescaled whenever they move."""

    def __init__(self, n_agents: int, lr=1e-3, gamma=0.99, zeta=1e-2,
                 batch_size=1256, buffer_capacity=500_000, hidden=(64, 64),
                 seed=0, policy_delay=1, actor_warmup=0,
                 vmax=0.5, d1=40.0):
        self.n_agents = n_agents
        self.gamma = gamma
        self.zeta = zeta
        self.batch_size = batch_size
        self.policy_delay = policy_delay
        self.actor_warmup = actor_warmup
        self.vmax = vmax
        self.d1 = d1
        self.update_count = 0
        joint = n_agents * (OBS_WIDTH + ACTION_WIDTH)
        self.actors, self.critics = [], []
        self.actor_targets, self.critic_targets = [], []
        self.actor_adams, self.critic_adams = [], []
        for a in range(n_agents):
            rng = np.random.default_rng((seed, a))
            actor = Mlp([OBS_WIDTH, *hidden, ACTION_WIDTH], head="linear",
                        rng=rng, init_scale=0.1)
            critic = Mlp([joint, *hidden, 1], head="linear", rng=rng)
            self.actors.append(actor)
            self.critics.append(critic)
            self.actor_targets.append(actor.copy())
            self.critic_targets.append(critic.copy())
            self.actor_adams.append(Adam(actor.parameters(), lr=lr))
            self.critic_adams.append(Adam(critic.parameters(), lr=lr))
        self.value_norms = [ValueNorm() for _ in range(n_agents)]
        self.buffer = ReplayBuffer(buffer_capacity, seed=(seed, 12345))
        self.noise_rng = np.random.default_rng((seed, 777))

    def act(self, agent: int, obs: np.ndarray, noise_scale: float,
            vmax: float) -> tuple[tuple[float, float], np.ndarray]:
        """Returns ((speed, heading), squashed_residual). Gaussian exploration
        noise is added before squashing; zero noise is fully deterministic."""
        u = self.actors[agent].forward(obs[None, :], cache=False)[0]
        if noise_scale > 0:
            u = u + self.noise_rng.normal(scale=noise_scale, size=u.shape)
        s = np.tanh(u)
        return residual_action(obs, s, vmax, self.d1), s

    def _joint_input(self, obs, actions):
        b = obs.shape[0]
        return np.concatenate(
            [obs.reshape(b, -1), actions.reshape(b, -1)], axis=1)

    def update(self, batch: list[LowerTransition] | None = None):
        """One actor-critic step per agent; no-op while the buffer is smaller
        than the batch size. Returns (critic_losses, actor_losses) or None."""
        if batch is None:
            if len(self.buffer) < self.batch_size:
                return None
            batch = self.buffer.sample(self.batch_size)
        obs = np.stack([tr.obs for tr in batch])          # (B, I, 14)
        actions = np.stack([tr.actions for tr in batch])  # (B, I, 2)
        rewards = np.stack([tr.rewards for tr in batch])  # (B, I)
        next_obs = np.stack([tr.next_obs for tr in batch])
        done = np.array([tr.done for tr in batch], dtype=float)
        mask = np.stack([tr.mask for tr in batch])        # (B, I)
        discount = self.gamma ** np.array([tr.steps for tr in batch],
                                          dtype=float)
        b = obs.shape[0]
        self.update_count += 1
        # During warmup the actors regress onto the guidance teacher while
        # the critics learn values; only afterwards do they follow the critic
        # gradient (and then only every policy_delay-th update). An immature
        # critic's gradient is noise, and following it walks the actors into
        # behaviors the remaining training budget cannot recover from.
        imitate = self.update_count <= self.actor_warmup
        train_actor = (not imitate
                       and self.update_count % self.policy_delay == 0)

        next_actions = np.empty_like(actions)
        for a in range(self.n_agents):
            raw = self.actor_targets[a].forward(next_obs[:, a, :], cache=False)
            next_actions[:, a, :] = np.tanh(raw)
        next_joint = self._joint_input(next_obs, next_actions)
        joint = self._joint_input(obs, actions)

        critic_losses, actor_losses = [], []
        for a in range(self.n_agents):
            w = mask[:, a]
            if w.sum() == 0:
                critic_losses.append(0.0)
                actor_losses.append(0.0)
                continue
            vn = self.value_norms[a]
            q_next = vn.mean + vn.std * \
                self.critic_targets[a].forward(next_joint, cache=False)[:, 0]
            y = rewards[:, a] + discount * (1.0 - done) * q_next
            old_mean, old_std = vn.mean, vn.std
            vn.update(y[w > 0])
            for net in (self.critics[a], self.critic_targets[a]):
                rescale_head(net, old_mean, old_std, vn.mean, vn.std)
            y_norm = (y - vn.mean) / vn.std
            loss, grads = self.critic_grads(a, joint, y_norm, w)
            self.critic_adams[a].step(self.critics[a].parameters(), grads)
            critic_losses.append(loss)

            soft_update(self.critic_targets[a].parameters(),
                        self.critics[a].parameters(), self.zeta)
            if imitate:
                a_loss, a_grads = self.imitation_grads(a, obs, w)
            elif train_actor:
                a_loss, a_grads = self.actor_grads(a, obs, actions, w)
            else:
                actor_losses.append(0.0)
                continue
            actor_losses.append(a_loss)
            self.actor_adams[a].step(self.actors[a].parameters(), a_grads)
            soft_update(self.actor_targets[a].parameters(),
                        self.actors[a].parameters(), self.zeta)
        return critic_losses, actor_losses

    def critic_grads(self, a: int, joint: np.ndarray, y: np.ndarray,
                     w: np.ndarray):
        """Masked squared-error loss of critic a and its parameter grads."""
        denom = max(float(w.sum()), 1.0)
        q = self.critics[a].forward(joint)[:, 0]
        err = (q - y) * w
        loss = float(np.sum(err ** 2) / denom)
        grads, _ = self.critics[a].backward((2.0 * err / denom)[:, None])
        return loss, grads

    def imitation_grads(self, a: int, obs: np.ndarray, w: np.ndarray):
        """Masked squared error between agent a's squashed residual and the
        guidance teacher (which is exactly the zero residual) on the same
        observations, with its actor grads."""
        denom = max(float(w.sum()), 1.0)
        raw = self.actors[a].forward(obs[:, a, :])
        own = np.tanh(raw)
        loss = float(np.sum((own ** 2) * w[:, None]) / denom)
        g_raw = (2.0 * own * w[:, None] / denom) * (1.0 - own ** 2)
        grads, _ = self.actors[a].backward(g_raw)
        return loss, grads

    def actor_grads(self, a: int, obs: np.ndarray, actions: np.ndarray,
                    w: np.ndarray):
        """Negated masked mean Q with agent a's own action substituted, and
        the gradient through the critic into the actor."""
        denom = max(float(w.sum()), 1.0)
        raw = self.actors[a].forward(obs[:, a, :])
        own = np.tanh(raw)
        mixed = actions.copy()
        mixed[:, a, :] = own
        joint_a = self._joint_input(obs, mixed)
        q_a = self.critics[a].forward(joint_a)[:, 0]
        loss = float(-np.sum(q_a * w) / denom)
        _, g_in = self.critics[a].backward((-w / denom)[:, None])
        start = self.n_agents * OBS_WIDTH + a * ACTION_WIDTH
        g_act = g_in[:, start:start + ACTION_WIDTH]
        g_raw = g_act * (1.0 - own ** 2)
        a_grads, _ = self.actors[a].backward(g_raw)
        return loss, a_grads
