"""Deterministic continuous pursuit-evasion arena.

Positions live in the rectangle |x| <= d1/2, |y| <= d2/2. Pursuers move under
first-order dynamics from externally supplied (speed, heading) actions; evaders
follow a potential-field policy toward the target point; obstacles drift and
re-randomize their velocity on a fixed interval. Capture freezes the pursuer
and the evader involved.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ArenaConfig

START_BAND_WIDTH = 5.0
START_MARGIN_Y = 1.0
REPULSION_EPS = 1e-6
REPULSION_CAP = 1e3
PLACEMENT_RETRIES = 1000


class InfeasibleInstanceError(RuntimeError):
    """Raised when non-overlapping placement fails after bounded retries."""


@dataclass
class AgentState:
    p: np.ndarray
    v: np.ndarray
    frozen: bool = False
    reached_target: bool = False


@dataclass
class ObstacleState:
    p: np.ndarray
    v: np.ndarray
    steps_until_redirect: int


@dataclass
class StepEvents:
    captures: list = field(default_factory=list)   # (pursuer, evader) pairs
    reaches: list = field(default_factory=list)    # evader indices
    clamped: list = field(default_factory=list)    # ("pursuer"|"evader", idx)
    collisions: int = 0


@dataclass
class WorldState:
    config: ArenaConfig
    t: int
    pursuers: list          # list[AgentState]
    evaders: list           # list[AgentState]
    obstacles: list         # list[ObstacleState]
    allocation: np.ndarray  # binary I x J matrix
    captures: list          # list[(pursuer, evader)]
    rng: np.random.Generator

    def active_evaders(self):
        """Evaders still in play: not captured and not at the target."""
        return [j for j, e in enumerate(self.evaders)
                if not e.frozen and not e.reached_target]

    def active_pursuers(self):
        return [i for i, p in enumerate(self.pursuers) if not p.frozen]

    def captured_count(self) -> int:
        return len(self.captures)

    def reached_count(self) -> int:
        return sum(1 for e in self.evaders if e.reached_target)


@dataclass
class EpisodeOutcome:
    winner: str   # "pursuers" | "evaders" | "none-yet"
    reason: str   # "half-captured" | "timeout" | "half-reached" | ""
    captured_count: int
    reached_count: int


def _clamp_to_arena(p: np.ndarray, cfg: ArenaConfig) -> tuple[np.ndarray, bool]:
    q = np.clip(p, [-cfg.d1 / 2, -cfg.d2 / 2], [cfg.d1 / 2, cfg.d2 / 2])
    return q, bool(np.any(q != p))


def generate_instance(config: ArenaConfig, seed: int) -> WorldState:
    """Place agents in their start bands and obstacles in the mid-zone.

    Identical (config, seed) produce a bit-identical world. Ability classes
    are assigned round-robin, so e.g. ten pursuers cover each capture-radius
    class twice.
    """
    rng = np.random.default_rng((config.seed, seed))
    half1, half2 = config.d1 / 2, config.d2 / 2
    e_center = -half1 + START_BAND_WIDTH / 2
    p_center = e_center + config.d3
    y_lo, y_hi = -half2 + START_MARGIN_Y, half2 - START_MARGIN_Y

    def band(center):
        lo = max(center - START_BAND_WIDTH / 2, -half1)
        hi = min(center + START_BAND_WIDTH / 2, half1)
        return lo, hi

    def place(n, x_lo, x_hi, min_sep, taken):
        pts = []
        for _ in range(n):
            for _ in range(PLACEMENT_RETRIES):
                cand = np.array([rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)])
                if all(np.linalg.norm(cand - q) >= min_sep for q in taken + pts):
                    pts.append(cand)
                    break
            else:
                raise InfeasibleInstanceError(
                    f"could not place {n} entities in x=[{x_lo:.1f},{x_hi:.1f}]")
        return pts

    p_lo, p_hi = band(p_center)
    e_lo, e_hi = band(e_center)
    pursuer_pts = place(config.n_pursuers, p_lo, p_hi, 2 * config.agent_radius, [])
    evader_pts = place(config.n_evaders, e_lo, e_hi, 2 * config.agent_radius, [])

    mid_lo, mid_hi = e_hi + 1.0, p_lo - 1.0
    if mid_hi <= mid_lo:
        mid_lo, mid_hi = -half1, half1
    agent_pts = pursuer_pts + evader_pts
    obstacle_pts = place(config.n_obstacles, mid_lo, mid_hi,
                         config.obstacle_radius + config.agent_radius, agent_pts)

    obstacles = []
    for pt in obstacle_pts:
        speed = rng.uniform(*config.obstacle_speed_range)
        heading = rng.uniform(-math.pi, math.pi)
        obstacles.append(ObstacleState(
            p=pt,
            v=speed * np.array([math.cos(heading), math.sin(heading)]),
            steps_until_redirect=config.obstacle_redirect_interval,
        ))

    return WorldState(
        config=config,
        t=0,
        pursuers=[AgentState(p=pt, v=np.zeros(2)) for pt in pursuer_pts],
        evaders=[AgentState(p=pt, v=np.zeros(2)) for pt in evader_pts],
        obstacles=obstacles,
        allocation=np.zeros((config.n_pursuers, config.n_evaders), dtype=np.int8),
        captures=[],
        rng=rng,
    )


def apply_pursuer_action(state: WorldState, i: int,
                         action: tuple[float, float],
                         events: StepEvents | None = None) -> np.ndarray:
    """First-order position update for pursuer i; returns the new position."""
    cfg = state.config
    agent = state.pursuers[i]
    if agent.frozen:
        return agent.p.copy()
    speed, heading = float(action[0]), float(action[1])
    clamped_speed = min(max(speed, 0.0), cfg.pursuer_vmax)
    wrapped = (heading + math.pi) % (2 * math.pi) - math.pi
    if events is not None and (clamped_speed != speed or wrapped != heading):
        events.clamped.append(("pursuer-action", i))
    v = clamped_speed * np.array([math.cos(wrapped), math.sin(wrapped)])
    new_p, hit_wall = _clamp_to_arena(agent.p + cfg.dt * v, cfg)
    if events is not None and hit_wall:
        events.clamped.append(("pursuer", i))
    return new_p


def apf_evader_velocity(state: WorldState, j: int) -> np.ndarray:
    """Potential-field velocity: unit attraction to the target plus
    inverse-square repulsion from every other entity, capped at the class
    speed limit."""
    cfg = state.config
    evader = state.evaders[j]
    target = np.asarray(cfg.target_point)
    to_target = target - evader.p
    dist = np.linalg.norm(to_target)
    v = to_target / dist if dist > REPULSION_EPS else np.zeros(2)

    others = [a.p for a in state.pursuers]
    others += [e.p for k, e in enumerate(state.evaders) if k != j]
    others += [o.p for o in state.obstacles]
    for pw in others:
        diff = evader.p - pw
        d = np.linalg.norm(diff)
        if d < REPULSION_EPS:
            # coincident entities: push in a fixed direction with capped force
            v = v + np.array([REPULSION_CAP, 0.0])
        else:
            mag = min(1.0 / (d * d), REPULSION_CAP)
            v = v + diff / d * mag

    vmax = cfg.evader_speed(j)
    norm = np.linalg.norm(v)
    if norm > vmax:
        v = v * (vmax / norm)
    return v


def step_env(state: WorldState, pursuer_actions: dict) -> tuple["WorldState", StepEvents]:
    """Advance the world one step. Mutates and returns the same WorldState.

    pursuer_actions maps pursuer index -> (speed, heading) for every unfrozen
    pursuer. Order of phases: evader velocities, integration, obstacle motion,
    capture matching, target-reach check, clock.
    """
    cfg = state.config
    events = StepEvents()

    evader_v = {}
    for j, e in enumerate(state.evaders):
        if not e.frozen and not e.reached_target:
            evader_v[j] = apf_evader_velocity(state, j)

    for i, p in enumerate(state.pursuers):
        if p.frozen:
            continue
        action = pursuer_actions.get(i, (0.0, 0.0))
        new_p = apply_pursuer_action(state, i, action, events)
        p.v = (new_p - p.p) / cfg.dt
        p.p = new_p

    for j, v in evader_v.items():
        e = state.evaders[j]
        new_p, hit = _clamp_to_arena(e.p + cfg.dt * v, cfg)
        if hit:
            events.clamped.append(("evader", j))
        e.v = (new_p - e.p) / cfg.dt
        e.p = new_p

    for o in state.obstacles:
        o.steps_until_redirect -= 1
        if o.steps_until_redirect <= 0:
            speed = state.rng.uniform(*cfg.obstacle_speed_range)
            heading = state.rng.uniform(-math.pi, math.pi)
            o.v = speed * np.array([math.cos(heading), math.sin(heading)])
            o.steps_until_redirect = cfg.obstacle_redirect_interval
        new_p = o.p + cfg.dt * o.v
        # reflect heading at the walls so obstacles stay inside
        if abs(new_p[0]) > cfg.d1 / 2:
            o.v[0] = -o.v[0]
        if abs(new_p[1]) > cfg.d2 / 2:
            o.v[1] = -o.v[1]
        o.p, _ = _clamp_to_arena(o.p + cfg.dt * o.v, cfg)

    # collision events (contact is counted, never resolved)
    for i, p in enumerate(state.pursuers):
        for o in state.obstacles:
            if np.linalg.norm(p.p - o.p) < cfg.agent_radius + cfg.obstacle_radius:
                events.collisions += 1
        for k in range(i + 1, len(state.pursuers)):
            if np.linalg.norm(p.p - state.pursuers[k].p) < 2 * cfg.agent_radius:
                events.collisions += 1

    # capture matching: smallest distance first, then lowest evader index
    candidates = []
    for i, p in enumerate(state.pursuers):
        if p.frozen:
            continue
        rc = cfg.pursuer_capture_radius(i)
        for j, e in enumerate(state.evaders):
            if e.frozen or e.reached_target:
                continue
            d = float(np.linalg.norm(p.p - e.p))
            if d < rc:
                candidates.append((d, j, i))
    candidates.sort()
    used_p, used_e = set(), set()
    for d, j, i in candidates:
        if i in used_p or j in used_e:
            continue
        used_p.add(i)
        used_e.add(j)
        state.pursuers[i].frozen = True
        state.pursuers[i].v = np.zeros(2)
        state.evaders[j].frozen = True
        state.evaders[j].v = np.zeros(2)
        state.captures.append((i, j))
        events.captures.append((i, j))

    target = np.asarray(cfg.target_point)
    for j, e in enumerate(state.evaders):
        if e.frozen or e.reached_target:
            continue
        if np.linalg.norm(e.p - target) <= cfg.target_reach_radius:
            e.reached_target = True
            e.v = np.zeros(2)
            events.reaches.append(j)

    state.t += 1
    return state, events


def check_termination(state: WorldState) -> EpisodeOutcome:
    cfg = state.config
    captured = state.captured_count()
    reached = state.reached_count()
    half = cfg.n_evaders / 2
    if captured > half:
        return EpisodeOutcome("pursuers", "half-captured", captured, reached)
    if reached > half:
        return EpisodeOutcome("evaders", "half-reached", captured, reached)
    if state.t >= cfg.episode_len:
        return EpisodeOutcome("pursuers", "timeout", captured, reached)
    return EpisodeOutcome("none-yet", "", captured, reached)


def trajectory_record(state: WorldState) -> dict:
    """One JSONL record of the current world snapshot."""
    def agents(entries):
        return [
            {"id": idx, "x": float(a.p[0]), "y": float(a.p[1]),
             "vx": float(a.v[0]), "vy": float(a.v[1]), "frozen": bool(a.frozen)}
            for idx, a in enumerate(entries)
        ]
    return {
        "t": state.t,
        "pursuers": agents(state.pursuers),
        "evaders": agents(state.evaders),
        "obstacles": [
            {"id": k, "x": float(o.p[0]), "y": float(o.p[1]),
             "vx": float(o.v[0]), "vy": float(o.v[1])}
            for k, o in enumerate(state.obstacles)
        ],
        "captures": [[int(i), int(j)] for i, j in state.captures],
    }


def write_trajectory(records: list[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
