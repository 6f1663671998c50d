import numpy as np
import pytest

from pursuit_hrl.config import ArenaConfig
from pursuit_hrl.sim import AgentState, ObstacleState, WorldState


def make_world(cfg: ArenaConfig, pursuer_pos, evader_pos, obstacle_pos=(),
               seed=0) -> WorldState:
    """Hand-placed world for unit tests; velocities start at zero."""
    assert len(pursuer_pos) == cfg.n_pursuers
    assert len(evader_pos) == cfg.n_evaders
    return WorldState(
        config=cfg,
        t=0,
        pursuers=[AgentState(p=np.array(p, dtype=float), v=np.zeros(2))
                  for p in pursuer_pos],
        evaders=[AgentState(p=np.array(p, dtype=float), v=np.zeros(2))
                 for p in evader_pos],
        obstacles=[ObstacleState(p=np.array(p, dtype=float), v=np.zeros(2),
                                 steps_until_redirect=cfg.obstacle_redirect_interval)
                   for p in obstacle_pos],
        allocation=np.zeros((cfg.n_pursuers, cfg.n_evaders), dtype=np.int8),
        captures=[],
        rng=np.random.default_rng(seed),
    )


@pytest.fixture
def cfg3v3():
    return ArenaConfig(n_pursuers=3, n_evaders=3, n_obstacles=2)
