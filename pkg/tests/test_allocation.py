import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pursuit_hrl import allocation, sim
from pursuit_hrl.allocation import (AllocationLearner, RoundComplete,
                                    UpperTransition, alloc_reward,
                                    capture_prob, effectiveness,
                                    encode_candidate, encode_candidates,
                                    greedy_pairwise_choose, joint_capture_prob,
                                    run_allocation_round)
from pursuit_hrl.config import ArenaConfig

from conftest import make_world


def test_capture_prob_examples():
    assert capture_prob(1.0, (0, 0), (1, 0)) == pytest.approx(0.5, abs=1e-12)
    assert capture_prob(0.7, (2, 3), (2, 3)) == pytest.approx(1.0, abs=1e-12)
    assert capture_prob(0.8, (0, 0), (3.2, 0)) == pytest.approx(0.2, abs=1e-12)


def test_joint_capture_prob_examples():
    assert joint_capture_prob([0.5, 0.5]) == pytest.approx(0.75, abs=1e-12)
    assert joint_capture_prob([]) == 0.0
    assert joint_capture_prob([1.0, 0.3]) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), max_size=6))
def test_joint_capture_prob_bounds(qs):
    q = joint_capture_prob(qs)
    assert 0.0 <= q <= 1.0
    if qs:
        assert q >= max(qs) - 1e-12


def _world_4v4(seed=0):
    cfg = ArenaConfig(n_pursuers=4, n_evaders=4, n_obstacles=0, seed=3)
    return sim.generate_instance(cfg, seed)


def _effectiveness_oracle(alloc, world):
    total = 0.0
    for j in world.active_evaders():
        prod = 1.0
        for i in range(world.config.n_pursuers):
            if alloc[i, j]:
                rc = world.config.pursuer_capture_radius(i)
                d = np.linalg.norm(world.pursuers[i].p - world.evaders[j].p)
                prod *= 1.0 - rc / (rc + d)
        total += (1.0 - prod) * world.config.evader_speed(j)
    return total


def test_effectiveness_zero_allocation():
    world = _world_4v4()
    assert effectiveness(np.zeros((4, 4), dtype=np.int8), world) == 0.0


def test_effectiveness_exhaustive_4x4():
    """Every one-target-per-pursuer allocation map on a 4v4 instance."""
    world = _world_4v4()
    for targets in itertools.product(range(4), repeat=4):
        alloc = np.zeros((4, 4), dtype=np.int8)
        for i, j in enumerate(targets):
            alloc[i, j] = 1
        got = effectiveness(alloc, world)
        want = _effectiveness_oracle(alloc, world)
        assert got == pytest.approx(want, abs=1e-9)


def test_effectiveness_skips_inactive_evaders():
    world = _world_4v4()
    alloc = np.eye(4, dtype=np.int8)
    full = effectiveness(alloc, world)
    world.evaders[2].frozen = True
    reduced = effectiveness(alloc, world)
    assert reduced < full


def test_alloc_reward_examples():
    # gain 0 -> 0.5 joint prob on an evader with vmax 0.8: local +0.4
    assert alloc_reward(0.0, 0.4, None, 10, 1.0) == pytest.approx(0.4)
    assert alloc_reward(1.3, 1.3, None, 10, 0.5) == 0.0
    assert alloc_reward(0.0, 0.0, 3.0, 10, 0.0) == pytest.approx(0.3)
    assert alloc_reward(0.0, 0.4, 3.0, 10, 0.5) == pytest.approx(0.35)


def test_local_reward_telescopes():
    world = _world_4v4()
    world.allocation = np.zeros((4, 4), dtype=np.int8)
    e_prev = 0.0
    gains = []
    for i in range(4):
        world.allocation[i, (i + 1) % 4] = 1
        e_new = effectiveness(world.allocation, world)
        gains.append(e_new - e_prev)
        e_prev = e_new
    assert sum(gains) == pytest.approx(e_prev, abs=1e-12)


def test_encoding_width_independent_of_size():
    small = sim.generate_instance(
        ArenaConfig(n_pursuers=3, n_evaders=3, n_obstacles=0), 0)
    big = sim.generate_instance(
        ArenaConfig(n_pursuers=20, n_evaders=20, n_obstacles=0), 0)
    _, rows_s = encode_candidates(small, 0)
    _, rows_b = encode_candidates(big, 0)
    assert rows_s.shape[1] == rows_b.shape[1] == allocation.ENCODING_WIDTH
    learner = AllocationLearner(seed=0)
    learner.q_values(rows_s)
    learner.q_values(rows_b)  # no shape errors at either size


def test_encoding_features():
    cfg = ArenaConfig(n_pursuers=2, n_evaders=2, n_obstacles=0)
    world = make_world(cfg, [(0, 0), (4, 0)], [(3, 4), (-10, 0)])
    world.allocation[1, 0] = 1
    row = encode_candidate(world, 0, 0)
    assert row[0] == pytest.approx(3 / 40) and row[1] == pytest.approx(4 / 40)
    assert row[4] == 0.6 and row[5] == 0.5 and row[6] == 0.6
    want_qbar = capture_prob(0.7, (4, 0), (3, 4))
    assert row[7] == pytest.approx(want_qbar)
    assert row[8] == pytest.approx(1 / 2)


def test_round_complete_signal():
    cfg = ArenaConfig(n_pursuers=1, n_evaders=1, n_obstacles=0)
    world = make_world(cfg, [(0, 0)], [(5, 5)])
    world.evaders[0].frozen = True
    with pytest.raises(RoundComplete):
        encode_candidates(world, 0)


def test_select_target_uniform_when_eps_one():
    world = _world_4v4()
    learner = AllocationLearner(seed=0)
    rng = np.random.default_rng(0)
    counts = np.zeros(4)
    for _ in range(4000):
        counts[learner.select_target(world, 0, 1.0, rng)] += 1
    assert np.all(counts > 800)  # roughly uniform over 4 evaders


def test_select_target_greedy_and_tie_break():
    world = _world_4v4()
    learner = AllocationLearner(seed=0)
    rng = np.random.default_rng(0)
    active, rows = encode_candidates(world, 0)
    q = learner.q_values(rows)
    want = active[int(np.argmax(q))]
    assert learner.select_target(world, 0, 0.0, rng) == want
    # constant net: all Q equal, tie broken toward the lowest index
    for w in learner.qnet.weights:
        w[:] = 0
    assert learner.select_target(world, 0, 0.0, rng) == active[0]


def test_select_target_argmax_shift_invariance():
    world = _world_4v4()
    learner = AllocationLearner(seed=0)
    rng = np.random.default_rng(0)
    before = learner.select_target(world, 0, 0.0, rng)
    learner.qnet.biases[-1] += 123.0  # shift every candidate Q by a constant
    assert learner.select_target(world, 0, 0.0, rng) == before


def test_row_constraint_over_random_rounds():
    cfg = ArenaConfig(n_pursuers=4, n_evaders=3, n_obstacles=0)
    rng = np.random.default_rng(7)
    for seed in range(50):
        world = sim.generate_instance(cfg, seed)
        if seed % 3 == 0:
            world.evaders[0].frozen = True
        run_allocation_round(
            world, lambda w, i: allocation.random_choose(w, i, rng))
        assert np.all(world.allocation.sum(axis=1) <= 1)
        for j in np.flatnonzero(world.allocation.any(axis=0)):
            assert not world.evaders[j].frozen


def test_dqn_update_terminal_target():
    learner = AllocationLearner(lr=0.0, seed=0)
    chosen = np.zeros(allocation.ENCODING_WIDTH)
    tr = UpperTransition(chosen=chosen, reward=2.5, next_candidates=None,
                         terminal=True)
    q = float(learner.q_values(chosen[None, :])[0])
    loss = learner.update([tr])
    assert loss == pytest.approx((q - 2.5) ** 2, abs=1e-12)


def test_dqn_update_scalar_oracle():
    learner = AllocationLearner(lr=0.0, gamma=0.95, seed=1)
    rng = np.random.default_rng(4)
    chosen = rng.normal(size=allocation.ENCODING_WIDTH)
    nxt = rng.normal(size=(3, allocation.ENCODING_WIDTH))
    tr = UpperTransition(chosen=chosen, reward=1.0, next_candidates=nxt,
                         terminal=False)
    q = float(learner.q_values(chosen[None, :])[0])
    y = 1.0 + 0.95 * float(np.max(learner.q_values(nxt, target=True)))
    loss = learner.update([tr])
    assert loss == pytest.approx((q - y) ** 2, abs=1e-12)


def test_dqn_fixed_point_convergence():
    learner = AllocationLearner(lr=1e-2, zeta=0.0, seed=2)
    chosen = np.full(allocation.ENCODING_WIDTH, 0.3)
    tr = UpperTransition(chosen=chosen, reward=-1.0, next_candidates=None,
                         terminal=True)
    for _ in range(2000):
        learner.update([tr])
    assert float(learner.q_values(chosen[None, :])[0]) == pytest.approx(
        -1.0, abs=1e-3)


def test_greedy_pairwise_choose_nearest_weighted():
    cfg = ArenaConfig(n_pursuers=1, n_evaders=2, n_obstacles=0)
    world = make_world(cfg, [(0, 0)], [(1, 0), (5, 0)])
    assert greedy_pairwise_choose(world, 0) == 0
