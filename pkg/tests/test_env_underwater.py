import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from aoimdp.aoi_core import segment_area, time_averaged_aoi
from aoimdp.delay_models import Constant, Geometric, Poisson
from aoimdp.env_underwater import (
    OBS_FIELDS,
    STATS_COLUMNS,
    ActionTuple,
    StandardMdpView,
    UnderwaterEnv,
    WorldConfig,
    closed_form_episode_aoi,
    default_sdm,
    make_standard_mdp_view,
)

SMALL = WorldConfig(horizon=60)


def random_actions(env, rng, max_wait=None):
    w = env.world
    zmax = w.z_max if max_wait is None else max_wait
    return [
        ActionTuple(float(rng.choice([0.0, w.v_max / 2, w.v_max])),
                    float(rng.uniform(-w.turn_max, w.turn_max)),
                    int(rng.integers(0, zmax + 1)))
        for _ in range(env.n_agents)
    ]


def rollout(env, seed, policy_seed=0, max_wait=None, check=None):
    obs = env.reset(seed)
    rng = np.random.default_rng(policy_seed)
    done = False
    while not done:
        obs, rewards, done, info = env.step(random_actions(env, rng, max_wait))
        if check:
            check(env, obs, rewards, info)
    return env.episode_stats()


# reset -------------------------------------------------------------------------


def test_same_seed_same_initial_state():
    a, b = UnderwaterEnv(SMALL), UnderwaterEnv(SMALL)
    oa, ob = a.reset(11), b.reset(11)
    for x, y in zip(oa, ob):
        assert np.array_equal(x, y)
    sa, sb = a.state, b.state
    for field in ("poses", "remaining", "clock", "staleness"):
        assert np.array_equal(getattr(sa, field), getattr(sb, field))
    assert a.nodes == b.nodes


def test_different_seeds_differ():
    a = UnderwaterEnv(SMALL)
    a.reset(1)
    p1 = a.state.poses.copy()
    a.reset(2)
    assert not np.array_equal(p1, a.state.poses)


def test_layout_seed_fixes_placement_not_delays():
    w = replace(SMALL, layout_seed=3)
    env = UnderwaterEnv(w, Geometric(0.3))
    env.reset(1)
    p1, n1 = env.state.poses.copy(), list(env.nodes)
    env.reset(2)
    assert np.array_equal(p1, env.state.poses) and n1 == env.nodes


def test_observation_shape_and_initial_staleness():
    env = UnderwaterEnv(SMALL)
    obs = env.reset(0)
    assert len(obs) == SMALL.n_auvs
    for o in obs:
        assert o.shape == (len(OBS_FIELDS) + 1,)
        assert o[-1] >= 1


def test_empty_world_has_zero_sir():
    env = UnderwaterEnv(replace(SMALL, n_nodes=0))

    def check(env, obs, rewards, info):
        assert all(r.bits == 0 for r in rewards)
        assert env.collected_total == 0

    stats_ = rollout(env, 5, check=check)
    assert stats_.sum_info_rate == 0 and stats_.sum_info_total == 0


def test_placement_uniform_chi_square():
    w = WorldConfig(n_auvs=2, n_nodes=3)
    env = UnderwaterEnv(w, Constant(1))
    xs, ys = [], []
    for seed in range(10_000):
        env.reset(seed)
        xs.extend(env.state.poses[:, 0])
        ys.extend(env.state.poses[:, 1])
        xs.extend(x for x, _ in env.nodes)
        ys.extend(y for _, y in env.nodes)
    for values, width in ((xs, w.arena[0]), (ys, w.arena[1])):
        counts, _ = np.histogram(values, bins=10, range=(0, width))
        assert stats.chisquare(counts).pvalue > 0.01
    counts2d, _, _ = np.histogram2d(xs, ys, bins=5, range=[(0, w.arena[0]), (0, w.arena[1])])
    assert stats.chisquare(counts2d.ravel()).pvalue > 0.01


def test_explicit_layout_validated():
    env = UnderwaterEnv(WorldConfig(n_auvs=1, n_nodes=1))
    with pytest.raises(ValueError):
        env.reset(0, layout={"auvs": [(500.0, 0.0, 0.0)], "nodes": [(1.0, 1.0)]})
    with pytest.raises(ValueError):
        env.reset(0, layout={"auvs": [(1.0, 1.0, 0.0), (2.0, 2.0, 0.0)], "nodes": [(1.0, 1.0)]})


@pytest.mark.parametrize("field,value", [
    ("comm_range", -1.0), ("n_auvs", 0), ("horizon", 0), ("w_aoi", -0.1), ("arena", (0.0, 10.0)),
    ("propagation_speed", 0.0), ("aoi_reward", "final"),
])
def test_invalid_world_named(field, value):
    with pytest.raises(ValueError, match=field):
        WorldConfig(**{field: value})


def test_step_before_reset_raises():
    with pytest.raises(RuntimeError):
        UnderwaterEnv(SMALL).step([ActionTuple(0.0)] * SMALL.n_auvs)


# step ---------------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["increment", "dinkelbach"])
def test_isolated_aoi_term(mode):
    w = WorldConfig(n_auvs=1, n_nodes=1, aoi_reward=mode, aoi_baseline=3.0, w_aoi=2.0)
    env = UnderwaterEnv(w, Poisson(3.0))
    env.reset(4, layout={"auvs": [(90.0, 90.0, 0.0)], "nodes": [(5.0, 5.0)]})
    for _ in range(10):
        before = time_averaged_aoi(env.timeline(0)).time_avg_aoi
        prev_y = env.timeline(0).delays[-1]
        _, (r,), _, info = env.step([ActionTuple(0.0, 0.0, 0)])
        after = time_averaged_aoi(env.timeline(0)).time_avg_aoi
        y = env.timeline(0).delays[-1]
        expected = after - before if mode == "increment" else segment_area(prev_y, y, 0.0) - 3.0 * y
        assert r.aoi_increment == pytest.approx(expected, rel=1e-12, abs=1e-12)
        assert r.bits == 0 and r.rate_term == 0
        assert r.energy == w.comms_energy
        assert r.scalar == pytest.approx(-w.w_aoi * r.aoi_increment - w.w_energy * w.comms_energy, abs=1e-12)
        assert not any(info["clamped"])


def test_isolated_aoi_term_without_energy_weight():
    w = WorldConfig(n_auvs=1, n_nodes=0, w_energy=0.0, w_aoi=1.5)
    env = UnderwaterEnv(w, Geometric(0.4))
    env.reset(0)
    _, (r,), _, _ = env.step([ActionTuple(0.0)])
    assert r.scalar == -w.w_aoi * r.aoi_increment
    assert env.episode_stats().energy_consumed == w.comms_energy


@pytest.mark.parametrize("distance", [0.5, 2.0, 7.5])
@pytest.mark.parametrize("wait", [0, 2])
def test_link_rate_formula(distance, wait):
    w = WorldConfig(n_auvs=1, n_nodes=1, node_data=10**9)
    env = UnderwaterEnv(w, Constant(1))
    env.reset(0, layout={"auvs": [(50.0, 50.0, 0.0)], "nodes": [(50.0 + distance, 50.0)]})
    _, (r,), _, _ = env.step([ActionTuple(0.0, 0.0, wait)])
    d = max(distance, w.min_link_distance)
    per_tick = math.floor(w.rate_max * math.log2(1 + w.snr_k / d**2) * w.sample_period)
    assert r.bits == per_tick * (wait + 1)
    assert env.episode_stats().sum_info_rate == per_tick * (wait + 1)


def test_out_of_range_collects_nothing():
    w = WorldConfig(n_auvs=1, n_nodes=1)
    env = UnderwaterEnv(w, Constant(1))
    env.reset(0, layout={"auvs": [(0.0, 0.0, 0.0)], "nodes": [(0.0, w.comm_range + 0.1)]})
    _, (r,), _, _ = env.step([ActionTuple(0.0)])
    assert r.bits == 0


def test_rate_clipped_by_remaining_data():
    w = WorldConfig(n_auvs=1, n_nodes=1, node_data=7)
    env = UnderwaterEnv(w, Constant(1))
    env.reset(0, layout={"auvs": [(10.0, 10.0, 0.0)], "nodes": [(10.0, 10.0)]})
    _, (r,), _, _ = env.step([ActionTuple(0.0, 0.0, 2)])
    assert r.bits == 7 and env.remaining_total == 0
    _, (r,), _, _ = env.step([ActionTuple(0.0)])
    assert r.bits == 0


def test_clamping_is_flagged_not_raised():
    env = UnderwaterEnv(replace(SMALL, n_auvs=1))
    env.reset(0)
    w = env.world
    _, _, _, info = env.step([ActionTuple(w.v_max * 3, -10.0, 99)])
    assert info["clamped"] == [True]
    assert env.state.clock[0] == w.z_max + 1
    _, _, _, info = env.step([ActionTuple(w.v_max, w.turn_max, w.z_max)])
    assert info["clamped"] == [False]


def test_poses_stay_inside_arena():
    env = UnderwaterEnv(SMALL)

    def check(env, obs, rewards, info):
        p = env.state.poses
        assert np.all(p[:, 0] >= 0) and np.all(p[:, 0] <= env.world.arena[0])
        assert np.all(p[:, 1] >= 0) and np.all(p[:, 1] <= env.world.arena[1])

    rollout(env, 2, check=check)


# invariants ---------------------------------------------------------------------


@pytest.mark.parametrize("model", [None, Geometric(0.3), Constant(2)], ids=["sdm", "geometric", "constant"])
@pytest.mark.parametrize("seed", range(4))
def test_episode_aoi_equals_closed_form_exactly(model, seed):
    env = UnderwaterEnv(SMALL, model)
    s = rollout(env, seed, policy_seed=seed)
    assert s.time_avg_aoi == closed_form_episode_aoi(env)
    for k in range(env.n_agents):
        assert s.per_auv_aoi[k] == time_averaged_aoi(env.timeline(k)).time_avg_aoi
        assert len(env.timeline(k)) == SMALL.horizon + 1


def test_conservation_every_step_with_contention():
    w = WorldConfig(n_auvs=3, n_nodes=1, node_data=900, horizon=80, comm_range=40)
    env = UnderwaterEnv(w, Geometric(0.5))
    env.reset(0, layout={"auvs": [(50.0, 50.0, 0.0), (52.0, 50.0, 1.0), (48.0, 49.0, 2.0)],
                         "nodes": [(50.0, 51.0)]})
    rng = np.random.default_rng(0)
    done = False
    while not done:
        _, rewards, done, _ = env.step(random_actions(env, rng))
        assert env.collected_total + env.remaining_total == env.initial_total
        assert min(env.remaining) >= 0
    assert env.remaining_total == 0


def test_causality_observation_is_archived_snapshot():
    env = UnderwaterEnv(SMALL, Geometric(0.35))
    env.reset(9)
    rng = np.random.default_rng(9)
    for _ in range(SMALL.horizon):
        obs, _, _, info = env.step(random_actions(env, rng))
        st = env.state
        for k, o in enumerate(obs):
            y = info["staleness"][k]
            assert y >= 1 and y == st.staleness[k]
            snap = env.archive(k)[max(st.clock[k] - y, 0)]
            assert tuple(o[:-1]) == snap
            assert o[-1] == y


def test_observation_lags_motion():
    w = WorldConfig(n_auvs=1, n_nodes=0)
    env = UnderwaterEnv(w, Constant(3))
    env.reset(0, layout={"auvs": [(10.0, 10.0, 0.0)]})
    xs = []
    for _ in range(5):
        obs, _, _, _ = env.step([ActionTuple(w.v_max)])
        xs.append(obs[0][0])
    # one tick per epoch and a three-tick delay: the observed x trails by three moves
    assert xs == [10.0, 10.0, 10.0, 10.0 + w.v_max, 10.0 + 2 * w.v_max]


def test_energy_monotone_and_nonnegative():
    env = UnderwaterEnv(SMALL)
    history = []

    def check(env, obs, rewards, info):
        history.append(env.episode_stats().energy_consumed)
        assert all(r.energy >= env.world.comms_energy for r in rewards)

    rollout(env, 1, check=check)
    assert all(b >= a for a, b in zip(history, history[1:]))


def test_move_energy_proportional_to_distance():
    w = WorldConfig(n_auvs=1, n_nodes=0)
    env = UnderwaterEnv(w, Constant(1))
    env.reset(0, layout={"auvs": [(50.0, 50.0, 0.0)]})
    _, (r,), _, _ = env.step([ActionTuple(4.0)])
    assert r.energy == pytest.approx(w.move_energy * 4.0 + w.comms_energy)


def test_determinism_of_episode_stats():
    a = rollout(UnderwaterEnv(SMALL), 21, policy_seed=3)
    b = rollout(UnderwaterEnv(SMALL), 21, policy_seed=3)
    assert a == b
    assert all(math.isfinite(getattr(a, c)) for c in STATS_COLUMNS)


def test_episode_length_is_horizon():
    env = UnderwaterEnv(SMALL)
    env.reset(0)
    rng = np.random.default_rng(0)
    n = 0
    done = False
    while not done:
        _, _, done, info = env.step(random_actions(env, rng))
        n += 1
    assert n == SMALL.horizon and info["truncated"]


def test_trace_records_every_auv_step():
    env = UnderwaterEnv(SMALL, record_trace=True)
    rollout(env, 0)
    assert len(env.trace) == SMALL.horizon * SMALL.n_auvs
    total = math.fsum(r["reward"] for r in env.trace)
    assert total == pytest.approx(env.episode_stats().cumulative_reward, abs=1e-9)


def test_default_sdm_record_holds_every_lag():
    w = WorldConfig()
    sdm = default_sdm(w)
    assert sdm.true_lag(w.max_reference_distance()) <= sdm.delay_config.max_delay
    assert default_sdm(w, search_window=30).delay_config.max_delay == 30


# standard view ------------------------------------------------------------------


def test_standard_view_strips_staleness():
    env = UnderwaterEnv(SMALL)
    view = make_standard_mdp_view(env)
    assert isinstance(view, StandardMdpView)
    full = UnderwaterEnv(SMALL).reset(3)
    wrapped = view.reset(3)
    for f, o in zip(full, wrapped):
        assert len(o) == len(f) - 1
        assert np.array_equal(o, f[:-1])


def test_standard_view_reward_is_task_reward():
    view = StandardMdpView(UnderwaterEnv(SMALL))
    view.reset(0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        _, rewards, _, _ = view.step(random_actions(view.env, rng, max_wait=0))
        for r in rewards:
            assert view.reward_of(r) == SMALL.w_rate * r.bits - SMALL.w_energy * r.energy


def test_standard_view_rejects_wait():
    view = StandardMdpView(UnderwaterEnv(SMALL))
    view.reset(0)
    with pytest.raises(ValueError):
        view.step([ActionTuple(1.0, 0.0, 1)] * SMALL.n_auvs)


def test_standard_view_trajectory_equality_constant_delay():
    a = UnderwaterEnv(SMALL, Constant(1), record_trace=True)
    b = UnderwaterEnv(SMALL, Constant(1), record_trace=True)
    view = StandardMdpView(b)
    oa, ob = a.reset(8), view.reset(8)
    ra, rb = np.random.default_rng(1), np.random.default_rng(1)
    done = False
    while not done:
        acts_a = random_actions(a, ra, max_wait=0)
        acts_b = random_actions(b, rb, max_wait=0)
        assert acts_a == acts_b
        oa, _, done, _ = a.step(acts_a)
        ob, _, _, _ = view.step(acts_b)
        for x, y in zip(oa, ob):
            assert np.array_equal(x[:-1], y)
    assert a.trace == b.trace
    assert a.episode_stats() == view.episode_stats()
