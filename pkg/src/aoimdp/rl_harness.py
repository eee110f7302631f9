"""Tabular Q-learning plus paired AoI-MDP vs standard-MDP runs.

Environments only need ``reset(seed) -> [obs]``, ``step(actions)`` returning
``(obs, reward_tuples, done, info)``, ``reward_of(reward_tuple)``,
``n_agents`` and ``episode_stats()``.  All AUVs share one Q-table.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .aoi_core import initial_area, segment_area
from .delay_models import DelayModel
from .env_underwater import (
    STATS_COLUMNS,
    ActionTuple,
    EpisodeStats,
    StandardMdpView,
    UnderwaterEnv,
    WorldConfig,
)

METRICS = ("time_avg_aoi", "energy_consumed", "sum_info_rate", "cumulative_reward")


def reward_of(env, r) -> float:
    fn = getattr(env, "reward_of", None)
    return fn(r) if fn is not None else r.scalar


def episode_seed(seed: int, episode: int, stream: int = 0) -> int:
    """Distinct non-negative integer seed per (run seed, stream, episode)."""
    return (seed << 24) + (stream << 22) + episode


class Discretizer:
    """Maps an observation vector to a flat state index.

    ``edges[i]`` are the interior bin edges of observation entry ``dims[i]``;
    a value ``v`` lands in bin ``bisect_right(edges, v)``.
    """

    def __init__(self, dims, edges):
        self.dims = list(dims)
        self.edges = [list(map(float, e)) for e in edges]
        if len(self.dims) != len(self.edges):
            raise ValueError("need one edge list per discretised dimension")
        self.sizes = [len(e) + 1 for e in self.edges]
        self.n_states = int(np.prod(self.sizes))
        self.obs_len = max(self.dims) + 1 if self.dims else 0

    @classmethod
    def uniform(cls, dims, lows, highs, bins):
        edges = [np.linspace(lo, hi, b + 1)[1:-1] for lo, hi, b in zip(lows, highs, bins)]
        return cls(dims, edges)

    def __call__(self, obs) -> int:
        if len(obs) < self.obs_len:
            raise ValueError(f"observation of length {len(obs)} lacks entry {self.obs_len - 1}")
        idx = 0
        for d, e, n in zip(self.dims, self.edges, self.sizes):
            idx = idx * n + bisect.bisect_right(e, obs[d])
        return idx


@dataclass
class TrainConfig:
    episodes: int = 600
    eval_interval: int = 100
    eval_episodes: int = 5
    alpha: float = 0.2
    alpha_power: float = 0.0
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.6

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 < self.epsilon_decay_fraction <= 1:
            raise ValueError("epsilon_decay_fraction must lie in (0, 1]")
        if self.eval_interval < 1 or self.eval_episodes < 1:
            raise ValueError("eval_interval and eval_episodes must be >= 1")

    def epsilon(self, episode: int) -> float:
        span = max(self.episodes * self.epsilon_decay_fraction, 1.0)
        frac = min(episode / span, 1.0)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


class QPolicy:
    """Epsilon-greedy tabular Q-learner over a discretised observation."""

    def __init__(self, discretizer: Discretizer, actions, alpha=0.2, gamma=0.95, alpha_power=0.0):
        self.discretizer = discretizer
        self.actions = list(actions)
        self.alpha = alpha
        self.gamma = gamma
        self.alpha_power = alpha_power
        self.q = np.zeros((discretizer.n_states, len(self.actions)))
        self.visits = np.zeros_like(self.q, dtype=np.int64)
        self.epsilon = 0.0

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def state(self, obs) -> int:
        return self.discretizer(obs)

    def greedy(self, s: int) -> int:
        return int(np.argmax(self.q[s]))

    def act_index(self, s: int, explore: bool, rng) -> int:
        if explore and rng.random() < self.epsilon:
            return int(rng.integers(self.n_actions))
        return self.greedy(s)

    def act(self, obs, explore: bool = False, rng=None) -> ActionTuple:
        return self.actions[self.act_index(self.state(obs), explore, rng)]

    def update(self, s: int, a: int, r: float, s2: int, done: bool):
        n = self.visits[s, a]
        self.visits[s, a] = n + 1
        alpha = self.alpha / (1.0 + n) ** self.alpha_power if self.alpha_power else self.alpha
        target = r if done else r + self.gamma * self.q[s2].max()
        self.q[s, a] += alpha * (target - self.q[s, a])


def motion_actions(world: WorldConfig, waits=(0,), speeds=None, turns=None) -> list[ActionTuple]:
    speeds = (0.0, world.v_max) if speeds is None else speeds
    turns = (-world.turn_max, 0.0, world.turn_max) if turns is None else turns
    return [ActionTuple(v, t, z) for z in waits for v in speeds for t in turns]


def default_discretizer(world: WorldConfig, with_staleness: bool, position_bins=8, heading_bins=8,
                        staleness_levels=4) -> Discretizer:
    ax, ay = world.arena
    dims, edges = [0, 1, 2], [
        np.linspace(0, ax, position_bins + 1)[1:-1],
        np.linspace(0, ay, position_bins + 1)[1:-1],
        np.linspace(-math.pi, math.pi, heading_bins + 1)[1:-1],
    ]
    if with_staleness:
        dims.append(6)
        edges.append([k + 0.5 for k in range(1, staleness_levels)])
    return Discretizer(dims, edges)


def make_policy(view, cfg: TrainConfig) -> QPolicy:
    """Default Q-policy for an :class:`UnderwaterEnv` or its delay-blind view."""
    world = view.world
    aoi = not isinstance(view, StandardMdpView)
    waits = tuple(range(world.z_max + 1)) if aoi else (0,)
    return QPolicy(default_discretizer(world, aoi), motion_actions(world, waits),
                   cfg.alpha, cfg.gamma, cfg.alpha_power)


def _check_spaces(env, policy: QPolicy):
    obs_dim = getattr(env, "obs_dim", None)
    if obs_dim is not None and policy.discretizer.obs_len > obs_dim:
        raise ValueError("policy reads observation entries the environment does not provide")
    if isinstance(env, StandardMdpView) and any(a.wait for a in policy.actions):
        raise ValueError("delay-blind view cannot take wait actions")


def run_episode(env, policy: QPolicy, seed: int, explore: bool = False, rng=None, learn: bool = False):
    """Roll out one episode; returns the environment's :class:`EpisodeStats`."""
    obs = env.reset(seed)
    states = [policy.state(o) for o in obs]
    done = False
    while not done:
        idx = [policy.act_index(s, explore, rng) for s in states]
        obs, rewards, done, info = env.step([policy.actions[i] for i in idx])
        nxt = [policy.state(o) for o in obs]
        if learn:
            # time-limit cuts bootstrap; only true terminals stop the backup
            terminal = done and not info.get("truncated", False)
            for s, a, r, s2 in zip(states, idx, rewards, nxt):
                policy.update(s, a, reward_of(env, r), s2, terminal)
        states = nxt
    return env.episode_stats()


@dataclass
class EvalSummary:
    mean: dict
    std: dict
    episodes: list[EpisodeStats] = field(default_factory=list)

    def row(self, prefix: str = "") -> dict:
        out = {}
        for m in METRICS:
            out[f"{prefix}{m}_mean"] = self.mean[m]
            out[f"{prefix}{m}_std"] = self.std[m]
        return out


def summarize(episodes: list[EpisodeStats]) -> EvalSummary:
    mean, std = {}, {}
    for m in STATS_COLUMNS:
        vals = np.array([getattr(e, m) for e in episodes], dtype=float)
        mean[m] = float(vals.mean())
        std[m] = float(vals.std())
    return EvalSummary(mean, std, list(episodes))


def evaluate(env, policy: QPolicy, n_episodes: int, seed: int) -> EvalSummary:
    """Greedy rollouts with per-episode seeds from ``seed``; mean and population std."""
    eps = [run_episode(env, policy, episode_seed(seed, e, stream=1)) for e in range(n_episodes)]
    return summarize(eps)


def train(env, policy: QPolicy, cfg: TrainConfig, seed: int) -> list[dict]:
    """Epsilon-greedy Q-learning; returns the learning curve (one row per evaluation)."""
    _check_spaces(env, policy)
    rng = np.random.default_rng([seed, 7])
    curve = []
    for e in range(cfg.episodes):
        policy.epsilon = cfg.epsilon(e)
        run_episode(env, policy, episode_seed(seed, e), explore=True, rng=rng, learn=True)
        if (e + 1) % cfg.eval_interval == 0 or e + 1 == cfg.episodes:
            summary = evaluate(env, policy, cfg.eval_episodes, seed)
            curve.append({"episode": e + 1, "epsilon": policy.epsilon, **summary.row()})
    policy.epsilon = 0.0
    return curve


# comparison ----------------------------------------------------------------


@dataclass(frozen=True)
class Arm:
    name: str
    formulation: str  # "aoi" or "standard"
    delay_model: DelayModel

    def __post_init__(self):
        if self.formulation not in ("aoi", "standard"):
            raise ValueError(f"unknown formulation {self.formulation!r}")

    def build(self, world: WorldConfig):
        env = UnderwaterEnv(world, self.delay_model)
        return env if self.formulation == "aoi" else StandardMdpView(env)


@dataclass
class ComparisonReport:
    arms: list[str]
    seeds: list[int]
    per_seed: dict  # arm -> list[EvalSummary], aligned with seeds
    curves: dict  # (arm, seed) -> learning curve

    def table(self) -> list[dict]:
        """One row per arm with mean and std across seeds of the per-seed means."""
        rows = []
        for arm in self.arms:
            row = {"arm": arm}
            for m in METRICS:
                vals = np.array([s.mean[m] for s in self.per_seed[arm]])
                row[f"{m}_mean"] = float(vals.mean())
                row[f"{m}_std"] = float(vals.std())
            rows.append(row)
        return rows

    def per_seed_rows(self) -> list[dict]:
        rows = []
        for arm in self.arms:
            for seed, s in zip(self.seeds, self.per_seed[arm]):
                rows.append({"arm": arm, "seed": seed, **{m: s.mean[m] for m in METRICS}})
        return rows

    def deltas(self, a: str, b: str) -> list[dict]:
        """Per-seed differences ``a - b`` of the evaluation means."""
        rows = []
        for seed, sa, sb in zip(self.seeds, self.per_seed[a], self.per_seed[b]):
            rows.append({"seed": seed, **{m: sa.mean[m] - sb.mean[m] for m in METRICS}})
        return rows


def train_arm(world: WorldConfig, arm: Arm, cfg: TrainConfig, seed: int, eval_episodes: int):
    view = arm.build(world)
    policy = make_policy(view, cfg)
    curve = train(view, policy, cfg, seed)
    return evaluate(view, policy, eval_episodes, seed), curve, policy


def run_comparison(world: WorldConfig, arms: list[Arm], cfg: TrainConfig, seeds, eval_episodes: int = 10,
                   layout_from_seed: bool = True) -> ComparisonReport:
    """Train every arm on every seed with identical worlds and episode seeds.

    With ``layout_from_seed`` each seed fixes the node/AUV layout for all of its
    episodes (``world.layout_seed = seed``); arms sharing a seed share the layout.
    """
    seeds = list(seeds)
    names = [a.name for a in arms]
    if len(set(names)) != len(names):
        raise ValueError("arm names must be unique")
    per_seed = {a.name: [] for a in arms}
    curves = {}
    for seed in seeds:
        w = world if not layout_from_seed else _with_layout(world, seed)
        for arm in arms:
            summary, curve, _ = train_arm(w, arm, cfg, seed, eval_episodes)
            per_seed[arm.name].append(summary)
            curves[(arm.name, seed)] = curve
    return ComparisonReport(names, seeds, per_seed, curves)


def _with_layout(world: WorldConfig, seed: int) -> WorldConfig:
    from dataclasses import replace

    return replace(world, layout_seed=seed)


# micro world ---------------------------------------------------------------


@dataclass(frozen=True)
class MicroConfig:
    size: int = 3
    horizon: int = 6
    node: tuple[int, int] = (2, 2)
    bits_per_tick: int = 10
    move_energy: float = 1.0
    comms_energy: float = 0.5
    w_rate: float = 1.0
    w_energy: float = 1.0
    w_aoi: float = 2.0
    aoi_reward: str = "dinkelbach"
    aoi_baseline: float = 1.5
    waits: tuple[int, ...] = (0, 1)

    def delay(self, x: int, y: int) -> float:
        # surface reference at the origin: one tick nearby, two further out
        return 1.0 if x + y <= 1 else 2.0


MICRO_MOVES = ((1, 0), (0, 1))  # east, north


@dataclass(frozen=True)
class MicroState:
    t: int
    x: int
    y: int
    delays: tuple[float, ...]
    areas: tuple[float, ...]
    spans: tuple[float, ...]

    @property
    def aoi(self) -> float:
        return math.fsum(self.areas) / math.fsum(self.spans)


class MicroWorld:
    """Deterministic 1-AUV, 1-node grid world for optimality checks.

    Actions are ``(direction, speed in {0, 1} cell, wait in waits)``; the AUV
    collects ``bits_per_tick`` on every tick it spends on the node cell.
    """

    n_agents = 1
    obs_dim = 4

    def __init__(self, cfg: MicroConfig | None = None):
        self.cfg = cfg or MicroConfig()
        self.actions = [ActionTuple(float(v), float(d), z)
                        for z in self.cfg.waits for v in (0, 1) for d in range(len(MICRO_MOVES))]

    def initial(self) -> MicroState:
        y0 = self.cfg.delay(0, 0)
        return MicroState(0, 0, 0, (y0,), (initial_area(0.0, y0),), (y0,))

    def transition(self, s: MicroState, action: ActionTuple) -> tuple[MicroState, float, dict]:
        c = self.cfg
        wait = int(action.wait)
        on_node = (s.x, s.y) == c.node
        bits = c.bits_per_tick * wait if on_node else 0
        x, y = s.x, s.y
        moved = 0
        if action.speed:
            dx, dy = MICRO_MOVES[int(action.turn)]
            nx, ny = min(x + dx, c.size - 1), min(y + dy, c.size - 1)
            moved = abs(nx - x) + abs(ny - y)
            x, y = nx, ny
        if (x, y) == c.node:
            bits += c.bits_per_tick
        energy = c.move_energy * moved + c.comms_energy
        yd = c.delay(x, y)
        before = s.aoi
        area = segment_area(s.delays[-1], yd, float(wait))
        nxt = MicroState(s.t + 1, x, y, s.delays + (yd,), s.areas + (area,), s.spans + (float(wait), yd))
        if c.aoi_reward == "increment":
            inc = nxt.aoi - before
        else:
            inc = area - c.aoi_baseline * (yd + wait)
        reward = c.w_rate * bits - c.w_energy * energy - c.w_aoi * inc
        return nxt, reward, {"bits": bits, "energy": energy, "aoi_increment": inc}

    def observe(self, s: MicroState) -> tuple:
        return (s.t, s.x, s.y, s.delays[-1])

    def reset(self, seed=None):
        self._s = self.initial()
        self._ret = 0.0
        self._energy = 0.0
        self._bits = 0
        return [self.observe(self._s)]

    def step(self, actions):
        self._s, r, info = self.transition(self._s, actions[0])
        self._ret += r
        self._energy += info["energy"]
        self._bits += info["bits"]
        done = self._s.t >= self.cfg.horizon
        return [self.observe(self._s)], [r], done, info

    @staticmethod
    def reward_of(r):
        return r

    def episode_stats(self) -> EpisodeStats:
        return EpisodeStats(self._s.aoi, self._energy, self._bits / max(self._s.t, 1), self._bits,
                            self._ret, [self._s.aoi])

    def discretizer(self) -> Discretizer:
        c = self.cfg
        return Discretizer([0, 1, 2], [np.arange(1, c.horizon) - 0.5, np.arange(1, c.size) - 0.5,
                                      np.arange(1, c.size) - 0.5])

    def optimal_return(self) -> tuple[float, tuple]:
        """Exhaustive search over every action sequence (deterministic world)."""
        best = (-math.inf, ())

        def dfs(s, acc, seq):
            nonlocal best
            if s.t >= self.cfg.horizon:
                if acc > best[0]:
                    best = (acc, seq)
                return
            for i, a in enumerate(self.actions):
                nxt, r, _ = self.transition(s, a)
                dfs(nxt, acc + r, seq + (i,))

        dfs(self.initial(), 0.0, ())
        return best

    def sequence_count(self) -> int:
        return len(self.actions) ** self.cfg.horizon


def micro_policy(world: MicroWorld, cfg: TrainConfig) -> QPolicy:
    return QPolicy(world.discretizer(), world.actions, cfg.alpha, cfg.gamma, cfg.alpha_power)


def greedy_return(env, policy: QPolicy) -> float:
    return run_episode(env, policy, 0).cumulative_reward


# two-state check -----------------------------------------------------------


class TwoStateMdp:
    """Hand-built deterministic 2-state, 2-action MDP with a known optimum.

    Action 0 stays, action 1 switches state; rewards ``R[s][a]``.
    Episodes are ``length`` steps long and bootstrap through the cut.
    """

    n_agents = 1
    obs_dim = 1
    R = ((1.0, 0.0), (-1.0, 2.0))

    def __init__(self, length: int = 20, start=None):
        self.length = length
        self.start = start
        self.actions = [0, 1]

    def reset(self, seed=None):
        rng = np.random.default_rng(seed)
        self.s = int(rng.integers(2)) if self.start is None else self.start
        self.t = 0
        self.ret = 0.0
        return [(self.s,)]

    def step(self, actions):
        a = actions[0]
        r = self.R[self.s][a]
        self.s = self.s if a == 0 else 1 - self.s
        self.t += 1
        self.ret += r
        done = self.t >= self.length
        return [(self.s,)], [r], done, {"truncated": done}

    @staticmethod
    def reward_of(r):
        return r

    def episode_stats(self):
        return EpisodeStats(0.0, 0.0, 0.0, 0, self.ret)

    def optimal_q(self, gamma: float, iters: int = 5000) -> np.ndarray:
        q = np.zeros((2, 2))
        for _ in range(iters):
            v = q.max(axis=1)
            q = np.array([[self.R[s][a] + gamma * v[s if a == 0 else 1 - s] for a in (0, 1)] for s in (0, 1)])
        return q

