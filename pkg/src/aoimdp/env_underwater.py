"""Multi-AUV underwater data-collection environment with delayed observations.

Each call to :meth:`UnderwaterEnv.step` is one decision epoch for every AUV.
Per AUV the epoch runs:

1. hover for ``wait`` ticks (no motion, data still flows if a node is in range);
2. apply the motion command for one tick;
3. transmit an observation snapshot whose delay ``Y`` comes from the delay
   model (SDM uses the distance to the surface reference as context);
4. deliver the snapshot archived ``ceil(Y)`` ticks before the end of the
   epoch, append ``(Y, wait)`` to the AUV's update timeline and charge an
   AoI cost to the reward (see ``WorldConfig.aoi_reward``).

AUV clocks advance independently (an AUV that waits longer sees more ticks);
the shared node field is drained in AUV index order.  Node data is counted
in whole bits so conservation is exact.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .aoi_core import RunningAoi, UpdateTimeline, time_averaged_aoi
from .delay_models import DelayModel, Sdm, sample_delay
from .estimation import DelayEstConfig, pn_sequence

OBS_FIELDS = ("x", "y", "heading", "node_dx", "node_dy", "node_remaining")
TRACE_COLUMNS = (
    "step", "auv", "x", "y", "heading", "delay", "staleness", "wait", "bits", "energy",
    "rate_term", "energy_term", "aoi_increment", "reward", "clamped",
)
AOI_REWARDS = ("increment", "dinkelbach")
STATS_COLUMNS = (
    "time_avg_aoi", "energy_consumed", "sum_info_rate", "sum_info_total", "cumulative_reward",
)


@dataclass(frozen=True)
class WorldConfig:
    """Static parameters of the simulated world and its reward weights.

    Lengths are metres, time is in ticks of ``sample_period`` seconds, data in
    bits.  ``horizon`` counts decision epochs.  The surface reference sits at
    ``reference_xy`` with vertical offset ``reference_depth``.

    ``aoi_reward`` picks the per-epoch AoI cost. ``"dinkelbach"`` (default)
    charges the area of the sawtooth segment the update closes minus
    ``aoi_baseline`` times its duration, a Markov cost whose sum over an
    episode is ``total_area - aoi_baseline * horizon``. ``"increment"``
    charges the change in the running time average, which shrinks as the
    episode grows and depends on the whole history.
    """

    arena: tuple[float, float] = (100.0, 100.0)
    n_auvs: int = 2
    n_nodes: int = 4
    node_data: int = 3000
    comm_range: float = 15.0
    v_max: float = 10.0
    turn_max: float = math.pi / 2
    z_max: int = 2
    move_energy: float = 0.05
    comms_energy: float = 0.5
    sample_period: float = 1.0
    rate_max: float = 40.0
    snr_k: float = 100.0
    min_link_distance: float = 1.0
    propagation_speed: float = 20.0
    reference_xy: tuple[float, float] = (0.0, 0.0)
    reference_depth: float = 10.0
    horizon: int = 200
    w_rate: float = 0.01
    w_energy: float = 0.1
    w_aoi: float = 0.6
    aoi_reward: str = "dinkelbach"
    aoi_baseline: float = 6.0
    layout_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "arena", tuple(float(a) for a in self.arena))
        object.__setattr__(self, "reference_xy", tuple(float(a) for a in self.reference_xy))
        checks = {
            "arena": len(self.arena) == 2 and min(self.arena) > 0,
            "n_auvs": self.n_auvs >= 1,
            "n_nodes": self.n_nodes >= 0,
            "node_data": self.node_data >= 0,
            "comm_range": self.comm_range > 0,
            "v_max": self.v_max > 0,
            "turn_max": self.turn_max >= 0,
            "z_max": self.z_max >= 0,
            "move_energy": self.move_energy >= 0,
            "comms_energy": self.comms_energy >= 0,
            "sample_period": self.sample_period > 0,
            "rate_max": self.rate_max >= 0,
            "snr_k": self.snr_k >= 0,
            "min_link_distance": self.min_link_distance > 0,
            "propagation_speed": self.propagation_speed > 0,
            "reference_depth": self.reference_depth >= 0,
            "horizon": self.horizon >= 1,
            "w_rate": self.w_rate >= 0,
            "w_energy": self.w_energy >= 0,
            "w_aoi": self.w_aoi >= 0,
            "aoi_baseline": self.aoi_baseline >= 0,
        }
        if self.aoi_reward not in AOI_REWARDS:
            raise ValueError(f"invalid WorldConfig.aoi_reward: {self.aoi_reward!r}")
        for name, ok in checks.items():
            if not ok:
                raise ValueError(f"invalid WorldConfig.{name}: {getattr(self, name)!r}")

    def reference_distance(self, x: float, y: float) -> float:
        rx, ry = self.reference_xy
        return math.sqrt((x - rx) ** 2 + (y - ry) ** 2 + self.reference_depth**2)

    def median_reference_distance(self, resolution: int = 201) -> float:
        """Median distance to the reference over a uniform grid of the arena."""
        xs = np.linspace(0, self.arena[0], resolution)
        ys = np.linspace(0, self.arena[1], resolution)
        gx, gy = np.meshgrid(xs, ys)
        rx, ry = self.reference_xy
        d = np.sqrt((gx - rx) ** 2 + (gy - ry) ** 2 + self.reference_depth**2)
        return float(np.median(d))

    def max_reference_distance(self) -> float:
        corners = [(0, 0), (self.arena[0], 0), (0, self.arena[1]), self.arena]
        return max(self.reference_distance(x, y) for x, y in corners)

    def to_dict(self) -> dict:
        return asdict(self)


def default_sdm(world: WorldConfig, replica_length: int = 16, noise_variance: float = 0.1,
                snr_policy: str = "fixed", pn_seed: int = 0, search_window: int | None = None) -> Sdm:
    """SDM delay model whose record holds every reachable propagation lag.

    ``search_window`` widens the receiver's lag search beyond the largest
    physical lag, which is where estimator outliers land.
    """
    max_lag = int(math.ceil(world.max_reference_distance() / world.propagation_speed / world.sample_period))
    window = max(max_lag, search_window or 0)
    cfg = DelayEstConfig(pn_sequence(replica_length, pn_seed), replica_length + window, noise_variance)
    return Sdm(cfg, world.propagation_speed, world.sample_period,
               world.median_reference_distance(), snr_policy)


@dataclass(frozen=True)
class ActionTuple:
    """Motion command plus the wait (in ticks) before executing it."""

    speed: float
    turn: float = 0.0
    wait: int = 0


@dataclass(frozen=True)
class RewardTuple:
    bits: int
    energy: float
    aoi_increment: float
    rate_term: float
    energy_term: float
    aoi_term: float

    @property
    def task(self) -> float:
        """Reward of the delay-blind formulation."""
        return self.rate_term - self.energy_term

    @property
    def scalar(self) -> float:
        return self.rate_term - self.energy_term - self.aoi_term


@dataclass
class EnvState:
    poses: np.ndarray
    remaining: np.ndarray
    clock: np.ndarray
    staleness: np.ndarray


@dataclass
class EpisodeStats:
    time_avg_aoi: float
    energy_consumed: float
    sum_info_rate: float
    sum_info_total: int
    cumulative_reward: float
    per_auv_aoi: list[float] = field(default_factory=list)

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in STATS_COLUMNS}


@dataclass
class _Auv:
    x: float
    y: float
    heading: float
    clock: int = 0
    staleness: int = 1
    energy: float = 0.0
    collected: int = 0
    aoi: RunningAoi = field(default_factory=RunningAoi)
    archive: list = field(default_factory=list)


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2 * math.pi) - math.pi


class UnderwaterEnv:
    """AoI-MDP view: observation ``s' + (staleness,)``, action ``(speed, turn, wait)``."""

    obs_dim = len(OBS_FIELDS) + 1

    def __init__(self, world: WorldConfig | None = None, delay_model: DelayModel | None = None,
                 record_trace: bool = False):
        self.world = world or WorldConfig()
        self.delay_model = delay_model if delay_model is not None else default_sdm(self.world)
        self.record_trace = record_trace
        self.trace: list[dict] = []
        self._auvs: list[_Auv] = []
        self._ready = False

    # setup -------------------------------------------------------------------

    def reset(self, seed=None, layout: dict | None = None) -> list[np.ndarray]:
        """Start an episode; returns one observation per AUV.

        Placement is uniform over the arena, drawn from ``world.layout_seed``
        when set and from ``seed`` otherwise.  ``layout`` overrides it with
        explicit ``{"auvs": [(x, y, heading), ...], "nodes": [(x, y), ...]}``.
        """
        w = self.world
        layout_seed = w.layout_seed if w.layout_seed is not None else seed
        layout_rng = np.random.default_rng(layout_seed)
        self._rng = np.random.default_rng([0 if seed is None else seed, 1])
        ax, ay = w.arena
        auv_xy = layout_rng.uniform((0, 0), (ax, ay), size=(w.n_auvs, 2))
        headings = layout_rng.uniform(-math.pi, math.pi, size=w.n_auvs)
        nodes = layout_rng.uniform((0, 0), (ax, ay), size=(w.n_nodes, 2))
        if layout is not None:
            poses = np.asarray(layout.get("auvs", np.column_stack([auv_xy, headings])), dtype=float)
            nodes = np.asarray(layout.get("nodes", nodes), dtype=float).reshape(-1, 2)
            if poses.shape != (w.n_auvs, 3) or len(nodes) != w.n_nodes:
                raise ValueError("layout must give n_auvs poses (x, y, heading) and n_nodes node positions")
            if not (np.all((poses[:, :2] >= 0) & (poses[:, :2] <= (ax, ay)))
                    and np.all((nodes >= 0) & (nodes <= (ax, ay)))):
                raise ValueError("layout positions must lie inside the arena")
            auv_xy, headings = poses[:, :2], poses[:, 2]
        self.nodes = [(float(x), float(y)) for x, y in nodes]
        self.remaining = [int(w.node_data)] * w.n_nodes
        self.initial_total = int(w.node_data) * w.n_nodes
        self._auvs = [_Auv(float(x), float(y), float(h)) for (x, y), h in zip(auv_xy, headings)]
        self.steps = 0
        self.trace = []
        self._cum_reward = 0.0
        self._ready = True
        obs = []
        for a in self._auvs:
            a.archive.append(self._snapshot(a))
            y = sample_delay(self.delay_model, self._rng, self._context(a))
            a.aoi.append(y, 0.0)
            a.staleness = max(int(math.ceil(y)), 1)
            obs.append(self._observe(a, a.archive[0]))
        return obs

    @property
    def n_agents(self) -> int:
        return self.world.n_auvs

    @property
    def state(self) -> EnvState:
        return EnvState(
            np.array([(a.x, a.y, a.heading) for a in self._auvs]),
            np.array(self.remaining, dtype=np.int64),
            np.array([a.clock for a in self._auvs]),
            np.array([a.staleness for a in self._auvs]),
        )

    # dynamics ----------------------------------------------------------------

    def _context(self, a: _Auv) -> float:
        return self.world.reference_distance(a.x, a.y)

    def _nearest_node(self, a: _Auv, active_only: bool = True):
        best, best_d2 = -1, math.inf
        for j, (nx, ny) in enumerate(self.nodes):
            if active_only and self.remaining[j] <= 0:
                continue
            d2 = (nx - a.x) ** 2 + (ny - a.y) ** 2
            if d2 < best_d2:
                best, best_d2 = j, d2
        return best, math.sqrt(best_d2)

    def _snapshot(self, a: _Auv, j: int | None = None) -> tuple:
        if j is None:
            j, _ = self._nearest_node(a)
        if j < 0:
            return (a.x, a.y, a.heading, 0.0, 0.0, 0.0)
        nx, ny = self.nodes[j]
        return (a.x, a.y, a.heading, nx - a.x, ny - a.y, float(self.remaining[j]))

    def _observe(self, a: _Auv, snap: tuple) -> np.ndarray:
        return np.array(snap + (float(a.staleness),))

    def link_bits(self, distance: float) -> int:
        """Whole bits delivered in one tick over a link of the given length."""
        w = self.world
        d = max(distance, w.min_link_distance)
        return int(w.rate_max * math.log2(1.0 + w.snr_k / (d * d)) * w.sample_period)

    def _tick(self, a: _Auv) -> int:
        j, d = self._nearest_node(a)
        bits = 0
        if j >= 0 and d <= self.world.comm_range:
            bits = min(self.link_bits(d), self.remaining[j])
            self.remaining[j] -= bits
            a.collected += bits
        a.clock += 1
        # the nearest active node only changes here if this tick drained it
        a.archive.append(self._snapshot(a, None if j >= 0 and self.remaining[j] == 0 else j))
        return bits

    def clamp(self, action: ActionTuple) -> tuple[ActionTuple, bool]:
        w = self.world
        speed = min(max(float(action.speed), 0.0), w.v_max)
        turn = min(max(float(action.turn), -w.turn_max), w.turn_max)
        wait = int(min(max(round(action.wait), 0), w.z_max))
        clamped = (speed, turn, wait) != (action.speed, action.turn, action.wait)
        return ActionTuple(speed, turn, wait), clamped

    def _advance(self, k: int, action: ActionTuple):
        w = self.world
        a = self._auvs[k]
        action, clamped = self.clamp(action)
        bits = 0
        for _ in range(action.wait):
            bits += self._tick(a)
        a.heading = _wrap(a.heading + action.turn)
        step = action.speed * w.sample_period
        nx = min(max(a.x + step * math.cos(a.heading), 0.0), w.arena[0])
        ny = min(max(a.y + step * math.sin(a.heading), 0.0), w.arena[1])
        moved = math.hypot(nx - a.x, ny - a.y)
        a.x, a.y = nx, ny
        bits += self._tick(a)
        energy = w.move_energy * moved + w.comms_energy
        a.energy += energy

        y = sample_delay(self.delay_model, self._rng, self._context(a))
        if w.aoi_reward == "increment":
            before = a.aoi.value
            inc = a.aoi.append(y, float(action.wait)) - before
        else:
            inc = a.aoi.add(y, float(action.wait)) - w.aoi_baseline * (y + action.wait)
        a.staleness = max(int(math.ceil(y)), 1)
        snap = a.archive[max(a.clock - a.staleness, 0)]
        reward = RewardTuple(bits, energy, inc, w.w_rate * bits, w.w_energy * energy, w.w_aoi * inc)
        if self.record_trace:
            self.trace.append({
                "step": self.steps, "auv": k, "x": a.x, "y": a.y, "heading": a.heading,
                "delay": y, "staleness": a.staleness, "wait": action.wait, "bits": bits,
                "energy": energy, "rate_term": reward.rate_term, "energy_term": reward.energy_term,
                "aoi_increment": reward.aoi_increment, "reward": reward.scalar, "clamped": int(clamped),
            })
        return self._observe(a, snap), reward, clamped

    def step(self, actions):
        """Advance one decision epoch.

        Returns ``(observations, rewards, done, info)`` with one
        :class:`RewardTuple` per AUV.  Out-of-bounds actions are clamped and
        reported in ``info["clamped"]``.
        """
        if not self._ready:
            raise RuntimeError("call reset() before step()")
        if len(actions) != self.world.n_auvs:
            raise ValueError(f"expected {self.world.n_auvs} actions, got {len(actions)}")
        obs, rewards, clamped = [], [], []
        for k, act in enumerate(actions):
            o, r, c = self._advance(k, act)
            obs.append(o)
            rewards.append(r)
            clamped.append(c)
            self._cum_reward += r.scalar
        self.steps += 1
        done = self.steps >= self.world.horizon
        if done:
            self._ready = False
        info = {"clamped": clamped, "staleness": [a.staleness for a in self._auvs], "truncated": done}
        return obs, rewards, done, info

    @staticmethod
    def reward_of(r: RewardTuple) -> float:
        return r.scalar

    # bookkeeping -------------------------------------------------------------

    def timeline(self, k: int) -> UpdateTimeline:
        return self._auvs[k].aoi.timeline()

    def archive(self, k: int) -> list[tuple]:
        return list(self._auvs[k].archive)

    @property
    def collected_total(self) -> int:
        return sum(a.collected for a in self._auvs)

    @property
    def remaining_total(self) -> int:
        return sum(self.remaining)

    def episode_stats(self) -> EpisodeStats:
        per_auv = [a.aoi.value for a in self._auvs]
        total = self.collected_total
        return EpisodeStats(
            time_avg_aoi=math.fsum(per_auv) / len(per_auv),
            energy_consumed=math.fsum(a.energy for a in self._auvs),
            sum_info_rate=total / max(self.steps, 1),
            sum_info_total=total,
            cumulative_reward=self._cum_reward,
            per_auv_aoi=per_auv,
        )


def closed_form_episode_aoi(env: UnderwaterEnv) -> float:
    """Episode AoI recomputed from the recorded timelines via the closed form."""
    per_auv = [time_averaged_aoi(env.timeline(k)).time_avg_aoi for k in range(env.n_agents)]
    return math.fsum(per_auv) / len(per_auv)


class StandardMdpView:
    """Delay-blind view of an :class:`UnderwaterEnv`.

    Observations drop the staleness entry and waits must be zero. The reward
    omits the AoI term.  Delayed delivery still happens underneath.
    """

    obs_dim = len(OBS_FIELDS)

    def __init__(self, env: UnderwaterEnv):
        self.env = env

    @property
    def world(self) -> WorldConfig:
        return self.env.world

    @property
    def n_agents(self) -> int:
        return self.env.n_agents

    def reset(self, seed=None):
        return [o[:-1] for o in self.env.reset(seed)]

    def step(self, actions):
        for act in actions:
            if act.wait != 0:
                raise ValueError("the delay-blind view has no wait action")
        obs, rewards, done, info = self.env.step(actions)
        return [o[:-1] for o in obs], rewards, done, info

    @staticmethod
    def reward_of(r: RewardTuple) -> float:
        return r.task

    def episode_stats(self) -> EpisodeStats:
        return self.env.episode_stats()


def aoi_reward(r: RewardTuple) -> float:
    return r.scalar


def make_standard_mdp_view(env: UnderwaterEnv) -> StandardMdpView:
    return StandardMdpView(env)


def with_world(env: UnderwaterEnv, **changes) -> UnderwaterEnv:
    return UnderwaterEnv(replace(env.world, **changes), env.delay_model, env.record_trace)
