"""Experiment configuration with validated defaults and a content hash.

A config file is a JSON object; every key is optional and an empty file (or
``{}``) resolves to the full defaults.  Top-level keys::

    world          WorldConfig fields
    delay          {"kind": "sdm" | "poisson" | "exponential" | "geometric" | "constant", ...}
    train          TrainConfig fields
    seed           base seed (int)
    n_seeds        number of consecutive seeds starting at ``seed``
    seeds          explicit seed list; overrides seed/n_seeds when given
    eval_episodes  greedy evaluation episodes per trained policy
    formulation    "aoi" or "standard" (used by ``train``)
    ablation       {"models": [...]} delay kinds for ``ablate-delay``
    aoi_check      {"random": 200, "dt_ratio": 1e-6, "max_updates": 50}
    estimator      {"m", "n", "snrs", "trials", "pn_seed", "heading": {...}}

SDM delay keys are ``replica_length``, ``noise_variance``, ``snr_policy``,
``pn_seed`` and ``search_window``.  Parametric kinds take their natural
parameter (``mean``, ``rate``, ``p``, ``value``); when it is omitted the model
is mean-matched to the SDM delay at the median reference distance.

A run manifest (``manifest.json``) is itself a valid config file: its
``config`` entry is the fully resolved config of the run.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .delay_models import KINDS, DelayModel, Sdm, mean_delay, mean_matched
from .env_underwater import WorldConfig, default_sdm
from .rl_harness import TrainConfig

COMMANDS = ("aoi-check", "estimator-bench", "train", "compare", "ablate-delay")
SDM_KEYS = ("replica_length", "noise_variance", "snr_policy", "pn_seed", "search_window")
PARAM_KEYS = {"poisson": "mean", "exponential": "rate", "geometric": "p", "constant": "value"}


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


def _default_delay() -> dict:
    return {"kind": "sdm", "replica_length": 16, "noise_variance": 0.1, "snr_policy": "fixed",
            "pn_seed": 0, "search_window": None}


def _default_estimator() -> dict:
    return {
        "m": 64, "n": 512, "snrs": [1.0, 3.0, 10.0], "trials": 1000, "pn_seed": 0,
        "heading": {"sample_count": 256, "carrier_frequency": 1500.0, "sensor_spacing": 0.25,
                    "propagation_speed": 1500.0, "noise_variance": 0.0, "betas": 20},
    }


@dataclass
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    delay: dict = field(default_factory=_default_delay)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 1
    n_seeds: int = 5
    seeds: list | None = None
    eval_episodes: int = 10
    formulation: str = "aoi"
    ablation: dict = field(default_factory=lambda: {"models": ["sdm", "poisson", "exponential", "geometric"]})
    aoi_check: dict = field(default_factory=lambda: {"random": 200, "dt_ratio": 1e-6, "max_updates": 50})
    estimator: dict = field(default_factory=_default_estimator)

    def resolved_seeds(self) -> list[int]:
        if self.seeds is not None:
            return [int(s) for s in self.seeds]
        return list(range(self.seed, self.seed + self.n_seeds))

    def to_dict(self) -> dict:
        return {
            "world": self.world.to_dict(),
            "delay": dict(self.delay),
            "train": asdict(self.train),
            "seed": self.seed,
            "n_seeds": self.n_seeds,
            "seeds": None if self.seeds is None else list(self.seeds),
            "eval_episodes": self.eval_episodes,
            "formulation": self.formulation,
            "ablation": json.loads(json.dumps(self.ablation)),
            "aoi_check": dict(self.aoi_check),
            "estimator": json.loads(json.dumps(self.estimator)),
        }

    def delay_model(self, kind: str | None = None) -> DelayModel:
        """Delay model of the configured kind (or ``kind``), mean-matched if needed."""
        return build_delay_model(self.delay, self.world, kind)


def build_delay_model(params: dict, world: WorldConfig, kind: str | None = None) -> DelayModel:
    kind = kind or params.get("kind", "sdm")
    sdm_kw = {k: params[k] for k in SDM_KEYS if k in params}
    sdm = default_sdm(world, **sdm_kw)
    if kind == "sdm":
        return sdm
    if kind not in PARAM_KEYS:
        raise ConfigError(f"invalid delay.kind: {kind!r}")
    param = PARAM_KEYS[kind]
    if params.get("kind") == kind and params.get(param) is not None:
        return KINDS[kind](params[param])
    return mean_matched(kind, mean_delay(sdm))


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical JSON of the resolved config."""
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _merge(defaults: dict, given: dict, where: str) -> dict:
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


def _build(cls, values: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    base = ExperimentConfig()
    world = _build(WorldConfig, data.get("world", {}), "world")
    train = _build(TrainConfig, data.get("train", {}), "train")

    delay = data.get("delay", {})
    kind = delay.get("kind", "sdm")
    if kind not in KINDS:
        raise ConfigError(f"invalid delay.kind: {kind!r}")
    allowed = {"kind", *SDM_KEYS, *PARAM_KEYS.values()}
    bad = sorted(set(delay) - allowed)
    if bad:
        raise ConfigError(f"unknown key(s) in delay: {', '.join(bad)}")
    delay = {**base.delay, **delay}

    cfg = ExperimentConfig(
        world=world,
        delay=delay,
        train=train,
        seed=data.get("seed", base.seed),
        n_seeds=data.get("n_seeds", base.n_seeds),
        seeds=data.get("seeds", base.seeds),
        eval_episodes=data.get("eval_episodes", base.eval_episodes),
        formulation=data.get("formulation", base.formulation),
        ablation=_merge(base.ablation, data.get("ablation", {}), "ablation"),
        aoi_check=_merge(base.aoi_check, data.get("aoi_check", {}), "aoi_check"),
        estimator=_merge_estimator(base.estimator, data.get("estimator", {})),
    )
    validate(cfg)
    return cfg


def _merge_estimator(defaults: dict, given: dict) -> dict:
    heading = _merge(defaults["heading"], given.get("heading", {}), "estimator.heading")
    out = _merge(defaults, given, "estimator")
    out["heading"] = heading
    return out


def validate(cfg: ExperimentConfig):
    def need(ok, name, value):
        if not ok:
            raise ConfigError(f"invalid {name}: {value!r}")

    need(isinstance(cfg.seed, int) and cfg.seed >= 0, "seed", cfg.seed)
    need(isinstance(cfg.n_seeds, int) and cfg.n_seeds >= 1, "n_seeds", cfg.n_seeds)
    if cfg.seeds is not None:
        need(isinstance(cfg.seeds, list) and cfg.seeds and all(isinstance(s, int) and s >= 0 for s in cfg.seeds),
             "seeds", cfg.seeds)
        need(len(set(cfg.seeds)) == len(cfg.seeds), "seeds (duplicates)", cfg.seeds)
    need(isinstance(cfg.eval_episodes, int) and cfg.eval_episodes >= 1, "eval_episodes", cfg.eval_episodes)
    need(cfg.formulation in ("aoi", "standard"), "formulation", cfg.formulation)
    models = cfg.ablation["models"]
    need(isinstance(models, list) and models and all(m in KINDS for m in models), "ablation.models", models)
    need(len(set(models)) == len(models), "ablation.models (duplicates)", models)
    ac = cfg.aoi_check
    need(isinstance(ac["random"], int) and ac["random"] >= 1, "aoi_check.random", ac["random"])
    need(0 < ac["dt_ratio"] < 1, "aoi_check.dt_ratio", ac["dt_ratio"])
    need(isinstance(ac["max_updates"], int) and ac["max_updates"] >= 1, "aoi_check.max_updates", ac["max_updates"])
    est = cfg.estimator
    need(isinstance(est["m"], int) and est["m"] >= 1, "estimator.m", est["m"])
    need(isinstance(est["n"], int) and est["n"] >= est["m"], "estimator.n", est["n"])
    need(all(s > 0 for s in est["snrs"]), "estimator.snrs", est["snrs"])
    need(isinstance(est["trials"], int) and est["trials"] >= 1, "estimator.trials", est["trials"])
    need(isinstance(est["heading"]["betas"], int) and est["heading"]["betas"] >= 1,
         "estimator.heading.betas", est["heading"]["betas"])
    try:
        model = cfg.delay_model()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"delay: {exc}") from exc
    if isinstance(model, Sdm):
        need(model.delay_config.max_delay >= model.true_lag(cfg.world.max_reference_distance()),
             "delay.search_window", cfg.delay.get("search_window"))


def loads(text: str) -> ExperimentConfig:
    if not text.strip():
        return from_dict({})
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if isinstance(data, dict) and "config" in data and "config_hash" in data:
        data = data["config"]  # a run manifest
    return from_dict(data)


def load_config(path) -> ExperimentConfig:
    """Read, default-fill and validate a JSON config (or a run manifest)."""
    return loads(Path(path).read_text())


def dumps(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
