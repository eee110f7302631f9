"""Observation-delay samplers.

All delays are in environment steps and strictly positive: a discrete
draw of zero is reported as one step.  The SDM variant does not draw from a
distribution at all; it synthesises a noisy delayed replica whose true lag
is the propagation delay implied by the context distance and returns what
the correlation estimator recovers, so estimator error enters the delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .estimation import DelayEstConfig, estimate_delay, synthesize_delayed_observation


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be > 0")


@dataclass(frozen=True)
class Poisson:
    mean: float

    def __post_init__(self):
        if not self.mean > 0:
            raise ValueError("poisson mean must be > 0")


@dataclass(frozen=True)
class Geometric:
    p: float

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError("geometric success probability must lie in (0, 1]")


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not self.value >= 1:
            raise ValueError("constant delay must be at least one step")


@dataclass(frozen=True)
class Sdm:
    """Estimator-in-the-loop delay.

    ``snr_policy`` is ``"fixed"`` (noise variance from ``delay_config``) or
    ``"distance"`` (variance grows with the square of distance, equal to the
    configured value at ``nominal_distance``).
    """

    delay_config: DelayEstConfig
    propagation_speed: float
    sample_period: float = 1.0
    nominal_distance: float = 0.0
    snr_policy: str = "fixed"

    def __post_init__(self):
        if not (self.propagation_speed > 0 and self.sample_period > 0):
            raise ValueError("propagation_speed and sample_period must be > 0")
        if not self.nominal_distance >= 0:
            raise ValueError("nominal_distance must be >= 0")
        if self.snr_policy not in ("fixed", "distance"):
            raise ValueError(f"unknown snr_policy {self.snr_policy!r}")
        if self.snr_policy == "distance" and not self.nominal_distance > 0:
            raise ValueError("distance snr_policy needs nominal_distance > 0")

    def true_lag(self, distance: float) -> int:
        lag = round(distance / self.propagation_speed / self.sample_period)
        return int(min(max(lag, 0), self.delay_config.max_delay))

    def noise_variance(self, distance: float) -> float:
        base = self.delay_config.noise_variance
        if self.snr_policy == "distance":
            return base * (distance / self.nominal_distance) ** 2
        return base


DelayModel = Union[Sdm, Exponential, Poisson, Geometric, Constant]

KINDS = {"sdm": Sdm, "exponential": Exponential, "poisson": Poisson, "geometric": Geometric, "constant": Constant}


def kind_of(model: DelayModel) -> str:
    for name, cls in KINDS.items():
        if isinstance(model, cls):
            return name
    raise TypeError(f"not a delay model: {model!r}")


def sample_delay(model: DelayModel, rng=None, context: float | None = None) -> float:
    """Draw one positive delay (in steps).

    ``context`` is the propagation distance; only SDM uses it and falls back
    to ``nominal_distance`` when it is omitted.
    """
    rng = np.random.default_rng(rng)
    match model:
        case Constant(value):
            return float(value)
        case Exponential(rate):
            y = rng.exponential(1.0 / rate)
        case Poisson(mean):
            y = float(rng.poisson(mean))
        case Geometric(p):
            y = float(rng.geometric(p))
        case Sdm():
            y = float(_sdm_estimate(model, rng, context))
        case _:
            raise TypeError(f"not a delay model: {model!r}")
    return y if y > 0 else 1.0


def _sdm_estimate(model: Sdm, rng: np.random.Generator, context: float | None) -> int:
    # same synthesis and argmax as estimation.synthesize_delayed_observation /
    # estimate_delay, without per-call validation (this runs every env step)
    distance = model.nominal_distance if context is None else float(context)
    cfg = model.delay_config
    s = cfg.known_sequence
    lag = model.true_lag(distance)
    x = np.zeros(cfg.record_length)
    x[lag : lag + s.size] = s
    var = model.noise_variance(distance)
    if var > 0:
        x += math.sqrt(var) * rng.standard_normal(cfg.record_length)
    return int(np.argmax(np.correlate(x, s, mode="valid")))


def sdm_reference_estimate(model: Sdm, rng, context: float | None = None) -> int:
    """Slow path through :mod:`aoimdp.estimation`; used to cross-check the fast one."""
    rng = np.random.default_rng(rng)
    distance = model.nominal_distance if context is None else float(context)
    cfg = model.delay_config
    cfg = DelayEstConfig(cfg.known_sequence, cfg.record_length, model.noise_variance(distance))
    x = synthesize_delayed_observation(cfg, model.true_lag(distance), rng)
    return estimate_delay(cfg, x).estimate


def sample_delays(model: DelayModel, size: int, rng=None, context: float | None = None) -> np.ndarray:
    """Vector of ``size`` independent draws; same zero-to-one-step mapping."""
    rng = np.random.default_rng(rng)
    match model:
        case Constant(value):
            y = np.full(size, float(value))
        case Exponential(rate):
            y = rng.exponential(1.0 / rate, size)
        case Poisson(mean):
            y = rng.poisson(mean, size).astype(float)
        case Geometric(p):
            y = rng.geometric(p, size).astype(float)
        case _:
            return np.array([sample_delay(model, rng, context) for _ in range(size)])
    y[y <= 0] = 1.0
    return y


def mean_delay(model: DelayModel) -> float:
    """Analytic mean of the underlying distribution (before the zero mapping).

    For SDM this is the noiseless propagation delay at ``nominal_distance``.
    """
    match model:
        case Constant(value):
            return float(value)
        case Exponential(rate):
            return 1.0 / rate
        case Poisson(mean):
            return float(mean)
        case Geometric(p):
            return 1.0 / p
        case Sdm():
            return float(max(model.true_lag(model.nominal_distance), 1))
    raise TypeError(f"not a delay model: {model!r}")


def effective_mean_delay(model: DelayModel) -> float:
    """Mean of what :func:`sample_delay` actually returns.

    Only Poisson changes: the mass ``exp(-mean)`` at zero moves to one step.
    """
    if isinstance(model, Poisson):
        return model.mean + math.exp(-model.mean)
    return mean_delay(model)


def mean_matched(kind: str, mean: float) -> DelayModel:
    """Parametric model of the given kind with analytic mean ``mean`` steps."""
    if kind == "exponential":
        return Exponential(1.0 / mean)
    if kind == "poisson":
        return Poisson(mean)
    if kind == "geometric":
        return Geometric(min(1.0 / mean, 1.0))
    if kind == "constant":
        return Constant(max(mean, 1.0))
    raise ValueError(f"cannot mean-match kind {kind!r}")
