"""Signal-level delay and heading estimators.

Delay: a known replica ``s[k]`` (length M) arrives shifted by an integer
delay inside a record of length N with additive white Gaussian noise,
``x[n] = s[n - Y] + w[n]``.  The estimate maximises the replica correlation

    J[Y] = sum_{n=Y}^{Y+M-1} x[n] s[n - Y],    0 <= Y <= N - M.

Heading: a sensor array with spacing ``d`` sees a tone of frequency ``F0``
arriving at angle ``beta``; across the array this is a sinusoid of spatial
frequency ``F0 * d / c * cos(beta)`` cycles per sensor.  The heading is the
maximiser of the spatial periodogram

    I(beta) = |sum_n x[n] exp(-j 2 pi F0 d/c cos(beta) n)|^2 / M.

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np


class NoEstimateError(ValueError):
    """The statistic is flat, so no maximiser exists."""


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _as_signal(samples, name="signal") -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite samples")
    return x


def pn_sequence(length: int, seed=0) -> np.ndarray:
    """Pseudorandom +/-1 sequence; sharp autocorrelation peak at zero lag."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return np.where(_rng(seed).random(length) < 0.5, -1.0, 1.0)


def chirp_sequence(length: int, f_start: float = 0.05, f_stop: float = 0.45) -> np.ndarray:
    """Unit-amplitude linear chirp sweeping ``f_start..f_stop`` cycles/sample."""
    if length < 1:
        raise ValueError("length must be >= 1")
    n = np.arange(length)
    rate = (f_stop - f_start) / max(length - 1, 1)
    return np.cos(2 * np.pi * (f_start * n + 0.5 * rate * n**2))


@dataclass(frozen=True)
class DelayEstConfig:
    known_sequence: np.ndarray
    record_length: int
    noise_variance: float = 0.0

    def __post_init__(self):
        s = _as_signal(self.known_sequence, "known_sequence")
        s.setflags(write=False)
        object.__setattr__(self, "known_sequence", s)
        if not 0 < s.size <= self.record_length:
            raise ValueError(f"need 0 < M <= N, got M={s.size}, N={self.record_length}")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be >= 0")

    @classmethod
    def pn(cls, m: int, n: int, noise_variance: float = 0.0, seed=0) -> "DelayEstConfig":
        return cls(pn_sequence(m, seed), n, noise_variance)

    @property
    def m(self) -> int:
        return self.known_sequence.size

    @property
    def n(self) -> int:
        return self.record_length

    @property
    def max_delay(self) -> int:
        return self.record_length - self.m

    @property
    def signal_energy(self) -> float:
        return float(self.known_sequence @ self.known_sequence)

    def with_snr(self, snr: float) -> "DelayEstConfig":
        """Copy with noise variance set for a per-sample SNR (linear)."""
        return DelayEstConfig(self.known_sequence, self.record_length, self.signal_energy / (snr * self.m))


@dataclass(frozen=True)
class HeadingConfig:
    amplitude: float = 1.0
    carrier_frequency: float = 1500.0
    sensor_spacing: float = 0.25
    propagation_speed: float = 1500.0
    phase: float = 0.0
    sample_count: int = 256
    noise_variance: float = 0.0
    grid_resolution: float = 1e-3
    refine: bool = True

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("amplitude must be > 0")
        if not (self.carrier_frequency > 0 and self.sensor_spacing > 0 and self.propagation_speed > 0):
            raise ValueError("carrier_frequency, sensor_spacing and propagation_speed must be > 0")
        if self.spatial_scale > 0.5:
            raise ValueError(f"F0*d/c = {self.spatial_scale} exceeds 0.5; heading not identifiable")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be >= 0")
        if not 0 < self.grid_resolution < math.pi / 2:
            raise ValueError("grid_resolution must lie in (0, pi/2)")

    @property
    def spatial_scale(self) -> float:
        """``F0 * d / c``: spatial frequency at broadside-to-endfire ``cos(beta) = 1``."""
        return self.carrier_frequency * self.sensor_spacing / self.propagation_speed

    def grid(self) -> np.ndarray:
        return _beta_grid(self.grid_resolution)


def _beta_grid(resolution: float) -> np.ndarray:
    k = np.arange(1, int(math.ceil((math.pi / 2) / resolution)) + 1)
    g = k * resolution
    return g[g < math.pi / 2]


@dataclass(frozen=True)
class DelayEstimate:
    estimate: int
    candidates: np.ndarray = field(repr=False)
    scores: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class HeadingEstimate:
    estimate: float
    candidates: np.ndarray = field(repr=False)
    scores: np.ndarray = field(repr=False)
    grid_estimate: float = math.nan


# delay ---------------------------------------------------------------------


def synthesize_delayed_observation(cfg: DelayEstConfig, true_delay: int, rng_seed=None) -> np.ndarray:
    if not (isinstance(true_delay, (int, np.integer)) and 0 <= true_delay <= cfg.max_delay):
        raise ValueError(f"true_delay must be an integer in [0, {cfg.max_delay}], got {true_delay}")
    x = np.zeros(cfg.n)
    x[true_delay : true_delay + cfg.m] = cfg.known_sequence
    if cfg.noise_variance > 0:
        x += math.sqrt(cfg.noise_variance) * _rng(rng_seed).standard_normal(cfg.n)
    return x


def correlation_statistic(cfg: DelayEstConfig, observed) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(lags, J)`` for every lag in ``[0, N - M]``."""
    x = _as_signal(observed, "observed")
    if x.size != cfg.n:
        raise ValueError(f"observed length {x.size} != record length {cfg.n}")
    scores = np.correlate(x, cfg.known_sequence, mode="valid")
    return np.arange(scores.size), scores


def estimate_delay(cfg: DelayEstConfig, observed) -> DelayEstimate:
    """Correlation argmax; ties go to the smallest lag."""
    lags, scores = correlation_statistic(cfg, observed)
    return DelayEstimate(int(np.argmax(scores)), lags, scores)


def delay_recovery_rate(cfg: DelayEstConfig, n_trials: int, base_seed: int = 0) -> float:
    """Fraction of seeded trials whose estimate equals the true delay.

    Trial ``k`` uses seed ``base_seed ^ k`` for both the true delay (uniform on
    ``[0, N - M]``) and the noise.
    """
    hits = 0
    for k in range(n_trials):
        rng = _rng(base_seed ^ k)
        y = int(rng.integers(0, cfg.max_delay + 1))
        x = synthesize_delayed_observation(cfg, y, rng)
        hits += estimate_delay(cfg, x).estimate == y
    return hits / n_trials


# heading -------------------------------------------------------------------


def spatial_frequency(cfg: HeadingConfig, heading) -> np.ndarray | float:
    return cfg.spatial_scale * np.cos(heading)


def synthesize_heading_signal(cfg: HeadingConfig, true_heading: float, rng_seed=None) -> np.ndarray:
    if not 0 < true_heading < math.pi / 2:
        raise ValueError(f"heading must lie in (0, pi/2), got {true_heading}")
    n = np.arange(cfg.sample_count)
    f = spatial_frequency(cfg, true_heading)
    x = cfg.amplitude * np.cos(2 * np.pi * f * n + cfg.phase)
    if cfg.noise_variance > 0:
        x = x + math.sqrt(cfg.noise_variance) * _rng(rng_seed).standard_normal(cfg.sample_count)
    return x


def _phasors(scale: float, headings: np.ndarray, m: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.outer(scale * np.cos(headings), np.arange(m)))


@functools.lru_cache(maxsize=8)
def _grid_phasors(scale: float, resolution: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    grid = _beta_grid(resolution)
    return grid, _phasors(scale, grid, m)


def _check_length(cfg: HeadingConfig, signal) -> np.ndarray:
    x = _as_signal(signal)
    if x.size != cfg.sample_count:
        raise ValueError(f"signal length {x.size} != sample_count {cfg.sample_count}")
    return x


def periodogram_at(cfg: HeadingConfig, signal, headings) -> np.ndarray:
    x = _check_length(cfg, signal)
    headings = np.atleast_1d(np.asarray(headings, dtype=float))
    return np.abs(_phasors(cfg.spatial_scale, headings, x.size) @ x) ** 2 / x.size


def spatial_periodogram(cfg: HeadingConfig, signal) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(beta_grid, I(beta))`` on the uniform grid over ``(0, pi/2)``."""
    x = _check_length(cfg, signal)
    grid, phasors = _grid_phasors(cfg.spatial_scale, cfg.grid_resolution, x.size)
    return grid.copy(), np.abs(phasors @ x) ** 2 / x.size


def estimate_heading(cfg: HeadingConfig, signal) -> HeadingEstimate:
    """Grid argmax of the periodogram, optionally refined by a 3-point parabola."""
    grid, scores = spatial_periodogram(cfg, signal)
    if not np.ptp(scores) > 0:
        raise NoEstimateError("periodogram is flat; no heading estimate")
    k = int(np.argmax(scores))
    beta = float(grid[k])
    if cfg.refine and 0 < k < grid.size - 1:
        y0, y1, y2 = scores[k - 1], scores[k], scores[k + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            offset = 0.5 * (y0 - y2) / denom
            beta = beta + float(np.clip(offset, -0.5, 0.5)) * cfg.grid_resolution
    beta = min(max(beta, grid[0]), grid[-1])
    return HeadingEstimate(beta, grid, scores, float(grid[k]))


def heading_rmse(cfg: HeadingConfig, true_heading: float, n_trials: int, base_seed: int = 0) -> float:
    errs = np.empty(n_trials)
    for k in range(n_trials):
        x = synthesize_heading_signal(cfg, true_heading, base_seed ^ k)
        errs[k] = estimate_heading(cfg, x).estimate - true_heading
    return float(np.sqrt(np.mean(errs**2)))
