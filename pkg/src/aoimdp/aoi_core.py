"""Sawtooth age-of-information process over an update timeline.

Update ``i`` is transmitted at ``T_i`` and received ``Y_i`` later at
``D_i = T_i + Y_i``; after reception the source waits ``Z_i`` before the next
transmission, so ``T_{i+1} = D_i + Z_i``.  Between receptions the age grows
with slope one and drops to ``Y_i`` at ``D_i``::

    age(t) = initial_age + t      for 0 <= t < D_0
    age(t) = t - T_i              for D_i <= t < D_{i+1}

The first update is transmitted at ``t = 0``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

_REL_TOL = 1e-9
_ABS_TOL = 1e-12


@dataclass(frozen=True)
class UpdateRecord:
    transmit_time: float
    delay: float
    wait_after: float = 0.0

    def __post_init__(self):
        if not self.delay > 0:
            raise ValueError(f"delay must be > 0, got {self.delay}")
        if not self.wait_after >= 0:
            raise ValueError(f"wait_after must be >= 0, got {self.wait_after}")

    @property
    def reception_time(self) -> float:
        return self.transmit_time + self.delay


@dataclass(frozen=True)
class UpdateTimeline:
    """Immutable ordered list of updates plus the age at ``t = 0``.

    The ``wait_after`` of the last record is the wait that precedes the next
    (not yet appended) transmission and does not count toward the horizon.
    """

    initial_age: float = 0.0
    updates: tuple[UpdateRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.initial_age >= 0:
            raise ValueError(f"initial_age must be >= 0, got {self.initial_age}")
        object.__setattr__(self, "updates", tuple(self.updates))
        if self.updates and not math.isclose(self.updates[0].transmit_time, 0.0, abs_tol=_ABS_TOL):
            raise ValueError("first update must be transmitted at t = 0")
        for prev, cur in zip(self.updates, self.updates[1:]):
            expected = prev.reception_time + prev.wait_after
            if not math.isclose(cur.transmit_time, expected, rel_tol=_REL_TOL, abs_tol=_ABS_TOL):
                raise ValueError(
                    f"transmit time {cur.transmit_time} != previous reception + wait {expected}"
                )

    def __len__(self) -> int:
        return len(self.updates)

    @classmethod
    def from_delays(cls, delays, waits=None, initial_age: float = 0.0) -> "UpdateTimeline":
        """Build a timeline from delays ``Y_0..Y_N`` and waits ``Z_0..Z_{N-1}``."""
        delays = [float(y) for y in delays]
        waits = [0.0] * max(len(delays) - 1, 0) if waits is None else [float(z) for z in waits]
        if len(waits) != max(len(delays) - 1, 0):
            raise ValueError("need exactly one wait between consecutive delays")
        tl = cls(initial_age=initial_age)
        prev_wait = 0.0
        for i, y in enumerate(delays):
            tl = append_update(tl, y, prev_wait)
            prev_wait = waits[i] if i < len(waits) else 0.0
        return tl

    @property
    def delays(self) -> list[float]:
        return [u.delay for u in self.updates]

    @property
    def waits(self) -> list[float]:
        """Waits ``Z_0..Z_{N-1}`` between consecutive updates."""
        return [u.wait_after for u in self.updates[:-1]]

    @property
    def transmit_times(self) -> list[float]:
        return [u.transmit_time for u in self.updates]

    @property
    def reception_times(self) -> list[float]:
        return [u.reception_time for u in self.updates]

    @property
    def horizon(self) -> float:
        return _horizon(self.delays, self.waits)


@dataclass(frozen=True)
class AoiSummary:
    time_avg_aoi: float
    total_area: float
    horizon: float
    update_count: int

    def as_row(self) -> dict:
        return {
            "delta_bar": self.time_avg_aoi,
            "total_area": self.total_area,
            "horizon": self.horizon,
            "n_updates": self.update_count,
        }


CSV_COLUMNS = ("delta_bar", "total_area", "horizon", "n_updates")


def initial_area(initial_age: float, first_delay: float) -> float:
    """Area under the age curve before the first reception."""
    return 0.5 * (2.0 * initial_age + first_delay) * first_delay


def segment_area(prev_delay: float, delay: float, wait: float) -> float:
    """Trapezoid area between receptions ``i-1`` and ``i``.

    The age starts at ``prev_delay`` and rises for ``wait + delay``.
    """
    return 0.5 * (2.0 * prev_delay + delay + wait) * (delay + wait)


def _horizon(delays, waits) -> float:
    terms = [delays[0]]
    for z, y in zip(waits, delays[1:]):
        terms.append(z)
        terms.append(y)
    return math.fsum(terms)


def _areas(timeline: UpdateTimeline) -> list[float]:
    ys = timeline.delays
    zs = timeline.waits
    areas = [initial_area(timeline.initial_age, ys[0])]
    for i in range(1, len(ys)):
        areas.append(segment_area(ys[i - 1], ys[i], zs[i - 1]))
    return areas


def append_update(timeline: UpdateTimeline, delay: float, wait_before: float = 0.0) -> UpdateTimeline:
    """Return a new timeline with one more update.

    ``wait_before`` is the wait after the previous reception; the new update is
    transmitted at ``D_prev + wait_before``.  The first update is always sent at
    ``t = 0`` so ``wait_before`` must be zero on an empty timeline.
    """
    delay = float(delay)
    wait_before = float(wait_before)
    if not delay > 0:
        raise ValueError(f"delay must be > 0, got {delay}")
    if not wait_before >= 0:
        raise ValueError(f"wait must be >= 0, got {wait_before}")
    if not timeline.updates:
        if wait_before != 0.0:
            raise ValueError("the first update is transmitted at t = 0; wait must be 0")
        return UpdateTimeline(timeline.initial_age, (UpdateRecord(0.0, delay),))
    last = timeline.updates[-1]
    closed = UpdateRecord(last.transmit_time, last.delay, wait_before)
    new = UpdateRecord(closed.reception_time + wait_before, delay)
    return UpdateTimeline(timeline.initial_age, timeline.updates[:-1] + (closed, new))


def instantaneous_aoi(timeline: UpdateTimeline, t: float) -> float:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if not timeline.updates:
        return timeline.initial_age + t
    receptions = timeline.reception_times
    i = bisect.bisect_right(receptions, t) - 1
    if i < 0:
        return timeline.initial_age + t
    return t - timeline.updates[i].transmit_time


def sawtooth(timeline: UpdateTimeline, t) -> np.ndarray:
    """Vectorised :func:`instantaneous_aoi` over an array of times."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be >= 0")
    if not timeline.updates:
        return timeline.initial_age + t
    receptions = np.asarray(timeline.reception_times)
    transmits = np.asarray(timeline.transmit_times)
    idx = np.searchsorted(receptions, t, side="right") - 1
    return np.where(idx < 0, timeline.initial_age + t, t - transmits[np.maximum(idx, 0)])


def time_averaged_aoi(timeline: UpdateTimeline, paper_literal_formula: bool = False) -> AoiSummary:
    """Closed-form time average of the sawtooth over ``[0, D_N]``.

    The default is the exact area over horizon.  ``paper_literal_formula``
    instead divides the initial-segment area by two a second time, which is
    what the published expression does when read literally.
    """
    if not timeline.updates:
        raise ValueError("timeline has no updates")
    horizon = timeline.horizon
    if not horizon > 0:
        raise ValueError("timeline horizon must be > 0")
    areas = _areas(timeline)
    if paper_literal_formula:
        # (sum of un-halved segment products + S_0) / (2 * horizon)
        total = 0.5 * math.fsum([areas[0]] + [2.0 * a for a in areas[1:]])
    else:
        total = math.fsum(areas)
    return AoiSummary(total / horizon, total, horizon, len(timeline.updates) - 1)


def integrate_sawtooth(timeline: UpdateTimeline, dt: float) -> float:
    """Trapezoid-rule time average of :func:`instantaneous_aoi` with step ``dt``.

    Independent numeric check of :func:`time_averaged_aoi`.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if not timeline.updates:
        raise ValueError("timeline has no updates")
    horizon = timeline.reception_times[-1]
    n = max(int(math.ceil(horizon / dt)), 1)
    t = np.linspace(0.0, horizon, n + 1)
    return float(np.trapezoid(_sawtooth_sorted(timeline, t), t) / horizon)


def _sawtooth_sorted(timeline: UpdateTimeline, t: np.ndarray) -> np.ndarray:
    # same values as sawtooth() for an ascending grid, via one np.repeat
    # instead of a per-sample binary search
    bounds = np.searchsorted(t, timeline.reception_times, side="left")
    counts = np.diff(np.concatenate(([0], bounds, [t.size])))
    offsets = np.concatenate(([-timeline.initial_age], timeline.transmit_times))
    return t - np.repeat(offsets, counts)


class RunningAoi:
    """Mutable accumulator mirroring :func:`append_update` for hot loops.

    Keeps per-segment areas so the running average uses the same terms and
    the same exactly-rounded sums as :func:`time_averaged_aoi`.
    """

    def __init__(self, initial_age: float = 0.0):
        self.initial_age = float(initial_age)
        self.delays: list[float] = []
        self.waits: list[float] = []
        self._areas: list[float] = []
        self._spans: list[float] = []

    def append(self, delay: float, wait_before: float = 0.0) -> float:
        """Record an update and return the new time-averaged AoI."""
        self.add(delay, wait_before)
        return self.value

    def add(self, delay: float, wait_before: float = 0.0) -> float:
        """Record an update and return the area of the segment it closes."""
        delay = float(delay)
        wait_before = float(wait_before)
        if not delay > 0:
            raise ValueError(f"delay must be > 0, got {delay}")
        if not wait_before >= 0:
            raise ValueError(f"wait must be >= 0, got {wait_before}")
        if not self.delays:
            if wait_before != 0.0:
                raise ValueError("the first update is transmitted at t = 0; wait must be 0")
            self._areas.append(initial_area(self.initial_age, delay))
            self._spans.append(delay)
        else:
            self._areas.append(segment_area(self.delays[-1], delay, wait_before))
            self._spans.extend((wait_before, delay))
            self.waits.append(wait_before)
        self.delays.append(delay)
        return self._areas[-1]

    @property
    def value(self) -> float:
        if not self.delays:
            raise ValueError("no updates recorded")
        return math.fsum(self._areas) / math.fsum(self._spans)

    @property
    def horizon(self) -> float:
        return math.fsum(self._spans)

    def timeline(self) -> UpdateTimeline:
        return UpdateTimeline.from_delays(self.delays, self.waits, self.initial_age)
