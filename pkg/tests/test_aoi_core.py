import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoimdp.aoi_core import (
    RunningAoi,
    UpdateRecord,
    UpdateTimeline,
    append_update,
    instantaneous_aoi,
    integrate_sawtooth,
    sawtooth,
    time_averaged_aoi,
)

positive = st.floats(min_value=1e-3, max_value=10.0, allow_nan=False)
nonneg = st.floats(min_value=0.0, max_value=10.0, allow_nan=False)


@st.composite
def timelines(draw, max_updates=50):
    n = draw(st.integers(min_value=1, max_value=max_updates))
    delays = draw(st.lists(positive, min_size=n, max_size=n))
    waits = draw(st.lists(nonneg, min_size=n - 1, max_size=n - 1))
    initial_age = draw(nonneg)
    return UpdateTimeline.from_delays(delays, waits, initial_age)


def scan_aoi(timeline, t):
    # linear scan for the latest reception at or before t
    age = timeline.initial_age + t
    for u in timeline.updates:
        if u.transmit_time + u.delay <= t:
            age = t - u.transmit_time
    return age


def single(initial_age=0.0, delay=1.0):
    return UpdateTimeline.from_delays([delay], initial_age=initial_age)


class TestInstantaneous:
    def test_before_first_reception(self):
        assert instantaneous_aoi(single(), 0.5) == 0.5

    def test_at_reception(self):
        assert instantaneous_aoi(single(), 1.0) == 1.0

    def test_initial_age_offset(self):
        assert instantaneous_aoi(single(initial_age=3.0, delay=2.0), 1.5) == 4.5

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            instantaneous_aoi(single(), -0.1)

    @settings(max_examples=200, deadline=None)
    @given(timelines(), st.floats(min_value=0.0, max_value=1.0))
    def test_matches_linear_scan(self, tl, frac):
        t = frac * tl.reception_times[-1] * 1.1
        assert instantaneous_aoi(tl, t) == pytest.approx(scan_aoi(tl, t), abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(timelines(max_updates=10))
    def test_vectorised_matches_scalar(self, tl):
        ts = np.linspace(0, tl.reception_times[-1], 101)
        np.testing.assert_allclose(sawtooth(tl, ts), [instantaneous_aoi(tl, t) for t in ts])

    @settings(max_examples=100, deadline=None)
    @given(timelines(max_updates=20))
    def test_sawtooth_shape(self, tl):
        eps = 1e-7
        for i, u in enumerate(tl.updates):
            assert instantaneous_aoi(tl, u.reception_time) == pytest.approx(u.delay, abs=1e-9)
            if i == 0:
                continue
            prev = tl.updates[i - 1]
            left = instantaneous_aoi(tl, u.reception_time - eps) + eps
            # downward jump of exactly the previous delay plus wait
            assert left - u.delay == pytest.approx(prev.delay + prev.wait_after, abs=1e-6)
            # unit slope inside the segment
            mid = prev.reception_time + 0.5 * (u.reception_time - prev.reception_time)
            slope = (instantaneous_aoi(tl, mid + eps) - instantaneous_aoi(tl, mid)) / eps
            assert slope == pytest.approx(1.0, abs=1e-4)


class TestTimeAverage:
    def test_two_updates_hand_area(self):
        tl = UpdateTimeline.from_delays([1.0, 1.0], [0.0])
        s = time_averaged_aoi(tl)
        assert s.total_area == 2.0
        assert s.horizon == 2.0
        assert s.time_avg_aoi == 1.0
        assert s.update_count == 1

    def test_constant_delay_limit(self):
        c = 0.7
        s = time_averaged_aoi(UpdateTimeline.from_delays([c] * 5001))
        assert s.time_avg_aoi == pytest.approx(1.5 * c, rel=1e-3)

    def test_vanishing_first_delay(self):
        s = time_averaged_aoi(single(initial_age=5.0, delay=1e-9))
        assert s.time_avg_aoi == pytest.approx(5.0, abs=1e-8)

    def test_single_update_is_initial_segment(self):
        s = time_averaged_aoi(single(initial_age=2.0, delay=4.0))
        assert s.time_avg_aoi == pytest.approx(2.0 + 4.0 / 2)

    def test_literal_formula_halves_initial_area(self):
        tl = UpdateTimeline.from_delays([1.0, 1.0], [0.0])
        s = time_averaged_aoi(tl, paper_literal_formula=True)
        # (3 + 0.5) / (2 * 2)
        assert s.time_avg_aoi == pytest.approx(0.875)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            time_averaged_aoi(UpdateTimeline())

    def test_csv_row(self):
        row = time_averaged_aoi(UpdateTimeline.from_delays([1.0, 1.0], [0.0])).as_row()
        assert list(row) == ["delta_bar", "total_area", "horizon", "n_updates"]

    @settings(max_examples=200, deadline=None)
    @given(timelines(), st.floats(min_value=0.01, max_value=100.0))
    def test_scale_equivariance(self, tl, k):
        scaled = UpdateTimeline.from_delays(
            [k * y for y in tl.delays], [k * z for z in tl.waits], k * tl.initial_age
        )
        assert time_averaged_aoi(scaled).time_avg_aoi == pytest.approx(
            k * time_averaged_aoi(tl).time_avg_aoi, rel=1e-12
        )

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(min_value=0.1, max_value=10.0),
        st.integers(min_value=1, max_value=30),
        st.data(),
    )
    def test_wait_monotone_for_constant_delays(self, c, n, data):
        k = data.draw(st.integers(min_value=0, max_value=n - 1))
        extra = data.draw(st.floats(min_value=1e-3, max_value=10.0))
        base = UpdateTimeline.from_delays([c] * (n + 1))
        waits = [0.0] * n
        waits[k] = extra
        bumped = UpdateTimeline.from_delays([c] * (n + 1), waits)
        assert time_averaged_aoi(bumped).time_avg_aoi >= time_averaged_aoi(base).time_avg_aoi

    def test_waiting_can_lower_average_with_varying_delays(self):
        # short delays followed by a long one: padding the short segment lowers the mean
        base = UpdateTimeline.from_delays([0.1, 0.1, 100.0], [0.0, 0.0])
        bumped = UpdateTimeline.from_delays([0.1, 0.1, 100.0], [1.0, 0.0])
        assert time_averaged_aoi(bumped).time_avg_aoi < time_averaged_aoi(base).time_avg_aoi

    @settings(max_examples=100, deadline=None)
    @given(timelines(max_updates=20), st.data())
    def test_wait_effect_sign_matches_marginal_rule(self, tl, data):
        if len(tl) < 2:
            return
        k = data.draw(st.integers(min_value=0, max_value=len(tl) - 2))
        h = 1e-6
        waits = tl.waits
        before = time_averaged_aoi(tl).time_avg_aoi
        waits[k] += h
        after = time_averaged_aoi(UpdateTimeline.from_delays(tl.delays, waits, tl.initial_age))
        ys = tl.delays
        marginal = ys[k] + ys[k + 1] + tl.waits[k] - before
        if abs(marginal) > 1e-3:
            assert np.sign(after.time_avg_aoi - before) == np.sign(marginal)


class TestIntegrate:
    def test_hand_example(self):
        tl = UpdateTimeline.from_delays([1.0, 1.0], [0.0])
        assert integrate_sawtooth(tl, 1e-6) == pytest.approx(1.0, rel=1e-6)

    def test_single_update(self):
        assert integrate_sawtooth(single(), 1e-4) == pytest.approx(0.5, rel=1e-8)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            integrate_sawtooth(single(), 0.0)

    @settings(max_examples=30, deadline=None)
    @given(timelines())
    def test_agrees_with_closed_form(self, tl):
        closed = time_averaged_aoi(tl).time_avg_aoi
        numeric = integrate_sawtooth(tl, tl.horizon * 1e-6)
        assert abs(closed - numeric) / closed <= 1e-4


class TestAppend:
    def test_first(self):
        tl = append_update(UpdateTimeline(), 2.0, 0.0)
        assert tl.updates[0].transmit_time == 0.0
        assert tl.updates[0].reception_time == 2.0

    def test_after_wait(self):
        tl = UpdateTimeline.from_delays([5.0])
        tl = append_update(tl, 1.0, 3.0)
        assert tl.updates[-1].transmit_time == 8.0
        assert tl.updates[-1].reception_time == 9.0
        assert tl.updates[0].wait_after == 3.0

    def test_rejects_nonpositive_delay(self):
        with pytest.raises(ValueError):
            append_update(UpdateTimeline(), 0.0)

    def test_rejects_wait_on_empty(self):
        with pytest.raises(ValueError):
            append_update(UpdateTimeline(), 1.0, 2.0)

    def test_inconsistent_records_rejected(self):
        with pytest.raises(ValueError):
            UpdateTimeline(0.0, (UpdateRecord(0.0, 1.0, 0.0), UpdateRecord(5.0, 1.0)))

    def test_random_appends_monotone(self):
        rng = np.random.default_rng(7)
        tl = UpdateTimeline()
        for i in range(1000):
            tl = append_update(tl, rng.uniform(1e-3, 5.0), 0.0 if i == 0 else rng.uniform(0, 5.0))
        d = tl.reception_times
        assert all(a < b for a, b in zip(d, d[1:]))


@settings(max_examples=100, deadline=None)
@given(timelines())
def test_running_accumulator_matches_closed_form_exactly(tl):
    acc = RunningAoi(tl.initial_age)
    values = []
    ys, zs = tl.delays, tl.waits
    for i, y in enumerate(ys):
        values.append(acc.append(y, zs[i - 1] if i else 0.0))
    assert values[-1] == time_averaged_aoi(tl).time_avg_aoi
    assert acc.timeline() == tl
    assert all(math.isfinite(v) for v in values)
