from __future__ import annotations

import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

import oracles
from wxverify.climatology import (DAYS_PER_YEAR, DailyHistory,
                                  build_daily_mean_climatology,
                                  build_thresholds, calendar_day_index,
                                  daily_extremes, window_indices)
from wxverify.errors import InsufficientHistory


def six_hourly_year(year, fn):
    """[(timestamp, fn(timestamp)), ...] for all synoptic hours of a year."""
    t = datetime(year, 1, 1, tzinfo=timezone.utc)
    end = datetime(year + 1, 1, 1, tzinfo=timezone.utc)
    out = []
    while t < end:
        out.append((t, fn(t)))
        t += timedelta(hours=6)
    return out


class TestCalendarDayIndex:
    def test_first_and_last(self):
        assert calendar_day_index(datetime(2025, 1, 1, tzinfo=timezone.utc)) == 0
        assert calendar_day_index(datetime(2025, 12, 31, tzinfo=timezone.utc)) == 364

    def test_leap_day_maps_to_feb_28(self):
        feb28 = calendar_day_index(datetime(2024, 2, 28, tzinfo=timezone.utc))
        feb29 = calendar_day_index(datetime(2024, 2, 29, tzinfo=timezone.utc))
        assert feb29 == feb28 == 58

    def test_march_first_index_is_calendar_stable(self):
        # same index in leap and non-leap years
        assert calendar_day_index(datetime(2024, 3, 1, tzinfo=timezone.utc)) \
            == calendar_day_index(datetime(2025, 3, 1, tzinfo=timezone.utc)) == 59


class TestDailyExtremes:
    def test_hand_day(self):
        t0 = datetime(2025, 3, 10, tzinfo=timezone.utc)
        samples = [(t0 + timedelta(hours=6 * k), v)
                   for k, v in enumerate([280.0, 285.0, 290.0, 283.0])]
        dmax, dmin = daily_extremes(samples)
        d = calendar_day_index(t0)
        assert dmax[d] == 290.0 and dmin[d] == 280.0

    def test_constant_day(self):
        t0 = datetime(2025, 3, 10, tzinfo=timezone.utc)
        samples = [(t0 + timedelta(hours=6 * k), 300.0) for k in range(4)]
        dmax, dmin = daily_extremes(samples)
        d = calendar_day_index(t0)
        assert dmax[d] == 300.0 and dmin[d] == 300.0

    def test_incomplete_day_absent(self):
        t0 = datetime(2025, 3, 10, tzinfo=timezone.utc)
        samples = [(t0 + timedelta(hours=6 * k), 300.0) for k in range(3)]
        dmax, _ = daily_extremes(samples)
        assert np.isnan(dmax[calendar_day_index(t0)])

    def test_off_synoptic_hour_rejected(self):
        with pytest.raises(ValueError):
            daily_extremes([(datetime(2025, 3, 10, 5, tzinfo=timezone.utc), 1.0)])

    def test_sinusoid_matches_closed_form(self):
        def temp(t):
            d = calendar_day_index(t) + 1
            return (285.0 + 10.0 * math.sin(2 * math.pi * d / 365.0)
                    + 3.0 * math.sin(2 * math.pi * t.hour / 24.0 - math.pi / 2))

        dmax, dmin = daily_extremes(six_hourly_year(2025, temp))
        for day in (0, 99, 199, 364):
            base = 285.0 + 10.0 * math.sin(2 * math.pi * (day + 1) / 365.0)
            hours = np.array([0, 6, 12, 18])
            diurnal = 3.0 * np.sin(2 * np.pi * hours / 24.0 - np.pi / 2)
            assert dmax[day] == pytest.approx(base + diurnal.max(), abs=1e-9)
            assert dmin[day] == pytest.approx(base + diurnal.min(), abs=1e-9)

    def test_leap_year_day_count(self):
        samples = six_hourly_year(2024, lambda t: 1.0)
        dmax, dmin = daily_extremes(samples)
        assert not np.any(np.isnan(dmax)) and not np.any(np.isnan(dmin))


def dense_history(rng, n_years=12, n_loc=3, loc_mean=288.0):
    dmax = loc_mean + 5.0 * rng.standard_normal((n_years, DAYS_PER_YEAR, n_loc))
    dmin = dmax - np.abs(3.0 * rng.standard_normal(dmax.shape)) - 1.0
    years = tuple(range(2013, 2013 + n_years))
    return DailyHistory(years, dmax, dmin)


class TestBuildThresholds:
    def test_degenerate_constant_pool(self):
        years = (2019, 2020)
        dmax = np.full((2, DAYS_PER_YEAR, 1), 288.0)
        history = DailyHistory(years, dmax, dmax.copy())
        tf = build_thresholds(history)
        assert np.all(tf.tau_heat == 288.0)
        assert np.all(tf.tau_cold == 288.0)

    def test_ramp_pool_closed_form(self, rng):
        # pool of 12y x 15d containing exactly {1..180}
        n_years, half = 12, 7
        window = 2 * half + 1
        dmax = np.zeros((n_years, DAYS_PER_YEAR, 1))
        day = 100
        win = window_indices(day, half)
        ramp = iter(range(1, n_years * window + 1))
        for y in range(n_years):
            for c in win:
                dmax[y, c, 0] = next(ramp)
        history = DailyHistory(tuple(range(2010, 2022)), dmax,
                               dmax - 1000.0)
        tf = build_thresholds(history, half_window=half)
        assert tf.tau_heat[day, 0] == pytest.approx(162.1, abs=1e-12)
        # cold side of the same ramp (shifted by the constant -1000)
        assert tf.tau_cold[day, 0] == pytest.approx(18.9 - 1000.0, abs=1e-12)

    def test_matches_sort_oracle_exactly(self, rng):
        history = dense_history(rng)
        tf = build_thresholds(history)
        probes = [(int(rng.integers(0, DAYS_PER_YEAR)), int(rng.integers(0, 3)))
                  for _ in range(120)]
        probes += [(0, 0), (364, 1), (3, 2), (361, 0)]  # force year wrap
        for day, loc in probes:
            win = window_indices(day, 7)
            pool_max = history.daily_max[:, win, loc].ravel()
            pool_min = history.daily_min[:, win, loc].ravel()
            assert tf.tau_heat[day, loc] == \
                oracles.percentile_sorted_oracle(pool_max, 0.9)
            assert tf.tau_cold[day, loc] == \
                oracles.percentile_sorted_oracle(pool_min, 0.1)

    def test_requires_two_years(self, rng):
        history = dense_history(rng, n_years=1)
        with pytest.raises(InsufficientHistory):
            build_thresholds(history)

    def test_small_pool_raises(self):
        years = (2019, 2020)
        dmax = np.full((2, DAYS_PER_YEAR, 1), np.nan)
        dmax[0, :, 0] = 280.0  # one year only -> pools of 15 < 30 but >= 15
        dmin = dmax - 1.0
        history = DailyHistory(years, dmax, dmin)
        tf = build_thresholds(history)  # pool of 15 is exactly the floor
        assert np.all(np.isfinite(tf.tau_heat))
        dmax2 = dmax.copy()
        dmax2[0, 5, 0] = np.nan  # punch one hole -> pool of 14 somewhere
        dmin2 = dmax2 - 1.0
        with pytest.raises(InsufficientHistory):
            build_thresholds(DailyHistory(years, dmax2, dmin2))

    def test_monotone_in_pool_values(self, rng):
        history = dense_history(rng, n_years=3, n_loc=1)
        tf = build_thresholds(history)
        bumped_max = history.daily_max.copy()
        bumped_max[1, 50, 0] += 40.0
        bumped = DailyHistory(history.years, bumped_max, history.daily_min)
        tf2 = build_thresholds(bumped)
        assert np.all(tf2.tau_heat >= tf.tau_heat)

    def test_window_wrap_consistency_under_rotation(self, rng):
        history = dense_history(rng, n_years=2, n_loc=1)
        shift = 100
        rolled = DailyHistory(history.years,
                              np.roll(history.daily_max, shift, axis=1),
                              np.roll(history.daily_min, shift, axis=1))
        tf = build_thresholds(history)
        tf_rolled = build_thresholds(rolled)
        np.testing.assert_array_equal(np.roll(tf.tau_heat, shift, axis=0),
                                      tf_rolled.tau_heat)

    def test_heat_at_least_cold(self, rng):
        tf = build_thresholds(dense_history(rng, n_years=4))
        assert np.all(tf.tau_heat >= tf.tau_cold)

    def test_pool_size_accounting(self, rng):
        # dense data: each threshold pools exactly 15 * n_years samples
        history = dense_history(rng, n_years=5, n_loc=1)
        win = window_indices(17, 7)
        assert history.daily_max[:, win, 0].size == 15 * 5


class TestDailyMeanClimatology:
    def test_single_year_is_identity(self, rng):
        year = rng.standard_normal((DAYS_PER_YEAR, 2, 3))
        np.testing.assert_array_equal(build_daily_mean_climatology([year]), year)

    def test_two_year_midpoint(self, rng):
        year = rng.standard_normal((DAYS_PER_YEAR, 2, 3))
        out = build_daily_mean_climatology([year, year + 2.0])
        np.testing.assert_allclose(out, year + 1.0, rtol=0, atol=1e-12)

    def test_three_year_elementwise_oracle(self, rng):
        stack = [rng.standard_normal((DAYS_PER_YEAR, 2, 2)) for _ in range(3)]
        out = build_daily_mean_climatology(stack)
        for d in (0, 180, 364):
            for i in range(2):
                for j in range(2):
                    expected = (stack[0][d, i, j] + stack[1][d, i, j]
                                + stack[2][d, i, j]) / 3.0
                    assert out[d, i, j] == pytest.approx(expected, rel=1e-12)

    def test_empty_history_raises(self):
        with pytest.raises(InsufficientHistory):
            build_daily_mean_climatology([])
