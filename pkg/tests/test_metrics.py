from __future__ import annotations

import numpy as np
import pytest

import oracles
from conftest import make_field, make_grid, random_field
from wxverify.errors import DegenerateAnomaly, GridMismatch
from wxverify.grid import latitude_weights
from wxverify.metrics import acc, activity, bias, wrmse


@pytest.fixture
def grid():
    return make_grid(4, 8)


class TestWrmse:
    def test_zero_for_identical_fields(self, rng, grid):
        f = random_field(rng, grid)
        assert wrmse(f, f) == 0.0

    def test_constant_offset_passes_through(self, rng, grid):
        truth = random_field(rng, grid)
        pred = truth.with_values(truth.values + 1.5)
        assert wrmse(pred, truth) == pytest.approx(1.5, rel=1e-14)

    def test_matches_scalar_loop_oracle(self, rng, grid):
        pred = random_field(rng, grid)
        truth = random_field(rng, grid)
        w = latitude_weights(grid)
        expected = oracles.wrmse_loop(pred.values, truth.values, w)
        assert wrmse(pred, truth, w) == pytest.approx(expected, rel=1e-12)

    def test_grid_mismatch(self, rng):
        pred = random_field(rng, make_grid(4, 8))
        truth = random_field(rng, make_grid(4, 16))
        with pytest.raises(GridMismatch):
            wrmse(pred, truth)

    def test_valid_time_mismatch(self, rng, grid):
        from datetime import datetime, timezone
        pred = random_field(rng, grid)
        truth = random_field(rng, grid,
                             valid_time=datetime(2025, 7, 2, tzinfo=timezone.utc))
        with pytest.raises(GridMismatch):
            wrmse(pred, truth)


class TestBias:
    def test_constant_offset(self, rng, grid):
        truth = random_field(rng, grid)
        pred = truth.with_values(truth.values + 2.5)
        assert bias(pred, truth) == pytest.approx(2.5, rel=1e-14)

    def test_zero_for_identical(self, rng, grid):
        f = random_field(rng, grid)
        assert bias(f, f) == 0.0

    def test_matches_scalar_loop_oracle(self, rng, grid):
        pred = random_field(rng, grid)
        truth = random_field(rng, grid)
        w = latitude_weights(grid)
        expected = oracles.bias_loop(pred.values, truth.values, w)
        assert bias(pred, truth, w) == pytest.approx(expected, rel=1e-12)


class TestAcc:
    def test_self_correlation_is_one(self, rng, grid):
        truth = random_field(rng, grid)
        clim = random_field(rng, grid)
        assert acc(truth, truth, clim) == pytest.approx(1.0, abs=1e-12)

    def test_antiparallel_anomalies(self, rng, grid):
        clim = random_field(rng, grid)
        anom = rng.standard_normal(grid.shape)
        pred = clim.with_values(clim.values + anom)
        truth = clim.with_values(clim.values - anom)
        assert acc(pred, truth, clim) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_scalar_loop_oracle(self, rng, grid):
        pred = random_field(rng, grid)
        truth = random_field(rng, grid)
        clim = random_field(rng, grid)
        w = latitude_weights(grid)
        expected = oracles.acc_loop(pred.values, truth.values, clim.values, w)
        assert acc(pred, truth, clim, w) == pytest.approx(expected, rel=1e-12)

    def test_degenerate_anomaly(self, rng, grid):
        clim = random_field(rng, grid)
        truth = random_field(rng, grid)
        with pytest.raises(DegenerateAnomaly):
            acc(clim, truth, clim)  # pred anomaly identically zero

    def test_scale_invariance_of_anomalies(self, rng, grid):
        clim = random_field(rng, grid)
        ap = rng.standard_normal(grid.shape)
        at = rng.standard_normal(grid.shape)
        a1 = acc(clim.with_values(clim.values + ap),
                 clim.with_values(clim.values + at), clim)
        a2 = acc(clim.with_values(clim.values + 37.5 * ap),
                 clim.with_values(clim.values + 37.5 * at), clim)
        assert a1 == pytest.approx(a2, rel=1e-12)

    def test_bounded_by_one(self, rng, grid):
        for _ in range(50):
            pred = random_field(rng, grid)
            truth = random_field(rng, grid)
            clim = random_field(rng, grid)
            assert abs(acc(pred, truth, clim)) <= 1.0 + 1e-12


class TestActivity:
    def test_zero_when_pred_equals_clim(self, rng, grid):
        clim = random_field(rng, grid)
        assert activity(clim, clim) == 0.0

    def test_zero_for_constant_anomaly(self, rng, grid):
        clim = random_field(rng, grid)
        pred = clim.with_values(clim.values + 4.0)
        assert activity(pred, clim) == pytest.approx(0.0, abs=1e-12)

    def test_matches_scalar_loop_oracle(self, rng, grid):
        pred = random_field(rng, grid)
        clim = random_field(rng, grid)
        w = latitude_weights(grid)
        expected = oracles.activity_loop(pred.values, clim.values, w)
        assert activity(pred, clim, w) == pytest.approx(expected, rel=1e-12)


class TestFullResolution:
    def test_oracle_tolerance_holds_at_quarter_degree(self, rng):
        # 721x1440: pairwise numpy accumulation vs exactly-rounded fsum
        # loops must still agree to 1e-12 relative
        from wxverify.grid import GeoGrid
        import oracles
        grid = GeoGrid.regular_global(0.25)
        w = latitude_weights(grid)
        base = 280.0 + 8.0 * rng.standard_normal(grid.shape)
        shared = rng.standard_normal(grid.shape)
        truth = make_field(grid, base)
        pred = make_field(grid, base + 0.6 * shared
                          + 0.4 * rng.standard_normal(grid.shape) + 0.8)
        clim = make_field(grid, base - shared)
        assert wrmse(pred, truth, w) == pytest.approx(
            oracles.wrmse_loop(pred.values, truth.values, w), rel=1e-12)
        assert bias(pred, truth, w) == pytest.approx(
            oracles.bias_loop(pred.values, truth.values, w), rel=1e-12)
        assert acc(pred, truth, clim, w) == pytest.approx(
            oracles.acc_loop(pred.values, truth.values, clim.values, w),
            rel=1e-12)
        assert activity(pred, clim, w) == pytest.approx(
            oracles.activity_loop(pred.values, clim.values, w), rel=1e-12)


class TestIdentities:
    def test_bias_variance_decomposition(self, rng):
        # wrmse^2 = bias^2 + weighted variance of the error field
        for _ in range(20):
            grid = make_grid(int(rng.integers(3, 12)), int(rng.integers(4, 20)))
            pred = random_field(rng, grid)
            truth = random_field(rng, grid)
            w = latitude_weights(grid)
            b = bias(pred, truth, w)
            err_var = activity(pred, truth, w) ** 2
            assert wrmse(pred, truth, w) ** 2 == pytest.approx(
                b * b + err_var, rel=1e-10)

    def test_equatorial_single_row_reduces_to_unweighted(self, rng):
        grid = make_grid(1, 24, lat_top=0.0, lat_bottom=0.0)
        pred = random_field(rng, grid)
        truth = random_field(rng, grid)
        clim = random_field(rng, grid)
        err = pred.values - truth.values
        assert wrmse(pred, truth) == pytest.approx(
            float(np.sqrt(np.mean(err ** 2))), rel=1e-14)
        assert bias(pred, truth) == pytest.approx(float(np.mean(err)), rel=1e-12)
        ap = (pred.values - clim.values).ravel()
        at = (truth.values - clim.values).ravel()
        textbook_acc = float(np.mean(ap * at)
                             / np.sqrt(np.mean(ap ** 2) * np.mean(at ** 2)))
        assert acc(pred, truth, clim) == pytest.approx(textbook_acc, rel=1e-12)
        assert activity(pred, clim) == pytest.approx(
            float(np.std(ap)), rel=1e-12)

    def test_perfect_forecast_all_metrics(self, rng):
        for _ in range(10):
            grid = make_grid(int(rng.integers(2, 10)), int(rng.integers(4, 16)))
            truth = random_field(rng, grid)
            clim = random_field(rng, grid)
            assert wrmse(truth, truth) == 0.0
            assert bias(truth, truth) == 0.0
            assert acc(truth, truth, clim) == pytest.approx(1.0, abs=1e-12)
