from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest

from wxverify.grid import GeoGrid, GridField, VariableId

T0 = datetime(2025, 7, 1, 0, tzinfo=timezone.utc)


def make_grid(n_lat: int, n_lon: int, lat_top: float = 60.0,
              lat_bottom: float = -60.0, wrap: bool = True) -> GeoGrid:
    """Uniform test grid; wraps in longitude by default."""
    lats = np.linspace(lat_top, lat_bottom, n_lat)
    if wrap:
        lons = np.arange(n_lon) * (360.0 / n_lon)
    else:
        lons = np.linspace(10.0, 80.0, n_lon)
    return GeoGrid(lats, lons)


def make_field(grid: GeoGrid, values, variable: VariableId = VariableId.T2M,
               valid_time: datetime = T0, lead_hours: int = 0) -> GridField:
    return GridField(grid, variable, valid_time, lead_hours,
                     np.asarray(values, dtype=np.float64))


def random_field(rng: np.random.Generator, grid: GeoGrid,
                 variable: VariableId = VariableId.T2M, loc: float = 280.0,
                 scale: float = 10.0, valid_time: datetime = T0,
                 lead_hours: int = 0) -> GridField:
    values = loc + scale * rng.standard_normal(grid.shape)
    return make_field(grid, values, variable, valid_time, lead_hours)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250701)
