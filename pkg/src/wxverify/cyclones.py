"""Minimum-pressure cyclone tracking and track/intensity verification.

The tracker walks a forecast sequence at 6-hour cadence: at each lead
the storm center is the grid point of minimum mean sea-level pressure
within a great-circle search radius of the previous center (of the seed
at the first step). Tracking terminates, permanently, when no point in
the search disc is below the pressure cutoff. Maximum 10-m wind is taken
within a second radius of the center.

Verification follows the homogeneous-sample convention: per-lead scores
average only over the (storm, init) units successfully tracked by every
compared model and covered by the truth record. Position error is the
great-circle distance between centers; intensity errors are model minus
truth, reported in hPa for pressure (positive pressure bias means an
under-intensified storm).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Mapping, Sequence

import numpy as np

from .errors import MissingFix, SeedOutsideDomain, UnitOutOfRange
from .grid import GridField, haversine_km, haversine_km_grid

#: Plausibility band for minimum sea-level pressure, Pa (exclusive).
MSLP_BAND_PA = (85000.0, 105000.0)

LEAD_STEP = timedelta(hours=6)


@dataclass(frozen=True)
class StormFix:
    """One storm observation or analysis: position and intensity."""

    time: datetime
    lat: float
    lon: float
    min_mslp_pa: float
    max_wind_ms: float

    def __post_init__(self):
        if self.time.tzinfo is None:
            raise ValueError("fix time must be timezone-aware UTC")
        object.__setattr__(self, "time", self.time.astimezone(timezone.utc))
        for name in ("lat", "lon", "min_mslp_pa", "max_wind_ms"):
            object.__setattr__(self, name, float(getattr(self, name)))
        lo, hi = MSLP_BAND_PA
        if not lo < self.min_mslp_pa < hi:
            raise UnitOutOfRange(
                f"MSLP {self.min_mslp_pa} Pa outside plausibility band "
                f"({lo}, {hi})")
        if not self.max_wind_ms >= 0.0:
            raise UnitOutOfRange(f"max wind {self.max_wind_ms} must be >= 0")

    @property
    def position(self) -> tuple[float, float]:
        return (self.lat, self.lon)


@dataclass(frozen=True)
class TrackSource:
    """Where a track came from: best-track truth or a named model run."""

    name: str
    init_source: str | None = None

    @property
    def is_truth(self) -> bool:
        return self.name == "truth"


TRUTH_SOURCE = TrackSource("truth")


@dataclass(frozen=True)
class StormTrack:
    """Time-ordered fixes for one storm from one source.

    ``tracked_mask[k]`` says whether a fix exists at lead step k (6-hour
    steps from ``init_time``). Fixes are contiguous from lead 0: once
    the tracker loses a storm the loss is terminal.
    """

    storm_id: str
    source: TrackSource
    init_time: datetime
    fixes: tuple[StormFix, ...]
    tracked_mask: tuple[bool, ...]

    def __post_init__(self):
        if self.init_time.tzinfo is None:
            raise ValueError("init_time must be timezone-aware UTC")
        object.__setattr__(self, "init_time", self.init_time.astimezone(timezone.utc))
        object.__setattr__(self, "fixes", tuple(self.fixes))
        object.__setattr__(self, "tracked_mask", tuple(bool(b) for b in self.tracked_mask))
        n_fixes = len(self.fixes)
        if sum(self.tracked_mask) != n_fixes:
            raise ValueError("tracked_mask must flag exactly one lead per fix")
        if not all(self.tracked_mask[:n_fixes]):
            raise ValueError("tracked leads must be a contiguous prefix")
        for k, fix in enumerate(self.fixes):
            if fix.time != self.init_time + k * LEAD_STEP:
                raise ValueError(
                    f"fix {k} at {fix.time} breaks the 6-hour cadence from "
                    f"{self.init_time}")

    @property
    def n_leads(self) -> int:
        return len(self.tracked_mask)

    def fix_at_lead(self, lead_step: int) -> StormFix | None:
        if 0 <= lead_step < len(self.fixes):
            return self.fixes[lead_step]
        return None

    def fix_at_time(self, when: datetime) -> StormFix | None:
        delta = when - self.init_time
        steps, rem = divmod(delta, LEAD_STEP)
        if rem or steps < 0:
            return None
        return self.fix_at_lead(int(steps))


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker defaults; the search radius covers 6-hour motion up to
    roughly 20 m/s."""

    search_radius_km: float = 450.0
    wind_radius_km: float = 250.0
    mslp_cutoff_pa: float = 100500.0


def _argmin_with_ties(values: np.ndarray, candidates: np.ndarray) -> tuple[int, int]:
    """Row/col of the minimum among masked candidates.

    Equal minima break toward the northernmost (smallest row) then
    westernmost (smallest column) grid point.
    """
    masked = np.where(candidates, values, np.inf)
    flat = int(np.argmin(masked))  # C order: smallest row, then column
    return flat // values.shape[1], flat % values.shape[1]


def track_storm(msl_fields: Sequence[GridField], u10_fields: Sequence[GridField],
                v10_fields: Sequence[GridField], seed: tuple[float, float],
                *, storm_id: str, source: TrackSource,
                config: TrackerConfig = TrackerConfig()) -> StormTrack:
    """Track one storm through a forecast sequence.

    ``msl_fields``/``u10_fields``/``v10_fields`` are aligned per lead
    (0, 6, 12, ... hours) on a shared grid. The seed is the best-track
    position at init time; a seed outside the grid raises
    :class:`SeedOutsideDomain`.
    """
    if not (len(msl_fields) == len(u10_fields) == len(v10_fields) > 0):
        raise ValueError("field sequences must be non-empty and aligned")
    grid = msl_fields[0].grid
    for k, (p, u, v) in enumerate(zip(msl_fields, u10_fields, v10_fields)):
        if p.grid != grid or u.grid != grid or v.grid != grid:
            raise ValueError("tracker fields must share one grid")
        if p.lead_hours != 6 * k:
            raise ValueError(f"MSL field {k} has lead {p.lead_hours}, expected {6 * k}")

    seed_lat, seed_lon = float(seed[0]), float(seed[1]) % 360.0
    if not (grid.lat_deg[-1] <= seed_lat <= grid.lat_deg[0]):
        raise SeedOutsideDomain(f"seed latitude {seed_lat} outside grid")
    if not grid.wraps_lon and not (grid.lon_deg[0] <= seed_lon <= grid.lon_deg[-1]):
        raise SeedOutsideDomain(f"seed longitude {seed_lon} outside grid")

    init_time = msl_fields[0].valid_time
    fixes: list[StormFix] = []
    mask: list[bool] = []
    center = (seed_lat, seed_lon)
    lost = False
    for k, msl in enumerate(msl_fields):
        if lost:
            mask.append(False)
            continue
        dist = haversine_km_grid(center[0], center[1], grid)
        in_search = dist <= config.search_radius_km
        below = in_search & (msl.values < config.mslp_cutoff_pa)
        if not below.any():
            lost = True
            mask.append(False)
            continue
        i, j = _argmin_with_ties(msl.values, below)
        center = (float(grid.lat_deg[i]), float(grid.lon_deg[j]))
        wind_speed = np.hypot(u10_fields[k].values, v10_fields[k].values)
        near_center = haversine_km_grid(center[0], center[1], grid) \
            <= config.wind_radius_km
        max_wind = float(wind_speed[near_center].max())
        fixes.append(StormFix(msl.valid_time, center[0], center[1],
                              float(msl.values[i, j]), max_wind))
        mask.append(True)
    return StormTrack(storm_id, source, init_time, tuple(fixes), tuple(mask))


TrackKey = tuple[str, datetime]  # (storm id, forecast init time)


def homogeneous_sample(model_tracks: Mapping[str, Mapping[TrackKey, StormTrack]],
                       truth_tracks: Mapping[str, StormTrack],
                       n_leads: int) -> list[frozenset[TrackKey]]:
    """Per-lead sets of (storm, init) units tracked by every model.

    A unit belongs to S_l when every model still tracks it at lead l and
    the truth record has a fix at the corresponding valid time. All
    models must cover the same unit list.
    """
    models = sorted(model_tracks)
    if not models:
        raise ValueError("no model tracks supplied")
    keys = set(model_tracks[models[0]])
    for m in models[1:]:
        if set(model_tracks[m]) != keys:
            raise ValueError(f"model {m} covers a different storm list")
    sample: list[frozenset[TrackKey]] = []
    for lead in range(n_leads):
        members = set()
        for key in keys:
            storm_id, init = key
            if not all(model_tracks[m][key].fix_at_lead(lead) is not None
                       for m in models):
                continue
            truth = truth_tracks.get(storm_id)
            if truth is None or truth.fix_at_time(init + lead * LEAD_STEP) is None:
                continue
            members.add(key)
        sample.append(frozenset(members))
    return sample


def _paired_fixes(tracks: Mapping[TrackKey, StormTrack],
                  truth_tracks: Mapping[str, StormTrack],
                  members: frozenset[TrackKey], lead: int):
    for key in sorted(members, key=lambda k: (k[0], k[1])):
        storm_id, init = key
        track = tracks.get(key)
        model_fix = track.fix_at_lead(lead) if track is not None else None
        if model_fix is None:
            raise MissingFix(f"model fix absent: storm {storm_id}, "
                             f"init {init.isoformat()}, lead step {lead}")
        truth = truth_tracks.get(storm_id)
        truth_fix = truth.fix_at_time(init + lead * LEAD_STEP) if truth else None
        if truth_fix is None:
            raise MissingFix(f"truth fix absent: storm {storm_id}, "
                             f"init {init.isoformat()}, lead step {lead}")
        yield model_fix, truth_fix


def track_dpe(tracks: Mapping[TrackKey, StormTrack],
              truth_tracks: Mapping[str, StormTrack],
              sample: Sequence[frozenset[TrackKey]]) -> list[float | None]:
    """Per-lead mean great-circle distance (km) between centers.

    None where the homogeneous sample is empty.
    """
    out: list[float | None] = []
    for lead, members in enumerate(sample):
        if not members:
            out.append(None)
            continue
        dists = [haversine_km(m.position, t.position)
                 for m, t in _paired_fixes(tracks, truth_tracks, members, lead)]
        out.append(sum(dists) / len(dists))
    return out


@dataclass(frozen=True)
class IntensityError:
    """Per-lead intensity errors; pressure in hPa, wind in m/s."""

    mae_mslp_hpa: float
    bias_mslp_hpa: float
    mae_wind_ms: float
    bias_wind_ms: float


def intensity_errors(tracks: Mapping[TrackKey, StormTrack],
                     truth_tracks: Mapping[str, StormTrack],
                     sample: Sequence[frozenset[TrackKey]]
                     ) -> list[IntensityError | None]:
    """Per-lead MAE and bias of min MSLP and max wind (model minus truth)."""
    out: list[IntensityError | None] = []
    for lead, members in enumerate(sample):
        if not members:
            out.append(None)
            continue
        dp = []
        dv = []
        for m, t in _paired_fixes(tracks, truth_tracks, members, lead):
            dp.append((m.min_mslp_pa - t.min_mslp_pa) / 100.0)
            dv.append(m.max_wind_ms - t.max_wind_ms)
        n = len(dp)
        out.append(IntensityError(
            mae_mslp_hpa=sum(abs(x) for x in dp) / n,
            bias_mslp_hpa=sum(dp) / n,
            mae_wind_ms=sum(abs(x) for x in dv) / n,
            bias_wind_ms=sum(dv) / n,
        ))
    return out
