"""Command-line surface.

Subcommands mirror the pipeline stages:

  synth              generate synthetic truth, forecasts, and a manifest
  build-climatology  daily-mean climatology + extreme thresholds from history
  evaluate           latitude-weighted grid metrics and zonal spectra
  extremes           heatwave / cold-surge categorical scores
  cyclones           tropical-cyclone track and intensity verification
  stations           station-space scores with QC report
  report             flatten a scorecard JSON into CSV tables

Runs are deterministic: the same manifest and inputs produce
byte-identical scorecards. Exit codes: 0 success, 2 input error,
3 computation error (for example insufficient history).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import climatology, fileio, harness, report, stations
from .climatology import (DailyMeanClimatology,
                          build_daily_mean_climatology, build_thresholds,
                          calendar_day_index, daily_means_from_fields,
                          history_from_fields)
from .cyclones import (StormTrack, TrackerConfig, TrackSource,
                       homogeneous_sample, intensity_errors, track_dpe,
                       track_storm)
from .errors import (ChecksumMismatch, DegenerateAnomaly,
                     DuplicateObservation, EmptyBand, GridMismatch,
                     HeaderPayloadShapeMismatch, InsufficientHistory,
                     InvalidHeader, ManifestError, MissingFix, NoValidPairs,
                     NonFiniteValue, NonMonotoneTime, NonUniformGrid,
                     PolarRow, SeedOutsideDomain, TargetOutsideDomain,
                     UndefinedScore, UnitOutOfRange, UnknownStation,
                     WxVerifyError)
from .extremes import EventKind, label_events, match_events, scores_from_counts
from .grid import (GeoGrid, GridField, VariableId, derive_wind_speed,
                   interp_to_stations, latitude_weights)
from .harness import (SyntheticScenario, generate_variable_series,
                      load_scenario, make_besttrack, persistence_forecast,
                      smoothed_forecast)
from .metrics import MetricKind, MetricValue
from .metrics import acc as metric_acc
from .metrics import activity as metric_activity
from .metrics import bias as metric_bias
from .metrics import wrmse as metric_wrmse
from .report import na, new_scorecard, write_scorecard, write_spectrum_csv
from .spectra import ZonalSpectrum, midlatitude_spectrum
from .stations import QcThresholds, station_climatology_from_grid

INPUT_ERRORS = (ManifestError, InvalidHeader, ChecksumMismatch,
                HeaderPayloadShapeMismatch, NonFiniteValue, NonMonotoneTime,
                UnitOutOfRange, UnknownStation, DuplicateObservation,
                NonUniformGrid)
COMPUTE_ERRORS = (InsufficientHistory, NoValidPairs, DegenerateAnomaly,
                  EmptyBand, PolarRow, MissingFix, UndefinedScore,
                  GridMismatch, TargetOutsideDomain, SeedOutsideDomain)

DEFAULT_SPECTRA_LEADS = (6, 72, 120, 240)
DEFAULT_EXTREME_LEAD_DAYS = (1, 3, 7, 10)
DEFAULT_CYCLONE_LEAD_DAYS = (1, 3, 5)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("RB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ManifestError(f"RB_WORKERS must be an integer, got {env!r}")
    return 1


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ManifestError(f"bad integer list {text!r}") from exc


def _truth_field(manifest: fileio.RunManifest, variable: VariableId,
                 when: datetime) -> GridField:
    if variable.derived:
        u = fileio.read_grid(manifest.truth_path(VariableId.U10, when))
        v = fileio.read_grid(manifest.truth_path(VariableId.V10, when))
        return derive_wind_speed(u, v)
    return fileio.read_grid(manifest.truth_path(variable, when))


def _model_field(manifest: fileio.RunManifest, model: str, init: datetime,
                 variable: VariableId, lead: int) -> GridField:
    if variable.derived:
        u = fileio.read_grid(manifest.model_path(model, init, VariableId.U10, lead))
        v = fileio.read_grid(manifest.model_path(model, init, VariableId.V10, lead))
        return derive_wind_speed(u, v)
    return fileio.read_grid(manifest.model_path(model, init, variable, lead))


def _load_climatologies(manifest: fileio.RunManifest
                        ) -> dict[VariableId, DailyMeanClimatology]:
    clims: dict[VariableId, DailyMeanClimatology] = {}
    if manifest.climatology_pattern is None:
        return clims
    for variable in manifest.variables:
        if variable.derived:
            continue
        clims[variable] = fileio.read_daily_climatology(
            manifest.climatology_path(variable))
    return clims


# --- evaluate ----------------------------------------------------------------

def _evaluate_task(manifest, clims, model, variable, lead):
    """Metric means over init times for one (model, variable, lead)."""
    weights = None
    clim = clims.get(variable)
    per_metric: dict[str, list[float]] = {"wrmse": [], "acc": [], "bias": [],
                                          "activity": []}
    for init in manifest.init_times:
        when = init + timedelta(hours=lead)
        pred = _model_field(manifest, model, init, variable, lead)
        truth = _truth_field(manifest, variable, when)
        if weights is None:
            weights = latitude_weights(pred.grid)
        per_metric["wrmse"].append(metric_wrmse(pred, truth, weights))
        per_metric["bias"].append(metric_bias(pred, truth, weights))
        if clim is not None:
            clim_field = clim.field_for(when)
            per_metric["acc"].append(metric_acc(pred, truth, clim_field, weights))
            per_metric["activity"].append(
                metric_activity(pred, clim_field, weights))
    rows = []
    for metric in ("wrmse", "acc", "bias", "activity"):
        values = per_metric[metric]
        if values:
            checked = MetricValue(MetricKind(metric), variable, lead,
                                  _mean(values))
            value = checked.value
        else:
            value = "n/a"
        rows.append({
            "model": model,
            "variable": variable.key,
            "lead_hours": lead,
            "metric": metric,
            "value": value,
            "n_samples": len(values),
        })
    return rows


def cmd_evaluate(args) -> int:
    manifest = fileio.load_manifest(args.manifest)
    out_dir = Path(args.out)
    leads = _parse_int_list(args.leads) if args.leads else manifest.lead_hours
    for lead in leads:
        if lead % 6 or lead < 0 or lead > manifest.max_lead_hours:
            raise ManifestError(f"lead {lead} outside manifest lead grid")
    spectra_leads = (_parse_int_list(args.spectra_leads) if args.spectra_leads
                     else tuple(l for l in DEFAULT_SPECTRA_LEADS if l in leads))
    clims = _load_climatologies(manifest)

    tasks = [(model, variable, lead)
             for model in sorted(manifest.models)
             for variable in manifest.variables
             for lead in leads]
    n_workers = _workers(args)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(
                lambda t: _evaluate_task(manifest, clims, *t), tasks))
    else:
        results = [_evaluate_task(manifest, clims, *t) for t in tasks]

    card = new_scorecard("evaluate", manifest.sha256)
    card["grid_metrics"] = [row for rows in results for row in rows]

    def mean_spectrum(load_field) -> ZonalSpectrum:
        stack = [midlatitude_spectrum(load_field(init))
                 for init in manifest.init_times]
        return ZonalSpectrum(stack[0].variable, stack[0].lead_hours,
                             np.mean([s.energy for s in stack], axis=0),
                             stack[0].band)

    spectra_rows = []
    for model in sorted(manifest.models):
        for variable in manifest.variables:
            for lead in spectra_leads:
                spectrum = mean_spectrum(
                    lambda init: _model_field(manifest, model, init,
                                              variable, lead))
                rel = f"spectra/{model}_{variable.key}_{lead:03d}h.csv"
                write_spectrum_csv(spectrum, out_dir / rel)
                spectra_rows.append({"model": model, "variable": variable.key,
                                     "lead_hours": lead, "csv": rel})
    for variable in manifest.variables:
        for lead in spectra_leads:
            spectrum = mean_spectrum(
                lambda init: _truth_field(manifest, variable,
                                          init + timedelta(hours=lead)))
            rel = f"spectra/truth_{variable.key}_{lead:03d}h.csv"
            write_spectrum_csv(spectrum, out_dir / rel)
            spectra_rows.append({"model": "truth", "variable": variable.key,
                                 "lead_hours": lead, "csv": rel})
    if spectra_rows:
        card["spectra"] = spectra_rows

    write_scorecard(card, out_dir / "scorecard.json")
    print(f"wrote {out_dir / 'scorecard.json'}")
    return 0


# --- build-climatology -------------------------------------------------------

def _history_fields(manifest: fileio.RunManifest, variable: VariableId,
                    year: int) -> list[GridField]:
    fields = []
    for when in harness.year_times(year):
        fields.append(fileio.read_grid(manifest.history_path(variable, when)))
    return fields


def cmd_build_climatology(args) -> int:
    manifest = fileio.load_manifest(args.manifest, require=("history",))
    if manifest.climatology_pattern is None:
        raise ManifestError("manifest declares no climatology daily_mean_pattern")
    grid = None
    for variable in manifest.variables:
        if variable.derived:
            continue
        per_year = []
        t2m_by_year = {}
        for year in manifest.history_years:
            fields = _history_fields(manifest, variable, year)
            per_year.append(daily_means_from_fields(fields))
            if variable is VariableId.T2M:
                t2m_by_year[year] = fields
            grid = fields[0].grid
        clim = DailyMeanClimatology(grid, variable,
                                    build_daily_mean_climatology(per_year),
                                    manifest.history_years)
        path = fileio.write_daily_climatology(
            clim, manifest.climatology_path(variable))
        print(f"wrote {path}")
        if variable is VariableId.T2M and manifest.thresholds_path is not None:
            history = history_from_fields(t2m_by_year)
            thresholds = build_thresholds(history)
            path = fileio.write_thresholds(
                thresholds, grid, manifest.root / manifest.thresholds_path)
            print(f"wrote {path}")
    return 0


# --- extremes ----------------------------------------------------------------

def _day_extreme_from_fields(fields: Sequence[GridField], kind: EventKind
                             ) -> np.ndarray:
    stack = np.stack([f.values for f in fields])
    return stack.max(axis=0) if kind is EventKind.HEATWAVE else stack.min(axis=0)


def _truth_day_fields(manifest, day: datetime) -> list[GridField]:
    return [_truth_field(manifest, VariableId.T2M,
                         day + timedelta(hours=h))
            for h in climatology.SYNOPTIC_HOURS]


def _region_mask(grid: GeoGrid, box) -> np.ndarray:
    if box is None:
        return np.ones(grid.shape, dtype=bool)
    lat_min, lat_max, lon_min, lon_max = box
    lat_ok = (grid.lat_deg >= lat_min) & (grid.lat_deg <= lat_max)
    lon_ok = (grid.lon_deg >= lon_min) & (grid.lon_deg <= lon_max)
    return lat_ok[:, None] & lon_ok[None, :]


def cmd_extremes(args) -> int:
    manifest = fileio.load_manifest(args.manifest)
    out_dir = Path(args.out)
    lead_days = (_parse_int_list(args.lead_days) if args.lead_days
                 else DEFAULT_EXTREME_LEAD_DAYS)
    gamma = args.gamma

    thresholds_sha = None
    if manifest.thresholds_path is not None \
            and (manifest.root / manifest.thresholds_path).exists():
        tpath = manifest.root / manifest.thresholds_path
        thresholds, tgrid = fileio.read_thresholds(tpath)
        thresholds_sha = hashlib.sha256(tpath.read_bytes()).hexdigest()
    elif manifest.history_pattern and manifest.history_years:
        t2m_by_year = {year: _history_fields(manifest, VariableId.T2M, year)
                       for year in manifest.history_years}
        thresholds = build_thresholds(history_from_fields(t2m_by_year))
        tgrid = t2m_by_year[manifest.history_years[0]][0].grid
    else:
        raise ManifestError(
            "extremes needs thresholds_path or a history section to build from")

    for init in manifest.init_times:
        if init.hour != 0:
            raise ManifestError("extremes evaluation expects 00Z init times")

    max_day = max(lead_days)
    if 24 * (max_day - 1) + 18 > manifest.max_lead_hours:
        raise ManifestError(
            f"lead day {max_day} needs {24 * (max_day - 1) + 18} h of forecast, "
            f"manifest stops at {manifest.max_lead_hours} h")

    first_truth = _truth_field(manifest, VariableId.T2M, manifest.init_times[0])
    if first_truth.grid != tgrid:
        raise ManifestError("threshold grid does not match the truth grid")

    card = new_scorecard("extremes", manifest.sha256,
                         thresholds_sha256=thresholds_sha, gamma=gamma)
    rows = []
    for model in sorted(manifest.models):
        for d in lead_days:
            # Calendar days covered at this lead: date(init) + (d - 1).
            days = [init + timedelta(days=d - 1) for init in manifest.init_times]
            day_indices = [calendar_day_index(day) for day in days]
            truth_max = []
            truth_min = []
            fc_max = []
            fc_min = []
            for init, day in zip(manifest.init_times, days):
                truth_fields = _truth_day_fields(manifest, day)
                truth_max.append(_day_extreme_from_fields(
                    truth_fields, EventKind.HEATWAVE))
                truth_min.append(_day_extreme_from_fields(
                    truth_fields, EventKind.COLDSURGE))
                leads = [24 * (d - 1) + h for h in climatology.SYNOPTIC_HOURS]
                fc_fields = [_model_field(manifest, model, init,
                                          VariableId.T2M, lead)
                             for lead in leads]
                fc_max.append(_day_extreme_from_fields(
                    fc_fields, EventKind.HEATWAVE))
                fc_min.append(_day_extreme_from_fields(
                    fc_fields, EventKind.COLDSURGE))
            truth_max = np.stack(truth_max).reshape(len(days), -1)
            truth_min = np.stack(truth_min).reshape(len(days), -1)
            fc_max = np.stack(fc_max).reshape(len(days), -1)
            fc_min = np.stack(fc_min).reshape(len(days), -1)
            tau_heat = thresholds.tau_heat[day_indices, :]
            tau_cold = thresholds.tau_cold[day_indices, :]
            # label and match once per location; regions only aggregate
            n_loc = truth_max.shape[1]
            counts = {}  # (kind, loc) -> (tp, fp, fn)
            truth_segments = []
            fc_segments = []
            for kind, truth_series, fc_series, tau in (
                    (EventKind.HEATWAVE, truth_max, fc_max, tau_heat),
                    (EventKind.COLDSURGE, truth_min, fc_min, tau_cold)):
                for loc in range(n_loc):
                    loc_id = str(loc)
                    truth_ev = label_events(truth_series[:, loc], tau[:, loc],
                                            kind, loc_id)
                    fc_ev = label_events(fc_series[:, loc], tau[:, loc],
                                         kind, loc_id)
                    truth_segments.extend(truth_ev)
                    fc_segments.extend(fc_ev)
                    m = match_events(fc_ev, truth_ev, gamma)
                    counts[(kind, loc)] = (m.tp, m.fp, m.fn)
            for region, box in sorted(manifest.regions.items()):
                locations = np.nonzero(_region_mask(tgrid, box).reshape(-1))[0]
                for kind in (EventKind.HEATWAVE, EventKind.COLDSURGE):
                    tp = sum(counts[(kind, loc)][0] for loc in locations)
                    fp = sum(counts[(kind, loc)][1] for loc in locations)
                    fn = sum(counts[(kind, loc)][2] for loc in locations)
                    scores = scores_from_counts(tp, fp, fn)
                    rows.append({
                        "model": model, "kind": kind.value, "lead_days": d,
                        "region": region, "pod": na(scores.pod),
                        "far": na(scores.far), "csi": na(scores.csi),
                        "tp": tp, "fp": fp, "fn": fn,
                    })
            fileio.write_segments_csv(
                truth_segments, out_dir / "segments" / f"truth_day{d}.csv")
            fileio.write_segments_csv(
                fc_segments, out_dir / "segments" / f"{model}_day{d}.csv")
    card["event_scores"] = rows
    write_scorecard(card, out_dir / "scorecard.json")
    print(f"wrote {out_dir / 'scorecard.json'}")
    return 0


# --- cyclones ----------------------------------------------------------------

def cmd_cyclones(args) -> int:
    manifest = fileio.load_manifest(args.manifest)
    out_dir = Path(args.out)
    besttrack_path = Path(args.besttrack)
    truth_list = fileio.read_besttrack(besttrack_path)
    truth_tracks = {t.storm_id: t for t in truth_list}
    lead_days = (_parse_int_list(args.lead_days) if args.lead_days
                 else DEFAULT_CYCLONE_LEAD_DAYS)
    lead_steps = [4 * d for d in lead_days]
    n_leads = manifest.max_lead_hours // 6 + 1
    for step in lead_steps:
        if step >= n_leads:
            raise ManifestError(
                f"lead day {step // 4} beyond manifest max lead")
    config = TrackerConfig(search_radius_km=args.search_radius_km,
                           wind_radius_km=args.wind_radius_km,
                           mslp_cutoff_pa=args.mslp_cutoff_pa)
    for variable in (VariableId.MSL, VariableId.U10, VariableId.V10):
        if variable not in manifest.variables:
            raise ManifestError(f"cyclones needs {variable.key} in the manifest")

    model_tracks: dict[str, dict] = {}
    all_tracks: list[StormTrack] = []
    for model in sorted(manifest.models):
        tracks: dict = {}
        for init in manifest.init_times:
            for storm_id in sorted(truth_tracks):
                seed_fix = truth_tracks[storm_id].fix_at_time(init)
                if seed_fix is None:
                    continue
                msl = [_model_field(manifest, model, init, VariableId.MSL, 6 * k)
                       for k in range(n_leads)]
                u10 = [_model_field(manifest, model, init, VariableId.U10, 6 * k)
                       for k in range(n_leads)]
                v10 = [_model_field(manifest, model, init, VariableId.V10, 6 * k)
                       for k in range(n_leads)]
                track = track_storm(msl, u10, v10, seed_fix.position,
                                    storm_id=storm_id,
                                    source=TrackSource(model),
                                    config=config)
                tracks[(storm_id, init)] = track
                all_tracks.append(track)
        if not tracks:
            raise MissingFix("no (storm, init) pair overlaps the best track")
        model_tracks[model] = tracks

    sample = homogeneous_sample(model_tracks, truth_tracks, n_leads)
    card = new_scorecard(
        "cyclones", manifest.sha256,
        besttrack_sha256=hashlib.sha256(besttrack_path.read_bytes()).hexdigest())
    rows = []
    for model in sorted(manifest.models):
        dpe = track_dpe(model_tracks[model], truth_tracks, sample)
        intensity = intensity_errors(model_tracks[model], truth_tracks, sample)
        for step in lead_steps:
            err = intensity[step]
            rows.append({
                "model": model,
                "lead_hours": 6 * step,
                "n_storms": len(sample[step]),
                "dpe_km": na(dpe[step]),
                "mslp_mae_hpa": na(err.mae_mslp_hpa if err else None),
                "mslp_bias_hpa": na(err.bias_mslp_hpa if err else None),
                "wind_mae_ms": na(err.mae_wind_ms if err else None),
                "wind_bias_ms": na(err.bias_wind_ms if err else None),
            })
    card["cyclone_scores"] = rows
    fileio.write_tracks_csv(all_tracks, out_dir / "tracks.csv")
    write_scorecard(card, out_dir / "scorecard.json")
    print(f"wrote {out_dir / 'scorecard.json'}")
    return 0


# --- stations ----------------------------------------------------------------

def cmd_stations(args) -> int:
    manifest = fileio.load_manifest(args.manifest)
    out_dir = Path(args.out)
    valid_times = sorted({init + timedelta(hours=lead)
                          for init in manifest.init_times
                          for lead in manifest.lead_hours})
    table = fileio.read_station_csvs(args.station_meta, args.station_obs,
                                     times=valid_times)
    station_vars = [v for v in table.variables if v in manifest.variables]
    if not station_vars:
        raise NoValidPairs("no station variable overlaps the manifest variables")

    positions = table.positions()
    reference = np.full(table.values.shape, np.nan)
    for vi, variable in enumerate(table.variables):
        if variable not in manifest.variables:
            continue
        for ti, when in enumerate(table.times):
            truth = _truth_field(manifest, variable, when)
            reference[vi, ti] = interp_to_stations(truth, positions)
    qc_table, qc_report = stations.apply_qc(table, reference,
                                            QcThresholds.default())

    clims = _load_climatologies(manifest)
    station_clims = {}
    for variable in station_vars:
        clim = clims.get(variable)
        if clim is not None:
            day_fields = [clim.field_for(datetime(2001, 1, 1, tzinfo=timezone.utc)
                                         + timedelta(days=day))
                          for day in range(365)]
            station_clims[variable] = station_climatology_from_grid(
                day_fields, qc_table.stations)

    card = new_scorecard("stations", manifest.sha256)
    rows = []
    for model in sorted(manifest.models):
        for variable in station_vars:
            for lead in manifest.lead_hours:
                forecasts = [_model_field(manifest, model, init, variable, lead)
                             for init in manifest.init_times]
                try:
                    scores = stations.station_scores(
                        forecasts, qc_table, variable,
                        clim=station_clims.get(variable))
                    rows.append({
                        "model": model, "variable": variable.key,
                        "lead_hours": lead, "rmse": scores.rmse,
                        "bias": scores.bias, "acc": na(scores.acc),
                        "n_pairs": scores.n_pairs,
                    })
                except NoValidPairs:
                    rows.append({
                        "model": model, "variable": variable.key,
                        "lead_hours": lead, "rmse": "n/a", "bias": "n/a",
                        "acc": "n/a", "n_pairs": 0,
                    })
    card["station_scores"] = rows
    card["qc_report"] = qc_report.as_dict()
    write_scorecard(card, out_dir / "scorecard.json")
    print(f"wrote {out_dir / 'scorecard.json'}")
    return 0


# --- synth -------------------------------------------------------------------

def _write_truth(scenario: SyntheticScenario, out_dir: Path,
                 truth_pattern: str, keep: set[datetime] | None) -> None:
    """Generate and write truth fields; ``keep`` restricts written times."""
    for variable in scenario.variables:
        for field in generate_variable_series(scenario, variable):
            if keep is not None and field.valid_time not in keep:
                continue
            rel = truth_pattern.format(
                variable=variable.key,
                time=field.valid_time.strftime("%Y%m%d%H"))
            fileio.write_grid(field, out_dir / rel)


def cmd_synth(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = SyntheticScenario(args.seed, scenario.grid, scenario.years,
                                     scenario.processes, scenario.vortices,
                                     scenario.episodes)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    max_lead = args.max_lead_hours
    leads = list(range(0, max_lead + 1, 6))
    eval_year = scenario.years[-1]
    if args.inits:
        init_times = [fileio.parse_time(t) for t in args.inits.split(",")]
    else:
        init_times = [datetime(eval_year, 7, 1, tzinfo=timezone.utc)]

    model_specs: dict[str, tuple[str, int]] = {}
    for token in (args.models or "persistence").split(","):
        token = token.strip()
        if not token:
            continue
        if token == "persistence":
            model_specs[token] = ("persistence", 0)
        elif token == "perfect":
            model_specs[token] = ("perfect", 0)
        elif token.startswith("smoothed"):
            width = int(token.split(":", 1)[1]) if ":" in token else 9
            model_specs[f"smoothed{width}"] = ("smoothed", width)
        elif token.startswith("lagged"):
            lag = int(token.split(":", 1)[1]) if ":" in token else 48
            if lag % 6:
                raise ManifestError("lag must be a multiple of 6 hours")
            model_specs[f"lagged{lag}"] = ("lagged", lag)
        else:
            raise ManifestError(f"unknown synthetic model {token!r}")

    keep: set[datetime] | None = None
    if args.truth_span == "run":
        if any(kind == "lagged" for kind, _ in model_specs.values()):
            raise ManifestError("lagged models need --truth-span full")
        keep = {init + timedelta(hours=lead)
                for init in init_times for lead in leads}
    truth_pattern = "truth/{variable}/{time}.rbg"
    _write_truth(scenario, out_dir, truth_pattern, keep)

    def truth_at(variable, when):
        return fileio.read_grid(out_dir / truth_pattern.format(
            variable=variable.key, time=when.strftime("%Y%m%d%H")))

    model_patterns = {}
    for name, (kind, param) in sorted(model_specs.items()):
        pattern = f"models/{name}/{{init}}/{{variable}}/{{lead:03d}}.rbg"
        model_patterns[name] = pattern
        for init in init_times:
            for variable in scenario.variables:
                if kind == "persistence":
                    fields = persistence_forecast(truth_at(variable, init), leads)
                elif kind == "smoothed":
                    fields = smoothed_forecast(truth_at(variable, init), leads,
                                               param)
                elif kind == "perfect":
                    fields = [truth_at(variable, init + timedelta(hours=lead))
                              .at(init + timedelta(hours=lead), lead)
                              for lead in leads]
                else:  # lagged: stale truth from `param` hours earlier
                    fields = [truth_at(variable,
                                       init + timedelta(hours=lead - param))
                              .at(init + timedelta(hours=lead), lead)
                              for lead in leads]
                for field in fields:
                    rel = pattern.format(variable=variable.key,
                                         init=init.strftime("%Y%m%d%H"),
                                         lead=field.lead_hours)
                    fileio.write_grid(field, out_dir / rel)

    history_years = list(scenario.years[:-1]) if len(scenario.years) > 1 \
        else list(scenario.years)
    climatology_doc = {
        "daily_mean_pattern": "clim/{variable}.rbc",
        "history_pattern": truth_pattern,
        "history_years": history_years,
    }
    if len(history_years) >= 2:  # threshold construction needs >= 2 years
        climatology_doc["thresholds_path"] = "clim/thresholds.rbt"
    manifest_doc = {
        "variables": [v.key for v in scenario.variables],
        "init_times": [fileio.format_time(t) for t in init_times],
        "max_lead_hours": max_lead,
        "truth_pattern": truth_pattern,
        "models": model_patterns,
        "climatology": climatology_doc,
        "regions": {"global": None},
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_bytes(
        (json.dumps(manifest_doc, sort_keys=True, indent=2) + "\n").encode())
    # keep the generating process parameters next to the outputs
    (out_dir / "scenario.json").write_bytes(Path(args.scenario).read_bytes())

    if scenario.vortices:
        tracks = make_besttrack(scenario)
        lines = ["storm_id,iso_time,lat,lon,mslp_hpa,wind_ms"]
        for track in tracks:
            for fix in track.fixes:
                lines.append(f"{track.storm_id},{fileio.format_time(fix.time)},"
                             f"{fix.lat!r},{fix.lon!r},"
                             f"{fix.min_mslp_pa / 100.0!r},{fix.max_wind_ms!r}")
        (out_dir / "besttrack.csv").write_bytes(
            ("\n".join(lines) + "\n").encode())

    if args.stations:
        _write_station_csvs(scenario, out_dir, init_times, leads, args.stations)

    print(f"wrote {manifest_path}")
    return 0


def _write_station_csvs(scenario: SyntheticScenario, out_dir: Path,
                        init_times, leads, n_stations: int) -> None:
    """Sample synthetic stations at grid nodes; observations equal truth."""
    grid = scenario.grid
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=scenario.seed, spawn_key=(10_001,)))
    flat = rng.choice(grid.n_lat * grid.n_lon, size=min(
        n_stations, grid.n_lat * grid.n_lon), replace=False)
    flat.sort()
    meta_lines = ["id,lat,lon,elev_m"]
    sites = []
    for idx in flat:
        i, j = divmod(int(idx), grid.n_lon)
        sid = f"SYN{idx:05d}"
        sites.append((sid, i, j))
        meta_lines.append(f"{sid},{float(grid.lat_deg[i])!r},"
                          f"{float(grid.lon_deg[j])!r},0.0")
    (out_dir / "stations_meta.csv").write_bytes(
        ("\n".join(meta_lines) + "\n").encode())

    valid_times = sorted({init + timedelta(hours=lead)
                          for init in init_times for lead in leads})
    obs_lines = ["station_id,iso_time,variable,value_si"]
    for variable in scenario.variables:
        if variable.derived:
            continue
        for when in valid_times:
            rel = "truth/{variable}/{time}.rbg".format(
                variable=variable.key, time=when.strftime("%Y%m%d%H"))
            field = fileio.read_grid(out_dir / rel)
            for sid, i, j in sites:
                obs_lines.append(
                    f"{sid},{fileio.format_time(when)},{variable.key},"
                    f"{float(field.values[i, j])!r}")
    (out_dir / "stations_obs.csv").write_bytes(
        ("\n".join(obs_lines) + "\n").encode())


# --- report ------------------------------------------------------------------

def cmd_report(args) -> int:
    path = Path(args.scorecard)
    try:
        card = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidHeader(f"cannot read scorecard {path}: {exc}") from exc
    report.validate_scorecard(card)
    written = report.flatten_scorecard_csv(card, args.out)
    for p in written:
        print(f"wrote {p}")
    return 0


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wxverify",
        description="Forecast verification engine (grid metrics, spectra, "
                    "extremes, cyclones, stations).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="grid metrics and spectra")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--leads", help="comma-separated lead hours (default: all)")
    p.add_argument("--spectra-leads", help="comma-separated spectra lead hours")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("extremes", help="heatwave / cold-surge scores")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lead-days", dest="lead_days",
                   help="comma-separated lead days (default 1,3,7,10)")
    p.add_argument("--gamma", type=float, default=0.5)
    p.set_defaults(func=cmd_extremes)

    p = sub.add_parser("cyclones", help="TC track and intensity verification")
    p.add_argument("--manifest", required=True)
    p.add_argument("--besttrack", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lead-days", dest="lead_days",
                   help="comma-separated lead days (default 1,3,5)")
    p.add_argument("--search-radius-km", type=float, default=450.0)
    p.add_argument("--wind-radius-km", type=float, default=250.0)
    p.add_argument("--mslp-cutoff-pa", type=float, default=100500.0)
    p.set_defaults(func=cmd_cyclones)

    p = sub.add_parser("stations", help="station scores with QC report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--station-meta", required=True)
    p.add_argument("--station-obs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stations)

    p = sub.add_parser("build-climatology",
                       help="daily means and extreme thresholds from history")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_build_climatology)

    p = sub.add_parser("synth", help="generate synthetic truth and forecasts")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--inits", help="comma-separated init times (ISO-8601)")
    p.add_argument("--max-lead-hours", type=int, default=240)
    p.add_argument("--models",
                   help="comma list: persistence, perfect, smoothed[:width], "
                        "lagged[:hours]")
    p.add_argument("--truth-span", choices=("full", "run"), default="full",
                   help="write truth for whole years, or only run valid times")
    p.add_argument("--stations", type=int, default=0,
                   help="sample N synthetic stations at grid nodes")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="flatten a scorecard into CSV tables")
    p.add_argument("--scorecard", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except COMPUTE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except WxVerifyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
