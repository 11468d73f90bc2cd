"""Scorecard assembly, schema validation, and CSV export.

Scorecards are deterministic JSON documents: keys are sorted, floats are
serialized with repr round-tripping, and no wall-clock data is included,
so identical runs produce byte-identical files. Undefined scores are the
literal string "n/a", never 0. The JSON Schema shipped with the package
(`schema/scorecard.schema.json`) is enforced on every write.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema

from .errors import WxVerifyError
from .spectra import ZonalSpectrum

SCHEMA_NAME = "wxverify-scorecard/v1"


def _load_schema() -> dict:
    ref = resources.files("wxverify").joinpath("schema/scorecard.schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))


_SCHEMA_CACHE: dict | None = None


def scorecard_schema() -> dict:
    global _SCHEMA_CACHE
    if _SCHEMA_CACHE is None:
        _SCHEMA_CACHE = _load_schema()
    return _SCHEMA_CACHE


def validate_scorecard(card: dict):
    """Raise :class:`WxVerifyError` when ``card`` violates the schema."""
    try:
        jsonschema.validate(card, scorecard_schema())
    except jsonschema.ValidationError as exc:
        raise WxVerifyError(f"scorecard violates schema: {exc.message}") from exc


def na(value: float | None):
    """Serialize an undefined score as the literal "n/a"."""
    return "n/a" if value is None else value


def new_scorecard(command: str, manifest_sha256: str, *,
                  thresholds_sha256: str | None = None,
                  besttrack_sha256: str | None = None,
                  gamma: float | None = None) -> dict:
    from . import __version__
    provenance = {
        "engine_version": __version__,
        "manifest_sha256": manifest_sha256,
    }
    if thresholds_sha256 is not None or command == "extremes":
        provenance["thresholds_sha256"] = thresholds_sha256
    if besttrack_sha256 is not None or command == "cyclones":
        provenance["besttrack_sha256"] = besttrack_sha256
    if gamma is not None:
        provenance["gamma"] = gamma
    return {
        "schema": SCHEMA_NAME,
        "command": command,
        "provenance": provenance,
    }


def dump_scorecard(card: dict) -> bytes:
    validate_scorecard(card)
    return (json.dumps(card, sort_keys=True, indent=2) + "\n").encode("utf-8")


def write_scorecard(card: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = dump_scorecard(card)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)
    return path


def write_spectrum_csv(spectrum: ZonalSpectrum, path: str | Path) -> Path:
    """Spectrum export: one (wavenumber, energy) row per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["k,energy"]
    for k, energy in zip(spectrum.wavenumbers, spectrum.energy):
        lines.append(f"{int(k)},{float(energy)!r}")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    tmp.replace(path)
    return path


def flatten_scorecard_csv(card: dict, out_dir: str | Path) -> list[Path]:
    """Write one CSV per populated scorecard section; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    sections = {
        "grid_metrics": ["model", "variable", "lead_hours", "metric", "value",
                         "n_samples"],
        "event_scores": ["model", "kind", "lead_days", "region", "pod", "far",
                         "csi", "tp", "fp", "fn"],
        "cyclone_scores": ["model", "lead_hours", "n_storms", "dpe_km",
                           "mslp_mae_hpa", "mslp_bias_hpa", "wind_mae_ms",
                           "wind_bias_ms"],
        "station_scores": ["model", "variable", "lead_hours", "rmse", "bias",
                           "acc", "n_pairs"],
    }
    for section, columns in sections.items():
        rows: Sequence[dict] = card.get(section, [])
        if not rows:
            continue
        lines = [",".join(columns)]
        for row in rows:
            cells = []
            for col in columns:
                value = row[col]
                cells.append(repr(value) if isinstance(value, float) else str(value))
            lines.append(",".join(cells))
        path = out_dir / f"{section}.csv"
        path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
        written.append(path)
    return written
