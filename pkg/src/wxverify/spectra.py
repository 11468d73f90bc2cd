"""Zonal energy spectra with mid-latitude band averaging.

Per latitude row i the longitudinal DFT is F_k = (1/n_lon) * sum_j x_j
exp(-2*pi*i*k*j/n_lon) and the energy spectrum is

    S_0 = C_i |F_0|^2,    S_k = 2 C_i |F_k|^2  for k > 0,

with C_i = 2*pi*R*cos(lat_i) the physical circumference of the latitude
circle (R in metres, so energies carry unit^2 * m). The factor 2
accounts for negative frequencies; it is applied verbatim to every
k > 0, including the Nyquist bin on even n_lon, so Parseval checks must
use odd n_lon or inputs without Nyquist energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBand, PolarRow
from .grid import EARTH_RADIUS_KM, GridField, VariableId, cos_lat

#: Mid-latitude band bounds (strict inequalities on |lat|), degrees.
MIDLATITUDE_BAND = (30.0, 60.0)


def latitude_circumference_m(lat_deg: float) -> float:
    """C_i = 2*pi*R*cos(lat) in metres; zero at the poles."""
    return float(2.0 * np.pi * EARTH_RADIUS_KM * 1000.0
                 * cos_lat(np.asarray([lat_deg]))[0])


@dataclass(frozen=True)
class ZonalSpectrum:
    """Band-averaged zonal energy spectrum for one (variable, lead)."""

    variable: VariableId
    lead_hours: int
    energy: np.ndarray
    band: tuple[float, float]

    def __post_init__(self):
        e = np.ascontiguousarray(self.energy, dtype=np.float64)
        if e.ndim != 1:
            raise ValueError("energy must be 1-D")
        if np.any(e < 0.0) or not np.all(np.isfinite(e)):
            raise ValueError("energies must be finite and non-negative")
        e.setflags(write=False)
        object.__setattr__(self, "energy", e)

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(self.energy.size)


def zonal_spectrum_row(field: GridField, row: int) -> np.ndarray:
    """Energy spectrum of one latitude row; length floor(n_lon/2) + 1.

    Raises :class:`PolarRow` when cos(lat) <= 0 (degenerate C_i).
    """
    n_lat, n_lon = field.grid.shape
    if not 0 <= row < n_lat:
        raise IndexError(f"row {row} outside [0, {n_lat})")
    lat = float(field.grid.lat_deg[row])
    c = latitude_circumference_m(lat)
    if c <= 0.0:
        raise PolarRow(f"latitude {lat} has non-positive circumference")
    coeff = np.fft.rfft(field.values[row]) / n_lon
    s = (coeff.real ** 2 + coeff.imag ** 2) * c
    s[1:] *= 2.0
    return s


def midlatitude_spectrum(field: GridField,
                         band: tuple[float, float] = MIDLATITUDE_BAND) -> ZonalSpectrum:
    """Unweighted mean of per-row spectra over rows with b0 < |lat| < b1.

    Both hemispheres contribute; rows are averaged in grid (north-to-
    south) order, so the reduction is deterministic. Raises
    :class:`EmptyBand` when no row qualifies.
    """
    b0, b1 = band
    abs_lat = np.abs(field.grid.lat_deg)
    rows = np.nonzero((abs_lat > b0) & (abs_lat < b1))[0]
    if rows.size == 0:
        raise EmptyBand(f"no grid row with {b0} < |lat| < {b1}")
    stack = np.stack([zonal_spectrum_row(field, int(r)) for r in rows])
    return ZonalSpectrum(field.variable, field.lead_hours,
                         np.mean(stack, axis=0), (float(b0), float(b1)))
