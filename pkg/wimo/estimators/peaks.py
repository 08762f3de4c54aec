"""Peak extraction on dB-scaled spatial spectra."""

from __future__ import annotations

import logging

import numpy as np
from scipy.signal import find_peaks as _scipy_find_peaks

from wimo.estimators.base import Peak, PeakSet, SpatialSpectrum

logger = logging.getLogger("wimo.peaks")


def _refine(spectrum: SpatialSpectrum, idx: int) -> tuple[float, float]:
    """Vertex of the parabola through the reciprocal spectrum at idx−1, idx, idx+1.

    Inverse-orthogonality spectra have a quadratic denominator around a
    true direction, so the reciprocal is where a 3-point fit is exact.
    Returns (theta, height_db).
    """
    grid, values = spectrum.grid, spectrum.values
    y0, y1, y2 = 1.0 / values[idx - 1], 1.0 / values[idx], 1.0 / values[idx + 1]
    curvature = y0 - 2.0 * y1 + y2
    if not curvature > 0:
        return float(grid[idx]), float(10.0 * np.log10(values[idx]))
    delta = float(np.clip(0.5 * (y0 - y2) / curvature, -0.5, 0.5))
    step = 0.5 * (grid[idx + 1] - grid[idx - 1])
    vertex = y1 - 0.25 * (y0 - y2) * delta
    height = values[idx] if not vertex > 0 else max(1.0 / vertex, values[idx])
    return float(grid[idx] + delta * step), float(10.0 * np.log10(height))


def find_peaks(
    spectrum: SpatialSpectrum,
    min_prominence_db: float = 3.0,
    max_count: int | None = None,
    refine: bool = True,
) -> PeakSet:
    """Local maxima with topographic prominence ≥ *min_prominence_db*.

    A flat-topped maximum is reported at its lowest grid index and is not
    refined.  Grid endpoints are never peaks.  Peaks are sorted by height,
    highest first.
    """
    db = spectrum.values_db
    if db.size < 3:
        return PeakSet()
    indices, props = _scipy_find_peaks(db, prominence=min_prominence_db, plateau_size=1)

    peaks: list[Peak] = []
    for i, _ in enumerate(indices):
        left = int(props["left_edges"][i])
        plateau = int(props["plateau_sizes"][i]) > 1
        if refine and not plateau and 0 < left < db.size - 1:
            theta, height = _refine(spectrum, left)
        else:
            theta, height = float(spectrum.grid[left]), float(db[left])
        peaks.append(Peak(theta=theta, height_db=height, prominence_db=float(props["prominences"][i])))

    peaks.sort(key=lambda p: (-p.height_db, p.theta))
    if max_count is not None:
        peaks = peaks[:max_count]
    logger.debug("Found %d peaks on %s spectrum", len(peaks), spectrum.method)
    return PeakSet(peaks)
