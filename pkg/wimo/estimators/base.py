"""
Base estimator interface that every spatial-spectrum estimator implements.

An estimator turns a sample STCM and its eigen-split into a spatial
spectrum over a θ grid.  Everything the estimator needs besides the data
(array geometry, precomputed modal dictionary, frequency grid) comes in
through an :class:`EstimatorContext` at construction time.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from wimo.core.cache import ModalDictionary
from wimo.core.geometry import ArrayGeometry
from wimo.core.stcm import StcmEstimate, SubspaceSplit

# Inverse-orthogonality spectra diverge at exact orthogonality.
DENOMINATOR_FLOOR = 1e-12

# P/L windows for the automatic order rule.
ORDER_WINDOWS: dict[str, tuple[float, float]] = {
    "1-wimo": (0.2, 0.6),
    "p-wimo": (0.5, 0.7),
}


@dataclass
class SpatialSpectrum:
    """Linear-scale spectrum values over a strictly increasing θ grid (degrees)."""

    grid: np.ndarray
    values: np.ndarray
    method: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise ValueError(
                f"grid and values differ in shape: {self.grid.shape} vs {self.values.shape}"
            )
        if self.grid.size > 1 and not np.all(np.diff(self.grid) > 0):
            raise ValueError("spectrum grid must be strictly increasing")
        if not (np.all(np.isfinite(self.values)) and np.all(self.values > 0)):
            raise ValueError("spectrum values must be finite and > 0")

    @property
    def values_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.values)

    def argmax_theta(self) -> float:
        return float(self.grid[int(np.argmax(self.values))])

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "params": self.params,
            "theta_deg": self.grid.tolist(),
            "value": self.values.tolist(),
        }


@dataclass(frozen=True)
class Peak:
    theta: float
    height_db: float
    prominence_db: float

    def to_dict(self) -> dict[str, float]:
        return {
            "theta_deg": self.theta,
            "height_db": self.height_db,
            "prominence_db": self.prominence_db,
        }


@dataclass
class PeakSet:
    """Peaks sorted by height, highest first."""

    peaks: list[Peak] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    @property
    def thetas(self) -> list[float]:
        return [p.theta for p in self.peaks]

    def to_dict(self) -> list[dict[str, float]]:
        return [p.to_dict() for p in self.peaks]


@dataclass
class FlopCounter:
    """Advisory complex multiply-accumulate counts."""

    evd: int = 0
    spectrum: int = 0
    points: int = 0

    def add_evd(self, L: int) -> None:
        self.evd += 26 * L**3

    def add_points(self, n: int, per_point: int) -> None:
        self.points += n
        self.spectrum += n * per_point

    @property
    def total(self) -> int:
        return self.evd + self.spectrum

    def to_dict(self) -> dict[str, int]:
        return {
            "evd": self.evd,
            "spectrum": self.spectrum,
            "points": self.points,
            "total": self.total,
        }


@dataclass
class EstimatorContext:
    """Data-independent inputs of an estimator."""

    geometry: ArrayGeometry
    m: int
    dt: float
    modal: ModalDictionary | None = None
    f_grid: np.ndarray | None = None
    phi: float = 0.0
    mvdr_loading: float = 1e-6


def check_order(P: int, L: int) -> int:
    if not 1 <= P <= L - 1:
        raise ValueError(f"P must be in [1, {L - 1}] for L={L}, got {P}")
    return int(P)


def choose_order(method: str, p_mdl: int, eps_max: int, L: int) -> int:
    """Automatic signal-subspace order.

    WIMO methods clamp max(P_MDL, ε̂_max) into their P/L window; the
    space-frequency methods use max(P_MDL, 1).
    """
    if L < 2:
        raise ValueError(f"a noise subspace needs L >= 2, got L={L}")
    window = ORDER_WINDOWS.get(method)
    if window is None:
        return min(max(p_mdl, 1), L - 1)
    lo = max(1, math.ceil(window[0] * L))
    hi = min(L - 1, max(lo, math.floor(window[1] * L)))
    return min(max(max(p_mdl, eps_max), lo), hi)


class SpectrumEstimator(abc.ABC):
    """Abstract base class for all spatial-spectrum estimators."""

    name: str = "generic"
    needs_modal: bool = False
    needs_sbreve: bool = False

    def __init__(self, context: EstimatorContext) -> None:
        self._context = context

    @property
    def context(self) -> EstimatorContext:
        return self._context

    @abc.abstractmethod
    def spectrum(
        self,
        stcm: StcmEstimate,
        split: SubspaceSplit,
        grid: np.ndarray,
        counter: FlopCounter | None = None,
    ) -> SpatialSpectrum:
        """Evaluate the spectrum over *grid* (degrees)."""
