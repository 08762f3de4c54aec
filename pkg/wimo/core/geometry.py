"""
Array geometry, propagation delays, and spatial-temporal model vectors.

Every estimator and the approximation layer consume the stacked delay
vector ``h`` built here.  Entries are ordered sensor-major, and within
a sensor block slot ``j`` carries ``+j*dt`` (oldest sample first), which
is the same order ``wimo.core.stcm.stack_observations`` produces.

Angles are radians in this module; degree conversion happens at the
config / CLI boundary.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def direction_vector(theta: float, phi: float = 0.0) -> np.ndarray:
    """Unit vector u(θ, φ) = [cosθ cosφ, cosθ sinφ, sinθ]."""
    return np.array(
        [
            np.cos(theta) * np.cos(phi),
            np.cos(theta) * np.sin(phi),
            np.sin(theta),
        ]
    )


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Sensor positions (meters, N_S x 3) and propagation speed (m/s)."""

    positions: np.ndarray
    c: float

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=float, ndmin=2)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(
                f"positions must be an (N_S, 3) array, got shape {pos.shape}"
            )
        if pos.shape[0] < 1:
            raise ValueError("an array needs at least 1 sensor")
        if not np.all(np.isfinite(pos)):
            raise ValueError("sensor positions must be finite")
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"propagation speed must be > 0, got {self.c!r}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "c", float(self.c))

    @property
    def n_sensors(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def ula(cls, n_sensors: int, spacing: float, c: float) -> "ArrayGeometry":
        """Uniform linear array on the z-axis with sensor 0 at the origin."""
        if n_sensors < 1:
            raise ValueError(f"n_sensors must be >= 1, got {n_sensors}")
        if spacing <= 0:
            raise ValueError(f"spacing must be > 0, got {spacing}")
        pos = np.zeros((n_sensors, 3))
        pos[:, 2] = np.arange(n_sensors) * spacing
        return cls(pos, c)

    @classmethod
    def half_wavelength_ula(cls, n_sensors: int, f_max: float, c: float) -> "ArrayGeometry":
        """ULA spaced at half the wavelength of *f_max* (d = c / 2 f_max)."""
        if f_max <= 0:
            raise ValueError(f"f_max must be > 0, got {f_max}")
        return cls.ula(n_sensors, c / (2.0 * f_max), c)

    def fingerprint(self) -> str:
        """Stable hash of the geometry, used as a cache-key component."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.positions, dtype="<f8").tobytes())
        digest.update(np.float64(self.c).astype("<f8").tobytes())
        return digest.hexdigest()[:16]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_sensors": self.n_sensors,
            "positions": self.positions.tolist(),
            "c": self.c,
        }


def sensor_delays(geometry: ArrayGeometry, theta: float, phi: float = 0.0) -> np.ndarray:
    """Plane-wave delays τ_k = −uᵀ(θ, φ) p_k / c, in seconds."""
    u = direction_vector(theta, phi)
    return -(geometry.positions @ u) / geometry.c


@dataclass(frozen=True, eq=False)
class StackedModel:
    """Stacked delay vector h for a given direction and lag order."""

    geometry: ArrayGeometry
    m: int
    dt: float
    theta: float
    phi: float = 0.0
    h: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"lag order m must be >= 1, got {self.m}")
        if not self.dt > 0:
            raise ValueError(f"sampling interval dt must be > 0, got {self.dt}")
        tau = sensor_delays(self.geometry, self.theta, self.phi)
        lags = np.arange(self.m) * self.dt
        h = (-tau[:, None] + lags[None, :]).reshape(-1)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def L(self) -> int:
        return self.m * self.geometry.n_sensors


def build_stacked_model(
    geometry: ArrayGeometry,
    theta: float,
    phi: float,
    m: int,
    dt: float,
) -> StackedModel:
    """Assemble h_k = −τ_⌊k/m⌋ + (k mod m)·dt."""
    return StackedModel(geometry=geometry, m=int(m), dt=float(dt), theta=theta, phi=phi)


def g_vector(model: StackedModel, f: float | np.ndarray) -> np.ndarray:
    """Model vector g_k = exp(j 2π h_k f).

    A scalar *f* gives a length-L vector; an array of frequencies gives an
    (L, n_f) matrix with one column per frequency.
    """
    f_arr = np.asarray(f, dtype=float)
    if f_arr.ndim == 0:
        return np.exp(2j * np.pi * model.h * f_arr)
    return np.exp(2j * np.pi * np.outer(model.h, f_arr))


def steering_vector(
    geometry: ArrayGeometry, theta: float, phi: float, fc: float
) -> np.ndarray:
    """Narrowband steering vector a_k = exp(−j 2π f_c τ_k)."""
    return np.exp(-2j * np.pi * fc * sensor_delays(geometry, theta, phi))
