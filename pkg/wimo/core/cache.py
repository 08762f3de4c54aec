"""
Modal-basis precomputation and caching.

The GSV and S̆ over a θ grid depend only on the array, the lag order,
the sampling interval and the assumed spectrum, never on the data, so
they are built once (offline if a cache directory is given) and shared
read-only by every trial and thread.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from wimo.core.approx import (
    ApproxStcm,
    Quadrature,
    approx_stcm_psd,
    approx_stcm_uniform,
    modal_basis,
)
from wimo.core.geometry import ArrayGeometry
from wimo.core.simulator import PsdSpec

logger = logging.getLogger("wimo.cache")

CACHE_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ModalSpec:
    """Everything S̆(θ) depends on besides θ itself.

    Exactly one of (``fc``, ``bandwidth``) or ``psd`` describes the assumed
    source spectrum.
    """

    geometry: ArrayGeometry
    m: int
    dt: float
    fc: float | None = None
    bandwidth: float | None = None
    psd: PsdSpec | None = None
    phi: float = 0.0
    quadrature: Quadrature = Quadrature()

    def __post_init__(self) -> None:
        uniform = self.fc is not None and self.bandwidth is not None
        if uniform == (self.psd is not None):
            raise ValueError("ModalSpec needs either (fc, bandwidth) or psd, not both")

    @property
    def L(self) -> int:
        return self.m * self.geometry.n_sensors

    def approx(self, theta_deg: float) -> ApproxStcm:
        theta = math.radians(theta_deg)
        if self.psd is None:
            return approx_stcm_uniform(
                self.geometry, theta, self.phi, self.fc, self.bandwidth, self.m, self.dt
            )
        return approx_stcm_psd(
            self.geometry, theta, self.phi, self.psd, self.m, self.dt, self.quadrature
        )

    def key_fields(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "version": CACHE_FORMAT_VERSION,
            "geometry": self.geometry.fingerprint(),
            "m": self.m,
            "dt": repr(self.dt),
            "phi": repr(self.phi),
        }
        if self.psd is None:
            d.update(fc=repr(self.fc), bandwidth=repr(self.bandwidth))
        else:
            d.update(
                psd=self.psd.fingerprint(),
                quadrature=[self.quadrature.nodes, self.quadrature.max_nodes, self.quadrature.tol],
            )
        return d


@dataclass(eq=False)
class ModalDictionary:
    """GSVs (and optionally S̆) over a θ grid in degrees."""

    key: str
    grid: np.ndarray
    gsv: np.ndarray
    sbreve: np.ndarray | None = None

    def _index(self, theta_deg: float) -> int:
        idx = int(np.argmin(np.abs(self.grid - theta_deg)))
        if not math.isclose(self.grid[idx], theta_deg, abs_tol=1e-9):
            raise KeyError(f"theta {theta_deg!r} deg is not on the precomputed grid")
        return idx

    def gsv_provider(self) -> Callable[[float], np.ndarray]:
        return lambda theta_deg: self.gsv[self._index(theta_deg)]

    def sbreve_provider(self) -> Callable[[float], np.ndarray]:
        if self.sbreve is None:
            raise ValueError("this dictionary was built without S̆ matrices")
        return lambda theta_deg: self.sbreve[self._index(theta_deg)]


def dictionary_key(spec: ModalSpec, grid: np.ndarray, with_sbreve: bool) -> str:
    fields = spec.key_fields()
    fields["grid"] = [repr(float(x)) for x in grid]
    fields["sbreve"] = with_sbreve
    text = json.dumps(fields, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def build_modal_dictionary(
    spec: ModalSpec,
    grid: np.ndarray,
    *,
    with_sbreve: bool = False,
    threads: int = 1,
) -> ModalDictionary:
    """Evaluate S̆(θ) and its GSV at every grid point."""
    grid = np.asarray(grid, dtype=float)

    def one(theta_deg: float) -> tuple[np.ndarray, np.ndarray | None]:
        approx = spec.approx(theta_deg)
        basis = modal_basis(approx)
        return basis.gsv, (approx.S_breve if with_sbreve else None)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, grid))
    else:
        parts = [one(t) for t in grid]

    gsv = np.stack([p[0] for p in parts])
    sbreve = np.stack([p[1] for p in parts]) if with_sbreve else None
    return ModalDictionary(
        key=dictionary_key(spec, grid, with_sbreve), grid=grid, gsv=gsv, sbreve=sbreve
    )


class ModalCache:
    """
    Modal dictionaries keyed by their configuration hash.

    Lives in memory; with a *directory* every entry is also written to
    ``<directory>/<key>.npz`` and read back by later processes.
    """

    def __init__(self, directory: str | Path | None = None) -> None:
        self._dir = Path(directory) if directory is not None else None
        self._cache: dict[str, ModalDictionary] = {}

    def _path(self, key: str) -> Path:
        assert self._dir is not None
        return self._dir / f"{key}.npz"

    def get(self, key: str) -> ModalDictionary | None:
        entry = self._cache.get(key)
        if entry is not None or self._dir is None:
            return entry
        path = self._path(key)
        if not path.exists():
            return None
        with np.load(path) as data:
            if int(data["version"]) != CACHE_FORMAT_VERSION:
                logger.warning("Ignoring cache file %s with format version %s", path, data["version"])
                return None
            entry = ModalDictionary(
                key=key,
                grid=data["grid"],
                gsv=data["gsv"],
                sbreve=data["sbreve"] if "sbreve" in data.files else None,
            )
        self._cache[key] = entry
        return entry

    def put(self, entry: ModalDictionary) -> None:
        self._cache[entry.key] = entry
        if self._dir is None:
            return
        self._dir.mkdir(parents=True, exist_ok=True)
        arrays: dict[str, np.ndarray] = {
            "version": np.array(CACHE_FORMAT_VERSION),
            "grid": entry.grid,
            "gsv": entry.gsv,
        }
        if entry.sbreve is not None:
            arrays["sbreve"] = entry.sbreve
        np.savez(self._path(entry.key), **arrays)

    def invalidate(self, key: str | None = None) -> None:
        if key:
            self._cache.pop(key, None)
        else:
            self._cache.clear()

    def get_or_build(
        self,
        spec: ModalSpec,
        grid: np.ndarray,
        *,
        with_sbreve: bool = False,
        threads: int = 1,
    ) -> ModalDictionary:
        key = dictionary_key(spec, np.asarray(grid, dtype=float), with_sbreve)
        cached = self.get(key)
        if cached is not None:
            return cached
        entry = build_modal_dictionary(spec, grid, with_sbreve=with_sbreve, threads=threads)
        logger.debug("Built modal dictionary %s over %d grid points", key, len(entry.grid))
        self.put(entry)
        return entry
