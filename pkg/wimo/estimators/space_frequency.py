"""
SS-Transform and the space-frequency distributions built on the STCM.

The SS-Transform of a stacked vector is Y(f, θ) = Σ_k ỹ_k e^{−j2π h_k f},
i.e. gᴴ ỹ.  Averaging |Y|² over observation vectors gives SF-CBF; the
MVDR and MUSIC variants replace Ŝ by its (loaded) inverse or by the noise
projector.  Each is evaluated over an (f, θ) grid; the bench collapses a
map to a spatial spectrum by averaging over f.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import linalg

from wimo.core.approx import sinc_pi
from wimo.core.geometry import StackedModel, build_stacked_model, g_vector
from wimo.core.simulator import SnapshotMatrix
from wimo.core.stcm import StcmEstimate, SubspaceSplit, stack_observations
from wimo.estimators.base import (
    DENOMINATOR_FLOOR,
    FlopCounter,
    SpatialSpectrum,
    SpectrumEstimator,
)

SF_METHODS = ("sf-cbf", "sf-mvdr", "sf-music")


# ── SS-Transform ─────────────────────────────────────────────────────────


def ss_transform(ytilde: np.ndarray, model: StackedModel, f: float | np.ndarray) -> complex | np.ndarray:
    """Σ_k ỹ_k exp(−j2π h_k f) at one frequency or an array of frequencies."""
    g = g_vector(model, f)
    out = g.conj().T @ np.asarray(ytilde)
    return complex(out) if np.ndim(out) == 0 else out


def ss_reconstruct(ytilde: np.ndarray, h: StackedModel | np.ndarray, span: float) -> np.ndarray:
    """Band-limited inverse SS-Transform over |f| ≤ span/2, normalized by the span.

    ŷ_k = (1/Ω) ∫ Y(f) e^{j2π h_k f} df = Σ_l ỹ_l sinc(Ω (h_k − h_l)), which
    tends to ỹ as Ω grows when the h_k are distinct.
    """
    if not span > 0:
        raise ValueError(f"span must be > 0, got {span}")
    delays = h.h if isinstance(h, StackedModel) else np.asarray(h, dtype=float)
    kernel = sinc_pi(span * (delays[:, None] - delays[None, :]))
    return kernel @ np.asarray(ytilde)


# ── Per-pixel distributions ──────────────────────────────────────────────


def sf_cbf(S: StcmEstimate | np.ndarray, model: StackedModel, f: float | np.ndarray) -> np.ndarray:
    """gᴴ S g."""
    matrix = S.S if isinstance(S, StcmEstimate) else np.asarray(S)
    G = np.atleast_2d(g_vector(model, f).T).T
    return np.real(np.sum(G.conj() * (matrix @ G), axis=0)).squeeze()


def _loaded_inverse_apply(matrix: np.ndarray, G: np.ndarray, loading: float) -> np.ndarray:
    L = matrix.shape[0]
    if loading < 0:
        raise ValueError(f"diagonal loading must be >= 0, got {loading}")
    loaded = matrix + loading * np.real(np.trace(matrix)) / L * np.eye(L)
    try:
        return linalg.solve(loaded, G, assume_a="her")
    except linalg.LinAlgError as exc:
        raise ValueError(f"STCM is singular; increase the diagonal loading ({exc})") from exc


def sf_mvdr(
    S: StcmEstimate | np.ndarray,
    model: StackedModel,
    f: float | np.ndarray,
    loading: float = 1e-6,
) -> np.ndarray:
    """1 / (gᴴ (S + δ tr(S)/L · I)⁻¹ g)."""
    matrix = S.S if isinstance(S, StcmEstimate) else np.asarray(S)
    G = np.atleast_2d(g_vector(model, f).T).T
    solved = _loaded_inverse_apply(matrix, G, loading)
    denom = np.real(np.sum(G.conj() * solved, axis=0))
    return (1.0 / np.maximum(denom, DENOMINATOR_FLOOR)).squeeze()


def sf_music(Un: np.ndarray, model: StackedModel, f: float | np.ndarray) -> np.ndarray:
    """1 / (gᴴ U_n U_nᴴ g)."""
    G = np.atleast_2d(g_vector(model, f).T).T
    denom = np.sum(np.abs(Un.conj().T @ G) ** 2, axis=0)
    return (1.0 / np.maximum(denom, DENOMINATOR_FLOOR)).squeeze()


def sf_cbf_sections(
    snapshots: SnapshotMatrix, m: int, model: StackedModel, f: float | np.ndarray
) -> np.ndarray:
    """SF-CBF as the mean |Y_SS|² over non-overlapping length-m sections."""
    vectors = stack_observations(snapshots, m)[::m]
    transforms = g_vector(model, np.atleast_1d(f)).conj().T @ vectors.T
    return np.mean(np.abs(transforms) ** 2, axis=1).squeeze()


# ── Maps ─────────────────────────────────────────────────────────────────


@dataclass
class FrequencyAngleMap:
    """Distribution values over (f, θ): ``values[i, j]`` is at (f[i], θ[j])."""

    f: np.ndarray
    theta: np.ndarray
    values: np.ndarray
    method: str
    params: dict[str, Any] = field(default_factory=dict)

    def collapse(self) -> np.ndarray:
        """Mean over frequency, one value per θ."""
        return self.values.mean(axis=0)


def sf_map(
    method: str,
    geometry,
    m: int,
    dt: float,
    f_grid: np.ndarray,
    theta_grid: np.ndarray,
    *,
    S: StcmEstimate | np.ndarray | None = None,
    Un: np.ndarray | None = None,
    phi: float = 0.0,
    loading: float = 1e-6,
    counter: FlopCounter | None = None,
) -> FrequencyAngleMap:
    """Evaluate a space-frequency distribution over f_grid × theta_grid (degrees)."""
    if method not in SF_METHODS:
        raise ValueError(f"Unknown space-frequency method: {method!r}. Available: {list(SF_METHODS)}")
    f_grid = np.atleast_1d(np.asarray(f_grid, dtype=float))
    theta_grid = np.asarray(theta_grid, dtype=float)
    L = m * geometry.n_sensors
    values = np.empty((len(f_grid), len(theta_grid)))

    if method == "sf-music":
        if Un is None:
            raise ValueError("sf-music needs a noise basis")
        per_pixel = Un.shape[1] * (L + 1)
    else:
        if S is None:
            raise ValueError(f"{method} needs an STCM")
        per_pixel = L * (L + 1)

    for j, theta in enumerate(theta_grid):
        model = build_stacked_model(geometry, np.radians(theta), phi, m, dt)
        if method == "sf-cbf":
            column = sf_cbf(S, model, f_grid)
        elif method == "sf-mvdr":
            column = sf_mvdr(S, model, f_grid, loading)
        else:
            column = sf_music(Un, model, f_grid)
        values[:, j] = np.atleast_1d(column)

    if counter is not None:
        counter.add_points(values.size, per_pixel)
    return FrequencyAngleMap(
        f=f_grid, theta=theta_grid, values=values, method=method, params={"m": m, "L": L}
    )


class SpaceFrequencyEstimator(SpectrumEstimator):
    """SF-CBF / SF-MVDR / SF-MUSIC collapsed over the context frequency grid."""

    needs_modal = False

    def __init__(self, context, method: str) -> None:
        super().__init__(context)
        if method not in SF_METHODS:
            raise ValueError(f"Unknown space-frequency method: {method!r}")
        if context.f_grid is None or len(context.f_grid) == 0:
            raise ValueError(f"{method} needs a frequency grid")
        self.name = method

    def frequency_map(
        self,
        stcm: StcmEstimate,
        split: SubspaceSplit,
        grid: np.ndarray,
        counter: FlopCounter | None = None,
    ) -> FrequencyAngleMap:
        ctx = self.context
        return sf_map(
            self.name,
            ctx.geometry,
            ctx.m,
            ctx.dt,
            ctx.f_grid,
            grid,
            S=stcm,
            Un=split.Un,
            phi=ctx.phi,
            loading=ctx.mvdr_loading,
            counter=counter,
        )

    def spectrum(
        self,
        stcm: StcmEstimate,
        split: SubspaceSplit,
        grid: np.ndarray,
        counter: FlopCounter | None = None,
    ) -> SpatialSpectrum:
        return self.spectrum_from_map(self.frequency_map(stcm, split, grid, counter), split)

    def spectrum_from_map(self, fmap: FrequencyAngleMap, split: SubspaceSplit) -> SpatialSpectrum:
        return SpatialSpectrum(
            grid=fmap.theta,
            values=np.maximum(fmap.collapse(), np.finfo(float).tiny),
            method=self.name,
            params={"m": self.context.m, "L": split.L, "P": split.P},
        )


class SfCbfEstimator(SpaceFrequencyEstimator):
    def __init__(self, context) -> None:
        super().__init__(context, "sf-cbf")


class SfMvdrEstimator(SpaceFrequencyEstimator):
    def __init__(self, context) -> None:
        super().__init__(context, "sf-mvdr")


class SfMusicEstimator(SpaceFrequencyEstimator):
    def __init__(self, context) -> None:
        super().__init__(context, "sf-music")
