"""
WIMO estimators: 1-WIMO tests the GSV against the noise subspace, p-WIMO
tests the whole approximated STCM.

    P_1(θ) = 1 / (ŭ_1ᴴ U_n U_nᴴ ŭ_1)
    P_p(θ) = 1 / tr(U_nᴴ S̆(θ) U_n)

Providers map θ (degrees) to ŭ_1(θ) or S̆(θ); they must be built for the
same geometry, lag order, sampling interval and spectrum as the data.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from wimo.core.stcm import StcmEstimate, SubspaceSplit
from wimo.estimators.base import (
    DENOMINATOR_FLOOR,
    FlopCounter,
    SpatialSpectrum,
    SpectrumEstimator,
)

Provider = Callable[[float], np.ndarray]


def _check_dims(L_model: int, Un: np.ndarray) -> None:
    if L_model != Un.shape[0]:
        raise ValueError(
            f"model vectors have length {L_model} but the noise basis has {Un.shape[0]} rows"
        )


def spectrum_1wimo(
    Un: np.ndarray,
    grid: np.ndarray,
    gsv_provider: Provider,
    counter: FlopCounter | None = None,
) -> SpatialSpectrum:
    grid = np.asarray(grid, dtype=float)
    gsv = np.stack([gsv_provider(t) for t in grid])
    _check_dims(gsv.shape[1], Un)
    proj = gsv.conj() @ Un
    denom = np.sum(np.abs(proj) ** 2, axis=1)
    if counter is not None:
        L, n_noise = Un.shape
        counter.add_points(len(grid), n_noise * (L + 1))
    return SpatialSpectrum(
        grid=grid,
        values=1.0 / np.maximum(denom, DENOMINATOR_FLOOR),
        method="1-wimo",
        params={"L": Un.shape[0], "P": Un.shape[0] - Un.shape[1]},
    )


def pwimo_denominator(Un: np.ndarray, sbreve: np.ndarray) -> np.ndarray:
    """tr(U_nᴴ S̆ U_n) for one matrix or a stack of matrices."""
    product = sbreve @ Un
    return np.real(np.sum(Un.conj() * product, axis=(-2, -1)))


def spectrum_pwimo(
    Un: np.ndarray,
    grid: np.ndarray,
    sbreve_provider: Provider,
    counter: FlopCounter | None = None,
) -> SpatialSpectrum:
    grid = np.asarray(grid, dtype=float)
    stack = np.stack([sbreve_provider(t) for t in grid])
    _check_dims(stack.shape[1], Un)
    L, n_noise = Un.shape
    denom = pwimo_denominator(Un, stack)
    if counter is not None:
        counter.add_points(len(grid), n_noise * L * (L + 1))
    return SpatialSpectrum(
        grid=grid,
        values=1.0 / np.maximum(denom, DENOMINATOR_FLOOR * L),
        method="p-wimo",
        params={"L": L, "P": L - n_noise},
    )


class OneWimoEstimator(SpectrumEstimator):
    """1-WIMO over a precomputed GSV dictionary."""

    name = "1-wimo"
    needs_modal = True

    def spectrum(
        self,
        stcm: StcmEstimate,
        split: SubspaceSplit,
        grid: np.ndarray,
        counter: FlopCounter | None = None,
    ) -> SpatialSpectrum:
        if self.context.modal is None:
            raise ValueError("1-WIMO needs a modal dictionary")
        out = spectrum_1wimo(split.Un, grid, self.context.modal.gsv_provider(), counter)
        out.params["m"] = stcm.m
        return out


class PureWimoEstimator(SpectrumEstimator):
    """p-WIMO over a precomputed S̆ dictionary."""

    name = "p-wimo"
    needs_modal = True
    needs_sbreve = True

    def spectrum(
        self,
        stcm: StcmEstimate,
        split: SubspaceSplit,
        grid: np.ndarray,
        counter: FlopCounter | None = None,
    ) -> SpatialSpectrum:
        if self.context.modal is None:
            raise ValueError("p-WIMO needs a modal dictionary with S̆ matrices")
        out = spectrum_pwimo(split.Un, grid, self.context.modal.sbreve_provider(), counter)
        out.params["m"] = stcm.m
        return out
