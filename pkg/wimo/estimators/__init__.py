"""Spatial-spectrum estimators: 1-WIMO, p-WIMO and the space-frequency family."""

from wimo.estimators.base import EstimatorContext, SpectrumEstimator
from wimo.estimators.space_frequency import SfCbfEstimator, SfMusicEstimator, SfMvdrEstimator
from wimo.estimators.wimo import OneWimoEstimator, PureWimoEstimator

ESTIMATOR_REGISTRY: dict[str, type[SpectrumEstimator]] = {
    "1-wimo": OneWimoEstimator,
    "p-wimo": PureWimoEstimator,
    "sf-cbf": SfCbfEstimator,
    "sf-mvdr": SfMvdrEstimator,
    "sf-music": SfMusicEstimator,
}


def create_estimator(method: str, context: EstimatorContext) -> SpectrumEstimator:
    """Instantiate the estimator registered under *method*."""
    cls = ESTIMATOR_REGISTRY.get(method)
    if cls is None:
        raise ValueError(f"Unknown estimator: {method!r}. Available: {list(ESTIMATOR_REGISTRY)}")
    return cls(context)


__all__ = [
    "OneWimoEstimator",
    "PureWimoEstimator",
    "SfCbfEstimator",
    "SfMvdrEstimator",
    "SfMusicEstimator",
    "ESTIMATOR_REGISTRY",
    "create_estimator",
]
