"""
Monte Carlo benchmark harness.

A trial runs the whole chain (synthesize → propagate → noise → STCM →
EVD and order → spectrum → peaks) for one derived seed and matches the
peaks to the true directions.  A sweep repeats that over ``trials``
indices at every value of one swept quantity.  Trial seeds depend only
on (base seed, trial index), and trial results are collected in index
order, so outputs do not depend on the number of worker threads.
Wall-clock time goes to a separate timing record and never into the
trial or summary files.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from wimo.core.approx import (
    approx_stcm_uniform,
    bass_ale_bound,
    effective_dim,
    effective_dim_max,
    modal_basis,
    numerical_rank,
    validity_ratio,
)
from wimo.core.cache import ModalCache, ModalDictionary
from wimo.core.config import SWEEP_AXES, CheckConfig, ExperimentSpec
from wimo.core.geometry import ArrayGeometry
from wimo.core.io import write_json
from wimo.core.simulator import PsdSpec, SnapshotMatrix, SourceSpec, derive_seed, simulate_scene
from wimo.core.stcm import estimate_stcm, hermitian_eig, mdl_order, split_from_eig
from wimo.estimators import create_estimator
from wimo.estimators.base import (
    EstimatorContext,
    FlopCounter,
    PeakSet,
    SpatialSpectrum,
    check_order,
    choose_order,
)
from wimo.estimators.peaks import find_peaks
from wimo.estimators.space_frequency import FrequencyAngleMap, SpaceFrequencyEstimator

logger = logging.getLogger("wimo.bench")

RESOLUTION_PROMINENCE_DB = 3.0
RESOLUTION_ERROR_DEG = 1.0
M_RULE_MIN = 4.0
# Stream index of the per-trial jitter draw; source and noise streams use 0..K.
_JITTER_STREAM = 1 << 20


def bandwidth_metrics(f_l: float, f_h: float) -> tuple[float, float]:
    """Bandwidth ratio η = 2(f_h − f_l)/(f_h + f_l) and scale γ = f_h/f_l."""
    if not f_l > 0:
        raise ValueError(f"f_l must be > 0, got {f_l}")
    if f_h < f_l:
        raise ValueError(f"f_h must be >= f_l, got f_l={f_l}, f_h={f_h}")
    return 2.0 * (f_h - f_l) / (f_h + f_l), f_h / f_l


# ── Single estimate ──────────────────────────────────────────────────────


@dataclass
class EstimateOutcome:
    spectrum: SpatialSpectrum
    peaks: PeakSet
    P: int
    p_mdl: int
    eps_max: int
    eigenvalues: np.ndarray
    flops: FlopCounter
    diagnostics: dict[str, float]
    spectrum_seconds: float
    fmap: FrequencyAngleMap | None = None

    @property
    def no_source_detected(self) -> bool:
        return self.p_mdl == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.spectrum.method,
            "P": self.P,
            "p_mdl": self.p_mdl,
            "eps_max": self.eps_max,
            "no_source_detected": self.no_source_detected,
            "peaks": self.peaks.to_dict(),
            "diagnostics": self.diagnostics,
            "flops": self.flops.to_dict(),
        }


def diagnostics(spec: ExperimentSpec, n_snapshots: int) -> dict[str, float]:
    """mB/f_s and M/(N_S m²), with warnings when they are low."""
    lo, hi = spec.assumed_band()
    m = spec.estimator.m
    n_sensors = spec.geometry().n_sensors
    ratio = validity_ratio(m, hi - lo, spec.fs)
    m_rule = n_snapshots / (n_sensors * m * m)
    if ratio < 1.0:
        logger.warning("m·B/f_s = %.3g < 1: the wideband approximation is weak", ratio)
    if m_rule < M_RULE_MIN:
        logger.warning("M/(N_S·m²) = %.3g < %g: too few snapshots for m=%d", m_rule, M_RULE_MIN, m)
    return {"validity_ratio": ratio, "snapshot_ratio": m_rule}


def modal_dictionary(
    spec: ExperimentSpec, cache: ModalCache | None = None, threads: int = 1
) -> ModalDictionary | None:
    """The GSV/S̆ dictionary the configured method needs, or ``None``."""
    method = spec.estimator.method
    if method not in ("1-wimo", "p-wimo"):
        return None
    cache = cache if cache is not None else ModalCache(spec.estimator.cache_dir)
    return cache.get_or_build(
        spec.modal_spec(), spec.theta_grid(), with_sbreve=method == "p-wimo", threads=threads
    )


def estimate_doa(
    snapshots: SnapshotMatrix,
    spec: ExperimentSpec,
    *,
    modal: ModalDictionary | None = None,
    cache: ModalCache | None = None,
    threads: int = 1,
) -> EstimateOutcome:
    """STCM → EVD → order → spectrum → peaks for one snapshot matrix."""
    est = spec.estimator
    geometry = spec.geometry()
    if snapshots.n_sensors != geometry.n_sensors:
        raise ValueError(
            f"snapshots have {snapshots.n_sensors} sensors but the array has {geometry.n_sensors}"
        )
    if not math.isclose(snapshots.fs, spec.fs, rel_tol=1e-12):
        raise ValueError(f"snapshot fs={snapshots.fs} Hz differs from sampling.fs={spec.fs} Hz")

    counter = FlopCounter()
    stcm = estimate_stcm(snapshots, est.m, threads=threads)
    values, vectors = hermitian_eig(stcm.S)
    counter.add_evd(stcm.L)
    p_mdl = mdl_order(values, stcm.n_vectors)
    lo, hi = spec.assumed_band()
    eps_max = effective_dim_max(geometry, 1, 0.5 * (lo + hi), hi - lo, est.m, stcm.dt, est.rank_tol)
    if est.p_mode == "manual":
        P = check_order(est.p, stcm.L)
    else:
        P = choose_order(est.method, p_mdl, eps_max, stcm.L)
    split = split_from_eig(values, vectors, P)
    logger.debug("P_MDL=%d eps_max=%d P=%d (L=%d)", p_mdl, eps_max, P, stcm.L)

    if modal is None and est.method in ("1-wimo", "p-wimo"):
        modal = modal_dictionary(spec, cache, threads)
    context = EstimatorContext(
        geometry=geometry,
        m=est.m,
        dt=stcm.dt,
        modal=modal,
        f_grid=spec.frequency_grid(),
        mvdr_loading=est.mvdr_loading,
    )
    estimator = create_estimator(est.method, context)
    grid = spec.theta_grid()
    fmap = None
    start = time.perf_counter()
    if isinstance(estimator, SpaceFrequencyEstimator):
        fmap = estimator.frequency_map(stcm, split, grid, counter)
        spectrum = estimator.spectrum_from_map(fmap, split)
    else:
        spectrum = estimator.spectrum(stcm, split, grid, counter)
    seconds = time.perf_counter() - start

    peaks = find_peaks(spectrum, est.min_prominence_db, est.max_peaks, est.refine)
    return EstimateOutcome(
        spectrum=spectrum,
        peaks=peaks,
        P=P,
        p_mdl=p_mdl,
        eps_max=eps_max,
        eigenvalues=values,
        flops=counter,
        diagnostics=diagnostics(spec, snapshots.n_snapshots),
        spectrum_seconds=seconds,
        fmap=fmap,
    )


# ── Trials ───────────────────────────────────────────────────────────────


def match_peaks(estimates: Sequence[float], truth: Sequence[float]) -> list[float | None]:
    """Greedy nearest assignment without replacement; ties go to the smaller angle.

    Returns, per true direction, the matched estimate or ``None``.
    """
    pairs = sorted(
        (abs(e - t), e, t, j, i) for i, e in enumerate(estimates) for j, t in enumerate(truth)
    )
    matched: list[float | None] = [None] * len(truth)
    used: set[int] = set()
    for _, e, _, j, i in pairs:
        if matched[j] is None and i not in used:
            matched[j] = e
            used.add(i)
    return matched


@dataclass
class TrialResult:
    index: int
    seed: int
    truth: list[float]
    estimates: list[float | None] = field(default_factory=list)
    errors: list[float | None] = field(default_factory=list)
    prominences: list[float] = field(default_factory=list)
    n_peaks: int = 0
    P: int | None = None
    p_mdl: int | None = None
    status: str = "error"
    flags: list[str] = field(default_factory=list)
    message: str = ""
    flops: int = 0
    spectrum_seconds: float = 0.0

    @property
    def resolved(self) -> bool:
        return self.status == "resolved"

    def to_row(self) -> dict[str, Any]:
        def join(values: Sequence[float | None]) -> str:
            return ";".join("" if v is None else repr(float(v)) for v in values)

        return {
            "trial": self.index,
            "seed": self.seed,
            "status": self.status,
            "resolved": int(self.resolved),
            "n_peaks": self.n_peaks,
            "P": "" if self.P is None else self.P,
            "p_mdl": "" if self.p_mdl is None else self.p_mdl,
            "truth_deg": join(self.truth),
            "estimate_deg": join(self.estimates),
            "error_deg": join(self.errors),
            "flags": ";".join(self.flags),
            "message": self.message,
        }


TRIAL_COLUMNS = (
    "sweep_value", "trial", "seed", "status", "resolved", "n_peaks", "P", "p_mdl",
    "truth_deg", "estimate_deg", "error_deg", "flags", "message",
)


def jittered_sources(spec: ExperimentSpec, seed: int) -> list[SourceSpec]:
    """Sources shifted by one shared ν ~ U[−jitter, +jitter] for this trial."""
    if spec.jitter_deg <= 0:
        return list(spec.sources)
    rng = np.random.default_rng(derive_seed(seed, _JITTER_STREAM))
    nu = float(rng.uniform(-spec.jitter_deg, spec.jitter_deg))
    return [replace(s, theta=s.theta + nu) for s in spec.sources]


def classify(truth: Sequence[float], peaks: PeakSet) -> tuple[str, list[float | None], list[float | None]]:
    """Resolution status, matched estimates and signed errors per true direction."""
    estimates = match_peaks(peaks.thetas, truth)
    errors = [None if e is None else e - t for e, t in zip(estimates, truth)]
    if len(peaks) != len(truth):
        return "wrong_peak_count", estimates, errors
    if any(p.prominence_db < RESOLUTION_PROMINENCE_DB for p in peaks):
        return "low_prominence", estimates, errors
    if any(err is None or abs(err) >= RESOLUTION_ERROR_DEG for err in errors):
        return "angle_error", estimates, errors
    return "resolved", estimates, errors


def run_trial(
    spec: ExperimentSpec,
    trial_index: int,
    *,
    modal: ModalDictionary | None = None,
    cache: ModalCache | None = None,
) -> TrialResult:
    """One seeded trial; stage failures are recorded, never raised."""
    seed = derive_seed(spec.seed, trial_index)
    result = TrialResult(index=trial_index, seed=seed, truth=[s.theta for s in spec.sources])
    try:
        sources = jittered_sources(spec, seed)
        result.truth = [s.theta for s in sources]
        snapshots = simulate_scene(
            sources,
            spec.geometry(),
            spec.fs,
            spec.snapshots,
            seed,
            noise_var=0.0 if spec.noiseless else 1.0,
        )
        outcome = estimate_doa(snapshots, spec, modal=modal, cache=cache)
    except Exception as exc:
        logger.debug("Trial %d failed: %s", trial_index, exc)
        result.status = "error"
        result.flags.append(type(exc).__name__)
        result.message = str(exc)
        return result

    status, estimates, errors = classify(result.truth, outcome.peaks)
    result.status = status
    result.estimates = estimates
    result.errors = errors
    result.prominences = [p.prominence_db for p in outcome.peaks]
    result.n_peaks = len(outcome.peaks)
    result.P = outcome.P
    result.p_mdl = outcome.p_mdl
    result.flops = outcome.flops.total
    result.spectrum_seconds = outcome.spectrum_seconds
    if outcome.no_source_detected:
        result.flags.append("no_source_detected")
    return result


def rmse(results: Sequence[TrialResult]) -> float | None:
    """Pooled RMS error in degrees over resolved trials; ``None`` if there are none."""
    errors = [e for r in results if r.resolved for e in r.errors if e is not None]
    if not errors:
        return None
    return math.sqrt(float(np.mean(np.square(errors))))


# ── Sweeps ───────────────────────────────────────────────────────────────


def apply_sweep_value(spec: ExperimentSpec, axis: str | None, value: float | None) -> ExperimentSpec:
    """The experiment at one value of the swept quantity."""
    if axis is None:
        return spec
    if axis not in SWEEP_AXES:
        raise ValueError(f"Unknown sweep axis: {axis!r}. Available: {list(SWEEP_AXES)}")
    sources = list(spec.sources)
    if axis == "snr":
        sources = [replace(s, snr_db=float(value)) for s in sources]
    elif axis == "bandwidth":
        eta = float(value)
        if not 0 <= eta < 2:
            raise ValueError(f"bandwidth ratio must be in [0, 2), got {eta}")
        updated = []
        for s in sources:
            if s.psd.kind != "uniform":
                raise ValueError("a bandwidth sweep needs uniform source PSDs")
            f_h = float(s.psd.f_h)
            updated.append(replace(s, psd=replace(s.psd, f_l=f_h * (2 - eta) / (2 + eta))))
        sources = updated
        spec = replace(spec, estimator=replace(spec.estimator, band=(None, None)))
    elif axis == "separation":
        if len(sources) < 2:
            raise ValueError("a separation sweep needs at least two sources")
        center = spec.sweep.center_deg
        if center is None:
            center = 0.5 * (sources[0].theta + sources[1].theta)
        half = 0.5 * float(value)
        sources[0] = replace(sources[0], theta=center - half)
        sources[1] = replace(sources[1], theta=center + half)
    elif axis == "snapshots":
        return replace(spec, snapshots=int(value))
    elif axis == "rho":
        if len(sources) < 2:
            raise ValueError("a coherence sweep needs at least two sources")
        sources[0] = replace(sources[0], coherence=("sweep", float(value)))
        sources[1] = replace(sources[1], coherence=("sweep", float(value)))
    return spec.with_sources(sources)


@dataclass
class SweepPoint:
    value: float | None
    trials: list[TrialResult]
    message: str = ""

    @property
    def empty(self) -> bool:
        return not self.trials

    @property
    def n_resolved(self) -> int:
        return sum(r.resolved for r in self.trials)

    @property
    def resolution_probability(self) -> float | None:
        return None if self.empty else self.n_resolved / len(self.trials)

    @property
    def resolution_std(self) -> float | None:
        """Monte Carlo standard deviation of the resolution probability."""
        p = self.resolution_probability
        return None if p is None else math.sqrt(p * (1.0 - p) / len(self.trials))

    @property
    def rmse(self) -> float | None:
        return rmse(self.trials)

    def to_dict(self) -> dict[str, Any]:
        statuses: dict[str, int] = {}
        for r in self.trials:
            statuses[r.status] = statuses.get(r.status, 0) + 1
        return {
            "value": self.value,
            "empty": self.empty,
            "trials": len(self.trials),
            "resolved": self.n_resolved,
            "resolution_probability": self.resolution_probability,
            "resolution_std": self.resolution_std,
            "rmse_deg": self.rmse,
            "rmse_over": "resolved trials",
            "status_counts": dict(sorted(statuses.items())),
            "no_source_detected": sum("no_source_detected" in r.flags for r in self.trials),
            "flops_per_spectrum": max((r.flops for r in self.trials), default=None),
            "message": self.message,
        }

    def timing(self) -> dict[str, Any]:
        seconds = [r.spectrum_seconds for r in self.trials if r.status != "error"]
        return {
            "value": self.value,
            "mean_spectrum_seconds": float(np.mean(seconds)) if seconds else None,
            "spectra": len(seconds),
        }


@dataclass
class SweepResult:
    axis: str | None
    method: str
    points: list[SweepPoint] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "axis": self.axis,
            "method": self.method,
            "points": [p.to_dict() for p in self.points],
        }

    def timing(self) -> dict[str, Any]:
        return {"axis": self.axis, "method": self.method, "points": [p.timing() for p in self.points]}


def run_sweep(
    spec: ExperimentSpec, *, threads: int = 1, cache: ModalCache | None = None
) -> SweepResult:
    """Run ``spec.trials`` trials at every sweep value (or once without a sweep)."""
    axis = spec.sweep.axis
    if axis is not None and axis not in SWEEP_AXES:
        raise ValueError(f"Unknown sweep axis: {axis!r}. Available: {list(SWEEP_AXES)}")
    cache = cache if cache is not None else ModalCache(spec.estimator.cache_dir)
    values: list[float | None] = list(spec.sweep.values) if axis is not None else [None]
    result = SweepResult(axis=axis, method=spec.estimator.method)

    for value in values:
        try:
            point_spec = apply_sweep_value(spec, axis, value)
        except ValueError as exc:
            logger.warning("Sweep %s=%s skipped: %s", axis, value, exc)
            result.points.append(SweepPoint(value=value, trials=[], message=str(exc)))
            continue
        if point_spec.trials == 0:
            result.points.append(SweepPoint(value=value, trials=[]))
            logger.info("Sweep %s=%s: no trials", axis, value)
            continue
        modal = modal_dictionary(point_spec, cache, threads)

        def one(index: int, _spec: ExperimentSpec = point_spec) -> TrialResult:
            return run_trial(_spec, index, modal=modal)

        indices = range(point_spec.trials)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                trials = list(pool.map(one, indices))
        else:
            trials = [one(i) for i in indices]
        trials.sort(key=lambda r: r.index)
        point = SweepPoint(value=value, trials=trials)
        result.points.append(point)
        logger.info(
            "Sweep %s=%s: resolution %.3f, RMSE %s over %d trials",
            axis, value, point.resolution_probability,
            "n/a" if point.rmse is None else f"{point.rmse:.3f} deg", len(trials),
        )
    return result


def check_sweep(result: SweepResult, check: CheckConfig) -> list[str]:
    """Failed assertions of ``check`` over every sweep point."""
    failures: list[str] = []
    for point in result.points:
        label = "point" if point.value is None else f"{result.axis}={point.value}"
        if check.min_resolution is not None:
            p = point.resolution_probability
            if p is None or p < check.min_resolution:
                failures.append(f"{label}: resolution probability {p} < {check.min_resolution}")
        if check.max_rmse is not None:
            r = point.rmse
            if r is None or r > check.max_rmse:
                failures.append(f"{label}: RMSE {r} deg > {check.max_rmse} deg")
    return failures


def write_sweep(result: SweepResult, out_dir: str | Path) -> dict[str, Path]:
    """trials.csv and summary.json (thread-count independent) plus timing.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trials_path = out / "trials.csv"
    with trials_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRIAL_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for point in result.points:
            for trial in point.trials:
                writer.writerow({"sweep_value": "" if point.value is None else point.value, **trial.to_row()})
    return {
        "trials": trials_path,
        "summary": write_json(out / "summary.json", result.to_dict()),
        "timing": write_json(out / "timing.json", result.timing()),
    }


# ── Modal-model experiments ──────────────────────────────────────────────


@dataclass
class EigenComparison:
    predicted: np.ndarray
    measured: np.ndarray
    threshold: float = 0.01

    @property
    def compared(self) -> np.ndarray:
        """Indices of eigenvalues above ``threshold`` of the largest measured one."""
        return np.flatnonzero(self.measured > self.threshold * self.measured[0])

    @property
    def max_relative_error(self) -> float:
        idx = self.compared
        return float(np.max(np.abs(self.predicted[idx] - self.measured[idx]) / self.measured[idx]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "predicted": self.predicted.tolist(),
            "measured": self.measured.tolist(),
            "compared": int(self.compared.size),
            "max_relative_error": self.max_relative_error,
        }


def eigenvalue_comparison(
    geometry: ArrayGeometry,
    thetas_deg: Sequence[float],
    f_l: float,
    f_h: float,
    fs: float,
    m: int,
    n_snapshots: int,
    runs: int,
    seed: int,
    threads: int = 1,
) -> EigenComparison:
    """σ_x²·σ_i(Σ_k S̆(θ_k)) against mean noiseless sample-STCM eigenvalues (σ_x² = 1)."""
    fc, B, dt = 0.5 * (f_l + f_h), f_h - f_l, 1.0 / fs
    total = sum(
        approx_stcm_uniform(geometry, math.radians(t), 0.0, fc, B, m, dt).S_breve for t in thetas_deg
    )
    predicted = modal_basis(total).sigma
    sources = [SourceSpec(theta=float(t), psd=PsdSpec.uniform(f_l, f_h)) for t in thetas_deg]

    def one(run: int) -> np.ndarray:
        snaps = simulate_scene(sources, geometry, fs, n_snapshots, derive_seed(seed, run), noise_var=0.0)
        return hermitian_eig(estimate_stcm(snaps, m).S)[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spectra = list(pool.map(one, range(runs)))
    else:
        spectra = [one(r) for r in range(runs)]
    return EigenComparison(predicted=predicted, measured=np.mean(spectra, axis=0))


def effective_dimension_table(
    geometry: ArrayGeometry,
    thetas_deg: Sequence[float],
    f_h: float,
    etas: Sequence[float],
    fs: float,
    m: int,
    n_snapshots: int,
    seed: int,
    rank_tol: float = 1e-3,
) -> list[dict[str, Any]]:
    """ε̂, ε̂_max, the BASS-ALE bound and the empirical noiseless rank per bandwidth ratio."""
    K = len(thetas_deg)
    dt = 1.0 / fs
    rows = []
    for i, eta in enumerate(etas):
        f_l = f_h * (2 - eta) / (2 + eta)
        fc, B = 0.5 * (f_l + f_h), f_h - f_l
        sources = [SourceSpec(theta=float(t), psd=PsdSpec.uniform(f_l, f_h)) for t in thetas_deg]
        snaps = simulate_scene(sources, geometry, fs, n_snapshots, derive_seed(seed, i), noise_var=0.0)
        rows.append(
            {
                "eta": float(eta),
                "f_l": f_l,
                "eps_hat": effective_dim(
                    geometry, [math.radians(t) for t in thetas_deg], fc, B, m, dt, rank_tol
                ),
                "eps_max": effective_dim_max(geometry, K, fc, B, m, dt, rank_tol),
                "bass_ale": bass_ale_bound(K, m, geometry.n_sensors),
                "empirical_rank": numerical_rank(estimate_stcm(snaps, m).S, rank_tol),
            }
        )
    return rows
