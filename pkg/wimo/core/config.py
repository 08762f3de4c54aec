"""
Experiment configuration for wimo.

An experiment is one YAML (or JSON) document.  Every accepted key is
declared once in :data:`CONFIG_SCHEMA`; the same table validates files,
applies ``--set key=value`` overrides, renders the CLI help epilog and
produces ``docs/experiment.schema.json``.  Keys inside the ``sources``
list are written ``sources[].psd.kind`` in the schema and
``sources[1].psd.kind`` in messages and overrides.

There is no environment-variable configuration: a config file plus its
overrides fully determines a run.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from wimo.core.cache import ModalSpec
from wimo.core.approx import Quadrature
from wimo.core.geometry import ArrayGeometry
from wimo.core.simulator import PSD_KINDS, PsdSpec, SourceSpec

logger = logging.getLogger("wimo.config")

METHODS = ("1-wimo", "p-wimo", "sf-cbf", "sf-mvdr", "sf-music")
SWEEP_AXES = ("snr", "bandwidth", "separation", "snapshots", "rho")


class ConfigError(ValueError):
    """Raised for unknown keys, wrong types and out-of-range values."""


@dataclass(frozen=True)
class ConfigKey:
    path: str
    type: str  # int | float | str | bool | list | section
    default: Any = None
    help: str = ""
    choices: tuple[str, ...] | None = None
    minimum: float | None = None
    maximum: float | None = None
    exclusive_minimum: bool = False
    nullable: bool = False


def _k(path: str, type_: str, default: Any = None, help_: str = "", **kw: Any) -> ConfigKey:
    return ConfigKey(path, type_, default, help_, **kw)


_DEFAULT_SOURCES = [
    {"theta": 15.0, "snr_db": 20.0, "psd": {"kind": "uniform", "f_l": 1500.0, "f_h": 4500.0}},
    {"theta": 25.0, "snr_db": 20.0, "psd": {"kind": "uniform", "f_l": 1500.0, "f_h": 4500.0}},
]

CONFIG_SCHEMA: tuple[ConfigKey, ...] = (
    _k("array", "section", help_="Sensor array."),
    _k("array.type", "str", "ula", "ula: uniform linear array on the z-axis; custom: explicit positions.",
       choices=("ula", "custom")),
    _k("array.n_sensors", "int", 8, "Number of ULA sensors N_S.", minimum=1),
    _k("array.spacing", "float", None, "ULA spacing in metres; default c / (2 f_max) over the sources.",
       minimum=0, exclusive_minimum=True, nullable=True),
    _k("array.positions", "list", None, "custom arrays: list of [x, y, z] sensor positions in metres.",
       nullable=True),
    _k("array.c", "float", 1500.0, "Propagation speed in m/s.", minimum=0, exclusive_minimum=True),
    _k("sources", "list", _DEFAULT_SOURCES, "Far-field sources, one mapping per source."),
    _k("sources[].theta", "float", None, "Direction of arrival in degrees.", minimum=-90, maximum=90),
    _k("sources[].snr_db", "float", 20.0,
       "Per-source SNR in dB against unit noise; null on every source gives a noiseless run.",
       nullable=True),
    _k("sources[].psd", "section", help_="Power spectral density of the source."),
    _k("sources[].psd.kind", "str", "uniform", "PSD family.", choices=PSD_KINDS),
    _k("sources[].psd.f_l", "float", None, "uniform: lower band edge in Hz.", minimum=0, nullable=True),
    _k("sources[].psd.f_h", "float", None, "uniform: upper band edge in Hz.", minimum=0, nullable=True),
    _k("sources[].psd.fc", "float", None, "gaussian/sinc2: centre frequency in Hz.", minimum=0,
       nullable=True),
    _k("sources[].psd.bw3db", "float", None, "gaussian/sinc2: 3 dB bandwidth in Hz.", minimum=0,
       exclusive_minimum=True, nullable=True),
    _k("sources[].psd.band", "list", None, "gaussian/sinc2: [lo, hi] truncation band; default fc ± bw3db.",
       nullable=True),
    _k("sources[].psd.table", "list", None, "tabulated: list of [f_hz, density] points.", nullable=True),
    _k("sources[].coherence", "section", help_="Coherence group; null for an independent source."),
    _k("sources[].coherence.group", "str", "g0", "Group id; the first source of a group is the reference."),
    _k("sources[].coherence.rho", "float", 0.0, "Coherence index with the group reference.",
       minimum=0, maximum=1),
    _k("sampling", "section", help_="Snapshot generation."),
    _k("sampling.fs", "float", 10000.0, "Sampling rate in Hz.", minimum=0, exclusive_minimum=True),
    _k("sampling.snapshots", "int", 8192, "Number of snapshots M per trial.", minimum=1),
    _k("sampling.seed", "int", 1, "Base seed; trial seeds derive from it.", minimum=0),
    _k("estimator", "section", help_="Spectrum estimator."),
    _k("estimator.method", "str", "1-wimo", "Spectrum estimator.", choices=METHODS),
    _k("estimator.m", "int", 6, "Temporal lag order m (samples stacked per sensor).", minimum=1),
    _k("estimator.p_mode", "str", "auto", "auto: MDL and effective-dimension rule; manual: estimator.p.",
       choices=("auto", "manual")),
    _k("estimator.p", "int", None, "Signal-subspace order when p_mode is manual.", minimum=1,
       nullable=True),
    _k("estimator.grid", "section", help_="θ grid in degrees."),
    _k("estimator.grid.start", "float", -90.0, "First grid angle.", minimum=-90, maximum=90),
    _k("estimator.grid.stop", "float", 90.0, "Last grid angle (inclusive).", minimum=-90, maximum=90),
    _k("estimator.grid.step", "float", 1.0, "Grid spacing.", minimum=0, exclusive_minimum=True),
    _k("estimator.psd_assumption", "str", "uniform",
       "uniform: S̆ from a flat band; true-psd: S̆ integrated over the first source's PSD.",
       choices=("uniform", "true-psd")),
    _k("estimator.band", "section", help_="Assumed band for the uniform assumption."),
    _k("estimator.band.f_l", "float", None, "Lower edge in Hz; default min over source supports.",
       minimum=0, nullable=True),
    _k("estimator.band.f_h", "float", None, "Upper edge in Hz; default max over source supports.",
       minimum=0, nullable=True),
    _k("estimator.f_grid", "section", help_="Frequency grid of the space-frequency methods."),
    _k("estimator.f_grid.start", "float", None, "First frequency in Hz; default band lower edge.",
       minimum=0, nullable=True),
    _k("estimator.f_grid.stop", "float", None, "Last frequency in Hz; default band upper edge.",
       minimum=0, nullable=True),
    _k("estimator.f_grid.num", "int", 64, "Number of frequencies.", minimum=1),
    _k("estimator.min_prominence_db", "float", 3.0, "Minimum peak prominence in dB.", minimum=0),
    _k("estimator.max_peaks", "int", None, "Keep at most this many peaks.", minimum=1, nullable=True),
    _k("estimator.refine", "bool", True, "Parabolic sub-grid peak refinement."),
    _k("estimator.rank_tol", "float", 1e-3, "Relative eigenvalue threshold for numerical rank.",
       minimum=0, exclusive_minimum=True),
    _k("estimator.mvdr_loading", "float", 1e-6, "SF-MVDR diagonal loading δ (relative to tr(S)/L).",
       minimum=0),
    _k("estimator.cache_dir", "str", None, "Directory for the modal-dictionary cache.", nullable=True),
    _k("estimator.quadrature", "section", help_="Quadrature for the true-psd assumption."),
    _k("estimator.quadrature.nodes", "int", 2048, "Initial trapezoid nodes.", minimum=2),
    _k("estimator.quadrature.max_nodes", "int", 65536, "Node cap for doubling.", minimum=2),
    _k("estimator.quadrature.tol", "float", 1e-9, "Stop when the Richardson correction is below this.",
       minimum=0, exclusive_minimum=True),
    _k("trials", "int", 50, "Monte Carlo trials per sweep point.", minimum=0),
    _k("jitter_deg", "float", 0.0, "Half-width of the uniform per-trial DOA jitter in degrees.", minimum=0),
    _k("sweep", "section", help_="Optional one-axis sweep."),
    _k("sweep.axis", "str", None, "Swept quantity.", choices=SWEEP_AXES, nullable=True),
    _k("sweep.values", "list", None,
       "Values: dB (snr), bandwidth ratio η as a fraction (bandwidth), degrees (separation), "
       "M (snapshots) or ρ (rho).", nullable=True),
    _k("sweep.center_deg", "float", None, "separation: centre of the first two sources; default their mean.",
       minimum=-90, maximum=90, nullable=True),
    _k("theory", "section", help_="check-theory suite."),
    _k("theory.configs", "int", 200, "Random configurations for the PSD checks.", minimum=1),
    _k("theory.eigen_configs", "int", 100, "Random configurations for the eigen-structure checks.",
       minimum=1),
    _k("theory.seed", "int", 7, "Seed of the randomized configurations.", minimum=0),
    _k("theory.perturb", "bool", False, "Inject a deliberate defect (harness self-test)."),
    _k("check", "section", help_="Assertions of bench --check."),
    _k("check.min_resolution", "float", None, "Every sweep point must resolve at least this often.",
       minimum=0, maximum=1, nullable=True),
    _k("check.max_rmse", "float", None, "Every sweep point must have RMSE (degrees) at most this.",
       minimum=0, nullable=True),
)

_SCHEMA: dict[str, ConfigKey] = {key.path: key for key in CONFIG_SCHEMA}
_SEGMENT = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?$")


# ── Validation ───────────────────────────────────────────────────────────


def _check_value(key: ConfigKey, where: str, value: Any) -> Any:
    if value is None:
        if key.nullable or key.type == "section":
            return None
        raise ConfigError(f"{where}: may not be null")
    if key.type == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
    elif key.type == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where}: must be finite, got {value!r}")
    elif key.type == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        if key.choices is not None and value not in key.choices:
            raise ConfigError(f"{where}: must be one of {list(key.choices)}, got {value!r}")
    elif key.type == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
    elif key.type == "list":
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
    if key.minimum is not None or key.maximum is not None:
        lo = -math.inf if key.minimum is None else key.minimum
        hi = math.inf if key.maximum is None else key.maximum
        too_low = value <= lo if key.exclusive_minimum else value < lo
        if too_low or value > hi:
            bracket = "(" if key.exclusive_minimum else "["
            raise ConfigError(f"{where}: must be in {bracket}{lo}, {hi}], got {value!r}")
    return value


def _walk(raw: Any, pattern_prefix: str, where_prefix: str) -> None:
    if not isinstance(raw, dict):
        label = where_prefix.rstrip(".") or "config"
        raise ConfigError(f"{label}: expected a mapping, got {raw!r}")
    for name, value in raw.items():
        pattern = f"{pattern_prefix}{name}"
        where = f"{where_prefix}{name}"
        key = _SCHEMA.get(pattern)
        if key is None:
            raise ConfigError(f"Unknown config key {where!r}")
        _check_value(key, where, value)
        if key.type == "section" and value is not None:
            _walk(value, pattern + ".", where + ".")
        elif pattern == "sources":
            for i, item in enumerate(value):
                _walk(item, "sources[].", f"sources[{i}].")


def validate(raw: dict[str, Any]) -> None:
    """Reject unknown keys, wrong types and out-of-range values."""
    _walk(raw, "", "")


# ── Overrides ────────────────────────────────────────────────────────────


def _parse_scalar(text: str) -> Any:
    try:
        import yaml

        return yaml.safe_load(text)
    except ImportError:
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            return text


def apply_overrides(raw: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
    """Return a copy of *raw* with ``key=value`` overrides applied.

    Keys are dotted paths; list items are addressed as ``sources[0]``.  An
    index equal to the list length appends a new entry.  Values are parsed
    as YAML scalars (``null``, ``10``, ``[1, 2]``).
    """
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, text = item.split("=", 1)
        segments = dotted.strip().split(".")
        node: Any = out
        for depth, segment in enumerate(segments):
            match = _SEGMENT.match(segment)
            if match is None:
                raise ConfigError(f"override key {dotted!r}: bad segment {segment!r}")
            name, index = match.group(1), match.group(2)
            last = depth == len(segments) - 1
            if index is None:
                if last:
                    node[name] = _parse_scalar(text)
                else:
                    child = node.get(name)
                    if not isinstance(child, dict):
                        child = node[name] = {}
                    node = child
                continue
            if name not in node:
                default = _SCHEMA.get(name)
                node[name] = copy.deepcopy(default.default) if default is not None else []
            items = node[name]
            if not isinstance(items, list):
                raise ConfigError(f"override key {dotted!r}: {name!r} is not a list")
            i = int(index)
            if i > len(items):
                raise ConfigError(
                    f"override key {dotted!r}: index {i} out of range for {len(items)} entries"
                )
            if i == len(items):
                items.append({})
            if last:
                items[i] = _parse_scalar(text)
            else:
                if not isinstance(items[i], dict):
                    items[i] = {}
                node = items[i]
    return out


# ── Typed experiment ─────────────────────────────────────────────────────


def _get(raw: dict[str, Any] | None, name: str, pattern: str) -> Any:
    if raw is not None and raw.get(name) is not None:
        return raw[name]
    return copy.deepcopy(_SCHEMA[pattern].default)


@dataclass(frozen=True)
class ArrayConfig:
    type: str = "ula"
    n_sensors: int = 8
    spacing: float | None = None
    positions: tuple[tuple[float, float, float], ...] | None = None
    c: float = 1500.0

    def build(self, f_max: float) -> ArrayGeometry:
        if self.type == "custom":
            return ArrayGeometry(positions=np.array(self.positions, dtype=float), c=self.c)
        if self.spacing is not None:
            return ArrayGeometry.ula(self.n_sensors, self.spacing, self.c)
        return ArrayGeometry.half_wavelength_ula(self.n_sensors, f_max, self.c)


@dataclass(frozen=True)
class GridConfig:
    start: float = -90.0
    stop: float = 90.0
    step: float = 1.0

    def values(self) -> np.ndarray:
        n = int(round((self.stop - self.start) / self.step)) + 1
        return self.start + self.step * np.arange(n)


@dataclass(frozen=True)
class EstimatorConfig:
    method: str = "1-wimo"
    m: int = 6
    p_mode: str = "auto"
    p: int | None = None
    grid: GridConfig = GridConfig()
    psd_assumption: str = "uniform"
    band: tuple[float | None, float | None] = (None, None)
    f_grid: tuple[float | None, float | None, int] = (None, None, 64)
    min_prominence_db: float = 3.0
    max_peaks: int | None = None
    refine: bool = True
    rank_tol: float = 1e-3
    mvdr_loading: float = 1e-6
    cache_dir: str | None = None
    quadrature: Quadrature = Quadrature()


@dataclass(frozen=True)
class SweepConfig:
    axis: str | None = None
    values: tuple[float, ...] = ()
    center_deg: float | None = None


@dataclass(frozen=True)
class TheoryConfig:
    configs: int = 200
    eigen_configs: int = 100
    seed: int = 7
    perturb: bool = False


@dataclass(frozen=True)
class CheckConfig:
    min_resolution: float | None = None
    max_rmse: float | None = None


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully resolved, validated experiment."""

    array: ArrayConfig
    sources: tuple[SourceSpec, ...]
    fs: float
    snapshots: int
    seed: int
    estimator: EstimatorConfig
    trials: int = 50
    jitter_deg: float = 0.0
    sweep: SweepConfig = SweepConfig()
    theory: TheoryConfig = TheoryConfig()
    check: CheckConfig = CheckConfig()

    @property
    def f_max(self) -> float:
        return max(s.psd.support()[1] for s in self.sources)

    def geometry(self) -> ArrayGeometry:
        return self.array.build(self.f_max)

    @property
    def noiseless(self) -> bool:
        return all(s.snr_db is None for s in self.sources)

    def assumed_band(self) -> tuple[float, float]:
        """(f_l, f_h) of the uniform assumption."""
        lo, hi = self.estimator.band
        if lo is None:
            lo = min(s.psd.support()[0] for s in self.sources)
        if hi is None:
            hi = max(s.psd.support()[1] for s in self.sources)
        return float(lo), float(hi)

    def frequency_grid(self) -> np.ndarray:
        start, stop, num = self.estimator.f_grid
        lo, hi = self.assumed_band()
        return np.linspace(lo if start is None else start, hi if stop is None else stop, num)

    def theta_grid(self) -> np.ndarray:
        return self.estimator.grid.values()

    def modal_spec(self) -> ModalSpec:
        """What the modal dictionary is built from, per ``psd_assumption``."""
        est = self.estimator
        if est.psd_assumption == "true-psd":
            reference = self.sources[0].psd
            if any(s.psd.to_dict() | {"power": 1} != reference.to_dict() | {"power": 1}
                   for s in self.sources[1:]):
                logger.warning("Sources have different PSDs; S̆ uses the first source's PSD")
            return ModalSpec(
                geometry=self.geometry(), m=est.m, dt=1.0 / self.fs, psd=reference,
                quadrature=est.quadrature,
            )
        lo, hi = self.assumed_band()
        return ModalSpec(
            geometry=self.geometry(), m=est.m, dt=1.0 / self.fs, fc=0.5 * (lo + hi), bandwidth=hi - lo
        )

    def with_sources(self, sources: Sequence[SourceSpec]) -> "ExperimentSpec":
        return replace(self, sources=tuple(sources))


def _build_source(raw: dict[str, Any], where: str) -> SourceSpec:
    if raw.get("theta") is None:
        raise ConfigError(f"{where}.theta: required")
    psd_raw = raw.get("psd")
    if psd_raw is None:
        raise ConfigError(f"{where}.psd: required")
    psd_fields = {k: v for k, v in psd_raw.items() if v is not None}
    psd_fields.setdefault("kind", "uniform")
    try:
        psd = PsdSpec.from_dict(psd_fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.psd: {exc}") from exc
    coherence = None
    if raw.get("coherence") is not None:
        group = _get(raw["coherence"], "group", "sources[].coherence.group")
        rho = float(_get(raw["coherence"], "rho", "sources[].coherence.rho"))
        coherence = (str(group), rho)
    snr = raw["snr_db"] if "snr_db" in raw else _SCHEMA["sources[].snr_db"].default
    return SourceSpec(
        theta=float(raw["theta"]),
        psd=psd,
        snr_db=None if snr is None else float(snr),
        coherence=coherence,
    )


def build_spec(raw: dict[str, Any]) -> ExperimentSpec:
    """Validate *raw* and resolve it into an :class:`ExperimentSpec`."""
    validate(raw)
    arr = raw.get("array") or {}
    positions = arr.get("positions")
    array = ArrayConfig(
        type=_get(arr, "type", "array.type"),
        n_sensors=_get(arr, "n_sensors", "array.n_sensors"),
        spacing=_get(arr, "spacing", "array.spacing"),
        positions=None if positions is None else tuple(tuple(float(x) for x in p) for p in positions),
        c=_get(arr, "c", "array.c"),
    )
    if array.type == "custom":
        if positions is None:
            raise ConfigError("array.positions: required when array.type is custom")
        if any(not isinstance(p, list) or len(p) != 3 for p in positions):
            raise ConfigError("array.positions: every position must be [x, y, z]")
    elif positions is not None:
        raise ConfigError("array.positions: only valid when array.type is custom")

    sources_raw = _get(raw, "sources", "sources")
    if not sources_raw:
        raise ConfigError("sources: at least one source is required")
    sources = tuple(_build_source(s, f"sources[{i}]") for i, s in enumerate(sources_raw))

    smp = raw.get("sampling") or {}
    fs = float(_get(smp, "fs", "sampling.fs"))
    for i, s in enumerate(sources):
        try:
            s.psd.check_nyquist(fs)
        except ValueError as exc:
            raise ConfigError(f"sources[{i}].psd: {exc}") from exc

    est = raw.get("estimator") or {}
    grid_raw = est.get("grid") or {}
    grid = GridConfig(
        start=float(_get(grid_raw, "start", "estimator.grid.start")),
        stop=float(_get(grid_raw, "stop", "estimator.grid.stop")),
        step=float(_get(grid_raw, "step", "estimator.grid.step")),
    )
    if not grid.start < grid.stop:
        raise ConfigError(f"estimator.grid: start must be < stop, got [{grid.start}, {grid.stop}]")
    for i, s in enumerate(sources):
        if not grid.start < s.theta < grid.stop:
            logger.warning(
                "sources[%d].theta=%g deg is not inside the grid (%g, %g); maxima on a grid edge "
                "are never reported as peaks",
                i, s.theta, grid.start, grid.stop,
            )
    band_raw = est.get("band") or {}
    fgrid_raw = est.get("f_grid") or {}
    quad_raw = est.get("quadrature") or {}
    estimator = EstimatorConfig(
        method=_get(est, "method", "estimator.method"),
        m=_get(est, "m", "estimator.m"),
        p_mode=_get(est, "p_mode", "estimator.p_mode"),
        p=_get(est, "p", "estimator.p"),
        grid=grid,
        psd_assumption=_get(est, "psd_assumption", "estimator.psd_assumption"),
        band=(_get(band_raw, "f_l", "estimator.band.f_l"), _get(band_raw, "f_h", "estimator.band.f_h")),
        f_grid=(
            _get(fgrid_raw, "start", "estimator.f_grid.start"),
            _get(fgrid_raw, "stop", "estimator.f_grid.stop"),
            _get(fgrid_raw, "num", "estimator.f_grid.num"),
        ),
        min_prominence_db=float(_get(est, "min_prominence_db", "estimator.min_prominence_db")),
        max_peaks=_get(est, "max_peaks", "estimator.max_peaks"),
        refine=_get(est, "refine", "estimator.refine"),
        rank_tol=float(_get(est, "rank_tol", "estimator.rank_tol")),
        mvdr_loading=float(_get(est, "mvdr_loading", "estimator.mvdr_loading")),
        cache_dir=_get(est, "cache_dir", "estimator.cache_dir"),
        quadrature=Quadrature(
            nodes=_get(quad_raw, "nodes", "estimator.quadrature.nodes"),
            max_nodes=_get(quad_raw, "max_nodes", "estimator.quadrature.max_nodes"),
            tol=float(_get(quad_raw, "tol", "estimator.quadrature.tol")),
        ),
    )
    if estimator.p_mode == "manual" and estimator.p is None:
        raise ConfigError("estimator.p: required when estimator.p_mode is manual")
    snapshots = _get(smp, "snapshots", "sampling.snapshots")
    if snapshots < estimator.m:
        raise ConfigError(
            f"sampling.snapshots: need M >= estimator.m ({estimator.m}), got {snapshots}"
        )

    sw = raw.get("sweep") or {}
    sweep = SweepConfig(
        axis=_get(sw, "axis", "sweep.axis"),
        values=tuple(_get(sw, "values", "sweep.values") or ()),
        center_deg=_get(sw, "center_deg", "sweep.center_deg"),
    )
    if sweep.axis is not None:
        if not sweep.values:
            raise ConfigError("sweep.values: required when sweep.axis is set")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in sweep.values):
            raise ConfigError(f"sweep.values: expected numbers, got {list(sweep.values)!r}")
        if sweep.axis in ("separation", "rho") and len(sources) < 2:
            raise ConfigError(f"sweep.axis: {sweep.axis} needs at least two sources")
        if sweep.axis == "separation":
            center = sweep.center_deg
            if center is None:
                center = 0.5 * (sources[0].theta + sources[1].theta)
            for v in sweep.values:
                if abs(center) + 0.5 * abs(v) > 90:
                    raise ConfigError(
                        f"sweep.values: separation {v} about {center} deg puts a source beyond 90 deg"
                    )

    th = raw.get("theory") or {}
    ck = raw.get("check") or {}
    return ExperimentSpec(
        array=array,
        sources=sources,
        fs=fs,
        snapshots=snapshots,
        seed=_get(smp, "seed", "sampling.seed"),
        estimator=estimator,
        trials=_get(raw, "trials", "trials"),
        jitter_deg=float(_get(raw, "jitter_deg", "jitter_deg")),
        sweep=sweep,
        theory=TheoryConfig(
            configs=_get(th, "configs", "theory.configs"),
            eigen_configs=_get(th, "eigen_configs", "theory.eigen_configs"),
            seed=_get(th, "seed", "theory.seed"),
            perturb=_get(th, "perturb", "theory.perturb"),
        ),
        check=CheckConfig(
            min_resolution=_get(ck, "min_resolution", "check.min_resolution"),
            max_rmse=_get(ck, "max_rmse", "check.max_rmse"),
        ),
    )


# ── Loading ──────────────────────────────────────────────────────────────


def _load_yaml(path: Path) -> dict[str, Any]:
    """Load YAML config, falling back to JSON parsing if PyYAML is missing."""
    text = path.read_text()
    try:
        import yaml

        return yaml.safe_load(text) or {}
    except ImportError:
        return json.loads(text)


class Config:
    """A raw experiment document and its resolved :class:`ExperimentSpec`."""

    def __init__(self, raw: dict[str, Any] | None = None) -> None:
        self._raw = raw or {}
        self.spec = build_spec(self._raw)

    @property
    def raw(self) -> dict[str, Any]:
        return copy.deepcopy(self._raw)

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: Sequence[str] = ()) -> "Config":
        """Load *path* (or the built-in defaults when ``None``) and apply *overrides*."""
        raw: dict[str, Any] = {}
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            try:
                raw = _load_yaml(path)
            except Exception as exc:
                raise ConfigError(f"{path}: cannot parse ({exc})") from exc
            if not isinstance(raw, dict):
                raise ConfigError(f"{path}: top level must be a mapping")
        return cls(apply_overrides(raw, overrides))

    @classmethod
    def from_dict(cls, raw: dict[str, Any], overrides: Sequence[str] = ()) -> "Config":
        return cls(apply_overrides(raw, overrides))

    @staticmethod
    def generate_template() -> str:
        """Return a commented YAML template of the default desk-scale scenario."""
        return """\
# wimo experiment
# Every key is optional; omitted keys take the defaults listed by `wimo --help`.
# Override any key on the command line: --set estimator.m=5 --set sources[0].snr_db=10

array:
  type: ula
  n_sensors: 8
  c: 1500.0            # m/s; spacing defaults to c / (2 f_max)

sources:
  - theta: 15.0
    snr_db: 20.0
    psd: {kind: uniform, f_l: 1500.0, f_h: 4500.0}
  - theta: 25.0
    snr_db: 20.0
    psd: {kind: uniform, f_l: 1500.0, f_h: 4500.0}

sampling:
  fs: 10000.0
  snapshots: 8192
  seed: 1

estimator:
  method: 1-wimo       # 1-wimo | p-wimo | sf-cbf | sf-mvdr | sf-music
  m: 6
  p_mode: manual       # auto: MDL / effective-dimension rule
  p: 15
  grid: {start: -90.0, stop: 90.0, step: 1.0}
  psd_assumption: uniform
  min_prominence_db: 3.0
  refine: true

trials: 50
jitter_deg: 0.0

# sweep:
#   axis: snr          # snr | bandwidth | separation | snapshots | rho
#   values: [-10, -5, 0, 5, 10, 20]

# check:
#   min_resolution: 0.9
#   max_rmse: 0.5
"""


# ── Documentation ────────────────────────────────────────────────────────


def help_epilog() -> str:
    """Every config key with its type, default and meaning, for ``--help``."""
    lines = ["config keys (set in the YAML file or with --set key=value):"]
    for key in CONFIG_SCHEMA:
        if key.type == "section":
            continue
        default = "[two 1.5-4.5 kHz sources]" if key.path == "sources" else json.dumps(key.default)
        kind = key.type if key.choices is None else "|".join(key.choices)
        lines.append(f"  {key.path}  ({kind}, default {default})")
        lines.append(f"      {key.help}")
    return "\n".join(lines)


_JSON_TYPES = {"int": "integer", "float": "number", "str": "string", "bool": "boolean", "list": "array"}


def _json_leaf(key: ConfigKey) -> dict[str, Any]:
    node: dict[str, Any] = {"description": key.help}
    kind = _JSON_TYPES[key.type]
    node["type"] = [kind, "null"] if key.nullable else kind
    if key.choices is not None:
        node["enum"] = list(key.choices) + ([None] if key.nullable else [])
    if key.minimum is not None:
        node["exclusiveMinimum" if key.exclusive_minimum else "minimum"] = key.minimum
    if key.maximum is not None:
        node["maximum"] = key.maximum
    if key.default is not None and key.path != "sources":
        node["default"] = key.default
    return node


def _json_object(prefix: str, description: str = "") -> dict[str, Any]:
    properties: dict[str, Any] = {}
    for key in CONFIG_SCHEMA:
        if not key.path.startswith(prefix):
            continue
        name = key.path[len(prefix) :]
        if "." in name or name.endswith("[]") or "[]" in name:
            continue
        if key.type == "section":
            node = _json_object(key.path + ".", key.help)
            node["type"] = ["object", "null"]
            properties[name] = node
        elif key.path == "sources":
            item = _json_object("sources[].")
            item["required"] = ["theta", "psd"]
            properties[name] = {"description": key.help, "type": "array", "items": item}
        else:
            properties[name] = _json_leaf(key)
    node: dict[str, Any] = {"type": "object", "additionalProperties": False, "properties": properties}
    if description:
        node["description"] = description
    return node


def json_schema() -> dict[str, Any]:
    """JSON Schema of an experiment document, generated from :data:`CONFIG_SCHEMA`."""
    doc = _json_object("", "wimo experiment configuration")
    return {"$schema": "https://json-schema.org/draft/2020-12/schema", "title": "wimo experiment", **doc}
