"""
Wideband source simulator.

Sources are zero-mean circular complex Gaussian analytic signals, shaped
in the frequency domain by the square root of their PSD.  The shaped
record is one period of a circularly stationary process, so fractional
delays applied on the native FFT length are exact.  Recorded input that
is not periodic goes through the zero-guard path of ``propagate``.

Every random draw takes an explicit seed; Monte Carlo trials derive
their seeds with :func:`derive_seed` so that trials are independent of
execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import integrate

from wimo.core.geometry import ArrayGeometry, sensor_delays

PSD_KINDS = ("uniform", "gaussian", "sinc2", "tabulated")

# Half-power point of sinc²(x) is x = 0.44295, so the main-lobe 3 dB width
# is 0.8859 in units of the first-null distance.
_SINC2_HALF_POWER_WIDTH = 0.885893

_MASK64 = (1 << 64) - 1


# ── Seeds ────────────────────────────────────────────────────────────────


def _splitmix64(state: int) -> int:
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Child seed for stream *index* of *base_seed* (splitmix64 mix)."""
    if base_seed < 0 or index < 0:
        raise ValueError(f"seeds must be non-negative, got ({base_seed}, {index})")
    return _splitmix64((_splitmix64(base_seed & _MASK64) + index) & _MASK64)


# ── PSD ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PsdSpec:
    """Power spectral density of a source.

    ``uniform`` uses ``f_l``/``f_h``; ``gaussian`` and ``sinc2`` use ``fc``
    and ``bw3db`` and are truncated to ``band`` (default ``fc ± bw3db``);
    ``tabulated`` interpolates linearly between ``table`` points, and a
    single-point table is a tone.  ``power`` is the variance σ_x².
    """

    kind: str
    f_l: float | None = None
    f_h: float | None = None
    fc: float | None = None
    bw3db: float | None = None
    table: tuple[tuple[float, float], ...] = ()
    band: tuple[float, float] | None = None
    power: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in PSD_KINDS:
            raise ValueError(f"Unknown PSD kind: {self.kind!r}. Available: {list(PSD_KINDS)}")
        if not self.power > 0:
            raise ValueError(f"PSD power must be > 0, got {self.power}")
        if self.kind == "uniform":
            if self.f_l is None or self.f_h is None:
                raise ValueError("uniform PSD needs f_l and f_h")
            if self.f_h < self.f_l:
                raise ValueError(f"uniform PSD needs f_l <= f_h, got ({self.f_l}, {self.f_h})")
        elif self.kind in ("gaussian", "sinc2"):
            if self.fc is None or self.bw3db is None:
                raise ValueError(f"{self.kind} PSD needs fc and bw3db")
            if not self.bw3db > 0:
                raise ValueError(f"bw3db must be > 0, got {self.bw3db}")
            if self.band is not None and not self.band[0] < self.band[1]:
                raise ValueError(f"band must be increasing, got {self.band}")
        else:
            if not self.table:
                raise ValueError("tabulated PSD needs at least one (f, density) point")
            table = tuple(sorted((float(f), float(d)) for f, d in self.table))
            if any(d < 0 for _, d in table):
                raise ValueError("PSD densities must be nonnegative")
            if len({f for f, _ in table}) != len(table):
                raise ValueError("tabulated PSD frequencies must be distinct")
            object.__setattr__(self, "table", table)

    # -- constructors -----------------------------------------------------

    @classmethod
    def uniform(cls, f_l: float, f_h: float, power: float = 1.0) -> "PsdSpec":
        return cls(kind="uniform", f_l=f_l, f_h=f_h, power=power)

    @classmethod
    def gaussian(
        cls, fc: float, bw3db: float, power: float = 1.0, band: tuple[float, float] | None = None
    ) -> "PsdSpec":
        return cls(kind="gaussian", fc=fc, bw3db=bw3db, power=power, band=band)

    @classmethod
    def sinc2(
        cls, fc: float, bw3db: float, power: float = 1.0, band: tuple[float, float] | None = None
    ) -> "PsdSpec":
        return cls(kind="sinc2", fc=fc, bw3db=bw3db, power=power, band=band)

    @classmethod
    def tabulated(cls, points: Sequence[tuple[float, float]], power: float = 1.0) -> "PsdSpec":
        return cls(kind="tabulated", table=tuple((float(f), float(d)) for f, d in points), power=power)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "PsdSpec":
        data = dict(raw)
        if data.get("table") is not None:
            data["table"] = tuple(tuple(p) for p in data["table"])
        if data.get("band") is not None:
            data["band"] = tuple(data["band"])
        return cls(**{k: v for k, v in data.items() if v is not None})

    # -- shape ------------------------------------------------------------

    @property
    def is_tone(self) -> bool:
        lo, hi = self.support()
        return lo == hi

    def support(self) -> tuple[float, float]:
        """Closed frequency interval outside which the density is zero."""
        if self.kind == "uniform":
            return float(self.f_l), float(self.f_h)
        if self.kind in ("gaussian", "sinc2"):
            if self.band is not None:
                return float(self.band[0]), float(self.band[1])
            return float(self.fc - self.bw3db), float(self.fc + self.bw3db)
        return self.table[0][0], self.table[-1][0]

    def shape(self, f: np.ndarray | float) -> np.ndarray:
        """Unnormalized density at *f*; zero outside :meth:`support`."""
        f = np.asarray(f, dtype=float)
        lo, hi = self.support()
        inside = (f >= lo) & (f <= hi)
        if self.kind == "uniform":
            out = np.ones_like(f)
        elif self.kind == "gaussian":
            s = self.bw3db / (2.0 * math.sqrt(2.0 * math.log(2.0)))
            out = np.exp(-((f - self.fc) ** 2) / (2.0 * s * s))
        elif self.kind == "sinc2":
            width = self.bw3db / _SINC2_HALF_POWER_WIDTH
            out = np.sinc((f - self.fc) / width) ** 2
        else:
            freqs = np.array([p[0] for p in self.table])
            dens = np.array([p[1] for p in self.table])
            out = np.interp(f, freqs, dens)
        return np.where(inside, out, 0.0)

    def _shape_integral(self) -> float:
        lo, hi = self.support()
        if self.kind == "uniform":
            return hi - lo
        if self.kind == "tabulated":
            freqs = np.array([p[0] for p in self.table])
            dens = np.array([p[1] for p in self.table])
            return float(integrate.trapezoid(dens, freqs))
        value, _ = integrate.quad(lambda x: float(self.shape(x)), lo, hi, limit=200)
        return value

    def density(self, f: np.ndarray | float) -> np.ndarray:
        """Density S(f) normalized so that its integral equals ``power``."""
        if self.is_tone:
            raise ValueError("a single-frequency PSD has no finite density")
        area = self._shape_integral()
        if not area > 0:
            raise ValueError("PSD integrates to zero over its support")
        return self.shape(f) * (self.power / area)

    def center_frequency(self) -> float:
        """Power-weighted mean frequency."""
        lo, hi = self.support()
        if lo == hi:
            return lo
        if self.kind == "uniform":
            return 0.5 * (lo + hi)
        nodes = np.linspace(lo, hi, 4097)
        weights = self.shape(nodes)
        return float(integrate.trapezoid(weights * nodes, nodes) / integrate.trapezoid(weights, nodes))

    def bandwidth(self) -> float:
        lo, hi = self.support()
        return hi - lo

    def check_nyquist(self, fs: float) -> None:
        lo, hi = self.support()
        if not (0.0 < lo and hi <= fs / 2.0):
            raise ValueError(
                f"PSD support [{lo}, {hi}] Hz must lie inside (0, {fs / 2.0}] Hz for fs={fs}"
            )

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind, "power": self.power}
        if self.kind == "uniform":
            d.update(f_l=self.f_l, f_h=self.f_h)
        elif self.kind in ("gaussian", "sinc2"):
            d.update(fc=self.fc, bw3db=self.bw3db)
            if self.band is not None:
                d["band"] = list(self.band)
        else:
            d["table"] = [list(p) for p in self.table]
        return d

    def fingerprint(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# ── Sources and snapshots ────────────────────────────────────────────────


@dataclass(frozen=True)
class SourceSpec:
    """A far-field source: direction (degrees), PSD, and optional coherence.

    ``coherence`` is ``(group_id, rho)``; the first source of a group is
    the reference the others are mixed with.  ``snr_db`` of ``None`` means
    the source is not scaled against noise.
    """

    theta: float
    psd: PsdSpec
    snr_db: float | None = None
    coherence: tuple[str, float] | None = None

    def __post_init__(self) -> None:
        if abs(self.theta) > 90:
            raise ValueError(f"source theta must satisfy |theta| <= 90 deg, got {self.theta}")
        if self.coherence is not None:
            rho = self.coherence[1]
            if not 0.0 <= rho <= 1.0:
                raise ValueError(f"coherence rho must be in [0, 1], got {rho}")

    @property
    def variance(self) -> float:
        if self.snr_db is None:
            return self.psd.power
        return 10.0 ** (self.snr_db / 10.0)


@dataclass(eq=False)
class SnapshotMatrix:
    """N_S x M complex sensor samples at sampling rate ``fs``."""

    data: np.ndarray
    fs: float
    seed: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise ValueError(f"snapshot data must be 2-D (N_S, M), got shape {self.data.shape}")
        if self.data.shape[1] < 1:
            raise ValueError("snapshot matrix needs M >= 1")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("snapshot data contains non-finite entries")
        if not self.fs > 0:
            raise ValueError(f"fs must be > 0, got {self.fs}")

    @property
    def n_sensors(self) -> int:
        return self.data.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[1]

    def scaled(self, factor: complex) -> "SnapshotMatrix":
        return SnapshotMatrix(self.data * factor, self.fs, dict(self.seed))


# ── Operations ───────────────────────────────────────────────────────────


def synthesize_source(psd: PsdSpec, fs: float, n: int, rng_seed: int) -> np.ndarray:
    """Complex analytic Gaussian source of length *n* with PSD *psd*."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    psd.check_nyquist(fs)
    rng = np.random.default_rng(rng_seed)

    if psd.is_tone:
        f0 = psd.support()[0]
        phase = rng.uniform(0.0, 2.0 * np.pi)
        t = np.arange(n) / fs
        return math.sqrt(psd.power) * np.exp(1j * (2.0 * np.pi * f0 * t + phase))

    freqs = np.fft.fftfreq(n, d=1.0 / fs)
    weights = psd.shape(freqs)
    total = weights.sum()
    if not total > 0:
        raise ValueError(
            f"PSD support {psd.support()} contains no FFT bin at n={n}, fs={fs}; increase n"
        )
    white = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    shaped = np.fft.ifft(np.fft.fft(white) * np.sqrt(weights))
    return shaped * math.sqrt(psd.power * n / total)


def correlate_pair(
    x1: np.ndarray, x2: np.ndarray, rho: float
) -> tuple[np.ndarray, np.ndarray]:
    """Mix *x2* with *x1* at coherence *rho*: x2' = ρ x1 + √(1−ρ²) x2."""
    if len(x1) != len(x2):
        raise ValueError(f"series lengths differ: {len(x1)} != {len(x2)}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    return x1, rho * x1 + math.sqrt(1.0 - rho * rho) * x2


def _delay_rows(x: np.ndarray, taus: np.ndarray, fs: float, periodic: bool) -> np.ndarray:
    n = len(x)
    if periodic:
        n_fft = n
    else:
        n_pad = int(math.ceil(fs * float(np.max(np.abs(taus))))) * 4
        n_fft = n + n_pad
    spectrum = np.fft.fft(x, n_fft)
    freqs = np.fft.fftfreq(n_fft, d=1.0 / fs)
    shifts = np.exp(-2j * np.pi * np.outer(taus, freqs))
    return np.fft.ifft(spectrum[None, :] * shifts, axis=1)[:, :n]


def propagate(
    sources: Sequence[tuple[SourceSpec, np.ndarray]],
    geometry: ArrayGeometry,
    fs: float,
    *,
    phi: float = 0.0,
    periodic: bool = True,
) -> SnapshotMatrix:
    """Superpose plane-wave arrivals: sensor k receives Σ x(t − τ_k).

    With ``periodic=True`` each series is treated as one period of a
    circular process (what :func:`synthesize_source` produces).  Set it to
    ``False`` for arbitrary records: the FFT is then zero-guarded by
    ⌈fs·max|τ|⌉·4 samples and truncated.
    """
    if not sources:
        raise ValueError("propagate needs at least one source")
    lengths = {len(x) for _, x in sources}
    if len(lengths) != 1:
        raise ValueError(f"all source series must have the same length, got {sorted(lengths)}")
    n = lengths.pop()
    out = np.zeros((geometry.n_sensors, n), dtype=complex)
    for spec, series in sources:
        taus = sensor_delays(geometry, math.radians(spec.theta), phi)
        out += _delay_rows(np.asarray(series, dtype=complex), taus, fs, periodic)
    return SnapshotMatrix(out, fs)


def add_noise(snapshots: SnapshotMatrix, sigma_n2: float, rng_seed: int) -> SnapshotMatrix:
    """Add i.i.d. circular complex Gaussian noise of variance *sigma_n2*."""
    if sigma_n2 < 0:
        raise ValueError(f"noise variance must be >= 0, got {sigma_n2}")
    if sigma_n2 == 0:
        return snapshots
    rng = np.random.default_rng(rng_seed)
    shape = snapshots.data.shape
    noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(sigma_n2 / 2.0)
    return SnapshotMatrix(snapshots.data + noise, snapshots.fs, dict(snapshots.seed))


def simulate_scene(
    sources: Sequence[SourceSpec],
    geometry: ArrayGeometry,
    fs: float,
    n: int,
    seed: int,
    *,
    noise_var: float = 1.0,
    phi: float = 0.0,
) -> SnapshotMatrix:
    """Synthesize, correlate, scale, propagate and add noise for one scene.

    Source *i* draws from ``derive_seed(seed, i)`` and the noise from
    ``derive_seed(seed, len(sources))``.  Each series is drawn at unit
    power, mixed with its coherence-group reference, then scaled to the
    source variance.
    """
    unit: list[np.ndarray] = []
    references: dict[str, int] = {}
    for i, spec in enumerate(sources):
        x = synthesize_source(spec.psd, fs, n, derive_seed(seed, i)) / math.sqrt(spec.psd.power)
        if spec.coherence is not None:
            group, rho = spec.coherence
            if group in references:
                _, x = correlate_pair(unit[references[group]], x, rho)
            else:
                references[group] = i
        unit.append(x)

    scaled = [(spec, x * math.sqrt(spec.variance)) for spec, x in zip(sources, unit)]
    snapshots = propagate(scaled, geometry, fs, phi=phi)
    noise_seed = derive_seed(seed, len(sources))
    noisy = add_noise(snapshots, noise_var, noise_seed)
    noisy.seed.update(
        base=seed,
        sources=[derive_seed(seed, i) for i in range(len(sources))],
        noise=noise_seed,
    )
    return noisy
