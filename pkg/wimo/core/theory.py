"""
Property suite behind ``wimo check-theory``.

Each check draws its own randomized configurations from ``theory.seed``
and returns an :class:`OperationResult` whose ``data`` carries the worst
observed metric and whose ``metadata['check']`` names the property.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from wimo.core.approx import (
    approx_stcm_uniform,
    asymptotic_sinf,
    band_power,
    modal_basis,
    sinc_pi,
    orthogonality_check,
)
from wimo.core.config import TheoryConfig
from wimo.core.geometry import ArrayGeometry, steering_vector
from wimo.core.result import OperationResult
from wimo.core.simulator import derive_seed
from wimo.core.stcm import eigen_split, hermitian_eig
from wimo.estimators.base import DENOMINATOR_FLOOR
from wimo.estimators.space_frequency import ss_reconstruct
from wimo.estimators.wimo import spectrum_1wimo

logger = logging.getLogger("wimo.theory")

PSD_MIN_EIG = 1e-10
HADAMARD_TOL = 1e-12
TRACE_TOL = 1e-9
RAYLEIGH_TOL = 1e-9
GSV_QUOTIENT_TOL = 1e-6
BAND_POWER_TOL = 1e-6
NARROWBAND_TOL = 1e-6
WIDEBAND_TOL = 0.05
WIDEBAND_FACTORS = (2, 4, 8, 16, 32, 64, 128)
ROUNDTRIP_RATIO = (1.6, 2.4)


@dataclass
class RandomConfig:
    geometry: ArrayGeometry
    theta: float
    phi: float
    fc: float
    B: float
    m: int
    dt: float

    def describe(self) -> dict[str, Any]:
        return {
            "n_sensors": self.geometry.n_sensors,
            "theta_deg": math.degrees(self.theta),
            "fc": self.fc,
            "B": self.B,
            "m": self.m,
            "fs": 1.0 / self.dt,
        }

    def approx(self):
        return approx_stcm_uniform(self.geometry, self.theta, self.phi, self.fc, self.B, self.m, self.dt)


def random_config(rng: np.random.Generator) -> RandomConfig:
    """Random geometry, direction, band and lag order with f_c ≥ B/2."""
    n_sensors = int(rng.integers(1, 7))
    c = float(rng.choice([343.0, 1500.0]))
    fs = float(rng.uniform(8e3, 48e3))
    fc = float(rng.uniform(0.1, 0.4)) * fs
    B = float(rng.uniform(0.0, 1.0)) * min(2.0 * fc, fs)
    positions = rng.uniform(-1.0, 1.0, size=(n_sensors, 3)) * (c / fc)
    return RandomConfig(
        geometry=ArrayGeometry(positions=positions, c=c),
        theta=float(rng.uniform(-math.pi / 2, math.pi / 2)),
        phi=float(rng.uniform(-math.pi, math.pi)),
        fc=fc,
        B=B,
        m=int(rng.integers(1, 9)),
        dt=1.0 / fs,
    )


def _configs(theory: TheoryConfig, stream: int, count: int) -> list[RandomConfig]:
    rng = np.random.default_rng(derive_seed(theory.seed, stream))
    return [random_config(rng) for _ in range(count)]


def _outcome(name: str, passed: bool, message: str, **data: Any) -> OperationResult:
    return OperationResult(success=bool(passed), data=data, message=message, metadata={"check": name})


# ── Checks ───────────────────────────────────────────────────────────────


def check_psd(theory: TheoryConfig) -> OperationResult:
    """S̆ᴺ, S̆ᵂ and S̆ are positive semidefinite."""
    worst = 0.0
    worst_cfg: dict[str, Any] = {}
    for cfg in _configs(theory, 1, theory.configs):
        S = cfg.approx()
        sbreve = -S.S_breve if theory.perturb else S.S_breve
        for matrix in (S.S_N, S.S_W, sbreve):
            values = np.linalg.eigvalsh(matrix)
            ratio = float(values[0]) / max(float(values[-1]), np.finfo(float).tiny)
            if ratio < worst:
                worst, worst_cfg = ratio, cfg.describe()
    passed = worst >= -PSD_MIN_EIG
    return _outcome(
        "psd",
        passed,
        f"min eigenvalue / sigma_1 = {worst:.3e} over {theory.configs} configs",
        min_ratio=worst,
        configs=theory.configs,
        worst_config=worst_cfg,
    )


def check_hadamard(theory: TheoryConfig) -> OperationResult:
    """S̆ equals the entrywise product of its factors and the direct sinc·phase formula; trace = L."""
    worst_product = 0.0
    worst_trace = 0.0
    for cfg in _configs(theory, 2, theory.configs):
        S = cfg.approx()
        lags = S.model.h[:, None] - S.model.h[None, :]
        direct = sinc_pi(cfg.B * lags) * np.exp(2j * np.pi * cfg.fc * lags)
        scale = float(np.max(np.abs(direct)))
        worst_product = max(
            worst_product,
            float(np.max(np.abs(S.S_breve - S.S_N * S.S_W))) / scale,
            float(np.max(np.abs(S.S_breve - direct))) / scale,
        )
        worst_trace = max(worst_trace, abs(float(np.real(np.trace(S.S_breve))) - S.L) / S.L)
    passed = worst_product <= HADAMARD_TOL and worst_trace <= TRACE_TOL
    return _outcome(
        "hadamard",
        passed,
        f"entry error {worst_product:.3e}, trace error {worst_trace:.3e}",
        entry_error=worst_product,
        trace_error=worst_trace,
    )


def check_orthogonality(theory: TheoryConfig) -> OperationResult:
    """Identical spectra of S̆ and S̆ᵂ; eigenspaces related by g ∘ (·) per cluster."""
    failures: list[dict[str, Any]] = []
    worst_eig = 0.0
    worst_angle = 0.0
    for cfg in _configs(theory, 3, theory.eigen_configs):
        report = orthogonality_check(cfg.approx())
        worst_eig = max(worst_eig, report.eigenvalue_error)
        for cluster in report.clusters:
            worst_angle = max(worst_angle, cluster.max_angle)
        if not report.passed:
            failures.append({"config": cfg.describe(), "failures": report.failures()})
    return _outcome(
        "orthogonality",
        not failures,
        f"eigenvalue error {worst_eig:.3e}, max principal angle {worst_angle:.3e} rad, "
        f"{len(failures)} failing configs",
        eigenvalue_error=worst_eig,
        max_angle_rad=worst_angle,
        failures=failures[:5],
    )


def check_rayleigh(theory: TheoryConfig, n_vectors: int = 50) -> OperationResult:
    """xᴴS̆x ≤ σ_1 for unit x, with equality at the GSV."""
    rng = np.random.default_rng(derive_seed(theory.seed, 40))
    worst_excess = -math.inf
    worst_gsv = 0.0
    for cfg in _configs(theory, 4, theory.eigen_configs):
        S = cfg.approx()
        basis = modal_basis(S)
        sigma_1 = float(basis.sigma[0])
        x = rng.standard_normal((S.L, n_vectors)) + 1j * rng.standard_normal((S.L, n_vectors))
        x /= np.linalg.norm(x, axis=0)
        quotients = np.real(np.sum(x.conj() * (S.S_breve @ x), axis=0))
        worst_excess = max(worst_excess, float(np.max(quotients) - sigma_1) / sigma_1)
        gsv = basis.gsv
        worst_gsv = max(worst_gsv, abs(float(np.real(np.vdot(gsv, S.S_breve @ gsv))) - sigma_1) / sigma_1)
    passed = worst_excess <= RAYLEIGH_TOL and worst_gsv <= GSV_QUOTIENT_TOL
    return _outcome(
        "rayleigh",
        passed,
        f"max (x^H S x - sigma_1)/sigma_1 = {worst_excess:.3e}, GSV quotient error {worst_gsv:.3e}",
        max_excess=worst_excess,
        gsv_error=worst_gsv,
    )


def check_band_power(theory: TheoryConfig, n_configs: int = 10, n_vectors: int = 100) -> OperationResult:
    """Band-integrated SS-Transform power of the wideband GSV is σ_1 and beats random unit vectors."""
    rng = np.random.default_rng(derive_seed(theory.seed, 50))
    worst_identity = 0.0
    beaten = 0
    for cfg in _configs(theory, 5, n_configs):
        if cfg.B <= 0:
            continue
        S = cfg.approx()
        sigma_w, u_w = hermitian_eig(S.S_W)
        top = u_w[:, 0]
        power = band_power(top, S.model, cfg.B)
        worst_identity = max(worst_identity, abs(power - float(sigma_w[0])) / float(sigma_w[0]))
        for _ in range(n_vectors):
            x = rng.standard_normal(S.L) + 1j * rng.standard_normal(S.L)
            x /= np.linalg.norm(x)
            if band_power(x, S.model, cfg.B) > power * (1.0 + BAND_POWER_TOL):
                beaten += 1
    passed = worst_identity <= BAND_POWER_TOL and beaten == 0
    return _outcome(
        "band_power",
        passed,
        f"band power vs sigma_1 error {worst_identity:.3e}, {beaten} random vectors above the GSV",
        identity_error=worst_identity,
        vectors_above=beaten,
    )


def check_narrowband_limit(theory: TheoryConfig) -> OperationResult:
    """m = 1, B = f_c·1e−6: S̆ → a aᴴ and 1-WIMO → narrowband MUSIC."""
    c, fc, n_sensors = 1500.0, 3000.0, 8
    geometry = ArrayGeometry.half_wavelength_ula(n_sensors, fc, c)
    B = fc * 1e-6
    dt = 1.0 / 10000.0
    theta = math.radians(23.5)
    S = approx_stcm_uniform(geometry, theta, 0.0, fc, B, 1, dt)
    a = steering_vector(geometry, theta, 0.0, fc)
    aa = np.outer(a, a.conj())
    matrix_error = float(np.linalg.norm(S.S_breve - aa) / np.linalg.norm(aa))
    sigma = modal_basis(S).sigma
    target = np.zeros(n_sensors)
    target[0] = n_sensors
    eig_error = float(np.max(np.abs(sigma - target)))

    truths = (math.radians(10.5), math.radians(30.5))
    R = sum(
        np.outer(v, v.conj()) for v in (steering_vector(geometry, t, 0.0, fc) for t in truths)
    ) + 0.1 * np.eye(n_sensors)
    Un = eigen_split(R, 2).Un
    grid = np.arange(-90.0, 90.5, 1.0)
    gsvs = {
        float(t): modal_basis(approx_stcm_uniform(geometry, math.radians(t), 0.0, fc, B, 1, dt)).gsv
        for t in grid
    }
    wimo = spectrum_1wimo(Un, grid, lambda t: gsvs[float(t)])
    music_denom = np.array(
        [
            np.sum(np.abs(Un.conj().T @ steering_vector(geometry, math.radians(t), 0.0, fc)) ** 2)
            / n_sensors
            for t in grid
        ]
    )
    music_db = -10.0 * np.log10(np.maximum(music_denom, DENOMINATOR_FLOOR))
    spectrum_error = float(np.max(np.abs(wimo.values_db - music_db)))
    passed = max(matrix_error, eig_error, spectrum_error) < NARROWBAND_TOL
    return _outcome(
        "narrowband_limit",
        passed,
        f"matrix {matrix_error:.3e}, eigenvalues {eig_error:.3e}, 1-WIMO vs MUSIC {spectrum_error:.3e} dB",
        matrix_error=matrix_error,
        eigenvalue_error=eig_error,
        spectrum_error_db=spectrum_error,
    )


def check_wideband_limit(theory: TheoryConfig) -> OperationResult:
    """B → ∞ at f_s = 2B: the spectrum of S̆ tends to N_S copies of the sinc(|k−l|/2) block."""
    f0, c, n_sensors, m, nu = 1000.0, 1500.0, 4, 4, 2.0
    geometry = ArrayGeometry.ula(n_sensors, c / (2.0 * f0), c)
    theta = math.radians(40.0)
    _, block_sigma = asymptotic_sinf(m, nu)
    target = np.sort(np.repeat(block_sigma, n_sensors))[::-1]
    errors: dict[str, float] = {}
    for factor in WIDEBAND_FACTORS:
        B = factor * f0
        S = approx_stcm_uniform(geometry, theta, 0.0, B, B, m, 1.0 / (nu * B))
        sigma = modal_basis(S).sigma
        errors[str(factor)] = float(np.max(np.abs(sigma - target)) / target[0])
    first, last = str(WIDEBAND_FACTORS[0]), str(WIDEBAND_FACTORS[-1])
    passed = errors[last] < WIDEBAND_TOL and errors[last] < errors[first]
    return _outcome(
        "wideband_limit",
        passed,
        "relative eigenvalue error by B/f0: " + ", ".join(f"{k}: {v:.3f}" for k, v in errors.items()),
        errors=errors,
        limit_spectrum=block_sigma.tolist(),
    )


def roundtrip_errors(
    theory: TheoryConfig, n_vectors: int = 20, L: int = 16, doublings: int = 4, samples: int = 257
) -> tuple[np.ndarray, np.ndarray]:
    """Spans Ω and the pooled RMS reconstruction error over each octave Ω·[1, 2)."""
    rng = np.random.default_rng(derive_seed(theory.seed, 60))
    unit = 1e-4
    cases = []
    for _ in range(n_vectors):
        h = (np.arange(L) + rng.uniform(-0.25, 0.25, L)) * unit
        y = rng.standard_normal(L) + 1j * rng.standard_normal(L)
        cases.append((h, y))
    min_gap = min(float(np.min(np.diff(np.sort(h)))) for h, _ in cases)
    spans = (100.0 / min_gap) * 2.0 ** np.arange(doublings)
    errors = np.empty(doublings)
    for i, span in enumerate(spans):
        sq = []
        for omega in span * (1.0 + np.arange(samples) / samples):
            for h, y in cases:
                sq.append((np.linalg.norm(ss_reconstruct(y, h, omega) - y) / np.linalg.norm(y)) ** 2)
        errors[i] = math.sqrt(float(np.mean(sq)))
    return spans, errors


def check_roundtrip(theory: TheoryConfig) -> OperationResult:
    """Inverse SS-Transform error halves each time the integration span doubles."""
    spans, errors = roundtrip_errors(theory)
    ratios = errors[:-1] / errors[1:]
    lo, hi = ROUNDTRIP_RATIO
    passed = bool(np.all((ratios >= lo) & (ratios <= hi)))
    return _outcome(
        "so_roundtrip",
        passed,
        "error ratios per doubling: " + ", ".join(f"{r:.3f}" for r in ratios),
        spans=spans.tolist(),
        errors=errors.tolist(),
        ratios=ratios.tolist(),
    )


CHECKS: dict[str, Callable[[TheoryConfig], OperationResult]] = {
    "psd": check_psd,
    "hadamard": check_hadamard,
    "orthogonality": check_orthogonality,
    "rayleigh": check_rayleigh,
    "band_power": check_band_power,
    "narrowband_limit": check_narrowband_limit,
    "wideband_limit": check_wideband_limit,
    "so_roundtrip": check_roundtrip,
}


@dataclass
class TheoryReport:
    outcomes: list[OperationResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(o.success for o in self.outcomes)

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "checks": [o.to_dict() for o in self.outcomes]}


def run_theory_suite(theory: TheoryConfig, only: list[str] | None = None) -> TheoryReport:
    """Run every check (or those named in *only*); a crashing check is a failure."""
    names = list(CHECKS) if not only else only
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"Unknown theory checks: {unknown}. Available: {list(CHECKS)}")
    report = TheoryReport()
    for name in names:
        start = time.perf_counter()
        try:
            outcome = CHECKS[name](theory)
        except Exception as exc:
            logger.exception("Theory check %s crashed", name)
            outcome = OperationResult.failure(exc, check=name)
        outcome.metadata["seconds"] = round(time.perf_counter() - start, 3)
        logger.info("%s: %s (%s)", name, "pass" if outcome.success else "FAIL", outcome.message)
        report.outcomes.append(outcome)
    return report
