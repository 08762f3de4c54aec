"""
Closed-form approximation of the STCM and its modal decomposition.

For a source of bandwidth B centred at f_c the normalized approximated
STCM is

    s̆_kl = sinc(πB(h_k − h_l)) · exp(j2π f_c (h_k − h_l))

i.e. the Hadamard product of a rank-one narrowband factor g gᴴ and a
real sinc kernel.  Its dominant eigenvector is the generalized steering
vector (GSV) used by the 1-WIMO estimator; p-WIMO uses the whole matrix.
Non-uniform PSDs go through numerical integration of the same Fourier
pair.  All matrices here are normalized to a unit diagonal (trace = L).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import linalg

from wimo.core.geometry import ArrayGeometry, StackedModel, build_stacked_model, g_vector
from wimo.core.simulator import PsdSpec
from wimo.core.stcm import hermitian_eig

logger = logging.getLogger("wimo.approx")

PSD_TOLERANCE = 1e-10
CLUSTER_GAP = 1e-8
DEFAULT_RANK_TOL = 1e-3


def sinc_pi(x: np.ndarray | float) -> np.ndarray:
    """sin(πx)/(πx) with a series branch near zero."""
    arg = np.pi * np.asarray(x, dtype=float)
    small = np.abs(arg) < 1e-8
    safe = np.where(small, 1.0, arg)
    return np.where(small, 1.0 - arg * arg / 6.0, np.sin(safe) / safe)


def _lag_matrix(model: StackedModel) -> np.ndarray:
    return model.h[:, None] - model.h[None, :]


# ── Types ────────────────────────────────────────────────────────────────


@dataclass(eq=False)
class ApproxStcm:
    """S̆ with its narrowband (S_N) and wideband (S_W) Hadamard factors."""

    S_breve: np.ndarray
    S_N: np.ndarray
    S_W: np.ndarray
    model: StackedModel
    fc: float
    bandwidth: float
    psd: PsdSpec | None = None

    @property
    def L(self) -> int:
        return self.S_breve.shape[0]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "L": self.L,
            "m": self.model.m,
            "dt": self.model.dt,
            "theta_deg": math.degrees(self.model.theta),
            "fc": self.fc,
            "bandwidth": self.bandwidth,
        }
        if self.psd is not None:
            d["psd"] = self.psd.to_dict()
        return d


@dataclass(eq=False)
class ModalBasis:
    """Descending eigenvalues σ_i of S̆ and unit eigenvectors (columns of u)."""

    sigma: np.ndarray
    u: np.ndarray

    @property
    def gsv(self) -> np.ndarray:
        """Generalized steering vector: eigenvector of the largest eigenvalue."""
        return self.u[:, 0]


@dataclass(frozen=True)
class Quadrature:
    """Trapezoid rule with node doubling and Richardson extrapolation."""

    nodes: int = 2048
    max_nodes: int = 1 << 16
    tol: float = 1e-9
    chunk: int = 1024

    def __post_init__(self) -> None:
        if self.nodes < 2:
            raise ValueError(f"quadrature needs at least 2 nodes, got {self.nodes}")
        if self.max_nodes < self.nodes:
            raise ValueError("max_nodes must be >= nodes")


@dataclass
class ClusterDiagnostic:
    start: int
    stop: int
    max_angle: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_angle < self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "indices": [self.start, self.stop],
            "size": self.stop - self.start,
            "max_angle_rad": self.max_angle,
            "tolerance_rad": self.tolerance,
            "passed": self.passed,
        }


@dataclass
class OrthogonalityReport:
    """Eigenvalue and per-cluster eigenspace agreement of S̆ and S̆ᵂ."""

    eigenvalue_error: float
    eigenvalue_tolerance: float
    clusters: list[ClusterDiagnostic] = field(default_factory=list)

    @property
    def eigenvalues_match(self) -> bool:
        return self.eigenvalue_error <= self.eigenvalue_tolerance

    @property
    def passed(self) -> bool:
        return self.eigenvalues_match and all(c.passed for c in self.clusters)

    def failures(self) -> list[str]:
        out: list[str] = []
        if not self.eigenvalues_match:
            out.append(
                f"eigenvalue mismatch {self.eigenvalue_error:.3e} > {self.eigenvalue_tolerance:.1e}"
            )
        for c in self.clusters:
            if not c.passed:
                out.append(
                    f"cluster [{c.start}, {c.stop}) angle {c.max_angle:.3e} rad > {c.tolerance:.1e}"
                )
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "eigenvalue_error": self.eigenvalue_error,
            "clusters": [c.to_dict() for c in self.clusters],
            "failures": self.failures(),
        }


# ── Construction ─────────────────────────────────────────────────────────


def validity_ratio(m: int, B: float, fs: float) -> float:
    """m·B/f_s; the bin-decorrelation approximation wants this well above 1."""
    return m * B / fs


def approx_stcm_uniform(
    geometry: ArrayGeometry,
    theta: float,
    phi: float,
    fc: float,
    B: float,
    m: int,
    dt: float,
) -> ApproxStcm:
    """S̆ for a uniform PSD on [f_c − B/2, f_c + B/2]."""
    if B < 0:
        raise ValueError(f"bandwidth must be >= 0, got {B}")
    if fc < B / 2.0:
        logger.warning("fc=%.6g Hz is below B/2=%.6g Hz; band extends below 0 Hz", fc, B / 2.0)
    model = build_stacked_model(geometry, theta, phi, m, dt)
    S_W = sinc_pi(B * _lag_matrix(model))
    g = g_vector(model, fc)
    S_N = np.outer(g, g.conj())
    return ApproxStcm(
        S_breve=S_N * S_W,
        S_N=S_N,
        S_W=S_W,
        model=model,
        fc=float(fc),
        bandwidth=float(B),
    )


def _fourier_lags(
    psd: PsdSpec, lags: np.ndarray, nodes: int, chunk: int
) -> np.ndarray:
    """Trapezoid estimate of ∫ S(f) exp(j2π Δ f) df for every Δ in *lags*."""
    lo, hi = psd.support()
    f = np.linspace(lo, hi, nodes)
    w = psd.shape(f) * (f[1] - f[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    out = np.zeros(lags.shape, dtype=complex)
    for start in range(0, nodes, chunk):
        sl = slice(start, start + chunk)
        out += np.exp(2j * np.pi * np.outer(lags, f[sl])) @ w[sl]
    return out


def approx_stcm_psd(
    geometry: ArrayGeometry,
    theta: float,
    phi: float,
    psd: PsdSpec,
    m: int,
    dt: float,
    quadrature: Quadrature | None = None,
) -> ApproxStcm:
    """S̆ for an arbitrary PSD by numerical integration, normalized to trace L."""
    quad = quadrature or Quadrature()
    model = build_stacked_model(geometry, theta, phi, m, dt)
    L = model.L
    fc = psd.center_frequency()
    g = g_vector(model, fc)
    S_N = np.outer(g, g.conj())

    if psd.is_tone:
        return ApproxStcm(
            S_breve=S_N.copy(),
            S_N=S_N,
            S_W=np.ones((L, L)),
            model=model,
            fc=fc,
            bandwidth=0.0,
            psd=psd,
        )

    if np.any(psd.shape(np.linspace(*psd.support(), 257)) < 0):
        raise ValueError("PSD has negative density samples")

    rows, cols = np.triu_indices(L, k=1)
    lags = np.concatenate([[0.0], model.h[rows] - model.h[cols]])

    n = quad.nodes
    coarse = _fourier_lags(psd, lags, n, quad.chunk)
    while True:
        n_fine = 2 * n - 1
        fine = _fourier_lags(psd, lags, n_fine, quad.chunk)
        estimate = fine + (fine - coarse) / 3.0
        scale = abs(estimate[0])
        delta = float(np.max(np.abs(fine - coarse))) / 3.0 / scale
        if delta < quad.tol or n_fine >= quad.max_nodes:
            if delta >= quad.tol:
                logger.warning(
                    "PSD quadrature stopped at %d nodes with change %.3e > %.1e",
                    n_fine, delta, quad.tol,
                )
            break
        coarse, n = fine, n_fine

    values = estimate / estimate[0].real
    S = np.eye(L, dtype=complex)
    S[rows, cols] = values[1:]
    S[cols, rows] = values[1:].conj()
    return ApproxStcm(
        S_breve=S,
        S_N=S_N,
        S_W=S * S_N.conj(),
        model=model,
        fc=fc,
        bandwidth=psd.bandwidth(),
        psd=psd,
    )


# ── Modal basis and orthogonality checks ─────────────────────────────────


def _canonical_phase(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    return vectors * (pivots.conj() / np.abs(pivots))[None, :]


def modal_basis(S: ApproxStcm | np.ndarray) -> ModalBasis:
    """Full EVD of S̆, eigenvalues clamped at 0, canonical eigenvector phase."""
    matrix = S.S_breve if isinstance(S, ApproxStcm) else np.asarray(S)
    sigma, u = hermitian_eig(matrix)
    if sigma[-1] < -PSD_TOLERANCE * max(sigma[0], 0.0):
        logger.warning(
            "S̆ has eigenvalue %.3e below the PSD tolerance (sigma_1=%.3e)", sigma[-1], sigma[0]
        )
    return ModalBasis(sigma=np.maximum(sigma, 0.0), u=_canonical_phase(u))


def eigen_clusters(sigma: np.ndarray, gap: float = CLUSTER_GAP) -> list[tuple[int, int]]:
    """Half-open index ranges of eigenvalues whose successive gaps are < gap·σ_1."""
    scale = max(float(sigma[0]), np.finfo(float).tiny)
    bounds = [0]
    for i in range(len(sigma) - 1):
        if (sigma[i] - sigma[i + 1]) >= gap * scale:
            bounds.append(i + 1)
    bounds.append(len(sigma))
    return [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]


def orthogonality_check(
    S: ApproxStcm,
    basis: ModalBasis | None = None,
    *,
    eig_tol: float = 1e-9,
    angle_tol: float = 1e-6,
) -> OrthogonalityReport:
    """Compare the spectrum and eigenspaces of S̆ with g ∘ (eigenvectors of S̆ᵂ).

    Eigenspaces are compared per cluster by principal angles.  The angle
    tolerance of a cluster is widened to the rounding-level perturbation
    bound 64·L·ε·σ_1/gap when its separation from the rest is tiny.
    """
    basis = basis or modal_basis(S)
    sigma_w, u_w = hermitian_eig(S.S_W)
    sigma_w = np.maximum(sigma_w, 0.0)
    sigma_1 = max(float(basis.sigma[0]), np.finfo(float).tiny)
    eig_error = float(np.max(np.abs(basis.sigma - sigma_w))) / sigma_1

    g = g_vector(S.model, S.fc)
    mapped = g[:, None] * u_w
    eps = np.finfo(float).eps
    report = OrthogonalityReport(eigenvalue_error=eig_error, eigenvalue_tolerance=eig_tol)
    for start, stop in eigen_clusters(basis.sigma):
        if stop - start == S.L:
            continue
        angles = linalg.subspace_angles(basis.u[:, start:stop], mapped[:, start:stop])
        left = basis.sigma[start - 1] - basis.sigma[start] if start > 0 else np.inf
        right = basis.sigma[stop - 1] - basis.sigma[stop] if stop < S.L else np.inf
        separation = max(min(left, right), eps * sigma_1)
        tol = max(angle_tol, 64 * S.L * eps * sigma_1 / separation)
        report.clusters.append(
            ClusterDiagnostic(start=start, stop=stop, max_angle=float(np.max(angles)), tolerance=tol)
        )
    return report


# ── Effective dimension ──────────────────────────────────────────────────


def numerical_rank(matrix: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    values = linalg.eigvalsh(matrix)
    top = float(values.max())
    if top <= 0:
        return 0
    return int(np.sum(values > rank_tol * top))


def effective_dim(
    geometry: ArrayGeometry,
    thetas: Sequence[float],
    fc: float,
    B: float,
    m: int,
    dt: float,
    rank_tol: float = DEFAULT_RANK_TOL,
    phi: float = 0.0,
) -> int:
    """ε̂: numerical rank of Σ_k S̆(θ_k) (angles in radians)."""
    if len(thetas) == 0:
        raise ValueError("effective_dim needs at least one direction")
    total = sum(approx_stcm_uniform(geometry, t, phi, fc, B, m, dt).S_breve for t in thetas)
    return numerical_rank(total, rank_tol)


def effective_dim_max(
    geometry: ArrayGeometry,
    K: int,
    fc: float,
    B: float,
    m: int,
    dt: float,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> int:
    """ε̂_max = K · rank(S̆(90°)), the endfire time-bandwidth product."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    endfire = approx_stcm_uniform(geometry, math.pi / 2.0, 0.0, fc, B, m, dt)
    return K * numerical_rank(endfire.S_breve, rank_tol)


def bass_ale_bound(K: int, m: int, n_sensors: int) -> int:
    """Upper bound K·(m + N_S) on the signal-subspace dimension."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return K * (m + n_sensors)


# ── Asymptotics and band power ───────────────────────────────────────────


def asymptotic_sinf(m: int, nu: float) -> tuple[np.ndarray, np.ndarray]:
    """m×m limit block sinc(|k−l|/ν) for B → ∞ at f_s = νB, and its spectrum."""
    if not nu > 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    k = np.arange(m)
    diff = np.abs(k[:, None] - k[None, :]).astype(float)
    block = np.ones((m, m)) if math.isinf(nu) else sinc_pi(diff / nu)
    return block, np.sort(linalg.eigvalsh(block))[::-1]


def band_power(x: np.ndarray, model: StackedModel, B: float, nodes: int = 512) -> float:
    """(1/B) ∫_{−B/2}^{B/2} |Σ_k x_k e^{−j2π h_k u}|² du by Gauss–Legendre."""
    if not B > 0:
        raise ValueError(f"band power needs B > 0, got {B}")
    t, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * B * t
    transform = np.exp(-2j * np.pi * np.outer(u, model.h)) @ x
    return float(0.5 * np.sum(w * np.abs(transform) ** 2))


def band_power_closed_form(x: np.ndarray, S: ApproxStcm) -> float:
    """The same band power as the quadratic form xᴴ S̆ᵂ x."""
    return float(np.real(np.vdot(x, S.S_W @ x)))
