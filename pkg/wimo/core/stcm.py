"""
Spatial-temporal covariance (STCM) estimation, eigen-split, and MDL order.

Observation vectors stack ``m`` consecutive samples of every sensor,
sensor-major and oldest sample first, matching the ``h`` ordering of
``wimo.core.geometry.StackedModel``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg

from wimo.core.simulator import SnapshotMatrix

logger = logging.getLogger("wimo.stcm")

# Vectors per partial sum; fixed so the reduction tree does not depend on threads.
CHUNK_VECTORS = 4096
EIG_FLOOR = 1e-15


@dataclass(eq=False)
class StcmEstimate:
    """Sample STCM with the provenance needed to rebuild the model."""

    S: np.ndarray
    n_vectors: int
    m: int
    n_sensors: int
    fs: float

    @property
    def L(self) -> int:
        return self.S.shape[0]

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    def to_dict(self) -> dict[str, Any]:
        return {
            "L": self.L,
            "m": self.m,
            "n_sensors": self.n_sensors,
            "n_vectors": self.n_vectors,
            "fs": self.fs,
            "trace": float(np.real(np.trace(self.S))),
        }


@dataclass(eq=False)
class SubspaceSplit:
    """Descending eigenvalues with signal (first P) and noise bases."""

    eigenvalues: np.ndarray
    Us: np.ndarray
    Un: np.ndarray
    P: int

    @property
    def L(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def vectors(self) -> np.ndarray:
        return np.hstack([self.Us, self.Un])


def hermitian_eig(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching eigenvectors of a Hermitian matrix."""
    values, vectors = linalg.eigh(matrix)
    order = np.argsort(values)[::-1]
    return values[order], vectors[:, order]


def _window_view(snapshots: SnapshotMatrix, m: int) -> np.ndarray:
    if m < 1:
        raise ValueError(f"lag order m must be >= 1, got {m}")
    M = snapshots.n_snapshots
    if M < m:
        raise ValueError(f"need at least m={m} snapshots, got M={M}")
    # (N_S, n_vectors, m) -> (n_vectors, N_S, m)
    return sliding_window_view(snapshots.data, m, axis=1).transpose(1, 0, 2)


def stack_observations(snapshots: SnapshotMatrix, m: int) -> np.ndarray:
    """All M − m + 1 stacked vectors as rows of an (n_vectors, L) array."""
    windows = _window_view(snapshots, m)
    return windows.reshape(windows.shape[0], -1)


def _tree_sum(parts: list[np.ndarray]) -> np.ndarray:
    while len(parts) > 1:
        paired = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            paired.append(parts[-1])
        parts = paired
    return parts[0]


def estimate_stcm(snapshots: SnapshotMatrix, m: int, threads: int = 1) -> StcmEstimate:
    """Ŝ = (1 / (M − m + 1)) Σ ỹ ỹᴴ, symmetrized.

    Partial sums run over fixed-size chunks and are combined by a pairwise
    tree, so the result is bit-identical for any *threads*.
    """
    windows = _window_view(snapshots, m)
    n_vectors = windows.shape[0]
    L = windows.shape[1] * windows.shape[2]

    def partial(start: int) -> np.ndarray:
        block = windows[start : start + CHUNK_VECTORS].reshape(-1, L)
        return block.T @ block.conj()

    starts = list(range(0, n_vectors, CHUNK_VECTORS))
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(partial, starts))
    else:
        parts = [partial(s) for s in starts]

    S = _tree_sum(parts) / n_vectors
    S = 0.5 * (S + S.conj().T)
    logger.debug("STCM L=%d from %d vectors in %d chunks", L, n_vectors, len(starts))
    return StcmEstimate(
        S=S,
        n_vectors=n_vectors,
        m=m,
        n_sensors=snapshots.n_sensors,
        fs=snapshots.fs,
    )


def eigen_split(S: StcmEstimate | np.ndarray, P: int) -> SubspaceSplit:
    """Split the EVD of *S* into a P-dimensional signal and L − P noise basis."""
    matrix = S.S if isinstance(S, StcmEstimate) else np.asarray(S)
    return split_from_eig(*hermitian_eig(matrix), P)


def split_from_eig(values: np.ndarray, vectors: np.ndarray, P: int) -> SubspaceSplit:
    """Split an existing descending EVD at order *P*."""
    L = values.shape[0]
    if not 1 <= P <= L - 1:
        raise ValueError(f"P must be in [1, {L - 1}] for L={L}, got {P}")
    return SubspaceSplit(
        eigenvalues=values,
        Us=vectors[:, :P],
        Un=vectors[:, P:],
        P=P,
    )


def mdl_values(eigenvalues: np.ndarray, n_vectors: int) -> np.ndarray:
    """MDL(k) for k = 0 .. L − 1 (Wax–Kailath form)."""
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1:
        raise ValueError("a 1-D vector of eigenvalues is expected")
    if n_vectors < 1:
        raise ValueError(f"n_vectors must be >= 1, got {n_vectors}")
    L = lam.size
    lam_max = float(lam.max()) if L else 0.0
    floor = EIG_FLOOR * lam_max if lam_max > 0 else EIG_FLOOR
    lam = np.maximum(lam, floor)
    log_n = math.log(n_vectors)

    out = np.empty(L)
    for k in range(L):
        tail = lam[k:]
        q = L - k
        log_geo = float(np.mean(np.log(tail)))
        log_arith = math.log(float(np.mean(tail)))
        out[k] = -q * n_vectors * (log_geo - log_arith) + 0.5 * k * (2 * L - k) * log_n
    return out


def mdl_order(eigenvalues: np.ndarray, n_vectors: int) -> int:
    """Model order minimizing MDL; eigenvalues are expected in descending order."""
    return int(np.argmin(mdl_values(eigenvalues, n_vectors)))
