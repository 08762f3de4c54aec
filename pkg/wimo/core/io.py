"""
File formats: the snapshot container, spectrum/peak outputs, f–θ maps and
metadata sidecars.

Snapshot container (little-endian)::

    offset  size  field
    0       8     magic  b"WIMOSNAP"
    8       4     version (uint32, currently 1)
    12      4     N_S (uint32)
    16      8     M (uint64)
    24      8     fs (float64, Hz)
    32      ...   N_S·M complex64, sensor-major (row k holds sensor k's M samples)

The CSV fallback stores one snapshot per row with columns
``re_0, im_0, re_1, im_1, ...`` and a ``# fs=<Hz>`` header line.

Output files carry linear values with units in the headers; anything
time-dependent goes to the sidecar JSON only.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from wimo.core.simulator import SnapshotMatrix

SNAPSHOT_MAGIC = b"WIMOSNAP"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<8sIIQd")

FORMATS_VERSION = "1"


class SnapshotFormatError(ValueError):
    """Raised when a snapshot file is malformed or inconsistent."""


# ── Snapshots ────────────────────────────────────────────────────────────


def write_snapshots(path: str | Path, snapshots: SnapshotMatrix) -> Path:
    """Write *snapshots* as a binary container, or as CSV for a ``.csv`` path."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _write_snapshots_csv(path, snapshots)
    header = _HEADER.pack(
        SNAPSHOT_MAGIC,
        SNAPSHOT_VERSION,
        snapshots.n_sensors,
        snapshots.n_snapshots,
        float(snapshots.fs),
    )
    payload = np.ascontiguousarray(snapshots.data, dtype="<c8").tobytes()
    path.write_bytes(header + payload)
    return path


def read_snapshots(path: str | Path) -> SnapshotMatrix:
    """Read a snapshot container or its CSV fallback."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_snapshots_csv(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, n_sensors, M, fs = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}, expected {SNAPSHOT_MAGIC!r}")
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"{path}: unsupported container version {version}")
    expected = n_sensors * M * 8
    body = raw[_HEADER.size :]
    if len(body) != expected:
        raise SnapshotFormatError(
            f"{path}: header declares N_S={n_sensors}, M={M} ({expected} bytes) "
            f"but the payload has {len(body)} bytes"
        )
    data = np.frombuffer(body, dtype="<c8").reshape(n_sensors, M).astype(complex)
    try:
        return SnapshotMatrix(data, fs)
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: {exc}") from exc


def _write_snapshots_csv(path: Path, snapshots: SnapshotMatrix) -> Path:
    n = snapshots.n_sensors
    columns = np.empty((snapshots.n_snapshots, 2 * n))
    columns[:, 0::2] = snapshots.data.real.T
    columns[:, 1::2] = snapshots.data.imag.T
    names = ",".join(f"re_{k},im_{k}" for k in range(n))
    np.savetxt(path, columns, delimiter=",", fmt="%.17g", header=f"fs={snapshots.fs!r}\n{names}")
    return path


def _read_snapshots_csv(path: Path) -> SnapshotMatrix:
    with path.open() as fh:
        first = fh.readline().strip()
    if not first.startswith("# fs="):
        raise SnapshotFormatError(f"{path}: first line must be '# fs=<Hz>', got {first!r}")
    try:
        fs = float(first[len("# fs=") :])
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: unreadable sampling rate in {first!r}") from exc
    values = np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#"))
    if values.shape[1] % 2:
        raise SnapshotFormatError(f"{path}: expected re/im column pairs, got {values.shape[1]} columns")
    data = (values[:, 0::2] + 1j * values[:, 1::2]).T
    try:
        return SnapshotMatrix(np.ascontiguousarray(data), fs)
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: {exc}") from exc


# ── Estimator outputs ────────────────────────────────────────────────────


def write_spectrum_csv(path: str | Path, spectrum) -> Path:
    """Columns ``theta_deg, value_linear, value_db``."""
    path = Path(path)
    table = np.column_stack([spectrum.grid, spectrum.values, spectrum.values_db])
    np.savetxt(
        path, table, delimiter=",", fmt="%.17g", header="theta_deg,value_linear,value_db", comments=""
    )
    return path


def write_peaks_json(path: str | Path, spectrum, peaks, extra: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    doc = {
        "format_version": FORMATS_VERSION,
        "method": spectrum.method,
        "params": spectrum.params,
        "peaks": peaks.to_dict(),
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def write_fmap_csv(path: str | Path, fmap) -> Path:
    """First row: ``f_hz\\theta_deg`` then the θ axis; each further row: f then values."""
    path = Path(path)
    header = "f_hz\\theta_deg," + ",".join(repr(float(t)) for t in fmap.theta)
    table = np.column_stack([fmap.f, fmap.values])
    np.savetxt(path, table, delimiter=",", fmt="%.17g", header=header, comments="")
    return path


def read_fmap_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_fmap_csv`: ``(f, theta, values)``."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    theta = np.array([float(x) for x in header[1:]])
    table = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    return table[:, 0], theta, table[:, 1:]


def write_sidecar(path: str | Path, metadata: dict[str, Any]) -> Path:
    """Metadata JSON next to a data file; the only place timestamps may appear."""
    path = Path(path)
    doc = {"format_version": FORMATS_VERSION, **metadata}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return path


def write_json(path: str | Path, doc: Any) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
