"""Tests for snapshot containers and result files."""

import json
import struct

import numpy as np
import pytest

from wimo.core.io import (
    SNAPSHOT_MAGIC,
    SnapshotFormatError,
    read_fmap_csv,
    read_snapshots,
    write_fmap_csv,
    write_peaks_json,
    write_sidecar,
    write_snapshots,
    write_spectrum_csv,
)
from wimo.core.simulator import SnapshotMatrix
from wimo.estimators.base import Peak, PeakSet, SpatialSpectrum
from wimo.estimators.space_frequency import FrequencyAngleMap


@pytest.fixture
def snapshots():
    rng = np.random.default_rng(0)
    data = (rng.standard_normal((3, 40)) + 1j * rng.standard_normal((3, 40))).astype(np.complex64)
    return SnapshotMatrix(data.astype(complex), 10000.0)


class TestSnapshotContainer:
    def test_binary_roundtrip(self, snapshots, tmp_path):
        path = write_snapshots(tmp_path / "s.wimo", snapshots)
        back = read_snapshots(path)
        assert back.fs == 10000.0
        assert np.array_equal(back.data, snapshots.data)

    def test_header_layout(self, snapshots, tmp_path):
        raw = write_snapshots(tmp_path / "s.wimo", snapshots).read_bytes()
        magic, version, n_sensors, M, fs = struct.unpack_from("<8sIIQd", raw)
        assert (magic, version, n_sensors, M, fs) == (SNAPSHOT_MAGIC, 1, 3, 40, 10000.0)
        assert len(raw) == 32 + 3 * 40 * 8

    def test_csv_roundtrip(self, snapshots, tmp_path):
        path = write_snapshots(tmp_path / "s.csv", snapshots)
        assert path.read_text().startswith("# fs=10000.0")
        back = read_snapshots(path)
        assert np.array_equal(back.data, snapshots.data)

    def test_truncated_payload(self, snapshots, tmp_path):
        path = write_snapshots(tmp_path / "s.wimo", snapshots)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(SnapshotFormatError, match="N_S=3, M=40"):
            read_snapshots(path)

    def test_bad_magic(self, snapshots, tmp_path):
        path = write_snapshots(tmp_path / "s.wimo", snapshots)
        path.write_bytes(b"NOTWIMO!" + path.read_bytes()[8:])
        with pytest.raises(SnapshotFormatError, match="bad magic"):
            read_snapshots(path)

    def test_short_file(self, tmp_path):
        path = tmp_path / "s.wimo"
        path.write_bytes(b"WIMO")
        with pytest.raises(SnapshotFormatError, match="header"):
            read_snapshots(path)

    def test_csv_without_rate(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("1,0\n2,0\n")
        with pytest.raises(SnapshotFormatError, match="fs="):
            read_snapshots(path)


class TestResultFiles:
    def test_spectrum_csv(self, tmp_path):
        spectrum = SpatialSpectrum(grid=np.array([-1.0, 0.0, 1.0]), values=np.array([1.0, 10.0, 1.0]), method="x")
        path = write_spectrum_csv(tmp_path / "spectrum.csv", spectrum)
        lines = path.read_text().splitlines()
        assert lines[0] == "theta_deg,value_linear,value_db"
        assert [float(v) for v in lines[2].split(",")] == [0.0, 10.0, 10.0]

    def test_peaks_json(self, tmp_path):
        spectrum = SpatialSpectrum(grid=np.array([0.0, 1.0]), values=np.ones(2), method="1-wimo", params={"P": 3})
        peaks = PeakSet([Peak(theta=0.5, height_db=12.0, prominence_db=6.0)])
        doc = json.loads(write_peaks_json(tmp_path / "peaks.json", spectrum, peaks, {"run": 1}).read_text())
        assert doc["method"] == "1-wimo"
        assert doc["params"] == {"P": 3}
        assert doc["peaks"] == [{"theta_deg": 0.5, "height_db": 12.0, "prominence_db": 6.0}]
        assert doc["run"] == 1

    def test_fmap_roundtrip(self, tmp_path):
        fmap = FrequencyAngleMap(
            f=np.array([1000.0, 2000.0]), theta=np.array([-5.0, 0.0, 5.0]),
            values=np.arange(6.0).reshape(2, 3) + 1.0, method="sf-cbf",
        )
        path = write_fmap_csv(tmp_path / "fmap.csv", fmap)
        assert path.read_text().startswith("f_hz\\theta_deg,-5.0,0.0,5.0")
        f, theta, values = read_fmap_csv(path)
        assert np.array_equal(f, fmap.f)
        assert np.array_equal(theta, fmap.theta)
        assert np.array_equal(values, fmap.values)

    def test_sidecar_has_format_version(self, tmp_path):
        doc = json.loads(write_sidecar(tmp_path / "s.json", {"seed": 4}).read_text())
        assert doc == {"format_version": "1", "seed": 4}
