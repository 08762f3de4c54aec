"""Shared pytest configuration."""

import pytest

from wimo.core.geometry import ArrayGeometry


@pytest.fixture
def ula8():
    """8-sensor half-wavelength ULA for a 4.5 kHz upper band edge in water."""
    return ArrayGeometry.half_wavelength_ula(8, 4500.0, 1500.0)


@pytest.fixture
def small_raw():
    """Desk-scale two-source experiment with a coarse grid and few trials."""
    return {
        "array": {"n_sensors": 8},
        "sources": [
            {"theta": 15.0, "snr_db": 20.0, "psd": {"kind": "uniform", "f_l": 1500.0, "f_h": 4500.0}},
            {"theta": 25.0, "snr_db": 20.0, "psd": {"kind": "uniform", "f_l": 1500.0, "f_h": 4500.0}},
        ],
        "sampling": {"fs": 10000.0, "snapshots": 8192, "seed": 1},
        "estimator": {"method": "1-wimo", "m": 6, "grid": {"start": -60.0, "stop": 60.0, "step": 1.0}},
        "trials": 4,
    }
