"""Tests for array geometry and stacked delay vectors."""

import math

import numpy as np
import pytest

from wimo.core.geometry import (
    ArrayGeometry,
    build_stacked_model,
    direction_vector,
    g_vector,
    sensor_delays,
    steering_vector,
)


class TestArrayGeometry:
    def test_ula_lies_on_z_axis(self):
        geo = ArrayGeometry.ula(4, 0.5, 1500.0)
        assert geo.n_sensors == 4
        assert np.allclose(geo.positions[:, :2], 0.0)
        assert np.allclose(geo.positions[:, 2], [0.0, 0.5, 1.0, 1.5])

    def test_half_wavelength_spacing(self, ula8):
        assert ula8.positions[1, 2] == pytest.approx(1500.0 / (2 * 4500.0))

    def test_rejects_bad_positions(self):
        with pytest.raises(ValueError, match="N_S, 3"):
            ArrayGeometry(np.zeros((3, 2)), 1500.0)

    def test_rejects_nonpositive_speed(self):
        with pytest.raises(ValueError, match="propagation speed"):
            ArrayGeometry.ula(2, 0.1, 0.0)

    def test_positions_are_copied(self):
        pos = np.zeros((2, 3))
        geo = ArrayGeometry(pos, 343.0)
        pos[1, 2] = 5.0
        assert geo.positions[1, 2] == 0.0

    def test_fingerprint_tracks_speed(self):
        a = ArrayGeometry.ula(4, 0.1, 1500.0)
        b = ArrayGeometry.ula(4, 0.1, 1500.0)
        c = ArrayGeometry.ula(4, 0.1, 1480.0)
        assert a.fingerprint() == b.fingerprint()
        assert a.fingerprint() != c.fingerprint()


class TestDelays:
    def test_direction_vector_is_unit(self):
        for theta, phi in [(0.0, 0.0), (0.3, 1.1), (-1.2, 2.5)]:
            assert np.linalg.norm(direction_vector(theta, phi)) == pytest.approx(1.0)

    def test_broadside_has_zero_delay(self, ula8):
        assert np.allclose(sensor_delays(ula8, 0.0), 0.0)

    def test_endfire_delays(self):
        geo = ArrayGeometry.ula(3, 0.15, 1500.0)
        tau = sensor_delays(geo, math.pi / 2)
        assert np.allclose(tau, [0.0, -1e-4, -2e-4])


class TestStackedModel:
    def test_h_is_sensor_major(self):
        geo = ArrayGeometry.ula(3, 0.15, 1500.0)
        dt = 1e-4
        model = build_stacked_model(geo, 0.4, 0.0, 4, dt)
        tau = sensor_delays(geo, 0.4)
        assert model.L == 12
        for k in range(model.L):
            assert model.h[k] == pytest.approx(-tau[k // 4] + (k % 4) * dt)

    def test_rejects_zero_lag_order(self, ula8):
        with pytest.raises(ValueError, match="lag order"):
            build_stacked_model(ula8, 0.0, 0.0, 0, 1e-4)

    def test_g_reduces_to_steering_vector_for_m_1(self, ula8):
        model = build_stacked_model(ula8, 0.35, 0.0, 1, 1e-4)
        assert np.allclose(g_vector(model, 3000.0), steering_vector(ula8, 0.35, 0.0, 3000.0))

    def test_g_vector_over_frequency_grid(self, ula8):
        model = build_stacked_model(ula8, 0.2, 0.0, 3, 1e-4)
        f = np.array([1500.0, 3000.0, 4500.0])
        G = g_vector(model, f)
        assert G.shape == (model.L, 3)
        assert np.allclose(G[:, 1], g_vector(model, 3000.0))
        assert np.allclose(np.abs(G), 1.0)
