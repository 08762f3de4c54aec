"""Tests for the approximated STCM and its modal structure."""

import math

import numpy as np
import pytest
from scipy import linalg

from wimo.core.approx import (
    Quadrature,
    approx_stcm_psd,
    approx_stcm_uniform,
    asymptotic_sinf,
    band_power,
    band_power_closed_form,
    bass_ale_bound,
    effective_dim,
    effective_dim_max,
    eigen_clusters,
    modal_basis,
    numerical_rank,
    sinc_pi,
    orthogonality_check,
    validity_ratio,
)
from wimo.core.geometry import ArrayGeometry, steering_vector
from wimo.core.simulator import PsdSpec

DT = 1e-4
THETA = math.radians(30.0)


@pytest.fixture
def sbreve(ula8):
    return approx_stcm_uniform(ula8, THETA, 0.0, 3000.0, 3000.0, 5, DT)


class TestSinc:
    def test_zero_and_integers(self):
        assert sinc_pi(0.0) == 1.0
        assert np.allclose(sinc_pi(np.array([1.0, 2.0, -3.0])), 0.0, atol=1e-15)

    def test_matches_numpy(self):
        x = np.linspace(-4, 4, 101)
        assert np.allclose(sinc_pi(x), np.sinc(x))


class TestApproxUniform:
    def test_unit_diagonal_and_hadamard(self, sbreve):
        assert np.allclose(np.diag(sbreve.S_breve), 1.0)
        assert np.allclose(sbreve.S_breve, sbreve.S_N * sbreve.S_W)
        assert sbreve.L == 40

    def test_hermitian(self, sbreve):
        assert np.allclose(sbreve.S_breve, sbreve.S_breve.conj().T)

    @pytest.mark.parametrize("attr", ["S_N", "S_W", "S_breve"])
    def test_positive_semidefinite(self, sbreve, attr):
        values = linalg.eigvalsh(getattr(sbreve, attr))
        assert values.min() >= -1e-10 * values.max()

    def test_zero_bandwidth_is_rank_one(self, ula8):
        S = approx_stcm_uniform(ula8, THETA, 0.0, 3000.0, 0.0, 3, DT)
        assert numerical_rank(S.S_breve, 1e-9) == 1

    def test_narrowband_limit(self, ula8):
        fc = 3000.0
        S = approx_stcm_uniform(ula8, THETA, 0.0, fc, fc * 1e-6, 1, DT)
        a = steering_vector(ula8, THETA, 0.0, fc)
        aa = np.outer(a, a.conj())
        assert np.linalg.norm(S.S_breve - aa) / np.linalg.norm(aa) < 1e-6

    def test_rejects_negative_bandwidth(self, ula8):
        with pytest.raises(ValueError, match="bandwidth"):
            approx_stcm_uniform(ula8, THETA, 0.0, 3000.0, -1.0, 2, DT)


class TestApproxPsd:
    def test_uniform_psd_matches_closed_form(self, ula8):
        closed = approx_stcm_uniform(ula8, THETA, 0.0, 3000.0, 3000.0, 4, DT)
        numeric = approx_stcm_psd(ula8, THETA, 0.0, PsdSpec.uniform(1500.0, 4500.0), 4, DT)
        assert np.max(np.abs(numeric.S_breve - closed.S_breve)) < 1e-8

    def test_trace_is_L(self, ula8):
        S = approx_stcm_psd(ula8, THETA, 0.0, PsdSpec.gaussian(3000.0, 1200.0), 3, DT)
        assert np.real(np.trace(S.S_breve)) == pytest.approx(S.L)

    def test_wide_gaussian_envelope(self, ula8):
        # truncated beyond 8 standard deviations; the Fourier pair is exact far below 1e-6
        psd = PsdSpec.gaussian(2500.0, 400.0, band=(1100.0, 3900.0))
        S = approx_stcm_psd(ula8, THETA, 0.0, psd, 2, DT, Quadrature(nodes=4096))
        s = 400.0 / (2 * math.sqrt(2 * math.log(2)))
        lags = S.model.h[:, None] - S.model.h[None, :]
        expected = np.exp(-2 * math.pi**2 * s**2 * lags**2) * np.exp(2j * math.pi * 2500.0 * lags)
        assert np.max(np.abs(S.S_breve - expected)) < 1e-6

    def test_tone_is_rank_one(self, ula8):
        S = approx_stcm_psd(ula8, THETA, 0.0, PsdSpec.tabulated([(2000.0, 1.0)]), 3, DT)
        assert S.bandwidth == 0.0
        assert numerical_rank(S.S_breve, 1e-9) == 1


class TestModalBasis:
    def test_descending_and_unit_vectors(self, sbreve):
        basis = modal_basis(sbreve)
        assert np.all(np.diff(basis.sigma) <= 1e-12)
        assert np.allclose(np.linalg.norm(basis.u, axis=0), 1.0)
        assert basis.sigma.sum() == pytest.approx(sbreve.L)

    def test_gsv_attains_top_eigenvalue(self, sbreve):
        basis = modal_basis(sbreve)
        quotient = np.real(np.vdot(basis.gsv, sbreve.S_breve @ basis.gsv))
        assert quotient == pytest.approx(basis.sigma[0], rel=1e-9)

    def test_modal_orthogonality_holds(self, sbreve):
        report = orthogonality_check(sbreve)
        assert report.passed, report.failures()
        assert report.eigenvalue_error < 1e-9

    def test_angle_tolerance_widens_only_for_tight_clusters(self, sbreve):
        basis = modal_basis(sbreve)
        report = orthogonality_check(sbreve, basis)
        sigma, L = basis.sigma, sbreve.L
        eps = np.finfo(float).eps
        for c in report.clusters:
            left = sigma[c.start - 1] - sigma[c.start] if c.start > 0 else np.inf
            right = sigma[c.stop - 1] - sigma[c.stop] if c.stop < L else np.inf
            gap = max(min(left, right), eps * sigma[0])
            assert c.tolerance == pytest.approx(max(1e-6, 64 * L * eps * sigma[0] / gap))
        assert report.clusters[0].start == 0
        assert report.clusters[0].tolerance == 1e-6

    def test_clusters_split_on_gaps(self):
        assert eigen_clusters(np.array([3.0, 3.0, 1.0, 0.5])) == [(0, 2), (2, 3), (3, 4)]


class TestEffectiveDimension:
    def test_bass_ale(self):
        assert bass_ale_bound(2, 5, 8) == 26
        with pytest.raises(ValueError):
            bass_ale_bound(0, 5, 8)

    def test_bounds(self, ula8):
        fc, B = 3000.0, 3000.0
        thetas = [math.radians(40.0), math.radians(60.0)]
        eps = effective_dim(ula8, thetas, fc, B, 5, DT)
        eps_max = effective_dim_max(ula8, 2, fc, B, 5, DT)
        assert 2 <= eps <= eps_max <= bass_ale_bound(2, 5, 8)

    def test_narrowband_source_has_dimension_one(self, ula8):
        assert effective_dim(ula8, [THETA], 3000.0, 0.0, 4, DT) == 1

    def test_validity_ratio(self):
        assert validity_ratio(6, 3000.0, 10000.0) == pytest.approx(1.8)


class TestAsymptotics:
    def test_limit_block(self):
        block, sigma = asymptotic_sinf(4, 2.0)
        assert block.shape == (4, 4)
        assert block[0, 2] == pytest.approx(0.0, abs=1e-15)
        assert block[0, 1] == pytest.approx(2 / math.pi)
        assert np.allclose(np.sort(linalg.eigvalsh(block))[::-1], sigma)
        assert sigma.sum() == pytest.approx(4.0)

    def test_infinite_nu(self):
        _, sigma = asymptotic_sinf(3, math.inf)
        assert np.allclose(sigma, [3.0, 0.0, 0.0])


class TestBandPower:
    def test_quadrature_matches_quadratic_form(self, sbreve):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(sbreve.L) + 1j * rng.standard_normal(sbreve.L)
        x /= np.linalg.norm(x)
        assert band_power(x, sbreve.model, 3000.0) == pytest.approx(
            band_power_closed_form(x, sbreve), rel=1e-8
        )
