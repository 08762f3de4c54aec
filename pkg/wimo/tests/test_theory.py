"""Tests for the check-theory property suite."""

import numpy as np
import pytest

from wimo.core.config import TheoryConfig
from wimo.core.theory import (
    CHECKS,
    ROUNDTRIP_RATIO,
    WIDEBAND_FACTORS,
    WIDEBAND_TOL,
    check_band_power,
    check_hadamard,
    check_narrowband_limit,
    check_orthogonality,
    check_psd,
    check_rayleigh,
    check_roundtrip,
    check_wideband_limit,
    random_config,
    roundtrip_errors,
    run_theory_suite,
)

SMALL = TheoryConfig(configs=5, eigen_configs=4, seed=7)


class TestRandomConfig:
    def test_center_frequency_covers_half_band(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            cfg = random_config(rng)
            assert cfg.fc >= cfg.B / 2
            assert 1 <= cfg.m <= 8
            assert 1 <= cfg.geometry.n_sensors <= 6


class TestChecks:
    def test_psd(self):
        result = check_psd(SMALL)
        assert result.success, result.message
        assert result.metadata["check"] == "psd"

    def test_psd_perturbed_fails(self):
        result = check_psd(TheoryConfig(configs=3, perturb=True))
        assert not result.success
        assert result.data["min_ratio"] < 0

    def test_hadamard(self):
        result = check_hadamard(SMALL)
        assert result.success, result.message
        assert result.data["trace_error"] <= 1e-9

    def test_orthogonality(self):
        result = check_orthogonality(SMALL)
        assert result.success, result.message

    def test_rayleigh(self):
        result = check_rayleigh(SMALL, n_vectors=10)
        assert result.success, result.message

    def test_narrowband_limit(self):
        result = check_narrowband_limit(SMALL)
        assert result.success, result.message
        assert result.data["spectrum_error_db"] < 1e-6

    def test_roundtrip_error_shrinks_with_span(self):
        spans, errors = roundtrip_errors(SMALL, n_vectors=4, doublings=3, samples=33)
        assert np.all(np.diff(spans) > 0)
        assert np.all(np.diff(errors) < 0)

    def test_band_power(self):
        result = check_band_power(SMALL)
        assert result.success, result.message
        assert result.data["vectors_above"] == 0

    def test_wideband_limit_on_defaults(self):
        result = check_wideband_limit(TheoryConfig())
        assert result.success, result.message
        errors = result.data["errors"]
        assert list(errors) == [str(f) for f in WIDEBAND_FACTORS]
        assert errors["128"] < WIDEBAND_TOL
        assert errors["128"] < errors["32"] < errors["2"]

    def test_roundtrip_halves_per_doubling(self):
        result = check_roundtrip(SMALL)
        assert result.success, result.message
        lo, hi = ROUNDTRIP_RATIO
        assert len(result.data["ratios"]) == 3
        for ratio in result.data["ratios"]:
            assert lo <= ratio <= hi


class TestSuite:
    @pytest.mark.parametrize("name", list(CHECKS))
    def test_every_registered_check_passes(self, name):
        report = run_theory_suite(SMALL, [name])
        outcome = report.outcomes[0]
        assert report.passed, f"{name}: {outcome.message}"
        assert outcome.metadata["check"] == name

    def test_selected_checks(self):
        report = run_theory_suite(SMALL, ["psd", "hadamard"])
        assert report.passed
        assert [o.metadata["check"] for o in report.outcomes] == ["psd", "hadamard"]
        assert all("seconds" in o.metadata for o in report.outcomes)
        doc = report.to_dict()
        assert doc["passed"] is True and len(doc["checks"]) == 2

    def test_perturbed_suite_fails(self):
        report = run_theory_suite(TheoryConfig(configs=3, perturb=True), ["psd"])
        assert not report.passed

    def test_unknown_check(self):
        with pytest.raises(ValueError, match="Unknown theory checks"):
            run_theory_suite(SMALL, ["psd", "nope"])

    def test_check_names(self):
        assert set(CHECKS) == {
            "psd", "hadamard", "orthogonality", "rayleigh", "band_power",
            "narrowband_limit", "wideband_limit", "so_roundtrip",
        }
