"""Tests for the Monte Carlo harness and the modal-model experiments."""

import json
from dataclasses import replace

import numpy as np
import pytest

from wimo.core.bench import (
    SweepPoint,
    SweepResult,
    TrialResult,
    apply_sweep_value,
    bandwidth_metrics,
    check_sweep,
    classify,
    eigenvalue_comparison,
    estimate_doa,
    jittered_sources,
    match_peaks,
    rmse,
    run_sweep,
    run_trial,
    write_sweep,
)
from wimo.core.cache import ModalSpec
from wimo.core.config import CheckConfig, Config
from wimo.core.simulator import PsdSpec, SnapshotMatrix, SourceSpec, simulate_scene
from wimo.core.stcm import estimate_stcm
from wimo.estimators.base import Peak, PeakSet


def _peaks(*thetas, prominence=10.0):
    return PeakSet([Peak(theta=t, height_db=20.0, prominence_db=prominence) for t in thetas])


def _trial(index, status, errors):
    return TrialResult(index=index, seed=index, truth=[0.0] * len(errors), errors=errors, status=status)


@pytest.fixture
def fast_raw(small_raw):
    small_raw["sampling"]["snapshots"] = 2048
    small_raw["trials"] = 2
    return small_raw


class TestBandwidthMetrics:
    def test_octave_and_a_half(self):
        eta, gamma = bandwidth_metrics(1500.0, 4500.0)
        assert eta == pytest.approx(1.0)
        assert gamma == pytest.approx(3.0)

    def test_decade(self):
        eta, gamma = bandwidth_metrics(400.0, 4000.0)
        assert eta == pytest.approx(1.6364, abs=1e-4)
        assert gamma == pytest.approx(10.0)

    def test_tone(self):
        assert bandwidth_metrics(3000.0, 3000.0) == (0.0, 1.0)

    @pytest.mark.parametrize("f_l,f_h", [(0.0, 100.0), (200.0, 100.0)])
    def test_invalid(self, f_l, f_h):
        with pytest.raises(ValueError):
            bandwidth_metrics(f_l, f_h)


class TestMatching:
    def test_greedy_nearest(self):
        assert match_peaks([24.6, 15.2], [15.0, 25.0]) == [15.2, 24.6]

    def test_tie_goes_to_smaller_angle(self):
        assert match_peaks([14.0, 16.0], [15.0]) == [14.0]

    def test_missing_estimate(self):
        assert match_peaks([15.1], [15.0, 25.0]) == [15.1, None]

    def test_classify_resolved(self):
        status, estimates, errors = classify([15.0, 25.0], _peaks(25.3, 14.8))
        assert status == "resolved"
        assert estimates == [14.8, 25.3]
        assert errors == pytest.approx([-0.2, 0.3])

    def test_classify_wrong_count(self):
        status, _, errors = classify([15.0, 25.0], _peaks(20.0))
        assert status == "wrong_peak_count"
        assert errors[1] is None

    def test_classify_low_prominence(self):
        assert classify([15.0], _peaks(15.0, prominence=2.0))[0] == "low_prominence"

    def test_classify_angle_error(self):
        assert classify([15.0], _peaks(16.0))[0] == "angle_error"


class TestRmse:
    def test_pooled_over_resolved(self):
        results = [_trial(0, "resolved", [1.0, -1.0]), _trial(1, "angle_error", [5.0, 5.0])]
        assert rmse(results) == pytest.approx(1.0)

    def test_none_when_nothing_resolved(self):
        assert rmse([_trial(0, "wrong_peak_count", [None])]) is None
        assert rmse([]) is None


class TestSweepValues:
    def test_snr(self, small_raw):
        spec = apply_sweep_value(Config(small_raw).spec, "snr", -5)
        assert [s.snr_db for s in spec.sources] == [-5.0, -5.0]

    def test_bandwidth_keeps_upper_edge(self, small_raw):
        spec = apply_sweep_value(Config(small_raw).spec, "bandwidth", 0.5)
        psd = spec.sources[0].psd
        assert psd.f_h == 4500.0
        assert bandwidth_metrics(psd.f_l, psd.f_h)[0] == pytest.approx(0.5)
        assert spec.assumed_band() == (psd.f_l, 4500.0)

    def test_separation_about_center(self, small_raw):
        spec = apply_sweep_value(Config(small_raw).spec, "separation", 4.0)
        assert [s.theta for s in spec.sources] == [18.0, 22.0]

    def test_snapshots(self, small_raw):
        assert apply_sweep_value(Config(small_raw).spec, "snapshots", 1024).snapshots == 1024

    def test_rho(self, small_raw):
        spec = apply_sweep_value(Config(small_raw).spec, "rho", 0.5)
        assert [s.coherence for s in spec.sources] == [("sweep", 0.5), ("sweep", 0.5)]

    def test_no_axis(self, small_raw):
        spec = Config(small_raw).spec
        assert apply_sweep_value(spec, None, None) is spec

    def test_unknown_axis(self, small_raw):
        with pytest.raises(ValueError, match="Unknown sweep axis"):
            apply_sweep_value(Config(small_raw).spec, "azimuth", 1.0)


class TestJitter:
    def test_shared_offset_per_trial(self, small_raw):
        small_raw["jitter_deg"] = 0.5
        spec = Config(small_raw).spec
        a = jittered_sources(spec, 11)
        b = jittered_sources(spec, 11)
        assert [s.theta for s in a] == [s.theta for s in b]
        offset = a[0].theta - 15.0
        assert abs(offset) <= 0.5
        assert a[1].theta - 25.0 == pytest.approx(offset)

    def test_no_jitter(self, small_raw):
        spec = Config(small_raw).spec
        assert jittered_sources(spec, 11) == list(spec.sources)


class TestEstimate:
    def test_sensor_mismatch(self, small_raw):
        snapshots = SnapshotMatrix(data=np.ones((4, 64), dtype=complex), fs=10000.0)
        with pytest.raises(ValueError, match="4 sensors but the array has 8"):
            estimate_doa(snapshots, Config(small_raw).spec)

    def test_rate_mismatch(self, small_raw):
        snapshots = SnapshotMatrix(data=np.ones((8, 64), dtype=complex), fs=8000.0)
        with pytest.raises(ValueError, match="differs from sampling.fs"):
            estimate_doa(snapshots, Config(small_raw).spec)


class TestTrials:
    def test_noiseless_single_source(self, fast_raw):
        fast_raw["sources"] = [
            {"theta": 10.0, "snr_db": None, "psd": {"kind": "uniform", "f_l": 1500.0, "f_h": 4500.0}}
        ]
        result = run_trial(Config(fast_raw).spec, 0)
        assert result.status == "resolved", result.message
        assert abs(result.errors[0]) < 0.5
        assert result.P is not None and result.flops > 0

    def test_well_separated_pair(self, fast_raw):
        fast_raw["sources"][0]["theta"] = -10.0
        fast_raw["sources"][1]["theta"] = 20.0
        result = run_sweep(Config(fast_raw).spec)
        point = result.points[0]
        assert point.value is None
        assert point.resolution_probability == 1.0
        assert point.rmse < 1.0

    def test_failure_is_recorded(self, fast_raw):
        spec = replace(Config(fast_raw).spec, fs=4000.0)
        result = run_trial(spec, 0)
        assert result.status == "error"
        assert result.flags == ["ValueError"]
        assert "fs=4000" in result.message


class TestSweep:
    def test_thread_count_does_not_change_outputs(self, fast_raw, tmp_path):
        fast_raw["sweep"] = {"axis": "snr", "values": [0.0, 10.0]}
        fast_raw["trials"] = 3
        spec = Config(fast_raw).spec
        one = write_sweep(run_sweep(spec, threads=1), tmp_path / "one")
        four = write_sweep(run_sweep(spec, threads=4), tmp_path / "four")
        assert one["trials"].read_bytes() == four["trials"].read_bytes()
        assert one["summary"].read_bytes() == four["summary"].read_bytes()

    def test_timing_kept_out_of_summary(self, fast_raw, tmp_path):
        fast_raw["trials"] = 1
        paths = write_sweep(run_sweep(Config(fast_raw).spec), tmp_path)
        summary = paths["summary"].read_text()
        assert "seconds" not in summary
        timing = json.loads(paths["timing"].read_text())
        assert timing["points"][0]["spectra"] == 1
        header = paths["trials"].read_text().splitlines()[0]
        assert header.startswith("sweep_value,trial,seed,status")

    def test_bad_sweep_value_is_recorded_not_raised(self, fast_raw):
        fast_raw["trials"] = 1
        fast_raw["sweep"] = {"axis": "separation", "values": [4.0]}
        spec = Config(fast_raw).spec
        spec = replace(spec, sweep=replace(spec.sweep, values=(4.0, 200.0)))
        result = run_sweep(spec)
        good, bad = result.points
        assert len(good.trials) == 1 and good.message == ""
        assert bad.empty
        assert "|theta| <= 90" in bad.message
        assert bad.to_dict()["message"] == bad.message

    def test_zero_trials(self, fast_raw):
        fast_raw["trials"] = 0
        point = run_sweep(Config(fast_raw).spec).points[0]
        assert point.empty
        assert point.resolution_probability is None
        assert point.to_dict()["empty"] is True


class TestCheckSweep:
    def _result(self):
        point = SweepPoint(value=10.0, trials=[_trial(0, "resolved", [0.2]), _trial(1, "angle_error", [3.0])])
        return SweepResult(axis="snr", method="1-wimo", points=[point])

    def test_passes(self):
        assert check_sweep(self._result(), CheckConfig(min_resolution=0.5, max_rmse=0.5)) == []

    def test_resolution_failure(self):
        failures = check_sweep(self._result(), CheckConfig(min_resolution=0.9))
        assert len(failures) == 1
        assert failures[0].startswith("snr=10.0: resolution probability 0.5")

    def test_rmse_failure(self):
        failures = check_sweep(self._result(), CheckConfig(max_rmse=0.1))
        assert "RMSE" in failures[0]

    def test_empty_point_fails(self):
        result = SweepResult(axis=None, method="1-wimo", points=[SweepPoint(value=None, trials=[])])
        assert check_sweep(result, CheckConfig(min_resolution=0.0)) == [
            "point: resolution probability None < 0.0"
        ]


class TestEigenComparison:
    @pytest.mark.parametrize("thetas", [[40.0], [40.0, 60.0]])
    def test_noiseless_eigenvalues_follow_model(self, ula8, thetas):
        comparison = eigenvalue_comparison(
            ula8, thetas, 1500.0, 4500.0, 10000.0, m=5, n_snapshots=8192, runs=20, seed=3
        )
        assert comparison.predicted.shape == (40,)
        assert comparison.compared.size >= 2 * len(thetas)
        assert comparison.max_relative_error < 0.1
        assert comparison.to_dict()["compared"] == comparison.compared.size


class TestTrends:
    """Seeded, desk-sized runs that check the direction of each effect."""

    def test_resolution_improves_with_snr(self, small_raw):
        small_raw["sweep"] = {"axis": "snr", "values": [-25.0, -10.0, 20.0]}
        points = run_sweep(Config(small_raw).spec, threads=4).points
        buried, low, high = (p.resolution_probability for p in points)
        assert high >= 0.75
        assert high > buried
        assert high >= low

    def test_jittered_rmse_shrinks_with_snr(self, small_raw):
        small_raw["sources"][0]["theta"] = -5.0
        small_raw["sources"][1]["theta"] = 5.0
        small_raw["jitter_deg"] = 5.0
        small_raw["sweep"] = {"axis": "snr", "values": [-5.0, 20.0]}
        low, high = run_sweep(Config(small_raw).spec, threads=4).points
        assert high.rmse is not None and high.rmse < 0.5
        assert low.rmse is None or low.rmse > high.rmse

    def test_spectrum_cost_does_not_depend_on_bandwidth(self, fast_raw):
        fast_raw["estimator"].update(p_mode="manual", p=20)
        costs = []
        for eta in (0.25, 1.5):
            spec = apply_sweep_value(Config(fast_raw).spec, "bandwidth", eta)
            snaps = simulate_scene(spec.sources, spec.geometry(), spec.fs, spec.snapshots, 5)
            costs.append(estimate_doa(snaps, spec).flops.to_dict())
        assert costs[0] == costs[1]

    def test_method_cost_ordering(self, fast_raw):
        fast_raw["estimator"].update(p_mode="manual", p=20)
        spec = Config(fast_raw).spec
        snaps = simulate_scene(spec.sources, spec.geometry(), spec.fs, spec.snapshots, 5)
        cost = {}
        for method in ("1-wimo", "p-wimo", "sf-music", "sf-cbf"):
            method_spec = replace(spec, estimator=replace(spec.estimator, method=method))
            cost[method] = estimate_doa(snaps, method_spec).flops.spectrum
        L, n_f = 48, len(spec.frequency_grid())
        assert cost["p-wimo"] == L * cost["1-wimo"]
        assert cost["sf-music"] == n_f * cost["1-wimo"]
        assert cost["1-wimo"] < cost["sf-music"] < cost["sf-cbf"]

    def test_true_psd_model_fits_gaussian_source_better(self, ula8):
        psd = PsdSpec.gaussian(3000.0, 1500.0, band=(1500.0, 4500.0))
        snaps = simulate_scene([SourceSpec(theta=20.0, psd=psd)], ula8, 10000.0, 8192, 4, noise_var=0.0)
        stcm = estimate_stcm(snaps, 4)
        measured = stcm.S * stcm.L / np.real(np.trace(stcm.S))
        true_psd = ModalSpec(geometry=ula8, m=4, dt=1e-4, psd=psd).approx(20.0).S_breve
        uniform = ModalSpec(geometry=ula8, m=4, dt=1e-4, fc=3000.0, bandwidth=3000.0).approx(20.0).S_breve

        def misfit(model):
            return np.linalg.norm(measured - model) / np.linalg.norm(model)

        assert misfit(true_psd) < misfit(uniform)
