"""
CLI for wimo.

Provides commands for:
  - Generating an experiment template
  - Simulating snapshot files
  - Estimating DOA spectra from snapshot files
  - Inspecting the approximated STCM and its modal structure
  - Running the theory property suite
  - Monte Carlo sweeps
  - Space-frequency maps
  - Running the MCP server

Exit codes: 0 success, 1 failed check, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from wimo.core.config import Config, ConfigError, help_epilog

logger = logging.getLogger("wimo.cli")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _load(args: argparse.Namespace) -> Config:
    return Config.load(args.config, args.overrides or ())


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _cmd_init(args: argparse.Namespace) -> int:
    """Write the experiment template."""
    dest = Path(args.output)
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(Config.generate_template())
    print(f"Experiment template written to {dest}")
    print("Edit it, then run:")
    print(f"  wimo bench --config {dest}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    from wimo.core.bench import jittered_sources
    from wimo.core.io import write_sidecar, write_snapshots
    from wimo.core.simulator import derive_seed, simulate_scene

    config = _load(args)
    spec = config.spec
    seed = derive_seed(spec.seed, args.trial)
    sources = jittered_sources(spec, seed)
    geometry = spec.geometry()
    snapshots = simulate_scene(
        sources, geometry, spec.fs, spec.snapshots, seed, noise_var=0.0 if spec.noiseless else 1.0
    )
    out = _out_dir(args)
    data_path = write_snapshots(out / f"snapshots.{args.format}", snapshots)
    write_sidecar(
        data_path.with_suffix(".json"),
        {
            "n_sensors": snapshots.n_sensors,
            "n_snapshots": snapshots.n_snapshots,
            "fs": snapshots.fs,
            "trial": args.trial,
            "seed": snapshots.seed,
            "geometry": geometry.to_dict(),
            "truth_deg": [s.theta for s in sources],
            "config": config.raw,
            "created": _now(),
        },
    )
    print(f"Wrote {snapshots.n_sensors} x {snapshots.n_snapshots} snapshots to {data_path}")
    return EXIT_OK


def _cmd_estimate(args: argparse.Namespace) -> int:
    from dataclasses import replace

    from wimo.core.bench import estimate_doa
    from wimo.core.io import read_snapshots, write_fmap_csv, write_peaks_json, write_spectrum_csv

    config = _load(args)
    spec = config.spec
    snapshots = read_snapshots(args.snapshots)
    if not math.isclose(snapshots.fs, spec.fs, rel_tol=1e-12):
        logger.warning("Using fs=%g Hz from %s instead of sampling.fs=%g", snapshots.fs, args.snapshots, spec.fs)
        spec = replace(spec, fs=snapshots.fs)
    outcome = estimate_doa(snapshots, spec, threads=args.threads)
    logger.info(
        "P_MDL=%d eps_max=%d P=%d m·B/f_s=%.3g M/(N_S·m²)=%.3g",
        outcome.p_mdl, outcome.eps_max, outcome.P,
        outcome.diagnostics["validity_ratio"], outcome.diagnostics["snapshot_ratio"],
    )
    out = _out_dir(args)
    write_spectrum_csv(out / "spectrum.csv", outcome.spectrum)
    write_peaks_json(out / "peaks.json", outcome.spectrum, outcome.peaks, {"estimate": outcome.to_dict()})
    if outcome.fmap is not None:
        write_fmap_csv(out / "fmap.csv", outcome.fmap)
    print(f"{outcome.spectrum.method}: P={outcome.P} (MDL {outcome.p_mdl}), {len(outcome.peaks)} peaks")
    for peak in outcome.peaks:
        print(f"  {peak.theta:8.3f} deg  {peak.height_db:7.2f} dB  prominence {peak.prominence_db:6.2f} dB")
    return EXIT_OK


def _cmd_approx(args: argparse.Namespace) -> int:
    from wimo.core.approx import (
        bass_ale_bound,
        effective_dim,
        effective_dim_max,
        modal_basis,
        orthogonality_check,
        validity_ratio,
    )
    from wimo.core.bench import eigenvalue_comparison, effective_dimension_table

    spec = _load(args).spec
    geometry = spec.geometry()
    est = spec.estimator
    lo, hi = spec.assumed_band()
    fc, B, dt = 0.5 * (lo + hi), hi - lo, 1.0 / spec.fs
    K = len(spec.sources)
    approx = spec.modal_spec().approx(spec.sources[0].theta)
    basis = modal_basis(approx)
    report = orthogonality_check(approx, basis)
    doc: dict[str, Any] = {
        "L": approx.L,
        "fc": approx.fc,
        "bandwidth": approx.bandwidth,
        "validity_ratio": validity_ratio(est.m, B, spec.fs),
        "sigma": basis.sigma.tolist(),
        "eps_hat": effective_dim(
            geometry, [math.radians(s.theta) for s in spec.sources], fc, B, est.m, dt, est.rank_tol
        ),
        "eps_max": effective_dim_max(geometry, K, fc, B, est.m, dt, est.rank_tol),
        "bass_ale": bass_ale_bound(K, est.m, geometry.n_sensors),
        "orthogonality": report.to_dict(),
    }
    if args.eigen_runs > 0:
        comparison = eigenvalue_comparison(
            geometry, [s.theta for s in spec.sources], lo, hi, spec.fs, est.m,
            spec.snapshots, args.eigen_runs, spec.seed, threads=args.threads,
        )
        doc["eigenvalue_comparison"] = comparison.to_dict()
    if args.etas:
        etas = [float(x) for x in args.etas.split(",")]
        doc["effective_dimension"] = effective_dimension_table(
            geometry, [s.theta for s in spec.sources], hi, etas, spec.fs, est.m,
            spec.snapshots, spec.seed, est.rank_tol,
        )
    from wimo.core.io import write_json

    write_json(_out_dir(args) / "approx.json", doc)
    top = ", ".join(f"{s:.4f}" for s in basis.sigma[: min(8, approx.L)])
    print(f"L={approx.L} fc={approx.fc:.1f} Hz B={approx.bandwidth:.1f} Hz  m·B/f_s={doc['validity_ratio']:.3g}")
    print(f"sigma: {top}{' ...' if approx.L > 8 else ''}")
    print(f"eps_hat={doc['eps_hat']} eps_max={doc['eps_max']} BASS-ALE bound={doc['bass_ale']}")
    print(f"modal orthogonality: {'pass' if report.passed else 'FAIL'}")
    if "eigenvalue_comparison" in doc:
        print(f"eigenvalue match: max relative error {doc['eigenvalue_comparison']['max_relative_error']:.3f}")
    return EXIT_OK


def _cmd_check_theory(args: argparse.Namespace) -> int:
    from wimo.core.io import write_json
    from wimo.core.theory import run_theory_suite

    spec = _load(args).spec
    only = args.only.split(",") if args.only else None
    report = run_theory_suite(spec.theory, only)
    for outcome in report.outcomes:
        status = "PASS" if outcome.success else "FAIL"
        print(f"  [{status}] {outcome.metadata['check']}: {outcome.message}")
    if args.out:
        write_json(_out_dir(args) / "theory.json", report.to_dict())
    print("all checks passed" if report.passed else "some checks FAILED")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_bench(args: argparse.Namespace) -> int:
    from wimo.core.bench import check_sweep, run_sweep, write_sweep
    from wimo.core.io import write_sidecar

    config = _load(args)
    spec = config.spec
    result = run_sweep(spec, threads=args.threads)
    out = _out_dir(args)
    paths = write_sweep(result, out)
    write_sidecar(out / "run.json", {"config": config.raw, "threads": args.threads, "created": _now()})
    print(f"{result.method}, axis={result.axis}:")
    for point in result.points:
        if point.empty:
            print(f"  {point.value}: no trials")
            continue
        rmse = "n/a" if point.rmse is None else f"{point.rmse:.3f} deg"
        print(
            f"  {point.value}: P_res={point.resolution_probability:.3f} "
            f"(±{point.resolution_std:.3f})  RMSE={rmse}"
        )
    print(f"Results in {paths['trials'].parent}")
    if args.check:
        failures = check_sweep(result, spec.check)
        for failure in failures:
            print(f"  CHECK FAILED: {failure}")
        if failures:
            return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_sfmap(args: argparse.Namespace) -> int:
    from dataclasses import replace

    from wimo.core.bench import jittered_sources
    from wimo.core.io import read_snapshots, write_fmap_csv
    from wimo.core.simulator import derive_seed, simulate_scene
    from wimo.core.stcm import estimate_stcm, hermitian_eig, mdl_order, split_from_eig
    from wimo.estimators.base import FlopCounter, check_order, choose_order
    from wimo.estimators.space_frequency import sf_cbf_sections, sf_map

    spec = _load(args).spec
    est = spec.estimator
    if args.snapshots:
        snapshots = read_snapshots(args.snapshots)
        spec = replace(spec, fs=snapshots.fs)
    else:
        seed = derive_seed(spec.seed, 0)
        snapshots = simulate_scene(
            jittered_sources(spec, seed), spec.geometry(), spec.fs, spec.snapshots, seed,
            noise_var=0.0 if spec.noiseless else 1.0,
        )
    geometry = spec.geometry()
    stcm = estimate_stcm(snapshots, est.m, threads=args.threads)
    values, vectors = hermitian_eig(stcm.S)
    if est.p_mode == "manual":
        P = check_order(est.p, stcm.L)
    else:
        P = choose_order(args.method, mdl_order(values, stcm.n_vectors), 0, stcm.L)
    split = split_from_eig(values, vectors, P)
    counter = FlopCounter()
    fmap = sf_map(
        args.method, geometry, est.m, stcm.dt, spec.frequency_grid(), spec.theta_grid(),
        S=stcm, Un=split.Un, loading=est.mvdr_loading, counter=counter,
    )
    if args.sections and args.method == "sf-cbf":
        from wimo.core.geometry import build_stacked_model

        for j, theta in enumerate(fmap.theta):
            model = build_stacked_model(geometry, math.radians(theta), 0.0, est.m, stcm.dt)
            fmap.values[:, j] = np.atleast_1d(sf_cbf_sections(snapshots, est.m, model, fmap.f))
        fmap.params["sections"] = True
    path = write_fmap_csv(_out_dir(args) / "fmap.csv", fmap)
    i, j = np.unravel_index(int(np.argmax(fmap.values)), fmap.values.shape)
    print(
        f"{args.method} map {fmap.values.shape[0]} x {fmap.values.shape[1]} written to {path}; "
        f"maximum at f={fmap.f[i]:.1f} Hz, theta={fmap.theta[j]:.2f} deg"
    )
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    """Start the MCP server."""
    from wimo.mcp_server import main as mcp_main

    argv = []
    if args.config:
        argv += ["--config", args.config]
    if args.sse:
        argv += ["--sse", "--port", str(args.port)]
    mcp_main(argv)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, out_default: str | None = "wimo-out") -> None:
    p.add_argument("--config", type=str, default=None, help="Experiment YAML/JSON file")
    p.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Override a config key, e.g. --set sources[0].snr_db=10 (repeatable)",
    )
    p.add_argument(
        "--threads", type=int, default=os.cpu_count() or 1, help="Worker threads (output does not depend on it)"
    )
    p.add_argument("--out", type=str, default=out_default, help="Output directory")


def build_parser() -> argparse.ArgumentParser:
    epilog = help_epilog()
    parser = argparse.ArgumentParser(
        prog="wimo",
        description="wimo: wideband DOA estimation by modal orthogonality",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command")

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        return sub.add_parser(
            name, help=help_, epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter
        )

    # -- init --
    p_init = sub.add_parser("init", help="Write an experiment template")
    p_init.add_argument("-o", "--output", default="wimo.yaml", help="Output path for the template")

    # -- simulate --
    p_sim = add("simulate", "Simulate a snapshot file from the config")
    _add_common(p_sim)
    p_sim.add_argument("--trial", type=int, default=0, help="Trial index whose seed is used")
    p_sim.add_argument("--format", choices=("wimo", "csv"), default="wimo", help="Container or CSV")

    # -- estimate --
    p_est = add("estimate", "Estimate the spatial spectrum of a snapshot file")
    p_est.add_argument("snapshots", help="Snapshot container (.wimo) or CSV")
    _add_common(p_est)

    # -- approx --
    p_apx = add("approx", "Inspect S̆, its modal basis and effective dimensions")
    _add_common(p_apx)
    p_apx.add_argument("--eigen-runs", type=int, default=0, help="Runs of the eigenvalue-match experiment")
    p_apx.add_argument("--etas", type=str, default=None, help="Comma-separated η values for the rank table")

    # -- check-theory --
    p_thy = add("check-theory", "Run the theory property suite")
    _add_common(p_thy, out_default=None)
    p_thy.add_argument("--only", type=str, default=None, help="Comma-separated check names")

    # -- bench --
    p_bench = add("bench", "Run a Monte Carlo sweep")
    _add_common(p_bench)
    p_bench.add_argument("--check", action="store_true", help="Exit 1 if the check section fails")

    # -- sfmap --
    p_sf = add("sfmap", "Write a space-frequency map")
    p_sf.add_argument("snapshots", nargs="?", default=None, help="Snapshot file; simulated if omitted")
    _add_common(p_sf)
    p_sf.add_argument("--method", choices=("sf-cbf", "sf-mvdr", "sf-music"), default="sf-cbf")
    p_sf.add_argument("--sections", action="store_true", help="SF-CBF over non-overlapping sections")

    # -- serve --
    p_serve = sub.add_parser("serve", help="Start the MCP server")
    p_serve.add_argument("--config", type=str, default=None)
    p_serve.add_argument("--sse", action="store_true")
    p_serve.add_argument("--port", type=int, default=8080)

    return parser


_DISPATCH: dict[str, Callable[[argparse.Namespace], int]] = {
    "init": _cmd_init,
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "approx": _cmd_approx,
    "check-theory": _cmd_check_theory,
    "bench": _cmd_bench,
    "sfmap": _cmd_sfmap,
    "serve": _cmd_serve,
}


def run(argv: list[str] | None = None) -> int:
    """Parse *argv* and run the subcommand; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command is None:
        parser.print_help()
        return EXIT_OK
    try:
        return _DISPATCH[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
