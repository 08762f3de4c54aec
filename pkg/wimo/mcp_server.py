"""
MCP (Model Context Protocol) server for wimo.

Exposes the estimation pipeline, the approximated-STCM diagnostics, the
theory suite and Monte Carlo sweeps as tools, so an assistant can run
experiments from a conversation.  Numerical work runs in a worker thread
so the event loop stays responsive.

Launch:
    python -m wimo                  # stdio transport
    python -m wimo --sse            # SSE transport (HTTP)
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import math
import sys
from dataclasses import replace
from typing import Any

from mcp.server import Server
from mcp.server.stdio import stdio_server
from mcp.types import TextContent, Tool

from wimo.core.config import Config
from wimo.core.result import OperationResult

logger = logging.getLogger("wimo.mcp")

# ── Global state ─────────────────────────────────────────────────────────

_config: Config | None = None


def _result_to_content(result: OperationResult) -> list[TextContent]:
    """Convert an OperationResult into MCP TextContent."""
    payload = result.to_dict()
    return [TextContent(type="text", text=json.dumps(payload, indent=2, default=str))]


def _current(overrides: list[str] | None = None) -> Config:
    """The loaded configuration (defaults if none) with per-call overrides."""
    global _config
    if _config is None:
        _config = Config.load()
    if not overrides:
        return _config
    return Config.from_dict(_config.raw, overrides)


_OVERRIDES = {
    "type": "array",
    "items": {"type": "string"},
    "description": "Config overrides as KEY=VALUE, e.g. 'sources[0].snr_db=10'.",
}

app = Server("wimo")


@app.list_tools()
async def list_tools() -> list[Tool]:
    return [
        Tool(
            name="wimo_configure",
            description=(
                "Load a wimo experiment file (YAML or JSON) used by the other tools. "
                "Omit config_path to reset to the built-in defaults."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "config_path": {"type": "string", "description": "Experiment file (optional)."},
                    "overrides": _OVERRIDES,
                },
            },
        ),
        Tool(
            name="wimo_generate_config",
            description="Return a commented experiment template.",
            inputSchema={"type": "object", "properties": {}},
        ),
        Tool(
            name="wimo_bandwidth_metrics",
            description="Bandwidth ratio η and scale γ of a band [f_l, f_h] in Hz.",
            inputSchema={
                "type": "object",
                "properties": {
                    "f_l": {"type": "number", "description": "Lower band edge (Hz), > 0."},
                    "f_h": {"type": "number", "description": "Upper band edge (Hz), >= f_l."},
                },
                "required": ["f_l", "f_h"],
            },
        ),
        Tool(
            name="wimo_approx",
            description=(
                "Eigenvalues of the approximated STCM at one direction, effective "
                "dimensions and the modal-orthogonality check for the current experiment."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "theta_deg": {"type": "number", "description": "Direction; first source if omitted."},
                    "overrides": _OVERRIDES,
                },
            },
        ),
        Tool(
            name="wimo_check_theory",
            description="Run the theory property suite (or the named checks).",
            inputSchema={
                "type": "object",
                "properties": {
                    "only": {"type": "array", "items": {"type": "string"}},
                    "overrides": _OVERRIDES,
                },
            },
        ),
        Tool(
            name="wimo_estimate",
            description=(
                "Estimate the spatial spectrum of a snapshot file with the configured "
                "method and return the peaks, order and diagnostics."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "snapshots_path": {"type": "string", "description": "Snapshot container or CSV."},
                    "overrides": _OVERRIDES,
                },
                "required": ["snapshots_path"],
            },
        ),
        Tool(
            name="wimo_run_sweep",
            description=(
                "Run the configured Monte Carlo sweep and return the per-point "
                "resolution probability and RMSE. Writes trials/summary/timing "
                "files when out_dir is given."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "out_dir": {"type": "string"},
                    "threads": {"type": "integer", "minimum": 1},
                    "overrides": _OVERRIDES,
                },
            },
        ),
    ]


def _approx_summary(config: Config, theta_deg: float | None) -> dict[str, Any]:
    from wimo.core.approx import effective_dim, effective_dim_max, modal_basis, orthogonality_check

    spec = config.spec
    est = spec.estimator
    theta = spec.sources[0].theta if theta_deg is None else float(theta_deg)
    approx = spec.modal_spec().approx(theta)
    basis = modal_basis(approx)
    lo, hi = spec.assumed_band()
    fc, B, dt = 0.5 * (lo + hi), hi - lo, 1.0 / spec.fs
    geometry = spec.geometry()
    return {
        "theta_deg": theta,
        "approx": approx.to_dict(),
        "sigma": basis.sigma.tolist(),
        "eps_hat": effective_dim(
            geometry, [math.radians(s.theta) for s in spec.sources], fc, B, est.m, dt, est.rank_tol
        ),
        "eps_max": effective_dim_max(geometry, len(spec.sources), fc, B, est.m, dt, est.rank_tol),
        "orthogonality": orthogonality_check(approx, basis).to_dict(),
    }


def _estimate(config: Config, path: str) -> dict[str, Any]:
    from wimo.core.bench import estimate_doa
    from wimo.core.io import read_snapshots

    snapshots = read_snapshots(path)
    spec = replace(config.spec, fs=snapshots.fs)
    return estimate_doa(snapshots, spec).to_dict()


def _sweep(config: Config, out_dir: str | None, threads: int) -> dict[str, Any]:
    from wimo.core.bench import run_sweep, write_sweep

    result = run_sweep(config.spec, threads=threads)
    doc = result.to_dict()
    if out_dir:
        doc["files"] = {k: str(v) for k, v in write_sweep(result, out_dir).items()}
    return doc


@app.call_tool()
async def call_tool(name: str, arguments: dict[str, Any]) -> list[TextContent]:
    global _config

    try:
        overrides = arguments.get("overrides") or []

        if name == "wimo_configure":
            _config = Config.load(arguments.get("config_path"), overrides)
            spec = _config.spec
            return _result_to_content(OperationResult(
                success=True,
                data=_config.raw,
                message=(
                    f"{len(spec.sources)} source(s), method {spec.estimator.method}, "
                    f"m={spec.estimator.m}"
                ),
            ))

        if name == "wimo_generate_config":
            return _result_to_content(OperationResult(
                success=True, data=Config.generate_template(), message="Experiment template"
            ))

        if name == "wimo_bandwidth_metrics":
            from wimo.core.bench import bandwidth_metrics

            eta, gamma = bandwidth_metrics(float(arguments["f_l"]), float(arguments["f_h"]))
            return _result_to_content(OperationResult(
                success=True, data={"eta": eta, "gamma": gamma}
            ))

        config = _current(overrides)

        if name == "wimo_approx":
            data = await asyncio.to_thread(_approx_summary, config, arguments.get("theta_deg"))
            return _result_to_content(OperationResult(
                success=data["orthogonality"]["passed"], data=data,
                message=f"L={data['approx']['L']}, eps_max={data['eps_max']}",
            ))

        if name == "wimo_check_theory":
            from wimo.core.theory import run_theory_suite

            report = await asyncio.to_thread(run_theory_suite, config.spec.theory, arguments.get("only"))
            return _result_to_content(OperationResult(
                success=report.passed, data=report.to_dict(),
                message="all checks passed" if report.passed else "some checks failed",
            ))

        if name == "wimo_estimate":
            data = await asyncio.to_thread(_estimate, config, arguments["snapshots_path"])
            return _result_to_content(OperationResult(
                success=True, data=data, message=f"{len(data['peaks'])} peak(s), P={data['P']}"
            ))

        if name == "wimo_run_sweep":
            data = await asyncio.to_thread(
                _sweep, config, arguments.get("out_dir"), int(arguments.get("threads", 1))
            )
            return _result_to_content(OperationResult(
                success=True, data=data, message=f"{len(data['points'])} sweep point(s)"
            ))

        return _result_to_content(
            OperationResult(success=False, message=f"Unknown tool: {name}")
        )

    except Exception as exc:
        logger.exception("Tool %s failed", name)
        return _result_to_content(OperationResult.failure(exc, tool=name))


# ── Entry point ──────────────────────────────────────────────────────────


async def run_stdio() -> None:
    """Run the MCP server over stdio."""
    async with stdio_server() as (read_stream, write_stream):
        await app.run(read_stream, write_stream, app.create_initialization_options())


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="wimo MCP server")
    parser.add_argument("--config", type=str, default=None, help="Path to experiment file")
    parser.add_argument("--sse", action="store_true", help="Run in SSE mode instead of stdio")
    parser.add_argument("--port", type=int, default=8080, help="SSE port")
    args = parser.parse_args(argv)

    if args.config:
        global _config
        _config = Config.load(args.config)

    logging.basicConfig(level=logging.INFO, stream=sys.stderr)

    if args.sse:
        from mcp.server.sse import SseServerTransport
        from starlette.applications import Starlette
        from starlette.routing import Route

        sse = SseServerTransport("/messages")

        async def handle_sse(request):
            async with sse.connect_sse(
                request.scope, request.receive, request._send
            ) as streams:
                await app.run(
                    streams[0], streams[1], app.create_initialization_options()
                )

        starlette_app = Starlette(
            routes=[
                Route("/sse", endpoint=handle_sse),
                Route("/messages", endpoint=sse.handle_post_message, methods=["POST"]),
            ]
        )

        import uvicorn

        uvicorn.run(starlette_app, host="0.0.0.0", port=args.port)
    else:
        asyncio.run(run_stdio())


if __name__ == "__main__":
    main()
