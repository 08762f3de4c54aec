"""Tests for the MCP tool surface."""

import json

import pytest

from wimo import mcp_server
from wimo.mcp_server import call_tool, list_tools


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch):
    monkeypatch.setattr(mcp_server, "_config", None)


def _payload(content):
    assert len(content) == 1
    return json.loads(content[0].text)


async def test_tool_names():
    names = {tool.name for tool in await list_tools()}
    assert names == {
        "wimo_configure",
        "wimo_generate_config",
        "wimo_bandwidth_metrics",
        "wimo_approx",
        "wimo_check_theory",
        "wimo_estimate",
        "wimo_run_sweep",
    }


async def test_bandwidth_metrics():
    result = _payload(await call_tool("wimo_bandwidth_metrics", {"f_l": 1500, "f_h": 4500}))
    assert result["success"] is True
    assert result["data"]["eta"] == pytest.approx(1.0)
    assert result["data"]["gamma"] == pytest.approx(3.0)


async def test_bandwidth_metrics_error_is_reported():
    result = _payload(await call_tool("wimo_bandwidth_metrics", {"f_l": 0, "f_h": 4500}))
    assert result["success"] is False
    assert result["metadata"] == {"error": "ValueError", "tool": "wimo_bandwidth_metrics"}


async def test_generate_config():
    result = _payload(await call_tool("wimo_generate_config", {}))
    assert result["success"] is True
    assert "estimator:" in result["data"]


async def test_configure_with_overrides():
    result = _payload(
        await call_tool("wimo_configure", {"overrides": ["estimator.method=p-wimo", "estimator.m=4"]})
    )
    assert result["success"] is True
    assert result["message"] == "2 source(s), method p-wimo, m=4"
    assert mcp_server._config.spec.estimator.m == 4


async def test_configure_rejects_unknown_key():
    result = _payload(await call_tool("wimo_configure", {"overrides": ["estimator.mm=4"]}))
    assert result["success"] is False
    assert result["metadata"]["error"] == "ConfigError"
    assert mcp_server._config is None


async def test_approx():
    result = _payload(await call_tool("wimo_approx", {"theta_deg": 20.0, "overrides": ["estimator.m=2"]}))
    assert result["data"]["theta_deg"] == 20.0
    assert len(result["data"]["sigma"]) == 16


async def test_check_theory():
    result = _payload(
        await call_tool("wimo_check_theory", {"only": ["hadamard"], "overrides": ["theory.configs=2"]})
    )
    assert result["success"] is True
    assert result["data"]["checks"][0]["metadata"]["check"] == "hadamard"


async def test_missing_snapshot_file(tmp_path):
    result = _payload(await call_tool("wimo_estimate", {"snapshots_path": str(tmp_path / "none.wimo")}))
    assert result["success"] is False
    assert result["metadata"]["error"] == "FileNotFoundError"


async def test_unknown_tool():
    result = _payload(await call_tool("wimo_nope", {}))
    assert result["success"] is False
    assert result["message"] == "Unknown tool: wimo_nope"
