"""Result envelope shared by trials, theory checks and the MCP tools."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class OperationResult:
    """Standardised result envelope returned by every non-raising operation."""

    success: bool
    data: Any = None
    message: str = ""
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def failure(cls, exc: BaseException, **metadata: Any) -> "OperationResult":
        """Envelope for a caught exception; ``metadata['error']`` is its class name."""
        return cls(
            success=False,
            message=str(exc),
            metadata={"error": type(exc).__name__, **metadata},
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "success": self.success,
            "data": self.data,
            "message": self.message,
            "metadata": self.metadata,
        }
