"""Allow running the MCP server with: python -m wimo"""

from wimo.mcp_server import main

if __name__ == "__main__":
    main()
