"""
Muira MCP Server Package

This package exposes the EXIT, threshold and capacity tools of muira as a
Model Context Protocol server built on FastMCP.

Modules:
- server: Main FastMCP server instance and tools
- models: Pydantic models for structured tool output
- resources: MCP resources for the preset inventory
- lifespan: EXIT-curve cache lifecycle
- exceptions: McpError subclasses and the MuiraError mapping
"""
