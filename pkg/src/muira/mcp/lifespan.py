"""Lifespan Management for MCP Server

The server keeps one EXIT-curve cache for its whole lifetime so repeated
threshold and trajectory requests for the same code reuse the measured
curve. The cache is created on startup and cleared on shutdown.
"""

import logging
from contextlib import asynccontextmanager

from muira.exit_analysis import CurveCache

logger = logging.getLogger(__name__)


@asynccontextmanager
async def curve_cache_lifespan(app):
    """Async context manager owning the server's EXIT-curve cache

    Args:
        app: The FastMCP server instance

    Yields:
        None: The cache is set in server._cache module state
    """
    from muira.mcp import server as server_module

    cache = CurveCache()
    server_module._cache = cache
    logger.info("EXIT-curve cache created")
    try:
        yield
    finally:
        logger.info(
            f"Releasing EXIT-curve cache ({len(cache)} curve(s), "
            f"{cache.hits} hit(s), {cache.misses} miss(es))"
        )
        cache.clear()
        server_module._cache = None
