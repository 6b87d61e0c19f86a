"""MCP Resources

Read-only views of the built-in code presets:
- presets://all - List every preset with its design point
- preset://{name} - Full parameters of one preset (template resource)
"""

import json
import logging

from mcp.server import FastMCP

from muira.exceptions import UnknownPresetError
from muira.mcp.exceptions import PresetNotFoundError
from muira.mcp.models import PresetSummary
from muira.presets import get_preset, list_presets

logger = logging.getLogger(__name__)


def _format_preset_summary(summary: PresetSummary) -> str:
    design = (
        f"K={summary.K}, M={summary.M}, sigma_n={summary.sigma_n}"
        if summary.K is not None
        else "single user"
    )
    return f"{summary.name}: q={summary.q}, alpha={summary.alpha}, R={summary.rate:.4f} ({design}) [{summary.source}]"


def register_preset_resources(mcp: FastMCP) -> None:
    """Register preset resources with the FastMCP server."""

    @mcp.resource("presets://all")
    def resource_presets() -> str:
        """
        List all built-in code presets.

        Returns one line per preset with its repetition number, combiner
        size, rate and design point.
        """
        lines = [_format_preset_summary(PresetSummary.from_preset(p)) for p in list_presets()]
        return "\n".join(lines)

    @mcp.resource("preset://{name}")
    def resource_preset(name: str) -> str:
        """
        Get the full parameters of one preset as JSON.

        Args:
            name: Preset name (case-insensitive)

        Raises:
            PresetNotFoundError: If no preset has that name
        """
        try:
            preset = get_preset(name)
        except UnknownPresetError as e:
            logger.warning(f"Preset resource requested for unknown name '{name}'")
            raise PresetNotFoundError("Unknown code preset", name=name) from e
        document = preset.model_dump(mode="json", by_alias=True)
        return json.dumps(document, indent=2)
