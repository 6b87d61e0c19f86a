"""
Test suite for muira.

Fast numeric tests run by default with `uv run pytest -m "not slow"`.
Monte-Carlo acceptance runs (thresholds, BER, optimizer) carry the `slow`
marker and take minutes each.
"""
