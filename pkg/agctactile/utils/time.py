"""
Time and duration utilities.

Functions for turning wall-clock measurements into log and report friendly text.
"""

from __future__ import annotations

from datetime import timedelta


def pretty_print_duration(seconds: float) -> str:
    """
    Convert an elapsed time in seconds to an H:MM:SS.mmm string.

    Args:
        seconds: Elapsed wall time

    Returns:
        Human readable duration string
    """
    return str(timedelta(seconds=round(seconds, 3)))
