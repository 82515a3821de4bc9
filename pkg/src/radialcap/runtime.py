"""Process-wide runtime knobs."""

from __future__ import annotations

import os
from typing import Optional

__all__ = ["resolve_workers"]


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count: explicit argument, then RADIALCAP_THREADS, then a
    small default capped by the machine."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("RADIALCAP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))
