"""HTTP facade: one in-memory trading session driven by interpreted text."""

from .app import MAX_TEXT_CHARS, create_app
from .state import (
    AmbiguousChart,
    Chart,
    Order,
    TradingState,
    UnknownChart,
    apply_command,
)

__all__ = [
    "MAX_TEXT_CHARS",
    "create_app",
    "AmbiguousChart",
    "Chart",
    "Order",
    "TradingState",
    "UnknownChart",
    "apply_command",
]
