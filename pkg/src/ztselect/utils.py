"""Plain-text output helpers shared by the CLI."""

import math
import re
from typing import List


class Colors:
    """ANSI color codes for terminal output."""

    GREEN = "\033[92m"
    YELLOW = "\033[93m"
    RED = "\033[91m"
    CYAN = "\033[96m"
    GRAY = "\033[90m"
    BOLD = "\033[1m"
    END = "\033[0m"


def colorize(text: str, color: str, use_color: bool) -> str:
    """Wrap text with ANSI codes if color enabled."""
    return f"{color}{text}{Colors.END}" if use_color else text


def format_float(value: float) -> str:
    """17 significant digits, dot decimal, ``inf``/``nan`` spelled out."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


_ANSI = re.compile(r"\033\[[0-9;]*m")


def _visible_len(cell: str) -> int:
    return len(_ANSI.sub("", cell))


def _text(cell: object) -> str:
    return format_float(cell) if isinstance(cell, (int, float)) else str(cell)


def _pad(cell: object, width: int) -> str:
    text = _text(cell)
    gap = " " * (width - _visible_len(text))
    if isinstance(cell, (int, float)) and not isinstance(cell, bool):
        return gap + text
    return text + gap


def format_table(headers: List[str], rows: List[List[object]]) -> List[str]:
    """Align rows under a ruled header; numbers right-aligned, color codes ignored."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], _visible_len(_text(cell)))

    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(_pad(c, w) for c, w in zip(row, widths)).rstrip())
    return lines
