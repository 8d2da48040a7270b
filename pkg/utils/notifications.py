import logging
import sys
from typing import Iterable, Sequence, Tuple

import config


def setup_logging(verbosity: int = 0):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(config.LOG_FORMAT))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


def show_notification(title, message, stream=None):
    print(f"{title}: {message}", file=stream or sys.stdout)


def show_success(message):
    show_notification("OK", message)


def show_error(message):
    show_notification("error", message, stream=sys.stderr)


def show_summary(title: str, rows: Iterable[Tuple[str, object]]):
    rows = list(rows)
    width = max((len(name) for name, _ in rows), default=0)
    print(title)
    for name, value in rows:
        if isinstance(value, float):
            value = f"{value:.3f}s"
        print(f"  {name:<{width}}  {value}")


def show_diagnostics(diagnostics: Sequence, source: str = None):
    for d in diagnostics:
        prefix = f"{source}: " if source else ""
        print(f"{prefix}[{d.rule_id}] {d.code}: {d.message}", file=sys.stderr)


def show_lines(lines: Iterable[str]):
    for line in lines:
        print(line)
