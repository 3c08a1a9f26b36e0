"""
SPF / Styled Printing and Feedback
----------------------------------

Lightweight styling helper for the nmclt command line.

Style text using XML-like tags like <red>, <bold>, <soft>, etc.
These are converted to ANSI escape codes in terminal mode and
stripped out in api mode (used by --json output and tests).

Usage:

    from nmclt.spf import spf

    spf("<cyan>Hello <bold>World</bold></cyan>")
    spf.success("Block mined")
    spf.warning("Name expires soon")
    spf.error("Bad signature")

    x = spf.produce("Hello <bold>World</bold>")

    spf.table([{"flow": "minimalt", "rtt": 1.0}])
"""

# pylint: disable=missing-function-docstring

# Std
import sys
import json
from typing import Any, Literal

# 3rd party
from tabulate import tabulate

# Local
from .style_parser import style, strip_tags


# ------------------------------------
# Typing
# ------------------------------------


class Mode:
    """
    Styling mode.

    terminal: Use ANSI chars for terminal
    api:      Plain text, JSON for structured data
    """

    TERMINAL: str = "terminal"
    API: str = "api"


StatusTp = Literal["error", "warning", "success"] | None
MsgTp = str | list[str]


# ------------------------------------
# Main class
# ------------------------------------


class SPF:
    """
    Main class to handle styled printing and table display.
    """

    _instance = None
    _initialized = False

    # ------------------------------------
    # region - Public
    # ------------------------------------

    def __new__(cls):
        """
        Control singleton instance creation.
        """
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        # Prevent re-initialization of singleton
        if self._initialized:
            return
        self._initialized = True
        self.mode = Mode.TERMINAL
        self.table = self.Table(self)

    def __call__(self, msg: MsgTp, status: StatusTp = None, **kwargs):
        """
        Print styled text.
        """
        return self.print(msg, status, **kwargs)

    def set_mode(self, mode: str):
        """
        Set the styling mode.
        """
        if mode in (Mode.TERMINAL, Mode.API):
            self.mode = mode
        else:
            raise ValueError(f"Invalid mode '{mode}'")

    def print(self, msg: MsgTp, status: StatusTp = None, file=None, **kwargs):
        print(self._render(msg, status, **kwargs), file=file)

    def produce(self, msg: MsgTp, status: StatusTp = None, **kwargs) -> str:
        """
        Return styled text.
        """
        return self._render(msg, status, **kwargs)

    def data(self, payload: dict[str, Any], file=None):
        """
        Print one JSON line, used for --json output.
        """
        print(json.dumps(payload, sort_keys=True, default=str), file=file)

    def success(self, msg: MsgTp, **kwargs):
        self.print(msg, "success", **kwargs)

    def warning(self, msg: MsgTp, **kwargs):
        self.print(msg, "warning", file=sys.stderr, **kwargs)

    def error(self, msg: MsgTp, **kwargs):
        self.print(msg, "error", file=sys.stderr, **kwargs)

    # endregion
    # ------------------------------------
    # region - Rendering
    # ------------------------------------

    def _render(self, msg: MsgTp, status: StatusTp = None, **kwargs) -> str:
        if self.mode == Mode.API:
            return self._preformat_plain(strip_tags(self._join(msg)), status)
        return style(self._preformat(msg, status), **kwargs)

    def _join(self, msg: MsgTp) -> str:
        return "\n".join(msg) if isinstance(msg, list) else msg

    def _preformat(self, msg: MsgTp, status: StatusTp = None) -> str:
        """
        When the message is a list of strings, the first string either
        remains untouched or gets wrapped in the status tag, while all
        subsequent strings get wrapped in <soft>
        """
        if isinstance(msg, list):
            return "\n".join(
                (
                    f"<soft>{string}</soft>"
                    if i > 0
                    else (f"<{status}>{string}</{status}>" if status else string)
                )
                for i, string in enumerate(msg)
            )
        return f"<{status}>{msg}</{status}>" if status else msg

    def _preformat_plain(self, msg: str, status: StatusTp = None) -> str:
        return f"{status.upper()}: {msg}" if status else msg

    # endregion
    # ------------------------------------
    # region - Tables
    # ------------------------------------

    class Table:
        """
        Sub-class to handle table printing & producing.
        """

        def __init__(self, parent):
            self.parent = parent

        def __call__(self, *args, **kwargs):
            self.print(*args, **kwargs)

        def print(self, rows: list[dict[str, Any]], footnote: str | None = None):
            """
            Print a table.

            Modes:
                terminal --> print tabulate table
                api      --> print one JSON line per row
            """
            if not rows:
                self.parent.error("No data to display")
                return

            if self.parent.mode == Mode.API:
                for row in rows:
                    self.parent.data(row)
                return

            print(self.produce(rows))
            if footnote:
                self.parent(f"<soft>{footnote}</soft>")

        def produce(self, rows: list[dict[str, Any]]) -> str | None:
            """
            Return a tabulate table string.
            """
            if not rows:
                return None
            headers = {key: style(f"<soft>{key}</soft>") for key in rows[0]}
            return tabulate(rows, headers=headers, tablefmt="simple")

    # endregion
    # ------------------------------------
