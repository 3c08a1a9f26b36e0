"""
Parse XML tags for easy styling of CLI text output.
---------------------------------------------------

This module turns XML style tags into ANSI escape codes,
so CLI output can be colored with markup like:

    style("<error>Bad signature</error> from <soft>10.0.0.9</soft>")

Available functions:
    style()         Returns styled text
    print_s()       Print styled text
    strip_tags()    Remove style tags

Unknown tags are left untouched, which keeps things like
<FQDN> placeholders in help output intact.
"""

import re

# Style tags.
# - - -
# Any tag that is not in this dictionary is ignored.
tags = {
    # Custom tags
    "h1": "\x1b[1m",  # Primary headers: bold
    "h2": "\x1b[33m",  # Secondary headers: yellow
    "cmd": "\x1b[36m",  # Commands: cyan
    "error": "\x1b[31m",  # Errors: red
    "warning": "\x1b[33m",  # Warnings: yellow
    "success": "\x1b[32m",  # Success: green
    # Styles
    "reset": "\x1b[0m",
    "bold": "\x1b[1m",
    "dim": "\x1b[2m",
    "soft": "\x1b[90m",  # Gray
    "italic": "\x1b[3m",
    "underline": "\x1b[4m",
    # Foreground colors
    "red": "\x1b[31m",
    "green": "\x1b[32m",
    "yellow": "\x1b[33m",
    "blue": "\x1b[34m",
    "magenta": "\x1b[35m",
    "cyan": "\x1b[36m",
    "white": "\x1b[37m",
}

RESET = "\x1b[0m"
TAG_PATTERN = re.compile(r"<(/?)([a-z0-9_]+)>")


def style(text: str, pad: int = 0, tabs: int = 0, xml_tags: bool = True) -> str:
    """
    Convert style tags into ANSI codes.

    Closing a tag restores whatever style was active before it was
    opened, so tags can be nested: <soft>a <red>b</red> c</soft>
    """
    if not xml_tags:
        text = strip_tags(text)
    else:
        stack: list[str] = []

        def _replace(match: re.Match) -> str:
            closing, name = match.group(1), match.group(2)
            if name not in tags:
                return match.group(0)
            if not closing:
                stack.append(tags[name])
                return tags[name]
            if stack:
                stack.pop()
            return RESET + "".join(stack)

        text = TAG_PATTERN.sub(_replace, text)

    if tabs:
        text = "\n".join(("    " * tabs) + line for line in text.split("\n"))
    if pad:
        text = ("\n" * pad) + text + ("\n" * pad)
    return text


def print_s(text: str, **kwargs) -> None:
    """
    Print styled text.
    """
    print(style(text, **kwargs))


def strip_tags(text: str) -> str:
    """
    Remove all known style tags, leave anything else as is.
    """
    return TAG_PATTERN.sub(
        lambda m: "" if m.group(2) in tags else m.group(0), text
    )
