"""
Default values for the name registry.
"""

NAME_PATTERN: str = r"^d/[a-z0-9-]{1,63}$"
MAX_RECORD_BYTES: int = 4096
TLD: str = ".bit"
REPLACE_MARKER: str = "_replace"
MAX_SUBDOMAIN_DEPTH: int = 1
DEFAULT_FEE: int = 1000  # base units
