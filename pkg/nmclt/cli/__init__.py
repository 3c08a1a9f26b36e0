"""
Command line entry points, see nmclt.cli.main.
"""

from nmclt.cli.main import build_parser, main
