"""
nmclt command line.

Usage:
    nmclt keygen --kind chain
    nmclt mine --blocks 2
    nmclt register d/example record.json
    nmclt mine --blocks 1
    nmclt resolve example.bit
    nmclt mlt-fetch example.bit / --sim --keys ~/.nmclt/host.keys
    nmclt sim-bench

Global options go before the command. The configuration file is
found through NMCLT_CONFIG, see docs/config.md.
"""

# Std
import sys
import argparse
from typing import Callable

# nmclt
from nmclt.spf import spf
from nmclt.spf.spf import Mode
from nmclt.configuration import configure
from nmclt.cli import commands
from nmclt.cli.exit_codes import OK, USAGE, exit_code_for
from nmclt.util.general import parse_host_port
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import NmcltError

logger = get_logger()

Handler = Callable[[argparse.Namespace], int]


# ------------------------------------
# region - Parser
# ------------------------------------


def _sim_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("simulation")
    group.add_argument("--seed", type=int, default=None, help="Simulation seed")
    group.add_argument("--latency", type=int, default=None, help="One-way latency in ms")
    group.add_argument("--loss", type=float, default=None, help="Datagram loss probability")
    group.add_argument("--reorder", type=float, default=None, help="Reordering probability")
    group.add_argument("--trace", default=None, help="Write the event trace as JSON lines to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmclt", description="Naming chain, signed resolver and zero round trip transport.")
    parser.add_argument("--json", action="store_true", help="Line-oriented JSON output")
    parser.add_argument("--chain", default=None, help="Chain file (config: chain_file)")
    parser.add_argument("--key", dest="key_file", default=None, help="Chain key file (config: key_file)")
    parser.add_argument("--resolver", default=None, help="Resolver HOST:PORT")
    parser.add_argument("--resolver-pubkey", default=None, help="Resolver public key, hex")
    parser.add_argument("--pin", default=None, help="Pinned resolver fingerprint, hex")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    # Keys & chain
    p = sub.add_parser("keygen", help="Create a chain key or a MinimaLT host key pair")
    p.add_argument("--kind", choices=("chain", "mlt"), default="chain")
    p.add_argument("--out", default=None, help="Key file to write")
    p.add_argument("--ip", default=None, help="mlt: IPv4 address to list in the record")
    p.add_argument("--port", type=int, default=None, help="mlt: UDP port to list in the record")
    p.add_argument("--record", default=None, help="mlt: also write a record file with the minimaLT section")
    p.add_argument("--force", action="store_true", help="Overwrite an existing key file")
    p.set_defaults(handler=commands.keygen)

    p = sub.add_parser("mine", help="Mine blocks with the pending transactions")
    p.add_argument("--blocks", type=int, default=1)
    p.add_argument("--to", default=None, help="Coinbase address, defaults to the chain key")
    p.set_defaults(handler=commands.mine)

    p = sub.add_parser("balance", help="Show an address balance")
    p.add_argument("address", nargs="?", default=None)
    p.set_defaults(handler=commands.balance)

    p = sub.add_parser("send", help="Queue a transfer")
    p.add_argument("address")
    p.add_argument("amount", help="Coins, eg. 1.5")
    p.add_argument("--fee", default="0.0001", help="Fee in coins")
    p.set_defaults(handler=commands.send)

    # Names
    p = sub.add_parser("register", help="Queue a name registration")
    p.add_argument("name", help="d/<label>")
    p.add_argument("file", help="Record file (JSON)")
    p.add_argument("--fee", default="0.00001", help="Fee in coins")
    p.set_defaults(handler=commands.register_name)

    p = sub.add_parser("update", help="Queue a record update, or a renewal without FILE")
    p.add_argument("name")
    p.add_argument("file", nargs="?", default=None, help="JSON fields to merge into the record")
    p.add_argument("--fee", default="0.00001", help="Fee in coins")
    p.set_defaults(handler=commands.update_name)

    p = sub.add_parser(
        "update-eph",
        help="Rotate the host ephemeral key and queue its publication. The key file is rewritten right away, before the update is mined",
    )
    p.add_argument("name")
    p.add_argument("--keys", default=None, help="Host key file")
    p.add_argument("--fee", default="0.00001", help="Fee in coins")
    p.set_defaults(handler=commands.update_eph)

    p = sub.add_parser("resolve", help="Resolve a .bit domain")
    p.add_argument("fqdn")
    p.add_argument("--remote", action="store_true", help="Ask the configured resolver instead of the local chain")
    p.set_defaults(handler=commands.resolve_name)

    # Services
    p = sub.add_parser("resolverd", help="Run the signed resolver over the local chain file")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--signing-key", dest="key", default=None, help="Resolver key file, defaults to the chain key")
    p.set_defaults(handler=commands.resolverd)

    p = sub.add_parser("mlt-serve", help="Serve documents over MinimaLT")
    p.add_argument("--keys", default=None, help="Host key file")
    p.add_argument("--root", default=".", help="Document directory")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(handler=commands.mlt_serve)

    # Fetch & simulation
    p = sub.add_parser("mlt-fetch", help="Resolve a domain and fetch a document in zero round trips")
    p.add_argument("fqdn")
    p.add_argument("path", nargs="?", default="/")
    p.add_argument("--sim", action="store_true", help="Run the fetch inside the network simulator")
    p.add_argument("--keys", default=None, help="sim: host key file of the listed server, resolves from the local chain")
    p.add_argument("--timeout", type=float, default=5.0, help="Seconds to wait for the response")
    _sim_flags(p)
    p.set_defaults(handler=commands.mlt_fetch)

    p = sub.add_parser("sim-bench", help="Compare handshake round trips in the simulator")
    p.add_argument("script", nargs="?", default=None, help="Scenario script, defaults to the built-in comparison")
    _sim_flags(p)
    p.set_defaults(handler=commands.sim_bench)

    p = sub.add_parser("config", help="Show the compiled configuration")
    p.set_defaults(handler=commands.show_config)

    return parser


# endregion
# ------------------------------------
# region - Entry points
# ------------------------------------


def _apply_options(args: argparse.Namespace) -> None:
    options = {
        "json_output": bool(args.json),
        "chain_file": args.chain,
        "key_file": args.key_file,
        "resolver_pubkey": args.resolver_pubkey,
        "resolver_fingerprint": args.pin,
        "log_level": "DEBUG" if args.verbose else None,
    }
    if args.resolver:
        options["resolver_host"], options["resolver_port"] = parse_host_port(args.resolver)
    configure(**options)
    spf.set_mode(Mode.API if args.json else Mode.TERMINAL)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return USAGE if err.code else OK

    _apply_options(args)
    handler: Handler = args.handler
    try:
        return handler(args)
    except (NmcltError, OSError) as err:
        code, headline = exit_code_for(err)
        logger.debug("%s failed: %r", args.command, err)
        if args.json:
            spf.data({"error": headline, "detail": str(err), "code": code}, file=sys.stderr)
        else:
            spf.error([headline, str(err)])
        return code


def resolverd_main() -> int:
    return main(["resolverd", *sys.argv[1:]])


# endregion
# ------------------------------------

if __name__ == "__main__":
    sys.exit(main())
