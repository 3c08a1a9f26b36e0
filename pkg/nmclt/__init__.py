"""
Public methods for the nmclt library.

Sub modules:
    - chaincore: proof-of-work chain with names
    - nameregistry: domain records and resolution
    - resolver: signed resolution over UDP
    - transport: zero round trip encrypted tunnels
    - netsim: deterministic network simulator

Usage:
    import nmclt

    nmclt.configure(log_level="DEBUG")
    node = nmclt.open_chain()
    record = nmclt.resolve(node, "example.bit")
    body, trace = nmclt.simulate_fetch("example.bit", "/")
"""

from nmclt.configuration import configure
from nmclt.configuration import config as _config

config = _config()

# ------------------------------------
# region - Chain
# ------------------------------------


def open_chain(path=None):
    """
    Load the chain file, or start one at genesis.
    """
    from nmclt.chaincore import ChainParams, load_or_create_chain

    return load_or_create_chain(path or config.path("chain_file"), ChainParams.from_config())


def resolve(node, fqdn: str):
    """
    Resolve a .bit domain against a node's current state.
    """
    from nmclt.nameregistry import resolve as _resolve

    return _resolve(node.snapshot(), fqdn)


# endregion
# ------------------------------------
# region - Transport
# ------------------------------------


def client(**kwargs):
    """
    A MinimaLT client endpoint with parameters from the configuration.
    """
    from nmclt.transport import MltClient, TransportParams

    return MltClient(TransportParams.from_config(), **kwargs)


def server(**kwargs):
    """
    A MinimaLT server endpoint with parameters from the configuration.
    """
    from nmclt.transport import MltServer, TransportParams

    kwargs.setdefault("load_flag", bool(config.load_flag))
    return MltServer(TransportParams.from_config(), **kwargs)


# endregion
# ------------------------------------
# region - Simulation
# ------------------------------------


def simulate_fetch(fqdn: str = "example.bit", path: str = "/", **kwargs):
    """
    Resolve and fetch inside the network simulator. Returns (body, trace).
    """
    from nmclt.netsim import run_fetch

    return run_fetch(fqdn, path, **kwargs)


# endregion
# ------------------------------------
