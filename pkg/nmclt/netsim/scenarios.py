"""
Canned scenarios: a name chain for resolver hosts, a resolved
fetch, and the handshake comparison.

Usage:
    from nmclt.netsim.scenarios import fetch_scenario, handshake_bench

    sim = fetch_scenario("example.bit", "/")
    trace = sim.run()

    rows = handshake_bench(SimConfig(latency_ms=50))
"""

from __future__ import annotations

# Std
from typing import TYPE_CHECKING

# nmclt
from nmclt.netsim import defaults as d
from nmclt.netsim.types import SimConfig, Trace
from nmclt.netsim.simulator import Simulator
from nmclt.netsim.hosts import sim_keypair
from nmclt.netsim.baseline import HANDSHAKES, baseline_handshake_model
from nmclt.chaincore.node import ChainNode
from nmclt.chaincore.types import ChainParams
from nmclt.nameregistry.registry import register, resolve, split_fqdn
from nmclt.transport.types import Endpoint, RandomSource, TransportParams
from nmclt.util.exceptions import ScriptError

if TYPE_CHECKING:
    from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
    from nmclt.chaincore.keys import KeyPair
    from nmclt.chaincore.state import ChainState

FETCH_FLOW = "fetch"

# Flow kinds of the handshake comparison, in table order
BENCH_KINDS = ("minimalt", "tcp", "tcp_tls12", "tcp_tls_4rtt")


# ------------------------------------
# region - Name chain
# ------------------------------------


def build_name_chain(
    records: dict[str, dict | str],
    rng: RandomSource,
    params: ChainParams | None = None,
) -> tuple[ChainNode, "KeyPair"]:
    """
    A fresh chain where one owner has registered every name in `records`.
    The owner mines enough blocks first to pay the network fees.
    """
    params = params or ChainParams()
    owner = sim_keypair(rng)
    address = owner.address(params.address_version)
    node = ChainNode(params)
    for _ in range(len(records) + 1):
        node.mine_block(address)
    for nonce, (name, record) in enumerate(records.items(), start=1):
        node.submit_transaction(register(name, record, owner, nonce=nonce))
    node.mine_block(address)
    return node, owner


# endregion
# ------------------------------------
# region - Fetch
# ------------------------------------


def fetch_scenario(
    fqdn: str = "example.bit",
    path: str = "/",
    config: SimConfig | None = None,
    snapshot: "ChainState | None" = None,
    eph_key: "X25519PrivateKey | None" = None,
    documents: dict[str, bytes] | None = None,
    load_flag: bool = False,
    client_params: TransportParams | None = None,
    server_params: TransportParams | None = None,
    resolver_fingerprint: bytes | None = None,
) -> Simulator:
    """
    Client, resolver and server ready to run one resolved fetch.

    Without a snapshot the server is listed on a fresh chain under the
    name of `fqdn`. With one, the server takes the address of the
    record found there and must hold its ephemeral key.

    The client pins the resolver's fingerprint, or `resolver_fingerprint`
    when given.
    """
    sim = Simulator(config)
    server_kw = dict(params=server_params, documents=documents, load_flag=load_flag, eph_key=eph_key)

    if snapshot is None:
        name, _ = split_fqdn(fqdn)
        server = sim.spawn("mlt_server", "server", d.SERVER_ADDR, **server_kw)
        chain, _ = build_name_chain({name: {"minimaLT": server.record_section()}}, sim.host_rng("resolver/chain"))
        snapshot = chain.snapshot()
    else:
        section = resolve(snapshot, fqdn).record.minimalt
        if section is None:
            raise ScriptError(f"'{fqdn}' has no minimaLT section")
        address: Endpoint = (section.ip or d.SERVER_ADDR[0], section.port)
        sim.spawn("mlt_server", "server", address, **server_kw)

    resolver = sim.spawn("resolver", "resolver", d.RESOLVER_ADDR, snapshot=snapshot)
    pins = {"resolver": resolver_fingerprint or resolver.key.fingerprint()}
    sim.spawn("mlt_client", "client", d.CLIENT_ADDR, params=client_params, pins=pins)
    sim.at(0, "client", "fetch", fqdn=fqdn, resolver="resolver", path=path, flow=FETCH_FLOW)
    return sim


def run_fetch(fqdn: str = "example.bit", path: str = "/", **kwargs) -> tuple[bytes, Trace]:
    """
    Run fetch_scenario and return the response body with the trace.
    """
    sim = fetch_scenario(fqdn, path, **kwargs)
    trace = sim.run()
    client = sim.host("client")
    if client.errors:
        raise ScriptError(client.errors[0])
    flow = trace.flows.get(FETCH_FLOW)
    return (flow.body if flow else b""), trace


def request_datagram(trace: Trace, flow: str = FETCH_FLOW) -> dict | None:
    """
    The send event of the datagram that first delivered request bytes
    of `flow` to its server, or None if none arrived.
    """
    server = trace.flows[flow].server if flow in trace.flows else None
    for event in trace.events:
        if event["kind"] == "app" and event.get("event") == "stream_data" and event.get("host") == server:
            if event.get("flow") != flow or "via" not in event:
                continue
            return next(e for e in trace.events if e["kind"] == "send" and e["id"] == event["via"])
    return None


# endregion
# ------------------------------------
# region - Handshake comparison
# ------------------------------------


def handshake_steps(start: int = 10) -> list[dict]:
    """
    Script for one minimaLT fetch next to one fetch per simulated baseline.
    """
    steps = [
        {"time": 0, "host": "server", "action": "spawn", "args": {"role": "mlt_server", "address": "10.0.0.2:4433"}},
        {"time": 0, "host": "client", "action": "spawn", "args": {"role": "mlt_client", "address": "10.0.0.1:40000"}},
        {"time": 0, "host": "tcpd", "action": "spawn", "args": {"role": "tcp_server", "address": "10.0.0.3:80"}},
        {"time": 0, "host": "tcpc", "action": "spawn", "args": {"role": "tcp_client", "address": "10.0.0.4:40000"}},
        {"time": start, "host": "client", "action": "fetch", "args": {"server": "server", "flow": "minimalt"}},
    ]
    for kind in ("tcp", "tcp_tls12"):
        steps.append({"time": start, "host": "tcpc", "action": "fetch", "args": {"server": "tcpd", "kind": kind, "flow": kind}})
    return steps


def bench_rows(trace: Trace) -> list[dict]:
    """
    One row per flow with measured and modeled round trips. Baselines
    that were not simulated appear with their model only.
    """
    rows = []
    seen = set()
    for flow in trace.flows.values():
        seen.add(flow.kind)
        rows.append(
            {
                "flow": flow.flow,
                "kind": flow.kind,
                "rtt_to_server_first_byte": flow.rtt_to_server_first_byte,
                "rtt_to_first_byte": flow.rtt_to_first_byte,
                "model": baseline_handshake_model(flow.kind) if flow.kind in HANDSHAKES else 0.5,
                "puzzles": flow.puzzles,
                "retransmits": flow.retransmits,
            }
        )
    for kind in BENCH_KINDS:
        if kind in HANDSHAKES and kind not in seen:
            rows.append(
                {
                    "flow": "-",
                    "kind": kind,
                    "rtt_to_server_first_byte": None,
                    "rtt_to_first_byte": None,
                    "model": baseline_handshake_model(kind),
                    "puzzles": 0,
                    "retransmits": 0,
                }
            )
    return rows


def handshake_bench(config: SimConfig | None = None) -> list[dict]:
    """
    Run the handshake comparison script and tabulate it.
    """
    from nmclt.netsim.script import run_script

    return bench_rows(run_script(config or SimConfig(), handshake_steps()))


# endregion
# ------------------------------------
