"""
Simulated hosts: thin adapters between the simulator and the
transport, resolver and baseline state machines.
"""

from __future__ import annotations

# Std
from typing import TYPE_CHECKING, Any, Callable

# 3rd party
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

# nmclt
from nmclt.netsim import defaults as d
from nmclt.netsim.baseline import decode_leg, encode_leg, handshake_legs
from nmclt.transport.types import (
    AddressChanged,
    Endpoint,
    PuzzleIssued,
    PuzzleSolved,
    RandomSource,
    RekeyCompleted,
    StreamData,
    StreamFinished,
    TransportEvent,
    TransportParams,
    TunnelEstablished,
)
from nmclt.transport.apps import DocumentServer, ResponseCollector, fetch_request
from nmclt.transport.endpoint import MltClient, MltServer
from nmclt.resolver import defaults as resolver_defaults
from nmclt.resolver.types import Query
from nmclt.resolver.wire import decode_response, encode_query
from nmclt.resolver.client import check_pin, interpret_response
from nmclt.resolver.service import handle_query
from nmclt.chaincore.keys import KeyPair
from nmclt.chaincore.state import ChainState
from nmclt.util.general import sha256
from nmclt.util.exceptions import NmcltError, ScriptError

if TYPE_CHECKING:
    from nmclt.netsim.simulator import Simulator


def sim_keypair(rng: RandomSource) -> KeyPair:
    """
    A chain key drawn from a simulation byte source.
    """
    return KeyPair.from_secret(int.from_bytes(rng(31), "big") + 1)


class Host:
    """
    Base host. The simulator calls on_datagram / on_timer / on_action
    and then collects poll() output and next_timer().
    """

    role = "host"

    def __init__(self, name: str, address: Endpoint, rng: RandomSource):
        self.name = name
        self.address = address
        self.rng = rng
        self.sim: "Simulator | None" = None

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, {self.address})"

    @property
    def now(self) -> int:
        return self.sim.now

    def attach(self, sim: "Simulator") -> None:
        self.sim = sim

    def on_datagram(self, datagram: bytes, src: Endpoint) -> None:
        pass

    def on_timer(self) -> None:
        pass

    def next_timer(self) -> int | None:
        return None

    def poll(self) -> list[tuple[bytes, Endpoint]]:
        return []

    def on_action(self, action: str, args: dict[str, Any]) -> None:
        raise ScriptError(f"Host '{self.name}' ({self.role}) does not support '{action}'")

    def finish(self) -> None:
        """
        Called once when the run ends.
        """


class _EndpointHost(Host):
    """
    Host running a transport endpoint.
    """

    endpoint: MltClient | MltServer

    def on_datagram(self, datagram: bytes, src: Endpoint) -> None:
        self.endpoint.receive(datagram, src, self.now)
        self._handle_events(self.endpoint.drain_events())

    def on_timer(self) -> None:
        self.endpoint.handle_timer(self.now)
        self._handle_events(self.endpoint.drain_events())

    def next_timer(self) -> int | None:
        return self.endpoint.next_timer()

    def poll(self) -> list[tuple[bytes, Endpoint]]:
        out = self.endpoint.datagrams_to_send(self.now)
        self._handle_events(self.endpoint.drain_events())
        return out

    def _handle_events(self, events: list[TransportEvent]) -> None:
        raise NotImplementedError

    def _note(self, event: TransportEvent) -> None:
        if isinstance(event, RekeyCompleted):
            self.sim.record("app", host=self.name, event="rekey", new_tid=f"{event.new_tid:x}", generation=event.generation)
        elif isinstance(event, AddressChanged):
            self.sim.record("app", host=self.name, event="address_changed", old=list(event.old), new=list(event.new))
        elif isinstance(event, TunnelEstablished):
            self.sim.record("app", host=self.name, event="tunnel_established", remote=list(event.remote))
        elif isinstance(event, PuzzleIssued):
            self.sim.record("app", host=self.name, event="puzzle_issued", difficulty=event.difficulty)
        elif isinstance(event, PuzzleSolved):
            self.sim.record("app", host=self.name, event="puzzle_solved", attempts=event.attempts)


class MltServerHost(_EndpointHost):
    """
    MinimaLT server. Serves documents, or in sink mode just
    collects every stream it receives.
    """

    role = "mlt_server"

    def __init__(
        self,
        name: str,
        address: Endpoint,
        rng: RandomSource,
        params: TransportParams | None = None,
        documents: dict[str, bytes] | None = None,
        load_flag: bool = False,
        sink: bool = False,
        eph_key: X25519PrivateKey | None = None,
    ):
        super().__init__(name, address, rng)
        self.endpoint = MltServer(params, eph_key=eph_key, rng=rng, load_flag=load_flag)
        self.app = None if sink else DocumentServer(documents or {"/": d.FETCH_DOCUMENT})
        self.received: dict[tuple[int, int], bytearray] = {}
        self._flow_of: dict[int, str | None] = {}
        self._tunnels: dict[int, Any] = {}

    def record_section(self) -> dict:
        return self.endpoint.record_section(self.address[0], self.address[1])

    def stream(self, flow: str, conn_id: int) -> bytes:
        for tunnel_id, name in self._flow_of.items():
            if name == flow:
                return bytes(self.received.get((tunnel_id, conn_id), b""))
        return b""

    def _handle_events(self, events: list[TransportEvent]) -> None:
        for event in events:
            self._note(event)
            if isinstance(event, TunnelEstablished):
                self._flow_of[id(event.tunnel)] = self.sim.flow_for_key(event.tunnel.init_pub)
                self._tunnels[id(event.tunnel)] = event.tunnel
            elif isinstance(event, StreamData):
                flow = self._flow_of.get(id(event.tunnel))
                self.received.setdefault((id(event.tunnel), event.conn_id), bytearray()).extend(event.data)
                self.sim.record(
                    "app", host=self.name, event="stream_data", flow=flow, conn=event.conn_id, bytes=len(event.data)
                )
                if flow is not None:
                    self.sim.flow_server_byte(flow)
        if self.app is not None:
            self.app.handle(self.endpoint, events)

    def finish(self) -> None:
        for key, flow in self._flow_of.items():
            if flow is not None:
                self.sim.trace.flows[flow].retransmits += self._tunnels[key].stream.retransmits

    def on_action(self, action: str, args: dict[str, Any]) -> None:
        if action != "load_toggle":
            super().on_action(action, args)
        on = args.get("on")
        self.endpoint.load_flag = (not self.endpoint.load_flag) if on is None else bool(on)
        self.sim.record("app", host=self.name, event="load", on=self.endpoint.load_flag)


class MltClientHost(_EndpointHost):
    """
    MinimaLT client. fetch opens a tunnel carrying the request in its
    first packet, after an optional signed resolution through a
    resolver host.

    Resolutions are checked against a pinned resolver fingerprint, taken
    from the fetch arguments (resolver_pubkey, resolver_fingerprint as
    hex), then from `pins` (resolver host name -> fingerprint). With
    neither, the client trusts the key the resolver host publishes.
    """

    role = "mlt_client"

    def __init__(
        self,
        name: str,
        address: Endpoint,
        rng: RandomSource,
        params: TransportParams | None = None,
        pins: dict[str, bytes] | None = None,
    ):
        super().__init__(name, address, rng)
        self.endpoint = MltClient(params, rng=rng)
        self.pins = dict(pins or {})
        self.collector = ResponseCollector()
        self.flows: dict[str, Any] = {}
        self.sent_log: dict[tuple[str, int], bytearray] = {}
        self.errors: list[str] = []
        self._flow_by_tunnel: dict[int, str] = {}
        self._resolving: dict[int, dict] = {}
        self._outbox: list[tuple[bytes, Endpoint]] = []

    def finish(self) -> None:
        for flow, tunnel in self.flows.items():
            self.sim.trace.flows[flow].retransmits += tunnel.stream.retransmits

    def tunnel(self, flow: str):
        try:
            return self.flows[flow]
        except KeyError as err:
            raise ScriptError(f"Host '{self.name}' has no flow '{flow}'") from err

    def body(self, flow: str, conn_id: int = 1) -> bytes:
        return self.collector.body(self.tunnel(flow), conn_id)

    # ------------------------------------
    # region - Actions
    # ------------------------------------

    def on_action(self, action: str, args: dict[str, Any]) -> None:
        handler: Callable[[dict], None] | None = {
            "fetch": self._fetch,
            "send": self._send,
            "rekey": self._rekey,
            "set_window": self._set_window,
        }.get(action)
        if handler is None:
            return super().on_action(action, args)
        handler(args)

    def _fetch(self, args: dict) -> None:
        if args.get("kind", "minimalt") != "minimalt":
            raise ScriptError(f"Host '{self.name}' only fetches over minimalt")
        flow = args.get("flow") or f"{self.name}/{len(self.flows) + len(self._resolving) + 1}"
        if "fqdn" in args:
            resolver = self.sim.host(args["resolver"])
            pin = self._pin(resolver, args)
            qid = int.from_bytes(self.rng(4), "big")
            self._resolving[qid] = dict(args, flow=flow, pin=pin)
            self._outbox.append((encode_query(Query(qid, args["fqdn"])), resolver.address))
            self.sim.record("app", host=self.name, event="resolve", fqdn=args["fqdn"], flow=flow)
            return
        server = self.sim.host(args["server"])
        if not isinstance(server, MltServerHost):
            raise ScriptError(f"'{args['server']}' is not an mlt_server")
        self._connect(flow, server.record_section(), server.name, args)

    def _pin(self, resolver: Host, args: dict) -> tuple[bytes, bytes]:
        """
        The resolver key to verify answers with and the fingerprint it must match.
        """
        if not isinstance(resolver, ResolverHost):
            raise ScriptError(f"'{resolver.name}' is not a resolver")
        try:
            pubkey = bytes.fromhex(args["resolver_pubkey"]) if "resolver_pubkey" in args else resolver.key.public_key
            if "resolver_fingerprint" in args:
                fingerprint = bytes.fromhex(args["resolver_fingerprint"])
            else:
                fingerprint = self.pins.get(resolver.name) or sha256(pubkey)
        except (TypeError, ValueError) as err:
            raise ScriptError(f"Bad resolver pin: {err}") from err
        return pubkey, fingerprint

    def _connect(self, flow: str, section, server_name: str, args: dict) -> None:
        from nmclt.nameregistry.types import MinimaLTSection

        if not isinstance(section, MinimaLTSection):
            section = MinimaLTSection.model_validate(section)
        if "data" in args:
            first = args["data"].encode() if isinstance(args["data"], str) else bytes(args["data"])
        else:
            first = fetch_request(args.get("path", "/"))
        tunnel = self.endpoint.connect(section, first_data=first, now=self.now)
        self.flows[flow] = tunnel
        self._flow_by_tunnel[id(tunnel)] = flow
        self.sent_log[(flow, 1)] = bytearray(first)
        self.sim.open_flow(flow, "minimalt", self.name, server_name, key=tunnel.init_pub)

    def _send(self, args: dict) -> None:
        flow = args["flow"]
        tunnel = self.tunnel(flow)
        conn_id = args.get("conn", 1)
        if conn_id == "new":
            conn_id = self.endpoint.open_connection(tunnel)
        if "data" in args:
            data = args["data"].encode() if isinstance(args["data"], str) else bytes(args["data"])
        else:
            data = self.rng(int(args.get("size", 0)))
        self.endpoint.send(tunnel, conn_id, data)
        self.sent_log.setdefault((flow, conn_id), bytearray()).extend(data)
        if args.get("close"):
            self.endpoint.close(tunnel, conn_id)

    def _rekey(self, args: dict) -> None:
        try:
            self.endpoint.rekey_initiate(self.tunnel(args["flow"]), self.now)
        except NmcltError as err:
            self.errors.append(str(err))
            self.sim.record("app", host=self.name, event="rekey_refused", error=str(err))

    def _set_window(self, args: dict) -> None:
        self.endpoint.set_window(self.tunnel(args["flow"]), int(args.get("conn", 1)), int(args["window"]))

    # endregion
    # ------------------------------------
    # region - I/O
    # ------------------------------------

    def on_datagram(self, datagram: bytes, src: Endpoint) -> None:
        if datagram.startswith(resolver_defaults.MAGIC):
            self._on_resolution(datagram)
            return
        super().on_datagram(datagram, src)

    def _on_resolution(self, datagram: bytes) -> None:
        response = decode_response(datagram)
        if response is None or response.qid not in self._resolving:
            return
        args = self._resolving.pop(response.qid)
        pubkey, fingerprint = args["pin"]
        try:
            check_pin(pubkey, fingerprint)
            resolved = interpret_response(datagram, response.qid, args["fqdn"], pubkey)
            section = resolved.record.minimalt
            if section is None:
                raise ScriptError(f"'{args['fqdn']}' has no minimaLT section")
        except NmcltError as err:
            self.errors.append(str(err))
            self.sim.record("app", host=self.name, event="resolve_failed", error=str(err))
            return
        server = self.sim.host_at((section.ip, section.port))
        self.sim.record("app", host=self.name, event="resolved", fqdn=args["fqdn"], height=resolved.height)
        self._connect(args["flow"], section, server.name if server else "?", args)

    def poll(self) -> list[tuple[bytes, Endpoint]]:
        out, self._outbox = self._outbox, []
        return out + super().poll()

    def _handle_events(self, events: list[TransportEvent]) -> None:
        self.collector.handle(events)
        for event in events:
            self._note(event)
            flow = self._flow_by_tunnel.get(id(event.tunnel))
            if flow is None:
                continue
            if isinstance(event, StreamData):
                self.sim.record("app", host=self.name, event="stream_data", flow=flow, conn=event.conn_id, bytes=len(event.data))
                self.sim.flow_byte(flow, len(event.data))
            elif isinstance(event, StreamFinished):
                self.sim.record("app", host=self.name, event="stream_finished", flow=flow, conn=event.conn_id)
                if event.conn_id == 1:
                    self.sim.flow_complete(flow, self.collector.body(event.tunnel, 1))
            elif isinstance(event, PuzzleSolved):
                self.sim.trace.flows[flow].puzzles += 1
            elif isinstance(event, RekeyCompleted):
                self.sim.trace.flows[flow].rekeys += 1

    # endregion
    # ------------------------------------


class ResolverHost(Host):
    """
    Signed resolver answering from a fixed chain snapshot.
    """

    role = "resolver"

    def __init__(self, name: str, address: Endpoint, rng: RandomSource, snapshot: ChainState, key: KeyPair | None = None):
        super().__init__(name, address, rng)
        self.snapshot = snapshot
        self.key = key or sim_keypair(rng)
        self._outbox: list[tuple[bytes, Endpoint]] = []

    def on_datagram(self, datagram: bytes, src: Endpoint) -> None:
        response = handle_query(datagram, self.snapshot, self.key)
        if response is not None:
            self._outbox.append((response, src))

    def poll(self) -> list[tuple[bytes, Endpoint]]:
        out, self._outbox = self._outbox, []
        return out


# ------------------------------------
# region - Baseline hosts
# ------------------------------------


class TcpServerHost(Host):
    """
    Answers each handshake leg, then the request with a document.
    """

    role = "tcp_server"

    def __init__(self, name: str, address: Endpoint, rng: RandomSource, document: bytes = d.FETCH_DOCUMENT):
        super().__init__(name, address, rng)
        self.document = document
        self._outbox: list[tuple[bytes, Endpoint]] = []

    def on_datagram(self, datagram: bytes, src: Endpoint) -> None:
        decoded = decode_leg(datagram)
        if decoded is None:
            return
        flow_no, leg, payload = decoded
        flow = self.sim.flow_by_number(flow_no)
        if flow is None:
            return
        if leg >= len(handshake_legs(flow.kind)):
            self.sim.flow_server_byte(flow.flow)
            self.sim.record("app", host=self.name, event="stream_data", flow=flow.flow, bytes=len(payload))
            self._outbox.append((encode_leg(flow_no, leg, self.document), src))
        else:
            self._outbox.append((encode_leg(flow_no, leg), src))

    def poll(self) -> list[tuple[bytes, Endpoint]]:
        out, self._outbox = self._outbox, []
        return out


class TcpClientHost(Host):
    """
    Plays the client legs of a baseline handshake, then the request.
    """

    role = "tcp_client"

    def __init__(self, name: str, address: Endpoint, rng: RandomSource):
        super().__init__(name, address, rng)
        self._outbox: list[tuple[bytes, Endpoint]] = []
        self._servers: dict[int, Endpoint] = {}

    def on_action(self, action: str, args: dict[str, Any]) -> None:
        if action != "fetch":
            return super().on_action(action, args)
        kind = args.get("kind", "tcp")
        handshake_legs(kind)
        server = self.sim.host(args["server"])
        flow = args.get("flow") or f"{self.name}/{len(self._servers) + 1}"
        flow_no = self.sim.open_flow(flow, kind, self.name, server.name)
        self._servers[flow_no] = server.address
        self._send_leg(flow_no, 0, kind, args.get("path", "/"))

    def _send_leg(self, flow_no: int, leg: int, kind: str, path: str = "/") -> None:
        payload = fetch_request(path) if leg >= len(handshake_legs(kind)) else b""
        self._outbox.append((encode_leg(flow_no, leg, payload), self._servers[flow_no]))

    def on_datagram(self, datagram: bytes, src: Endpoint) -> None:
        decoded = decode_leg(datagram)
        if decoded is None or decoded[0] not in self._servers:
            return
        flow_no, leg, payload = decoded
        flow = self.sim.flow_by_number(flow_no)
        if leg >= len(handshake_legs(flow.kind)):
            self.sim.flow_byte(flow.flow, len(payload))
            self.sim.flow_complete(flow.flow, payload)
            self.sim.record("app", host=self.name, event="stream_data", flow=flow.flow, bytes=len(payload))
            return
        self._send_leg(flow_no, leg + 1, flow.kind)

    def poll(self) -> list[tuple[bytes, Endpoint]]:
        out, self._outbox = self._outbox, []
        return out


# endregion
# ------------------------------------

HOST_TYPES: dict[str, type[Host]] = {
    cls.role: cls
    for cls in (MltServerHost, MltClientHost, ResolverHost, TcpServerHost, TcpClientHost)
}
