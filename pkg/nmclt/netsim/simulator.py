"""
Deterministic discrete-event network simulator.

Virtual time in ms. One seeded random.Random drives loss, reordering
and every host's randomness, so a run is a pure function of
(seed, config, script).
"""

# Std
import heapq
import random
import hashlib
from typing import Any

# nmclt
from nmclt.netsim.types import EventKind, FlowResult, SimConfig, SimEvent, Trace
from nmclt.netsim.hosts import HOST_TYPES, Host
from nmclt.netsim.baseline import decode_leg
from nmclt.transport import defaults as transport_defaults
from nmclt.transport.types import Endpoint, PacketType, RandomSource
from nmclt.resolver import defaults as resolver_defaults
from nmclt.util.logger import get_logger, set_clock
from nmclt.util.exceptions import ScriptError

logger = get_logger()


class Simulator:
    """
    Usage:
        sim = Simulator(SimConfig(seed=1, latency_ms=50))
        sim.add_host(server)
        sim.add_host(client)
        sim.at(0, "client", "fetch", server="server", path="/")
        trace = sim.run()
    """

    def __init__(self, config: SimConfig | None = None):
        self.config = config or SimConfig()
        self.now = 0
        self.random = random.Random(self.config.seed)
        self.trace = Trace(self.config)
        self.hosts: dict[str, Host] = {}
        self.current_datagram: int | None = None
        self._queue: list[SimEvent] = []
        self._seq = 0
        self._by_addr: dict[Endpoint, Host] = {}
        self._timer_at: dict[str, int] = {}
        self._link_free: dict[str, float] = {}
        self._datagram_ids = 0
        self._flow_keys: dict[bytes, str] = {}
        self._flow_numbers: list[str] = []

    # ------------------------------------
    # region - Setup
    # ------------------------------------

    def host_rng(self, name: str) -> RandomSource:
        """
        Byte source for one host, derived from the seed and its name.
        """
        return random.Random(f"{self.config.seed}/{name}").randbytes

    def add_host(self, host: Host) -> Host:
        if host.name in self.hosts:
            raise ScriptError(f"Host '{host.name}' already exists")
        if host.address in self._by_addr:
            raise ScriptError(f"Address {host.address} already taken")
        host.attach(self)
        self.hosts[host.name] = host
        self._by_addr[host.address] = host
        self.record("spawn", host=host.name, role=host.role, address=list(host.address))
        return host

    def spawn(self, role: str, name: str, address: Endpoint, **kwargs) -> Host:
        try:
            cls = HOST_TYPES[role]
        except KeyError as err:
            raise ScriptError(f"Unknown host role '{role}'") from err
        return self.add_host(cls(name, tuple(address), self.host_rng(name), **kwargs))

    def host(self, name: str) -> Host:
        try:
            return self.hosts[name]
        except KeyError as err:
            raise ScriptError(f"Unknown host '{name}'") from err

    def host_at(self, address: Endpoint) -> Host | None:
        return self._by_addr.get(tuple(address))

    def schedule(self, time: int, kind: EventKind, payload: Any = None) -> None:
        if time < self.now:
            raise ScriptError(f"Can't schedule at {time} ms, the clock is at {self.now} ms")
        heapq.heappush(self._queue, SimEvent(time, self._seq, kind, payload))
        self._seq += 1

    def at(self, time: int, host: str, action: str, args: dict | None = None, **kwargs) -> None:
        """
        Schedule a host action. Arguments come as a dict, keywords, or both.
        """
        args = {**(args or {}), **kwargs}
        if action == "address_change":
            self.schedule(time, EventKind.ADDRESS_CHANGE, (host, args))
        elif action == "load_toggle":
            self.schedule(time, EventKind.LOAD_TOGGLE, (host, args))
        else:
            self.schedule(time, EventKind.ACTION, (host, action, args))

    # endregion
    # ------------------------------------
    # region - Flows
    # ------------------------------------

    def open_flow(self, flow: str, kind: str, client: str, server: str, key: bytes | None = None) -> int:
        """
        Register a request / response flow starting now.
        Returns its number, used by baseline datagrams.
        """
        if flow in self.trace.flows:
            raise ScriptError(f"Flow '{flow}' already exists")
        self.trace.flows[flow] = FlowResult(flow, kind, client, server, start=self.now)
        if key is not None:
            self._flow_keys[key] = flow
        self._flow_numbers.append(flow)
        self.record("flow", flow=flow, flow_kind=kind, client=client, server=server)
        return len(self._flow_numbers)

    def flow_for_key(self, key: bytes) -> str | None:
        return self._flow_keys.get(key)

    def flow_by_number(self, number: int) -> FlowResult | None:
        if 1 <= number <= len(self._flow_numbers):
            return self.trace.flows[self._flow_numbers[number - 1]]
        return None

    def _rtt(self, at: int, flow: FlowResult) -> float:
        return (at - flow.start) / (2 * self.config.latency_ms)

    def flow_server_byte(self, flow: str) -> None:
        result = self.trace.flows[flow]
        if result.first_server_byte is None:
            result.first_server_byte = self.now
            result.rtt_to_server_first_byte = self._rtt(self.now, result)

    def flow_byte(self, flow: str, size: int) -> None:
        result = self.trace.flows[flow]
        result.bytes_received += size
        if result.first_byte is None:
            result.first_byte = self.now
            result.rtt_to_first_byte = self._rtt(self.now, result)

    def flow_complete(self, flow: str, body: bytes) -> None:
        result = self.trace.flows[flow]
        if result.completed is None:
            result.completed = self.now
            result.body = bytes(body)

    # endregion
    # ------------------------------------
    # region - Network
    # ------------------------------------

    def record(self, kind: str, **fields) -> None:
        if kind == "app" and self.current_datagram is not None:
            fields["via"] = self.current_datagram
        self.trace.events.append({"t": self.now, "kind": kind, **fields})

    @staticmethod
    def label(datagram: bytes) -> str:
        if datagram.startswith(transport_defaults.MAGIC) and len(datagram) > 4:
            try:
                return PacketType(datagram[4]).name
            except ValueError:
                return "MLT?"
        if datagram.startswith(resolver_defaults.MAGIC):
            return "RESOLVER"
        leg = decode_leg(datagram)
        if leg is not None:
            return f"TCP#{leg[1]}"
        return "RAW"

    def transmit(self, src: Host, datagram: bytes, dst: Endpoint) -> int:
        """
        Put a datagram on the link from src to dst. Returns its id.
        """
        self._datagram_ids += 1
        datagram_id = self._datagram_ids
        self.trace.sent += 1
        self.trace.in_flight += 1
        self.record(
            "send",
            id=datagram_id,
            src=src.name,
            dst=list(dst),
            label=self.label(datagram),
            len=len(datagram),
            digest=hashlib.sha256(datagram).hexdigest()[:16],
        )

        if self.random.random() < self.config.loss:
            self._drop(datagram_id, "loss")
            return datagram_id

        delay = self.config.latency_ms
        if self.config.bandwidth:
            start = max(float(self.now), self._link_free.get(src.name, 0.0))
            self._link_free[src.name] = start + len(datagram) / self.config.bandwidth
            delay += int(self._link_free[src.name] - self.now)
        if self.random.random() < self.config.reorder:
            delay += self.random.randint(1, self.config.latency_ms)

        self.schedule(self.now + delay, EventKind.DELIVER, (datagram_id, tuple(src.address), tuple(dst), datagram))
        return datagram_id

    def _drop(self, datagram_id: int, reason: str) -> None:
        self.trace.dropped += 1
        self.trace.in_flight -= 1
        self.record("drop", id=datagram_id, reason=reason)

    def _deliver(self, payload) -> Host | None:
        datagram_id, src, dst, datagram = payload
        host = self._by_addr.get(dst)
        if host is None:
            self._drop(datagram_id, "unroutable")
            return None
        self.trace.delivered += 1
        self.trace.in_flight -= 1
        self.record("deliver", id=datagram_id, host=host.name)
        self.current_datagram = datagram_id
        try:
            host.on_datagram(datagram, src)
        finally:
            self.current_datagram = None
        return host

    def _move(self, name: str, args: dict) -> Host:
        host = self.host(name)
        old = host.address
        if "address" in args:
            ip, _, port = str(args["address"]).rpartition(":")
            new = (ip, int(port))
        else:
            new = (args.get("ip", old[0]), int(args.get("port", old[1])))
        if new in self._by_addr:
            raise ScriptError(f"Address {new} already taken")
        del self._by_addr[old]
        host.address = new
        self._by_addr[new] = host
        self.record("address_change", host=name, old=list(old), new=list(new))
        return host

    # endregion
    # ------------------------------------
    # region - Event loop
    # ------------------------------------

    def _service(self, host: Host) -> None:
        """
        Send what a host produced and re-arm its timer.
        """
        for datagram, dst in host.poll():
            self.transmit(host, datagram, dst)
        deadline = host.next_timer()
        if deadline is None:
            self._timer_at.pop(host.name, None)
            return
        deadline = max(deadline, self.now)
        if self._timer_at.get(host.name) != deadline:
            self._timer_at[host.name] = deadline
            self.schedule(deadline, EventKind.TIMER, host.name)

    def step(self) -> bool:
        """
        Process one event. Returns False when nothing is left to do.
        """
        if not self._queue or self._queue[0].time > self.config.max_time_ms:
            return False
        event = heapq.heappop(self._queue)
        self.now = event.time

        if event.kind == EventKind.DELIVER:
            host = self._deliver(event.payload)
        elif event.kind == EventKind.TIMER:
            host = self.hosts[event.payload]
            if self._timer_at.get(host.name) != event.time:
                return True
            del self._timer_at[host.name]
            host.on_timer()
        elif event.kind == EventKind.ADDRESS_CHANGE:
            host = self._move(*event.payload)
        elif event.kind == EventKind.LOAD_TOGGLE:
            name, args = event.payload
            host = self.host(name)
            host.on_action("load_toggle", args)
        else:
            name, action, args = event.payload
            self.record("action", host=name, action=action)
            if action == "spawn":
                from nmclt.netsim.script import spawn_host

                host = spawn_host(self, name, args)
            else:
                host = self.host(name)
                host.on_action(action, args)

        if host is not None:
            self._service(host)
        return True

    def run(self, until: int | None = None) -> Trace:
        """
        Run until the queue drains, or until virtual time `until`.
        """
        logger.info(
            "Simulating with seed %s, latency %s ms, loss %s, reorder %s",
            self.config.seed,
            self.config.latency_ms,
            self.config.loss,
            self.config.reorder,
        )
        set_clock(lambda: self.now)
        try:
            for host in self.hosts.values():
                self._service(host)
            while self._queue and (until is None or self._queue[0].time <= until):
                if not self.step():
                    break
        finally:
            set_clock(None)
        self.trace.end_time = self.now
        for flow in self.trace.flows.values():
            flow.retransmits = 0
        for host in self.hosts.values():
            host.finish()
        logger.info(
            "Simulation finished at %s ms: %s sent, %s delivered, %s dropped",
            self.now,
            self.trace.sent,
            self.trace.delivered,
            self.trace.dropped,
        )
        return self.trace

    # endregion
    # ------------------------------------
