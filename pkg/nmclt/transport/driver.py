"""
Runs a transport endpoint over a real UDP socket with a wall clock.
"""

# Std
import time
import socket
import select
from threading import Event, Thread
from typing import Callable

# nmclt
from nmclt.transport import defaults as d
from nmclt.transport.types import TransportEvent
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import BindError

logger = get_logger()

MAX_DATAGRAM = 65535
POLL_MS = 200

EventHandler = Callable[[object, list[TransportEvent]], None]


def now_ms() -> int:
    return int(time.monotonic() * 1000)


class UdpDriver(Thread):
    """
    Pumps datagrams and timers between a socket and an endpoint.

    Use pump() / run_until() from the calling thread (clients), or
    start() it as a thread and shutdown() when done (servers).
    on_events receives (endpoint, events) after every step.
    """

    def __init__(
        self,
        endpoint,
        host: str = "0.0.0.0",
        port: int = 0,
        on_events: EventHandler | None = None,
    ):
        super().__init__(name="mlt-udp", daemon=True)
        self.endpoint = endpoint
        self.on_events = on_events
        self._stop_event = Event()
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self._sock.bind((host, port))
        except OSError as err:
            self._sock.close()
            raise BindError(f"Can't bind {host}:{port}: {err}") from err
        self._sock.setblocking(False)
        self.host, self.port = self._sock.getsockname()[:2]

    def _wait_ms(self, limit_ms: int) -> int:
        deadline = self.endpoint.next_timer()
        if deadline is None:
            return limit_ms
        return max(0, min(limit_ms, deadline - now_ms()))

    def pump(self, limit_ms: int = POLL_MS) -> list[TransportEvent]:
        """
        One step: wait for a datagram or the next timer, process,
        and send what the endpoint produced. Returns the drained events.
        """
        readable, _, _ = select.select([self._sock], [], [], self._wait_ms(limit_ms) / 1000)
        if readable:
            while True:
                try:
                    datagram, addr = self._sock.recvfrom(MAX_DATAGRAM)
                except (BlockingIOError, InterruptedError):
                    break
                except OSError as err:
                    logger.debug("Receive failed: %s", err)
                    break
                self.endpoint.receive(datagram, addr[:2], now_ms())

        now = now_ms()
        deadline = self.endpoint.next_timer()
        if deadline is not None and now >= deadline:
            self.endpoint.handle_timer(now)

        events = self.endpoint.drain_events()
        if self.on_events and events:
            self.on_events(self.endpoint, events)
        self.flush()
        return events

    def flush(self) -> None:
        for datagram, addr in self.endpoint.datagrams_to_send(now_ms()):
            if len(datagram) > d.MTU:
                logger.warning("Sending %s byte datagram, above the %s byte MTU", len(datagram), d.MTU)
            try:
                self._sock.sendto(datagram, addr)
            except OSError as err:
                logger.debug("Send to %s failed: %s", addr, err)

    def run_until(self, predicate: Callable[[], bool], timeout: float) -> bool:
        """
        Pump until predicate() holds or timeout seconds pass.
        """
        self.flush()
        give_up = now_ms() + int(timeout * 1000)
        while not predicate():
            remaining = give_up - now_ms()
            if remaining <= 0:
                return False
            self.pump(min(POLL_MS, remaining))
        return True

    def run(self):
        logger.info("MinimaLT endpoint on %s:%s", self.host, self.port)
        while not self._stop_event.is_set():
            try:
                self.pump()
            except OSError:
                break

    def is_running(self) -> bool:
        return self.is_alive() and not self._stop_event.is_set()

    def shutdown(self):
        """Stop the loop and close the socket."""
        self._stop_event.set()
        if self.is_alive():
            self.join()
        self._sock.close()
        logger.info("MinimaLT endpoint on %s:%s stopped", self.host, self.port)
