"""
Resolver service: answers name queries from chain state over UDP,
signing every response with the resolver key.
"""

# Std
import socket
from pathlib import Path
from threading import Event, Lock, Thread
from typing import Callable
from concurrent.futures import ThreadPoolExecutor

# nmclt
from nmclt.resolver import defaults as d
from nmclt.resolver.types import Status
from nmclt.resolver.wire import decode_query, encode_response
from nmclt.chaincore.keys import KeyPair
from nmclt.chaincore.node import ChainNode
from nmclt.chaincore.state import ChainState
from nmclt.chaincore.types import ChainParams
from nmclt.nameregistry.registry import resolve
from nmclt.nameregistry.records import serialize_record
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import (
    BindError,
    NameExpired,
    NameNotFound,
    NmcltError,
)

logger = get_logger()

SnapshotSource = Callable[[], ChainState]


def handle_query(datagram: bytes, snapshot: ChainState, key: KeyPair) -> bytes | None:
    """
    Answer one datagram. Returns the signed response,
    or None when the datagram is not a valid query.
    """
    query = decode_query(datagram)
    if query is None:
        return None

    record = b""
    try:
        record = serialize_record(resolve(snapshot, query.fqdn).record)
        status = Status.OK
    except NameNotFound:
        status = Status.NOT_FOUND
    except NameExpired:
        status = Status.EXPIRED
    except NmcltError as err:
        logger.debug("Query %s for '%s' failed: %s", query.qid, query.fqdn, err)
        status = Status.ERROR

    return encode_response(query.qid, status, record, max(snapshot.height, 0), key)


# ------------------------------------
# region - Chain sources
# ------------------------------------


def node_source(node: ChainNode) -> SnapshotSource:
    return node.snapshot


def chain_file_source(path: Path | str, params: ChainParams | None = None) -> SnapshotSource:
    """
    Snapshot source reading a chain file, reloaded when it changes on disk.
    """
    from nmclt.chaincore.storage import load_chain

    path = Path(path).expanduser()
    lock = Lock()
    cache: dict = {"mtime": None, "state": None}

    def _snapshot() -> ChainState:
        with lock:
            mtime = path.stat().st_mtime_ns
            if mtime != cache["mtime"]:
                cache["state"] = load_chain(path, params).snapshot()
                cache["mtime"] = mtime
                logger.debug("Reloaded chain %s at height %s", path, cache["state"].height)
            return cache["state"]

    return _snapshot


# endregion
# ------------------------------------
# region - UDP service
# ------------------------------------


class ResolverService(Thread):
    """
    UDP receive loop in its own thread.
    Each datagram is handled on a worker pool against a fresh snapshot.
    """

    def __init__(
        self,
        key: KeyPair,
        source: SnapshotSource,
        host: str = d.HOST,
        port: int = d.PORT,
        workers: int = d.WORKERS,
    ):
        super().__init__(name="resolverd", daemon=True)
        self.key = key
        self.source = source
        self._stop_event = Event()
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="resolver")
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self._sock.bind((host, port))
        except OSError as err:
            self._sock.close()
            raise BindError(f"Can't bind {host}:{port}: {err}") from err
        self._sock.settimeout(d.POLL_INTERVAL)
        self.host, self.port = self._sock.getsockname()[:2]

    def run(self):
        logger.info("Resolver listening on %s:%s", self.host, self.port)
        while not self._stop_event.is_set():
            try:
                datagram, addr = self._sock.recvfrom(d.MAX_DATAGRAM)
            except socket.timeout:
                continue
            except OSError:
                break
            self._pool.submit(self._answer, datagram, addr)

    def _answer(self, datagram: bytes, addr):
        try:
            response = handle_query(datagram, self.source(), self.key)
        except Exception as err:  # pylint: disable=broad-except
            logger.error("Resolver handler failed: %s", err)
            return
        if response is None:
            logger.debug("Dropped malformed datagram from %s:%s", *addr[:2])
            return
        try:
            self._sock.sendto(response, addr)
        except OSError as err:
            logger.debug("Failed to answer %s: %s", addr, err)

    def is_running(self) -> bool:
        return self.is_alive() and not self._stop_event.is_set()

    def shutdown(self):
        """Shut the service down."""
        self._stop_event.set()
        if self.is_alive():
            self.join()
        self._pool.shutdown(wait=True)
        self._sock.close()
        logger.info("Resolver on %s:%s stopped", self.host, self.port)


def serve(
    key: KeyPair,
    source: SnapshotSource,
    host: str = d.HOST,
    port: int = d.PORT,
) -> ResolverService:
    """
    Start a resolver service and return its handle.
    """
    service = ResolverService(key, source, host, port)
    service.start()
    return service


# endregion
# ------------------------------------
