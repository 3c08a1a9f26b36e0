"""
Minimal document fetch protocol run over tunnel connections.

A request is one line, "GET <path>\\n". The server answers with the
document bytes, or a one-line "404 <path>" status, then closes the
connection. Used by mlt-serve / mlt-fetch and the simulator.
"""

# Std
from pathlib import Path

# nmclt
from nmclt.transport.types import StreamData, StreamFinished, TransportEvent
from nmclt.util.logger import get_logger

logger = get_logger()

NOT_FOUND = b"404 "


def fetch_request(path: str) -> bytes:
    if not path.startswith("/"):
        path = "/" + path
    return f"GET {path}\n".encode()


class DocumentServer:
    """
    Serves documents from a dict or a directory.
    """

    def __init__(self, documents: dict[str, bytes] | None = None, root: Path | str | None = None):
        self.documents = {k if k.startswith("/") else "/" + k: v for k, v in (documents or {}).items()}
        self.root = Path(root).expanduser().resolve() if root is not None else None
        self._requests: dict[tuple[int, int], bytearray | None] = {}
        self.served = 0

    def lookup(self, path: str) -> bytes | None:
        if path in self.documents:
            return self.documents[path]
        if self.root is None:
            return None
        target = (self.root / path.lstrip("/")).resolve()
        if self.root not in target.parents or not target.is_file():
            return None
        return target.read_bytes()

    def handle(self, endpoint, events: list[TransportEvent]) -> None:
        """
        Answer every complete request among the endpoint's events.
        """
        for event in events:
            if not isinstance(event, StreamData):
                continue
            key = (id(event.tunnel), event.conn_id)
            buffer = self._requests.setdefault(key, bytearray())
            if buffer is None:
                continue
            buffer.extend(event.data)
            if b"\n" not in buffer:
                continue
            line = bytes(buffer).split(b"\n", 1)[0].decode("utf-8", "replace").strip()
            self._requests[key] = None
            self._respond(endpoint, event.tunnel, event.conn_id, line)

    def _respond(self, endpoint, tunnel, conn_id: int, line: str) -> None:
        verb, _, path = line.partition(" ")
        body = self.lookup(path) if verb == "GET" else None
        if body is None:
            body = NOT_FOUND + path.encode() + b"\n"
            logger.debug("No document for '%s'", line)
        else:
            self.served += 1
            logger.debug("Serving %s (%s bytes)", path, len(body))
        endpoint.send(tunnel, conn_id, body)
        endpoint.close(tunnel, conn_id)


class ResponseCollector:
    """
    Gathers bytes per (tunnel, connection) until the peer closes it.
    """

    def __init__(self):
        self.buffers: dict[tuple[int, int], bytearray] = {}
        self.finished: set[tuple[int, int]] = set()

    def handle(self, events: list[TransportEvent]) -> None:
        for event in events:
            if isinstance(event, StreamData):
                self.buffers.setdefault((id(event.tunnel), event.conn_id), bytearray()).extend(event.data)
            elif isinstance(event, StreamFinished):
                self.finished.add((id(event.tunnel), event.conn_id))

    def body(self, tunnel, conn_id: int) -> bytes:
        return bytes(self.buffers.get((id(tunnel), conn_id), b""))

    def done(self, tunnel, conn_id: int) -> bool:
        return (id(tunnel), conn_id) in self.finished
