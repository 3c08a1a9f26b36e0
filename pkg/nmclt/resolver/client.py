"""
Resolver client with a pinned resolver key.

The resolver's public key is configured out of band together with
its fingerprint; the two must agree before any response is read.
"""

# Std
import time
import socket
import secrets

# nmclt
from nmclt.resolver import defaults as d
from nmclt.resolver.types import Query, Status
from nmclt.resolver.wire import decode_response, encode_query, verify_response
from nmclt.nameregistry.types import ResolvedRecord
from nmclt.nameregistry.records import parse_record
from nmclt.nameregistry.registry import split_fqdn
from nmclt.util.general import sha256
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import (
    FingerprintMismatch,
    NameExpired,
    NameNotFound,
    ParseError,
    ResolveError,
    ResolverStatusError,
    ResolveTimeout,
)

logger = get_logger()


def check_pin(server_pubkey: bytes, pinned_fingerprint: bytes) -> None:
    if sha256(server_pubkey) != pinned_fingerprint:
        raise FingerprintMismatch("Resolver public key does not match the pinned fingerprint")


def interpret_response(
    datagram: bytes, qid: int, fqdn: str, server_pubkey: bytes
) -> ResolvedRecord:
    """
    Authenticate a response and turn it into a record or an error.
    """
    response = verify_response(datagram, qid, server_pubkey)
    if response.status == Status.NOT_FOUND:
        raise NameNotFound(f"'{fqdn}' not found")
    if response.status == Status.EXPIRED:
        raise NameExpired(f"'{fqdn}' expired")
    if response.status != Status.OK:
        raise ResolverStatusError(f"Resolver answered {response.status.name} for '{fqdn}'")
    try:
        record = parse_record(response.record)
    except ParseError as err:
        raise ResolveError(f"Resolver sent an unparsable record: {err.reason}") from err
    name, _ = split_fqdn(fqdn)
    return ResolvedRecord(fqdn=fqdn, name=name, record=record, height=response.height)


class ResolverClient:
    """
    Usage:
        client = ResolverClient("127.0.0.1", 5353, pubkey, fingerprint)
        resolved = client.resolve("example.bit")
    """

    def __init__(
        self,
        host: str,
        port: int,
        server_pubkey: bytes,
        pinned_fingerprint: bytes,
        timeout: float = d.TIMEOUT,
        retries: int = d.RETRIES,
    ):
        self.address = (host, port)
        self.server_pubkey = server_pubkey
        self.pinned_fingerprint = pinned_fingerprint
        self.timeout = timeout
        self.retries = retries

    def resolve(self, fqdn: str) -> ResolvedRecord:
        """
        Query the resolver. The first attempt is followed by up to
        `retries` more on timeout.
        """
        check_pin(self.server_pubkey, self.pinned_fingerprint)
        split_fqdn(fqdn)
        qid = secrets.randbits(32)
        datagram = encode_query(Query(qid, fqdn))

        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            for attempt in range(1 + self.retries):
                sock.sendto(datagram, self.address)
                answer = self._await(sock, qid)
                if answer is not None:
                    return interpret_response(answer, qid, fqdn, self.server_pubkey)
                logger.debug("Resolver attempt %s for '%s' timed out", attempt + 1, fqdn)
        raise ResolveTimeout(f"No answer from {self.address[0]}:{self.address[1]}")

    def _await(self, sock: socket.socket, qid: int) -> bytes | None:
        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            sock.settimeout(remaining)
            try:
                answer, addr = sock.recvfrom(d.MAX_DATAGRAM)
            except socket.timeout:
                return None
            response = decode_response(answer)
            if response is not None and response.qid != qid:
                logger.debug("Discarding response with qid %s from %s", response.qid, addr)
                continue
            return answer


def client_resolve(
    server: tuple[str, int],
    pinned_fingerprint: bytes,
    fqdn: str,
    server_pubkey: bytes,
    timeout: float = d.TIMEOUT,
    retries: int = d.RETRIES,
) -> ResolvedRecord:
    """
    One-shot resolution through a pinned resolver.
    """
    host, port = server
    return ResolverClient(host, port, server_pubkey, pinned_fingerprint, timeout, retries).resolve(fqdn)
