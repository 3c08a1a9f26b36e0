"""
Resolver wire format, all integers big-endian.

    Query    = "NMC1" | qid u32 | fqdn_len u16 | fqdn
    Response = "NMC1" | qid u32 | status u8 | record_len u32 | record | height u64 | sig 64

The signature covers everything between the magic and itself.
"""

# Std
import struct

# nmclt
from nmclt.resolver import defaults as d
from nmclt.resolver.types import Query, Response, Status
from nmclt.chaincore.keys import KeyPair, verify_signature
from nmclt.util.exceptions import ResponseBadSignature

SIG_LEN = 64


def encode_query(query: Query) -> bytes:
    fqdn = query.fqdn.encode("utf-8")
    return d.MAGIC + struct.pack(">IH", query.qid, len(fqdn)) + fqdn


def decode_query(datagram: bytes) -> Query | None:
    """
    Returns None for anything that isn't a well-formed query.
    """
    if len(datagram) < 10 or datagram[:4] != d.MAGIC:
        return None
    qid, length = struct.unpack(">IH", datagram[4:10])
    if len(datagram) != 10 + length:
        return None
    try:
        return Query(qid, datagram[10:].decode("utf-8"))
    except UnicodeDecodeError:
        return None


def signed_bytes(qid: int, status: Status, record: bytes, height: int) -> bytes:
    return struct.pack(">IBI", qid, int(status), len(record)) + record + struct.pack(">Q", height)


def encode_response(qid: int, status: Status, record: bytes, height: int, key: KeyPair) -> bytes:
    body = signed_bytes(qid, status, record, height)
    return d.MAGIC + body + key.sign(body)


def decode_response(datagram: bytes) -> Response | None:
    if len(datagram) < 4 + 9 + 8 + SIG_LEN or datagram[:4] != d.MAGIC:
        return None
    qid, status, length = struct.unpack(">IBI", datagram[4:13])
    if len(datagram) != 13 + length + 8 + SIG_LEN:
        return None
    try:
        status = Status(status)
    except ValueError:
        return None
    record = datagram[13 : 13 + length]
    (height,) = struct.unpack(">Q", datagram[13 + length : 21 + length])
    return Response(qid, status, record, height, datagram[21 + length :])


def verify_response(datagram: bytes, qid: int, server_pubkey: bytes) -> Response:
    """
    Decode and authenticate a response to the query qid.
    Raises ResponseBadSignature unless every byte is covered by a valid signature.
    """
    response = decode_response(datagram)
    if response is None:
        raise ResponseBadSignature("Malformed response")
    if response.qid != qid:
        raise ResponseBadSignature(f"Response qid {response.qid} does not match {qid}")
    body = signed_bytes(response.qid, response.status, response.record, response.height)
    if not verify_signature(server_pubkey, body, response.signature):
        raise ResponseBadSignature("Response signature does not verify under the resolver key")
    return response
