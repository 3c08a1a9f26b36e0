"""
Handshake baselines for comparison with zero round trip tunnels.

TCP and TCP + TLS are modeled as the sequence of round trips they
need before the request can leave the client. The simulator plays
those legs as datagrams; baseline_handshake_model counts them.
"""

# Std
import struct

# nmclt
from nmclt.util.exceptions import ScriptError

MAGIC = b"TCPB"
HEADER = struct.Struct(">4sIB")  # magic, flow number, leg index

# Round trips before the request, as (client leg, server leg).
# The request travels with the client's next leg.
HANDSHAKES: dict[str, list[tuple[str, str]]] = {
    "tcp": [("SYN", "SYN-ACK")],
    "tcp_tls12": [
        ("SYN", "SYN-ACK"),
        ("ACK+ClientHello", "ServerHello..ServerHelloDone"),
        ("ClientKeyExchange+Finished", "ChangeCipherSpec+Finished"),
    ],
    # Four TLS round trips on top of TCP
    "tcp_tls_4rtt": [
        ("SYN", "SYN-ACK"),
        ("ACK+ClientHello", "ServerHello"),
        ("Certificate", "CertificateAck"),
        ("ClientKeyExchange", "KeyExchangeAck"),
        ("Finished", "Finished"),
    ],
}



def handshake_legs(kind: str) -> list[tuple[str, str]]:
    try:
        return HANDSHAKES[kind]
    except KeyError as err:
        raise ScriptError(f"Unknown baseline '{kind}', expected one of {', '.join(HANDSHAKES)}") from err


def baseline_handshake_model(kind: str) -> float:
    """
    Round trips until the first request byte reaches the server:
    one per handshake round trip plus the half trip of the request.

        tcp            -> 1.5
        tcp_tls12      -> 3.5
        tcp_tls_4rtt   -> 5.5
    """
    return len(handshake_legs(kind)) + 0.5


def encode_leg(flow: int, leg: int, payload: bytes = b"") -> bytes:
    return HEADER.pack(MAGIC, flow, leg) + payload


def decode_leg(datagram: bytes) -> tuple[int, int, bytes] | None:
    if len(datagram) < HEADER.size or not datagram.startswith(MAGIC):
        return None
    _, flow, leg = HEADER.unpack_from(datagram)
    return flow, leg, datagram[HEADER.size :]
