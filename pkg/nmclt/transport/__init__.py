"""
Encrypted, reliable transport over UDP with zero round trip tunnel setup.

Usage:
    from nmclt import transport

    server = transport.MltServer()
    client = transport.MltClient()
    tunnel = client.connect(server.eph_public, ("10.0.0.2", 4433), b"GET /\\n", now=0)
    for datagram, addr in client.datagrams_to_send(now=0):
        server.receive(datagram, ("10.0.0.1", 5000), now=10)
"""

from nmclt.transport.types import (
    AddressChanged,
    EphemeralRotated,
    Frame,
    FrameFlags,
    PacketType,
    Puzzle,
    PuzzleIssued,
    PuzzleSolved,
    RekeyCompleted,
    Role,
    RpcType,
    StreamData,
    StreamFinished,
    TransportEvent,
    TransportParams,
    TunnelEstablished,
)
from nmclt.transport.crypto import (
    TunnelKeys,
    derive_tunnel_key,
    generate_private_key,
    load_host_keys,
    next_key,
    private_bytes,
    public_bytes,
    save_host_keys,
)
from nmclt.transport.packets import decode_frame, decode_packet, encode_frame
from nmclt.transport.puzzle import puzzle_valid, solve_puzzle
from nmclt.transport.tunnel import Tunnel
from nmclt.transport.endpoint import MltClient, MltServer
from nmclt.transport.apps import DocumentServer, ResponseCollector, fetch_request
