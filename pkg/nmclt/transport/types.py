"""
Types used in the transport module.
"""

from __future__ import annotations

# Std
from enum import IntEnum, IntFlag
from dataclasses import dataclass
from typing import Any, Callable

# nmclt
from nmclt.transport import defaults as d

Endpoint = tuple[str, int]
RandomSource = Callable[[int], bytes]


class PacketType(IntEnum):
    INIT = 0x01
    DATA = 0x02
    PUZZLE = 0x03
    INIT_PUZZLED = 0x04


class FrameFlags(IntFlag):
    NONE = 0x00
    FIN = 0x01
    RPC = 0x02


class RpcType(IntEnum):
    NEXT_TID = 0x01
    WINDOW_UPDATE = 0x02
    CLOSE = 0x03
    REKEY_REQUEST = 0x04


class Role(IntEnum):
    """
    The value is the direction byte of the AEAD nonce for packets
    sent by that role.
    """

    CLIENT = 0
    SERVER = 1


@dataclass(frozen=True)
class Frame:
    """
    Plaintext carried by every INIT / DATA packet.
    seq is the tunnel byte offset of the payload, ack the cumulative
    offset received in order, window the sender's receive window for conn_id.
    """

    seq: int
    ack: int
    window: int
    conn_id: int
    flags: FrameFlags = FrameFlags.NONE
    payload: bytes = b""


@dataclass(frozen=True)
class Puzzle:
    puzzle_nonce: bytes
    difficulty: int


@dataclass(frozen=True)
class TransportParams:
    """
    Transport tuning. Both ends of a tunnel should agree on mss.
    """

    mss: int = d.MSS
    recv_window: int = d.RECV_WINDOW
    rekey_bytes: int = d.REKEY_BYTES
    rekey_interval_ms: int = d.REKEY_INTERVAL_MS
    puzzle_difficulty: int = d.PUZZLE_DIFFICULTY
    max_tunnels: int = d.MAX_TUNNELS
    tunnel_idle_ms: int = d.TUNNEL_IDLE_MS
    eph_epoch_ms: int = d.EPH_EPOCH_MS
    rto_min: int = d.RTO_MIN
    rto_initial: int = d.RTO_INITIAL
    rto_max: int = d.RTO_MAX
    initial_cwnd: int = d.INITIAL_CWND
    lookahead: int = d.LOOKAHEAD
    replay_window: int = d.REPLAY_WINDOW

    @classmethod
    def from_config(cls) -> "TransportParams":
        """
        Build transport parameters from the nmclt configuration.
        """
        from nmclt.configuration import config

        cfg = config()
        return cls(
            recv_window=int(cfg.recv_window),
            rekey_bytes=int(cfg.rekey_bytes),
            rekey_interval_ms=int(cfg.rekey_interval_ms),
            puzzle_difficulty=int(cfg.puzzle_difficulty),
            max_tunnels=int(cfg.max_tunnels),
            tunnel_idle_ms=int(cfg.tunnel_idle_ms),
            eph_epoch_ms=int(cfg.eph_epoch_ms),
        )


# ------------------------------------
# region - Events
# ------------------------------------


@dataclass(frozen=True)
class TransportEvent:
    """
    Base of the events endpoints report to the application.
    tunnel is the Tunnel object, or the tid for events without tunnel state.
    """

    tunnel: Any


@dataclass(frozen=True)
class TunnelEstablished(TransportEvent):
    remote: Endpoint


@dataclass(frozen=True)
class StreamData(TransportEvent):
    conn_id: int
    data: bytes


@dataclass(frozen=True)
class StreamFinished(TransportEvent):
    conn_id: int


@dataclass(frozen=True)
class RekeyCompleted(TransportEvent):
    old_tid: int
    new_tid: int
    generation: int


@dataclass(frozen=True)
class AddressChanged(TransportEvent):
    old: Endpoint
    new: Endpoint


@dataclass(frozen=True)
class PuzzleIssued(TransportEvent):
    difficulty: int


@dataclass(frozen=True)
class PuzzleSolved(TransportEvent):
    difficulty: int
    attempts: int


@dataclass(frozen=True)
class EphemeralRotated(TransportEvent):
    public_key: bytes


# endregion
# ------------------------------------
