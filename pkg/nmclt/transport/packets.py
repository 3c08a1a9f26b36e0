"""
Bit-exact packet, frame and RPC layouts. All integers are big-endian.

    INIT         "MLT1" | 0x01 | tid u64 | eph_pub 32 | ciphertext
    DATA         "MLT1" | 0x02 | tid u64 | ciphertext
    PUZZLE       "MLT1" | 0x03 | tid u64 | puzzle_nonce 16 | difficulty u8
    INIT_PUZZLED "MLT1" | 0x04 | tid u64 | puzzle_nonce 16 | solution u64 | eph_pub 32 | ciphertext

The clear part of a packet is its AEAD associated data. INIT plaintexts
start with a second copy of eph_pub, followed by the frame.

    Frame = seq u32 | ack u32 | window u32 | conn_id u32 | flags u8 | payload
"""

# Std
import struct
from dataclasses import dataclass

# nmclt
from nmclt.transport import defaults as d
from nmclt.transport.types import Frame, FrameFlags, PacketType, RpcType
from nmclt.util.exceptions import PacketError

PREFIX = struct.Struct(">4sBQ")  # magic, type, tid
FRAME_HEADER = struct.Struct(">IIIIB")
NONCE_LEN = 16

# Offsets shared by INIT and its rekey disguise
TYPE_OFFSET = 4
TID_OFFSET = 5
PUBKEY_OFFSET = 13
INIT_CIPHERTEXT_OFFSET = 45


@dataclass(frozen=True)
class Packet:
    """
    A parsed datagram. Fields unused by a type are left as None.
    """

    type: PacketType
    tid: int
    header: bytes
    eph_pub: bytes | None = None
    ciphertext: bytes = b""
    puzzle_nonce: bytes | None = None
    difficulty: int | None = None
    solution: int | None = None

    @property
    def is_init(self) -> bool:
        return self.type in (PacketType.INIT, PacketType.INIT_PUZZLED)


# ------------------------------------
# region - Packets
# ------------------------------------


def _prefix(ptype: PacketType, tid: int) -> bytes:
    return PREFIX.pack(d.MAGIC, int(ptype), tid)


def init_header(tid: int, eph_pub: bytes) -> bytes:
    return _prefix(PacketType.INIT, tid) + eph_pub


def init_puzzled_header(tid: int, puzzle_nonce: bytes, solution: int, eph_pub: bytes) -> bytes:
    return _prefix(PacketType.INIT_PUZZLED, tid) + puzzle_nonce + struct.pack(">Q", solution) + eph_pub


def data_header(tid: int) -> bytes:
    return _prefix(PacketType.DATA, tid)


def encode_puzzle(tid: int, puzzle_nonce: bytes, difficulty: int) -> bytes:
    return _prefix(PacketType.PUZZLE, tid) + puzzle_nonce + struct.pack(">B", difficulty)


def decode_packet(datagram: bytes) -> Packet:
    """
    Parse a datagram, raising PacketError when it is not a packet.
    """
    if len(datagram) < PREFIX.size:
        raise PacketError("Datagram too short")
    magic, ptype, tid = PREFIX.unpack_from(datagram)
    if magic != d.MAGIC:
        raise PacketError("Bad magic")
    try:
        ptype = PacketType(ptype)
    except ValueError as err:
        raise PacketError(f"Unknown packet type {ptype}") from err
    if tid == 0:
        raise PacketError("Tunnel id 0 is reserved")

    body = datagram[PREFIX.size :]
    if ptype == PacketType.DATA:
        if len(body) < d.TAG_LEN:
            raise PacketError("DATA too short")
        return Packet(ptype, tid, datagram[: PREFIX.size], ciphertext=body)

    if ptype == PacketType.INIT:
        if len(body) < d.KEY_LEN + d.TAG_LEN:
            raise PacketError("INIT too short")
        split = PREFIX.size + d.KEY_LEN
        return Packet(
            ptype,
            tid,
            datagram[:split],
            eph_pub=datagram[PREFIX.size : split],
            ciphertext=datagram[split:],
        )

    if ptype == PacketType.PUZZLE:
        if len(body) != NONCE_LEN + 1:
            raise PacketError("Bad PUZZLE length")
        return Packet(
            ptype, tid, datagram, puzzle_nonce=body[:NONCE_LEN], difficulty=body[NONCE_LEN]
        )

    # INIT_PUZZLED
    if len(body) < NONCE_LEN + 8 + d.KEY_LEN + d.TAG_LEN:
        raise PacketError("INIT_PUZZLED too short")
    (solution,) = struct.unpack_from(">Q", body, NONCE_LEN)
    eph_start = NONCE_LEN + 8
    split = PREFIX.size + eph_start + d.KEY_LEN
    return Packet(
        ptype,
        tid,
        datagram[:split],
        eph_pub=body[eph_start : eph_start + d.KEY_LEN],
        ciphertext=datagram[split:],
        puzzle_nonce=body[:NONCE_LEN],
        solution=solution,
    )


# endregion
# ------------------------------------
# region - Frames
# ------------------------------------


def encode_frame(frame: Frame) -> bytes:
    return (
        FRAME_HEADER.pack(frame.seq, frame.ack, frame.window, frame.conn_id, int(frame.flags))
        + frame.payload
    )


def decode_frame(plaintext: bytes) -> Frame:
    if len(plaintext) < FRAME_HEADER.size:
        raise PacketError("Frame too short")
    seq, ack, window, conn_id, flags = FRAME_HEADER.unpack_from(plaintext)
    return Frame(seq, ack, window, conn_id, FrameFlags(flags & 0x03), plaintext[FRAME_HEADER.size :])


# endregion
# ------------------------------------
# region - RPCs on connection 0
# ------------------------------------

RPC_SIZES = {
    RpcType.NEXT_TID: 8 + d.KEY_LEN,
    RpcType.WINDOW_UPDATE: 8,
    RpcType.CLOSE: 4,
    RpcType.REKEY_REQUEST: 0,
}


def rpc_next_tid(next_tid: int, pubkey: bytes) -> bytes:
    return struct.pack(">BQ", RpcType.NEXT_TID, next_tid) + pubkey


def rpc_window_update(conn_id: int, window: int) -> bytes:
    return struct.pack(">BII", RpcType.WINDOW_UPDATE, conn_id, window)


def rpc_close(conn_id: int) -> bytes:
    return struct.pack(">BI", RpcType.CLOSE, conn_id)


def rpc_rekey_request() -> bytes:
    return struct.pack(">B", RpcType.REKEY_REQUEST)


class RpcReader:
    """
    Reassembles RPCs from the connection 0 byte stream.
    """

    def __init__(self):
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list[tuple]:
        self._buffer.extend(data)
        calls = []
        while self._buffer:
            try:
                rpc = RpcType(self._buffer[0])
            except ValueError as err:
                self._buffer.clear()
                raise PacketError(f"Unknown RPC type {err}") from err
            size = 1 + RPC_SIZES[rpc]
            if len(self._buffer) < size:
                break
            body = bytes(self._buffer[1:size])
            del self._buffer[:size]
            if rpc == RpcType.NEXT_TID:
                calls.append((rpc, struct.unpack(">Q", body[:8])[0], body[8:]))
            elif rpc == RpcType.WINDOW_UPDATE:
                calls.append((rpc, *struct.unpack(">II", body)))
            elif rpc == RpcType.CLOSE:
                calls.append((rpc, struct.unpack(">I", body)[0]))
            else:
                calls.append((rpc,))
        return calls


# endregion
# ------------------------------------
