"""
Tunnel state machine, shared by both endpoint roles.

A tunnel owns its keys, the reliable stream and the connections
multiplexed over it. Endpoints feed it authenticated plaintexts and
timer ticks, and collect sealed datagrams with flush().
"""

# Std
from dataclasses import dataclass

# nmclt
from nmclt.transport.types import (
    Endpoint,
    Frame,
    FrameFlags,
    RandomSource,
    RekeyCompleted,
    Role,
    RpcType,
    StreamData,
    StreamFinished,
    TransportEvent,
    TransportParams,
    TunnelEstablished,
)
from nmclt.transport.crypto import TunnelKeys, generate_private_key, public_bytes
from nmclt.transport.packets import (
    RpcReader,
    data_header,
    decode_frame,
    encode_frame,
    init_header,
    init_puzzled_header,
    rpc_close,
    rpc_next_tid,
    rpc_rekey_request,
    rpc_window_update,
)
from nmclt.transport.reliability import Connection, ReliableStream, Segment
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import (
    ConnectionClosedError,
    PacketError,
    RekeyInProgress,
    TransportError,
)

logger = get_logger()

U32 = 0xFFFFFFFF


def random_tid(rng: RandomSource) -> int:
    """
    A random nonzero 64-bit tunnel id.
    """
    while True:
        tid = int.from_bytes(rng(8), "big")
        if tid:
            return tid


@dataclass
class PendingRekey:
    """
    A nextTid announcement. On the client rpc_end is the connection 0
    byte count that must be acknowledged before switching.
    """

    next_tid: int
    pubkey: bytes
    rpc_end: int = 0


@dataclass
class DrainingKeys:
    """
    Keys of the previous generation. They keep opening late packets
    until one RTO has passed and everything sent under them up to
    stream offset `end` is acknowledged.
    """

    tid: int
    keys: TunnelKeys
    end: int
    not_before: int | None


class Tunnel:
    def __init__(
        self,
        tid: int,
        role: Role,
        remote: Endpoint,
        keys: TunnelKeys,
        params: TransportParams,
        now: int,
        rng: RandomSource,
        events: list[TransportEvent],
        init_pub: bytes | None = None,
    ):
        if not tid:
            raise TransportError("Tunnel id 0 is reserved")
        self.tid = tid
        self.role = role
        self.remote = remote
        self.keys = keys
        self.params = params
        self.rng = rng
        self.events = events
        self.stream = ReliableStream(params)
        self.connections: dict[int, Connection] = {}
        self.connection(0)
        self._rpc = RpcReader()
        self._next_conn_id = 1 if role == Role.CLIENT else 2
        self._rr = 0
        self._retransmit: list[Segment] = []

        # Handshake: clients wrap frames in INITs until the server answers
        self.confirmed = role == Role.SERVER
        self.established = role == Role.SERVER
        self.init_pub = init_pub
        self.puzzle: tuple[bytes, int] | None = None
        self.handshake_due = False
        self.handshake_deadline: int | None = None
        self._handshake_tries = 0

        self.ack_pending = False
        self.last_active = now

        # Rekeying
        self.pending_next: PendingRekey | None = None
        self.previous: DrainingKeys | None = None
        self.announced = False
        self.rekey_requested = False
        self.rekeys = 0
        self.forced_rekeys = 0
        self.bytes_since_rekey = 0
        self.last_rekey = now

    def __repr__(self):
        return f"Tunnel(tid={self.tid:#018x}, role={self.role.name}, generation={self.keys.generation})"

    # ------------------------------------
    # region - State
    # ------------------------------------

    @property
    def symmetric_key(self) -> bytes:
        return self.keys.key

    @property
    def rekey_generation(self) -> int:
        return self.keys.generation

    @property
    def send_seq(self) -> int:
        return self.keys.send_pn

    @property
    def recv_seq(self) -> int:
        return self.keys.replay.highest + 1

    @property
    def wraps_in_init(self) -> bool:
        return self.role == Role.CLIENT and not self.confirmed

    def connection(self, conn_id: int) -> Connection:
        """
        Get a connection, creating it on first use.
        """
        conn = self.connections.get(conn_id)
        if conn is None:
            conn = Connection(
                conn_id,
                recv_window=self.params.recv_window,
                peer_window=self.params.recv_window,
            )
            self.connections[conn_id] = conn
        return conn

    def idle(self) -> bool:
        return not self.stream.unacked and not any(c.pending for c in self.connections.values())

    # endregion
    # ------------------------------------
    # region - Application side
    # ------------------------------------

    def open_connection(self) -> int:
        conn_id = self._next_conn_id
        self._next_conn_id += 2
        self.connection(conn_id)
        return conn_id

    def send(self, conn_id: int, data: bytes) -> None:
        if conn_id == 0:
            raise ConnectionClosedError("Connection 0 carries control RPCs only")
        conn = self.connections.get(conn_id)
        if conn is None:
            raise ConnectionClosedError(f"Unknown connection {conn_id}")
        conn.write(data)

    def close(self, conn_id: int) -> None:
        conn = self.connections.get(conn_id)
        if conn is None or conn_id == 0:
            raise ConnectionClosedError(f"Unknown connection {conn_id}")
        conn.closing = True

    def set_window(self, conn_id: int, window: int) -> None:
        """
        Change what we advertise for a connection. A window of 0 stalls the peer.
        """
        self.connection(conn_id).recv_window = window
        self.connections[0].write(rpc_window_update(conn_id, window))

    def request_rekey(self) -> None:
        """
        Server side: ask the client to rekey.
        """
        self.connections[0].write(rpc_rekey_request())

    def rekey_initiate(self, now: int) -> PendingRekey:
        """
        Announce the next tunnel id with a throwaway public key.
        The switch happens once the announcement is acknowledged.
        """
        if self.role != Role.CLIENT:
            raise TransportError("Only clients initiate rekeys")
        if self.pending_next is not None:
            raise RekeyInProgress(f"Rekey to {self.pending_next.next_tid:#x} still pending")
        next_tid = random_tid(self.rng)
        dummy = public_bytes(generate_private_key(self.rng))
        conn0 = self.connections[0]
        conn0.write(rpc_next_tid(next_tid, dummy))
        self.pending_next = PendingRekey(next_tid, dummy, conn0.queued_total)
        self.rekey_requested = False
        logger.debug("Tunnel %#x announced next tid %#x", self.tid, next_tid)
        return self.pending_next

    # endregion
    # ------------------------------------
    # region - Receiving
    # ------------------------------------

    def on_plaintext(self, plaintext: bytes, is_highest: bool, now: int) -> None:
        """
        Process an authenticated packet body. INIT bodies must already
        have their leading public key removed.
        """
        frame = decode_frame(plaintext)
        self.last_active = now

        if not self.confirmed:
            self.confirmed = True
            self.handshake_deadline = None
            self._handshake_tries = 0
            if not self.established:
                self.established = True
                self.events.append(TunnelEstablished(self, self.remote))
                logger.debug("Tunnel %#x established with %s", self.tid, self.remote)

        if is_highest and frame.conn_id in self.connections and frame.conn_id != 0:
            self.connections[frame.conn_id].peer_window = frame.window

        acked, retransmit = self.stream.on_ack(frame.ack, now, pure=not frame.payload)
        for segment in acked:
            conn = self.connections.get(segment.conn_id)
            if conn is not None:
                conn.in_flight -= len(segment.payload)
                conn.acked_total += len(segment.payload)
        self._retransmit.extend(retransmit)

        if frame.payload:
            self.ack_pending = True
            segment = Segment(frame.seq, frame.conn_id, frame.flags, frame.payload)
            for ready in self.stream.on_receive(segment):
                self._deliver(ready)

        self._drain(now)
        self._maybe_switch(now)

    def _deliver(self, segment: Segment) -> None:
        if segment.conn_id == 0 or segment.flags & FrameFlags.RPC:
            try:
                calls = self._rpc.feed(segment.payload)
            except PacketError as err:
                logger.debug("Tunnel %#x: bad RPC stream: %s", self.tid, err)
                return
            for call in calls:
                self._on_rpc(call)
            return

        self.bytes_since_rekey += len(segment.payload)
        conn = self.connection(segment.conn_id)
        if not conn.finished:
            self.events.append(StreamData(self, segment.conn_id, segment.payload))

    def _on_rpc(self, call: tuple) -> None:
        rpc = call[0]
        if rpc == RpcType.NEXT_TID:
            if self.role == Role.SERVER:
                self.pending_next = PendingRekey(call[1], call[2])
                self.announced = True
        elif rpc == RpcType.WINDOW_UPDATE:
            self.connection(call[1]).peer_window = call[2]
        elif rpc == RpcType.CLOSE:
            conn = self.connection(call[1])
            if not conn.finished:
                conn.finished = True
                self.events.append(StreamFinished(self, call[1]))
        elif rpc == RpcType.REKEY_REQUEST:
            if self.role == Role.CLIENT:
                self.rekey_requested = True

    # endregion
    # ------------------------------------
    # region - Rekeying
    # ------------------------------------

    def _maybe_switch(self, now: int) -> None:
        pending = self.pending_next
        if self.role != Role.CLIENT or pending is None:
            return
        if self.connections[0].acked_total < pending.rpc_end:
            return
        self.advance(pending.next_tid, self.keys.successor(), pending.pubkey, now)
        self.handshake_due = True

    def advance(self, new_tid: int, keys: TunnelKeys, init_pub: bytes, now: int) -> None:
        """
        Move to the next key generation under a new tunnel id.
        The old keys drain; a generation still draining is wiped now.
        """
        old_tid = self.tid
        if self.previous is not None:
            self.previous.keys.wipe()
        self.previous = DrainingKeys(old_tid, self.keys, self.stream.next_offset, now + int(self.stream.rto))
        self.keys = keys
        self.tid = new_tid
        self.init_pub = init_pub
        self.pending_next = None
        self.puzzle = None
        self.rekeys += 1
        self.bytes_since_rekey = 0
        self.last_rekey = now
        if self.role == Role.CLIENT:
            self.confirmed = False
        self.events.append(RekeyCompleted(self, old_tid, new_tid, keys.generation))
        logger.debug("Tunnel %#x rekeyed to %#x, generation %s", old_tid, new_tid, keys.generation)

    def open_previous(self, ciphertext: bytes, aad: bytes) -> tuple[bytes, bool] | None:
        """
        Open a late packet sent under the draining keys. Such packets
        never count as the highest, so they cannot move the endpoint.
        """
        if self.previous is None:
            return None
        opened = self.previous.keys.open(ciphertext, aad)
        return None if opened is None else (opened[0], False)

    def _drain(self, now: int) -> None:
        previous = self.previous
        if previous is None:
            return
        if previous.not_before is not None:
            if now < previous.not_before:
                return
            previous.not_before = None
        if any(offset < previous.end for offset in self.stream.unacked):
            return
        previous.keys.wipe()
        self.previous = None
        logger.debug("Tunnel %#x: retired keys of %#x", self.tid, previous.tid)

    def _rekey_due(self, now: int) -> bool:
        if self.role != Role.CLIENT or self.pending_next is not None or not self.confirmed:
            return False
        if self.rekey_requested:
            return True
        if self.bytes_since_rekey >= self.params.rekey_bytes:
            return True
        return self.bytes_since_rekey > 0 and now - self.last_rekey >= self.params.rekey_interval_ms

    # endregion
    # ------------------------------------
    # region - Sending
    # ------------------------------------

    def resend_all(self, now: int) -> None:
        """
        Queue every unacknowledged segment, e.g. after solving a puzzle.
        """
        self._retransmit = list(self.stream.unacked.values())
        if not self._retransmit:
            self.handshake_due = True

    def _seal(self, frame: Frame) -> bytes:
        plaintext = encode_frame(frame)
        if not self.wraps_in_init:
            header = data_header(self.tid)
            return header + self.keys.seal(plaintext, header)
        if self.puzzle is not None:
            header = init_puzzled_header(self.tid, self.puzzle[0], self.puzzle[1], self.init_pub)
        else:
            header = init_header(self.tid, self.init_pub)
        return header + self.keys.seal(self.init_pub + plaintext, header)

    def _seal_segment(self, segment: Segment) -> bytes:
        conn = self.connection(segment.conn_id)
        frame = Frame(
            segment.offset & U32,
            self.stream.recv_next & U32,
            conn.recv_window,
            segment.conn_id,
            segment.flags,
            segment.payload,
        )
        return self._seal(frame)

    def _send_order(self) -> list[Connection]:
        data = [c for c in self.connections.values() if c.conn_id != 0 and c.pending]
        if data:
            self._rr = (self._rr + 1) % len(data)
            data = data[self._rr :] + data[: self._rr]
        return [self.connections[0]] + data

    def _queue_closes(self) -> None:
        for conn in list(self.connections.values()):
            if conn.closing and not conn.closed and not conn.pending:
                conn.closed = True
                self.connections[0].write(rpc_close(conn.conn_id))

    def flush(self, now: int) -> list[bytes]:
        """
        Seal everything that may go out now: retransmissions first,
        then new data within the congestion and flow windows, then a
        bare ack or handshake packet when nothing else carried it.
        """
        if self._rekey_due(now):
            if self.rekey_requested:
                self.forced_rekeys += 1
            self.rekey_initiate(now)

        out = []
        seen = set()
        for segment in self._retransmit:
            if segment.offset in seen or segment.offset not in self.stream.unacked:
                continue
            seen.add(segment.offset)
            self.stream.mark_retransmitted(segment, now)
            out.append(self._seal_segment(segment))
        self._retransmit = []

        self._queue_closes()
        mss = self.params.mss
        while True:
            progress = False
            for conn in self._send_order():
                room = self.stream.window_room()
                size = min(conn.sendable(), mss, room)
                if size <= 0:
                    continue
                payload = bytes(conn.pending[:size])
                del conn.pending[:size]
                flags = FrameFlags.RPC if conn.conn_id == 0 else FrameFlags.NONE
                if conn.closing and not conn.pending and conn.conn_id:
                    flags |= FrameFlags.FIN
                segment = self.stream.new_segment(conn.conn_id, flags, payload, now)
                conn.in_flight += size
                if conn.conn_id:
                    self.bytes_since_rekey += size
                out.append(self._seal_segment(segment))
                progress = True
            self._queue_closes()
            if not progress:
                break

        if not out and (self.ack_pending or self.handshake_due):
            frame = Frame(
                self.stream.next_offset & U32,
                self.stream.recv_next & U32,
                self.connections[0].recv_window,
                0,
            )
            out.append(self._seal(frame))

        if out:
            self.ack_pending = False
            self.handshake_due = False
            if self.wraps_in_init:
                backoff = min(self.stream.rto * 2**self._handshake_tries, self.params.rto_max)
                self.handshake_deadline = now + int(backoff)
        return out

    # endregion
    # ------------------------------------
    # region - Timers
    # ------------------------------------

    def on_timer(self, now: int) -> None:
        self._retransmit.extend(self.stream.on_timer(now))
        self._drain(now)
        if (
            self.wraps_in_init
            and self.handshake_deadline is not None
            and now >= self.handshake_deadline
            and not self.stream.unacked
        ):
            self._handshake_tries += 1
            self.handshake_deadline = None
            self.handshake_due = True

    def next_timer(self) -> int | None:
        deadlines = [self.stream.rto_deadline]
        if self.previous is not None:
            deadlines.append(self.previous.not_before)
        if self.wraps_in_init and not self.stream.unacked:
            deadlines.append(self.handshake_deadline)
        if (
            self.role == Role.CLIENT
            and self.confirmed
            and self.pending_next is None
            and self.bytes_since_rekey > 0
        ):
            deadlines.append(self.last_rekey + self.params.rekey_interval_ms)
        deadlines = [t for t in deadlines if t is not None]
        return min(deadlines) if deadlines else None

    # endregion
    # ------------------------------------
