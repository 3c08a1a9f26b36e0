"""
Reliable delivery over one tunnel.

Every frame payload occupies a range of tunnel byte offsets, whatever
its connection. Receivers deliver in tunnel order, which keeps every
connection in order too, and acknowledge cumulatively. Senders keep
unacknowledged segments for retransmission and run AIMD congestion
control with slow start, fast retransmit and an RFC 6298 timer.
"""

# Std
from collections import OrderedDict
from dataclasses import dataclass, field

# nmclt
from nmclt.transport import defaults as d
from nmclt.transport.types import FrameFlags, TransportParams
from nmclt.util.exceptions import ConnectionClosedError


@dataclass
class Segment:
    offset: int
    conn_id: int
    flags: FrameFlags
    payload: bytes
    sent_at: int = 0
    retransmitted: bool = False

    @property
    def end(self) -> int:
        return self.offset + len(self.payload)


@dataclass
class Connection:
    """
    One multiplexed byte stream. Connection 0 carries control RPCs.

    recv_window is what we advertise, peer_window what the peer does.
    in_flight counts our unacknowledged bytes on this connection.
    """

    conn_id: int
    recv_window: int = d.RECV_WINDOW
    peer_window: int = d.RECV_WINDOW
    pending: bytearray = field(default_factory=bytearray)
    in_flight: int = 0
    queued_total: int = 0
    acked_total: int = 0
    closing: bool = False
    closed: bool = False
    finished: bool = False

    def write(self, data: bytes) -> None:
        if self.closing or self.closed:
            raise ConnectionClosedError(f"Connection {self.conn_id} is closed")
        self.pending.extend(data)
        self.queued_total += len(data)

    def sendable(self) -> int:
        """
        Bytes we may put on the wire now under the peer's window.
        Connection 0 is exempt from flow control.
        """
        if self.conn_id == 0:
            return len(self.pending)
        return max(0, min(len(self.pending), self.peer_window - self.in_flight))


class ReliableStream:
    """
    Sender and receiver state of one tunnel direction pair.
    Times are in milliseconds.
    """

    def __init__(self, params: TransportParams | None = None):
        params = params or TransportParams()
        self.params = params

        # Sender
        self.next_offset = 0
        self.snd_una = 0
        self.unacked: OrderedDict[int, Segment] = OrderedDict()
        self.cwnd = params.initial_cwnd
        self.ssthresh = float("inf")
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.rto = float(params.rto_initial)
        self.rto_deadline: int | None = None
        self.dupacks = 0
        self.recover: int | None = None
        self.retransmits = 0

        # Receiver
        self.recv_next = 0
        self._out_of_order: dict[int, Segment] = {}

    # ------------------------------------
    # region - Sender
    # ------------------------------------

    @property
    def in_flight(self) -> int:
        return self.next_offset - self.snd_una

    def window_room(self) -> int:
        return max(0, int(self.cwnd) - self.in_flight)

    def new_segment(self, conn_id: int, flags: FrameFlags, payload: bytes, now: int) -> Segment:
        segment = Segment(self.next_offset, conn_id, flags, bytes(payload), sent_at=now)
        self.next_offset += len(payload)
        self.unacked[segment.offset] = segment
        if self.rto_deadline is None:
            self.rto_deadline = now + int(self.rto)
        return segment

    def mark_retransmitted(self, segment: Segment, now: int) -> None:
        segment.retransmitted = True
        segment.sent_at = now
        self.retransmits += 1
        if self.rto_deadline is None:
            self.rto_deadline = now + int(self.rto)

    def on_ack(self, ack: int, now: int, pure: bool) -> tuple[list[Segment], list[Segment]]:
        """
        Process a cumulative ack.
        Returns (newly acked segments, segments to retransmit now).
        """
        if ack > self.snd_una and ack <= self.next_offset:
            acked = []
            while self.unacked:
                offset, segment = next(iter(self.unacked.items()))
                if segment.end > ack:
                    break
                del self.unacked[offset]
                acked.append(segment)
            newly = ack - self.snd_una
            self.snd_una = ack
            self.dupacks = 0

            sample = [s for s in acked if not s.retransmitted]
            if sample:
                self._rtt_sample(now - sample[-1].sent_at)

            retransmit = []
            if self.recover is not None and ack < self.recover and self.unacked:
                # Partial ack during recovery: the next hole is lost too
                retransmit.append(self._first_unacked())
            else:
                if self.recover is not None:
                    self.recover = None
                self._grow(newly)

            self.rto_deadline = now + int(self.rto) if self.unacked else None
            return acked, retransmit

        if ack == self.snd_una and pure and self.unacked:
            self.dupacks += 1
            if self.dupacks == d.DUPACK_THRESHOLD and self.recover is None:
                self._on_loss()
                self.recover = self.next_offset
                return [], [self._first_unacked()]
        return [], []

    def on_timer(self, now: int) -> list[Segment]:
        """
        Retransmission timeout. Returns the segment to resend.
        """
        if self.rto_deadline is None or now < self.rto_deadline:
            return []
        if not self.unacked:
            self.rto_deadline = None
            return []
        self._on_loss()
        self.recover = self.next_offset
        self.rto = min(self.rto * 2, self.params.rto_max)
        self.rto_deadline = now + int(self.rto)
        return [self._first_unacked()]

    def _first_unacked(self) -> Segment:
        return next(iter(self.unacked.values()))

    def _on_loss(self) -> None:
        self.ssthresh = max(self.in_flight / 2, 2 * self.params.mss)
        self.cwnd = max(self.cwnd / 2, self.params.mss)

    def _grow(self, acked_bytes: int) -> None:
        mss = self.params.mss
        if self.cwnd < self.ssthresh:
            self.cwnd += min(acked_bytes, mss)
        else:
            self.cwnd += mss * mss / self.cwnd

    def _rtt_sample(self, rtt: int) -> None:
        rtt = max(rtt, 0)
        if self.srtt is None:
            self.srtt = float(rtt)
            self.rttvar = rtt / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - rtt)
            self.srtt = 0.875 * self.srtt + 0.125 * rtt
        self.rto = min(max(self.params.rto_min, self.srtt + 4 * self.rttvar), self.params.rto_max)

    # endregion
    # ------------------------------------
    # region - Receiver
    # ------------------------------------

    def on_receive(self, segment: Segment) -> list[Segment]:
        """
        Accept a received segment. Returns segments now deliverable in order.
        """
        if not segment.payload or segment.end <= self.recv_next:
            return []
        if segment.offset > self.recv_next:
            self._out_of_order.setdefault(segment.offset, segment)
            return []
        if segment.offset < self.recv_next:
            # Overlap with delivered bytes; keep the new tail only
            cut = self.recv_next - segment.offset
            segment = Segment(self.recv_next, segment.conn_id, segment.flags, segment.payload[cut:])

        delivered = [segment]
        self.recv_next = segment.end
        while self.recv_next in self._out_of_order:
            queued = self._out_of_order.pop(self.recv_next)
            delivered.append(queued)
            self.recv_next = queued.end
        for offset in [o for o in self._out_of_order if o < self.recv_next]:
            del self._out_of_order[offset]
        return delivered

    # endregion
    # ------------------------------------
