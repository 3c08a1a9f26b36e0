"""
Client and server endpoints.

Both are sans-IO: they take datagrams with their source address and a
millisecond clock, and hand back datagrams to send plus application
events. The UDP driver and the network simulator feed them the same way.
"""

# Std
import threading
from collections import OrderedDict
from typing import TYPE_CHECKING, Iterable

# 3rd party
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

# nmclt
from nmclt.transport import defaults as d
from nmclt.transport.types import (
    AddressChanged,
    Endpoint,
    EphemeralRotated,
    PacketType,
    Puzzle,
    PuzzleIssued,
    PuzzleSolved,
    RandomSource,
    Role,
    TransportEvent,
    TransportParams,
    TunnelEstablished,
)
from nmclt.transport.crypto import (
    TunnelKeys,
    agree,
    derive_tunnel_key,
    generate_private_key,
    load_public_key,
    os_random,
    public_bytes,
)
from nmclt.transport.packets import Packet, decode_packet, encode_puzzle
from nmclt.transport.puzzle import puzzle_nonce, puzzle_valid, solve_puzzle
from nmclt.transport.tunnel import Tunnel, random_tid
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import BadKey, PacketError, PuzzleTooHard, TransportError

if TYPE_CHECKING:
    from nmclt.chaincore.keys import KeyPair
    from nmclt.nameregistry.types import MinimaLTSection

logger = get_logger()

RETIRED_TIDS = 4096


class _Endpoint:
    role: Role

    def __init__(self, params: TransportParams | None, rng: RandomSource):
        self.params = params or TransportParams()
        self.rng = rng
        self._events: list[TransportEvent] = []
        self._outbox: list[tuple[bytes, Endpoint]] = []
        self._lock = threading.RLock()

    def _tunnels(self) -> Iterable[Tunnel]:
        raise NotImplementedError

    def _keys(self, key: bytes) -> TunnelKeys:
        return TunnelKeys(
            key,
            self.role,
            lookahead=self.params.lookahead,
            replay_window=self.params.replay_window,
        )

    # ------------------------------------
    # region - Application API
    # ------------------------------------

    def open_connection(self, tunnel: Tunnel) -> int:
        with self._lock:
            return tunnel.open_connection()

    def send(self, tunnel: Tunnel, conn_id: int, data: bytes) -> None:
        with self._lock:
            tunnel.send(conn_id, data)

    def close(self, tunnel: Tunnel, conn_id: int) -> None:
        with self._lock:
            tunnel.close(conn_id)

    def set_window(self, tunnel: Tunnel, conn_id: int, window: int) -> None:
        with self._lock:
            tunnel.set_window(conn_id, window)

    def drain_events(self) -> list[TransportEvent]:
        with self._lock:
            events = list(self._events)
            self._events.clear()
            return events

    # endregion
    # ------------------------------------
    # region - Driver API
    # ------------------------------------

    def datagrams_to_send(self, now: int) -> list[tuple[bytes, Endpoint]]:
        with self._lock:
            out, self._outbox = self._outbox, []
            for tunnel in list(self._tunnels()):
                out.extend((datagram, tunnel.remote) for datagram in tunnel.flush(now))
            return out

    def handle_timer(self, now: int) -> None:
        with self._lock:
            for tunnel in list(self._tunnels()):
                tunnel.on_timer(now)

    def next_timer(self) -> int | None:
        with self._lock:
            deadlines = [t.next_timer() for t in self._tunnels()]
            deadlines = [t for t in deadlines if t is not None]
            return min(deadlines) if deadlines else None

    def receive(self, datagram: bytes, addr: Endpoint, now: int) -> None:
        with self._lock:
            try:
                packet = decode_packet(datagram)
            except PacketError as err:
                logger.debug("Dropped datagram from %s: %s", addr, err)
                return
            self._on_packet(packet, addr, now)

    def _on_packet(self, packet: Packet, addr: Endpoint, now: int) -> None:
        raise NotImplementedError

    def _process(self, tunnel: Tunnel, plaintext: bytes, is_highest: bool, now: int) -> bool:
        try:
            tunnel.on_plaintext(plaintext, is_highest, now)
        except PacketError as err:
            logger.debug("Tunnel %#x: dropped frame: %s", tunnel.tid, err)
            return False
        return True

    # endregion
    # ------------------------------------


class MltClient(_Endpoint):
    """
    Opens tunnels to servers whose ephemeral key it learned from a record.
    """

    role = Role.CLIENT

    def __init__(self, params: TransportParams | None = None, rng: RandomSource = os_random):
        super().__init__(params, rng)
        self.tunnels: list[Tunnel] = []

    def _tunnels(self) -> Iterable[Tunnel]:
        return self.tunnels

    def _find(self, tid: int) -> Tunnel | None:
        for tunnel in self.tunnels:
            if tunnel.tid == tid or (tunnel.previous is not None and tunnel.previous.tid == tid):
                return tunnel
        return None

    def connect(
        self,
        server: "MinimaLTSection | bytes",
        endpoint: Endpoint | None = None,
        first_data: bytes = b"",
        now: int = 0,
    ) -> Tunnel:
        """
        Open a tunnel in zero round trips. first_data goes out on
        connection 1 inside the INIT packet.

        server is the minimaLT section of the host's record, or
        its raw ephemeral public key.
        """
        from nmclt.nameregistry.types import MinimaLTSection

        if isinstance(server, MinimaLTSection):
            server_key = server.eph_key_bytes
            if endpoint is None and server.ip is not None:
                endpoint = (server.ip, server.port)
        else:
            server_key = bytes(server)
        load_public_key(server_key)
        if endpoint is None:
            raise TransportError("Server endpoint unknown: record has no ip and none was given")

        with self._lock:
            tid = random_tid(self.rng)
            private_key = generate_private_key(self.rng)
            init_pub = public_bytes(private_key)
            key = derive_tunnel_key(agree(private_key, server_key), tid)
            del private_key

            tunnel = Tunnel(
                tid,
                Role.CLIENT,
                endpoint,
                self._keys(key),
                self.params,
                now,
                self.rng,
                self._events,
                init_pub=init_pub,
            )
            conn_id = tunnel.open_connection()
            if first_data:
                tunnel.send(conn_id, first_data)
            tunnel.handshake_due = True
            self.tunnels.append(tunnel)
            logger.debug("Connecting tunnel %#x to %s", tid, endpoint)
            return tunnel

    def rekey_initiate(self, tunnel: Tunnel, now: int) -> None:
        with self._lock:
            tunnel.rekey_initiate(now)

    def _on_packet(self, packet: Packet, addr: Endpoint, now: int) -> None:
        tunnel = self._find(packet.tid)
        if tunnel is None:
            logger.debug("Dropped packet for unknown tunnel %#x", packet.tid)
            return

        if packet.type == PacketType.PUZZLE:
            self._on_puzzle(tunnel, packet, now)
            return
        if packet.type != PacketType.DATA:
            logger.debug("Dropped %s from %s", packet.type.name, addr)
            return

        if packet.tid == tunnel.tid:
            opened = tunnel.keys.open(packet.ciphertext, packet.header)
        else:
            opened = tunnel.open_previous(packet.ciphertext, packet.header)
        if opened is None:
            logger.debug("Tunnel %#x: dropped unauthenticated packet from %s", tunnel.tid, addr)
            return
        plaintext, is_highest = opened
        if is_highest and addr != tunnel.remote:
            old, tunnel.remote = tunnel.remote, addr
            self._events.append(AddressChanged(tunnel, old, addr))
            logger.debug("Tunnel %#x: server moved %s -> %s", tunnel.tid, old, addr)
            tunnel.rekey_requested = True
        self._process(tunnel, plaintext, is_highest, now)

    def _on_puzzle(self, tunnel: Tunnel, packet: Packet, now: int) -> None:
        if not tunnel.wraps_in_init:
            return
        puzzle = Puzzle(packet.puzzle_nonce, packet.difficulty)
        try:
            solution = solve_puzzle(puzzle, tunnel.init_pub)
        except PuzzleTooHard as err:
            logger.warning("Tunnel %#x: %s", tunnel.tid, err)
            return
        tunnel.puzzle = (puzzle.puzzle_nonce, solution)
        tunnel.resend_all(now)
        self._events.append(PuzzleSolved(tunnel, puzzle.difficulty, solution + 1))
        logger.debug(
            "Tunnel %#x: solved difficulty %s puzzle in %s attempts",
            tunnel.tid,
            puzzle.difficulty,
            solution + 1,
        )


class MltServer(_Endpoint):
    """
    Accepts tunnels encrypted to its published ephemeral key.

    Under load (load_flag, or max_tunnels reached) plain INITs get a
    stateless puzzle and allocate nothing.
    """

    role = Role.SERVER

    def __init__(
        self,
        params: TransportParams | None = None,
        eph_key: X25519PrivateKey | None = None,
        rng: RandomSource = os_random,
        puzzle_secret: bytes | None = None,
        load_flag: bool = False,
        id_key: X25519PrivateKey | None = None,
        publisher: "tuple[str, KeyPair] | None" = None,
        auto_rotate: bool = False,
        now: int = 0,
    ):
        super().__init__(params, rng)
        self._eph = eph_key or generate_private_key(rng)
        self._previous_eph: X25519PrivateKey | None = None
        self._id_key = id_key or generate_private_key(rng)
        self._secret = puzzle_secret or rng(32)
        self._rotate_at = now + self.params.eph_epoch_ms
        self.load_flag = load_flag
        self.publisher = publisher
        self.auto_rotate = auto_rotate
        self.published: list = []
        self.tunnels: dict[int, Tunnel] = {}
        self._pending: dict[int, Tunnel] = {}
        self._draining: dict[int, Tunnel] = {}
        self._retired: OrderedDict[int, None] = OrderedDict()
        self.puzzles_issued = 0

    def _tunnels(self) -> Iterable[Tunnel]:
        return self.tunnels.values()

    @property
    def eph_public(self) -> bytes:
        return public_bytes(self._eph)

    @property
    def id_public(self) -> bytes:
        return public_bytes(self._id_key)

    @property
    def under_load(self) -> bool:
        return self.load_flag or len(self.tunnels) >= self.params.max_tunnels

    def record_section(self, ip: str | None, port: int = d.PORT) -> dict:
        """
        The minimaLT section to publish in the host's record.
        """
        section = {"port": port, "id_key": self.id_public.hex(), "eph_key": self.eph_public.hex()}
        if ip is not None:
            section["ip"] = ip
        return section

    # ------------------------------------
    # region - Ephemeral key rotation
    # ------------------------------------

    def rotate_ephemeral(self, now: int):
        """
        Start a new ephemeral key epoch. The previous key keeps
        decrypting INITs for one more epoch.

        Returns the signed EphKeyUpdate when a publisher (name, owner key)
        is set, else None.
        """
        with self._lock:
            self._previous_eph = self._eph
            self._eph = generate_private_key(self.rng)
            self._rotate_at = now + self.params.eph_epoch_ms
            public = self.eph_public
            self._events.append(EphemeralRotated(None, public))
            logger.info("Rotated ephemeral key to %s", public.hex())
            if self.publisher is None:
                return None

            from nmclt.nameregistry.ephkey import EphKeyUpdate

            name, owner = self.publisher
            update = EphKeyUpdate.create(name, public, owner)
            self.published.append(update)
            return update

    def handle_timer(self, now: int) -> None:
        if self.auto_rotate and now >= self._rotate_at:
            self.rotate_ephemeral(now)
        super().handle_timer(now)
        with self._lock:
            self._reap(now)

    def next_timer(self) -> int | None:
        deadline = super().next_timer()
        with self._lock:
            deadlines = [t.last_active + self.params.tunnel_idle_ms for t in self.tunnels.values() if t.idle()]
        if self.auto_rotate:
            deadlines.append(self._rotate_at)
        if deadline is not None:
            deadlines.append(deadline)
        return min(deadlines) if deadlines else None

    # endregion
    # ------------------------------------
    # region - Packets
    # ------------------------------------

    def _on_packet(self, packet: Packet, addr: Endpoint, now: int) -> None:
        if packet.type == PacketType.DATA:
            tunnel = self.tunnels.get(packet.tid)
            if tunnel is not None:
                opened = tunnel.keys.open(packet.ciphertext, packet.header)
            elif packet.tid in self._draining:
                tunnel = self._draining[packet.tid]
                opened = tunnel.open_previous(packet.ciphertext, packet.header)
            else:
                logger.debug("Dropped DATA for unknown tunnel %#x", packet.tid)
                return
            if opened is None:
                logger.debug("Tunnel %#x: dropped unauthenticated packet from %s", tunnel.tid, addr)
                return
            self._accept(tunnel, opened[0], opened[1], addr, now)
        elif packet.is_init:
            self._on_init(packet, addr, now)
        else:
            logger.debug("Dropped %s from %s", packet.type.name, addr)

    def _on_init(self, packet: Packet, addr: Endpoint, now: int) -> None:
        tid = packet.tid

        tunnel = self.tunnels.get(tid)
        if tunnel is not None:
            if packet.eph_pub != tunnel.init_pub:
                return self._drop(tid, addr, "key differs from the tunnel's INIT key")
            opened = tunnel.keys.open(packet.ciphertext, packet.header)
            if opened is None:
                return self._drop(tid, addr, "INIT does not authenticate")
            return self._accept_init(tunnel, packet, opened, addr, now)

        if tid in self._retired or tid in self._draining:
            return self._drop(tid, addr, "tunnel id retired")

        owner = self._pending.get(tid)
        if owner is not None and owner.pending_next.pubkey == packet.eph_pub:
            keys = owner.keys.successor()
            opened = keys.open(packet.ciphertext, packet.header)
            if opened is not None and opened[0][: d.KEY_LEN] == packet.eph_pub:
                self._switch(owner, tid, keys, packet.eph_pub, now)
                return self._accept_init(owner, packet, opened, addr, now)
            keys.wipe()

        self._reap(now)
        if packet.type == PacketType.INIT and self.under_load:
            self._issue_puzzle(packet, addr)
            return
        if packet.type == PacketType.INIT_PUZZLED and not self._puzzle_ok(packet):
            return self._drop(tid, addr, "bad puzzle solution")

        fresh = self._open_fresh(packet)
        if fresh is None:
            return self._drop(tid, addr, "INIT does not authenticate")
        keys, opened = fresh
        if opened[0][: d.KEY_LEN] != packet.eph_pub:
            keys.wipe()
            return self._drop(tid, addr, "inner key mismatch")

        tunnel = Tunnel(
            tid,
            Role.SERVER,
            addr,
            keys,
            self.params,
            now,
            self.rng,
            self._events,
            init_pub=packet.eph_pub,
        )
        self.tunnels[tid] = tunnel
        self._events.append(TunnelEstablished(tunnel, addr))
        logger.debug("Accepted tunnel %#x from %s", tid, addr)
        self._accept_init(tunnel, packet, opened, addr, now)

    def _open_fresh(self, packet: Packet) -> tuple[TunnelKeys, tuple[bytes, bool]] | None:
        for private_key in (self._eph, self._previous_eph):
            if private_key is None:
                continue
            try:
                shared = agree(private_key, packet.eph_pub)
            except BadKey:
                return None
            keys = self._keys(derive_tunnel_key(shared, packet.tid))
            opened = keys.open(packet.ciphertext, packet.header)
            if opened is not None:
                return keys, opened
            keys.wipe()
        return None

    def _puzzle_ok(self, packet: Packet) -> bool:
        expected = puzzle_nonce(self._secret, packet.tid, packet.eph_pub)
        if packet.puzzle_nonce != expected:
            return False
        puzzle = Puzzle(expected, self.params.puzzle_difficulty)
        return puzzle_valid(puzzle, packet.solution, packet.eph_pub)

    def _issue_puzzle(self, packet: Packet, addr: Endpoint) -> None:
        nonce = puzzle_nonce(self._secret, packet.tid, packet.eph_pub)
        difficulty = self.params.puzzle_difficulty
        self._outbox.append((encode_puzzle(packet.tid, nonce, difficulty), addr))
        self.puzzles_issued += 1
        self._events.append(PuzzleIssued(packet.tid, difficulty))
        logger.debug("Under load: puzzle for tunnel %#x from %s", packet.tid, addr)

    def _switch(self, tunnel: Tunnel, new_tid: int, keys: TunnelKeys, init_pub: bytes, now: int) -> None:
        old_tid = tunnel.tid
        del self._pending[new_tid]
        tunnel.advance(new_tid, keys, init_pub, now)
        del self.tunnels[old_tid]
        self.tunnels[new_tid] = tunnel
        for tid in [t for t, owner in self._draining.items() if owner is tunnel]:
            self._retire(tid)
        self._draining[old_tid] = tunnel

    def _retire(self, tid: int) -> None:
        self._draining.pop(tid, None)
        self._retired[tid] = None
        while len(self._retired) > RETIRED_TIDS:
            self._retired.popitem(last=False)

    def _reap(self, now: int) -> None:
        """
        Retire old tids whose keys finished draining and drop tunnels
        idle for longer than tunnel_idle_ms.
        """
        for tid, tunnel in list(self._draining.items()):
            if tunnel.previous is None or tunnel.previous.tid != tid:
                self._retire(tid)

        for tid, tunnel in list(self.tunnels.items()):
            if not tunnel.idle() or now - tunnel.last_active < self.params.tunnel_idle_ms:
                continue
            del self.tunnels[tid]
            for pending in [t for t, owner in self._pending.items() if owner is tunnel]:
                del self._pending[pending]
            for old in [t for t, owner in self._draining.items() if owner is tunnel]:
                self._retire(old)
            if tunnel.previous is not None:
                tunnel.previous.keys.wipe()
                tunnel.previous = None
            tunnel.keys.wipe()
            self._retire(tid)
            logger.debug("Reaped tunnel %#x idle since %s ms", tid, tunnel.last_active)

    def _accept_init(self, tunnel, packet, opened, addr, now) -> None:
        plaintext, is_highest = opened
        if plaintext[: d.KEY_LEN] != packet.eph_pub:
            return self._drop(packet.tid, addr, "inner key mismatch")
        if self._accept(tunnel, plaintext[d.KEY_LEN :], is_highest, addr, now):
            tunnel.ack_pending = True

    def _accept(self, tunnel: Tunnel, plaintext: bytes, is_highest: bool, addr: Endpoint, now: int) -> bool:
        if is_highest and addr != tunnel.remote:
            old, tunnel.remote = tunnel.remote, addr
            self._events.append(AddressChanged(tunnel, old, addr))
            tunnel.request_rekey()
            logger.debug("Tunnel %#x: client moved %s -> %s", tunnel.tid, old, addr)
        if not self._process(tunnel, plaintext, is_highest, now):
            return False
        if tunnel.announced:
            tunnel.announced = False
            for tid in [t for t, owner in self._pending.items() if owner is tunnel]:
                del self._pending[tid]
            self._pending[tunnel.pending_next.next_tid] = tunnel
        return True

    def _drop(self, tid: int, addr: Endpoint, why: str) -> None:
        logger.debug("Dropped INIT %#x from %s: %s", tid, addr, why)

    # endregion
    # ------------------------------------
