"""
Tests for the encrypted transport, driven through an in-memory link.
"""

# Std
import random

# 3rd party
import pytest

# nmclt
from nmclt.transport import (
    AddressChanged,
    DocumentServer,
    EphemeralRotated,
    MltClient,
    MltServer,
    PacketType,
    Puzzle,
    PuzzleIssued,
    PuzzleSolved,
    RekeyCompleted,
    ResponseCollector,
    Role,
    StreamData,
    TransportParams,
    TunnelEstablished,
    TunnelKeys,
    decode_packet,
    derive_tunnel_key,
    fetch_request,
    generate_private_key,
    load_host_keys,
    next_key,
    public_bytes,
    puzzle_valid,
    save_host_keys,
    solve_puzzle,
)
from nmclt.transport.driver import UdpDriver, now_ms
from nmclt.transport.packets import PUBKEY_OFFSET, INIT_CIPHERTEXT_OFFSET, init_header
from nmclt.util.general import sha256
from nmclt.util.exceptions import BadKey, PacketError, PuzzleTooHard, RekeyInProgress

CLIENT = ("10.0.0.1", 40000)
MOVED = ("10.0.0.7", 40001)
SERVER = ("10.0.0.2", 4433)
INDEX = b"<html>index</html>\n"


def _rng(seed: int):
    return random.Random(seed).randbytes


class Link:
    """
    Lossless path between one client and one server.
    Datagrams cross in the step they are sent.
    """

    def __init__(self, client: MltClient, server: MltServer, app: DocumentServer | None = None):
        self.client = client
        self.server = server
        self.app = app
        self.client_addr = CLIENT
        self.now = 0
        self.collector = ResponseCollector()
        self.client_events = []
        self.server_events = []
        self.sent_by_client: list[bytes] = []
        self.sent_by_server: list[bytes] = []

    def step(self, ms: int = 10) -> None:
        for datagram, addr in self.client.datagrams_to_send(self.now):
            assert addr == SERVER
            self.sent_by_client.append(datagram)
            self.server.receive(datagram, self.client_addr, self.now)
        events = self.server.drain_events()
        self.server_events += events
        if self.app is not None:
            self.app.handle(self.server, events)

        for datagram, addr in self.server.datagrams_to_send(self.now):
            self.sent_by_server.append(datagram)
            if addr == self.client_addr:
                self.client.receive(datagram, SERVER, self.now)
        events = self.client.drain_events()
        self.client_events += events
        self.collector.handle(events)

        self.now += ms
        self.client.handle_timer(self.now)
        self.server.handle_timer(self.now)

    def run(self, steps: int = 40) -> None:
        for _ in range(steps):
            self.step()


@pytest.fixture
def client() -> MltClient:
    return MltClient(rng=_rng(1))


@pytest.fixture
def server() -> MltServer:
    return MltServer(rng=_rng(2))


@pytest.fixture
def link(client, server) -> Link:
    return Link(client, server, DocumentServer({"/": INDEX}))


# ------------------------------------
# region - Keys
# ------------------------------------


def test_key_schedule():
    shared = bytes(range(32))
    assert derive_tunnel_key(shared, 5) == sha256(shared + (5).to_bytes(8, "big") + b"mlt-v1")
    assert next_key(shared) == sha256(shared)
    assert derive_tunnel_key(shared, 5) != derive_tunnel_key(shared, 6)


def test_host_key_file(tmp_path):
    eph, id_key = generate_private_key(_rng(3)), generate_private_key(_rng(4))
    path = save_host_keys(tmp_path / "host.keys", eph, id_key)
    loaded_eph, loaded_id = load_host_keys(path)
    assert public_bytes(loaded_eph) == public_bytes(eph)
    assert public_bytes(loaded_id) == public_bytes(id_key)


def test_short_server_key_refused(client):
    with pytest.raises(BadKey):
        client.connect(b"\x01" * 31, SERVER, fetch_request("/"))


def test_record_section_lists_public_keys(server):
    section = server.record_section("10.0.0.2", 4433)
    assert section == {
        "ip": "10.0.0.2",
        "port": 4433,
        "id_key": server.id_public.hex(),
        "eph_key": server.eph_public.hex(),
    }


# endregion
# ------------------------------------
# region - Tunnel establishment
# ------------------------------------


def test_first_packet_carries_request(client, server):
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    ((datagram, addr),) = client.datagrams_to_send(0)
    assert addr == SERVER

    packet = decode_packet(datagram)
    assert packet.type == PacketType.INIT
    assert packet.tid == tunnel.tid
    assert datagram[PUBKEY_OFFSET:INIT_CIPHERTEXT_OFFSET] == tunnel.init_pub
    assert b"GET /" not in datagram

    server.receive(datagram, CLIENT, 10)
    events = server.drain_events()
    assert isinstance(events[0], TunnelEstablished)
    data = [e for e in events if isinstance(e, StreamData)]
    assert data[0].conn_id == 1
    assert data[0].data == b"GET /\n"
    assert server.tunnels[tunnel.tid].symmetric_key == tunnel.symmetric_key


def test_fetch_in_one_round_trip(link, client, server):
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    link.step()
    assert link.collector.body(tunnel, 1) == INDEX
    link.run()
    assert link.collector.done(tunnel, 1)
    assert any(isinstance(e, TunnelEstablished) for e in link.client_events)


def test_connect_with_record_section(link, client, server):
    from nmclt.nameregistry.types import MinimaLTSection

    section = MinimaLTSection.model_validate(server.record_section(SERVER[0], SERVER[1]))
    tunnel = client.connect(section, first_data=fetch_request("/"))
    assert tunnel.remote == SERVER
    link.run()
    assert link.collector.body(tunnel, 1) == INDEX


def test_missing_document(link, client, server):
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/nope"), now=0)
    link.run()
    assert link.collector.body(tunnel, 1) == b"404 /nope\n"


def test_init_for_other_key_ignored(client, server):
    stranger = MltServer(rng=_rng(9))
    client.connect(stranger.eph_public, SERVER, fetch_request("/"), now=0)
    for datagram, _ in client.datagrams_to_send(0):
        server.receive(datagram, CLIENT, 10)
    assert server.tunnels == {}
    assert server.drain_events() == []


def test_tampered_init_ignored(client, server):
    client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    ((datagram, _),) = client.datagrams_to_send(0)
    tampered = bytearray(datagram)
    tampered[-1] ^= 0x01
    server.receive(bytes(tampered), CLIENT, 10)
    assert server.tunnels == {}


@pytest.mark.parametrize("datagram", [b"", b"junk", b"MLT1\x02" + bytes(8) + bytes(16), b"MLT1\x09" + bytes(40)])
def test_malformed_datagrams(datagram, server):
    with pytest.raises(PacketError):
        decode_packet(datagram)
    server.receive(datagram, CLIENT, 0)
    assert server.tunnels == {}


def test_replayed_packet_delivers_nothing(link, client, server):
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    link.run()
    conn = client.open_connection(tunnel)
    client.send(tunnel, conn, b"hello")
    ((datagram, _),) = client.datagrams_to_send(link.now)

    server.receive(datagram, CLIENT, link.now)
    first = [e for e in server.drain_events() if isinstance(e, StreamData)]
    assert [e.data for e in first] == [b"hello"]

    server.receive(datagram, CLIENT, link.now + 5)
    assert [e for e in server.drain_events() if isinstance(e, StreamData)] == []


def test_datagrams_fit_the_mtu(link, client, server):
    body = bytes(random.Random(5).randbytes(50_000))
    link.app = DocumentServer({"/big": body})
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/big"), now=0)
    link.run(200)
    assert link.collector.body(tunnel, 1) == body
    assert max(len(d) for d in link.sent_by_client + link.sent_by_server) <= 1200


# endregion
# ------------------------------------
# region - Rekeying & mobility
# ------------------------------------


def test_rekey_moves_to_next_key_and_tid(link, client, server):
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    link.run()
    old_tid, old_key, old_keys = tunnel.tid, tunnel.symmetric_key, tunnel.keys

    client.rekey_initiate(tunnel, link.now)
    with pytest.raises(RekeyInProgress):
        client.rekey_initiate(tunnel, link.now)
    link.run()

    assert tunnel.rekey_generation == 1
    assert tunnel.tid != old_tid
    assert tunnel.symmetric_key == next_key(old_key)
    assert old_keys.key == bytes(32)
    assert old_tid not in server.tunnels
    assert server.tunnels[tunnel.tid].symmetric_key == tunnel.symmetric_key
    assert any(isinstance(e, RekeyCompleted) for e in link.client_events)

    conn = client.open_connection(tunnel)
    client.send(tunnel, conn, fetch_request("/"))
    link.run()
    assert link.collector.body(tunnel, conn) == INDEX


def test_packet_from_before_rekey_accepted_after_switch(link, client, server):
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    link.run()
    old_tid, old_keys, now = tunnel.tid, tunnel.keys, link.now

    client.rekey_initiate(tunnel, now)
    for datagram, _ in client.datagrams_to_send(now):
        server.receive(datagram, CLIENT, now)
    acks = server.datagrams_to_send(now)

    # Sent under the old tid, delivered only after the switch
    conn = client.open_connection(tunnel)
    client.send(tunnel, conn, b"late")
    held = [datagram for datagram, _ in client.datagrams_to_send(now)]
    assert {decode_packet(d).tid for d in held} == {old_tid}

    for datagram, _ in acks:
        client.receive(datagram, SERVER, now)
    assert tunnel.tid != old_tid
    disguised = client.datagrams_to_send(now)
    assert {decode_packet(d).type for d, _ in disguised} == {PacketType.INIT}
    for datagram, _ in disguised:
        server.receive(datagram, CLIENT, now)
    assert old_tid not in server.tunnels
    server.drain_events()

    for datagram in held:
        server.receive(datagram, CLIENT, now + 10)
    data = [e for e in server.drain_events() if isinstance(e, StreamData)]
    assert [(e.conn_id, e.data) for e in data] == [(conn, b"late")]
    assert old_keys.key != bytes(32)

    link.run()
    assert old_keys.key == bytes(32)
    assert tunnel.previous is None
    assert server.tunnels[tunnel.tid].previous is None

    # Old keys are gone, so the old tid opens nothing anymore
    for datagram in held:
        server.receive(datagram, CLIENT, link.now)
    assert server.drain_events() == []


def test_rekey_after_byte_budget(client, server):
    client.params = TransportParams(rekey_bytes=4096)
    link = Link(client, server, DocumentServer({"/": INDEX}))
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    link.run()
    conn = client.open_connection(tunnel)
    for _ in range(20):
        client.send(tunnel, conn, bytes(1000))
        link.step()
    link.run()
    assert tunnel.rekeys >= 2
    assert tunnel.forced_rekeys == 0
    received = b"".join(e.data for e in link.server_events if isinstance(e, StreamData) and e.conn_id == conn)
    assert received == bytes(20_000)


def test_client_move_forces_rekey(link, client, server):
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    link.run()
    server_tunnel = server.tunnels[tunnel.tid]

    link.client_addr = MOVED
    conn = client.open_connection(tunnel)
    client.send(tunnel, conn, fetch_request("/"))
    link.run()

    moves = [e for e in link.server_events if isinstance(e, AddressChanged)]
    assert [(e.old, e.new) for e in moves] == [(CLIENT, MOVED)]
    assert server_tunnel.remote == MOVED
    assert tunnel.forced_rekeys == 1
    assert tunnel.rekey_generation == 1
    assert link.collector.body(tunnel, conn) == INDEX


def test_rekey_chain_is_iterated_hash(link, client, server):
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    link.run()
    key0 = tunnel.symmetric_key

    conn = client.open_connection(tunnel)
    client.send(tunnel, conn, b"hello")
    ((recorded, _),) = client.datagrams_to_send(link.now)
    server.receive(recorded, CLIENT, link.now)
    link.run()

    for _ in range(5):
        client.rekey_initiate(tunnel, link.now)
        link.run()

    expected = key0
    for _ in range(5):
        expected = sha256(expected)
    assert tunnel.rekey_generation == 5
    assert tunnel.symmetric_key == expected
    assert server.tunnels[tunnel.tid].symmetric_key == expected
    assert len([e for e in link.client_events if isinstance(e, RekeyCompleted)]) == 5

    packet = decode_packet(recorded)
    assert TunnelKeys(key0, Role.SERVER).open(packet.ciphertext, packet.header) is not None
    assert TunnelKeys(next_key(key0), Role.SERVER, generation=1).open(packet.ciphertext, packet.header) is None


def test_rekey_packet_looks_like_init(link, client, server):
    tunnel = client.connect(server.eph_public, SERVER, now=0)
    ((genuine, _),) = client.datagrams_to_send(0)
    server.receive(genuine, CLIENT, 0)
    link.run()

    client.rekey_initiate(tunnel, link.now)
    for _ in range(40):
        if tunnel.rekey_generation:
            break
        link.step()
    assert tunnel.rekey_generation == 1
    disguised = client.datagrams_to_send(link.now)[0][0]

    assert len(disguised) == len(genuine)
    assert decode_packet(disguised).type == decode_packet(genuine).type == PacketType.INIT
    assert decode_packet(disguised).tid == tunnel.tid
    assert disguised[PUBKEY_OFFSET:INIT_CIPHERTEXT_OFFSET] == tunnel.init_pub

    # A tampered announcement gets the same silence as garbage
    server.datagrams_to_send(link.now)
    server.drain_events()
    tampered = bytearray(disguised)
    tampered[PUBKEY_OFFSET] ^= 0x01
    rng = random.Random(6)
    garbage = init_header(int.from_bytes(rng.randbytes(8), "big") or 1, rng.randbytes(32))
    garbage += rng.randbytes(len(disguised) - len(garbage))
    replies = []
    for datagram in (bytes(tampered), garbage):
        server.receive(datagram, CLIENT, link.now)
        replies.append((server.datagrams_to_send(link.now), server.drain_events()))
    assert replies == [([], []), ([], [])]
    assert tunnel.tid not in server.tunnels

    server.receive(disguised, CLIENT, link.now)
    assert server.tunnels[tunnel.tid].rekey_generation == 1


# endregion
# ------------------------------------
# region - Admission under load
# ------------------------------------


def test_puzzle_solution_is_smallest():
    puzzle = Puzzle(bytes(range(16)), 8)
    pub = bytes(32)
    solution = solve_puzzle(puzzle, pub)
    assert puzzle_valid(puzzle, solution, pub)
    assert not any(puzzle_valid(puzzle, s, pub) for s in range(solution))


def test_puzzle_difficulty_capped():
    with pytest.raises(PuzzleTooHard):
        solve_puzzle(Puzzle(bytes(16), 31), bytes(32))


def test_loaded_server_issues_puzzle_first(client):
    server = MltServer(TransportParams(puzzle_difficulty=8), rng=_rng(2), load_flag=True)
    link = Link(client, server, DocumentServer({"/": INDEX}))
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)

    link.step()
    assert server.tunnels == {}
    assert server.puzzles_issued == 1
    assert decode_packet(link.sent_by_server[0]).type == PacketType.PUZZLE
    assert any(isinstance(e, PuzzleIssued) for e in link.server_events)
    solved = [e for e in link.client_events if isinstance(e, PuzzleSolved)]
    assert solved[0].difficulty == 8

    link.run()
    assert decode_packet(link.sent_by_client[1]).type == PacketType.INIT_PUZZLED
    assert link.collector.body(tunnel, 1) == INDEX
    assert server.puzzles_issued == 1


def test_loaded_server_allocates_nothing_for_plain_inits(client):
    server = MltServer(rng=_rng(2), load_flag=True)
    client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    ((datagram, _),) = client.datagrams_to_send(0)
    for _ in range(10_000):
        server.receive(datagram, CLIENT, 0)
    assert server.tunnels == {}
    assert server.puzzles_issued == 10_000


def test_idle_tunnels_are_reaped():
    server = MltServer(TransportParams(max_tunnels=2, tunnel_idle_ms=60_000), rng=_rng(2))
    app = DocumentServer({"/": INDEX})
    for seed in (11, 12):
        client = MltClient(rng=_rng(seed))
        link = Link(client, server, app)
        tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
        link.run()
        assert link.collector.body(tunnel, 1) == INDEX
    assert len(server.tunnels) == 2
    assert server.under_load
    assert server.next_timer() == min(t.last_active for t in server.tunnels.values()) + 60_000

    late = MltClient(rng=_rng(13))
    link = Link(late, server, app)
    link.now = 100_000
    tunnel = late.connect(server.eph_public, SERVER, fetch_request("/"), now=link.now)
    link.run()
    assert link.collector.body(tunnel, 1) == INDEX
    assert server.puzzles_issued == 0
    assert list(server.tunnels) == [tunnel.tid]


def test_reaping_waits_for_unacknowledged_data(client):
    server = MltServer(TransportParams(tunnel_idle_ms=1000), rng=_rng(2))
    tunnel = client.connect(server.eph_public, SERVER, fetch_request("/"), now=0)
    ((datagram, _),) = client.datagrams_to_send(0)
    server.receive(datagram, CLIENT, 0)
    server_tunnel = server.tunnels[tunnel.tid]
    conn = server.open_connection(server_tunnel)
    server.send(server_tunnel, conn, b"unanswered")
    server.datagrams_to_send(0)

    server.handle_timer(5000)
    assert tunnel.tid in server.tunnels

    server_tunnel.stream.unacked.clear()
    server.handle_timer(5000)
    assert server.tunnels == {}
    assert server_tunnel.keys.key == bytes(32)
    assert not server.under_load


def test_mean_puzzle_work_matches_difficulty():
    rng = random.Random(12)
    attempts = [solve_puzzle(Puzzle(rng.randbytes(16), 12), rng.randbytes(32)) + 1 for _ in range(100)]
    assert 2**11 <= sum(attempts) / len(attempts) <= 2**13


# endregion
# ------------------------------------
# region - Ephemeral key rotation
# ------------------------------------


def test_rotation_publishes_signed_update(alice):
    server = MltServer(rng=_rng(2), publisher=("d/example", alice))
    before = server.eph_public
    update = server.rotate_ephemeral(now=0)
    assert server.eph_public != before
    assert update.new_eph_key == server.eph_public
    assert update.verify(alice.public_key)
    assert [type(e) for e in server.drain_events()] == [EphemeralRotated]


def test_previous_key_accepted_for_one_epoch(client, server):
    link = Link(client, server, DocumentServer({"/": INDEX}))
    stale = server.eph_public
    server.rotate_ephemeral(now=0)
    tunnel = client.connect(stale, SERVER, fetch_request("/"), now=0)
    link.run()
    assert link.collector.body(tunnel, 1) == INDEX

    server.rotate_ephemeral(now=link.now)
    late = client.connect(stale, SERVER, fetch_request("/"), now=link.now)
    link.run()
    assert late.tid not in server.tunnels
    assert link.collector.body(late, 1) == b""


def test_auto_rotation_on_timer():
    server = MltServer(TransportParams(eph_epoch_ms=100), rng=_rng(2), auto_rotate=True)
    before = server.eph_public
    assert server.next_timer() == 100
    server.handle_timer(50)
    assert server.eph_public == before
    server.handle_timer(100)
    assert server.eph_public != before
    assert server.next_timer() == 200


# endregion
# ------------------------------------
# region - Documents
# ------------------------------------


def test_document_root_is_confined(tmp_path):
    root = tmp_path / "site"
    root.mkdir()
    (root / "index.html").write_bytes(INDEX)
    (tmp_path / "secret").write_bytes(b"key")
    documents = DocumentServer(root=root)
    assert documents.lookup("/index.html") == INDEX
    assert documents.lookup("/../secret") is None
    assert documents.lookup("/missing") is None


def test_fetch_request_line():
    assert fetch_request("index.html") == b"GET /index.html\n"


# endregion
# ------------------------------------


# ------------------------------------
# region - UDP
# ------------------------------------


def test_fetch_over_udp():
    server = MltServer(rng=_rng(2))
    app = DocumentServer({"/": INDEX})
    server_driver = UdpDriver(server, "127.0.0.1", 0, on_events=app.handle)
    server_driver.start()

    client = MltClient(rng=_rng(1))
    collector = ResponseCollector()
    client_driver = UdpDriver(client, "127.0.0.1", 0, on_events=lambda _, events: collector.handle(events))
    try:
        endpoint = (server_driver.host, server_driver.port)
        tunnel = client.connect(server.eph_public, endpoint, fetch_request("/"), now=now_ms())
        assert client_driver.run_until(lambda: collector.done(tunnel, 1), timeout=5.0)
    finally:
        client_driver.shutdown()
        server_driver.shutdown()
    assert collector.body(tunnel, 1) == INDEX
    assert not server_driver.is_running()


# endregion
# ------------------------------------
