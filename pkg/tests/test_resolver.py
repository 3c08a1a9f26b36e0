"""
Tests for the signed resolver: wire format, authentication,
status mapping and the UDP service.
"""

# Std
import random
import socket

# 3rd party
import pytest

# nmclt
from nmclt.resolver import (
    Query,
    Status,
    chain_file_source,
    check_pin,
    client_resolve,
    decode_query,
    decode_response,
    encode_query,
    encode_response,
    handle_query,
    interpret_response,
    node_source,
    serve,
    verify_response,
)
from nmclt.chaincore import save_chain
from nmclt.nameregistry import register
from nmclt.util.exceptions import (
    FingerprintMismatch,
    NameExpired,
    NameNotFound,
    ResolveTimeout,
    ResponseBadSignature,
)

RECORD = {"ip": "192.0.2.10", "map": {"www": {"ip": "192.0.2.11"}}}


@pytest.fixture
def registered(funded_node, alice):
    funded_node.submit_transaction(register("d/example", RECORD, alice, nonce=1))
    funded_node.mine_block(alice.address())
    return funded_node


@pytest.fixture
def resolver_key(carol):
    return carol


def _flip(datagram: bytes, bit: int) -> bytes:
    data = bytearray(datagram)
    data[bit // 8] ^= 1 << (bit % 8)
    return bytes(data)


# ------------------------------------
# region - Wire format
# ------------------------------------


def test_query_layout():
    datagram = encode_query(Query(7, "example.bit"))
    assert datagram[:4] == b"NMC1"
    assert datagram[4:8] == (7).to_bytes(4, "big")
    assert datagram[8:10] == (11).to_bytes(2, "big")
    assert decode_query(datagram) == Query(7, "example.bit")


@pytest.mark.parametrize("datagram", [b"", b"NMC2" + bytes(6), b"NMC1" + bytes(4) + b"\x00\x05abc"])
def test_malformed_queries_ignored(datagram, registered, resolver_key):
    assert decode_query(datagram) is None
    assert handle_query(datagram, registered.snapshot(), resolver_key) is None


def test_response_layout(resolver_key):
    datagram = encode_response(9, Status.OK, b"{}", 12, resolver_key)
    assert len(datagram) == 4 + 4 + 1 + 4 + 2 + 8 + 64
    response = decode_response(datagram)
    assert (response.qid, response.status, response.record, response.height) == (9, Status.OK, b"{}", 12)


# endregion
# ------------------------------------
# region - Answers
# ------------------------------------


def test_answer_carries_record_and_height(registered, resolver_key):
    datagram = handle_query(encode_query(Query(1, "example.bit")), registered.snapshot(), resolver_key)
    resolved = interpret_response(datagram, 1, "example.bit", resolver_key.public_key)
    assert resolved.record.ip == "192.0.2.10"
    assert resolved.height == registered.height
    assert resolved.name == "d/example"


def test_answer_for_subdomain(registered, resolver_key):
    datagram = handle_query(encode_query(Query(2, "www.example.bit")), registered.snapshot(), resolver_key)
    assert interpret_response(datagram, 2, "www.example.bit", resolver_key.public_key).record.ip == "192.0.2.11"


def test_missing_name_is_signed_not_found(registered, resolver_key):
    datagram = handle_query(encode_query(Query(3, "missing.bit")), registered.snapshot(), resolver_key)
    assert verify_response(datagram, 3, resolver_key.public_key).status == Status.NOT_FOUND
    with pytest.raises(NameNotFound):
        interpret_response(datagram, 3, "missing.bit", resolver_key.public_key)


def test_expired_name_is_signed_expired(registered, params, alice, resolver_key):
    while registered.height < 3 + params.name_expiry_blocks:
        registered.mine_block(alice.address())
    datagram = handle_query(encode_query(Query(4, "example.bit")), registered.snapshot(), resolver_key)
    with pytest.raises(NameExpired):
        interpret_response(datagram, 4, "example.bit", resolver_key.public_key)


def test_bad_domain_answers_error(registered, resolver_key):
    datagram = handle_query(encode_query(Query(5, "example.com")), registered.snapshot(), resolver_key)
    assert verify_response(datagram, 5, resolver_key.public_key).status == Status.ERROR


# endregion
# ------------------------------------
# region - Authentication
# ------------------------------------


def test_every_bit_flip_detected(registered, resolver_key):
    datagram = handle_query(encode_query(Query(6, "missing.bit")), registered.snapshot(), resolver_key)
    for bit in range(len(datagram) * 8):
        with pytest.raises(ResponseBadSignature):
            verify_response(_flip(datagram, bit), 6, resolver_key.public_key)


def test_record_tampering_detected(registered, resolver_key):
    datagram = handle_query(encode_query(Query(8, "example.bit")), registered.snapshot(), resolver_key)
    rng = random.Random(8)
    for byte in range(len(datagram)):
        with pytest.raises(ResponseBadSignature):
            verify_response(_flip(datagram, byte * 8 + rng.randrange(8)), 8, resolver_key.public_key)


def test_wrong_key_and_wrong_qid_rejected(registered, resolver_key, alice):
    datagram = handle_query(encode_query(Query(10, "example.bit")), registered.snapshot(), resolver_key)
    with pytest.raises(ResponseBadSignature):
        verify_response(datagram, 10, alice.public_key)
    with pytest.raises(ResponseBadSignature):
        verify_response(datagram, 11, resolver_key.public_key)


def test_pin_must_match(resolver_key, alice):
    check_pin(resolver_key.public_key, resolver_key.fingerprint())
    with pytest.raises(FingerprintMismatch):
        check_pin(alice.public_key, resolver_key.fingerprint())


# endregion
# ------------------------------------
# region - UDP service
# ------------------------------------


def test_resolves_over_udp(registered, resolver_key):
    service = serve(resolver_key, node_source(registered), host="127.0.0.1", port=0)
    try:
        server = ("127.0.0.1", service.port)
        resolved = client_resolve(server, resolver_key.fingerprint(), "example.bit", resolver_key.public_key, timeout=2.0)
        assert resolved.record.ip == "192.0.2.10"
        with pytest.raises(NameNotFound):
            client_resolve(server, resolver_key.fingerprint(), "missing.bit", resolver_key.public_key, timeout=2.0)
    finally:
        service.shutdown()
    assert not service.is_running()


def test_pin_checked_before_sending(resolver_key, alice):
    with pytest.raises(FingerprintMismatch):
        client_resolve(("127.0.0.1", 9), resolver_key.fingerprint(), "example.bit", alice.public_key)


def test_silent_resolver_times_out(resolver_key):
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as silent:
        silent.bind(("127.0.0.1", 0))
        server = silent.getsockname()
        with pytest.raises(ResolveTimeout):
            client_resolve(server, resolver_key.fingerprint(), "example.bit", resolver_key.public_key, timeout=0.1, retries=1)


def test_chain_file_source_follows_file(tmp_path, registered, resolver_key):
    path = save_chain(registered, tmp_path / "chain.jsonl")
    source = chain_file_source(path, registered.params)
    assert source().height == registered.height

    datagram = handle_query(encode_query(Query(12, "example.bit")), source(), resolver_key)
    assert interpret_response(datagram, 12, "example.bit", resolver_key.public_key).record.ip == "192.0.2.10"


# endregion
# ------------------------------------
