"""
Tests for domain records, name lifecycle helpers and .bit resolution.
"""

# Std
import json

# 3rd party
import pytest

# nmclt
from nmclt.nameregistry import (
    DomainRecord,
    EphKeyUpdate,
    load_record_file,
    merge_record_values,
    parse_record,
    register,
    resolve,
    serialize_record,
    split_fqdn,
    update_eph_key,
    update_record,
)
from nmclt.nameregistry.records import canonical_json, strip_comments
from nmclt.chaincore import TxKind, verify_transaction_signature
from nmclt.util.exceptions import (
    BadFqdn,
    BadKey,
    BadName,
    NameExpired,
    NameNotFound,
    ParseError,
)

EPH = bytes(range(32))
ID_KEY = bytes(range(32, 64))


def _mlt_record(eph: bytes = EPH) -> dict:
    return {
        "ip": "192.0.2.10",
        "minimaLT": {"ip": "192.0.2.10", "port": 4433, "id_key": ID_KEY.hex(), "eph_key": eph.hex()},
        "map": {"www": {"ip": "192.0.2.11"}},
    }


# ------------------------------------
# region - Records
# ------------------------------------


def test_documented_listing_parses(listing_record):
    record = parse_record(listing_record)
    assert record.ip == "209.236.123.133"
    assert record.tor == "rqblqd3balaxcb57.onion"
    assert record.tls["tcp"]["443"] == [(1, "30F38EDAABC67F0344DBE27018552F7D575946EF", 1)]
    assert record.map["www"].ip == "209.236.123.133"


def test_serialized_record_is_canonical_json(listing_record):
    raw = serialize_record(parse_record(listing_record))
    data = json.loads(raw)
    assert raw == canonical_json(data)
    assert list(data) == sorted(data)
    assert parse_record(raw) == parse_record(listing_record)


def test_comments_stripped_outside_strings(tmp_path):
    text = '{\n  "ip": "192.0.2.1", // the host\n  "info": "see http://example.org"\n}\n'
    assert "the host" not in strip_comments(text)
    path = tmp_path / "record.json"
    path.write_text(text)
    record = load_record_file(path)
    assert record.info == "see http://example.org"


def test_unknown_fields_survive():
    record = parse_record('{"ip": "192.0.2.1", "ns": ["ns1.example.org"]}')
    assert json.loads(serialize_record(record))["ns"] == ["ns1.example.org"]


def test_minimalt_section_uses_wire_key():
    record = parse_record(canonical_json(_mlt_record()))
    assert record.minimalt.port == 4433
    assert record.minimalt.eph_key_bytes == EPH
    assert "minimaLT" in record.to_json()


@pytest.mark.parametrize(
    "raw",
    [
        "not json at all",
        "[1, 2, 3]",
        '{"ip": "300.1.2.3"}',
        '{"ip": 17}',
        '{"minimaLT": {"port": 4433, "id_key": "00", "eph_key": "00"}}',
        b"\xff\xfe{}",
    ],
)
def test_bad_records_rejected(raw):
    with pytest.raises(ParseError):
        parse_record(raw)


def test_oversize_record_rejected():
    raw = json.dumps({"info": "x" * 5000})
    with pytest.raises(ParseError) as err:
        parse_record(raw)
    assert err.value.reason == "oversize"


def test_merge_deep_merges_objects():
    old = canonical_json({"ip": "192.0.2.1", "minimaLT": {"port": 1, "eph_key": "aa"}})
    merged = json.loads(merge_record_values(old, canonical_json({"minimaLT": {"eph_key": "bb"}})))
    assert merged == {"ip": "192.0.2.1", "minimaLT": {"port": 1, "eph_key": "bb"}}


def test_merge_replace_marker():
    old = canonical_json({"ip": "192.0.2.1", "info": "old"})
    merged = json.loads(merge_record_values(old, canonical_json({"_replace": True, "ip": "192.0.2.2"})))
    assert merged == {"ip": "192.0.2.2"}


# endregion
# ------------------------------------
# region - Transactions
# ------------------------------------


@pytest.mark.parametrize("name", ["example", "d/", "d/Example", "d/under_score", "d/" + "a" * 64, "u/example"])
def test_invalid_names_refused(name, alice):
    with pytest.raises(BadName):
        register(name, {"ip": "192.0.2.1"}, alice)


def test_register_builds_signed_name_new(alice):
    tx = register("d/example", _mlt_record(), alice, fee=1000, nonce=4)
    assert tx.kind == TxKind.NAME_NEW
    assert tx.nonce == 4
    assert tx.recipient is None and tx.amount == 0
    assert verify_transaction_signature(tx)
    assert parse_record(tx.value).minimalt.port == 4433


def test_update_record_replace_is_validated(alice):
    with pytest.raises(ParseError):
        update_record("d/example", {"ip": "not an ip"}, alice, replace=True)
    tx = update_record("d/example", {"ip": "192.0.2.9"}, alice, replace=True)
    assert json.loads(tx.value)["_replace"] is True


def test_eph_key_update_signed_by_owner(alice, bob):
    update = EphKeyUpdate.create("d/example", EPH, alice)
    assert update.verify(alice.public_key)
    assert not update.verify(bob.public_key)
    assert json.loads(update.value()) == {"minimaLT": {"eph_key": EPH.hex()}}

    with pytest.raises(BadKey):
        EphKeyUpdate.create("d/example", EPH[:31], alice)


def test_update_eph_key_is_a_name_update(alice):
    tx = update_eph_key("d/example", EPH, alice, nonce=2)
    assert tx.kind == TxKind.NAME_UPDATE
    assert verify_transaction_signature(tx)


# endregion
# ------------------------------------
# region - Resolution
# ------------------------------------


@pytest.mark.parametrize(
    "fqdn, expected",
    [
        ("example.bit", ("d/example", None)),
        ("www.example.bit", ("d/example", "www")),
        ("WWW.Example.BIT.", ("d/example", "www")),
    ],
)
def test_split_fqdn(fqdn, expected):
    assert split_fqdn(fqdn) == expected


@pytest.mark.parametrize("fqdn", ["example.com", "a.b.example.bit", ".bit", "bad_label.bit"])
def test_split_fqdn_rejects(fqdn):
    with pytest.raises(BadFqdn):
        split_fqdn(fqdn)


@pytest.fixture
def registered(funded_node, alice):
    funded_node.submit_transaction(register("d/example", _mlt_record(), alice, nonce=1))
    funded_node.mine_block(alice.address())
    return funded_node


def test_resolve_base_name(registered, alice):
    resolved = resolve(registered.snapshot(), "example.bit")
    assert resolved.name == "d/example"
    assert resolved.record.ip == "192.0.2.10"
    assert resolved.record.minimalt.eph_key_bytes == EPH
    assert resolved.owner_pubkey == alice.public_key
    assert resolved.height == registered.height
    assert resolved.to_json()["record"]["minimaLT"]["port"] == 4433


def test_resolve_subdomain_overlays_map_entry(registered):
    resolved = resolve(registered.snapshot(), "www.example.bit")
    assert resolved.record.ip == "192.0.2.11"
    assert resolved.record.minimalt.port == 4433
    assert resolved.record.map is None


def test_resolve_missing(registered):
    with pytest.raises(NameNotFound):
        resolve(registered.snapshot(), "missing.bit")
    with pytest.raises(NameNotFound):
        resolve(registered.snapshot(), "mail.example.bit")


def test_eph_key_rotation_reaches_resolution(registered, alice):
    new_key = bytes(32 * [7])
    registered.submit_transaction(update_eph_key("d/example", new_key, alice, nonce=2))
    registered.mine_block(alice.address())

    record = resolve(registered.snapshot(), "example.bit").record
    assert record.minimalt.eph_key_bytes == new_key
    assert record.minimalt.id_key_bytes == ID_KEY
    assert record.ip == "192.0.2.10"


def test_resolve_expired(registered, params, alice):
    while registered.height < 3 + params.name_expiry_blocks:
        registered.mine_block(alice.address())
    with pytest.raises(NameExpired):
        resolve(registered.snapshot(), "example.bit")


def test_record_model_accepts_python_name():
    record = DomainRecord(minimalt={"port": 1, "id_key": ID_KEY.hex(), "eph_key": EPH.hex()})
    assert record.to_json()["minimaLT"]["port"] == 1


# endregion
# ------------------------------------
