"""
Name registration, updates and .bit resolution over a chain state.

All functions are pure over the state they are given, so they can run
on snapshots from any thread.
"""

# Std
import re

# nmclt
from nmclt.nameregistry import defaults as d
from nmclt.nameregistry.types import DomainRecord, ResolvedRecord
from nmclt.nameregistry.records import canonical_json, parse_record, serialize_record
from nmclt.nameregistry.ephkey import EphKeyUpdate
from nmclt.chaincore.types import NameStatus, Transaction, TxKind
from nmclt.chaincore.keys import KeyPair
from nmclt.chaincore.state import ChainState, name_lookup
from nmclt.chaincore.transactions import sign_transaction
from nmclt.util.exceptions import BadFqdn, BadName, NameExpired, NameNotFound

NAME_RE = re.compile(d.NAME_PATTERN)


def validate_name(name: str) -> str:
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise BadName(f"'{name}' is not a valid name, expected d/[a-z0-9-]{{1,63}}")
    return name


def next_nonce(state: ChainState, pubkey: bytes) -> int:
    """
    Nonce for the next transaction of a key, ignoring the mempool.
    """
    return state.nonce(state.sender_address(pubkey)) + 1


def _record_bytes(record: DomainRecord | bytes | str | dict) -> bytes:
    if isinstance(record, DomainRecord):
        return serialize_record(record)
    if isinstance(record, dict):
        record = canonical_json(record)
    return serialize_record(parse_record(record))


# ------------------------------------
# region - Transactions
# ------------------------------------


def register(
    name: str,
    record: DomainRecord | bytes | str | dict,
    owner: KeyPair,
    fee: int = d.DEFAULT_FEE,
    nonce: int = 1,
) -> Transaction:
    """
    Build a signed NameNew carrying the serialized record.
    """
    validate_name(name)
    tx = Transaction(
        kind=TxKind.NAME_NEW,
        sender_pubkey=owner.public_key,
        fee=fee,
        name=name,
        value=_record_bytes(record),
        nonce=nonce,
    )
    return sign_transaction(tx, owner)


def update_record(
    name: str,
    update: dict,
    owner: KeyPair,
    fee: int = d.DEFAULT_FEE,
    nonce: int = 1,
    replace: bool = False,
    new_owner: bytes | None = None,
) -> Transaction:
    """
    Build a signed NameUpdate. The update is deep-merged into the
    stored record, or replaces it when replace is set.
    An empty update renews the name.
    """
    validate_name(name)
    value = dict(update)
    if replace:
        parse_record(canonical_json(value))
        value[d.REPLACE_MARKER] = True
    tx = Transaction(
        kind=TxKind.NAME_UPDATE,
        sender_pubkey=owner.public_key,
        fee=fee,
        name=name,
        value=canonical_json(value),
        nonce=nonce,
        new_owner_pubkey=new_owner,
    )
    return sign_transaction(tx, owner)


def update_eph_key(
    name: str,
    new_key: bytes,
    owner: KeyPair,
    fee: int = d.DEFAULT_FEE,
    nonce: int = 1,
) -> Transaction:
    """
    Build the NameUpdate announcing a new ephemeral key.
    """
    validate_name(name)
    return EphKeyUpdate.create(name, new_key, owner).to_transaction(owner, nonce, fee)


# endregion
# ------------------------------------
# region - Resolution
# ------------------------------------


def split_fqdn(fqdn: str) -> tuple[str, str | None]:
    """
    "x.bit" -> ("d/x", None), "www.x.bit" -> ("d/x", "www").
    """
    fqdn = fqdn.strip().lower().rstrip(".")
    if not fqdn.endswith(d.TLD):
        raise BadFqdn(f"'{fqdn}' is not a {d.TLD} domain")
    labels = fqdn[: -len(d.TLD)].split(".")
    if len(labels) > 1 + d.MAX_SUBDOMAIN_DEPTH or not all(labels):
        raise BadFqdn(f"'{fqdn}' has an unsupported number of labels")

    name = "d/" + labels[-1]
    if not NAME_RE.match(name):
        raise BadFqdn(f"'{labels[-1]}' is not a valid name label")
    return name, labels[0] if len(labels) == 2 else None


def resolve(state: ChainState, fqdn: str) -> ResolvedRecord:
    """
    Resolve a .bit domain against a chain state.

    Subdomains are looked up in the record's map; fields of the map
    entry shadow the base record's.
    """
    name, sub = split_fqdn(fqdn)
    entry = name_lookup(state, name)
    if entry is NameStatus.NOT_FOUND:
        raise NameNotFound(f"'{name}' is not registered")
    if entry is NameStatus.EXPIRED:
        raise NameExpired(f"'{name}' expired")

    record = parse_record(entry.value)
    if sub is not None:
        overlay = (record.map or {}).get(sub)
        if overlay is None:
            raise NameNotFound(f"'{sub}' is not in the map of '{name}'")
        merged = record.to_json()
        merged.pop("map", None)
        merged.update(overlay.to_json())
        record = DomainRecord.model_validate(merged)

    return ResolvedRecord(
        fqdn=fqdn.strip().lower().rstrip("."),
        name=name,
        record=record,
        height=state.height,
        last_update_height=entry.last_update_height,
        owner_pubkey=entry.owner_pubkey,
    )


# endregion
# ------------------------------------
