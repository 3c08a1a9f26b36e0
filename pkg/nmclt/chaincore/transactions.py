"""
Canonical transaction encoding, hashing, signing and JSON form.
"""

# Std
import dataclasses

# nmclt
from nmclt.chaincore.types import Transaction, TxKind
from nmclt.chaincore.keys import KeyPair, verify_signature, decode_address
from nmclt.chaincore.encoding import CanonicalWriter
from nmclt.util.general import sha256
from nmclt.util.exceptions import MalformedTransaction


def _write_body(tx: Transaction) -> CanonicalWriter:
    recipient = decode_address(tx.recipient).raw() if tx.recipient else None
    return (
        CanonicalWriter()
        .u8(int(tx.kind))
        .var(tx.sender_pubkey)
        .var(recipient)
        .u64(tx.amount)
        .u64(tx.fee)
        .text(tx.name)
        .var(tx.value)
        .u64(tx.nonce)
        .var(tx.new_owner_pubkey)
    )


def signing_bytes(tx: Transaction) -> bytes:
    """
    Canonical encoding minus the signature field.
    """
    return _write_body(tx).bytes()


def serialize_transaction(tx: Transaction) -> bytes:
    """
    Full canonical encoding, signature included.
    """
    return _write_body(tx).var(tx.signature).bytes()


def tx_hash(tx: Transaction) -> bytes:
    return sha256(serialize_transaction(tx))


def sign_transaction(tx: Transaction, key: KeyPair) -> Transaction:
    """
    Return a signed copy of the transaction. Signing is deterministic.
    """
    if tx.kind == TxKind.COINBASE:
        raise MalformedTransaction("Coinbase transactions are not signed")
    if tx.signature:
        raise MalformedTransaction("Transaction is already signed")
    if tx.sender_pubkey != key.public_key:
        raise MalformedTransaction("sender_pubkey does not match the signing key")
    return dataclasses.replace(tx, signature=key.sign(signing_bytes(tx)))


def verify_transaction_signature(tx: Transaction) -> bool:
    if tx.kind == TxKind.COINBASE:
        return tx.signature is None and tx.sender_pubkey is None
    if not tx.sender_pubkey or not tx.signature:
        return False
    return verify_signature(tx.sender_pubkey, signing_bytes(tx), tx.signature)


# ------------------------------------
# region - JSON form
# ------------------------------------


def tx_to_json(tx: Transaction) -> dict:
    """
    JSON form used by chain and mempool files. Hashing never uses it.
    """

    def _hex(value):
        return value.hex() if value is not None else None

    return {
        "kind": tx.kind.name,
        "sender_pubkey": _hex(tx.sender_pubkey),
        "recipient": tx.recipient,
        "amount": tx.amount,
        "fee": tx.fee,
        "name": tx.name,
        "value": _hex(tx.value),
        "nonce": tx.nonce,
        "new_owner_pubkey": _hex(tx.new_owner_pubkey),
        "signature": _hex(tx.signature),
    }


def tx_from_json(data: dict) -> Transaction:
    def _bytes(value):
        return bytes.fromhex(value) if value is not None else None

    return Transaction(
        kind=TxKind[data["kind"]],
        sender_pubkey=_bytes(data.get("sender_pubkey")),
        recipient=data.get("recipient"),
        amount=int(data.get("amount", 0)),
        fee=int(data.get("fee", 0)),
        name=data.get("name"),
        value=_bytes(data.get("value")),
        nonce=int(data.get("nonce", 0)),
        new_owner_pubkey=_bytes(data.get("new_owner_pubkey")),
        signature=_bytes(data.get("signature")),
    )


# endregion
# ------------------------------------
