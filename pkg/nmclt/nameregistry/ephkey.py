"""
Signed ephemeral-key update message.

Hosts announce a new transport ephemeral key by signing
(name, new key) with the chain key that owns the name, and
publish it as a NameUpdate carrying only the minimaLT.eph_key field.
"""

# Std
from dataclasses import dataclass

# nmclt
from nmclt.chaincore.types import Transaction, TxKind
from nmclt.chaincore.keys import KeyPair, verify_signature
from nmclt.chaincore.encoding import CanonicalWriter
from nmclt.chaincore.transactions import sign_transaction
from nmclt.nameregistry.records import canonical_json
from nmclt.util.exceptions import BadKey


@dataclass(frozen=True)
class EphKeyUpdate:
    name: str
    new_eph_key: bytes
    signature: bytes

    @staticmethod
    def signing_bytes(name: str, new_eph_key: bytes) -> bytes:
        return CanonicalWriter().text(name).fixed(new_eph_key, 32).bytes()

    @classmethod
    def create(cls, name: str, new_eph_key: bytes, owner: KeyPair) -> "EphKeyUpdate":
        if len(new_eph_key) != 32:
            raise BadKey(f"Ephemeral key must be 32 bytes, got {len(new_eph_key)}")
        return cls(name, bytes(new_eph_key), owner.sign(cls.signing_bytes(name, new_eph_key)))

    def verify(self, owner_pubkey: bytes) -> bool:
        if len(self.new_eph_key) != 32:
            return False
        return verify_signature(
            owner_pubkey, self.signing_bytes(self.name, self.new_eph_key), self.signature
        )

    def value(self) -> bytes:
        """
        The partial record a NameUpdate carries.
        """
        return canonical_json({"minimaLT": {"eph_key": self.new_eph_key.hex()}})

    def to_transaction(self, owner: KeyPair, nonce: int, fee: int = 0) -> Transaction:
        tx = Transaction(
            kind=TxKind.NAME_UPDATE,
            sender_pubkey=owner.public_key,
            fee=fee,
            name=self.name,
            value=self.value(),
            nonce=nonce,
        )
        return sign_transaction(tx, owner)
