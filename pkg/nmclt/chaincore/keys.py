"""
secp256k1 key pairs, deterministic ECDSA and address derivation.

    Key-Hash = RIPEMD-160(SHA-256(public key))
    Address  = Base58(version + Key-Hash + checksum)
"""

# Std
import hashlib
from pathlib import Path

# 3rd party
from ecdsa import SigningKey, VerifyingKey, SECP256k1, BadSignatureError
from ecdsa.errors import MalformedPointError
from ecdsa.util import sigencode_string, sigdecode_string, MalformedSignature

# nmclt
from nmclt.chaincore import defaults as d
from nmclt.chaincore.types import Address
from nmclt.chaincore.encoding import b58encode, b58encode_check, b58decode_check
from nmclt.util.general import sha256, double_sha256
from nmclt.util.general import write_secret_file, read_secret_file
from nmclt.util.exceptions import InvalidPoint, InvalidAddress

PUBKEY_LENGTHS = (33, 65)


def ripemd160(data: bytes) -> bytes:
    """
    RIPEMD-160 digest. OpenSSL 3 builds may lack it in hashlib,
    in which case pycryptodome provides it.
    """
    try:
        return hashlib.new("ripemd160", data).digest()
    except ValueError:
        from Crypto.Hash import RIPEMD160

        return RIPEMD160.new(data).digest()


class KeyPair:
    """
    A secp256k1 key pair used for chain transactions and resolver responses.
    """

    def __init__(self, signing_key: SigningKey):
        self._sk = signing_key
        self._vk = signing_key.get_verifying_key()

    def __repr__(self) -> str:
        return f"KeyPair(public_key={self.public_key.hex()})"

    @classmethod
    def generate(cls) -> "KeyPair":
        return cls(SigningKey.generate(curve=SECP256k1, hashfunc=hashlib.sha256))

    @classmethod
    def from_secret(cls, secret: int | bytes) -> "KeyPair":
        """
        Build from a private scalar, given as int or 32 big-endian bytes.
        """
        if isinstance(secret, (bytes, bytearray)):
            secret = int.from_bytes(secret, "big")
        return cls(
            SigningKey.from_secret_exponent(
                secret, curve=SECP256k1, hashfunc=hashlib.sha256
            )
        )

    @property
    def private_key(self) -> bytes:
        return self._sk.to_string()

    @property
    def public_key(self) -> bytes:
        """33 byte compressed encoding."""
        return self._vk.to_string("compressed")

    @property
    def public_key_uncompressed(self) -> bytes:
        return self._vk.to_string("uncompressed")

    def sign(self, message: bytes) -> bytes:
        """
        64 byte r||s signature over SHA-256(message), RFC 6979 nonce.
        """
        return self._sk.sign_deterministic(
            message, hashfunc=hashlib.sha256, sigencode=sigencode_string
        )

    def address(self, version: int = d.ADDRESS_VERSION) -> Address:
        return derive_address(self.public_key, version)

    def fingerprint(self) -> bytes:
        """SHA-256 of the compressed public key, as pinned by resolver clients."""
        return sha256(self.public_key)


def decode_point(public_key: bytes) -> VerifyingKey:
    """
    Decode a compressed or uncompressed point, raising InvalidPoint.
    """
    if len(public_key) not in PUBKEY_LENGTHS:
        raise InvalidPoint(f"Public key must be 33 or 65 bytes, got {len(public_key)}")
    try:
        return VerifyingKey.from_string(
            public_key, curve=SECP256k1, hashfunc=hashlib.sha256
        )
    except (MalformedPointError, ValueError, AssertionError) as err:
        raise InvalidPoint(str(err)) from err


def verify_signature(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """
    Check a 64 byte signature. Never raises on bad input.
    """
    if not signature or len(signature) != 64:
        return False
    try:
        vk = decode_point(public_key)
        return vk.verify(
            signature, message, hashfunc=hashlib.sha256, sigdecode=sigdecode_string
        )
    except (InvalidPoint, BadSignatureError, MalformedSignature):
        return False


def derive_address(public_key: bytes, version: int = d.ADDRESS_VERSION) -> Address:
    """
    Derive the Base58Check address of a public key.
    """
    decode_point(public_key)
    key_hash = ripemd160(sha256(public_key))
    payload = bytes([version]) + key_hash
    checksum = double_sha256(payload)[:4]
    return Address(
        version=version,
        key_hash=key_hash,
        checksum=checksum,
        text=b58encode(payload + checksum),
    )


def decode_address(text: str) -> Address:
    """
    Parse an address text, verifying its checksum.
    """
    payload = b58decode_check(text)
    if len(payload) != 21:
        raise InvalidAddress(f"Address payload must be 21 bytes, got {len(payload)}")
    return Address(
        version=payload[0],
        key_hash=payload[1:],
        checksum=double_sha256(payload)[:4],
        text=text,
    )


def burn_address(version: int = d.ADDRESS_VERSION) -> Address:
    """
    Address with an all-zero key hash. Nobody holds its key.
    """
    payload = bytes([version]) + bytes(20)
    checksum = double_sha256(payload)[:4]
    return Address(version, bytes(20), checksum, b58encode_check(payload))


# ------------------------------------
# region - Key files
# ------------------------------------


def save_key(keypair: KeyPair, path: Path | str) -> Path:
    """
    Write the private key as hex, owner-readable only.
    """
    return write_secret_file(path, keypair.private_key.hex() + "\n")


def load_key(path: Path | str) -> KeyPair:
    """
    Read a private key written by save_key().
    """
    return KeyPair.from_secret(bytes.fromhex(read_secret_file(path)))


# endregion
# ------------------------------------
