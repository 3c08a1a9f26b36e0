"""
Byte-level encodings shared by the chain: Base58 / Base58Check and
the canonical binary layout that hashes and signatures cover.

Canonical layout: fixed field order, big-endian integers,
byte strings prefixed with a u32 length. Absent optional fields
encode as a zero length.
"""

import struct

from nmclt.util.general import double_sha256
from nmclt.util.exceptions import InvalidAddress

# 58 character alphabet used
ALPHABET = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"
ALPHABET_MAP = {char: index for index, char in enumerate(ALPHABET)}


# ------------------------------------
# region - Base58
# ------------------------------------


def b58encode(data: bytes) -> str:
    """
    Encode bytes using Base58, one leading '1' per leading zero byte.
    """
    stripped = data.lstrip(b"\0")
    n_zeros = len(data) - len(stripped)

    acc = int.from_bytes(stripped, "big")
    result = ""
    while acc > 0:
        acc, mod = divmod(acc, 58)
        result = ALPHABET[mod] + result

    return ALPHABET[0] * n_zeros + result


def b58decode(text: str) -> bytes:
    """
    Decode a Base58 string.
    """
    acc = 0
    for char in text:
        if char not in ALPHABET_MAP:
            raise InvalidAddress(f"Invalid base58 character '{char}'")
        acc = acc * 58 + ALPHABET_MAP[char]

    n_zeros = len(text) - len(text.lstrip(ALPHABET[0]))
    body = acc.to_bytes((acc.bit_length() + 7) // 8, "big") if acc else b""
    return b"\0" * n_zeros + body


def b58encode_check(payload: bytes) -> str:
    """
    Encode with a 4 byte double-SHA-256 checksum appended.
    """
    return b58encode(payload + double_sha256(payload)[:4])


def b58decode_check(text: str) -> bytes:
    """
    Decode and verify the checksum of a Base58Check string.
    """
    raw = b58decode(text)
    if len(raw) < 5:
        raise InvalidAddress("Base58Check string too short")
    payload, checksum = raw[:-4], raw[-4:]
    if double_sha256(payload)[:4] != checksum:
        raise InvalidAddress("Invalid checksum")
    return payload


# endregion
# ------------------------------------
# region - Canonical binary layout
# ------------------------------------


class CanonicalWriter:
    """
    Accumulates fields in canonical form.
    """

    def __init__(self):
        self._parts: list[bytes] = []

    def u8(self, value: int) -> "CanonicalWriter":
        self._parts.append(struct.pack(">B", value))
        return self

    def u32(self, value: int) -> "CanonicalWriter":
        self._parts.append(struct.pack(">I", value))
        return self

    def u64(self, value: int) -> "CanonicalWriter":
        self._parts.append(struct.pack(">Q", value))
        return self

    def fixed(self, value: bytes, size: int) -> "CanonicalWriter":
        if len(value) != size:
            raise ValueError(f"Expected {size} bytes, got {len(value)}")
        self._parts.append(value)
        return self

    def var(self, value: bytes | None) -> "CanonicalWriter":
        value = value or b""
        self._parts.append(struct.pack(">I", len(value)) + value)
        return self

    def text(self, value: str | None) -> "CanonicalWriter":
        return self.var(value.encode("utf-8") if value is not None else None)

    def bytes(self) -> bytes:
        return b"".join(self._parts)


# endregion
# ------------------------------------
