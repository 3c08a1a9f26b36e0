"""
Tunnel key material: X25519 agreement, key derivation, the rekey
hash chain, and AEAD sealing with derived nonces.
"""

# Std
import os
import struct
from pathlib import Path

# 3rd party
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

# nmclt
from nmclt.transport import defaults as d
from nmclt.transport.types import RandomSource, Role
from nmclt.util.general import read_secret_file, sha256, write_secret_file
from nmclt.util.exceptions import BadKey

NONCE_PAD = bytes(3)


def os_random(size: int) -> bytes:
    return os.urandom(size)


def generate_private_key(rng: RandomSource = os_random) -> X25519PrivateKey:
    return X25519PrivateKey.from_private_bytes(rng(d.KEY_LEN))


def public_bytes(key: X25519PrivateKey | X25519PublicKey) -> bytes:
    if isinstance(key, X25519PrivateKey):
        key = key.public_key()
    return key.public_bytes(
        encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw
    )


def load_public_key(raw: bytes) -> X25519PublicKey:
    """
    Parse a raw Curve25519 public key, raising BadKey.
    """
    if not isinstance(raw, (bytes, bytearray)) or len(raw) != d.KEY_LEN:
        raise BadKey(f"Curve25519 public key must be 32 bytes, got {len(raw or b'')}")
    try:
        return X25519PublicKey.from_public_bytes(bytes(raw))
    except ValueError as err:
        raise BadKey(str(err)) from err


def agree(private_key: X25519PrivateKey, peer_public: bytes) -> bytes:
    """
    X25519 shared secret. Low-order peer points raise BadKey.
    """
    try:
        return private_key.exchange(load_public_key(peer_public))
    except ValueError as err:
        raise BadKey(f"Key agreement failed: {err}") from err


def derive_tunnel_key(shared_secret: bytes, tid: int) -> bytes:
    """
    SHA-256(DH output || tid || "mlt-v1").
    """
    return sha256(shared_secret + struct.pack(">Q", tid) + d.KDF_CONTEXT)


def next_key(key: bytes) -> bytes:
    """
    Key of the next generation. One-way.
    """
    return sha256(bytes(key))


def make_nonce(generation: int, direction: Role, packet_number: int) -> bytes:
    """
    generation u32 | direction u8 | packet number u32, zero-padded to 12 bytes.
    """
    return struct.pack(">IBI", generation, int(direction), packet_number) + NONCE_PAD


def seal(key: bytes, nonce: bytes, plaintext: bytes, aad: bytes) -> bytes:
    return ChaCha20Poly1305(bytes(key)).encrypt(nonce, plaintext, aad)


def open_sealed(key: bytes, nonce: bytes, ciphertext: bytes, aad: bytes) -> bytes | None:
    try:
        return ChaCha20Poly1305(bytes(key)).decrypt(nonce, ciphertext, aad)
    except InvalidTag:
        return None


class ReplayWindow:
    """
    Packet numbers seen under one key and direction.

    Numbers are not on the wire; receivers try the likely ones in order:
    the next few above the highest seen, then unseen gaps below it.
    """

    def __init__(self, lookahead: int = d.LOOKAHEAD, window: int = d.REPLAY_WINDOW):
        self.lookahead = lookahead
        self.window = window
        self.highest = -1
        self._seen: set[int] = set()

    def candidates(self) -> list[int]:
        ahead = list(range(self.highest + 1, self.highest + 1 + self.lookahead))
        floor = max(-1, self.highest - self.window)
        behind = [pn for pn in range(self.highest, floor, -1) if pn not in self._seen]
        return ahead + behind

    def mark(self, packet_number: int) -> bool:
        """
        Record a packet number. Returns True when it is the new highest.
        """
        self._seen.add(packet_number)
        if packet_number <= self.highest:
            return False
        self.highest = packet_number
        floor = self.highest - self.window
        self._seen = {pn for pn in self._seen if pn > floor}
        return True


class TunnelKeys:
    """
    Symmetric state of one tunnel: current key, generation and
    per-direction packet numbers.

    The key lives in a bytearray that is zeroed when the tunnel
    advances to the next generation.
    """

    def __init__(
        self,
        key: bytes,
        role: Role,
        generation: int = 0,
        lookahead: int = d.LOOKAHEAD,
        replay_window: int = d.REPLAY_WINDOW,
    ):
        self._key = bytearray(key)
        self.role = role
        self.generation = generation
        self.send_pn = 0
        self._lookahead = lookahead
        self._replay_window = replay_window
        self.replay = ReplayWindow(lookahead, replay_window)

    @property
    def key(self) -> bytes:
        return bytes(self._key)

    @property
    def peer_direction(self) -> Role:
        return Role.SERVER if self.role == Role.CLIENT else Role.CLIENT

    def seal(self, plaintext: bytes, aad: bytes) -> bytes:
        nonce = make_nonce(self.generation, self.role, self.send_pn)
        self.send_pn += 1
        return seal(self._key, nonce, plaintext, aad)

    def open(self, ciphertext: bytes, aad: bytes) -> tuple[bytes, bool] | None:
        """
        Trial-decrypt a packet from the peer.
        Returns (plaintext, is_new_highest), or None when nothing authenticates.
        """
        key = bytes(self._key)
        for pn in self.replay.candidates():
            nonce = make_nonce(self.generation, self.peer_direction, pn)
            plaintext = open_sealed(key, nonce, ciphertext, aad)
            if plaintext is not None:
                return plaintext, self.replay.mark(pn)
        return None

    def successor(self) -> "TunnelKeys":
        """
        Keys of the next generation, without touching this one.
        """
        return TunnelKeys(
            next_key(self._key),
            self.role,
            self.generation + 1,
            self._lookahead,
            self._replay_window,
        )

    def wipe(self) -> None:
        for i in range(len(self._key)):
            self._key[i] = 0


# ------------------------------------
# region - Host key files
# ------------------------------------


def private_bytes(key: X25519PrivateKey) -> bytes:
    return key.private_bytes(
        encoding=serialization.Encoding.Raw,
        format=serialization.PrivateFormat.Raw,
        encryption_algorithm=serialization.NoEncryption(),
    )


def save_host_keys(path: Path | str, eph_key: X25519PrivateKey, id_key: X25519PrivateKey) -> Path:
    """
    Write a server's ephemeral and identity keys, one hex line each.
    """
    return write_secret_file(path, f"{private_bytes(eph_key).hex()}\n{private_bytes(id_key).hex()}\n")


def load_host_keys(path: Path | str) -> tuple[X25519PrivateKey, X25519PrivateKey]:
    """
    Read keys written by save_host_keys() as (eph_key, id_key).
    """
    lines = read_secret_file(path).split()
    try:
        eph, id_ = (X25519PrivateKey.from_private_bytes(bytes.fromhex(line)) for line in lines)
    except ValueError as err:
        raise BadKey(f"Can't read host keys from {path}: {err}") from err
    return eph, id_


# endregion
# ------------------------------------
