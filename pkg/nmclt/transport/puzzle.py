"""
Client puzzles for admission under load.

The server issues stateless puzzles: the nonce is a MAC over the
tunnel id and client key, so verification needs no stored state.
"""

# Std
import hmac
import struct
import hashlib

# nmclt
from nmclt.transport import defaults as d
from nmclt.transport.types import Puzzle
from nmclt.util.exceptions import PuzzleTooHard


def puzzle_nonce(secret: bytes, tid: int, client_eph_pub: bytes) -> bytes:
    mac = hmac.new(secret, struct.pack(">Q", tid) + client_eph_pub, hashlib.sha256)
    return mac.digest()[:16]


def leading_zero_bits(digest: bytes) -> int:
    value = int.from_bytes(digest, "big")
    return len(digest) * 8 - value.bit_length()


def puzzle_valid(puzzle: Puzzle, solution: int, client_eph_pub: bytes) -> bool:
    """
    SHA-256(puzzle_nonce || solution || client_eph_pub) must start
    with `difficulty` zero bits.
    """
    if not 0 <= solution < 2**64:
        return False
    digest = hashlib.sha256(
        puzzle.puzzle_nonce + struct.pack(">Q", solution) + client_eph_pub
    ).digest()
    return leading_zero_bits(digest) >= puzzle.difficulty


def solve_puzzle(puzzle: Puzzle, client_eph_pub: bytes) -> int:
    """
    Search solutions upward from 0. The number of attempts is solution + 1.
    """
    if puzzle.difficulty > d.MAX_PUZZLE_DIFFICULTY:
        raise PuzzleTooHard(
            f"Difficulty {puzzle.difficulty} above the cap of {d.MAX_PUZZLE_DIFFICULTY}"
        )
    prefix = hashlib.sha256(puzzle.puzzle_nonce)
    solution = 0
    while True:
        h = prefix.copy()
        h.update(struct.pack(">Q", solution) + client_eph_pub)
        if leading_zero_bits(h.digest()) >= puzzle.difficulty:
            return solution
        solution += 1
