"""
Pending transactions, ordered by decreasing fee.
"""

# Std
import threading

# nmclt
from nmclt.chaincore.types import Transaction
from nmclt.chaincore.state import ChainState, apply_transaction
from nmclt.chaincore.transactions import tx_hash
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import ValidationError

logger = get_logger()


class Mempool:
    """
    Pending transactions keyed by (sender, nonce).

    A transaction is admitted when it validates against the tip state
    extended with the sender's pending transactions of lower nonce.
    """

    def __init__(self):
        self._entries: dict[tuple[str, int], Transaction] = {}
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, tx: Transaction) -> bool:
        return any(tx_hash(tx) == tx_hash(entry) for entry in self._entries.values())

    def __iter__(self):
        return iter(self.ordered())

    def add(self, tx: Transaction, state: ChainState) -> None:
        """
        Validate and admit a transaction. Raises a ValidationError subclass.
        """
        with self._lock:
            sender = state.sender_address(tx.sender_pubkey) if tx.sender_pubkey else ""
            key = (sender, tx.nonce)
            if key in self._entries:
                if tx_hash(self._entries[key]) == tx_hash(tx):
                    return
                raise ValidationError(f"Pending transaction with nonce {tx.nonce} exists")

            scratch = state.copy(with_index=False)
            for (other, nonce), pending in sorted(self._entries.items()):
                if other == sender and nonce < tx.nonce:
                    apply_transaction(scratch, pending)
            apply_transaction(scratch, tx)
            self._entries[key] = tx

    def next_nonce(self, state: ChainState, pubkey: bytes) -> int:
        """
        Nonce for a key's next transaction, after its pending ones.
        """
        with self._lock:
            sender = state.sender_address(pubkey)
            pending = [nonce for other, nonce in self._entries if other == sender]
            return max([state.nonce(sender), *pending]) + 1

    def ordered(self) -> list[Transaction]:
        """
        Decreasing fee, ties broken by ascending transaction hash.
        """
        with self._lock:
            return sorted(self._entries.values(), key=lambda tx: (-tx.fee, tx_hash(tx)))

    def revalidate(self, state: ChainState, extra: list[Transaction] | None = None) -> int:
        """
        Rebuild against a new tip, optionally returning abandoned
        transactions to the pool. Invalid entries are dropped.
        Returns the number of entries dropped.
        """
        with self._lock:
            candidates = list(self._entries.values()) + list(extra or [])
            self._entries = {}
            dropped = 0
            for tx in sorted(candidates, key=lambda tx: (tx.sender_pubkey or b"", tx.nonce)):
                try:
                    self.add(tx, state)
                except ValidationError as err:
                    dropped += 1
                    logger.debug("Mempool dropped %s: %s", tx_hash(tx).hex()[:16], err)
            return dropped

    def clear(self) -> None:
        with self._lock:
            self._entries = {}
