"""
Types used in the chaincore module.
"""

from __future__ import annotations

from enum import Enum, IntEnum
from dataclasses import dataclass

from nmclt.chaincore import defaults as d


class TxKind(IntEnum):
    """
    Transaction kinds, with their canonical encoding byte.
    """

    TRANSFER = 0
    NAME_NEW = 1
    NAME_UPDATE = 2
    COINBASE = 3

    @property
    def is_name_op(self) -> bool:
        return self in (TxKind.NAME_NEW, TxKind.NAME_UPDATE)


class NameStatus(Enum):
    """
    Outcome of a name lookup that didn't return an entry.
    """

    NOT_FOUND = "not_found"
    EXPIRED = "expired"


class RejectReason(Enum):
    """
    Reasons for submit_block to refuse a block.
    """

    BAD_POW = "BadPoW"
    UNKNOWN_PARENT = "UnknownParent"
    INVALID_TX = "InvalidTx"
    BAD_COINBASE = "BadCoinbase"
    BAD_HEIGHT = "BadHeight"
    BAD_TX_ROOT = "BadTxRoot"
    DUPLICATE = "Duplicate"


@dataclass(frozen=True)
class Address:
    """
    Base58Check address: Base58(version + key_hash + checksum).
    """

    version: int
    key_hash: bytes
    checksum: bytes
    text: str

    def raw(self) -> bytes:
        """The 25 raw bytes behind the text form."""
        return bytes([self.version]) + self.key_hash + self.checksum

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class Transaction:
    """
    Ledger transaction. Field order is the canonical encoding order.

    Name* transactions carry no recipient and a zero amount; Coinbase
    carries no sender and uses its nonce to record the block height.
    """

    kind: TxKind
    sender_pubkey: bytes | None = None
    recipient: str | None = None
    amount: int = 0
    fee: int = 0
    name: str | None = None
    value: bytes | None = None
    nonce: int = 0
    new_owner_pubkey: bytes | None = None
    signature: bytes | None = None


@dataclass(frozen=True)
class BlockHeader:
    """
    Block header, hashed in canonical form for proof of work.
    """

    prev_hash: bytes
    tx_root: bytes
    height: int
    timestamp: int
    target: int
    challenge_nonce: int = 0


@dataclass(frozen=True)
class Block:
    """
    A header and its ordered transactions, coinbase first.
    """

    header: BlockHeader
    transactions: tuple[Transaction, ...]

    @property
    def coinbase(self) -> Transaction:
        return self.transactions[0]


@dataclass(frozen=True)
class NameEntry:
    """
    Live value under a d/ name.
    """

    owner_pubkey: bytes
    value: bytes
    last_update_height: int


@dataclass(frozen=True)
class SubmitResult:
    """
    Outcome of ChainNode.submit_block().

    held: the block was parked in the orphan pool until its parent arrives.
    """

    accepted: bool
    new_tip: bool = False
    reason: RejectReason | None = None
    held: bool = False
    detail: str = ""


@dataclass(frozen=True)
class ChainParams:
    """
    Consensus parameters. Nodes only agree when their params agree.
    """

    target: int = d.POW_TARGET
    block_interval: int = d.BLOCK_INTERVAL
    name_expiry_blocks: int = d.NAME_EXPIRY_BLOCKS
    fee_epoch_blocks: int = d.FEE_EPOCH_BLOCKS
    halving_interval: int = d.HALVING_INTERVAL
    max_block_txs: int = d.MAX_BLOCK_TXS
    address_version: int = d.ADDRESS_VERSION
    registration_burn: int = d.REGISTRATION_BURN
    name_value_limit: int = d.NAME_VALUE_LIMIT

    @classmethod
    def from_config(cls) -> "ChainParams":
        """
        Build chain parameters from the nmclt configuration.
        """
        from nmclt.configuration import config

        cfg = config()
        return cls(
            target=int(cfg.pow_target, 16),
            block_interval=int(cfg.block_interval),
            name_expiry_blocks=int(cfg.name_expiry_blocks),
            fee_epoch_blocks=int(cfg.fee_epoch_blocks),
            halving_interval=int(cfg.halving_interval),
            max_block_txs=int(cfg.max_block_txs),
            address_version=int(cfg.address_version),
        )
