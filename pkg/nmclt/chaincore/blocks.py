"""
Block headers, proof of work and the reward / fee schedules.
"""

# nmclt
from nmclt.chaincore import defaults as d
from nmclt.chaincore.types import Block, BlockHeader, ChainParams, Transaction, TxKind
from nmclt.chaincore.keys import burn_address
from nmclt.chaincore.encoding import CanonicalWriter
from nmclt.chaincore.transactions import tx_hash, tx_to_json, tx_from_json
from nmclt.util.general import sha256

ZERO_HASH = bytes(32)


# ------------------------------------
# region - Hashing
# ------------------------------------


def serialize_header(header: BlockHeader) -> bytes:
    return (
        CanonicalWriter()
        .fixed(header.prev_hash, 32)
        .fixed(header.tx_root, 32)
        .u64(header.height)
        .u64(header.timestamp)
        .fixed(header.target.to_bytes(32, "big"), 32)
        .u64(header.challenge_nonce)
        .bytes()
    )


def header_hash(header: BlockHeader) -> bytes:
    return sha256(serialize_header(header))


def block_hash(block: Block) -> bytes:
    return header_hash(block.header)


def compute_tx_root(transactions: tuple[Transaction, ...] | list[Transaction]) -> bytes:
    """
    SHA-256 of the concatenated transaction hashes, in block order.
    """
    return sha256(b"".join(tx_hash(tx) for tx in transactions))


def pow_check(header: BlockHeader) -> bool:
    """
    True when the header hash, read big-endian, is at or below the target.
    """
    return int.from_bytes(header_hash(header), "big") <= header.target


# endregion
# ------------------------------------
# region - Schedules
# ------------------------------------


def block_reward(height: int, halving_interval: int = d.HALVING_INTERVAL) -> int:
    """
    Coinbase reward at a height, halving every halving_interval blocks.
    """
    shift = height // halving_interval
    if shift >= 64:
        return 0
    return d.INITIAL_REWARD >> shift


def network_fee(height: int, fee_epoch_blocks: int = d.FEE_EPOCH_BLOCKS) -> int:
    """
    Network fee burned by NameNew, halving once per fee epoch.
    """
    shift = height // fee_epoch_blocks
    if shift >= 64:
        return 0
    return d.INITIAL_NETWORK_FEE >> shift


def registration_cost(height: int, params: ChainParams) -> int:
    """
    Total burn of a NameNew at a height: registration fee plus network fee.
    """
    return params.registration_burn + network_fee(height, params.fee_epoch_blocks)


# endregion
# ------------------------------------
# region - Construction
# ------------------------------------


def make_coinbase(recipient: str, amount: int, height: int) -> Transaction:
    return Transaction(kind=TxKind.COINBASE, recipient=recipient, amount=amount, nonce=height)


def make_block(
    prev_hash: bytes,
    height: int,
    timestamp: int,
    target: int,
    transactions: list[Transaction],
    challenge_nonce: int = 0,
) -> Block:
    """
    Build a block with its tx_root computed from the transactions.
    """
    transactions = tuple(transactions)
    header = BlockHeader(
        prev_hash=prev_hash,
        tx_root=compute_tx_root(transactions),
        height=height,
        timestamp=timestamp,
        target=target,
        challenge_nonce=challenge_nonce,
    )
    return Block(header=header, transactions=transactions)


def build_genesis(params: ChainParams | None = None) -> Block:
    """
    The fixed genesis block: timestamp 0, coinbase paid to the burn address.
    Genesis skips proof of work.
    """
    params = params or ChainParams()
    coinbase = make_coinbase(
        str(burn_address(params.address_version)),
        block_reward(0, params.halving_interval),
        0,
    )
    return make_block(ZERO_HASH, 0, 0, params.target, [coinbase])


# endregion
# ------------------------------------
# region - JSON form
# ------------------------------------


def block_to_json(block: Block) -> dict:
    header = block.header
    return {
        "hash": block_hash(block).hex(),
        "header": {
            "prev_hash": header.prev_hash.hex(),
            "tx_root": header.tx_root.hex(),
            "height": header.height,
            "timestamp": header.timestamp,
            "target": header.target.to_bytes(32, "big").hex(),
            "nonce": header.challenge_nonce,
        },
        "txs": [tx_to_json(tx) for tx in block.transactions],
    }


def block_from_json(data: dict) -> Block:
    header = data["header"]
    return Block(
        header=BlockHeader(
            prev_hash=bytes.fromhex(header["prev_hash"]),
            tx_root=bytes.fromhex(header["tx_root"]),
            height=int(header["height"]),
            timestamp=int(header["timestamp"]),
            target=int(header["target"], 16),
            challenge_nonce=int(header["nonce"]),
        ),
        transactions=tuple(tx_from_json(tx) for tx in data["txs"]),
    )


# endregion
# ------------------------------------
