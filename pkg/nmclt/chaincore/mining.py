"""
Block assembly and proof-of-work search.
"""

# Std
import dataclasses
from concurrent.futures import Future, ThreadPoolExecutor

# nmclt
from nmclt.chaincore import defaults as d
from nmclt.chaincore.types import Address, Block
from nmclt.chaincore.state import ChainState, apply_transaction
from nmclt.chaincore.mempool import Mempool
from nmclt.chaincore.blocks import block_reward, make_block, make_coinbase, pow_check
from nmclt.chaincore.transactions import tx_hash
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import MiningExhausted, ValidationError

logger = get_logger()


def _sort_key(tx) -> tuple[int, bytes]:
    return -tx.fee, tx_hash(tx)


def assemble_block(
    mempool: Mempool,
    state: ChainState,
    coinbase_addr: Address | str,
    max_txs: int | None = None,
    timestamp: int | None = None,
) -> Block:
    """
    Build an unmined block on top of the state's tip.

    Transactions are taken in decreasing fee order, ties by ascending
    hash. Repeated passes let a sender's later nonce follow its earlier
    one, but only where it still fits that order; anything else is left
    in the mempool for a later block.
    """
    params = state.params
    max_txs = params.max_block_txs if max_txs is None else max_txs
    height = state.height + 1

    scratch = state.copy(with_index=False)
    selected = []
    pending = mempool.ordered()
    progress = True
    while progress and pending and len(selected) < max_txs:
        progress = False
        for tx in list(pending):
            if len(selected) >= max_txs:
                break
            if selected and _sort_key(tx) < _sort_key(selected[-1]):
                continue
            try:
                apply_transaction(scratch, tx, height)
            except ValidationError:
                continue
            selected.append(tx)
            pending.remove(tx)
            progress = True
    if pending:
        logger.debug("Left %s transactions out of the block at height %s", len(pending), height)

    fees = sum(tx.fee for tx in selected)
    coinbase = make_coinbase(
        str(coinbase_addr), block_reward(height, params.halving_interval) + fees, height
    )

    if timestamp is None:
        parent = state.block_index.get(state.tip_hash)
        parent_time = parent.header.timestamp if parent else 0
        timestamp = parent_time + params.block_interval

    return make_block(state.tip_hash, height, timestamp, params.target, [coinbase] + selected)


def mine(block: Block, max_attempts: int = d.MINE_ATTEMPTS, start_nonce: int = 0) -> Block:
    """
    Search challenge nonces upward from start_nonce until the header
    hash falls at or below the target.
    """
    header = block.header
    for nonce in range(start_nonce, start_nonce + max_attempts):
        candidate = dataclasses.replace(header, challenge_nonce=nonce)
        if pow_check(candidate):
            return dataclasses.replace(block, header=candidate)
    raise MiningExhausted(f"No nonce found in {max_attempts} attempts")


class Miner:
    """
    Runs mine() on worker threads over immutable block templates.

    Usage:
        miner = Miner()
        future = miner.submit(template)
        block = future.result()
    """

    def __init__(self, workers: int = 1):
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="miner")

    def submit(self, template: Block, max_attempts: int = d.MINE_ATTEMPTS) -> Future:
        return self._pool.submit(mine, template, max_attempts)

    def shutdown(self, wait: bool = True) -> None:
        self._pool.shutdown(wait=wait, cancel_futures=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()
