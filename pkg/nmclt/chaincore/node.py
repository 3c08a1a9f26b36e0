"""
ChainNode: the single writer over a chain state.

Holds every known block, follows the longest valid chain, and keeps
the mempool in step with the tip. All mutations go through one lock;
other threads read through snapshot().
"""

# Std
import threading
from collections import OrderedDict

# nmclt
from nmclt.chaincore import defaults as d
from nmclt.chaincore.types import (
    Address,
    Block,
    ChainParams,
    NameEntry,
    NameStatus,
    RejectReason,
    SubmitResult,
    Transaction,
)
from nmclt.chaincore.state import (
    BlockUndo,
    ChainState,
    apply_block,
    check_block_stateless,
    name_lookup,
    undo_block,
)
from nmclt.chaincore.blocks import block_hash, build_genesis
from nmclt.chaincore.mempool import Mempool
from nmclt.chaincore.mining import assemble_block, mine
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import AmountError, ValidationError

logger = get_logger()


class ChainNode:
    """
    A full node over one chain.

    Usage:
        node = ChainNode(ChainParams())
        node.submit_transaction(tx)
        block = node.mine_block(miner_address)
        node.name_lookup("d/example")
    """

    def __init__(
        self,
        params: ChainParams | None = None,
        genesis: Block | None = None,
        orphan_limit: int = d.ORPHAN_POOL_LIMIT,
    ):
        self.params = params or ChainParams()
        self.mempool = Mempool()
        self._lock = threading.RLock()
        self._index: dict[bytes, Block] = {}
        self._undo: dict[bytes, BlockUndo] = {}
        self._active: list[bytes] = []
        self._invalid: set[bytes] = set()
        self._orphans: OrderedDict[bytes, Block] = OrderedDict()
        self._orphan_limit = orphan_limit

        self._state = ChainState(params=self.params)
        self._state.block_index = self._index

        genesis = genesis or build_genesis(self.params)
        self._connect(genesis)
        self.genesis_hash = block_hash(genesis)

    # ------------------------------------
    # region - Read access
    # ------------------------------------

    @property
    def tip_hash(self) -> bytes:
        return self._state.tip_hash

    @property
    def height(self) -> int:
        return self._state.height

    def snapshot(self) -> ChainState:
        """
        Read-only copy of the current state, safe to share across threads.
        """
        with self._lock:
            return self._state.copy()

    def get_block(self, hash_: bytes) -> Block | None:
        return self._index.get(hash_)

    def active_chain(self) -> list[Block]:
        """
        Blocks of the best chain, genesis first.
        """
        with self._lock:
            return [self._index[h] for h in self._active]

    def balance(self, address: Address | str) -> int:
        return self._state.balance(str(address))

    def name_lookup(self, name: str) -> NameEntry | NameStatus:
        with self._lock:
            return name_lookup(self._state, name)

    # endregion
    # ------------------------------------
    # region - Transactions & mining
    # ------------------------------------

    def submit_transaction(self, tx: Transaction) -> None:
        """
        Admit a transaction to the mempool, raising ValidationError if invalid.
        """
        with self._lock:
            self.mempool.add(tx, self._state)

    def next_nonce(self, pubkey: bytes) -> int:
        with self._lock:
            return self.mempool.next_nonce(self._state, pubkey)

    def assemble(self, coinbase_addr: Address | str, timestamp: int | None = None) -> Block:
        with self._lock:
            return assemble_block(self.mempool, self._state, coinbase_addr, timestamp=timestamp)

    def mine_block(
        self,
        coinbase_addr: Address | str,
        max_attempts: int = d.MINE_ATTEMPTS,
        timestamp: int | None = None,
    ) -> Block:
        """
        Assemble, mine and submit one block on the current tip.
        """
        block = mine(self.assemble(coinbase_addr, timestamp), max_attempts)
        result = self.submit_block(block)
        if not result.accepted:
            raise ValidationError(f"Own block rejected: {result.reason} {result.detail}")
        return block

    # endregion
    # ------------------------------------
    # region - Block submission
    # ------------------------------------

    def submit_block(self, block: Block) -> SubmitResult:
        """
        Store a block and switch to its chain when that chain is
        strictly longer than the current one.
        """
        with self._lock:
            hash_ = block_hash(block)
            if hash_ in self._invalid:
                return SubmitResult(False, reason=RejectReason.INVALID_TX, detail="Known invalid")
            if hash_ in self._index or hash_ in self._orphans:
                return SubmitResult(False, reason=RejectReason.DUPLICATE)

            problem = check_block_stateless(block, self.params)
            if problem:
                logger.info("Block %s rejected: %s", hash_.hex()[:16], problem[1])
                return SubmitResult(False, reason=problem[0], detail=problem[1])

            header = block.header
            parent = self._index.get(header.prev_hash)
            if parent is None:
                if header.prev_hash in self._invalid:
                    self._invalid.add(hash_)
                    return SubmitResult(False, reason=RejectReason.INVALID_TX, detail="Invalid parent")
                self._hold_orphan(hash_, block)
                return SubmitResult(False, reason=RejectReason.UNKNOWN_PARENT, held=True)

            if header.height != parent.header.height + 1:
                return SubmitResult(False, reason=RejectReason.BAD_HEIGHT)

            self._index[hash_] = block
            result = self._consider(hash_)
            self._connect_orphans(hash_)
            return result

    def _hold_orphan(self, hash_: bytes, block: Block) -> None:
        self._orphans[hash_] = block
        while len(self._orphans) > self._orphan_limit:
            self._orphans.popitem(last=False)
        logger.debug("Holding orphan block %s", hash_.hex()[:16])

    def _connect_orphans(self, parent_hash: bytes) -> None:
        children = [
            h for h, block in self._orphans.items() if block.header.prev_hash == parent_hash
        ]
        for child in children:
            block = self._orphans.pop(child)
            self.submit_block(block)

    def _consider(self, hash_: bytes) -> SubmitResult:
        block = self._index[hash_]
        if block.header.height <= self._state.height:
            logger.debug("Block %s stored on a side branch", hash_.hex()[:16])
            return SubmitResult(True, new_tip=False)
        return self._reorg_to(hash_)

    def _connect(self, block: Block) -> None:
        undo = apply_block(self._state, block)
        self._undo[undo.block_hash] = undo
        self._active.append(undo.block_hash)

    def _disconnect(self) -> Block:
        hash_ = self._active.pop()
        undo_block(self._state, self._undo.pop(hash_))
        return self._index[hash_]

    def _reorg_to(self, new_tip: bytes) -> SubmitResult:
        # Walk back to the fork point on the active chain
        branch = []
        cursor = new_tip
        while True:
            if cursor in self._invalid:
                self._mark_invalid(branch)
                return SubmitResult(
                    False, reason=RejectReason.INVALID_TX, detail="Descends from an invalid block"
                )
            block = self._index[cursor]
            height = block.header.height
            if height < len(self._active) and self._active[height] == cursor:
                break
            branch.append(cursor)
            cursor = block.header.prev_hash
        branch.reverse()
        fork_height = self._index[cursor].header.height

        abandoned: list[Block] = []
        while len(self._active) - 1 > fork_height:
            abandoned.append(self._disconnect())
        abandoned.reverse()

        for i, hash_ in enumerate(branch):
            try:
                self._connect(self._index[hash_])
            except (ValidationError, AmountError) as err:
                self._mark_invalid(branch[i:])
                while len(self._active) - 1 > fork_height:
                    self._disconnect()
                for block in abandoned:
                    self._connect(block)
                logger.info("Block %s rejected: %s", hash_.hex()[:16], err)
                return SubmitResult(False, reason=RejectReason.INVALID_TX, detail=str(err))

        returned = [tx for block in abandoned for tx in block.transactions[1:]]
        self.mempool.revalidate(self._state, extra=returned)
        if abandoned:
            logger.info(
                "Reorg to %s at height %s: depth %s, %s transactions returned to the mempool",
                new_tip.hex()[:16],
                self._state.height,
                len(abandoned),
                len(returned),
            )
        else:
            logger.info("Block %s accepted at height %s", new_tip.hex()[:16], self._state.height)
        return SubmitResult(True, new_tip=True)

    def _mark_invalid(self, hashes: list[bytes]) -> None:
        for hash_ in hashes:
            self._invalid.add(hash_)
            self._index.pop(hash_, None)

    # endregion
    # ------------------------------------
