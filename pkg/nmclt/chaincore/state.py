"""
Materialized chain state: balances, nonces and the name database.

Blocks are applied with a journal of the prior values they touch,
so the node can undo them again during a reorg.
"""

from __future__ import annotations

# Std
from dataclasses import dataclass, field

# nmclt
from nmclt.chaincore import defaults as d
from nmclt.chaincore.types import (
    Block,
    ChainParams,
    NameEntry,
    NameStatus,
    RejectReason,
    Transaction,
    TxKind,
)
from nmclt.chaincore.keys import decode_address, decode_point, derive_address
from nmclt.chaincore.transactions import verify_transaction_signature
from nmclt.chaincore.blocks import (
    ZERO_HASH,
    block_hash,
    block_reward,
    compute_tx_root,
    pow_check,
    registration_cost,
)
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import (
    AmountError,
    BadNonce,
    BadSignature,
    InsufficientFunds,
    InvalidAddress,
    InvalidPoint,
    MalformedName,
    MalformedTransaction,
    NameExpired,
    NameTaken,
    NotOwner,
    ValidationError,
)

logger = get_logger()


@dataclass
class ChainState:
    """
    Materialized view of the chain at its tip.

    Balances and nonces are keyed by address text. block_index holds
    every known block, side branches included; blocks are immutable so
    copies share them.
    """

    params: ChainParams = field(default_factory=ChainParams)
    tip_hash: bytes = ZERO_HASH
    height: int = -1
    balances: dict[str, int] = field(default_factory=dict)
    nonces: dict[str, int] = field(default_factory=dict)
    names: dict[str, NameEntry] = field(default_factory=dict)
    burned: int = 0
    block_index: dict[bytes, Block] = field(default_factory=dict)

    def copy(self, with_index: bool = True) -> "ChainState":
        """
        Independent copy. Without the index it is a cheap scratch state.
        """
        return ChainState(
            params=self.params,
            tip_hash=self.tip_hash,
            height=self.height,
            balances=dict(self.balances),
            nonces=dict(self.nonces),
            names=dict(self.names),
            burned=self.burned,
            block_index=dict(self.block_index) if with_index else {},
        )

    def balance(self, address: str) -> int:
        return self.balances.get(str(address), 0)

    def nonce(self, address: str) -> int:
        return self.nonces.get(str(address), 0)

    def sender_address(self, pubkey: bytes) -> str:
        return derive_address(pubkey, self.params.address_version).text

    def ledger_equals(self, other: "ChainState") -> bool:
        """
        Compare everything replay must reproduce. block_index is excluded.
        """
        return (
            self.tip_hash == other.tip_hash
            and self.height == other.height
            and self.burned == other.burned
            and _nonzero(self.balances) == _nonzero(other.balances)
            and self.nonces == other.nonces
            and self.names == other.names
        )


@dataclass
class BlockUndo:
    """
    Prior values of every key a block touched. None means absent.
    """

    block_hash: bytes
    prev_tip: bytes
    prev_height: int
    prev_burned: int
    balances: dict[str, int | None] = field(default_factory=dict)
    nonces: dict[str, int | None] = field(default_factory=dict)
    names: dict[str, NameEntry | None] = field(default_factory=dict)


def _nonzero(balances: dict[str, int]) -> dict[str, int]:
    return {k: v for k, v in balances.items() if v}


def checked_amount(value: int, what: str = "amount") -> int:
    """
    Raise AmountError unless value fits an unsigned 64-bit integer.
    """
    if not isinstance(value, int) or value < 0 or value > d.MAX_AMOUNT:
        raise AmountError(f"{what} {value} outside 0..2^64-1")
    return value


# ------------------------------------
# region - Names
# ------------------------------------


def is_expired(entry: NameEntry, height: int, params: ChainParams) -> bool:
    return height - entry.last_update_height >= params.name_expiry_blocks


def name_lookup(state: ChainState, name: str) -> NameEntry | NameStatus:
    """
    Look up a name at the current height.
    Returns the entry, or NameStatus.NOT_FOUND / NameStatus.EXPIRED.
    """
    entry = state.names.get(name)
    if entry is None:
        return NameStatus.NOT_FOUND
    if is_expired(entry, state.height, state.params):
        return NameStatus.EXPIRED
    return entry


def _merged_value(old: bytes, update: bytes) -> bytes:
    from nmclt.nameregistry.records import merge_record_values

    return merge_record_values(old, update)


# endregion
# ------------------------------------
# region - Validation
# ------------------------------------


def validate_transaction(
    state: ChainState, tx: Transaction, height: int | None = None
) -> None:
    """
    Validate a non-coinbase transaction against the state.

    height is the height of the block that would contain the
    transaction, the tip height + 1 by default.
    Raises a ValidationError subclass, returns None when valid.
    """
    _validate(state, tx, state.height + 1 if height is None else height)


def _validate(state: ChainState, tx: Transaction, height: int) -> tuple[str, int, int]:
    """
    Returns (sender address, total debit, burn).
    """
    params = state.params
    if tx.kind == TxKind.COINBASE:
        raise MalformedTransaction("Coinbase is only valid as the first block transaction")

    try:
        checked_amount(tx.amount, "amount")
        checked_amount(tx.fee, "fee")
        checked_amount(tx.nonce, "nonce")
    except AmountError as err:
        raise MalformedTransaction(str(err)) from err

    if not tx.sender_pubkey:
        raise MalformedTransaction("Missing sender_pubkey")
    try:
        decode_point(tx.sender_pubkey)
    except InvalidPoint as err:
        raise MalformedTransaction(f"Invalid sender_pubkey: {err}") from err

    if tx.new_owner_pubkey is not None:
        if tx.kind != TxKind.NAME_UPDATE:
            raise MalformedTransaction("new_owner_pubkey is only valid on NameUpdate")
        try:
            decode_point(tx.new_owner_pubkey)
        except InvalidPoint as err:
            raise MalformedTransaction(f"Invalid new_owner_pubkey: {err}") from err

    if not verify_transaction_signature(tx):
        raise BadSignature("Signature does not verify under sender_pubkey")

    sender = state.sender_address(tx.sender_pubkey)
    expected_nonce = state.nonce(sender) + 1
    if tx.nonce != expected_nonce:
        raise BadNonce(f"Expected nonce {expected_nonce}, got {tx.nonce}")

    burn = 0
    if tx.kind == TxKind.TRANSFER:
        if tx.name is not None or tx.value is not None:
            raise MalformedTransaction("Transfer carries no name or value")
        if not tx.recipient:
            raise MalformedTransaction("Transfer needs a recipient")
        try:
            recipient = decode_address(tx.recipient)
        except InvalidAddress as err:
            raise MalformedTransaction(f"Bad recipient: {err}") from err
        if recipient.version != params.address_version:
            raise MalformedTransaction("Recipient address version mismatch")
    else:
        _validate_name_op(state, tx, height)
        if tx.kind == TxKind.NAME_NEW:
            burn = registration_cost(height, params)

    debit = tx.amount + tx.fee + burn
    if state.balance(sender) < debit:
        raise InsufficientFunds(
            f"Balance {state.balance(sender)} below required {debit}"
        )
    return sender, debit, burn


def _validate_name_op(state: ChainState, tx: Transaction, height: int) -> None:
    params = state.params
    if tx.recipient is not None or tx.amount != 0:
        raise MalformedTransaction("Name operations carry no recipient and a zero amount")
    if not tx.name or not tx.name.startswith(d.NAME_PREFIX) or tx.name == d.NAME_PREFIX:
        raise MalformedName(f"Name '{tx.name}' lacks the '{d.NAME_PREFIX}' prefix")
    if tx.value is None:
        raise MalformedTransaction("Name operations need a value")
    if len(tx.value) > params.name_value_limit:
        raise MalformedTransaction(
            f"Value of {len(tx.value)} bytes exceeds {params.name_value_limit}"
        )

    entry = state.names.get(tx.name)
    if tx.kind == TxKind.NAME_NEW:
        if entry is not None and not is_expired(entry, height, params):
            raise NameTaken(f"Name '{tx.name}' is registered")
        return

    if entry is None:
        raise NotOwner(f"Name '{tx.name}' is not registered")
    if is_expired(entry, height, params):
        raise NameExpired(f"Name '{tx.name}' expired")
    if entry.owner_pubkey != tx.sender_pubkey:
        raise NotOwner(f"Sender does not own '{tx.name}'")
    merged = _merged_value(entry.value, tx.value)
    if len(merged) > params.name_value_limit:
        raise MalformedTransaction(
            f"Merged value of {len(merged)} bytes exceeds {params.name_value_limit}"
        )


def check_block_stateless(block: Block, params: ChainParams) -> tuple[RejectReason, str] | None:
    """
    Checks that need no chain state. Returns (reason, detail) on failure.
    """
    header = block.header
    if header.target != params.target or not pow_check(header):
        return RejectReason.BAD_POW, "Header hash above target"
    if compute_tx_root(block.transactions) != header.tx_root:
        return RejectReason.BAD_TX_ROOT, "tx_root does not match transactions"
    if len(block.transactions) - 1 > params.max_block_txs:
        return RejectReason.INVALID_TX, "Too many transactions"
    return check_coinbase(block, params)


def check_coinbase(block: Block, params: ChainParams) -> tuple[RejectReason, str] | None:
    txs = block.transactions
    if not txs or txs[0].kind != TxKind.COINBASE:
        return RejectReason.BAD_COINBASE, "First transaction is not a coinbase"
    if any(tx.kind == TxKind.COINBASE for tx in txs[1:]):
        return RejectReason.BAD_COINBASE, "More than one coinbase"

    coinbase = txs[0]
    if coinbase.sender_pubkey or coinbase.signature or coinbase.nonce != block.header.height:
        return RejectReason.BAD_COINBASE, "Malformed coinbase"
    try:
        if decode_address(coinbase.recipient or "").version != params.address_version:
            return RejectReason.BAD_COINBASE, "Coinbase address version mismatch"
    except InvalidAddress:
        return RejectReason.BAD_COINBASE, "Invalid coinbase address"

    fees = sum(tx.fee for tx in txs[1:])
    expected = block_reward(block.header.height, params.halving_interval) + fees
    if coinbase.amount != expected or expected > d.MAX_AMOUNT:
        return RejectReason.BAD_COINBASE, f"Coinbase {coinbase.amount} != reward + fees {expected}"

    for tx in txs[1:]:
        if not verify_transaction_signature(tx):
            return RejectReason.INVALID_TX, "Transaction signature does not verify"
    return None


# endregion
# ------------------------------------
# region - Apply / undo
# ------------------------------------


class _Journal:
    def __init__(self, state: ChainState, undo: BlockUndo):
        self.state = state
        self.undo = undo

    def set_balance(self, address: str, value: int):
        self.undo.balances.setdefault(address, self.state.balances.get(address))
        self.state.balances[address] = checked_amount(value, "balance")

    def set_nonce(self, address: str, value: int):
        self.undo.nonces.setdefault(address, self.state.nonces.get(address))
        self.state.nonces[address] = value

    def set_name(self, name: str, entry: NameEntry):
        self.undo.names.setdefault(name, self.state.names.get(name))
        self.state.names[name] = entry


def apply_block(state: ChainState, block: Block) -> BlockUndo:
    """
    Apply a block on top of the state, in place.

    The block must extend the tip. On failure the state is left
    untouched and ValidationError is raised.
    """
    header = block.header
    if header.prev_hash != state.tip_hash or header.height != state.height + 1:
        raise ValidationError(
            f"Block at height {header.height} does not extend tip at {state.height}"
        )
    problem = check_coinbase(block, state.params)
    if problem:
        raise MalformedTransaction(problem[1])

    undo = BlockUndo(
        block_hash=block_hash(block),
        prev_tip=state.tip_hash,
        prev_height=state.height,
        prev_burned=state.burned,
    )
    journal = _Journal(state, undo)
    try:
        coinbase = block.coinbase
        journal.set_balance(coinbase.recipient, state.balance(coinbase.recipient) + coinbase.amount)
        for tx in block.transactions[1:]:
            _apply_transaction(journal, tx, header.height)
    except (ValidationError, AmountError):
        undo_block(state, undo)
        raise

    state.tip_hash = undo.block_hash
    state.height = header.height
    state.block_index[undo.block_hash] = block
    return undo


def apply_transaction(state: ChainState, tx: Transaction, height: int | None = None) -> None:
    """
    Validate and apply one transaction to a scratch state, without undo data.
    """
    height = state.height + 1 if height is None else height
    undo = BlockUndo(b"", state.tip_hash, state.height, state.burned)
    _apply_transaction(_Journal(state, undo), tx, height)


def _apply_transaction(journal: _Journal, tx: Transaction, height: int) -> None:
    state = journal.state
    sender, debit, burn = _validate(state, tx, height)

    journal.set_balance(sender, state.balance(sender) - debit)
    journal.set_nonce(sender, tx.nonce)
    state.burned += burn

    if tx.kind == TxKind.TRANSFER:
        journal.set_balance(tx.recipient, state.balance(tx.recipient) + tx.amount)
    elif tx.kind == TxKind.NAME_NEW:
        journal.set_name(tx.name, NameEntry(tx.sender_pubkey, tx.value, height))
    elif tx.kind == TxKind.NAME_UPDATE:
        entry = state.names[tx.name]
        journal.set_name(
            tx.name,
            NameEntry(
                owner_pubkey=tx.new_owner_pubkey or entry.owner_pubkey,
                value=_merged_value(entry.value, tx.value),
                last_update_height=height,
            ),
        )


def undo_block(state: ChainState, undo: BlockUndo) -> None:
    """
    Reverse apply_block(). block_index keeps the block.
    """
    for store, prior in (
        (state.balances, undo.balances),
        (state.nonces, undo.nonces),
        (state.names, undo.names),
    ):
        for key, value in prior.items():
            if value is None:
                store.pop(key, None)
            else:
                store[key] = value
    state.burned = undo.prev_burned
    state.tip_hash = undo.prev_tip
    state.height = undo.prev_height


# endregion
# ------------------------------------
# region - Oracles
# ------------------------------------


def replay_chain(blocks: list[Block], params: ChainParams | None = None) -> ChainState:
    """
    Rebuild state from genesis by applying every block in order.
    """
    state = ChainState(params=params or ChainParams())
    for block in blocks:
        apply_block(state, block)
    return state


def conservation_holds(state: ChainState) -> bool:
    """
    Sum of balances plus burned fees equals every reward issued so far.
    """
    issued = sum(
        block_reward(h, state.params.halving_interval) for h in range(state.height + 1)
    )
    return sum(state.balances.values()) + state.burned == issued


# endregion
# ------------------------------------
