"""
Proof-of-work chain with account balances and an embedded name database.

Usage:
    from nmclt import chaincore

    key = chaincore.KeyPair.generate()
    node = chaincore.ChainNode(chaincore.ChainParams())
    node.mine_block(key.address())
"""

# nmclt
from nmclt.chaincore.types import (
    Address,
    Block,
    BlockHeader,
    ChainParams,
    NameEntry,
    NameStatus,
    RejectReason,
    SubmitResult,
    Transaction,
    TxKind,
)
from nmclt.chaincore.keys import (
    KeyPair,
    burn_address,
    decode_address,
    derive_address,
    load_key,
    save_key,
    verify_signature,
)
from nmclt.chaincore.transactions import (
    sign_transaction,
    tx_hash,
    verify_transaction_signature,
)
from nmclt.chaincore.blocks import (
    block_hash,
    block_reward,
    build_genesis,
    network_fee,
    pow_check,
)
from nmclt.chaincore.state import (
    ChainState,
    conservation_holds,
    name_lookup,
    replay_chain,
    validate_transaction,
)
from nmclt.chaincore.mempool import Mempool
from nmclt.chaincore.mining import Miner, assemble_block, mine
from nmclt.chaincore.node import ChainNode
from nmclt.chaincore.storage import (
    load_chain,
    load_mempool,
    load_or_create_chain,
    save_chain,
    save_mempool,
)


# ------------------------------------
# region - Transaction builders
# ------------------------------------


def make_transfer(
    key: KeyPair, recipient: Address | str, amount: int, fee: int, nonce: int
) -> Transaction:
    """
    Build and sign a currency transfer.
    """
    tx = Transaction(
        kind=TxKind.TRANSFER,
        sender_pubkey=key.public_key,
        recipient=str(recipient),
        amount=amount,
        fee=fee,
        nonce=nonce,
    )
    return sign_transaction(tx, key)


# endregion
# ------------------------------------
