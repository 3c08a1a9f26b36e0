"""
Chain and mempool files.

The chain file holds one block per line in JSON, genesis first.
Each line carries the block hash so edits are detected on load;
hashing itself always runs over the canonical binary form.
"""

# Std
import os
import json
from pathlib import Path

# nmclt
from nmclt.chaincore.types import Block, ChainParams
from nmclt.chaincore.blocks import block_from_json, block_hash, block_to_json, build_genesis
from nmclt.chaincore.mempool import Mempool
from nmclt.chaincore.node import ChainNode
from nmclt.chaincore.transactions import tx_from_json, tx_to_json
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import CorruptChainFile, ValidationError

logger = get_logger()


def mempool_path(chain_path: Path | str) -> Path:
    """
    The mempool file sits next to the chain file.
    """
    chain_path = Path(chain_path).expanduser()
    return chain_path.with_name(chain_path.stem + ".mempool.jsonl")


def _write_lines(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as file:
        for line in lines:
            file.write(line + "\n")
    os.replace(tmp, path)


def save_chain(node: ChainNode, path: Path | str) -> Path:
    """
    Write the node's best chain, genesis first.
    """
    path = Path(path).expanduser()
    lines = [json.dumps(block_to_json(block), sort_keys=True) for block in node.active_chain()]
    _write_lines(path, lines)
    logger.debug("Saved %s blocks to %s", len(lines), path)
    return path


def read_blocks(path: Path | str) -> list[Block]:
    """
    Parse a chain file. A torn final line without a newline is ignored.
    """
    path = Path(path).expanduser()
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    torn = lines.pop() if lines else ""
    if torn.strip():
        logger.warning("Ignoring incomplete last line in %s", path)

    blocks = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            block = block_from_json(data)
        except (ValueError, KeyError, TypeError) as err:
            raise CorruptChainFile(f"{path.name} line {number}: {err}") from err
        if data.get("hash") != block_hash(block).hex():
            raise CorruptChainFile(f"{path.name} line {number}: block hash mismatch")
        blocks.append(block)
    return blocks


def load_chain(path: Path | str, params: ChainParams | None = None) -> ChainNode:
    """
    Rebuild a node from a chain file. The state is obtained by
    replaying every block, so it matches the saved one exactly.
    """
    params = params or ChainParams()
    blocks = read_blocks(path)
    genesis = build_genesis(params)
    if not blocks:
        return ChainNode(params, genesis)
    if block_hash(blocks[0]) != block_hash(genesis):
        raise CorruptChainFile("Genesis block does not match the configured chain")

    node = ChainNode(params, genesis)
    for height, block in enumerate(blocks[1:], start=1):
        if block.header.height != height:
            raise CorruptChainFile(f"Block at line {height + 1} has height {block.header.height}")
        result = node.submit_block(block)
        if not result.new_tip:
            raise CorruptChainFile(
                f"Block at height {height} does not extend the chain: {result.reason} {result.detail}"
            )
    logger.debug("Loaded chain from %s at height %s", path, node.height)
    return node


def load_or_create_chain(path: Path | str, params: ChainParams | None = None) -> ChainNode:
    """
    Load the chain file, or start a fresh chain at genesis when missing.
    """
    path = Path(path).expanduser()
    if path.exists():
        return load_chain(path, params)
    node = ChainNode(params)
    save_chain(node, path)
    return node


# ------------------------------------
# region - Mempool
# ------------------------------------


def save_mempool(mempool: Mempool, path: Path | str) -> Path:
    path = Path(path).expanduser()
    _write_lines(path, [json.dumps(tx_to_json(tx), sort_keys=True) for tx in mempool.ordered()])
    return path


def load_mempool(node: ChainNode, path: Path | str) -> int:
    """
    Admit saved transactions into the node's mempool.
    Transactions that no longer validate are dropped.
    Returns the number admitted.
    """
    path = Path(path).expanduser()
    if not path.exists():
        return 0
    txs = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            txs.append(tx_from_json(json.loads(line)))

    admitted = 0
    for tx in sorted(txs, key=lambda tx: (tx.sender_pubkey or b"", tx.nonce)):
        try:
            node.submit_transaction(tx)
            admitted += 1
        except ValidationError as err:
            logger.debug("Dropping saved transaction: %s", err)
    return admitted


# endregion
# ------------------------------------
