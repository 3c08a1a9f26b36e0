"""
Tests for the chain core: keys, schedules, validation, names,
fork choice and chain files.
"""

# Std
import os
import json
import stat
import random
import dataclasses

# 3rd party
import pytest

# nmclt
from nmclt.chaincore import (
    ChainNode,
    ChainParams,
    KeyPair,
    Mempool,
    Miner,
    NameEntry,
    NameStatus,
    RejectReason,
    Transaction,
    TxKind,
    assemble_block,
    block_hash,
    block_reward,
    build_genesis,
    burn_address,
    conservation_holds,
    decode_address,
    derive_address,
    load_chain,
    load_key,
    load_mempool,
    make_transfer,
    mine,
    network_fee,
    pow_check,
    replay_chain,
    save_chain,
    save_key,
    save_mempool,
    sign_transaction,
    tx_hash,
    validate_transaction,
    verify_signature,
)
from nmclt.chaincore.defaults import COIN
from nmclt.chaincore.encoding import b58decode_check, b58encode_check
from nmclt.chaincore.blocks import make_block, make_coinbase, registration_cost
from nmclt.chaincore.state import is_expired
from nmclt.chaincore.storage import mempool_path
from nmclt.nameregistry import register, update_record
from nmclt.util.exceptions import (
    BadNonce,
    BadSignature,
    CorruptChainFile,
    InsufficientFunds,
    InvalidAddress,
    InvalidPoint,
    KeyFilePermissions,
    MalformedName,
    MalformedTransaction,
    MiningExhausted,
    NameExpired,
    NameTaken,
    NotOwner,
    ValidationError,
)

RECORD = {"ip": "192.0.2.10"}


# ------------------------------------
# region - Keys & addresses
# ------------------------------------


def test_address_is_deterministic_and_decodes(alice):
    address = alice.address()
    assert address.text == derive_address(alice.public_key).text
    assert address.text[0] == "1"

    decoded = decode_address(address.text)
    assert decoded.version == 0
    assert decoded.key_hash == address.key_hash
    assert decoded.raw() == address.raw()
    assert len(address.raw()) == 25


def test_compressed_and_uncompressed_keys_give_different_addresses(alice):
    assert len(alice.public_key) == 33
    assert len(alice.public_key_uncompressed) == 65
    assert derive_address(alice.public_key) != derive_address(alice.public_key_uncompressed)


def test_bad_public_key_rejected():
    with pytest.raises(InvalidPoint):
        derive_address(b"\x02" * 32)
    with pytest.raises(InvalidPoint):
        derive_address(b"\x05" + b"\x11" * 32)


def test_address_checksum_and_alphabet_checked(alice):
    text = alice.address().text
    flipped = text[:-1] + ("2" if text[-1] != "2" else "3")
    with pytest.raises(InvalidAddress):
        decode_address(flipped)
    with pytest.raises(InvalidAddress):
        decode_address("0OIl" + text[4:])


def test_burn_address_has_zero_key_hash():
    burn = burn_address()
    assert decode_address(burn.text).key_hash == bytes(20)


def test_base58check_zero_hash():
    text = b58encode_check(bytes(21))
    assert text == "1111111111111111111114oLvT2"
    assert b58decode_check(text) == bytes(21)
    assert burn_address().text == text


def test_signatures_are_deterministic(alice, bob):
    message = b"name update"
    signature = alice.sign(message)
    assert signature == alice.sign(message)
    assert len(signature) == 64
    assert verify_signature(alice.public_key, message, signature)
    assert not verify_signature(bob.public_key, message, signature)
    assert not verify_signature(alice.public_key, message + b"!", signature)
    assert not verify_signature(alice.public_key, message, signature[:63])


def test_key_file_round_trip(tmp_path, alice):
    path = save_key(alice, tmp_path / "keys" / "chain.key")
    assert stat.S_IMODE(os.stat(path).st_mode) == 0o600
    assert load_key(path).public_key == alice.public_key


def test_world_readable_key_file_refused(tmp_path, alice):
    path = save_key(alice, tmp_path / "chain.key")
    os.chmod(path, 0o644)
    with pytest.raises(KeyFilePermissions):
        load_key(path)


# endregion
# ------------------------------------
# region - Schedules & blocks
# ------------------------------------


def test_block_reward_halves():
    assert block_reward(0) == 50 * COIN
    assert block_reward(209_999) == 50 * COIN
    assert block_reward(210_000) == 25 * COIN
    assert block_reward(210_000 * 64) == 0


def test_network_fee_halves_every_epoch():
    assert network_fee(0) == 50 * COIN
    assert network_fee(8639) == 50 * COIN
    assert network_fee(8640) == 25 * COIN
    assert network_fee(8640 * 3) == 50 * COIN // 8
    assert network_fee(8640 * 64) == 0


def test_registration_cost_adds_burn(params):
    assert registration_cost(1, params) == 50 * COIN + COIN // 100


def test_genesis_is_fixed(params):
    genesis = build_genesis(params)
    assert block_hash(genesis) == block_hash(build_genesis(params))
    assert genesis.header.height == 0
    assert genesis.header.timestamp == 0
    assert genesis.coinbase.recipient == burn_address().text
    assert genesis.coinbase.amount == 50 * COIN


def test_mine_respects_target(alice):
    template = make_block(bytes(32), 1, 600, 2**255, [make_coinbase(alice.address().text, 50 * COIN, 1)])
    block = mine(template, max_attempts=1000)
    assert pow_check(block.header)
    assert int.from_bytes(block_hash(block), "big") <= 2**255


def test_mine_finds_nonce_under_harder_target(alice):
    template = make_block(bytes(32), 1, 600, 2**248, [make_coinbase(alice.address().text, 50 * COIN, 1)])
    block = mine(template, max_attempts=100_000)
    assert pow_check(block.header)
    assert int.from_bytes(block_hash(block), "big") <= 2**248
    assert block.header.height == template.header.height


def test_mine_gives_up(alice):
    template = make_block(bytes(32), 1, 600, 0, [make_coinbase(alice.address().text, 50 * COIN, 1)])
    with pytest.raises(MiningExhausted):
        mine(template, max_attempts=8)


def test_miner_runs_on_worker_threads(params, alice):
    node = ChainNode(params)
    template = node.assemble(alice.address())
    with Miner(workers=2) as miner:
        block = miner.submit(template, max_attempts=100).result(timeout=30)
    assert node.submit_block(block).new_tip


# endregion
# ------------------------------------
# region - Transfers
# ------------------------------------


def test_mining_credits_the_coinbase(funded_node, alice):
    assert funded_node.height == 2
    assert funded_node.balance(alice.address()) == 100 * COIN
    assert conservation_holds(funded_node.snapshot())


def test_transfer_moves_coins_and_pays_fee(funded_node, alice, bob, carol):
    tx = make_transfer(alice, bob.address(), 10 * COIN, 5000, nonce=1)
    funded_node.submit_transaction(tx)
    block = funded_node.mine_block(carol.address())

    assert block.transactions[1] == tx
    assert funded_node.balance(bob.address()) == 10 * COIN
    assert funded_node.balance(alice.address()) == 90 * COIN - 5000
    assert funded_node.balance(carol.address()) == 50 * COIN + 5000
    assert len(funded_node.mempool) == 0
    assert conservation_holds(funded_node.snapshot())


def test_wrong_nonce_rejected(funded_node, alice, bob):
    tx = make_transfer(alice, bob.address(), COIN, 0, nonce=2)
    with pytest.raises(BadNonce):
        validate_transaction(funded_node.snapshot(), tx)


def test_tampered_signature_rejected(funded_node, alice, bob):
    tx = make_transfer(alice, bob.address(), COIN, 0, nonce=1)
    forged = dataclasses.replace(tx, amount=2 * COIN)
    with pytest.raises(BadSignature):
        validate_transaction(funded_node.snapshot(), forged)


def test_overspend_rejected(funded_node, alice, bob):
    tx = make_transfer(alice, bob.address(), 100 * COIN, 1, nonce=1)
    with pytest.raises(InsufficientFunds):
        funded_node.submit_transaction(tx)


def test_negative_amount_rejected(funded_node, alice, bob):
    tx = Transaction(kind=TxKind.TRANSFER, sender_pubkey=alice.public_key, recipient=bob.address().text, amount=-1)
    with pytest.raises(MalformedTransaction):
        validate_transaction(funded_node.snapshot(), tx)


def test_coinbase_not_valid_in_mempool(funded_node, alice):
    with pytest.raises(MalformedTransaction):
        funded_node.submit_transaction(make_coinbase(alice.address().text, COIN, 3))


def test_mempool_orders_by_fee_and_chains_nonces(funded_node, alice, bob, carol):
    funded_node.mine_block(bob.address())
    low = make_transfer(alice, carol.address(), COIN, 5000, nonce=1)
    high = make_transfer(bob, carol.address(), COIN, 9000, nonce=1)
    funded_node.submit_transaction(low)
    funded_node.submit_transaction(high)
    assert funded_node.next_nonce(alice.public_key) == 2

    follow_up = make_transfer(alice, carol.address(), COIN, 9500, nonce=2)
    funded_node.submit_transaction(follow_up)
    assert funded_node.mempool.ordered() == [follow_up, high, low]

    block = funded_node.mine_block(carol.address())
    assert list(block.transactions[1:]) == [high, low]
    assert funded_node.mempool.ordered() == [follow_up]

    block = funded_node.mine_block(carol.address())
    assert list(block.transactions[1:]) == [follow_up]


@pytest.fixture
def three_senders(funded_node, bob, carol) -> ChainNode:
    funded_node.mine_block(bob.address())
    funded_node.mine_block(carol.address())
    return funded_node


def test_block_orders_transactions_by_fee(three_senders, alice, bob, carol):
    dest = burn_address().text
    txs = {
        3: make_transfer(alice, dest, COIN, 3, nonce=1),
        1: make_transfer(bob, dest, COIN, 1, nonce=1),
        2: make_transfer(carol, dest, COIN, 2, nonce=1),
    }
    for tx in txs.values():
        three_senders.submit_transaction(tx)

    block = three_senders.mine_block(alice.address())
    assert block.transactions[0] == block.coinbase
    assert list(block.transactions[1:]) == [txs[3], txs[2], txs[1]]
    height = block.header.height
    assert block.coinbase.amount == block_reward(height) + 6


def test_equal_fees_order_by_hash(three_senders, alice, bob):
    dest = burn_address().text
    first = make_transfer(alice, dest, COIN, 7, nonce=1)
    second = make_transfer(bob, dest, COIN, 7, nonce=1)
    three_senders.submit_transaction(first)
    three_senders.submit_transaction(second)

    block = three_senders.mine_block(alice.address())
    assert list(block.transactions[1:]) == sorted([first, second], key=tx_hash)


def test_empty_mempool_gives_coinbase_only_block(funded_node, alice):
    block = funded_node.mine_block(alice.address())
    assert block.transactions == (block.coinbase,)
    assert block.coinbase.amount == block_reward(block.header.height)
    assert funded_node.balance(carol.address()) == 53 * COIN + 5000 + 9000 + 9500
    assert len(funded_node.mempool) == 0


def test_assemble_respects_max_txs(funded_node, alice, bob, carol):
    funded_node.mine_block(bob.address())
    funded_node.submit_transaction(make_transfer(alice, carol.address(), COIN, 100, nonce=1))
    best = make_transfer(bob, carol.address(), COIN, 200, nonce=1)
    funded_node.submit_transaction(best)

    block = assemble_block(funded_node.mempool, funded_node.snapshot(), carol.address(), max_txs=1)
    assert block.transactions[1:] == (best,)
    assert block.coinbase.amount == 50 * COIN + 200


def test_duplicate_nonce_in_mempool_rejected(funded_node, alice, bob, carol):
    funded_node.submit_transaction(make_transfer(alice, bob.address(), COIN, 0, nonce=1))
    with pytest.raises(ValidationError):
        funded_node.submit_transaction(make_transfer(alice, carol.address(), COIN, 0, nonce=1))


# endregion
# ------------------------------------
# region - Names
# ------------------------------------


def test_registration_burns_cost(funded_node, alice):
    funded_node.submit_transaction(register("d/example", RECORD, alice, fee=1000, nonce=1))
    funded_node.mine_block(alice.address())

    entry = funded_node.name_lookup("d/example")
    assert isinstance(entry, NameEntry)
    assert entry.owner_pubkey == alice.public_key
    assert entry.last_update_height == 3

    state = funded_node.snapshot()
    assert state.burned == 50 * COIN + COIN // 100
    assert funded_node.balance(alice.address()) == 150 * COIN - state.burned
    assert conservation_holds(state)


def test_registration_needs_funds(params, alice):
    node = ChainNode(params)
    node.mine_block(alice.address())
    with pytest.raises(InsufficientFunds):
        node.submit_transaction(register("d/example", RECORD, alice, nonce=1))


def test_live_name_cannot_be_taken(funded_node, alice, bob):
    funded_node.submit_transaction(register("d/example", RECORD, alice, nonce=1))
    funded_node.mine_block(alice.address())
    with pytest.raises(NameTaken):
        validate_transaction(funded_node.snapshot(), register("d/example", RECORD, bob, nonce=1))


def test_name_without_namespace_rejected(funded_node, alice):
    tx = Transaction(kind=TxKind.NAME_NEW, sender_pubkey=alice.public_key, name="example", value=b"{}", nonce=1)
    with pytest.raises(MalformedName):
        validate_transaction(funded_node.snapshot(), sign_transaction(tx, alice))


def test_only_owner_updates(funded_node, alice, bob):
    funded_node.submit_transaction(register("d/example", RECORD, alice, nonce=1))
    funded_node.mine_block(alice.address())
    with pytest.raises(NotOwner):
        validate_transaction(funded_node.snapshot(), update_record("d/example", {"ip": "192.0.2.99"}, bob, nonce=1))


def test_update_merges_and_transfers_ownership(funded_node, alice, bob):
    funded_node.submit_transaction(register("d/example", {"ip": "192.0.2.10", "info": "first"}, alice, nonce=1))
    funded_node.mine_block(alice.address())
    funded_node.submit_transaction(
        update_record("d/example", {"ip": "192.0.2.11"}, alice, nonce=2, new_owner=bob.public_key)
    )
    funded_node.mine_block(alice.address())

    entry = funded_node.name_lookup("d/example")
    value = json.loads(entry.value)
    assert value["ip"] == "192.0.2.11"
    assert value["info"] == "first"
    assert entry.owner_pubkey == bob.public_key
    assert entry.last_update_height == 4


def test_expiry_boundary():
    entry = NameEntry(owner_pubkey=b"\x02" * 33, value=b"{}", last_update_height=100)
    params = ChainParams()
    assert not is_expired(entry, 100 + 35_999, params)
    assert is_expired(entry, 100 + 36_000, params)


def _mine_to(node: ChainNode, height: int, key: KeyPair) -> None:
    while node.height < height:
        node.mine_block(key.address())


def test_name_expires_and_can_be_registered_again(funded_node, params, alice, bob):
    expiry = params.name_expiry_blocks
    funded_node.submit_transaction(register("d/example", RECORD, alice, nonce=1))
    funded_node.mine_block(alice.address())
    registered_at = funded_node.height

    _mine_to(funded_node, registered_at + expiry - 1, bob)
    assert isinstance(funded_node.name_lookup("d/example"), NameEntry)

    funded_node.mine_block(bob.address())
    assert funded_node.name_lookup("d/example") is NameStatus.EXPIRED
    with pytest.raises(NameExpired):
        validate_transaction(funded_node.snapshot(), update_record("d/example", {}, alice, nonce=2))

    funded_node.submit_transaction(register("d/example", {"ip": "192.0.2.77"}, bob, nonce=1))
    funded_node.mine_block(bob.address())
    entry = funded_node.name_lookup("d/example")
    assert entry.owner_pubkey == bob.public_key


def test_update_before_expiry_renews(funded_node, params, alice):
    expiry = params.name_expiry_blocks
    funded_node.submit_transaction(register("d/example", RECORD, alice, nonce=1))
    funded_node.mine_block(alice.address())
    registered_at = funded_node.height

    _mine_to(funded_node, registered_at + expiry - 2, alice)
    funded_node.submit_transaction(update_record("d/example", {}, alice, nonce=2))
    funded_node.mine_block(alice.address())
    assert funded_node.height == registered_at + expiry - 1

    _mine_to(funded_node, registered_at + expiry + 5, alice)
    entry = funded_node.name_lookup("d/example")
    assert isinstance(entry, NameEntry)
    assert entry.last_update_height == registered_at + expiry - 1


def test_unknown_name_not_found(funded_node):
    assert funded_node.name_lookup("d/missing") is NameStatus.NOT_FOUND


# endregion
# ------------------------------------
# region - Block submission & forks
# ------------------------------------


def test_tampered_coinbase_rejected(funded_node, alice):
    block = mine(funded_node.assemble(alice.address()))
    inflated = dataclasses.replace(block.coinbase, amount=block.coinbase.amount + 1)
    bad = mine(make_block(block.header.prev_hash, 3, block.header.timestamp, block.header.target, [inflated]))
    result = funded_node.submit_block(bad)
    assert not result.accepted
    assert result.reason == RejectReason.BAD_COINBASE


def test_wrong_target_rejected(funded_node, alice):
    block = funded_node.assemble(alice.address())
    other = make_block(block.header.prev_hash, 3, block.header.timestamp, 2**200, list(block.transactions))
    result = funded_node.submit_block(other)
    assert result.reason == RejectReason.BAD_POW


def test_duplicate_block_reported(funded_node, alice):
    block = funded_node.active_chain()[-1]
    assert funded_node.submit_block(block).reason == RejectReason.DUPLICATE


def _chain(prev: bytes, start: int, length: int, params: ChainParams, recipient: str, salt: int = 0) -> list:
    blocks = []
    for height in range(start, start + length):
        coinbase = make_coinbase(recipient, block_reward(height, params.halving_interval), height)
        block = mine(make_block(prev, height, height * 600 + salt, params.target, [coinbase]))
        blocks.append(block)
        prev = block_hash(block)
    return blocks


def test_orphan_held_until_parent_arrives(params, alice):
    genesis_hash = block_hash(build_genesis(params))
    first, second = _chain(genesis_hash, 1, 2, params, alice.address().text)
    node = ChainNode(params)

    held = node.submit_block(second)
    assert held.reason == RejectReason.UNKNOWN_PARENT
    assert held.held

    assert node.submit_block(first).accepted
    assert node.height == 2
    assert node.tip_hash == block_hash(second)


def test_first_seen_wins_at_equal_height(params, alice, bob):
    genesis_hash = block_hash(build_genesis(params))
    (ours,) = _chain(genesis_hash, 1, 1, params, alice.address().text)
    (theirs,) = _chain(genesis_hash, 1, 1, params, bob.address().text)
    node = ChainNode(params)
    assert node.submit_block(ours).new_tip
    result = node.submit_block(theirs)
    assert result.accepted and not result.new_tip
    assert node.tip_hash == block_hash(ours)


def test_forks_converge_on_longest_chain(params, alice, bob):
    genesis = build_genesis(params)
    genesis_hash = block_hash(genesis)
    main_addr = alice.address().text
    fork_addr = bob.address().text

    for trial in range(200):
        rng = random.Random(trial)
        length = rng.randint(3, 8)
        main = _chain(genesis_hash, 1, length, params, main_addr)
        hashes = [genesis_hash] + [block_hash(b) for b in main]

        blocks = list(main)
        for salt in range(1, rng.randint(1, 4) + 1):
            fork_height = rng.randint(0, length - 2)
            fork_length = rng.randint(1, length - fork_height - 1)
            blocks += _chain(hashes[fork_height], fork_height + 1, fork_length, params, fork_addr, salt)

        nodes = [ChainNode(params), ChainNode(params)]
        for node in nodes:
            arrival = list(blocks)
            rng.shuffle(arrival)
            for block in arrival:
                node.submit_block(block)

        assert nodes[0].tip_hash == nodes[1].tip_hash == hashes[-1], f"trial {trial}"
        for node in nodes:
            replayed = replay_chain(node.active_chain(), params)
            assert node.snapshot().ledger_equals(replayed), f"trial {trial}"
            assert conservation_holds(replayed)


def test_reorg_returns_transactions_to_mempool(params, alice, bob, carol):
    node_a = ChainNode(params)
    node_a.mine_block(alice.address())
    node_a.mine_block(alice.address())
    node_b = ChainNode(params)
    for block in node_a.active_chain()[1:]:
        assert node_b.submit_block(block).new_tip

    tx = make_transfer(alice, bob.address(), COIN, 100, nonce=1)
    node_a.submit_transaction(tx)
    node_a.mine_block(alice.address())
    assert node_a.balance(bob.address()) == COIN

    node_b.mine_block(carol.address())
    node_b.mine_block(carol.address())
    for block in node_b.active_chain()[3:]:
        node_a.submit_block(block)

    assert node_a.tip_hash == node_b.tip_hash
    assert node_a.balance(bob.address()) == 0
    assert tx in node_a.mempool
    assert node_a.snapshot().ledger_equals(replay_chain(node_a.active_chain(), params))


# endregion
# ------------------------------------
# region - Chain files
# ------------------------------------


def test_chain_file_round_trip(tmp_path, funded_node, alice, bob):
    funded_node.submit_transaction(make_transfer(alice, bob.address(), COIN, 10, nonce=1))
    funded_node.submit_transaction(register("d/example", RECORD, alice, nonce=2))
    funded_node.mine_block(alice.address())
    path = save_chain(funded_node, tmp_path / "chain.jsonl")

    loaded = load_chain(path, funded_node.params)
    assert loaded.tip_hash == funded_node.tip_hash
    assert loaded.snapshot().ledger_equals(funded_node.snapshot())

    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == {"hash", "header", "txs"}
    assert set(first["header"]) == {"prev_hash", "tx_root", "height", "timestamp", "target", "nonce"}


def test_edited_chain_file_detected(tmp_path, funded_node):
    path = save_chain(funded_node, tmp_path / "chain.jsonl")
    lines = path.read_text().splitlines()
    block = json.loads(lines[1])
    block["header"]["timestamp"] += 1
    lines[1] = json.dumps(block)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorruptChainFile):
        load_chain(path, funded_node.params)


def test_torn_last_line_ignored(tmp_path, funded_node):
    path = save_chain(funded_node, tmp_path / "chain.jsonl")
    path.write_text(path.read_text() + '{"hash": "ab')
    assert load_chain(path, funded_node.params).tip_hash == funded_node.tip_hash


def test_foreign_genesis_rejected(tmp_path, funded_node):
    path = save_chain(funded_node, tmp_path / "chain.jsonl")
    with pytest.raises(CorruptChainFile):
        load_chain(path, ChainParams(address_version=0x34))


def test_mempool_file_round_trip(tmp_path, funded_node, alice, bob):
    tx = make_transfer(alice, bob.address(), COIN, 10, nonce=1)
    funded_node.submit_transaction(tx)
    chain = save_chain(funded_node, tmp_path / "chain.jsonl")
    pool = save_mempool(funded_node.mempool, mempool_path(chain))
    assert pool.name == "chain.mempool.jsonl"

    loaded = load_chain(chain, funded_node.params)
    assert load_mempool(loaded, pool) == 1
    assert tx in loaded.mempool


def test_empty_mempool_has_nothing_pending(funded_node):
    assert Mempool().ordered() == []
    assert len(funded_node.mempool) == 0


# endregion
# ------------------------------------
