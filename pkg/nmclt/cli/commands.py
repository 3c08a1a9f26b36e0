"""
Command handlers. Each takes the parsed arguments, calls into the
library and prints the result; none holds logic of its own.
"""

# pylint: disable=missing-function-docstring

# Std
import json
import time
from pathlib import Path
from argparse import Namespace
from decimal import Decimal, InvalidOperation

# nmclt
from nmclt.spf import spf
from nmclt.configuration import config
from nmclt.chaincore import defaults as chain_defaults
from nmclt.chaincore import (
    ChainNode,
    ChainParams,
    KeyPair,
    block_hash,
    load_key,
    load_mempool,
    load_or_create_chain,
    make_transfer,
    save_chain,
    save_key,
    save_mempool,
    tx_hash,
)
from nmclt.chaincore.storage import mempool_path
from nmclt.nameregistry import load_record_file, register, resolve, update_eph_key, update_record
from nmclt.util.logger import get_logger
from nmclt.util.exceptions import AmountError, CliUsageError, FetchFailed

logger = get_logger()


# ------------------------------------
# region - Helpers
# ------------------------------------


def parse_amount(text: str) -> int:
    """
    Coins as a decimal string, eg. "1.5", to base units.
    """
    try:
        value = Decimal(text) * chain_defaults.COIN
    except InvalidOperation as err:
        raise AmountError(f"'{text}' is not an amount") from err
    if value < 0 or value != value.to_integral_value():
        raise AmountError(f"'{text}' is negative or finer than one base unit")
    return int(value)


def format_amount(units: int) -> str:
    return f"{Decimal(units) / chain_defaults.COIN:f}"


def _emit(payload: dict, human: str | list[str]) -> None:
    if config().json_output:
        spf.data(payload)
    else:
        spf(human)


def _open_chain() -> tuple[ChainNode, Path]:
    path = config().path("chain_file")
    node = load_or_create_chain(path, ChainParams.from_config())
    load_mempool(node, mempool_path(path))
    return node, path


def _store_chain(node: ChainNode, path: Path) -> None:
    save_chain(node, path)
    save_mempool(node.mempool, mempool_path(path))


def _chain_key() -> KeyPair:
    return load_key(config().path("key_file"))


def _queue(node: ChainNode, path: Path, tx, what: str) -> int:
    node.submit_transaction(tx)
    save_mempool(node.mempool, mempool_path(path))
    txid = tx_hash(tx).hex()
    _emit(
        {"queued": what, "txid": txid, "nonce": tx.nonce, "fee": tx.fee},
        [f"<green>Queued {what}</green>", f"txid {txid}, nonce {tx.nonce}. Run 'nmclt mine' to confirm."],
    )
    return 0


# endregion
# ------------------------------------
# region - Keys & chain
# ------------------------------------


def keygen(args: Namespace) -> int:
    out = Path(args.out or (config().key_file if args.kind == "chain" else config().path("data_dir") / "host.keys"))
    out = out.expanduser()
    if out.exists() and not args.force:
        raise CliUsageError(f"{out} exists, pass --force to overwrite")

    if args.kind == "chain":
        key = KeyPair.generate()
        save_key(key, out)
        payload = {
            "kind": "chain",
            "file": str(out),
            "address": str(key.address(config().address_version)),
            "public_key": key.public_key.hex(),
            "fingerprint": key.fingerprint().hex(),
        }
        _emit(
            payload,
            [
                f"<green>Chain key written to {out}</green>",
                f"address      {payload['address']}",
                f"public key   {payload['public_key']}",
                f"fingerprint  {payload['fingerprint']}  (pin this to trust it as a resolver key)",
            ],
        )
        return 0

    from nmclt.transport import MltServer, save_host_keys
    from nmclt.transport.crypto import generate_private_key

    eph_key, id_key = generate_private_key(), generate_private_key()
    save_host_keys(out, eph_key, id_key)
    section = MltServer(eph_key=eph_key, id_key=id_key).record_section(args.ip, args.port or config().mlt_port)
    record = {"minimaLT": section}
    if args.record:
        Path(args.record).expanduser().write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    _emit(
        {"kind": "mlt", "file": str(out), "record": record},
        [f"<green>Host keys written to {out}</green>", json.dumps(record, indent=2)],
    )
    return 0


def mine(args: Namespace) -> int:
    node, path = _open_chain()
    address = args.to or str(_chain_key().address(node.params.address_version))
    blocks = [node.mine_block(address) for _ in range(args.blocks)]
    _store_chain(node, path)
    for block in blocks:
        _emit(
            {"height": block.header.height, "hash": block_hash(block).hex(), "txs": len(block.transactions)},
            f"Mined block <green>{block.header.height}</green> <soft>{block_hash(block).hex()}</soft> ({len(block.transactions)} txs)",
        )
    return 0


def balance(args: Namespace) -> int:
    node, _ = _open_chain()
    address = args.address or str(_chain_key().address(node.params.address_version))
    units = node.balance(address)
    _emit({"address": address, "balance": units}, f"{address}: <green>{format_amount(units)}</green> coins")
    return 0


def send(args: Namespace) -> int:
    node, path = _open_chain()
    key = _chain_key()
    tx = make_transfer(key, args.address, parse_amount(args.amount), parse_amount(args.fee), node.next_nonce(key.public_key))
    return _queue(node, path, tx, f"transfer of {args.amount} to {args.address}")


# endregion
# ------------------------------------
# region - Names
# ------------------------------------


def register_name(args: Namespace) -> int:
    node, path = _open_chain()
    key = _chain_key()
    record = load_record_file(args.file)
    tx = register(args.name, record, key, fee=parse_amount(args.fee), nonce=node.next_nonce(key.public_key))
    return _queue(node, path, tx, f"registration of {args.name}")


def update_name(args: Namespace) -> int:
    node, path = _open_chain()
    key = _chain_key()
    update = json.loads(Path(args.file).expanduser().read_text(encoding="utf-8")) if args.file else {}
    tx = update_record(args.name, update, key, fee=parse_amount(args.fee), nonce=node.next_nonce(key.public_key))
    return _queue(node, path, tx, f"update of {args.name}")


def update_eph(args: Namespace) -> int:
    """
    Rotate the host's ephemeral key and publish the new one.

    The key file is rewritten as soon as the update is queued, before
    it is mined. A server restarted in between serves a key that
    resolvers do not list yet.
    """
    from nmclt.transport import load_host_keys, public_bytes, save_host_keys
    from nmclt.transport.crypto import generate_private_key

    node, path = _open_chain()
    key = _chain_key()
    keys_file = Path(args.keys or config().path("data_dir") / "host.keys").expanduser()
    _, id_key = load_host_keys(keys_file)
    eph_key = generate_private_key()
    tx = update_eph_key(args.name, public_bytes(eph_key), key, fee=parse_amount(args.fee), nonce=node.next_nonce(key.public_key))
    eph_hex = public_bytes(eph_key).hex()
    code = _queue(node, path, tx, f"ephemeral key {eph_hex} for {args.name}")
    save_host_keys(keys_file, eph_key, id_key)
    _emit(
        {"saved": str(keys_file), "eph_key": eph_hex, "confirmed": False},
        f"<warning>Saved the new key to {keys_file}. Clients use it only once 'nmclt mine' confirms the update.</warning>",
    )
    return code


def resolve_name(args: Namespace) -> int:
    if args.remote:
        resolved = _remote_resolve(args.fqdn)
    else:
        node, _ = _open_chain()
        resolved = resolve(node.snapshot(), args.fqdn)
    payload = resolved.to_json()
    _emit(payload, json.dumps(payload, indent=2))
    return 0


def _remote_resolve(fqdn: str):
    from nmclt.resolver import client_resolve

    cfg = config()
    if not cfg.resolver_pubkey or not cfg.resolver_fingerprint:
        raise CliUsageError("Set resolver_pubkey and resolver_fingerprint to resolve remotely")
    return client_resolve(
        (cfg.resolver_host, int(cfg.resolver_port)),
        bytes.fromhex(cfg.resolver_fingerprint),
        fqdn,
        bytes.fromhex(cfg.resolver_pubkey),
        timeout=float(cfg.resolver_timeout),
        retries=int(cfg.resolver_retries),
    )


# endregion
# ------------------------------------
# region - Services
# ------------------------------------


def _wait(service) -> None:
    try:
        while service.is_running():
            time.sleep(0.5)
    except KeyboardInterrupt:
        spf("\n<soft>Stopping...</soft>")
    finally:
        service.shutdown()


def resolverd(args: Namespace) -> int:
    from nmclt.resolver import chain_file_source, serve

    key = load_key(args.key) if args.key else _chain_key()
    chain_file = config().path("chain_file")
    if not chain_file.exists():
        raise FileNotFoundError(f"No chain file at {chain_file}")
    service = serve(
        key,
        chain_file_source(chain_file, ChainParams.from_config()),
        args.host or config().resolver_host,
        args.port if args.port is not None else int(config().resolver_port),
    )
    _emit(
        {"host": service.host, "port": service.port, "pubkey": key.public_key.hex(), "fingerprint": key.fingerprint().hex()},
        [
            f"<green>Resolver listening on {service.host}:{service.port}</green>",
            f"pubkey       {key.public_key.hex()}",
            f"fingerprint  {key.fingerprint().hex()}",
        ],
    )
    _wait(service)
    return 0


def mlt_serve(args: Namespace) -> int:
    from nmclt.transport import DocumentServer, MltServer, TransportParams, load_host_keys
    from nmclt.transport.driver import UdpDriver

    eph_key, id_key = load_host_keys(args.keys or config().path("data_dir") / "host.keys")
    server = MltServer(TransportParams.from_config(), eph_key=eph_key, id_key=id_key, load_flag=bool(config().load_flag))
    app = DocumentServer(root=args.root)
    driver = UdpDriver(server, args.host, args.port if args.port is not None else int(config().mlt_port), on_events=app.handle)
    driver.start()
    _emit(
        {"host": driver.host, "port": driver.port, "eph_key": server.eph_public.hex(), "root": str(args.root)},
        [f"<green>Serving {args.root} on {driver.host}:{driver.port}</green>", f"eph key  {server.eph_public.hex()}"],
    )
    _wait(driver)
    return 0


# endregion
# ------------------------------------
# region - Fetch & simulation
# ------------------------------------


def mlt_fetch(args: Namespace) -> int:
    if args.sim:
        return _sim_fetch(args)

    from nmclt.transport import MltClient, ResponseCollector, TransportParams, fetch_request
    from nmclt.transport.driver import UdpDriver, now_ms

    resolved = _remote_resolve(args.fqdn)
    section = resolved.record.minimalt
    if section is None:
        raise CliUsageError(f"'{args.fqdn}' has no minimaLT section")

    client = MltClient(TransportParams.from_config())
    collector = ResponseCollector()
    driver = UdpDriver(client, on_events=lambda _, events: collector.handle(events))
    try:
        tunnel = client.connect(section, first_data=fetch_request(args.path), now=now_ms())
        if not driver.run_until(lambda: collector.done(tunnel, 1), args.timeout):
            raise FetchFailed(f"No complete response from {args.fqdn} within {args.timeout} s")
    finally:
        driver.shutdown()
    _print_body(collector.body(tunnel, 1), {"fqdn": args.fqdn, "path": args.path, "height": resolved.height})
    return 0


def _sim_fetch(args: Namespace) -> int:
    from nmclt.netsim import request_datagram, run_fetch
    from nmclt.transport import load_host_keys

    eph_key = None
    snapshot = None
    if args.keys:
        eph_key, _ = load_host_keys(args.keys)
        node, _ = _open_chain()
        snapshot = node.snapshot()
    body, trace = run_fetch(args.fqdn, args.path, config=_sim_config(args), snapshot=snapshot, eph_key=eph_key)
    flow = trace.flows.get("fetch")
    if flow is None or flow.completed is None:
        raise FetchFailed(f"Simulated fetch of {args.fqdn}{args.path} did not complete")
    carrier = request_datagram(trace)
    meta = {
        "fqdn": args.fqdn,
        "path": args.path,
        "rtt_to_first_byte": flow.rtt_to_first_byte,
        "request_packet": carrier["label"] if carrier else None,
        "trace_digest": trace.digest(),
    }
    if args.trace:
        Path(args.trace).expanduser().write_text(trace.to_jsonl(), encoding="utf-8")
    _print_body(body, meta)
    return 0


def _print_body(body: bytes, meta: dict) -> None:
    if config().json_output:
        spf.data({**meta, "body": body.decode("utf-8", "replace")})
        return
    print(body.decode("utf-8", "replace"), end="" if body.endswith(b"\n") else "\n")
    spf("<soft>" + ", ".join(f"{k}: {v}" for k, v in meta.items()) + "</soft>")


def _sim_config(args: Namespace):
    """
    SimConfig from the command line flags, or None when none were given.
    """
    from nmclt.netsim import SimConfig

    values = {"seed": args.seed, "latency_ms": args.latency, "loss": args.loss, "reorder": args.reorder}
    values = {key: value for key, value in values.items() if value is not None}
    return SimConfig(**values) if values else None


def sim_bench(args: Namespace) -> int:
    from nmclt.netsim import bench_rows, handshake_steps, run_script

    trace = run_script(_sim_config(args), args.script or handshake_steps())
    if args.trace:
        Path(args.trace).expanduser().write_text(trace.to_jsonl(), encoding="utf-8")
    spf.table(
        bench_rows(trace),
        footnote="Figures in round trips. model: round trips until the server sees the request.",
    )
    return 0


def show_config(args: Namespace) -> int:
    if config().json_output:
        spf.data(config().get_dict())
    else:
        config().report()
    return 0


# endregion
# ------------------------------------
