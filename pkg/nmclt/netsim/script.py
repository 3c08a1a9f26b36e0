"""
Scenario scripts: a JSON list of {time, host, action, args}.

Usage:
    from nmclt.netsim.script import run_script

    trace = run_script(SimConfig(seed=7), "handshake.json")
"""

# Std
import json
from pathlib import Path
from typing import Any

# 3rd party
from pydantic import ValidationError

# nmclt
from nmclt.netsim.types import Script, ScriptStep, SimConfig, Trace
from nmclt.netsim.simulator import Simulator
from nmclt.netsim.hosts import Host
from nmclt.transport.types import Endpoint, TransportParams
from nmclt.util.exceptions import ScriptError

# Arguments naming other hosts
_HOST_REFS = ("server", "resolver")


def parse_address(value: Any) -> Endpoint:
    """
    "10.0.0.1:4433" or ["10.0.0.1", 4433].
    """
    try:
        if isinstance(value, str):
            host, _, port = value.rpartition(":")
            return host, int(port)
        host, port = value
        return str(host), int(port)
    except (TypeError, ValueError) as err:
        raise ScriptError(f"Bad address {value!r}, expected 'ip:port'") from err


def load_script(source: Script | list | dict | str | Path, config: SimConfig | None = None) -> Script:
    """
    Validate a script given as a model, parsed JSON, or a file path.
    An explicit config overrides the one in the file.
    """
    if isinstance(source, Script):
        script = source
    else:
        if isinstance(source, (str, Path)):
            try:
                source = json.loads(Path(source).expanduser().read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as err:
                raise ScriptError(f"Can't read script {source}: {err}") from err
        if isinstance(source, list):
            source = {"steps": source}
        try:
            script = Script.model_validate(source)
        except ValidationError as err:
            raise ScriptError(f"Invalid script: {err}") from err
    if config is not None:
        script = script.model_copy(update={"config": config})
    check_references(script.steps)
    return script


def check_references(steps: list[ScriptStep]) -> None:
    """
    Every action must name a host spawned at or before its time.
    """
    defined: dict[str, int] = {}
    for step in sorted(steps, key=lambda s: s.time):
        if step.action == "spawn":
            if step.host in defined:
                raise ScriptError(f"Host '{step.host}' spawned twice")
            if "role" not in step.args or "address" not in step.args:
                raise ScriptError(f"spawn of '{step.host}' needs 'role' and 'address'")
            if step.args["role"] == "resolver":
                for server in step.args.get("names", {}).values():
                    if isinstance(server, str) and server not in defined:
                        raise ScriptError(f"Resolver '{step.host}' references undefined host '{server}'")
            defined[step.host] = step.time
            continue
        names = [step.host] + [step.args[k] for k in _HOST_REFS if isinstance(step.args.get(k), str)]
        for name in names:
            if name not in defined:
                raise ScriptError(f"Step at {step.time} ms references undefined host '{name}'")


def _params(args: dict) -> TransportParams | None:
    overrides = args.get("params")
    if not overrides:
        return None
    try:
        return TransportParams(**overrides)
    except TypeError as err:
        raise ScriptError(f"Bad transport params: {err}") from err


def spawn_host(sim: Simulator, name: str, args: dict) -> Host:
    """
    Create a host from spawn arguments.
    """
    role = args["role"]
    address = parse_address(args["address"])
    if role == "mlt_server":
        documents = {k: v.encode() if isinstance(v, str) else bytes(v) for k, v in args.get("documents", {}).items()}
        return sim.spawn(
            role,
            name,
            address,
            params=_params(args),
            documents=documents or None,
            load_flag=bool(args.get("load_flag", False)),
            sink=bool(args.get("sink", False)),
        )
    if role == "mlt_client":
        try:
            pins = {k: bytes.fromhex(v) for k, v in args.get("resolver_pins", {}).items()}
        except (TypeError, ValueError) as err:
            raise ScriptError(f"Bad resolver pin for '{name}': {err}") from err
        return sim.spawn(role, name, address, params=_params(args), pins=pins)
    if role == "resolver":
        from nmclt.netsim.scenarios import build_name_chain

        records = {}
        for domain, value in args.get("names", {}).items():
            if isinstance(value, str):
                server = sim.host(value)
                value = {"minimaLT": server.record_section()}
            records[domain] = value
        chain, _ = build_name_chain(records, sim.host_rng(name + "/chain"))
        return sim.spawn(role, name, address, snapshot=chain.snapshot())
    if role in ("tcp_server", "tcp_client"):
        return sim.spawn(role, name, address)
    raise ScriptError(f"Unknown host role '{role}'")


def run_script(config: SimConfig | None, script: Script | list | dict | str | Path) -> Trace:
    """
    Run a scenario and return its trace. Identical inputs give
    byte-identical traces.
    """
    script = load_script(script, config)
    sim = Simulator(script.config)
    for step in script.steps:
        sim.at(step.time, step.host, step.action, step.args)
    return sim.run()
