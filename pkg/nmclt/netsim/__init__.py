"""
Deterministic network simulator for transport, resolver and baseline hosts.

Usage:
    from nmclt import netsim

    trace = netsim.run_script(netsim.SimConfig(seed=7), "handshake.json")
    print(trace.flows["minimalt"].rtt_to_first_byte)
"""

from nmclt.netsim.types import FlowResult, Script, ScriptStep, SimConfig, SimEvent, Trace
from nmclt.netsim.baseline import baseline_handshake_model
from nmclt.netsim.simulator import Simulator
from nmclt.netsim.script import load_script, run_script
from nmclt.netsim.scenarios import (
    bench_rows,
    build_name_chain,
    fetch_scenario,
    handshake_bench,
    handshake_steps,
    request_datagram,
    run_fetch,
)
