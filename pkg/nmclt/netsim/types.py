"""
Types used in the network simulator.
"""

from __future__ import annotations

# Std
import json
import hashlib
from enum import Enum
from dataclasses import asdict, dataclass, field
from typing import Any, Literal, Optional

# 3rd party
from pydantic import BaseModel, ConfigDict, Field, PositiveInt

# nmclt
from nmclt.netsim import defaults as d

HostRole = Literal["mlt_server", "mlt_client", "resolver", "tcp_server", "tcp_client"]
ActionName = Literal[
    "spawn", "fetch", "send", "address_change", "load_toggle", "rekey", "set_window"
]
FlowKind = Literal["minimalt", "tcp", "tcp_tls12", "tcp_tls_4rtt"]


class SimConfig(BaseModel):
    """
    Link model shared by every pair of hosts.
    bandwidth is in bytes per ms; None means unlimited.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(default=d.SEED, ge=0, lt=2**64)
    latency_ms: PositiveInt = d.LATENCY_MS
    loss: float = Field(default=d.LOSS, ge=0.0, le=1.0)
    reorder: float = Field(default=d.REORDER, ge=0.0, le=1.0)
    bandwidth: Optional[float] = Field(default=None, gt=0)
    max_time_ms: PositiveInt = d.MAX_TIME_MS


class ScriptStep(BaseModel):
    """
    One scripted host action.
    """

    model_config = ConfigDict(extra="forbid")

    time: int = Field(ge=0)
    host: str
    action: ActionName
    args: dict[str, Any] = Field(default_factory=dict)


class Script(BaseModel):
    """
    A scenario file: either a bare list of steps, or an object
    with an optional config and the steps.
    """

    model_config = ConfigDict(extra="forbid")

    config: SimConfig = Field(default_factory=SimConfig)
    steps: list[ScriptStep]


class EventKind(str, Enum):
    DELIVER = "deliver"
    TIMER = "timer"
    ADDRESS_CHANGE = "address_change"
    LOAD_TOGGLE = "load_toggle"
    ACTION = "action"


@dataclass(order=True)
class SimEvent:
    """
    Queue entry. Ordered by time, then insertion order.
    """

    time: int
    seq: int
    kind: EventKind = field(compare=False)
    payload: Any = field(compare=False, default=None)


@dataclass
class FlowResult:
    """
    Timing of one request / response flow, in virtual ms.
    RTT figures are time since start over twice the one-way latency.
    """

    flow: str
    kind: str
    client: str
    server: str
    start: int
    first_server_byte: Optional[int] = None
    first_byte: Optional[int] = None
    completed: Optional[int] = None
    rtt_to_first_byte: Optional[float] = None
    rtt_to_server_first_byte: Optional[float] = None
    bytes_received: int = 0
    retransmits: int = 0
    rekeys: int = 0
    puzzles: int = 0
    body: bytes = field(default=b"", repr=False)


@dataclass
class Trace:
    """
    Everything a run produced.
    """

    config: SimConfig
    events: list[dict] = field(default_factory=list)
    flows: dict[str, FlowResult] = field(default_factory=dict)
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0
    end_time: int = 0

    @property
    def retransmits(self) -> dict[str, int]:
        return {name: flow.retransmits for name, flow in self.flows.items()}

    def to_jsonl(self) -> str:
        return "".join(json.dumps(event, sort_keys=True) + "\n" for event in self.events)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    def summary(self) -> dict:
        flows = {}
        for name, flow in self.flows.items():
            entry = asdict(flow)
            entry.pop("body")
            flows[name] = entry
        return {
            "seed": self.config.seed,
            "latency_ms": self.config.latency_ms,
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "in_flight": self.in_flight,
            "end_time": self.end_time,
            "flows": flows,
        }
