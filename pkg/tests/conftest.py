"""
Shared fixtures: fixed chain keys, funded nodes, the documented
d/ record listing, and an isolated configuration for CLI runs.
"""

# Std
import random

# 3rd party
import pytest

# nmclt
from nmclt.spf import spf
from nmclt.spf.spf import Mode
from nmclt.configuration import config
from nmclt.chaincore import ChainNode, ChainParams, KeyPair

# The documented record, verbatim apart from the comment-free form:
# bare numeric key and a trailing comma inside "map"
LISTING_RECORD = """{
    "ip"      : "209.236.123.133",
    "tor"     : "rqblqd3balaxcb57.onion",
    "email"   : "me@fredericjacobs.com",
    "info"    : "Frederic Jacobs",
    "tls": {
        "tcp": {
            443: [[1, "30F38EDAABC67F0344DBE27018552F7D575946EF", 1]]
        }
    },
    "map":
    {
        "www" : { "ip": "209.236.123.133" },
    }
}
"""


@pytest.fixture
def listing_record() -> str:
    return LISTING_RECORD


@pytest.fixture
def params() -> ChainParams:
    """
    Trivial proof of work and a short name expiry, for lifecycle tests.
    """
    return ChainParams(name_expiry_blocks=20)


@pytest.fixture
def alice() -> KeyPair:
    return KeyPair.from_secret(0xA11CE)


@pytest.fixture
def bob() -> KeyPair:
    return KeyPair.from_secret(0xB0B)


@pytest.fixture
def carol() -> KeyPair:
    return KeyPair.from_secret(0xCA201)


@pytest.fixture
def funded_node(params, alice) -> ChainNode:
    """
    A node where alice mined two blocks, enough for one registration.
    """
    node = ChainNode(params)
    for _ in range(2):
        node.mine_block(alice.address())
    return node


@pytest.fixture
def seeded_rng():
    """
    Byte source for transport key material.
    """
    return random.Random(1234).randbytes


@pytest.fixture
def cli_env(tmp_path, monkeypatch):
    """
    Point the configuration at a temporary data directory, away from
    any nmclt.config.yml in the working directory.
    """
    monkeypatch.setenv("NMCLT_CONFIG", str(tmp_path / "absent.config.yml"))
    monkeypatch.setenv("NMCLT_DATA_DIR", str(tmp_path))
    monkeypatch.setenv("NMCLT_CHAIN_FILE", str(tmp_path / "chain.jsonl"))
    monkeypatch.setenv("NMCLT_KEY_FILE", str(tmp_path / "chain.key"))
    config().reset()
    yield tmp_path
    monkeypatch.undo()
    config().reset()
    spf.set_mode(Mode.TERMINAL)
