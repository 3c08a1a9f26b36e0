"""
Tests for configuration priority and log formatting.
"""

# Std
import logging

# 3rd party
import pytest

# nmclt
from nmclt.configuration import config, configure
from nmclt.chaincore import ChainParams
from nmclt.transport import TransportParams
from nmclt.util.logger import ColoredFormatter, set_clock


@pytest.fixture
def config_file(tmp_path, monkeypatch):
    path = tmp_path / "nmclt.config.yml"
    path.write_text("resolver_port: 6000\nmlt_port: 5000\nname_expiry_blocks: 10\nbogus: 1\n")
    monkeypatch.setenv("NMCLT_CONFIG", str(path))
    config().reset()
    yield path
    monkeypatch.undo()
    config().reset()


def test_config_priority(config_file, monkeypatch):
    monkeypatch.setenv("NMCLT_MLT_PORT", "5001")
    monkeypatch.setenv("NMCLT_LOAD_FLAG", "yes")
    monkeypatch.setenv("NMCLT_RESOLVER_TIMEOUT", "soon")
    config().reset()
    configure(name_expiry_blocks=12, rekey_bytes=None)

    cfg = config()
    assert cfg.resolver_port == 6000
    assert cfg.mlt_port == 5001
    assert cfg.load_flag is True
    assert cfg.name_expiry_blocks == 12
    assert cfg.resolver_timeout == 1.0
    assert cfg.rekey_bytes == 1024 * 1024
    assert not hasattr(cfg, "bogus")


def test_params_follow_config(config_file):
    configure(pow_target="00" + "ff" * 31, puzzle_difficulty=8)
    assert ChainParams.from_config().target == 2**248 - 1
    assert ChainParams.from_config().name_expiry_blocks == 10
    assert TransportParams.from_config().puzzle_difficulty == 8


def test_reset_drops_runtime_options(config_file):
    configure(max_tunnels=3)
    config().reset()
    assert config().max_tunnels == 1024
    assert "config_runtime" not in config().get_dict()


def test_log_lines_carry_virtual_time():
    formatter = ColoredFormatter()
    record = logging.LogRecord("nmclt.netsim.hosts", logging.INFO, __file__, 1, "Tunnel %s up", ("ab",), None)
    set_clock(lambda: 137)
    try:
        line = formatter.format(record)
    finally:
        set_clock(None)
    assert "[t=137ms] Tunnel ab up" in line
    assert "netsim.hosts" in line
    assert "nmclt.netsim" not in line
    assert "[t=" not in formatter.format(record)
