"""
Configuration options for the nmclt library and CLI.

Configuration settings order of priority:
    1. Programatically via nmclt.configure()
    2. Environment variables (NMCLT_*)
    3. Configuration file (nmclt.config.yml, or the file set in NMCLT_CONFIG)
    4. Default values

Usage:
    from nmclt.configuration import config

    if config().load_flag:
        ...
"""

# Std
import os
from pathlib import Path

# 3rd party
import yaml

# nmclt
from nmclt.spf import spf
from nmclt.util.logger import get_logger, set_log_level


logger = get_logger()

CONFIG_FILE_NAME = "nmclt.config.yml"
CONFIG_PATH_ENV = "NMCLT_CONFIG"


def config():
    """
    Get the config singleton instance.
    """
    return Config()


def configure(**options) -> None:
    """
    Optional config options to be set right after import.

    Any key of Config.default_config is accepted, eg:
        nmclt.configure(log_level="DEBUG", pow_target="00ff...")
    """
    for key, value in options.items():
        if value is None:
            continue
        config().set(key, value)
        if key == "log_level":
            set_log_level(value)

    # Re-initialize config to apply changes
    config().re_init()


class Config:
    """
    Configuration singleton for nmclt.

    Every option corresponds to an environment variable
    in SCREAMING_SNAKE_CASE, prefixed with NMCLT_.

    For option descriptions, please consult:
    /docs/config.md


    Option               Type   Default
    ---------------------------------------------------
    log_level            str    "INFO"
    data_dir             str    "~/.nmclt"
    chain_file           str    "~/.nmclt/chain.jsonl"
    key_file             str    "~/.nmclt/chain.key"
    pow_target           str    "ff" * 32
    block_interval       int    600
    name_expiry_blocks   int    36000
    fee_epoch_blocks     int    8640
    halving_interval     int    210000
    max_block_txs        int    1000
    address_version      int    0
    resolver_host        str    "127.0.0.1"
    resolver_port        int    5353
    resolver_pubkey      str    None
    resolver_fingerprint str    None
    resolver_timeout     float  1.0
    resolver_retries     int    3
    mlt_port             int    4433
    rekey_bytes          int    1048576
    rekey_interval_ms    int    60000
    puzzle_difficulty    int    12
    load_flag            bool   False
    max_tunnels          int    1024
    tunnel_idle_ms       int    120000
    eph_epoch_ms         int    3600000
    recv_window          int    262144
    json_output          bool   False
    ---------------------------------------------------
    """

    # Singleton instance
    _instance = None
    _initialized = False

    # Config options from file / env
    _config_file = None
    _config_env = None

    # Default config
    default_config = {
        "log_level": "INFO",
        "data_dir": "~/.nmclt",
        "chain_file": "~/.nmclt/chain.jsonl",
        "key_file": "~/.nmclt/chain.key",
        # Chain
        "pow_target": "ff" * 32,
        "block_interval": 600,
        "name_expiry_blocks": 36000,
        "fee_epoch_blocks": 8640,
        "halving_interval": 210000,
        "max_block_txs": 1000,
        "address_version": 0,
        # Resolver
        "resolver_host": "127.0.0.1",
        "resolver_port": 5353,
        "resolver_pubkey": None,
        "resolver_fingerprint": None,
        "resolver_timeout": 1.0,
        "resolver_retries": 3,
        # Transport
        "mlt_port": 4433,
        "rekey_bytes": 1024 * 1024,
        "rekey_interval_ms": 60_000,
        "puzzle_difficulty": 12,
        "load_flag": False,
        "max_tunnels": 1024,
        "tunnel_idle_ms": 120_000,
        "eph_epoch_ms": 3_600_000,
        "recv_window": 256 * 1024,
        # CLI
        "json_output": False,
    }

    # Config settings set via nmclt.configure() during runtime
    config_runtime = {}

    def __new__(cls, **args):
        """
        Control singleton instance creation.
        """
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self, defaults: bool = False):
        """
        Initialize the configuration by loading from environment variables,
        configuration file, and setting defaults.
        """
        # Prevent re-initialization of singleton
        if self._initialized:
            return

        # When running config.reset(defaults=True)
        # --> set config to default values only
        if defaults:
            _config = self.default_config
        else:
            _config = (
                self.default_config  # Base: defaults
                | self.config_file()  # 3rd priority: nmclt.config.yml
                | self.config_env()  # 2nd priority: environment variables
                | self.config_runtime  # 1st priority: set via nmclt.configure()
            )

        # Write to self
        for key, value in _config.items():
            setattr(self, key, value)

        self._initialized = True

    @classmethod
    def re_init(cls, defaults: bool = False):
        """
        Re-initialize the singleton instance.
        This is used after config values are changed
        via nmclt.configure() or config.reset().
        """
        instance = cls._instance
        if instance is not None:
            instance._initialized = False
            instance.__init__(defaults=defaults)

    def config_file(self) -> dict:
        """
        Returns the loaded config file as a dict.
        """
        if self._config_file is None:
            self._config_file = self._load_config_file()
        return self._config_file

    def _load_config_file(self) -> dict:
        """
        Loads configuration from a YAML file.
        Returns a dict.
        """
        _config_file = {}
        try:
            if CONFIG_PATH_ENV in os.environ:
                config_path = Path(os.environ[CONFIG_PATH_ENV]).expanduser()
            else:
                config_path = Path(os.getcwd()) / CONFIG_FILE_NAME

            if config_path.exists():
                with open(config_path, "r", encoding="utf-8") as file:
                    _config_file = yaml.safe_load(file)
                    _config_file = _config_file if _config_file else {}

            # Ignore unknown keys rather than polluting the namespace
            unknown = [key for key in _config_file if key not in self.default_config]
            for key in unknown:
                logger.warning("Config key '%s' in %s not recognized.", key, config_path)
                del _config_file[key]

            logger.debug(
                "Loaded config options from file %s: %s",
                config_path.name,
                ", ".join(_config_file) if _config_file else "None",
            )
            return _config_file

        except Exception as err:  # pylint: disable=broad-except
            logger.error("An error occurred while loading the config file: %s", err)
            return {}

    def config_env(self) -> dict:
        """
        Returns the loaded config env as a dict.
        """
        if self._config_env is None:
            self._config_env = self._load_config_env()
        return self._config_env

    def _load_config_env(self) -> dict:
        """
        Loads configuration from environment variables,
        coerced to the type of the default value.
        """
        _config_env = {}
        for key, default in self.default_config.items():
            env_var = f"NMCLT_{key.upper()}"
            if env_var not in os.environ:
                continue
            val = os.environ[env_var]
            try:
                if isinstance(default, bool):
                    val = val.lower() in ("true", "1", "yes")
                elif isinstance(default, int):
                    val = int(val)
                elif isinstance(default, float):
                    val = float(val)
            except ValueError:
                logger.warning("Ignoring %s, invalid value '%s'", env_var, val)
                continue
            _config_env[key] = val

        logger.debug(
            "Loaded config options from environment variables: %s",
            ", ".join(_config_env) if _config_env else "None",
        )
        return _config_env

    def set(self, key, value):
        """
        Set a configuration value.
        This is used by nmclt.configure(key=val)
        """
        if key in self.default_config:
            self.config_runtime[key] = value
            logger.debug("Config '%s' set to '%s'", key, value)
        else:
            logger.warning("Config key '%s' not recognized.", key)

    def reset(self, defaults: bool = False):
        """
        Resets the configuration to default values.
        """
        self.config_runtime.clear()
        self._config_env = None
        self._config_file = None
        self.re_init(defaults)
        logger.debug("Configuration reset")

    def path(self, key: str) -> Path:
        """
        Returns a path option with the user directory expanded.
        """
        return Path(getattr(self, key)).expanduser()

    def get_dict(self) -> dict:
        """
        Returns the current config, mainly for debugging purposes.
        """
        return {k: v for k, v in self.__dict__.items() if not k.startswith("_")}

    def report(self):
        """
        Prints an overview of the current configuration.
        """
        _report = ["<h1>Compiled config</h1>"]
        for key, val in self.get_dict().items():
            _report.append(f"<green>{key:20}</green><soft>:</soft> {val}")
        spf("\n".join(_report), pad=1)

        _report = ["<h2>Configuration Sources:</h2>"]
        sources = [
            ("1. Config runtime", self.config_runtime),
            ("2. Config env", self.config_env()),
            ("3. Config file", self.config_file()),
        ]
        for title, values in sources:
            _report.append(f"\n  {title}")
            for key, val in values.items():
                _report.append(f"     {key:20}: {val}")
            if not values:
                _report.append("     <soft>None</soft>")
        spf("\n".join(_report))
