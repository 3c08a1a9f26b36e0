"""
Small helpers shared across the package.
"""

import os
import stat
import hashlib
from pathlib import Path


def sha256(data: bytes) -> bytes:
    """SHA-256 digest."""
    return hashlib.sha256(data).digest()


def double_sha256(data: bytes) -> bytes:
    """SHA-256 applied twice, as used by Base58Check checksums."""
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def deep_merge(dict1: dict, dict2: dict) -> dict:
    """
    Recursively merges dict2 into dict1.
    """
    for key, value in dict2.items():
        if key in dict1 and isinstance(dict1[key], dict) and isinstance(value, dict):
            # If both values are dictionaries, merge them recursively
            deep_merge(dict1[key], value)
        else:
            # Otherwise, update or add the key-value pair
            dict1[key] = value
    return dict1


def parse_host_port(value: str, default_port: int | None = None) -> tuple[str, int]:
    """
    Parse "host:port" into a tuple. The port may be omitted
    when a default is given.
    """
    host, sep, port = value.rpartition(":")
    if not sep:
        if default_port is None:
            raise ValueError(f"Missing port in '{value}'")
        return value, default_port
    return host, int(port)


def write_secret_file(path: Path | str, content: str) -> Path:
    """
    Write a secret to disk, readable by the owner only.
    """
    path = Path(path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w", encoding="utf-8") as file:
        file.write(content)
    os.chmod(path, 0o600)
    return path


def read_secret_file(path: Path | str) -> str:
    """
    Read a secret from disk, refusing files that other users can read.
    """
    from nmclt.util.exceptions import KeyFilePermissions

    path = Path(path).expanduser()
    mode = path.stat().st_mode
    if mode & (stat.S_IRGRP | stat.S_IROTH):
        raise KeyFilePermissions(
            f"Key file '{path}' is readable by other users, run: chmod 600 {path}"
        )
    return path.read_text(encoding="utf-8").strip()
