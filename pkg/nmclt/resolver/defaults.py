"""
Default values for the resolver service and client.
"""

MAGIC: bytes = b"NMC1"
HOST: str = "127.0.0.1"
PORT: int = 5353
TIMEOUT: float = 1.0  # seconds per attempt
RETRIES: int = 3
WORKERS: int = 4
MAX_DATAGRAM: int = 8192
POLL_INTERVAL: float = 0.2
