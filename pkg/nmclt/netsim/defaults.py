"""
Default values for the network simulator.
"""

SEED: int = 0
LATENCY_MS: int = 50  # one-way
LOSS: float = 0.0
REORDER: float = 0.0
MAX_TIME_MS: int = 3_600_000

# Address plan used by scenarios
CLIENT_ADDR: tuple[str, int] = ("10.0.0.1", 40000)
SERVER_ADDR: tuple[str, int] = ("10.0.0.2", 4433)
RESOLVER_ADDR: tuple[str, int] = ("10.0.0.53", 5353)

FETCH_NAME: str = "d/example"
FETCH_DOCUMENT: bytes = b"<html><body>served over a zero round trip tunnel</body></html>\n"
