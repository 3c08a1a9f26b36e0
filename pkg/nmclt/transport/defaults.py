"""
Default values for the transport.
"""

MAGIC: bytes = b"MLT1"
KDF_CONTEXT: bytes = b"mlt-v1"

# Sizes
MTU: int = 1200
MSS: int = 1066  # payload bytes that fit every packet type within the MTU
KEY_LEN: int = 32
TAG_LEN: int = 16

# Reliability & congestion control (ms / bytes)
RTO_MIN: int = 200
RTO_INITIAL: int = 1000
RTO_MAX: int = 60_000
INITIAL_CWND: int = 4 * MSS
DUPACK_THRESHOLD: int = 3
RECV_WINDOW: int = 256 * 1024

# Packet numbers
LOOKAHEAD: int = 64
REPLAY_WINDOW: int = 256

# Rekeying
REKEY_BYTES: int = 1024 * 1024
REKEY_INTERVAL_MS: int = 60_000

# Admission
PUZZLE_DIFFICULTY: int = 12
MAX_PUZZLE_DIFFICULTY: int = 30
MAX_TUNNELS: int = 1024

# A server drops a tunnel with nothing in flight after this long
TUNNEL_IDLE_MS: int = 120_000

# Server ephemeral key lifetime
EPH_EPOCH_MS: int = 3_600_000

PORT: int = 4433
