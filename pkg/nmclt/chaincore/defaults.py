"""
Default values for the chain core.
"""

# Units
COIN: int = 10**8
MAX_AMOUNT: int = 2**64 - 1

# Rewards & fees
INITIAL_REWARD: int = 50 * COIN
HALVING_INTERVAL: int = 210_000
INITIAL_NETWORK_FEE: int = 50 * COIN
FEE_EPOCH_BLOCKS: int = 8640  # 2 months at one block per 10 minutes
REGISTRATION_BURN: int = COIN // 100  # 0.01 coin

# Names
NAME_EXPIRY_BLOCKS: int = 36_000
NAME_PREFIX: str = "d/"
NAME_VALUE_LIMIT: int = 4096

# Blocks
POW_TARGET: int = 2**256 - 1
BLOCK_INTERVAL: int = 600
MAX_BLOCK_TXS: int = 1000
ADDRESS_VERSION: int = 0x00

# Node
ORPHAN_POOL_LIMIT: int = 512
MINE_ATTEMPTS: int = 2**32
