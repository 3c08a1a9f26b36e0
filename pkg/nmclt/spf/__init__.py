from .spf import SPF, Mode

spf = SPF()

__all__ = ["spf", "Mode"]
