"""
Types used in the resolver module.
"""

# Std
from enum import IntEnum
from dataclasses import dataclass


class Status(IntEnum):
    OK = 0
    NOT_FOUND = 1
    EXPIRED = 2
    ERROR = 3


@dataclass(frozen=True)
class Query:
    qid: int
    fqdn: str


@dataclass(frozen=True)
class Response:
    """
    Resolver answer. The signature covers qid, status, record and height.
    """

    qid: int
    status: Status
    record: bytes
    height: int
    signature: bytes
