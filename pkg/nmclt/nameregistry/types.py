"""
Domain record schema.

Records are the JSON values stored under d/ names. Unknown fields are
kept as extras so newer record formats survive a parse / serialize cycle.
"""

from __future__ import annotations

# Std
import ipaddress
from dataclasses import dataclass
from typing import Optional

# 3rd party
from pydantic import BaseModel, ConfigDict, Field, StrictInt, StrictStr, field_validator

# Match type, fingerprint hex, position
TlsFingerprint = tuple[StrictInt, StrictStr, StrictInt]


def _check_hex32(value: str) -> str:
    try:
        raw = bytes.fromhex(value)
    except ValueError as err:
        raise ValueError("must be hex") from err
    if len(raw) != 32:
        raise ValueError(f"must decode to 32 bytes, got {len(raw)}")
    return value.lower()


class MinimaLTSection(BaseModel):
    """
    Transport parameters of a host: UDP port, long-term identity key
    and the ephemeral key clients encrypt their first packet to.
    """

    model_config = ConfigDict(extra="allow", populate_by_name=True)

    ip: Optional[StrictStr] = None
    port: StrictInt = Field(ge=1, le=65535)
    id_key: StrictStr
    eph_key: StrictStr

    @field_validator("ip")
    @classmethod
    def _ipv4(cls, value):
        if value is not None:
            ipaddress.IPv4Address(value)
        return value

    @field_validator("id_key", "eph_key")
    @classmethod
    def _key(cls, value):
        return _check_hex32(value)

    @property
    def eph_key_bytes(self) -> bytes:
        return bytes.fromhex(self.eph_key)

    @property
    def id_key_bytes(self) -> bytes:
        return bytes.fromhex(self.id_key)


class DomainRecord(BaseModel):
    """
    Value stored under a d/ name.

    The minimaLT section uses the "minimaLT" key on the wire
    and is exposed as .minimalt in Python.
    """

    model_config = ConfigDict(extra="allow", populate_by_name=True)

    ip: Optional[StrictStr] = None
    tor: Optional[StrictStr] = None
    email: Optional[StrictStr] = None
    info: Optional[StrictStr] = None
    tls: Optional[dict[str, dict[str, list[TlsFingerprint]]]] = None
    minimalt: Optional[MinimaLTSection] = Field(default=None, alias="minimaLT")
    map: Optional[dict[str, DomainRecord]] = None

    @field_validator("ip")
    @classmethod
    def _ipv4(cls, value):
        if value is not None:
            ipaddress.IPv4Address(value)
        return value

    def to_json(self) -> dict:
        return self.model_dump(by_alias=True, exclude_unset=True, mode="json")


@dataclass(frozen=True)
class ResolvedRecord:
    """
    A record resolved for a .bit domain, with its chain context.
    """

    fqdn: str
    name: str
    record: DomainRecord
    height: int
    last_update_height: int | None = None
    owner_pubkey: bytes | None = None

    def to_json(self) -> dict:
        return {
            "fqdn": self.fqdn,
            "name": self.name,
            "record": self.record.to_json(),
            "height": self.height,
            "last_update_height": self.last_update_height,
            "owner_pubkey": self.owner_pubkey.hex() if self.owner_pubkey else None,
        }
