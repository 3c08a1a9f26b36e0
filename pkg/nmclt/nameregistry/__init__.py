"""
Domain records stored under d/ names: schema, lifecycle and resolution.

Usage:
    from nmclt import nameregistry

    record = nameregistry.load_record_file("record.json")
    tx = nameregistry.register("d/example", record, key, nonce=1)
    resolved = nameregistry.resolve(node.snapshot(), "www.example.bit")
"""

# nmclt
from nmclt.nameregistry.types import DomainRecord, MinimaLTSection, ResolvedRecord
from nmclt.nameregistry.records import (
    load_record_file,
    merge_record_values,
    parse_record,
    serialize_record,
)
from nmclt.nameregistry.ephkey import EphKeyUpdate
from nmclt.nameregistry.registry import (
    next_nonce,
    register,
    resolve,
    split_fqdn,
    update_eph_key,
    update_record,
    validate_name,
)
