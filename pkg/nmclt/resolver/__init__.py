"""
Signed name resolution over UDP.

Usage:
    from nmclt import resolver

    service = resolver.serve(key, resolver.node_source(node), port=5353)
    record = resolver.client_resolve(("127.0.0.1", 5353), key.fingerprint(), "example.bit", key.public_key)
    service.shutdown()
"""

from nmclt.resolver.types import Query, Response, Status
from nmclt.resolver.wire import (
    decode_query,
    decode_response,
    encode_query,
    encode_response,
    verify_response,
)
from nmclt.resolver.service import (
    ResolverService,
    chain_file_source,
    handle_query,
    node_source,
    serve,
)
from nmclt.resolver.client import (
    ResolverClient,
    check_pin,
    client_resolve,
    interpret_response,
)
