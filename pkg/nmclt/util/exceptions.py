"""
Exceptions raised across the nmclt package.

Every error derives from NmcltError so callers (the CLI in particular)
can catch the whole family at once. See nmclt/cli/exit_codes.py for the
mapping of these classes onto process exit codes.
"""


class NmcltError(Exception):
    """Base class for all nmclt errors."""

    pass


# ------------------------------------
# region - Chain core
# ------------------------------------


class InvalidPoint(NmcltError):
    """Exception for when bytes do not decode to a secp256k1 point."""

    pass


class InvalidAddress(NmcltError):
    """Exception for when an address text is not valid Base58Check."""

    pass


class AmountError(NmcltError):
    """Exception for when an amount is negative or overflows 64 bits."""

    pass


class ValidationError(NmcltError):
    """Exception for when a transaction does not validate against a chain state."""

    pass


class BadSignature(ValidationError):
    """Exception for when a transaction signature does not verify."""

    pass


class InsufficientFunds(ValidationError):
    """Exception for when the sender can't cover amount, fees and burn."""

    pass


class BadNonce(ValidationError):
    """Exception for when the sender nonce is not the next expected one."""

    pass


class NameTaken(ValidationError):
    """Exception for when a NameNew targets a live name."""

    pass


class NotOwner(ValidationError):
    """Exception for when a NameUpdate is signed by someone other than the owner."""

    pass


class NameExpired(ValidationError):
    """Exception for when a name is past its renewal window."""

    pass


class MalformedName(ValidationError):
    """Exception for when a name lacks the d/ namespace prefix."""

    pass


class MalformedTransaction(ValidationError):
    """Exception for when transaction fields are inconsistent with its kind."""

    pass


class MiningExhausted(NmcltError):
    """Exception for when no nonce satisfied the target within the attempt budget."""

    pass


class CorruptChainFile(NmcltError):
    """Exception for when a chain file breaks the hash chain or fails to parse."""

    pass


class KeyFilePermissions(NmcltError):
    """Exception for when a key file is readable by other users."""

    pass


# endregion
# ------------------------------------
# region - Name registry
# ------------------------------------


class ParseError(NmcltError):
    """Exception for when a domain record can't be parsed."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class BadName(NmcltError):
    """Exception for when a name is outside d/[a-z0-9-]{1,63}."""

    pass


class BadFqdn(NmcltError):
    """Exception for when a domain is not a resolvable .bit name."""

    pass


class NameNotFound(NmcltError):
    """Exception for when a name was never registered."""

    pass


# endregion
# ------------------------------------
# region - Resolver
# ------------------------------------


class ResolveError(NmcltError):
    """Exception for when a remote resolution can't be trusted or completed."""

    pass


class ResolveTimeout(ResolveError):
    """Exception for when the resolver did not answer within all retries."""

    pass


class ResponseBadSignature(ResolveError):
    """Exception for when a resolver response is not signed by the pinned key."""

    pass


class FingerprintMismatch(ResolveError):
    """Exception for when the configured resolver key doesn't match the pinned fingerprint."""

    pass


class ResolverStatusError(ResolveError):
    """Exception for when the resolver answered with an error status."""

    pass


class BindError(NmcltError):
    """Exception for when a UDP service can't bind its address."""

    pass


# endregion
# ------------------------------------
# region - Transport
# ------------------------------------


class TransportError(NmcltError):
    """Base class for MinimaLT transport errors."""

    pass


class BadKey(TransportError):
    """Exception for when a Curve25519 public key is malformed."""

    pass


class ConnectionClosedError(TransportError):
    """Exception for when data is sent on a finished connection."""

    pass


class RekeyInProgress(TransportError):
    """Exception for when a rekey is requested while another is pending."""

    pass


class PuzzleTooHard(TransportError):
    """Exception for when a puzzle exceeds the sanity cap on difficulty."""

    pass


class PacketError(TransportError):
    """Exception for when a datagram can't be parsed as a MinimaLT packet."""

    pass


class FetchFailed(TransportError):
    """Exception for when a fetch ends without a response."""

    pass


# endregion
# ------------------------------------
# region - Simulator
# ------------------------------------


class ScriptError(NmcltError):
    """Exception for when a simulator script is invalid."""

    pass


# endregion
# ------------------------------------


# ------------------------------------
# region - CLI
# ------------------------------------


class CliUsageError(NmcltError):
    """Exception for when a command is missing options or configuration it needs."""

    pass


# endregion
# ------------------------------------
