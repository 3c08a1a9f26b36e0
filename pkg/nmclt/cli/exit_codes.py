"""
Process exit codes for CLI errors.

Each nmclt error class maps onto one exit code, so scripts can
tell a missing name from a bad signature without parsing output.
"""

# nmclt
from nmclt.util import exceptions as nm_exc

OK = 0
UNEXPECTED = 1
USAGE = 2
NOT_FOUND = 3
EXPIRED = 4
VALIDATION = 5
AUTHENTICATION = 6
TIMEOUT = 7
STORAGE = 8
TRANSPORT = 9


# First match wins, so subclasses come before their bases
EXIT_CODES: list[tuple[type[BaseException], int, str]] = [
    (nm_exc.CliUsageError, USAGE, "Usage error"),
    # Lookup
    (nm_exc.NameNotFound, NOT_FOUND, "Name not found"),
    (nm_exc.NameExpired, EXPIRED, "Name expired"),
    # Authentication
    (nm_exc.BadSignature, AUTHENTICATION, "Bad signature"),
    (nm_exc.ResponseBadSignature, AUTHENTICATION, "Resolver response failed verification"),
    (nm_exc.FingerprintMismatch, AUTHENTICATION, "Resolver key does not match the pinned fingerprint"),
    # Timeouts
    (nm_exc.ResolveTimeout, TIMEOUT, "Resolver did not answer"),
    (nm_exc.FetchFailed, TIMEOUT, "Fetch did not complete"),
    # Storage
    (nm_exc.CorruptChainFile, STORAGE, "Chain file is corrupt"),
    (nm_exc.KeyFilePermissions, STORAGE, "Key file permissions"),
    (FileNotFoundError, STORAGE, "File not found"),
    (PermissionError, STORAGE, "Permission denied"),
    (OSError, STORAGE, "I/O error"),
    # Transport
    (nm_exc.TransportError, TRANSPORT, "Transport error"),
    (nm_exc.BindError, TRANSPORT, "Can't bind socket"),
    (nm_exc.ResolveError, TRANSPORT, "Resolution failed"),
    # Validation
    (nm_exc.ValidationError, VALIDATION, "Validation failed"),
    (nm_exc.InvalidAddress, VALIDATION, "Invalid address"),
    (nm_exc.InvalidPoint, VALIDATION, "Invalid public key"),
    (nm_exc.AmountError, VALIDATION, "Invalid amount"),
    (nm_exc.ParseError, VALIDATION, "Invalid record"),
    (nm_exc.BadName, VALIDATION, "Invalid name"),
    (nm_exc.BadFqdn, VALIDATION, "Invalid domain"),
    (nm_exc.ScriptError, VALIDATION, "Invalid scenario"),
]


def exit_code_for(err: BaseException) -> tuple[int, str]:
    """
    Exit code and headline for an error raised by a command.
    """
    for cls, code, message in EXIT_CODES:
        if isinstance(err, cls):
            return code, message
    return UNEXPECTED, "Unexpected error"
