"""
Parsing, serialization and merging of domain records.
"""

# Std
import re
import copy
import json
from pathlib import Path

# 3rd party
import yaml
from pydantic import ValidationError as PydanticValidationError

# nmclt
from nmclt.nameregistry import defaults as d
from nmclt.nameregistry.types import DomainRecord
from nmclt.util.general import deep_merge
from nmclt.util.exceptions import ParseError

COMMENT_RE = re.compile(r'("(?:[^"\\]|\\.)*")|//[^\n]*')


def _stringify_keys(value):
    if isinstance(value, dict):
        return {str(k): _stringify_keys(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_stringify_keys(v) for v in value]
    return value


def _load_object(text: str) -> dict:
    """
    Strict JSON first. JSON-like listings with bare numeric keys or
    trailing commas go through the YAML flow parser instead.
    """
    try:
        data = json.loads(text)
    except ValueError:
        if not text.lstrip().startswith("{"):
            raise ParseError("not JSON") from None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as err:
            raise ParseError(f"not JSON: {err}") from err
        data = _stringify_keys(data)
        try:
            json.dumps(data)
        except (TypeError, ValueError) as err:
            raise ParseError(f"not JSON: {err}") from err

    if not isinstance(data, dict):
        raise ParseError("record must be a JSON object")
    return data


def parse_record(raw: bytes | str) -> DomainRecord:
    """
    Parse a record value. Raises ParseError(reason).
    """
    if isinstance(raw, str):
        raw = raw.encode("utf-8")
    if len(raw) > d.MAX_RECORD_BYTES:
        raise ParseError("oversize")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as err:
        raise ParseError("not UTF-8") from err

    data = _load_object(text)
    data.pop(d.REPLACE_MARKER, None)
    try:
        record = DomainRecord.model_validate(data)
    except PydanticValidationError as err:
        first = err.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise ParseError(f"{where}: {first['msg']}") from err

    if len(serialize_record(record)) > d.MAX_RECORD_BYTES:
        raise ParseError("oversize")
    return record


def serialize_record(record: DomainRecord) -> bytes:
    """
    Canonical on-chain form: compact JSON with sorted keys.
    """
    return canonical_json(record.to_json())


def canonical_json(data: dict) -> bytes:
    return json.dumps(
        data, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def strip_comments(text: str) -> str:
    """
    Remove // comments outside of string literals.
    """
    return COMMENT_RE.sub(lambda m: m.group(1) or "", text)


def load_record_file(path: Path | str) -> DomainRecord:
    """
    Read a documentation-style record file, comments allowed.
    """
    text = Path(path).expanduser().read_text(encoding="utf-8")
    return parse_record(strip_comments(text))


def merge_record_values(old: bytes, update: bytes) -> bytes:
    """
    Apply a NameUpdate value to the stored value.

    JSON objects are deep-merged, unless the update carries a top-level
    "_replace": true, in which case it replaces the stored value.
    Any other value replaces wholesale.
    """
    try:
        old_data = json.loads(old)
        update_data = json.loads(update)
    except ValueError:
        return update
    if not isinstance(old_data, dict) or not isinstance(update_data, dict):
        return update

    if update_data.pop(d.REPLACE_MARKER, False) is True:
        return canonical_json(update_data)
    return canonical_json(deep_merge(copy.deepcopy(old_data), update_data))
