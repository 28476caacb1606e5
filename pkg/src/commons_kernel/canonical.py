"""Canonical binary encoding.

Every value is a one-byte tag followed by a fixed-width or length-prefixed
body. Mappings and sets are emitted in order of their encoded keys, so two
equal values always produce identical bytes. Integers are 128-bit signed,
big-endian.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import struct
from fractions import Fraction
from typing import Any

_INT_BYTES = 16
_INT_MIN = -(1 << (8 * _INT_BYTES - 1))
_INT_MAX = (1 << (8 * _INT_BYTES - 1)) - 1


def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


def _int(n: int) -> bytes:
    if not _INT_MIN <= n <= _INT_MAX:
        raise OverflowError(f"integer {n} exceeds 128-bit canonical range")
    return n.to_bytes(_INT_BYTES, "big", signed=True)


def encode(value: Any) -> bytes:
    out = bytearray()
    _encode(value, out)
    return bytes(out)


def _encode(v: Any, out: bytearray) -> None:
    if v is None:
        out += b"N"
    elif v is True:
        out += b"T"
    elif v is False:
        out += b"F"
    elif isinstance(v, enum.Enum):
        _encode(v.value, out)
    elif isinstance(v, int):
        out += b"I" + _int(v)
    elif isinstance(v, float):
        out += b"D" + struct.pack(">d", v)
    elif isinstance(v, Fraction):
        out += b"Q" + _int(v.numerator) + _int(v.denominator)
    elif isinstance(v, str):
        raw = v.encode("utf-8")
        out += b"S" + _u32(len(raw)) + raw
    elif isinstance(v, (bytes, bytearray)):
        out += b"B" + _u32(len(v)) + bytes(v)
    elif isinstance(v, (list, tuple)):
        out += b"L" + _u32(len(v))
        for item in v:
            _encode(item, out)
    elif isinstance(v, dict):
        pairs = sorted((encode(k), encode(x)) for k, x in v.items())
        out += b"M" + _u32(len(pairs))
        for k, x in pairs:
            out += k + x
    elif isinstance(v, (set, frozenset)):
        items = sorted(encode(x) for x in v)
        out += b"E" + _u32(len(items))
        for x in items:
            out += x
    elif dataclasses.is_dataclass(v) and not isinstance(v, type):
        out += b"R"
        _encode(type(v).__name__, out)
        _encode({f.name: getattr(v, f.name) for f in dataclasses.fields(v)}, out)
    else:
        raise TypeError(f"cannot canonically encode {type(v).__name__}")


def decode(data: bytes) -> Any:
    try:
        value, end = _decode(data, 0)
    except (struct.error, IndexError, UnicodeDecodeError, ZeroDivisionError) as exc:
        raise ValueError(f"truncated or malformed encoding ({exc})") from None
    if end != len(data):
        raise ValueError(f"trailing bytes after offset {end}")
    return value


def _decode(b: bytes, i: int) -> tuple[Any, int]:
    tag = b[i : i + 1]
    i += 1
    if tag == b"N":
        return None, i
    if tag == b"T":
        return True, i
    if tag == b"F":
        return False, i
    if tag == b"I":
        return int.from_bytes(b[i : i + _INT_BYTES], "big", signed=True), i + _INT_BYTES
    if tag == b"D":
        return struct.unpack(">d", b[i : i + 8])[0], i + 8
    if tag == b"Q":
        num = int.from_bytes(b[i : i + _INT_BYTES], "big", signed=True)
        den = int.from_bytes(b[i + _INT_BYTES : i + 2 * _INT_BYTES], "big", signed=True)
        return Fraction(num, den), i + 2 * _INT_BYTES
    if tag in (b"S", b"B"):
        (n,) = struct.unpack(">I", b[i : i + 4])
        raw = b[i + 4 : i + 4 + n]
        if len(raw) != n:
            raise ValueError("truncated string")
        return (raw.decode("utf-8") if tag == b"S" else bytes(raw)), i + 4 + n
    if tag in (b"L", b"E"):
        (n,) = struct.unpack(">I", b[i : i + 4])
        i += 4
        items = []
        for _ in range(n):
            item, i = _decode(b, i)
            items.append(item)
        return (items if tag == b"L" else frozenset(items)), i
    if tag == b"M":
        (n,) = struct.unpack(">I", b[i : i + 4])
        i += 4
        d = {}
        for _ in range(n):
            k, i = _decode(b, i)
            if isinstance(k, list):
                k = tuple(k)
            d[k], i = _decode(b, i)
        return d, i
    raise ValueError(f"unknown tag {tag!r} at offset {i - 1}")


def digest(value: Any) -> bytes:
    return hashlib.sha256(encode(value)).digest()
