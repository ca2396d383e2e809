"""Map JSON value paths to source offsets, for line-precise error messages."""

from __future__ import annotations

import json
import re
from json.decoder import scanstring

_WS = re.compile(r"[ \t\n\r]*")
_NUMBER = re.compile(r"-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][-+]?\d+)?")


def locate(text: str) -> dict[tuple, int]:
    """Offsets of every value in ``text`` keyed by path tuple (keys and indices).

    ``text`` must already be valid JSON; call ``json.loads`` first.
    """
    out: dict[tuple, int] = {}

    def skip(i):
        return _WS.match(text, i).end()

    def value(i, path):
        i = skip(i)
        out[path] = i
        c = text[i]
        if c == "{":
            i = skip(i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                i = skip(i)
                key, i = scanstring(text, i + 1)
                i = skip(i)
                i = value(i + 1, path + (key,))  # past ':'
                i = skip(i)
                if text[i] == "}":
                    return i + 1
                i += 1  # ','
        if c == "[":
            i = skip(i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = value(i, path + (k,))
                i = skip(i)
                k += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        if c == '"':
            return scanstring(text, i + 1)[1]
        for lit in ("true", "false", "null"):
            if text.startswith(lit, i):
                return i + len(lit)
        m = _NUMBER.match(text, i)
        if not m:
            raise json.JSONDecodeError("unexpected token", text, i)
        return m.end()

    value(0, ())
    return out


def line_of(text: str, offsets: dict, path) -> int:
    """1-based line of the deepest existing prefix of ``path``."""
    path = tuple(path)
    while path not in offsets and path:
        path = path[:-1]
    return text.count("\n", 0, offsets.get(path, 0)) + 1
