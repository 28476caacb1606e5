"""World state as a set of named tables with an undo journal.

Table values are treated as immutable: handlers replace them instead of
mutating in place (tuples, frozen dataclasses, ints, strings). That is what
makes the journal sufficient for rollback and the shallow ``copy`` safe.
"""

from __future__ import annotations

import hashlib
from contextlib import contextmanager
from typing import Any, Iterator

from . import canonical

_MISSING = object()


class Table:
    __slots__ = ("_state", "_name", "_data")

    def __init__(self, state: "WorldState", name: str, data: dict):
        self._state = state
        self._name = name
        self._data = data

    def get(self, key, default=None):
        return self._data.get(key, default)

    def __getitem__(self, key):
        return self._data[key]

    def __contains__(self, key) -> bool:
        return key in self._data

    def __len__(self) -> int:
        return len(self._data)

    def __iter__(self):
        return iter(self._data)

    def items(self):
        return self._data.items()

    def values(self):
        return self._data.values()

    def __setitem__(self, key, value) -> None:
        self._state._record(self._name, key, self._data.get(key, _MISSING))
        self._data[key] = value

    def __delitem__(self, key) -> None:
        self._state._record(self._name, key, self._data[key])
        del self._data[key]

    def pop(self, key, default=None):
        if key not in self._data:
            return default
        value = self._data[key]
        del self[key]
        return value


class WorldState:
    def __init__(self, tables: dict[str, dict] | None = None):
        self._tables: dict[str, dict] = tables if tables is not None else {}
        self._journal: list | None = None

    def table(self, name: str) -> Table:
        data = self._tables.get(name)
        if data is None:
            data = self._tables[name] = {}
        return Table(self, name, data)

    # config and clock are read so often they get shortcuts
    @property
    def tick(self) -> int:
        return self._tables.get("clock", {}).get("tick", 0)

    def config(self, key: str, default: Any = None) -> Any:
        return self._tables.get("config", {}).get(key, default)

    def enabled(self, mechanism: str) -> bool:
        return mechanism == "M7" or mechanism in self.config("enabled", frozenset())

    def _record(self, name: str, key, old) -> None:
        if self._journal is not None:
            self._journal.append((name, key, old))

    @contextmanager
    def atomic(self) -> Iterator["WorldState"]:
        """All-or-nothing block. Nested use joins the outer transaction."""
        if self._journal is not None:
            yield self
            return
        self._journal = []
        try:
            yield self
        except BaseException:
            for name, key, old in reversed(self._journal):
                data = self._tables[name]
                if old is _MISSING:
                    data.pop(key, None)
                else:
                    data[key] = old
            raise
        finally:
            self._journal = None

    def copy(self) -> "WorldState":
        return WorldState({name: dict(data) for name, data in self._tables.items()})

    def canonical_bytes(self) -> bytes:
        tables = {name: data for name, data in self._tables.items() if data}
        return canonical.encode(tables)

    def state_hash(self) -> bytes:
        return hashlib.sha256(self.canonical_bytes()).digest()
