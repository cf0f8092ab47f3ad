"""Lazily sampled random functions over small bit-string domains.

A table's value at a point is derived by keyed hashing of the point, so the
"lazy draw" is schedule independent: two tables built from the same seed and
table id agree everywhere they are not explicitly overridden. Overrides are
how resampled variants h_{p -> beta} and hand-built tables are expressed.
"""

from __future__ import annotations

import enum
import hashlib
import json
import struct
from collections.abc import Iterable, Iterator, Mapping
from typing import NamedTuple

from .errors import DomainError
from .rng import derive_key

MAX_BITS = 16
MAX_INDEX = 64

_PACK = struct.Struct("<HI").pack


class Point(NamedTuple):
    """A domain element (index, x); the sponge uses index 0 throughout."""

    index: int
    x: int


def hexfmt(value: int, bits: int) -> str:
    width = max(1, (bits + 3) // 4)
    return format(value, f"0{width}x")


def check_width(value: int, bits: int, what: str = "value") -> None:
    if not isinstance(value, int) or value < 0 or value >> bits:
        raise DomainError(f"{what} {value!r} does not fit in {bits} bits")


class LazyFunctionTable:
    """A random function [max_index] x {0,1}^n -> {0,1}^out_width.

    `query` records the point in `entries`; `peek` reads without recording.
    `resample` is copy-on-write: the returned table shares the hash key and
    differs only at the resampled point.
    """

    __slots__ = ("n", "out_width", "max_index", "seed", "table_id",
                 "_hasher", "_mask", "_overrides", "_entries", "_parent")

    def __init__(self, n: int, seed: int, table_id: str = "h", *,
                 max_index: int = 0, out_width: int | None = None,
                 bindings: Mapping[Point, int] | None = None):
        if not 1 <= n <= MAX_BITS:
            raise DomainError(f"input width n={n} outside 1..{MAX_BITS}")
        if not 0 <= max_index <= MAX_INDEX:
            raise DomainError(f"max_index={max_index} outside 0..{MAX_INDEX}")
        out_width = n if out_width is None else out_width
        if not 1 <= out_width <= 64:
            raise DomainError(f"output width {out_width} outside 1..64")
        self.n = n
        self.out_width = out_width
        self.max_index = max_index
        self.seed = seed
        self.table_id = table_id
        self._hasher = hashlib.blake2b(key=derive_key(seed, "table", table_id),
                                       digest_size=8)
        self._mask = (1 << out_width) - 1
        self._overrides: dict[Point, int] = {}
        self._entries: dict[Point, int] = {}
        self._parent: LazyFunctionTable | None = None
        for p, v in (bindings or {}).items():
            self._check_point(p)
            check_width(v, out_width)
            self._overrides[p] = v

    def _check_point(self, p: Point) -> None:
        if not 0 <= p.index <= self.max_index:
            raise DomainError(f"index {p.index} outside 0..{self.max_index}")
        if p.x < 0 or p.x >> self.n:
            raise DomainError(f"x={p.x!r} does not fit in n={self.n} bits")

    def _fresh(self, p: Point) -> int:
        h = self._hasher.copy()
        h.update(_PACK(p.index, p.x))
        return int.from_bytes(h.digest(), "little") & self._mask

    def peek(self, p: Point) -> int:
        """Value at `p` without recording it as queried."""
        v = self._overrides.get(p)
        if v is None:
            self._check_point(p)
            v = self._fresh(p)
        return v

    def query(self, p: Point) -> int:
        v = self._entries.get(p)
        if v is None:
            v = self.peek(p)
            self._entries[p] = v
        return v

    __call__ = query

    def resample(self, p: Point, beta: int) -> LazyFunctionTable:
        """Return h_{p -> beta}; `self` is left untouched."""
        self._check_point(p)
        check_width(beta, self.out_width, "beta")
        child = object.__new__(LazyFunctionTable)
        child.n = self.n
        child.out_width = self.out_width
        child.max_index = self.max_index
        child.seed = self.seed
        child.table_id = self.table_id
        child._hasher = self._hasher
        child._mask = self._mask
        child._overrides = {**self._overrides, p: beta}
        child._entries = {p: beta}
        child._parent = self
        return child

    @property
    def entries(self) -> dict[Point, int]:
        """All recorded bindings, including those inherited from the parent."""
        chain = []
        t: LazyFunctionTable | None = self
        while t is not None:
            chain.append(t)
            t = t._parent
        merged: dict[Point, int] = {}
        for t in reversed(chain):
            for p in t._entries:
                merged[p] = self.peek(p)
        return merged

    def agrees_with(self, other: LazyFunctionTable, points: Iterable[Point]) -> bool:
        return all(self.peek(p) == other.peek(p) for p in points)

    def domain_points(self, index: int | None = None) -> Iterator[Point]:
        indices = range(self.max_index + 1) if index is None else (index,)
        for i in indices:
            for x in range(1 << self.n):
                yield Point(i, x)

    def __repr__(self) -> str:
        return (f"LazyFunctionTable(n={self.n}, out={self.out_width}, "
                f"max_index={self.max_index}, id={self.table_id!r}, "
                f"overrides={len(self._overrides)})")


def query(table: LazyFunctionTable, p: Point) -> int:
    return table.query(p)


def resample(table: LazyFunctionTable, p: Point, beta: int) -> LazyFunctionTable:
    return table.resample(p, beta)


class Provenance(str, enum.Enum):
    FIRST_STAGE = "first-stage"
    DISTINGUISHER = "distinguisher"
    IMPLEMENTATION = "implementation-internal"
    SIMULATOR = "simulator-internal"


class Transcript:
    """An ordered list of (point, value) pairs with distinct domain points."""

    def __init__(self, pairs: Iterable[tuple] = ()):
        self._points: list[Point] = []
        self._values: dict[Point, int] = {}
        self._prov: dict[Point, Provenance] = {}
        for item in pairs:
            self.add(*item)

    def add(self, p: Point, value: int,
            provenance: Provenance = Provenance.DISTINGUISHER) -> None:
        if p in self._values:
            raise DomainError(f"point {p} already in transcript")
        self._points.append(p)
        self._values[p] = value
        self._prov[p] = Provenance(provenance)

    def rebind(self, p: Point, value: int, provenance: Provenance) -> None:
        """Overwrite an existing binding in place (simulator reprogramming)."""
        if p not in self._values:
            self.add(p, value, provenance)
            return
        self._values[p] = value
        self._prov[p] = Provenance(provenance)

    def get(self, p: Point, default=None):
        return self._values.get(p, default)

    def __getitem__(self, p: Point) -> int:
        return self._values[p]

    def __contains__(self, p: object) -> bool:
        return p in self._values

    def __len__(self) -> int:
        return len(self._points)

    def __iter__(self) -> Iterator[tuple[Point, int]]:
        for p in self._points:
            yield p, self._values[p]

    def provenance(self, p: Point) -> Provenance:
        return self._prov[p]

    def prefix(self, j: int) -> Transcript:
        """The sub-transcript of the first j entries (tau_j)."""
        return Transcript((p, self._values[p], self._prov[p]) for p in self._points[:j])

    def domain(self) -> frozenset[Point]:
        return frozenset(self._points)

    def items(self) -> list[tuple[Point, int, Provenance]]:
        return [(p, self._values[p], self._prov[p]) for p in self._points]

    def copy(self) -> Transcript:
        return Transcript(self.items())

    def to_jsonl(self, n: int, out_width: int | None = None) -> str:
        out_width = n if out_width is None else out_width
        lines = []
        for p, v, prov in self.items():
            lines.append(json.dumps({
                "index": p.index,
                "x": hexfmt(p.x, n),
                "value": hexfmt(v, out_width),
                "provenance": prov.value,
            }))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str) -> Transcript:
        t = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            t.add(Point(row["index"], int(row["x"], 16)), int(row["value"], 16),
                  Provenance(row["provenance"]))
        return t


def transcript_domain(t: Transcript) -> frozenset[Point]:
    return t.domain()
