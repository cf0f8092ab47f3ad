"""Built-in second-stage distinguishers for both constructions.

Each distinguisher is deterministic given its rng, so worlds that share a
trial seed see the same query strategy (up to adaptivity on answers).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import DomainError
from .oracle_core import Point

ADVERSARY_KINDS = ("consistency-single", "consistency-multi", "f-collision", "random-probe")


def _distinct(rng: random.Random, bits: int, seen: set, limit: int | None = None) -> int:
    if limit is not None and len(seen) >= limit:
        raise DomainError("message space exhausted")
    while True:
        m = rng.getrandbits(bits)
        if m not in seen:
            seen.add(m)
            return m


@dataclass(frozen=True)
class DistinguisherSpec:
    """kind plus its size parameter: count, qF or q depending on kind."""

    kind: str = "consistency-single"
    count: int = 2
    qF: int = 2
    q: int = 8

    def __post_init__(self):
        if self.kind not in ADVERSARY_KINDS:
            raise DomainError(f"unknown adversary kind {self.kind!r}")
        if min(self.count, self.qF, self.q) < 1:
            raise DomainError("adversary sizes must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> DistinguisherSpec:
        d = dict(d)
        unknown = set(d) - {"kind", "count", "qF", "q"}
        if unknown:
            raise DomainError(f"unknown adversary keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        key = {"consistency-multi": "count", "f-collision": "qF", "random-probe": "q"}
        d = {"kind": self.kind}
        if self.kind in key:
            d[key[self.kind]] = getattr(self, key[self.kind])
        return d

    # budgets ---------------------------------------------------------------
    def exor_budget(self) -> int:
        """Second-stage calls the adversary issues against EXor worlds."""
        return {"consistency-single": 3, "consistency-multi": 3 * self.count,
                "f-collision": self.qF, "random-probe": self.q}[self.kind]

    def sponge_budget(self, calls_per_message: int) -> tuple[int, int]:
        """(construction calls, primitive calls) against sponge worlds."""
        if self.kind == "consistency-single":
            return 1, calls_per_message
        if self.kind == "consistency-multi":
            return self.count, self.count * calls_per_message
        if self.kind == "f-collision":
            return self.qF, 0
        return (self.q + 1) // 2, self.q // 2

    # EXor ------------------------------------------------------------------
    def run_exor(self, io, rng: random.Random) -> int:
        n = io.n
        seen: set[int] = set()
        if self.kind == "consistency-single":
            return self._exor_check(io, _distinct(rng, n, seen, 1 << n))
        if self.kind == "consistency-multi":
            # pairs of neighbouring messages m xor 1^n, m
            ok = True
            ones = (1 << n) - 1
            base = None
            for k in range(self.count):
                if k % 2 == 0:
                    while True:
                        base = rng.getrandbits(n)
                        if base not in seen and base ^ ones not in seen:
                            break
                    m = base ^ ones
                else:
                    m = base
                seen.add(m)
                ok &= self._exor_check(io, m)
            return int(ok)
        if self.kind == "f-collision":
            outs = set()
            hit = 0
            for _ in range(self.qF):
                v = io.construction(_distinct(rng, n, seen, 1 << n))
                hit |= v in outs
                outs.add(v)
            return hit
        acc = 0
        for _ in range(self.q):
            u = rng.randrange(3)
            if u == 0:
                acc ^= io.h(0, rng.getrandbits(n))
            elif u == 1:
                for v in io.batch(rng.getrandbits(n)):
                    acc ^= v
            else:
                acc ^= io.construction(rng.getrandbits(n))
        return acc & 1

    @staticmethod
    def _exor_check(io, m: int) -> int:
        g = 0
        for v in io.batch(m):
            g ^= v
        return int(io.h(0, g) == io.construction(m))

    # sponge ----------------------------------------------------------------
    def run_sponge(self, io, rng: random.Random) -> int:
        from .sponge import sponge_eval

        p = io.params
        seen: set[int] = set()

        def piecewise(msg):
            def f(q: Point):
                v = io.h(q.x)
                if v is None:
                    raise _Abort
                return v
            try:
                return sponge_eval(p, msg, f)
            except _Abort:
                return None

        if self.kind in ("consistency-single", "consistency-multi"):
            count = 1 if self.kind == "consistency-single" else self.count
            ok = True
            for _ in range(count):
                msg = _distinct(rng, p.ell, seen, 1 << p.ell)
                ok &= io.construction(msg) == piecewise(msg)
            return int(ok)
        if self.kind == "f-collision":
            outs = set()
            hit = 0
            for _ in range(self.qF):
                v = io.construction(_distinct(rng, p.ell, seen, 1 << p.ell))
                hit |= v in outs
                outs.add(v)
            return hit
        acc = 0
        for k in range(self.q):
            if k % 2 == 0:
                acc ^= io.construction(rng.getrandbits(p.ell))
            else:
                v = io.h(rng.getrandbits(p.n))
                acc ^= 0 if v is None else v
        return acc & 1


class _Abort(Exception):
    pass
