"""Two-stage implementor model: advice collection and subverted implementations.

An implementation is a deterministic oracle algorithm. It is handed an `ask`
callback and the value of its first query (always the input point itself)
and returns its claimed output. The evaluation wrapper enforces the rules a
(q1, tau) implementation must obey: at most tau distinct oracle queries, the
first one on the input, and no oracle query on a point of the advice z
(those are answered from the hardwired copy of z instead).
"""

from __future__ import annotations

import random
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .errors import BudgetError, ContractViolation, DomainError, SizeLimitError
from .oracle_core import LazyFunctionTable, Point, Provenance, Transcript
from .stats import RateEstimate

Oracle = Callable[[Point], int]
Algorithm = Callable[[Callable[[Point], int], Point, int], int]

KINDS = ("honest", "output-predicate", "input-predicate", "trigger",
         "neighbor-wrapped", "custom")

EXHAUSTIVE_MAX_BITS = 12


@dataclass(frozen=True)
class SubverterSpec:
    """Declarative description of a built-in (or custom) implementor.

    output-predicate: crook iff the top k bits of h(p) are zero.
    input-predicate:  crook iff the top k bits of x are zero (table independent).
    trigger:          also query p xor delta; crook iff its top k bits are zero.
    neighbor-wrapped: run `inner`, then query (i, x xor 1^n) if not yet queried.
    Crooking always flips the lowest output bit.
    """

    kind: str = "honest"
    q1: int = 0
    k: int = 0
    delta: int = 0
    inner: SubverterSpec | None = None
    tau: int | None = None
    algorithm: Algorithm | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown subverter kind {self.kind!r}")
        if self.q1 < 0:
            raise DomainError("q1 must be non-negative")
        if self.kind == "neighbor-wrapped" and self.inner is None:
            raise DomainError("neighbor-wrapped needs an inner spec")
        if self.kind == "trigger" and self.delta == 0:
            raise DomainError("trigger offset delta must be non-zero")
        if self.kind == "custom" and (self.algorithm is None or self.tau is None):
            raise DomainError("custom subverter needs an algorithm and tau")
        if self.k < 0:
            raise DomainError("predicate bit count k must be non-negative")
        if self.tau is not None and self.tau < 1:
            raise DomainError("tau must be at least 1")

    @property
    def query_bound(self) -> int:
        if self.tau is not None:
            return self.tau
        if self.kind == "trigger":
            return 2
        if self.kind == "neighbor-wrapped":
            return self.inner.query_bound + 1
        return 1

    def nominal_eps(self) -> float:
        """Expected crooked fraction for a uniformly random table."""
        if self.kind in ("output-predicate", "input-predicate", "trigger"):
            return 2.0 ** -self.k
        if self.kind == "neighbor-wrapped":
            return self.inner.nominal_eps()
        return 0.0

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind, "q1": self.q1}
        if self.kind in ("output-predicate", "input-predicate", "trigger"):
            d["k"] = self.k
        if self.kind == "trigger":
            d["delta"] = hex(self.delta)
        if self.inner is not None:
            d["inner"] = self.inner.to_dict()
        d["tau"] = self.query_bound
        return d

    @classmethod
    def from_dict(cls, d: dict | str) -> SubverterSpec:
        if isinstance(d, str):
            d = {"kind": d}
        if not isinstance(d, dict):
            raise DomainError("subverter must be a mapping or a kind name")
        d = dict(d)
        inner = d.pop("inner", None)
        delta = d.pop("delta", 0)
        if isinstance(delta, str):
            delta = int(delta, 16)
        tau = d.pop("tau", None)
        kind = d.pop("kind", "honest")
        if kind == "custom":
            raise DomainError("custom subverters cannot be loaded from config")
        unknown = set(d) - {"q1", "k"}
        if unknown:
            raise DomainError(f"unknown subverter keys {sorted(unknown)}")
        inner_spec = cls.from_dict(inner) if inner is not None else None
        spec = cls(kind=kind, q1=d.get("q1", 0), k=d.get("k", 0), delta=delta,
                   inner=inner_spec)
        if tau is not None and tau != spec.query_bound:
            raise DomainError(f"tau={tau} disagrees with kind {kind!r} "
                              f"(expected {spec.query_bound})")
        return spec


def _build_algorithm(spec: SubverterSpec, n: int, out_width: int) -> Algorithm:
    if spec.kind == "honest":
        return lambda ask, p, first: first
    if spec.kind == "custom":
        return spec.algorithm
    if spec.kind == "neighbor-wrapped":
        inner = _build_algorithm(spec.inner, n, out_width)
        ones = (1 << n) - 1

        def wrapped(ask, p, first):
            v = inner(ask, p, first)
            ask(Point(p.index, p.x ^ ones))
            return v
        return wrapped
    k = spec.k
    if spec.kind == "output-predicate":
        shift = out_width - k
        return lambda ask, p, first: first ^ 1 if first >> shift == 0 else first
    if spec.kind == "input-predicate":
        shift = n - k
        return lambda ask, p, first: first ^ 1 if p.x >> shift == 0 else first
    if spec.kind == "trigger":
        shift = out_width - k
        delta = spec.delta

        def trigger(ask, p, first):
            v2 = ask(Point(p.index, p.x ^ delta))
            return first ^ 1 if v2 >> shift == 0 else first
        return trigger
    raise DomainError(f"unhandled kind {spec.kind!r}")


class ImplementationHandle:
    """A subverted implementation with its stage-one transcript hardwired."""

    __slots__ = ("spec", "n", "out_width", "advice", "hardwired", "tau", "algorithm")

    def __init__(self, spec: SubverterSpec, n: int, advice: Transcript | None = None,
                 out_width: int | None = None):
        if spec.kind == "trigger" and spec.delta >> n:
            raise DomainError(f"delta {spec.delta:#x} wider than n={n}")
        self.spec = spec
        self.n = n
        self.out_width = n if out_width is None else out_width
        self.advice = advice if advice is not None else Transcript()
        self.hardwired = {p: v for p, v in self.advice}
        self.tau = spec.query_bound
        self.algorithm = _build_algorithm(spec, n, self.out_width)

    @property
    def z(self) -> Transcript:
        return self.advice

    def __repr__(self) -> str:
        return f"ImplementationHandle({self.spec.kind}, n={self.n}, tau={self.tau}, |z|={len(self.advice)})"


AdviceString = Transcript


class EvaluationRecord(NamedTuple):
    input: Point
    value: int
    query_log: tuple[tuple[Point, int], ...]
    subverted: bool
    advice_hits: tuple[Point, ...] = ()

    @property
    def points(self) -> tuple[Point, ...]:
        return tuple(p for p, _ in self.query_log)


def evaluate_subverted(handle: ImplementationHandle, oracle: Oracle, p: Point,
                       *, strict: bool = False) -> EvaluationRecord:
    """Run h~(p) against `oracle`, enforcing the implementation contract.

    With strict=True a query into D(z) raises instead of being re-routed to
    the hardwired advice.
    """
    log: list[tuple[Point, int]] = []
    seen: dict[Point, int] = {}
    hits: list[Point] = []
    hardwired = handle.hardwired
    tau = handle.tau

    def ask(q: Point) -> int:
        v = seen.get(q)
        if v is not None:
            return v
        if q in hardwired:
            if strict:
                raise ContractViolation(f"implementation queried advice point {q}")
            v = hardwired[q]
            hits.append(q)
        else:
            if len(log) >= tau:
                raise ContractViolation(f"implementation exceeded tau={tau}")
            v = oracle(q)
            log.append((q, v))
        seen[q] = v
        return v

    # first query is the input itself and always goes to the oracle
    first = oracle(p)
    log.append((p, first))
    seen[p] = first
    value = handle.algorithm(ask, p, first)
    return EvaluationRecord(p, value, tuple(log), value != first, tuple(hits))


def evaluate_value(handle: ImplementationHandle, oracle: Oracle, p: Point) -> int:
    """Lean variant of evaluate_subverted returning only h~(p)."""
    return evaluate_subverted(handle, oracle, p).value


def run_first_stage(spec: SubverterSpec, oracle: Oracle, *, l: int, n: int,
                    rng: random.Random, out_width: int | None = None,
                    points: list[Point] | None = None,
                    domain_indices: range | None = None
                    ) -> tuple[ImplementationHandle, Transcript]:
    """Stage one: issue q1 distinct oracle queries and fix h~ with z hardwired.

    Query points are drawn uniformly without replacement from the domain
    unless an explicit `points` list is given.
    """
    indices = domain_indices if domain_indices is not None else range(l + 1)
    if points is None:
        size = len(indices) << n
        if spec.q1 > size:
            raise BudgetError(f"q1={spec.q1} exceeds domain size {size}")
        picks = rng.sample(range(size), spec.q1)
        mask = (1 << n) - 1
        points = [Point(indices[v >> n], v & mask) for v in picks]
    else:
        if len(points) > spec.q1:
            raise BudgetError(f"{len(points)} stage-one points exceed q1={spec.q1}")
        if len(set(points)) != len(points):
            raise DomainError("stage-one points must be distinct")
    advice = Transcript()
    for q in points:
        advice.add(q, oracle(q), Provenance.FIRST_STAGE)
    return ImplementationHandle(spec, n, advice, out_width), advice


def wrap_neighbor(handle: ImplementationHandle) -> ImplementationHandle:
    spec = SubverterSpec(kind="neighbor-wrapped", q1=handle.spec.q1, inner=handle.spec)
    return ImplementationHandle(spec, handle.n, handle.advice, handle.out_width)


def crooked_fraction(handle: ImplementationHandle, table: LazyFunctionTable,
                     mode: str | tuple = "exhaustive", *, rng: random.Random | None = None,
                     max_bits: int = EXHAUSTIVE_MAX_BITS) -> list[RateEstimate]:
    """Per-index fraction of x with h~(i, x) != h(i, x).

    mode is "exhaustive" or ("sample", m); sample mode needs `rng`.
    """
    oracle = table.peek
    out = []
    if mode == "exhaustive":
        if table.n > max_bits:
            raise SizeLimitError(f"exhaustive scan needs n <= {max_bits}, got {table.n}")
        indices = range(table.max_index + 1)
        size = 1 << table.n
        for i in indices:
            bad = sum(evaluate_subverted(handle, oracle, Point(i, x)).subverted
                      for x in range(size))
            out.append(RateEstimate(bad, size))
        return out
    kind, m = mode
    if kind != "sample" or m < 1:
        raise DomainError(f"bad crooked_fraction mode {mode!r}")
    if rng is None:
        raise DomainError("sample mode needs an rng")
    for i in range(table.max_index + 1):
        bad = 0
        for _ in range(m):
            x = rng.getrandbits(table.n)
            bad += evaluate_subverted(handle, oracle, Point(i, x)).subverted
        out.append(RateEstimate(bad, m))
    return out


def measured_eps(handle: ImplementationHandle, table: LazyFunctionTable, **kw) -> float:
    """Max per-index crooked fraction; this is "the" eps of the handle on a table."""
    return max(r.estimate for r in crooked_fraction(handle, table, **kw))


def detect(handle: ImplementationHandle, table: LazyFunctionTable, t: int,
           rng: random.Random) -> bool:
    """Sampling detector: pass iff h~ = h on t random x drawn for each index."""
    if t < 1:
        raise DomainError("detection needs t >= 1 samples")
    oracle = table.peek
    for i in range(table.max_index + 1):
        for _ in range(t):
            x = rng.getrandbits(table.n)
            if evaluate_subverted(handle, oracle, Point(i, x)).subverted:
                return False
    return True
