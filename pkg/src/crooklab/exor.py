"""The EXor construction, its crooked simulator and the game chain.

EXor(R, m) = h(0, g_R(m)) with g_R(m) = XOR_{i=1..l} h(i, m xor r_i).

All worlds of one trial share the h tape (table id "h"), the F tape (table id
"F"), the IV R and the stage-one advice z. Real-side worlds sample h lazily
with one coupling rule: when a message's batch is first processed and its
envelope point (0, g~_R(m)) is still unset, that point is drawn from the F
tape at m. This is a valid lazy sampler of a uniform h and makes adjacent
games comparable seed by seed.
"""

from __future__ import annotations

import random
from collections.abc import Callable
from dataclasses import dataclass, field

from .errors import BudgetError, ContractViolation, DomainError
from .oracle_core import LazyFunctionTable, Point, Provenance, Transcript
from .subversion import EvaluationRecord, ImplementationHandle, evaluate_subverted

WORLDS = ("Real", "G0", "G1", "G2", "Ideal")
Oracle = Callable[[Point], int]


@dataclass(frozen=True)
class ExorParams:
    n: int
    l: int
    R: tuple[int, ...]

    def __post_init__(self):
        if self.l < 1:
            raise DomainError("EXor needs l >= 1")
        if len(self.R) != self.l:
            raise DomainError(f"|R|={len(self.R)} but l={self.l}")
        for r in self.R:
            if r < 0 or r >> self.n:
                raise DomainError(f"r={r!r} does not fit in n={self.n} bits")

    @classmethod
    def sample(cls, n: int, l: int, rng: random.Random) -> ExorParams:
        return cls(n, l, tuple(rng.getrandbits(n) for _ in range(l)))

    def alpha(self, j: int, m: int) -> Point:
        """Branch point (j, m xor r_j) for 1 <= j <= l."""
        return Point(j, m ^ self.R[j - 1])

    def message_of(self, p: Point) -> int:
        if not 1 <= p.index <= self.l:
            raise DomainError(f"{p} is not a branch point")
        return p.x ^ self.R[p.index - 1]

    def batch_points(self, m: int) -> list[Point]:
        return [self.alpha(j, m) for j in range(1, self.l + 1)]


def g_r_eval(params: ExorParams, m: int, oracle: Oracle,
             handle: ImplementationHandle | None = None
             ) -> tuple[int, list[EvaluationRecord]]:
    """g_R(m) (honest oracle) or g~_R(m) (when a handle is given)."""
    acc = 0
    records = []
    for j in range(1, params.l + 1):
        p = params.alpha(j, m)
        if handle is None:
            v = oracle(p)
            rec = EvaluationRecord(p, v, ((p, v),), False)
        else:
            rec = evaluate_subverted(handle, oracle, p)
        records.append(rec)
        acc ^= rec.value
    return acc, records


def exor_eval(params: ExorParams, m: int, oracle: Oracle,
              handle: ImplementationHandle | None = None) -> int:
    g, _ = g_r_eval(params, m, oracle, handle)
    p = Point(0, g)
    if handle is None:
        return oracle(p)
    return evaluate_subverted(handle, oracle, p).value


@dataclass
class BatchRecord:
    """Everything the world learned while processing message m."""

    m: int
    honest: tuple[int, ...]
    subverted: tuple[int, ...]
    g: int
    prefixed: bool
    bad1: bool = False
    bad2: bool = False
    programmed: int = 0
    envelope_value: int = 0
    answer: int = 0
    touched: frozenset[Point] = frozenset()
    flagged: bool = False

    @property
    def envelope(self) -> Point:
        return Point(0, self.g)

    @property
    def mismatched_branches(self) -> tuple[int, ...]:
        """Branch indices where the distinguisher-known h differs from h~."""
        return tuple(j + 1 for j, (a, b) in enumerate(zip(self.honest, self.subverted))
                     if a != b)


@dataclass
class LedgerRow:
    m: int
    expected: int
    observed: int
    flagged: bool

    @property
    def consistent(self) -> bool:
        return self.expected == self.observed


@dataclass
class GameResult:
    world: str
    output_bit: int
    bad1: bool
    bad2: bool
    ledger: list[LedgerRow]
    answers: list[tuple]
    batches: list[BatchRecord] = field(default_factory=list)
    f_queries: int = 0
    htilde_calls: int = 0
    aborted: bool = False

    @property
    def bad(self) -> bool:
        return self.bad1 or self.bad2

    @property
    def bad_flags(self) -> tuple[bool, bool]:
        return self.bad1, self.bad2

    def unflagged_consistent(self) -> bool:
        return all(r.consistent for r in self.ledger if not r.flagged)


class _ExorState:
    """Bookkeeping shared by the simulator and the game worlds."""

    def __init__(self, handle: ImplementationHandle, params: ExorParams,
                 tape: LazyFunctionTable, F: LazyFunctionTable,
                 z: Transcript | None = None):
        if handle.n != params.n:
            raise DomainError("handle and params disagree on n")
        self.handle = handle
        self.params = params
        self.tape = tape
        self.F = F
        z = handle.advice if z is None else z
        self.L = z.copy()
        self.LA = z.copy()
        self.LF: dict[int, int] = {}
        self.Lg: dict[int, BatchRecord] = {}
        self.order: list[int] = []
        self.bad1 = False
        self.bad2 = False
        self.aborted = False
        self.f_queries = 0
        self.htilde_calls = 0
        self._touched_by: dict[Point, list[int]] = {}

    # lazily fixed h values ------------------------------------------------
    def _fix(self, p: Point, prov: Provenance = Provenance.IMPLEMENTATION) -> int:
        v = self.L.get(p)
        if v is None:
            v = self.tape.peek(p)
            self.L.add(p, v, prov)
        return v

    def _fresh_or_bound(self, p: Point) -> int:
        """Read-only view of the current h: bound value or the tape value."""
        v = self.L.get(p)
        return self.tape.peek(p) if v is None else v

    def _run_htilde(self, p: Point, touched: set) -> EvaluationRecord:
        self.htilde_calls += 1
        rec = evaluate_subverted(self.handle, self._fix, p)
        touched.update(rec.points)
        touched.update(rec.advice_hits)
        return rec

    def _query_F(self, m: int) -> int:
        v = self.LF.get(m)
        if v is None:
            self.f_queries += 1
            v = self.F.peek(Point(0, m))
            self.LF[m] = v
        return v

    def _flag_touching(self, p: Point) -> None:
        for m in self._touched_by.get(p, ()):
            self.Lg[m].flagged = True

    # batch processing -----------------------------------------------------
    def _process(self, m: int, *, reprogram: bool) -> BatchRecord:
        """Evaluate g~_R(m), program the envelope and run the bad checks.

        reprogram=True overwrites an already fixed envelope with F(m) (the
        G2 / simulator behaviour); otherwise the existing value stands.
        """
        points = self.params.batch_points(m)
        prefixed = all(p in self.L for p in points)
        touched: set[Point] = set()
        honest, subv = [], []
        for p in points:
            rec = self._run_htilde(p, touched)
            honest.append(self.L[p])
            subv.append(rec.value)
        g = 0
        for v in subv:
            g ^= v
        env = Point(0, g)
        rec = BatchRecord(m, tuple(honest), tuple(subv), g, prefixed)
        fm = self._query_F(m)
        if env in self.L:
            rec.bad1 = True
            self.bad1 = True
            self._flag_touching(env)
            if reprogram:
                self.L.rebind(env, fm, Provenance.SIMULATOR)
        else:
            self.L.add(env, fm, Provenance.SIMULATOR)
        rec.programmed = self.L[env]
        env_rec = self._run_htilde(env, touched)
        rec.envelope_value = env_rec.value
        if env_rec.value != rec.programmed:
            rec.bad2 = True
            self.bad2 = True
        rec.touched = frozenset(touched | {env})
        rec.flagged = rec.bad1 or rec.bad2
        for p in rec.touched:
            self._touched_by.setdefault(p, []).append(m)
        # distinguisher-known list: honest branch values and the envelope
        for p, v in zip(points, honest):
            if p not in self.LA:
                self.LA.add(p, v, Provenance.SIMULATOR)
        self.LA.rebind(env, rec.programmed, Provenance.SIMULATOR)
        self.Lg[m] = rec
        self.order.append(m)
        return rec

    def la_subset_of_l(self) -> bool:
        return all(p in self.L for p, _ in self.LA)


class ExorSimulator(_ExorState):
    """The crooked simulator S^F(z, R, H~): Type-1 and Type-2 queries."""

    def sim_type1(self, w: int) -> int:
        p = Point(0, w)
        v = self.L.get(p)
        if v is None:
            v = self.tape.peek(p)
            self.L.add(p, v, Provenance.DISTINGUISHER)
        if p not in self.LA:
            self.LA.add(p, v, Provenance.DISTINGUISHER)
        return v

    def sim_type2(self, m: int) -> BatchRecord:
        """Process the batch of m. Bad1 sets `aborted`; the envelope is then
        re-programmed to F(m) and the batch values are still returned."""
        if m in self.Lg:
            raise ContractViolation(f"message {m:#x} already batch-queried")
        rec = self._process(m, reprogram=True)
        if rec.bad1:
            self.aborted = True
        rec.answer = self.LF[m]
        return rec

    def batch(self, m: int) -> BatchRecord:
        """Idempotent Type-2 entry point (duplicates answered from Lg)."""
        rec = self.Lg.get(m)
        return rec if rec is not None else self.sim_type2(m)

    def query(self, p: Point) -> int:
        if p.index == 0:
            return self.sim_type1(p.x)
        self.batch(self.params.message_of(p))
        return self.L[p]


class ExorWorld(_ExorState):
    """One of the worlds Real, G0, G1, G2 or Ideal behind a common interface."""

    def __init__(self, world: str, handle: ImplementationHandle, params: ExorParams,
                 tape: LazyFunctionTable, F: LazyFunctionTable):
        if world not in WORLDS:
            raise DomainError(f"unknown EXor world {world!r}")
        super().__init__(handle, params, tape, F)
        self.world = world
        self.sim = ExorSimulator(handle, params, tape, F) if world == "Ideal" else None

    def _batch(self, m: int) -> BatchRecord:
        if self.sim is not None:
            return self.sim.batch(m)
        rec = self.Lg.get(m)
        if rec is not None:
            return rec
        rec = self._process(m, reprogram=self.world == "G2")
        if self.world == "G2":
            rec.answer = self.LF[m]
        else:
            rec.answer = rec.envelope_value
        return rec

    def h(self, p: Point) -> int:
        if not 0 <= p.index <= self.params.l or p.x < 0 or p.x >> self.params.n:
            raise DomainError(f"{p} outside the EXor domain")
        if self.sim is not None:
            return self.sim.query(p)
        if p.index == 0:
            return self._fix(p, Provenance.DISTINGUISHER)
        self._batch(self.params.message_of(p))
        return self.L[p]

    def batch(self, m: int) -> tuple[int, ...]:
        self._batch(m)
        state = self.sim if self.sim is not None else self
        return tuple(state.L[p] for p in self.params.batch_points(m))

    def construction(self, m: int) -> int:
        if m < 0 or m >> self.params.n:
            raise DomainError(f"message {m!r} does not fit in n bits")
        rec = self._batch(m)
        if self.world in ("Real", "G0"):
            # recompute C^h~(R, m) against the current h
            return exor_eval(self.params, m, self._fix, self.handle)
        return rec.answer

    @property
    def state(self) -> _ExorState:
        return self.sim if self.sim is not None else self

    def ledger(self) -> list[LedgerRow]:
        """One row per processed message: distinguisher-visible h~(0, g~_R(m))
        (re-evaluated on the final h) against the construction answer."""
        st = self.state
        rows = []
        for m in st.order:
            rec = st.Lg[m]
            observed = exor_eval(self.params, m, st._fresh_or_bound, self.handle)
            rows.append(LedgerRow(m, rec.answer, observed, rec.flagged))
        return rows


def new_world(world: str, handle: ImplementationHandle, params: ExorParams,
              seed: int) -> ExorWorld:
    """Build a world on the shared tapes of a trial seed."""
    n, l = params.n, params.l
    tape = LazyFunctionTable(n, seed, "h", max_index=l)
    F = LazyFunctionTable(n, seed, "F")
    return ExorWorld(world, handle, params, tape, F)


class ExorOracles:
    """The adversary's view of a world: budgeted, recorded oracle access."""

    def __init__(self, world: ExorWorld, q2: int):
        self.world = world
        self.q2 = q2
        self.used = 0
        self.answers: list[tuple] = []
        self.n = world.params.n
        self.l = world.params.l
        self.R = world.params.R

    def _spend(self) -> None:
        if self.used >= self.q2:
            raise BudgetError(f"second-stage budget q2={self.q2} exhausted")
        self.used += 1

    @property
    def remaining(self) -> int:
        return self.q2 - self.used

    def h(self, index: int, x: int) -> int:
        self._spend()
        v = self.world.h(Point(index, x))
        self.answers.append(("h", index, x, v))
        return v

    def batch(self, m: int) -> tuple[int, ...]:
        self._spend()
        vs = self.world.batch(m)
        self.answers.append(("batch", m, vs))
        return vs

    def construction(self, m: int) -> int:
        self._spend()
        v = self.world.construction(m)
        self.answers.append(("C", m, v))
        return v


def run_exor_game(world: str, adversary, handle: ImplementationHandle,
                  params: ExorParams, seed: int, *, q2: int,
                  adv_rng: random.Random | None = None) -> GameResult:
    """Run `adversary` (an object with run_exor(oracles, rng) -> bit) in `world`."""
    from .rng import stream
    w = new_world(world, handle, params, seed)
    io = ExorOracles(w, q2)
    rng = adv_rng if adv_rng is not None else stream(seed, "adversary")
    bit = int(adversary.run_exor(io, rng)) & 1
    st = w.state
    return GameResult(world, bit, st.bad1, st.bad2, w.ledger(), io.answers,
                      [st.Lg[m] for m in st.order], st.f_queries, st.htilde_calls,
                      st.aborted)
