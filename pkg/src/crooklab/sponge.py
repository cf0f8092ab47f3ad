"""Randomized-IV sponge over a random function, its graph simulator and games.

A state (x_r, x_c) is stored as the integer (x_r << c) | x_c and queried as
Point(0, state). Messages and digests are integers whose blocks are read
most-significant first.
"""

from __future__ import annotations

import json
import random
from collections.abc import Callable
from dataclasses import dataclass, field

from .errors import BudgetError, DomainError, GraphCorruptionError, SaturationError
from .oracle_core import MAX_BITS, LazyFunctionTable, Point, Transcript, hexfmt
from .rng import stream
from .subversion import ImplementationHandle, SubverterSpec, evaluate_subverted, run_first_stage

WORLDS = ("Real", "G0", "G1a", "G1b", "G2", "G3", "Ideal")
Oracle = Callable[[Point], int]
BOTTOM = None


@dataclass(frozen=True)
class SpongeParams:
    r: int
    c: int
    ell: int
    s: int
    R: int = 0

    def __post_init__(self):
        if self.r < 1 or self.c < 1:
            raise DomainError("rate and capacity must be at least 1 bit")
        if self.r + self.c > MAX_BITS:
            raise DomainError(f"r + c = {self.r + self.c} exceeds {MAX_BITS}")
        if self.ell < self.r or self.ell % self.r:
            raise DomainError("ell must be a positive multiple of r")
        if self.s < self.r or self.s % self.r:
            raise DomainError("s must be a positive multiple of r")
        if self.ell > MAX_BITS:
            raise DomainError(f"ell={self.ell} exceeds {MAX_BITS} bits")
        if self.s > 64:
            raise DomainError("s is capped at 64 bits")
        if self.R < 0 or self.R >> self.n:
            raise DomainError("R does not fit in r + c bits")

    @property
    def n(self) -> int:
        return self.r + self.c

    @property
    def absorb_blocks(self) -> int:
        return self.ell // self.r

    @property
    def squeeze_blocks(self) -> int:
        return self.s // self.r

    @property
    def calls_per_message(self) -> int:
        return self.absorb_blocks + self.squeeze_blocks - 1

    @property
    def R0(self) -> int:
        return self.R >> self.c

    @property
    def R1(self) -> int:
        return self.R & ((1 << self.c) - 1)

    def with_iv(self, R: int) -> SpongeParams:
        return SpongeParams(self.r, self.c, self.ell, self.s, R)

    def sample_iv(self, rng: random.Random) -> SpongeParams:
        return self.with_iv(rng.getrandbits(self.n))

    def node(self, xr: int, xc: int) -> int:
        return (xr << self.c) | xc

    def split(self, x: int) -> tuple[int, int]:
        return x >> self.c, x & ((1 << self.c) - 1)

    def blocks(self, msg: int) -> list[int]:
        if msg < 0 or msg >> self.ell:
            raise DomainError(f"message does not fit in ell={self.ell} bits")
        k = self.absorb_blocks
        mask = (1 << self.r) - 1
        return [(msg >> (self.r * (k - 1 - i))) & mask for i in range(k)]

    def join(self, blocks: list[int]) -> int:
        v = 0
        for b in blocks:
            v = (v << self.r) | b
        return v

    def digest_blocks(self, z: int) -> list[int]:
        t = self.squeeze_blocks
        mask = (1 << self.r) - 1
        return [(z >> (self.r * (t - 1 - i))) & mask for i in range(t)]


def sponge_trace(params: SpongeParams, msg: int, f: Oracle,
                 handle: ImplementationHandle | None = None) -> tuple[int, list[int]]:
    """Digest and the list of primitive inputs the evaluation queried."""
    call = f if handle is None else (lambda p: evaluate_subverted(handle, f, p).value)
    xr, xc = params.R0, params.R1
    inputs = []
    for b in params.blocks(msg):
        x = params.node(xr ^ b, xc)
        inputs.append(x)
        xr, xc = params.split(call(Point(0, x)))
    out = [xr]
    for _ in range(params.squeeze_blocks - 1):
        x = params.node(xr, xc)
        inputs.append(x)
        xr, xc = params.split(call(Point(0, x)))
        out.append(xr)
    return params.join(out), inputs


def sponge_eval(params: SpongeParams, msg: int, f: Oracle,
                handle: ImplementationHandle | None = None) -> int:
    """C^f(R, msg); with a handle the subverted h~ is used for every call."""
    return sponge_trace(params, msg, f, handle)[0]


class SpongeSimGraph:
    """Graph state of the classical sponge simulator.

    Marks are kept as a set of capacities: node x is marked iff its c-part is.
    The IV's capacity is marked at construction.
    """

    def __init__(self, params: SpongeParams, rng: random.Random,
                 F: Callable[[int], int] | None = None):
        self.params = params
        self.rng = rng
        self.F = F
        self.edges: dict[int, int] = {}
        self.nodes: set[int] = set()
        self.marked_caps: set[int] = {params.R1}
        self.L: set[int] = {params.R1}
        self._target_by_cap: dict[int, int] = {}
        self.f_queries = 0

    # -- primitives ---------------------------------------------------------
    def is_marked(self, x: int) -> bool:
        return (x & ((1 << self.params.c) - 1)) in self.marked_caps

    def _fresh_cap(self) -> int:
        c = self.params.c
        if len(self.L) >= 1 << c:
            raise SaturationError(f"capacity list L is full (2^{c} values)")
        if len(self.L) * 2 <= 1 << c:
            while True:
                yc = self.rng.getrandbits(c)
                if yc not in self.L:
                    return yc
        free = [v for v in range(1 << c) if v not in self.L]
        return free[self.rng.randrange(len(free))]

    def newnode(self) -> int:
        yc = self._fresh_cap()
        yr = self.rng.getrandbits(self.params.r)
        self.L.add(yc)
        return self.params.node(yr, yc)

    def _add_edge(self, x: int, y: int) -> None:
        self.edges[x] = y
        self.nodes.add(x)
        self.nodes.add(y)
        self._target_by_cap.setdefault(y & ((1 << self.params.c) - 1), x)

    def findpath(self, x: int) -> list[int]:
        """Message blocks that drive the absorption from R to input x."""
        p = self.params
        blocks: list[int] = []
        seen = 0
        while True:
            xr, xc = p.split(x)
            if xc == p.R1:
                blocks.append(xr ^ p.R0)
                break
            t = self._target_by_cap.get(xc)
            if t is None or not self.is_marked(t):
                raise GraphCorruptionError(f"no marked predecessor for node {x:#x}")
            yr = self.edges[t] >> p.c
            blocks.append(xr ^ yr)
            x = t
            seen += 1
            if seen > p.absorb_blocks:
                raise GraphCorruptionError("path longer than ell")
        blocks.reverse()
        return blocks

    def seed_stage_one(self, advice: Transcript) -> None:
        """Exclude the c-parts of all first-stage inputs from fresh sampling."""
        mask = (1 << self.params.c) - 1
        for q, v in advice:
            self.L.add(q.x & mask)
            if self.edges.get(q.x) is None:
                self._add_edge(q.x, v)
                self.L.add(v & mask)

    def sim(self, x: int) -> int:
        """Classical graph simulator Sim(x)."""
        y = self.edges.get(x)
        if y is not None:
            return y
        p = self.params
        xc = x & ((1 << p.c) - 1)
        self.L.add(xc)
        if self.is_marked(x):
            blocks = self.findpath(x)
            if len(blocks) < p.absorb_blocks:
                y = self.newnode()
                self._add_edge(x, y)
                self.marked_caps.add(y & ((1 << p.c) - 1))
                return y
            if len(blocks) > p.absorb_blocks:
                raise GraphCorruptionError("marked node beyond message length")
            if self.F is None:
                raise DomainError("simulator has no F oracle")
            self.f_queries += 1
            z = self.F(p.join(blocks))
            prev = x
            first = None
            for zi in p.digest_blocks(z):
                yc = self._fresh_cap()
                self.L.add(yc)
                y = p.node(zi, yc)
                self._add_edge(prev, y)
                if first is None:
                    first = y
                prev = y
            return first
        y = self.newnode()
        self._add_edge(x, y)
        return y

    def stage_one(self, x: int) -> int:
        """Procedure S^_1: honest lazy answers with unique capacities."""
        y = self.edges.get(x)
        if y is not None:
            return y
        y = self.newnode()
        self._add_edge(x, y)
        return y

    def check_capacity_uniqueness(self) -> bool:
        mask = (1 << self.params.c) - 1
        caps = [y & mask for y in self.edges.values()]
        return len(caps) == len(set(caps))

    def snapshot(self) -> dict:
        p = self.params
        hx = lambda v: hexfmt(v, p.n)  # noqa: E731
        return {
            "R": hx(p.R),
            "nodes": sorted(hx(v) for v in self.nodes),
            "edges": [[hx(a), hx(b)] for a, b in sorted(self.edges.items())],
            "marked_capacities": sorted(hexfmt(v, p.c) for v in self.marked_caps),
            "L": sorted(hexfmt(v, p.c) for v in self.L),
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)


class CrookedSpongeSimulator:
    """Stage-two simulator S^_2 wrapping Sim with h~ evaluation on marked nodes."""

    def __init__(self, graph: SpongeSimGraph, handle: ImplementationHandle):
        self.graph = graph
        self.handle = handle
        self.bad = False
        self.htilde_calls = 0

    def query(self, x: int):
        g = self.graph
        y = g.edges.get(x)
        if y is not None:
            return y
        if x == g.params.R:
            g.marked_caps.add(g.params.R1)
        if g.is_marked(x):
            self.htilde_calls += 1
            rec = evaluate_subverted(self.handle, lambda q: g.sim(q.x), Point(0, x))
            if rec.value != g.sim(x):
                self.bad = True
                return BOTTOM
        return g.sim(x)


def crooked_sim_query(sim: CrookedSpongeSimulator, x: int):
    return sim.query(x)


@dataclass
class SpongeLedgerRow:
    msg: int
    expected: int | None
    observed: int | None
    flagged: bool

    @property
    def consistent(self) -> bool:
        return self.expected is not None and self.expected == self.observed


@dataclass
class SpongeGameResult:
    world: str
    output_bit: int
    bad: bool
    ledger: list[SpongeLedgerRow]
    answers: list[tuple]
    graph: dict | None = None
    f_queries: int = 0
    htilde_calls: int = 0
    bad_inputs: list[int] = field(default_factory=list)

    def unflagged_consistent(self) -> bool:
        return all(r.consistent for r in self.ledger if not r.flagged)


class SpongeWorld:
    """One sponge world. Stage one runs inside the constructor."""

    def __init__(self, world: str, spec: SubverterSpec, params: SpongeParams, seed: int):
        if world not in WORLDS:
            raise DomainError(f"unknown sponge world {world!r}")
        self.world = world
        p = params
        self.H = LazyFunctionTable(p.n, seed, "h")
        self.Ftab = LazyFunctionTable(p.ell, seed, "F", out_width=p.s)
        stage_rng = stream(seed, "stage-one")
        self.bad = False
        self.bad_inputs: list[int] = []
        self.htilde_calls = 0
        self.f_queries = 0
        self.graph = None
        self.sim = None
        self._constructed: dict[int, int | None] = {}
        if world in ("G3", "Ideal"):
            # IV is drawn after stage one; the graph needs it, so stage one
            # runs on a provisional graph whose edges are then carried over
            iv_rng = stream(seed, "iv")
            probe = SpongeSimGraph(p.with_iv(0), stream(seed, "sim"))
            probe.L.clear()
            probe.marked_caps.clear()
            handle, z = run_first_stage(spec, lambda q: probe.stage_one(q.x),
                                        l=0, n=p.n, rng=stage_rng)
            self.params = p.sample_iv(iv_rng)
            g = SpongeSimGraph(self.params, probe.rng, self._F)
            g.L |= probe.L
            g.seed_stage_one(z)
            self.graph = g
            if world == "Ideal":
                self.sim = CrookedSpongeSimulator(g, handle)
        else:
            handle, z = run_first_stage(spec, self.H.peek, l=0, n=p.n, rng=stage_rng)
            self.params = p.sample_iv(stream(seed, "iv"))
        self.handle = handle
        self.z = z

    def _F(self, msg: int) -> int:
        self.f_queries += 1
        return self.Ftab.peek(Point(0, msg))

    # -- adversary interfaces ----------------------------------------------
    def primitive(self, x: int):
        if x < 0 or x >> self.params.n:
            raise DomainError("node outside {0,1}^(r+c)")
        if self.world == "Ideal":
            return self.sim.query(x)
        if self.world == "G3":
            return self.graph.sim(x)
        return self.H.peek(Point(0, x))

    def _G0(self, x: int) -> int:
        """The combined interface G(0, x) of the intermediate games."""
        self.htilde_calls += 1
        p = Point(0, x)
        yt = evaluate_subverted(self.handle, self.H.peek, p).value
        if self.world in ("G1a", "G1b"):
            y = self.H.peek(p)
            if yt != y:
                self.bad = True
                self.bad_inputs.append(x)
                if self.world == "G1b":
                    return y
        return yt

    def construction(self, msg: int):
        p = self.params
        w = self.world
        if w == "Real":
            self.htilde_calls += p.calls_per_message
            v = sponge_eval(p, msg, self.H.peek, self.handle)
        elif w in ("G0", "G1a", "G1b"):
            v = sponge_eval(p, msg, lambda q: self._G0(q.x))
        elif w == "G2":
            v = sponge_eval(p, msg, self.H.peek)
        else:
            v = self._F(msg)
        self._constructed.setdefault(msg, v)
        return v

    @property
    def bad_flag(self) -> bool:
        return self.sim.bad if self.sim is not None else self.bad

    def ledger(self) -> list[SpongeLedgerRow]:
        """Per construction query: h~-evaluated sponge over the world's
        primitive view, against the construction answer."""
        rows = []
        for msg, expected in self._constructed.items():
            if self.world in ("G3", "Ideal"):
                prim = self.primitive

                def oracle(q, prim=prim):
                    v = prim(q.x)
                    if v is BOTTOM:
                        raise _Bottom
                    return v
                try:
                    observed = sponge_eval(self.params, msg, oracle,
                                           self.handle if self.world == "Ideal" else None)
                except _Bottom:
                    observed = None
                flagged = self.bad_flag or observed is None
            else:
                trace = sponge_trace(self.params, msg, self.H.peek, self.handle)
                observed = trace[0]
                flagged = any(x in self.bad_inputs for x in trace[1])
            rows.append(SpongeLedgerRow(msg, expected, observed, flagged))
        return rows


class _Bottom(Exception):
    pass


class SpongeOracles:
    """Budgeted adversary access: q2 construction calls, qh primitive calls."""

    def __init__(self, world: SpongeWorld, q2: int, qh: int):
        self.world = world
        self.params = world.params
        self.q2 = q2
        self.qh = qh
        self.used_c = 0
        self.used_h = 0
        self.answers: list[tuple] = []

    def h(self, x: int):
        if self.used_h >= self.qh:
            raise BudgetError(f"primitive budget {self.qh} exhausted")
        self.used_h += 1
        v = self.world.primitive(x)
        self.answers.append(("h", x, v))
        return v

    def construction(self, msg: int):
        if self.used_c >= self.q2:
            raise BudgetError(f"construction budget q2={self.q2} exhausted")
        self.used_c += 1
        v = self.world.construction(msg)
        self.answers.append(("C", msg, v))
        return v


def run_sponge_game(world: str, adversary, spec: SubverterSpec, params: SpongeParams,
                    seed: int, *, q2: int, qh: int | None = None,
                    adv_rng: random.Random | None = None,
                    snapshot: bool = False) -> SpongeGameResult:
    w = SpongeWorld(world, spec, params, seed)
    qh = q2 * params.calls_per_message * 2 if qh is None else qh
    io = SpongeOracles(w, q2, qh)
    rng = adv_rng if adv_rng is not None else stream(seed, "adversary")
    bit = int(adversary.run_sponge(io, rng)) & 1
    ledger = w.ledger()
    htilde = w.htilde_calls + (w.sim.htilde_calls if w.sim is not None else 0)
    graph = w.graph.snapshot() if (snapshot and w.graph is not None) else None
    return SpongeGameResult(world, bit, w.bad_flag, ledger, io.answers, graph,
                            w.f_queries, htilde, list(w.bad_inputs))
