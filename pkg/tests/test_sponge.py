import json
import random

import pytest

from crooklab import sponge
from crooklab.adversaries import ADVERSARY_KINDS, DistinguisherSpec
from crooklab.errors import BudgetError, DomainError, GraphCorruptionError, SaturationError
from crooklab.oracle_core import LazyFunctionTable, Point
from crooklab.rng import stream, trial_seed
from crooklab.sponge import (CrookedSpongeSimulator, SpongeParams, SpongeSimGraph,
                             run_sponge_game, sponge_eval, sponge_trace)
from crooklab.subversion import ImplementationHandle, SubverterSpec

P = SpongeParams(4, 4, 8, 4, R=0x5C)


def test_params_validation():
    with pytest.raises(DomainError):
        SpongeParams(4, 4, 6, 4)
    with pytest.raises(DomainError):
        SpongeParams(4, 4, 8, 5)
    with pytest.raises(DomainError):
        SpongeParams(8, 10, 8, 8)
    assert P.calls_per_message == 2
    assert (P.R0, P.R1) == (0x5, 0xC)


def test_single_block_digest():
    p = SpongeParams(4, 4, 4, 4, R=0x37)
    h = LazyFunctionTable(8, 1, "h")
    for m in range(16):
        y = h.peek(Point(0, p.node(p.R0 ^ m, p.R1)))
        assert sponge_eval(p, m, h.peek) == y >> 4


def test_call_count_and_squeeze_normalization():
    p = SpongeParams(4, 4, 8, 12, R=1)
    h = LazyFunctionTable(8, 1, "h")
    _, inputs = sponge_trace(p, 0xAB, h.peek)
    assert len(inputs) == p.absorb_blocks + p.squeeze_blocks - 1 == 4


def test_honest_handle_equals_oracle_exhaustively():
    h = LazyFunctionTable(8, 2, "h")
    handle = ImplementationHandle(SubverterSpec(), 8)
    for m in range(256):
        assert sponge_eval(P, m, h.peek, handle) == sponge_eval(P, m, h.peek)


def test_prefix_property():
    h = LazyFunctionTable(8, 3, "h")
    _, a = sponge_trace(P, 0x71, h.peek)
    _, b = sponge_trace(P, 0x7E, h.peek)
    # same first block: same first input and same chaining capacity afterwards
    assert a[0] == b[0]
    assert a[1] & 0xF == b[1] & 0xF and a[1] ^ b[1] == (0x1 ^ 0xE) << 4


def test_newnode_forced_and_saturation():
    g = SpongeSimGraph(SpongeParams(2, 1, 2, 2, R=0), random.Random(0))
    assert g.L == {0}
    assert g.newnode() & 1 == 1
    with pytest.raises(SaturationError):
        g.newnode()
    g2 = SpongeSimGraph(SpongeParams(2, 2, 2, 2, R=0), random.Random(1))
    g2.L.clear()
    for k in range(1, 5):
        g2.newnode()
        assert len(g2.L) == k
    with pytest.raises(SaturationError):
        g2.newnode()


def test_findpath_on_hand_built_graph():
    p = SpongeParams(2, 2, 4, 2, R=0b1001)
    g = SpongeSimGraph(p, random.Random(0))
    w = 0b11
    assert g.findpath(p.node(w, p.R1)) == [w ^ p.R0]
    m1 = 0b10
    y = g.sim(p.node(p.R0 ^ m1, p.R1))
    yr, yc = p.split(y)
    assert g.is_marked(y)
    assert g.findpath(p.node(w, yc)) == [m1, w ^ yr]
    g.marked_caps.add(yc ^ 1 if yc ^ 1 != p.R1 else yc ^ 2)
    bad = next(c for c in g.marked_caps if c not in (p.R1, yc))
    with pytest.raises(GraphCorruptionError):
        g.findpath(p.node(0, bad))


def test_sim_fresh_unmarked_and_marks():
    p = SpongeParams(4, 4, 8, 4, R=0x00)
    g = SpongeSimGraph(p, random.Random(2))
    x = p.node(3, 0x9)
    y = g.sim(x)
    assert g.edges[x] == y and not g.is_marked(y)
    y2 = g.sim(p.node(0x1, 0x0))  # marked: c-part of R
    yc = y2 & 0xF
    marked = [v for v in range(256) if g.is_marked(v) and v & 0xF == yc]
    assert len(marked) == 16
    assert g.check_capacity_uniqueness()


def test_full_length_path_programs_digest():
    p = SpongeParams(4, 4, 4, 8, R=0x3A)
    F = LazyFunctionTable(4, 9, "F", out_width=8)
    g = SpongeSimGraph(p, random.Random(3), lambda m: F.peek(Point(0, m)))
    m = 0x6
    y = g.sim(p.node(p.R0 ^ m, p.R1))
    z = F.peek(Point(0, m))
    assert y >> 4 == z >> 4
    assert g.sim(y) >> 4 == z & 0xF


class _Crook:
    def __init__(self, target):
        self.target = target

    def __call__(self, ask, p, first):
        return first ^ 1 if p.x == self.target else first


def test_crooked_simulator_honest_matches_plain_sim():
    p = SpongeParams(4, 4, 8, 4, R=0x12)
    F = lambda m: m * 7 & 0xF  # noqa: E731
    a = SpongeSimGraph(p, random.Random(5), F)
    b = SpongeSimGraph(p, random.Random(5), F)
    sim = CrookedSpongeSimulator(b, ImplementationHandle(SubverterSpec(), 8))
    rng = random.Random(1)
    x = p.node(p.R0 ^ 3, p.R1)
    for _ in range(8):
        ya, yb = a.sim(x), sim.query(x)
        assert ya == yb and not sim.bad
        x = ya ^ rng.getrandbits(4) << 4 if rng.random() < 0.5 else rng.getrandbits(8)


def test_crooked_simulator_sets_bad_at_r_and_skips_unmarked():
    p = SpongeParams(4, 4, 8, 4, R=0x12)
    g = SpongeSimGraph(p, random.Random(0), lambda m: 0)
    spec = SubverterSpec("custom", tau=1, algorithm=_Crook(p.R))
    sim = CrookedSpongeSimulator(g, ImplementationHandle(spec, 8))
    sim.query(p.node(7, 0x3))
    assert sim.htilde_calls == 0 and not sim.bad
    assert sim.query(p.R) is sponge.BOTTOM and sim.bad


def test_game_budget_error():
    with pytest.raises(BudgetError):
        run_sponge_game("Real", DistinguisherSpec("consistency-multi", count=3),
                        SubverterSpec(), P, 0, q2=2)


@pytest.mark.parametrize("kind", ADVERSARY_KINDS)
def test_game_chain_per_seed(kind):
    spec = SubverterSpec("output-predicate", k=3, q1=2)
    params = SpongeParams(4, 10, 8, 4)
    adv = DistinguisherSpec(kind, count=3, qF=4, q=6)
    q2, qh = adv.sponge_budget(params.calls_per_message)
    for i in range(25):
        s = trial_seed(11, i)
        r = {w: run_sponge_game(w, adv, spec, params, s, q2=q2, qh=qh,
                                adv_rng=stream(s, "a")) for w in sponge.WORLDS}
        assert r["Real"].answers == r["G0"].answers == r["G1a"].answers
        assert r["G1b"].answers == r["G2"].answers
        if not r["G1a"].bad:
            assert r["G1a"].answers == r["G1b"].answers


def test_ideal_consistency_honest_and_snapshot():
    params = SpongeParams(4, 10, 8, 8)
    adv = DistinguisherSpec("consistency-multi", count=4)
    q2, qh = adv.sponge_budget(params.calls_per_message)
    for s in range(30):
        res = run_sponge_game("Ideal", adv, SubverterSpec(q1=3), params, s, q2=q2, qh=qh,
                              snapshot=True)
        assert not res.bad and res.output_bit == 1
        assert all(row.consistent for row in res.ledger)
        snap = res.graph
        json.dumps(snap)
        caps = [int(b, 16) & 0x3FF for _, b in snap["edges"]]
        assert len(caps) == len(set(caps))
