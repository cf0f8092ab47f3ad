import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crooklab import exor
from crooklab.adversaries import ADVERSARY_KINDS, DistinguisherSpec
from crooklab.errors import BudgetError, ContractViolation, DomainError
from crooklab.exor import (ExorOracles, ExorParams, ExorSimulator, exor_eval, g_r_eval,
                           new_world, run_exor_game)
from crooklab.oracle_core import LazyFunctionTable, Point
from crooklab.rng import stream, trial_seed
from crooklab.subversion import (ImplementationHandle, SubverterSpec, evaluate_subverted,
                                 run_first_stage)


def setup(spec, n, l, seed):
    H = LazyFunctionTable(n, seed, "h", max_index=l)
    handle, _ = run_first_stage(spec, H.peek, l=l, n=n, rng=stream(seed, "stage-one"))
    return H, handle, ExorParams.sample(n, l, stream(seed, "iv"))


def simulator(handle, params, seed, bindings=None):
    tape = LazyFunctionTable(params.n, seed, "h", max_index=params.l, bindings=bindings)
    return ExorSimulator(handle, params, tape, LazyFunctionTable(params.n, seed, "F"))


def test_params_validation():
    with pytest.raises(DomainError):
        ExorParams(4, 2, (1,))
    with pytest.raises(DomainError):
        ExorParams(4, 1, (16,))
    with pytest.raises(DomainError):
        ExorParams(4, 0, ())


def test_single_branch_degenerate():
    h = LazyFunctionTable(6, 3, "h", max_index=1)
    p = ExorParams(6, 1, (0,))
    for m in range(64):
        assert g_r_eval(p, m, h.peek)[0] == h.peek(Point(1, m))
        assert exor_eval(p, m, h.peek) == h.peek(Point(0, h.peek(Point(1, m))))


def test_branches_cancel_on_hand_built_table():
    p = ExorParams(4, 2, (0x3, 0x5))
    m = 0x9
    h = LazyFunctionTable(4, 0, "h", max_index=2,
                          bindings={Point(1, m ^ 0x3): 0xA, Point(2, m ^ 0x5): 0xA})
    assert g_r_eval(p, m, h.peek)[0] == 0


def test_honest_handle_matches_oracle_exhaustively():
    h, handle, params = setup(SubverterSpec(), 6, 3, 4)
    for m in range(64):
        assert g_r_eval(params, m, h.peek, handle)[0] == g_r_eval(params, m, h.peek)[0]
        assert exor_eval(params, m, h.peek, handle) == exor_eval(params, m, h.peek)


def test_predicate_digest_differs_only_when_something_is_crooked():
    h, handle, params = setup(SubverterSpec("output-predicate", k=2), 6, 3, 8)

    def crooked(p):
        return evaluate_subverted(handle, h.peek, p).subverted
    differ = 0
    for m in range(64):
        g, recs = g_r_eval(params, m, h.peek, handle)
        involved = any(r.subverted for r in recs) or crooked(Point(0, g))
        same = exor_eval(params, m, h.peek, handle) == exor_eval(params, m, h.peek)
        if not involved:
            assert same
        differ += not same
    assert differ > 0


def test_sim_type1_semantics():
    _, handle, params = setup(SubverterSpec(), 6, 2, 1)
    sim = simulator(handle, params, 1)
    a = sim.sim_type1(5)
    assert sim.sim_type1(5) == a
    before = len(sim.L)
    sim.sim_type1(6)
    assert len(sim.L) == before + 1


def test_sim_type2_programs_envelope():
    _, handle, params = setup(SubverterSpec(), 6, 2, 1)
    sim = simulator(handle, params, 1)
    rec = sim.sim_type2(0x21)
    assert not rec.bad1 and not sim.aborted
    assert sim.sim_type1(rec.g) == sim.F.peek(Point(0, 0x21)) == rec.answer
    assert sim.la_subset_of_l()
    with pytest.raises(ContractViolation):
        sim.sim_type2(0x21)
    assert sim.batch(0x21) is rec


def test_forced_collision_aborts_with_bad1():
    params = ExorParams(4, 1, (0,))
    handle = ImplementationHandle(SubverterSpec(), 4)
    sim = simulator(handle, params, 0, bindings={Point(1, 2): 7, Point(1, 9): 7})
    assert not sim.sim_type2(2).bad1
    rec = sim.sim_type2(9)
    assert rec.bad1 and sim.aborted and sim.bad1
    # re-programmed to the new F value and affected rows are flagged
    assert sim.L[Point(0, 7)] == sim.F.peek(Point(0, 9))
    assert sim.Lg[2].flagged


def test_neighbor_wrapped_prefixes_second_batch():
    for s in range(30):
        _, handle, params = setup(SubverterSpec("neighbor-wrapped", inner=SubverterSpec()),
                                  6, 4, s)
        sim = simulator(handle, params, s)
        m = s % 64
        sim.sim_type2(m ^ 0x3F)
        rec = sim.sim_type2(m)
        assert rec.prefixed


def test_list_growth_bound_per_type2_query():
    _, handle, params = setup(SubverterSpec("trigger", k=2, delta=1), 6, 4, 2)
    sim = simulator(handle, params, 2)
    for m in range(10):
        before = len(sim.L)
        sim.sim_type2(m)
        # the envelope evaluation contributes its own tau queries
        assert len(sim.L) - before <= (params.l + 1) * handle.tau
        assert sim.la_subset_of_l()


def test_budget_enforced():
    _, handle, params = setup(SubverterSpec(), 6, 2, 0)
    with pytest.raises(BudgetError):
        run_exor_game("Real", DistinguisherSpec("consistency-single"), handle, params, 0, q2=2)


def test_unknown_world():
    _, handle, params = setup(SubverterSpec(), 6, 2, 0)
    with pytest.raises(DomainError):
        new_world("G7", handle, params, 0)


def test_batch_expansion_of_branch_queries():
    _, handle, params = setup(SubverterSpec(), 6, 3, 0)
    w = new_world("Ideal", handle, params, 0)
    w.h(Point(2, 5))
    m = params.message_of(Point(2, 5))
    assert m in w.state.Lg
    assert all(p in w.state.L for p in params.batch_points(m))


def _chain(spec, adv, seed, n=6, l=4):
    _, handle, params = setup(spec, n, l, seed)
    q2 = adv.exor_budget()
    return {w: run_exor_game(w, adv, handle, params, seed, q2=q2, adv_rng=stream(seed, "a"))
            for w in exor.WORLDS}


@pytest.mark.parametrize("kind", ADVERSARY_KINDS)
def test_game_chain_exact_per_seed(kind):
    spec = SubverterSpec("output-predicate", k=2, q1=3)
    adv = DistinguisherSpec(kind, count=4, qF=6, q=10)
    for s in range(40):
        r = _chain(spec, adv, trial_seed(3, s))
        assert r["Real"].answers == r["G0"].answers == r["G1"].answers
        assert r["G2"].answers == r["Ideal"].answers
        assert r["Real"].output_bit == r["G0"].output_bit == r["G1"].output_bit
        assert r["G2"].output_bit == r["Ideal"].output_bit
        if not r["G1"].bad:
            assert r["G1"].answers == r["G2"].answers


def test_honest_real_matches_ideal_when_no_bad():
    adv = DistinguisherSpec("consistency-multi", count=4)
    for s in range(40):
        r = _chain(SubverterSpec(), adv, s)
        assert r["Ideal"].unflagged_consistent()
        if not r["Ideal"].bad:
            assert r["Real"].answers == r["Ideal"].answers
            assert all(row.consistent for row in r["Ideal"].ledger)


def test_ledger_has_one_row_per_distinct_message():
    adv = DistinguisherSpec("random-probe", q=12)
    r = _chain(SubverterSpec(), adv, 5)["Ideal"]
    msgs = [row.m for row in r.ledger]
    assert len(msgs) == len(set(msgs)) == len(r.batches)


def test_simulator_values_uniform_n4():
    counts = [0] * 16
    trials = 10_000
    handle = ImplementationHandle(SubverterSpec(), 4)
    params = ExorParams(4, 1, (0,))
    for s in range(trials):
        sim = simulator(handle, params, s)
        counts[sim.sim_type1(3)] += 1
    expected = trials / 16
    chi2 = sum((c - expected) ** 2 / expected for c in counts)
    assert chi2 < 37.7  # 99.9% quantile of chi-square with 15 dof


@given(st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_state_invariants_hold(seed):
    _, handle, params = setup(SubverterSpec("trigger", k=1, delta=2, q1=2), 5, 3, seed)
    w = new_world("G2", handle, params, seed)
    io = ExorOracles(w, 30)
    DistinguisherSpec("random-probe", q=30).run_exor(io, stream(seed, "p"))
    assert w.state.la_subset_of_l()
    assert set(w.state.Lg) <= set(w.state.LF)
    if w.state.bad1:
        assert any(b.bad1 for b in w.state.Lg.values())
