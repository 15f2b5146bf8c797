"""Tests for the decomposition-based reachability decider."""

import random
from fractions import Fraction

import pytest

from zvass import ilp
from zvass.core import (
    Configuration,
    CounterLayout,
    FormatError,
    NNegViolation,
    ReachQuery,
    Transition,
    UpdateVector,
    WrongState,
    ZeroTestFailed,
    ZVass,
    zero_update,
)
from zvass.klmst import (
    OMEGA,
    BoundaryEdge,
    BoundaryTestFailed,
    CapExceeded,
    Capped,
    Caps,
    Component,
    GeneralisedZVass,
    GenQuery,
    GenTrace,
    NotStronglyConnected,
    OmegaConfig,
    Perfect,
    Rank,
    Violated,
    all_omega,
    build_ilp,
    check_perfect,
    cycle_space,
    decompose,
    fire_step,
    gen_bounded_reach,
    in_cycle_space,
    klmst_decide,
    measure,
    normalize,
    omega_count,
    parse_generalised,
    rank,
    replay_gen,
    run_from_perfect,
    serialize_generalised,
)
from zvass.oracle import Bounds, bounded_reach


def upd(*entries):
    return UpdateVector(tuple(entries))


def loop_system(layout, updates, state="q"):
    trans = tuple(Transition(n, state, state, upd(*u)) for n, u in enumerate(updates))
    return ZVass(layout, (state,), trans)


def single_chain(query):
    seqs = normalize(query)
    assert len(seqs) == 1
    return seqs[0]


def rand_plain(rng, ztest_p=0.15, max_states=3, max_trans=4):
    while True:
        d, k = rng.randint(0, 2), rng.randint(0, 2)
        if d + k >= 1:
            break
    lay = CounterLayout(d, k)
    states = tuple(f"s{i}" for i in range(rng.randint(1, max_states)))
    trans = []
    for t in range(rng.randint(1, max_trans)):
        src, dst = rng.choice(states), rng.choice(states)
        if rng.random() < ztest_p:
            trans.append(Transition(t, src, dst, zero_update(lay), rng.randint(1, d + k)))
        else:
            trans.append(Transition(t, src, dst, upd(*(rng.randint(-2, 2) for _ in range(d + k)))))
    system = ZVass(lay, states, tuple(trans))
    source = Configuration(
        rng.choice(states),
        tuple(rng.randint(0, 2) for _ in range(d)),
        tuple(rng.randint(-2, 2) for _ in range(k)),
    )
    target = Configuration(
        rng.choice(states),
        tuple(rng.randint(0, 2) for _ in range(d)),
        tuple(rng.randint(-2, 2) for _ in range(k)),
    )
    return ReachQuery(system, source, target)


class TestTypes:
    def test_omega_config_entries(self):
        t = OmegaConfig((0, OMEGA, 3))
        assert t.is_omega(1) and not t.is_omega(0)
        assert t.omega_count == 1
        assert t.matches((0, 7, 3)) and not t.matches((1, 7, 3))
        assert t.pinned(1, 5).entries == (0, 5, 3)
        assert str(t) == "0 w 3"

    def test_omega_config_rejects_negatives(self):
        with pytest.raises(ValueError):
            OmegaConfig((-1,))
        with pytest.raises(ValueError):
            OmegaConfig(("w",))

    def test_component_validation(self):
        with pytest.raises(ValueError):
            Component(("a", "a"), (), "a", "a")
        with pytest.raises(ValueError):
            Component(("a",), (), "a", "b")
        with pytest.raises(ValueError):
            Component(("a",), (Transition(1, "a", "a", upd(0)),), "a", "a")
        with pytest.raises(ValueError):
            Component(("a",), (Transition(0, "a", "b", upd(0)),), "a", "a")

    def test_boundary_ztest_needs_zero_update(self):
        with pytest.raises(ValueError):
            BoundaryEdge("a", "b", upd(1, 0), all_omega(1), ztest=2)
        BoundaryEdge("a", "b", upd(0, 0), all_omega(1), ztest=2)

    def test_generalised_wiring(self):
        lay = CounterLayout(1, 1)
        c0 = Component(("a",), (), "a", "a")
        c1 = Component(("b",), (), "b", "b")
        good = BoundaryEdge("a", "b", upd(0, 0), all_omega(1))
        GeneralisedZVass(lay, (c0, c1), (good,))
        with pytest.raises(ValueError):
            GeneralisedZVass(lay, (c0, c1), ())
        with pytest.raises(ValueError):
            GeneralisedZVass(lay, (c0, c1), (BoundaryEdge("b", "a", upd(0, 0), all_omega(1)),))
        with pytest.raises(ValueError):
            # ztest on a nonnegative counter is not a boundary ztest
            GeneralisedZVass(lay, (c0, c1), (BoundaryEdge("a", "b", upd(0, 0), all_omega(1), ztest=1),))

    def test_generalised_requires_strong_connectivity(self):
        lay = CounterLayout(1, 0)
        bad = Component(("a", "b"), (Transition(0, "a", "b", upd(0)),), "a", "b")
        with pytest.raises(NotStronglyConnected):
            GeneralisedZVass(lay, (bad,), ())

    def test_gen_query_anchors(self):
        lay = CounterLayout(1, 0)
        c0 = Component(("a", "b"), (Transition(0, "a", "b", upd(0)), Transition(1, "b", "a", upd(0))), "a", "b")
        gv = GeneralisedZVass(lay, (c0,), ())
        GenQuery(gv, Configuration("a", (0,), ()), Configuration("b", (0,), ()))
        with pytest.raises(ValueError):
            GenQuery(gv, Configuration("b", (0,), ()), Configuration("b", (0,), ()))
        with pytest.raises(ValueError):
            GenQuery(gv, Configuration("a", (0, 0), ()), Configuration("b", (0,), ()))


class TestReplay:
    def chain(self):
        lay = CounterLayout(1, 1)
        c0 = Component(("a",), (Transition(0, "a", "a", upd(1, 0)),), "a", "a")
        c1 = Component(("b",), (Transition(0, "b", "b", upd(0, -1)),), "b", "b")
        bnd = BoundaryEdge("a", "b", upd(0, 0), OmegaConfig((2,)))
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        return GenQuery(gv, Configuration("a", (0,), (1,)), Configuration("b", (2,), (0,)))

    def test_replay_happy_path(self):
        gq = self.chain()
        steps = [("scc", 0, 0), ("scc", 0, 0), ("bnd", 0, 0), ("scc", 1, 0)]
        tr = replay_gen(gq, steps)
        assert tr.target == gq.target
        assert len(tr) == 4 and tr.configs[2].nvals == (2,)

    def test_boundary_test_enforced(self):
        gq = self.chain()
        with pytest.raises(BoundaryTestFailed):
            replay_gen(gq, [("scc", 0, 0), ("bnd", 0, 0)])

    def test_wrong_state_rejected(self):
        gq = self.chain()
        with pytest.raises(WrongState):
            replay_gen(gq, [("scc", 1, 0)])

    def test_nneg_enforced_inside_fragment(self):
        lay = CounterLayout(1, 0)
        c0 = Component(("a",), (Transition(0, "a", "a", upd(-1)),), "a", "a")
        gv = GeneralisedZVass(lay, (c0,), ())
        gq = GenQuery(gv, Configuration("a", (0,), ()), Configuration("a", (0,), ()))
        with pytest.raises(NNegViolation):
            fire_step(gq, gq.source, ("scc", 0, 0))

    def test_boundary_ztest_enforced(self):
        lay = CounterLayout(0, 1)
        c0 = Component(("a",), (Transition(0, "a", "a", upd(1)),), "a", "a")
        c1 = Component(("b",), (), "b", "b")
        bnd = BoundaryEdge("a", "b", upd(0), all_omega(0), ztest=1)
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        gq = GenQuery(gv, Configuration("a", (), (-1,)), Configuration("b", (), (0,)))
        with pytest.raises(ZeroTestFailed):
            replay_gen(gq, [("bnd", 0, 0)])
        tr = replay_gen(gq, [("scc", 0, 0), ("bnd", 0, 0)])
        assert tr.target == gq.target

    def test_trace_shape(self):
        gq = self.chain()
        with pytest.raises(ValueError):
            GenTrace((gq.source,), (("scc", 0, 0),))


class TestFormat:
    def sample(self):
        lay = CounterLayout(2, 1)
        c0 = Component(
            ("a", "b"),
            (Transition(0, "a", "b", upd(1, 0, -1)), Transition(1, "b", "a", upd(0, 1, 2))),
            "a",
            "b",
        )
        c1 = Component(("c",), (Transition(0, "c", "c", zero_update(lay), ztest=2),), "c", "c")
        bnd = BoundaryEdge("b", "c", zero_update(lay), OmegaConfig((0, OMEGA)), ztest=3)
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        return GenQuery(gv, Configuration("a", (1, 0), (0,)), Configuration("c", (0, 2), (-1,)))

    def test_round_trip(self):
        gq = self.sample()
        text = serialize_generalised(gq)
        assert parse_generalised(text) == gq
        assert serialize_generalised(parse_generalised(text)) == text

    def test_parse_errors(self):
        with pytest.raises(FormatError):
            parse_generalised("scc c0 entry=a exit=a\n")
        with pytest.raises(FormatError):
            parse_generalised("gzvass d=1 k=0\ninit a : 0 ;\ntarget a : 0 ;\n")
        base = "gzvass d=1 k=0\nscc c0 entry=a exit=a\nstates a\n"
        with pytest.raises(FormatError):
            parse_generalised(base + "test e9 : 0\ninit a : 0 ;\ntarget a : 0 ;\n")
        with pytest.raises(FormatError):
            parse_generalised(base + "trans t0 a -> a : 1 2 ;\ninit a : 0 ;\ntarget a : 0 ;\n")
        with pytest.raises(FormatError):
            parse_generalised("gzvass d=1\n")

    def test_parse_rejects_disconnected_scc(self):
        text = (
            "gzvass d=1 k=0\n"
            "scc c0 entry=a exit=b\n"
            "states a b\n"
            "trans t0 a -> b : 1 ;\n"
            "init a : 0 ;\n"
            "target b : 0 ;\n"
        )
        with pytest.raises(NotStronglyConnected):
            parse_generalised(text)

    def test_comments_and_omega_entries(self):
        text = (
            "gzvass d=2 k=0   # header\n"
            "scc c0 entry=a exit=a\n"
            "states a\n"
            "scc c1 entry=b exit=b\n"
            "states b\n"
            "boundary e1 a -> b : 0 0 ;\n"
            "test e1 : w 3\n"
            "init a : 1 3 ;\n"
            "target b : 1 3 ;\n"
        )
        gq = parse_generalised(text)
        assert gq.gv.boundaries[0].test.entries == (OMEGA, 3)


class TestCycleSpaceAndRank:
    def test_self_loop_span(self):
        lay = CounterLayout(2, 1)
        comp = Component(("q",), (Transition(0, "q", "q", upd(1, -1, 0)),), "q", "q")
        basis = cycle_space(comp, lay)
        assert len(basis) == 1
        assert basis[0] == (Fraction(1), Fraction(-1), Fraction(0))

    def test_no_transitions_empty_span(self):
        lay = CounterLayout(1, 0)
        comp = Component(("q",), (), "q", "q")
        assert cycle_space(comp, lay) == ()

    def test_requires_strong_connectivity(self):
        lay = CounterLayout(1, 0)
        comp = Component(("a", "b"), (Transition(0, "a", "b", upd(0)),), "a", "b")
        with pytest.raises(NotStronglyConnected):
            cycle_space(comp, lay)

    def test_two_state_fragment_dimension(self):
        # cycles: t0+t1 and the two self-loops t2, t3
        lay = CounterLayout(2, 2)
        comp = Component(
            ("p", "q"),
            (
                Transition(0, "p", "q", upd(1, 0, 0, 1)),
                Transition(1, "q", "p", upd(0, -1, 0, 0)),
                Transition(2, "p", "p", upd(0, 0, 1, 0)),
                Transition(3, "q", "q", upd(-1, 1, 1, 0)),
            ),
            "p",
            "q",
        )
        basis = cycle_space(comp, lay)
        assert len(basis) == 3
        for vec in ((0, 0, 1, 0), (1, -1, 0, 1), (-1, 1, 1, 0)):
            assert in_cycle_space(comp, lay, vec)
        assert not in_cycle_space(comp, lay, (1, 0, 0, 0))

    def test_random_closed_walks_lie_in_span(self):
        rng = random.Random(5)
        done = 0
        while done < 100:
            q = rand_plain(rng, ztest_p=0.0)
            seqs = normalize(q)
            if not seqs:
                continue
            comp = rng.choice(seqs[0].gv.components)
            if not comp.transitions:
                continue
            lay = q.system.layout
            by_src = {}
            for t in comp.transitions:
                by_src.setdefault(t.src, []).append(t)
            anchor = comp.states[0]
            state, eff, hit = anchor, [0] * lay.total, False
            for _ in range(rng.randint(1, 12)):
                opts = by_src.get(state, [])
                if not opts:
                    break
                t = rng.choice(opts)
                eff = [a + b for a, b in zip(eff, t.update.entries)]
                state = t.dst
                if state == anchor:
                    hit = True
                    break
            if not hit:
                continue
            assert in_cycle_space(comp, lay, eff)
            done += 1

    def test_rank_doubling_chain(self):
        # identical loop pairs in two chained fragments: state counts add,
        # the integer-space dimension does not
        lay = CounterLayout(1, 1)
        c0 = Component(
            ("a",),
            (Transition(0, "a", "a", upd(1, -1)), Transition(1, "a", "a", upd(-1, 3))),
            "a",
            "a",
        )
        c1 = Component(
            ("b",),
            (Transition(0, "b", "b", upd(1, -1)), Transition(1, "b", "b", upd(-1, 3))),
            "b",
            "b",
        )
        gv1 = GeneralisedZVass(lay, (c0,), ())
        bnd = BoundaryEdge("a", "b", upd(0, 0), all_omega(1))
        gv2 = GeneralisedZVass(lay, (c0, c1), (bnd,))
        assert rank(gv1) == Rank(1, (1,))
        assert rank(gv2) == Rank(1, (2,))

    def test_rank_ordering(self):
        assert Rank(0, (5, 0)) < Rank(1, (0, 0))
        assert Rank(1, (9, 0)) < Rank(1, (0, 1))
        assert Rank(1, (1, 1)) < Rank(1, (2, 1))
        assert not Rank(1, (0, 1)) < Rank(1, (0, 1))

    def test_measure_counts_omega_entries(self):
        lay = CounterLayout(2, 0)
        c0 = Component(("a",), (), "a", "a")
        c1 = Component(("b",), (), "b", "b")
        bnd = BoundaryEdge("a", "b", upd(0, 0), OmegaConfig((OMEGA, 1)))
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        assert omega_count(gv) == 1
        assert measure(gv) == ((0, (0, 0)), 1)


class TestIlpSystem:
    def test_variable_count_invariant(self):
        lay = CounterLayout(2, 0)
        c0 = Component(("a",), (Transition(0, "a", "a", upd(1, 0)),), "a", "a")
        c1 = Component(
            ("b",),
            (Transition(0, "b", "b", upd(0, 1)), Transition(1, "b", "b", upd(-1, 0))),
            "b",
            "b",
        )
        bnd = BoundaryEdge("a", "b", upd(0, 0), all_omega(2))
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        gq = GenQuery(gv, Configuration("a", (0, 0), ()), Configuration("b", (0, 0), ()))
        sys_ = build_ilp(gq)
        # 2*s*d value variables plus one count per transition
        assert sys_.n_vars == 2 * 1 * 2 + 3
        assert sys_.x_var(1, 0) == 0 and sys_.y_var(0, 1) == 3
        assert sys_.e_var(1, 1) == 6

    def test_counts_pinned_by_target(self):
        lay = CounterLayout(1, 0)
        q = ReachQuery(
            loop_system(lay, [(1,)]),
            Configuration("q", (0,), ()),
            Configuration("q", (3,), ()),
        )
        sys_ = build_ilp(single_chain(q))
        assert sys_.solve() is not None
        assert sys_.bounded_values(sys_.e_var(0, 0)) == [3]

    def test_parity_infeasible(self):
        lay = CounterLayout(0, 1)
        q = ReachQuery(
            loop_system(lay, [(2,)]),
            Configuration("q", (), (0,)),
            Configuration("q", (), (5,)),
        )
        assert build_ilp(single_chain(q)).solve() is None

    def test_two_cycle_flow_balance(self):
        lay = CounterLayout(0, 1)
        system = ZVass(
            lay,
            ("a", "b"),
            (Transition(0, "a", "b", upd(1)), Transition(1, "b", "a", upd(0))),
        )
        q = ReachQuery(system, Configuration("a", (), (0,)), Configuration("a", (), (2,)))
        sys_ = build_ilp(single_chain(q))
        e0, e1 = sys_.e_var(0, 0), sys_.e_var(0, 1)
        # closed at "a": both transitions fire equally often
        assert ilp.ilp_feasible(
            sys_.program.with_constraint({e0: 1}, ilp.EQ, 2).with_constraint({e1: 1}, ilp.EQ, 2), 10_000
        ) == [2, 2]
        assert (
            ilp.ilp_feasible(
                sys_.program.with_constraint({e0: 1}, ilp.EQ, 2).with_constraint({e1: 1}, ilp.EQ, 3),
                10_000,
            )
            is None
        )

    def test_trivial_mismatch_is_contradiction(self):
        lay = CounterLayout(1, 0)
        system = ZVass(lay, ("q",), ())
        q = ReachQuery(system, Configuration("q", (0,), ()), Configuration("q", (1,), ()))
        sys_ = build_ilp(single_chain(q))
        assert sys_.contradiction and sys_.solve() is None

    def test_runs_induce_solutions(self):
        rng = random.Random(11)
        checked = 0
        while checked < 30:
            q = rand_plain(rng, ztest_p=0.1)
            seqs = normalize(q)
            if not seqs:
                continue
            gq = rng.choice(seqs)
            gv = gq.gv
            cur, steps, ci = gq.source, [], 0
            for _ in range(rng.randint(1, 12)):
                opts = [
                    ("scc", ci, t.tid)
                    for t in gv.components[ci].transitions
                    if t.src == cur.state
                ]
                if ci < len(gv.boundaries) and gv.boundaries[ci].src == cur.state:
                    opts.append(("bnd", ci, 0))
                rng.shuffle(opts)
                for st in opts:
                    try:
                        cur = fire_step(gq, cur, st)
                    except Exception:
                        continue
                    steps.append(st)
                    if st[0] == "bnd":
                        ci += 1
                    break
                else:
                    break
            if ci != len(gv.boundaries) or cur.state != gq.target.state:
                continue
            ended = GenQuery(gv, gq.source, cur)
            sys_ = build_ilp(ended)
            assert not sys_.contradiction
            assign = [0] * sys_.n_vars
            tr = replay_gen(ended, steps)
            for pos, st in enumerate(steps):
                if st[0] == "scc":
                    assign[sys_.e_var(st[1], st[2])] += 1
                else:
                    for j in range(gv.layout.d):
                        assign[sys_.y_var(st[1], j)] = tr.configs[pos].nvals[j]
                        assign[sys_.x_var(st[1] + 1, j)] = tr.configs[pos + 1].nvals[j]
            for c in sys_.program.constraints:
                lhs = sum(coef * assign[v] for v, coef in c.coeffs)
                assert lhs == c.rhs
            checked += 1

    def test_unbounded_agrees_with_value_enumeration(self):
        lay = CounterLayout(1, 1)
        q = ReachQuery(
            loop_system(lay, [(1, 0), (-1, 1)]),
            Configuration("q", (0,), (0,)),
            Configuration("q", (0,), (4,)),
        )
        sys_ = build_ilp(single_chain(q))
        e0, e1 = sys_.e_var(0, 0), sys_.e_var(0, 1)
        # both counts are pinned to 4 by the integer counter
        for var in (e0, e1):
            assert not sys_.var_unbounded(var)
            assert sys_.bounded_values(var) == [4]


class TestCheckPerfect:
    def test_infeasible_is_condition_one(self):
        lay = CounterLayout(0, 1)
        q = ReachQuery(
            loop_system(lay, [(2,)]),
            Configuration("q", (), (0,)),
            Configuration("q", (), (5,)),
        )
        res = check_perfect(single_chain(q))
        assert isinstance(res, Violated) and res.condition == 1

    def test_bounded_count_is_condition_two(self):
        lay = CounterLayout(1, 1)
        q = ReachQuery(
            loop_system(lay, [(0, 1)]),
            Configuration("q", (0,), (0,)),
            Configuration("q", (0,), (3,)),
        )
        res = check_perfect(single_chain(q))
        assert isinstance(res, Violated) and res.condition == 2
        assert res.evidence == ((0, 0, 3),)

    def test_plus_minus_loops_are_perfect(self):
        lay = CounterLayout(1, 0)
        q = ReachQuery(
            loop_system(lay, [(1,), (-1,)]),
            Configuration("q", (0,), ()),
            Configuration("q", (0,), ()),
        )
        res = check_perfect(single_chain(q))
        assert isinstance(res, Perfect)
        assert res.certificate.ups == ((0,),)
        assert res.certificate.dwns == ((1,),)

    def test_trivial_fragments_waive_pumps(self):
        lay = CounterLayout(2, 0)
        system = ZVass(lay, ("q",), ())
        q = ReachQuery(system, Configuration("q", (1, 2), ()), Configuration("q", (1, 2), ()))
        res = check_perfect(single_chain(q))
        assert isinstance(res, Perfect) and res.certificate.ups == ((),)

    def test_open_boundary_with_pinned_value_is_condition_three(self):
        lay = CounterLayout(1, 0)
        c0 = Component(("a",), (), "a", "a")
        c1 = Component(
            ("b",),
            (Transition(0, "b", "b", upd(1)), Transition(1, "b", "b", upd(-1))),
            "b",
            "b",
        )
        bnd = BoundaryEdge("a", "b", upd(0), all_omega(1))
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        gq = GenQuery(gv, Configuration("a", (2,), ()), Configuration("b", (0,), ()))
        res = check_perfect(gq)
        assert isinstance(res, Violated) and res.condition == 3
        assert res.evidence == (1, 0, (2,))

    def two_state_gadget(self, lay, t2_up, t3_up):
        # q -> r needs 2 tokens, so with entry value 0 the pump sweep is
        # confined to q; t2/t3 keep every count unbounded
        pad = (0,) * (lay.total - 1)
        return ZVass(
            lay,
            ("q", "r"),
            (
                Transition(0, "q", "r", upd(-2, *pad)),
                Transition(1, "r", "q", upd(2, *pad)),
                Transition(2, "r", "r", upd(t2_up, *pad)),
                Transition(3, "q", "q", upd(t3_up, *pad)),
            ),
        )

    def test_missing_raising_cycle_is_condition_four(self):
        lay = CounterLayout(1, 0)
        system = self.two_state_gadget(lay, 1, -1)
        q = ReachQuery(system, Configuration("q", (0,), ()), Configuration("q", (0,), ()))
        res = check_perfect(single_chain(q))
        assert isinstance(res, Violated) and res.condition == 4
        assert res.evidence == (0, 0, 0, (("q", (0,)),))

    def test_missing_lowering_cycle_is_condition_five(self):
        lay = CounterLayout(1, 0)
        system = self.two_state_gadget(lay, -1, 1)
        q = ReachQuery(system, Configuration("q", (0,), ()), Configuration("q", (0,), ()))
        res = check_perfect(single_chain(q))
        assert isinstance(res, Violated) and res.condition == 5
        assert res.evidence == (0, 0, 0, (("q", (0,)),))

    def test_clamped_search_is_capped(self):
        lay = CounterLayout(1, 0)
        system = ZVass(
            lay,
            ("q", "r"),
            (Transition(0, "q", "r", upd(5)), Transition(1, "r", "q", upd(-5))),
        )
        q = ReachQuery(system, Configuration("q", (0,), ()), Configuration("q", (0,), ()))
        res = check_perfect(single_chain(q), Caps(pump_clamp=4))
        assert isinstance(res, Capped) and "clamp" in res.reason

    def test_untracked_zero_test_is_capped(self):
        # the pump sweep cannot model a zero test on an integer counter,
        # so exhaustion without a pump must stay inconclusive
        lay = CounterLayout(1, 1)
        base = self.two_state_gadget(lay, 1, -1)
        system = ZVass(
            lay,
            base.states,
            base.transitions + (Transition(4, "q", "q", zero_update(lay), ztest=2),),
        )
        q = ReachQuery(system, Configuration("q", (0,), (0,)), Configuration("q", (0,), (0,)))
        res = check_perfect(single_chain(q))
        assert isinstance(res, Capped) and "zero-test" in res.reason


class TestDecompose:
    def test_condition_one_yields_no_children(self):
        lay = CounterLayout(0, 1)
        q = ReachQuery(
            loop_system(lay, [(2,)]),
            Configuration("q", (), (0,)),
            Configuration("q", (), (5,)),
        )
        gq = single_chain(q)
        assert decompose(gq, check_perfect(gq)) == []

    def test_unroll_bounded_count(self):
        lay = CounterLayout(1, 1)
        q = ReachQuery(
            loop_system(lay, [(0, 1)]),
            Configuration("q", (0,), (0,)),
            Configuration("q", (0,), (3,)),
        )
        gq = single_chain(q)
        children = decompose(gq, check_perfect(gq))
        assert len(children) == 1
        child = children[0]
        assert len(child.gv.components) == 4
        assert all(not c.transitions for c in child.gv.components)
        assert rank(child.gv) < rank(gq.gv)
        assert rank(gq.gv) == Rank(1, (0,)) and rank(child.gv) == Rank(0, (0,))

    def test_pin_open_boundary_per_value(self):
        lay = CounterLayout(1, 0)
        c0 = Component(("a",), (), "a", "a")
        c1 = Component(("b",), (), "b", "b")
        bnd = BoundaryEdge("a", "b", upd(0), all_omega(1))
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        gq = GenQuery(gv, Configuration("a", (2,), ()), Configuration("b", (2,), ()))
        children = decompose(gq, Violated(3, (1, 0, (2, 5))))
        assert len(children) == 2
        assert children[0].gv.boundaries[0].test.entries == (2,)
        assert children[1].gv.boundaries[0].test.entries == (5,)
        assert omega_count(children[0].gv) == 0

    def test_store_keeps_exact_union(self):
        # entry value 0 confines the sweep to q; the store keeps exactly
        # the observed pair and the stale states and transitions vanish
        lay = CounterLayout(1, 0)
        system = TestCheckPerfect().two_state_gadget(lay, 1, -1)
        q = ReachQuery(system, Configuration("q", (0,), ()), Configuration("q", (0,), ()))
        gq = single_chain(q)
        res = check_perfect(gq)
        assert isinstance(res, Violated) and res.condition == 4
        children = decompose(gq, res)
        assert len(children) == 1
        child = children[0]
        assert [c.states for c in child.gv.components] == [("q@0",)]
        assert child.gv.components[0].transitions == ()
        assert rank(gq.gv) == Rank(0, (2,)) and rank(child.gv) == Rank(0, (0,))
        v = klmst_decide(q)
        assert v.kind == "reach" and len(v.trace) == 0

    def test_store_refused_when_rank_stalls(self):
        # fabricated violation on a fragment whose cycles never touch the
        # stored counter: the refusal must surface as CapExceeded
        lay = CounterLayout(2, 0)
        system = loop_system(lay, [(0, 1), (0, -1)])
        q = ReachQuery(system, Configuration("q", (0, 0), ()), Configuration("q", (0, 0), ()))
        gq = single_chain(q)
        observed = (("q", (0,)),)
        with pytest.raises(CapExceeded):
            decompose(gq, Violated(4, (0, 0, 0, observed)))

    def test_children_preserve_bounded_verdicts(self):
        rng = random.Random(23)
        bounds = Bounds(nmax=5, zabs=6, lmax=10)
        checked = 0
        while checked < 12:
            q = rand_plain(rng)
            seqs = normalize(q)
            if not seqs:
                continue
            gq = seqs[0]
            res = check_perfect(gq)
            if not isinstance(res, Violated) or res.condition == 1:
                continue
            try:
                children = decompose(gq, res)
            except CapExceeded:
                continue
            parent = gen_bounded_reach(gq, bounds, node_cap=200_000)
            kids = [gen_bounded_reach(c, bounds, node_cap=200_000) for c in children]
            if parent == "reachable":
                assert "reachable" in kids
            else:
                assert "reachable" not in kids
            checked += 1


class TestRunFromPerfect:
    def test_empty_run_for_trivial_query(self):
        lay = CounterLayout(1, 0)
        system = ZVass(lay, ("q",), ())
        q = ReachQuery(system, Configuration("q", (0,), ()), Configuration("q", (0,), ()))
        gq = single_chain(q)
        res = check_perfect(gq)
        tr = run_from_perfect(gq, res.certificate)
        assert tr is not None and len(tr) == 0

    def test_minimal_solution_realized_first(self):
        lay = CounterLayout(1, 0)
        q = ReachQuery(
            loop_system(lay, [(1,), (-1,)]),
            Configuration("q", (0,), ()),
            Configuration("q", (0,), ()),
        )
        gq = single_chain(q)
        res = check_perfect(gq)
        tr = run_from_perfect(gq, res.certificate)
        assert tr is not None and tr.steps == ()

    def test_pumped_candidate_crosses_boundary(self):
        lay = CounterLayout(1, 0)
        c0 = Component(("a",), (Transition(0, "a", "a", upd(1)),), "a", "a")
        c1 = Component(("b",), (Transition(0, "b", "b", upd(-1)),), "b", "b")
        bnd = BoundaryEdge("a", "b", upd(-3), all_omega(1))
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        gq = GenQuery(gv, Configuration("a", (0,), ()), Configuration("b", (0,), ()))
        res = check_perfect(gq)
        assert isinstance(res, Perfect)
        tr = run_from_perfect(gq, res.certificate)
        assert tr is not None and tr.target == gq.target
        assert all(v >= 0 for c in tr.configs for v in c.nvals)

    def test_fuzzed_perfect_queries_replay(self):
        rng = random.Random(31)
        found = 0
        while found < 10:
            q = rand_plain(rng, ztest_p=0.0)
            seqs = normalize(q)
            if not seqs:
                continue
            gq = seqs[0]
            res = check_perfect(gq)
            if not isinstance(res, Perfect):
                continue
            tr = run_from_perfect(gq, res.certificate, mcap=8)
            assert tr is not None, serialize_generalised(gq)
            assert tr.target == gq.target
            found += 1


class TestNormalize:
    def test_chain_per_block_path_and_edge_choice(self):
        lay = CounterLayout(1, 0)
        system = ZVass(
            lay,
            ("a", "b"),
            (
                Transition(0, "a", "a", upd(1)),
                Transition(1, "a", "b", upd(0)),
                Transition(2, "a", "b", upd(1)),
                Transition(3, "b", "b", upd(-1)),
            ),
        )
        q = ReachQuery(system, Configuration("a", (0,), ()), Configuration("b", (0,), ()))
        seqs = normalize(q)
        assert len(seqs) == 2
        for gq in seqs:
            assert [c.states for c in gq.gv.components] == [("a",), ("b",)]
            assert gq.gv.boundaries[0].test.entries == (OMEGA,)
        assert {gq.gv.boundaries[0].update.entries for gq in seqs} == {(0,), (1,)}

    def test_unreachable_target_gives_no_chains(self):
        lay = CounterLayout(1, 0)
        system = ZVass(lay, ("a", "b"), (Transition(0, "b", "a", upd(0)),))
        q = ReachQuery(system, Configuration("a", (0,), ()), Configuration("b", (0,), ()))
        assert normalize(q) == []

    def test_crossing_nat_ztest_becomes_pinned_test(self):
        lay = CounterLayout(1, 0)
        system = ZVass(lay, ("a", "b"), (Transition(0, "a", "b", zero_update(lay), ztest=1),))
        q = ReachQuery(system, Configuration("a", (0,), ()), Configuration("b", (0,), ()))
        seqs = normalize(q)
        assert len(seqs) == 1
        b = seqs[0].gv.boundaries[0]
        assert b.test.entries == (0,) and b.ztest is None

    def test_crossing_int_ztest_rides_on_boundary(self):
        lay = CounterLayout(0, 1)
        system = ZVass(lay, ("a", "b"), (Transition(0, "a", "b", zero_update(lay), ztest=1),))
        q = ReachQuery(system, Configuration("a", (), (0,)), Configuration("b", (), (0,)))
        seqs = normalize(q)
        assert seqs[0].gv.boundaries[0].ztest == 1

    def test_fan_out_capped(self):
        lay = CounterLayout(1, 0)
        trans = tuple(Transition(n, "a", "b", upd(n)) for n in range(5))
        system = ZVass(lay, ("a", "b"), trans)
        q = ReachQuery(system, Configuration("a", (0,), ()), Configuration("b", (0,), ()))
        with pytest.raises(CapExceeded):
            normalize(q, cap=3)


class TestGenBoundedReach:
    def test_respects_boundary_tests(self):
        lay = CounterLayout(1, 0)
        c0 = Component(("a",), (Transition(0, "a", "a", upd(1)),), "a", "a")
        c1 = Component(("b",), (), "b", "b")
        bnd = BoundaryEdge("a", "b", upd(0), OmegaConfig((2,)))
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        gq = GenQuery(gv, Configuration("a", (0,), ()), Configuration("b", (2,), ()))
        assert gen_bounded_reach(gq, Bounds(4, 0, 8)) == "reachable"
        gq2 = GenQuery(gv, Configuration("a", (0,), ()), Configuration("b", (3,), ()))
        assert gen_bounded_reach(gq2, Bounds(4, 0, 8)) == "not-within-bounds"

    def test_node_cap(self):
        lay = CounterLayout(1, 0)
        q = ReachQuery(
            loop_system(lay, [(1,)]),
            Configuration("q", (0,), ()),
            Configuration("q", (9,), ()),
        )
        with pytest.raises(CapExceeded):
            gen_bounded_reach(single_chain(q), Bounds(9, 0, 20), node_cap=3)


class TestDecide:
    def test_trivial_equal_endpoints_reach(self):
        lay = CounterLayout(1, 0)
        system = ZVass(lay, ("q",), ())
        q = ReachQuery(system, Configuration("q", (0,), ()), Configuration("q", (0,), ()))
        v = klmst_decide(q)
        assert v.kind == "reach" and len(v.trace) == 0

    def test_parity_nonreach(self):
        lay = CounterLayout(0, 1)
        q = ReachQuery(
            loop_system(lay, [(2,)]),
            Configuration("q", (), (0,)),
            Configuration("q", (), (5,)),
        )
        v = klmst_decide(q)
        assert v.kind == "nonreach"
        assert v.tree["sequences"][0]["action"] == "violated-1"

    def test_unrolled_loop_reaches_and_replays(self):
        lay = CounterLayout(1, 1)
        q = ReachQuery(
            loop_system(lay, [(0, 1)]),
            Configuration("q", (0,), (0,)),
            Configuration("q", (0,), (3,)),
        )
        v = klmst_decide(q)
        assert v.kind == "reach" and len(v.trace) == 3
        tr = replay_gen(v.witness_query, v.trace.steps)
        assert tr.target == v.witness_query.target

    def test_store_chain_reaches(self):
        lay = CounterLayout(1, 0)
        system = loop_system(lay, [(-1,)])
        q = ReachQuery(system, Configuration("q", (2,), ()), Configuration("q", (0,), ()))
        v = klmst_decide(q)
        assert v.kind == "reach" and len(v.trace) == 2

    def test_disconnected_target_nonreach(self):
        lay = CounterLayout(1, 0)
        system = ZVass(lay, ("a", "b"), (Transition(0, "b", "a", upd(0)),))
        q = ReachQuery(system, Configuration("a", (0,), ()), Configuration("b", (0,), ()))
        v = klmst_decide(q)
        assert v.kind == "nonreach" and v.tree["sequences"] == []

    def test_node_budget_yields_unknown(self):
        lay = CounterLayout(1, 1)
        q = ReachQuery(
            loop_system(lay, [(0, 1)]),
            Configuration("q", (0,), (0,)),
            Configuration("q", (0,), (3,)),
        )
        v = klmst_decide(q, Caps(node_limit=1))
        assert v.kind == "unknown" and v.report

    def test_generalised_query_accepted_directly(self):
        lay = CounterLayout(1, 0)
        c0 = Component(("a",), (Transition(0, "a", "a", upd(1)),), "a", "a")
        c1 = Component(("b",), (Transition(0, "b", "b", upd(-1)),), "b", "b")
        bnd = BoundaryEdge("a", "b", upd(0), OmegaConfig((3,)))
        gv = GeneralisedZVass(lay, (c0, c1), (bnd,))
        gq = GenQuery(gv, Configuration("a", (0,), ()), Configuration("b", (1,), ()))
        v = klmst_decide(gq)
        assert v.kind == "reach"
        assert replay_gen(v.witness_query, v.trace.steps).target == v.witness_query.target

    def test_tree_records_strict_descent(self):
        lay = CounterLayout(1, 1)
        q = ReachQuery(
            loop_system(lay, [(0, 1), (1, -1)]),
            Configuration("q", (0,), (0,)),
            Configuration("q", (1,), (2,)),
        )
        v = klmst_decide(q)

        def walk(node):
            mine = ((node["rank"][0], tuple(reversed(node["rank"][1]))), node["omega"])
            for child in node["children"]:
                theirs = ((child["rank"][0], tuple(reversed(child["rank"][1]))), child["omega"])
                assert theirs < mine
                walk(child)

        for root in v.tree["sequences"]:
            walk(root)

    def test_fuzzed_agreement_with_bounded_oracle(self):
        rng = random.Random(7)
        bounds = Bounds(nmax=6, zabs=8, lmax=14)
        conclusive = 0
        for _ in range(25):
            q = rand_plain(rng)
            v = klmst_decide(q)
            o = bounded_reach(q, bounds, node_cap=200_000)
            if v.kind == "nonreach":
                assert o.verdict != "reachable"
                conclusive += 1
            elif v.kind == "reach":
                tr = replay_gen(v.witness_query, v.trace.steps)
                assert tr.target == v.witness_query.target
                conclusive += 1
        assert conclusive >= 15
