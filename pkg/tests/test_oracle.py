"""Oracle behaviour: bounded BFS, reach sets, and length-bounded CA runs."""

from __future__ import annotations

import random

import pytest

from conftest import conclusion_query, random_query, random_valid_run
from zvass.core import (
    Configuration,
    CounterLayout,
    ReachQuery,
    Transition,
    UpdateVector,
    ZVass,
    replay,
)
from zvass.oracle import (
    Bounds,
    BoundsExceededAtSource,
    BoundsExceededAtTarget,
    MemoryCapExceeded,
    bounded_reach,
    length_bounded_ca_reach,
    reach_set,
)


def three_ca_inc_dec() -> ZVass:
    """3-CA doing inc x1 then dec x1 across three states."""
    lay = CounterLayout(3, 0)
    trans = (
        Transition(0, "a", "b", UpdateVector((1, 0, 0))),
        Transition(1, "b", "c", UpdateVector((-1, 0, 0))),
    )
    return ZVass(lay, ("a", "b", "c"), trans)


class TestBounds:
    def test_negative_cap_rejected(self):
        with pytest.raises(ValueError):
            Bounds(1, -1, 1)

    def test_admits(self):
        b = Bounds(2, 3, 10)
        assert b.admits(Configuration("p", (2,), (-3,)))
        assert not b.admits(Configuration("p", (3,), (0,)))
        assert not b.admits(Configuration("p", (0,), (4,)))


class TestBoundedReach:
    def test_source_equals_target(self):
        q = conclusion_query(target=("q", (0, 2), (0, 0)))
        ans = bounded_reach(q, Bounds(4, 8, 64))
        assert ans.reachable
        assert len(ans.trace) == 0

    def test_conclusion_reachable(self):
        ans = bounded_reach(conclusion_query(), Bounds(4, 8, 64))
        assert ans.verdict == "reachable"
        tr = ans.trace
        assert tr.source == Configuration("q", (0, 2), (0, 0))
        assert tr.target == Configuration("p", (2, 0), (2, 4))

    def test_conclusion_boundary_unreachable(self):
        q = conclusion_query(target=("p", (2, 0), (2, 5)))
        ans = bounded_reach(q, Bounds(6, 32, 200))
        assert ans.verdict == "not-within-bounds"

    def test_source_out_of_box(self):
        q = conclusion_query(source=("q", (9, 0), (0, 0)))
        with pytest.raises(BoundsExceededAtSource):
            bounded_reach(q, Bounds(4, 8, 64))

    def test_target_out_of_box(self):
        q = conclusion_query(target=("p", (0, 0), (9, 0)))
        with pytest.raises(BoundsExceededAtTarget):
            bounded_reach(q, Bounds(4, 8, 64))

    def test_memory_cap_abort(self):
        with pytest.raises(MemoryCapExceeded):
            bounded_reach(conclusion_query(), Bounds(4, 8, 64), node_cap=3)

    def test_witness_replays(self):
        rng = random.Random(11)
        b = Bounds(3, 3, 12)
        for _ in range(100):
            q = random_query(rng, 2, 1)
            ans = bounded_reach(q, b)
            if ans.reachable:
                tr = replay(q.system, q.source, ans.trace.path)
                assert tr.target == q.target

    def test_minimality_against_sampled_witness(self):
        rng = random.Random(13)
        b = Bounds(4, 4, 10)
        for _ in range(150):
            q = random_query(rng, 1, 1)
            if not b.admits(q.source):
                continue
            path = random_valid_run(rng, q.system, q.source, 10)
            tr = replay(q.system, q.source, path)
            if not all(b.admits(c) for c in tr.configs):
                continue
            ans = bounded_reach(
                ReachQuery(q.system, q.source, tr.target), b
            )
            assert ans.reachable
            assert len(ans.trace) <= len(path)

    def test_monotonicity(self):
        rng = random.Random(17)
        small = Bounds(2, 2, 6)
        big = Bounds(4, 5, 12)
        for _ in range(120):
            q = random_query(rng, 1, 1)
            if not (small.admits(q.source) and small.admits(q.target)):
                continue
            if bounded_reach(q, small).reachable:
                assert bounded_reach(q, big).reachable

    def test_agrees_with_reach_set(self):
        rng = random.Random(19)
        b = Bounds(3, 3, 8)
        for _ in range(120):
            q = random_query(rng, 1, 2, allow_ztest=True)
            if not (b.admits(q.source) and b.admits(q.target)):
                continue
            ans = bounded_reach(q, b)
            in_set = q.target in reach_set(q.system, q.source, b)
            assert ans.reachable == in_set


class TestReachSet:
    def test_no_transitions(self):
        sys_ = ZVass(CounterLayout(1, 0), ("p",), ())
        src = Configuration("p", (1,), ())
        assert reach_set(sys_, src, Bounds(2, 0, 5)) == {src}

    def test_failing_ztest_excludes_post_states(self):
        lay = CounterLayout(1, 0)
        trans = (Transition(0, "p", "q", UpdateVector((0,)), ztest=1),)
        sys_ = ZVass(lay, ("p", "q"), trans)
        got = reach_set(sys_, Configuration("p", (1,), ()), Bounds(3, 0, 5))
        assert all(c.state == "p" for c in got)
        got0 = reach_set(sys_, Configuration("p", (0,), ()), Bounds(3, 0, 5))
        assert Configuration("q", (0,), ()) in got0

    def test_box_respected(self):
        lay = CounterLayout(1, 1)
        trans = (Transition(0, "p", "p", UpdateVector((1, -1))),)
        sys_ = ZVass(lay, ("p",), trans)
        got = reach_set(sys_, Configuration("p", (0,), (0,)), Bounds(3, 2, 50))
        assert got == {
            Configuration("p", (i,), (-i,)) for i in range(3)
        }


class TestLengthBoundedCaReach:
    def test_zero_length_identity(self):
        ca = three_ca_inc_dec()
        src = Configuration("a", (0, 0, 0), ())
        ans = length_bounded_ca_reach(ca, src, src, 0)
        assert ans.reachable
        assert len(ans.trace) == 0

    def test_inc_dec_at_two(self):
        ca = three_ca_inc_dec()
        src = Configuration("a", (0, 0, 0), ())
        tgt = Configuration("c", (0, 0, 0), ())
        assert length_bounded_ca_reach(ca, src, tgt, 2).reachable
        assert not length_bounded_ca_reach(ca, src, tgt, 1).reachable

    def test_exact_mode_distinguishes(self):
        ca = ZVass(CounterLayout(1, 0), ("p",), ())
        src = Configuration("p", (0,), ())
        assert length_bounded_ca_reach(ca, src, src, 1, mode="at_most").reachable
        assert not length_bounded_ca_reach(ca, src, src, 1, mode="exact").reachable

    def test_exact_mode_finds_padded_run(self):
        lay = CounterLayout(1, 0)
        trans = (
            Transition(0, "p", "p", UpdateVector((0,)), ztest=1),
            Transition(1, "p", "q", UpdateVector((1,))),
        )
        ca = ZVass(lay, ("p", "q"), trans)
        src = Configuration("p", (0,), ())
        tgt = Configuration("q", (1,), ())
        ans = length_bounded_ca_reach(ca, src, tgt, 4, mode="exact")
        assert ans.reachable
        assert len(ans.trace) == 4
        assert ans.trace.path == (0, 0, 0, 1)

    def test_bad_mode_rejected(self):
        ca = three_ca_inc_dec()
        src = Configuration("a", (0, 0, 0), ())
        with pytest.raises(ValueError):
            length_bounded_ca_reach(ca, src, src, 1, mode="between")
