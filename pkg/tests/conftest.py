"""Shared builders for the test suite."""

from __future__ import annotations

import random

from zvass.core import (
    Configuration,
    CounterLayout,
    ReachQuery,
    Transition,
    UpdateVector,
    ZVass,
)


def conclusion_system() -> ZVass:
    """Two-state ZVASS(2,2): inner/outer loops with invariant counter sum."""
    lay = CounterLayout(2, 2)
    trans = (
        Transition(0, "q", "q", UpdateVector((1, -1, 0, 1))),
        Transition(1, "q", "p", UpdateVector((0, 0, 1, 0))),
        Transition(2, "p", "p", UpdateVector((-1, 1, 0, 0))),
        Transition(3, "p", "q", UpdateVector((0, 0, 0, 0))),
    )
    return ZVass(lay, ("q", "p"), trans)


def conclusion_query(
    source=("q", (0, 2), (0, 0)), target=("p", (2, 0), (2, 4))
) -> ReachQuery:
    sys_ = conclusion_system()
    return ReachQuery(sys_, Configuration(*source), Configuration(*target))


def random_system(
    rng: random.Random,
    d: int,
    k: int,
    max_states: int = 4,
    max_trans: int = 6,
    span: int = 2,
    allow_ztest: bool = False,
) -> ZVass:
    """Random small system with updates in [-span, span]."""
    n_states = rng.randint(1, max_states)
    states = tuple(f"s{i}" for i in range(n_states))
    n_trans = rng.randint(0, max_trans)
    trans = []
    for i in range(n_trans):
        src = rng.choice(states)
        dst = rng.choice(states)
        if allow_ztest and d + k >= 1 and rng.random() < 0.2:
            update = UpdateVector((0,) * (d + k))
            trans.append(Transition(i, src, dst, update, ztest=rng.randint(1, d + k)))
        else:
            update = UpdateVector(tuple(rng.randint(-span, span) for _ in range(d + k)))
            trans.append(Transition(i, src, dst, update))
    return ZVass(CounterLayout(d, k), states, tuple(trans))


def random_query(rng: random.Random, d: int, k: int, **kw) -> ReachQuery:
    sys_ = random_system(rng, d, k, **kw)
    src = Configuration(
        rng.choice(sys_.states),
        tuple(rng.randint(0, 2) for _ in range(d)),
        tuple(rng.randint(-2, 2) for _ in range(k)),
    )
    tgt = Configuration(
        rng.choice(sys_.states),
        tuple(rng.randint(0, 2) for _ in range(d)),
        tuple(rng.randint(-2, 2) for _ in range(k)),
    )
    return ReachQuery(sys_, src, tgt)


def random_valid_run(rng: random.Random, sys_: ZVass, source: Configuration, max_len: int):
    """Random-walk a valid run; returns the transition id path (may be empty)."""
    d = sys_.layout.d
    cur_state = source.state
    cur = list(source.values)
    path: list[int] = []
    length = rng.randint(0, max_len)
    by_src: dict[str, list[Transition]] = {}
    for t in sys_.transitions:
        by_src.setdefault(t.src, []).append(t)
    for _ in range(length):
        options = []
        for t in by_src.get(cur_state, []):
            new = [v + u for v, u in zip(cur, t.update.entries)]
            if all(new[i] >= 0 for i in range(d)):
                if t.ztest is None or cur[t.ztest - 1] == 0:
                    options.append((t, new))
        if not options:
            break
        t, new = rng.choice(options)
        path.append(t.tid)
        cur = new
        cur_state = t.dst
    return path
