"""Bounded brute-force reachability, the ground-truth oracle for the rest of the suite.

All searches are breadth-first with a FIFO frontier and tie-break by transition
index, so returned traces are length-minimal and byte-deterministic.  Integer
counters are boxed by absolute value; "not within bounds" never claims
unreachability outside the box.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .core import Configuration, ReachQuery, Trace, ZVass, ZVassError, replay


class BoundsExceededAtSource(ZVassError):
    """Source configuration lies outside the search box."""


class BoundsExceededAtTarget(ZVassError):
    """Target configuration lies outside the search box."""


class MemoryCapExceeded(ZVassError):
    """Visited set outgrew the configured cap; the search aborted honestly."""


@dataclass(frozen=True)
class Bounds:
    """Search box: per-counter caps plus a run-length cap."""

    nmax: int
    zabs: int
    lmax: int

    def __post_init__(self) -> None:
        if self.nmax < 0 or self.zabs < 0 or self.lmax < 0:
            raise ValueError("bounds must be nonnegative")

    def admits(self, config: Configuration) -> bool:
        """True when every counter value fits in the box."""
        return all(0 <= v <= self.nmax for v in config.nvals) and all(
            abs(v) <= self.zabs for v in config.zvals
        )


@dataclass(frozen=True)
class OracleAnswer:
    """Search outcome: a replayable witness trace or NotWithinBounds."""

    trace: Trace | None
    explored: int

    @property
    def reachable(self) -> bool:
        return self.trace is not None

    @property
    def verdict(self) -> str:
        return "reachable" if self.reachable else "not-within-bounds"


def _successors(system: ZVass, config: Configuration):
    """Enabled (tid, successor) pairs in transition-index order."""
    d = system.layout.d
    vals = config.values
    for t in system.transitions_from(config.state):
        if t.ztest is not None and vals[t.ztest - 1] != 0:
            continue
        new = tuple(v + u for v, u in zip(vals, t.update.entries))
        if any(new[i] < 0 for i in range(d)):
            continue
        yield t.tid, Configuration(t.dst, new[:d], new[d:])


def _live_counters(system: ZVass) -> dict[str, frozenset[int]]:
    """Per state, the 0-based counters some path leaving it can still update."""
    fwd: dict[str, set[str]] = {s: {s} for s in system.states}
    changed = True
    while changed:
        changed = False
        for t in system.transitions:
            for s, closure in fwd.items():
                if t.src in closure and t.dst not in closure:
                    closure.add(t.dst)
                    changed = True
    live: dict[str, frozenset[int]] = {}
    for s, closure in fwd.items():
        touched: set[int] = set()
        for t in system.transitions:
            if t.src in closure:
                touched.update(i for i, u in enumerate(t.update.entries) if u != 0)
        live[s] = frozenset(touched)
    return live


def _states_reaching(system: ZVass, goal: str) -> frozenset[str]:
    """States from which goal is reachable in the underlying state graph."""
    back: set[str] = {goal}
    changed = True
    while changed:
        changed = False
        for t in system.transitions:
            if t.dst in back and t.src not in back:
                back.add(t.src)
                changed = True
    return frozenset(back)


def bounded_reach(
    query: ReachQuery, bounds: Bounds, node_cap: int | None = None
) -> OracleAnswer:
    """Decide in-box reachability; a Reachable trace is length-minimal.

    Configurations whose frozen counters already disagree with the target are
    pruned: a counter no future transition can update must match the target
    now, so pruning never discards a run to the target.
    """
    system = query.system
    source, target = query.source, query.target
    if not bounds.admits(source):
        raise BoundsExceededAtSource(f"source {source} outside box")
    if not bounds.admits(target):
        raise BoundsExceededAtTarget(f"target {target} outside box")
    live = _live_counters(system)
    can_reach_goal = _states_reaching(system, target.state)

    def hopeless(config: Configuration) -> bool:
        if config.state not in can_reach_goal:
            return True
        alive = live[config.state]
        tvals = target.values
        return any(
            v != tvals[i] for i, v in enumerate(config.values) if i not in alive
        )

    if source == target:
        return OracleAnswer(Trace((source,), ()), 1)
    parent: dict[Configuration, tuple[Configuration, int] | None] = {source: None}
    frontier: deque[tuple[Configuration, int]] = deque()
    if not hopeless(source):
        frontier.append((source, 0))
    while frontier:
        config, depth = frontier.popleft()
        if depth >= bounds.lmax:
            continue
        for tid, succ in _successors(system, config):
            if succ in parent or not bounds.admits(succ):
                continue
            parent[succ] = (config, tid)
            if node_cap is not None and len(parent) > node_cap:
                raise MemoryCapExceeded(
                    f"visited more than {node_cap} configurations"
                )
            if succ == target:
                path: list[int] = []
                walk: Configuration = succ
                while parent[walk] is not None:
                    prev, step = parent[walk]  # type: ignore[misc]
                    path.append(step)
                    walk = prev
                path.reverse()
                return OracleAnswer(replay(system, source, path), len(parent))
            if not hopeless(succ):
                frontier.append((succ, depth + 1))
    return OracleAnswer(None, len(parent))


def reach_set(
    system: ZVass,
    source: Configuration,
    bounds: Bounds,
    node_cap: int | None = None,
) -> set[Configuration]:
    """All configurations reachable inside the box within lmax steps."""
    if not bounds.admits(source):
        raise BoundsExceededAtSource(f"source {source} outside box")
    seen: set[Configuration] = {source}
    frontier: deque[tuple[Configuration, int]] = deque([(source, 0)])
    while frontier:
        config, depth = frontier.popleft()
        if depth >= bounds.lmax:
            continue
        for _, succ in _successors(system, config):
            if succ in seen or not bounds.admits(succ):
                continue
            seen.add(succ)
            if node_cap is not None and len(seen) > node_cap:
                raise MemoryCapExceeded(f"visited more than {node_cap} configurations")
            frontier.append((succ, depth + 1))
    return seen


def length_bounded_ca_reach(
    ca: ZVass,
    src: Configuration,
    tgt: Configuration,
    length: int,
    mode: str = "at_most",
    node_cap: int | None = None,
) -> OracleAnswer:
    """Decide existence of a run of length <= L ("at_most") or exactly L ("exact").

    Counters need no explicit box: a run of length L moves each counter by at
    most L times the largest update, so the layered search is finite.
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    if mode not in ("at_most", "exact"):
        raise ValueError(f"unknown mode {mode!r}")
    start = (src, 0)
    parent: dict[tuple[Configuration, int], tuple[Configuration, int, int] | None] = {
        start: None
    }

    def done(node: tuple[Configuration, int]) -> bool:
        config, depth = node
        if config != tgt:
            return False
        return depth == length if mode == "exact" else depth <= length

    def answer(node: tuple[Configuration, int]) -> OracleAnswer:
        path: list[int] = []
        walk = node
        while parent[walk] is not None:
            prev, pdepth, step = parent[walk]  # type: ignore[misc]
            path.append(step)
            walk = (prev, pdepth)
        path.reverse()
        return OracleAnswer(replay(ca, src, path), len(parent))

    if done(start):
        return answer(start)
    frontier: deque[tuple[Configuration, int]] = deque([start])
    while frontier:
        config, depth = frontier.popleft()
        if depth >= length:
            continue
        for tid, succ in _successors(ca, config):
            node = (succ, depth + 1)
            if node in parent:
                continue
            parent[node] = (config, depth, tid)
            if node_cap is not None and len(parent) > node_cap:
                raise MemoryCapExceeded(f"visited more than {node_cap} states")
            if done(node):
                return answer(node)
            frontier.append(node)
    return OracleAnswer(None, len(parent))
