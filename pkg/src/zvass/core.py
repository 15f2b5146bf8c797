"""Data model and exact operational semantics for Z-VASS and counter automata.

A machine over d nonnegative counters and k integer counters fires
transitions that add an update vector to the counter valuation; the first
d components must stay nonnegative.  Zero-test transitions (the counter
automaton extension) carry an all-zero update and are enabled only when
the tested counter equals zero.  Zero-tests usually reference one of the
d nonnegative counters; tests on integer counters are permitted because
compiled counter programs test auxiliary integer counters with the same
"enabled iff the value is zero" semantics.

All values are arbitrary-precision integers: gadget verification produces
values such as 7**(2**n) and fixed-width arithmetic would silently
corrupt them.  Every type is an immutable value after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ZVassError(Exception):
    """Base class for semantic and format errors."""


class NNegViolation(ZVassError):
    """Firing would drive one of the first d counters below zero."""


class ZeroTestFailed(ZVassError):
    """A zero-test transition was fired with a nonzero tested counter."""


class WrongState(ZVassError):
    """Transition source does not match the configuration's state."""


class BrokenChain(ZVassError):
    """Consecutive path transitions do not chain dst -> src."""


class FormatError(ZVassError):
    """Malformed .zvass text; carries a line number where possible."""


@dataclass(frozen=True)
class CounterLayout:
    """Counts of nonnegative (d) and integer (k) counters."""

    d: int
    k: int

    def __post_init__(self) -> None:
        if self.d < 0 or self.k < 0 or self.d + self.k < 1:
            raise ValueError(f"bad layout d={self.d} k={self.k}")

    @property
    def total(self) -> int:
        return self.d + self.k


@dataclass(frozen=True)
class UpdateVector:
    """Transition effect: d+k arbitrary-precision integers."""

    entries: tuple[int, ...]

    def __add__(self, other: UpdateVector) -> UpdateVector:
        if len(self.entries) != len(other.entries):
            raise ValueError("dimension mismatch")
        return UpdateVector(tuple(a + b for a, b in zip(self.entries, other.entries)))

    def norm1(self) -> int:
        return sum(abs(e) for e in self.entries)

    def nat_part(self, layout: CounterLayout) -> tuple[int, ...]:
        return self.entries[: layout.d]

    def int_part(self, layout: CounterLayout) -> tuple[int, ...]:
        return self.entries[layout.d :]

    def is_zero(self) -> bool:
        return all(e == 0 for e in self.entries)


def zero_update(layout: CounterLayout) -> UpdateVector:
    return UpdateVector((0,) * layout.total)


@dataclass(frozen=True)
class Transition:
    """Edge src -> dst with an update; ztest is a 1-based counter index.

    Zero-test transitions carry no effect: if ztest is present the update
    must be all-zero.
    """

    tid: int
    src: str
    dst: str
    update: UpdateVector
    ztest: int | None = None

    def __post_init__(self) -> None:
        if self.ztest is not None and not self.update.is_zero():
            raise ValueError(f"transition t{self.tid}: zero-test with nonzero update")


@dataclass(frozen=True)
class ZVass:
    """States and transitions over a counter layout.

    Transition ids are dense indices into `transitions`; state ids are
    interned symbols.  The encoding tag (unary|binary) is metadata for
    size reporting only and never affects semantics.
    """

    layout: CounterLayout
    states: tuple[str, ...]
    transitions: tuple[Transition, ...]
    encoding: str = "unary"

    def __post_init__(self) -> None:
        seen = set(self.states)
        if len(seen) != len(self.states):
            raise ValueError("duplicate state ids")
        for i, t in enumerate(self.transitions):
            if t.tid != i:
                raise ValueError(f"transition ids must be dense indices, got {t.tid} at {i}")
            if t.src not in seen or t.dst not in seen:
                raise ValueError(f"t{t.tid}: unknown state {t.src!r} or {t.dst!r}")
            if len(t.update.entries) != self.layout.total:
                raise ValueError(f"t{t.tid}: update arity {len(t.update.entries)}")
            if t.ztest is not None and not (1 <= t.ztest <= self.layout.total):
                raise ValueError(f"t{t.tid}: ztest index {t.ztest} out of range")

    def state_index(self, state: str) -> int:
        return self.states.index(state)

    def transitions_from(self, state: str) -> list[Transition]:
        return [t for t in self.transitions if t.src == state]

    def size(self) -> int:
        """Unary size |Q| + sum of 1-norms; binary replaces each norm by its bit length."""
        if self.encoding == "binary":
            return len(self.states) + sum(
                int(math.log2(t.update.norm1() + 1)) + 1 for t in self.transitions
            )
        return len(self.states) + sum(t.update.norm1() for t in self.transitions)


@dataclass(frozen=True)
class Configuration:
    """Control state plus counter valuation; nvals components stay >= 0."""

    state: str
    nvals: tuple[int, ...]
    zvals: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.nvals):
            raise ValueError("negative value on a nonnegative counter")

    @property
    def values(self) -> tuple[int, ...]:
        return self.nvals + self.zvals

    def __str__(self) -> str:
        nat = ",".join(str(v) for v in self.nvals)
        zed = ",".join(str(v) for v in self.zvals)
        return f"{self.state}({nat};{zed})"


@dataclass(frozen=True)
class Trace:
    """Run: configuration sequence plus the fired transition ids."""

    configs: tuple[Configuration, ...]
    path: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.configs) != len(self.path) + 1:
            raise ValueError("trace shape: |configs| must be |path|+1")

    @property
    def source(self) -> Configuration:
        return self.configs[0]

    @property
    def target(self) -> Configuration:
        return self.configs[-1]

    def __len__(self) -> int:
        return len(self.path)


@dataclass(frozen=True)
class ReachQuery:
    """Does source reach target in the given system?"""

    system: ZVass
    source: Configuration
    target: Configuration

    def __post_init__(self) -> None:
        lay = self.system.layout
        for c in (self.source, self.target):
            if c.state not in self.system.states:
                raise ValueError(f"unknown state {c.state!r}")
            if len(c.nvals) != lay.d or len(c.zvals) != lay.k:
                raise ValueError("valuation length does not match layout")


def fire(system: ZVass, c: Configuration, tid: int) -> Configuration:
    """Fire one transition; raises WrongState/ZeroTestFailed/NNegViolation."""
    t = system.transitions[tid]
    if c.state != t.src:
        raise WrongState(f"t{tid} expects state {t.src}, configuration is at {c.state}")
    vals = c.values
    if t.ztest is not None and vals[t.ztest - 1] != 0:
        raise ZeroTestFailed(f"t{tid}: counter {t.ztest} is {vals[t.ztest - 1]}, not 0")
    d = system.layout.d
    new = tuple(v + u for v, u in zip(vals, t.update.entries))
    for i in range(d):
        if new[i] < 0:
            raise NNegViolation(f"t{tid}: counter {i + 1} would become {new[i]}")
    return Configuration(t.dst, new[:d], new[d:])


def effect(system: ZVass, path: list[int] | tuple[int, ...]) -> UpdateVector:
    """Summed update along a chained path; raises BrokenChain."""
    total = list(zero_update(system.layout).entries)
    prev_dst: str | None = None
    for tid in path:
        t = system.transitions[tid]
        if prev_dst is not None and t.src != prev_dst:
            raise BrokenChain(f"t{tid} starts at {t.src}, previous ended at {prev_dst}")
        prev_dst = t.dst
        for i, u in enumerate(t.update.entries):
            total[i] += u
    return UpdateVector(tuple(total))


def replay(system: ZVass, start: Configuration, path: list[int] | tuple[int, ...]) -> Trace:
    """Replay a path from a configuration; errors identify the failing step."""
    configs = [start]
    cur = start
    for step, tid in enumerate(path):
        try:
            cur = fire(system, cur, tid)
        except ZVassError as exc:
            raise type(exc)(f"step {step}: {exc}") from None
        configs.append(cur)
    return Trace(tuple(configs), tuple(path))


def _parse_values(text: str, layout: CounterLayout, lineno: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    parts = text.split(";")
    if layout.k == 0 and len(parts) == 1:
        parts.append("")
    if len(parts) != 2:
        raise FormatError(f"line {lineno}: expected '<d nats> ; <k ints>'")
    try:
        nvals = tuple(int(x) for x in parts[0].split())
        zvals = tuple(int(x) for x in parts[1].split())
    except ValueError:
        raise FormatError(f"line {lineno}: non-integer counter value") from None
    if len(nvals) != layout.d or len(zvals) != layout.k:
        raise FormatError(
            f"line {lineno}: arity {len(nvals)};{len(zvals)} does not match d={layout.d} k={layout.k}"
        )
    return nvals, zvals


def parse_instance(text: str) -> ReachQuery:
    """Parse the .zvass text format into a ReachQuery."""
    layout: CounterLayout | None = None
    states: tuple[str, ...] = ()
    transitions: list[Transition] = []
    init: Configuration | None = None
    target: Configuration | None = None
    encoding = "unary"

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split(None, 1)
        kw = fields[0]
        rest = fields[1] if len(fields) > 1 else ""
        if kw == "zvass":
            opts = dict(item.split("=", 1) for item in rest.split() if "=" in item)
            try:
                layout = CounterLayout(int(opts["d"]), int(opts["k"]))
            except (KeyError, ValueError):
                raise FormatError(f"line {lineno}: header needs d=<int> k=<int>") from None
            encoding = opts.get("encoding", "unary")
        elif kw == "states":
            states = tuple(rest.split())
        elif kw in ("init", "target"):
            if layout is None:
                raise FormatError(f"line {lineno}: {kw} before header")
            if ":" not in rest:
                raise FormatError(f"line {lineno}: expected '{kw} <state> : <values>'")
            state, values = rest.split(":", 1)
            try:
                nvals, zvals = _parse_values(values, layout, lineno)
            except FormatError:
                raise
            try:
                conf = Configuration(state.strip(), nvals, zvals)
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
            if kw == "init":
                init = conf
            else:
                target = conf
        elif kw in ("trans", "ztest"):
            if layout is None:
                raise FormatError(f"line {lineno}: {kw} before header")
            head, _, values = rest.partition(":")
            bits = head.split()
            if len(bits) != 4 or bits[2] != "->":
                raise FormatError(f"line {lineno}: expected '{kw} <id> <src> -> <dst> : ...'")
            name, src, dst = bits[0], bits[1], bits[3]
            if kw == "trans":
                try:
                    nvals, zvals = _parse_values(values, layout, lineno)
                except FormatError as exc:
                    raise FormatError(f"{exc} (transition {name})") from None
                update = UpdateVector(nvals + zvals)
                ztest = None
            else:
                try:
                    ztest = int(values.strip())
                except ValueError:
                    raise FormatError(f"line {lineno}: ztest needs a counter index") from None
                update = zero_update(layout)
            transitions.append(Transition(len(transitions), src, dst, update, ztest))
        else:
            raise FormatError(f"line {lineno}: unknown keyword {kw!r}")

    if layout is None:
        raise FormatError("missing 'zvass d=.. k=..' header")
    if init is None or target is None:
        raise FormatError("missing init or target line")
    try:
        system = ZVass(layout, states, tuple(transitions), encoding)
        return ReachQuery(system, init, target)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def _format_values(nvals: tuple[int, ...], zvals: tuple[int, ...]) -> str:
    return " ".join(str(v) for v in nvals) + " ; " + " ".join(str(v) for v in zvals)


def serialize_instance(q: ReachQuery) -> str:
    """Emit the .zvass text format; parse(serialize(q)) == q."""
    sys_ = q.system
    lay = sys_.layout
    lines = [f"zvass d={lay.d} k={lay.k}" + (f" encoding={sys_.encoding}" if sys_.encoding != "unary" else "")]
    lines.append("states " + " ".join(sys_.states))
    lines.append(f"init {q.source.state} : {_format_values(q.source.nvals, q.source.zvals)}")
    lines.append(f"target {q.target.state} : {_format_values(q.target.nvals, q.target.zvals)}")
    for t in sys_.transitions:
        if t.ztest is not None:
            lines.append(f"ztest t{t.tid} {t.src} -> {t.dst} : {t.ztest}")
        else:
            d = lay.d
            lines.append(
                f"trans t{t.tid} {t.src} -> {t.dst} : "
                + _format_values(t.update.entries[:d], t.update.entries[d:])
            )
    return "\n".join(lines) + "\n"
