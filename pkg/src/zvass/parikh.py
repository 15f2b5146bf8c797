"""One-counter abstraction for systems with a single natural counter.

A system with one natural counter and k integer counters translates into a
one-counter automaton (OCA) whose alphabet records integer-counter activity:
counter i emits ``a<i>`` when incremented and ``b<i>`` when decremented.
Accepted words whose Parikh image balances every ``a<i>`` against ``b<i>``
correspond exactly to runs that start and end with all counters at zero.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import count

from .core import Transition, ZVass, ZVassError, zero_update
from .oracle import MemoryCapExceeded


class DimensionMismatch(ZVassError):
    """Input does not have the required counter layout."""


class UnsupportedZeroTest(ZVassError):
    """Zero test on an integer counter cannot be tracked by letter counts."""


ZTEST = "z"
_OPS = (-1, 0, 1, ZTEST)


def alphabet(k: int) -> tuple[str, ...]:
    """Letters a1 b1 .. ak bk in fixed order."""
    out: list[str] = []
    for i in range(1, k + 1):
        out.extend((f"a{i}", f"b{i}"))
    return tuple(out)


@dataclass(frozen=True)
class OcaTransition:
    src: str
    letter: str | None
    op: int | str
    dst: str

    def __post_init__(self) -> None:
        if self.op not in _OPS:
            raise ValueError(f"counter op must be one of {_OPS}, got {self.op!r}")


@dataclass(frozen=True)
class OCA:
    """Finite automaton with one natural counter and a 2k-letter alphabet."""

    k: int
    states: tuple[str, ...]
    transitions: tuple[OcaTransition, ...]
    initial: str
    finals: frozenset[str]

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        known = set(self.states)
        if len(known) != len(self.states):
            raise ValueError("duplicate state names")
        letters = set(alphabet(self.k))
        for t in self.transitions:
            if t.src not in known or t.dst not in known:
                raise ValueError(f"transition endpoint {t.src!r}->{t.dst!r} unknown")
            if t.letter is not None and t.letter not in letters:
                raise ValueError(f"letter {t.letter!r} outside alphabet of size {2 * self.k}")
        if self.initial not in known:
            raise ValueError(f"initial state {self.initial!r} unknown")
        for f in self.finals:
            if f not in known:
                raise ValueError(f"final state {f!r} unknown")

    @property
    def alphabet(self) -> tuple[str, ...]:
        return alphabet(self.k)


@dataclass(frozen=True)
class ParikhVector:
    """Letter counts over the alphabet a1 b1 .. ak bk."""

    k: int
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.counts) != 2 * self.k:
            raise ValueError("counts arity must be 2k")
        if any(c < 0 for c in self.counts):
            raise ValueError("letter counts are naturals")

    def __getitem__(self, letter: str) -> int:
        return self.counts[alphabet(self.k).index(letter)]

    def norm1(self) -> int:
        return sum(self.counts)


def parikh_of(word: tuple[str, ...] | list[str], k: int) -> ParikhVector:
    """Count letter occurrences of a word over the 2k-letter alphabet."""
    index = {letter: i for i, letter in enumerate(alphabet(k))}
    counts = [0] * (2 * k)
    for letter in word:
        counts[index[letter]] += 1
    return ParikhVector(k, tuple(counts))


@dataclass(frozen=True)
class LinearSet:
    """base + naturals-combinations of the period vectors."""

    base: tuple[int, ...]
    periods: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if any(x < 0 for x in self.base):
            raise ValueError("base vector must be natural")
        for p in self.periods:
            if len(p) != len(self.base):
                raise ValueError("period arity differs from base")
            if any(x < 0 for x in p):
                raise ValueError("period vectors must be natural")

    @property
    def dim(self) -> int:
        return len(self.base)


@dataclass(frozen=True)
class SemilinearSet:
    parts: tuple[LinearSet, ...]

    def __post_init__(self) -> None:
        dims = {p.dim for p in self.parts}
        if len(dims) > 1:
            raise ValueError("mixed dimensions in semilinear union")

    @property
    def dim(self) -> int:
        return self.parts[0].dim if self.parts else 0


def z_set(k: int) -> LinearSet:
    """Parikh vectors with equally many a_i and b_i for every i."""
    if k < 1:
        raise ValueError("k must be at least 1")
    base = (0,) * (2 * k)
    periods = []
    for i in range(k):
        p = [0] * (2 * k)
        p[2 * i] = 1
        p[2 * i + 1] = 1
        periods.append(tuple(p))
    return LinearSet(base, tuple(periods))


def _linear_member(v: tuple[int, ...], lin: LinearSet) -> bool:
    residual = tuple(x - b for x, b in zip(v, lin.base))
    if any(x < 0 for x in residual):
        return False
    periods = [p for p in lin.periods if any(p)]

    def dfs(idx: int, rest: tuple[int, ...]) -> bool:
        if idx == len(periods):
            return not any(rest)
        p = periods[idx]
        cap = min(r // c for r, c in zip(rest, p) if c > 0)
        for m in range(cap + 1):
            if dfs(idx + 1, tuple(r - m * c for r, c in zip(rest, p))):
                return True
        return False

    return dfs(0, residual)


def semilinear_member(
    v: ParikhVector | tuple[int, ...], s: SemilinearSet | LinearSet
) -> bool:
    """Exact membership by bounded search over period multipliers."""
    parts = (s,) if isinstance(s, LinearSet) else s.parts
    vec = v.counts if isinstance(v, ParikhVector) else tuple(v)
    for lin in parts:
        if lin.dim != len(vec):
            raise DimensionMismatch(
                f"vector has dimension {len(vec)}, set has {lin.dim}"
            )
        if _linear_member(vec, lin):
            return True
    return False


def _fresh_name(base: str, used: set[str]) -> str:
    name = base
    while name in used:
        name += "~"
    used.add(name)
    return name


def _preprocess(system: ZVass) -> list[tuple[str, int, tuple[int, ...], str, bool]]:
    """Split moves with no integer activity so every move reads a letter.

    Returns (src, nat delta, int deltas, dst, is_ztest) rows; systems without
    integer counters get one synthetic pair so the split has a counter to use.
    """
    k = max(system.layout.k, 1)
    used = set(system.states)
    rows: list[tuple[str, int, tuple[int, ...], str, bool]] = []
    for t in system.transitions:
        nat = t.update.entries[0]
        ints = tuple(t.update.entries[1:]) + (0,) * (k - system.layout.k)
        if t.ztest is not None:
            if t.ztest != 1:
                raise UnsupportedZeroTest(
                    f"transition t{t.tid} tests integer counter {t.ztest}"
                )
            rows.append((t.src, 0, ints, t.dst, True))
        elif any(ints):
            rows.append((t.src, nat, ints, t.dst, False))
        else:
            mid = _fresh_name(f"t{t.tid}~m", used)
            up = (1,) + (0,) * (k - 1)
            dn = (-1,) + (0,) * (k - 1)
            rows.append((t.src, nat, up, mid, False))
            rows.append((mid, 0, dn, t.dst, False))
    return rows


def zvass1_to_oca(system: ZVass, source: str, target: str) -> OCA:
    """Translate a d=1 system into an OCA tracking the natural counter.

    Each move becomes a chain: first the natural-counter unit steps, then one
    letter per unit of integer-counter change. Zero tests are supported on the
    natural counter only.
    """
    if system.layout.d != 1:
        raise DimensionMismatch(f"need exactly one natural counter, have d={system.layout.d}")
    if source not in system.states or target not in system.states:
        raise ValueError(f"unknown endpoint {source!r} or {target!r}")
    rows = _preprocess(system)
    used = set(system.states)
    for src, _, _, dst, _ in rows:
        used.add(src)
        used.add(dst)
    states = list(system.states) + [s for s, *_ in rows if s not in system.states]
    fresh = count()
    moves: list[OcaTransition] = []
    for src, nat, ints, dst, is_ztest in rows:
        if is_ztest:
            moves.append(OcaTransition(src, None, ZTEST, dst))
            continue
        steps: list[tuple[str | None, int]] = []
        sign = 1 if nat > 0 else -1
        steps.extend((None, sign) for _ in range(abs(nat)))
        for i, z in enumerate(ints):
            letter = f"a{i + 1}" if z > 0 else f"b{i + 1}"
            steps.extend((letter, 0) for _ in range(abs(z)))
        here = src
        for j, (letter, op) in enumerate(steps):
            last = j == len(steps) - 1
            nxt = dst if last else _fresh_name(f"c{next(fresh)}", used)
            if not last:
                states.append(nxt)
            moves.append(OcaTransition(here, letter, op, nxt))
            here = nxt
    return OCA(
        k=max(system.layout.k, 1),
        states=tuple(states),
        transitions=tuple(moves),
        initial=source,
        finals=frozenset({target}),
    )


def zero_form(query) -> tuple[ZVass, str, str]:
    """Reduce a reachability query to zero-valued endpoints.

    Nonzero source values are loaded by one fresh leading move, nonzero target
    values drained by one fresh trailing move, so runs correspond one-to-one.
    """
    from .core import UpdateVector

    system = query.system
    source, target = query.source, query.target
    if not any(source.values) and not any(target.values):
        return system, source.state, target.state
    used = set(system.states)
    s0 = _fresh_name("src~0", used)
    t0 = _fresh_name("tgt~0", used)
    extra = [
        Transition(len(system.transitions), s0, source.state, UpdateVector(source.values)),
        Transition(
            len(system.transitions) + 1,
            target.state,
            t0,
            UpdateVector(tuple(-x for x in target.values)),
        ),
    ]
    extended = ZVass(
        system.layout,
        system.states + (s0, t0),
        system.transitions + tuple(extra),
        system.encoding,
    )
    return extended, s0, t0


def word_of_path(system: ZVass, path: list[int] | tuple[int, ...]) -> tuple[str, ...]:
    """Letters the translated OCA reads along a run with the given path."""
    word: list[str] = []
    for tid in path:
        t = system.transitions[tid]
        if t.ztest is not None:
            continue
        ints = t.update.entries[1:]
        if not any(ints):
            word.extend(("a1", "b1"))
            continue
        for i, z in enumerate(ints):
            letter = f"a{i + 1}" if z > 0 else f"b{i + 1}"
            word.extend(letter for _ in range(abs(z)))
    return tuple(word)


def balanced_witness(
    oca: OCA, cap: int, node_cap: int | None = None
) -> tuple[str, ...] | None:
    """Shortest accepted word with balanced letter counts, or None.

    Explores configurations (state, counter, per-letter-pair imbalance) with
    the counter and every imbalance component boxed by cap; the word length is
    also bounded by cap. Zero-cost moves (no letter) are explored first, so a
    returned word has minimum length among all witnesses inside the box.
    """
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    start = (oca.initial, 0, (0,) * oca.k)
    pair = {}
    for i in range(oca.k):
        pair[f"a{i + 1}"] = (i, 1)
        pair[f"b{i + 1}"] = (i, -1)
    by_src: dict[str, list[OcaTransition]] = {}
    for t in oca.transitions:
        by_src.setdefault(t.src, []).append(t)

    dist = {start: 0}
    parent: dict[tuple, tuple] = {}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        state, counter, imb = node
        d = dist[node]
        if state in oca.finals and counter == 0 and not any(imb):
            word: list[str] = []
            cur = node
            while cur in parent:
                cur, letter = parent[cur]
                if letter is not None:
                    word.append(letter)
            return tuple(reversed(word))
        for t in by_src.get(state, ()):
            if t.op == ZTEST:
                if counter != 0:
                    continue
                nxt_counter = counter
            else:
                nxt_counter = counter + t.op
                if nxt_counter < 0 or nxt_counter > cap:
                    continue
            nxt_imb = imb
            cost = 0
            if t.letter is not None:
                i, delta = pair[t.letter]
                val = imb[i] + delta
                if abs(val) > cap:
                    continue
                nxt_imb = imb[:i] + (val,) + imb[i + 1:]
                cost = 1
            nd = d + cost
            if nd > cap:
                continue
            nxt = (t.dst, nxt_counter, nxt_imb)
            if nxt in dist and dist[nxt] <= nd:
                continue
            dist[nxt] = nd
            parent[nxt] = (node, t.letter)
            if node_cap is not None and len(dist) > node_cap:
                raise MemoryCapExceeded(f"witness search exceeded {node_cap} nodes")
            if cost == 0:
                queue.appendleft(nxt)
            else:
                queue.append(nxt)
    return None


def parse_oca(text: str) -> OCA:
    """Parse the .oca text format."""
    from .core import FormatError

    k: int | None = None
    states: tuple[str, ...] = ()
    initial: str | None = None
    finals: frozenset[str] = frozenset()
    moves: list[OcaTransition] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split(None, 1)
        kw = fields[0]
        rest = fields[1] if len(fields) > 1 else ""
        if kw == "oca":
            opts = dict(item.split("=", 1) for item in rest.split() if "=" in item)
            try:
                k = int(opts["k"])
            except (KeyError, ValueError):
                raise FormatError(f"line {lineno}: header needs k=<int>") from None
        elif kw == "states":
            states = tuple(rest.split())
        elif kw == "initial":
            initial = rest.strip()
        elif kw == "final":
            finals = frozenset(rest.split())
        elif kw == "trans":
            head, _, move = rest.partition(":")
            bits = head.split()
            if len(bits) != 3 or bits[1] != "->":
                raise FormatError(f"line {lineno}: expected 'trans <src> -> <dst> : <letter> <op>'")
            parts = move.split()
            if len(parts) != 2:
                raise FormatError(f"line {lineno}: expected '<letter|eps> <op>' after ':'")
            letter = None if parts[0] == "eps" else parts[0]
            op: int | str
            if parts[1] == ZTEST:
                op = ZTEST
            else:
                try:
                    op = int(parts[1])
                except ValueError:
                    raise FormatError(f"line {lineno}: bad counter op {parts[1]!r}") from None
            try:
                moves.append(OcaTransition(bits[0], letter, op, bits[2]))
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
        else:
            raise FormatError(f"line {lineno}: unknown keyword {kw!r}")
    if k is None:
        raise FormatError("missing 'oca k=..' header")
    if initial is None:
        raise FormatError("missing initial line")
    try:
        return OCA(k, states, tuple(moves), initial, finals)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def serialize_oca(oca: OCA) -> str:
    """Emit the .oca text format; parse(serialize(a)) == a."""
    lines = [f"oca k={oca.k}", "states " + " ".join(oca.states), f"initial {oca.initial}"]
    lines.append("final " + " ".join(sorted(oca.finals)))
    for t in oca.transitions:
        letter = t.letter if t.letter is not None else "eps"
        op = t.op if t.op == ZTEST else f"{t.op:+d}" if t.op else "0"
        lines.append(f"trans {t.src} -> {t.dst} : {letter} {op}")
    return "\n".join(lines) + "\n"
