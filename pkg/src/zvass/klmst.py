"""Decomposition-based reachability for chains of strongly connected parts.

A generalised system is a sequence of strongly connected fragments joined
by boundary edges.  Each boundary edge carries an update and a test that
pins selected nonnegative counters to exact values at the moment the edge
fires; a `w` entry leaves the counter unconstrained.  Queries over such
chains are decided recursively:

* an exact integer program over transition counts and boundary values
  rules out impossible queries (condition 1) and finds transitions fired
  a bounded number of times (condition 2) or boundary values bounded
  despite an unconstrained test entry (condition 3);
* a bounded exhaustive search hunts for value-raising cycles at fragment
  entries and value-lowering cycles at fragment exits (conditions 4, 5);
* queries passing every check are perfect: a concrete run is assembled
  from the program solution plus the pump cycles and validated by replay;
* violated queries split into child queries whose answers union exactly
  to the parent's, so all-NonReach children certify NonReach.

Descent is measured by (rank, open test entries), compared pointwise
lexicographically.  Every decomposition edge must shrink the measure and
conditions 2, 4 and 5 must shrink the rank itself; a failed descent check
raises AssertionError (it signals a bug, never bad input), except counter
stores that keep the rank, which are refused with CapExceeded.  Resource
caps always surface as CapExceeded or an "unknown" verdict, never as a
wrong answer.  All arithmetic is exact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import total_ordering
from itertools import product
from math import floor

from . import ilp
from .core import (
    Configuration,
    CounterLayout,
    FormatError,
    NNegViolation,
    ReachQuery,
    Transition,
    UpdateVector,
    WrongState,
    ZeroTestFailed,
    ZVassError,
    zero_update,
)
from .oracle import Bounds


class NotStronglyConnected(ZVassError):
    """Fragment offered where a strongly connected one is required."""


class CapExceeded(ZVassError):
    """A configured resource cap was hit; partial results are unusable."""


class NoHomogeneousDecomposition(ZVassError):
    """No homogeneous solution dominates the pump cycles of a perfect query.

    Perfectness guarantees one exists, so seeing this means a solver bug.
    """


class BoundaryTestFailed(ZVassError):
    """Boundary edge fired with counter values missing its test."""


class _Omega:
    __slots__ = ()

    def __repr__(self) -> str:
        return "w"


OMEGA = _Omega()


@dataclass(frozen=True)
class OmegaConfig:
    """Boundary test: one entry per nonnegative counter, a natural or OMEGA."""

    entries: tuple

    def __post_init__(self) -> None:
        for e in self.entries:
            if e is not OMEGA and not (isinstance(e, int) and e >= 0):
                raise ValueError(f"test entry {e!r} is neither a natural nor w")

    def is_omega(self, j: int) -> bool:
        return self.entries[j] is OMEGA

    @property
    def omega_count(self) -> int:
        return sum(1 for e in self.entries if e is OMEGA)

    def matches(self, nvals: tuple[int, ...]) -> bool:
        return all(e is OMEGA or v == e for v, e in zip(nvals, self.entries))

    def pinned(self, j: int, value: int) -> "OmegaConfig":
        entries = list(self.entries)
        entries[j] = value
        return OmegaConfig(tuple(entries))

    def __str__(self) -> str:
        return " ".join("w" if e is OMEGA else str(e) for e in self.entries)


def all_omega(d: int) -> OmegaConfig:
    return OmegaConfig((OMEGA,) * d)


@dataclass(frozen=True)
class Component:
    """Strongly connected fragment with designated entry and exit states.

    Transition ids are dense local indices.  Strong connectivity is checked
    when the fragment joins a GeneralisedZVass (and by cycle_space).
    """

    states: tuple[str, ...]
    transitions: tuple[Transition, ...]
    entry: str
    exit: str

    def __post_init__(self) -> None:
        members = set(self.states)
        if len(members) != len(self.states):
            raise ValueError("duplicate state ids in fragment")
        if self.entry not in members or self.exit not in members:
            raise ValueError("entry/exit must be member states")
        for n, t in enumerate(self.transitions):
            if t.tid != n:
                raise ValueError(f"local transition ids must be dense, got {t.tid} at {n}")
            if t.src not in members or t.dst not in members:
                raise ValueError(f"t{t.tid}: endpoint outside the fragment")


def _strongly_connected(component: Component) -> bool:
    fwd: dict[str, list[str]] = {q: [] for q in component.states}
    bwd: dict[str, list[str]] = {q: [] for q in component.states}
    for t in component.transitions:
        fwd[t.src].append(t.dst)
        bwd[t.dst].append(t.src)
    for adj in (fwd, bwd):
        seen = {component.states[0]}
        queue = deque(seen)
        while queue:
            for nxt in adj[queue.popleft()]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        if len(seen) != len(component.states):
            return False
    return True


@dataclass(frozen=True)
class BoundaryEdge:
    """Connecting edge between consecutive fragments.

    The test constrains the nonnegative counters of the source
    configuration; ztest optionally requires one integer counter to be
    exactly zero (such edges carry an all-zero update, like core
    zero-tests).
    """

    src: str
    dst: str
    update: UpdateVector
    test: OmegaConfig
    ztest: int | None = None

    def __post_init__(self) -> None:
        if self.ztest is not None and not self.update.is_zero():
            raise ValueError("boundary zero-test with nonzero update")


@dataclass(frozen=True)
class GeneralisedZVass:
    """Chain of strongly connected fragments joined by boundary edges."""

    layout: CounterLayout
    components: tuple[Component, ...]
    boundaries: tuple[BoundaryEdge, ...]
    encoding: str = "binary"

    def __post_init__(self) -> None:
        if self.encoding not in ("unary", "binary"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if len(self.boundaries) != len(self.components) - 1:
            raise ValueError("need exactly one boundary edge between consecutive fragments")
        seen: set[str] = set()
        for comp in self.components:
            for q in comp.states:
                if q in seen:
                    raise ValueError(f"state {q!r} appears in two fragments")
                seen.add(q)
            for t in comp.transitions:
                if len(t.update.entries) != self.layout.total:
                    raise ValueError(f"fragment transition t{t.tid}: update arity")
                if t.ztest is not None and not 1 <= t.ztest <= self.layout.total:
                    raise ValueError(f"fragment transition t{t.tid}: ztest index")
            if not _strongly_connected(comp):
                raise NotStronglyConnected(f"fragment {comp.states} is not strongly connected")
        for n, b in enumerate(self.boundaries):
            if b.src != self.components[n].exit or b.dst != self.components[n + 1].entry:
                raise ValueError(f"boundary {n} must join exit of fragment {n} to entry of fragment {n + 1}")
            if len(b.update.entries) != self.layout.total:
                raise ValueError(f"boundary {n}: update arity")
            if len(b.test.entries) != self.layout.d:
                raise ValueError(f"boundary {n}: test arity")
            if b.ztest is not None and not self.layout.d < b.ztest <= self.layout.total:
                raise ValueError(f"boundary {n}: ztest must name an integer counter")

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(q for comp in self.components for q in comp.states)


@dataclass(frozen=True)
class GenQuery:
    """Does source (at the first entry) reach target (at the last exit)?"""

    gv: GeneralisedZVass
    source: Configuration
    target: Configuration

    def __post_init__(self) -> None:
        lay = self.gv.layout
        if self.source.state != self.gv.components[0].entry:
            raise ValueError("source must sit at the entry of the first fragment")
        if self.target.state != self.gv.components[-1].exit:
            raise ValueError("target must sit at the exit of the last fragment")
        for c in (self.source, self.target):
            if len(c.nvals) != lay.d or len(c.zvals) != lay.k:
                raise ValueError("valuation length does not match layout")


@dataclass(frozen=True)
class GenTrace:
    """Validated run; steps name fragment transitions ("scc", fragment,
    local id) or boundary edges ("bnd", index, 0)."""

    configs: tuple[Configuration, ...]
    steps: tuple[tuple[str, int, int], ...]

    def __post_init__(self) -> None:
        if len(self.configs) != len(self.steps) + 1:
            raise ValueError("trace shape: |configs| must be |steps|+1")

    @property
    def source(self) -> Configuration:
        return self.configs[0]

    @property
    def target(self) -> Configuration:
        return self.configs[-1]

    def __len__(self) -> int:
        return len(self.steps)


def _apply(layout: CounterLayout, c: Configuration, dst: str, update: UpdateVector) -> Configuration:
    new = tuple(v + u for v, u in zip(c.values, update.entries))
    for n in range(layout.d):
        if new[n] < 0:
            raise NNegViolation(f"counter {n + 1} would become {new[n]}")
    return Configuration(dst, new[: layout.d], new[layout.d :])


def fire_step(query: GenQuery, c: Configuration, step: tuple[str, int, int]) -> Configuration:
    """Fire one trace step, raising the matching error on any violation."""
    kind, idx, lt = step
    gv = query.gv
    if kind == "scc":
        t = gv.components[idx].transitions[lt]
        if c.state != t.src:
            raise WrongState(f"fragment {idx} t{lt} expects {t.src}, at {c.state}")
        if t.ztest is not None and c.values[t.ztest - 1] != 0:
            raise ZeroTestFailed(f"fragment {idx} t{lt}: counter {t.ztest} is not 0")
        return _apply(gv.layout, c, t.dst, t.update)
    if kind == "bnd":
        b = gv.boundaries[idx]
        if c.state != b.src:
            raise WrongState(f"boundary {idx} expects {b.src}, at {c.state}")
        if not b.test.matches(c.nvals):
            raise BoundaryTestFailed(f"boundary {idx}: values {c.nvals} miss test ({b.test})")
        if b.ztest is not None and c.values[b.ztest - 1] != 0:
            raise ZeroTestFailed(f"boundary {idx}: counter {b.ztest} is not 0")
        return _apply(gv.layout, c, b.dst, b.update)
    raise ValueError(f"unknown step kind {kind!r}")


def replay_gen(query: GenQuery, steps) -> GenTrace:
    """Replay steps from the query source; errors name the failing step."""
    configs = [query.source]
    cur = query.source
    for n, step in enumerate(steps):
        try:
            cur = fire_step(query, cur, step)
        except ZVassError as exc:
            raise type(exc)(f"step {n}: {exc}") from None
        configs.append(cur)
    return GenTrace(tuple(configs), tuple(steps))


# -- text format -------------------------------------------------------------


def _parse_vals(text: str, layout: CounterLayout, lineno: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
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
        raise FormatError(f"line {lineno}: arity does not match d={layout.d} k={layout.k}")
    return nvals, zvals


def _parse_test_entries(text: str, d: int, lineno: int) -> OmegaConfig:
    tokens = text.split()
    if len(tokens) != d:
        raise FormatError(f"line {lineno}: test needs {d} entries")
    entries: list = []
    for tok in tokens:
        if tok == "w":
            entries.append(OMEGA)
            continue
        try:
            value = int(tok)
        except ValueError:
            raise FormatError(f"line {lineno}: bad test entry {tok!r}") from None
        if value < 0:
            raise FormatError(f"line {lineno}: test entries are naturals")
        entries.append(value)
    return OmegaConfig(tuple(entries))


def parse_generalised(text: str) -> GenQuery:
    """Parse the .gzvass format.

    Layout mirrors the plain format: a header, `scc` blocks with `states`,
    `trans` and `ztest` lines, `boundary` edges between blocks with
    optional `test <name> : <entries>` (w = unconstrained) and
    `ztest <name> : <integer counter>` lines, then `init` and `target`.
    """
    layout = None
    encoding = "binary"
    sccs: list[dict] = []
    bnames: list[str] = []
    bedges: list[dict] = []
    tests: dict[str, OmegaConfig] = {}
    bztests: dict[str, int] = {}
    init = target = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split(None, 1)
        kw, rest = fields[0], fields[1] if len(fields) > 1 else ""
        if kw == "gzvass":
            opts = dict(item.split("=", 1) for item in rest.split() if "=" in item)
            try:
                layout = CounterLayout(int(opts["d"]), int(opts["k"]))
            except (KeyError, ValueError):
                raise FormatError(f"line {lineno}: header needs d=<int> k=<int>") from None
            encoding = opts.get("encoding", "binary")
        elif kw == "scc":
            bits = rest.split()
            opts = dict(item.split("=", 1) for item in bits[1:] if "=" in item)
            if not bits or "entry" not in opts or "exit" not in opts:
                raise FormatError(f"line {lineno}: expected 'scc <name> entry=<state> exit=<state>'")
            sccs.append({"entry": opts["entry"], "exit": opts["exit"], "states": (), "trans": []})
        elif kw == "states":
            if not sccs:
                raise FormatError(f"line {lineno}: states outside an scc block")
            sccs[-1]["states"] = tuple(rest.split())
        elif kw in ("trans", "ztest") and "->" in rest:
            if layout is None:
                raise FormatError(f"line {lineno}: {kw} before the header")
            if not sccs:
                raise FormatError(f"line {lineno}: {kw} outside an scc block")
            head, _, values = rest.partition(":")
            bits = head.split()
            if len(bits) != 4 or bits[2] != "->":
                raise FormatError(f"line {lineno}: expected '{kw} <id> <src> -> <dst> : ...'")
            if kw == "trans":
                nvals, zvals = _parse_vals(values, layout, lineno)
                update, zt = UpdateVector(nvals + zvals), None
            else:
                try:
                    zt = int(values.strip())
                except ValueError:
                    raise FormatError(f"line {lineno}: ztest needs a counter index") from None
                update = zero_update(layout)
            trans = sccs[-1]["trans"]
            trans.append(Transition(len(trans), bits[1], bits[3], update, zt))
        elif kw == "boundary":
            if layout is None:
                raise FormatError(f"line {lineno}: boundary before the header")
            head, _, values = rest.partition(":")
            bits = head.split()
            if len(bits) != 4 or bits[2] != "->":
                raise FormatError(f"line {lineno}: expected 'boundary <id> <src> -> <dst> : ...'")
            if bits[0] in bnames:
                raise FormatError(f"line {lineno}: duplicate boundary {bits[0]!r}")
            nvals, zvals = _parse_vals(values, layout, lineno)
            bnames.append(bits[0])
            bedges.append({"src": bits[1], "dst": bits[3], "update": UpdateVector(nvals + zvals)})
        elif kw == "test":
            name, _, values = rest.partition(":")
            name = name.strip()
            if name not in bnames:
                raise FormatError(f"line {lineno}: test for unknown boundary {name!r}")
            tests[name] = _parse_test_entries(values.strip(), layout.d, lineno)
        elif kw == "ztest":
            name, _, values = rest.partition(":")
            name = name.strip()
            if name not in bnames:
                raise FormatError(f"line {lineno}: ztest for unknown boundary {name!r}")
            try:
                bztests[name] = int(values.strip())
            except ValueError:
                raise FormatError(f"line {lineno}: boundary ztest needs a counter index") from None
        elif kw in ("init", "target"):
            if layout is None:
                raise FormatError(f"line {lineno}: {kw} before the header")
            state, _, values = rest.partition(":")
            nvals, zvals = _parse_vals(values, layout, lineno)
            try:
                conf = Configuration(state.strip(), nvals, zvals)
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
            if kw == "init":
                init = conf
            else:
                target = conf
        else:
            raise FormatError(f"line {lineno}: unknown keyword {kw!r}")

    if layout is None:
        raise FormatError("missing 'gzvass d=.. k=..' header")
    if not sccs:
        raise FormatError("need at least one scc block")
    if init is None or target is None:
        raise FormatError("missing init or target line")
    try:
        comps = tuple(Component(s["states"], tuple(s["trans"]), s["entry"], s["exit"]) for s in sccs)
        bounds = tuple(
            BoundaryEdge(e["src"], e["dst"], e["update"], tests.get(n, all_omega(layout.d)), bztests.get(n))
            for n, e in zip(bnames, bedges)
        )
        return GenQuery(GeneralisedZVass(layout, comps, bounds, encoding), init, target)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def _format_vals(nvals, zvals) -> str:
    return " ".join(str(v) for v in nvals) + " ; " + " ".join(str(v) for v in zvals)


def serialize_generalised(query: GenQuery) -> str:
    """Emit the .gzvass format; parse_generalised(serialize_generalised(q)) == q."""
    gv = query.gv
    lay = gv.layout
    head = f"gzvass d={lay.d} k={lay.k}"
    if gv.encoding != "binary":
        head += f" encoding={gv.encoding}"
    lines = [head]
    for n, comp in enumerate(gv.components):
        lines.append(f"scc c{n} entry={comp.entry} exit={comp.exit}")
        lines.append("states " + " ".join(comp.states))
        for t in comp.transitions:
            if t.ztest is not None:
                lines.append(f"ztest t{t.tid} {t.src} -> {t.dst} : {t.ztest}")
            else:
                lines.append(
                    f"trans t{t.tid} {t.src} -> {t.dst} : "
                    + _format_vals(t.update.entries[: lay.d], t.update.entries[lay.d :])
                )
        if n < len(gv.boundaries):
            b = gv.boundaries[n]
            lines.append(
                f"boundary e{n + 1} {b.src} -> {b.dst} : "
                + _format_vals(b.update.entries[: lay.d], b.update.entries[lay.d :])
            )
            if b.test.omega_count != lay.d:
                lines.append(f"test e{n + 1} : {b.test}")
            if b.ztest is not None:
                lines.append(f"ztest e{n + 1} : {b.ztest}")
    lines.append(f"init {query.source.state} : " + _format_vals(query.source.nvals, query.source.zvals))
    lines.append(f"target {query.target.state} : " + _format_vals(query.target.nvals, query.target.zvals))
    return "\n".join(lines) + "\n"


# -- exact linear algebra ----------------------------------------------------


def _reduce_against(basis: list[tuple[list[Fraction], int]], vec) -> list[Fraction]:
    v = [Fraction(x) for x in vec]
    for row, piv in basis:
        if v[piv]:
            coef = v[piv]
            for n in range(piv, len(v)):
                v[n] -= coef * row[n]
    return v


def _row_basis(vectors) -> list[tuple[list[Fraction], int]]:
    """Echelon basis (rows normalized to pivot 1, sorted by pivot column)."""
    basis: list[tuple[list[Fraction], int]] = []
    for vec in vectors:
        v = _reduce_against(basis, vec)
        piv = next((n for n, x in enumerate(v) if x), None)
        if piv is None:
            continue
        inv = v[piv]
        basis.append(([x / inv for x in v], piv))
        basis.sort(key=lambda rp: rp[1])
    return basis


def _span_dim(vectors) -> int:
    return len(_row_basis(vectors))


def _nullspace(rows, n: int) -> list[list[Fraction]]:
    """Basis of {x in Q^n : rows @ x = 0}, one vector per free column."""
    basis = _row_basis(rows)
    pivots = {piv for _, piv in basis}
    out = []
    for free in (c for c in range(n) if c not in pivots):
        x = [Fraction(0)] * n
        x[free] = Fraction(1)
        for row, piv in reversed(basis):
            x[piv] = -sum(row[c] * x[c] for c in range(piv + 1, n))
        out.append(x)
    return out


def cycle_space(component: Component, layout: CounterLayout) -> tuple[tuple[Fraction, ...], ...]:
    """Basis for the span of closed-walk effects of a fragment.

    One fundamental closed walk per transition (root to its source, the
    transition, its target back to root); for a strongly connected
    fragment these span the effects of all closed walks.
    """
    if not _strongly_connected(component):
        raise NotStronglyConnected("cycle space needs a strongly connected fragment")
    if not component.transitions:
        return ()
    by_src: dict[str, list[Transition]] = {}
    by_dst: dict[str, list[Transition]] = {}
    for t in component.transitions:
        by_src.setdefault(t.src, []).append(t)
        by_dst.setdefault(t.dst, []).append(t)
    root = component.states[0]
    fwd = {root: [0] * layout.total}
    queue = deque([root])
    while queue:
        q = queue.popleft()
        for t in by_src.get(q, ()):
            if t.dst not in fwd:
                fwd[t.dst] = [a + b for a, b in zip(fwd[q], t.update.entries)]
                queue.append(t.dst)
    bwd = {root: [0] * layout.total}
    queue = deque([root])
    while queue:
        q = queue.popleft()
        for t in by_dst.get(q, ()):
            if t.src not in bwd:
                bwd[t.src] = [a + b for a, b in zip(t.update.entries, bwd[q])]
                queue.append(t.src)
    walks = [
        [f + u + b for f, u, b in zip(fwd[t.src], t.update.entries, bwd[t.dst])]
        for t in component.transitions
    ]
    return tuple(tuple(row) for row, _ in _row_basis(walks))


def in_cycle_space(component: Component, layout: CounterLayout, vector) -> bool:
    """Exact membership of a d+k vector in the fragment's cycle-effect span."""
    basis = _row_basis(cycle_space(component, layout))
    return not any(_reduce_against(basis, vector))


@total_ordering
@dataclass(frozen=True)
class Rank:
    """Descent measure: integer-space dimension first, then per-dimension
    state counts with larger dimensions weighing more."""

    dimZ: int
    rankN: tuple[int, ...]

    def key(self) -> tuple:
        return (self.dimZ, tuple(reversed(self.rankN)))

    def __lt__(self, other: "Rank") -> bool:
        return self.key() < other.key()


def rank(gv: GeneralisedZVass) -> Rank:
    """Extended rank of a chain.

    dimZ is the dimension of the joint span of cycle effects that vanish
    on every nonnegative counter; rankN[i] counts states whose fragment's
    cycle effects project to dimension i+1 on the nonnegative counters.
    """
    d = gv.layout.d
    counts = [0] * d
    z_vectors: list[list[Fraction]] = []
    for comp in gv.components:
        basis = [list(v) for v in cycle_space(comp, gv.layout)]
        ndim = _span_dim([v[:d] for v in basis]) if d else 0
        if ndim >= 1:
            counts[ndim - 1] += len(comp.states)
        nat_rows = [[basis[b][j] for b in range(len(basis))] for j in range(d)]
        for lam in _nullspace(nat_rows, len(basis)):
            z_vectors.append(
                [sum(lam[b] * basis[b][j] for b in range(len(basis))) for j in range(gv.layout.total)]
            )
    dimZ = _span_dim(z_vectors)
    assert dimZ <= gv.layout.k and all(c <= len(gv.states) for c in counts)
    return Rank(dimZ, tuple(counts))


def omega_count(gv: GeneralisedZVass) -> int:
    return sum(b.test.omega_count for b in gv.boundaries)


def measure(gv: GeneralisedZVass) -> tuple:
    """Lexicographic descent measure: (rank key, open test entries)."""
    return (rank(gv).key(), omega_count(gv))


# -- the count/value integer program -----------------------------------------


@dataclass(frozen=True)
class Caps:
    """Resource limits; hitting one yields CapExceeded or "unknown"."""

    ilp_budget: int = 200_000
    value_limit: int = 24
    pump_nodes: int = 50_000
    pump_clamp: int = 24
    word_limit: int = 10
    child_limit: int = 256
    node_limit: int = 2_000
    mcap: int = 8

    def __post_init__(self) -> None:
        caps = (
            self.ilp_budget, self.value_limit, self.pump_nodes, self.pump_clamp,
            self.word_limit, self.child_limit, self.node_limit, self.mcap,
        )
        if any(c < 0 for c in caps):
            raise ValueError("caps must be nonnegative")


@dataclass(frozen=True)
class IlpSystem:
    """Exact program approximating a query, with its variable map.

    Variables (all nonnegative): entry values x(i,j) for fragments 1..s,
    exit values y(i,j) for fragments 0..s-1, then one count per fragment
    transition.  contradiction marks constant equations that can never
    hold, making the program infeasible without solving.
    """

    program: ilp.IntProgram
    homogeneous: ilp.IntProgram
    s: int
    d: int
    e_offsets: tuple[int, ...]
    contradiction: bool = False

    @property
    def n_vars(self) -> int:
        return self.program.n_vars

    def x_var(self, i: int, j: int) -> int:
        if not 1 <= i <= self.s:
            raise IndexError("entry values are variables for fragments 1..s")
        return (i - 1) * self.d + j

    def y_var(self, i: int, j: int) -> int:
        if not 0 <= i < self.s:
            raise IndexError("exit values are variables for fragments 0..s-1")
        return self.s * self.d + i * self.d + j

    def e_var(self, i: int, lt: int) -> int:
        return self.e_offsets[i] + lt

    def solve(self, budget: int = 200_000) -> list[int] | None:
        if self.contradiction:
            return None
        if self.n_vars == 0:
            return []
        return ilp.ilp_feasible(self.program, budget)

    def var_unbounded(self, var: int, budget: int = 200_000) -> bool:
        if self.contradiction:
            return False
        return ilp.ilp_var_unbounded(self.program, var, budget)

    def bounded_values(self, var: int, limit: int = 24, budget: int = 200_000) -> list[int] | None:
        if self.contradiction:
            return []
        return ilp.ilp_bounded_values(self.program, var, limit, budget)


def build_ilp(query: GenQuery) -> IlpSystem:
    """Emit the relaxation: flow balance per state, exact effect on the
    integer counters globally and on nonnegative counters per fragment,
    boundary coupling, and one equality per pinned test entry.

    Every run induces a solution (zero-tests are relaxed away); the
    converse holds only for perfect queries.
    """
    gv = query.gv
    d, k = gv.layout.d, gv.layout.k
    comps, bounds = gv.components, gv.boundaries
    s = len(bounds)
    e_offsets = []
    n = 2 * s * d
    for comp in comps:
        e_offsets.append(n)
        n += len(comp.transitions)

    cons: list[tuple[dict[int, int], str, int]] = []
    homo: list[tuple[dict[int, int], str, int]] = []
    contradiction = False

    def x_of(i: int, j: int) -> int:
        return (i - 1) * d + j

    def y_of(i: int, j: int) -> int:
        return s * d + i * d + j

    def push(coeffs: dict[int, int], rhs: int) -> None:
        nonlocal contradiction
        coeffs = {v: c for v, c in coeffs.items() if c}
        if not coeffs:
            if rhs != 0:
                contradiction = True
            return
        cons.append((coeffs, ilp.EQ, rhs))
        homo.append((dict(coeffs), ilp.EQ, 0))

    for i, comp in enumerate(comps):
        base = e_offsets[i]
        # flow balance: in(q) - out(q) = [q is exit] - [q is entry]
        for q in comp.states:
            coeffs: dict[int, int] = {}
            for t in comp.transitions:
                if t.dst == q:
                    coeffs[base + t.tid] = coeffs.get(base + t.tid, 0) + 1
                if t.src == q:
                    coeffs[base + t.tid] = coeffs.get(base + t.tid, 0) - 1
            push(coeffs, (1 if q == comp.exit else 0) - (1 if q == comp.entry else 0))
        # exit = entry + counted effects, per nonnegative counter
        for j in range(d):
            coeffs = {}
            const = 0
            if i < s:
                coeffs[y_of(i, j)] = 1
            else:
                const += query.target.nvals[j]
            if i >= 1:
                coeffs[x_of(i, j)] = coeffs.get(x_of(i, j), 0) - 1
            else:
                const -= query.source.nvals[j]
            for t in comp.transitions:
                eff = t.update.entries[j]
                if eff:
                    coeffs[base + t.tid] = coeffs.get(base + t.tid, 0) - eff
            push(coeffs, -const)
    # global effect on each integer counter
    for j in range(k):
        coeffs = {}
        const = query.source.zvals[j]
        for i, comp in enumerate(comps):
            base = e_offsets[i]
            for t in comp.transitions:
                eff = t.update.entries[d + j]
                if eff:
                    coeffs[base + t.tid] = coeffs.get(base + t.tid, 0) + eff
        for b in bounds:
            const += b.update.entries[d + j]
        push(coeffs, query.target.zvals[j] - const)
    # boundary coupling and pinned tests
    for bi in range(1, s + 1):
        b = bounds[bi - 1]
        for j in range(d):
            push({x_of(bi, j): 1, y_of(bi - 1, j): -1}, b.update.entries[j])
        for j in range(d):
            if not b.test.is_omega(j):
                push({y_of(bi - 1, j): 1}, b.test.entries[j])

    lower = {v: 0 for v in range(n)}
    program = ilp.IntProgram.build(n, cons, lower=lower)
    homogeneous = ilp.IntProgram.build(n, homo, lower=dict(lower))
    return IlpSystem(program, homogeneous, s, d, tuple(e_offsets), contradiction)


# -- perfectness --------------------------------------------------------------


@dataclass(frozen=True)
class PumpCertificate:
    """Per fragment: raising cycle at the entry and lowering cycle at the
    exit as local transition id sequences; diffs (balancing cycles) are
    filled in by the run builder."""

    ups: tuple[tuple[int, ...], ...]
    dwns: tuple[tuple[int, ...], ...]
    diffs: tuple[tuple[int, ...], ...] | None = None


@dataclass(frozen=True)
class Perfect:
    """Query passed every check; solution is a witness assignment."""

    certificate: PumpCertificate
    solution: tuple[int, ...]


@dataclass(frozen=True)
class Violated:
    """One failed perfectness check.

    condition / evidence:
      1  ()                                    program infeasible
      2  ((fragment, local id, max count), ..) bounded transition counts
      3  (boundary, counter, values)           bounded value under an open test
      4  (fragment, counter, bound, observed)  no raising cycle at the entry
      5  (fragment, counter, bound, observed)  no lowering cycle at the exit
    observed lists (state, seen counter values) pairs from the exhaustive
    pump sweep.
    """

    condition: int
    evidence: tuple


@dataclass(frozen=True)
class Capped:
    """Check gave up on a resource cap; the verdict must stay unknown."""

    reason: str


def _pump_setup(query: GenQuery, i: int, forward: bool):
    """Anchor state, tracked counters and their start values for the pump
    sweep on fragment i."""
    gv = query.gv
    comp = gv.components[i]
    d = gv.layout.d
    s = len(gv.boundaries)
    if forward:
        if i == 0:
            return comp.entry, tuple(range(d)), dict(enumerate(query.source.nvals))
        b = gv.boundaries[i - 1]
        tracked = tuple(j for j in range(d) if not b.test.is_omega(j))
        return comp.entry, tracked, {j: b.test.entries[j] + b.update.entries[j] for j in tracked}
    if i == s:
        return comp.exit, tuple(range(d)), dict(enumerate(query.target.nvals))
    b = gv.boundaries[i]
    tracked = tuple(j for j in range(d) if not b.test.is_omega(j))
    return comp.exit, tracked, {j: b.test.entries[j] for j in tracked}


def _pump_search(query: GenQuery, i: int, forward: bool, caps: Caps):
    """Bounded breadth-first hunt for a strict pump cycle on fragment i.

    Returns ("found", cycle), ("absent", counter, bound, observed) or
    ("capped", reason).  Values are tracked exactly but recorded at most
    pump_clamp; recorded <= true, so found cycles are always real, and
    "absent" is reported only after an exhaustive sweep with no clamp
    event and no zero-test-gated edge skipped (then the observed sets are
    exact covers of every legal pass through the fragment).
    """
    gv = query.gv
    comp = gv.components[i]
    anchor, tracked, start_map = _pump_setup(query, i, forward)
    if not comp.transitions or not tracked:
        return ("found", ())
    start = tuple(start_map[j] for j in tracked)
    assert all(v >= 0 for v in start)
    if any(v >= caps.pump_clamp for v in start):
        return ("capped", f"fragment {i}: entry value at or above clamp {caps.pump_clamp}")
    pos = {j: p for p, j in enumerate(tracked)}
    gated_out = False
    edges_from: dict[str, list[tuple[int, str, tuple[int, ...], int | None]]] = {}
    for t in comp.transitions:
        gate = None
        if t.ztest is not None:
            jz = t.ztest - 1
            if jz in pos:
                gate = pos[jz]
            else:
                # test on an untracked counter: cannot model it here
                gated_out = True
                continue
        delta = tuple(t.update.entries[j] for j in tracked)
        if not forward:
            delta = tuple(-x for x in delta)
        src, dst = (t.src, t.dst) if forward else (t.dst, t.src)
        edges_from.setdefault(src, []).append((t.tid, dst, delta, gate))
    start_key = (anchor, start)
    parents: dict = {start_key: None}
    queue = deque([start_key])
    clamped = False
    nodes = 0
    while queue:
        key = queue.popleft()
        state, vals = key
        nodes += 1
        if nodes > caps.pump_nodes:
            return ("capped", f"fragment {i}: pump search budget exhausted")
        for lt, dst, delta, gate in edges_from.get(state, ()):
            # a zero-test gate on a tracked value is exact: clamping never
            # maps a positive value to 0
            if gate is not None and vals[gate] != 0:
                continue
            nv = [a + b for a, b in zip(vals, delta)]
            if any(x < 0 for x in nv):
                continue
            if any(x > caps.pump_clamp for x in nv):
                clamped = True
                nv = [min(x, caps.pump_clamp) for x in nv]
            nkey = (dst, tuple(nv))
            if nkey in parents:
                continue
            parents[nkey] = (key, lt)
            if dst == anchor and all(a >= b + 1 for a, b in zip(nv, start)):
                path = []
                cur = nkey
                while parents[cur] is not None:
                    cur, step = parents[cur]
                    path.append(step)
                if forward:
                    # collected back to front; backward sweeps un-fire, so
                    # their collection order is already the firing order
                    path.reverse()
                eff = [0] * len(tracked)
                for lt2 in path:
                    for p, j in enumerate(tracked):
                        eff[p] += comp.transitions[lt2].update.entries[j]
                assert all((x >= 1 if forward else x <= -1) for x in eff)
                return ("found", tuple(path))
            queue.append(nkey)
    if clamped:
        return ("capped", f"fragment {i}: pump values clamped at {caps.pump_clamp}")
    if gated_out:
        return ("capped", f"fragment {i}: zero-test outside the tracked counters")
    maxes = {j: 0 for j in tracked}
    for _, vals in parents:
        for j in tracked:
            maxes[j] = max(maxes[j], vals[pos[j]])
    j_star = min(tracked, key=lambda j: (maxes[j], j))
    observed = tuple(
        (q, tuple(sorted({vals[pos[j_star]] for st, vals in parents if st == q})))
        for q in comp.states
        if any(st == q for st, _ in parents)
    )
    return ("absent", j_star, maxes[j_star], observed)


def check_perfect(query: GenQuery, caps: Caps = Caps()):
    """Decide perfectness: solvable program, unbounded counts, unbounded
    open boundary values, raising and lowering cycles on every fragment.

    Returns Perfect, the first Violated condition (checked in order
    1, 2, 3, 4, 5), or Capped.
    """
    sys_ = build_ilp(query)
    try:
        base = sys_.solve(caps.ilp_budget)
        if base is None:
            return Violated(1, ())
        bounded: list[tuple[int, int, int]] = []
        for i, comp in enumerate(query.gv.components):
            for t in comp.transitions:
                var = sys_.e_var(i, t.tid)
                if sys_.var_unbounded(var, caps.ilp_budget):
                    continue
                status, value, _ = ilp.lp_solve(sys_.program, {var: 1}, sense="max")
                assert status == "optimal" and value is not None
                bounded.append((i, t.tid, floor(value)))
        if bounded:
            return Violated(2, tuple(bounded))
        for bi in range(1, sys_.s + 1):
            test = query.gv.boundaries[bi - 1].test
            for j in range(sys_.d):
                if not test.is_omega(j):
                    continue
                if sys_.var_unbounded(sys_.y_var(bi - 1, j), caps.ilp_budget):
                    continue
                values = sys_.bounded_values(sys_.y_var(bi - 1, j), caps.value_limit, caps.ilp_budget)
                assert values
                return Violated(3, (bi, j, tuple(values)))
    except ilp.IlpBudgetExceeded as exc:
        return Capped(f"integer program budget: {exc}")
    ups: list[tuple[int, ...]] = []
    dwns: list[tuple[int, ...]] = []
    for collector, forward, condition in ((ups, True, 4), (dwns, False, 5)):
        for i in range(len(query.gv.components)):
            res = _pump_search(query, i, forward, caps)
            if res[0] == "capped":
                return Capped(res[1])
            if res[0] == "absent":
                _, j, bound, observed = res
                return Violated(condition, (i, j, bound, observed))
            collector.append(res[1])
    return Perfect(PumpCertificate(tuple(ups), tuple(dwns)), tuple(base))


# -- graph renormalization ----------------------------------------------------


@dataclass(frozen=True)
class _GEdge:
    src: str
    dst: str
    update: UpdateVector
    ztest: int | None = None
    test: OmegaConfig | None = None


def _scc_partition(states, edges) -> tuple[dict[str, int], int]:
    """Iterative Tarjan; state -> block id, deterministic in input order."""
    adj: dict[str, list[str]] = {q: [] for q in states}
    for e in edges:
        adj[e.src].append(e.dst)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on: set[str] = set()
    stack: list[str] = []
    blocks: list[list[str]] = []
    counter = 0
    for root in states:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            q, ei = work[-1]
            if ei == 0:
                index[q] = low[q] = counter
                counter += 1
                stack.append(q)
                on.add(q)
            descended = False
            for p in range(ei, len(adj[q])):
                nxt = adj[q][p]
                if nxt not in index:
                    work[-1] = (q, p + 1)
                    work.append((nxt, 0))
                    descended = True
                    break
                if nxt in on:
                    low[q] = min(low[q], index[nxt])
            if descended:
                continue
            if low[q] == index[q]:
                group = []
                while True:
                    m = stack.pop()
                    on.discard(m)
                    group.append(m)
                    if m == q:
                        break
                blocks.append(group)
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[q])
    comp_of = {q: cid for cid, group in enumerate(blocks) for q in group}
    return comp_of, len(blocks)


def _graph_to_sequences(layout, states, edges, source_state, target_state, cap):
    """Split a flat test-annotated graph into fragment chains.

    Enumerates every directed path of strongly connected blocks from the
    source block to the target block together with every choice of
    connecting edge per hop; each choice yields one (components,
    boundaries) pair.  A run determines exactly one choice, so the chains
    partition the runs.
    """
    comp_of, nblocks = _scc_partition(states, edges)
    members: list[list[str]] = [[] for _ in range(nblocks)]
    for q in states:
        members[comp_of[q]].append(q)
    internal: list[list[_GEdge]] = [[] for _ in range(nblocks)]
    crossing: list[tuple[int, int, _GEdge]] = []
    for e in edges:
        a, b = comp_of[e.src], comp_of[e.dst]
        if a == b:
            assert e.test is None, "test edge inside a strongly connected block"
            internal[a].append(e)
        else:
            crossing.append((a, b, e))
    adjacency: dict[int, list[tuple[int, int]]] = {}
    for n, (a, b, _) in enumerate(crossing):
        adjacency.setdefault(a, []).append((n, b))
    src_c, tgt_c = comp_of[source_state], comp_of[target_state]
    paths: list[tuple[int, ...]] = []
    stack: list[tuple[int, tuple[int, ...]]] = [(src_c, ())]
    while stack:
        cid, path = stack.pop()
        if cid == tgt_c:
            # block paths form a DAG: once past the target block a path
            # can never come back, so stop extending here
            paths.append(path)
            if len(paths) > cap:
                raise CapExceeded(f"more than {cap} fragment chains")
            continue
        for n, nxt in reversed(adjacency.get(cid, ())):
            stack.append((nxt, path + (n,)))
    out = []
    for path in paths:
        chain = [src_c] + [crossing[n][1] for n in path]
        entries = [source_state] + [crossing[n][2].dst for n in path]
        exits = [crossing[n][2].src for n in path] + [target_state]
        comps = tuple(
            Component(
                tuple(members[cid]),
                tuple(
                    Transition(n2, e.src, e.dst, e.update, e.ztest)
                    for n2, e in enumerate(internal[cid])
                ),
                entry,
                exit_,
            )
            for cid, entry, exit_ in zip(chain, entries, exits)
        )
        bnds = []
        dead = False
        for n in path:
            e = crossing[n][2]
            test = e.test if e.test is not None else all_omega(layout.d)
            ztest = e.ztest
            if ztest is not None and ztest <= layout.d:
                # a crossing zero-test on a nonnegative counter is exactly
                # a pinned test entry
                j = ztest - 1
                if not test.is_omega(j) and test.entries[j] != 0:
                    dead = True
                    break
                test = test.pinned(j, 0)
                ztest = None
            bnds.append(BoundaryEdge(e.src, e.dst, e.update, test, ztest))
        if not dead:
            out.append((comps, tuple(bnds)))
    return out


def normalize(query: ReachQuery, cap: int = 256) -> list[GenQuery]:
    """Split a plain instance into fragment chains; answers union exactly."""
    system = query.system
    edges = [_GEdge(t.src, t.dst, t.update, t.ztest, None) for t in system.transitions]
    seqs = _graph_to_sequences(
        system.layout, system.states, edges, query.source.state, query.target.state, cap
    )
    return [
        GenQuery(GeneralisedZVass(system.layout, comps, bnds, system.encoding), query.source, query.target)
        for comps, bnds in seqs
    ]


# -- decomposition ------------------------------------------------------------


def _multiset_words(counts: dict[int, int], limit: int) -> list[tuple[int, ...]]:
    """Distinct arrangements of the multiset {lt: count}; capped."""
    items = sorted(lt for lt, n in counts.items() for _ in range(n))
    out: list[tuple[int, ...]] = []

    def grow(remaining: list[int], prefix: list[int]) -> None:
        if not remaining:
            out.append(tuple(prefix))
            if len(out) > limit:
                raise CapExceeded(f"more than {limit} unroll words")
            return
        prev = None
        for n, lt in enumerate(remaining):
            if lt == prev:
                continue
            prev = lt
            grow(remaining[:n] + remaining[n + 1 :], prefix + [lt])

    grow(items, [])
    return out


def _pin_boundary_value(query: GenQuery, violation: Violated) -> list[GenQuery]:
    bi, j, values = violation.evidence
    gv = query.gv
    out = []
    for value in values:
        edge = gv.boundaries[bi - 1]
        pinned = replace(edge, test=edge.test.pinned(j, value))
        bnds = gv.boundaries[: bi - 1] + (pinned,) + gv.boundaries[bi:]
        out.append(GenQuery(replace(gv, boundaries=bnds), query.source, query.target))
    return out


def _unroll_bounded(query: GenQuery, violation: Violated, caps: Caps) -> list[GenQuery]:
    """Remove every bounded transition, unrolling each affected fragment
    into chained copies spliced by one arrangement of the removed firings."""
    gv = query.gv
    sys_ = build_ilp(query)
    bounded = [(i, lt) for i, lt, _ in violation.evidence]
    value_sets = []
    for i, lt in bounded:
        vals = ilp.ilp_bounded_values(sys_.program, sys_.e_var(i, lt), caps.value_limit, caps.ilp_budget)
        assert vals, "a bounded count admits at least one value on a feasible program"
        value_sets.append(vals)
    combos = 1
    for vals in value_sets:
        combos *= len(vals)
        if combos > caps.child_limit:
            raise CapExceeded(f"more than {caps.child_limit} count combinations")
    children: list[GenQuery] = []
    for combo in product(*value_sets):
        pinned = sys_.program
        for (i, lt), v in zip(bounded, combo):
            pinned = pinned.with_constraint({sys_.e_var(i, lt): 1}, ilp.EQ, v)
        if ilp.ilp_feasible(pinned, caps.ilp_budget) is None:
            continue
        counts: dict[int, dict[int, int]] = {}
        for (i, lt), v in zip(bounded, combo):
            counts.setdefault(i, {})[lt] = v
        word_options = []
        for i in sorted(counts):
            total = sum(counts[i].values())
            if total > caps.word_limit:
                raise CapExceeded(f"fragment {i}: unroll word longer than {caps.word_limit}")
            word_options.append((i, _multiset_words(counts[i], caps.child_limit)))
        for choice in product(*(opts for _, opts in word_options)):
            words = {i: w for (i, _), w in zip(word_options, choice)}
            children.extend(_rebuild_unrolled(query, counts, words, caps))
            if len(children) > caps.child_limit:
                raise CapExceeded(f"more than {caps.child_limit} children")
    return children


def _rebuild_unrolled(query: GenQuery, counts, words, caps: Caps) -> list[GenQuery]:
    gv = query.gv
    lay = gv.layout
    states: list[str] = []
    edges: list[_GEdge] = []
    for i, comp in enumerate(gv.components):
        if i not in words:
            states.extend(comp.states)
            edges.extend(_GEdge(t.src, t.dst, t.update, t.ztest, None) for t in comp.transitions)
            continue
        removed = set(counts[i])
        for c in range(len(words[i]) + 1):
            states.extend(f"{q}~{c}" for q in comp.states)
            edges.extend(
                _GEdge(f"{t.src}~{c}", f"{t.dst}~{c}", t.update, t.ztest, None)
                for t in comp.transitions
                if t.tid not in removed
            )
        for c, lt in enumerate(words[i]):
            t = comp.transitions[lt]
            if t.ztest is not None and t.ztest <= lay.d:
                test = all_omega(lay.d).pinned(t.ztest - 1, 0)
                edges.append(_GEdge(f"{t.src}~{c}", f"{t.dst}~{c + 1}", t.update, None, test))
            else:
                edges.append(_GEdge(f"{t.src}~{c}", f"{t.dst}~{c + 1}", t.update, t.ztest, None))
    for bi, b in enumerate(gv.boundaries):
        src = f"{b.src}~{len(words[bi])}" if bi in words else b.src
        dst = f"{b.dst}~0" if bi + 1 in words else b.dst
        edges.append(_GEdge(src, dst, b.update, b.ztest, b.test))
    source_state = f"{query.source.state}~0" if 0 in words else query.source.state
    last = len(gv.components) - 1
    target_state = f"{query.target.state}~{len(words[last])}" if last in words else query.target.state
    seqs = _graph_to_sequences(lay, tuple(states), edges, source_state, target_state, caps.child_limit)
    out = []
    for comps, bnds in seqs:
        child = GeneralisedZVass(lay, comps, bnds, gv.encoding)
        out.append(
            GenQuery(
                child,
                Configuration(source_state, query.source.nvals, query.source.zvals),
                Configuration(target_state, query.target.nvals, query.target.zvals),
            )
        )
    return out


def _store_counter(query: GenQuery, violation: Violated, caps: Caps) -> list[GenQuery]:
    """Store one provably bounded counter of a fragment into its control
    states, fanning out over the observed entry/exit values and pinning
    the adjacent open tests accordingly.

    The observed sets come from an exhaustive pump sweep, so the children
    union exactly to the parent; an unobserved required value yields no
    child for it (that value is simply unreachable).
    """
    forward = violation.condition == 4
    i, j, _, observed = violation.evidence
    gv = query.gv
    lay = gv.layout
    comp = gv.components[i]
    s = len(gv.boundaries)
    obs = {q: set(vals) for q, vals in observed}

    if i == 0:
        entry_vals, entry_pin = [query.source.nvals[j]], False
    elif gv.boundaries[i - 1].test.is_omega(j):
        entry_vals, entry_pin = sorted(obs.get(comp.entry, ())), True
    else:
        b = gv.boundaries[i - 1]
        entry_vals, entry_pin = [b.test.entries[j] + b.update.entries[j]], False
    if i == s:
        exit_vals, exit_pin = [query.target.nvals[j]], False
    elif gv.boundaries[i].test.is_omega(j):
        exit_vals, exit_pin = sorted(obs.get(comp.exit, ())), True
    else:
        exit_vals, exit_pin = [gv.boundaries[i].test.entries[j]], False

    children: list[GenQuery] = []
    for ev in entry_vals:
        if ev not in obs.get(comp.entry, ()):
            continue
        if entry_pin and ev - gv.boundaries[i - 1].update.entries[j] < 0:
            continue
        for xv in exit_vals:
            if xv not in obs.get(comp.exit, ()):
                continue
            states: list[str] = []
            edges: list[_GEdge] = []
            for i2, comp2 in enumerate(gv.components):
                if i2 != i:
                    states.extend(comp2.states)
                    edges.extend(_GEdge(t.src, t.dst, t.update, t.ztest, None) for t in comp2.transitions)
                    continue
                for q in comp2.states:
                    states.extend(f"{q}@{c}" for c in sorted(obs.get(q, ())))
                for t in comp2.transitions:
                    delta = t.update.entries[j]
                    for c in sorted(obs.get(t.src, ())):
                        if t.ztest is not None and t.ztest - 1 == j and c != 0:
                            continue
                        if c + delta in obs.get(t.dst, ()):
                            edges.append(
                                _GEdge(f"{t.src}@{c}", f"{t.dst}@{c + delta}", t.update, t.ztest, None)
                            )
            for bi, b in enumerate(gv.boundaries):
                src = f"{b.src}@{xv}" if bi == i else b.src
                dst = f"{b.dst}@{ev}" if bi == i - 1 else b.dst
                test = b.test
                if bi == i - 1 and entry_pin:
                    test = test.pinned(j, ev - b.update.entries[j])
                if bi == i and exit_pin:
                    test = test.pinned(j, xv)
                edges.append(_GEdge(src, dst, b.update, b.ztest, test))
            source_state = f"{query.source.state}@{ev}" if i == 0 else query.source.state
            target_state = f"{query.target.state}@{xv}" if i == s else query.target.state
            seqs = _graph_to_sequences(lay, tuple(states), edges, source_state, target_state, caps.child_limit)
            for comps, bnds in seqs:
                child = GeneralisedZVass(lay, comps, bnds, gv.encoding)
                children.append(
                    GenQuery(
                        child,
                        Configuration(source_state, query.source.nvals, query.source.zvals),
                        Configuration(target_state, query.target.nvals, query.target.zvals),
                    )
                )
                if len(children) > caps.child_limit:
                    raise CapExceeded(f"more than {caps.child_limit} children")
    return children


def decompose(query: GenQuery, violation: Violated, caps: Caps = Caps()) -> list[GenQuery]:
    """Split a violated query into children whose answers union exactly.

    Condition 1 yields no children (nothing is reachable).  Children must
    strictly shrink the descent measure; conditions 2, 4 and 5 must shrink
    the rank itself.  Counter stores that keep the rank are refused with
    CapExceeded; any other descent failure is an AssertionError.
    """
    if violation.condition == 1:
        return []
    if violation.condition == 2:
        children = _unroll_bounded(query, violation, caps)
    elif violation.condition == 3:
        children = _pin_boundary_value(query, violation)
    elif violation.condition in (4, 5):
        children = _store_counter(query, violation, caps)
    else:
        raise ValueError(f"unknown condition {violation.condition}")
    parent_rank = rank(query.gv)
    parent_measure = measure(query.gv)
    for child in children:
        child_rank = rank(child.gv)
        if violation.condition in (4, 5) and not child_rank < parent_rank:
            raise CapExceeded(f"counter store keeps rank {child_rank}; refusing the decomposition")
        if violation.condition == 2:
            assert child_rank < parent_rank, "bounded-count unrolling must shrink the rank"
        if violation.condition == 3:
            assert child_rank == parent_rank, "pinning a test cannot change cycle spaces"
        assert measure(child.gv) < parent_measure, "decomposition must shrink the measure"
    return children


# -- run construction ----------------------------------------------------------


def _try_euler_walk(comp: Component, counts: dict[int, int], start: str, end: str) -> tuple[int, ...] | None:
    """Walk start -> end using transition lt exactly counts[lt] times
    (Hierholzer, ascending local ids), or None when the counts are not
    realizable as one walk (disconnected support)."""
    total = sum(counts.values())
    if total == 0:
        return () if start == end else None
    pools: dict[str, list[int]] = {}
    for t in comp.transitions:
        for _ in range(counts.get(t.tid, 0)):
            pools.setdefault(t.src, []).append(t.tid)
    for pool in pools.values():
        pool.reverse()
    walk: list[int] = []
    stack: list[tuple[str, int | None]] = [(start, None)]
    while stack:
        state, via = stack[-1]
        pool = pools.get(state)
        if pool:
            lt = pool.pop()
            stack.append((comp.transitions[lt].dst, lt))
        else:
            stack.pop()
            if via is not None:
                walk.append(via)
    walk.reverse()
    if len(walk) != total:
        return None
    if comp.transitions[walk[0]].src != start or comp.transitions[walk[-1]].dst != end:
        return None
    return tuple(walk)


def _euler_walk(comp: Component, counts: dict[int, int], start: str, end: str) -> tuple[int, ...]:
    walk = _try_euler_walk(comp, counts, start, end)
    assert walk is not None, "unbalanced or disconnected walk counts"
    return walk


def run_from_perfect(query: GenQuery, certificate: PumpCertificate, mcap: int = 8, caps: Caps = Caps()) -> GenTrace | None:
    """Assemble and validate a run for a perfect query.

    The minimal candidate realizes the program solution alone; after it,
    for m = 0..mcap, each fragment fires raising^m, an exact walk
    realizing the solution plus a dominating homogeneous solution,
    balancing^m, lowering^m; boundary edges join the fragments.  The first
    candidate that replays is returned; None when all of them fail."""
    gv = query.gv
    comps = gv.components
    s = len(gv.boundaries)
    sys_ = build_ilp(query)
    base = sys_.solve(caps.ilp_budget)
    if base is None:
        raise ValueError("query is not perfect: its program is infeasible")
    base_walks = [
        _try_euler_walk(
            comp,
            {t.tid: base[sys_.e_var(i, t.tid)] for t in comp.transitions},
            comp.entry,
            comp.exit,
        )
        for i, comp in enumerate(comps)
    ]
    if all(w is not None for w in base_walks):
        steps = []
        for i, walk in enumerate(base_walks):
            steps.extend(("scc", i, lt) for lt in walk)
            if i < s:
                steps.append(("bnd", i, 0))
        try:
            trace = replay_gen(query, steps)
            assert trace.target == query.target, "solution arithmetic must land on the target"
            return trace
        except (NNegViolation, ZeroTestFailed, BoundaryTestFailed):
            pass
    hprog = sys_.homogeneous
    for i, comp in enumerate(comps):
        for t in comp.transitions:
            # full support plus room to carve out the pump cycles
            need = certificate.ups[i].count(t.tid) + certificate.dwns[i].count(t.tid) + 1
            hprog = hprog.with_bound(sys_.e_var(i, t.tid), lo=need)
    for bi in range(1, s + 1):
        test = gv.boundaries[bi - 1].test
        for j in range(sys_.d):
            if test.is_omega(j):
                hprog = hprog.with_bound(sys_.y_var(bi - 1, j), lo=1)
    h = [] if sys_.n_vars == 0 else ilp.ilp_feasible(hprog, caps.ilp_budget)
    if h is None:
        raise NoHomogeneousDecomposition("no homogeneous solution dominates the pump cycles")
    walks = []
    diffs = []
    for i, comp in enumerate(comps):
        counts = {t.tid: base[sys_.e_var(i, t.tid)] + h[sys_.e_var(i, t.tid)] for t in comp.transitions}
        walks.append(_euler_walk(comp, counts, comp.entry, comp.exit))
        dcounts = {}
        for t in comp.transitions:
            dcounts[t.tid] = (
                h[sys_.e_var(i, t.tid)]
                - certificate.ups[i].count(t.tid)
                - certificate.dwns[i].count(t.tid)
            )
            assert dcounts[t.tid] >= 0
        diffs.append(_euler_walk(comp, dcounts, comp.exit, comp.exit))
    cert = replace(certificate, diffs=tuple(diffs))
    for m in range(mcap + 1):
        steps: list[tuple[str, int, int]] = []
        for i in range(len(comps)):
            for _ in range(m):
                steps.extend(("scc", i, lt) for lt in cert.ups[i])
            steps.extend(("scc", i, lt) for lt in walks[i])
            for _ in range(m):
                steps.extend(("scc", i, lt) for lt in cert.diffs[i])
            for _ in range(m):
                steps.extend(("scc", i, lt) for lt in cert.dwns[i])
            if i < s:
                steps.append(("bnd", i, 0))
        try:
            trace = replay_gen(query, steps)
        except (NNegViolation, ZeroTestFailed, BoundaryTestFailed):
            continue
        assert trace.target == query.target, "solution arithmetic must land on the target"
        return trace
    return None


# -- bounded oracle ------------------------------------------------------------


def gen_bounded_reach(query: GenQuery, bounds: Bounds, node_cap: int | None = None) -> str:
    """Exhaustive bounded verdict, "reachable" or "not-within-bounds".

    Brute force over configurations within bounds, up to lmax steps; the
    independent cross-check for the decision procedure."""
    gv = query.gv

    def within(c: Configuration) -> bool:
        return all(v <= bounds.nmax for v in c.nvals) and all(abs(v) <= bounds.zabs for v in c.zvals)

    if not within(query.source) or not within(query.target):
        raise ValueError("source or target outside the bounds")
    steps_from: dict[str, list[tuple[str, int, int]]] = {}
    for i, comp in enumerate(gv.components):
        for t in comp.transitions:
            steps_from.setdefault(t.src, []).append(("scc", i, t.tid))
    for bi, b in enumerate(gv.boundaries):
        steps_from.setdefault(b.src, []).append(("bnd", bi, 0))
    seen = {query.source}
    frontier = [query.source]
    for _ in range(bounds.lmax):
        if query.target in seen:
            return "reachable"
        layer: list[Configuration] = []
        for c in frontier:
            for step in steps_from.get(c.state, ()):
                try:
                    c2 = fire_step(query, c, step)
                except ZVassError:
                    continue
                if c2 in seen or not within(c2):
                    continue
                seen.add(c2)
                layer.append(c2)
                if node_cap is not None and len(seen) > node_cap:
                    raise CapExceeded(f"beyond {node_cap} configurations")
        if not layer:
            break
        frontier = layer
    return "reachable" if query.target in seen else "not-within-bounds"


# -- the decision procedure ----------------------------------------------------


REACH = "reach"
NONREACH = "nonreach"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    """Outcome of the decision procedure.

    "reach" carries a trace replaying on witness_query (the fragment chain
    it was found in); "unknown" carries a cap report; the tree records
    rank, open test entries and the action taken at every explored node.
    """

    kind: str
    trace: GenTrace | None = None
    witness_query: GenQuery | None = None
    report: str = ""
    tree: dict | None = None


def _combine(kinds) -> str:
    if REACH in kinds:
        return REACH
    if UNKNOWN in kinds:
        return UNKNOWN
    return NONREACH


class _Budget:
    __slots__ = ("left",)

    def __init__(self, n: int) -> None:
        self.left = n

    def spend(self) -> None:
        self.left -= 1
        if self.left < 0:
            raise CapExceeded("decision tree node budget exhausted")


def _decide(gq: GenQuery, caps: Caps, budget: _Budget):
    budget.spend()
    r = rank(gq.gv)
    node: dict = {
        "rank": [r.dimZ, list(r.rankN)],
        "omega": omega_count(gq.gv),
        "states": len(gq.gv.states),
        "action": "",
        "children": [],
    }
    res = check_perfect(gq, caps)
    if isinstance(res, Capped):
        node["action"] = f"capped: {res.reason}"
        node["verdict"] = UNKNOWN
        return UNKNOWN, None, None, node
    if isinstance(res, Perfect):
        node["action"] = "perfect"
        run = run_from_perfect(gq, res.certificate, caps.mcap, caps)
        if run is None:
            node["action"] = f"perfect, no replay within m={caps.mcap}"
            node["verdict"] = UNKNOWN
            return UNKNOWN, None, None, node
        node["verdict"] = REACH
        return REACH, run, gq, node
    node["action"] = f"violated-{res.condition}"
    parent_measure = measure(gq.gv)
    try:
        children = decompose(gq, res, caps)
    except (CapExceeded, ilp.IlpBudgetExceeded) as exc:
        node["action"] += f"; capped: {exc}"
        node["verdict"] = UNKNOWN
        return UNKNOWN, None, None, node
    kinds = []
    for child in children:
        assert measure(child.gv) < parent_measure, "child must shrink the descent measure"
        kind, run, witness, cnode = _decide(child, caps, budget)
        kinds.append(kind)
        node["children"].append(cnode)
        if kind == REACH:
            node["verdict"] = REACH
            return REACH, run, witness, node
    verdict = _combine(kinds)
    node["verdict"] = verdict
    return verdict, None, None, node


def klmst_decide(query, caps: Caps = Caps()) -> Verdict:
    """Decide reachability for a plain or generalised query.

    Plain queries are first split into fragment chains.  Verdicts combine
    as Reach > Unknown > NonReach: one witness settles Reach (search stops
    there), NonReach needs every chain closed, and any cap breach keeps
    the affected chain unknown.  Descent violations raise AssertionError.
    """
    budget = _Budget(caps.node_limit)
    if isinstance(query, GenQuery):
        sequences = [query]
    else:
        try:
            sequences = normalize(query, caps.child_limit)
        except CapExceeded as exc:
            return Verdict(UNKNOWN, report=str(exc), tree={"sequences": [], "capped": str(exc)})
    roots: list[dict] = []
    kinds: list[str] = []
    trace = witness = None
    report = ""
    for gq in sequences:
        try:
            kind, run, wq, node = _decide(gq, caps, budget)
        except (CapExceeded, ilp.IlpBudgetExceeded) as exc:
            kinds.append(UNKNOWN)
            roots.append({"action": f"capped: {exc}", "children": [], "verdict": UNKNOWN})
            report = report or str(exc)
            continue
        kinds.append(kind)
        roots.append(node)
        if kind == REACH:
            trace, witness = run, wq
            break
    verdict = _combine(kinds) if kinds else NONREACH
    if verdict != UNKNOWN:
        report = ""
    return Verdict(verdict, trace, witness, report, {"sequences": roots})
