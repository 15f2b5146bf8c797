"""Counter-program DSL, gadget library, compilers, and verification harness.

Programs operate on named counters tagged nat or int. They compile to two
backends: plain systems where zero-tests are lowered to shadow integer
counters checked at the target (zvass), and counter automata with native
zero-test transitions (ca). A direct small-step interpreter provides an
independent route for cross-checking compiled behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import count

from .core import (
    Configuration,
    CounterLayout,
    FormatError,
    Transition,
    UpdateVector,
    ZVass,
    ZVassError,
)
from . import core
from . import oracle


class UndeclaredCounter(ZVassError):
    """An instruction references a counter missing from the declarations."""


class ShadowTestInsideLoop(ZVassError):
    """Shadow zero-tests are only valid at positions outside cycles."""


class UnknownMacro(ZVassError):
    pass


class ArityMismatch(ZVassError):
    pass


class BNotDivisibleBy8(ZVassError):
    pass


class ScriptRejected(ZVassError):
    """A scripted run violated nonnegativity or failed a zero-test."""


NAT = "nat"
INT = "int"
SHADOW = "shadow"
NATIVE = "native"


@dataclass(frozen=True)
class Decl:
    name: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (NAT, INT):
            raise ValueError(f"counter kind must be nat or int, got {self.kind!r}")


@dataclass(frozen=True)
class Add:
    counter: str
    amount: int

    def __post_init__(self) -> None:
        if self.amount <= 0:
            raise ValueError("amount must be positive")


@dataclass(frozen=True)
class Sub:
    counter: str
    amount: int

    def __post_init__(self) -> None:
        if self.amount <= 0:
            raise ValueError("amount must be positive")


@dataclass(frozen=True)
class Transfer:
    """Decrement source by one, increment every target by one."""

    source: str
    targets: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("transfer needs at least one target")


@dataclass(frozen=True)
class Loop:
    """Nondeterministically repeat the body zero or more times."""

    body: tuple


@dataclass(frozen=True)
class ZeroTest:
    counter: str
    mode: str = NATIVE

    def __post_init__(self) -> None:
        if self.mode not in (SHADOW, NATIVE):
            raise ValueError(f"mode must be shadow or native, got {self.mode!r}")


@dataclass(frozen=True)
class GuessResidue:
    """Fan out into range-1 branches; branch index i carries residue i+1.

    The guessed residue appears as literal constants inside its branch, which
    is why each branch carries the full instruction sequence using it.
    """

    range_: int
    branches: tuple

    def __post_init__(self) -> None:
        if self.range_ < 2:
            raise ValueError("range must be at least 2")
        if len(self.branches) != self.range_ - 1:
            raise ValueError("need exactly range-1 branches")


@dataclass(frozen=True)
class For:
    """Compile-time unrolling; $var in counter names becomes the index."""

    var: str
    lo: int
    hi: int
    body: tuple


@dataclass(frozen=True)
class MacroCall:
    name: str
    args: tuple


Instruction = (Add, Sub, Transfer, Loop, ZeroTest, GuessResidue, For, MacroCall)


@dataclass(frozen=True)
class CounterProgram:
    decls: tuple[Decl, ...]
    body: tuple

    def __post_init__(self) -> None:
        names = [d.name for d in self.decls]
        if len(set(names)) != len(names):
            raise ValueError("duplicate counter declaration")

    def kind_of(self, name: str) -> str:
        for d in self.decls:
            if d.name == name:
                return d.kind
        raise UndeclaredCounter(name)


def _subst(name: str, var: str, value: int) -> str:
    return name.replace(f"${var}", str(value))


def _subst_instr(ins, var: str, value: int):
    if isinstance(ins, Add):
        return Add(_subst(ins.counter, var, value), ins.amount)
    if isinstance(ins, Sub):
        return Sub(_subst(ins.counter, var, value), ins.amount)
    if isinstance(ins, Transfer):
        return Transfer(
            _subst(ins.source, var, value),
            tuple(_subst(t, var, value) for t in ins.targets),
        )
    if isinstance(ins, Loop):
        return Loop(tuple(_subst_instr(i, var, value) for i in ins.body))
    if isinstance(ins, ZeroTest):
        return ZeroTest(_subst(ins.counter, var, value), ins.mode)
    if isinstance(ins, GuessResidue):
        return GuessResidue(
            ins.range_,
            tuple(
                tuple(_subst_instr(i, var, value) for i in br) for br in ins.branches
            ),
        )
    if isinstance(ins, For):
        return For(
            ins.var, ins.lo, ins.hi, tuple(_subst_instr(i, var, value) for i in ins.body)
        )
    if isinstance(ins, MacroCall):
        return MacroCall(
            ins.name,
            tuple(_subst(a, var, value) if isinstance(a, str) else a for a in ins.args),
        )
    raise TypeError(f"unknown instruction {ins!r}")


def _expand_seq(body, fresh) -> tuple[tuple, list[Decl]]:
    """Resolve For and MacroCall nodes; returns (instructions, aux decls)."""
    out: list = []
    aux: list[Decl] = []
    for ins in body:
        if isinstance(ins, For):
            for i in range(ins.lo, ins.hi + 1):
                sub_body = tuple(_subst_instr(b, ins.var, i) for b in ins.body)
                inner, decls = _expand_seq(sub_body, fresh)
                out.extend(inner)
                aux.extend(decls)
        elif isinstance(ins, MacroCall):
            instrs, decls = _expand_macro_impl(ins.name, ins.args, fresh)
            inner, more = _expand_seq(instrs, fresh)
            out.extend(inner)
            aux.extend(decls)
            aux.extend(more)
        elif isinstance(ins, Loop):
            inner, decls = _expand_seq(ins.body, fresh)
            out.append(Loop(inner))
            aux.extend(decls)
        elif isinstance(ins, GuessResidue):
            branches = []
            for br in ins.branches:
                inner, decls = _expand_seq(br, fresh)
                branches.append(inner)
                aux.extend(decls)
            out.append(GuessResidue(ins.range_, tuple(branches)))
        else:
            out.append(ins)
    return tuple(out), aux


# ---------------------------------------------------------------------------
# Macro library


def _m_move(t: str, t2: str):
    return [Loop((Transfer(t, (t2,)),)), ZeroTest(t)], []


def _m_copy(x1: str, x2: str, fresh):
    aux = f"~cp{next(fresh)}"
    instrs = [
        Loop((Transfer(x1, (x2, aux)),)),
        ZeroTest(x1),
        Loop((Transfer(aux, (x1,)),)),
        ZeroTest(aux),
    ]
    return instrs, [Decl(aux, INT)]


def _m_exact_mult(x: str, y: str, a: int, b: int):
    return [
        Loop((Transfer(x, (y,)),)),
        ZeroTest(x),
        Loop((Sub(y, b), Add(x, a))),
        ZeroTest(y),
    ], []


def _m_weak_mult(x: str, xbar: str, a: int, b: int):
    return [
        Loop((Transfer(x, (xbar,)),)),
        Loop((Sub(xbar, b), Add(x, a))),
    ], []


def _m_sixteen_triple(x: str, y: str, z: str):
    return [Add(x, 16), Loop((Add(y, 2), Add(z, 32)))], []


def _m_residue_test(x: str, xbar: str, b: int):
    """Multiply x by 7 exactly when x is not divisible by b.

    Guesses the residue r, subtracts it, runs the divisibility loops that
    multiply the quotient part by 7, then restores 7r.
    """
    branches = []
    for r in range(1, b):
        branches.append(
            (
                Sub(x, r),
                Loop((Sub(x, b), Add(xbar, b))),
                Loop((Sub(xbar, b), Add(x, 7 * b))),
                Add(x, 7 * r),
            )
        )
    return [GuessResidue(b, tuple(branches))], []


def _m_mult(x: str, xbar: str, y: str, z: str, us: tuple[str, ...], fresh):
    """Multiply every u-counter by the value of x, consuming y and z.

    From (x, y, z, u_1..u_k) = (B, C, 2BC, C_1..C_k) the accepted finals are
    exactly (B, 0, 0, B*C_1..B*C_k), and only when C = C_1 + .. + C_k.
    """
    vs = [f"~v{next(fresh)}" for _ in us]
    instrs: list = []
    for u, v in zip(us, vs):
        instrs.append(
            Loop(
                (
                    Loop((Transfer(x, (xbar,)), Sub(z, 1), Add(v, 1))),
                    Loop((Transfer(xbar, (x,)), Sub(z, 1))),
                    Sub(y, 1),
                    Sub(u, 1),
                )
            )
        )
    for u in us:
        instrs.append(ZeroTest(u))
    for u, v in zip(us, vs):
        instrs.append(Loop((Transfer(v, (u,)),)))
    for v in vs:
        instrs.append(ZeroTest(v))
    return instrs, [Decl(v, INT) for v in vs]


def _m_final_check(x, xbar, y1, y2, y3, z1, z2):
    weak, _ = _m_weak_mult(x, xbar, 7, 1)
    return [
        ZeroTest(xbar),
        ZeroTest(y1),
        ZeroTest(y2),
        ZeroTest(y3),
        Loop(tuple(weak) + (Sub(z1, 1),)),
        ZeroTest(z1),
        Loop((Sub(x, 1), Sub(z2, 1))),
        ZeroTest(x),
        ZeroTest(z2),
    ], []


def _budgeted_exact_mult(x: str, y: str, a: int, b: int, budget: str):
    """exact-mult whose two zero-tests each consume one unit of budget."""
    return [
        Loop((Transfer(x, (y,)),)),
        Sub(budget, 1),
        ZeroTest(x),
        Loop((Sub(y, b), Add(x, a))),
        Sub(budget, 1),
        ZeroTest(y),
    ]


def _m_exp_amplifier(x1, x2, x, y, z, xp, yp, zp, u, bud, b_value: int):
    """Turn triple (B, 2C, 2BC) on (x,y,z) into (2^B, 2C', 2**B*2C') there.

    The multiplication budget counter stands in for the consumable triple
    machinery: it starts at B/2, each squaring-chain zero-test spends one
    unit, and it must end at zero. Together with the balance counter u this
    forces both squaring loops to run exactly B/8 times, so x' becomes
    256^(B/8) = 2^B. Leftover input triple values drain nondeterministically
    before the final checks.
    """
    if b_value % 8 != 0:
        raise BNotDivisibleBy8(f"B={b_value} is not divisible by 8")
    move = _m_move
    instrs: list = [
        Add(bud, b_value // 2),
        Add(xp, 1),
        Loop((Add(yp, 2), Add(zp, 2))),
        *move(xp, x1)[0],
        Loop(tuple(_budgeted_exact_mult(x1, x2, 256, 1, bud)) + (Add(u, 1),)),
        *move(x1, xp)[0],
        *move(zp, x1)[0],
        Loop(tuple(_budgeted_exact_mult(x1, x2, 256, 1, bud)) + (Sub(u, 1),)),
        *move(x1, zp)[0],
        Loop((Sub(y, 1),)),
        Loop((Sub(z, 1),)),
        ZeroTest(y),
        ZeroTest(z),
        ZeroTest(u),
        ZeroTest(bud),
        Loop((Sub(x, 1),)),
        ZeroTest(x),
        *move(xp, x)[0],
        *move(yp, y)[0],
        *move(zp, z)[0],
    ]
    return instrs, []


def _expand_macro_impl(name: str, args: tuple, fresh):
    table = {
        "move": (_m_move, 2, False),
        "copy": (_m_copy, 2, True),
        "exact-mult": (_m_exact_mult, 4, False),
        "weak-mult": (_m_weak_mult, 4, False),
        "16-triple": (_m_sixteen_triple, 3, False),
        "residue-test": (_m_residue_test, 3, False),
        "mult": (_m_mult, 5, True),
        "final-check": (_m_final_check, 7, False),
        "exp-amplifier": (_m_exp_amplifier, 11, False),
    }
    if name not in table:
        raise UnknownMacro(name)
    fn, arity, wants_fresh = table[name]
    if len(args) != arity:
        raise ArityMismatch(f"{name} expects {arity} arguments, got {len(args)}")
    if wants_fresh:
        return fn(*args, fresh)
    return fn(*args)


def expand_macro(name: str, args: tuple) -> tuple:
    """Literal instruction sequence for a named gadget."""
    instrs, _ = _expand_macro_impl(name, tuple(args), count())
    return tuple(instrs)


# ---------------------------------------------------------------------------
# Compilation


@dataclass(frozen=True)
class CompiledUnit:
    """A compiled program with entry/exit states and shadow bookkeeping."""

    program: CounterProgram
    system: ZVass
    entry: str
    exit: str
    slots: dict[str, int] = field(compare=False)
    manifest: tuple[tuple[str, str], ...]
    declared: tuple[str, ...]

    def initial_config(self, valuation: dict[str, int]) -> Configuration:
        """Entry configuration; shadow counters start synced to their target."""
        return self._config(self.entry, valuation, sync_shadows=True)

    def final_config(self, valuation: dict[str, int]) -> Configuration:
        """Exit configuration; shadow counters are required to be zero."""
        return self._config(self.exit, valuation, sync_shadows=False)

    def _config(self, state, valuation, sync_shadows):
        lay = self.system.layout
        vals = [0] * (lay.d + lay.k)
        for name, v in valuation.items():
            if name not in self.slots:
                raise UndeclaredCounter(name)
            vals[self.slots[name] - 1] = v
        if sync_shadows:
            for shadow, tested in self.manifest:
                vals[self.slots[shadow] - 1] = valuation.get(tested, 0)
        return Configuration(state, tuple(vals[: lay.d]), tuple(vals[lay.d :]))

    def valuation_of(self, config: Configuration) -> dict[str, int]:
        """Declared-counter valuation at a configuration (internals dropped)."""
        vals = config.values
        return {name: vals[self.slots[name] - 1] for name in self.declared}


def _scan_shadow_tests(body, inside_cycle: bool, found: list) -> None:
    for ins in body:
        if isinstance(ins, ZeroTest) and ins.mode == SHADOW:
            if inside_cycle:
                raise ShadowTestInsideLoop(
                    f"shadow zero-test on {ins.counter!r} inside a loop or fan-out"
                )
            found.append(ins.counter)
        elif isinstance(ins, Loop):
            _scan_shadow_tests(ins.body, True, found)
        elif isinstance(ins, GuessResidue):
            for br in ins.branches:
                _scan_shadow_tests(br, True, found)


def compile_program(program: CounterProgram, backend: str = "ca") -> CompiledUnit:
    """Compile to a system (zvass backend) or counter automaton (ca backend).

    The zvass backend requires every zero-test to be shadow mode at loop-free
    positions; each one gets a fresh integer counter that mirrors its target
    up to the test point, is frozen afterwards, and must be zero at the exit.
    """
    if backend not in ("zvass", "ca"):
        raise ValueError(f"unknown backend {backend!r}")
    fresh = count()
    body, aux = _expand_seq(program.body, fresh)
    decls = tuple(program.decls) + tuple(aux)
    known = {d.name for d in decls}

    def check_refs(seq):
        for ins in seq:
            for name in _referenced(ins):
                if name not in known:
                    raise UndeclaredCounter(name)
            if isinstance(ins, Loop):
                check_refs(ins.body)
            elif isinstance(ins, GuessResidue):
                for br in ins.branches:
                    check_refs(br)

    check_refs(body)

    shadow_targets: list[str] = []
    if backend == "zvass":
        _scan_shadow_tests(body, False, shadow_targets)
        for test in _iter_tests(body):
            if test.mode == NATIVE:
                raise ValueError(
                    f"native zero-test on {test.counter!r} has no zvass lowering"
                )

    nats = [d.name for d in decls if d.kind == NAT]
    ints = [d.name for d in decls if d.kind == INT]
    shadows = [f"~sh{i}" for i in range(len(shadow_targets))]
    slots: dict[str, int] = {}
    for i, name in enumerate(nats):
        slots[name] = i + 1
    for j, name in enumerate(ints + shadows):
        slots[name] = len(nats) + j + 1
    layout = CounterLayout(len(nats), len(ints) + len(shadows))
    total = layout.total

    states = ["n0"]
    transitions: list[Transition] = []
    shadow_iter = iter(range(len(shadows)))
    active: dict[str, list[str]] = {}

    def new_state() -> str:
        states.append(f"n{len(states)}")
        return states[-1]

    def emit(src: str, dst: str, deltas: dict[str, int], ztest_slot: int | None = None):
        full = dict(deltas)
        for tested, mirrors in active.items():
            if tested in deltas:
                for sh in mirrors:
                    full[sh] = full.get(sh, 0) + deltas[tested]
        entries = [0] * total
        for name, delta in full.items():
            entries[slots[name] - 1] = delta
        transitions.append(
            Transition(
                len(transitions), src, dst, UpdateVector(tuple(entries)), ztest_slot
            )
        )

    manifest: list[tuple[str, str]] = []

    def walk(seq, here: str) -> str:
        for ins in seq:
            if isinstance(ins, Add):
                nxt = new_state()
                emit(here, nxt, {ins.counter: ins.amount})
                here = nxt
            elif isinstance(ins, Sub):
                nxt = new_state()
                emit(here, nxt, {ins.counter: -ins.amount})
                here = nxt
            elif isinstance(ins, Transfer):
                nxt = new_state()
                deltas = {ins.source: -1}
                for t in ins.targets:
                    deltas[t] = deltas.get(t, 0) + 1
                emit(here, nxt, deltas)
                here = nxt
            elif isinstance(ins, Loop):
                if ins.body:
                    # fresh anchor and exit: the cycle must not share states
                    # with surrounding or nested loops, or iterations of
                    # different loops could interleave and partial bodies
                    # could escape through the anchor
                    anchor = new_state()
                    emit(here, anchor, {})
                    end = walk(ins.body, anchor)
                    emit(end, anchor, {})
                    nxt = new_state()
                    emit(anchor, nxt, {})
                    here = nxt
            elif isinstance(ins, ZeroTest):
                nxt = new_state()
                if backend == "ca":
                    emit(here, nxt, {}, ztest_slot=slots[ins.counter])
                else:
                    idx = next(shadow_iter)
                    sh = shadows[idx]
                    manifest.append((sh, ins.counter))
                    active.setdefault(ins.counter, []).remove(sh)
                    emit(here, nxt, {})
                here = nxt
            elif isinstance(ins, GuessResidue):
                nxt = new_state()
                for br in ins.branches:
                    end = walk(br, here)
                    emit(end, nxt, {})
                here = nxt
            else:
                raise TypeError(f"unexpanded instruction {ins!r}")
        return here

    if backend == "zvass":
        for sh, tested in zip(shadows, shadow_targets):
            active.setdefault(tested, []).append(sh)
    exit_state = walk(body, "n0")
    system = ZVass(layout, tuple(states), tuple(transitions))
    return CompiledUnit(
        program=CounterProgram(decls, body),
        system=system,
        entry="n0",
        exit=exit_state,
        slots=slots,
        manifest=tuple(manifest),
        declared=tuple(d.name for d in program.decls),
    )


def _referenced(ins):
    if isinstance(ins, (Add, Sub)):
        return (ins.counter,)
    if isinstance(ins, Transfer):
        return (ins.source,) + ins.targets
    if isinstance(ins, ZeroTest):
        return (ins.counter,)
    return ()


def _iter_tests(seq):
    for ins in seq:
        if isinstance(ins, ZeroTest):
            yield ins
        elif isinstance(ins, Loop):
            yield from _iter_tests(ins.body)
        elif isinstance(ins, GuessResidue):
            for br in ins.branches:
                yield from _iter_tests(br)


# ---------------------------------------------------------------------------
# Reference interpreter (independent from the compilers)


def _expanded(program: CounterProgram) -> CounterProgram:
    body, aux = _expand_seq(program.body, count())
    return CounterProgram(tuple(program.decls) + tuple(aux), body)


def expand_program(program: CounterProgram) -> CounterProgram:
    """Resolve every macro call and for-block; auxiliary counters get declared."""
    return _expanded(program)


def interp_finals(
    program: CounterProgram,
    initial: dict[str, int],
    nat_cap: int,
    int_cap: int,
    node_cap: int | None = None,
) -> set[tuple[int, ...]]:
    """All final valuations reachable by direct small-step execution.

    Values are explored within [0, nat_cap] and [-int_cap, int_cap]; the
    result tuples list declared counters in declaration order.
    """
    prog = _expanded(program)
    kinds = {d.name: d.kind for d in prog.decls}
    order = [d.name for d in prog.decls]
    n_declared = len(program.decls)

    def ok(name: str, v: int) -> bool:
        if kinds[name] == NAT:
            return 0 <= v <= nat_cap
        return -int_cap <= v <= int_cap

    start_vals = tuple(initial.get(name, 0) for name in order)
    idx = {name: i for i, name in enumerate(order)}

    # Positions are interned as small ints so state hashing stays cheap.
    positions: list[tuple] = []
    pos_ids: dict[tuple[int, int, int | None], int] = {}

    def intern(seq: tuple, i: int, parent: int | None) -> int:
        key = (id(seq), i, parent)
        got = pos_ids.get(key)
        if got is None:
            got = len(positions)
            positions.append((seq, i, parent))
            pos_ids[key] = got
        return got

    top = intern(prog.body, 0, None)
    stack = [(top, start_vals)]
    seen = {(top, start_vals)}
    finals: set[tuple[int, ...]] = set()

    while stack:
        pos, vals = stack.pop()
        seq, i, parent = positions[pos]
        if i == len(seq):
            if parent is None:
                finals.add(vals[:n_declared])
                continue
            succs = [(parent, vals)]
        else:
            ins = seq[i]
            after = intern(seq, i + 1, parent)
            succs = []
            if isinstance(ins, Add):
                v = vals[idx[ins.counter]] + ins.amount
                if ok(ins.counter, v):
                    out = list(vals)
                    out[idx[ins.counter]] = v
                    succs.append((after, tuple(out)))
            elif isinstance(ins, Sub):
                v = vals[idx[ins.counter]] - ins.amount
                if ok(ins.counter, v):
                    out = list(vals)
                    out[idx[ins.counter]] = v
                    succs.append((after, tuple(out)))
            elif isinstance(ins, Transfer):
                out = list(vals)
                out[idx[ins.source]] -= 1
                for t in ins.targets:
                    out[idx[t]] += 1
                if all(ok(n, out[idx[n]]) for n in {ins.source, *ins.targets}):
                    succs.append((after, tuple(out)))
            elif isinstance(ins, ZeroTest):
                if vals[idx[ins.counter]] == 0:
                    succs.append((after, vals))
            elif isinstance(ins, Loop):
                succs.append((after, vals))
                if ins.body:
                    succs.append((intern(ins.body, 0, pos), vals))
            elif isinstance(ins, GuessResidue):
                for br in ins.branches:
                    succs.append((intern(br, 0, after), vals))
            else:
                raise TypeError(f"unexpanded instruction {ins!r}")
        for node in succs:
            if node not in seen:
                seen.add(node)
                if node_cap is not None and len(seen) > node_cap:
                    raise oracle.MemoryCapExceeded(
                        f"interpreter exceeded {node_cap} nodes"
                    )
                stack.append(node)
    return finals


@dataclass
class Script:
    """Explicit choices for one run: loop counts and fan-out picks in order."""

    loops: list[int]
    guesses: list[int] = field(default_factory=list)


def run_script(
    program: CounterProgram, initial: dict[str, int], script: Script
) -> dict[str, int]:
    """Deterministically replay a run; raises ScriptRejected on violations.

    Every Loop entry consumes the next loop count; every GuessResidue
    consumes the next guess (the residue value, in [1, range-1]).
    """
    prog = _expanded(program)
    kinds = {d.name: d.kind for d in prog.decls}
    vals = {d.name: initial.get(d.name, 0) for d in prog.decls}
    loops = list(script.loops)
    guesses = list(script.guesses)

    def bump(name: str, delta: int) -> None:
        vals[name] += delta
        if kinds[name] == NAT and vals[name] < 0:
            raise ScriptRejected(f"counter {name} went negative")

    def run_seq(seq) -> None:
        for ins in seq:
            if isinstance(ins, Add):
                bump(ins.counter, ins.amount)
            elif isinstance(ins, Sub):
                bump(ins.counter, -ins.amount)
            elif isinstance(ins, Transfer):
                bump(ins.source, -1)
                for t in ins.targets:
                    bump(t, 1)
            elif isinstance(ins, ZeroTest):
                if vals[ins.counter] != 0:
                    raise ScriptRejected(
                        f"zero-test failed: {ins.counter} = {vals[ins.counter]}"
                    )
            elif isinstance(ins, Loop):
                if not loops:
                    raise ScriptRejected("script ran out of loop counts")
                n = loops.pop(0)
                for _ in range(n):
                    run_seq(ins.body)
            elif isinstance(ins, GuessResidue):
                if not guesses:
                    raise ScriptRejected("script ran out of guesses")
                r = guesses.pop(0)
                if not 1 <= r <= ins.range_ - 1:
                    raise ScriptRejected(f"guess {r} outside [1,{ins.range_ - 1}]")
                run_seq(ins.branches[r - 1])
            else:
                raise TypeError(f"unexpanded instruction {ins!r}")

    run_seq(prog.body)
    return {d.name: vals[d.name] for d in program.decls}


def compiled_path(unit: CompiledUnit, script: Script) -> tuple[int, ...]:
    """Transition path a script takes through the compiled system.

    The compiler emits transitions in a fixed order per instruction, so the
    path can be rebuilt from the expanded body alone; replaying it with
    core.fire is what decides whether the run is actually enabled.
    """
    tids = count()
    loops = list(script.loops)
    guesses = list(script.guesses)

    def index(seq) -> list[tuple]:
        nodes: list[tuple] = []
        for ins in seq:
            if isinstance(ins, Loop):
                if ins.body:
                    enter = next(tids)
                    inner = index(ins.body)
                    close = next(tids)
                    leave = next(tids)
                    nodes.append(("loop", enter, inner, close, leave))
                else:
                    nodes.append(("noop-loop",))
            elif isinstance(ins, GuessResidue):
                branches = []
                for br in ins.branches:
                    inner = index(br)
                    merge = next(tids)
                    branches.append((inner, merge))
                nodes.append(("guess", branches))
            else:
                nodes.append(("step", next(tids)))
        return nodes

    tree = index(unit.program.body)
    path: list[int] = []

    def emit(nodes) -> None:
        for node in nodes:
            if node[0] == "step":
                path.append(node[1])
            elif node[0] == "noop-loop":
                if not loops:
                    raise ScriptRejected("script ran out of loop counts")
                loops.pop(0)
            elif node[0] == "loop":
                _, enter, inner, close, leave = node
                if not loops:
                    raise ScriptRejected("script ran out of loop counts")
                path.append(enter)
                for _ in range(loops.pop(0)):
                    emit(inner)
                    path.append(close)
                path.append(leave)
            else:
                branches = node[1]
                if not guesses:
                    raise ScriptRejected("script ran out of guesses")
                r = guesses.pop(0)
                if not 1 <= r <= len(branches):
                    raise ScriptRejected(f"guess {r} outside [1,{len(branches)}]")
                inner, merge = branches[r - 1]
                emit(inner)
                path.append(merge)

    emit(tree)
    return tuple(path)


def compiled_run(
    unit: CompiledUnit, initial: dict[str, int], script: Script
) -> dict[str, int]:
    """Replay a script as a transition path on the compiled system.

    Every firing is validated by core.fire (state chaining, nonnegativity,
    zero-tests) and the shadow manifest is checked at the exit, so a result
    is a machine-checked reachability certificate.
    """
    path = compiled_path(unit, script)
    trace = core.replay(unit.system, unit.initial_config(initial), path)
    final = trace.configs[-1]
    if final.state != unit.exit:
        raise ScriptRejected(f"run ended at {final.state}, not {unit.exit}")
    values = final.values
    for sh, tested in unit.manifest:
        if values[unit.slots[sh] - 1] != 0:
            raise ScriptRejected(
                f"shadow for {tested} is {values[unit.slots[sh] - 1]}, not 0"
            )
    return unit.valuation_of(final)


# ---------------------------------------------------------------------------
# Gadget programs and verification


@dataclass(frozen=True)
class GadgetSpec:
    """A program plus the relation its accepted valuations must satisfy."""

    name: str
    program: CounterProgram
    initials: tuple
    bounds: oracle.Bounds
    io_relation: object

    def __post_init__(self) -> None:
        if not callable(self.io_relation):
            raise ValueError("io_relation must be callable")


@dataclass(frozen=True)
class VerifyReport:
    name: str
    checked: int
    counterexamples: tuple

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def accepted_finals(
    unit: CompiledUnit, initial: dict[str, int], bounds: oracle.Bounds
) -> set[tuple[tuple[str, int], ...]]:
    """Declared-counter valuations reachable at the unit exit within bounds.

    For shadow-lowered units only manifest-satisfying configurations count.
    """
    source = unit.initial_config(initial)
    configs = oracle.reach_set(unit.system, source, bounds)
    out = set()
    for c in configs:
        if c.state != unit.exit:
            continue
        vals = c.values
        if any(vals[unit.slots[sh] - 1] != 0 for sh, _ in unit.manifest):
            continue
        out.add(tuple(sorted(unit.valuation_of(c).items())))
    return out


def verify_gadget(spec: GadgetSpec) -> VerifyReport:
    """Enumerate accepted (initial, final) pairs and check the io relation."""
    unit = compile_program(spec.program, "ca")
    counterexamples = []
    checked = 0
    for initial in spec.initials:
        for final in sorted(accepted_finals(unit, dict(initial), spec.bounds)):
            checked += 1
            if not spec.io_relation(dict(initial), dict(final)):
                counterexamples.append((dict(initial), dict(final)))
    return VerifyReport(spec.name, checked, tuple(counterexamples))


def gadget_program(name: str, args: tuple, decls: tuple[Decl, ...]) -> CounterProgram:
    """Wrap one macro invocation as a standalone program."""
    return CounterProgram(decls, (MacroCall(name, tuple(args)),))


def double_exp_triple(a: int, n: int) -> CounterProgram:
    """Program whose accepted finals on (x, yn, zn) are (A^(2^n), B, B*A^(2^n)).

    Repeated squaring: each round multiplies the carried pair family by the
    current value of x, guided by guessed seed values whose consistency the
    zero-tests enforce.
    """
    if a < 2 or n < 0:
        raise ValueError("need a >= 2 and n >= 0")
    decls = [Decl("x", NAT), Decl("xbar", NAT), Decl("u", INT)]
    for i in range(n + 1):
        decls.extend((Decl(f"y{i}", INT), Decl(f"z{i}", INT)))
    body: list = [Add("x", a)]
    for i in range(n + 1):
        body.append(Loop((Add(f"y{i}", 1), Add(f"z{i}", 2 * a))))
    for i in range(n):
        us = ("u",) + tuple(f"z{j}" for j in range(i + 1, n + 1))
        body.extend(
            (
                MacroCall("copy", ("x", "u")),
                MacroCall("mult", ("x", "xbar", f"y{i}", f"z{i}", us)),
                ZeroTest(f"y{i}"),
                ZeroTest(f"z{i}"),
                Loop((Sub("x", 1),)),
                ZeroTest("x"),
                Loop((Transfer("u", ("x",)),)),
                ZeroTest("u"),
            )
        )
    body.append(MacroCall("exact-mult", (f"z{n}", "xbar", 1, 2)))
    return CounterProgram(tuple(decls), tuple(body))


def double_exp_witness(a: int, n: int, b: int) -> Script:
    """Loop counts replaying the intended run that ends at (A^(2^n), B, ..)."""
    seeds = [0] * (n + 1)
    seeds[n] = b
    for i in range(n - 1, -1, -1):
        power = a ** (2 ** i)
        seeds[i] = power * (1 + 2 * sum(seeds[i + 1 :]))
    loops: list[int] = []
    loops.extend(seeds[i] for i in range(n + 1))
    for i in range(n):
        power = a ** (2 ** i)
        loops.extend((power, power))  # copy(x, u): flush out, flush back
        family = [power] + [2 * power * seeds[j] for j in range(i + 1, n + 1)]
        for value in family:
            loops.append(value)  # outer per-unit loop runs value times
            loops.extend((power, power) * value)  # inner flushes, per iteration
        for value in family:
            loops.append(power * value)  # copy-back of the products
        loops.append(power)  # drain x
        loops.append(power * power)  # move u into x
    final_z = 2 * (a ** (2 ** n)) * b
    loops.extend((final_z, final_z // 2))
    return Script(loops=loops)


def amplifier_step(b_value: int) -> CounterProgram:
    """Amplifier program on counters (x, y, z) plus internals."""
    decls = (
        Decl("x1", NAT),
        Decl("x2", NAT),
        Decl("x", NAT),
        Decl("y", INT),
        Decl("z", INT),
        Decl("xp", INT),
        Decl("yp", INT),
        Decl("zp", INT),
        Decl("u", INT),
        Decl("bud", INT),
    )
    instrs, _ = _m_exp_amplifier(
        "x1", "x2", "x", "y", "z", "xp", "yp", "zp", "u", "bud", b_value
    )
    return CounterProgram(decls, tuple(instrs))


def amplifier_witness(
    b_value: int,
    c_in: int,
    c_prime: int = 1,
    k1: int | None = None,
    k2: int | None = None,
) -> Script:
    """Loop counts for the intended amplifier run from (B, 2C, 2BC).

    k1/k2 override the squaring-chain iteration counts (default B/8 each);
    unbalanced overrides produce runs the final zero-tests reject.
    """
    if b_value % 8 != 0:
        raise BNotDivisibleBy8(f"B={b_value} is not divisible by 8")
    if k1 is None:
        k1 = b_value // 8
    if k2 is None:
        k2 = b_value // 8
    loops: list[int] = [c_prime, 1]  # seed loop, then move(xp, x1)
    loops.append(k1)  # first squaring chain
    val = 1
    for _ in range(k1):
        loops.extend((val, val))  # exact-mult flush then rebuild
        val *= 256
    loops.extend((val, 2 * c_prime))  # move(x1, xp), move(zp, x1)
    loops.append(k2)  # second squaring chain
    val2 = 2 * c_prime
    for _ in range(k2):
        loops.extend((val2, val2))
        val2 *= 256
    loops.append(val2)  # move(x1, zp)
    loops.extend((2 * c_in, 2 * b_value * c_in))  # drain leftover y and z
    loops.append(b_value)  # drain x
    loops.extend((val, 2 * c_prime, val2))  # final moves into (x, y, z)
    return Script(loops=loops)


# ---------------------------------------------------------------------------
# .cp text format


def parse_program(text: str) -> CounterProgram:
    """Parse the keyword program format.

    Lines hold one instruction each; `loop {`, `for i = lo .. hi {`,
    `guess B {` with `branch {` blocks, and a bare `}` delimit nesting.
    `#` starts a comment.
    """
    lines: list[str] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    decls: list[Decl] = []
    pos = 0

    def fail(msg: str) -> FormatError:
        return FormatError(f"line {pos + 1}: {msg}")

    def parse_arg(tok: str):
        try:
            return int(tok)
        except ValueError:
            return tok

    def parse_block(top: bool = False) -> tuple:
        nonlocal pos
        out: list = []
        while pos < len(lines):
            line = lines[pos]
            if line == "}":
                if top:
                    raise fail("unbalanced closing brace")
                pos += 1
                return tuple(out)
            parts = line.split()
            head = parts[0]
            if head == "counters":
                for spec_tok in parts[1:]:
                    if ":" not in spec_tok:
                        raise fail(f"bad counter declaration {spec_tok!r}")
                    name, kind = spec_tok.split(":", 1)
                    decls.append(Decl(name, kind))
                pos += 1
            elif head == "add" or head == "sub":
                if len(parts) != 3:
                    raise fail(f"{head} takes a counter and an amount")
                cls = Add if head == "add" else Sub
                try:
                    amount = int(parts[2])
                except ValueError:
                    raise fail(f"bad amount {parts[2]!r}") from None
                out.append(cls(parts[1], amount))
                pos += 1
            elif head == "ztest":
                if len(parts) == 2:
                    out.append(ZeroTest(parts[1]))
                elif len(parts) == 3 and parts[2] in (SHADOW, NATIVE):
                    out.append(ZeroTest(parts[1], parts[2]))
                else:
                    raise fail("ztest takes a counter and an optional mode")
                pos += 1
            elif head == "loop":
                if parts != ["loop", "{"]:
                    raise fail("loop must open a block")
                pos += 1
                out.append(Loop(parse_block()))
            elif head == "for":
                if len(parts) != 7 or parts[2] != "=" or parts[4] != ".." or parts[6] != "{":
                    raise fail("for syntax: for i = lo .. hi {")
                try:
                    lo, hi = int(parts[3]), int(parts[5])
                except ValueError:
                    raise fail("for bounds must be integers") from None
                pos += 1
                out.append(For(parts[1], lo, hi, parse_block()))
            elif head == "guess":
                if len(parts) != 3 or parts[2] != "{":
                    raise fail("guess syntax: guess B {")
                try:
                    range_ = int(parts[1])
                except ValueError:
                    raise fail("guess range must be an integer") from None
                pos += 1
                branches: list[tuple] = []
                while pos < len(lines) and lines[pos] != "}":
                    if lines[pos].split() != ["branch", "{"]:
                        raise fail("guess blocks contain only branch { ... }")
                    pos += 1
                    branches.append(parse_block())
                if pos == len(lines):
                    raise fail("unterminated guess block")
                pos += 1
                out.append(GuessResidue(range_, tuple(branches)))
            elif head == "call":
                if len(parts) < 2:
                    raise fail("call needs a macro name")
                args = tuple(parse_arg(t) for t in parts[2:])
                if parts[1] == "mult":
                    if len(args) < 5:
                        raise fail("mult needs x xbar y z and unit counters")
                    args = args[:4] + (args[4:],)
                out.append(MacroCall(parts[1], args))
                pos += 1
            elif "->" in parts:
                arrow = parts.index("->")
                if arrow != 1 or len(parts) < 3:
                    raise fail("transfer syntax: src -> t1 t2 ...")
                out.append(Transfer(parts[0], tuple(parts[2:])))
                pos += 1
            else:
                raise fail(f"unknown instruction {line!r}")
        if not top:
            raise FormatError("unterminated block")
        return tuple(out)

    body = parse_block(top=True)
    try:
        return CounterProgram(tuple(decls), body)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def serialize_program(program: CounterProgram) -> str:
    """Inverse of parse_program; output parses back to an equal program."""
    lines: list[str] = []
    if program.decls:
        lines.append("counters " + " ".join(f"{d.name}:{d.kind}" for d in program.decls))

    def emit(seq, depth: int) -> None:
        pad = "  " * depth
        for ins in seq:
            if isinstance(ins, Add):
                lines.append(f"{pad}add {ins.counter} {ins.amount}")
            elif isinstance(ins, Sub):
                lines.append(f"{pad}sub {ins.counter} {ins.amount}")
            elif isinstance(ins, Transfer):
                lines.append(f"{pad}{ins.source} -> " + " ".join(ins.targets))
            elif isinstance(ins, ZeroTest):
                suffix = "" if ins.mode == NATIVE else f" {ins.mode}"
                lines.append(f"{pad}ztest {ins.counter}{suffix}")
            elif isinstance(ins, Loop):
                lines.append(f"{pad}loop {{")
                emit(ins.body, depth + 1)
                lines.append(f"{pad}}}")
            elif isinstance(ins, For):
                lines.append(f"{pad}for {ins.var} = {ins.lo} .. {ins.hi} {{")
                emit(ins.body, depth + 1)
                lines.append(f"{pad}}}")
            elif isinstance(ins, GuessResidue):
                lines.append(f"{pad}guess {ins.range_} {{")
                for br in ins.branches:
                    lines.append(f"{pad}  branch {{")
                    emit(br, depth + 2)
                    lines.append(f"{pad}  }}")
                lines.append(f"{pad}}}")
            elif isinstance(ins, MacroCall):
                flat: list = []
                for a in ins.args:
                    if isinstance(a, tuple):
                        flat.extend(a)
                    else:
                        flat.append(a)
                lines.append(f"{pad}call {ins.name} " + " ".join(str(a) for a in flat))
            else:
                raise TypeError(f"cannot serialize {ins!r}")

    emit(program.body, 0)
    return "\n".join(lines) + "\n"


def tower_triple(n: int) -> CounterProgram:
    """16-triple then n-3 amplifier rounds, yielding a Tower(n) triple."""
    if n < 3:
        raise ValueError("n must be at least 3")
    decls = [
        Decl("x1", NAT),
        Decl("x2", NAT),
        Decl("x", NAT),
        Decl("y", INT),
        Decl("z", INT),
        Decl("xp", INT),
        Decl("yp", INT),
        Decl("zp", INT),
        Decl("u", INT),
        Decl("bud", INT),
    ]
    body: list = [MacroCall("16-triple", ("x", "y", "z"))]
    b = 16
    for _ in range(n - 3):
        instrs, _ = _m_exp_amplifier(
            "x1", "x2", "x", "y", "z", "xp", "yp", "zp", "u", "bud", b
        )
        body.extend(instrs)
        b = 2 ** b
    return CounterProgram(tuple(decls), tuple(body))
