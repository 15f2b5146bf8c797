"""Instance generators: subset-sum, three-counter simulation, towers, gallery.

The three-counter simulation assembles compiled counter-program fragments
into one system: a prologue that computes (or assumes) the pair (2^n, 7^(2^n))
on (z1, z2), one fragment per automaton transition that reworks the prime
encoding on the two natural counters, and a final check. Shadow counters for
the prologue/check zero-tests mirror their targets across all phases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import (
    Configuration,
    CounterLayout,
    ReachQuery,
    Transition,
    UpdateVector,
    ZVass,
    ZVassError,
)
from . import core, oracle
from .ctrprog import (
    Add,
    CompiledUnit,
    CounterProgram,
    Decl,
    GuessResidue,
    Loop,
    MacroCall,
    Script,
    Sub,
    Transfer,
    ZeroTest,
    compile_program,
    compiled_path,
    double_exp_triple,
    double_exp_witness,
    expand_program,
    tower_triple,
)


class WrongCounterCount(ZVassError):
    """The automaton does not have exactly three natural counters."""


class NTooSmall(ZVassError):
    pass


class UnknownName(ZVassError):
    pass


@dataclass(frozen=True)
class Expected:
    """A known verdict plus how it is known.

    basis is one of "analytic" (one-line argument), "enumeration" (brute
    force or oracle), "construction" (follows from generator parameters).
    """

    verdict: str
    basis: str
    note: str = ""

    def __post_init__(self) -> None:
        if self.verdict not in ("reachable", "unreachable"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.basis not in ("analytic", "enumeration", "construction"):
            raise ValueError(f"bad basis {self.basis!r}")


@dataclass(frozen=True)
class InstanceBundle:
    query: ReachQuery
    provenance: dict
    expected: Expected | None = None


# ---------------------------------------------------------------------------
# Subset sum


def _bits(value: int, width: int) -> tuple[int, ...]:
    return tuple((value >> j) & 1 for j in range(width))


def subset_sum_to_izvass(xs, t: int) -> InstanceBundle:
    """Integer-only system reachable iff some subset of xs sums to t.

    Counters hold the running sum in binary; each element contributes its
    bit vector on a "select" transition (a zero "skip" runs in parallel) and
    carry loops at the last state shift weight upward (-2 at j, +1 at j+1).
    The counter count is the least k with both sum(xs) and t below 2**k.
    """
    xs = tuple(int(v) for v in xs)
    if not xs:
        raise ValueError("xs must be nonempty")
    if any(v < 0 for v in xs) or t < 0:
        raise ValueError("subset sum inputs are naturals")
    total = sum(xs)
    k = 1
    while 2**k <= max(total, t):
        k += 1
    states = tuple(f"q{i}" for i in range(len(xs) + 1))
    transitions = []
    for i, v in enumerate(xs):
        transitions.append(
            Transition(
                len(transitions), f"q{i}", f"q{i + 1}", UpdateVector(_bits(v, k))
            )
        )
        transitions.append(
            Transition(len(transitions), f"q{i}", f"q{i + 1}", UpdateVector((0,) * k))
        )
    last = states[-1]
    for j in range(k - 1):
        entries = [0] * k
        entries[j] = -2
        entries[j + 1] = 1
        transitions.append(
            Transition(len(transitions), last, last, UpdateVector(tuple(entries)))
        )
    system = ZVass(CounterLayout(0, k), states, tuple(transitions))
    query = ReachQuery(
        system,
        Configuration("q0", (), (0,) * k),
        Configuration(last, (), _bits(t, k)),
    )
    expected = None
    if len(xs) <= 20:
        hit = any(
            sum(v for b, v in zip(_bits(mask, len(xs)), xs) if b) == t
            for mask in range(2 ** len(xs))
        )
        expected = Expected(
            "reachable" if hit else "unreachable",
            "enumeration",
            "brute-force subset enumeration",
        )
    return InstanceBundle(
        query,
        {"construction": "subset-sum", "xs": xs, "t": t, "k": k},
        expected,
    )


# ---------------------------------------------------------------------------
# Three-counter automata


_BASE = {1: 2, 2: 3, 3: 5}


def _step_op(t: Transition) -> tuple[str, int | None]:
    if t.ztest is not None:
        return ("ztest", t.ztest)
    nonzero = [(i, v) for i, v in enumerate(t.update.entries) if v]
    if not nonzero:
        return ("nop", None)
    if len(nonzero) == 1 and nonzero[0][1] in (1, -1):
        i, v = nonzero[0]
        return ("inc" if v == 1 else "dec", i + 1)
    raise ValueError(
        f"t{t.tid}: steps must be unit increments, unit decrements, "
        "zero-tests, or nops"
    )


@dataclass(frozen=True)
class ThreeCA:
    """Automaton over three natural counters with native zero-tests."""

    system: ZVass
    initial: str
    final: str

    def __post_init__(self) -> None:
        lay = self.system.layout
        if (lay.d, lay.k) != (3, 0):
            raise WrongCounterCount(f"need layout (3, 0), got ({lay.d}, {lay.k})")
        for s in (self.initial, self.final):
            if s not in self.system.states:
                raise ValueError(f"unknown state {s!r}")
        for t in self.system.transitions:
            _step_op(t)


def chain_ca(ops) -> ThreeCA:
    """Linear automaton executing the given ops once, in order.

    Each op is ("inc", i), ("dec", i), ("ztest", i) with i in 1..3, or
    ("nop",).
    """
    ops = tuple(ops)
    states = tuple(f"s{i}" for i in range(len(ops) + 1))
    transitions = []
    for pos, op in enumerate(ops):
        kind = op[0]
        entries = [0, 0, 0]
        ztest = None
        if kind == "inc":
            entries[op[1] - 1] = 1
        elif kind == "dec":
            entries[op[1] - 1] = -1
        elif kind == "ztest":
            ztest = op[1]
        elif kind != "nop":
            raise ValueError(f"unknown op {op!r}")
        transitions.append(
            Transition(
                pos, f"s{pos}", f"s{pos + 1}", UpdateVector(tuple(entries)), ztest
            )
        )
    system = ZVass(CounterLayout(3, 0), states, tuple(transitions))
    return ThreeCA(system, states[0], states[-1])


# ---------------------------------------------------------------------------
# Simulation of a three-counter automaton on two natural counters


_GLOBAL_DECLS = ("x", "xbar", "y1", "y2", "y3", "z1", "z2")


def _rename_counters(program: CounterProgram, mapping: dict) -> CounterProgram:
    def sub(name):
        return mapping.get(name, name)

    def walk(seq):
        out = []
        for ins in seq:
            if isinstance(ins, Add):
                out.append(Add(sub(ins.counter), ins.amount))
            elif isinstance(ins, Sub):
                out.append(Sub(sub(ins.counter), ins.amount))
            elif isinstance(ins, Transfer):
                out.append(Transfer(sub(ins.source), tuple(map(sub, ins.targets))))
            elif isinstance(ins, ZeroTest):
                out.append(ZeroTest(sub(ins.counter), ins.mode))
            elif isinstance(ins, Loop):
                out.append(Loop(walk(ins.body)))
            elif isinstance(ins, GuessResidue):
                out.append(
                    GuessResidue(ins.range_, tuple(walk(br) for br in ins.branches))
                )
            elif isinstance(ins, MacroCall):
                args = tuple(
                    sub(a)
                    if isinstance(a, str)
                    else tuple(map(sub, a))
                    if isinstance(a, tuple)
                    else a
                    for a in ins.args
                )
                out.append(MacroCall(ins.name, args))
            else:
                raise TypeError(f"cannot rename {ins!r}")
        return tuple(out)

    decls = tuple(Decl(sub(d.name), d.kind) for d in program.decls)
    return CounterProgram(decls, walk(program.body))


def _shadow_tests(program: CounterProgram) -> CounterProgram:
    def walk(seq):
        out = []
        for ins in seq:
            if isinstance(ins, ZeroTest):
                out.append(ZeroTest(ins.counter, "shadow"))
            elif isinstance(ins, Loop):
                out.append(Loop(walk(ins.body)))
            elif isinstance(ins, GuessResidue):
                out.append(
                    GuessResidue(ins.range_, tuple(walk(br) for br in ins.branches))
                )
            else:
                out.append(ins)
        return tuple(out)

    return CounterProgram(program.decls, walk(program.body))


def _phase_a_assumed() -> CounterProgram:
    return CounterProgram((Decl("x", "nat"),), (Add("x", 1),))


def _phase_a_generated(n: int) -> CounterProgram:
    """Compute the pair (2^n, 7^(2^n)) onto (z1, z2), leaving x = 1.

    Squaring rounds give 7^(2^n) at x, which moves to z2; the leftover pair
    counters drain to zero; n doublings then build 2^n, moved to z1.
    """
    mapping = {"u": "du"}
    for i in range(n + 1):
        mapping[f"y{i}"] = f"dy{i}"
        mapping[f"z{i}"] = f"dz{i}"
    prog = _rename_counters(double_exp_triple(7, n), mapping)
    body = list(prog.body)
    body.extend(
        (
            Loop((Transfer("x", ("z2",)),)),
            ZeroTest("x"),
            Loop((Sub(f"dy{n}", 1),)),
            ZeroTest(f"dy{n}"),
            Loop((Sub(f"dz{n}", 1),)),
            ZeroTest(f"dz{n}"),
            Add("x", 1),
        )
    )
    for _ in range(n):
        body.append(MacroCall("exact-mult", ("x", "xbar", 2, 1)))
    body.extend(
        (
            Loop((Transfer("x", ("z1",)),)),
            ZeroTest("x"),
            Add("x", 1),
        )
    )
    decls = prog.decls + (Decl("z1", "int"), Decl("z2", "int"))
    return CounterProgram(decls, tuple(body))


def _phase_a_loops(n: int) -> list[int]:
    """Loop counts replaying the generated prologue's intended run (B = 1)."""
    big = 7 ** (2**n)
    loops = list(double_exp_witness(7, n, 1).loops)
    loops.extend((big, 1, big))
    for i in range(n):
        loops.extend((2**i, 2**i))
    loops.append(2**n)
    return loops


def _phase_b_snippet(op: str, i: int | None) -> CounterProgram:
    decls = [Decl("x", "nat"), Decl("xbar", "nat"), Decl("z1", "int")]
    body: list = []
    if op == "inc":
        decls.append(Decl(f"y{i}", "int"))
        body.append(Add(f"y{i}", 1))
        body.append(MacroCall("weak-mult", ("x", "xbar", 7 * _BASE[i], 1)))
    elif op == "dec":
        decls.append(Decl(f"y{i}", "int"))
        body.append(Sub(f"y{i}", 1))
        body.append(MacroCall("weak-mult", ("x", "xbar", 7, _BASE[i])))
    elif op == "ztest":
        body.append(MacroCall("residue-test", ("x", "xbar", _BASE[i])))
    elif op == "nop":
        body.append(MacroCall("weak-mult", ("x", "xbar", 7, 1)))
    else:
        raise ValueError(f"unknown op {op!r}")
    body.append(Sub("z1", 1))
    return CounterProgram(tuple(decls), tuple(body))


def _phase_c() -> CounterProgram:
    decls = tuple(
        Decl(n, "nat" if n in ("x", "xbar") else "int") for n in _GLOBAL_DECLS
    )
    return CounterProgram(
        decls, (MacroCall("final-check", tuple(_GLOBAL_DECLS)),)
    )


def _compile_shadowed(program: CounterProgram) -> CompiledUnit:
    return compile_program(_shadow_tests(expand_program(program)), backend="zvass")


@dataclass
class _Splice:
    unit: CompiledUnit
    entry_tid: int
    exit_tid: int
    tid_map: list[int]


class _Assembler:
    """Collects spliced fragments into one two-natural-counter system."""

    def __init__(self):
        self.int_names: list[str] = ["y1", "y2", "y3", "z1", "z2"]
        self.states: list[str] = ["boot"]
        self.rows: list[tuple[str, str, dict]] = []
        self.cross: list[tuple[str, str]] = []
        self.manifest: list[tuple[str, str]] = []

    def ensure_state(self, name: str) -> str:
        if name not in self.states:
            self.states.append(name)
        return name

    def ensure_int(self, name: str) -> str:
        if name not in self.int_names:
            self.int_names.append(name)
        return name

    def emit(self, src: str, dst: str, deltas: dict) -> int:
        self.ensure_state(src)
        self.ensure_state(dst)
        self.rows.append((src, dst, deltas))
        return len(self.rows) - 1

    def splice(
        self,
        unit: CompiledUnit,
        prefix: str,
        entry_from: str,
        exit_to: str,
        mirror: bool = True,
    ) -> _Splice:
        lay = unit.system.layout
        names = {}
        for name, slot in unit.slots.items():
            gname = name if name in _GLOBAL_DECLS else prefix + name
            if slot <= lay.d:
                if gname not in ("x", "xbar"):
                    raise ValueError(f"unexpected natural counter {name!r}")
            else:
                self.ensure_int(gname)
            names[slot] = gname
        for sh, tested in unit.manifest:
            self.manifest.append((prefix + sh, tested))
        entry_tid = self.emit(entry_from, prefix + unit.entry, {})
        tid_map = []
        for t in unit.system.transitions:
            base = {}
            for idx, dv in enumerate(t.update.entries):
                if dv:
                    base[names[idx + 1]] = base.get(names[idx + 1], 0) + dv
            deltas = dict(base)
            if mirror:
                for sh, tc in self.cross:
                    if tc in base:
                        deltas[sh] = deltas.get(sh, 0) + base[tc]
            tid_map.append(self.emit(prefix + t.src, prefix + t.dst, deltas))
        exit_tid = self.emit(prefix + unit.exit, exit_to, {})
        return _Splice(unit, entry_tid, exit_tid, tid_map)

    def build(self, source_state: str, source_ints: dict, target_state: str):
        slot = {"x": 1, "xbar": 2}
        for j, name in enumerate(self.int_names):
            slot[name] = 3 + j
        total = 2 + len(self.int_names)
        transitions = []
        for tid, (src, dst, deltas) in enumerate(self.rows):
            entries = [0] * total
            for name, dv in deltas.items():
                entries[slot[name] - 1] = dv
            transitions.append(
                Transition(tid, src, dst, UpdateVector(tuple(entries)))
            )
        system = ZVass(
            CounterLayout(2, len(self.int_names)),
            tuple(self.states),
            tuple(transitions),
        )
        init = dict(source_ints)
        for sh, tested in self.manifest:
            init[sh] = init.get(tested, 0)
        zvals = tuple(init.get(name, 0) for name in self.int_names)
        source = Configuration(source_state, (0, 0), zvals)
        target = Configuration(target_state, (0, 0), (0,) * len(self.int_names))
        return system, source, target, slot


def ca3_to_zvass2(ca: ThreeCA, n: int, pair: str = "assumed") -> InstanceBundle:
    """Two-natural-counter system reachable iff ca runs to zeros in <= 2^n steps.

    The counter values live in the encoding 2^a 3^b 5^c 7^L on x; each
    automaton step reworks the encoding with weak multiplications (or the
    residue fan-out for zero-tests) and decrements the step allowance z1.
    With pair="assumed" the source configuration carries (2^n, 7^(2^n)) on
    (z1, z2) directly; with pair="generated" a prologue computes it.
    """
    if not isinstance(ca, ThreeCA):
        raise WrongCounterCount("expected a ThreeCA")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if pair not in ("assumed", "generated"):
        raise ValueError(f"unknown pair mode {pair!r}")

    asm = _Assembler()
    unit_c = _compile_shadowed(_phase_c())
    asm.cross = [(f"fin.{sh}", tested) for sh, tested in unit_c.manifest]

    if pair == "assumed":
        unit_a = _compile_shadowed(_phase_a_assumed())
        a_loops: list[int] = []
    else:
        unit_a = _compile_shadowed(_phase_a_generated(n))
        a_loops = _phase_a_loops(n)
    sp_a = asm.splice(unit_a, "pre.", "boot", f"sim.{ca.initial}")

    steps = {}
    for t in ca.system.transitions:
        op, i = _step_op(t)
        unit = _compile_shadowed(_phase_b_snippet(op, i))
        sp = asm.splice(unit, f"t{t.tid}.", f"sim.{t.src}", f"sim.{t.dst}")
        steps[t.tid] = (unit, sp, op, i)

    sp_c = asm.splice(unit_c, "fin.", f"sim.{ca.final}", "done", mirror=False)

    big = 7 ** (2**n)
    source_ints = {"z1": 2**n, "z2": big} if pair == "assumed" else {}
    system, source, target, slot = asm.build("boot", source_ints, "done")

    expected = None
    if 2**n <= 8:
        zero3 = Configuration(ca.initial, (0, 0, 0), ())
        final3 = Configuration(ca.final, (0, 0, 0), ())
        ans = oracle.length_bounded_ca_reach(
            ca.system, zero3, final3, 2**n, mode="at_most"
        )
        expected = Expected(
            "reachable" if ans.verdict == "reachable" else "unreachable",
            "enumeration",
            f"length-bounded search over the automaton, L = {2**n}",
        )

    provenance = {
        "construction": "ca3-sim",
        "n": n,
        "pair": pair,
        "checkpoints": [f"sim.{q}" for q in ca.system.states],
        "final_check_entry": f"fin.{unit_c.entry}",
        "slots": slot,
        "_replay": {
            "ca": ca,
            "n": n,
            "pair": pair,
            "a": (unit_a, sp_a, a_loops),
            "steps": steps,
            "c": (unit_c, sp_c),
        },
    }
    return InstanceBundle(ReachQuery(system, source, target), provenance, expected)


def ca_sim_witness(bundle: InstanceBundle, ca_path) -> tuple[int, ...]:
    """Transition path simulating the given automaton run, for core.replay.

    ca_path lists transition ids of a run of the original automaton from
    all-zero counters to all-zero counters; loop counts are derived from the
    encoding values along the faithful simulation.
    """
    info = bundle.provenance["_replay"]
    ca: ThreeCA = info["ca"]
    n = info["n"]
    unit_a, sp_a, a_loops = info["a"]
    unit_c, sp_c = info["c"]
    steps = info["steps"]

    path = [sp_a.entry_tid]
    path.extend(sp_a.tid_map[t] for t in compiled_path(unit_a, Script(a_loops)))
    path.append(sp_a.exit_tid)

    vals = [0, 0, 0]
    enc = 1
    length = 0
    state = ca.initial
    for tid in ca_path:
        t = ca.system.transitions[tid]
        if t.src != state:
            raise ValueError(f"t{tid} starts at {t.src}, run is at {state}")
        state = t.dst
        unit, sp, op, i = steps[tid]
        loops: list[int] = []
        guesses: list[int] = []
        if op == "inc":
            loops = [enc, enc]
            enc *= 7 * _BASE[i]
            vals[i - 1] += 1
        elif op == "dec":
            if vals[i - 1] == 0:
                raise ValueError(f"t{tid}: counter {i} is zero, cannot decrement")
            loops = [enc, enc // _BASE[i]]
            enc = 7 * enc // _BASE[i]
            vals[i - 1] -= 1
        elif op == "ztest":
            if vals[i - 1] != 0:
                raise ValueError(f"t{tid}: counter {i} is {vals[i - 1]}, not 0")
            r = enc % _BASE[i]
            q = (enc - r) // _BASE[i]
            guesses = [r]
            loops = [q, q]
            enc *= 7
        else:
            loops = [enc, enc]
            enc *= 7
        length += 1
        path.append(sp.entry_tid)
        path.extend(sp.tid_map[t2] for t2 in compiled_path(unit, Script(loops, guesses)))
        path.append(sp.exit_tid)

    if state != ca.final or vals != [0, 0, 0]:
        raise ValueError("run does not end at the final state with zero counters")
    if length > 2**n:
        raise ValueError(f"run length {length} exceeds {2**n}")
    pad = 2**n - length
    c_loops = [pad]
    for _ in range(pad):
        c_loops.extend((enc, enc))
        enc *= 7
    c_loops.append(enc)
    path.append(sp_c.entry_tid)
    path.extend(sp_c.tid_map[t2] for t2 in compiled_path(unit_c, Script(c_loops)))
    path.append(sp_c.exit_tid)
    return tuple(path)


# ---------------------------------------------------------------------------
# Tower triples


def _tower(n: int) -> int:
    value = 1
    for _ in range(n):
        value = 2**value
    return value


def tower_instance(n: int) -> InstanceBundle:
    """Bundle around the tower-triple program, target (T, 2, 2T) for T = Tower(n).

    The program produces number triples only; driving a full simulation with
    them requires an external consumable-triple gadget, so the bundle states
    that interface instead of emitting an unverified construction.
    """
    if n < 3:
        raise NTooSmall("n must be at least 3")
    if n > 5:
        raise ValueError("tower values beyond n = 5 are not desk-representable")
    program = tower_triple(n)
    unit = compile_program(program, backend="ca")
    value = _tower(n)
    final = {"x": value, "y": 2, "z": 2 * value}
    query = ReachQuery(
        unit.system, unit.initial_config({}), unit.final_config(final)
    )
    return InstanceBundle(
        query,
        {
            "construction": "tower-triple",
            "n": n,
            "program": program,
            "unit": unit,
            "interface": {
                "produces": "(T, 2C, 2TC) with T the n-th tower value",
                "consumes": "nothing; starts from all-zero counters",
                "external_required": (
                    "a consumable-triple gadget is needed to drive a full "
                    "two-counter simulation from these triples; it is not "
                    "generated here"
                ),
            },
        },
        Expected("reachable", "construction", "witness loop counts replay"),
    )


# ---------------------------------------------------------------------------
# Gallery


def _gallery_nonsemilinear() -> InstanceBundle:
    transitions = (
        Transition(0, "q", "p", UpdateVector((0, 0, 1, 0))),
        Transition(1, "p", "q", UpdateVector((0, 0, 0, 0))),
        Transition(2, "q", "q", UpdateVector((1, -1, 0, 1))),
        Transition(3, "p", "p", UpdateVector((-1, 1, 0, 0))),
    )
    system = ZVass(CounterLayout(2, 2), ("q", "p"), transitions)
    query = ReachQuery(
        system,
        Configuration("q", (0, 2), (0, 0)),
        Configuration("p", (2, 0), (1, 2)),
    )
    return InstanceBundle(
        query,
        {
            "construction": "gallery/nonsemilinear-2-2",
            "note": (
                "sum of the natural counters is invariant; with sum s, "
                "final (s,0;c3,c4) at p is reachable iff c4 <= s*c3"
            ),
        },
        Expected("reachable", "analytic", "boundary point c4 = s*c3"),
    )


def _gallery_parity() -> InstanceBundle:
    system = ZVass(
        CounterLayout(0, 1),
        ("q",),
        (Transition(0, "q", "q", UpdateVector((2,))),),
    )
    query = ReachQuery(
        system, Configuration("q", (), (0,)), Configuration("q", (), (5,))
    )
    return InstanceBundle(
        query,
        {"construction": "gallery/parity", "note": "loop adds 2; target is odd"},
        Expected("unreachable", "analytic", "parity of the counter is invariant"),
    )


def _gallery_np_hard() -> InstanceBundle:
    inner = subset_sum_to_izvass((1, 2, 3), 5)
    return InstanceBundle(
        inner.query,
        {**inner.provenance, "construction": "gallery/np-hard-unary"},
        inner.expected,
    )


def _gallery_16_triple() -> InstanceBundle:
    program = CounterProgram(
        (Decl("x", "nat"), Decl("y", "int"), Decl("z", "int")),
        (MacroCall("16-triple", ("x", "y", "z")),),
    )
    unit = compile_program(program, backend="ca")
    query = ReachQuery(
        unit.system,
        unit.initial_config({}),
        unit.final_config({"x": 16, "y": 2, "z": 32}),
    )
    return InstanceBundle(
        query,
        {"construction": "gallery/gadget-16-triple", "program": program, "unit": unit},
        Expected("reachable", "construction", "one fill loop iteration"),
    )


def _gallery_exact_mult() -> InstanceBundle:
    program = CounterProgram(
        (Decl("x", "nat"), Decl("y", "int")),
        (MacroCall("exact-mult", ("x", "y", 3, 2)),),
    )
    unit = compile_program(program, backend="ca")
    query = ReachQuery(
        unit.system,
        unit.initial_config({"x": 4}),
        unit.final_config({"x": 6, "y": 0}),
    )
    return InstanceBundle(
        query,
        {"construction": "gallery/gadget-exact-mult", "program": program, "unit": unit},
        Expected("reachable", "construction", "4 * 3/2 = 6"),
    )


_GALLERY = {
    "nonsemilinear-2-2": _gallery_nonsemilinear,
    "parity": _gallery_parity,
    "np-hard-unary": _gallery_np_hard,
    "gadget-16-triple": _gallery_16_triple,
    "gadget-exact-mult": _gallery_exact_mult,
}

GALLERY_NAMES = tuple(sorted(_GALLERY))


def gallery(name: str) -> InstanceBundle:
    """Curated instances by name; see GALLERY_NAMES."""
    try:
        maker = _GALLERY[name]
    except KeyError:
        raise UnknownName(f"unknown gallery name {name!r}") from None
    return maker()
