"""Linear path schemes: validation, run compression, and a one-counter solver.

A scheme rho_0 sigma_1^{x_1} rho_1 ... sigma_l^{x_l} rho_l is validated in time
linear in its written size: only the underlying paths and the first and last
iteration of each cycle are checked, because the value at a fixed offset inside
iteration j is affine in j, so any violation surfaces at an endpoint iteration.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass

from .core import (
    Configuration,
    ReachQuery,
    Trace,
    ZVass,
    ZVassError,
    ZeroTestFailed,
    replay,
)
from .ilp import EQ, LE, IntProgram, ilp_feasible

EXPANSION_GUARD = 10_000


class MalformedScheme(ZVassError):
    """Scheme violates a structural invariant (chaining, arity, exponents)."""


class EndpointMismatch(ZVassError):
    """Expanded run is valid but does not end at the target configuration."""


class InvalidInputRun(ZVassError):
    """compress_run was handed a run that does not replay source -> target."""


class NNegViolationAt(ZVassError):
    """A nonnegative counter dips below zero at a located scheme position."""

    def __init__(self, segment: str, index: int, step: int, iteration: str | None):
        self.segment = segment
        self.index = index
        self.step = step
        self.iteration = iteration
        where = f"{segment} {index}, step {step}"
        if iteration is not None:
            where += f", {iteration} iteration"
        super().__init__(f"counter below zero at {where}")


@dataclass(frozen=True)
class LinearPathScheme:
    """Alternating paths and exponentiated cycles, all given by transition ids."""

    paths: tuple[tuple[int, ...], ...]
    cycles: tuple[tuple[int, ...], ...]
    exponents: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.paths) != len(self.cycles) + 1:
            raise MalformedScheme("need exactly one more path than cycles")
        if len(self.cycles) != len(self.exponents):
            raise MalformedScheme("one exponent per cycle")
        if any(not c for c in self.cycles):
            raise MalformedScheme("cycles must be nonempty")
        if any(x < 0 for x in self.exponents):
            raise MalformedScheme("exponents must be natural numbers")

    @property
    def ell(self) -> int:
        return len(self.cycles)

    def underlying_path(self) -> tuple[int, ...]:
        return tuple(t for p in self.paths for t in p)

    def expand(self) -> tuple[int, ...]:
        """Flatten into a plain transition sequence; guarded against blow-up."""
        if any(x > EXPANSION_GUARD for x in self.exponents):
            raise MalformedScheme(f"expansion over {EXPANSION_GUARD} iterations")
        out: list[int] = list(self.paths[0])
        for cyc, exp, path in zip(self.cycles, self.exponents, self.paths[1:]):
            out.extend(cyc * exp)
            out.extend(path)
        return tuple(out)

    def to_json(self) -> str:
        segments: list[dict] = [{"path": list(self.paths[0])}]
        for cyc, exp, path in zip(self.cycles, self.exponents, self.paths[1:]):
            segments.append({"cycle": list(cyc), "exp": str(exp)})
            segments.append({"path": list(path)})
        return json.dumps({"segments": segments}, indent=2)

    @staticmethod
    def from_json(text: str) -> "LinearPathScheme":
        data = json.loads(text)
        paths: list[tuple[int, ...]] = []
        cycles: list[tuple[int, ...]] = []
        exponents: list[int] = []
        last_was_path = False
        for seg in data["segments"]:
            if "path" in seg:
                if last_was_path:
                    raise MalformedScheme("adjacent path segments")
                paths.append(tuple(int(t) for t in seg["path"]))
                last_was_path = True
            else:
                if not last_was_path:
                    paths.append(())
                cycles.append(tuple(int(t) for t in seg["cycle"]))
                exponents.append(int(seg["exp"]))
                last_was_path = False
        if not last_was_path:
            paths.append(())
        return LinearPathScheme(tuple(paths), tuple(cycles), tuple(exponents))


@dataclass(frozen=True)
class ValidationSummary:
    """Successful validation: endpoints plus the arithmetic run length."""

    source: Configuration
    target: Configuration
    total_length: int
    checked_configs: int


def _chain_path(system: ZVass, state: str, tids: tuple[int, ...], what: str) -> str:
    for tid in tids:
        if tid < 0 or tid >= len(system.transitions):
            raise MalformedScheme(f"{what}: unknown transition {tid}")
        t = system.transitions[tid]
        if t.src != state:
            raise MalformedScheme(f"{what}: transition t{tid} does not chain")
        state = t.dst
    return state


def _effect_of(system: ZVass, tids) -> list[int]:
    out = [0] * system.layout.total
    for tid in tids:
        for i, u in enumerate(system.transitions[tid].update.entries):
            out[i] += u
    return out


def validate(query: ReachQuery, scheme: LinearPathScheme) -> ValidationSummary:
    """Accept iff the fully expanded run is valid and ends at the target.

    Zero tests inside a cycle stay sound under first/last checking: the tested
    value at a fixed offset is affine in the iteration number, so equality to
    zero at both endpoint iterations pins it to zero throughout.
    """
    system = query.system
    d = system.layout.d
    state = query.source.state
    for i, path in enumerate(scheme.paths):
        state = _chain_path(system, state, path, f"path {i}")
        if i < len(scheme.cycles):
            end = _chain_path(system, state, scheme.cycles[i], f"cycle {i}")
            if end != state:
                raise MalformedScheme(f"cycle {i} does not return to {state}")
    vals = list(query.source.values)
    checked = 1
    total = 0

    def run_segment(tids: tuple[int, ...], seg: str, idx: int, iteration: str | None):
        nonlocal checked
        for step, tid in enumerate(tids):
            t = system.transitions[tid]
            if t.ztest is not None and vals[t.ztest - 1] != 0:
                raise ZeroTestFailed(
                    f"{seg} {idx}, step {step}"
                    + (f", {iteration} iteration" if iteration else "")
                    + f": counter {t.ztest} is {vals[t.ztest - 1]}, not 0"
                )
            for i, u in enumerate(t.update.entries):
                vals[i] += u
            checked += 1
            if any(vals[i] < 0 for i in range(d)):
                raise NNegViolationAt(seg, idx, step, iteration)

    for i, path in enumerate(scheme.paths):
        run_segment(path, "path", i, None)
        total += len(path)
        if i >= len(scheme.cycles):
            continue
        cyc = scheme.cycles[i]
        exp = scheme.exponents[i]
        if exp == 0:
            continue
        eff = _effect_of(system, cyc)
        run_segment(cyc, "cycle", i, "first")
        if exp >= 2:
            for j in range(len(vals)):
                vals[j] += (exp - 2) * eff[j]
            run_segment(cyc, "cycle", i, "last")
        total += exp * len(cyc)
    final_state = scheme_end_state(system, query.source.state, scheme)
    final = Configuration(final_state, tuple(vals[:d]), tuple(vals[d:]))
    if final != query.target:
        raise EndpointMismatch(f"expanded run ends at {final}, not {query.target}")
    return ValidationSummary(query.source, query.target, total, checked)


def scheme_end_state(system: ZVass, start: str, scheme: LinearPathScheme) -> str:
    state = start
    for path in scheme.paths:
        for tid in path:
            state = system.transitions[tid].dst
    return state


def _rotate_to_min_anchor(system: ZVass, cycle: list[int]) -> list[int]:
    """Rotate so the running first-counter value attains its minimum at entry.

    Positive cycles then never dip below their entry value and negative cycles
    never dip below their exit value, which is what reinsertion relies on.
    """
    prefix = 0
    best = 0
    best_at = 0
    for r, tid in enumerate(cycle, start=1):
        prefix += system.transitions[tid].update.entries[0]
        if prefix < best:
            best = prefix
            best_at = r
    cut = best_at % len(cycle)
    return cycle[cut:] + cycle[:cut]


def caratheodory_reduce(
    effects: list[tuple[int, ...]], counts: list[int]
) -> tuple[list[tuple[int, ...]], list[int]]:
    """Re-express sum(counts * effects) over a small subset of the effects.

    Returns the lexicographically least subset of minimal size together with
    positive integer multiplicities; the subset size respects the
    ceil(2*dim*log2(4*dim*M)) bound where M is the max infinity norm (min 1).
    """
    if len(effects) != len(counts) or any(c < 0 for c in counts):
        raise ValueError("counts must be nonnegative and parallel to effects")
    if not effects:
        return [], []
    dim = len(effects[0])
    target = [0] * dim
    for vec, c in zip(effects, counts):
        for i, v in enumerate(vec):
            target[i] += c * v
    ordered = sorted(set(effects))
    for size in range(len(ordered) + 1):
        for subset in itertools.combinations(ordered, size):
            cons = [
                ({j: subset[j][i] for j in range(size)}, EQ, target[i])
                for i in range(dim)
            ]
            prog = IntProgram.build(size, cons, lower={j: 1 for j in range(size)})
            sol = ilp_feasible(prog)
            if sol is not None:
                m = max(1, max(abs(v) for vec in ordered for v in vec))
                bound = math.ceil(2 * dim * math.log2(4 * dim * m))
                assert size <= bound, "reduction exceeded the cardinality bound"
                return list(subset), sol
    raise AssertionError("unreachable: the full subset is always feasible")


def compress_run(query: ReachQuery, run: Trace) -> LinearPathScheme:
    """Compress a valid run into an equivalent linear path scheme.

    Marks the transitions leading to each state's first and last visits, then
    repeatedly extracts an unmarked simple cycle out of the leading
    |Q|(2|Q|+1) transitions until fewer remain.  Extracted cycles are rotated
    to their minimal-value anchor, grouped per (anchor, sign of first-counter
    effect), Caratheodory-reduced per group, and spliced back in: positive
    groups right after the anchor's first visit, negative groups right after
    its last visit, nonincreasing effect within a group.
    """
    system = query.system
    if system.layout.d != 1:
        raise ValueError("compression is defined for one nonnegative counter")
    if run.source != query.source or run.target != query.target:
        raise InvalidInputRun("run endpoints disagree with the query")
    try:
        replay(system, run.source, run.path)
    except ZVassError as exc:
        raise InvalidInputRun(f"run does not replay: {exc}") from exc

    n_states = len(system.states)
    threshold = n_states * (2 * n_states + 1)
    states_seq = [c.state for c in run.configs]
    first_visit: dict[str, int] = {}
    last_visit: dict[str, int] = {}
    for pos, st in enumerate(states_seq):
        first_visit.setdefault(st, pos)
        last_visit[st] = pos

    entries: list[dict] = [
        {"tid": tid, "plus": [], "minus": [], "marked": False} for tid in run.path
    ]
    start_plus: list[str] = []
    start_minus: list[str] = []
    for st, pos in first_visit.items():
        if pos == 0:
            start_plus.append(st)
        else:
            entries[pos - 1]["marked"] = True
            entries[pos - 1]["plus"].append(st)
    for st, pos in last_visit.items():
        if pos == 0:
            start_minus.append(st)
        else:
            entries[pos - 1]["marked"] = True
            entries[pos - 1]["minus"].append(st)

    work = list(entries)
    extracted: list[list[int]] = []
    while len(work) >= threshold:
        block_at = None
        for b in range(2 * n_states + 1):
            chunk = work[b * n_states : (b + 1) * n_states]
            if not any(e["marked"] for e in chunk):
                block_at = b * n_states
                break
        assert block_at is not None, "pigeonhole: an unmarked block must exist"
        chunk = work[block_at : block_at + n_states]
        walk = [system.transitions[chunk[0]["tid"]].src]
        for e in chunk:
            walk.append(system.transitions[e["tid"]].dst)
        seen: dict[str, int] = {}
        lo = hi = None
        for j, st in enumerate(walk):
            if st in seen:
                lo, hi = seen[st], j
                break
            seen[st] = j
        assert lo is not None and hi is not None, "pigeonhole: block holds a cycle"
        cycle_entries = chunk[lo:hi]
        extracted.append([e["tid"] for e in cycle_entries])
        dropped = set(map(id, cycle_entries))
        work = [e for e in work if id(e) not in dropped]

    groups: dict[tuple[str, int], list[list[int]]] = {}
    for cyc in extracted:
        rotated = _rotate_to_min_anchor(system, cyc)
        anchor = system.transitions[rotated[0]].src
        eff_n = sum(system.transitions[tid].update.entries[0] for tid in rotated)
        sign = 1 if eff_n >= 0 else -1
        groups.setdefault((anchor, sign), []).append(rotated)

    def reduce_group(cycles: list[list[int]]) -> list[tuple[tuple[int, ...], int]]:
        by_effect: dict[tuple[int, ...], tuple[tuple[int, ...], int]] = {}
        for cyc in cycles:
            key = tuple(_effect_of(system, cyc))
            if key in by_effect:
                rep, cnt = by_effect[key]
                by_effect[key] = (rep, cnt + 1)
            else:
                by_effect[key] = (tuple(cyc), 1)
        effs = list(by_effect.keys())
        reduced, new_counts = caratheodory_reduce(
            effs, [by_effect[e][1] for e in effs]
        )
        out = [(by_effect[e][0], c) for e, c in zip(reduced, new_counts)]
        out.sort(key=lambda item: (-_effect_of(system, item[0])[0], item[0]))
        return out

    blocks = {key: reduce_group(cycles) for key, cycles in groups.items()}

    paths: list[tuple[int, ...]] = []
    cycles_out: list[tuple[int, ...]] = []
    exps: list[int] = []
    current: list[int] = []

    def emit(state: str, sign: int) -> None:
        nonlocal current
        for cyc, count in blocks.pop((state, sign), []):
            paths.append(tuple(current))
            current = []
            cycles_out.append(cyc)
            exps.append(count)

    for st in start_plus:
        emit(st, +1)
    for st in start_minus:
        emit(st, -1)
    for e in work:
        current.append(e["tid"])
        for st in e["plus"]:
            emit(st, +1)
        for st in e["minus"]:
            emit(st, -1)
    paths.append(tuple(current))
    assert not blocks, "every cycle group must find its insertion point"
    scheme = LinearPathScheme(tuple(paths), tuple(cycles_out), tuple(exps))
    assert len(scheme.underlying_path()) < threshold
    return scheme


@dataclass(frozen=True)
class SolveCaps:
    """Skeleton and exponent caps for the one-counter solver."""

    max_path_len: int = 10
    max_cycle_len: int = 4
    max_support: int = 3
    max_exponent: int = 10**9
    max_skeletons: int = 20_000


@dataclass(frozen=True)
class SolveResult:
    """Witness scheme or an honest within-caps failure."""

    scheme: LinearPathScheme | None
    caps: SolveCaps

    @property
    def verdict(self) -> str:
        return "witness" if self.scheme is not None else "no-within-caps"


def _simple_cycles(system: ZVass, max_len: int) -> dict[str, list[tuple[int, ...]]]:
    """Simple cycles up to max_len anchored at each state, in deterministic order."""
    out: dict[str, list[tuple[int, ...]]] = {s: [] for s in system.states}

    def dfs(anchor: str, state: str, path: list[int], seen: set[str]) -> None:
        for t in system.transitions_from(state):
            if t.dst == anchor:
                out[anchor].append(tuple(path + [t.tid]))
            elif len(path) + 1 < max_len and t.dst not in seen:
                dfs(anchor, t.dst, path + [t.tid], seen | {t.dst})

    for s in system.states:
        dfs(s, s, [], {s})
    return out


def _dist_to(system: ZVass, goal: str) -> dict[str, int]:
    """Graph distance from each state to goal (len(states) + 1 = unreachable)."""
    inf = len(system.states) + 1
    dist = {s: inf for s in system.states}
    dist[goal] = 0
    frontier = deque([goal])
    into: dict[str, list[str]] = {s: [] for s in system.states}
    for t in system.transitions:
        into[t.dst].append(t.src)
    while frontier:
        st = frontier.popleft()
        for prev in into[st]:
            if dist[prev] > dist[st] + 1:
                dist[prev] = dist[st] + 1
                frontier.append(prev)
    return dist


def _paths_iter(system: ZVass, src: str, dst: str, max_len: int):
    """Yield transition paths src -> dst, shortest first, lexicographic by tid."""
    dist = _dist_to(system, dst)

    def dfs(state: str, target_len: int, acc: list[int]):
        if len(acc) == target_len:
            if state == dst:
                yield tuple(acc)
            return
        for t in system.transitions_from(state):
            if dist[t.dst] <= target_len - len(acc) - 1:
                acc.append(t.tid)
                yield from dfs(t.dst, target_len, acc)
                acc.pop()

    for target_len in range(max_len + 1):
        if dist[src] <= target_len:
            yield from dfs(src, target_len, [])


def solve_dim1(query: ReachQuery, caps: SolveCaps | None = None) -> SolveResult:
    """Search for a validating scheme for a d=1 system within the given caps.

    Skeletons (an underlying path plus a support set of simple cycles pinned
    to insertion positions) are enumerated deterministically, shortest path
    first; each skeleton induces a small integer program over the exponents
    whose constraints mirror exactly what validate() checks.  The first
    solvable skeleton wins, so results are reproducible.
    """
    if query.system.layout.d != 1:
        raise ValueError("solver requires exactly one nonnegative counter")
    caps = caps or SolveCaps()
    system = query.system
    total = system.layout.total
    delta = [t - s for s, t in zip(query.source.values, query.target.values)]
    cycles_by_state = _simple_cycles(system, caps.max_cycle_len)
    budget = caps.max_skeletons

    for path in _paths_iter(
        system, query.source.state, query.target.state, caps.max_path_len
    ):
        visit_states = [query.source.state]
        for tid in path:
            visit_states.append(system.transitions[tid].dst)
        path_eff = _effect_of(system, path)
        need = [delta[i] - path_eff[i] for i in range(total)]
        cands: list[tuple[int, tuple[int, ...]]] = []
        for pos, st in enumerate(visit_states):
            for cyc in cycles_by_state[st]:
                cands.append((pos, cyc))
        eff_cols = [_effect_of(system, cyc) for _, cyc in cands]
        if budget <= 0:
            return SolveResult(None, caps)
        budget -= 1
        if cands:
            relax = IntProgram.build(
                len(cands),
                [
                    ({j: eff_cols[j][i] for j in range(len(cands))}, EQ, need[i])
                    for i in range(total)
                ],
                lower={j: 0 for j in range(len(cands))},
            )
            if ilp_feasible(relax) is None:
                continue
        elif any(need):
            continue
        combo_seen: dict[tuple[tuple[int, ...], ...], bool] = {}
        for support in range(0, min(caps.max_support, len(cands)) + 1):
            for combo in itertools.combinations(range(len(cands)), support):
                key = tuple(sorted(cands[j][1] for j in combo))
                if key not in combo_seen:
                    eq_prog = IntProgram.build(
                        support,
                        [
                            ({j: eff_cols[combo[j]][i] for j in range(support)},
                             EQ, need[i])
                            for i in range(total)
                        ],
                        lower={j: 1 for j in range(support)},
                    )
                    combo_seen[key] = ilp_feasible(eq_prog) is not None
                if not combo_seen[key]:
                    continue
                if budget <= 0:
                    return SolveResult(None, caps)
                budget -= 1
                scheme = _try_skeleton(query, path, [cands[j] for j in combo], caps)
                if scheme is not None:
                    return SolveResult(scheme, caps)
    return SolveResult(None, caps)


def _try_skeleton(
    query: ReachQuery,
    path: tuple[int, ...],
    chosen: list[tuple[int, tuple[int, ...]]],
    caps: SolveCaps,
) -> LinearPathScheme | None:
    """Solve for exponents on one skeleton; returns a validated scheme or None."""
    system = query.system
    total = system.layout.total
    n = len(chosen)
    pos_sorted = sorted(chosen, key=lambda item: item[0])
    cons: list[tuple[dict[int, int], str, int]] = []
    base = list(query.source.values)
    coef: list[dict[int, int]] = [dict() for _ in range(total)]

    def add_step(tid: int, vals: list[int], cf: list[dict[int, int]]) -> None:
        t = system.transitions[tid]
        if t.ztest is not None:
            idx = t.ztest - 1
            cons.append((dict(cf[idx]), EQ, -vals[idx]))
        for i, u in enumerate(t.update.entries):
            vals[i] += u
        cons.append(({v: -c for v, c in cf[0].items()}, LE, vals[0]))

    cursor = 0
    for slot, (pos, cyc) in enumerate(pos_sorted):
        while cursor < pos:
            add_step(path[cursor], base, coef)
            cursor += 1
        cyc_eff = _effect_of(system, cyc)
        first_v = list(base)
        first_c = [dict(c) for c in coef]
        for tid in cyc:
            add_step(tid, first_v, first_c)
        last_v = list(base)
        last_c = [dict(c) for c in coef]
        for i in range(total):
            last_v[i] -= cyc_eff[i]
            last_c[i][slot] = last_c[i].get(slot, 0) + cyc_eff[i]
        for tid in cyc:
            add_step(tid, last_v, last_c)
        for i in range(total):
            coef[i][slot] = coef[i].get(slot, 0) + cyc_eff[i]
    while cursor < len(path):
        add_step(path[cursor], base, coef)
        cursor += 1
    for i in range(total):
        cons.append((dict(coef[i]), EQ, query.target.values[i] - base[i]))
    prog = IntProgram.build(
        n,
        cons,
        lower={j: 1 for j in range(n)},
        upper={j: caps.max_exponent for j in range(n)},
    )
    sol = ilp_feasible(prog)
    if sol is None:
        return None
    paths: list[tuple[int, ...]] = []
    cycles: list[tuple[int, ...]] = []
    exps: list[int] = []
    cursor = 0
    segment: list[int] = []
    for slot, (pos, cyc) in enumerate(pos_sorted):
        while cursor < pos:
            segment.append(path[cursor])
            cursor += 1
        paths.append(tuple(segment))
        segment = []
        cycles.append(cyc)
        exps.append(sol[slot])
    while cursor < len(path):
        segment.append(path[cursor])
        cursor += 1
    paths.append(tuple(segment))
    scheme = LinearPathScheme(tuple(paths), tuple(cycles), tuple(exps))
    validate(query, scheme)
    return scheme
