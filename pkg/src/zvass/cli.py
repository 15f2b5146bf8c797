"""Unified command line front end.

One subcommand per toolkit entry point; every verdict is printed together
with the caps or bounds it was computed under, so an inconclusive answer
can never be mistaken for a negative one.  Exit codes: 0 for conclusive
verdicts and passing verifications, 2 for within-caps inconclusive
answers, 1 for errors.  All output is byte-deterministic for fixed inputs
and seeds.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass

from . import ctrprog, klmst, lps, oracle, parikh, reductions
from .core import (
    Configuration,
    ReachQuery,
    ZVass,
    ZVassError,
    parse_instance,
    serialize_instance,
)

OK = 0
ERROR = 1
INCONCLUSIVE = 2

# rough per-configuration footprint of the visited set, used to turn
# ZVASS_MEM_CAP_MB into a node cap
_BYTES_PER_NODE = 200


class CliUsageError(ZVassError):
    """Bad flags or malformed command line."""


@dataclass(frozen=True)
class CliConfig:
    """Everything one invocation needs: exactly one subcommand, resolved
    inputs and outputs, bounds or caps, and the output format."""

    subcommand: str
    inputs: tuple[str, ...] = ()
    output: str | None = None
    fmt: str = "text"
    seed: int = 0
    threads: int = 1
    bounds: oracle.Bounds | None = None
    caps: klmst.Caps | None = None
    node_cap: int | None = None
    options: tuple[tuple[str, object], ...] = ()

    def __post_init__(self) -> None:
        if not self.subcommand:
            raise CliUsageError("missing subcommand")
        if self.fmt not in ("text", "json", "dot"):
            raise CliUsageError(f"unknown output format {self.fmt!r}")
        if self.threads < 1:
            raise CliUsageError("ZVASS_THREADS must be a positive integer")
        if self.node_cap is not None and self.node_cap < 1:
            raise CliUsageError("node cap must be a positive integer")

    def opt(self, name: str, default=None):
        for key, value in self.options:
            if key == name:
                return value
        return default


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise CliUsageError(message)


def _env_threads() -> int:
    raw = os.environ.get("ZVASS_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise CliUsageError(f"ZVASS_THREADS={raw!r} is not an integer") from None
    return n


def _env_node_cap(explicit: int | None) -> int | None:
    if explicit is not None:
        return explicit
    raw = os.environ.get("ZVASS_MEM_CAP_MB")
    if raw is None:
        return None
    try:
        mb = int(raw)
    except ValueError:
        raise CliUsageError(f"ZVASS_MEM_CAP_MB={raw!r} is not an integer") from None
    if mb < 1:
        raise CliUsageError("ZVASS_MEM_CAP_MB must be a positive integer")
    return max(1, mb * 1_048_576 // _BYTES_PER_NODE)


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliUsageError(f"cannot read {path}: {exc}") from None


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _json_safe(value):
    """Provenance dicts carry live helper objects; render them compactly
    and drop underscore-keyed internals."""
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    if isinstance(value, dict):
        return {
            str(k): _json_safe(v) for k, v in value.items() if not str(k).startswith("_")
        }
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(_json_safe(v) for v in value)
    if isinstance(value, ctrprog.CounterProgram):
        return ctrprog.serialize_program(value)
    if isinstance(value, ctrprog.CompiledUnit):
        return {
            "entry": value.entry,
            "exit": value.exit,
            "states": len(value.system.states),
            "transitions": len(value.system.transitions),
        }
    return f"<{type(value).__name__}>"


def _load_any(path: str):
    """Parse a plain instance or a generalised one, by header keyword."""
    text = _read(path)
    for line in text.splitlines():
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        head = stripped.split()[0]
        if head == "gzvass":
            return klmst.parse_generalised(text)
        break
    return parse_instance(text)


def _bounds_dict(bounds: oracle.Bounds, node_cap: int | None) -> dict:
    return {
        "nmax": bounds.nmax,
        "zabs": bounds.zabs,
        "lmax": bounds.lmax,
        "node_cap": node_cap,
    }


def _bounds_line(bounds: oracle.Bounds, node_cap: int | None) -> str:
    cap = "none" if node_cap is None else str(node_cap)
    return f"caps: nmax={bounds.nmax} zabs={bounds.zabs} lmax={bounds.lmax} node-cap={cap}"


def _caps_dict(caps: klmst.Caps) -> dict:
    return {f.name: getattr(caps, f.name) for f in dataclasses.fields(caps)}


def _caps_line(caps: klmst.Caps) -> str:
    parts = " ".join(f"{f.name}={getattr(caps, f.name)}" for f in dataclasses.fields(caps))
    return f"caps: {parts}"


def _parse_caps(spec: str | None) -> klmst.Caps:
    caps = klmst.Caps()
    if not spec:
        return caps
    fields = {f.name for f in dataclasses.fields(klmst.Caps)}
    overrides: dict[str, int] = {}
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        key, eq, value = item.partition("=")
        if not eq or key not in fields:
            raise CliUsageError(f"bad caps entry {item!r}; known keys: {', '.join(sorted(fields))}")
        try:
            overrides[key] = int(value)
        except ValueError:
            raise CliUsageError(f"caps value for {key} must be an integer") from None
    try:
        return dataclasses.replace(caps, **overrides)
    except ValueError as exc:
        raise CliUsageError(str(exc)) from None


def _config_json(config: Configuration) -> dict:
    return {"state": config.state, "nat": list(config.nvals), "int": list(config.zvals)}


def _witness_json(trace, bounds: oracle.Bounds, node_cap: int | None) -> str:
    return _json_text(
        {
            "schema": "zvass.witness/1",
            "caps": _bounds_dict(bounds, node_cap),
            "configurations": [_config_json(c) for c in trace.configs],
            "transitions": list(trace.path),
        }
    )


# -- dot emission --------------------------------------------------------------


def _label_vals(entries, d: int) -> str:
    nats = " ".join(str(v) for v in entries[:d])
    ints = " ".join(str(v) for v in entries[d:])
    return f"{nats} ; {ints}"


def export_dot(system) -> str:
    """One node per state, one edge per transition; boundary edges of a
    generalised system are dashed and carry their test."""
    lines = ["digraph zvass {"]
    if isinstance(system, klmst.GeneralisedZVass):
        d = system.layout.d
        for comp in system.components:
            for q in comp.states:
                lines.append(f'  "{q}";')
        for ci, comp in enumerate(system.components):
            for t in comp.transitions:
                if t.ztest is not None:
                    label = f"c{ci}.t{t.tid}: ztest {t.ztest}"
                else:
                    label = f"c{ci}.t{t.tid}: {_label_vals(t.update.entries, d)}"
                lines.append(f'  "{t.src}" -> "{t.dst}" [label="{label}"];')
        for bi, b in enumerate(system.boundaries):
            label = f"e{bi + 1}: {_label_vals(b.update.entries, d)} | test {b.test}"
            if b.ztest is not None:
                label += f" | ztest {b.ztest}"
            lines.append(f'  "{b.src}" -> "{b.dst}" [style=dashed, label="{label}"];')
    else:
        d = system.layout.d
        for q in system.states:
            lines.append(f'  "{q}";')
        for t in system.transitions:
            if t.ztest is not None:
                label = f"t{t.tid}: ztest {t.ztest}"
            else:
                label = f"t{t.tid}: {_label_vals(t.update.entries, d)}"
            lines.append(f'  "{t.src}" -> "{t.dst}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- gadget verification table --------------------------------------------------


def _spec_exact_mult(a: int, b: int, xmax: int) -> ctrprog.GadgetSpec:
    prog = ctrprog.CounterProgram(
        (ctrprog.Decl("x", ctrprog.NAT), ctrprog.Decl("y", ctrprog.NAT)),
        (ctrprog.MacroCall("exact-mult", ("x", "y", a, b)),),
    )

    def relation(initial: dict, final: dict) -> bool:
        x0 = initial["x"]
        return x0 % b == 0 and final["y"] == 0 and final["x"] * b == x0 * a

    bounds = oracle.Bounds(xmax * max(a, b) + 2, 4, 8 * xmax + 24)
    initials = tuple({"x": x0} for x0 in range(xmax + 1))
    return ctrprog.GadgetSpec("exact-mult", prog, initials, bounds, relation)


def _spec_weak_mult(a: int, b: int, x0: int) -> ctrprog.GadgetSpec:
    prog = ctrprog.CounterProgram(
        (ctrprog.Decl("x", ctrprog.NAT), ctrprog.Decl("xbar", ctrprog.NAT)),
        (ctrprog.MacroCall("weak-mult", ("x", "xbar", a, b)),),
    )

    def relation(initial: dict, final: dict) -> bool:
        v = initial["x"]
        for j in range(v // b + 1):
            m = final["xbar"] + b * j
            if m <= v and final["x"] == v - m + a * j:
                return True
        return False

    bounds = oracle.Bounds(x0 * max(a, b) + 2, 4, 8 * x0 + 24)
    return ctrprog.GadgetSpec("weak-mult", prog, ({"x": x0},), bounds, relation)


def _spec_sixteen_triple(cmax: int) -> ctrprog.GadgetSpec:
    prog = ctrprog.CounterProgram(
        (
            ctrprog.Decl("x", ctrprog.NAT),
            ctrprog.Decl("y", ctrprog.INT),
            ctrprog.Decl("z", ctrprog.INT),
        ),
        (ctrprog.MacroCall("16-triple", ("x", "y", "z")),),
    )

    def relation(initial: dict, final: dict) -> bool:
        return (
            final["x"] == 16
            and final["y"] % 2 == 0
            and 0 <= final["y"] <= 2 * cmax
            and final["z"] == 16 * final["y"]
        )

    bounds = oracle.Bounds(16, 32 * cmax + 4, 2 * cmax + 8)
    return ctrprog.GadgetSpec("16-triple", prog, ({},), bounds, relation)


def _spec_mult(bmax: int, k: int, cmax: int) -> ctrprog.GadgetSpec:
    us = tuple(f"u{i + 1}" for i in range(k))
    decls = (
        ctrprog.Decl("x", ctrprog.NAT),
        ctrprog.Decl("xbar", ctrprog.NAT),
        ctrprog.Decl("y", ctrprog.INT),
        ctrprog.Decl("z", ctrprog.INT),
    ) + tuple(ctrprog.Decl(u, ctrprog.INT) for u in us)
    prog = ctrprog.CounterProgram(decls, (ctrprog.MacroCall("mult", ("x", "xbar", "y", "z", us)),))

    def grids():
        out = []
        for b_val in range(1, bmax + 1):
            for point in range((cmax + 1) ** k):
                cs, rest = [], point
                for _ in range(k):
                    cs.append(rest % (cmax + 1))
                    rest //= cmax + 1
                total = sum(cs)
                good = {"x": b_val, "y": total, "z": 2 * b_val * total}
                good.update({u: c for u, c in zip(us, cs)})
                out.append(good)
                # a budget pair for one more iteration than the units allow
                bad = dict(good, y=total + 1, z=2 * b_val * (total + 1))
                out.append(bad)
        return tuple(out)

    def relation(initial: dict, final: dict) -> bool:
        if final["y"] != 0 or final["z"] != 0 or final["xbar"] != 0:
            return True
        if initial["y"] != sum(initial[u] for u in us):
            return False
        return final["x"] == initial["x"] and all(
            final[u] == initial["x"] * initial[u] for u in us
        )

    span = max(2 * bmax * (k * cmax + 1), bmax * cmax) + 2
    bounds = oracle.Bounds(bmax + 2, span, (2 * bmax + 6) * (k * cmax + 2) * 2 + 24)
    return ctrprog.GadgetSpec("mult", prog, grids(), bounds, relation)


def _gadget_spec(config: CliConfig) -> ctrprog.GadgetSpec:
    name = config.opt("gadget")
    cmax = config.opt("cmax", 3)
    a, b = config.opt("a", 3), config.opt("b", 2)
    if name == "exact-mult":
        return _spec_exact_mult(a, b, config.opt("xmax", 8))
    if name == "weak-mult":
        return _spec_weak_mult(a, b, config.opt("x0", 4))
    if name == "16-triple":
        return _spec_sixteen_triple(cmax)
    if name == "mult":
        return _spec_mult(config.opt("bmax", 2), config.opt("k", 1), cmax)
    raise CliUsageError(f"unknown gadget {name!r}; choose from 16-triple, exact-mult, mult, weak-mult")


# -- subcommand handlers --------------------------------------------------------


def _cmd_reach(config: CliConfig) -> int:
    query = parse_instance(_read(config.inputs[0]))
    answer = oracle.bounded_reach(query, config.bounds, node_cap=config.node_cap)
    if config.fmt == "json":
        payload = {
            "schema": "zvass.verdict/1",
            "verdict": answer.verdict,
            "caps": _bounds_dict(config.bounds, config.node_cap),
            "explored": answer.explored,
        }
        if answer.trace is not None:
            payload["length"] = len(answer.trace)
        print(_json_text(payload), end="")
    else:
        print(f"verdict: {answer.verdict}")
        print(_bounds_line(config.bounds, config.node_cap))
        if answer.trace is not None:
            print(f"length: {len(answer.trace)}")
    emit = config.opt("emit_witness")
    if emit and answer.trace is not None:
        _write(emit, _witness_json(answer.trace, config.bounds, config.node_cap))
    return OK if answer.reachable else INCONCLUSIVE


def _cmd_reach_set(config: CliConfig) -> int:
    query = parse_instance(_read(config.inputs[0]))
    configs = oracle.reach_set(query.system, query.source, config.bounds, node_cap=config.node_cap)
    ordered = sorted(configs, key=lambda c: (c.state, c.values))
    if config.fmt == "json":
        payload = {
            "schema": "zvass.reach-set/1",
            "caps": _bounds_dict(config.bounds, config.node_cap),
            "configurations": [_config_json(c) for c in ordered],
        }
        print(_json_text(payload), end="")
    else:
        print(_bounds_line(config.bounds, config.node_cap))
        print(f"configurations: {len(ordered)}")
        for c in ordered:
            print(f"{c.state} : {_label_vals(c.values, len(c.nvals))}")
    return OK


def _cmd_lps_validate(config: CliConfig) -> int:
    query = parse_instance(_read(config.inputs[0]))
    scheme = lps.LinearPathScheme.from_json(_read(config.inputs[1]))
    summary = lps.validate(query, scheme)
    if config.fmt == "json":
        payload = {
            "schema": "zvass.lps-validate/1",
            "ok": True,
            "total_length": summary.total_length,
            "checked_configs": summary.checked_configs,
            "source": _config_json(summary.source),
            "target": _config_json(summary.target),
        }
        print(_json_text(payload), end="")
    else:
        print("verdict: valid")
        print(f"total-length: {summary.total_length}")
        print(f"checked-configs: {summary.checked_configs}")
    return OK


def _cmd_lps_compress(config: CliConfig) -> int:
    query = parse_instance(_read(config.inputs[0]))
    answer = oracle.bounded_reach(query, config.bounds, node_cap=config.node_cap)
    if answer.trace is None:
        print(f"verdict: {answer.verdict}")
        print(_bounds_line(config.bounds, config.node_cap))
        return INCONCLUSIVE
    scheme = lps.compress_run(query, answer.trace)
    lps.validate(query, scheme)
    text = scheme.to_json()
    if config.output:
        _write(config.output, text)
        print(
            f"verdict: compressed into {len(scheme.cycles)} cycles"
            f" over a length-{len(scheme.underlying_path())} path"
        )
        print(_bounds_line(config.bounds, config.node_cap))
    else:
        print(text, end="" if text.endswith("\n") else "\n")
    return OK


def _cmd_solve1(config: CliConfig) -> int:
    query = parse_instance(_read(config.inputs[0]))
    caps = lps.SolveCaps(
        max_path_len=config.opt("max_path_len", 10),
        max_cycle_len=config.opt("max_cycle_len", 4),
        max_support=config.opt("max_support", 3),
        max_skeletons=config.opt("max_skeletons", 20_000),
    )
    result = lps.solve_dim1(query, caps)
    caps_line = (
        f"caps: max-path-len={caps.max_path_len} max-cycle-len={caps.max_cycle_len}"
        f" max-support={caps.max_support} max-skeletons={caps.max_skeletons}"
    )
    if config.fmt == "json":
        payload = {
            "schema": "zvass.verdict/1",
            "verdict": result.verdict,
            "caps": {
                "max_path_len": caps.max_path_len,
                "max_cycle_len": caps.max_cycle_len,
                "max_support": caps.max_support,
                "max_skeletons": caps.max_skeletons,
            },
        }
        print(_json_text(payload), end="")
    else:
        print(f"verdict: {result.verdict}")
        print(caps_line)
    if result.scheme is not None and config.output:
        _write(config.output, result.scheme.to_json())
    return OK if result.scheme is not None else INCONCLUSIVE


def _cmd_to_oca(config: CliConfig) -> int:
    query = parse_instance(_read(config.inputs[0]))
    oca = parikh.zvass1_to_oca(*parikh.zero_form(query))
    text = parikh.serialize_oca(oca)
    if config.output:
        _write(config.output, text)
        print(f"wrote {config.output}")
    else:
        print(text, end="")
    return OK


def _cmd_balanced_witness(config: CliConfig) -> int:
    oca = parikh.parse_oca(_read(config.inputs[0]))
    cap = config.opt("cap", 16)
    word = parikh.balanced_witness(oca, cap, node_cap=config.node_cap)
    if config.fmt == "json":
        payload = {
            "schema": "zvass.balanced-witness/1",
            "caps": {"cap": cap, "node_cap": config.node_cap},
            "word": None if word is None else list(word),
        }
        print(_json_text(payload), end="")
    else:
        print(f"verdict: {'witness' if word is not None else 'no-within-caps'}")
        print(f"caps: cap={cap} node-cap={'none' if config.node_cap is None else config.node_cap}")
        if word is not None:
            print("word: " + " ".join(word))
    return OK if word is not None else INCONCLUSIVE


def _cmd_cp_compile(config: CliConfig) -> int:
    program = ctrprog.parse_program(_read(config.inputs[0]))
    backend = config.opt("backend", "ca")
    unit = ctrprog.compile_program(program, backend)
    if config.output:
        zeros = {name: 0 for name in unit.declared}
        query = ReachQuery(unit.system, unit.initial_config(zeros), unit.final_config(zeros))
        _write(config.output, serialize_instance(query))
    payload = {
        "schema": "zvass.cp-compile/1",
        "backend": backend,
        "entry": unit.entry,
        "exit": unit.exit,
        "states": len(unit.system.states),
        "transitions": len(unit.system.transitions),
        "slots": dict(sorted(unit.slots.items())),
        "shadows": [list(pair) for pair in unit.manifest],
    }
    if config.fmt == "json":
        print(_json_text(payload), end="")
    else:
        print(f"backend: {backend}")
        print(f"entry: {unit.entry}")
        print(f"exit: {unit.exit}")
        print(f"states: {payload['states']}")
        print(f"transitions: {payload['transitions']}")
        if config.output:
            print(f"wrote {config.output}")
    return OK


def _cmd_cp_verify(config: CliConfig) -> int:
    spec = _gadget_spec(config)
    unit = ctrprog.compile_program(spec.program, "ca")
    report = ctrprog.verify_gadget(spec)
    listing = []
    for initial in spec.initials:
        for final in sorted(ctrprog.accepted_finals(unit, dict(initial), spec.bounds)):
            listing.append((tuple(sorted(initial.items())), final))
    if config.fmt == "json":
        payload = {
            "schema": "zvass.cp-verify/1",
            "gadget": report.name,
            "ok": report.ok,
            "checked": report.checked,
            "caps": _bounds_dict(spec.bounds, None),
            "accepted": [
                {"initial": dict(initial), "final": dict(final)} for initial, final in listing
            ],
            "counterexamples": [
                {"initial": initial, "final": final} for initial, final in report.counterexamples
            ],
        }
        print(_json_text(payload), end="")
    else:
        print(f"gadget: {report.name}")
        print(f"verdict: {'ok' if report.ok else 'failed'}")
        print(_bounds_line(spec.bounds, None))
        print(f"checked: {report.checked}")
        for initial, final in listing:
            ini = " ".join(f"{k}={v}" for k, v in initial)
            fin = " ".join(f"{k}={v}" for k, v in final)
            print(f"accepted: [{ini}] -> [{fin}]")
        for initial, final in report.counterexamples:
            ini = " ".join(f"{k}={v}" for k, v in sorted(initial.items()))
            fin = " ".join(f"{k}={v}" for k, v in sorted(final.items()))
            print(f"counterexample: [{ini}] -> [{fin}]")
    return OK if report.ok else ERROR


def _parse_ops(raw: str):
    ops = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        if item == "n":
            ops.append(("nop",))
            continue
        kind, arg = item[0], item[1:]
        table = {"i": "inc", "d": "dec", "z": "ztest"}
        if kind not in table or arg not in ("1", "2", "3"):
            raise CliUsageError(f"bad op {item!r}; use i1/d2/z3 or n, comma separated")
        ops.append((table[kind], int(arg)))
    return tuple(ops)


def _cmd_gen(config: CliConfig) -> int:
    kind = config.opt("kind")
    if kind == "subset-sum":
        xs = tuple(int(v) for v in config.opt("xs", "").split(",") if v.strip())
        if not xs:
            raise CliUsageError("gen subset-sum needs --xs like 3,5,7")
        bundle = reductions.subset_sum_to_izvass(xs, config.opt("target", 0))
    elif kind == "ca-sim":
        ops = _parse_ops(config.opt("ops", ""))
        if not ops:
            raise CliUsageError("gen ca-sim needs --ops like i1,i2,d1,z1")
        ca = reductions.chain_ca(ops)
        bundle = reductions.ca3_to_zvass2(ca, config.opt("n", 1), pair=config.opt("pair", "assumed"))
    elif kind == "tower":
        bundle = reductions.tower_instance(config.opt("n", 3))
    elif kind == "gallery":
        name = config.opt("name")
        if not name:
            raise CliUsageError("gen gallery needs --name; see `zvass gallery`")
        bundle = reductions.gallery(name)
    else:
        raise CliUsageError(f"unknown generator {kind!r}")
    out = config.output
    if not out:
        raise CliUsageError("gen needs --out")
    sidecar = config.opt("sidecar") or out + ".provenance.json"
    _write(out, serialize_instance(bundle.query))
    expected = None
    if bundle.expected is not None:
        expected = {
            "verdict": bundle.expected.verdict,
            "basis": bundle.expected.basis,
            "note": bundle.expected.note,
        }
    _write(
        sidecar,
        _json_text(
            {
                "schema": "zvass.provenance/1",
                "generator": kind,
                "provenance": bundle.provenance,
                "expected": expected,
            }
        ),
    )
    print(f"wrote {out}")
    print(f"wrote {sidecar}")
    return OK


def _cmd_gallery(config: CliConfig) -> int:
    name = config.opt("name")
    if name:
        bundle = reductions.gallery(name)
        text = serialize_instance(bundle.query)
        if config.output:
            _write(config.output, text)
            print(f"wrote {config.output}")
        else:
            print(text, end="")
        return OK
    rows = []
    for entry in reductions.GALLERY_NAMES:
        bundle = reductions.gallery(entry)
        expected = bundle.expected
        rows.append((entry, expected.verdict if expected else "unknown", expected.basis if expected else ""))
    if config.fmt == "json":
        payload = {
            "schema": "zvass.gallery/1",
            "instances": [{"name": n, "verdict": v, "basis": b} for n, v, b in rows],
        }
        print(_json_text(payload), end="")
    else:
        for n, v, b in rows:
            print(f"{n}: {v}" + (f" ({b})" if b else ""))
    return OK


def _cmd_klmst(config: CliConfig) -> int:
    query = _load_any(config.inputs[0])
    caps = config.caps
    verdict = klmst.klmst_decide(query, caps)
    if config.fmt == "json":
        payload = {
            "schema": "zvass.verdict/1",
            "verdict": verdict.kind,
            "caps": _caps_dict(caps),
        }
        if verdict.trace is not None:
            payload["length"] = len(verdict.trace)
        if verdict.report:
            payload["report"] = verdict.report
        print(_json_text(payload), end="")
    else:
        print(f"verdict: {verdict.kind}")
        print(_caps_line(caps))
        if verdict.trace is not None:
            print(f"length: {len(verdict.trace)}")
        if verdict.report:
            print(f"report: {verdict.report}")
    tree_out = config.opt("trace_tree")
    if tree_out:
        _write(
            tree_out,
            _json_text(
                {
                    "schema": "zvass.klmst-tree/1",
                    "verdict": verdict.kind,
                    "caps": _caps_dict(caps),
                    "tree": verdict.tree,
                }
            ),
        )
    return OK if verdict.kind in (klmst.REACH, klmst.NONREACH) else INCONCLUSIVE


def _cmd_dot(config: CliConfig) -> int:
    query = _load_any(config.inputs[0])
    system = query.gv if isinstance(query, klmst.GenQuery) else query.system
    text = export_dot(system)
    if config.output:
        _write(config.output, text)
        print(f"wrote {config.output}")
    else:
        print(text, end="")
    return OK


_HANDLERS = {
    "reach": _cmd_reach,
    "reach-set": _cmd_reach_set,
    "lps-validate": _cmd_lps_validate,
    "lps-compress": _cmd_lps_compress,
    "solve1": _cmd_solve1,
    "to-oca": _cmd_to_oca,
    "balanced-witness": _cmd_balanced_witness,
    "cp-compile": _cmd_cp_compile,
    "cp-verify": _cmd_cp_verify,
    "gen": _cmd_gen,
    "gallery": _cmd_gallery,
    "klmst": _cmd_klmst,
    "dot": _cmd_dot,
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="zvass", description="Reachability toolkit for VASS with integer counters")
    sub = parser.add_subparsers(dest="subcommand", metavar="command")

    def add(name: str, **kwargs) -> argparse.ArgumentParser:
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--json", action="store_true", help="machine readable output")
        return p

    def add_bounds(p: argparse.ArgumentParser) -> None:
        p.add_argument("--nmax", type=int, default=8)
        p.add_argument("--zabs", type=int, default=16)
        p.add_argument("--lmax", type=int, default=64)
        p.add_argument("--node-cap", type=int, default=None)

    p = add("reach", help="bounded search on a plain instance")
    p.add_argument("file")
    add_bounds(p)
    p.add_argument("--emit-witness", metavar="OUT")

    p = add("reach-set", help="all in-box configurations reachable from the source")
    p.add_argument("file")
    add_bounds(p)

    p = add("lps-validate", help="replay a linear path scheme certificate")
    p.add_argument("file")
    p.add_argument("scheme")

    p = add("lps-compress", help="find a witness and compress it into a scheme")
    p.add_argument("file")
    add_bounds(p)
    p.add_argument("--out", metavar="OUT")

    p = add("solve1", help="scheme search for one-counter instances")
    p.add_argument("file")
    p.add_argument("--max-path-len", type=int, default=10)
    p.add_argument("--max-cycle-len", type=int, default=4)
    p.add_argument("--max-support", type=int, default=3)
    p.add_argument("--max-skeletons", type=int, default=20_000)
    p.add_argument("--out", metavar="OUT")

    p = add("to-oca", help="translate a one-counter instance to an automaton")
    p.add_argument("file")
    p.add_argument("--out", metavar="OUT")

    p = add("balanced-witness", help="shortest balanced accepted word of an automaton")
    p.add_argument("file")
    p.add_argument("--cap", type=int, default=16)
    p.add_argument("--node-cap", type=int, default=None)

    p = add("cp-compile", help="compile a counter program")
    p.add_argument("file")
    p.add_argument("--backend", choices=("ca", "zvass"), default="ca")
    p.add_argument("--out", metavar="OUT")

    p = add("cp-verify", help="verify a library gadget against its contract")
    p.add_argument("--gadget", required=True)
    p.add_argument("--cmax", type=int, default=3)
    p.add_argument("--xmax", type=int, default=8)
    p.add_argument("--x0", type=int, default=4)
    p.add_argument("--a", type=int, default=3)
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--bmax", type=int, default=2)
    p.add_argument("--k", type=int, default=1)

    p = add("gen", help="emit a generated instance plus provenance sidecar")
    p.add_argument("kind", choices=("subset-sum", "ca-sim", "tower", "gallery"))
    p.add_argument("--xs")
    p.add_argument("--target", type=int, default=0)
    p.add_argument("--ops")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--pair", choices=("assumed", "generated"), default="assumed")
    p.add_argument("--name")
    p.add_argument("--out", metavar="OUT")
    p.add_argument("--sidecar", metavar="OUT")
    p.add_argument("--seed", type=int, default=0)

    p = add("gallery", help="list curated instances or print one")
    p.add_argument("--name")
    p.add_argument("--out", metavar="OUT")

    p = add("klmst", help="decomposition decider for plain or generalised instances")
    p.add_argument("file")
    p.add_argument("--caps", metavar="K=V,...")
    p.add_argument("--trace-tree", metavar="OUT")

    p = add("dot", help="emit the transition graph in DOT form")
    p.add_argument("file")
    p.add_argument("--out", metavar="OUT")

    return parser


_OPTION_KEYS = (
    "emit_witness",
    "max_path_len",
    "max_cycle_len",
    "max_support",
    "max_skeletons",
    "cap",
    "backend",
    "gadget",
    "cmax",
    "xmax",
    "x0",
    "a",
    "b",
    "bmax",
    "k",
    "kind",
    "xs",
    "target",
    "ops",
    "n",
    "pair",
    "name",
    "sidecar",
    "trace_tree",
)


def _to_config(ns: argparse.Namespace) -> CliConfig:
    if not ns.subcommand:
        raise CliUsageError("missing subcommand; try --help")
    inputs = []
    for attr in ("file", "scheme"):
        value = getattr(ns, attr, None)
        if value is not None:
            inputs.append(value)
    bounds = None
    if hasattr(ns, "nmax"):
        bounds = oracle.Bounds(nmax=ns.nmax, zabs=ns.zabs, lmax=ns.lmax)
    caps = _parse_caps(getattr(ns, "caps", None)) if ns.subcommand == "klmst" else None
    options = tuple(
        (key, getattr(ns, key)) for key in _OPTION_KEYS if getattr(ns, key, None) is not None
    )
    return CliConfig(
        subcommand=ns.subcommand,
        inputs=tuple(inputs),
        output=getattr(ns, "out", None),
        fmt="json" if getattr(ns, "json", False) else "text",
        seed=getattr(ns, "seed", 0),
        threads=_env_threads(),
        bounds=bounds,
        caps=caps,
        node_cap=_env_node_cap(getattr(ns, "node_cap", None)),
        options=options,
    )


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        config = _to_config(ns)
        return _HANDLERS[config.subcommand](config)
    except CliUsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return ERROR
    except ZVassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR


def entrypoint() -> None:
    sys.exit(main())
