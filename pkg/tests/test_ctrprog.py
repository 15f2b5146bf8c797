"""Counter-program DSL, gadget library, compilers, and interpreter tests."""

from __future__ import annotations

import random

import pytest

from zvass import oracle
from zvass.core import FormatError, ReachQuery
from zvass.ctrprog import (
    Add,
    ArityMismatch,
    BNotDivisibleBy8,
    CounterProgram,
    Decl,
    For,
    GuessResidue,
    Loop,
    MacroCall,
    Script,
    ScriptRejected,
    ShadowTestInsideLoop,
    Sub,
    Transfer,
    UndeclaredCounter,
    UnknownMacro,
    ZeroTest,
    accepted_finals,
    amplifier_step,
    amplifier_witness,
    compile_program,
    compiled_path,
    compiled_run,
    double_exp_triple,
    double_exp_witness,
    expand_macro,
    interp_finals,
    parse_program,
    run_script,
    serialize_program,
    tower_triple,
    verify_gadget,
    GadgetSpec,
)


def decl(*pairs: tuple[str, str]) -> tuple[Decl, ...]:
    return tuple(Decl(n, k) for n, k in pairs)


def finals_dicts(unit, initial, bounds):
    return [dict(t) for t in accepted_finals(unit, initial, bounds)]


class TestExpansion:
    def test_exact_mult_listing(self):
        got = expand_macro("exact-mult", ("x", "y", 3, 2))
        assert got == (
            Loop((Transfer("x", ("y",)),)),
            ZeroTest("x"),
            Loop((Sub("y", 2), Add("x", 3))),
            ZeroTest("y"),
        )

    def test_move_listing(self):
        got = expand_macro("move", ("t", "u"))
        assert got == (Loop((Transfer("t", ("u",)),)), ZeroTest("t"))

    def test_sixteen_triple_listing(self):
        got = expand_macro("16-triple", ("x", "y", "z"))
        assert got == (Add("x", 16), Loop((Add("y", 2), Add("z", 32))))

    def test_copy_shape(self):
        got = expand_macro("copy", ("a", "b"))
        assert len(got) == 4
        aux = got[0].body[0].targets[1]
        assert got == (
            Loop((Transfer("a", ("b", aux)),)),
            ZeroTest("a"),
            Loop((Transfer(aux, ("a",)),)),
            ZeroTest(aux),
        )

    def test_weak_mult_has_no_tests(self):
        got = expand_macro("weak-mult", ("x", "xb", 7, 1))
        assert len(got) == 2
        assert all(isinstance(i, Loop) for i in got)

    def test_residue_branches(self):
        (guess,) = expand_macro("residue-test", ("x", "xb", 5))
        assert isinstance(guess, GuessResidue)
        assert guess.range_ == 5
        assert len(guess.branches) == 4
        for r, branch in enumerate(guess.branches, start=1):
            assert branch[0] == Sub("x", r)
            assert branch[-1] == Add("x", 7 * r)

    def test_unknown_macro(self):
        with pytest.raises(UnknownMacro):
            expand_macro("frobnicate", ())

    def test_arity_mismatch(self):
        with pytest.raises(ArityMismatch):
            expand_macro("move", ("t",))

    def test_for_unrolls_with_substitution(self):
        prog = CounterProgram(
            decl(("y0", "int"), ("y1", "int"), ("y2", "int")),
            (For("i", 0, 2, (Add("y$i", 1),)),),
        )
        unit = compile_program(prog, "ca")
        assert unit.program.body == (Add("y0", 1), Add("y1", 1), Add("y2", 1))


class TestCompile:
    def test_sixteen_triple_shape(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("y", "int"), ("z", "int")),
            (MacroCall("16-triple", ("x", "y", "z")),),
        )
        unit = compile_program(prog, "ca")
        assert len(unit.system.states) == 6
        assert len(unit.system.transitions) == 6
        assert unit.entry == "n0"

    def test_undeclared_counter(self):
        prog = CounterProgram(decl(("x", "nat")), (Add("ghost", 1),))
        with pytest.raises(UndeclaredCounter):
            compile_program(prog, "ca")

    def test_ca_backend_emits_ztest_transitions(self):
        prog = CounterProgram(decl(("x", "nat")), (Add("x", 1), ZeroTest("x")))
        unit = compile_program(prog, "ca")
        tests = [t for t in unit.system.transitions if t.ztest is not None]
        assert len(tests) == 1
        assert tests[0].ztest == unit.slots["x"]

    def test_zvass_backend_lowers_shadow(self):
        prog = CounterProgram(
            decl(("x", "nat")),
            (Add("x", 2), Sub("x", 2), ZeroTest("x", "shadow"), Add("x", 1)),
        )
        unit = compile_program(prog, "zvass")
        assert all(t.ztest is None for t in unit.system.transitions)
        assert unit.manifest == (("~sh0", "x"),)
        assert unit.system.layout.k == 1
        # mirrored before the test, frozen after
        sh = unit.slots["~sh0"] - 1
        ups = [t.update.entries[sh] for t in unit.system.transitions]
        assert ups == [2, -2, 0, 0]

    def test_shadow_inside_loop_rejected(self):
        prog = CounterProgram(
            decl(("x", "nat")),
            (Loop((ZeroTest("x", "shadow"),)),),
        )
        with pytest.raises(ShadowTestInsideLoop):
            compile_program(prog, "zvass")

    def test_shadow_inside_branch_rejected(self):
        prog = CounterProgram(
            decl(("x", "nat")),
            (
                GuessResidue(
                    2, ((Sub("x", 1), ZeroTest("x", "shadow")),)
                ),
            ),
        )
        with pytest.raises(ShadowTestInsideLoop):
            compile_program(prog, "zvass")

    def test_native_test_has_no_zvass_lowering(self):
        prog = CounterProgram(decl(("x", "nat")), (ZeroTest("x"),))
        with pytest.raises(ValueError):
            compile_program(prog, "zvass")

    def test_guess_fans_out(self):
        prog = CounterProgram(
            decl(("x", "nat")),
            (GuessResidue(4, ((Sub("x", 1),), (Sub("x", 2),), (Sub("x", 3),))),),
        )
        unit = compile_program(prog, "ca")
        outs = [t for t in unit.system.transitions if t.src == unit.entry]
        assert len(outs) == 3


class TestScripts:
    def test_exact_mult_replay(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("y", "int")),
            (MacroCall("exact-mult", ("x", "y", 3, 2)),),
        )
        out = run_script(prog, {"x": 4}, Script(loops=[4, 2]))
        assert out == {"x": 6, "y": 0}

    def test_bad_loop_count_fails_test(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("y", "int")),
            (MacroCall("exact-mult", ("x", "y", 3, 2)),),
        )
        with pytest.raises(ScriptRejected, match="zero-test"):
            run_script(prog, {"x": 4}, Script(loops=[3, 2]))

    def test_nat_underflow_rejected(self):
        prog = CounterProgram(decl(("x", "nat")), (Sub("x", 1),))
        with pytest.raises(ScriptRejected, match="negative"):
            run_script(prog, {}, Script(loops=[]))

    def test_missing_counts_rejected(self):
        prog = CounterProgram(decl(("x", "nat")), (Loop((Add("x", 1),)),))
        with pytest.raises(ScriptRejected, match="loop counts"):
            run_script(prog, {}, Script(loops=[]))

    def test_guess_consumption(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("xb", "nat")),
            (MacroCall("residue-test", ("x", "xb", 3)),),
        )
        # x0 = 7, guess r = 1, drain both loops fully: x = 7*7
        out = run_script(prog, {"x": 7}, Script(loops=[2, 2], guesses=[1]))
        assert out == {"x": 49, "xb": 0}

    def test_guess_out_of_range(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("xb", "nat")),
            (MacroCall("residue-test", ("x", "xb", 3)),),
        )
        with pytest.raises(ScriptRejected, match="guess"):
            run_script(prog, {"x": 7}, Script(loops=[2, 2], guesses=[5]))


class TestCompiledPath:
    def _mult_prog(self):
        return CounterProgram(
            decl(("x", "nat"), ("y", "int")),
            (MacroCall("exact-mult", ("x", "y", 3, 2)),),
        )

    def test_path_replays_to_same_valuation(self):
        prog = self._mult_prog()
        unit = compile_program(prog, backend="ca")
        script = Script(loops=[4, 2])
        assert compiled_run(unit, {"x": 4}, script) == run_script(
            prog, {"x": 4}, script
        )

    def test_path_is_a_valid_chain(self):
        prog = self._mult_prog()
        unit = compile_program(prog, backend="ca")
        path = compiled_path(unit, Script(loops=[4, 2]))
        src = unit.entry
        for tid in path:
            t = unit.system.transitions[tid]
            assert t.src == src
            src = t.dst
        assert src == unit.exit

    def test_failed_test_raises_from_core(self):
        from zvass.core import ZeroTestFailed

        unit = compile_program(self._mult_prog(), backend="ca")
        with pytest.raises(ZeroTestFailed):
            compiled_run(unit, {"x": 4}, Script(loops=[3, 2]))

    def test_nat_underflow_raises_from_core(self):
        from zvass.core import NNegViolation

        prog = CounterProgram(decl(("x", "nat")), (Sub("x", 1),))
        unit = compile_program(prog, backend="ca")
        with pytest.raises(NNegViolation):
            compiled_run(unit, {}, Script(loops=[]))

    def test_shadow_manifest_enforced(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("y", "int")),
            (
                Loop((Transfer("x", ("y",)),)),
                ZeroTest("x", mode="shadow"),
                Loop((Sub("y", 2), Add("x", 3))),
                ZeroTest("y", mode="shadow"),
            ),
        )
        unit = compile_program(prog, backend="zvass")
        script = Script(loops=[4, 2])
        assert compiled_run(unit, {"x": 4}, script) == {"x": 6, "y": 0}
        with pytest.raises(ScriptRejected, match="shadow"):
            compiled_run(unit, {"x": 4}, Script(loops=[3, 1]))

    def test_guess_branches_traversed(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("xb", "nat")),
            (MacroCall("residue-test", ("x", "xb", 3)),),
        )
        unit = compile_program(prog, backend="ca")
        script = Script(loops=[2, 2], guesses=[1])
        assert compiled_run(unit, {"x": 7}, script) == {"x": 49, "xb": 0}

    def test_witnesses_agree_with_run_script(self):
        for n in (0, 1, 2):
            prog = double_exp_triple(2, n)
            unit = compile_program(prog, backend="ca")
            for b in (0, 1, 2):
                wit = double_exp_witness(2, n, b)
                assert compiled_run(unit, {}, wit) == run_script(prog, {}, wit)


class TestExactMultOracle:
    def _unit(self, a, b):
        prog = CounterProgram(
            decl(("x", "nat"), ("y", "int")),
            (MacroCall("exact-mult", ("x", "y", a, b)),),
        )
        return compile_program(prog, "ca")

    def test_even_inputs_scale_exactly(self):
        unit = self._unit(3, 2)
        for x0 in (0, 2, 4, 6):
            got = finals_dicts(unit, {"x": x0}, oracle.Bounds(12, 8, 40))
            assert got == [{"x": 3 * x0 // 2, "y": 0}]

    def test_odd_input_rejected(self):
        unit = self._unit(3, 2)
        for x0 in (1, 3, 5):
            assert finals_dicts(unit, {"x": x0}, oracle.Bounds(12, 8, 40)) == []


class TestWeakMultOracle:
    def test_closed_form_finals(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("xb", "nat")),
            (MacroCall("weak-mult", ("x", "xb", 3, 2)),),
        )
        unit = compile_program(prog, "ca")
        got = {
            (d["x"], d["xb"])
            for d in finals_dicts(unit, {"x": 4}, oracle.Bounds(10, 10, 40))
        }
        want = {
            (4 - m + 3 * j, m - 2 * j)
            for m in range(5)
            for j in range(m // 2 + 1)
        }
        assert got == want
        assert max(x for x, xb in got if xb == 0) == 6


class TestMultOracle:
    def test_iff_single_unit(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("xb", "nat"), ("y", "int"), ("z", "int"), ("u1", "int")),
            (MacroCall("mult", ("x", "xb", "y", "z", ("u1",))),),
        )
        unit = compile_program(prog, "ca")
        bounds = oracle.Bounds(4, 14, 120)
        good = finals_dicts(unit, {"x": 2, "y": 3, "z": 12, "u1": 3}, bounds)
        settled = [d for d in good if d["y"] == 0 and d["z"] == 0 and d["xb"] == 0]
        assert settled == [{"x": 2, "xb": 0, "y": 0, "z": 0, "u1": 6}]
        # C != sum(C_i): nothing fully consumes the budget pair
        bad = finals_dicts(unit, {"x": 2, "y": 3, "z": 12, "u1": 2}, bounds)
        assert [d for d in bad if d["y"] == 0 and d["z"] == 0 and d["xb"] == 0] == []

    def test_iff_two_units(self):
        prog = CounterProgram(
            decl(
                ("x", "nat"),
                ("xb", "nat"),
                ("y", "int"),
                ("z", "int"),
                ("u1", "int"),
                ("u2", "int"),
            ),
            (MacroCall("mult", ("x", "xb", "y", "z", ("u1", "u2"))),),
        )
        unit = compile_program(prog, "ca")
        bounds = oracle.Bounds(4, 10, 140)
        got = finals_dicts(unit, {"x": 2, "y": 2, "z": 8, "u1": 1, "u2": 1}, bounds)
        settled = [d for d in got if d["y"] == 0 and d["z"] == 0 and d["xb"] == 0]
        assert settled == [{"x": 2, "xb": 0, "y": 0, "z": 0, "u1": 2, "u2": 2}]


class TestSixteenTripleOracle:
    def test_exact_output_set(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("y", "int"), ("z", "int")),
            (MacroCall("16-triple", ("x", "y", "z")),),
        )
        unit = compile_program(prog, "ca")
        got = {
            (d["x"], d["y"], d["z"])
            for d in finals_dicts(unit, {}, oracle.Bounds(16, 100, 40))
        }
        assert got == {(16, 2 * c, 32 * c) for c in range(4)}


class TestResidueOracle:
    def test_max_output_tracks_divisibility(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("xb", "nat")),
            (MacroCall("residue-test", ("x", "xb", 3)),),
        )
        unit = compile_program(prog, "ca")
        for x0 in range(1, 7):
            got = finals_dicts(unit, {"x": x0}, oracle.Bounds(50, 50, 60))
            best = max(d["x"] for d in got if d["xb"] == 0)
            if x0 % 3 == 0:
                assert best < 7 * x0
            else:
                assert best == 7 * x0


class TestVerifyGadget:
    def _spec(self, relation):
        prog = CounterProgram(
            decl(("x", "nat"), ("y", "int"), ("z", "int")),
            (MacroCall("16-triple", ("x", "y", "z")),),
        )
        return GadgetSpec(
            name="16-triple",
            program=prog,
            initials=({},),
            bounds=oracle.Bounds(16, 100, 40),
            io_relation=relation,
        )

    def test_correct_relation_passes(self):
        def relation(initial, final):
            return final["x"] == 16 and final["z"] == 16 * final["y"]

        report = verify_gadget(self._spec(relation))
        assert report.ok
        assert report.checked == 4

    def test_wrong_relation_reports_counterexamples(self):
        def relation(initial, final):
            return final["z"] == 31 * final["y"]

        report = verify_gadget(self._spec(relation))
        assert not report.ok
        assert report.counterexamples


def random_linear_program(rng: random.Random) -> tuple[CounterProgram, dict[str, int]]:
    """Loop-free-test program for the shadow-lowering comparison."""
    names = ["a", "b", "c"]
    body: list = []
    for _ in range(rng.randint(2, 6)):
        roll = rng.random()
        if roll < 0.3:
            body.append(Add(rng.choice(names), rng.randint(1, 2)))
        elif roll < 0.5:
            body.append(Sub(rng.choice(names), rng.randint(1, 2)))
        elif roll < 0.65:
            body.append(Transfer(rng.choice(names), (rng.choice(names),)))
        elif roll < 0.85:
            inner: list = []
            for _ in range(rng.randint(1, 2)):
                pick = rng.random()
                if pick < 0.4:
                    inner.append(Add(rng.choice(names), 1))
                elif pick < 0.7:
                    inner.append(Sub(rng.choice(names), 1))
                else:
                    inner.append(Transfer(rng.choice(names), (rng.choice(names),)))
            body.append(Loop(tuple(inner)))
        else:
            body.append(ZeroTest(rng.choice(names), "shadow"))
    if not any(isinstance(i, ZeroTest) for i in body):
        body.append(ZeroTest(rng.choice(names), "shadow"))
    prog = CounterProgram(
        decl(("a", "nat"), ("b", "nat"), ("c", "int")), tuple(body)
    )
    initial = {n: rng.randint(0, 2) for n in names}
    return prog, initial


def random_ca_program(rng: random.Random) -> tuple[CounterProgram, dict[str, int]]:
    """Small program with native tests and fan-outs anywhere."""
    names = ["a", "b", "c"]

    def instr(depth: int):
        roll = rng.random()
        if roll < 0.25:
            return Add(rng.choice(names), rng.randint(1, 2))
        if roll < 0.45:
            return Sub(rng.choice(names), rng.randint(1, 2))
        if roll < 0.55:
            return Transfer(rng.choice(names), (rng.choice(names),))
        if roll < 0.7 and depth < 2:
            return Loop(tuple(instr(depth + 1) for _ in range(rng.randint(1, 2))))
        if roll < 0.8 and depth < 2:
            n = rng.randint(2, 3)
            return GuessResidue(
                n, tuple((instr(depth + 1),) for _ in range(n - 1))
            )
        return ZeroTest(rng.choice(names))

    body = tuple(instr(0) for _ in range(rng.randint(2, 5)))
    prog = CounterProgram(decl(("a", "nat"), ("b", "nat"), ("c", "int")), body)
    initial = {n: rng.randint(0, 2) for n in names}
    return prog, initial


class TestBackendAgreement:
    def test_shadow_lowering_matches_native(self):
        rng = random.Random(90125)
        for _ in range(30):
            prog, initial = random_linear_program(rng)
            zv = compile_program(prog, "zvass")
            ca = compile_program(prog, "ca")
            bounds = oracle.Bounds(6, 14, 10**6)
            got = accepted_finals(zv, initial, bounds)
            want = accepted_finals(ca, initial, bounds)
            assert got == want

    def test_interpreter_matches_compiled_ca(self):
        rng = random.Random(5150)
        for _ in range(40):
            prog, initial = random_ca_program(rng)
            ca = compile_program(prog, "ca")
            bounds = oracle.Bounds(5, 7, 10**6)
            compiled = accepted_finals(ca, initial, bounds)
            order = [d.name for d in prog.decls]
            compiled_tuples = {
                tuple(dict(f)[n] for n in order) for f in compiled
            }
            direct = interp_finals(prog, initial, nat_cap=5, int_cap=7)
            assert direct == compiled_tuples


class TestDoubleExp:
    def test_witness_replays(self):
        for n in (0, 1, 2):
            for b in (1, 2):
                prog = double_exp_triple(2, n)
                out = run_script(prog, {}, double_exp_witness(2, n, b))
                power = 2 ** (2 ** n)
                assert out["x"] == power
                assert out[f"y{n}"] == b
                assert out[f"z{n}"] == b * power
                others = {
                    k: v
                    for k, v in out.items()
                    if k not in ("x", f"y{n}", f"z{n}")
                }
                assert all(v == 0 for v in others.values())

    def test_base_three(self):
        out = run_script(double_exp_triple(3, 1), {}, double_exp_witness(3, 1, 1))
        assert (out["x"], out["y1"], out["z1"]) == (9, 1, 9)

    def test_round_invariants(self):
        # prefix executions hit (x, u, y_i, z_i) = (A^(2^i), 0, C_i, 2A^(2^i)C_i)
        a, n, b = 2, 2, 1
        prog = double_exp_triple(a, n)
        witness = double_exp_witness(a, n, b)
        seeds = [0] * (n + 1)
        seeds[n] = b
        for i in range(n - 1, -1, -1):
            seeds[i] = a ** (2 ** i) * (1 + 2 * sum(seeds[i + 1 :]))
        fills = 1 + (n + 1)
        per_round = 8
        for rounds_done in range(n + 1):
            cut = fills + per_round * rounds_done
            prefix = CounterProgram(prog.decls, prog.body[:cut])
            out = run_script(prefix, {}, Script(loops=list(witness.loops)))
            power = a ** (2 ** rounds_done)
            assert out["x"] == power
            assert out["u"] == 0
            for j in range(rounds_done, n + 1):
                assert out[f"y{j}"] == seeds[j]
                assert out[f"z{j}"] == 2 * power * seeds[j]
            for j in range(rounds_done):
                assert out[f"y{j}"] == 0
                assert out[f"z{j}"] == 0

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            double_exp_triple(1, 1)
        with pytest.raises(ValueError):
            double_exp_triple(2, -1)

    def test_oracle_exact_set_n0(self):
        prog = double_exp_triple(2, 0)
        unit = compile_program(prog, "ca")
        got = {
            (d["x"], d["y0"], d["z0"])
            for d in finals_dicts(unit, {}, oracle.Bounds(14, 12, 100))
        }
        assert got == {(2, b, 2 * b) for b in range(4)}


class TestAmplifier:
    def test_step_256(self):
        prog = amplifier_step(8)
        out = run_script(prog, {"x": 8, "y": 6, "z": 48}, amplifier_witness(8, 3))
        assert (out["x"], out["y"], out["z"]) == (256, 2, 512)
        assert all(
            out[k] == 0 for k in ("x1", "x2", "xp", "yp", "zp", "u", "bud")
        )

    def test_step_65536(self):
        prog = amplifier_step(16)
        out = run_script(prog, {"x": 16, "y": 2, "z": 32}, amplifier_witness(16, 1))
        assert (out["x"], out["y"], out["z"]) == (65536, 2, 2 * 65536)

    def test_unbalanced_chains_fail_u_test(self):
        prog = amplifier_step(16)
        witness = amplifier_witness(16, 1, k1=3, k2=1)
        with pytest.raises(ScriptRejected, match="u ="):
            run_script(prog, {"x": 16, "y": 2, "z": 32}, witness)

    def test_budget_rejects_extra_tests(self):
        prog = amplifier_step(8)
        witness = amplifier_witness(8, 1, k1=2, k2=2)
        with pytest.raises(ScriptRejected):
            run_script(prog, {"x": 8, "y": 2, "z": 16}, witness)

    def test_requires_multiple_of_eight(self):
        with pytest.raises(BNotDivisibleBy8):
            amplifier_step(12)
        with pytest.raises(BNotDivisibleBy8):
            amplifier_witness(12, 1)


class TestTowerTriple:
    def test_three_is_just_sixteen(self):
        prog = tower_triple(3)
        out = run_script(prog, {}, Script(loops=[2]))
        assert (out["x"], out["y"], out["z"]) == (16, 4, 64)

    def test_four_reaches_tower_four(self):
        prog = tower_triple(4)
        amp = amplifier_witness(16, c_in=2)
        out = run_script(prog, {}, Script(loops=[2] + list(amp.loops)))
        assert out["x"] == 65536
        assert out["z"] == 2 * 65536 * 1

    def test_five_builds_without_running(self):
        prog = tower_triple(5)
        unit = compile_program(prog, "ca")
        assert len(unit.system.states) > 40

    def test_too_small(self):
        with pytest.raises(ValueError):
            tower_triple(2)


class TestCpFormat:
    SAMPLE = """\
# sixteen-style demo
counters x:nat y:int z:int
add x 16
loop {
  add y 2
  add z 32
}
ztest x
ztest y shadow
x -> y z
for i = 0 .. 1 {
  add y 1
}
guess 3 {
  branch {
    sub x 1
  }
  branch {
    sub x 2
  }
}
call exact-mult x y 3 2
"""

    def test_parse_roundtrip(self):
        prog = parse_program(self.SAMPLE)
        assert prog.decls == decl(("x", "nat"), ("y", "int"), ("z", "int"))
        assert prog.body[0] == Add("x", 16)
        assert prog.body[1] == Loop((Add("y", 2), Add("z", 32)))
        assert prog.body[2] == ZeroTest("x")
        assert prog.body[3] == ZeroTest("y", "shadow")
        assert prog.body[4] == Transfer("x", ("y", "z"))
        assert prog.body[5] == For("i", 0, 1, (Add("y", 1),))
        assert isinstance(prog.body[6], GuessResidue)
        assert prog.body[7] == MacroCall("exact-mult", ("x", "y", 3, 2))
        again = parse_program(serialize_program(prog))
        assert again == prog

    def test_serialize_mult_flattens_units(self):
        prog = CounterProgram(
            decl(("x", "nat"), ("xb", "nat"), ("y", "int"), ("z", "int"), ("u1", "int")),
            (MacroCall("mult", ("x", "xb", "y", "z", ("u1",))),),
        )
        text = serialize_program(prog)
        assert "call mult x xb y z u1" in text
        assert parse_program(text) == prog

    @pytest.mark.parametrize(
        "bad",
        [
            "loop {\n  add x 1",
            "}",
            "for i = a .. b {\n}",
            "warp x 1",
            "counters x",
            "guess 3 {\n  sub x 1\n}",
        ],
    )
    def test_parse_errors(self, bad):
        with pytest.raises(FormatError):
            parse_program(bad)
