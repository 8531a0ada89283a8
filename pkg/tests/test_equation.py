import itertools
import random

import pytest

from expdioph.equation import (
    Equation,
    EquationError,
    Term,
    evaluate,
    exhaustive_solutions,
    fix,
    format_equation,
    format_equation_block,
    parse_equation,
    representable_scan,
    rewrite_with_residues,
    shift,
    shift_many,
)

THM4 = "3^a1 + 5^a2 + 11^a3 + 13^a4 + 17^a5 - 19^a6 = 0"
THM6 = "2^a1*3^a2 + 5^a3*7^a4 - 11^a5*13^a6 = 1"
EQ3 = "2^x1*3^x2 + 5^x3*7^x4 - 11^x5*13^x6 = 11"
THM5 = (
    "1 + 5^a1 + 5^a2 + 5^a3 + 5^a4 + 5^a5 + 5^a6 + 5^a7 + 5^a8 - 17^a9 = 0\n"
    "order: a1 <= a2 <= a3 <= a4 <= a5 <= a6 <= a7 <= a8"
)


def assign(eq, values):
    return dict(zip(sorted(eq.variables()), values))


class TestParse:
    def test_round_trip(self):
        for text in (THM4, THM6, EQ3, "5 = 5", "1 + 2^x - 3^y = -4"):
            eq = parse_equation(text)
            assert parse_equation(format_equation_block(eq)) == eq

    def test_round_trip_with_order(self):
        eq = parse_equation(THM5)
        assert parse_equation(format_equation_block(eq)) == eq
        assert eq.order_constraints == tuple(
            (f"a{i}", f"a{i+1}") for i in range(1, 8)
        )

    def test_coefficient_terms(self):
        eq = parse_equation("9*3^a1 + 17*17^a5 - 361*19^a6 = 0")
        assert [t.coefficient for t in eq.terms] == [9, 17, -361]

    def test_whitespace_insignificant(self):
        assert parse_equation("2^x1*3^x2+5^x3*7^x4-11^x5*13^x6=11") == parse_equation(EQ3)

    def test_negative_rhs(self):
        assert parse_equation("3^x - 13^y = -4").rhs == -4

    def test_variable_reuse_rejected(self):
        with pytest.raises(EquationError):
            parse_equation("2^x + 3^x = 1")

    def test_base_repeat_in_term_rejected(self):
        with pytest.raises(EquationError):
            parse_equation("2^x*2^y = 1")

    def test_unknown_order_var_rejected(self):
        with pytest.raises(EquationError):
            parse_equation("2^x = 1\norder: x <= y")

    def test_order_cycle_rejected(self):
        with pytest.raises(EquationError):
            parse_equation("2^x + 3^y = 1\norder: x <= y\norder: y <= x")

    def test_garbage_rejected(self):
        for text in ("", "2^ = 1", "2^x 3^y = 1", "2^x = ", "2^x = 1 extra"):
            with pytest.raises(EquationError):
                parse_equation(text)

    def test_declaration_order(self):
        eq = parse_equation(EQ3)
        assert eq.variables() == ("x1", "x2", "x3", "x4", "x5", "x6")
        assert eq.base_of("x4") == 7
        assert eq.term_index_of("x5") == 2


class TestEvaluate:
    def test_thm4_solutions(self):
        eq = parse_equation(THM4)
        assert evaluate(eq, assign(eq, (0, 1, 1, 0, 0, 1))) == 0
        assert evaluate(eq, assign(eq, (1, 0, 0, 1, 0, 1))) == 0

    def test_thm6_solution(self):
        eq = parse_equation(THM6)
        # 9 + 5 - 13 - 1 = 0
        assert evaluate(eq, assign(eq, (0, 2, 1, 0, 0, 1))) == 0
        assert evaluate(eq, assign(eq, (0, 0, 0, 0, 0, 0))) == 0

    def test_all_zero(self):
        eq = parse_equation(EQ3)
        total = sum(t.coefficient for t in eq.terms)
        assert evaluate(eq, assign(eq, (0,) * 6)) == total - 11

    def test_partial_assignment_errors(self):
        eq = parse_equation(EQ3)
        with pytest.raises(EquationError):
            evaluate(eq, {"x1": 0})


class TestExhaustiveSolutions:
    def test_thm4_box_15(self):
        eq = parse_equation(THM4)
        box = {v: 15 for v in eq.variables()}
        sols = exhaustive_solutions(eq, box)
        tuples = [tuple(s[v] for v in sorted(eq.variables())) for s in sols]
        assert tuples == [(0, 1, 1, 0, 0, 1), (1, 0, 0, 1, 0, 1)]

    def test_thm6_box_13(self):
        eq = parse_equation(THM6)
        box = {v: 13 for v in eq.variables()}
        sols = exhaustive_solutions(eq, box)
        tuples = [tuple(s[v] for v in sorted(eq.variables())) for s in sols]
        assert tuples == [(0, 0, 0, 0, 0, 0), (0, 2, 1, 0, 0, 1)]

    def test_empty_when_rhs_unreachable(self):
        eq = parse_equation("2^x + 3^y = 0")
        assert exhaustive_solutions(eq, {"x": 10, "y": 10}) == []

    def test_agrees_with_naive_oracle(self):
        rng = random.Random(31)
        for _ in range(60):
            n_terms = rng.randrange(1, 4)
            terms = []
            vid = 0
            for _ in range(n_terms):
                coeff = rng.choice([-3, -2, -1, 1, 2, 3])
                n_vars = rng.randrange(0, 2)
                bases = []
                for _ in range(n_vars):
                    bases.append((rng.choice([2, 3, 5, 7]), f"v{vid}"))
                    vid += 1
                terms.append(Term(coeff, tuple(bases)))
            eq = Equation(tuple(terms), rng.randrange(-20, 50))
            variables = eq.variables()
            if len(variables) > 3:
                continue
            box = {v: rng.randrange(1, 7) for v in variables}
            got = exhaustive_solutions(eq, box)
            expect = []
            for combo in itertools.product(*(range(box[v]) for v in sorted(variables))):
                a = dict(zip(sorted(variables), combo))
                if evaluate(eq, a) == 0:
                    expect.append(a)
            assert got == expect

    def test_order_constraints_respected(self):
        eq = parse_equation("2^x + 2^y... = 0") if False else parse_equation(
            "1 + 3^x + 3^y - 5^z = 0\norder: x <= y"
        )
        box = {"x": 6, "y": 6, "z": 6}
        sols = exhaustive_solutions(eq, box)
        assert all(s["x"] <= s["y"] for s in sols)
        # oracle: filter the unconstrained solutions
        unconstrained = exhaustive_solutions(
            Equation(eq.terms, eq.rhs), box
        )
        expect = [s for s in unconstrained if s["x"] <= s["y"]]
        assert sols == expect

    def test_constant_equation(self):
        assert exhaustive_solutions(parse_equation("5 = 5"), {}) == [{}]
        assert exhaustive_solutions(parse_equation("5 = 4"), {}) == []

    def test_missing_box_entry_rejected(self):
        eq = parse_equation("2^x = 1")
        with pytest.raises(EquationError):
            exhaustive_solutions(eq, {})


class TestRepresentableScan:
    def test_small_window(self):
        # 2^x - 3^y over exponents 0..4: reachable values in [0, 10]
        eq = parse_equation("2^x - 3^y = 0")
        box = {"x": 5, "y": 5}
        reachable = {
            2**x - 3**y for x in range(5) for y in range(5)
        }
        missing = representable_scan(eq, 0, 10, box)
        assert missing == [c for c in range(11) if c not in reachable]

    def test_empty_range(self):
        eq = parse_equation("2^x = 0")
        assert representable_scan(eq, 5, 4, {"x": 3}) == []

    def test_rhs_ignored(self):
        eq1 = parse_equation("2^x - 3^y = 0")
        eq2 = parse_equation("2^x - 3^y = 99")
        box = {"x": 4, "y": 4}
        assert representable_scan(eq1, 0, 20, box) == representable_scan(eq2, 0, 20, box)


class TestShift:
    def test_thm4_full_shift(self):
        eq = parse_equation(THM4)
        shifted = shift_many(eq, {"a1": 2, "a2": 2, "a3": 2, "a4": 2, "a5": 1, "a6": 2})
        assert [t.coefficient for t in shifted.terms] == [9, 25, 121, 169, 17, -361]

    def test_zero_shift_is_identity(self):
        eq = parse_equation(THM4)
        assert shift(eq, "a3", 0) == eq

    def test_single_13_shift(self):
        eq = parse_equation("1 + 5^a2 + 11^a3 + 13^a4 + 17^a5 - 19^a6 = 0")
        shifted = shift(eq, "a4", 1)
        assert shifted.terms[3].coefficient == 13

    def test_solution_correspondence(self):
        eq = parse_equation(THM4)
        sol = assign(eq, (1, 0, 0, 1, 0, 1))
        shifted = shift(eq, "a1", 1)
        moved = dict(sol)
        moved["a1"] -= 1
        assert evaluate(shifted, moved) == 0

    def test_rejects_unknown_variable(self):
        with pytest.raises(EquationError):
            shift(parse_equation(THM4), "zz", 1)


class TestFix:
    def test_thm4_fix_zero_keeps_lhs_constant(self):
        eq = parse_equation(THM4)
        got = fix(eq, "a1", 0)
        assert format_equation(got) == "1 + 5^a2 + 11^a3 + 13^a4 + 17^a5 - 19^a6 = 0"

    def test_constant_merging_chain(self):
        eq = parse_equation("1 + 5^a2 + 11^a3 + 13^a4 + 17^a5 - 19^a6 = 0")
        got = fix(eq, "a4", 0)
        assert format_equation(got) == "2 + 5^a2 + 11^a3 + 17^a5 - 19^a6 = 0"
        got = fix(got, "a5", 0)
        assert format_equation(got) == "3 + 5^a2 + 11^a3 - 19^a6 = 0"
        assert format_equation(fix(got, "a2", 1)) == "8 + 11^a3 - 19^a6 = 0"
        assert format_equation(fix(got, "a2", 0)) == "4 + 11^a3 - 19^a6 = 0"

    def test_thm6_fix_moves_constant_to_rhs(self):
        eq = parse_equation("3^a2 + 5^a3 - 13^a6 = 1")
        got = fix(eq, "a3", 1)
        assert format_equation(got) == "3^a2 - 13^a6 = -4"

    def test_two_base_term_keeps_partner(self):
        eq = parse_equation(THM6)
        got = fix(eq, "a1", 0)
        assert format_equation(got) == "3^a2 + 5^a3*7^a4 - 11^a5*13^a6 = 1"

    def test_solution_correspondence(self):
        eq = parse_equation(THM6)
        sol = assign(eq, (0, 2, 1, 0, 0, 1))
        got = fix(eq, "a3", 1)
        reduced = {k: v for k, v in sol.items() if k != "a3"}
        assert evaluate(got, reduced) == 0


class TestRewrite:
    def test_mod_class_rewrite(self):
        eq = parse_equation("3^x - 13^y = -4")
        got = rewrite_with_residues(eq, {"x": (2, 3)})
        assert got.terms[0].coefficient == 9
        assert got.terms[0].bases == ((27, "x"),)

    def test_identity(self):
        eq = parse_equation(THM6)
        assert rewrite_with_residues(eq, {v: (0, 1) for v in eq.variables()}) == eq

    def test_general_coefficients(self):
        eq = parse_equation(EQ3)
        got = rewrite_with_residues(eq, {"x1": (1, 2), "x2": (2, 3)})
        assert got.terms[0].coefficient == 2 * 9
        assert got.terms[0].bases == ((4, "x1"), (27, "x2"))

    def test_bad_beta_rejected(self):
        eq = parse_equation(EQ3)
        with pytest.raises(EquationError):
            rewrite_with_residues(eq, {"x1": (3, 2)})

    def test_solution_correspondence_random(self):
        rng = random.Random(17)
        eq = parse_equation(THM6)
        box = {v: 13 for v in eq.variables()}
        sols = exhaustive_solutions(eq, box)
        assert sols
        for sol in sols:
            residues = {}
            for v in eq.variables():
                order = rng.randrange(1, 4)
                residues[v] = (sol[v] % order, order)
            re = rewrite_with_residues(eq, residues)
            gamma = {v: (sol[v] - residues[v][0]) // residues[v][1] for v in sol}
            assert evaluate(re, gamma) == 0


class TestTransformProperties:
    def test_random_round_trips(self):
        rng = random.Random(4)
        eq = parse_equation(EQ3)
        box = {v: 6 for v in eq.variables()}
        base_sols = exhaustive_solutions(parse_equation("2^x1*3^x2 + 5^x3*7^x4 - 11^x5*13^x6 = 16"), box)
        assert base_sols
        eq16 = parse_equation("2^x1*3^x2 + 5^x3*7^x4 - 11^x5*13^x6 = 16")
        for sol in base_sols:
            v = rng.choice(sorted(sol))
            a0 = rng.randrange(0, sol[v] + 1)
            shifted = shift(eq16, v, a0)
            moved = dict(sol)
            moved[v] -= a0
            assert evaluate(shifted, moved) == 0
            fixed = fix(eq16, v, sol[v])
            rest = {k: x for k, x in sol.items() if k != v}
            assert evaluate(fixed, rest) == 0
