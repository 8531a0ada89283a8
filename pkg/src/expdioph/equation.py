"""Equation data model, text grammar, evaluation, search, and transforms.

An equation is a signed sum of terms, each a coefficient times a product
of fixed bases raised to named exponent variables, equated to an integer
right-hand side.  Optional ordering constraints (var <= var) restrict
the solution set.  Text form::

    equation := term (('+'|'-') term)* '=' integer
    term     := [integer '*']? factor ('*' factor)*   |   integer
    factor   := integer '^' identifier
    order    := "order:" identifier ('<=' identifier)+     (optional lines)

Example: ``2^x1*3^x2 + 5^x3*7^x4 - 11^x5*13^x6 = 11``.  Whitespace is
insignificant; identifiers match [a-z][a-z0-9]*.  Each variable may
appear in exactly one term.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

__all__ = [
    "EquationError",
    "Term",
    "Equation",
    "parse_equation",
    "format_equation",
    "format_equation_block",
    "evaluate",
    "exhaustive_solutions",
    "representable_scan",
    "shift",
    "shift_many",
    "fix",
    "rewrite_with_residues",
]


class EquationError(ValueError):
    """Malformed equation, assignment, or transform argument."""


_IDENT_RE = re.compile(r"[a-z][a-z0-9]*")
_TOKEN_RE = re.compile(r"\s*(\d+|[a-z][a-z0-9]*|<=|[-+*^=])")


@dataclass(frozen=True)
class Term:
    """coefficient * product(base^variable); empty bases = constant term."""

    coefficient: int
    bases: tuple[tuple[int, str], ...] = ()

    def __post_init__(self) -> None:
        if self.coefficient == 0:
            raise EquationError("term coefficient must be non-zero")
        seen_bases = set()
        seen_vars = set()
        for base, var in self.bases:
            if base < 2:
                raise EquationError(f"base {base} must be >= 2")
            if base in seen_bases:
                raise EquationError(f"base {base} repeated within a term")
            if var in seen_vars:
                raise EquationError(f"variable {var} repeated within a term")
            if not _IDENT_RE.fullmatch(var):
                raise EquationError(f"bad variable name {var!r}")
            seen_bases.add(base)
            seen_vars.add(var)

    @property
    def is_constant(self) -> bool:
        return not self.bases


@dataclass(frozen=True)
class Equation:
    """Sum of terms = rhs, with optional (u <= w) variable orderings."""

    terms: tuple[Term, ...]
    rhs: int
    order_constraints: tuple[tuple[str, str], ...] = ()
    _var_term: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        var_term: dict[str, int] = {}
        for index, term in enumerate(self.terms):
            for _, var in term.bases:
                if var in var_term:
                    raise EquationError(f"variable {var} appears in more than one term")
                var_term[var] = index
        for u, w in self.order_constraints:
            if u not in var_term or w not in var_term:
                raise EquationError(f"order constraint on unknown variable: {u} <= {w}")
        self._check_acyclic()
        object.__setattr__(self, "_var_term", var_term)

    def _check_acyclic(self) -> None:
        succ: dict[str, list[str]] = {}
        for u, w in self.order_constraints:
            if u != w:
                succ.setdefault(u, []).append(w)
        state: dict[str, int] = {}

        def visit(x: str) -> None:
            state[x] = 1
            for y in succ.get(x, ()):
                if state.get(y) == 1:
                    raise EquationError("order constraints contain a cycle")
                if y not in state:
                    visit(y)
            state[x] = 2

        for x in list(succ):
            if x not in state:
                visit(x)

    def variables(self) -> tuple[str, ...]:
        """Variable ids in declaration order (term order, bases order)."""
        out = []
        for term in self.terms:
            for _, var in term.bases:
                out.append(var)
        return tuple(out)

    def term_index_of(self, var: str) -> int:
        try:
            return self._var_term[var]
        except KeyError:
            raise EquationError(f"unknown variable {var}") from None

    def base_of(self, var: str) -> int:
        term = self.terms[self.term_index_of(var)]
        for base, v in term.bases:
            if v == var:
                return base
        raise EquationError(f"unknown variable {var}")

    def successors_of(self, var: str) -> tuple[str, ...]:
        """Variables transitively forced >= var by order constraints."""
        out: set[str] = set()
        frontier = [var]
        while frontier:
            x = frontier.pop()
            for u, w in self.order_constraints:
                if u == x and w not in out:
                    out.add(w)
                    frontier.append(w)
        return tuple(sorted(out))


def _tokenize(line: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(line):
        match = _TOKEN_RE.match(line, pos)
        if not match:
            if line[pos:].strip():
                raise EquationError(f"bad character near {line[pos:pos+10]!r}")
            break
        tokens.append(match.group(1))
        pos = match.end()
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[str]) -> None:
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise EquationError("unexpected end of equation")
        self.pos += 1
        return tok

    def expect(self, want: str) -> None:
        tok = self.next()
        if tok != want:
            raise EquationError(f"expected {want!r}, found {tok!r}")


def _parse_factor(stream: _TokenStream) -> tuple[int, str]:
    base_tok = stream.next()
    if not base_tok.isdigit():
        raise EquationError(f"expected base integer, found {base_tok!r}")
    stream.expect("^")
    var_tok = stream.next()
    if not _IDENT_RE.fullmatch(var_tok):
        raise EquationError(f"expected variable name, found {var_tok!r}")
    return int(base_tok), var_tok


def _parse_term(stream: _TokenStream, sign: int) -> Term:
    tok = stream.peek()
    if tok is None:
        raise EquationError("missing term")
    coefficient = 1
    factors: list[tuple[int, str]] = []
    if tok.isdigit():
        stream.next()
        nxt = stream.peek()
        if nxt == "^":
            stream.next()
            var_tok = stream.next()
            if not _IDENT_RE.fullmatch(var_tok):
                raise EquationError(f"expected variable name, found {var_tok!r}")
            factors.append((int(tok), var_tok))
        elif nxt == "*":
            coefficient = int(tok)
            stream.next()
            factors.append(_parse_factor(stream))
        else:
            return Term(sign * int(tok))
    else:
        raise EquationError(f"expected term, found {tok!r}")
    while stream.peek() == "*":
        stream.next()
        factors.append(_parse_factor(stream))
    return Term(sign * coefficient, tuple(factors))


def parse_equation(text: str) -> Equation:
    """Parse the equation grammar, plus optional order-constraint lines."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EquationError("empty equation text")
    eq_line, *rest = lines
    stream = _TokenStream(_tokenize(eq_line))

    terms: list[Term] = []
    sign = 1
    if stream.peek() == "-":
        stream.next()
        sign = -1
    terms.append(_parse_term(stream, sign))
    while stream.peek() in ("+", "-"):
        sign = 1 if stream.next() == "+" else -1
        terms.append(_parse_term(stream, sign))
    stream.expect("=")
    rhs_sign = 1
    if stream.peek() == "-":
        stream.next()
        rhs_sign = -1
    rhs_tok = stream.next()
    if not rhs_tok.isdigit():
        raise EquationError(f"expected right-hand side integer, found {rhs_tok!r}")
    if stream.peek() is not None:
        raise EquationError(f"trailing input after equation: {stream.peek()!r}")

    constraints: list[tuple[str, str]] = []
    for line in rest:
        if not line.startswith("order:"):
            raise EquationError(f"unexpected line {line!r}")
        toks = _TokenStream(_tokenize(line[len("order:") :]))
        chain = [toks.next()]
        while toks.peek() == "<=":
            toks.next()
            chain.append(toks.next())
        if toks.peek() is not None or len(chain) < 2:
            raise EquationError(f"bad order line {line!r}")
        for name in chain:
            if not _IDENT_RE.fullmatch(name):
                raise EquationError(f"bad variable name {name!r} in order line")
        constraints.extend(zip(chain, chain[1:]))
    return Equation(tuple(terms), rhs_sign * int(rhs_tok), tuple(constraints))


def _format_term_body(term: Term) -> str:
    coeff = abs(term.coefficient)
    if term.is_constant:
        return str(coeff)
    factors = "*".join(f"{base}^{var}" for base, var in term.bases)
    return factors if coeff == 1 else f"{coeff}*{factors}"


def format_equation(eq: Equation) -> str:
    """Single-line canonical text (order constraints not included)."""
    if not eq.terms:
        lhs = "0"
    else:
        parts = []
        for index, term in enumerate(eq.terms):
            body = _format_term_body(term)
            if index == 0:
                parts.append(body if term.coefficient > 0 else f"- {body}")
            else:
                parts.append(("+ " if term.coefficient > 0 else "- ") + body)
        lhs = " ".join(parts)
    return f"{lhs} = {eq.rhs}"


def format_equation_block(eq: Equation) -> str:
    """Equation line plus one order line per constraint pair."""
    lines = [format_equation(eq)]
    for u, w in eq.order_constraints:
        lines.append(f"order: {u} <= {w}")
    return "\n".join(lines)


def evaluate(eq: Equation, assignment: dict[str, int]) -> int:
    """Exact value of lhs - rhs; zero iff assignment is a solution."""
    total = 0
    for term in eq.terms:
        value = term.coefficient
        for base, var in term.bases:
            if var not in assignment:
                raise EquationError(f"assignment missing variable {var}")
            exponent = assignment[var]
            if exponent < 0:
                raise EquationError(f"negative exponent for {var}")
            value *= base**exponent
        total += value
    return total - eq.rhs


def satisfies_order(eq: Equation, assignment: dict[str, int]) -> bool:
    return all(assignment[u] <= assignment[w] for u, w in eq.order_constraints)


def _check_box(eq: Equation, box: dict[str, int]) -> None:
    for var in eq.variables():
        if var not in box:
            raise EquationError(f"search box missing variable {var}")
        if box[var] < 1:
            raise EquationError(f"search box bound for {var} must be >= 1")


def _enumerate_window(eq, box, lo, hi, on_hit, want_assignment):
    """Visit in-box assignments whose lhs value lands in [lo, hi].

    on_hit(value, exponents_in_varorder_or_None).  Variables are
    enumerated in sorted-id order, last variable innermost; partial sums
    are pruned against the window using per-term value ranges.
    """
    variables = sorted(eq.variables())
    n = len(variables)
    terms = eq.terms
    k = len(terms)
    if n == 0:
        value = sum(t.coefficient for t in terms)
        if lo <= value <= hi:
            on_hit(value, () if want_assignment else None)
        return

    var_pos = {v: i for i, v in enumerate(variables)}
    term_of = [eq.term_index_of(v) for v in variables]
    base_of = [eq.base_of(v) for v in variables]
    bound_of = [box[v] for v in variables]
    pow_tables = [[base_of[i] ** e for e in range(bound_of[i])] for i in range(n)]

    # constraint partners, applied at the later-assigned variable
    lower_partners: list[list[int]] = [[] for _ in range(n)]  # values forcing e >= val[j]
    upper_partners: list[list[int]] = [[] for _ in range(n)]  # values forcing e <= val[j]
    for u, w in eq.order_constraints:
        iu, iw = var_pos[u], var_pos[w]
        if iu < iw:
            lower_partners[iw].append(iu)
        else:
            upper_partners[iu].append(iw)

    # which variables of each term sit at depth >= d (static max factors)
    sign = [1 if t.coefficient > 0 else -1 for t in terms]
    abs_coeff = [abs(t.coefficient) for t in terms]
    members: list[list[int]] = [[] for _ in range(k)]
    for i, v in enumerate(variables):
        members[term_of[i]].append(i)
    # maxmul[ti][d]: product of max base powers of ti's vars with index >= d
    maxmul = [[1] * (n + 1) for _ in range(k)]
    for ti in range(k):
        for d in range(n - 1, -1, -1):
            maxmul[ti][d] = maxmul[ti][d + 1]
            if term_of[d] == ti:
                maxmul[ti][d] *= pow_tables[d][bound_of[d] - 1]
    remaining_after = [[0] * (n + 1) for _ in range(k)]  # unassigned member count
    for ti in range(k):
        for d in range(n - 1, -1, -1):
            remaining_after[ti][d] = remaining_after[ti][d + 1] + (1 if term_of[d] == ti else 0)

    partial = [abs_coeff[ti] for ti in range(k)]  # |coeff| * assigned powers
    exponents = [0] * n
    const_sum = sum(t.coefficient for t in terms if t.is_constant)

    def rest_range(d: int, acc: int) -> tuple[int, int]:
        low = high = acc
        for ti in range(k):
            if remaining_after[ti][d]:
                if sign[ti] > 0:
                    low += partial[ti]
                    high += partial[ti] * maxmul[ti][d]
                else:
                    low -= partial[ti] * maxmul[ti][d]
                    high -= partial[ti]
        return low, high

    def descend(d: int, acc: int) -> None:
        low, high = rest_range(d, acc)
        if high < lo or low > hi:
            return
        i = d
        ti = term_of[i]
        table = pow_tables[i]
        e_lo = 0
        e_hi = bound_of[i]
        for j in lower_partners[i]:
            if exponents[j] + 1 > e_lo:
                e_lo = exponents[j]
        for j in upper_partners[i]:
            if exponents[j] + 1 < e_hi:
                e_hi = exponents[j] + 1
        if d == n - 1:
            p = partial[ti]
            s = sign[ti]
            for e in range(e_lo, e_hi):
                value = acc + s * p * table[e]
                if s > 0:
                    if value > hi:
                        break
                    if value < lo:
                        continue
                else:
                    if value < lo:
                        break
                    if value > hi:
                        continue
                if want_assignment:
                    exponents[i] = e
                    on_hit(value, tuple(exponents))
                else:
                    on_hit(value, None)
            return
        last_member = remaining_after[ti][i + 1] == 0
        for e in range(e_lo, e_hi):
            exponents[i] = e
            saved = partial[ti]
            partial[ti] = saved * table[e]
            if last_member:
                descend(d + 1, acc + sign[ti] * partial[ti])
            else:
                descend(d + 1, acc)
            partial[ti] = saved

    descend(0, const_sum)


def exhaustive_solutions(eq: Equation, box: dict[str, int]) -> list[dict[str, int]]:
    """All in-box assignments with evaluate == 0, respecting order
    constraints, in lexicographic order of the sorted-variable tuple."""
    _check_box(eq, box)
    variables = sorted(eq.variables())
    hits: list[dict[str, int]] = []

    def on_hit(_value: int, exponents: tuple[int, ...]) -> None:
        hits.append(dict(zip(variables, exponents)))

    _enumerate_window(eq, box, eq.rhs, eq.rhs, on_hit, True)
    return hits


def representable_scan(
    eq: Equation, c_lo: int, c_hi: int, box: dict[str, int]
) -> list[int]:
    """The c in [c_lo, c_hi] hit by no in-box assignment of the lhs.

    The parsed rhs of the template is ignored; one enumeration pass
    marks every representable value in the window.
    """
    if c_hi < c_lo:
        return []
    _check_box(eq, box)
    marks = bytearray(c_hi - c_lo + 1)

    def on_hit(value: int, _exponents) -> None:
        marks[value - c_lo] = 1

    _enumerate_window(eq, box, c_lo, c_hi, on_hit, False)
    return [c_lo + i for i, flag in enumerate(marks) if not flag]


def _require_single_term(eq: Equation, var: str) -> int:
    indices = [
        i for i, t in enumerate(eq.terms) if any(v == var for _, v in t.bases)
    ]
    if len(indices) != 1:
        raise EquationError(f"variable {var} must occur in exactly one term")
    return indices[0]


def shift_many(eq: Equation, amounts: dict[str, int]) -> Equation:
    """Substitute var = amount + var' for each entry; coefficient absorbs
    base^amount.  Solutions of the result correspond to solutions of eq
    with var >= amount.  Order constraints are kept only where still
    implied (shift of the smaller side >= shift of the larger side)."""
    for var, amount in amounts.items():
        _require_single_term(eq, var)
        if amount < 0:
            raise EquationError("shift amount must be non-negative")
    new_terms = []
    for term in eq.terms:
        coeff = term.coefficient
        for base, var in term.bases:
            if var in amounts:
                coeff *= base ** amounts[var]
        new_terms.append(Term(coeff, term.bases))
    kept = tuple(
        (u, w)
        for u, w in eq.order_constraints
        if amounts.get(u, 0) >= amounts.get(w, 0)
    )
    return Equation(tuple(new_terms), eq.rhs, kept)


def shift(eq: Equation, var: str, amount: int) -> Equation:
    """Multiply var's coefficient by base^amount (var = amount + var')."""
    return shift_many(eq, {var: amount})


def fix(eq: Equation, var: str, value: int) -> Equation:
    """Substitute var = value, folding base^value into the coefficient.

    A term reduced to a bare constant merges with an existing constant
    term when there is one; otherwise it stays on the left when rhs is
    zero and moves into the rhs when not.  Constraints touching var are
    dropped.
    """
    if value < 0:
        raise EquationError("fixed value must be non-negative")
    index = _require_single_term(eq, var)
    term = eq.terms[index]
    base = next(b for b, v in term.bases if v == var)
    new_coeff = term.coefficient * base**value
    new_bases = tuple((b, v) for b, v in term.bases if v != var)
    terms = list(eq.terms)
    rhs = eq.rhs
    if new_bases:
        terms[index] = Term(new_coeff, new_bases)
    else:
        del terms[index]
        const_index = next((i for i, t in enumerate(terms) if t.is_constant), None)
        if const_index is not None:
            merged = terms[const_index].coefficient + new_coeff
            if merged:
                terms[const_index] = Term(merged)
            else:
                del terms[const_index]
        elif rhs == 0 or not terms:
            terms.insert(index, Term(new_coeff))
        else:
            rhs -= new_coeff
    kept = tuple((u, w) for u, w in eq.order_constraints if var not in (u, w))
    return Equation(tuple(terms), rhs, kept)


def rewrite_with_residues(
    eq: Equation, residues: dict[str, tuple[int, int]]
) -> Equation:
    """Substitute var = beta + order*var' for each var -> (beta, order).

    Requires 0 <= beta < order.  The base becomes base^order and the
    coefficient absorbs base^beta; solutions correspond to solutions of
    eq with var = beta (mod order).  Constraints touching a non-trivially
    rewritten variable are dropped.
    """
    for var, (beta, order) in residues.items():
        _require_single_term(eq, var)
        if order < 1 or not 0 <= beta < order:
            raise EquationError(f"need 0 <= beta < order for {var}")
    new_terms = []
    for term in eq.terms:
        coeff = term.coefficient
        bases = []
        for base, var in term.bases:
            if var in residues:
                beta, order = residues[var]
                coeff *= base**beta
                bases.append((base**order, var))
            else:
                bases.append((base, var))
        new_terms.append(Term(coeff, tuple(bases)))
    dropped = {
        var for var, (beta, order) in residues.items() if (beta, order) != (0, 1)
    }
    kept = tuple(
        (u, w)
        for u, w in eq.order_constraints
        if u not in dropped and w not in dropped
    )
    return Equation(tuple(new_terms), eq.rhs, kept)
