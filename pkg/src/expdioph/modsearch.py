"""Search for a modulus certifying that an equation has no solutions.

The candidate pool holds prime powers whose multiplicative structure is
smooth: powers of the smooth primes themselves, first powers of sieve
primes (p with p-1 smooth), and powers of the primes dividing the
equation's bases and coefficients (those force tail constraints).  The
search greedily takes the pool entry t with the smallest goodness score
f(t) = product of the bases' multiplicative orders mod t, extracts the
exact exponent constraints mod t, and either closes the branch (no
surviving residue combination) or splits on the surviving combinations,
rewriting the equation per combination and recursing with t removed
from the pool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .congruence import (
    CongruenceResult,
    EliminationTrace,
    FactorAnalysis,
    FactorSizeError,
    ResidueConstraint,
    ResourceLimitError,
    constraints_mod_prime_power,
    solvable_mod,
)
from .equation import Equation, EquationError, fix, rewrite_with_residues, shift
from .ntheory import Factorization, SmoothnessSpec, factorize, mult_order, smooth_sieve

__all__ = [
    "SearchLimits",
    "StepBudget",
    "CandidatePool",
    "BranchAction",
    "CertNode",
    "ModulusCertificate",
    "SearchFailure",
    "build_pool",
    "pool_for_equation",
    "goodness",
    "find_certificate",
    "check_known_modulus",
]

DEFAULT_CAPS = {2: 4, 3: 2}
DEFAULT_BUDGET = 10_000


@dataclass(frozen=True)
class SearchLimits:
    """Tunable ceilings for the certificate search."""

    fanout: int = 64
    enum_ceiling: int = 1 << 20
    working_ceiling: int = 1 << 22
    # rewrites raise bases to their orders; skip branches whose numbers
    # would outgrow this many bits
    max_bits: int = 1 << 16


@dataclass(frozen=True)
class CandidatePool:
    entries: tuple[int, ...]  # ascending, distinct prime powers
    smoothness: SmoothnessSpec
    caps: tuple[tuple[int, int], ...]

    def without(self, entry: int) -> "CandidatePool":
        return CandidatePool(
            tuple(e for e in self.entries if e != entry), self.smoothness, self.caps
        )


@dataclass(frozen=True)
class BranchAction:
    """One variable's residue commitment along a split branch.

    kind "fix": the exponent equals value.  kind "cong": the exponent is
    value + order * fresh, i.e. >= value and congruent to it mod order.
    """

    kind: str  # "fix" | "cong"
    variable: str
    value: int
    order: int = 1


@dataclass(frozen=True)
class CertNode:
    """Node of a certificate tree.

    kind "engine": a multi-factor elimination trace proving this node's
    equation unsolvable mod the product of `factors`.

    kind "split": exact single-factor analysis mod `factor`; `branches`
    pairs each surviving residue combination (as branch actions) with a
    child node certifying the rewritten equation.  No branches = the
    congruence mod `factor` alone is unsolvable.
    """

    kind: str
    factor: int = 0
    constraints: tuple[ResidueConstraint, ...] = ()
    branches: tuple[tuple[tuple[BranchAction, ...], "CertNode"], ...] = ()
    factors: tuple[int, ...] = ()
    trace: EliminationTrace | None = None

    def used_factors(self) -> list[int]:
        if self.kind == "engine":
            return list(self.factors)
        out = [self.factor]
        for _, child in self.branches:
            out.extend(child.used_factors())
        return out


@dataclass(frozen=True)
class ModulusCertificate:
    equation: Equation
    root: CertNode
    factors: tuple[int, ...]  # merged maximal prime powers, ascending
    m: int


@dataclass(frozen=True)
class SearchFailure:
    reason: str
    steps_used: int
    pool_left: int


def _merge_factors(used: list[int]) -> tuple[tuple[int, ...], int]:
    best: dict[int, int] = {}
    for t in used:
        fact = factorize(t)
        (prime, exponent), = fact.factors
        best[prime] = max(best.get(prime, 0), exponent)
    merged = tuple(p**e for p, e in sorted(best.items()))
    return merged, math.prod(merged)


def build_pool(
    bases: set[int],
    spec: SmoothnessSpec | None = None,
    caps: dict[int, int] | None = None,
) -> CandidatePool:
    """Candidate prime powers for the given equation bases.

    Smooth primes contribute powers up to their caps, sieve primes their
    first powers (or up to cap), and every prime dividing a base is
    included up to its cap so that tail constraints are available.
    """
    spec = spec if spec is not None else SmoothnessSpec()
    all_caps = dict(DEFAULT_CAPS)
    if caps:
        for prime, cap in caps.items():
            all_caps[prime] = max(all_caps.get(prime, 1), cap)

    def cap_of(prime: int) -> int:
        return all_caps.get(prime, 1)

    entries: set[int] = set()
    for p in spec.primes:
        if p <= spec.bound:
            for e in range(1, cap_of(p) + 1):
                entries.add(p**e)
    for p in smooth_sieve(spec):
        for e in range(1, cap_of(p) + 1):
            entries.add(p**e)
    for base in bases:
        for prime, _ in factorize(base).factors:
            for e in range(1, cap_of(prime) + 1):
                entries.add(prime**e)
    return CandidatePool(
        tuple(sorted(entries)), spec, tuple(sorted(all_caps.items()))
    )


def pool_for_equation(
    eq: Equation,
    spec: SmoothnessSpec | None = None,
    caps: dict[int, int] | None = None,
) -> CandidatePool:
    """build_pool plus caps raised to cover the coefficients' prime
    content (a coefficient divisible by q^k wants q^(k+1) available)."""
    bases = {base for term in eq.terms for base, _ in term.bases}
    derived: dict[int, int] = dict(caps) if caps else {}
    interesting: set[int] = set(DEFAULT_CAPS)
    for base in bases:
        for prime, _ in factorize(base).factors:
            interesting.add(prime)
    if spec is not None:
        interesting.update(spec.primes)
    else:
        interesting.update((2, 3, 5))
    for term in eq.terms:
        coeff = abs(term.coefficient)
        for prime in interesting:
            v = 0
            while coeff % prime == 0:
                coeff //= prime
                v += 1
            if v:
                derived[prime] = max(derived.get(prime, 1), v + 1)
    return build_pool(bases, spec, derived)


@lru_cache(maxsize=1 << 16)
def _order_or_one(base_mod: int, t: int) -> int:
    if math.gcd(base_mod, t) > 1:
        return 1
    return mult_order(base_mod, t)


def goodness(t: int, eq: Equation) -> int:
    """f(t): product over base occurrences of ord_t(base), with the
    convention that a base sharing a factor with t contributes 1."""
    out = 1
    for term in eq.terms:
        for base, _ in term.bases:
            out *= _order_or_one(base % t, t)
    return out


class StepBudget:
    """Counts constraint extractions; shared across search calls."""

    __slots__ = ("remaining", "spent")

    def __init__(self, budget: int) -> None:
        self.remaining = budget
        self.spent = 0

    def spend(self) -> bool:
        if self.remaining <= 0:
            return False
        self.remaining -= 1
        self.spent += 1
        return True


def _reduce_combos(
    n_vars: int, analysis: FactorAnalysis
) -> tuple[list[int], list[tuple[int, ...]]]:
    """Project away variables the factor says nothing about.

    A variable whose full position range appears independently of the
    rest (the satisfying set is a cylinder over it, e.g. its term's
    coefficient vanishes mod the factor) only multiplies branches, so
    it is removed from the combination tuples.
    """
    kept = list(range(n_vars))
    combos = [tuple(c) for c in analysis.combos]
    changed = True
    while changed and kept:
        changed = False
        for pos_in_kept, var_index in enumerate(list(kept)):
            full = analysis.tails[var_index] + analysis.periods[var_index]
            values = {c[pos_in_kept] for c in combos}
            if len(values) != full:
                continue
            others = {c[:pos_in_kept] + c[pos_in_kept + 1 :] for c in combos}
            if len(others) * full != len(combos):
                continue
            combos = sorted(others)
            kept.pop(pos_in_kept)
            changed = True
            break
    return kept, combos


def _combo_actions(
    eq: Equation,
    analysis: FactorAnalysis,
    kept: list[int],
    combo: tuple[int, ...],
) -> tuple[BranchAction, ...]:
    decl = eq.variables()
    actions = []
    for pos_in_kept, var_index in enumerate(kept):
        variable = decl[var_index]
        tail, period = analysis.tails[var_index], analysis.periods[var_index]
        position = combo[pos_in_kept]
        if position < tail:
            actions.append(BranchAction("fix", variable, position))
        else:
            r = position - tail
            beta = tail + (r - tail) % period
            if beta == 0 and period == 1:
                continue  # no information
            actions.append(BranchAction("cong", variable, beta, period))
    return tuple(actions)


def _actions_too_big(
    eq: Equation, actions: tuple[BranchAction, ...], max_bits: int
) -> bool:
    """Estimate the bit growth of a branch before exponentiating."""
    for action in actions:
        bits = eq.base_of(action.variable).bit_length()
        if action.kind == "cong":
            if action.order * bits > max_bits or action.value * bits > max_bits:
                return True
        elif action.value * bits > max_bits:
            return True
    return False


def apply_actions(eq: Equation, actions: tuple[BranchAction, ...]) -> Equation:
    """Transform the equation per one branch's residue commitments."""
    out = eq
    for action in actions:
        if action.kind == "fix":
            out = fix(out, action.variable, action.value)
        else:
            out = shift(out, action.variable, action.value)
            if action.order > 1:
                out = rewrite_with_residues(out, {action.variable: (0, action.order)})
    return out


def _search(
    eq: Equation,
    entries: tuple[int, ...],
    budget: StepBudget,
    limits: SearchLimits,
) -> CertNode | None:
    scored = sorted((goodness(t, eq), t) for t in entries)
    for _, t in scored:
        if not budget.spend():
            return None
        try:
            analysis = constraints_mod_prime_power(
                eq,
                t,
                ceiling=limits.enum_ceiling,
                max_combos=max(4096, limits.fanout * 64),
            )
        except FactorSizeError:
            continue
        if analysis.truncated:
            continue
        if analysis.unsat:
            return CertNode("split", factor=t, constraints=analysis.constraints)
        kept, combos = _reduce_combos(len(eq.variables()), analysis)
        if len(combos) > limits.fanout:
            continue
        action_sets = [_combo_actions(eq, analysis, kept, combo) for combo in combos]
        if all(not actions for actions in action_sets):
            continue  # vacuous factor, no information at all
        if any(
            _actions_too_big(eq, actions, limits.max_bits) for actions in action_sets
        ):
            continue
        remaining = tuple(e for e in entries if e != t)
        branches = []
        failed = False
        for actions in action_sets:
            child_eq = apply_actions(eq, actions)
            child = _search(child_eq, remaining, budget, limits)
            if child is None:
                failed = True
                break
            branches.append((actions, child))
        if failed:
            if budget.remaining <= 0:
                return None
            continue
        return CertNode(
            "split", factor=t, constraints=analysis.constraints, branches=tuple(branches)
        )
    return None


def find_certificate(
    eq: Equation,
    pool: CandidatePool,
    budget: int = DEFAULT_BUDGET,
    limits: SearchLimits | None = None,
    tracker: StepBudget | None = None,
) -> ModulusCertificate | SearchFailure:
    """Greedy certificate search over the pool.

    Picks the minimal-goodness entry, extracts constraints mod it, and
    either closes (unsat) or branches over the surviving residue
    combinations (fan-out capped), recursing on the rewritten equations
    with the entry removed from the pool.  The budget counts constraint
    extractions; pass a shared StepBudget to meter several searches
    together.
    """
    limits = limits if limits is not None else SearchLimits()
    tracker = tracker if tracker is not None else StepBudget(budget)
    node = _search(eq, pool.entries, tracker, limits)
    if node is None:
        reason = "budget exhausted" if tracker.remaining <= 0 else "pool exhausted"
        return SearchFailure(reason, tracker.spent, len(pool.entries))
    factors, m = _merge_factors(node.used_factors())
    return ModulusCertificate(eq, node, factors, m)


def check_known_modulus(
    eq: Equation,
    m_factored: Factorization,
    limits: SearchLimits | None = None,
) -> ModulusCertificate | CongruenceResult:
    """Run the multi-factor engine over a known modulus, goodness order.

    Unsolvable congruences come back wrapped as a certificate; solvable
    ones as the engine result carrying the witness.  Resource errors
    propagate.
    """
    limits = limits if limits is not None else SearchLimits()
    prime_powers = list(m_factored.prime_powers())
    ordered = sorted(prime_powers, key=lambda t: (goodness(t, eq), t))
    try:
        result = solvable_mod(
            eq, m_factored, ordered, working_ceiling=limits.working_ceiling
        )
    except ResourceLimitError:
        # joint stage out of reach: fall back to the split-tree search
        # restricted to this modulus' own factors
        pool = CandidatePool(tuple(sorted(prime_powers)), SmoothnessSpec(), ())
        found = find_certificate(eq, pool, DEFAULT_BUDGET, limits)
        if isinstance(found, SearchFailure):
            raise
        return found
    if result.status == "sat":
        return result
    factors, m = _merge_factors(list(result.trace.factors))
    root = CertNode("engine", factors=result.trace.factors, trace=result.trace)
    return ModulusCertificate(eq, root, factors, m)
