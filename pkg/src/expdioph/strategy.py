"""The bound-and-split solving strategy.

A node of the proof tree works on one equation: suspected solutions
come from an exhaustive in-box search, every exponent gets a tentative
bound alpha0 (one past the largest observed value, unified along
order-constraint chains), and a certificate is sought for the equation
with all exponents shifted by their bounds.  Success yields a disjoint
cover: for each variable in turn, either its exponent is below the
bound (fixed to each value in a branch, with constraint successors
shifted along) or the variable is shifted and the cover moves to the
next variable; the all-shifted terminal is exactly the certificate's
equation.  Branch equations recurse until variable-free.  When the
simultaneous shift finds no certificate, single-variable shifts are
tried in bound order.  Every leaf is a certificate, a variable-free
check, or a constraint contradiction, so a complete report is fully
certificate-backed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .equation import (
    Equation,
    EquationError,
    evaluate,
    exhaustive_solutions,
    fix,
    format_equation,
    satisfies_order,
    shift,
)
from .modsearch import (
    CandidatePool,
    DEFAULT_BUDGET,
    ModulusCertificate,
    SearchFailure,
    SearchLimits,
    StepBudget,
    find_certificate,
    pool_for_equation,
)

__all__ = [
    "ProofStep",
    "SolveReport",
    "bound_exponent",
    "principal_solve",
    "min_exponent_survey",
    "SurveyVerdict",
]


@dataclass(frozen=True)
class ProofStep:
    """One node of the proof tree.

    kinds: "exhaustive" (box scan; leaf when the equation has no
    variables), "casesplit" (values below the bound plus a shifted
    remainder), "fix", "shift" (single-child transforms), "certificate"
    (leaf: the node's equation is unsolvable), "infeasible" (leaf: an
    order constraint contradicts the branch), "unresolved" (leaf: no
    certificate found; the report is partial).
    """

    kind: str
    var: str = ""
    amount: int = 0
    values: tuple[int, ...] = ()
    box: tuple[tuple[str, int], ...] = ()
    solutions: tuple[tuple[tuple[str, int], ...], ...] = ()
    certificate: ModulusCertificate | None = None
    reason: str = ""
    children: tuple["ProofStep", ...] = ()

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class SolveReport:
    equation: Equation
    solutions: tuple[dict, ...]
    tree: ProofStep
    complete: bool
    unresolved: tuple[str, ...]
    stats: dict = field(compare=False, default_factory=dict)


def _frozen_solutions(sols: list[dict]) -> tuple:
    return tuple(tuple(sorted(s.items())) for s in sols)


def _bound_order(eq: Equation) -> list[str]:
    """Topological wrt order constraints, then base magnitude, then
    declaration position."""
    decl = list(eq.variables())
    position = {v: i for i, v in enumerate(decl)}
    preds: dict[str, set[str]] = {v: set() for v in decl}
    for u, w in eq.order_constraints:
        preds[w].add(u)
    out: list[str] = []
    remaining = set(decl)
    while remaining:
        ready = [v for v in remaining if not (preds[v] & remaining)]
        ready.sort(key=lambda v: (eq.base_of(v), position[v]))
        out.append(ready[0])
        remaining.remove(ready[0])
    return out


def _unified_alpha0(eq: Equation, sols: list[dict]) -> dict[str, int]:
    """max observed exponent + 1 per variable, then unified to the
    maximum along each order-constraint component (so that fixing a
    chain variable below its bound never meets a shifted predecessor
    with a smaller bound)."""
    alpha0 = {}
    for v in eq.variables():
        alpha0[v] = max(s[v] for s in sols) + 1
    parent: dict[str, str] = {v: v for v in alpha0}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, w in eq.order_constraints:
        ru, rw = find(u), find(w)
        if ru != rw:
            parent[ru] = rw
    best: dict[str, int] = {}
    for v in alpha0:
        r = find(v)
        best[r] = max(best.get(r, 0), alpha0[v])
    return {v: best[find(v)] for v in alpha0}


class _Driver:
    def __init__(
        self,
        pool: CandidatePool,
        tracker: StepBudget,
        limits: SearchLimits,
    ) -> None:
        self.pool = pool
        self.tracker = tracker
        self.limits = limits
        self.certificates = 0

    def _certificate(self, eq: Equation) -> ModulusCertificate | SearchFailure:
        # branch equations grow coefficients; extend the pool so their
        # prime powers (tail constraints) are available
        extended = pool_for_equation(eq, self.pool.smoothness)
        merged = CandidatePool(
            tuple(sorted(set(self.pool.entries) | set(extended.entries))),
            self.pool.smoothness,
            extended.caps,
        )
        out = find_certificate(eq, merged, limits=self.limits, tracker=self.tracker)
        if isinstance(out, ModulusCertificate):
            self.certificates += 1
        return out

    def solve(
        self, eq: Equation, box: dict[str, int]
    ) -> tuple[ProofStep, list[dict], bool, list[str]]:
        variables = eq.variables()
        if not variables:
            solves = evaluate(eq, {}) == 0
            sols = [{}] if solves else []
            step = ProofStep(
                "exhaustive", box=(), solutions=_frozen_solutions(sols)
            )
            return step, sols, True, []
        sols = exhaustive_solutions(eq, box)
        box_t = tuple(sorted(box.items()))
        if not sols:
            cert = self._certificate(eq)
            if isinstance(cert, ModulusCertificate):
                leaf = ProofStep("certificate", certificate=cert)
                step = ProofStep("exhaustive", box=box_t, solutions=(), children=(leaf,))
                return step, [], True, []
            reason = f"no certificate for {format_equation(eq)} ({cert.reason})"
            leaf = ProofStep("unresolved", reason=reason)
            step = ProofStep("exhaustive", box=box_t, solutions=(), children=(leaf,))
            return step, [], False, [reason]

        alpha0 = _unified_alpha0(eq, sols)
        order = _bound_order(eq)

        # simultaneous shift of every variable first
        chain_eq = eq
        for v in order:
            chain_eq = shift(chain_eq, v, alpha0[v])
        cert = self._certificate(chain_eq)
        if isinstance(cert, ModulusCertificate):
            sub, ssol, complete, unres = self._cover(
                eq, box, order, alpha0, cert
            )
            step = ProofStep(
                "exhaustive",
                box=box_t,
                solutions=_frozen_solutions(sols),
                children=(sub,),
            )
            return step, ssol, complete, unres

        # fall back to single-variable bounds (constraint-minimal only)
        with_preds = {w for _, w in eq.order_constraints}
        for v in order:
            if v in with_preds:
                continue
            targets = [v, *eq.successors_of(v)]
            single_eq = eq
            for w in targets:
                single_eq = shift(single_eq, w, alpha0[v])
            cert = self._certificate(single_eq)
            if isinstance(cert, ModulusCertificate):
                sub, ssol, complete, unres = self._cover(
                    eq, box, targets, {w: alpha0[v] for w in targets}, cert
                )
                step = ProofStep(
                    "exhaustive",
                    box=box_t,
                    solutions=_frozen_solutions(sols),
                    children=(sub,),
                )
                return step, ssol, complete, unres

        reason = f"no bounding certificate for {format_equation(eq)}"
        leaf = ProofStep("unresolved", reason=reason)
        step = ProofStep(
            "exhaustive", box=box_t, solutions=_frozen_solutions(sols), children=(leaf,)
        )
        return step, list(sols), False, [reason]

    def _cover(
        self,
        eq0: Equation,
        box0: dict[str, int],
        order: list[str],
        alpha0: dict[str, int],
        cert: ModulusCertificate,
    ) -> tuple[ProofStep, list[dict], bool, list[str]]:
        """Disjoint chain cover over `order` backed by `cert`."""

        def stage(
            i: int, cur_eq: Equation, cur_box: dict[str, int], offsets: dict[str, int]
        ) -> tuple[ProofStep, list[dict], bool, list[str]]:
            if i == len(order):
                want = cert.equation
                if (cur_eq.terms, cur_eq.rhs) != (want.terms, want.rhs):
                    raise AssertionError("cover terminal differs from certificate")
                return ProofStep("certificate", certificate=cert), [], True, []
            v = order[i]
            a0 = alpha0[v]
            children: list[ProofStep] = []
            solutions: list[dict] = []
            complete = True
            unresolved: list[str] = []
            for a in range(a0):
                violated = None
                for u, w in eq0.order_constraints:
                    if w == v and offsets.get(u, 0) > a:
                        violated = (u, w)
                        break
                if violated is not None:
                    leaf = ProofStep(
                        "infeasible",
                        reason=f"{violated[0]} <= {violated[1]} with {violated[0]} shifted past {a}",
                    )
                    children.append(
                        ProofStep("fix", var=v, amount=a, children=(leaf,))
                    )
                    continue
                branch_eq = cur_eq
                branch_box = dict(cur_box)
                wrappers: list[tuple[str, int]] = []
                for w in order[i + 1 :]:
                    if w in eq0.successors_of(v):
                        extra = a - offsets.get(w, 0)
                        if extra > 0:
                            branch_eq = shift(branch_eq, w, extra)
                            branch_box[w] = max(1, branch_box[w] - extra)
                            wrappers.append((w, extra))
                branch_eq = fix(branch_eq, v, a)
                del branch_box[v]
                sub, ssol, scomplete, sunres = self.solve(branch_eq, branch_box)
                node = sub
                for w, extra in reversed(wrappers):
                    ssol = [dict(s, **{w: s[w] + extra}) for s in ssol]
                    node = ProofStep("shift", var=w, amount=extra, children=(node,))
                children.append(ProofStep("fix", var=v, amount=a, children=(node,)))
                for s in ssol:
                    out = dict(s)
                    out[v] = a
                    solutions.append(out)
                complete = complete and scomplete
                unresolved.extend(sunres)
            next_eq = shift(cur_eq, v, a0)
            next_box = dict(cur_box)
            next_box[v] = max(1, next_box[v] - a0)
            next_offsets = dict(offsets)
            next_offsets[v] = offsets.get(v, 0) + a0
            sub, ssol, scomplete, sunres = stage(i + 1, next_eq, next_box, next_offsets)
            for s in ssol:
                out = dict(s)
                out[v] = out[v] + a0
                solutions.append(out)
            complete = complete and scomplete
            unresolved.extend(sunres)
            children.append(ProofStep("shift", var=v, amount=a0, children=(sub,)))
            split = ProofStep(
                "casesplit", var=v, values=tuple(range(a0)), children=tuple(children)
            )
            return split, solutions, complete, unresolved

        return stage(0, eq0, dict(box0), {})


def principal_solve(
    eq: Equation,
    initial_box: dict[str, int] | int = 15,
    pool: CandidatePool | None = None,
    budget: int = DEFAULT_BUDGET,
    limits: SearchLimits | None = None,
) -> SolveReport:
    """Find the complete solution set with a certificate-backed proof.

    initial_box may be a uniform exclusive bound or a per-variable map.
    The report is complete when every branch closed; otherwise it
    carries the unresolved branch descriptions and the solutions found
    so far.
    """
    if isinstance(initial_box, int):
        box = {v: initial_box for v in eq.variables()}
    else:
        box = dict(initial_box)
    pool = pool if pool is not None else pool_for_equation(eq)
    limits = limits if limits is not None else SearchLimits()
    tracker = StepBudget(budget)
    driver = _Driver(pool, tracker, limits)
    tree, found, complete, unresolved = driver.solve(eq, box)
    keep: list[dict] = []
    seen = set()
    for s in found:
        key = tuple(sorted(s.items()))
        if key in seen:
            continue
        seen.add(key)
        if evaluate(eq, s) != 0:
            raise AssertionError("branch produced a non-solution")
        if not satisfies_order(eq, s):
            continue
        keep.append(s)
    keep.sort(key=lambda s: tuple(s[v] for v in sorted(s)))
    stats = {
        "steps_spent": tracker.spent,
        "certificates": driver.certificates,
        "pool_size": len(pool.entries),
    }
    return SolveReport(
        eq, tuple(keep), tree, complete, tuple(unresolved), stats
    )


def bound_exponent(
    eq: Equation,
    var: str,
    alpha0: int,
    pool: CandidatePool | None = None,
    budget: int = DEFAULT_BUDGET,
    limits: SearchLimits | None = None,
) -> ModulusCertificate | SearchFailure:
    """Certificate that every solution has var < alpha0.

    The certificate refutes the equation with var (and its constraint
    successors, which cannot be smaller) shifted by alpha0.
    """
    if alpha0 < 1:
        raise EquationError("alpha0 must be positive")
    targets = [var, *eq.successors_of(var)]
    shifted = eq
    for w in targets:
        shifted = shift(shifted, w, alpha0)
    pool = pool if pool is not None else pool_for_equation(shifted)
    return find_certificate(shifted, pool, budget, limits)


@dataclass(frozen=True)
class SurveyVerdict:
    equation: Equation
    proven: bool
    certificate: ModulusCertificate | None
    failure: SearchFailure | None


def min_exponent_survey(
    equations: list[Equation],
    bound: int,
    pool: CandidatePool | None = None,
    budget: int = DEFAULT_BUDGET,
    limits: SearchLimits | None = None,
) -> list[SurveyVerdict]:
    """Prove min exponent <= bound per equation.

    Shifts every exponent by bound + 1 and looks for a certificate; a
    success shows no solution has all exponents past the bound.
    Failures are recorded and the run continues.
    """
    verdicts = []
    for eq in equations:
        shifted = eq
        for v in eq.variables():
            shifted = shift(shifted, v, bound + 1)
        eq_pool = pool if pool is not None else pool_for_equation(shifted)
        out = find_certificate(shifted, eq_pool, budget, limits)
        if isinstance(out, ModulusCertificate):
            verdicts.append(SurveyVerdict(eq, True, out, None))
        else:
            verdicts.append(SurveyVerdict(eq, False, None, out))
    return verdicts
