"""Solvability of the equation's congruence modulo a composite m.

The engine processes m one maximal prime-power factor at a time.  For
each exponent variable it keeps the set of still-admissible exponent
positions: explicit values below the variable's tail boundary plus
residue classes modulo the running lcm of the power-track periods seen
so far (smooth in practice, so the lcms stay small).  Each factor
refines every variable's set to the positions that still have a
completion from the other variables' sets, computed with exact residue
value-set arithmetic mod the factor; sweeps repeat to the fixpoint.  A
variable with no positions left proves the congruence unsolvable.  If
every set stays populated, the product of the final sets is enumerated:
the first tuple consistent with every factor lifts to a witness, and an
empty enumeration is equally a proof of unsolvability.

``replay_trace`` re-validates an emitted trace from scratch using only
modular exponentiation and direct enumeration; it shares no code with
the engine beyond the basic primitives.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .equation import Equation, evaluate
from .ntheory import Factorization, PowerTrack, mod_pow, power_track

__all__ = [
    "CongruenceError",
    "ResourceLimitError",
    "FactorSizeError",
    "ResidueConstraint",
    "TraceStep",
    "EliminationTrace",
    "FactorAnalysis",
    "CongruenceResult",
    "ReplayVerdict",
    "constraints_mod_prime_power",
    "solvable_mod",
    "replay_trace",
    "DEFAULT_ENUM_CEILING",
    "DEFAULT_WORKING_CEILING",
]

DEFAULT_ENUM_CEILING = 1 << 20
DEFAULT_WORKING_CEILING = 1 << 22


class CongruenceError(ValueError):
    """Invalid input to the congruence engine."""


class ResourceLimitError(RuntimeError):
    """A configured working-set ceiling was exceeded."""

    def __init__(self, message: str, *, size: int, ceiling: int) -> None:
        super().__init__(message)
        self.size = size
        self.ceiling = ceiling


class FactorSizeError(ResourceLimitError):
    """Track-position product too large for one factor; skip this factor."""


@dataclass(frozen=True)
class ResidueConstraint:
    """Admissible exponents for one variable.

    An exponent e is admitted iff e < tail and e in small_values, or
    e >= tail and e mod modulus in residues.  Both sets empty marks the
    variable (hence the congruence) unsatisfiable.
    """

    variable: str
    tail: int
    small_values: tuple[int, ...]
    modulus: int
    residues: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.modulus < 1 or self.tail < 0:
            raise CongruenceError("bad constraint shape")
        if any(not 0 <= v < self.tail for v in self.small_values):
            raise CongruenceError("small values must lie below the tail")
        if any(not 0 <= r < self.modulus for r in self.residues):
            raise CongruenceError("residues must lie below the modulus")

    @property
    def is_unsat(self) -> bool:
        return not self.small_values and not self.residues

    def admits(self, exponent: int) -> bool:
        if exponent < self.tail:
            return exponent in self.small_values
        return exponent % self.modulus in self.residues

    def refines(self, other: "ResidueConstraint") -> bool:
        """True when every exponent admitted here is admitted by other."""
        if other.tail > self.tail or self.modulus % other.modulus:
            return False
        window = self.tail + self.modulus
        return all(other.admits(e) for e in range(window) if self.admits(e))


@dataclass(frozen=True)
class TraceStep:
    factor: int
    constraints: tuple[ResidueConstraint, ...]  # declaration order


@dataclass(frozen=True)
class EliminationTrace:
    factors: tuple[int, ...]  # every processed prime power, first-pass order
    steps: tuple[TraceStep, ...]
    status: str  # "unsat" | "sat"
    exhausted: bool = False
    witness: tuple[tuple[str, int], ...] | None = None
    # exact joint projections per variable, recorded when affordable
    combined: tuple[ResidueConstraint, ...] | None = None

    def constraint_for(self, step_index: int, variable: str) -> ResidueConstraint:
        for c in self.steps[step_index].constraints:
            if c.variable == variable:
                return c
        raise KeyError(variable)

    def final_constraint(self, variable: str) -> ResidueConstraint | None:
        if self.combined is not None:
            for c in self.combined:
                if c.variable == variable:
                    return c
        for step in reversed(self.steps):
            for c in step.constraints:
                if c.variable == variable:
                    return c
        return None


@dataclass(frozen=True)
class FactorAnalysis:
    """Exact single-factor analysis: projections plus surviving combos."""

    factor: int
    constraints: tuple[ResidueConstraint, ...]
    combos: tuple[tuple[int, ...], ...] | None  # None = truncated by max_combos
    tails: tuple[int, ...]
    periods: tuple[int, ...]

    @property
    def unsat(self) -> bool:
        return self.combos is not None and not self.combos

    @property
    def truncated(self) -> bool:
        return self.combos is None


@dataclass(frozen=True)
class CongruenceResult:
    status: str  # "sat" | "unsat"
    witness: dict[str, int] | None
    trace: EliminationTrace

    @property
    def is_unsat(self) -> bool:
        return self.status == "unsat"


@dataclass(frozen=True)
class ReplayVerdict:
    accepted: bool
    step_index: int | None = None
    reason: str = ""


def _position_exponent(position: int, tail: int, modulus: int) -> int:
    """Smallest exponent represented by an encoded position."""
    if position < tail:
        return position
    r = position - tail
    return tail + (r - tail) % modulus


class _VarState:
    """Mutable per-variable engine state: (tail, modulus, position set)."""

    __slots__ = ("tail", "modulus", "positions")

    def __init__(self) -> None:
        self.tail = 0
        self.modulus = 1
        self.positions: set[int] = {0}

    def lift(self, new_tail: int, new_period: int) -> bool:
        tail2 = max(self.tail, new_tail)
        mod2 = math.lcm(self.modulus, new_period)
        if tail2 == self.tail and mod2 == self.modulus:
            return False
        out: set[int] = set()
        for p in self.positions:
            if p < self.tail:
                out.add(p)
                continue
            r = p - self.tail
            for a in range(self.tail, tail2):
                if a % self.modulus == r:
                    out.add(a)
            for r2 in range(r, mod2, self.modulus):
                out.add(tail2 + r2)
        self.tail, self.modulus, self.positions = tail2, mod2, out
        return True

    def constraint(self, variable: str) -> ResidueConstraint:
        small = tuple(sorted(p for p in self.positions if p < self.tail))
        residues = tuple(sorted(p - self.tail for p in self.positions if p >= self.tail))
        return ResidueConstraint(variable, self.tail, small, self.modulus, residues)


def _sum_sets(sets: list[set[int]], t: int) -> set[int]:
    out = {0}
    for s in sets:
        if len(out) == t:
            return out
        nxt: set[int] = set()
        for a in out:
            for b in s:
                nxt.add((a + b) % t)
            if len(nxt) == t:
                break
        out = nxt
    return out


def _product_sets(sets: list[set[int]], t: int) -> set[int]:
    out = {1 % t}
    for s in sets:
        if len(out) == t:
            return out
        nxt: set[int] = set()
        for a in out:
            for b in s:
                nxt.add(a * b % t)
            if len(nxt) == t:
                break
        out = nxt
    return out


def _refine_factor(
    eq: Equation,
    states: dict[str, _VarState],
    tracks: dict[str, PowerTrack],
    factor: int,
) -> bool:
    """Shrink every variable's positions to those with a completion mod
    factor; snapshot sweeps to the (unique greatest) fixpoint.  Returns
    True when anything changed."""
    decl = eq.variables()
    terms = [(t.coefficient, tuple(v for _, v in t.bases)) for t in eq.terms]
    c_mod = eq.rhs % factor
    changed_ever = False
    while True:
        residue_of: dict[str, dict[int, int]] = {}
        res_sets: dict[str, set[int]] = {}
        for v in decl:
            st = states[v]
            table = {
                p: tracks[v].residue_at(_position_exponent(p, st.tail, st.modulus))
                for p in st.positions
            }
            residue_of[v] = table
            res_sets[v] = set(table.values())
        term_sets = []
        for coeff, members in terms:
            value_set = _product_sets([res_sets[v] for v in members], factor)
            term_sets.append({coeff * x % factor for x in value_set})
        changed = False
        for v in decl:
            st = states[v]
            ti = eq.term_index_of(v)
            others = _sum_sets(
                [term_sets[j] for j in range(len(terms)) if j != ti], factor
            )
            targets = {(c_mod - s) % factor for s in others}
            coeff, members = terms[ti]
            partner = _product_sets([res_sets[w] for w in members if w != v], factor)
            scaled = {coeff * p % factor for p in partner}
            ok_residues = {
                r for r in res_sets[v] if any(r * s % factor in targets for s in scaled)
            }
            if len(ok_residues) != len(res_sets[v]):
                st.positions = {
                    p for p in st.positions if residue_of[v][p] in ok_residues
                }
                changed = True
        if not changed:
            return changed_ever
        changed_ever = True


def _term_value_table(
    eq: Equation,
    term_index: int,
    state: dict[str, tuple[int, int, frozenset[int]]],
    m: int,
) -> tuple[list[int], list[tuple[tuple[str, int], ...]]]:
    """All values mod m of one term over its members' admitted positions.

    Returns parallel lists of values and the (variable, exponent)
    assignments producing them, in deterministic enumeration order.
    """
    term = eq.terms[term_index]
    values = [term.coefficient % m]
    assigns: list[tuple[tuple[str, int], ...]] = [()]
    for base, var in term.bases:
        tail, modulus, positions = state[var]
        exps = sorted(_position_exponent(p, tail, modulus) for p in positions)
        powers = [pow(base, e, m) for e in exps]
        values = [v * bp % m for v in values for bp in powers]
        assigns = [a + ((var, e),) for a in assigns for e in exps]
    return values, assigns


def _joint_decide(
    eq: Equation,
    state: dict[str, tuple[int, int, frozenset[int]]],
    factors: list[int],
    working_ceiling: int,
) -> dict[str, int] | None:
    """Search the product of admitted positions for a congruence witness
    mod m (every factor at once), meet-in-the-middle over the terms.

    The terms are split into the half with the smaller position product
    (hashed: value -> assignment) and the rest (streamed); a streamed
    partial sum hits iff its complement mod m is in the hash.  Position
    representatives determine values mod every factor because each
    variable's (tail, lcm-of-periods) pair absorbs all of them.
    """
    m = math.prod(factors)
    decl = list(eq.variables())
    if not decl:
        witness: dict[str, int] = {}
        total = sum(t.coefficient for t in eq.terms)
        return witness if (total - eq.rhs) % m == 0 else None

    k = len(eq.terms)
    counts = []
    for term in eq.terms:
        size = 1
        for _, var in term.bases:
            size *= len(state[var][2])
        counts.append(size)

    best_mask, best_key = None, None
    for mask in range(1 << k):
        side_a = math.prod(counts[i] for i in range(k) if mask >> i & 1) if mask else 1
        side_b = math.prod(counts[i] for i in range(k) if not mask >> i & 1)
        key = (max(side_a, side_b), side_a, mask)
        if best_key is None or key < best_key:
            best_key, best_mask = key, mask
    hashed = [i for i in range(k) if best_mask >> i & 1]
    streamed = sorted(
        (i for i in range(k) if not best_mask >> i & 1), key=lambda i: (counts[i], i)
    )
    hash_size = math.prod(counts[i] for i in hashed) if hashed else 1
    stream_size = math.prod(counts[i] for i in streamed) if streamed else 1
    if hash_size > working_ceiling or stream_size > 64 * working_ceiling:
        raise ResourceLimitError(
            f"joint search needs {hash_size} hashed / {stream_size} streamed tuples",
            size=max(hash_size, stream_size),
            ceiling=working_ceiling,
        )

    table: dict[int, tuple[tuple[str, int], ...]] = {}
    hashed_values = [0]
    hashed_assigns: list[tuple[tuple[str, int], ...]] = [()]
    for ti in hashed:
        values, assigns = _term_value_table(eq, ti, state, m)
        hashed_values = [
            (a + b) % m for a in hashed_values for b in values
        ]
        hashed_assigns = [x + y for x in hashed_assigns for y in assigns]
    for value, assign in zip(hashed_values, hashed_assigns):
        table.setdefault(value, assign)

    stream_values = [0]
    stream_assigns: list[tuple[tuple[str, int], ...]] = [()]
    for ti in streamed[:-1] if streamed else []:
        values, assigns = _term_value_table(eq, ti, state, m)
        stream_values = [(a + b) % m for a in stream_values for b in values]
        stream_assigns = [x + y for x in stream_assigns for y in assigns]
    last_values: list[int] = []
    last_assigns: list[tuple[tuple[str, int], ...]] = []
    if streamed:
        last_values, last_assigns = _term_value_table(eq, streamed[-1], state, m)
    else:
        last_values, last_assigns = [0], [()]

    rhs = eq.rhs % m
    for prefix_value, prefix_assign in zip(stream_values, stream_assigns):
        want_base = (rhs - prefix_value) % m
        for j, last in enumerate(last_values):
            target = (want_base - last) % m
            hit = table.get(target)
            if hit is not None:
                witness = dict(hit)
                witness.update(prefix_assign)
                witness.update(last_assigns[j])
                return witness
    return None


_SUPPORT_COST_CAP = 1 << 24


def _split_cost(counts: list[int]) -> int:
    """Work of the best hash/stream split over these term sizes."""
    k = len(counts)
    best = None
    for mask in range(1 << k):
        side_a = math.prod(c for i, c in enumerate(counts) if mask >> i & 1) if mask else 1
        side_b = math.prod(c for i, c in enumerate(counts) if not mask >> i & 1)
        cost = side_a + side_b
        if best is None or cost < best:
            best = cost
    return best if best is not None else 1


def _support_projection(
    eq: Equation,
    state: dict[str, tuple[int, int, frozenset[int]]],
    factors: list[int],
    working_ceiling: int,
) -> dict[str, set[int]] | None:
    """Exact per-variable projection of the joint solution set.

    For every admitted position of every variable, decide by a pinned
    meet-in-the-middle search whether some completion satisfies the
    congruence mod all factors at once.  Returns None (pass skipped)
    when the estimated cost is out of budget; the estimate is
    deterministic so traces stay reproducible.
    """
    decl = list(eq.variables())
    if not decl:
        return {}
    counts = []
    for term in eq.terms:
        size = 1
        for _, var in term.bases:
            size *= len(state[var][2])
        counts.append(size)
    total_cost = 0
    for v in decl:
        ti = eq.term_index_of(v)
        size_v = len(state[v][2])
        pinned_counts = list(counts)
        pinned_counts[ti] = max(1, counts[ti] // size_v)
        total_cost += size_v * _split_cost(pinned_counts)
        if total_cost > _SUPPORT_COST_CAP:
            return None
    kept: dict[str, set[int]] = {}
    for v in decl:
        tail, modulus, positions = state[v]
        good: set[int] = set()
        for p in sorted(positions):
            pinned = dict(state)
            pinned[v] = (tail, modulus, frozenset({p}))
            if _joint_decide(eq, pinned, factors, working_ceiling) is not None:
                good.add(p)
        kept[v] = good
    return kept


def constraints_mod_prime_power(
    eq: Equation,
    prime_power: int,
    *,
    ceiling: int = DEFAULT_ENUM_CEILING,
    max_combos: int | None = None,
) -> FactorAnalysis:
    """Exact exponent constraints mod one prime power.

    Enumerates the full product of power-track positions (tail plus one
    period per variable) and keeps the combinations satisfying the
    congruence; per-variable constraints are the projections, sound and
    complete mod the factor.  Raises FactorSizeError when the position
    product exceeds the ceiling.  With max_combos set, enumeration
    aborts once more combinations survive and the analysis comes back
    truncated (combos None, no constraints).
    """
    if prime_power < 2:
        raise CongruenceError("prime power must be >= 2")
    decl = eq.variables()
    tracks = [power_track(eq.base_of(v), prime_power) for v in decl]
    sizes = [tr.tail + tr.period for tr in tracks]
    product = math.prod(sizes) if sizes else 1
    if product > ceiling:
        raise FactorSizeError(
            f"position product {product} above ceiling mod {prime_power}",
            size=product,
            ceiling=ceiling,
        )
    c_mod = eq.rhs % prime_power
    terms = [
        (t.coefficient % prime_power, tuple(v for _, v in t.bases)) for t in eq.terms
    ]
    var_index = {v: i for i, v in enumerate(decl)}
    combos: list[tuple[int, ...]] = []
    truncated = False
    positions = [0] * len(decl)

    def recurse(i: int) -> bool:
        nonlocal truncated
        if i == len(decl):
            total = 0
            for coeff, members in terms:
                value = coeff
                for w in members:
                    j = var_index[w]
                    value = value * tracks[j].residues[positions[j]] % prime_power
                total += value
            if total % prime_power == c_mod:
                if max_combos is not None and len(combos) >= max_combos:
                    truncated = True
                    return False
                combos.append(tuple(positions))
            return True
        for p in range(sizes[i]):
            positions[i] = p
            if not recurse(i + 1):
                return False
        return True

    recurse(0)
    tails = tuple(tr.tail for tr in tracks)
    periods = tuple(tr.period for tr in tracks)
    if truncated:
        return FactorAnalysis(prime_power, (), None, tails, periods)
    constraints = []
    for i, v in enumerate(decl):
        mine = {combo[i] for combo in combos}
        tr = tracks[i]
        small = tuple(sorted(p for p in mine if p < tr.tail))
        residues = tuple(sorted(p - tr.tail for p in mine if p >= tr.tail))
        constraints.append(ResidueConstraint(v, tr.tail, small, tr.period, residues))
    return FactorAnalysis(prime_power, tuple(constraints), tuple(combos), tails, periods)


def solvable_mod(
    eq: Equation,
    m_factored: Factorization,
    factor_order: list[int] | None = None,
    *,
    working_ceiling: int = DEFAULT_WORKING_CEILING,
) -> CongruenceResult:
    """Decide the congruence mod the factored m.

    Factors are processed in the given order (callers normally order by
    the goodness score), then re-swept until the constraint system is
    stable.  UNSAT is returned either when some variable's position set
    empties or when the final joint enumeration over all surviving
    positions comes up empty; otherwise the first surviving tuple is
    lifted to a witness.
    """
    canonical = list(m_factored.prime_powers())
    if not canonical:
        raise CongruenceError("modulus 1 cannot witness anything")
    factors = list(factor_order) if factor_order is not None else canonical
    if sorted(factors) != sorted(canonical):
        raise CongruenceError("factor order must be a permutation of the prime powers")
    m = m_factored.value
    decl = eq.variables()
    states = {v: _VarState() for v in decl}
    steps: list[TraceStep] = []
    processed: list[int] = []
    unsat = False

    track_cache: dict[tuple[str, int], PowerTrack] = {}

    def tracks_for(factor: int) -> dict[str, PowerTrack]:
        out = {}
        for v in decl:
            key = (v, factor)
            if key not in track_cache:
                track_cache[key] = power_track(eq.base_of(v), factor)
            out[v] = track_cache[key]
        return out

    def process(factor: int) -> bool:
        nonlocal unsat
        if factor not in processed:
            processed.append(factor)
        tracks = tracks_for(factor)
        changed = False
        for v in decl:
            if states[v].lift(tracks[v].tail, tracks[v].period):
                changed = True
        if _refine_factor(eq, states, tracks, factor):
            changed = True
        if changed:
            steps.append(TraceStep(factor, tuple(states[v].constraint(v) for v in decl)))
        if any(not states[v].positions for v in decl):
            unsat = True
        return changed

    for factor in factors:
        process(factor)
        if unsat:
            break
    while not unsat:
        any_change = False
        for factor in factors:
            if process(factor):
                any_change = True
            if unsat:
                break
        if unsat or not any_change:
            break

    if unsat:
        trace = EliminationTrace(tuple(processed), tuple(steps), "unsat")
        return CongruenceResult("unsat", None, trace)

    final_state = {
        v: (states[v].tail, states[v].modulus, frozenset(states[v].positions))
        for v in decl
    }
    witness = _joint_decide(eq, final_state, sorted(set(factors)), working_ceiling)

    if witness is None:
        trace = EliminationTrace(tuple(processed), tuple(steps), "unsat", exhausted=True)
        return CongruenceResult("unsat", None, trace)

    combined = _support_projection(eq, final_state, sorted(set(factors)), working_ceiling)
    if combined is not None:
        combined_constraints = []
        for v in decl:
            tail, modulus, _positions = final_state[v]
            kept = combined[v]
            small = tuple(sorted(p for p in kept if p < tail))
            residues = tuple(sorted(p - tail for p in kept if p >= tail))
            combined_constraints.append(
                ResidueConstraint(v, tail, small, modulus, residues)
            )
        combined_tuple = tuple(combined_constraints)
    else:
        combined_tuple = None
    assert evaluate(eq, witness) % m == 0, "witness must satisfy the congruence"
    trace = EliminationTrace(
        tuple(processed),
        tuple(steps),
        "sat",
        witness=tuple(sorted(witness.items())),
        combined=combined_tuple,
    )
    return CongruenceResult("sat", witness, trace)


# ---------------------------------------------------------------------------
# Independent replay.  Everything below recomputes trace content from
# scratch with plain modular arithmetic; it deliberately repeats the
# mathematics instead of calling the engine.
# ---------------------------------------------------------------------------


def _replay_cycle(base: int, modulus: int) -> tuple[int, int]:
    """(tail, period) of base^u mod modulus by direct walking."""
    seen: dict[int, int] = {}
    count = 0
    r = 1 % modulus
    while r not in seen:
        seen[r] = count
        count += 1
        r = r * base % modulus
    tail = seen[r]
    return tail, count - tail


def replay_trace(eq: Equation, trace: EliminationTrace) -> ReplayVerdict:
    """Recompute every refinement of the trace from scratch.

    Accepts iff each step's constraints equal the independently
    recomputed fixpoint, refinements are monotone, and the final status
    is reproduced (including the exhaustive final check when claimed).
    """
    decl = eq.variables()
    terms = [(t.coefficient, tuple(v for _, v in t.bases)) for t in eq.terms]
    state: dict[str, tuple[int, int, set[int]]] = {v: (0, 1, {0}) for v in decl}

    if any(step.factor not in trace.factors for step in trace.steps):
        return ReplayVerdict(False, None, "step factor missing from factor list")
    if any(f < 2 for f in trace.factors):
        return ReplayVerdict(False, None, "factors must be >= 2")

    def representative(p: int, tail: int, modulus: int) -> int:
        if p < tail:
            return p
        return tail + ((p - tail) - tail) % modulus

    def full_product(sets: list[set[int]], start: int, t: int) -> set[int]:
        out = {start % t}
        for s in sets:
            if len(out) == t:
                return out
            nxt: set[int] = set()
            for a in out:
                for b in s:
                    nxt.add(a * b % t)
                if len(nxt) == t:
                    break
            out = nxt
        return out

    def full_sum(sets: list[set[int]], t: int) -> set[int]:
        out = {0}
        for s in sets:
            if len(out) == t:
                return out
            nxt: set[int] = set()
            for a in out:
                for b in s:
                    nxt.add((a + b) % t)
                if len(nxt) == t:
                    break
            out = nxt
        return out

    for index, step in enumerate(trace.steps):
        t = step.factor
        if {c.variable for c in step.constraints} != set(decl):
            return ReplayVerdict(False, index, "constraints do not cover the variables")
        cycles = {v: _replay_cycle(eq.base_of(v), t) for v in decl}
        for v in decl:
            tail, modulus, pos = state[v]
            ctail, cperiod = cycles[v]
            tail2, mod2 = max(tail, ctail), math.lcm(modulus, cperiod)
            if (tail2, mod2) != (tail, modulus):
                out: set[int] = set()
                for p in pos:
                    if p < tail:
                        out.add(p)
                    else:
                        r = p - tail
                        for a in range(tail, tail2):
                            if a % modulus == r:
                                out.add(a)
                        for r2 in range(r, mod2, modulus):
                            out.add(tail2 + r2)
                state[v] = (tail2, mod2, out)
        c_mod = eq.rhs % t
        while True:
            rep: dict[str, dict[int, int]] = {}
            for v in decl:
                tail, modulus, pos = state[v]
                base = eq.base_of(v)
                rep[v] = {
                    p: mod_pow(base, representative(p, tail, modulus), t) for p in pos
                }
            term_values = [
                full_product([set(rep[w].values()) for w in members], coeff, t)
                for coeff, members in terms
            ]
            changed = False
            for v in decl:
                tail, modulus, pos = state[v]
                ti = eq.term_index_of(v)
                others = full_sum(
                    [term_values[j] for j in range(len(terms)) if j != ti], t
                )
                targets = {(c_mod - s) % t for s in others}
                coeff, members = terms[ti]
                partner = full_product(
                    [set(rep[w].values()) for w in members if w != v], coeff, t
                )
                keep = {
                    p for p in pos if any(rep[v][p] * s % t in targets for s in partner)
                }
                if keep != pos:
                    state[v] = (tail, modulus, keep)
                    changed = True
            if not changed:
                break
        for c in step.constraints:
            tail, modulus, pos = state[c.variable]
            small = tuple(sorted(p for p in pos if p < tail))
            residues = tuple(sorted(p - tail for p in pos if p >= tail))
            if (c.tail, c.modulus, c.small_values, c.residues) != (
                tail,
                modulus,
                small,
                residues,
            ):
                return ReplayVerdict(
                    False, index, f"recomputed constraint for {c.variable} differs"
                )
        if index > 0:
            for c in step.constraints:
                previous = trace.constraint_for(index - 1, c.variable)
                if not c.refines(previous):
                    return ReplayVerdict(
                        False, index, f"constraint for {c.variable} is not a refinement"
                    )

    # every listed factor must be absorbed by the final (tail, modulus)
    for f in trace.factors:
        for v in decl:
            ctail, cperiod = _replay_cycle(eq.base_of(v), f)
            tail, modulus, _ = state[v]
            if ctail > tail or modulus % cperiod:
                return ReplayVerdict(False, None, f"factor {f} not absorbed by the trace")

    if trace.combined is not None:
        if {c.variable for c in trace.combined} != set(decl):
            return ReplayVerdict(False, None, "combined constraints miss variables")
        unique_factors = sorted(set(trace.factors))
        for c in trace.combined:
            tail, modulus, pos = state[c.variable]
            if (c.tail, c.modulus) != (tail, modulus):
                return ReplayVerdict(False, None, f"combined shape differs for {c.variable}")
            supported = set()
            for p in sorted(pos):
                pinned = dict(state)
                pinned[c.variable] = (tail, modulus, {p})
                if _replay_find_tuple(eq, terms, pinned, unique_factors) is not None:
                    supported.add(p)
            small = tuple(sorted(p for p in supported if p < tail))
            residues = tuple(sorted(p - tail for p in supported if p >= tail))
            if (c.small_values, c.residues) != (small, residues):
                return ReplayVerdict(
                    False, None, f"combined constraint for {c.variable} differs"
                )

    if trace.status == "unsat":
        if any(not state[v][2] for v in decl):
            return ReplayVerdict(True)
        if not trace.exhausted:
            return ReplayVerdict(False, None, "unsat claimed but no variable eliminated")
        if _replay_find_tuple(eq, terms, state, sorted(set(trace.factors))) is not None:
            return ReplayVerdict(False, None, "claimed exhausted but a tuple survives")
        return ReplayVerdict(True)

    if trace.status == "sat":
        if trace.witness is None:
            return ReplayVerdict(False, None, "sat claimed without witness")
        witness = dict(trace.witness)
        if set(witness) != set(decl):
            return ReplayVerdict(False, None, "witness does not cover the variables")
        if any(e < 0 for e in witness.values()):
            return ReplayVerdict(False, None, "negative exponent in witness")
        for f in set(trace.factors):
            if not _congruence_holds(eq, terms, witness, f):
                return ReplayVerdict(False, None, "witness fails a recorded factor")
        return ReplayVerdict(True)

    return ReplayVerdict(False, None, f"unknown status {trace.status!r}")


def _congruence_holds(eq, terms, witness: dict[str, int], factor: int) -> bool:
    total = 0
    for coeff, members in terms:
        value = coeff
        for w in members:
            value = value * mod_pow(eq.base_of(w), witness[w], factor) % factor
        total += value
    return total % factor == eq.rhs % factor


def _replay_find_tuple(
    eq,
    terms,
    state: dict[str, tuple[int, int, set[int]]],
    factors: list[int],
) -> dict[str, int] | None:
    """Independent search of the final constraint sets for a witness.

    Splits the terms into a hashed half and a streamed half over the
    admitted exponent representatives and matches sums mod the product
    of the factors; powers come from mod_pow directly.
    """
    m = math.prod(factors)
    decl = list(eq.variables())
    if not decl:
        witness: dict[str, int] = {}
        return witness if all(_congruence_holds(eq, terms, witness, f) for f in factors) else None

    reps: dict[str, list[int]] = {}
    for v in decl:
        tail, modulus, pos = state[v]
        reps[v] = sorted(
            p if p < tail else tail + ((p - tail) - tail) % modulus for p in pos
        )

    def term_table(ti: int) -> tuple[list[int], list[tuple[tuple[str, int], ...]]]:
        coeff, members = terms[ti]
        values = [coeff % m]
        assigns: list[tuple[tuple[str, int], ...]] = [()]
        for w in members:
            base = eq.base_of(w)
            powers = [mod_pow(base, e, m) for e in reps[w]]
            values = [v * bp % m for v in values for bp in powers]
            assigns = [a + ((w, e),) for a in assigns for e in reps[w]]
        return values, assigns

    counts = []
    for _, members in terms:
        size = 1
        for w in members:
            size *= len(reps[w])
        counts.append(size)
    k = len(terms)
    best_mask, best_key = 0, None
    for mask in range(1 << k):
        side_a = math.prod(counts[i] for i in range(k) if mask >> i & 1) if mask else 1
        side_b = math.prod(counts[i] for i in range(k) if not mask >> i & 1)
        key = (max(side_a, side_b), side_a, mask)
        if best_key is None or key < best_key:
            best_key, best_mask = key, mask

    table: dict[int, tuple[tuple[str, int], ...]] = {}
    values_a = [0]
    assigns_a: list[tuple[tuple[str, int], ...]] = [()]
    for ti in range(k):
        if best_mask >> ti & 1:
            values, assigns = term_table(ti)
            values_a = [(a + b) % m for a in values_a for b in values]
            assigns_a = [x + y for x in assigns_a for y in assigns]
    for value, assign in zip(values_a, assigns_a):
        table.setdefault(value, assign)

    streamed = sorted(
        (i for i in range(k) if not best_mask >> i & 1), key=lambda i: (counts[i], i)
    )
    prefix_values = [0]
    prefix_assigns: list[tuple[tuple[str, int], ...]] = [()]
    for ti in streamed[:-1]:
        values, assigns = term_table(ti)
        prefix_values = [(a + b) % m for a in prefix_values for b in values]
        prefix_assigns = [x + y for x in prefix_assigns for y in assigns]
    if streamed:
        last_values, last_assigns = term_table(streamed[-1])
    else:
        last_values, last_assigns = [0], [()]

    rhs = eq.rhs % m
    for prefix_value, prefix_assign in zip(prefix_values, prefix_assigns):
        base_want = (rhs - prefix_value) % m
        for j, last in enumerate(last_values):
            hit = table.get((base_want - last) % m)
            if hit is not None:
                witness = dict(hit)
                witness.update(prefix_assign)
                witness.update(last_assigns[j])
                return witness
    return None
