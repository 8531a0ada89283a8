"""Integer and modular-arithmetic primitives.

Pure, deterministic building blocks: factorization (trial division plus
Brent's rho with fixed seeding), primality testing, multiplicative
order, the Carmichael function, power tracks (the eventually periodic
sequence b^u mod q^beta), a sieve for primes whose p-1 is smooth, and a
greedy builder for moduli with small Carmichael value.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "NTheoryError",
    "NotCoprimeError",
    "SievePoolExhaustedError",
    "Factorization",
    "PowerTrack",
    "SmoothnessSpec",
    "is_prime",
    "factorize",
    "parse_factorization",
    "mod_pow",
    "mult_order",
    "carmichael",
    "power_track",
    "smooth_sieve",
    "small_lambda_modulus",
]


class NTheoryError(ValueError):
    """Invalid input to a number-theory primitive."""


class NotCoprimeError(NTheoryError):
    """mult_order needs gcd(b, m) = 1; callers should use power_track instead."""


class SievePoolExhaustedError(NTheoryError):
    """The smooth-order prime pool ran out before the size target was met."""

    def __init__(self, message: str, *, best_n: int, best_lambda: int) -> None:
        super().__init__(message)
        self.best_n = best_n
        self.best_lambda = best_lambda


# Strong-pseudoprime witnesses; deterministic for n below this limit.
_MR_DETERMINISTIC_LIMIT = 3_317_044_064_679_887_385_961_981
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
# Above the limit the test is probabilistic (error < 4^-40), seeded from n.
_MR_EXTRA_ROUNDS = 40

# Brent rho picks up anything the wheel misses; the wheel just keeps
# common small-factor inputs off the rho path.
_TRIAL_LIMIT = 10_000


def is_prime(n: int) -> bool:
    """Miller-Rabin primality test, deterministic for 64-bit-scale inputs."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d = n - 1
    s = ((d & -d).bit_length()) - 1
    d >>= s

    def is_witness(a: int) -> bool:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            return False
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                return False
        return True

    for a in _MR_BASES:
        if is_witness(a):
            return False
    if n >= _MR_DETERMINISTIC_LIMIT:
        rng = random.Random(n % (1 << 64))
        for _ in range(_MR_EXTRA_ROUNDS):
            if is_witness(rng.randrange(2, n - 1)):
                return False
    return True


@dataclass(frozen=True)
class Factorization:
    """A factored positive integer: distinct verified primes, exponents >= 1."""

    factors: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        previous = 1
        for prime, exponent in self.factors:
            if prime <= previous:
                raise NTheoryError("factors must be sorted by strictly increasing prime")
            if exponent < 1:
                raise NTheoryError(f"exponent of {prime} must be >= 1")
            if not is_prime(prime):
                raise NTheoryError(f"{prime} is not prime")
            previous = prime

    @property
    def value(self) -> int:
        out = 1
        for prime, exponent in self.factors:
            out *= prime**exponent
        return out

    def prime_powers(self) -> tuple[int, ...]:
        return tuple(p**e for p, e in self.factors)

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        return "*".join(f"{p}^{e}" if e > 1 else str(p) for p, e in self.factors)


def parse_factorization(text: str) -> Factorization:
    """Parse "2^4*3^2*17" into a Factorization (distinct primes required)."""
    seen: dict[int, int] = {}
    for chunk in text.strip().split("*"):
        chunk = chunk.strip()
        if not chunk:
            raise NTheoryError("empty factor in modulus string")
        if "^" in chunk:
            base_text, _, exp_text = chunk.partition("^")
        else:
            base_text, exp_text = chunk, "1"
        try:
            prime, exponent = int(base_text), int(exp_text)
        except ValueError as exc:
            raise NTheoryError(f"bad factor {chunk!r}") from exc
        if prime in seen:
            raise NTheoryError(f"prime {prime} repeated in modulus string")
        seen[prime] = exponent
    return Factorization(tuple(sorted(seen.items())))


def _brent_rho(n: int, seed: int) -> int:
    """Return a nontrivial divisor of composite odd n."""
    rng = random.Random((n * 0x9E3779B97F4A7C15 + seed) % (1 << 64))
    while True:
        y = rng.randrange(1, n)
        c = rng.randrange(1, n)
        m = 128
        g = r = q = 1
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r <<= 1
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g


def factorize(n: int, *, seed: int = 1) -> Factorization:
    """Factor n >= 1 into prime powers (trial division, then Brent rho)."""
    if n < 1:
        raise NTheoryError("factorize requires n >= 1")
    counts: dict[int, int] = {}
    for p in (2, 3, 5):
        while n % p == 0:
            counts[p] = counts.get(p, 0) + 1
            n //= p
    p = 7
    wheel = (4, 2, 4, 2, 4, 6, 2, 6)
    w = 0
    while p * p <= n and p <= _TRIAL_LIMIT:
        while n % p == 0:
            counts[p] = counts.get(p, 0) + 1
            n //= p
        p += wheel[w]
        w = (w + 1) % 8
    stack = [n] if n > 1 else []
    while stack:
        v = stack.pop()
        if v == 1:
            continue
        if is_prime(v):
            counts[v] = counts.get(v, 0) + 1
            continue
        root = math.isqrt(v)
        if root * root == v:
            stack.extend((root, root))
            continue
        d = _brent_rho(v, seed)
        stack.extend((d, v // d))
    return Factorization(tuple(sorted(counts.items())))


def mod_pow(base: int, exponent: int, modulus: int) -> int:
    """base**exponent mod modulus, result in [0, modulus)."""
    if modulus < 2:
        raise NTheoryError("modulus must be >= 2")
    if exponent < 0:
        raise NTheoryError("exponent must be non-negative")
    return pow(base, exponent, modulus)


def carmichael(m: int) -> int:
    """Carmichael's lambda: least universal exponent for units mod m."""
    if m < 1:
        raise NTheoryError("carmichael requires m >= 1")
    lam = 1
    for prime, exponent in factorize(m).factors:
        if prime == 2:
            part = 1 if exponent == 1 else 2 if exponent == 2 else 1 << (exponent - 2)
        else:
            part = (prime - 1) * prime ** (exponent - 1)
        lam = math.lcm(lam, part)
    return lam


def mult_order(base: int, modulus: int) -> int:
    """Least d >= 1 with base^d = 1 mod modulus (gcd(base, modulus) must be 1).

    Computed by factoring lambda(modulus) and descending through prime
    divisors, not by stepping through powers.
    """
    if modulus < 2:
        raise NTheoryError("modulus must be >= 2")
    b = base % modulus
    if math.gcd(b, modulus) != 1:
        raise NotCoprimeError(
            f"gcd({base}, {modulus}) > 1: no multiplicative order; use power_track"
        )
    order = carmichael(modulus)
    for prime, _ in factorize(order).factors:
        while order % prime == 0 and pow(b, order // prime, modulus) == 1:
            order //= prime
    return order


@dataclass(frozen=True)
class PowerTrack:
    """Eventually periodic residues of base^u modulo a prime power.

    residues holds u = 0 .. tail+period-1; indices >= tail repeat with
    the given (minimal) period.
    """

    base: int
    modulus: int
    tail: int
    period: int
    residues: tuple[int, ...]

    def residue_at(self, exponent: int) -> int:
        if exponent < len(self.residues):
            return self.residues[exponent]
        return self.residues[self.tail + (exponent - self.tail) % self.period]

    def distinct_residues(self) -> frozenset[int]:
        return frozenset(self.residues)


@lru_cache(maxsize=1 << 14)
def power_track(base: int, prime_power: int) -> PowerTrack:
    """Track of base^u mod q^beta, exact tail and minimal period."""
    if base < 2:
        raise NTheoryError("base must be >= 2")
    fact = factorize(prime_power)
    if len(fact.factors) != 1:
        raise NTheoryError(f"{prime_power} is not a prime power")
    q = fact.factors[0][0]
    if base % q:
        period = mult_order(base, prime_power)
        residues = [1]
        for _ in range(period - 1):
            residues.append(residues[-1] * base % prime_power)
        return PowerTrack(base, prime_power, 0, period, tuple(residues))
    seen: dict[int, int] = {}
    seq: list[int] = []
    r = 1 % prime_power
    while r not in seen:
        seen[r] = len(seq)
        seq.append(r)
        r = r * base % prime_power
    tail = seen[r]
    return PowerTrack(base, prime_power, tail, len(seq) - tail, tuple(seq))


@dataclass(frozen=True)
class SmoothnessSpec:
    """Which primes count as smooth, and how far to sieve."""

    primes: tuple[int, ...] = (2, 3, 5)
    bound: int = 20000

    def __post_init__(self) -> None:
        if not self.primes:
            raise NTheoryError("smooth prime set must be non-empty")
        if tuple(sorted(set(self.primes))) != self.primes:
            raise NTheoryError("smooth primes must be sorted and distinct")
        for p in self.primes:
            if not is_prime(p):
                raise NTheoryError(f"smooth prime {p} is not prime")
        if self.bound < 1:
            raise NTheoryError("bound must be positive")


def _prime_table(limit: int) -> list[int]:
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, math.isqrt(limit) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
    return [i for i in range(2, limit + 1) if sieve[i]]


@lru_cache(maxsize=64)
def _smooth_sieve_cached(spec: SmoothnessSpec) -> tuple[int, ...]:
    floor = max(spec.primes)
    out = []
    for p in _prime_table(spec.bound):
        if p <= floor:
            continue
        n = p - 1
        for s in spec.primes:
            while n % s == 0:
                n //= s
        if n == 1:
            out.append(p)
    return tuple(out)


def smooth_sieve(spec: SmoothnessSpec) -> list[int]:
    """Primes p <= bound, p above every smooth prime, with p-1 smooth."""
    if spec.bound < 3:
        raise NTheoryError("sieve bound must be >= 3")
    return list(_smooth_sieve_cached(spec))


def small_lambda_modulus(
    r: int, target: int, spec: SmoothnessSpec | None = None
) -> tuple[int, int]:
    """Build m = r*n with n >= target from distinct smooth-order primes.

    Primes are added greedily, cheapest lambda-growth per log of size
    first, so lambda(n) stays small; lambda(m) <= r*lambda(n) always
    holds.  Returns (m, lambda(m)).
    """
    if r < 1:
        raise NTheoryError("r must be >= 1")
    if target < 2:
        raise NTheoryError("target must be >= 2")
    spec = spec if spec is not None else SmoothnessSpec()
    remaining = smooth_sieve(spec)
    n = 1
    lam = 1
    while n < target:
        if not remaining:
            raise SievePoolExhaustedError(
                f"pool exhausted at n={n} (target {target})",
                best_n=n,
                best_lambda=lam,
            )
        best_key = None
        best_p = None
        for p in remaining:
            growth = math.lcm(lam, p - 1) // lam
            key = (math.log(growth) / math.log(p), -p)
            if best_key is None or key < best_key:
                best_key, best_p = key, p
        remaining.remove(best_p)
        n *= best_p
        lam = math.lcm(lam, best_p - 1)
    m = r * n
    return m, carmichael(m)
