import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expdioph.ntheory import (
    Factorization,
    NotCoprimeError,
    NTheoryError,
    SievePoolExhaustedError,
    SmoothnessSpec,
    carmichael,
    factorize,
    is_prime,
    mod_pow,
    mult_order,
    parse_factorization,
    power_track,
    smooth_sieve,
    small_lambda_modulus,
)


def brute_order(b: int, m: int) -> int:
    d, x = 1, b % m
    while x != 1:
        x = x * b % m
        d += 1
    return d


def brute_lambda(m: int) -> int:
    units = [a for a in range(1, m) if math.gcd(a, m) == 1]
    lam = 1
    while any(pow(a, lam, m) != 1 for a in units):
        lam += 1
    return lam


class TestFactorize:
    def test_known_big_modulus(self):
        got = factorize(7031324575728)
        assert got.factors == ((2, 4), (3, 2), (17, 1), (19, 1), (37, 1), (73, 1), (97, 1), (577, 1))
        assert got.value == 7031324575728

    def test_one(self):
        assert factorize(1).factors == ()
        assert factorize(1).value == 1

    def test_600(self):
        assert factorize(600).factors == ((2, 3), (3, 1), (5, 2))

    def test_round_trip_random_64bit(self):
        rng = random.Random(12345)
        for _ in range(10_000):
            n = rng.getrandbits(64) | 1 << 63
            fact = factorize(n)
            assert fact.value == n
            for p, e in fact.factors:
                assert e >= 1 and is_prime(p)

    def test_deterministic(self):
        n = 2**61 - 3
        assert factorize(n) == factorize(n)

    def test_rejects_zero(self):
        with pytest.raises(NTheoryError):
            factorize(0)


class TestParseFactorization:
    def test_simple(self):
        fact = parse_factorization("2^4*3^2*17")
        assert fact.factors == ((2, 4), (3, 2), (17, 1))
        assert str(fact) == "2^4*3^2*17"

    def test_single_prime(self):
        assert parse_factorization("3").value == 3

    def test_rejects_repeat(self):
        with pytest.raises(NTheoryError):
            parse_factorization("2*2")

    def test_rejects_composite(self):
        with pytest.raises(NTheoryError):
            parse_factorization("6^2")


class TestModPow:
    def test_order_of_5_mod_9(self):
        assert mod_pow(5, 6, 9) == 1

    def test_exponent_zero(self):
        for b, m in [(3, 7), (10, 9), (2, 555)]:
            assert mod_pow(b, 0, m) == 1

    def test_343_mod_9(self):
        assert mod_pow(7, 3, 9) == 1

    def test_negative_base(self):
        assert mod_pow(-3, 3, 7) == (-27) % 7


class TestMultOrder:
    def test_paper_orders_mod_9(self):
        assert mult_order(5, 9) == 6
        assert mult_order(13, 9) == 3

    def test_identity(self):
        for m in (2, 9, 100):
            assert mult_order(1, m) == 1

    def test_7_mod_9(self):
        # brute force: 7, 4, 1
        assert brute_order(7, 9) == 3
        assert mult_order(7, 9) == 3

    def test_non_coprime_raises(self):
        with pytest.raises(NotCoprimeError):
            mult_order(6, 9)

    @given(st.integers(2, 500), st.integers(2, 500))
    @settings(max_examples=200, deadline=None)
    def test_divides_carmichael(self, b, m):
        if math.gcd(b, m) != 1:
            return
        assert carmichael(m) % mult_order(b, m) == 0

    def test_matches_brute_force(self):
        rng = random.Random(7)
        for _ in range(100):
            m = rng.randrange(3, 400)
            b = rng.randrange(2, m)
            if math.gcd(b, m) == 1:
                assert mult_order(b, m) == brute_order(b, m)


class TestCarmichael:
    def test_two(self):
        assert carmichael(2) == 1

    def test_nine(self):
        assert brute_lambda(9) == 6
        assert carmichael(9) == 6

    def test_sixteen(self):
        assert brute_lambda(16) == 4
        assert carmichael(16) == 4

    def test_brute_force_small(self):
        for m in range(1, 80):
            if m == 1:
                assert carmichael(1) == 1
            else:
                assert carmichael(m) == brute_lambda(m)

    def test_submultiplicative_sample(self):
        # lambda(a*b) <= a * lambda(b); the exhaustive scan lives in acceptance.
        for m in range(2, 2000):
            for a in (2, 3, 4, 6):
                if m % a == 0:
                    assert carmichael(m) <= a * carmichael(m // a)


class TestPowerTrack:
    def test_2_mod_8(self):
        tr = power_track(2, 8)
        assert tr.residues == (1, 2, 4, 0)
        assert tr.tail == 3 and tr.period == 1

    def test_2_mod_7(self):
        tr = power_track(2, 7)
        assert tr.residues == (1, 2, 4)
        assert tr.tail == 0 and tr.period == 3

    def test_5_mod_9(self):
        tr = power_track(5, 9)
        assert tr.tail == 0 and tr.period == 6

    def test_rejects_non_prime_power(self):
        with pytest.raises(NTheoryError):
            power_track(2, 12)

    def test_residue_at_matches_direct(self):
        rng = random.Random(99)
        for _ in range(50):
            base = rng.randrange(2, 50)
            q_pow = rng.choice([4, 8, 9, 25, 27, 49, 121, 16, 343])
            tr = power_track(base, q_pow)
            for u in range(40):
                assert tr.residue_at(u) == pow(base, u, q_pow)

    def test_minimal_period(self):
        for base, q_pow in [(2, 9), (4, 25), (10, 8), (6, 27)]:
            tr = power_track(base, q_pow)
            assert tr.period >= 1
            if tr.period > 1:
                # no smaller period works on the cycle
                cycle = tr.residues[tr.tail :]
                for p in range(1, tr.period):
                    assert any(cycle[i] != cycle[(i + p) % tr.period] for i in range(tr.period))

    def test_residue_count_bound_sample(self):
        # |{b^u mod q^beta}| <= lambda(q^beta) + beta; full-scale run in acceptance.
        rng = random.Random(5)
        for _ in range(150):
            base = rng.randrange(2, 10_000)
            q = rng.choice([2, 3, 5, 7, 11, 13])
            beta = rng.randrange(1, 7)
            q_pow = q**beta
            if q_pow > 10**6 or q_pow < 2:
                continue
            tr = power_track(base, q_pow)
            direct = {pow(base, u, q_pow) for u in range(tr.tail + tr.period)}
            assert tr.distinct_residues() == direct
            assert len(direct) <= carmichael(q_pow) + beta


class TestSmoothSieve:
    def test_contains_paper_factors(self):
        primes = smooth_sieve(SmoothnessSpec((2, 3, 5), 20000))
        assert 577 in primes  # 576 = 2^6 * 3^2
        assert 601 in primes  # 600 = 2^3 * 3 * 5^2
        assert 23 not in primes  # 22 = 2 * 11

    def test_matches_brute_filter(self):
        spec = SmoothnessSpec((2, 3, 5), 2000)
        got = smooth_sieve(spec)
        expect = []
        for p in range(6, 2001):
            if not is_prime(p):
                continue
            n = p - 1
            for s in (2, 3, 5):
                while n % s == 0:
                    n //= s
            if n == 1:
                expect.append(p)
        assert got == expect

    def test_bound_30(self):
        assert smooth_sieve(SmoothnessSpec((2, 3, 5), 30)) == [7, 11, 13, 17, 19]


class TestSmallLambdaModulus:
    def test_trivial_target(self):
        m, lam = small_lambda_modulus(1, 2)
        assert m == 7  # smallest admissible pool prime
        assert lam == carmichael(m)

    def test_divisibility(self):
        for target in (2, 100, 10_000):
            m, _ = small_lambda_modulus(6, target)
            assert m % 6 == 0

    def test_small_lambda_at_scale(self):
        m, lam = small_lambda_modulus(1, 10**6)
        assert m >= 10**6
        assert lam == carmichael(m)
        assert lam ** 3 < m

    def test_lambda_product_bound(self):
        # lambda(m) <= r * lambda(n) with m = r*n
        r, target = 12, 10**4
        m, lam = small_lambda_modulus(r, target)
        n = m // r
        assert lam <= r * carmichael(n)

    def test_pool_exhaustion(self):
        with pytest.raises(SievePoolExhaustedError) as info:
            small_lambda_modulus(1, 10**9, SmoothnessSpec((2, 3, 5), 8))
        assert info.value.best_n == 7

    def test_deterministic(self):
        assert small_lambda_modulus(3, 12345) == small_lambda_modulus(3, 12345)


class TestFactorizationType:
    def test_rejects_unsorted(self):
        with pytest.raises(NTheoryError):
            Factorization(((3, 1), (2, 1)))

    def test_rejects_composite_prime(self):
        with pytest.raises(NTheoryError):
            Factorization(((4, 1),))

    def test_prime_powers(self):
        assert factorize(600).prime_powers() == (8, 3, 25)
