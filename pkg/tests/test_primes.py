import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disorder_lab.errors import CapacityError, OutOfRangeError
from disorder_lab.primes import PrimeTable, mertens_sum, sieve_upto

from oracles import is_prime, mertens_constant, trial_division_primes


@pytest.fixture(scope="module")
def table_1e6():
    return sieve_upto(10**6)


def test_small_examples():
    assert sieve_upto(10).primes.tolist() == [2, 3, 5, 7]
    assert len(sieve_upto(1)) == 0
    assert len(sieve_upto(0)) == 0
    assert len(sieve_upto(100)) == 25


def test_matches_trial_division_to_1e5():
    ours = sieve_upto(10**5).primes.tolist()
    assert ours == trial_division_primes(10**5)


def test_segment_boundaries():
    # bounds straddling the segment size exercise the segmented branch
    from disorder_lab.primes import SEGMENT

    for bound in (SEGMENT - 1, SEGMENT, SEGMENT + 1, 2 * SEGMENT + 17):
        table = sieve_upto(bound)
        assert table.primes[-1] <= bound
        assert np.all(np.diff(table.primes) > 0)
    rng = np.random.default_rng(0)
    sample = rng.choice(table.primes, 200, replace=False)
    assert all(is_prime(int(p)) for p in sample)


def test_capacity_error_names_cap():
    with pytest.raises(CapacityError, match="1000"):
        sieve_upto(1001, cap=1000)
    with pytest.raises(OutOfRangeError):
        sieve_upto(-1)


def test_mertens_examples(table_1e6):
    assert mertens_sum(table_1e6, 10) == pytest.approx(1 / 2 + 1 / 3 + 1 / 5 + 1 / 7, abs=1e-15)
    assert mertens_sum(table_1e6, 10) == pytest.approx(1.1761905, abs=1e-7)
    assert mertens_sum(table_1e6, 1) == 0
    M = mertens_constant()
    assert M == pytest.approx(0.2614972128, abs=1e-8)
    assert mertens_sum(table_1e6, 10**6) == pytest.approx(math.log(math.log(1e6)) + M, abs=1e-3)
    assert mertens_sum(table_1e6, 10**6) == pytest.approx(2.8873, abs=1e-3)


def test_mertens_out_of_range():
    with pytest.raises(OutOfRangeError):
        mertens_sum(sieve_upto(100), 101)


def test_mertens_trend(table_1e6):
    M = mertens_constant()
    gaps = [abs(mertens_sum(table_1e6, 10**e) - math.log(math.log(10**e)) - M) for e in (3, 4, 5, 6)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 10**6), st.floats(0, 10**6))
def test_mertens_monotone(table_1e6, a, b):
    lo, hi = sorted((a, b))
    assert mertens_sum(table_1e6, lo) <= mertens_sum(table_1e6, hi)


def test_logs_against_quadruple_precision():
    table = sieve_upto(2000, log_bits=256)
    ref = mpmath.MPContext()
    ref.prec = 1024
    for p, lp in zip(table.primes[::7], table.logs[::7]):
        exact = ref.log(int(p))
        ulp = ref.ldexp(1, int(ref.floor(ref.log(abs(exact), 2))) - 255)
        assert abs(ref.mpf(lp) - exact) <= 2 * ulp


def test_logs_at_other_precision_and_count():
    table = sieve_upto(100)
    logs = table.logs_at(512, 5)
    assert len(logs) == 5
    assert logs[0].context.prec == 512
    assert float(logs[-1]) == pytest.approx(math.log(11))


def test_cache_round_trip(tmp_path):
    table = sieve_upto(5000, log_bits=200)
    path = tmp_path / "t.ptbl"
    table.save(path)
    raw = path.read_bytes()
    assert raw[:5] == b"PTBL1"
    back = PrimeTable.load(path)
    assert back.bound == 5000 and back.log_bits == 200
    assert np.array_equal(back.primes, table.primes)
    assert all(a == b for a, b in zip(back.logs, table.logs))
    with pytest.raises(ValueError):
        PrimeTable.from_bytes(b"XXXXX" + raw[5:])
    bad = bytearray(raw)
    bad[5] = 9
    with pytest.raises(ValueError, match="version"):
        PrimeTable.from_bytes(bytes(bad))


def test_count_upto():
    table = sieve_upto(100)
    assert table.count_upto(2) == 1
    assert table.count_upto(2.9) == 1
    assert table.count_upto(1) == 0
    with pytest.raises(OutOfRangeError):
        table.count_upto(101)
