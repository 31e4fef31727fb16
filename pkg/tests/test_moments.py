import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disorder_lab import dirichlet as D
from disorder_lab import moments as Mo
from disorder_lab.disorder import (
    FULL_PLANE, NEGATIVE_QUADRANT, DisorderParams, MomentSpec, Rectangle, rect_prob, sample_disorder,
)
from disorder_lab.errors import AlignmentError, CapacityError, ContractError
from disorder_lab.phases import make_phase_context
from disorder_lab.primes import mertens_sum, sieve_upto

from oracles import diagonal_bruteforce, trial_division_primes


@pytest.fixture(scope="module")
def table():
    return sieve_upto(200_000)


# ---------------------------------------------------------------------------
# empirical moments


def test_constant_integrand_gives_one():
    spec = MomentSpec((0.5,), (1,), (1,))
    est = Mo.empirical_joint_moment([np.ones(64)], spec)
    assert est.value == 1 and est.std_error == 0
    assert est.target == 0.5 and est.z_re == math.inf
    est = Mo.empirical_joint_moment([np.ones(64)], spec, finite_N_target=1.0)
    assert est.z_re == 0.0


def test_swapping_exponents_conjugates():
    rng = np.random.default_rng(3)
    z = [rng.normal(size=256) + 1j * rng.normal(size=256) for _ in range(2)]
    spec = MomentSpec((0.9, 0.4), (2, 1), (1, 0))
    a = Mo.empirical_joint_moment(z, spec)
    b = Mo.empirical_joint_moment(z, spec.swapped())
    assert b.value == pytest.approx(np.conj(a.value), abs=1e-13)
    assert b.std_error == pytest.approx(a.std_error, rel=1e-12)


def test_conjugate_samples():
    z = np.array([1 + 1j, 2j])
    w = np.array([1.0, 1j])
    f = Mo.moment_integrand([z], MomentSpec((1.0,), (1,), (1,)), conj_samples=[w])
    assert f.tolist() == [1 + 1j, 2 + 0j]


def test_alignment_errors():
    spec = MomentSpec((0.9, 0.4), (1, 1), (1, 1))
    with pytest.raises(AlignmentError):
        Mo.empirical_joint_moment([np.ones(64), np.ones(32)], spec)
    with pytest.raises(AlignmentError):
        Mo.empirical_joint_moment([np.ones(64)], spec)
    with pytest.raises(AlignmentError):
        Mo.empirical_joint_moment([np.ones(64)] * 2, spec, u_grids=[np.arange(64), np.arange(64) + 1])
    with pytest.raises(ContractError):
        Mo.empirical_joint_moment([np.ones(64)] * 2, spec, mode="sobol")
    with pytest.raises(ContractError):
        Mo.block_jackknife(np.ones(10))


def test_jackknife_matches_iid_error_for_white_noise():
    x = np.random.default_rng(8).normal(size=32_000)
    _, _, se_re, se_im = Mo.block_jackknife(x)
    assert se_im == 0
    assert se_re == pytest.approx(1 / math.sqrt(x.size), rel=0.35)


def test_two_scale_disorder_moment_converges():
    z = sample_disorder([0.9, 0.5], 10**6, 17)
    for m, n, exact in [((1, 1), (1, 1), 0.45), ((2, 1), (2, 1), 1.62 * 0.5), ((1, 0), (1, 0), 0.9)]:
        spec = MomentSpec((0.9, 0.5), m, n)
        est = Mo.empirical_joint_moment([z[:, 0], z[:, 1]], spec, mode="random")
        assert est.target == pytest.approx(exact, rel=1e-12)
        assert abs(est.value.real - exact) <= 3 * est.std_error_re
        assert abs(est.value.imag) <= 3 * est.std_error_im


# ---------------------------------------------------------------------------
# diagonal enumeration


def test_diagonal_examples(table):
    assert Mo.diagonal_exact(table, 3, 1).exact == pytest.approx(5 / 6, abs=1e-12)
    assert Mo.diagonal_exact(table, 3, 2).exact == pytest.approx(37 / 36, abs=1e-12)
    assert Mo.diagonal_exact(table, 100, 2, m=1).exact == 0.0
    assert Mo.diagonal_exact(table, 1.5, 2).exact == 0.0


@pytest.mark.parametrize("cutoff,n", [(30, 1), (30, 2), (30, 3), (60, 2), (13, 4)])
def test_diagonal_against_bruteforce(table, cutoff, n):
    assert Mo.diagonal_exact(table, cutoff, n).exact == pytest.approx(
        diagonal_bruteforce(trial_division_primes(cutoff), n), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 3000))
def test_two_tuple_identity(table, cutoff):
    p = table.primes[: table.count_upto(cutoff)].astype(float)
    s1, s2 = math.fsum(1 / p), math.fsum(1 / p**2)
    assert Mo.diagonal_exact(table, cutoff, 2).exact == pytest.approx(2 * s1**2 - s2, rel=1e-10)


def test_diagonal_ratio_approaches_one(table):
    r = Mo.diagonal_exact(table, 10**4, 2)
    assert r.asymptotic == pytest.approx(2 * mertens_sum(table, 1e4) ** 2)
    assert 0.95 <= r.ratio <= 1.0


def test_diagonal_budget(table):
    with pytest.raises(CapacityError):
        Mo.diagonal_exact(table, 10**5, 3, budget=10**6)
    with pytest.raises(ContractError):
        Mo.diagonal_exact(table, 10, 0)


def test_diagonal_asymptotic_examples():
    a = Mo.diagonal_asymptotic(0.5, math.exp(10), 2, 1)
    assert a.leading == pytest.approx(50.0, rel=1e-12)
    assert a.finite == pytest.approx(2 * (5 - math.log(80)) ** 2, rel=1e-12)
    assert Mo.diagonal_asymptotic(0.5, 100, 0, 1).leading == 1.0
    with pytest.warns(RuntimeWarning):
        assert Mo.diagonal_asymptotic(0.1, 10, 1, 2).finite == 0.0


def test_finite_n_target(table):
    small = MomentSpec((0.8,), (1,), (1,))
    c = math.exp(300**0.8 / 40)
    expected = mertens_sum(table, c) / math.log(300)
    assert Mo.finite_n_diagonal_target(small, 300, table) == pytest.approx(expected, rel=1e-12)
    assert Mo.finite_n_diagonal_target(MomentSpec((0.8,), (2,), (1,)), 300, table) == 0.0


# ---------------------------------------------------------------------------
# inequalities


def test_offdiag_examples():
    r = Mo.offdiag_bound_check(10)
    assert r.holds and (r.worst_m, r.worst_n) in {(9, 10), (10, 9)}
    r = Mo.offdiag_bound_check(2000, rows=333)
    assert r.holds
    assert r.tightness == pytest.approx(2.0, abs=1e-3)
    with pytest.raises(CapacityError):
        Mo.offdiag_bound_check(10**6)


def test_holder_exponents():
    assert Mo.holder_exponents(2, 1) == (2.0, 2.0)
    assert Mo.holder_exponents(3, 0) == (1.0, math.inf)
    assert Mo.holder_exponents(3, 3) == (math.inf, 1.0)


def test_holder_constant_case():
    ones = np.ones(100)
    r = Mo.holder_check([[ones * 2, ones, ones * 3, ones]], [(2, 2, 2, 2)])
    assert r.lhs == pytest.approx(6.0, abs=1e-12) and r.rhs == pytest.approx(6.0, abs=1e-12)
    assert r.holds


def test_holder_random_instances():
    rng = np.random.default_rng(21)
    for _ in range(100):
        k = int(rng.integers(1, 4))
        seqs, exps = [], []
        for _ in range(k):
            seqs.append([np.abs(rng.normal(size=200)) + 1j * rng.normal(size=200) for _ in range(4)])
            m = int(rng.integers(2, 6))
            a1, a2 = int(rng.integers(0, m + 1)), int(rng.integers(0, m + 1))
            exps.append(Mo.holder_exponents(m, a1) + Mo.holder_exponents(m, a2))
        assert Mo.holder_check(seqs, exps).holds


def test_holder_errors():
    ones = np.ones(10)
    with pytest.raises(ContractError):
        Mo.holder_check([[ones] * 4], [(2, 3, 2, 2)])
    with pytest.raises(ContractError):
        Mo.holder_check([[ones] * 3], [(2, 2, 2)])
    with pytest.raises(AlignmentError):
        Mo.holder_check([[ones, ones, ones, np.ones(5)]], [(2, 2, 2, 2)])


# ---------------------------------------------------------------------------
# indicators


def test_indicator_examples():
    z = np.array([-1 - 1j, 1 - 1j, -1 + 1j, -0.5 - 0.1j])
    est = Mo.indicator_prob([z], [NEGATIVE_QUADRANT])
    assert est.frequency == 0.5 and est.count == 4
    assert Mo.indicator_prob([z], [FULL_PLANE]).frequency == 1.0
    joint, prod = Mo.indicator_factorization([z, z.conj()], [NEGATIVE_QUADRANT, NEGATIVE_QUADRANT])
    assert joint == 0.0 and prod == 0.125
    with pytest.raises(AlignmentError):
        Mo.indicator_prob([z], [])


def test_indicator_against_rect_prob():
    z = sample_disorder([0.5, 0.3], 10**6, 4)
    rect = Rectangle(-0.2, 0.5, -math.inf, 0.1)
    est = Mo.indicator_prob([z[:, 0]], [rect])
    assert abs(est.frequency - rect_prob(DisorderParams(0.5), rect)) <= 3 * est.std_error
    joint, prod = Mo.indicator_factorization([z[:, 0], z[:, 1]], [rect, NEGATIVE_QUADRANT])
    assert abs(joint - prod) < 0.003


# ---------------------------------------------------------------------------
# prime sums at desk scale


def _prime_sums(table, N, lam, n, k, M=4096, seed=0):
    spec = D.PrimeSumSpec(N, lam, k, n)
    u = D.random_dyadic_grid(M, seed)
    return u, D.prime_sum_grid(spec, make_phase_context(N, lam), table, u)


def test_prime_sum_second_moment_at_desk_scale(table):
    u, vals = _prime_sums(table, 400, 1.0, 1, 1)
    spec = MomentSpec((1.0,), (1,), (1,))
    fin = Mo.finite_n_diagonal_target(spec, 400, table)
    est = Mo.empirical_joint_moment([vals], spec, mode="random", finite_N_target=fin)
    assert abs(est.z_re) <= 3
    # unbalanced moment vanishes
    est = Mo.empirical_joint_moment([vals], MomentSpec((1.0,), (1,), (0,)), mode="random", finite_N_target=0.0)
    assert abs(est.value) <= 3 * est.std_error


def test_prime_sum_two_scale_decorrelation(table):
    _, a = _prime_sums(table, 400, 1.0, 1, 2, seed=1)
    _, b = _prime_sums(table, 400, 0.7, 1, 2, seed=1)
    est = Mo.empirical_joint_moment([a, b], MomentSpec((1.0, 0.7), (1, 0), (0, 1)), mode="random")
    assert abs(est.value) <= 3 * est.std_error + 0.01


@pytest.mark.xfail(strict=True, raises=CapacityError, reason="cutoff e^50 needs a sieve beyond the memory cap")
def test_prime_sum_example_at_N2000():
    spec = D.PrimeSumSpec(2000, 1.0, 1, 1)
    sieve_upto(math.ceil(spec.cutoff))
