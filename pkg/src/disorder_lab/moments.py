"""Joint mixed moments over u in [1, 2] and the diagonal-term bookkeeping.

The moment of a product of prime sums splits into diagonal terms (prime
tuples with equal products) and oscillating off-diagonal terms.  This module
estimates the moments from samples, enumerates the diagonal set exactly and
checks the two inequalities the off-diagonal and Hölder steps rely on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .disorder import MomentSpec, target_tensor
from .errors import AlignmentError, CapacityError, ContractError
from .primes import mertens_sum

JACKKNIFE_BLOCKS = 32
ENUMERATION_BUDGET = 10**8


@dataclass(frozen=True)
class JointMomentEstimate:
    spec: MomentSpec
    value: complex
    std_error: float
    std_error_re: float
    std_error_im: float
    M: int
    mode: str
    target: float
    finite_N_target: float

    @property
    def z_re(self):
        """Real-part z-score against the finite-N target."""
        if self.std_error_re == 0:
            return 0.0 if self.value.real == self.finite_N_target else math.inf
        return (self.value.real - self.finite_N_target) / self.std_error_re


def _as_scales(samples):
    arrays = [np.asarray(s, dtype=np.complex128) for s in samples]
    if not arrays:
        raise AlignmentError("need at least one scale")
    if any(a.shape != arrays[0].shape or a.ndim != 1 for a in arrays):
        raise AlignmentError("all scales must be 1-d sequences on the same u-grid")
    return arrays


def moment_integrand(samples, spec, conj_samples=None):
    """prod_j L_j^{m_j} conj(L'_j)^{n_j} pointwise.

    ``conj_samples`` supplies the sequences raised to the conjugate power (the
    prime sums use a cutoff that depends on the exponent); by default they
    are ``samples`` themselves.
    """
    scales = _as_scales(samples)
    conj = scales if conj_samples is None else _as_scales(conj_samples)
    if len(scales) != spec.k or len(conj) != spec.k:
        raise AlignmentError(f"spec has {spec.k} scales, got {len(scales)} sample sequences")
    if conj[0].shape != scales[0].shape:
        raise AlignmentError("conjugate samples are on a different grid")
    out = np.ones_like(scales[0])
    for z, w, m, n in zip(scales, conj, spec.m, spec.n):
        out = out * z**m * np.conj(w) ** n
    return out


def block_jackknife(values, blocks=JACKKNIFE_BLOCKS):
    """Mean and delete-one-block jackknife standard errors (re, im).

    Blocks are contiguous; trailing points that do not fill a block are
    dropped from the error estimate but kept in the mean.
    """
    v = np.asarray(values, dtype=np.complex128)
    mean = v.mean()
    size = v.size // blocks
    if size == 0:
        raise ContractError(f"need at least {blocks} points for {blocks} jackknife blocks")
    b = v[: size * blocks].reshape(blocks, size).mean(axis=1)
    total = b.sum()
    loo = (total - b) / (blocks - 1)
    var = (blocks - 1) / blocks * np.sum(np.abs(loo - loo.mean()) ** 2)
    var_re = (blocks - 1) / blocks * np.sum((loo.real - loo.real.mean()) ** 2)
    var_im = (blocks - 1) / blocks * np.sum((loo.imag - loo.imag.mean()) ** 2)
    return complex(mean), math.sqrt(var), math.sqrt(var_re), math.sqrt(var_im)


def empirical_joint_moment(samples, spec, mode="grid", finite_N_target=None, u_grids=None,
                           blocks=JACKKNIFE_BLOCKS, conj_samples=None):
    """Integral over u in [1, 2] of the mixed-moment integrand.

    ``grid`` mode treats the samples as a midpoint rule (mean) with a block
    jackknife error; ``random`` mode uses the plain standard error of the mean.
    """
    if u_grids is not None:
        first = np.asarray(u_grids[0])
        if any(not np.array_equal(first, np.asarray(g)) for g in u_grids[1:]):
            raise AlignmentError("scales were sampled on different u-grids")
    f = moment_integrand(samples, spec, conj_samples)
    if f.size < 2:
        raise ContractError("need at least two u-points")
    if mode == "grid":
        value, se, se_re, se_im = block_jackknife(f, blocks)
    elif mode == "random":
        value = complex(f.mean())
        se_re = float(f.real.std(ddof=1) / math.sqrt(f.size))
        se_im = float(f.imag.std(ddof=1) / math.sqrt(f.size))
        se = math.hypot(se_re, se_im)
    else:
        raise ContractError(f"unknown mode {mode!r}")
    target = target_tensor(spec)
    fin = target if finite_N_target is None else float(finite_N_target)
    return JointMomentEstimate(spec, value, se, se_re, se_im, int(f.size), mode, target, fin)


# ---------------------------------------------------------------------------
# diagonal terms


@dataclass(frozen=True)
class DiagonalResult:
    cutoff: float
    n: int
    exact: float
    asymptotic: float
    ratio: float


def _ordered_product_counts(primes, n):
    """Distinct products of ordered n-tuples and how many tuples give each."""
    prods = np.ones(1, dtype=np.int64)
    counts = np.ones(1, dtype=np.int64)
    for _ in range(n):
        p = np.multiply.outer(prods, primes).ravel()
        c = np.repeat(counts, primes.size)
        prods, inv = np.unique(p, return_inverse=True)
        counts = np.bincount(inv.ravel(), weights=c).astype(np.int64)
    return prods, counts


def diagonal_exact(table, cutoff, n, m=None, budget=ENUMERATION_BUDGET):
    """Exact sum over the diagonal set of 1/(q_1...q_n).

    The diagonal set pairs an ordered m-tuple p and an ordered n-tuple q of
    primes <= cutoff with equal products; grouping tuples by their product P
    with multiplicity c(P) gives sum_P c(P)^2 / P.  When ``m`` differs from
    ``n`` the set is empty and ``exact`` is 0.
    """
    if n < 1:
        raise ContractError("n must be >= 1")
    s1 = mertens_sum(table, cutoff)
    asym = math.factorial(n) * s1**n
    if m is not None and m != n:
        return DiagonalResult(float(cutoff), n, 0.0, asym, 0.0)
    count = table.count_upto(cutoff) if cutoff >= 2 else 0
    if count == 0:
        return DiagonalResult(float(cutoff), n, 0.0, 0.0, 0.0)
    if count**n > budget:
        raise CapacityError(
            f"{count}^{n} prime tuples exceed the enumeration budget {budget:g}; "
            "use a smaller cutoff or n", cap=budget,
        )
    primes = table.primes[:count]
    if float(primes[-1]) ** n >= 2.0**63:
        raise CapacityError("prime products overflow 64-bit integers; use a smaller cutoff or n")
    prods, counts = _ordered_product_counts(primes, n)
    exact = math.fsum((counts.astype(np.float64) ** 2) / prods.astype(np.float64))
    return DiagonalResult(float(cutoff), n, exact, asym, exact / asym)


@dataclass(frozen=True)
class DiagonalAsymptotic:
    leading: float
    finite: float


def diagonal_asymptotic(lam, N, n, k):
    """Leading term n!(lam log N)^n and finite-N value n!(lam log N - log(40kn))^n."""
    if n == 0:
        return DiagonalAsymptotic(1.0, 1.0)
    log_cutoff_log = lam * math.log(N) - math.log(40 * k * n)
    if math.exp(log_cutoff_log) < math.log(2):
        warnings.warn("prime cutoff below 2: the prime sum is empty", RuntimeWarning, stacklevel=2)
        return DiagonalAsymptotic(0.0, 0.0)
    f = math.factorial(n)
    return DiagonalAsymptotic(f * (lam * math.log(N)) ** n, f * log_cutoff_log**n)


def finite_n_diagonal_target(spec, N, table, k=None):
    """Diagonal prediction for a prime-sum moment at finite N.

    Per scale: 0 unless m_j = n_j, else the exact diagonal sum at the cutoff
    exp(N^lam_j / (40 k n_j)) divided by (log N)^{n_j}; the enumeration falls
    back to n_j! (sum 1/p)^{n_j} when it exceeds the budget.
    """
    k = spec.k if k is None else k
    total = 1.0
    for lam, m, n in zip(spec.lambdas, spec.m, spec.n):
        if m != n:
            return 0.0
        if n == 0:
            continue
        cutoff = math.exp(N**lam / (40 * k * n))
        try:
            d = diagonal_exact(table, cutoff, n).exact
        except CapacityError:
            d = math.factorial(n) * mertens_sum(table, cutoff) ** n
        total *= d / math.log(N) ** n
    return total


# ---------------------------------------------------------------------------
# inequalities used for the off-diagonal terms and the Hölder step


@dataclass(frozen=True)
class OffdiagCheck:
    holds: bool
    worst_m: int
    worst_n: int
    slack: float
    tightness: float


def offdiag_bound_check(max_int, rows=500):
    """Check |log(m/n)| > 1/(2 min(m, n)) for every 1 <= m != n <= max_int.

    Reports the pair with the smallest absolute slack and, for it, the ratio
    |log(m/n)| * 2 min(m, n) (tends to 2 for neighbouring integers).
    """
    if max_int > 10**5:
        raise CapacityError("exhaustive scan is limited to max_int <= 1e5", cap=10**5)
    ints = np.arange(1, max_int + 1, dtype=np.float64)
    logs = np.log(ints)
    holds = True
    best = (math.inf, 0, 0)
    for lo in range(0, max_int, rows):
        m = ints[lo : lo + rows, None]
        gap = np.abs(logs[None, :] - logs[lo : lo + rows, None])
        slack = gap - 0.5 / np.minimum(m, ints[None, :])
        slack[np.arange(slack.shape[0]), lo + np.arange(slack.shape[0])] = np.inf
        if np.any(slack <= 0):
            holds = False
        i, j = np.unravel_index(np.argmin(slack), slack.shape)
        if slack[i, j] < best[0]:
            best = (float(slack[i, j]), lo + i + 1, j + 1)
    s, wm, wn = best
    tight = abs(math.log(wm / wn)) * 2 * min(wm, wn) if wm else math.nan
    return OffdiagCheck(holds, int(wm), int(wn), s, tight)


@dataclass(frozen=True)
class HolderCheck:
    lhs: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs * (1 + 1e-12)


def _norm(f, q):
    a = np.abs(np.asarray(f, dtype=np.complex128))
    top = float(a.max())
    if math.isinf(q) or top == 0.0:
        return top
    # scaling by the maximum keeps a**q finite for large q
    return top * float(np.mean((a / top) ** q) ** (1.0 / q))


def holder_exponents(m, alpha):
    """Conjugate pair (m/(m-alpha), m/alpha); infinite entries when alpha is 0 or m."""
    r = math.inf if alpha == m else m / (m - alpha)
    s = math.inf if alpha == 0 else m / alpha
    return r, s


def holder_check(factor_sequences, exponent_partition):
    """Both sides of the generalized Hölder bound on a uniform u-grid.

    ``factor_sequences[j]`` holds the four sequences (A_j, B_j, C_j, D_j) and
    ``exponent_partition[j]`` the exponents (r_j, s_j, t_j, u_j) with
    1/r + 1/s = 1 and 1/t + 1/u = 1.  The norms are L^{2k x} norms on [1, 2].
    """
    k = len(factor_sequences)
    if len(exponent_partition) != k:
        raise ContractError("one exponent tuple per block is required")
    length = None
    lhs_integrand = None
    rhs = 1.0
    for seqs, exps in zip(factor_sequences, exponent_partition):
        if len(seqs) != 4 or len(exps) != 4:
            raise ContractError("each block needs four sequences and four exponents")
        r, s, t, u = (float(e) for e in exps)
        if min(r, s, t, u) <= 0:
            raise ContractError("exponents must be positive")
        if abs(1 / r + 1 / s - 1) > 1e-12 or abs(1 / t + 1 / u - 1) > 1e-12:
            raise ContractError("exponents are not conjugate: need 1/r + 1/s = 1 and 1/t + 1/u = 1")
        for f, e in zip(seqs, (r, s, t, u)):
            a = np.abs(np.asarray(f, dtype=np.complex128))
            if length is None:
                length, lhs_integrand = a.size, np.ones(a.size)
            elif a.size != length:
                raise AlignmentError("all sequences must share one grid")
            lhs_integrand = lhs_integrand * a
            rhs *= _norm(a, 2 * k * e)
    return HolderCheck(float(lhs_integrand.mean()), rhs)


# ---------------------------------------------------------------------------
# indicator probabilities


@dataclass(frozen=True)
class IndicatorEstimate:
    frequency: float
    std_error: float
    count: int


def indicator_prob(samples, rects):
    """Fraction of u-points where every scale lies in its rectangle."""
    scales = _as_scales(samples)
    if len(rects) != len(scales):
        raise AlignmentError("one rectangle per scale is required")
    hit = np.ones(scales[0].size, dtype=bool)
    for z, rect in zip(scales, rects):
        hit &= rect.contains(z)
    f = float(hit.mean())
    return IndicatorEstimate(f, math.sqrt(f * (1 - f) / hit.size), int(hit.size))


def indicator_factorization(samples, rects):
    """(joint frequency, product of marginal frequencies)."""
    joint = indicator_prob(samples, rects).frequency
    prod = math.prod(indicator_prob([z], [r]).frequency for z, r in zip(samples, rects))
    return joint, prod
