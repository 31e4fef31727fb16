"""Limit objects: complex Gaussian moments and finite-dimensional disorder samples.

A totally disordered process D_lam has mutually independent coordinates; each
D_lam is complex Gaussian with independent real and imaginary parts of
variance lam/2, so E|D_lam|^2 = lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .errors import ContractError
from .seeding import BIT_GENERATOR, substream

MAX_EXPONENT = 6
SAMPLE_CHUNK = 1 << 16
SAMPLER = f"{BIT_GENERATOR}/standard_normal(ziggurat)"


@dataclass(frozen=True)
class MomentSpec:
    """Exponents (m_j, n_j) for scales lam_1 > ... > lam_k > 0."""

    lambdas: tuple
    m: tuple
    n: tuple
    max_exponent: int = MAX_EXPONENT

    def __post_init__(self):
        lam, m, n = tuple(map(float, self.lambdas)), tuple(map(int, self.m)), tuple(map(int, self.n))
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        if not lam or len(m) != len(lam) or len(n) != len(lam):
            raise ContractError("lambdas, m and n must have the same positive length")
        if any(x <= 0 for x in lam):
            raise ContractError("scales must be positive")
        if any(a <= b for a, b in zip(lam, lam[1:])):
            raise ContractError("scales must be strictly decreasing")
        if any(e < 0 or e > self.max_exponent for e in m + n):
            raise ContractError(f"exponents must lie in [0, {self.max_exponent}]")

    @property
    def k(self):
        return len(self.lambdas)

    def swapped(self):
        """Spec with every (m_j, n_j) exchanged (conjugate integrand)."""
        return MomentSpec(self.lambdas, self.n, self.m, self.max_exponent)


@dataclass(frozen=True)
class DisorderParams:
    lam: float

    @property
    def component_variance(self):
        return self.lam / 2.0

    @property
    def complex_variance(self):
        return self.lam


@dataclass(frozen=True)
class Rectangle:
    re_lo: float = -math.inf
    re_hi: float = math.inf
    im_lo: float = -math.inf
    im_hi: float = math.inf

    def __post_init__(self):
        if self.re_lo > self.re_hi or self.im_lo > self.im_hi:
            raise ContractError("rectangle bounds must satisfy lo <= hi")

    def contains(self, z):
        z = np.asarray(z)
        return (
            (z.real >= self.re_lo) & (z.real <= self.re_hi) & (z.imag >= self.im_lo) & (z.imag <= self.im_hi)
        )

    def within(self, other):
        return (
            other.re_lo <= self.re_lo and self.re_hi <= other.re_hi
            and other.im_lo <= self.im_lo and self.im_hi <= other.im_hi
        )


FULL_PLANE = Rectangle()
NEGATIVE_QUADRANT = Rectangle(re_hi=0.0, im_hi=0.0)


def gaussian_mixed_moment(m, n, sigma2):
    """E[Z^m conj(Z)^n] for Z = X + iY, X and Y iid N(0, sigma2)."""
    if m < 0 or n < 0:
        raise ContractError("exponents must be non-negative")
    if m != n:
        return 0.0
    return float(math.factorial(n) * 2**n) * sigma2**n


def target_tensor(spec):
    """prod_j n_j! lam_j^{n_j} delta(m_j, n_j)."""
    if any(a != b for a, b in zip(spec.m, spec.n)):
        return 0.0
    coeff = 1
    for nj in spec.n:
        coeff *= math.factorial(nj)
    return float(coeff) * math.prod(lam**nj for lam, nj in zip(spec.lambdas, spec.n))


def sample_disorder(lambdas, count, seed):
    """``count`` draws of (D_lam1, ..., D_lamk) as a (count, k) complex array."""
    lam = np.asarray(lambdas, dtype=np.float64)
    if np.any(lam <= 0):
        raise ContractError("scales must be positive")
    if count < 1:
        raise ContractError("count must be >= 1")
    scale = np.sqrt(lam / 2.0)
    out = np.empty((count, lam.size), dtype=np.complex128)
    for c, lo in enumerate(range(0, count, SAMPLE_CHUNK)):
        rows = min(SAMPLE_CHUNK, count - lo)
        g = substream(seed, "disorder.sample", c).standard_normal((rows, lam.size, 2))
        out[lo : lo + rows] = (g[..., 0] + 1j * g[..., 1]) * scale
    return out


def rect_prob(params, rect):
    """P{G_lam in rect}: product of two normal interval probabilities."""
    sd = math.sqrt(params.component_variance)

    def interval(lo, hi):
        return float(ndtr(hi / sd) - ndtr(lo / sd))

    return interval(rect.re_lo, rect.re_hi) * interval(rect.im_lo, rect.im_hi)


class MgfCheck(NamedTuple):
    empirical: complex
    std_error: float
    exact: complex


def mgf_check(alpha, beta, sigma2, count, seed):
    """Monte Carlo E[exp(alpha Z + beta conj Z)] against exp(2 alpha beta sigma2)."""
    if abs(alpha) > 1 or abs(beta) > 1:
        raise ContractError("|alpha| and |beta| must not exceed 1")
    z = sample_disorder([2.0 * sigma2], count, seed)[:, 0]
    f = np.exp(alpha * z + beta * np.conj(z))
    se = math.sqrt((np.var(f.real, ddof=1) + np.var(f.imag, ddof=1)) / count)
    return MgfCheck(complex(f.mean()), se, complex(np.exp(2 * alpha * beta * sigma2)))
