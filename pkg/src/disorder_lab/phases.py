"""Reduction of huge phases ``u * exp(N**lam) * log p`` modulo 2*pi.

``exp(N**lam)`` quickly has thousands of bits, so the product must be formed in
multiprecision binary floats carrying ``bits(exp(N**lam)) + guard_bits`` bits
before the reduction.  Every :class:`PhaseContext` owns a private mpmath
context with fixed precision, so contexts can be shared between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import CapacityError, DomainError, PrecisionError

TWO_PI = 2.0 * math.pi
DEFAULT_GUARD_BITS = 64
DEFAULT_EXPONENT_CAP = 4000.0


@dataclass(frozen=True, eq=False)
class PhaseContext:
    N: float
    lam: float
    big_scale: mpmath.mpf
    precision_bits: int
    two_pi: mpmath.mpf
    mp: mpmath.MPContext

    @property
    def scale_bits(self):
        """Bit length of the integer part of ``big_scale``."""
        return max(1, int(self.mp.floor(self.big_scale)).bit_length())


def _private_context(bits):
    ctx = mpmath.MPContext()
    ctx.prec = bits
    return ctx


def make_phase_context(N, lam, guard_bits=DEFAULT_GUARD_BITS, exponent_cap=DEFAULT_EXPONENT_CAP):
    """Precompute ``exp(N**lam)`` and 2*pi at sufficient precision."""
    if not N > 1 or not lam > 0:
        raise DomainError(f"need N > 1 and lambda > 0, got N={N}, lambda={lam}")
    exponent = N**lam
    if exponent > exponent_cap:
        raise CapacityError(
            f"N**lambda = {exponent:.6g} exceeds the exponent cap {exponent_cap}", cap=exponent_cap
        )
    bits = int(math.ceil(exponent / math.log(2))) + 2 + int(guard_bits)
    mp = _private_context(bits)
    # exp amplifies the rounding of N**lam by N**lam itself, so work with extra
    # bits and round once into the context precision
    wide = _private_context(bits + max(1, math.ceil(exponent)).bit_length() + 16)
    big = mp.mpf(wide.exp(wide.power(wide.mpf(N), wide.mpf(lam))))
    return PhaseContext(float(N), float(lam), big, bits, 2 * mp.pi, mp)


def synthetic_context(big_scale, precision_bits):
    """Context with an arbitrary scale; used for constructed test inputs."""
    mp = _private_context(int(precision_bits))
    return PhaseContext(math.nan, math.nan, mp.mpf(big_scale), int(precision_bits), 2 * mp.pi, mp)


def _check_logp(ctx, logp, exact):
    if isinstance(logp, float):
        bc = 53
    else:
        logp = ctx.mp.mpf(logp)
        bc = logp._mpf_[3]
    if logp <= 0:
        raise DomainError("log p must be positive")
    # mantissa length is the precision witness; allow a few trailing zero bits
    if not exact and bc + 24 < ctx.precision_bits:
        raise PrecisionError(
            f"log p carries {bc} bits; phase context works at {ctx.precision_bits}"
        )
    return logp


def reduce_phase(ctx, u, logp, exact=False):
    """``(u * big_scale * logp) mod 2*pi`` as a float in [0, 2*pi).

    ``u`` must be a binary float (it is converted exactly).  Set ``exact``
    when ``logp`` is an exactly known short value rather than a rounded
    logarithm, which disables the mantissa-length precision check.
    """
    mp = ctx.mp
    logp = _check_logp(ctx, logp, exact)
    x = mp.mpf(u) * ctx.big_scale * logp
    r = x - ctx.two_pi * mp.floor(x / ctx.two_pi)
    if r < 0:
        r += ctx.two_pi
    elif r >= ctx.two_pi:
        r -= ctx.two_pi
    out = float(r)
    return 0.0 if out >= TWO_PI else out


def dyadic_denominator(u_grid, max_log2=31):
    """Smallest power of two D with every ``u * D`` an integer, else None."""
    u = np.asarray(u_grid, dtype=np.float64)
    for s in range(max_log2 + 1):
        scaled = u * float(1 << s)
        if np.all(scaled == np.floor(scaled)):
            return 1 << s
    return None


def frequency_decomposition(ctx, logp, denominator):
    """Split ``big_scale * logp / (2*pi)`` into ``(K mod D, frac)``.

    For ``u = a / D`` the reduced phase is then
    ``2*pi * frac(((a * Kmod) mod D) / D + a * frac / D)`` which is exact in
    the integer part and loses only double rounding in the second term.
    """
    mp = ctx.mp
    y = ctx.big_scale * mp.mpf(logp) / ctx.two_pi
    k = mp.floor(y)
    frac = float(y - k)
    if frac >= 1.0:
        frac, k = 0.0, k + 1
    return int(k) % denominator, frac


def grid_phases(kmods, fracs, numerators, denominator):
    """Phases for every (prime, grid point) pair from decompositions.

    Returns an array of shape ``(len(kmods), len(numerators))`` in [0, 2*pi).
    """
    a = np.asarray(numerators, dtype=np.int64)[None, :]
    km = np.asarray(kmods, dtype=np.int64)[:, None]
    fr = np.asarray(fracs, dtype=np.float64)[:, None]
    d = int(denominator)
    # keep a * Kmod below 2**63 by reducing a first
    int_part = ((a % d) * km) % d
    turns = int_part / d + (a * fr) / d
    turns -= np.floor(turns)
    return TWO_PI * turns

