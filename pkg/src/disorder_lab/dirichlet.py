"""Truncated prime sums and the residual between log zeta and a prime sum.

The sum for one scale is

    P(u) = (1/sqrt(log N)) * sum_{p <= cutoff} exp(-i u e^{N^lam} log p) / sqrt(p)

with ``cutoff = exp(N^lam / (40 k n))``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import zeta as zeta_mod
from .errors import ContractError, IntegrityError, OrderingError, OutOfRangeError
from .phases import dyadic_denominator, frequency_decomposition, grid_phases, reduce_phase
from .seeding import substream

PRIME_CHUNK = 512
FLAGGED_LIMIT = 0.01


@dataclass(frozen=True)
class PrimeSumSpec:
    N: float
    lam: float
    k: int
    n: int

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise ContractError("k and n must be positive integers")

    @property
    def log_cutoff(self):
        return self.N**self.lam / (40 * self.k * self.n)

    @property
    def cutoff(self):
        return math.exp(self.log_cutoff)

    @property
    def normalization(self):
        return 1.0 / math.sqrt(math.log(self.N))


def _check(spec, ctx, table):
    if not (math.isnan(ctx.N) or (ctx.N == float(spec.N) and ctx.lam == float(spec.lam))):
        raise ContractError(f"phase context is for (N, lam)=({ctx.N}, {ctx.lam}), spec has ({spec.N}, {spec.lam})")
    if spec.cutoff > table.bound:
        raise OutOfRangeError(f"cutoff {spec.cutoff:.6g} exceeds prime table bound {table.bound}")
    return table.count_upto(spec.cutoff) if spec.cutoff >= 2 else 0


def prime_sum_from_phases(phases, primes, normalization):
    """``normalization * sum exp(-i phase) / sqrt(p)``; ``phases`` is (primes, points)."""
    w = 1.0 / np.sqrt(np.asarray(primes, dtype=np.float64))
    return normalization * (w @ np.exp(-1j * np.asarray(phases)))


def prime_sum_P(spec, ctx, table, u):
    """P(lam, n; k, N, u) at a single u, with per-prime multiprecision reduction."""
    if not 1.0 <= u <= 2.0:
        raise OutOfRangeError("u must lie in [1, 2]")
    count = _check(spec, ctx, table)
    if count == 0:
        return 0j
    logs = table.logs_at(ctx.precision_bits, count)
    phases = np.array([reduce_phase(ctx, u, lp) for lp in logs])
    return complex(prime_sum_from_phases(phases[:, None], table.primes[:count], spec.normalization)[0])


def _chunk_sum(args):
    ctx, logs, primes, numerators, denom, u, norm = args
    if denom is None:
        phases = np.array([[reduce_phase(ctx, x, lp) for x in u] for lp in logs])
    else:
        dec = [frequency_decomposition(ctx, lp, denom) for lp in logs]
        phases = grid_phases([d[0] for d in dec], [d[1] for d in dec], numerators, denom)
    return prime_sum_from_phases(phases, primes, norm)


def prime_sum_grid(spec, ctx, table, u_grid, threads=1):
    """P on a strictly increasing grid in [1, 2].

    Dyadic grids take the fast route: one multiprecision decomposition per
    prime, then exact integer/float phase arithmetic for every grid point.
    Primes are split into fixed chunks whose partial sums are added in chunk
    order, so the result does not depend on ``threads``.
    """
    u = np.asarray(u_grid, dtype=np.float64)
    if u.ndim != 1 or u.size == 0:
        raise ContractError("u_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(u) <= 0):
        raise OrderingError("u_grid must be strictly increasing")
    if u[0] < 1.0 or u[-1] > 2.0:
        raise OutOfRangeError("u_grid must lie in [1, 2]")
    count = _check(spec, ctx, table)
    if count == 0:
        return np.zeros(u.size, dtype=np.complex128)
    denom = dyadic_denominator(u)
    numerators = None if denom is None else (u * denom).astype(np.int64)
    logs = table.logs_at(ctx.precision_bits, count)
    primes = table.primes[:count]
    jobs = [
        (ctx, logs[lo : lo + PRIME_CHUNK], primes[lo : lo + PRIME_CHUNK], numerators, denom, u,
         spec.normalization)
        for lo in range(0, count, PRIME_CHUNK)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_chunk_sum, jobs))
    else:
        parts = [_chunk_sum(j) for j in jobs]
    total = np.zeros(u.size, dtype=np.complex128)
    for part in parts:
        total += part
    return total


def midpoint_grid(M):
    """Midpoints of M equal cells on [1, 2]; dyadic whenever M is a power of two."""
    return 1.0 + (np.arange(M) + 0.5) / M


def random_dyadic_grid(M, seed, bits=30):
    """Sorted distinct uniform draws on [1, 2] rounded to multiples of 2**-bits."""
    rng = substream(seed, "dirichlet.random-grid")
    a = np.unique(rng.integers(0, 1 << bits, size=M, endpoint=True))
    return 1.0 + a / float(1 << bits)


def write_samples_csv(path, u_grid, samples_by_scale, labels=None):
    """Per-sample dump: u, then Re and Im of each scale."""
    labels = labels or [f"P{j + 1}" for j in range(len(samples_by_scale))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u"] + [f"{pre} {lab}" for lab in labels for pre in ("Re", "Im")])
        for i, u in enumerate(u_grid):
            row = [repr(float(u))]
            for s in samples_by_scale:
                row += [repr(float(s[i].real)), repr(float(s[i].imag))]
            w.writerow(row)


# ---------------------------------------------------------------------------
# residual between log zeta and a prime sum


@dataclass(frozen=True)
class ResidualEstimate:
    value: float
    std_error: float
    samples: int
    flagged: int


def prime_sum_at_heights(t, table, x):
    """sum_{p <= x} p^{-it} / sqrt(p) for each height t (double precision phases)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    count = table.count_upto(x) if x >= 2 else 0
    out = np.zeros(t.size, dtype=np.complex128)
    logp = np.log(table.primes[:count].astype(np.float64))
    w = 1.0 / np.sqrt(table.primes[:count].astype(np.float64))
    for lo in range(0, count, PRIME_CHUNK):
        sl = slice(lo, lo + PRIME_CHUNK)
        out += np.exp(-1j * np.outer(t, logp[sl])) @ w[sl]
    return out


def residual_moment(T, x, n, samples, seed, table, scan=None, log_zeta=None):
    """Monte Carlo mean over t in [T, 2T] of |log zeta - prime sum up to x|^(2n).

    ``log_zeta`` may replace the zeta evaluation (any vectorized callable of
    t); by default the continuous determination from ``zeta`` is used, with
    ``scan`` supplying the zero count.  Samples on a zero are excluded and
    counted; more than 1% of them aborts the run.
    """
    if n < 1:
        raise ContractError("n must be >= 1")
    if x > table.bound:
        raise OutOfRangeError(f"cutoff {x} exceeds prime table bound {table.bound}")
    rng = substream(seed, "dirichlet.residual")
    t = np.sort(rng.uniform(T, 2 * T, size=samples))
    if log_zeta is None:
        if scan is None:
            scan = zeta_mod.zero_count_scan(2 * T)
        lz, _, at = zeta_mod.log_zeta_many(t, scan)
    else:
        lz = np.asarray(log_zeta(t), dtype=np.complex128)
        at = ~np.isfinite(lz)
    flagged = int(np.count_nonzero(at))
    if flagged > FLAGGED_LIMIT * samples:
        raise IntegrityError(f"{flagged} of {samples} samples flagged at zeros (limit 1%)")
    keep = ~at
    r = np.abs(lz[keep] - prime_sum_at_heights(t[keep], table, x)) ** (2 * n)
    return ResidualEstimate(
        float(r.mean()), float(r.std(ddof=1) / math.sqrt(r.size)), int(r.size), flagged
    )
