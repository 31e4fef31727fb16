"""CUE eigenangles, log characteristic polynomials and counting statistics.

Haar-distributed eigenangles are drawn from their joint density
prod_{j<k} |e^{i theta_j} - e^{i theta_k}|^2 by single-angle Metropolis moves
(exact rejection sampling is available for N <= 3 as a cross-check).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import CalibrationError, ContractError, SingularityError
from .seeding import BIT_GENERATOR, substream

TWO_PI = 2.0 * math.pi
MAX_N = 1024
TARGET_ACCEPTANCE = (0.3, 0.5)


@dataclass(frozen=True)
class EigenangleSample:
    N: int
    angles: np.ndarray
    sampler: str
    seed: int
    burn_in_sweeps: int
    thinning: int


@dataclass(frozen=True, eq=False)
class CueEnsemble:
    """``count`` eigenangle configurations stacked as a (count, N) array."""

    angles: np.ndarray
    sampler: str
    seed: int
    burn_in_sweeps: int = 0
    thinning: int = 0
    step: float = math.nan
    acceptance: float = math.nan
    extra: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.angles.shape[1]

    def __len__(self):
        return self.angles.shape[0]

    def __getitem__(self, i):
        return EigenangleSample(self.N, self.angles[i], self.sampler, self.seed, self.burn_in_sweeps,
                                self.thinning)

    def metadata(self):
        return {
            "sampler": self.sampler, "rng": BIT_GENERATOR, "seed": self.seed, "N": self.N,
            "count": len(self), "burn_in_sweeps": self.burn_in_sweeps, "thinning": self.thinning,
            "step": self.step, "acceptance": self.acceptance,
        }


def wrap(theta):
    """Map angles into (-pi, pi]."""
    out = np.mod(np.asarray(theta) + math.pi, TWO_PI) - math.pi
    return np.where(out == -math.pi, math.pi, out)


@numba.njit(cache=True, fastmath=True)
def _pair_log_ratio(xs, ys, j, xn, yn, lo, hi):
    xo, yo = xs[j], ys[j]
    acc = 0.0
    k = lo
    # products over fixed blocks of 16 vectorize; one log per block
    while k + 16 <= hi:
        num = 1.0
        den = 1.0
        for q in range(k, k + 16):
            num *= 1.0 - (xn * xs[q] + yn * ys[q])
            den *= 1.0 - (xo * xs[q] + yo * ys[q])
        acc += math.log(num / den)
        k += 16
    num = 1.0
    den = 1.0
    for q in range(k, hi):
        num *= 1.0 - (xn * xs[q] + yn * ys[q])
        den *= 1.0 - (xo * xs[q] + yo * ys[q])
    return acc + math.log(num / den)


@numba.njit(cache=True)
def _metropolis(theta, xs, ys, step, prop, accu, sweeps):
    """Run ``sweeps`` sweeps in place; returns accepted move count."""
    n = theta.size
    accepted = 0
    i = 0
    for _ in range(sweeps):
        for j in range(n):
            new = theta[j] + step * (2.0 * prop[i] - 1.0)
            if new > math.pi:
                new -= 2.0 * math.pi
            elif new <= -math.pi:
                new += 2.0 * math.pi
            xn, yn = math.cos(new), math.sin(new)
            dl = _pair_log_ratio(xs, ys, j, xn, yn, 0, j) + _pair_log_ratio(xs, ys, j, xn, yn, j + 1, n)
            if math.log(accu[i]) < dl:
                theta[j] = new
                xs[j] = xn
                ys[j] = yn
                accepted += 1
            i += 1
    return accepted


def _run(theta, step, rng, sweeps):
    xs, ys = np.cos(theta), np.sin(theta)
    draws = sweeps * theta.size
    acc = _metropolis(theta, xs, ys, step, rng.random(draws), 1.0 - rng.random(draws), sweeps)
    return acc / draws


def _metropolis_ensemble(N, count, seed, burn_in, thinning, step):
    rng = substream(seed, f"rmt.metropolis.N{N}")
    theta = wrap(np.linspace(-math.pi, math.pi, N, endpoint=False) + rng.uniform(-math.pi, math.pi)
                 + rng.uniform(-0.25, 0.25, N) * TWO_PI / N)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    step = TWO_PI / N if step is None else float(step)
    # burn-in in blocks, adapting the step towards the target acceptance band
    done = 0
    block = max(1, min(burn_in, 2 * N)) if burn_in else 0
    while done < burn_in:
        sweeps = min(block, burn_in - done)
        rate = _run(theta, step, rng, sweeps)
        done += sweeps
        if rate < TARGET_ACCEPTANCE[0]:
            step *= 0.8
        elif rate > TARGET_ACCEPTANCE[1]:
            step = min(step * 1.25, math.pi)
    out = np.empty((count, N))
    rates = []
    for i in range(count):
        rates.append(_run(theta, step, rng, thinning))
        out[i] = theta
    rate = float(np.mean(rates))
    if not 0.1 <= rate <= 0.9:
        raise CalibrationError(f"Metropolis acceptance {rate:.3f} outside [0.1, 0.9] after tuning")
    return CueEnsemble(out, "metropolis", int(seed), burn_in, thinning, step, rate)


def _rejection_ensemble(N, count, seed):
    if N > 3:
        raise ContractError("exact rejection sampling is offered for N <= 3 only")
    rng = substream(seed, f"rmt.rejection.N{N}")
    bound = float(N**N)  # maximum of the Vandermonde density (roots of unity)
    out = []
    have = 0
    while have < count:
        th = rng.uniform(-math.pi, math.pi, size=(2 * (count - have) * N + 16, N))
        z = np.exp(1j * th)
        dens = np.ones(th.shape[0])
        for a in range(N):
            for b in range(a + 1, N):
                dens *= np.abs(z[:, a] - z[:, b]) ** 2
        keep = th[rng.random(th.shape[0]) * bound < dens]
        out.append(keep)
        have += keep.shape[0]
    return CueEnsemble(wrap(np.concatenate(out)[:count]), "rejection", int(seed))


def sample_cue(N, count, seed, sampler="metropolis", burn_in=None, thinning=None, step=None):
    """Approximately Haar-distributed eigenangles of N x N unitary matrices.

    Metropolis defaults: 50 N burn-in sweeps, N sweeps between retained
    configurations (one chain, so the output does not depend on workers).
    """
    if not 1 <= N <= MAX_N:
        raise ContractError(f"N must lie in [1, {MAX_N}]")
    if count < 1:
        raise ContractError("count must be >= 1")
    if sampler == "rejection":
        return _rejection_ensemble(N, count, seed)
    if sampler != "metropolis":
        raise ContractError(f"unknown sampler {sampler!r}")
    if N == 1:
        # a single angle is exactly uniform under Haar measure
        rng = substream(seed, "rmt.metropolis.N1")
        return CueEnsemble(wrap(rng.uniform(-math.pi, math.pi, (count, 1))), "metropolis", int(seed))
    burn_in = 50 * N if burn_in is None else int(burn_in)
    thinning = N if thinning is None else int(thinning)
    return _metropolis_ensemble(N, count, seed, burn_in, thinning, step)


# ---------------------------------------------------------------------------
# characteristic polynomial and counts


def _angles(sample):
    if isinstance(sample, (EigenangleSample,)):
        return np.asarray(sample.angles)[None, :]
    if isinstance(sample, CueEnsemble):
        return sample.angles
    a = np.asarray(sample, dtype=np.float64)
    return a[None, :] if a.ndim == 1 else a


def log_char_poly(sample, theta):
    """log Z_U(theta) = sum_k log(1 - e^{i(theta_k - theta)}), principal branch per factor.

    ``sample`` may be one configuration or an ensemble; ``theta`` a scalar or
    1-d array.  The result has shape (configurations, thetas), squeezed.
    """
    a = _angles(sample)
    th = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    d = a[:, :, None] - th[None, None, :]
    dist = np.abs(np.mod(d + math.pi, TWO_PI) - math.pi)
    if np.any(dist < 1e-12):
        raise SingularityError("theta coincides with an eigenangle")
    out = np.log(1.0 - np.exp(1j * d)).sum(axis=1)
    return out[0, 0] if out.size == 1 else np.squeeze(out)


@dataclass(frozen=True)
class CountingStat:
    s: float
    t: float
    raw_count: int
    normalized: float


def normalize_count(raw, N, s, t):
    return (raw - (t - s) * N / TWO_PI) / (math.sqrt(math.log(N)) / math.pi)


def interval_counts(sample, s, t):
    """Number of angles in (s, t] for every configuration."""
    if not -math.pi <= s < t <= math.pi:
        raise ContractError("need -pi <= s < t <= pi")
    a = _angles(sample)
    return np.count_nonzero((a > s) & (a <= t), axis=1)


def counting_stat(sample, s, t):
    """C_U(s, t) and its normalized version for one configuration."""
    if not -math.pi < s < t <= math.pi and not (s == -math.pi and t == math.pi):
        raise ContractError("need -pi < s < t <= pi")
    a = _angles(sample)
    if a.shape[0] != 1:
        raise ContractError("counting_stat takes a single configuration")
    raw = int(interval_counts(a, s, t)[0])
    N = a.shape[1]
    norm = normalize_count(raw, N, s, t) if N > 1 else 0.0
    return CountingStat(float(s), float(t), raw, float(norm))


def normalized_counts(sample, s, t):
    """Normalized counts for every configuration; reversed intervals flip sign."""
    a = _angles(sample)
    N = a.shape[1]
    if s > t:
        return -normalized_counts(a, t, s)
    return normalize_count(interval_counts(a, s, t), N, s, t)


def sine_kernel(N, x):
    """K_N(x) = sin(N x / 2) / (2 pi sin(x / 2)), with K_N(0) = N / 2pi."""
    x = np.asarray(x, dtype=np.float64)
    den = 2 * math.pi * np.sin(x / 2)
    small = np.abs(den) < 1e-300
    return np.where(small, N / TWO_PI, np.sin(N * x / 2) / np.where(small, 1.0, den))


def dpp_count_variance(N, s, t, nodes_per_axis=None):
    """Var C_U(s, t) under CUE from the sine kernel.

    int_I K(x,x) dx - iint_{I^2} K(x-y)^2 dx dy, the double integral reduced to
    2 int_0^L (L - v) K(v)^2 dv and done by composite 8-point Gauss-Legendre
    with at least ``nodes_per_axis`` (default 32 N) nodes.
    """
    if not -math.pi <= s < t <= math.pi:
        raise ContractError("need -pi <= s < t <= pi")
    L = t - s
    nodes = max(8 * N, nodes_per_axis or 32 * N)
    panels = -(-nodes // 8)
    g, w = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, L, panels + 1)
    half = 0.5 * np.diff(edges)
    v = (edges[:-1, None] + half[:, None] * (g[None, :] + 1)).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    double = 2.0 * np.dot(wt, (L - v) * sine_kernel(N, v) ** 2)
    return N * L / TWO_PI - double


def wieand_prediction(i1, i2):
    """Limit covariance of C(s, t) and C(s', t') from the endpoint case table."""
    (s, t), (s2, t2) = i1, i2
    if s == s2 and t == t2:
        return 1.0
    if s == t2 and t == s2:
        return -1.0
    if (s == s2) != (t == t2):
        return 0.5
    if (s == t2) != (t == s2):
        return -0.5
    return 0.0


@dataclass(frozen=True)
class CovarianceRecord:
    first: tuple
    second: tuple
    covariance: float
    std_error: float
    correlation: float
    prediction: float


def _cov_with_se(x, y):
    xc, yc = x - x.mean(), y - y.mean()
    prod = xc * yc
    n = x.size
    cov = float(prod.sum() / (n - 1))
    se = float(prod.std(ddof=1) / math.sqrt(n))
    corr = cov / math.sqrt(float(xc @ xc / (n - 1)) * float(yc @ yc / (n - 1)))
    return cov, se, corr


def wieand_covariance(samples, pairs):
    """Empirical covariances of normalized counts, one record per interval pair.

    Intervals given as (s, t) with s > t use the convention C(t, s) = -C(s, t).
    """
    a = _angles(samples)
    records = []
    for i1, i2 in pairs:
        x = normalized_counts(a, *i1)
        y = normalized_counts(a, *i2)
        cov, se, corr = _cov_with_se(x, y)
        records.append(CovarianceRecord(tuple(i1), tuple(i2), cov, se, corr, wieand_prediction(i1, i2)))
    return records


def covariance_matrix(samples, intervals):
    """Covariance matrix of normalized counts over a list of intervals."""
    a = _angles(samples)
    data = np.stack([normalized_counts(a, *iv) for iv in intervals])
    return np.cov(data)


def hko_variance_ratio(samples, theta):
    """Sample variance of Re log Z_U(theta) / sqrt(log N / 2)."""
    a = _angles(samples)
    N = a.shape[1]
    re = np.real(log_char_poly(a, theta))
    return float(np.var(re / math.sqrt(0.5 * math.log(N)), ddof=1))


def identity_residual(samples, s, t):
    """Largest |normalized count - (Im log Z(t) - Im log Z(s)) / sqrt(log N)|."""
    a = _angles(samples)
    N = a.shape[1]
    lz = log_char_poly(a, [s, t]).reshape(a.shape[0], 2)
    delta = (lz[:, 1].imag - lz[:, 0].imag) / math.sqrt(math.log(N))
    return float(np.max(np.abs(normalized_counts(a, s, t) - delta)))
