"""Zeta on the critical line and the continuous determination of its logarithm.

``hardy_Z`` uses the Riemann-Siegel main sum with the C0..C4 corrections above
``RS_MIN_HEIGHT`` and an Euler-Maclaurin sum below it.  The imaginary part of
log zeta comes from counting zeros once (:func:`zero_count_scan`) and reusing
the count for every sample:  Im log zeta(1/2+it) = pi*N(t) - theta(t) - pi.
"""

from __future__ import annotations

import functools
import io
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np
from scipy.special import bernoulli, loggamma

from .errors import CapacityError, ContractError, DomainError, SingularityError

HEIGHT_CAP = 1e9
SCAN_CAP = 1e6
RS_MIN_HEIGHT = 100.0
SCAN_START = 10.0  # zeta has no zeros on the critical line with 0 < t < 14
NEAR_ZERO = 1e-3
AT_ZERO = 1e-6

_THETA_SERIES = (1 / 48, 7 / 5760, 31 / 80640, 127 / 430080, 511 / 1216512)


def rs_theta(t):
    """Riemann-Siegel theta function; accepts scalars or arrays."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0):
        raise DomainError("theta is evaluated only for t > 0")
    out = np.empty_like(t_arr)
    hi = t_arr >= 10.0
    if np.any(hi):
        th = t_arr[hi]
        inv = 1.0 / th
        inv2 = inv * inv
        tail = np.zeros_like(th)
        for c in reversed(_THETA_SERIES):
            tail = tail * inv2 + c
        out[hi] = 0.5 * th * np.log(th / (2 * math.pi)) - 0.5 * th - math.pi / 8 + tail * inv
    lo = ~hi
    if np.any(lo):
        tl = t_arr[lo]
        out[lo] = loggamma(0.25 + 0.5j * tl).imag - 0.5 * tl * math.log(math.pi)
    return out if out.ndim else float(out)


@functools.lru_cache(maxsize=1)
def _rs_coefficients():
    """Polynomials in x = p - 1/2 for the corrections C0..C4.

    Taylor coefficients of Psi(p) = cos(2pi(p^2-p-1/16))/cos(2pi p) come from a
    Cauchy integral on |x| = 1 (Psi is entire).
    """
    mp = mpmath.MPContext()
    mp.dps = 40
    nodes, degree = 256, 64

    def psi(x):
        return -mp.cos(2 * mp.pi * (x * x - mp.mpf(5) / 16)) / mp.cos(2 * mp.pi * x)

    roots = [mp.expj(2 * mp.pi * j / nodes) for j in range(nodes)]
    values = [psi(z) for z in roots]
    coeffs = []
    for n in range(degree):
        acc = mp.fsum(v * z ** (-n) for v, z in zip(values, roots))
        coeffs.append(float(mp.re(acc) / nodes))
    P = np.polynomial.Polynomial(coeffs)
    d = [P] + [P.deriv(k) for k in range(1, 13)]
    pi2, pi4, pi6, pi8 = (math.pi**e for e in (2, 4, 6, 8))
    return (
        d[0],
        -d[3] / (96 * pi2),
        d[2] / (64 * pi2) + d[6] / (18432 * pi4),
        -d[1] / (64 * pi2) - d[5] / (3840 * pi4) - d[9] / (5308416 * pi6),
        d[0] / (128 * pi2) + 19 * d[4] / (24576 * pi4) + 11 * d[8] / (5898240 * pi6)
        + d[12] / (2038431744 * pi8),
    )


def _rs_Z(t):
    tau = np.sqrt(t / (2 * math.pi))
    m = np.floor(tau).astype(np.int64)
    x = tau - m - 0.5
    theta = rs_theta(t)
    out = np.empty_like(t)
    # rows per block keep the (rows, terms) matrix near 2M entries
    mmax = int(m.max())
    rows = max(1, 2_000_000 // mmax)
    n = np.arange(1, mmax + 1, dtype=np.float64)
    logn, rsqrt = np.log(n), 1.0 / np.sqrt(n)
    for lo in range(0, t.size, rows):
        sl = slice(lo, lo + rows)
        tb, mb = t[sl], m[sl]
        width = int(mb.max())
        arg = theta[sl, None] - tb[:, None] * logn[None, :width]
        terms = np.cos(arg) * rsqrt[None, :width]
        terms[np.arange(width)[None, :] >= mb[:, None]] = 0.0
        out[sl] = 2.0 * terms.sum(axis=1)
    a = np.sqrt(2 * math.pi / t)
    corr = np.zeros_like(t)
    for c in reversed(_rs_coefficients()):
        corr = corr * a + c(x)
    sign = np.where(m % 2 == 1, 1.0, -1.0)
    return out + sign * np.sqrt(a) * corr


def _em_zeta_half(t, terms=40, order=12):
    """zeta(1/2 + it) by Euler-Maclaurin in complex double (low heights)."""
    s = 0.5 + 1j * t
    n = np.arange(1, terms, dtype=np.float64)
    total = np.exp(-s[:, None] * np.log(n)[None, :]).sum(axis=1)
    M = float(terms)
    Ms = np.exp(-s * math.log(M))
    total += M * Ms / (s - 1) + 0.5 * Ms
    B = bernoulli(2 * order)
    rising = s.copy()
    power = Ms / M
    for k in range(1, order + 1):
        total += B[2 * k] / math.factorial(2 * k) * rising * power
        rising = rising * (s + 2 * k - 1) * (s + 2 * k)
        power = power / (M * M)
    return total


def hardy_Z(t, cap=HEIGHT_CAP):
    """Hardy's Z function, real on the real line; scalar or array input."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t_arr < SCAN_START):
        raise DomainError(f"hardy_Z is evaluated for t >= {SCAN_START}")
    if np.any(t_arr > cap):
        raise CapacityError(f"height {t_arr.max():.6g} exceeds the cap {cap:.3g}", cap=cap)
    out = np.empty_like(t_arr)
    low = t_arr < RS_MIN_HEIGHT
    if np.any(low):
        tl = t_arr[low]
        out[low] = (np.exp(1j * rs_theta(tl)) * _em_zeta_half(tl)).real
    if np.any(~low):
        out[~low] = _rs_Z(t_arr[~low])
    return out if np.ndim(t) else float(out[0])


def zeta_half(t):
    """zeta(1/2 + it) = exp(-i theta(t)) Z(t)."""
    return np.exp(-1j * np.asarray(rs_theta(t))) * hardy_Z(t)


def mean_zero_spacing(t):
    return 2 * math.pi / math.log(max(t, 2 * math.pi * math.e) / (2 * math.pi))


# ---------------------------------------------------------------------------
# zero counting


@dataclass(frozen=True, eq=False)
class ZeroScan:
    """Located zeros of Z on (0, t_max] and the step function N(t)."""

    t_max: float
    grid_density: float
    zeros: np.ndarray
    warnings: tuple = ()
    stats: dict = field(default_factory=dict)

    def count(self, t):
        """N(t): number of located zeros <= t (vectorized)."""
        return np.searchsorted(self.zeros, t, side="right")

    __call__ = count

    def nearest_gap(self, t):
        """Distance from each t to the closest located zero."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if self.zeros.size == 0:
            return np.full_like(t, np.inf)
        i = np.searchsorted(self.zeros, t)
        left = self.zeros[np.clip(i - 1, 0, self.zeros.size - 1)]
        right = self.zeros[np.clip(i, 0, self.zeros.size - 1)]
        return np.minimum(np.abs(t - left), np.abs(right - t))

    def s_values(self, t):
        """S(t) = N(t) - theta(t)/pi - 1."""
        t = np.asarray(t, dtype=np.float64)
        return self.count(t) - rs_theta(t) / math.pi - 1.0

    # -- cache file (see docs/formats.md) --------------------------------
    def to_bytes(self):
        buf = io.BytesIO()
        buf.write(b"ZSCN1")
        buf.write(struct.pack("<BddQ", 1, self.t_max, self.grid_density, self.zeros.size))
        buf.write(self.zeros.astype("<f8").tobytes())
        blob = json.dumps(list(self.warnings)).encode()
        buf.write(struct.pack("<I", len(blob)))
        buf.write(blob)
        return buf.getvalue()

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data):
        if data[:5] != b"ZSCN1":
            raise ValueError("not a zero-scan cache (bad magic)")
        version, t_max, density, count = struct.unpack_from("<BddQ", data, 5)
        if version != 1:
            raise ValueError(f"unsupported zero-scan version {version}")
        pos = 5 + struct.calcsize("<BddQ")
        zeros = np.frombuffer(data, dtype="<f8", count=count, offset=pos).copy()
        pos += 8 * count
        (n,) = struct.unpack_from("<I", data, pos)
        warnings = tuple(json.loads(data[pos + 4 : pos + 4 + n].decode()))
        return cls(t_max, density, zeros, warnings)

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


def _scan_grid(t_lo, t_hi, density):
    pts = []
    t = t_lo
    # piecewise-constant step, re-derived every 1000 points
    while t < t_hi:
        h = mean_zero_spacing(t) / density
        block = t + h * np.arange(1000)
        block = block[block < t_hi]
        pts.append(block)
        t = block[-1] + h
    pts.append(np.array([t_hi]))
    return np.concatenate(pts)


def _refine(lo, hi, zlo, zhi, tol=1e-9, max_iter=60):
    """Vectorized Illinois regula falsi on sign-change brackets."""
    lo, hi, zlo, zhi = (np.array(a, dtype=np.float64) for a in (lo, hi, zlo, zhi))
    side = np.zeros(lo.size, dtype=np.int8)
    for _ in range(max_iter):
        active = (hi - lo) > tol
        if not np.any(active):
            break
        mid = np.where(active, (lo * zhi - hi * zlo) / (zhi - zlo), lo)
        # keep the trial point strictly inside; bisect when it is not
        bad = ~((mid > lo) & (mid < hi))
        mid[bad] = 0.5 * (lo[bad] + hi[bad])
        idx = np.flatnonzero(active)
        zm = hardy_Z(mid[idx])
        same_lo = np.sign(zm) == np.sign(zlo[idx])
        i_lo, i_hi = idx[same_lo], idx[~same_lo]
        lo[i_lo], zlo[i_lo] = mid[i_lo], zm[same_lo]
        hi[i_hi], zhi[i_hi] = mid[i_hi], zm[~same_lo]
        # Illinois: halve the stale endpoint when the same side moves twice
        zhi[i_lo[side[i_lo] == 1]] *= 0.5
        zlo[i_hi[side[i_hi] == -1]] *= 0.5
        side[i_lo], side[i_hi] = 1, -1
        tiny = zm == 0.0
        lo[idx[tiny]] = hi[idx[tiny]] = mid[idx[tiny]]
    return 0.5 * (lo + hi)


def _sign_change_brackets(t, z):
    s = np.signbit(z)
    k = np.flatnonzero(s[1:] != s[:-1])
    return t[k], t[k + 1], z[k], z[k + 1]


def _extra_brackets(t, z, sub=64):
    """Look inside same-sign valleys of |Z| for a missed pair of zeros."""
    a = np.abs(z)
    s = np.signbit(z)
    mid = np.flatnonzero(
        (a[1:-1] < a[:-2]) & (a[1:-1] < a[2:]) & (s[1:-1] == s[:-2]) & (s[1:-1] == s[2:])
    ) + 1
    out = [np.empty(0)] * 4
    if mid.size == 0:
        return out, 0
    lo, hi = t[mid - 1], t[mid + 1]
    fine = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, sub)[None, :]
    fz = hardy_Z(fine.ravel()).reshape(fine.shape)
    br = [_sign_change_brackets(fine[i], fz[i]) for i in range(mid.size)]
    if br:
        out = [np.concatenate([b[j] for b in br]) for j in range(4)]
    return out, int(mid.size)


def _scan_interval(t_lo, t_hi, density, chunk=200_000):
    brackets = [[], [], [], []]
    valleys = 0
    t = _scan_grid(t_lo, t_hi, density)
    for start in range(0, t.size, chunk):
        tb = t[max(0, start - 2) : start + chunk]  # overlap so no gap is skipped
        zb = hardy_Z(tb)
        b0 = _sign_change_brackets(tb, zb)
        b1, nv = _extra_brackets(tb, zb)
        valleys += nv
        for j in range(4):
            brackets[j].append(b0[j])
            brackets[j].append(b1[j])
    lo, hi, zlo, zhi = (np.concatenate(b) for b in brackets)
    order = np.argsort(lo, kind="stable")
    lo, hi, zlo, zhi = lo[order], hi[order], zlo[order], zhi[order]
    # overlapping chunks can report the same bracket twice
    keep = np.ones(lo.size, dtype=bool)
    keep[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    zeros = _refine(lo[keep], hi[keep], zlo[keep], zhi[keep])
    return np.sort(zeros), valleys, int(t.size)


def zero_count_scan(t_max, grid_density=8.0, window=200, drift_limit=1.0):
    """Locate the zeros of Z on (0, t_max] by sign changes plus refinement.

    Windows of ``window`` consecutive zeros whose mean S(t) drifts by
    ``drift_limit`` or more are rescanned at four times the density; if the
    drift persists an integrity warning is recorded.
    """
    if t_max > SCAN_CAP:
        raise CapacityError(f"scan height {t_max:.6g} exceeds the cap {SCAN_CAP:.3g}", cap=SCAN_CAP)
    if grid_density < 4:
        raise ContractError("grid_density must be at least 4 points per mean zero spacing")
    if t_max <= SCAN_START:
        return ZeroScan(float(t_max), float(grid_density), np.zeros(0))
    zeros, valleys, points = _scan_interval(SCAN_START, t_max, grid_density)
    warnings = []
    rescanned = 0
    for _ in range(2):
        bad = _drifting_windows(zeros, window, drift_limit)
        if not bad:
            break
        for lo, hi in bad:
            inner, v, p = _scan_interval(lo, hi, 4 * grid_density)
            zeros = np.sort(np.concatenate([zeros[(zeros < lo) | (zeros > hi)], inner]))
            valleys += v
            points += p
            rescanned += 1
    for lo, hi in _drifting_windows(zeros, window, drift_limit):
        warnings.append(f"zero count drifts from theta/pi + 1 on [{lo:.6f}, {hi:.6f}]")
    stats = {"grid_points": points, "valleys_checked": valleys, "windows_rescanned": rescanned}
    return ZeroScan(float(t_max), float(grid_density), zeros, tuple(warnings), stats)


def _drifting_windows(zeros, window, limit):
    if zeros.size < window:
        return []
    # midpoints between zeros: N is exact there, S has no jump ambiguity
    mids = 0.5 * (zeros[1:] + zeros[:-1])
    s = np.arange(1, zeros.size) - rs_theta(mids) / math.pi - 1.0
    bad = []
    for start in range(0, s.size, window):
        block = s[start : start + window]
        if abs(block.mean()) >= limit:
            bad.append((float(zeros[start]), float(zeros[min(start + window, zeros.size - 1)])))
    return bad


# ---------------------------------------------------------------------------
# log zeta


@dataclass(frozen=True)
class CriticalLinePoint:
    t: float
    Z: float
    theta: float
    zeta: complex
    log_zeta: complex
    s_count_basis: int
    near_zero: bool


def log_zeta_many(t, scan=None):
    """Vectorized continuous log zeta(1/2+it).

    Returns ``(values, near_zero, at_zero)``; entries within ``AT_ZERO`` of a
    located zero are NaN.  With ``scan=None`` only the real part is produced
    (imaginary part NaN).
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    Z = hardy_Z(t)
    with np.errstate(divide="ignore"):
        re = np.log(np.abs(Z))
    if scan is None:
        im = np.full_like(t, np.nan)
        near = np.zeros(t.size, dtype=bool)
        at = Z == 0.0
    else:
        if np.any(t > scan.t_max):
            raise DomainError(f"t beyond the scanned range {scan.t_max}")
        im = math.pi * scan.count(t) - rs_theta(t) - math.pi
        gap = scan.nearest_gap(t)
        near = gap < NEAR_ZERO
        at = gap < AT_ZERO
    out = np.empty(t.size, dtype=np.complex128)
    out.real, out.imag = re, im
    out[at] = complex(np.nan, np.nan)
    return out, near, at


def log_zeta_det(t, scan):
    """Continuous determination of log zeta(1/2 + it) at one height."""
    return critical_line_point(t, scan).log_zeta


def critical_line_point(t, scan):
    values, near, at = log_zeta_many([t], scan)
    if at[0]:
        raise SingularityError(f"t={t} lies on a located zero; log zeta is undefined there")
    z = hardy_Z(t)
    theta = rs_theta(t)
    count = int(scan.count(t)) if scan is not None else -1
    return CriticalLinePoint(
        float(t), z, theta, complex(np.exp(-1j * theta) * z), complex(values[0]), count, bool(near[0])
    )


def sample_L(N, lam, u, scan=None):
    """One sample log zeta(1/2 + i u e^{N^lam}) / sqrt(log N)."""
    return log_zeta_det(u * math.exp(N**lam), scan) / math.sqrt(math.log(N))


def sample_L_grid(N, lam, u_grid, scan=None):
    """Samples on a u-grid; points on a zero are replaced by the next grid point.

    Returns ``(samples, resampled_count)``.
    """
    u = np.asarray(u_grid, dtype=np.float64)
    t = u * math.exp(N**lam)
    vals, _, at = log_zeta_many(t, scan)
    if np.all(at):
        raise SingularityError("every grid point lies on a zero")
    idx = np.flatnonzero(at)
    good = np.flatnonzero(~at)
    for i in idx:
        # next usable grid point to the right, else the closest one to the left
        pos = np.searchsorted(good, i)
        vals[i] = vals[good[pos] if pos < good.size else good[-1]]
    return vals / math.sqrt(math.log(N)), int(idx.size)
