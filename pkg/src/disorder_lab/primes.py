"""Prime tables and reciprocal sums over primes.

The table is built by a segmented sieve of Eratosthenes and keeps, next to the
primes themselves, 1/p in double precision and (lazily) log p as
multiprecision binary floats.
"""

from __future__ import annotations

import io
import math
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from .errors import CapacityError, OutOfRangeError

DEFAULT_CAP = 10**9
DEFAULT_LOG_BITS = 256
SEGMENT = 1 << 22

MAGIC = b"PTBL1"
FORMAT_VERSION = 1


def _small_sieve(limit):
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags).astype(np.int64)


def _segmented(bound, segment=SEGMENT):
    base = _small_sieve(math.isqrt(bound))
    out = [base]
    low = int(base[-1]) + 1 if base.size else 2
    while low <= bound:
        high = min(low + segment, bound + 1)
        flags = np.ones(high - low, dtype=bool)
        for p in base:
            p = int(p)
            if p * p >= high:
                break
            start = max(p * p, -(-low // p) * p)
            flags[start - low :: p] = False
        out.append(np.flatnonzero(flags).astype(np.int64) + low)
        low = high
    return np.concatenate(out)


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Immutable table of every prime up to ``bound``.

    ``logs`` are computed on first access at ``log_bits`` of precision;
    :meth:`logs_at` gives them at any other precision (cached per precision).
    """

    bound: int
    primes: np.ndarray
    reciprocals: np.ndarray
    log_bits: int = DEFAULT_LOG_BITS
    _log_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __len__(self):
        return int(self.primes.size)

    @property
    def logs(self):
        return self.logs_at(self.log_bits)

    def logs_at(self, bits, count=None):
        """log p for the first ``count`` primes at ``bits`` of precision."""
        count = len(self) if count is None else int(count)
        with self._lock:
            cached = self._log_cache.get(bits, [])
            if len(cached) < count:
                ctx = mpmath.MPContext()
                ctx.prec = bits
                cached = cached + [ctx.log(int(p)) for p in self.primes[len(cached) : count]]
                self._log_cache[bits] = cached
        return cached[:count]

    def count_upto(self, x):
        """Number of primes <= x."""
        if x > self.bound:
            raise OutOfRangeError(f"cutoff {x} exceeds table bound {self.bound}")
        return int(np.searchsorted(self.primes, math.floor(x), side="right"))

    # -- cache file -------------------------------------------------------
    def to_bytes(self):
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<BQQI", FORMAT_VERSION, self.bound, len(self), self.log_bits))
        buf.write(self.primes.astype("<i8").tobytes())
        for value in self.logs:
            sign, man, exp, _ = value._mpf_
            raw = int(man).to_bytes(max(1, (int(man).bit_length() + 7) // 8), "big")
            buf.write(struct.pack(">BI", sign, len(raw)))
            buf.write(raw)
            buf.write(struct.pack(">q", exp))
        return buf.getvalue()

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data):
        if data[:5] != MAGIC:
            raise ValueError("not a prime table cache (bad magic)")
        version, bound, count, bits = struct.unpack_from("<BQQI", data, 5)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported prime table version {version}")
        pos = 5 + struct.calcsize("<BQQI")
        primes = np.frombuffer(data, dtype="<i8", count=count, offset=pos).astype(np.int64)
        pos += 8 * count
        ctx = mpmath.MPContext()
        ctx.prec = bits
        logs = []
        for _ in range(count):
            sign, n = struct.unpack_from(">BI", data, pos)
            pos += 5
            man = int.from_bytes(data[pos : pos + n], "big")
            pos += n
            (exp,) = struct.unpack_from(">q", data, pos)
            pos += 8
            logs.append(ctx.make_mpf(mpmath.libmp.from_man_exp(-man if sign else man, exp)))
        table = cls(bound, primes, 1.0 / primes.astype(np.float64), bits)
        table._log_cache[bits] = logs
        return table

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


def sieve_upto(bound, cap=DEFAULT_CAP, log_bits=DEFAULT_LOG_BITS):
    """Build the table of all primes <= ``bound``."""
    bound = int(bound)
    if bound < 0:
        raise OutOfRangeError("bound must be non-negative")
    if bound > cap:
        raise CapacityError(f"sieve bound {bound} exceeds the memory cap {cap}", cap=cap)
    primes = _segmented(bound) if bound >= 2 else np.zeros(0, dtype=np.int64)
    return PrimeTable(bound, primes, 1.0 / primes.astype(np.float64), int(log_bits))


def mertens_sum(table, x):
    """Sum of 1/p over primes p <= x, accumulated in ascending order."""
    if x > table.bound:
        raise OutOfRangeError(f"cutoff {x} exceeds table bound {table.bound}")
    if x < 2:
        return 0.0
    return math.fsum(table.reciprocals[: table.count_upto(x)])
