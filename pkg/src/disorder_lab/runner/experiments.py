"""Named experiments: each turns a validated RunConfig into checked records."""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import polygamma

from .. import __version__
from .. import dirichlet, disorder, moments, primes, rmt, zeta
from ..errors import ConfigError
from ..phases import make_phase_context
from ..seeding import BIT_GENERATOR, substream
from .config import Param
from .report import (
    ExperimentReport, abs_record, info_record, lt_record, max_record, range_record, rel_record, z_record,
)

MERTENS_CONSTANT = 0.26149721284764278


@dataclass(frozen=True)
class Experiment:
    name: str
    schema: dict
    run: object
    doc: str


REGISTRY = {}


def experiment(name, doc, **schema):
    def register(fn):
        REGISTRY[name] = Experiment(name, schema, fn, doc)
        return fn

    return register


def lookup(name):
    if name not in REGISTRY:
        raise ConfigError(f"unknown experiment {name!r}; choose from: {', '.join(sorted(REGISTRY))}")
    return REGISTRY[name]


class Outcome:
    """Mutable accumulator handed to each experiment body."""

    def __init__(self):
        self.records = []
        self.metadata = {}
        self.warnings = []

    def add(self, record):
        self.records.append(record)


def run_experiment(config):
    """Execute ``config.experiment`` and return its ExperimentReport."""
    exp = lookup(config.experiment)
    out = Outcome()
    out.metadata.update({"rng": BIT_GENERATOR, "seed": config.seed, "threads": config.threads})
    start = time.perf_counter()
    exp.run(config, out)
    elapsed = time.perf_counter() - start
    return ExperimentReport(config.experiment, config.echo(), out.records, elapsed, out.metadata, out.warnings,
                            __version__)


# ---------------------------------------------------------------------------
# shared in-process resources


@functools.lru_cache(maxsize=4)
def prime_table(bound, cap=primes.DEFAULT_CAP):
    return primes.sieve_upto(bound, cap=cap)


@functools.lru_cache(maxsize=4)
def cue_ensemble(N, count, seed, burn_in, thinning):
    return rmt.sample_cue(N, count, seed, burn_in=None if burn_in < 0 else burn_in,
                          thinning=None if thinning < 0 else thinning)


@functools.lru_cache(maxsize=4)
def _scan(t_max, density):
    return zeta.zero_count_scan(t_max, density)


def zero_scan(t_max, density, cache_path=""):
    """Zero scan up to ``t_max``, optionally read from / written to a cache file."""
    if cache_path and Path(cache_path).exists():
        scan = zeta.ZeroScan.load(cache_path)
        if scan.t_max >= t_max and scan.grid_density == density:
            return scan
    scan = _scan(float(t_max), float(density))
    if cache_path:
        scan.save(cache_path)
    return scan


def u_grid(kind, M, seed):
    if kind == "midpoint":
        return dirichlet.midpoint_grid(M)
    if kind == "random":
        return dirichlet.random_dyadic_grid(M, seed)
    raise ConfigError("grid must be 'midpoint' or 'random'")


@functools.lru_cache(maxsize=16)
def _prime_sum_samples(N, lam, k, n, grid_kind, M, seed, guard, bound, cap, threads):
    spec = dirichlet.PrimeSumSpec(N, lam, k, n)
    ctx = make_phase_context(N, lam, guard_bits=guard)
    table = prime_table(bound, cap)
    u = u_grid(grid_kind, M, seed)
    values = dirichlet.prime_sum_grid(spec, ctx, table, u, threads=threads)
    info = {
        "cutoff": spec.cutoff, "primes": table.count_upto(spec.cutoff) if spec.cutoff >= 2 else 0,
        "precision_bits": ctx.precision_bits,
    }
    return u, values, info


def sieve_bound(config):
    """One table serves every scale: the largest cutoff is at max(lambdas), n = 1."""
    p = config.parameters
    spec = dirichlet.PrimeSumSpec(float(p["N"]), max(p["lambdas"]), len(p["lambdas"]), 1)
    return max(2, math.ceil(spec.cutoff))


def prime_sum_samples(config, lam, n, k):
    p = config.parameters
    return _prime_sum_samples(float(p["N"]), float(lam), int(k), int(n), p["grid"], int(p["M"]), config.seed,
                              config.phase_guard_bits, sieve_bound(config), int(p["sieve_cap"]), config.threads)


def finite_height_variance(T):
    """(log log(T/2pi) + gamma + 1) / 2: the unitary-matrix variance at matching mean density.

    Reported next to the leading-order target (log log T)/2 to show the size of
    the O(1) correction at desk heights.
    """
    return 0.5 * (math.log(math.log(T / (2 * math.pi))) + np.euler_gamma + 1.0)


def _variance_with_se(x):
    x = np.asarray(x, dtype=np.float64)
    c = x - x.mean()
    var = float(c @ c / (x.size - 1))
    m4 = float(np.mean(c**4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / x.size)


# ---------------------------------------------------------------------------
# experiments


@experiment(
    "gauss-oracle", "complex Gaussian mixed moments and the moment generating function",
    count=Param("int", 1_000_000), sigma2=Param("float", 0.5), alpha=Param("float", 0.5), beta=Param("float", 0.5),
)
def gauss_oracle(config, out):
    p = config.parameters
    s2 = p["sigma2"]
    z = disorder.sample_disorder([2 * s2], p["count"], config.seed)[:, 0]
    a2 = np.abs(z) ** 2
    out.add(abs_record("E[Z conj Z]", a2.mean(), disorder.gaussian_mixed_moment(1, 1, s2), 0.01,
                       a2.std(ddof=1) / math.sqrt(z.size)))
    z2 = z * z
    out.add(abs_record("|E[Z^2]|", abs(z2.mean()), disorder.gaussian_mixed_moment(2, 0, s2), 0.01,
                       math.sqrt((z2.real.var(ddof=1) + z2.imag.var(ddof=1)) / z.size)))
    a4 = a2 * a2
    out.add(abs_record("E[Z^2 conj Z^2]", a4.mean(), disorder.gaussian_mixed_moment(2, 2, s2), 0.05,
                       a4.std(ddof=1) / math.sqrt(z.size)))
    mgf = disorder.mgf_check(p["alpha"], p["beta"], s2, p["count"], config.seed)
    out.add(z_record("mgf Re", mgf.empirical.real, mgf.std_error, mgf.exact.real))
    out.metadata["sampler"] = disorder.SAMPLER


@experiment(
    "diagonal", "exact diagonal-set sums against closed forms and the Mertens-type asymptotic",
    cutoff=Param("float", 10_000.0), n=Param("int", 2),
)
def diagonal(config, out):
    p = config.parameters
    table = prime_table(max(3, math.ceil(p["cutoff"])))
    out.add(abs_record("exact cutoff=3 n=1", moments.diagonal_exact(table, 3, 1).exact, 5 / 6, 1e-12))
    out.add(abs_record("exact cutoff=3 n=2", moments.diagonal_exact(table, 3, 2).exact, 37 / 36, 1e-12))
    res = moments.diagonal_exact(table, p["cutoff"], p["n"])
    count = table.count_upto(p["cutoff"])
    recip = table.reciprocals[:count]
    s1 = math.fsum(recip)
    if p["n"] == 2:
        s2 = math.fsum(recip * recip)
        out.add(abs_record("exact vs 2 S1^2 - S2", res.exact, 2 * s1 * s1 - s2, 1e-10))
    out.add(range_record("exact / asymptotic", res.ratio, 0.95, 1.0))
    out.add(info_record("exact", res.exact))
    out.add(info_record("asymptotic n! S1^n", res.asymptotic))


def _moment_records(config, out):
    """Per-scale, cross-scale and off-diagonal prime-sum moments."""
    p = config.parameters
    lams = tuple(p["lambdas"])
    k = len(lams)
    N = float(p["N"])
    cache = {}

    def samples(j, e):
        if (j, e) not in cache:
            u, values, info = prime_sum_samples(config, lams[j], e, k)
            cache[j, e] = values
            out.metadata[f"scale{j + 1}.n{e}"] = info
        return cache[j, e]

    mode = "grid" if p["grid"] == "midpoint" else "random"
    for j, lam in enumerate(lams):
        spec = disorder.MomentSpec((lam,), (1,), (1,))
        s = samples(j, 1)
        table = prime_table(sieve_bound(config), int(p["sieve_cap"]))
        fin = moments.finite_n_diagonal_target(spec, N, table, k=k)
        est = moments.empirical_joint_moment([s], spec, mode, fin)
        out.add(z_record(f"(1,1) moment lam={lam:g}", est.value.real, est.std_error_re, fin))
        out.add(info_record(f"(1,1) limit target lam={lam:g}", est.target))
        for m, n in ((1, 0), (2, 0), (2, 1)):
            spec = disorder.MomentSpec((lam,), (m,), (n,))
            est = moments.empirical_joint_moment([samples(j, m)], spec, mode, 0.0,
                                                 conj_samples=[samples(j, max(n, 1))])
            out.add(z_record(f"|({m},{n}) moment| lam={lam:g}", abs(est.value), est.std_error, 0.0))
    for a in range(k):
        for b in range(a + 1, k):
            m = [0] * k
            n = [0] * k
            m[a], n[b] = 1, 1
            spec = disorder.MomentSpec(lams, m, n)
            est = moments.empirical_joint_moment(
                [samples(j, 1) for j in range(k)], spec, mode, 0.0, conj_samples=[samples(j, 1) for j in range(k)]
            )
            out.add(z_record(f"|E[P{a + 1} conj P{b + 1}]|", abs(est.value), est.std_error, 0.0))


PRIME_SUM_SCHEMA = dict(
    N=Param("float", 2000.0), lambdas=Param("floats", (1.0, 0.6)), M=Param("int", 4096),
    grid=Param("str", "midpoint"), sieve_cap=Param("int", primes.DEFAULT_CAP), dump=Param("str", "-"),
)


@experiment("prime-sum-clt", "joint moments of truncated prime sums at several scales", **PRIME_SUM_SCHEMA)
def prime_sum_clt(config, out):
    _moment_records(config, out)
    p = config.parameters
    if p["dump"] != "-":
        lams = p["lambdas"]
        rows = [prime_sum_samples(config, lam, 1, len(lams)) for lam in lams]
        dirichlet.write_samples_csv(p["dump"], rows[0][0], [r[1] for r in rows],
                                    [f"lam={lam:g}" for lam in lams])


@experiment(
    "zeta-clt", "variance and independence of Re and Im log zeta on the critical line",
    T_re=Param("float", 1e6), T_im=Param("float", 1e5), samples=Param("int", 4000),
    scan_density=Param("float", 8.0), scan_cache=Param("str", "-"),
)
def zeta_clt(config, out):
    p = config.parameters
    n = p["samples"]
    T = p["T_re"]
    t = substream(config.seed, "zeta-clt.re").uniform(T, 2 * T, n)
    vals, _, at = zeta.log_zeta_many(t)
    re = vals.real[np.isfinite(vals.real)]
    var, se = _variance_with_se(re)
    out.add(rel_record(f"Var Re log zeta T={T:g}", var, 0.5 * math.log(math.log(T)), 0.25, se))
    out.add(info_record(f"finite-height prediction T={T:g}", finite_height_variance(T)))

    T = p["T_im"]
    scan = zero_scan(2 * T, p["scan_density"], "" if p["scan_cache"] == "-" else p["scan_cache"])
    out.warnings.extend(scan.warnings)
    t = substream(config.seed, "zeta-clt.im").uniform(T, 2 * T, n)
    vals, near, at = zeta.log_zeta_many(t, scan)
    keep = ~at
    v = vals[keep]
    var, se = _variance_with_se(v.imag)
    out.add(rel_record(f"Var Im log zeta T={T:g}", var, 0.5 * math.log(math.log(T)), 0.30, se))
    out.add(info_record(f"finite-height prediction T={T:g}", finite_height_variance(T)))
    out.add(info_record(f"Var Re log zeta T={T:g}", *_variance_with_se(v.real)))
    corr = float(np.corrcoef(v.real, v.imag)[0, 1])
    out.add(z_record("corr(Re, Im)", corr, (1 - corr * corr) / math.sqrt(v.size - 1), 0.0))
    s = v.imag / math.pi
    out.add(z_record("mean S(t)", s.mean(), s.std(ddof=1) / math.sqrt(s.size), 0.0))
    out.metadata.update({
        "scan": {"t_max": scan.t_max, "grid_density": scan.grid_density, "zeros": int(scan.zeros.size),
                 **scan.stats},
        "near_zero": int(near.sum()), "at_zero": int(at.sum()),
    })


@experiment(
    "residual", "mean of |log zeta - prime sum|^(2n) over [T, 2T] for increasing cutoffs",
    T=Param("float", 1e5), n=Param("int", 1), cutoffs=Param("floats", (100.0, 1000.0, 10000.0)),
    samples=Param("int", 4000), scan_density=Param("float", 8.0), scan_cache=Param("str", "-"),
)
def residual(config, out):
    p = config.parameters
    xs = tuple(sorted(p["cutoffs"]))
    table = prime_table(max(2, math.ceil(xs[-1])))
    scan = zero_scan(2 * p["T"], p["scan_density"], "" if p["scan_cache"] == "-" else p["scan_cache"])
    out.warnings.extend(scan.warnings)
    values = []
    for x in xs:
        est = dirichlet.residual_moment(p["T"], x, p["n"], p["samples"], config.seed, table, scan=scan)
        values.append(est.value)
        out.add(info_record(f"residual x={x:g}", est.value, est.std_error))
        out.metadata[f"flagged x={x:g}"] = est.flagged
    if len(values) > 1:
        out.add(lt_record("largest step across cutoffs (strictly decreasing)", max(np.diff(values)), 0.0))


@experiment(
    "indicator", "rectangle frequencies and their factorization across scales",
    source=Param("str", "disorder"), lam=Param("float", 0.5), count=Param("int", 100_000),
    **PRIME_SUM_SCHEMA,
)
def indicator(config, out):
    p = config.parameters
    quad = disorder.NEGATIVE_QUADRANT
    if p["source"] == "disorder":
        z = disorder.sample_disorder([p["lam"]], p["count"], config.seed)[:, 0]
        est = moments.indicator_prob([z], [quad])
        target = disorder.rect_prob(disorder.DisorderParams(p["lam"]), quad)
        se = math.sqrt(target * (1 - target) / est.count)
        out.add(z_record("quadrant frequency", est.frequency, se, target))
        lams = tuple(p["lambdas"])
        zs = disorder.sample_disorder(lams, p["count"], config.seed)
        scales = [zs[:, j] for j in range(len(lams))]
        out.metadata["sampler"] = disorder.SAMPLER
    elif p["source"] == "prime-sum":
        lams = tuple(p["lambdas"])
        scales = []
        for lam in lams:
            _, values, info = prime_sum_samples(config, lam, 1, len(lams))
            scales.append(values)
            out.metadata[f"lam={lam:g}"] = info
    else:
        raise ConfigError("source must be 'disorder' or 'prime-sum'")
    rects = [quad] * len(scales)
    joint, prod = moments.indicator_factorization(scales, rects)
    out.add(abs_record("joint - product of marginals", joint - prod, 0.0, 0.03))
    out.add(info_record("joint quadrant frequency", joint))


CUE_SCHEMA = dict(
    N=Param("int", 256), count=Param("int", 8000), burn_in=Param("int", -1), thinning=Param("int", -1),
)
HALF_PI = math.pi / 2
VARIANCE_INTERVALS = ((0.0, HALF_PI), (-1.0, 0.5), (-3.0, 0.0))
SHARED_PAIRS = (((0.0, HALF_PI), (0.0, math.pi)), ((-1.0, 0.5), (-1.0, 2.0)), ((-2.0, 0.0), (-1.0, 0.0)))
DISJOINT_PAIRS = (((-2.5, -1.5), (0.5, 1.5)), ((-3.0, -2.5), (1.0, 1.5)), ((-HALF_PI, 0.0), (math.pi / 4, HALF_PI)))


def _cue(config):
    p = config.parameters
    ens = cue_ensemble(p["N"], p["count"], config.seed, p["burn_in"], p["thinning"])
    return ens


@experiment("wieand", "counting-statistic variances and covariances for CUE eigenangles", **CUE_SCHEMA)
def wieand(config, out):
    ens = _cue(config)
    N = ens.N
    for s, t in VARIANCE_INTERVALS:
        c = rmt.interval_counts(ens, s, t).astype(np.float64)
        var, se = _variance_with_se(c)
        out.add(rel_record(f"Var C({s:.4g},{t:.4g}]", var, rmt.dpp_count_variance(N, s, t), 0.05, se))
    for rec in rmt.wieand_covariance(ens, SHARED_PAIRS):
        out.add(abs_record(f"corr {rec.first} {rec.second}", rec.correlation, rec.prediction, 0.1))
    for rec in rmt.wieand_covariance(ens, DISJOINT_PAIRS):
        out.add(abs_record(f"corr {rec.first} {rec.second}", rec.correlation, rec.prediction, 0.05))
    for rec in rmt.wieand_covariance(ens, [((0.0, HALF_PI), (HALF_PI, 0.0))]):
        out.add(abs_record("corr reversed interval", rec.correlation, rec.prediction, 1e-12))
    worst = max(rmt.identity_residual(ens, s, t) for s, t in VARIANCE_INTERVALS + ((-math.pi + 1e-3, math.pi),))
    out.add(max_record("identity residual", worst, 1e-8))
    out.metadata["cue"] = ens.metadata()


@experiment(
    "hko", "normalized log characteristic polynomial of CUE matrices", theta=Param("float", 0.0),
    separations=Param("floats", (0.5, 1.0, 2.0, math.pi)), **CUE_SCHEMA,
)
def hko(config, out):
    p = config.parameters
    ens = _cue(config)
    N = ens.N
    th = p["theta"]
    ratio = rmt.hko_variance_ratio(ens, th)
    lz = np.asarray(rmt.log_char_poly(ens, th))
    _, se = _variance_with_se(lz.real / math.sqrt(0.5 * math.log(N)))
    out.add(range_record("Var Re log Z / (log N / 2)", ratio, 0.8, 1.2, se))
    # exact finite-N value: (1/2) sum_k min(k, N) / k^2
    exact = 0.5 * (float(np.sum(1.0 / np.arange(1, N + 1))) + N * float(polygamma(1, N + 1)))
    out.add(info_record("finite-N expectation of the ratio", exact / (0.5 * math.log(N))))
    out.add(info_record("Var Im log Z / (log N / 2)", *_variance_with_se(lz.imag / math.sqrt(0.5 * math.log(N)))))
    for d in p["separations"]:
        other = rmt.wrap(th + d)
        lz2 = np.asarray(rmt.log_char_poly(ens, float(other)))
        corr = float(np.corrcoef(lz.real, lz2.real)[0, 1])
        out.add(lt_record(f"|corr Re log Z| separation {d:.4g}", abs(corr), 0.1))
    out.metadata["cue"] = ens.metadata()


@experiment("offdiag", "|log(m/n)| > 1/(2 min(m, n)) over all pairs up to max_int", max_int=Param("int", 10_000))
def offdiag(config, out):
    res = moments.offdiag_bound_check(config.parameters["max_int"])
    out.add(abs_record("inequality holds for every pair", float(res.holds), 1.0, 0.0))
    out.add(info_record("smallest slack", res.slack))
    out.add(info_record(f"tightness at ({res.worst_m},{res.worst_n})", res.tightness))


@experiment(
    "holder", "generalized Hölder bound on random conjugate exponents",
    instances=Param("int", 100), k=Param("int", 2), M=Param("int", 1024),
)
def holder(config, out):
    p = config.parameters
    rng = substream(config.seed, "holder")
    k, M = p["k"], p["M"]
    held = 0
    margin = math.inf
    for _ in range(p["instances"]):
        # factors f = w^{1/(2k e)} * noise: equality holds when the noise vanishes,
        # so small noise levels probe the bound close to its sharp case
        w = np.exp(rng.normal(0.0, 1.0, M))
        noise = rng.uniform(0.0, 0.5)
        seqs, exps = [], []
        for _ in range(k):
            r, t = 1.0 + 9.0 * rng.random(2)
            e = (r, r / (r - 1), t, t / (t - 1))
            exps.append(e)
            seqs.append([w ** (1 / (2 * k * x)) * np.exp(noise * rng.normal(0.0, 1.0, M)) for x in e])
        res = moments.holder_check(seqs, exps)
        held += res.holds
        margin = min(margin, res.rhs / res.lhs)
    out.add(abs_record("instances with lhs <= rhs", held, p["instances"], 0.0))
    out.add(info_record("smallest rhs / lhs", margin))
    ones = [[np.ones(M)] * 4 for _ in range(k)]
    eq = moments.holder_check(ones, [(2.0, 2.0, 3.0, 1.5)] * k)
    out.add(abs_record("constant case lhs - rhs", eq.lhs - eq.rhs, 0.0, 1e-12))


@experiment("mertens", "sum of 1/p up to x against log log x + M", x=Param("float", 1e6))
def mertens(config, out):
    x = config.parameters["x"]
    if x < 3:
        raise ConfigError("x must be >= 3 so that log log x is defined and positive")
    table = prime_table(math.ceil(x))
    est = primes.mertens_sum(table, x)
    out.add(abs_record(f"sum 1/p, p <= {x:g}", est, math.log(math.log(x)) + MERTENS_CONSTANT, 1 / math.log(x) ** 2))
