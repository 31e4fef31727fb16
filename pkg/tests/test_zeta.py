import json
import math
from pathlib import Path

import numpy as np
import pytest

from disorder_lab import zeta as Z
from disorder_lab.errors import CapacityError, ContractError, DomainError, SingularityError
from disorder_lab.seeding import substream

from oracles import theta_mp, zeta_em

FIXTURES = json.loads((Path(__file__).parent / "fixtures" / "frozen.json").read_text())


@pytest.fixture(scope="module")
def scan_1e3():
    return Z.zero_count_scan(1000.0)


@pytest.fixture(scope="module")
def scan_1e5():
    return Z.zero_count_scan(1e5)


def test_theta_examples():
    # the asymptotic series and the log-gamma definition agree at t = 100
    assert Z.rs_theta(100.0) == pytest.approx(FIXTURES["theta_100"], abs=1e-9)
    assert Z.rs_theta(100.0) == pytest.approx(87.97216523, abs=1e-8)
    h = 1e-3
    d = (Z.rs_theta(1e4 + h) - Z.rs_theta(1e4 - h)) / (2 * h)
    assert d == pytest.approx(0.5 * math.log(1e4 / (2 * math.pi)), rel=1e-6)
    t = np.linspace(10, 1e4, 5000)
    assert np.all(np.diff(Z.rs_theta(t)) > 0)
    with pytest.raises(DomainError):
        Z.rs_theta(0.0)


def test_theta_branches_agree():
    for t in (5.0, 9.99, 10.0, 20.0, 500.0):
        assert Z.rs_theta(t) == pytest.approx(theta_mp(t), abs=1e-10)


def test_hardy_Z_first_sign_change():
    assert Z.hardy_Z(14.0) * Z.hardy_Z(14.2) < 0


@pytest.mark.parametrize("t", [14.0, 50.0, 123.456, 999.0])
def test_hardy_Z_against_euler_maclaurin(t):
    re, im = FIXTURES["zeta_em"][repr(t)]
    zeta = complex(re, im)
    assert abs(Z.hardy_Z(t)) == pytest.approx(abs(zeta), abs=1e-6)
    # Z is real: e^{i theta} zeta has no imaginary part
    assert abs((np.exp(1j * Z.rs_theta(t)) * zeta).imag) < 1e-6
    assert abs(Z.zeta_half(t) - zeta) < 1e-6


@pytest.mark.parametrize("t", ["100000.5", "1000000.25", "10000000.125", "100000000.5"])
def test_hardy_Z_high_heights(t):
    assert Z.hardy_Z(float(t)) == pytest.approx(FIXTURES["hardy_Z"][t], abs=1e-6)


def test_audit_set():
    t = np.random.default_rng(4).uniform(10, 1000, 100)
    ours = Z.zeta_half(t)
    for ti, zi in zip(t[::10], ours[::10]):
        assert abs(zi - zeta_em(ti)) < 1e-6
    assert np.allclose(np.abs(ours), np.abs(Z.hardy_Z(t)), rtol=0, atol=1e-14)


def test_hardy_Z_errors():
    with pytest.raises(CapacityError):
        Z.hardy_Z(2e9)
    with pytest.raises(DomainError):
        Z.hardy_Z(5.0)


def test_zero_counts(scan_1e3):
    assert scan_1e3.count(100.0) == 29
    assert scan_1e3.count(50.0) == 10
    assert scan_1e3.zeros[0] == pytest.approx(14.134725142, abs=1e-6)
    t = np.linspace(10, 1000, 2000)
    n = scan_1e3.count(t)
    assert np.all(np.diff(n) >= 0)
    assert n.dtype.kind == "i"
    assert not scan_1e3.warnings


def test_zero_locations_bracket_sign_changes(scan_1e3):
    z = scan_1e3.zeros
    assert np.all(Z.hardy_Z(z - 1e-5) * Z.hardy_Z(z + 1e-5) < 0)
    mids = 0.5 * (z[1:] + z[:-1])
    s = np.sign(Z.hardy_Z(mids))
    assert np.all(s[1:] == -s[:-1])


def test_S_stays_bounded(scan_1e5):
    mids = 0.5 * (scan_1e5.zeros[1:] + scan_1e5.zeros[:-1])
    s = scan_1e5.s_values(mids)
    assert np.all(np.abs(s) <= 3)
    grid = np.linspace(1e4, 1e5, 20_001)
    assert abs(scan_1e5.s_values(grid).mean()) < 0.05


def test_scan_contract():
    with pytest.raises(ContractError):
        Z.zero_count_scan(100.0, grid_density=3)
    with pytest.raises(CapacityError):
        Z.zero_count_scan(2e6)
    assert Z.zero_count_scan(5.0).zeros.size == 0


def test_drift_warning_when_zeros_are_missing(scan_1e3):
    zeros = np.delete(scan_1e3.zeros, np.arange(100, 300, 3))
    assert Z._drifting_windows(zeros, 100, 1.0)
    assert not Z._drifting_windows(scan_1e3.zeros, 100, 1.0)


def test_scan_cache_round_trip(tmp_path, scan_1e3):
    path = tmp_path / "scan.zscn"
    scan_1e3.save(path)
    assert path.read_bytes()[:5] == b"ZSCN1"
    back = Z.ZeroScan.load(path)
    assert np.array_equal(back.zeros, scan_1e3.zeros)
    assert back.t_max == scan_1e3.t_max and back.grid_density == scan_1e3.grid_density
    assert back.warnings == scan_1e3.warnings
    with pytest.raises(ValueError):
        Z.ZeroScan.from_bytes(b"NOPE!" + path.read_bytes()[5:])


def test_log_zeta_det(scan_1e3):
    for t in (21.5, 77.7, 432.1, 987.6):
        lz = Z.log_zeta_det(t, scan_1e3)
        assert lz.real == pytest.approx(math.log(abs(zeta_em(t))), abs=1e-5)
        assert lz.imag == pytest.approx(math.pi * (scan_1e3.count(t) - Z.rs_theta(t) / math.pi - 1), abs=1e-12)
    # the argument jumps by pi across a simple zero
    z0 = scan_1e3.zeros[40]
    jump = Z.log_zeta_det(z0 + 1e-4, scan_1e3).imag - Z.log_zeta_det(z0 - 1e-4, scan_1e3).imag
    assert jump == pytest.approx(math.pi, abs=1e-3)
    with pytest.raises(SingularityError):
        Z.log_zeta_det(float(z0), scan_1e3)
    with pytest.raises(DomainError):
        Z.log_zeta_det(2000.0, scan_1e3)


def test_critical_line_point(scan_1e3):
    p = Z.critical_line_point(123.456, scan_1e3)
    assert abs(abs(p.zeta) - abs(p.Z)) < 1e-15
    assert abs(p.zeta - np.exp(-1j * p.theta) * p.Z) < 1e-15
    assert p.s_count_basis == scan_1e3.count(123.456)
    near = Z.critical_line_point(float(scan_1e3.zeros[5]) + 5e-4, scan_1e3)
    assert near.near_zero


def test_sample_L_normalization(scan_1e3):
    N, lam, u = 6.0, 1.0, 1.5
    t = u * math.exp(N**lam)
    assert Z.sample_L(N, lam, u, scan_1e3) == Z.log_zeta_det(t, scan_1e3) / math.sqrt(math.log(N))


def test_sample_L_grid_resamples_zero_points(scan_1e3):
    z0 = float(scan_1e3.zeros[15])
    E = math.exp(4.0)
    u = np.array([z0 / E - 1e-3, z0 / E, z0 / E + 1e-3])
    assert 1 <= u[0] and u[-1] <= 2
    vals, moved = Z.sample_L_grid(4.0, 1.0, u, scan_1e3)
    assert moved == 1
    assert vals[1] == vals[2]


def _desk_samples(scan):
    N = math.log(1e4)  # e^{N} = 10^4 at lambda = 1
    u = 1.0 + (np.arange(2000) + 0.5) / 2000
    vals, _ = Z.sample_L_grid(N, 1.0, u, scan)
    return N, vals


def test_sample_L_re_im_uncorrelated(scan_1e5):
    _, vals = _desk_samples(scan_1e5)
    r = np.corrcoef(vals.real, vals.imag)[0, 1]
    assert abs(r) <= 3 / math.sqrt(vals.size)


@pytest.mark.xfail(strict=True, reason="O(1) variance correction at t ~ 1e4 exceeds the 30% band (see notes)")
def test_sample_L_variance_example(scan_1e5):
    N, vals = _desk_samples(scan_1e5)
    target = 0.5 * math.log(math.log(1e4)) / math.log(N)
    assert vals.real.var(ddof=1) == pytest.approx(target, rel=0.30)


def test_variance_matches_finite_height_prediction():
    """At T = 1e6 the sample variance follows (log log(T/2pi) + gamma + 1)/2."""
    from disorder_lab.runner.experiments import finite_height_variance

    t = substream(5, "test.zeta-var").uniform(1e6, 2e6, 4000)
    vals, _, at = Z.log_zeta_many(t)
    assert not at.any()
    assert vals.real.var(ddof=1) == pytest.approx(finite_height_variance(1e6), rel=0.1)
    assert np.all(np.isnan(vals.imag))


def test_log_zeta_many_flags(scan_1e3):
    z = scan_1e3.zeros[:3]
    t = np.concatenate([z, z + 5e-4, [200.5]])
    vals, near, at = Z.log_zeta_many(t, scan_1e3)
    assert at[:3].all() and np.isnan(vals[:3]).all()
    assert near[3:6].all() and not at[3:6].any()
    assert not near[-1]
