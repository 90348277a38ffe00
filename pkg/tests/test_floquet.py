import numpy as np
import pytest

from trapstab.commons import DomainError, as_column
from trapstab.dynamics import CslMathieuSystem, CslParams
from trapstab.floquet import Classification, Construction, Method, \
    MonodromyPolicy, StabilityVerdict, TransferMatrix, classify, \
    eigenvalues, empirical_boundedness, floquet_exponent, \
    multi_period_transfer, transfer_batch, transfer_matrix
from trapstab.integrator import IntegratorSettings
from trapstab.params import MathieuParams, dehmelt_index

from redata.commons.logger import log_stdout

ref_a = -0.000526947
ref_q = 0.0326158
omega = 1e8
period = 2 * np.pi / omega

forced = MonodromyPolicy(construction=Construction.PAPER_FORCED)

log = log_stdout()


def system(a, q, csl=None):
    return CslMathieuSystem(MathieuParams(a, q, omega), csl or CslParams())


def test_MonodromyPolicy():

    policy = MonodromyPolicy()
    assert policy.start_time(period) == period
    assert policy.velocity_scale(omega) == pytest.approx(1e-6 * omega)
    assert policy.construction is Construction.HOMOGENEOUS

    assert not forced.forced(system(ref_a, ref_q))
    assert forced.forced(system(ref_a, ref_q, CslParams.adler()))

    for kwargs in [dict(t_start=-1.0), dict(ic_scale_x=0.0),
                   dict(ic_scale_v=-1.0)]:
        with pytest.raises(DomainError):
            MonodromyPolicy(**kwargs)


def test_transfer_matrix_free_particle():

    M = transfer_matrix(system(0.0, 0.0))
    assert isinstance(M, TransferMatrix)
    assert M.m11 == pytest.approx(1.0, abs=1e-12)
    assert M.m12 == pytest.approx(period, rel=1e-9)
    assert M.m21 == pytest.approx(0.0, abs=1e-9)
    assert M.m22 == pytest.approx(1.0, abs=1e-12)
    assert M.trace == pytest.approx(2.0, abs=1e-12)
    assert classify(M).classification is Classification.STABLE


def test_transfer_matrix_harmonic():

    for a in [0.04, 0.2, 0.64]:
        M = transfer_matrix(system(a, 0.0))
        assert abs(M.trace - 2 * np.cos(np.pi * np.sqrt(a))) < 1e-7

    assert transfer_matrix(system(0.2, 0.0)).trace == pytest.approx(0.330149, abs=1e-6)


def test_transfer_matrix_reference_point():

    M = transfer_matrix(system(ref_a, ref_q))
    verdict = classify(M)
    assert verdict.stable
    assert verdict.method is Method.TRACE_CRITERION
    assert abs(verdict.det - 1) < 1e-8

    beta = floquet_exponent(M).real
    mu = dehmelt_index(MathieuParams(ref_a, ref_q, omega))
    assert beta == pytest.approx(mu, rel=0.02)
    assert mu == pytest.approx(2.2246e-3, rel=1e-3)


def test_transfer_matrix_beyond_first_region():

    assert not classify(transfer_matrix(system(0.0, 1.0))).stable


def test_det_invariant():

    settings = IntegratorSettings(rel_tol=1e-12)
    centers = -1 + (np.arange(50) + 0.5) * 2 / 50
    for q in centers:
        sys = CslMathieuSystem(MathieuParams(as_column(centers), q, omega))
        m11, m12, m21, m22 = transfer_batch(sys, MonodromyPolicy(), settings)
        det = m11 * m22 - m12 * m21
        assert np.all(np.abs(det - 1) < 1e-8)


def test_forced_reduction():

    rng = np.random.default_rng(20)
    a = rng.uniform(-1, 1, 100)
    q = rng.uniform(-1, 1, 100)
    sys = CslMathieuSystem(MathieuParams(as_column(a), as_column(q), omega))
    settings = IntegratorSettings()

    homogeneous = transfer_batch(sys, MonodromyPolicy(), settings)
    with_force = transfer_batch(sys, forced, settings)
    for h_entry, f_entry in zip(homogeneous, with_force):
        assert np.array_equal(h_entry, f_entry)


def test_eigenvalues():

    lam1, lam2 = eigenvalues(TransferMatrix(1.0, 0.0, 0.0, 1.0))
    assert lam1 == 1 and lam2 == 1

    # quarter turn
    lam1, lam2 = eigenvalues(TransferMatrix(0.0, 1.0, -1.0, 0.0))
    assert lam1 == pytest.approx(1j) and lam2 == pytest.approx(-1j)
    assert abs(lam1) == pytest.approx(1.0) and abs(lam2) == pytest.approx(1.0)

    # s = 1.25, det = 1
    lam1, lam2 = eigenvalues(TransferMatrix(2.0, 1.0, 0.0, 0.5))
    assert sorted([lam1.real, lam2.real]) == pytest.approx([0.5, 2.0])
    assert lam1.imag == lam2.imag == 0

    # s = -1.25 keeps the large root first
    lam1, lam2 = eigenvalues(TransferMatrix(-2.0, 1.0, 0.0, -0.5))
    assert lam1 == pytest.approx(-2.0) and lam2 == pytest.approx(-0.5)


def test_classify():

    verdict = classify(TransferMatrix(1.0, period, 0.0, 1.0))
    assert verdict.stable
    assert verdict.s_half_trace == verdict.trace / 2

    verdict = classify(TransferMatrix(1.00005, 0.0, 0.0, 1.00005))
    assert verdict.trace == pytest.approx(2.0001)
    assert verdict.classification is Classification.UNSTABLE

    assert classify(TransferMatrix(-1.0, 0.0, 0.0, -1.0)).stable


def test_criterion_equivalence():

    rng = np.random.default_rng(7)
    for a, q in zip(rng.uniform(-0.5, 1.0, 15), rng.uniform(-1, 1, 15)):
        verdict = classify(transfer_matrix(system(a, q)))
        assert abs(verdict.det - 1) < 1e-8
        assert verdict.stable == (max(verdict.eig_moduli) <= 1 + 1e-6)


def test_q_sign_symmetry():

    for a, q in [(0.1, 0.2), (0.3, 0.6), (0.0, 1.0), (-0.05, 0.4), (0.5, 0.1)]:
        plus = classify(transfer_matrix(system(a, q)))
        minus = classify(transfer_matrix(system(a, -q)))
        assert plus.classification is minus.classification
        assert plus.trace == pytest.approx(minus.trace, abs=1e-8)


def test_ic_scale_invariance():

    sys = system(0.2, 0.3)
    # dimensionless entries
    units = np.array([[1.0, omega], [1.0 / omega, 1.0]])
    base = transfer_matrix(sys).as_array() * units
    scaled = transfer_matrix(sys, MonodromyPolicy(ic_scale_x=1e-3,
                                                  ic_scale_v=5.0)).as_array() * units
    assert np.allclose(base, scaled, rtol=1e-7, atol=1e-8)


def test_start_time_invariance():

    sys = system(0.2, 0.3)
    trace = transfer_matrix(sys, MonodromyPolicy(t_start=0.0)).trace
    for t_start in [period / 3, period, 5.5 * period]:
        shifted = transfer_matrix(sys, MonodromyPolicy(t_start=t_start))
        assert shifted.trace == pytest.approx(trace, abs=1e-8)


def test_forced_transfer_matrix():

    grw = system(ref_a, ref_q, CslParams.grw())
    adler = system(ref_a, ref_q, CslParams.adler())
    strong = system(ref_a, ref_q, CslParams(collapse_rate=1e2,
                                            correlation_length=1e-9))

    assert classify(transfer_matrix(grw, forced)).stable
    assert classify(transfer_matrix(adler, forced)).stable
    assert not classify(transfer_matrix(strong, forced)).stable

    # the homogeneous construction ignores the collapse parameters
    assert classify(transfer_matrix(strong)).stable

    with pytest.raises(DomainError):
        transfer_matrix(adler, MonodromyPolicy(t_start=0.0,
                                               construction=Construction.PAPER_FORCED))


def test_multi_period_transfer():

    sys = system(0.2, 0.0)
    M = transfer_matrix(sys)
    M1 = multi_period_transfer(sys, n=1)
    assert np.allclose(M1.as_array(), M.as_array(), rtol=1e-12, atol=0)

    expected = 2 * np.cos(3 * np.pi * np.sqrt(0.2))
    for policy in [MonodromyPolicy(), forced]:
        M3 = multi_period_transfer(sys, policy, n=3)
        assert abs(M3.trace - expected) < 1e-7
        assert abs(M3.det - 1) < 3e-8

    with pytest.raises(DomainError):
        multi_period_transfer(sys, n=0)


def test_empirical_boundedness():

    verdict = empirical_boundedness(system(0.2, 0.0), n_periods=50, log=log)
    assert isinstance(verdict, StabilityVerdict)
    assert verdict.method is Method.BOUNDEDNESS
    assert verdict.stable
    assert verdict.growth <= 1 + 1e-8

    verdict = empirical_boundedness(system(-0.001, 0.0), n_periods=1000, log=log)
    assert not verdict.stable
    assert verdict.growth > 1e3

    verdict = empirical_boundedness(system(ref_a, ref_q), n_periods=1000,
                                    growth_limit=1e3, log=log)
    assert verdict.stable
    assert verdict.growth < 1.1

    with pytest.raises(DomainError):
        empirical_boundedness(system(0.2, 0.0), n_periods=0, log=log)
    with pytest.raises(DomainError):
        empirical_boundedness(system(0.2, 0.0), growth_limit=1.0, log=log)
