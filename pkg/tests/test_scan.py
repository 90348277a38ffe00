import numpy as np
import pytest

from trapstab.commons import BracketError, ConfigError, PreconditionError
from trapstab.dynamics import CslParams
from trapstab.floquet import Classification, Construction
from trapstab.scan import FLAG_INTEGRATION_ERROR, GridSpec, Scale, \
    ScanKind, ScanMethod, ScanResult, compare_scans, find_boundary_q, \
    monotonicity_violations, scan_aq, scan_exclusion

from redata.commons.logger import log_stdout

ref_a = -0.000526947
ref_q = 0.0326158

log = log_stdout()

small = GridSpec(-0.01, 0.01, 0.1, 0.3, 2, 2)

# r_c centres 1e-9, 1e-8, 1e-7 m; lambda centres 1e-17 ... 1e2 /s
exclusion_grid = GridSpec(-9.5, -6.5, -17.5, 2.5, 3, 20, x_axis='rc',
                          y_axis='lambda', x_scale=Scale.LOG10,
                          y_scale=Scale.LOG10)


def crafted(stable, spec=None, kind=ScanKind.STABILITY):
    stable = np.array(stable, dtype=bool)
    spec = spec or GridSpec(0.0, 1.0, 0.0, 1.0, *stable.shape)
    shape = stable.shape
    return ScanResult(spec, kind, ScanMethod.TRACE, stable, np.zeros(shape),
                      np.ones(shape), np.zeros(shape, dtype=bool))


def test_GridSpec():

    spec = GridSpec.stability_default()
    assert spec.shape == (600, 600)
    assert spec.x_axis == 'q' and spec.y_axis == 'a'
    assert spec.x_centers[0] == pytest.approx(0.001)
    assert spec.y_centers[-1] == pytest.approx(0.79925)

    spec = GridSpec.exclusion_default()
    assert spec.shape == (300, 300)
    assert spec.x_scale is Scale.LOG10
    assert spec.x_centers[0] == pytest.approx(-8.99)
    assert spec.x_values()[0] == pytest.approx(10 ** -8.99)

    assert np.allclose(exclusion_grid.x_centers, [-9.0, -8.0, -7.0])
    assert exclusion_grid.y_centers[0] == pytest.approx(-17.0)
    assert exclusion_grid.y_centers[9] == pytest.approx(-8.0)
    assert exclusion_grid.y_centers[19] == pytest.approx(2.0)

    for args in [(0.0, 0.0, 0.0, 1.0, 2, 2), (0.0, 1.0, 1.0, 0.0, 2, 2),
                 (0.0, 1.0, 0.0, 1.0, 1, 2), (0.0, 1.0, 0.0, 1.0, 2, 0)]:
        with pytest.raises(ConfigError):
            GridSpec(*args)


def test_ScanMethod():

    assert ScanMethod('trace-forced') is ScanMethod.TRACE_FORCED
    assert ScanMethod.TRACE.construction is Construction.HOMOGENEOUS
    assert ScanMethod.TRACE_FORCED.construction is Construction.PAPER_FORCED


def test_ScanResult():

    result = crafted([[True, False], [True, True]])
    assert result.verdicts[0, 1] is Classification.UNSTABLE
    assert result.verdicts[1, 1] is Classification.STABLE
    assert result.flags(0, 0) == ''

    with pytest.raises(ValueError):
        result.stable[0, 0] = False

    with pytest.raises(ValueError):
        ScanResult(result.spec, ScanKind.STABILITY, ScanMethod.TRACE,
                   np.ones((3, 2), dtype=bool), np.zeros((2, 2)),
                   np.ones((2, 2)), np.zeros((2, 2), dtype=bool))


def test_scan_aq():

    result = scan_aq(small, log=log)
    assert result.kind is ScanKind.STABILITY
    assert result.method is ScanMethod.TRACE_FORCED
    assert result.stable.shape == (2, 2)
    assert result.stable.all()
    assert not result.failed.any()
    assert np.all(np.abs(result.dets - 1) < 1e-8)
    assert result.flags(1, 1) == ''
    assert FLAG_INTEGRATION_ERROR == 'integration_error'

    provenance = result.provenance
    assert provenance['kind'] == 'stability'
    assert provenance['method'] == 'trace-forced'
    assert provenance['lambda_per_s'] == '0'
    assert 'version' in provenance

    with pytest.raises(ConfigError):
        scan_aq(exclusion_grid, log=log)


def test_scan_aq_reference_cell():

    spec = GridSpec(ref_q - 1e-4, ref_q + 1e-4, ref_a - 1e-6, ref_a + 1e-6,
                    2, 2)
    result = scan_aq(spec, method=ScanMethod.TRACE, log=log)
    assert result.stable.all()
    assert np.all(result.traces < 2)


def test_scan_aq_q_symmetry():

    spec = GridSpec(-0.8, 0.8, 0.0, 0.4, 4, 2)
    result = scan_aq(spec, log=log)
    assert np.array_equal(result.stable[0], result.stable[3])
    assert np.array_equal(result.stable[1], result.stable[2])
    assert np.allclose(result.traces[0], result.traces[3], atol=1e-8)


def test_scan_aq_threads():

    spec = GridSpec(0.0, 1.2, -0.1, 0.8, 4, 4)
    serial = scan_aq(spec, threads=1, log=log)
    parallel = scan_aq(spec, threads=2, log=log)
    assert np.array_equal(serial.stable, parallel.stable)
    assert np.array_equal(serial.traces, parallel.traces)
    assert np.array_equal(serial.dets, parallel.dets)


def test_scan_aq_adler():

    spec = GridSpec(0.0, 1.2, -0.1, 0.8, 6, 4)
    bare = scan_aq(spec, log=log)
    adler = scan_aq(spec, csl=CslParams.adler(), log=log)
    comparison = compare_scans(bare, adler, log=log)
    assert comparison.all_adjacent


def test_scan_aq_bounded():

    spec = GridSpec(-0.01, 0.01, -0.3, 0.3, 2, 2)
    result = scan_aq(spec, method=ScanMethod.BOUNDED, n_periods=20, log=log)
    assert result.method is ScanMethod.BOUNDED
    assert not result.stable[:, 0].any()
    assert result.stable[:, 1].all()


def test_scan_exclusion():

    result = scan_exclusion(ref_a, ref_q, spec=exclusion_grid, log=log)
    assert result.kind is ScanKind.EXCLUSION
    assert result.stable.shape == (3, 20)

    # r_c = 1e-7 m stays allowed up to lambda = 1e2 /s
    assert result.stable[2].all()
    # GRW and Adler benchmarks
    assert result.stable[2, 0]
    assert result.stable[2, 9]
    # r_c = 1e-9 m, lambda = 1e2 /s
    assert not result.stable[0, 19]

    assert result.stable[:, 0].all()
    assert monotonicity_violations(result) == []
    assert float(result.provenance['reference_trace']) < 2
    assert result.provenance['kind'] == 'exclusion'


def test_scan_exclusion_errors():

    with pytest.raises(PreconditionError):
        scan_exclusion(-6e-4, ref_q, spec=exclusion_grid, log=log)

    with pytest.raises(ConfigError):
        scan_exclusion(ref_a, ref_q, spec=small, log=log)


def test_find_boundary_q():

    q_star = find_boundary_q(0.0, 0.5, 1.0, log=log)
    assert 0.9075 <= q_star <= 0.9085

    q_star = find_boundary_q(-5.3189e-4, 0.02, 0.05, log=log)
    assert q_star == pytest.approx(0.03262, rel=2e-3)

    with pytest.raises(BracketError):
        find_boundary_q(0.2, 0.1, 0.2, log=log)
    with pytest.raises(BracketError):
        find_boundary_q(0.0, 0.5, 0.5, log=log)


def test_compare_scans():

    reference = crafted([[True] * 4, [True] * 4, [False] * 4, [False] * 4])

    other = np.array(reference.stable)
    other[1, 1] = False
    comparison = compare_scans(reference, crafted(other), log=log)
    assert comparison.differing == [(1, 1)]
    assert comparison.all_adjacent

    other[0, 0] = False
    comparison = compare_scans(reference, crafted(other), log=log)
    assert comparison.differing == [(0, 0), (1, 1)]
    assert comparison.adjacent == [False, True]
    assert not comparison.all_adjacent

    assert compare_scans(reference, reference, log=log).differing == []

    with pytest.raises(ConfigError):
        compare_scans(reference, crafted(np.ones((4, 3))), log=log)


def test_monotonicity_violations():

    result = crafted([[True, True, False, False],
                      [True, False, True, False],
                      [True, True, True, True]],
                     kind=ScanKind.EXCLUSION)
    assert monotonicity_violations(result) == [1]


def test_scan_aq_first_band():

    # q centres 0.5 and 1.0, a centres -0.025 and 0.025
    spec = GridSpec(0.25, 1.25, -0.05, 0.05, 2, 2)
    result = scan_aq(spec, method=ScanMethod.TRACE, log=log)
    assert result.stable[0].all()
    assert not result.stable[1].any()


def test_scan_aq_refinement():

    coarse = scan_aq(GridSpec(0.0, 1.2, -0.1, 0.8, 3, 3),
                     method=ScanMethod.TRACE, log=log)
    fine = scan_aq(GridSpec(0.0, 1.2, -0.1, 0.8, 6, 6),
                   method=ScanMethod.TRACE, log=log)

    agreeing = 0
    for i in range(3):
        for j in range(3):
            children = fine.stable[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            if children.all() or not children.any():
                agreeing += 1
                assert coarse.stable[i, j] == children[0, 0]
    assert agreeing >= 3
