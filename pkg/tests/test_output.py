import io

import numpy as np
import pytest

from trapstab.commons import ConfigError
from trapstab.dynamics import State
from trapstab.output import COLUMNS, MAGIC, ScanTable, parse_provenance, \
    read_scan_csv, scan_dataframe, state_record, summary_record, \
    write_scan_csv
from trapstab.scan import GridSpec, Scale, ScanKind, ScanMethod, ScanResult


def stability_result():
    spec = GridSpec(0.0, 0.2, 0.1, 0.3, 2, 2)
    stable = np.array([[True, False], [True, True]])
    traces = np.array([[0.5, 2.5], [1.0 / 3.0, -1.9]])
    failed = np.zeros((2, 2), dtype=bool)
    provenance = {'version': '0.1.0', 'kind': 'stability',
                  'method': 'trace-forced'}
    return ScanResult(spec, ScanKind.STABILITY, ScanMethod.TRACE_FORCED,
                      stable, traces, np.ones((2, 2)), failed, provenance)


def exclusion_result():
    spec = GridSpec(-9.0, -7.0, -17.0, 3.0, 2, 2, x_axis='rc',
                    y_axis='lambda', x_scale=Scale.LOG10, y_scale=Scale.LOG10)
    stable = np.array([[True, False], [True, True]])
    traces = np.array([[1.9, np.nan], [1.9, 1.9]])
    failed = np.array([[False, True], [False, False]])
    return ScanResult(spec, ScanKind.EXCLUSION, ScanMethod.TRACE_FORCED,
                      stable, traces, np.ones((2, 2)), failed,
                      {'kind': 'exclusion'})


def write(result, tmp_path, name='scan.csv'):
    path = tmp_path / name
    with open(path, 'w') as f:
        write_scan_csv(result, f)
    return path


def test_scan_dataframe():

    df = scan_dataframe(stability_result())
    assert list(df.columns) == COLUMNS[ScanKind.STABILITY]
    assert len(df) == 4

    # x (q) runs fastest
    assert np.allclose(df['q'], [0.05, 0.15, 0.05, 0.15])
    assert np.allclose(df['a'], [0.15, 0.15, 0.25, 0.25])
    assert list(df['verdict']) == ['stable', 'stable', 'unstable', 'stable']
    assert df['trace'][2] == 2.5


def test_write_scan_csv():

    stream = io.StringIO()
    write_scan_csv(stability_result(), stream)
    lines = stream.getvalue().splitlines()

    assert lines[0] == MAGIC[ScanKind.STABILITY]
    assert lines[1] == '# version = 0.1.0'
    assert lines[3] == '# method = trace-forced'
    assert lines[4] == 'a,q,trace,verdict,flags'
    assert len(lines) == 9
    fields = lines[6].split(',')
    assert fields[2:] == ['0.33333333333333331', 'stable', '']
    assert float(fields[1]) == pytest.approx(0.15)


def test_read_scan_csv(tmp_path):

    table = read_scan_csv(str(write(stability_result(), tmp_path)))
    assert isinstance(table, ScanTable)
    assert table.kind is ScanKind.STABILITY
    assert table.provenance['method'] == 'trace-forced'
    assert len(table.df) == 4
    assert list(table.stable) == [True, True, False, True]
    assert table.df['trace'][1] == 1.0 / 3.0

    table = read_scan_csv(str(write(exclusion_result(), tmp_path)))
    assert table.kind is ScanKind.EXCLUSION
    assert list(table.df.columns) == COLUMNS[ScanKind.EXCLUSION]
    assert list(table.df['verdict']) == ['allowed', 'allowed', 'excluded',
                                         'allowed']
    assert list(table.df['flags']) == ['', '', 'integration_error', '']
    assert np.isnan(table.df['trace'][2])


def test_read_scan_csv_errors(tmp_path):

    with pytest.raises(ConfigError):
        read_scan_csv(str(tmp_path / 'missing.csv'))

    bad = {
        'no_header.csv': "a,q,trace,verdict,flags\n0.1,0.1,1.0,stable,\n",
        'magic.csv': "# something else\na,q,trace,verdict,flags\n",
        'columns.csv': MAGIC[ScanKind.STABILITY] + "\na,q,verdict\n0.1,0.1,stable\n",
        'verdict.csv': MAGIC[ScanKind.STABILITY] +
        "\na,q,trace,verdict,flags\n0.1,0.1,1.0,allowed,\n",
        'empty.csv': MAGIC[ScanKind.STABILITY] + "\na,q,trace,verdict,flags\n",
    }
    for name, text in bad.items():
        path = tmp_path / name
        path.write_text(text)
        with pytest.raises(ConfigError):
            read_scan_csv(str(path))


def test_state_record():

    assert state_record(State(1.0, -0.5, 0.25)) == '{"t":0.25,"x":1,"v":-0.5}'


def test_summary_record():

    line = summary_record(1e-6, 3, 2.0)
    assert line == '{"summary":true,"completed":true,"n_samples":3,' \
                   '"t_end":2,"max_abs_x":9.9999999999999995e-07}'
    assert '"completed":false' in summary_record(1.0, 1, 1.0, completed=False)


def test_parse_provenance():

    provenance = parse_provenance(["# a = -0.000526947\n", "# note\n",
                                   "# rc_m = 1e-7\n"])
    assert provenance == {'a': '-0.000526947', 'rc_m': '1e-7'}
