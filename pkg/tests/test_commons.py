from trapstab import TimerClass
from trapstab.commons import ConfigError, IntegrationError, \
    NonFiniteStateError, StepUnderflowError, as_column, \
    csv_commented_header, dict_load, format_float, null_log, section_keys, \
    value_conversion

from datetime import datetime, timedelta

import numpy as np
import pytest

ini_text = """
[mathieu]
a = -0.000526947
omega_rad_per_s = 1e8

[csl]
shape_factor = computed
rc_m =

[run]
threads = 4
baseline = True
"""


def test_TimerClass():

    tc = TimerClass()

    assert tc.start == 0
    assert tc.stop == 0
    assert tc.delta == 0
    assert tc.format == ""

    # Test each methods
    tc._start()
    tc._stop()

    assert isinstance(tc.start, datetime)
    assert isinstance(tc.stop, datetime)
    assert isinstance(tc.delta, timedelta)
    assert isinstance(tc.format, str)
    assert tc.seconds >= 0


def test_value_conversion():

    assert value_conversion('3') == 3
    assert isinstance(value_conversion('3'), int)
    assert value_conversion('1e-7') == 1e-7
    assert value_conversion(' unit ') == 'unit'
    assert value_conversion('') is None
    assert value_conversion(2.5) == 2.5


def test_dict_load(tmp_path):

    config_file = tmp_path / 'run.ini'
    config_file.write_text(ini_text)

    defaults = {'csl.rc_m': 1e-7, 'mathieu.q': 0.0326158}
    config = dict_load(str(config_file), defaults=defaults)

    assert config['mathieu.a'] == -0.000526947
    assert config['mathieu.omega_rad_per_s'] == 1e8
    assert config['csl.shape_factor'] == 'computed'
    assert config['run.threads'] == 4
    assert config['run.baseline'] is True

    # empty value keeps the default
    assert config['csl.rc_m'] == 1e-7
    assert config['mathieu.q'] == 0.0326158

    # command-line overrides win, None is ignored
    config = dict_load(str(config_file),
                       vargs={'mathieu.a': 0.2, 'mathieu.q': None},
                       defaults=defaults)
    assert config['mathieu.a'] == 0.2
    assert config['mathieu.q'] == 0.0326158

    # no file
    assert dict_load(defaults=defaults) == defaults


def test_dict_load_errors(tmp_path):

    with pytest.raises(ConfigError):
        dict_load(str(tmp_path / 'missing.ini'))

    bad_file = tmp_path / 'bad.ini'
    bad_file.write_text("a = 1\n")
    with pytest.raises(ConfigError):
        dict_load(str(bad_file))


def test_section_keys():

    config = {'trap.r0_m': 1e-6, 'trap.mass_kg': None, 'mathieu.a': 0.1}

    assert section_keys(config, 'trap') == ['trap.r0_m']
    assert section_keys(config, 'csl') == []


def test_csv_commented_header(tmp_path):

    csv_file = tmp_path / 'scan.csv'
    csv_file.write_text("# first\n# second = 2\na,q\n0.1,0.2\n")

    header = csv_commented_header(str(csv_file))
    assert header == ["# first\n", "# second = 2\n"]


def test_format_float():

    assert format_float(0.1) == '0.10000000000000001'
    assert format_float(2) == '2'
    for value in [1.0 / 3.0, -0.000526947, 6.02214076e23, 1e-300]:
        assert float(format_float(value)) == value


def test_as_column():

    assert as_column(2) == 2.0
    assert isinstance(as_column(2), float)

    column = as_column([1.0, 2.0, 3.0])
    assert column.shape == (3, 1)
    assert np.all(column[:, 0] == [1.0, 2.0, 3.0])


def test_exceptions():

    assert issubclass(StepUnderflowError, IntegrationError)
    assert issubclass(NonFiniteStateError, IntegrationError)
    assert issubclass(IntegrationError, RuntimeError)
    assert issubclass(ConfigError, ValueError)


def test_null_log():

    log = null_log()
    assert log.propagate is False
    log.info("dropped")
