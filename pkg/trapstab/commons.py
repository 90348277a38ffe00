from typing import Any, Dict, List, Optional, Union

import configparser
import logging
from logging import Logger
from os.path import exists

import numpy as np


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 2)"""


class DomainError(ValueError):
    """Physical or numerical input outside the domain of a formula"""


class BracketError(ValueError):
    """Boundary bisection bracket without a change of verdict"""


class PreconditionError(ValueError):
    """Physics precondition violated (CLI exit code 4)"""


class IntegrationError(RuntimeError):
    """Base class for initial-value solver failures (CLI exit code 3)"""


class StepUnderflowError(IntegrationError):
    """Step size fell below the resolution of the time axis"""


class NonFiniteStateError(IntegrationError):
    """State or derivative became NaN or infinite"""


def value_conversion(string: str) -> Union[int, float, str, None]:
    """
    Check and convert a config string that can be represented as a number

    :param string: Input string

    :return: ``int`` if possible, then ``float``, otherwise the stripped
             string. An empty string returns ``None`` (unset)
    """
    if isinstance(string, (int, float)):
        return string

    string = str(string).strip()
    if not string:
        return None

    try:
        value = int(string)
    except ValueError:
        try:
            value = float(string)
        except ValueError:
            value = string
    return value


def dict_load(config_file: Optional[str] = None,
              vargs: Optional[Dict[str, Any]] = None,
              defaults: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Read in a config INI file using ``configparser`` and return a flat
    ``dict`` keyed by ``section.option``

    Settings are loaded in the following order:

      1. ``defaults``
      2. ``config_file`` (will override #1)
      3. ``vargs`` command-line overrides (will override #1 and #2)

    Option names keep their case, so ``dc_voltage_V`` under ``[trap]``
    becomes ``trap.dc_voltage_V``.

    :param config_file: Full/relative path of configuration file
    :param vargs: Command-line overrides keyed by ``section.option``.
           ``None`` values are ignored
    :param defaults: Built-in defaults keyed by ``section.option``

    :raises ConfigError: ``config_file`` does not exist or cannot be parsed

    :return: Python ``dict`` of configuration settings
    """

    config_dict: Dict[str, Any] = dict(defaults) if defaults else {}

    if config_file:
        if not exists(config_file):
            raise ConfigError(f"Config file not found! {config_file}")

        config = configparser.ConfigParser(interpolation=None)
        config.optionxform = str
        try:
            config.read(config_file)
        except configparser.Error as err:
            raise ConfigError(f"Unable to parse {config_file}: {err}")

        for section in config.sections():
            for option in config.options(section):
                option_input = config.get(section, option)
                if option_input in ['True', 'False']:
                    config_dict[f'{section}.{option}'] = \
                        config.getboolean(section, option)
                else:
                    value = value_conversion(option_input)
                    # empty keeps the default
                    if value is not None or f'{section}.{option}' not in config_dict:
                        config_dict[f'{section}.{option}'] = value

    # Populate with command-line arguments overrides
    if vargs:
        for key, value in vargs.items():
            if value is not None:
                config_dict[key] = value_conversion(value)

    return config_dict


def section_keys(config_dict: Dict[str, Any], section: str) -> List[str]:
    """
    Return the keys of ``config_dict`` that belong to ``section`` and are set

    :param config_dict: Flat settings from :func:`trapstab.commons.dict_load`
    :param section: Section name, e.g. 'trap'
    """
    return [key for key, value in config_dict.items()
            if key.startswith(f'{section}.') and value is not None]


def csv_commented_header(input_file: str) -> list:
    """
    Read in the comment header in CSV file to re-populate later

    :param input_file: Full path to CSV file

    :return: CSV header
    """

    with open(input_file, 'r') as f:
        header = []
        for line in f:
            if not line.startswith('#'):
                break
            header.append(line)
    return header


def format_float(value: float) -> str:
    """
    Round-trip decimal representation with 17 significant digits

    :param value: Number to format

    :return: ``%.17g`` string; ``nan``/``inf`` spelled out
    """
    return '%.17g' % float(value)


def as_column(value: Any) -> Union[float, np.ndarray]:
    """
    Scalars stay ``float``; array-likes become ``(n, 1)`` columns that
    broadcast against ``(n, k)`` batches of states

    :param value: Scalar or 1-D array-like
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    return arr.reshape(-1, 1)


def null_log() -> Logger:
    """
    Logger that drops every record. Used when stdout carries data

    :return: Silent ``Logger``
    """
    log = logging.getLogger('trapstab.null')
    if not log.handlers:
        log.addHandler(logging.NullHandler())
    log.propagate = False
    return log
