from dataclasses import dataclass
from typing import Dict, List, TextIO

import numpy as np
import pandas as pd

from .commons import ConfigError, csv_commented_header, format_float
from .dynamics import State
from .scan import ScanKind, ScanResult

FLOAT_FORMAT = '%.17g'

MAGIC = {ScanKind.STABILITY: '# trapstab stability-scan v1',
         ScanKind.EXCLUSION: '# trapstab exclusion-scan v1'}

COLUMNS = {ScanKind.STABILITY: ['a', 'q', 'trace', 'verdict', 'flags'],
           ScanKind.EXCLUSION: ['log10_rc_m', 'log10_lambda_per_s', 'trace',
                                'verdict', 'flags']}

VERDICT_WORDS = {ScanKind.STABILITY: ('stable', 'unstable'),
                 ScanKind.EXCLUSION: ('allowed', 'excluded')}


@dataclass
class ScanTable:
    """
    Scan CSV read back from disk

    :ivar kind: ``STABILITY`` or ``EXCLUSION``
    :ivar provenance: ``key = value`` header lines
    :ivar df: Data rows with the ``COLUMNS`` of ``kind``
    """
    kind: ScanKind
    provenance: Dict[str, str]
    df: pd.DataFrame

    @property
    def stable(self) -> np.ndarray:
        return (self.df['verdict'] == VERDICT_WORDS[self.kind][0]).values


def scan_dataframe(result: ScanResult) -> pd.DataFrame:
    """
    Flatten a ``ScanResult`` into CSV rows (x index fastest)

    :param result: Assembled scan

    :return: ``pandas.DataFrame`` with the columns of the scan kind
    """
    spec = result.spec
    ii, jj = np.meshgrid(np.arange(spec.nx), np.arange(spec.ny), indexing='xy')
    ii, jj = ii.ravel(), jj.ravel()
    xs = spec.x_centers[ii]
    ys = spec.y_centers[jj]

    if result.kind is ScanKind.STABILITY:
        coords = {spec.x_axis: xs, spec.y_axis: ys}
        first, second = coords['a'], coords['q']
    else:
        first, second = xs, ys

    words = np.array(VERDICT_WORDS[result.kind])
    verdict = np.where(result.stable[ii, jj], words[0], words[1])
    flags = np.where(result.failed[ii, jj], 'integration_error', '')

    columns = COLUMNS[result.kind]
    return pd.DataFrame({columns[0]: first, columns[1]: second,
                         'trace': result.traces[ii, jj],
                         'verdict': verdict, 'flags': flags},
                        columns=columns)


def write_scan_csv(result: ScanResult, stream: TextIO) -> None:
    """
    Write the commented provenance header followed by the data rows

    Stability scans start with ``# trapstab stability-scan v1`` and use the
    columns ``a,q,trace,verdict,flags``; exclusion scans start with
    ``# trapstab exclusion-scan v1`` and use
    ``log10_rc_m,log10_lambda_per_s,trace,verdict,flags``. Rows run over x
    fastest, then y, with 17 significant digits.

    :param result: Assembled scan
    :param stream: Open text stream (file or ``sys.stdout``)
    """
    stream.write(MAGIC[result.kind] + '\n')
    for key, value in result.provenance.items():
        stream.write(f"# {key} = {value}\n")
    scan_dataframe(result).to_csv(stream, index=False,
                                  float_format=FLOAT_FORMAT, na_rep='nan')


def read_scan_csv(input_file: str) -> ScanTable:
    """
    Read a scan CSV written by :func:`trapstab.output.write_scan_csv`

    :param input_file: Full path to CSV file

    :raises ConfigError: missing file, unknown header, wrong columns or
            unknown verdict words

    :return: ``ScanTable``
    """
    try:
        header = csv_commented_header(input_file)
    except OSError as err:
        raise ConfigError(f"Unable to read {input_file}: {err}")

    if not header:
        raise ConfigError(f"malformed CSV, missing header: {input_file}")
    magic = header[0].strip()
    kinds = [kind for kind, line in MAGIC.items() if line == magic]
    if not kinds:
        raise ConfigError(f"malformed CSV, unknown header '{magic}'")
    kind = kinds[0]

    provenance = parse_provenance(header[1:])

    try:
        df = pd.read_csv(input_file, comment='#', dtype={'verdict': str,
                                                         'flags': str})
    except (ValueError, pd.errors.ParserError) as err:
        raise ConfigError(f"malformed CSV {input_file}: {err}")

    if list(df.columns) != COLUMNS[kind]:
        raise ConfigError(f"malformed CSV, expected columns "
                          f"{','.join(COLUMNS[kind])}")
    if df.empty:
        raise ConfigError("malformed CSV, no data rows")
    df['flags'] = df['flags'].fillna('')
    if not df['verdict'].isin(VERDICT_WORDS[kind]).all():
        raise ConfigError(f"malformed CSV, verdicts must be one of "
                          f"{VERDICT_WORDS[kind]}")
    numeric = df[COLUMNS[kind][:2]]
    if not np.all(np.isfinite(numeric.to_numpy(dtype=float))):
        raise ConfigError("malformed CSV, non-finite coordinates")

    return ScanTable(kind, provenance, df)


def state_record(state: State) -> str:
    """One NDJSON line ``{"t":..., "x":..., "v":...}``"""
    return '{"t":%s,"x":%s,"v":%s}' % (format_float(state.t),
                                       format_float(state.x),
                                       format_float(state.v))


def summary_record(max_abs_x: float, n_samples: int, t_end: float,
                   completed: bool = True) -> str:
    """Final NDJSON line of a trajectory stream"""
    return '{"summary":true,"completed":%s,"n_samples":%d,"t_end":%s,' \
           '"max_abs_x":%s}' % ('true' if completed else 'false', n_samples,
                                format_float(t_end), format_float(max_abs_x))


def parse_provenance(lines: List[str]) -> Dict[str, str]:
    """``# key = value`` lines into a ``dict``"""
    out = {}
    for line in lines:
        key, sep, value = line.lstrip('#').partition('=')
        if sep:
            out[key.strip()] = value.strip()
    return out
