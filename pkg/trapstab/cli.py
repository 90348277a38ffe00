import argparse
import os
import sys
from dataclasses import dataclass, field, replace
from functools import partial
from logging import Logger
from typing import Any, Callable, Dict, List, Optional, TextIO

import numpy as np

from redata.commons.logger import log_stdout

from . import CODE_NAME, __version__
from .commons import (BracketError, ConfigError, DomainError,
                      IntegrationError, PreconditionError, dict_load,
                      format_float, null_log, section_keys)
from .dynamics import CslMathieuSystem, CslParams, ShapeMode, State, rhs_csl
from .floquet import MonodromyPolicy
from .integrator import IntegratorSettings, integrate_sampled
from .output import ScanTable, read_scan_csv, scan_dataframe, \
    state_record, summary_record, write_scan_csv
from .params import (MathieuParams, TrapConfig, angular_frequency,
                     dehmelt_index, mathieu_from_trap)
from .render import Marker, SvgStyle, benchmark_markers, render_svg
from .scan import (GridSpec, Scale, ScanKind, ScanMethod, ScanResult,
                   compare_scans, scan_aq, scan_exclusion)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PRECONDITION = 4

THREADS_ENV = 'TRAPSTAB_THREADS'

# stable point of the bare Mathieu equation used throughout the exclusion map
REFERENCE_A = -0.000526947
REFERENCE_Q = 0.0326158

TRAP_KEYS = ['trap.dc_voltage_V', 'trap.ac_amplitude_V', 'trap.omega_rad_per_s',
             'trap.r0_m', 'trap.charge_C', 'trap.mass_kg']

DEFAULTS: Dict[str, Any] = {
    'mathieu.omega_rad_per_s': 1e8,
    'csl.lambda_per_s': 0.0,
    'csl.rc_m': 1e-7,
    'csl.radius_m': 1e-7,
    'csl.shape_factor': 'unit',
    'monodromy.method': 'trace-forced',
    'monodromy.ic_scale_x_m': 1e-6,
    'monodromy.n_periods': 1000,
    'monodromy.growth_limit': 1e3,
    'integrator.rel_tol': 1e-10,
    'integrator.abs_tol_x_m': 1e-18,
    'integrator.abs_tol_v_m_per_s': 1e-12,
    'integrator.max_steps': 1000000,
    'trajectory.periods': 10,
    'trajectory.n_samples': 100,
    'trajectory.x0_m': 1e-6,
    'trajectory.v0_m_per_s': 0.0,
}

# argparse dest -> flat config key
FLAG_KEYS = {
    'a': 'mathieu.a',
    'q': 'mathieu.q',
    'collapse_rate': 'csl.lambda_per_s',
    'rc': 'csl.rc_m',
    'radius': 'csl.radius_m',
    'shape_factor': 'csl.shape_factor',
    'method': 'monodromy.method',
    't_start': 'monodromy.t_start_s',
    'ic_scale_x': 'monodromy.ic_scale_x_m',
    'ic_scale_v': 'monodromy.ic_scale_v_m_per_s',
    'n_periods': 'monodromy.n_periods',
    'growth_limit': 'monodromy.growth_limit',
    'rel_tol': 'integrator.rel_tol',
    'dc_voltage': 'trap.dc_voltage_V',
    'ac_amplitude': 'trap.ac_amplitude_V',
    'r0': 'trap.r0_m',
    'charge': 'trap.charge_C',
    'mass': 'trap.mass_kg',
    'periods': 'trajectory.periods',
    'n_samples': 'trajectory.n_samples',
    'x0': 'trajectory.x0_m',
    'v0': 'trajectory.v0_m_per_s',
    'out': 'output.out',
    'svg': 'output.svg',
}

GRID_FLAGS = ['x_min', 'x_max', 'y_min', 'y_max', 'nx', 'ny']


def _number(config: Dict[str, Any], key: str, kind: Callable = float,
            default: Any = None) -> Any:
    value = config.get(key, default)
    if value is None:
        return None
    try:
        if kind is int and float(value) != int(float(value)):
            raise ValueError
        return kind(float(value)) if kind is int else kind(value)
    except (TypeError, ValueError, OverflowError):
        raise ConfigError(f"{key} must be a number, got '{value}'")


def _choice(config: Dict[str, Any], key: str, enum_cls) -> Any:
    value = str(config.get(key))
    try:
        return enum_cls(value)
    except ValueError:
        choices = ', '.join(e.value for e in enum_cls)
        raise ConfigError(f"{key} must be one of {choices}, got '{value}'")


def _grid(config: Dict[str, Any], section: str, default: GridSpec) -> GridSpec:
    spec = default
    updates = {}
    for name in GRID_FLAGS:
        kind = int if name in ('nx', 'ny') else float
        value = _number(config, f'{section}.{name}', kind)
        if value is not None:
            updates[name] = value
    for name in ('x_axis', 'y_axis'):
        value = config.get(f'{section}.{name}')
        if value is not None:
            updates[name] = str(value)
    return replace(spec, **updates)


def _check_writable(path: Optional[str]) -> None:
    if path is None:
        return
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        raise ConfigError(f"Output directory not writable: {directory}")


def _threads(flag: Optional[int], config: Dict[str, Any]) -> int:
    value: Any = flag
    source = '--threads'
    if value is None and os.environ.get(THREADS_ENV):
        value, source = os.environ[THREADS_ENV], THREADS_ENV
    if value is None and config.get('run.threads') is not None:
        value, source = config['run.threads'], 'run.threads'
    if value is None:
        return 1
    try:
        threads = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{source} must be an integer, got '{value}'")
    if threads < 1:
        raise ConfigError(f"{source} must be at least 1, got {threads}")
    return threads


@dataclass
class RunConfig:
    """
    Merged, validated view of one invocation

    :ivar mathieu: x-axis Mathieu parameters with the RF angular frequency
    :ivar trap: Trap settings when given in that form, else ``None``
    :ivar csl: Collapse parameters
    :ivar policy: Monodromy window and initial conditions
    :ivar method: Stability criterion of scans
    :ivar settings: Integrator error control
    :ivar n_periods: Periods followed by the boundedness criterion
    :ivar growth_limit: Escape threshold of the boundedness criterion
    :ivar periods: Trajectory length in RF periods
    :ivar n_samples: Trajectory sampling intervals
    :ivar x0: Trajectory initial position in m
    :ivar v0: Trajectory initial velocity in m/s
    :ivar stability_grid: Grid of ``stability-scan``
    :ivar exclusion_grid: Grid of ``exclusion-scan``
    :ivar out: Data output path; ``None`` writes to stdout
    :ivar svg: SVG output path
    :ivar threads: Worker processes of scans
    :ivar baseline: Also run the lambda = 0 stability scan and compare
    :ivar markers: Extra labelled SVG markers
    """
    mathieu: MathieuParams
    trap: Optional[TrapConfig] = None
    csl: CslParams = field(default_factory=CslParams)
    policy: MonodromyPolicy = field(default_factory=MonodromyPolicy)
    method: ScanMethod = ScanMethod.TRACE_FORCED
    settings: IntegratorSettings = field(default_factory=IntegratorSettings)
    n_periods: int = 1000
    growth_limit: float = 1e3
    periods: float = 10.0
    n_samples: int = 100
    x0: float = 1e-6
    v0: float = 0.0
    stability_grid: Optional[GridSpec] = None
    exclusion_grid: Optional[GridSpec] = None
    out: Optional[str] = None
    svg: Optional[str] = None
    threads: int = 1
    baseline: bool = False
    markers: List[Marker] = field(default_factory=list)

    @classmethod
    def from_dict(cls, config: Dict[str, Any], command: str = '') -> 'RunConfig':
        """
        Build from the flat ``section.option`` mapping of
        :func:`trapstab.commons.dict_load`

        :raises ConfigError: both trap and ``(a, q)`` given, incomplete trap,
                non-numeric values, unknown choices, invalid grids or
                unwritable outputs
        :raises DomainError: physically invalid values
        """
        trap_set = section_keys(config, 'trap')
        aq_set = [key for key in ('mathieu.a', 'mathieu.q')
                  if config.get(key) is not None]
        if trap_set and aq_set:
            raise ConfigError("give either a trap configuration or (a, q), not both")

        omega = _number(config, 'mathieu.omega_rad_per_s')
        omega_flag = bool(config.get('run.omega_flag'))

        trap = None
        if trap_set:
            missing = [key for key in TRAP_KEYS if config.get(key) is None and
                       not (omega_flag and key == 'trap.omega_rad_per_s')]
            if missing:
                raise ConfigError(f"incomplete trap configuration, missing "
                                  f"{', '.join(missing)}")
            trap_omega = omega if omega_flag else \
                _number(config, 'trap.omega_rad_per_s')
            trap = TrapConfig(_number(config, 'trap.dc_voltage_V'),
                              _number(config, 'trap.ac_amplitude_V'),
                              trap_omega,
                              _number(config, 'trap.r0_m'),
                              _number(config, 'trap.charge_C'),
                              _number(config, 'trap.mass_kg'))
            mathieu, _ = mathieu_from_trap(trap)
        else:
            a = _number(config, 'mathieu.a', default=REFERENCE_A)
            q = _number(config, 'mathieu.q', default=REFERENCE_Q)
            mathieu = MathieuParams(a, q, omega)

        csl = CslParams(collapse_rate=_number(config, 'csl.lambda_per_s'),
                        correlation_length=_number(config, 'csl.rc_m'),
                        radius=_number(config, 'csl.radius_m'),
                        shape_mode=_choice(config, 'csl.shape_factor', ShapeMode))

        method = _choice(config, 'monodromy.method', ScanMethod)
        policy = MonodromyPolicy(t_start=_number(config, 'monodromy.t_start_s'),
                                 ic_scale_x=_number(config, 'monodromy.ic_scale_x_m'),
                                 ic_scale_v=_number(config, 'monodromy.ic_scale_v_m_per_s'),
                                 construction=method.construction)

        settings_kw = dict(rel_tol=_number(config, 'integrator.rel_tol'),
                           abs_tol_x=_number(config, 'integrator.abs_tol_x_m'),
                           abs_tol_v=_number(config, 'integrator.abs_tol_v_m_per_s'),
                           max_steps=_number(config, 'integrator.max_steps', int))
        max_step = _number(config, 'integrator.max_step_s')
        if max_step is not None:
            settings_kw['max_step'] = max_step
        initial_step = _number(config, 'integrator.initial_step_s')
        if initial_step is not None:
            settings_kw['initial_step'] = initial_step
        settings = IntegratorSettings(**settings_kw)

        n_samples = _number(config, 'trajectory.n_samples', int)
        periods = _number(config, 'trajectory.periods')
        n_periods = _number(config, 'monodromy.n_periods', int)
        growth_limit = _number(config, 'monodromy.growth_limit')
        if n_samples < 1:
            raise ConfigError("trajectory.n_samples must be at least 1")
        if not periods > 0:
            raise ConfigError("trajectory.periods must be positive")
        if n_periods < 1:
            raise ConfigError("monodromy.n_periods must be at least 1")
        if not growth_limit > 1:
            raise ConfigError("monodromy.growth_limit must exceed 1")

        stability_grid = exclusion_grid = None
        if command == 'stability-scan':
            stability_grid = _grid(config, 'stability_grid',
                                   GridSpec.stability_default())
        elif command == 'exclusion-scan':
            exclusion_grid = _grid(config, 'exclusion_grid',
                                   GridSpec.exclusion_default())
            if exclusion_grid.x_scale is not Scale.LOG10 or \
                    (exclusion_grid.x_axis, exclusion_grid.y_axis) != ('rc', 'lambda'):
                raise ConfigError("exclusion grids run over log10 r_c and log10 lambda")

        out = config.get('output.out')
        svg = config.get('output.svg')
        _check_writable(out)
        _check_writable(svg)

        markers = [Marker.parse(text) for text in config.get('run.markers', [])]

        return cls(mathieu=mathieu, trap=trap, csl=csl, policy=policy,
                   method=method, settings=settings, n_periods=n_periods,
                   growth_limit=growth_limit, periods=periods,
                   n_samples=n_samples,
                   x0=_number(config, 'trajectory.x0_m'),
                   v0=_number(config, 'trajectory.v0_m_per_s'),
                   stability_grid=stability_grid, exclusion_grid=exclusion_grid,
                   out=None if out is None else str(out),
                   svg=None if svg is None else str(svg),
                   threads=_threads(config.get('run.threads_flag'), config),
                   baseline=bool(config.get('run.baseline', False)),
                   markers=markers)


def _open_out(path: Optional[str]) -> TextIO:
    return open(path, 'w', newline='') if path else sys.stdout


def _close_out(stream: TextIO) -> None:
    if stream is not sys.stdout:
        stream.close()
    else:
        stream.flush()


def _mu_text(p: MathieuParams) -> str:
    try:
        return format_float(dehmelt_index(p))
    except DomainError:
        return 'nan (outside Dehmelt stable region)'


def cmd_trap_params(config: RunConfig, log: Logger) -> int:
    """
    Print ``a_x, q_x, a_y, q_y`` and the Dehmelt index of both axes

    :param config: Run configuration
    :param log: File and/or stdout logging

    :return: Exit code
    """
    log.debug('entered')
    x = config.mathieu
    y = MathieuParams(-x.a, -x.q, x.omega)

    stream = _open_out(config.out)
    lines = [f"a_x = {format_float(x.a)}",
             f"q_x = {format_float(x.q)}",
             f"a_y = {format_float(y.a)}",
             f"q_y = {format_float(y.q)}",
             f"mu_x = {_mu_text(x)}",
             f"mu_y = {_mu_text(y)}",
             f"omega_rad_per_s = {format_float(x.omega)}",
             f"period_s = {format_float(x.period)}"]
    stream.write('\n'.join(lines) + '\n')
    _close_out(stream)
    log.debug('returning')
    return EXIT_OK


def cmd_trajectory(config: RunConfig, log: Logger) -> int:
    """
    Integrate the equation of motion from ``(x0, v0)`` at ``t_start`` over
    ``periods`` RF periods and stream the samples as NDJSON, followed by a
    summary record with ``max|x|``

    :param config: Run configuration
    :param log: File and/or stdout logging

    :raises DomainError: ``lambda > 0`` with ``t_start = 0``
    :raises IntegrationError: after flushing the samples written so far

    :return: Exit code
    """
    log.debug('entered')
    sys_ = CslMathieuSystem(config.mathieu, config.csl)
    period = config.mathieu.period
    t0 = config.policy.start_time(period)
    if not config.csl.is_null and not t0 > 0:
        raise DomainError("CSL force needs t_start > 0")
    t1 = t0 + config.periods * period

    peak = [abs(config.x0)]
    written = [0]
    stream = _open_out(config.out)

    def on_sample(state: State) -> None:
        peak[0] = max(peak[0], abs(state.x))
        stream.write(state_record(state) + '\n')
        stream.flush()
        written[0] += 1

    def observer(t, x, v, accepted) -> None:
        peak[0] = max(peak[0], float(np.max(np.abs(x))))

    log.info(f"Trajectory over {config.periods} periods, {config.n_samples} samples")
    try:
        integrate_sampled(partial(rhs_csl, sys=sys_),
                          State(config.x0, config.v0, t0), t1, config.n_samples,
                          config.settings.for_period(period),
                          on_sample=on_sample, observer=observer)
    except IntegrationError:
        stream.write(summary_record(peak[0], written[0], t1, completed=False) + '\n')
        _close_out(stream)
        raise

    stream.write(summary_record(peak[0], written[0], t1) + '\n')
    _close_out(stream)
    log.info(f"max|x| = {peak[0]:.6g} m")
    log.debug('returning')
    return EXIT_OK


def _write_outputs(result: ScanResult, config: RunConfig,
                   markers: List[Marker], log: Logger) -> None:
    stream = _open_out(config.out)
    write_scan_csv(result, stream)
    _close_out(stream)
    if config.out:
        log.info(f"Wrote {config.out}")

    if config.svg:
        table = ScanTable(result.kind, dict(result.provenance),
                          scan_dataframe(result))
        with open(config.svg, 'w', newline='') as f:
            f.write(render_svg(table, SvgStyle(markers=tuple(markers))))
        log.info(f"Wrote {config.svg}")


def cmd_stability_scan(config: RunConfig, log: Logger) -> int:
    """
    ``(a, q)`` stability scan written as CSV (and SVG with ``--svg``).
    ``--baseline`` also runs the lambda = 0 scan and logs the cell
    differences.

    :param config: Run configuration
    :param log: File and/or stdout logging

    :return: Exit code
    """
    log.debug('entered')
    scan_kw = dict(omega=config.mathieu.omega, policy=config.policy,
                   settings=config.settings, method=config.method,
                   threads=config.threads, n_periods=config.n_periods,
                   growth_limit=config.growth_limit, log=log)
    result = scan_aq(config.stability_grid, config.csl, **scan_kw)

    if config.baseline:
        log.info("Running lambda = 0 baseline scan")
        baseline = scan_aq(config.stability_grid,
                           replace(config.csl, collapse_rate=0.0), **scan_kw)
        compare_scans(baseline, result, log=log)

    _write_outputs(result, config, config.markers, log)
    log.debug('returning')
    return EXIT_OK


def cmd_exclusion_scan(config: RunConfig, log: Logger) -> int:
    """
    ``(r_c, lambda)`` exclusion map of the configured reference point,
    written as CSV (and SVG with GRW and Adler markers with ``--svg``)

    :param config: Run configuration
    :param log: File and/or stdout logging

    :raises PreconditionError: reference point unstable without CSL

    :return: Exit code
    """
    log.debug('entered')
    p = config.mathieu
    result = scan_exclusion(float(p.a), float(p.q), p.omega,
                            config.exclusion_grid, config.policy,
                            config.settings, config.method,
                            radius=float(config.csl.radius),
                            shape_mode=config.csl.shape_mode,
                            threads=config.threads, n_periods=config.n_periods,
                            growth_limit=config.growth_limit, log=log)
    _write_outputs(result, config, benchmark_markers() + config.markers, log)
    log.debug('returning')
    return EXIT_OK


def cmd_render(input_file: str, style: SvgStyle, out: Optional[str],
               log: Logger) -> int:
    """
    Render a scan CSV as SVG

    :param input_file: Scan CSV
    :param style: Size, colours and markers
    :param out: SVG path; ``None`` writes to stdout
    :param log: File and/or stdout logging

    :raises ConfigError: malformed CSV

    :return: Exit code
    """
    log.debug('entered')
    table = read_scan_csv(input_file)
    markers = list(style.markers)
    if table.kind is ScanKind.EXCLUSION:
        markers = benchmark_markers() + markers
    svg = render_svg(table, replace(style, markers=tuple(markers)))

    stream = _open_out(out)
    stream.write(svg)
    _close_out(stream)
    if out:
        log.info(f"Wrote {out}")
    log.debug('returning')
    return EXIT_OK


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config', help='INI configuration file')
    parser.add_argument('--a', type=float, help='Mathieu parameter a')
    parser.add_argument('--q', type=float, help='Mathieu parameter q')
    parser.add_argument('--omega', type=float,
                        help='RF frequency; rad/s unless --hz')
    parser.add_argument('--hz', action='store_true',
                        help='--omega is given in Hz')
    parser.add_argument('--angular', dest='hz', action='store_false',
                        help='--omega is given in rad/s (default)')
    parser.add_argument('--lambda', dest='collapse_rate', type=float,
                        help='CSL collapse rate in 1/s')
    parser.add_argument('--rc', type=float, help='CSL correlation length in m')
    parser.add_argument('--rc-cm', type=float,
                        help='CSL correlation length in cm')
    parser.add_argument('--radius', type=float, help='Particle radius in m')
    parser.add_argument('--shape-factor', choices=['unit', 'computed'])
    parser.add_argument('--method', choices=['trace', 'trace-forced', 'bounded'])
    parser.add_argument('--t-start', type=float, help='Window start in s')
    parser.add_argument('--ic-scale-x', type=float, help='x_c in m')
    parser.add_argument('--ic-scale-v', type=float, help='v_c in m/s')
    parser.add_argument('--n-periods', type=int,
                        help='Periods followed by --method bounded')
    parser.add_argument('--growth-limit', type=float,
                        help='Escape threshold of --method bounded')
    parser.add_argument('--rel-tol', type=float, help='Integrator relative tolerance')
    parser.add_argument('--dc-voltage', type=float, help='Trap dc voltage U in V')
    parser.add_argument('--ac-amplitude', type=float, help='Trap RF amplitude V in V')
    parser.add_argument('--r0', type=float, help='Trap radius r0 in m')
    parser.add_argument('--charge', type=float, help='Ion charge in C')
    parser.add_argument('--mass', type=float, help='Ion mass in kg')
    parser.add_argument('--threads', type=int,
                        help=f'Worker processes (fallback: {THREADS_ENV})')
    parser.add_argument('--out', help='Data output path (default: stdout)')
    parser.add_argument('--svg', help='SVG output path')
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog=CODE_NAME,
        description='Floquet stability of a Paul trap with CSL forcing')
    parser.add_argument('--version', action='version',
                        version=f'{CODE_NAME} {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('trap-params', parents=[common],
                   help='Print Mathieu parameters and Dehmelt index')

    trajectory = sub.add_parser('trajectory', parents=[common],
                                help='Integrate one trajectory to NDJSON')
    trajectory.add_argument('--periods', type=float, help='Length in RF periods')
    trajectory.add_argument('--n-samples', type=int, help='Sampling intervals')
    trajectory.add_argument('--x0', type=float, help='Initial position in m')
    trajectory.add_argument('--v0', type=float, help='Initial velocity in m/s')

    for name, text in (('stability-scan', '(a, q) stability scan to CSV'),
                       ('exclusion-scan', '(r_c, lambda) exclusion map to CSV')):
        scan = sub.add_parser(name, parents=[common], help=text)
        for flag in GRID_FLAGS:
            kind = int if flag in ('nx', 'ny') else float
            scan.add_argument(f"--{flag.replace('_', '-')}", type=kind)
        scan.add_argument('--marker', action='append', default=[],
                          help='Extra SVG marker LABEL,X,Y (repeatable)')
    sub.choices['stability-scan'].add_argument(
        '--baseline', action='store_true',
        help='Also scan lambda = 0 and report differing cells')

    render = sub.add_parser('render', help='Render a scan CSV as SVG')
    render.add_argument('input', help='Scan CSV file')
    render.add_argument('--out', help='SVG output path (default: stdout)')
    render.add_argument('--svg', help='Alias of --out')
    render.add_argument('--width', type=int, default=800)
    render.add_argument('--height', type=int, default=600)
    render.add_argument('--marker', action='append', default=[],
                        help='Marker LABEL,X,Y (repeatable)')
    return parser


def vargs_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Command-line overrides keyed by ``section.option``

    :raises ConfigError: both ``--rc`` and ``--rc-cm``
    """
    given = vars(args)
    vargs: Dict[str, Any] = {key: given[dest] for dest, key in FLAG_KEYS.items()
                             if given.get(dest) is not None}

    if given.get('rc') is not None and given.get('rc_cm') is not None:
        raise ConfigError("give either --rc or --rc-cm, not both")
    if given.get('rc_cm') is not None:
        vargs['csl.rc_m'] = given['rc_cm'] * 1e-2

    if given.get('omega') is not None:
        vargs['mathieu.omega_rad_per_s'] = angular_frequency(given['omega'],
                                                             hz=given.get('hz', False))
        vargs['run.omega_flag'] = True

    section = {'stability-scan': 'stability_grid',
               'exclusion-scan': 'exclusion_grid'}.get(args.command)
    if section:
        for flag in GRID_FLAGS:
            if given.get(flag) is not None:
                vargs[f'{section}.{flag}'] = given[flag]

    vargs['run.threads_flag'] = given.get('threads')
    if given.get('baseline'):
        vargs['run.baseline'] = True
    return vargs


def _is_negative_number(token: str) -> bool:
    if not token.startswith('-'):
        return False
    try:
        float(token)
    except ValueError:
        return False
    return True


def join_negative_values(argv: List[str]) -> List[str]:
    """
    Rewrite ``--flag -6e-4`` as ``--flag=-6e-4``

    argparse only accepts plain negative numbers such as ``-6`` as option
    values; exponent forms would otherwise be read as unknown options.
    """
    joined: List[str] = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if token.startswith('--') and '=' not in token and \
                i + 1 < len(argv) and _is_negative_number(argv[i + 1]):
            joined.append(f'{token}={argv[i + 1]}')
            i += 2
        else:
            joined.append(token)
            i += 1
    return joined


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the command and map failures to exit codes

    Settings merge built-in defaults, then the ``--config`` INI file, then the
    flags. Exit codes: 0 success, 2 configuration or domain error, 3
    integration failure, 4 physics precondition failure.

    :param argv: Arguments without the program name. Default: ``sys.argv[1:]``

    :return: Exit code
    """
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(join_negative_values(argv))

    to_stdout = args.command == 'trap-params' or \
        (args.out is None and not (args.command == 'render' and args.svg))
    log = null_log() if to_stdout else log_stdout()

    try:
        if args.command == 'render':
            markers = tuple(Marker.parse(text) for text in args.marker)
            style = SvgStyle(width=args.width, height=args.height,
                             markers=markers)
            out = args.out or args.svg
            _check_writable(out)
            return cmd_render(args.input, style, out, log)

        config_dict = dict_load(args.config, vargs=vargs_from_args(args),
                                defaults=DEFAULTS)
        config_dict['run.markers'] = args.marker if hasattr(args, 'marker') else []
        config = RunConfig.from_dict(config_dict, command=args.command)

        commands = {'trap-params': cmd_trap_params,
                    'trajectory': cmd_trajectory,
                    'stability-scan': cmd_stability_scan,
                    'exclusion-scan': cmd_exclusion_scan}
        return commands[args.command](config, log)
    except PreconditionError as err:
        sys.stderr.write(f"{CODE_NAME}: {err}\n")
        return EXIT_PRECONDITION
    except (ConfigError, DomainError, BracketError) as err:
        sys.stderr.write(f"{CODE_NAME}: {err}\n")
        return EXIT_CONFIG
    except IntegrationError as err:
        sys.stderr.write(f"{CODE_NAME}: integration failed: {err}\n")
        return EXIT_NUMERIC
