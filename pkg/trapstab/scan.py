from dataclasses import dataclass, field, replace
from enum import Enum
from logging import Logger
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from redata.commons.logger import log_stdout

from . import TimerClass, __version__
from .commons import (BracketError, ConfigError, IntegrationError,
                      PreconditionError, as_column, format_float)
from .dynamics import CslMathieuSystem, CslParams, ShapeMode
from .floquet import (Classification, Construction, MonodromyPolicy,
                      boundedness_batch, classify, trace_stable,
                      transfer_batch, transfer_matrix)
from .integrator import IntegratorSettings
from .params import MathieuParams

FLAG_INTEGRATION_ERROR = 'integration_error'


class Scale(Enum):
    LINEAR = 'linear'
    LOG10 = 'log10'


class ScanKind(Enum):
    STABILITY = 'stability'
    EXCLUSION = 'exclusion'


class ScanMethod(Enum):
    """
    ``trace``: homogeneous monodromy; ``trace-forced``: monodromy of the full
    forced equation; ``bounded``: empirical boundedness of the forced equation
    """
    TRACE = 'trace'
    TRACE_FORCED = 'trace-forced'
    BOUNDED = 'bounded'

    @property
    def construction(self) -> Construction:
        if self is ScanMethod.TRACE:
            return Construction.HOMOGENEOUS
        return Construction.PAPER_FORCED


@dataclass(frozen=True)
class GridSpec:
    """
    Cell-centred grid. Axis values are the plain coordinate for ``LINEAR``
    axes and the decimal logarithm of the SI value for ``LOG10`` axes.

    :ivar x_min: Lower x bound
    :ivar x_max: Upper x bound
    :ivar y_min: Lower y bound
    :ivar y_max: Upper y bound
    :ivar nx: Number of cells along x, at least 2
    :ivar ny: Number of cells along y, at least 2
    :ivar x_axis: Quantity along x ('q', 'a' or 'rc')
    :ivar y_axis: Quantity along y ('a', 'q' or 'lambda')
    :ivar x_scale: ``LINEAR`` or ``LOG10``
    :ivar y_scale: ``LINEAR`` or ``LOG10``
    """
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    x_axis: str = 'q'
    y_axis: str = 'a'
    x_scale: Scale = Scale.LINEAR
    y_scale: Scale = Scale.LINEAR

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ConfigError(f"x_min must be below x_max: {self.x_min} >= {self.x_max}")
        if not self.y_min < self.y_max:
            raise ConfigError(f"y_min must be below y_max: {self.y_min} >= {self.y_max}")
        if self.nx < 2 or self.ny < 2:
            raise ConfigError(f"grids need at least 2x2 cells, got {self.nx}x{self.ny}")

    @classmethod
    def stability_default(cls) -> 'GridSpec':
        """q in [0, 1.2] along x, a in [-0.1, 0.8] along y, 600 x 600"""
        return cls(0.0, 1.2, -0.1, 0.8, 600, 600, x_axis='q', y_axis='a')

    @classmethod
    def exclusion_default(cls) -> 'GridSpec':
        """log10 r_c[m] in [-9, -3] along x, log10 lambda[1/s] in [-20, 2], 300 x 300"""
        return cls(-9.0, -3.0, -20.0, 2.0, 300, 300, x_axis='rc',
                   y_axis='lambda', x_scale=Scale.LOG10, y_scale=Scale.LOG10)

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * (self.x_max - self.x_min) / self.nx

    @property
    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * (self.y_max - self.y_min) / self.ny

    @property
    def shape(self) -> Tuple[int, int]:
        return self.nx, self.ny

    def x_values(self) -> np.ndarray:
        """Cell centres along x in SI units"""
        return _physical(self.x_centers, self.x_scale)

    def y_values(self) -> np.ndarray:
        """Cell centres along y in SI units"""
        return _physical(self.y_centers, self.y_scale)


def _physical(centers: np.ndarray, scale: Scale) -> np.ndarray:
    return np.power(10.0, centers) if scale is Scale.LOG10 else centers


@dataclass(frozen=True)
class ScanResult:
    """
    Assembled scan. Arrays have shape ``(nx, ny)`` and index ``[i, j]`` with
    ``i`` along x; they are read-only.

    :ivar spec: Grid
    :ivar kind: ``STABILITY`` or ``EXCLUSION``
    :ivar method: Criterion used for every cell
    :ivar stable: ``True`` for Stable (allowed) cells
    :ivar traces: ``Tr M`` per cell (``nan`` for failed cells)
    :ivar dets: ``det M`` per cell, a diagnostic
    :ivar failed: Cells whose integration failed (recorded Unstable)
    :ivar provenance: Parameter echo, ``str`` values in insertion order
    """
    spec: GridSpec
    kind: ScanKind
    method: ScanMethod
    stable: np.ndarray
    traces: np.ndarray
    dets: np.ndarray
    failed: np.ndarray
    provenance: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.stable, self.traces, self.dets, self.failed):
            if arr.shape != self.spec.shape:
                raise ValueError(f"array shape {arr.shape} does not match grid "
                                 f"{self.spec.shape}")
            arr.setflags(write=False)

    @property
    def verdicts(self) -> np.ndarray:
        out = np.full(self.spec.shape, Classification.UNSTABLE, dtype=object)
        out[self.stable] = Classification.STABLE
        return out

    def flags(self, i: int, j: int) -> str:
        return FLAG_INTEGRATION_ERROR if self.failed[i, j] else ''


@dataclass(frozen=True)
class _RowTask:
    """Picklable evaluation of one grid row (fixed ``y`` index)"""
    kind: ScanKind
    spec: GridSpec
    omega: float
    csl: CslParams
    policy: MonodromyPolicy
    settings: IntegratorSettings
    method: ScanMethod
    n_periods: int
    growth_limit: float
    a: float = 0.0
    q: float = 0.0

    def system(self, x: Any, y: float) -> CslMathieuSystem:
        if self.kind is ScanKind.STABILITY:
            values = {self.spec.x_axis: x, self.spec.y_axis: y}
            mathieu = MathieuParams(a=values['a'], q=values['q'], omega=self.omega)
            return CslMathieuSystem(mathieu, self.csl)
        mathieu = MathieuParams(a=self.a, q=self.q, omega=self.omega)
        csl = replace(self.csl, correlation_length=x, collapse_rate=y)
        return CslMathieuSystem(mathieu, csl)

    def evaluate(self, sys: CslMathieuSystem) -> Tuple[np.ndarray, ...]:
        policy = replace(self.policy, construction=self.method.construction)
        m11, m12, m21, m22 = transfer_batch(sys, policy, self.settings)
        trace = m11 + m22
        det = m11 * m22 - m12 * m21
        if self.method is ScanMethod.BOUNDED:
            growth = boundedness_batch(sys, policy, self.n_periods,
                                       self.growth_limit, self.settings)
            stable = growth <= self.growth_limit
        else:
            stable = trace_stable(trace)
        return stable, trace, det

    def __call__(self, j: int) -> Tuple[np.ndarray, ...]:
        xs = self.spec.x_values()
        y = float(self.spec.y_values()[j])
        nx = self.spec.nx
        failed = np.zeros(nx, dtype=bool)
        try:
            stable, trace, det = self.evaluate(self.system(as_column(xs), y))
        except IntegrationError:
            stable = np.zeros(nx, dtype=bool)
            trace = np.full(nx, np.nan)
            det = np.full(nx, np.nan)
            for i in range(nx):
                try:
                    s_i, t_i, d_i = self.evaluate(self.system(float(xs[i]), y))
                    stable[i], trace[i], det[i] = s_i[0], t_i[0], d_i[0]
                except IntegrationError:
                    failed[i] = True
        return np.asarray(stable, dtype=bool), trace, det, failed


def _run_rows(task: _RowTask, threads: int, log: Logger) -> Tuple[np.ndarray, ...]:
    ny = task.spec.ny
    shape = task.spec.shape
    stable = np.zeros(shape, dtype=bool)
    traces = np.zeros(shape)
    dets = np.zeros(shape)
    failed = np.zeros(shape, dtype=bool)

    def assemble(rows):
        step = max(round(ny / 10), 1)
        for j, (s_j, t_j, d_j, f_j) in enumerate(rows):
            stable[:, j], traces[:, j], dets[:, j], failed[:, j] = s_j, t_j, d_j, f_j
            if j % step == 0 or j == ny - 1:
                log.info(f"{round((j + 1) / ny * 100): >3}% completed ...")

    if threads > 1:
        with Pool(processes=threads) as pool:
            assemble(pool.imap(task, range(ny), chunksize=1))
    else:
        assemble(map(task, range(ny)))

    return stable, traces, dets, failed


def _provenance(**items: Any) -> Dict[str, str]:
    out = {'version': __version__}
    for key, value in items.items():
        if isinstance(value, Enum):
            value = value.value
        elif isinstance(value, float):
            value = format_float(value)
        out[key] = str(value)
    return out


def _policy_items(policy: MonodromyPolicy, settings: IntegratorSettings,
                  omega: float) -> Dict[str, Any]:
    return dict(t_start_s=policy.start_time(2.0 * np.pi / omega),
                ic_scale_x_m=policy.ic_scale_x,
                ic_scale_v_m_per_s=policy.velocity_scale(omega),
                rel_tol=settings.rel_tol, abs_tol_x_m=settings.abs_tol_x,
                abs_tol_v_m_per_s=settings.abs_tol_v)


def _log_failures(failed: np.ndarray, log: Logger) -> None:
    n_failed = int(failed.sum())
    if n_failed:
        log.warning(f"{n_failed} cell(s) failed to integrate; recorded as unstable")


def scan_aq(spec: GridSpec, csl: Optional[CslParams] = None,
            omega: float = 1e8,
            policy: Optional[MonodromyPolicy] = None,
            settings: Optional[IntegratorSettings] = None,
            method: ScanMethod = ScanMethod.TRACE_FORCED,
            threads: int = 1, n_periods: int = 1000,
            growth_limit: float = 1e3,
            log: Optional[Logger] = None) -> ScanResult:
    """
    Classify every cell centre ``(a, q)`` of a grid

    Each row of constant ``y`` is one batched integrator call. Rows are mapped
    over a ``multiprocessing.Pool`` and assembled by index, so the result does
    not depend on ``threads``.

    Usage:

    .. highlight:: python
    .. code-block:: python

        from trapstab import scan
        spec = scan.GridSpec(0.0, 1.2, -0.1, 0.8, 60, 60)
        result = scan.scan_aq(spec, threads=8)

    :param spec: Grid whose axes are ``q`` and ``a`` (either orientation)
    :param csl: Collapse parameters. Default: ``lambda = 0``
    :param omega: RF angular frequency in rad/s
    :param policy: Window and initial conditions; ``construction`` is set by
           ``method``
    :param settings: Error control. Default: ``IntegratorSettings()``
    :param method: Criterion applied to every cell
    :param threads: Worker processes; 1 evaluates in-process
    :param n_periods: Periods followed by the ``bounded`` method
    :param growth_limit: Escape threshold of the ``bounded`` method
    :param log: File and/or stdout logging. Default: ``log_stdout``

    :raises ConfigError: axes are not ``{a, q}``

    :return: ``ScanResult``; failed cells are flagged, never fatal
    """
    if log is None:
        log = log_stdout()
    if {spec.x_axis, spec.y_axis} != {'a', 'q'}:
        raise ConfigError(f"stability scans need axes a and q, got "
                          f"{spec.x_axis}, {spec.y_axis}")
    csl = csl or CslParams()
    policy = policy or MonodromyPolicy()
    settings = settings or IntegratorSettings()

    log.debug('entered')
    log.info(f"Stability scan: {spec.nx} x {spec.ny} cells, method {method.value}")

    task = _RowTask(ScanKind.STABILITY, spec, omega, csl, policy, settings,
                    method, n_periods, growth_limit)
    timer = TimerClass()
    timer._start()
    stable, traces, dets, failed = _run_rows(task, threads, log)
    timer._stop()
    log.info(timer.format)
    _log_failures(failed, log)

    provenance = _provenance(kind=ScanKind.STABILITY, method=method,
                             x_axis=spec.x_axis, y_axis=spec.y_axis,
                             omega_rad_per_s=float(omega),
                             lambda_per_s=float(csl.collapse_rate),
                             rc_m=float(csl.correlation_length),
                             radius_m=float(csl.radius),
                             shape_factor=csl.shape_mode,
                             **_policy_items(policy, settings, omega))
    log.debug('returning')
    return ScanResult(spec, ScanKind.STABILITY, method, stable, traces, dets,
                      failed, provenance)


def scan_exclusion(a: float, q: float, omega: float = 1e8,
                   spec: Optional[GridSpec] = None,
                   policy: Optional[MonodromyPolicy] = None,
                   settings: Optional[IntegratorSettings] = None,
                   method: ScanMethod = ScanMethod.TRACE_FORCED,
                   radius: float = 1e-7,
                   shape_mode: ShapeMode = ShapeMode.UNIT,
                   threads: int = 1, n_periods: int = 1000,
                   growth_limit: float = 1e3,
                   log: Optional[Logger] = None) -> ScanResult:
    """
    Classify a reference point ``(a, q)`` under every ``(r_c, lambda)`` of a
    grid. Allowed cells are the Stable ones.

    :param a: Reference ``a``
    :param q: Reference ``q``
    :param omega: RF angular frequency in rad/s
    :param spec: Grid over ``(log10 r_c, log10 lambda)``.
           Default: ``GridSpec.exclusion_default()``
    :param policy: Window and initial conditions
    :param settings: Error control
    :param method: Criterion applied to every cell
    :param radius: Particle radius in m
    :param shape_mode: Shape-factor handling
    :param threads: Worker processes
    :param n_periods: Periods followed by the ``bounded`` method
    :param growth_limit: Escape threshold of the ``bounded`` method
    :param log: File and/or stdout logging. Default: ``log_stdout``

    :raises PreconditionError: ``(a, q)`` unstable without CSL
    :raises ConfigError: axes are not ``rc`` and ``lambda`` on log scales

    :return: ``ScanResult``; the reference trace is part of the provenance
    """
    if log is None:
        log = log_stdout()
    spec = spec or GridSpec.exclusion_default()
    if (spec.x_axis, spec.y_axis) != ('rc', 'lambda') or \
            spec.x_scale is not Scale.LOG10 or spec.y_scale is not Scale.LOG10:
        raise ConfigError("exclusion scans need log10 r_c along x and "
                          "log10 lambda along y")
    policy = policy or MonodromyPolicy()
    settings = settings or IntegratorSettings()

    log.debug('entered')
    reference = classify(transfer_matrix(
        CslMathieuSystem(MathieuParams(a, q, omega)),
        replace(policy, construction=Construction.HOMOGENEOUS), settings))
    log.info(f"Reference point a={a}, q={q}: trace {reference.trace:.12g}")
    if not reference.stable:
        raise PreconditionError("reference point not stable without CSL")

    log.info(f"Exclusion scan: {spec.nx} x {spec.ny} cells, method {method.value}")
    csl = CslParams(radius=radius, shape_mode=shape_mode)
    task = _RowTask(ScanKind.EXCLUSION, spec, omega, csl, policy, settings,
                    method, n_periods, growth_limit, a=a, q=q)
    timer = TimerClass()
    timer._start()
    stable, traces, dets, failed = _run_rows(task, threads, log)
    timer._stop()
    log.info(timer.format)
    _log_failures(failed, log)

    provenance = _provenance(kind=ScanKind.EXCLUSION, method=method,
                             a=float(a), q=float(q),
                             omega_rad_per_s=float(omega),
                             radius_m=float(radius), shape_factor=shape_mode,
                             reference_trace=reference.trace,
                             **_policy_items(policy, settings, omega))

    result = ScanResult(spec, ScanKind.EXCLUSION, method, stable, traces, dets,
                        failed, provenance)
    violations = monotonicity_violations(result)
    if violations:
        log.warning(f"Excluded region not monotone in lambda for "
                    f"{len(violations)} r_c column(s)")
    log.debug('returning')
    return result


def find_boundary_q(a: float, q_lo: float, q_hi: float, omega: float = 1e8,
                    settings: Optional[IntegratorSettings] = None,
                    tol: float = 1e-6,
                    log: Optional[Logger] = None) -> float:
    """
    Bisect in ``q`` at fixed ``a`` (``lambda = 0``) for the point where the
    trace criterion changes verdict

    :param a: Fixed ``a``
    :param q_lo: One end of the bracket
    :param q_hi: Other end of the bracket
    :param omega: RF angular frequency in rad/s
    :param settings: Error control
    :param tol: Width in ``q`` at which bisection stops
    :param log: File and/or stdout logging. Default: ``log_stdout``

    :raises BracketError: empty bracket or no change of verdict

    :return: Boundary ``q*``
    """
    if log is None:
        log = log_stdout()
    if q_lo == q_hi:
        raise BracketError(f"degenerate bracket q_lo = q_hi = {q_lo}")
    settings = settings or IntegratorSettings()
    policy = MonodromyPolicy()

    def stable_at(q: float) -> bool:
        sys = CslMathieuSystem(MathieuParams(a, q, omega))
        return classify(transfer_matrix(sys, policy, settings)).stable

    s_lo = stable_at(q_lo)
    if s_lo == stable_at(q_hi):
        raise BracketError(f"no change of verdict between q={q_lo} and q={q_hi}")

    lo, hi = q_lo, q_hi
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if stable_at(mid) == s_lo:
            lo = mid
        else:
            hi = mid

    q_star = 0.5 * (lo + hi)
    log.info(f"Stability boundary at a={a}: q* = {q_star:.8f}")
    return q_star


@dataclass(frozen=True)
class ScanComparison:
    """
    :ivar differing: ``(i, j)`` cells whose verdicts differ
    :ivar adjacent: Per differing cell, whether it touches a verdict
          boundary of the reference (8-neighbourhood)
    """
    differing: List[Tuple[int, int]]
    adjacent: List[bool]

    @property
    def all_adjacent(self) -> bool:
        return all(self.adjacent)


def _boundary_cells(stable: np.ndarray) -> np.ndarray:
    nx, ny = stable.shape
    padded = np.pad(stable, 1, mode='edge')
    touching = np.zeros_like(stable)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            neighbour = padded[1 + di:1 + di + nx, 1 + dj:1 + dj + ny]
            touching |= neighbour != stable
    return touching


def compare_scans(reference: ScanResult, other: ScanResult,
                  log: Optional[Logger] = None) -> ScanComparison:
    """
    Cell-wise verdict differences between two scans of the same grid

    :param reference: Scan whose verdict boundaries define adjacency
    :param other: Scan to compare
    :param log: File and/or stdout logging. Default: ``log_stdout``

    :raises ConfigError: grids differ
    """
    if log is None:
        log = log_stdout()
    if reference.spec != other.spec:
        raise ConfigError("cannot compare scans over different grids")

    boundary = _boundary_cells(reference.stable)
    diff = reference.stable != other.stable
    cells = [(int(i), int(j)) for i, j in zip(*np.nonzero(diff))]
    adjacent = [bool(boundary[i, j]) for i, j in cells]

    log.info(f"{len(cells)} cell(s) differ from the reference scan")
    n_interior = adjacent.count(False)
    if n_interior:
        log.warning(f"{n_interior} differing cell(s) are not adjacent to a "
                    f"verdict boundary")
    return ScanComparison(cells, adjacent)


def monotonicity_violations(result: ScanResult) -> List[int]:
    """
    Columns (fixed ``r_c``, index ``i``) in which an allowed cell lies above
    an excluded one in ``lambda``

    :param result: Exclusion scan
    """
    violations = []
    for i in range(result.spec.nx):
        excluded = ~result.stable[i, :]
        if excluded.any():
            first = int(np.argmax(excluded))
            if not excluded[first:].all():
                violations.append(i)
    return violations
