from dataclasses import dataclass, replace
from enum import Enum
from functools import partial
from logging import Logger
from typing import Optional, Tuple

import numpy as np

from redata.commons.logger import log_stdout

from .commons import DomainError
from .dynamics import CslMathieuSystem, rhs_csl, rhs_homogeneous
from .integrator import IntegratorSettings, integrate_batch
from .params import ArrayLike

STABILITY_LIMIT = 2.0


class Classification(Enum):
    STABLE = 'Stable'
    UNSTABLE = 'Unstable'


class Method(Enum):
    TRACE_CRITERION = 'TraceCriterion'
    BOUNDEDNESS = 'Boundedness'


class Construction(Enum):
    """
    ``HOMOGENEOUS`` uses fundamental solutions of the bare Mathieu equation,
    so ``det M = 1`` whatever the collapse parameters. ``PAPER_FORCED`` solves
    the full equation including the CSL force; ``M`` then depends on the
    window start and on the initial-condition scales.
    """
    HOMOGENEOUS = 'homogeneous'
    PAPER_FORCED = 'paper-forced'


@dataclass(frozen=True)
class TransferMatrix:
    """
    Map of ``(x, v)`` across one RF period

    :ivar m11: dimensionless
    :ivar m12: s
    :ivar m21: 1/s
    :ivar m22: dimensionless
    """
    m11: ArrayLike
    m12: ArrayLike
    m21: ArrayLike
    m22: ArrayLike

    @classmethod
    def from_array(cls, arr: np.ndarray) -> 'TransferMatrix':
        return cls(float(arr[0, 0]), float(arr[0, 1]),
                   float(arr[1, 0]), float(arr[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]],
                        dtype=float)

    @property
    def trace(self) -> ArrayLike:
        return self.m11 + self.m22

    @property
    def half_trace(self) -> ArrayLike:
        return 0.5 * self.trace

    @property
    def det(self) -> ArrayLike:
        return self.m11 * self.m22 - self.m12 * self.m21

    def __matmul__(self, other: 'TransferMatrix') -> 'TransferMatrix':
        return TransferMatrix.from_array(self.as_array() @ other.as_array())

    def power(self, n: int) -> 'TransferMatrix':
        return TransferMatrix.from_array(np.linalg.matrix_power(self.as_array(), n))


@dataclass(frozen=True)
class StabilityVerdict:
    """
    :ivar trace: ``Tr M``
    :ivar s_half_trace: ``Tr M / 2``
    :ivar eig_moduli: ``(|lambda_1|, |lambda_2|)``
    :ivar classification: ``Stable`` or ``Unstable``
    :ivar method: ``TraceCriterion`` or ``Boundedness``
    :ivar det: ``det M``, a diagnostic for the forced construction
    :ivar growth: ``max|x| / x_c`` (``Boundedness`` only)
    """
    trace: float
    s_half_trace: float
    eig_moduli: Tuple[float, float]
    classification: Classification
    method: Method
    det: float = float('nan')
    growth: Optional[float] = None

    @property
    def stable(self) -> bool:
        return self.classification is Classification.STABLE


@dataclass(frozen=True)
class MonodromyPolicy:
    """
    Placement and initial conditions of the two fundamental solutions

    :ivar t_start: Window start in s. ``None``: one RF period
    :ivar ic_scale_x: ``x_c`` in m, initial position of ``u1 = (x_c, 0)``
    :ivar ic_scale_v: ``v_c`` in m/s, initial velocity of ``u2 = (0, v_c)``.
          ``None``: ``x_c * omega``
    :ivar construction: ``HOMOGENEOUS`` or ``PAPER_FORCED``
    """
    t_start: Optional[float] = None
    ic_scale_x: float = 1e-6
    ic_scale_v: Optional[float] = None
    construction: Construction = Construction.HOMOGENEOUS

    def __post_init__(self):
        if self.t_start is not None and self.t_start < 0:
            raise DomainError(f"t_start must be non-negative, got {self.t_start}")
        if not self.ic_scale_x > 0:
            raise DomainError("ic_scale_x must be positive")
        if self.ic_scale_v is not None and not self.ic_scale_v > 0:
            raise DomainError("ic_scale_v must be positive")

    def start_time(self, period: float) -> float:
        return period if self.t_start is None else float(self.t_start)

    def velocity_scale(self, omega: float) -> float:
        if self.ic_scale_v is None:
            return self.ic_scale_x * omega
        return float(self.ic_scale_v)

    def forced(self, sys: CslMathieuSystem) -> bool:
        """Whether the CSL force enters the fundamental solutions"""
        return self.construction is Construction.PAPER_FORCED and \
            not sys.csl.is_null


def _batch_size(sys: CslMathieuSystem) -> int:
    shape = np.broadcast(np.asarray(sys.mathieu.a), np.asarray(sys.mathieu.q),
                         np.asarray(sys.csl.collapse_rate),
                         np.asarray(sys.csl.correlation_length),
                         np.asarray(sys.csl.radius)).shape
    return shape[0] if shape else 1


def _is_scalar(sys: CslMathieuSystem) -> bool:
    return all(np.ndim(value) == 0 for value in
               (sys.mathieu.a, sys.mathieu.q, sys.csl.collapse_rate,
                sys.csl.correlation_length, sys.csl.radius))


def _rhs(sys: CslMathieuSystem, forced: bool):
    if forced:
        return partial(rhs_csl, sys=sys)
    return partial(rhs_homogeneous, p=sys.mathieu)


def _check_start(sys: CslMathieuSystem, start: float, forced: bool) -> None:
    if forced and not start > 0:
        raise DomainError("forced construction with lambda > 0 needs t_start > 0")


def transfer_batch(sys: CslMathieuSystem, policy: MonodromyPolicy,
                   settings: IntegratorSettings,
                   start: Optional[float] = None) -> Tuple[np.ndarray, ...]:
    """
    Transfer matrix entries of every system in a batch

    :param start: Window start in s. Default: ``policy.start_time(T)``

    :return: ``(m11, m12, m21, m22)``, each of shape ``(n,)``
    """
    p = sys.mathieu
    period = p.period
    if start is None:
        start = policy.start_time(period)
    forced = policy.forced(sys)
    _check_start(sys, start, forced)

    x_c = policy.ic_scale_x
    v_c = policy.velocity_scale(p.omega)
    if not x_c * v_c > 0:
        raise DomainError("singular initial matrix")

    n = _batch_size(sys)
    x0 = np.tile([[x_c, 0.0]], (n, 1))
    v0 = np.tile([[0.0, v_c]], (n, 1))
    x, v, _ = integrate_batch(_rhs(sys, forced), start, x0, v0, start + period,
                              settings.for_period(period))

    return x[:, 0] / x_c, x[:, 1] / v_c, v[:, 0] / x_c, v[:, 1] / v_c


def transfer_matrix(sys: CslMathieuSystem,
                    policy: Optional[MonodromyPolicy] = None,
                    settings: Optional[IntegratorSettings] = None) \
        -> TransferMatrix:
    """
    Integrate ``u1`` from ``(x_c, 0)`` and ``u2`` from ``(0, v_c)`` over
    ``[t_start, t_start + T]`` and assemble
    ``M = [[x1/x_c, x2/v_c], [v1/x_c, v2/v_c]]``.

    The bare Mathieu right-hand side is used for the ``HOMOGENEOUS``
    construction and whenever ``lambda = 0``.

    Usage:

    .. highlight:: python
    .. code-block:: python

        from trapstab import floquet, dynamics, params
        sys = dynamics.CslMathieuSystem(params.MathieuParams(0.2, 0.0, 1e8))
        M = floquet.transfer_matrix(sys)
        floquet.classify(M).classification  # Classification.STABLE

    :param sys: Trap axis and CSL parameters
    :param policy: Window and initial conditions. Default: ``MonodromyPolicy()``
    :param settings: Error control. Default: ``IntegratorSettings()``

    :raises DomainError: forced construction with ``t_start = 0``
    :raises IntegrationError: propagated from the integrator

    :return: ``TransferMatrix`` (array-valued for batched systems)
    """
    policy = policy or MonodromyPolicy()
    settings = settings or IntegratorSettings()

    entries = transfer_batch(sys, policy, settings)
    if _is_scalar(sys):
        entries = tuple(float(e[0]) for e in entries)
    return TransferMatrix(*entries)


def eigenvalues(M: TransferMatrix) -> Tuple[complex, complex]:
    """
    Roots of ``lambda^2 - 2 s lambda + det M = 0`` with ``s = Tr M / 2``:
    ``s +/- i sqrt(det - s^2)`` for a complex pair, otherwise the real pair
    computed without cancellation.

    :param M: Transfer matrix (scalar entries)

    :return: ``(lambda_1, lambda_2)``
    """
    s = float(M.half_trace)
    det = float(M.det)
    disc = s * s - det
    root = np.sqrt(abs(disc))

    if disc < 0:
        return complex(s, root), complex(s, -root)

    r1 = s + (root if s >= 0 else -root)
    r2 = det / r1 if r1 != 0 else 0.0
    return complex(r1), complex(r2)


def trace_stable(trace: ArrayLike) -> ArrayLike:
    """``|Tr M| <= 2``; the boundary itself counts as stable"""
    return np.abs(trace) <= STABILITY_LIMIT


def classify(M: TransferMatrix) -> StabilityVerdict:
    """
    Trace criterion: Stable iff ``|m11 + m22| <= 2``

    :param M: Transfer matrix (scalar entries)

    :return: ``StabilityVerdict`` with ``method = TraceCriterion``
    """
    trace = float(M.trace)
    lam1, lam2 = eigenvalues(M)
    classification = Classification.STABLE if trace_stable(trace) \
        else Classification.UNSTABLE
    return StabilityVerdict(trace=trace, s_half_trace=0.5 * trace,
                            eig_moduli=(abs(lam1), abs(lam2)),
                            classification=classification,
                            method=Method.TRACE_CRITERION,
                            det=float(M.det))


def floquet_exponent(M: TransferMatrix) -> complex:
    """
    Characteristic exponent ``mu`` with ``lambda_1 = exp(i pi mu)``
    for stable matrices. Stable points give a real ``mu``, the numerical
    counterpart of the Dehmelt index; unstable points pick up an imaginary
    part.

    :param M: Transfer matrix (scalar entries)
    """
    lam1, _ = eigenvalues(M)
    return complex(np.log(complex(lam1)) / (1j * np.pi))


def multi_period_transfer(sys: CslMathieuSystem,
                          policy: Optional[MonodromyPolicy] = None,
                          n: int = 1,
                          settings: Optional[IntegratorSettings] = None) \
        -> TransferMatrix:
    """
    Transfer matrix over ``n`` periods: ``M^n`` for the homogeneous
    construction, the product ``M_n ... M_1`` of consecutive windows for the
    forced one

    :param sys: Trap axis and CSL parameters (scalar)
    :param policy: Window and initial conditions
    :param n: Number of periods, at least 1
    :param settings: Error control

    :raises DomainError: ``n < 1``
    :raises IntegrationError: propagated from the integrator
    """
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    policy = policy or MonodromyPolicy()
    settings = settings or IntegratorSettings()

    if policy.construction is Construction.HOMOGENEOUS:
        return transfer_matrix(sys, policy, settings).power(n)

    period = sys.mathieu.period
    start = policy.start_time(period)
    product = np.eye(2)
    for k in range(n):
        window = transfer_batch(sys, policy, settings, start=start + k * period)
        m11, m12, m21, m22 = (float(e[0]) for e in window)
        M_k = np.array([[m11, m12], [m21, m22]])
        product = M_k @ product
    return TransferMatrix.from_array(product)


def boundedness_batch(sys: CslMathieuSystem, policy: MonodromyPolicy,
                      n_periods: int, growth_limit: float,
                      settings: IntegratorSettings) -> np.ndarray:
    """
    ``max|x| / x_c`` of the solution started at ``(x_c, 0)`` over
    ``n_periods`` periods of the full equation. Systems stop being advanced
    once they exceed ``growth_limit``.

    :return: Growth per system, shape ``(n,)``
    """
    p = sys.mathieu
    period = p.period
    start = policy.start_time(period)
    forced = not sys.csl.is_null
    _check_start(sys, start, forced)

    n = _batch_size(sys)
    x_c = policy.ic_scale_x
    x = np.full((n, 1), x_c)
    v = np.zeros((n, 1))
    h = np.full(n, period / 100.0)
    peak = np.full(n, x_c)
    alive = np.ones(n, dtype=bool)
    window_settings = settings.for_period(period)

    for k in range(n_periods):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        sub = _subset(sys, idx, n)
        local_peak = peak[idx].copy()

        def observer(t, xs, vs, accepted):
            np.maximum(local_peak, np.where(accepted, np.abs(xs[:, 0]), 0.0),
                       out=local_peak)

        t0 = start + k * period
        x_new, v_new, h_new = integrate_batch(_rhs(sub, forced), t0, x[idx], v[idx],
                                              t0 + period, window_settings,
                                              observer=observer,
                                              first_step=h[idx])
        x[idx], v[idx], h[idx] = x_new, v_new, h_new
        peak[idx] = local_peak
        alive &= peak <= growth_limit * x_c

    return peak / x_c


def _take(value: ArrayLike, idx: np.ndarray, n: int) -> ArrayLike:
    if np.ndim(value) == 0:
        return value
    return np.broadcast_to(value, (n, 1))[idx]


def _subset(sys: CslMathieuSystem, idx: np.ndarray, n: int) -> CslMathieuSystem:
    if _is_scalar(sys) or idx.size == n:
        return sys
    mathieu = replace(sys.mathieu, a=_take(sys.mathieu.a, idx, n),
                      q=_take(sys.mathieu.q, idx, n))
    csl = replace(sys.csl,
                  collapse_rate=_take(sys.csl.collapse_rate, idx, n),
                  correlation_length=_take(sys.csl.correlation_length, idx, n),
                  radius=_take(sys.csl.radius, idx, n))
    return replace(sys, mathieu=mathieu, csl=csl)


def empirical_boundedness(sys: CslMathieuSystem,
                          policy: Optional[MonodromyPolicy] = None,
                          n_periods: int = 1000,
                          growth_limit: float = 1e3,
                          settings: Optional[IntegratorSettings] = None,
                          log: Optional[Logger] = None) -> StabilityVerdict:
    """
    Integrate the full equation from ``(x_c, 0)`` at ``t_start`` over
    ``n_periods`` periods. Unstable iff ``max|x| > growth_limit * x_c``.

    The verdict also carries the trace of the one-period transfer matrix
    under the same policy.

    :param sys: Trap axis and CSL parameters (scalar)
    :param policy: Window start and ``x_c``
    :param n_periods: Periods to follow, at least 1
    :param growth_limit: Escape threshold relative to ``x_c``, above 1
    :param settings: Error control
    :param log: File and/or stdout logging. Default: ``log_stdout``

    :raises DomainError: ``n_periods < 1`` or ``growth_limit <= 1``
    :raises IntegrationError: propagated from the integrator

    :return: ``StabilityVerdict`` with ``method = Boundedness``
    """
    if log is None:
        log = log_stdout()
    if n_periods < 1:
        raise DomainError(f"n_periods must be at least 1, got {n_periods}")
    if not growth_limit > 1:
        raise DomainError(f"growth_limit must exceed 1, got {growth_limit}")
    policy = policy or MonodromyPolicy()
    settings = settings or IntegratorSettings()

    log.debug('entered')
    growth = float(boundedness_batch(sys, policy, n_periods, growth_limit,
                                     settings)[0])
    log.debug(f"max|x|/x_c = {growth:.6g} over {n_periods} periods")

    trace_verdict = classify(transfer_matrix(sys, policy, settings))
    classification = Classification.STABLE if growth <= growth_limit \
        else Classification.UNSTABLE

    log.debug('returning')
    return replace(trace_verdict, classification=classification,
                   method=Method.BOUNDEDNESS, growth=growth)
