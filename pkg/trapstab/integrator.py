from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .commons import (DomainError, IntegrationError, NonFiniteStateError,
                      StepUnderflowError)
from .dynamics import State

RHS = Callable[[State], Tuple[np.ndarray, np.ndarray]]
Observer = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], None]

# Dormand & Prince (1980) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# 5th order weights minus embedded 4th order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525,
      -1 / 40)

_ORDER = 5
_PI_ALPHA = 0.7 / _ORDER
_PI_BETA = 0.4 / _ORDER
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_ERR_FLOOR = 1e-4
_RESOLUTION = 16 * np.finfo(float).eps


@dataclass(frozen=True)
class IntegratorSettings:
    """
    Error control of :func:`trapstab.integrator.integrate`

    :ivar rel_tol: Relative tolerance, within ``[1e-14, 1e-2]``
    :ivar abs_tol_x: Absolute tolerance on position in m
    :ivar abs_tol_v: Absolute tolerance on velocity in m/s
    :ivar max_step: Largest step in s. Oscillatory callers cap it at a
          twentieth of the RF period (see :meth:`for_period`)
    :ivar initial_step: First trial step in s. ``None``: 1/100 of the span,
          capped by ``max_step``
    :ivar max_steps: Step budget per call
    :ivar safety: Safety factor of the step-size controller
    """
    rel_tol: float = 1e-10
    abs_tol_x: float = 1e-18
    abs_tol_v: float = 1e-12
    max_step: float = np.inf
    initial_step: Optional[float] = None
    max_steps: int = 1_000_000
    safety: float = 0.9

    def __post_init__(self):
        if not 1e-14 <= self.rel_tol <= 1e-2:
            raise DomainError(f"rel_tol must lie in [1e-14, 1e-2], got {self.rel_tol}")
        if not (self.abs_tol_x > 0 and self.abs_tol_v > 0):
            raise DomainError("absolute tolerances must be positive")
        if not self.max_step > 0:
            raise DomainError("max_step must be positive")
        if self.initial_step is not None and not self.initial_step > 0:
            raise DomainError("initial_step must be positive")
        if self.max_steps < 1:
            raise DomainError("max_steps must be at least 1")

    def for_period(self, period: float) -> 'IntegratorSettings':
        """
        Copy with ``max_step`` capped at ``period / 20`` and, unless set,
        a first trial step of ``period / 100``
        """
        initial = self.initial_step if self.initial_step is not None \
            else period / 100.0
        return replace(self, max_step=min(self.max_step, period / 20.0),
                       initial_step=initial)

    def first_step(self, span: float) -> float:
        if self.initial_step is not None:
            return min(self.initial_step, self.max_step)
        return min(abs(span) / 100.0, self.max_step)


@dataclass
class Trajectory:
    """
    Equally spaced samples of one integration

    :ivar samples: States ordered by strictly increasing time; the first
          and last match the requested span
    :ivar dense: Whether samples come from dense output (never, here)
    """
    samples: List[State] = field(default_factory=list)
    dense: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])

    @property
    def velocities(self) -> np.ndarray:
        return np.array([s.v for s in self.samples])


def _evaluate(rhs: RHS, x: np.ndarray, v: np.ndarray, t: np.ndarray,
              shape: Tuple[int, ...]) -> Tuple[np.ndarray, np.ndarray]:
    dx, dv = rhs(State(x, v, t))
    return np.broadcast_to(dx, shape), np.broadcast_to(dv, shape)


def _combine(weights: Tuple[float, ...], ks: List[np.ndarray]) -> np.ndarray:
    total = 0.0
    for w, k in zip(weights, ks):
        if w:
            total = total + w * k
    return total


def integrate_batch(rhs: RHS, t0: float, x0: np.ndarray, v0: np.ndarray,
                    t1: float, settings: Optional[IntegratorSettings] = None,
                    observer: Optional[Observer] = None,
                    first_step: Union[None, float, np.ndarray] = None) \
        -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Advance ``n`` independent systems from ``t0`` to ``t1``

    Dormand-Prince 5(4) with FSAL and a proportional-integral step controller.
    Every system keeps its own time, step size and controller history, so its
    result does not depend on which other systems share the batch.

    :param rhs: Right-hand side ``rhs(State) -> (dx/dt, dv/dt)``. It receives
           ``x``, ``v`` of shape ``(n, k)`` and ``t`` of shape ``(n, 1)``
    :param t0: Start time in s
    :param x0: Initial positions, shape ``(n, k)``
    :param v0: Initial velocities, shape ``(n, k)``
    :param t1: End time in s; ``t1 < t0`` integrates backwards
    :param settings: Error control. Default: ``IntegratorSettings()``
    :param observer: Called as ``observer(t, x, v, accepted)`` after every
           step in which at least one system advanced
    :param first_step: Trial step(s) magnitude, e.g. the last step of a
           previous segment

    :raises StepUnderflowError: step size below the time resolution
    :raises NonFiniteStateError: NaN/inf state or derivative
    :raises IntegrationError: step budget exhausted

    :return: ``(x, v, h)`` at ``t1`` and the next proposed step per system
    """
    if settings is None:
        settings = IntegratorSettings()

    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    if x.ndim != 2 or x.shape != v.shape:
        raise DomainError("batched states need matching (n, k) arrays")
    n, k = x.shape
    shape = x.shape

    span = float(t1) - float(t0)
    if first_step is None:
        first_step = settings.first_step(span) if span else settings.max_step
    h = np.broadcast_to(np.asarray(first_step, dtype=float), (n,)).copy()
    if span == 0.0:
        return x, v, h

    direction = 1.0 if span > 0 else -1.0
    t = np.full(n, float(t0))
    err_prev = np.full(n, _ERR_FLOOR)
    floor = _RESOLUTION * max(abs(t0), abs(t1))

    kx, kv = _evaluate(rhs, x, v, t[:, None], shape)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v)) and
            np.all(np.isfinite(kx)) and np.all(np.isfinite(kv))):
        raise NonFiniteStateError(f"non-finite initial state or derivative at t={t0}")

    n_steps = 0
    while True:
        remaining = direction * (t1 - t)
        active = remaining > 0
        if not active.any():
            break

        n_steps += 1
        if n_steps > settings.max_steps:
            raise IntegrationError(f"step budget of {settings.max_steps} exhausted "
                                   f"at t={t[active].min()}")

        h = np.minimum(h, settings.max_step)
        last = h >= remaining
        h_eff = np.where(active, np.where(last, remaining, h), 0.0)
        if np.any(active & ~last & (h_eff < floor)):
            raise StepUnderflowError(f"step size underflow near t={t[active].min()}")

        hs = (direction * h_eff)[:, None]
        ks_x = [kx]
        ks_v = [kv]
        for stage in range(1, 7):
            xs = x + hs * _combine(_A[stage], ks_x)
            vs = v + hs * _combine(_A[stage], ks_v)
            ts = t + direction * _C[stage] * h_eff
            kxs, kvs = _evaluate(rhs, xs, vs, ts[:, None], shape)
            ks_x.append(kxs)
            ks_v.append(kvs)

        # last stage is evaluated at the 5th order solution (FSAL)
        x_new, v_new = xs, vs
        ex = hs * _combine(_E, ks_x)
        ev = hs * _combine(_E, ks_v)

        with np.errstate(invalid='ignore', over='ignore', divide='ignore'):
            sx = settings.abs_tol_x + settings.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
            sv = settings.abs_tol_v + settings.rel_tol * np.maximum(np.abs(v), np.abs(v_new))
            err = np.sqrt((np.sum(np.square(ex / sx), axis=1) +
                           np.sum(np.square(ev / sv), axis=1)) / (2 * k))

        accept = active & (err <= 1.0)
        if accept.any() and not (np.all(np.isfinite(ks_x[-1][accept])) and
                                 np.all(np.isfinite(ks_v[-1][accept]))):
            raise NonFiniteStateError(f"non-finite derivative near t={t[accept].min()}")

        t = np.where(accept, np.where(last, t1, t + direction * h_eff), t)
        keep = accept[:, None]
        x = np.where(keep, x_new, x)
        v = np.where(keep, v_new, v)
        kx = np.where(keep, ks_x[-1], kx)
        kv = np.where(keep, ks_v[-1], kv)

        with np.errstate(invalid='ignore', over='ignore', divide='ignore'):
            err_c = np.where(np.isfinite(err), np.maximum(err, 1e-10), np.inf)
            grow = np.clip(settings.safety * err_c ** -_PI_ALPHA *
                           err_prev ** _PI_BETA, _FAC_MIN, _FAC_MAX)
            shrink = np.clip(settings.safety * err_c ** (-1.0 / _ORDER),
                             _FAC_MIN, 1.0)

        h_accept = np.where(last, np.maximum(h, h_eff * grow), h_eff * grow)
        h = np.where(active, np.where(accept, h_accept, h_eff * shrink), h)
        err_prev = np.where(accept, np.maximum(err, _ERR_FLOOR), err_prev)

        if np.any(active & ~accept & (h < floor)):
            raise StepUnderflowError(f"step size underflow near t={t[active].min()}")

        if observer is not None and accept.any():
            observer(t, x, v, accept)

    return x, v, h


def integrate(rhs: RHS, s0: State, t1: float,
              settings: Optional[IntegratorSettings] = None,
              observer: Optional[Observer] = None) -> State:
    """
    Integrate a single scalar system from ``s0`` to ``t1``

    Usage:

    .. highlight:: python
    .. code-block:: python

       from functools import partial
       rhs = partial(rhs_homogeneous, p=MathieuParams(0.2, 0.0, 2.0))
       s1 = integrate(rhs, State(x=1.0, v=0.0, t=0.0), t1=np.pi)

    :param rhs: Right-hand side ``rhs(State) -> (dx/dt, dv/dt)``
    :param s0: Initial state
    :param t1: End time in s
    :param settings: Error control. Default: ``IntegratorSettings()``
    :param observer: See :func:`trapstab.integrator.integrate_batch`

    :raises IntegrationError: see :func:`trapstab.integrator.integrate_batch`

    :return: State at ``t1``; identical inputs give bit-identical outputs
    """
    x, v, _ = integrate_batch(rhs, s0.t, [[s0.x]], [[s0.v]], t1, settings,
                              observer=observer)
    return State(float(x[0, 0]), float(v[0, 0]), float(t1))


def integrate_sampled(rhs: RHS, s0: State, t1: float, n_samples: int,
                      settings: Optional[IntegratorSettings] = None,
                      on_sample: Optional[Callable[[State], None]] = None,
                      observer: Optional[Observer] = None) -> Trajectory:
    """
    Integrate and return ``n_samples + 1`` equally spaced states

    :param rhs: Right-hand side ``rhs(State) -> (dx/dt, dv/dt)``
    :param s0: Initial state
    :param t1: End time in s, ``t1 > s0.t``
    :param n_samples: Number of sampling intervals, at least 1
    :param settings: Error control. Default: ``IntegratorSettings()``
    :param on_sample: Called with every sample as soon as it is available
    :param observer: See :func:`trapstab.integrator.integrate_batch`

    :raises DomainError: ``n_samples < 1`` or ``t1 <= s0.t``
    :raises IntegrationError: see :func:`trapstab.integrator.integrate_batch`

    :return: ``Trajectory`` with the samples
    """
    if n_samples < 1:
        raise DomainError("n_samples must be at least 1")
    if not t1 > s0.t:
        raise DomainError("sampled integration needs t1 > t0")

    times = s0.t + (t1 - s0.t) * np.arange(n_samples + 1) / n_samples
    times[-1] = t1

    first = State(float(s0.x), float(s0.v), float(s0.t))
    trajectory = Trajectory(samples=[first])
    if on_sample is not None:
        on_sample(first)

    x = np.array([[first.x]])
    v = np.array([[first.v]])
    h = None
    for t_prev, t_next in zip(times[:-1], times[1:]):
        x, v, h = integrate_batch(rhs, t_prev, x, v, t_next, settings,
                                  observer=observer, first_step=h)
        sample = State(float(x[0, 0]), float(v[0, 0]), float(t_next))
        trajectory.samples.append(sample)
        if on_sample is not None:
            on_sample(sample)

    return trajectory
