from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from math import factorial
from typing import NamedTuple, Tuple

import numpy as np

from .commons import DomainError
from .params import ArrayLike, MathieuParams, PhysicalConstants

# Shape factor: the series branch covers R/r_c below this ratio
SERIES_MAX_RATIO = 1.0

# f(eps) = sum_k c_k eps^k with eps = R^2/r_c^2
_SERIES_COEFFS = np.array([6.0 * (-1) ** k * (k + 1) / factorial(k + 3)
                           for k in range(20)])

GRW_RATE = 1e-17
ADLER_RATE = 1e-8
BENCHMARK_RC = 1e-7


class ShapeMode(Enum):
    """How the shape factor ``f(R/r_c)`` enters the CSL terms"""
    UNIT = 'unit'
    COMPUTED = 'computed'


class State(NamedTuple):
    """
    Phase-space point of one trap axis. Fields may be arrays of matching
    shape when many systems are advanced together.

    :ivar x: Position in m
    :ivar v: Velocity in m/s
    :ivar t: Time in s
    """
    x: ArrayLike
    v: ArrayLike
    t: ArrayLike


@dataclass(frozen=True)
class CslParams:
    """
    Collapse-model parameters

    :ivar collapse_rate: ``lambda`` in 1/s; zero reproduces the bare trap
    :ivar correlation_length: ``r_c`` in m
    :ivar radius: Particle radius ``R`` in m
    :ivar shape_mode: ``UNIT`` fixes ``f = 1`` whatever ``R`` is
    """
    collapse_rate: ArrayLike = 0.0
    correlation_length: ArrayLike = BENCHMARK_RC
    radius: ArrayLike = BENCHMARK_RC
    shape_mode: ShapeMode = ShapeMode.UNIT

    def __post_init__(self):
        if np.any(np.asarray(self.collapse_rate) < 0):
            raise DomainError("collapse rate must be non-negative")
        if not np.all(np.asarray(self.correlation_length) > 0):
            raise DomainError("correlation length r_c must be positive")
        if not np.all(np.asarray(self.radius) > 0):
            raise DomainError("radius R must be positive")

    @classmethod
    def grw(cls, **kwargs) -> 'CslParams':
        """GRW benchmark: lambda = 1e-17 /s, r_c = 1e-7 m"""
        return cls(collapse_rate=GRW_RATE, correlation_length=BENCHMARK_RC,
                   **kwargs)

    @classmethod
    def adler(cls, **kwargs) -> 'CslParams':
        """Adler benchmark: lambda = 1e-8 /s, r_c = 1e-7 m"""
        return cls(collapse_rate=ADLER_RATE, correlation_length=BENCHMARK_RC,
                   **kwargs)

    @cached_property
    def is_null(self) -> bool:
        return bool(np.all(np.asarray(self.collapse_rate) == 0))

    def shape_factor(self) -> ArrayLike:
        if self.shape_mode is ShapeMode.UNIT:
            return 1.0
        return shape_factor(self.radius, self.correlation_length)


@dataclass(frozen=True)
class CslMathieuSystem:
    """
    One trap axis subject to the effective CSL force

    :ivar mathieu: Trap axis parameters
    :ivar csl: Collapse-model parameters
    :ivar constants: hbar and m0
    """
    mathieu: MathieuParams
    csl: CslParams = field(default_factory=CslParams)
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    @cached_property
    def csl_coefficient(self) -> ArrayLike:
        """``C = hbar sqrt(lambda f) / (m0 r_c sqrt(6))`` in m/s^(3/2)"""
        return self.constants.hbar_over_m0 / self.csl.correlation_length * \
            np.sqrt(self.csl.collapse_rate * self.csl.shape_factor() / 6.0)


def shape_factor_closed_form(ratio: ArrayLike) -> ArrayLike:
    """
    ``f = 6 (r_c/R)^4 [1 - 2 r_c^2/R^2 + (1 + 2 r_c^2/R^2) exp(-R^2/r_c^2)]``
    evaluated literally. Loses accuracy for ``R/r_c`` well below 1.

    :param ratio: ``R / r_c``
    """
    eps = np.square(ratio)
    inv = 1.0 / eps
    return 6.0 * inv ** 2 * (1.0 - 2.0 * inv + (1.0 + 2.0 * inv) * np.exp(-eps))


def _shape_factor_series(ratio: ArrayLike) -> ArrayLike:
    eps = np.square(ratio)
    total = np.zeros_like(eps, dtype=float)
    for coeff in _SERIES_COEFFS[::-1]:
        total = total * eps + coeff
    return total


def shape_factor(radius: ArrayLike, correlation_length: ArrayLike) -> ArrayLike:
    """
    Shape factor ``f(R/r_c)`` of a homogeneous sphere. ``f -> 1`` as
    ``R/r_c -> 0`` and ``f(1) = 6 (3/e - 1)``.

    :param radius: Sphere radius ``R`` in m
    :param correlation_length: ``r_c`` in m

    :raises DomainError: non-positive input

    :return: ``f``
    """
    radius = np.asarray(radius, dtype=float)
    correlation_length = np.asarray(correlation_length, dtype=float)
    if not (np.all(radius > 0) and np.all(correlation_length > 0)):
        raise DomainError("shape factor needs R > 0 and r_c > 0")

    ratio = np.atleast_1d(radius / correlation_length)
    f = np.empty_like(ratio)
    small = ratio < SERIES_MAX_RATIO
    f[small] = _shape_factor_series(ratio[small])
    f[~small] = shape_factor_closed_form(ratio[~small])

    if np.ndim(radius / correlation_length) == 0:
        return float(f[0])
    return f.reshape(np.shape(radius / correlation_length))


def csl_rms_displacement(t: ArrayLike, sys: CslMathieuSystem) -> ArrayLike:
    """
    rms CSL diffusion ``(hbar/(m0 r_c)) sqrt(lambda f / 6) t^(3/2)``

    :param t: Elapsed time(s) in s, non-negative
    :param sys: System providing the CSL parameters

    :raises DomainError: negative ``t``

    :return: Displacement in m
    """
    if np.any(np.asarray(t) < 0):
        raise DomainError("rms displacement needs t >= 0")
    return sys.csl_coefficient * np.power(t, 1.5)


def csl_acceleration(t: ArrayLike, sys: CslMathieuSystem) -> ArrayLike:
    """
    Effective CSL force per unit mass,
    ``C [(3/4) t^(-1/2) - (omega^2/4) (a + 2 q cos(omega t)) t^(3/2)]``

    :param t: Time(s) in s, strictly positive
    :param sys: System providing trap and CSL parameters

    :raises DomainError: ``t <= 0``; integration has to start at ``t > 0``

    :return: Acceleration in m/s^2
    """
    if np.any(np.asarray(t) <= 0):
        raise DomainError("CSL force is singular at t <= 0; "
                          "start the integration at t_start > 0")
    p = sys.mathieu
    stiffness = 0.25 * p.omega ** 2 * (p.a + 2.0 * p.q * np.cos(p.omega * t))
    return sys.csl_coefficient * \
        (0.75 / np.sqrt(t) - stiffness * np.power(t, 1.5))


def rhs_homogeneous(s: State, p: MathieuParams) -> Tuple[ArrayLike, ArrayLike]:
    """
    ``x'' = -(omega^2/4) (a + 2 q cos(omega t)) x`` as a first-order system

    :param s: Current state
    :param p: Mathieu parameters

    :return: ``(dx/dt, dv/dt)``
    """
    stiffness = 0.25 * p.omega ** 2 * (p.a + 2.0 * p.q * np.cos(p.omega * s.t))
    return s.v, -stiffness * s.x


def rhs_csl(s: State, sys: CslMathieuSystem) -> Tuple[ArrayLike, ArrayLike]:
    """
    Homogeneous right-hand side plus the state-independent CSL forcing.
    With ``lambda = 0`` the result is :func:`rhs_homogeneous` itself.

    :param s: Current state, ``s.t > 0`` when ``lambda > 0``
    :param sys: Trap axis with CSL parameters

    :raises DomainError: ``t <= 0`` with ``lambda > 0``

    :return: ``(dx/dt, dv/dt)``
    """
    dx, dv = rhs_homogeneous(s, sys.mathieu)
    if sys.csl.is_null:
        return dx, dv
    return dx, dv + csl_acceleration(s.t, sys)
