from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .commons import DomainError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PhysicalConstants:
    """
    Constants entering the CSL force

    :ivar hbar: Reduced Planck constant in J s
    :ivar m0: Reference (nucleon) mass in kg
    """
    hbar: float = 1.054571817e-34
    m0: float = 1.67262192e-27

    def __post_init__(self):
        if not (self.hbar > 0 and self.m0 > 0):
            raise DomainError("hbar and m0 must be positive")

    @property
    def hbar_over_m0(self) -> float:
        """hbar / m0 in m^2/s"""
        return self.hbar / self.m0


@dataclass(frozen=True)
class TrapConfig:
    """
    Settings of a 2D quadrupole Paul trap. A potential ``U - V cos(omega t)``
    is applied to the x electrodes and its negative to the y electrodes.

    Validation happens in :func:`trapstab.params.mathieu_from_trap`, so an
    invalid trap can be constructed (e.g. from a config file) and rejected
    there.

    :ivar dc_voltage: dc voltage ``U`` in V
    :ivar ac_amplitude: RF zero-to-peak amplitude ``V`` in V
    :ivar omega: RF angular frequency in rad/s
    :ivar r0: Centre-to-electrode distance in m
    :ivar charge: Ion charge ``Q`` in C (either sign, nonzero)
    :ivar mass: Ion mass in kg
    """
    dc_voltage: float
    ac_amplitude: float
    omega: float
    r0: float
    charge: float
    mass: float

    def check(self) -> None:
        """
        :raises DomainError: non-positive ``omega``, ``r0`` or ``mass``,
                or zero ``charge``
        """
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega}")
        if not self.r0 > 0:
            raise DomainError(f"r0 must be positive, got {self.r0}")
        if not self.mass > 0:
            raise DomainError(f"mass must be positive, got {self.mass}")
        if self.charge == 0:
            raise DomainError("charge must be nonzero")


@dataclass(frozen=True)
class MathieuParams:
    """
    Dimensionless Mathieu parameters of one trap axis together with the RF
    angular frequency that sets the time scale.

    ``a`` and ``q`` may be numpy arrays; every formula in the package
    broadcasts over them, which is how scans evaluate a whole row at once.

    :ivar a: Stability parameter ``a``
    :ivar q: Stability parameter ``q``
    :ivar omega: RF angular frequency in rad/s
    """
    a: ArrayLike
    q: ArrayLike
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega}")

    @property
    def period(self) -> float:
        """RF period ``2 pi / omega`` in s"""
        return 2.0 * np.pi / self.omega

    def xi(self, t: ArrayLike) -> ArrayLike:
        """Dimensionless Mathieu time ``omega t / 2``"""
        return 0.5 * self.omega * t

    def in_dehmelt_regime(self, ratio: float = 0.1) -> bool:
        """
        Whether ``|a| << |q| << 1`` holds, read as ``|a| <= ratio |q|`` and
        ``|q| <= ratio``. A derived predicate, never enforced.
        """
        a = np.abs(self.a)
        q = np.abs(self.q)
        return bool(np.all((a <= ratio * q) & (q <= ratio)))


def angular_frequency(value: float, hz: bool = False) -> float:
    """
    Return the RF angular frequency in rad/s

    :param value: Frequency as given
    :param hz: ``value`` is a cycle frequency in Hz. Default: rad/s
    """
    return 2.0 * np.pi * value if hz else float(value)


def mathieu_from_trap(trap: TrapConfig) -> Tuple[MathieuParams, MathieuParams]:
    """
    Convert trap settings into Mathieu parameters for both confining axes,
    ``a_x = 8 Q U / (m omega^2 r0^2)`` and ``q_x = -4 Q V / (m omega^2 r0^2)``
    with ``a_y = -a_x`` and ``q_y = -q_x``.

    :param trap: Trap settings

    :raises DomainError: non-positive ``omega``, ``r0`` or ``mass``

    :return: ``(x, y)`` Mathieu parameters
    """
    trap.check()

    scale = trap.charge / (trap.mass * trap.omega ** 2 * trap.r0 ** 2)
    a_x = 8.0 * trap.dc_voltage * scale
    q_x = -4.0 * trap.ac_amplitude * scale

    x = MathieuParams(a=a_x, q=q_x, omega=trap.omega)
    y = MathieuParams(a=-a_x, q=-q_x, omega=trap.omega)
    return x, y


def trap_voltages(p: MathieuParams, r0: float, charge: float,
                  mass: float) -> Tuple[float, float]:
    """
    Invert :func:`trapstab.params.mathieu_from_trap`: voltages that realise
    the x-axis parameters ``p`` for a given geometry and ion

    :param p: Target x-axis Mathieu parameters (``omega`` is used as is)
    :param r0: Centre-to-electrode distance in m
    :param charge: Ion charge in C
    :param mass: Ion mass in kg

    :return: ``(U, V)`` in volts
    """
    TrapConfig(0.0, 0.0, p.omega, r0, charge, mass).check()

    scale = mass * p.omega ** 2 * r0 ** 2 / charge
    return float(p.a * scale / 8.0), float(-p.q * scale / 4.0)


def dehmelt_index(p: MathieuParams) -> ArrayLike:
    """
    Dehmelt's approximation of the Floquet index, ``mu = sqrt(a + q^2/2)``

    :param p: Mathieu parameters

    :raises DomainError: ``a + q^2/2 < 0`` (outside Dehmelt stable region)

    :return: ``mu``
    """
    radicand = p.a + 0.5 * np.square(p.q)
    if np.any(radicand < 0):
        raise DomainError("outside Dehmelt stable region: a + q^2/2 < 0")
    return np.sqrt(radicand)


def secular_frequency(p: MathieuParams) -> ArrayLike:
    """Secular (envelope) angular frequency ``mu omega / 2`` in rad/s"""
    return 0.5 * dehmelt_index(p) * p.omega


def dehmelt_trajectory(t: ArrayLike, amplitude: float,
                       p: MathieuParams) -> ArrayLike:
    """
    Approximate ion position
    ``x(t) = A cos(mu omega t / 2) [1 + (q/2) cos(omega t)]``

    :param t: Time(s) in s
    :param amplitude: Amplitude ``A`` in m
    :param p: Mathieu parameters

    :raises DomainError: propagated from :func:`trapstab.params.dehmelt_index`

    :return: Position(s) in m
    """
    mu = dehmelt_index(p)
    return amplitude * np.cos(0.5 * mu * p.omega * t) * \
        (1.0 + 0.5 * p.q * np.cos(p.omega * t))
