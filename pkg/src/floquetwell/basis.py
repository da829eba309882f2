"""Unperturbed square-well basis, operator matrices and unit conversion.

The well occupies ``|x| <= 1`` in scaled units and the basis functions are
``psi_n(x) = sin(n pi (x + 1) / 2)`` for ``n = 1 .. n_basis``.  They are
already normalized on ``[-1, 1]``.  Matrices are dense numpy arrays indexed
in that order (row/column ``k`` is level ``n = k + 1``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import constants

__all__ = [
    "WellConfig",
    "PhysicalParams",
    "unperturbed_energy",
    "dipole_element",
    "assemble_h0",
    "assemble_dipole",
    "hamiltonian_at",
    "parity_diagonal",
    "physical_to_scaled",
    "scaled_to_physical",
    "angular_frequency_from_wavelength",
    "field_force_from_intensity",
    "hermitian_defect",
    "unitarity_defect",
]


@dataclass(frozen=True)
class WellConfig:
    """Dimensionless model parameters shared by the quantum modules.

    Attributes:
        kappa: scaled Planck constant.
        omega0: drive angular frequency.
        n_basis: number of unperturbed levels kept.
    """

    kappa: float = 1.0
    omega0: float = 80.0
    n_basis: int = 80

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if int(self.n_basis) != self.n_basis or self.n_basis < 2:
            raise ValueError(f"n_basis must be an integer >= 2, got {self.n_basis}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega0

    @property
    def quasienergy_zone(self) -> float:
        """Width of the quasienergy Brillouin zone, ``kappa * omega0``."""
        return self.kappa * self.omega0


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory parameters of a driven well (SI units).

    ``field_amplitude`` is a force: charge times electric field amplitude.
    """

    well_half_width: float
    particle_mass: float
    field_amplitude: float
    drive_angular_frequency: float
    hbar: float = constants.hbar

    def __post_init__(self):
        for name in ("well_half_width", "particle_mass", "field_amplitude",
                     "drive_angular_frequency", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


def unperturbed_energy(n: int, cfg: WellConfig) -> float:
    """Energy of level ``n`` (1-based): ``kappa**2 * (n pi / 2)**2``."""
    if not 1 <= n <= cfg.n_basis:
        raise IndexError(f"level {n} outside 1..{cfg.n_basis}")
    return cfg.kappa ** 2 * (n * np.pi / 2.0) ** 2


def dipole_element(m: int, n: int) -> float:
    """Matrix element ``<m|x|n>`` between box eigenfunctions.

    Zero when ``m + n`` is even (parity), otherwise
    ``-16 m n / (pi^2 (m^2 - n^2)^2)``.
    """
    if m < 1 or n < 1:
        raise IndexError("levels are 1-based")
    if (m + n) % 2 == 0:
        return 0.0
    return -16.0 * m * n / (np.pi ** 2 * float(m * m - n * n) ** 2)


def _levels(n_basis: int) -> np.ndarray:
    return np.arange(1, n_basis + 1, dtype=float)


@lru_cache(maxsize=16)
def _dipole_cached(n_basis: int) -> np.ndarray:
    n = _levels(n_basis)
    m, k = n[:, None], n[None, :]
    odd = (np.add.outer(np.arange(n_basis), np.arange(n_basis)) % 2) == 1
    denom = np.where(odd, (m ** 2 - k ** 2) ** 2, 1.0)
    X = np.where(odd, -16.0 * m * k / (np.pi ** 2 * denom), 0.0)
    X.setflags(write=False)
    return X


def assemble_h0(cfg: WellConfig) -> np.ndarray:
    """Diagonal unperturbed Hamiltonian (real, float64)."""
    return np.diag(cfg.kappa ** 2 * (_levels(cfg.n_basis) * np.pi / 2.0) ** 2)


def assemble_dipole(cfg: WellConfig) -> np.ndarray:
    """Real symmetric position matrix in the box basis."""
    return _dipole_cached(cfg.n_basis).copy()


def parity_diagonal(cfg: WellConfig) -> np.ndarray:
    """Diagonal of the reflection ``x -> -x``: ``+1`` for odd n, ``-1`` for even n."""
    return np.where(np.arange(1, cfg.n_basis + 1) % 2 == 1, 1.0, -1.0)


def hamiltonian_at(cfg: WellConfig, epsilon: float, t: float) -> np.ndarray:
    """``H0 + epsilon cos(omega0 t) X``."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return assemble_h0(cfg) + epsilon * np.cos(cfg.omega0 * t) * _dipole_cached(cfg.n_basis)


def hermitian_defect(M: np.ndarray) -> float:
    return float(np.abs(M - M.conj().T).max())


def unitarity_defect(U: np.ndarray) -> float:
    """Max-norm of ``U^dagger U - I``."""
    return float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())


def angular_frequency_from_wavelength(wavelength: float) -> float:
    """Angular frequency (rad/s) of light with the given vacuum wavelength (m)."""
    return 2.0 * np.pi * constants.c / wavelength


def field_force_from_intensity(intensity: float, charge: float = constants.e) -> float:
    """Peak force ``q E`` for a plane wave of the given intensity (W/m^2)."""
    field = np.sqrt(2.0 * intensity / (constants.c * constants.epsilon_0))
    return charge * field


def physical_to_scaled(p: PhysicalParams, kappa: float = 1.0) -> tuple[float, float, float]:
    """Convert lab parameters to ``(kappa, omega0, epsilon)``.

    The energy unit is ``c = hbar^2 / (2 m a^2 kappa^2)``, which makes the
    scaled Planck constant equal to ``kappa`` (1 by default).

    Whether a semiconductor well should use the free-electron or the
    effective mass is left to the caller; the mass is taken as given.
    """
    a, m = p.well_half_width, p.particle_mass
    c = p.hbar ** 2 / (2.0 * m * a ** 2 * kappa ** 2)
    omega0 = p.drive_angular_frequency * a * np.sqrt(2.0 * m / c)
    epsilon = p.field_amplitude * a / c
    return kappa, float(omega0), float(epsilon)


def scaled_to_physical(kappa: float, omega0: float, epsilon: float, *, well_half_width: float,
                       particle_mass: float, hbar: float = constants.hbar) -> PhysicalParams:
    """Inverse of :func:`physical_to_scaled` for a given length and mass."""
    a, m = well_half_width, particle_mass
    c = hbar ** 2 / (2.0 * m * a ** 2 * kappa ** 2)
    return PhysicalParams(
        well_half_width=a,
        particle_mass=m,
        field_amplitude=epsilon * c / a,
        drive_angular_frequency=omega0 / (a * np.sqrt(2.0 * m / c)),
        hbar=hbar,
    )
