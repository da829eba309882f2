"""Husimi phase-space distributions of states in the box basis.

Coherent states are free-space Gaussians (with ``hbar -> kappa``) cut off at
the walls without renormalization, so grids are relative densities.
Overlaps are computed by Gauss-Legendre quadrature over ``[-1, 1]``.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .basis import WellConfig

__all__ = [
    "HusimiGrid",
    "coherent_coeffs",
    "husimi_value",
    "husimi_grid",
    "grid_points",
    "participation_ratio",
    "write_husimi_csv",
]

DEFAULT_SIGMA = 0.1
DEFAULT_QUADRATURE = 600


def _quadrature(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _basis_on(x: np.ndarray, n_basis: int) -> np.ndarray:
    n = np.arange(1, n_basis + 1)
    return np.sin(np.outer(x + 1.0, n) * np.pi / 2.0)


def _coherent_wave(x, x0, p0, sigma, kappa):
    norm = (1.0 / (sigma ** 2 * np.pi)) ** 0.25
    d = x - x0
    return norm * np.exp(-d ** 2 / (2.0 * sigma ** 2) + 1j * p0 * d / kappa)


def _retained_mass(x0, sigma):
    # |g|^2 is a normal density with standard deviation sigma / sqrt(2)
    return 0.5 * (erf((1.0 - x0) / sigma) - erf((-1.0 - x0) / sigma))


def coherent_coeffs(x0: float, p0: float, sigma: float, cfg: WellConfig,
                    n_quad: int = DEFAULT_QUADRATURE) -> np.ndarray:
    """Coefficients ``<n|x0, p0>`` of a wall-truncated coherent state."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if abs(x0) > 1.0:
        raise ValueError("x0 must lie inside the well")
    if _retained_mass(x0, sigma) < 0.5:
        warnings.warn(f"wall truncation removes more than half of the coherent state (x0={x0}, sigma={sigma})",
                      stacklevel=2)
    x, w = _quadrature(n_quad)
    g = _coherent_wave(x, x0, p0, sigma, cfg.kappa)
    return _basis_on(x, cfg.n_basis).T @ (w * g)


def husimi_value(state: np.ndarray, x0: float, p0: float, sigma: float, cfg: WellConfig,
                 n_quad: int = DEFAULT_QUADRATURE) -> float:
    """``|<psi|x0, p0>|^2``."""
    c = coherent_coeffs(x0, p0, sigma, cfg, n_quad)
    return float(abs(np.vdot(state, c)) ** 2)


@dataclass
class HusimiGrid:
    """Husimi values on an action-angle grid; ``values[i, j]`` is at ``(theta[i], J[j])``."""

    theta_axis: np.ndarray
    J_axis: np.ndarray
    values: np.ndarray
    sigma: float
    kappa: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def cell_area(self) -> float:
        # dx dp = dtheta dJ for x = 2|theta|/pi - 1, p = pi J / 2
        return float((self.theta_axis[1] - self.theta_axis[0]) * (self.J_axis[1] - self.J_axis[0]))

    def normalization(self) -> float:
        """Phase-space integral divided by ``2 pi kappa``."""
        return float(self.values.sum() * self.cell_area / (2.0 * np.pi * self.kappa))

    def J_marginal(self) -> np.ndarray:
        return self.values.sum(axis=0)

    def J_peak(self) -> float:
        return float(self.J_axis[np.argmax(self.J_marginal())])

    def mean_J(self) -> float:
        m = self.J_marginal()
        return float((m * self.J_axis).sum() / m.sum())

    def participation_ratio(self) -> float:
        return participation_ratio(self.values)


def participation_ratio(values: np.ndarray) -> float:
    """Effective number of occupied cells, ``(sum q)^2 / sum q^2``."""
    v = np.asarray(values, dtype=float).ravel()
    return float(v.sum() ** 2 / (v ** 2).sum())


def grid_points(n_theta: int, n_J: int, J_max: float):
    """Axes of the default layout: theta uniform over ``(-pi, pi]``, J over ``[0, J_max]``."""
    theta = -np.pi + 2.0 * np.pi * np.arange(1, n_theta + 1) / n_theta
    J = np.linspace(0.0, J_max, n_J)
    return theta, J


def husimi_grid(state: np.ndarray, cfg: WellConfig, sigma: float = DEFAULT_SIGMA,
                n_theta: int = 128, n_J: int = 128, J_max: float = 40.0,
                n_quad: int = DEFAULT_QUADRATURE, meta: dict | None = None) -> HusimiGrid:
    """Evaluate the Husimi distribution of ``state`` on a ``(theta, J)`` grid.

    Each node is mapped to ``x0 = 2|theta|/pi - 1`` and
    ``p0 = sign(theta) pi J / 2``, the inverse of the action-angle map.
    For fixed ``x0`` the overlap is a windowed Fourier transform of the
    state, which is evaluated as one matrix product over all momenta.
    """
    if n_theta < 32 or n_J < 32:
        raise ValueError("grid resolution must be at least 32 x 32")
    state = np.asarray(state, dtype=complex)
    theta, J = grid_points(n_theta, n_J, J_max)
    x, w = _quadrature(n_quad)
    psi = _basis_on(x, cfg.n_basis) @ state
    norm = (1.0 / (sigma ** 2 * np.pi)) ** 0.25
    sign = np.where(theta >= 0, 1.0, -1.0)
    x0 = 2.0 * np.abs(theta) / np.pi - 1.0
    p_mag = np.pi * J / 2.0
    # window[i, q] = w_q conj(psi(x_q)) exp(-(x_q - x0_i)^2 / 2 sigma^2)
    window = norm * w[None, :] * np.conj(psi)[None, :] * np.exp(-(x[None, :] - x0[:, None]) ** 2 / (2 * sigma ** 2))
    values = np.empty((n_theta, n_J))
    for s in (1.0, -1.0):
        rows = sign == s
        phase = np.exp(1j * s * np.outer(x, p_mag) / cfg.kappa)  # (q, J)
        amp = window[rows] @ phase
        amp *= np.exp(-1j * s * np.outer(x0[rows], p_mag) / cfg.kappa)
        values[rows] = np.abs(amp) ** 2
    info = {"wall_handling": "truncated, not renormalized", "strobe_phase": "t=0"}
    if meta:
        info.update(meta)
    return HusimiGrid(theta_axis=theta, J_axis=J, values=values, sigma=float(sigma), kappa=cfg.kappa, meta=info)


def write_husimi_csv(path, grid: HusimiGrid, header: dict | None = None) -> None:
    """CSV rows ``theta, J, value`` under a ``#``-prefixed JSON header."""
    head = {"sigma": grid.sigma, "n_theta": len(grid.theta_axis), "n_J": len(grid.J_axis),
            "J_max": float(grid.J_axis[-1]), "normalization": grid.normalization(), **grid.meta}
    if header:
        head.update(header)
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(head, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["theta", "J", "value"])
        for i, th in enumerate(grid.theta_axis):
            for j, J in enumerate(grid.J_axis):
                w.writerow([repr(float(th)), repr(float(J)), repr(float(grid.values[i, j]))])
