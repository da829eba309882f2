"""Classical hard-wall dynamics of ``H = p^2 + eps x cos(omega0 t)``.

Between wall hits the motion is integrated in closed form; only the hit
times require root finding.  Strobe sections are taken once per drive
period and expressed in the action-angle variables of the undriven well,
``J = 2|p|/pi`` and ``theta = +-pi (x + 1)/2`` (sign of ``p``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, fsolve

__all__ = [
    "PhasePoint",
    "ActionAngle",
    "WallHitError",
    "BilliardIntegrator",
    "free_flight",
    "next_wall_hit",
    "evolve",
    "strobe",
    "to_action_angle",
    "from_action_angle",
    "resonance_action",
    "island_center",
    "write_strobe_csv",
]

WALL_TOL = 1e-9
ROOT_XTOL = 1e-14
GRAZING_SPEED = 1e-10


class WallHitError(RuntimeError):
    """A wall hit was missed, or an orbit bounces pathologically often."""


@dataclass(frozen=True)
class PhasePoint:
    x: float
    p: float
    t: float = 0.0

    def __post_init__(self):
        if abs(self.x) > 1.0 + WALL_TOL:
            raise ValueError(f"|x| = {abs(self.x)} lies outside the well")


@dataclass(frozen=True)
class ActionAngle:
    J: float
    theta: float


def _flight(x0, p0, t0, t, epsilon, omega0):
    """Closed-form state at time(s) ``t`` with no wall in between."""
    dt = t - t0
    s0, c0 = np.sin(omega0 * t0), np.cos(omega0 * t0)
    if epsilon == 0.0:
        return x0 + 2.0 * p0 * dt, p0 + 0.0 * dt
    st, ct = np.sin(omega0 * t), np.cos(omega0 * t)
    p = p0 - (epsilon / omega0) * (st - s0)
    x = (x0 + 2.0 * p0 * dt + (2.0 * epsilon / omega0 ** 2) * (ct - c0)
         + (2.0 * epsilon / omega0) * s0 * dt)
    return x, p


def free_flight(s: PhasePoint, t1: float, epsilon: float, omega0: float) -> PhasePoint:
    """Advance ``s`` to ``t1`` assuming no wall hit in between."""
    x, p = _flight(s.x, s.p, s.t, t1, epsilon, omega0)
    if abs(x) > 1.0 + WALL_TOL:
        raise WallHitError(f"free flight left the well (x={x:.6g}); a wall hit was missed")
    return PhasePoint(float(x), float(p), float(t1))


def _first_hit(x0, p0, t0, t_max, epsilon, omega0, dt_sample):
    """Earliest ``t`` in ``(t0, t_max]`` where ``|x(t)| = 1``, or ``None``."""

    def gap(t):
        return abs(_flight(x0, p0, t0, t, epsilon, omega0)[0]) - 1.0

    def mom(t):
        return _flight(x0, p0, t0, t, epsilon, omega0)[1]

    start = t0
    if abs(x0) >= 1.0 - 1e-15:
        # departing from a wall: step off the contact point until strictly inside
        start = t0 + 1e-9 * dt_sample
        while gap(start) >= 0.0:
            if start - t0 > 1e-3 * dt_sample:
                return start  # pressed into the wall
            start = t0 + 10.0 * (start - t0)
        if start >= t_max:
            return None
    rtol = 4 * np.finfo(float).eps
    while start < t_max:
        stop = min(t_max, start + 64 * dt_sample)
        n = max(2, int(np.ceil((stop - start) / dt_sample)) + 1)
        ts = np.linspace(start, stop, n)
        xs, ps = _flight(x0, p0, t0, ts, epsilon, omega0)
        gs = np.abs(xs) - 1.0
        for k in range(n - 1):
            a, b = ts[k], ts[k + 1]
            if gs[k + 1] >= 0.0:
                return brentq(gap, a, b, xtol=ROOT_XTOL, rtol=rtol)
            # a turning point between samples can still touch the wall
            if ps[k] * ps[k + 1] < 0.0:
                tm = brentq(mom, a, b, xtol=ROOT_XTOL)
                if gap(tm) >= 0.0:
                    return brentq(gap, a, tm, xtol=ROOT_XTOL, rtol=rtol)
        start = stop
    return None


def next_wall_hit(s: PhasePoint, epsilon: float, omega0: float, t_max: float,
                  samples_per_period: int = 64) -> float | None:
    """Time of the next wall contact after ``s.t`` (up to ``t_max``)."""
    if abs(s.x) > 1.0 + WALL_TOL:
        raise ValueError("state lies outside the well")
    dt = 2.0 * np.pi / omega0 / samples_per_period
    return _first_hit(s.x, s.p, s.t, t_max, epsilon, omega0, dt)


class BilliardIntegrator:
    """Event-driven integrator that chains free flights and reflections.

    Attributes
    ----------
    reflections, grazing, sticks : int
        Running counts of wall reflections, of reflections at speed below
        ``GRAZING_SPEED``, and of episodes where a slow particle rested on
        a wall while the drive pushed outward.
    """

    def __init__(self, epsilon: float, omega0: float, max_reflections_per_period: int = 10_000,
                 samples_per_period: int = 64):
        self.epsilon = float(epsilon)
        self.omega0 = float(omega0)
        self.period = 2.0 * np.pi / omega0
        self.max_reflections_per_period = max_reflections_per_period
        self.dt_sample = self.period / samples_per_period
        self.reflections = 0
        self.grazing = 0
        self.sticks = 0

    def _release_time(self, wall: float, t: float) -> float:
        # force is outward at wall +1 while cos < 0, at wall -1 while cos > 0
        target = 1.5 * np.pi if wall > 0 else 0.5 * np.pi
        dphi = np.mod(target - self.omega0 * t, 2.0 * np.pi)
        return t + dphi / self.omega0 + 1e-6 * self.period

    def evolve(self, s: PhasePoint, t1: float) -> PhasePoint:
        x, p, t = float(s.x), float(s.p), float(s.t)
        if t1 < t:
            raise ValueError("evolve only runs forward in time")
        budget = self.max_reflections_per_period * max(1.0, (t1 - t) / self.period)
        count = 0
        while True:
            hit = _first_hit(x, p, t, t1, self.epsilon, self.omega0, self.dt_sample)
            if hit is None:
                x, p = _flight(x, p, t, t1, self.epsilon, self.omega0)
                x = float(np.clip(x, -1.0, 1.0))
                return PhasePoint(x, float(p), float(t1))
            xh, ph = _flight(x, p, t, hit, self.epsilon, self.omega0)
            x, p, t = float(np.sign(xh)), -float(ph), float(hit)
            count += 1
            self.reflections += 1
            if abs(p) < GRAZING_SPEED:
                self.grazing += 1
            force = -self.epsilon * np.cos(self.omega0 * t)
            if x * force > 0 and abs(p) < abs(force) * self.period / 4000.0:
                # slow particle pinned by an outward force: rest on the wall
                # until the drive turns inward instead of bouncing indefinitely
                self.sticks += 1
                release = self._release_time(x, t)
                if release >= t1:
                    return PhasePoint(x, 0.0, float(t1))
                p, t = 0.0, release
            if count > budget:
                raise WallHitError(f"more than {int(budget)} reflections before t={t1}")


def evolve(s: PhasePoint, t1: float, epsilon: float, omega0: float, **kwargs) -> PhasePoint:
    """State at ``t1``; walls reflect elastically (``p -> -p``)."""
    return BilliardIntegrator(epsilon, omega0, **kwargs).evolve(s, t1)


def to_action_angle(s: PhasePoint) -> ActionAngle:
    sign = 1.0 if s.p >= 0 else -1.0
    return ActionAngle(J=2.0 * abs(s.p) / np.pi, theta=sign * np.pi * (s.x + 1.0) / 2.0)


def from_action_angle(theta: float, J: float, t: float = 0.0) -> PhasePoint:
    """Inverse of :func:`to_action_angle` (``theta`` in ``[-pi, pi]``)."""
    if J < 0:
        raise ValueError("action must be non-negative")
    sign = -1.0 if theta < 0 else 1.0
    return PhasePoint(x=2.0 * abs(theta) / np.pi - 1.0, p=sign * np.pi * J / 2.0, t=t)


def strobe(initial: Sequence[PhasePoint], n_periods: int, epsilon: float, omega0: float,
           **kwargs) -> np.ndarray:
    """Sample each orbit at ``t = t0 + k T`` for ``k = 0 .. n_periods``.

    Returns an array of shape ``(n_orbits, n_periods + 1, 2)`` holding
    ``(theta, J)``.
    """
    T = 2.0 * np.pi / omega0
    out = np.empty((len(initial), n_periods + 1, 2))
    for i, s in enumerate(initial):
        integ = BilliardIntegrator(epsilon, omega0, **kwargs)
        t0 = s.t
        for k in range(n_periods + 1):
            if k:
                s = integ.evolve(s, t0 + k * T)
            aa = to_action_angle(s)
            out[i, k] = aa.theta, aa.J
    return out


def resonance_action(omega0: float, order: int = 1) -> float:
    """Action of the ``N = order`` resonance, where ``dE/dJ = omega0 / order``."""
    # E = pi^2 J^2 / 4  =>  dE/dJ = pi^2 J / 2
    return 2.0 * omega0 / (order * np.pi ** 2)


def _period_map(epsilon, omega0):
    # works in (theta, J): continuous across both walls, unlike (x, p)
    integ = BilliardIntegrator(epsilon, omega0)
    T = 2.0 * np.pi / omega0

    def step(z):
        theta = float(np.mod(z[0] + np.pi, 2.0 * np.pi) - np.pi)
        s = integ.evolve(from_action_angle(theta, abs(float(z[1]))), T)
        aa = to_action_angle(s)
        dtheta = np.mod(aa.theta - theta + np.pi, 2.0 * np.pi) - np.pi
        return np.array([dtheta, aa.J - abs(z[1])])

    return step


def island_center(epsilon: float, omega0: float, n_theta: int = 48) -> tuple[ActionAngle, bool]:
    """Stable fixed point of the strobe map in the N=1 resonance.

    Seeds a ring of angles at the analytic resonance action and refines
    with a nonlinear solve; among converged fixed points the elliptic one
    (``|trace| < 2`` for the one-period Jacobian) closest to the resonance
    action wins.  Returns the fixed point and whether it is elliptic.
    """
    J0 = resonance_action(omega0)
    F = _period_map(epsilon, omega0)
    best = None
    for theta in np.linspace(-np.pi, np.pi, n_theta, endpoint=False):
        z, info, ier, _ = fsolve(F, [theta, J0], full_output=True, xtol=1e-12)
        if ier != 1:
            continue
        aa = ActionAngle(J=abs(float(z[1])), theta=float(np.mod(z[0] + np.pi, 2 * np.pi) - np.pi))
        if abs(aa.J - J0) > 4:
            continue
        jac = _jacobian(F, z) + np.eye(2)
        elliptic = bool(abs(np.trace(jac)) < 2.0)
        key = (not elliptic, abs(aa.J - J0))
        if best is None or key < best[0]:
            best = (key, aa, elliptic)
    if best is None:
        raise WallHitError("no fixed point of the strobe map near the resonance")
    return best[1], best[2]


def _jacobian(F, z, h=1e-7):
    jac = np.empty((2, 2))
    for k in range(2):
        dz = np.zeros(2)
        dz[k] = h * max(1.0, abs(z[k]))
        jac[:, k] = (F(z + dz) - F(z - dz)) / (2 * dz[k])
    return jac


def write_strobe_csv(path, samples: np.ndarray, header: str | None = None) -> None:
    """Write strobe samples as ``orbit_id, period_index, theta, J``."""
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh)
        w.writerow(["orbit_id", "period_index", "theta", "J"])
        for i, orbit in enumerate(samples):
            for k, (theta, J) in enumerate(orbit):
                w.writerow([i, k, repr(float(theta)), repr(float(J))])


def default_seeds(n_theta: int = 6, actions: Iterable[float] = (2, 5, 8, 11, 14, 16, 18, 21, 24)) -> list[PhasePoint]:
    """Seed grid used when no seeds are given: a few angles on several actions."""
    seeds = []
    for J in actions:
        for theta in np.linspace(-np.pi, np.pi, n_theta, endpoint=False) + np.pi / (2 * n_theta):
            seeds.append(from_action_angle(float(theta), float(J)))
    return seeds
