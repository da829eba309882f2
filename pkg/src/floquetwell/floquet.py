"""One-period propagator, Floquet states and quasienergy curve tracking.

The coefficient equation ``i kappa dC/dt = H(t) C`` is integrated with the
fourth-order commutator-free Magnus scheme of Blanes and Moan.  Both
exponentials of a step have the form ``exp(-i tau (H0 + g X))`` with real
``g``; they are formed from a real symmetric eigendecomposition, so every
step is exactly unitary up to rounding.

The drive obeys ``H(t + T/2) = P H(t) P`` (``P`` the reflection ``x -> -x``)
and ``f(T/2 - t) = -f(t)``.  Together these give

    W = P U(T/2) = M^T P M,    U(T) = W @ W,

where ``M`` is the quarter-period propagator.  ``W`` commutes with ``U`` and
separates the two generalized-parity sectors, so the eigensolve is done on
``W`` and only a quarter period has to be integrated.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur
from scipy.optimize import linear_sum_assignment

from .basis import WellConfig, assemble_dipole, parity_diagonal, unitarity_defect

__all__ = [
    "IntegrationError",
    "Propagator",
    "FloquetSolution",
    "QuasienergyCurve",
    "Scan",
    "monodromy",
    "parity_root",
    "floquet_states",
    "solve",
    "fold",
    "continue_labels",
    "scan",
]

logger = logging.getLogger(__name__)

DEFAULT_STEPS_PER_PERIOD = 512

# Gauss nodes and Blanes-Moan weights for the 4th-order commutator-free step
_C1 = 0.5 - np.sqrt(3.0) / 6.0
_C2 = 0.5 + np.sqrt(3.0) / 6.0
_A1 = 0.25 + np.sqrt(3.0) / 6.0
_A2 = 0.25 - np.sqrt(3.0) / 6.0

UNITARITY_TOL = 1e-8
RESIDUAL_TOL = 1e-7


class IntegrationError(RuntimeError):
    """A numerical contract (unitarity, norm, residual) was violated."""


class Propagator:
    """Time-ordered propagator of the driven well at a fixed drive amplitude.

    Parameters
    ----------
    cfg : WellConfig
    epsilon : float
        Drive amplitude.
    steps_per_period : int
        Magnus steps per drive period.  Must be a multiple of 4 so the
        quarter-period symmetry can be used.
    """

    def __init__(self, cfg: WellConfig, epsilon: float, steps_per_period: int = DEFAULT_STEPS_PER_PERIOD):
        if epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if steps_per_period % 4:
            raise ValueError("steps_per_period must be a multiple of 4")
        self.cfg = cfg
        self.epsilon = float(epsilon)
        self.steps_per_period = int(steps_per_period)
        self.h = cfg.period / self.steps_per_period
        n = np.arange(1, cfg.n_basis + 1, dtype=float)
        self._e0 = cfg.kappa ** 2 * (n * np.pi / 2.0) ** 2
        self._x = assemble_dipole(cfg)
        self._parity = parity_diagonal(cfg)

    def drive(self, t):
        return self.epsilon * np.cos(self.cfg.omega0 * t)

    def _expm(self, g: float, tau: float) -> np.ndarray:
        # exp(-i tau (H0 + g X) / kappa) from a real symmetric eigensolve
        w, V = np.linalg.eigh(np.diag(self._e0) + g * self._x)
        return (V * np.exp(-1j * tau * w / self.cfg.kappa)) @ V.T

    def step(self, t: float, h: float | None = None) -> np.ndarray:
        """Single CF4 step from ``t`` to ``t + h``."""
        h = self.h if h is None else h
        f1, f2 = self.drive(t + _C1 * h), self.drive(t + _C2 * h)
        first = self._expm(2.0 * (_A1 * f1 + _A2 * f2), 0.5 * h)
        second = self._expm(2.0 * (_A2 * f1 + _A1 * f2), 0.5 * h)
        return second @ first

    def evolve(self, t0: float, t1: float, n_steps: int | None = None, C: np.ndarray | None = None) -> np.ndarray:
        """Propagate ``C`` (identity by default) from ``t0`` to ``t1``."""
        if n_steps is None:
            n_steps = max(1, int(np.ceil(abs(t1 - t0) / self.h - 1e-9)))
        h = (t1 - t0) / n_steps
        out = np.eye(self.cfg.n_basis, dtype=complex) if C is None else np.array(C, dtype=complex)
        for j in range(n_steps):
            out = self.step(t0 + j * h, h) @ out
        return out

    def quarter_period(self) -> np.ndarray:
        return self.evolve(0.0, self.cfg.period / 4.0, self.steps_per_period // 4)

    def parity_root(self) -> np.ndarray:
        """``W = P U(T/2)``, a complex-symmetric square root of ``U(T)``."""
        M = self.quarter_period()
        return M.T @ (self._parity[:, None] * M)

    def monodromy(self, direct: bool = False) -> np.ndarray:
        """One-period propagator ``U(T)``.

        ``direct=True`` integrates the full period step by step instead of
        using the half-period symmetry; it serves as a cross-check.
        """
        if direct:
            return self.evolve(0.0, self.cfg.period, self.steps_per_period)
        W = self.parity_root()
        return W @ W


def fold(omega, zone: float):
    """Map quasienergies into ``[-zone/2, zone/2)``."""
    return np.mod(np.asarray(omega) + 0.5 * zone, zone) - 0.5 * zone


def _check_unitary(U: np.ndarray, what: str) -> None:
    defect = unitarity_defect(U)
    if defect > UNITARITY_TOL:
        raise IntegrationError(f"{what}: unitarity defect {defect:.3e} exceeds {UNITARITY_TOL:g}")


def monodromy(cfg: WellConfig, epsilon: float, steps_per_period: int = DEFAULT_STEPS_PER_PERIOD) -> np.ndarray:
    """One-period propagator ``U(T)``; raises IntegrationError if not unitary."""
    U = Propagator(cfg, epsilon, steps_per_period).monodromy()
    _check_unitary(U, f"monodromy at epsilon={epsilon}")
    return U


def parity_root(cfg: WellConfig, epsilon: float, steps_per_period: int = DEFAULT_STEPS_PER_PERIOD) -> np.ndarray:
    W = Propagator(cfg, epsilon, steps_per_period).parity_root()
    _check_unitary(W, f"parity root at epsilon={epsilon}")
    return W


@dataclass
class FloquetSolution:
    """Floquet states at one drive amplitude.

    ``states[:, k]`` is the state with quasienergy ``quasienergies[k]``;
    entries are sorted by quasienergy.  ``parity`` holds the
    generalized-parity sign of each state and ``half_phases`` the
    eigenvalues of ``W`` (``None`` when only ``U`` was diagonalized).
    """

    epsilon: float
    quasienergies: np.ndarray
    states: np.ndarray
    monodromy: np.ndarray
    parity: np.ndarray | None = None
    half_phases: np.ndarray | None = None
    cfg: WellConfig = field(default_factory=WellConfig)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(-1j * self.quasienergies * self.cfg.period / self.cfg.kappa)

    def residuals(self) -> np.ndarray:
        """``|| U v - lambda v ||`` for every state."""
        R = self.monodromy @ self.states - self.states * self.eigenvalues[None, :]
        return np.linalg.norm(R, axis=0)

    def gram_defect(self) -> float:
        G = self.states.conj().T @ self.states
        return float(np.abs(G - np.eye(G.shape[0])).max())

    def dominant_levels(self) -> np.ndarray:
        """1-based basis level carrying the largest weight in each state."""
        return np.argmax(np.abs(self.states), axis=0) + 1

    def mean_level_energy(self) -> np.ndarray:
        """``<H0>`` of each state, a proxy for where it sits in action."""
        n = np.arange(1, self.states.shape[0] + 1)
        e0 = self.cfg.kappa ** 2 * (n * np.pi / 2.0) ** 2
        return (np.abs(self.states) ** 2 * e0[:, None]).sum(axis=0)


def _fix_degenerate(values: np.ndarray, vectors: np.ndarray, cfg: WellConfig,
                    tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    # inside clusters of (numerically) equal eigenvalues pick the basis that
    # diagonalizes the dipole operator and give the members one common value
    order = np.argsort(np.angle(values))
    X = assemble_dipole(cfg)
    vectors = vectors.copy()
    values = values.copy()
    k = 0
    n = len(values)
    while k < n:
        j = k + 1
        while j < n and abs(values[order[j]] - values[order[j - 1]]) < tol:
            j += 1
        if j - k > 1:
            idx = order[k:j]
            Q, _ = np.linalg.qr(vectors[:, idx])
            _, R = np.linalg.eigh(Q.conj().T @ X @ Q)
            vectors[:, idx] = Q @ R
            m = values[idx].mean()
            values[idx] = m / abs(m)
        k = j
    return values, vectors


def _phase_convention(vectors: np.ndarray) -> np.ndarray:
    k = np.argmax(np.abs(vectors), axis=0)
    lead = vectors[k, np.arange(vectors.shape[1])]
    return vectors * (np.abs(lead) / lead)[None, :]


def floquet_states(U: np.ndarray, cfg: WellConfig, epsilon: float = float("nan"),
                   W: np.ndarray | None = None) -> FloquetSolution:
    """Eigendecomposition of the monodromy.

    When the parity root ``W`` is supplied it is diagonalized instead of
    ``U``; its eigenvectors are Floquet states of definite generalized
    parity and states of the two sectors never mix numerically.
    """
    target = U if W is None else W
    T, Z = schur(target, output="complex")
    values = np.diag(T).copy()
    if np.abs(np.abs(values) - 1.0).max() > UNITARITY_TOL:
        raise IntegrationError("eigenvalues are off the unit circle")
    values, Z = _fix_degenerate(values, Z, cfg)
    Z = _phase_convention(Z)
    zone = cfg.quasienergy_zone
    if W is None:
        omega = fold(-cfg.kappa * np.angle(values) / cfg.period, zone)
        parity = None
        half = None
    else:
        omega = fold(-2.0 * cfg.kappa * np.angle(values) / cfg.period, zone)
        sign = values * np.exp(0.5j * omega * cfg.period / cfg.kappa)
        parity = np.where(sign.real >= 0, 1, -1)
        half = values
    # ties (degenerate clusters) are ordered by the dipole expectation
    xexp = np.einsum("ik,ij,jk->k", Z.conj(), assemble_dipole(cfg), Z).real
    order = np.lexsort((xexp, omega))
    sol = FloquetSolution(
        epsilon=float(epsilon),
        quasienergies=omega[order],
        states=Z[:, order],
        monodromy=U,
        parity=None if parity is None else parity[order],
        half_phases=None if half is None else half[order],
        cfg=cfg,
    )
    res = sol.residuals().max()
    if res > RESIDUAL_TOL:
        raise IntegrationError(f"eigenpair residual {res:.3e} exceeds {RESIDUAL_TOL:g}")
    return sol


def solve(cfg: WellConfig, epsilon: float, steps_per_period: int = DEFAULT_STEPS_PER_PERIOD) -> FloquetSolution:
    """Monodromy plus Floquet decomposition at one drive amplitude."""
    W = parity_root(cfg, epsilon, steps_per_period)
    U = W @ W
    _check_unitary(U, f"monodromy at epsilon={epsilon}")
    return floquet_states(U, cfg, epsilon, W=W)


def continue_labels(prev: FloquetSolution, nxt: FloquetSolution) -> tuple[np.ndarray, np.ndarray]:
    """Match states of ``nxt`` to those of ``prev`` by maximal total overlap.

    Returns ``(perm, overlaps)``: ``nxt.states[:, perm[k]]`` continues
    ``prev.states[:, k]`` and ``overlaps[k]`` is the matched ``|<.|.>|^2``.
    """
    O = np.abs(prev.states.conj().T @ nxt.states) ** 2
    rows, cols = linear_sum_assignment(O, maximize=True)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    return perm, O[np.arange(len(perm)), perm]


@dataclass
class QuasienergyCurve:
    """One tracked branch.  ``states`` is ``None`` when the scan dropped them."""

    label: int
    epsilons: np.ndarray
    quasienergies: np.ndarray
    states: np.ndarray | None = None
    splits: list[float] = field(default_factory=list)

    @property
    def points(self):
        for k, (e, w) in enumerate(zip(self.epsilons, self.quasienergies)):
            yield e, w, None if self.states is None else self.states[k]


@dataclass
class Scan:
    """Result of :func:`scan`.

    Column ``k`` of ``quasienergies`` (and of the last axis of ``states``)
    belongs to the curve ``labels[k]``.  Labels are the unperturbed quantum
    numbers of the states at the first grid point when it is ``epsilon=0``,
    otherwise the dominant basis level there.
    """

    cfg: WellConfig
    epsilons: np.ndarray
    labels: np.ndarray
    quasienergies: np.ndarray
    parity: np.ndarray
    states: np.ndarray | None
    min_overlaps: np.ndarray
    splits: list[dict] = field(default_factory=list)
    refinements: int = 0

    def column(self, label: int) -> int:
        hit = np.flatnonzero(self.labels == label)
        if not len(hit):
            raise KeyError(f"no curve labelled {label}")
        return int(hit[0])

    def curve(self, label: int) -> QuasienergyCurve:
        k = self.column(label)
        return QuasienergyCurve(
            label=int(label),
            epsilons=self.epsilons,
            quasienergies=self.quasienergies[:, k],
            states=None if self.states is None else self.states[:, :, k],
            splits=[s["epsilon"] for s in self.splits if s["label"] == label],
        )

    @property
    def curves(self) -> list[QuasienergyCurve]:
        return [self.curve(lab) for lab in self.labels]

    def solution_at(self, i: int) -> FloquetSolution:
        """Tracked Floquet states at grid index ``i`` (columns in label order)."""
        if self.states is None:
            raise ValueError("scan was run with keep_states=False")
        return FloquetSolution(
            epsilon=float(self.epsilons[i]), quasienergies=self.quasienergies[i],
            states=self.states[i], monodromy=None, parity=self.parity[i], cfg=self.cfg,
        )

    def index_of(self, epsilon: float) -> int:
        return int(np.argmin(np.abs(self.epsilons - epsilon)))

    def diagnostics(self) -> dict:
        return {
            "n_points": int(len(self.epsilons)),
            "refinements": int(self.refinements),
            "min_overlap": float(self.min_overlaps.min()) if len(self.min_overlaps) else 1.0,
            "worst_step": (
                {"epsilon": float(self.epsilons[int(np.argmin(self.min_overlaps)) + 1]),
                 "overlap": float(self.min_overlaps.min())}
                if len(self.min_overlaps) else None
            ),
            "splits": self.splits,
        }


def _solve_many(cfg, grid, steps_per_period, threads):
    if threads and threads > 1 and len(grid) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(solve, [cfg] * len(grid), grid, [steps_per_period] * len(grid)))
    return [solve(cfg, e, steps_per_period) for e in grid]


def _reorder(sol: FloquetSolution, perm: np.ndarray) -> FloquetSolution:
    return FloquetSolution(
        epsilon=sol.epsilon, quasienergies=sol.quasienergies[perm], states=sol.states[:, perm],
        monodromy=sol.monodromy,
        parity=None if sol.parity is None else sol.parity[perm],
        half_phases=None if sol.half_phases is None else sol.half_phases[perm],
        cfg=sol.cfg,
    )


def scan(cfg: WellConfig, epsilon_grid, *, steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
         watch: int | None = None, refine_below: float = 0.9, min_step: float = 1e-3,
         split_below: float = 0.5, keep_states: bool = True, threads: int = 1) -> Scan:
    """Quasienergies along an ascending grid, continued by maximal overlap.

    Where the smallest matched overlap among the watched curves (labels
    ``<= watch``, all curves by default) drops below ``refine_below`` the
    interval is bisected, down to ``min_step``.  A curve whose matched
    overlap is still below ``split_below`` at the finest step is recorded
    as split.
    """
    grid = np.asarray(epsilon_grid, dtype=float)
    if grid.ndim != 1 or not len(grid):
        raise ValueError("epsilon_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("epsilon_grid must be strictly ascending")
    base = _solve_many(cfg, grid, steps_per_period, threads)

    first = base[0]
    labels = first.dominant_levels()
    if len(set(labels.tolist())) != len(labels):
        # fall back to an arbitrary but deterministic numbering
        labels = np.arange(1, len(labels) + 1)
    order = np.argsort(labels, kind="stable")
    labels = labels[order]
    first = _reorder(first, order)
    watched = np.ones(len(labels), dtype=bool) if watch is None else labels <= watch

    eps_out = [first.epsilon]
    qs, ps = [first.quasienergies], [first.parity]
    sts = [first.states] if keep_states else None
    min_ov = []
    splits: list[dict] = []
    n_refine = 0

    def advance(prev, nxt, depth_left_width):
        nonlocal n_refine
        perm, ov = continue_labels(prev, nxt)
        worst = ov[watched].min()
        width = nxt.epsilon - prev.epsilon
        if worst < refine_below and width > 2 * min_step:
            n_refine += 1
            mid = solve(cfg, 0.5 * (prev.epsilon + nxt.epsilon), steps_per_period)
            mid_t = advance(prev, mid, width / 2)
            return advance(mid_t, nxt, width / 2)
        nxt_t = _reorder(nxt, perm)
        for k in np.flatnonzero(watched & (ov < split_below)):
            splits.append({"epsilon": float(nxt.epsilon), "label": int(labels[k]), "overlap": float(ov[k])})
            logger.warning("tracking ambiguity for curve %d at epsilon=%.4f (overlap %.3f)",
                           labels[k], nxt.epsilon, ov[k])
        eps_out.append(nxt.epsilon)
        qs.append(nxt_t.quasienergies)
        ps.append(nxt_t.parity)
        if keep_states:
            sts.append(nxt_t.states)
        min_ov.append(float(worst))
        return nxt_t

    prev = first
    for nxt in base[1:]:
        prev = advance(prev, nxt, nxt.epsilon - prev.epsilon)

    return Scan(
        cfg=cfg,
        epsilons=np.array(eps_out),
        labels=labels,
        quasienergies=np.array(qs),
        parity=np.array(ps),
        states=np.array(sts) if keep_states else None,
        min_overlaps=np.array(min_ov),
        splits=splits,
        refinements=n_refine,
    )
