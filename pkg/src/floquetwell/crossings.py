"""Detection, refinement and classification of avoided crossings.

Gaps are measured on the quasienergy circle,
``d = min(|dW|, zone - |dW|)`` with ``zone = kappa * omega0``.

Classification thresholds are choices of this package, not physical
constants; they are reported with every result.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .basis import WellConfig
from .floquet import DEFAULT_STEPS_PER_PERIOD, FloquetSolution, Scan, continue_labels, solve

__all__ = [
    "BracketError",
    "ContaminationWarning",
    "Candidate",
    "RefinedCrossing",
    "AvoidedCrossing",
    "Thresholds",
    "circle_gap",
    "minimize_gap",
    "detect",
    "refine",
    "classify",
    "crossing_width",
    "default_window",
    "group_overlapping",
]

logger = logging.getLogger(__name__)


class BracketError(RuntimeError):
    """The gap minimum is not inside the given bracket."""


class ContaminationWarning(UserWarning):
    """A before/after point sits inside another crossing."""


@dataclass(frozen=True)
class Thresholds:
    gap: float = 0.5
    participant: float = 0.1
    sharp_fidelity: float = 0.9
    degeneracy: float = 1e-6


def circle_gap(a, b, zone: float):
    d = np.abs(np.asarray(a) - np.asarray(b)) % zone
    return np.minimum(d, zone - d)


def _signed_diff(a, b, zone):
    return np.mod(a - b + 0.5 * zone, zone) - 0.5 * zone


def _same_sector(scan: Scan, k: int, ci: int, cj: int) -> bool:
    # the parity sign belongs to the folded branch; it flips when one of the
    # two quasienergies has to be unwrapped by a zone to sit next to the other
    zone = scan.cfg.quasienergy_zone
    wrapped = abs(scan.quasienergies[k, ci] - scan.quasienergies[k, cj]) > 0.5 * zone
    return bool((scan.parity[k, ci] == scan.parity[k, cj]) != wrapped)


@dataclass
class Candidate:
    pair: tuple[int, int]
    bracket: tuple[float, float]
    epsilon_grid: float
    gap_grid: float
    same_sector: bool
    index: int


def detect(scan: Scan, gap_threshold: float = 0.5, labels=None) -> list[Candidate]:
    """Local gap minima below ``gap_threshold`` for every pair of curves.

    Each interior local minimum at grid index ``k`` yields the bracket
    ``(eps[k-1], eps[k+1])``.  ``labels`` restricts the search to curves
    with those labels.
    """
    zone = scan.cfg.quasienergy_zone
    cols = np.arange(len(scan.labels)) if labels is None else np.array([scan.column(l) for l in labels])
    Q = scan.quasienergies[:, cols]
    eps = scan.epsilons
    out: list[Candidate] = []
    if len(eps) < 3:
        return out
    gaps = circle_gap(Q[:, :, None], Q[:, None, :], zone)  # (n_eps, n, n)
    inner = gaps[1:-1]
    is_min = (inner <= gaps[:-2]) & (inner <= gaps[2:]) & (inner < gap_threshold)
    # ignore flat runs where both neighbours are equal (e.g. identical curves)
    is_min &= ~((inner == gaps[:-2]) & (inner == gaps[2:]))
    ks, ii, jj = np.nonzero(is_min)
    for k, i, j in zip(ks + 1, ii, jj):
        if i >= j:
            continue
        ci, cj = cols[i], cols[j]
        out.append(Candidate(
            pair=(int(scan.labels[ci]), int(scan.labels[cj])),
            bracket=(float(eps[k - 1]), float(eps[k + 1])),
            epsilon_grid=float(eps[k]),
            gap_grid=float(gaps[k, i, j]),
            same_sector=_same_sector(scan, k, ci, cj),
            index=int(k),
        ))
    out.sort(key=lambda c: (c.epsilon_grid, c.pair))
    return out


@dataclass
class RefinedCrossing:
    pair: tuple[int, int]
    epsilon_star: float
    gap_min: float
    bracket: tuple[float, float]
    apparent: bool
    center_states: np.ndarray = field(repr=False)
    slope_difference: float = float("nan")
    evaluations: int = 0

    @property
    def width(self) -> float:
        """Half-width in epsilon of the mixing region, ``gap_min / slope difference``."""
        if not np.isfinite(self.slope_difference) or self.slope_difference <= 0:
            return float("nan")
        return self.gap_min / self.slope_difference


class _PairProbe:
    """Locates the two states of a pair at arbitrary epsilon."""

    def __init__(self, cfg, refs, steps_per_period):
        self.cfg = cfg
        self.refs = refs
        self.steps = steps_per_period
        self.cache: dict[float, FloquetSolution] = {}

    def solution(self, eps):
        key = float(eps)
        if key not in self.cache:
            self.cache[key] = solve(self.cfg, key, self.steps)
        return self.cache[key]

    def pair(self, eps):
        sol = self.solution(eps)
        w = np.abs(self.refs.conj().T @ sol.states) ** 2  # (2, n)
        top = np.argsort(w.sum(axis=0))[-2:]
        # order the two states to follow the references individually
        if w[0, top[0]] + w[1, top[1]] < w[0, top[1]] + w[1, top[0]]:
            top = top[::-1]
        return sol, top

    def gap(self, eps):
        sol, (a, b) = self.pair(eps)
        return float(circle_gap(sol.quasienergies[a], sol.quasienergies[b], self.cfg.quasienergy_zone))

    def signed(self, eps):
        sol, (a, b) = self.pair(eps)
        return float(_signed_diff(sol.quasienergies[a], sol.quasienergies[b], self.cfg.quasienergy_zone))


def minimize_gap(gap, bracket: tuple[float, float], tol: float = 1e-3) -> tuple[float, float]:
    """Bounded golden-section/parabolic minimization of ``gap`` inside ``bracket``.

    Raises :class:`BracketError` when the minimum sits on a bracket edge,
    i.e. the true minimum has migrated outside.
    """
    lo, hi = bracket
    if not hi > lo:
        raise ValueError("empty bracket")
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": tol / 2})
    x = float(res.x)
    if x - lo < 2 * tol or hi - x < 2 * tol:
        if min(gap(lo), gap(hi)) <= gap(x):
            raise BracketError(f"gap minimum left the bracket ({lo}, {hi})")
    return x, float(gap(x))


def refine(cfg: WellConfig, candidate: Candidate, scan: Scan, tol: float = 1e-3,
           steps_per_period: int = DEFAULT_STEPS_PER_PERIOD) -> RefinedCrossing:
    """Locate the gap minimum of a candidate to ``tol`` in epsilon.

    Same-sector pairs use a bounded golden-section search on the gap.
    Pairs in opposite generalized-parity sectors cannot couple; their
    crossing is located by root finding on the signed quasienergy
    difference, giving an exact (apparent) crossing.
    """
    if scan.states is None:
        raise ValueError("refine needs a scan with stored states")
    la, lb = candidate.pair
    k = candidate.index
    refs = np.stack([scan.states[k][:, scan.column(la)], scan.states[k][:, scan.column(lb)]], axis=1)
    probe = _PairProbe(cfg, refs, steps_per_period)
    lo, hi = candidate.bracket
    eps_star = None
    apparent = False
    if not candidate.same_sector:
        try:
            f_lo, f_hi = probe.signed(lo), probe.signed(hi)
            if f_lo * f_hi < 0 and abs(f_lo) < 0.25 * cfg.quasienergy_zone and abs(f_hi) < 0.25 * cfg.quasienergy_zone:
                eps_star = brentq(probe.signed, lo, hi, xtol=min(tol, 1e-9), rtol=1e-12)
                apparent = True
        except ValueError:
            eps_star = None
    if eps_star is None:
        eps_star, _ = minimize_gap(probe.gap, (lo, hi), tol)
    sol, (a, b) = probe.pair(eps_star)
    gap_min = float(circle_gap(sol.quasienergies[a], sol.quasienergies[b], cfg.quasienergy_zone))
    # slope difference of the asymptotes from the hyperbola through the bracket ends
    slopes = []
    for e in (lo, hi):
        g = probe.gap(e)
        if abs(e - eps_star) > 0 and g > gap_min:
            slopes.append(np.sqrt(g * g - gap_min * gap_min) / abs(e - eps_star))
    return RefinedCrossing(
        pair=(la, lb),
        epsilon_star=float(eps_star),
        gap_min=gap_min,
        bracket=(lo, hi),
        apparent=apparent,
        center_states=sol.states[:, [a, b]],
        slope_difference=float(np.mean(slopes)) if slopes else float("nan"),
        evaluations=len(probe.cache),
    )


def crossing_width(rc: RefinedCrossing) -> float:
    return rc.width


def default_window(rc: RefinedCrossing, others=(), n_widths: float = 10.0,
                   scan: Scan | None = None) -> tuple[float, float]:
    """``epsilon_star -+ n_widths * width``, clipped short of neighbouring crossings
    that share a curve, and to the scan range when given."""
    w = rc.width
    if not np.isfinite(w) or w <= 0:
        w = 0.5 * (rc.bracket[1] - rc.bracket[0])
    lo, hi = rc.epsilon_star - n_widths * w, rc.epsilon_star + n_widths * w
    for o in others:
        if o is rc or not set(o.pair) & set(rc.pair) or o.apparent:
            continue
        if o.epsilon_star < rc.epsilon_star:
            lo = max(lo, 0.5 * (o.epsilon_star + rc.epsilon_star))
        elif o.epsilon_star > rc.epsilon_star:
            hi = min(hi, 0.5 * (o.epsilon_star + rc.epsilon_star))
    if scan is not None:
        lo, hi = max(lo, scan.epsilons[0]), min(hi, scan.epsilons[-1])
    return float(lo), float(hi)


def group_overlapping(crossings, n_widths: float = 10.0) -> list[list[RefinedCrossing]]:
    """Cluster same-sector crossings that share a curve and whose mixing
    regions (``epsilon_star -+ n_widths * width``) intersect."""
    items = [c for c in crossings if not c.apparent]
    parent = list(range(len(items)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, a in enumerate(items):
        for j in range(i + 1, len(items)):
            b = items[j]
            if not set(a.pair) & set(b.pair):
                continue
            wa, wb = a.width, b.width
            if not (np.isfinite(wa) and np.isfinite(wb)):
                continue
            if abs(a.epsilon_star - b.epsilon_star) < n_widths * (wa + wb):
                parent[find(i)] = find(j)
    groups: dict[int, list] = {}
    for i, c in enumerate(items):
        groups.setdefault(find(i), []).append(c)
    return sorted(groups.values(), key=lambda g: min(c.epsilon_star for c in g))


@dataclass
class AvoidedCrossing:
    """A classified crossing (or a group of overlapping crossings).

    ``overlap_matrix`` is ``|<before_i|after_j>|^2`` over ``participants``;
    ``relabeling`` maps each participant to the after-curve that carries
    most of its structure.
    """

    epsilon_star: float
    gap_min: float
    curve_pair: tuple[int, int]
    participants: list[int]
    kind: str
    exchange_fidelity: float
    overlap_matrix: np.ndarray
    relabeling: dict[int, int]
    epsilon_before: float
    epsilon_after: float
    epsilon_stars: list[float] = field(default_factory=list)
    thresholds: Thresholds = field(default_factory=Thresholds)

    def to_json(self) -> dict:
        return {
            "epsilon_star": self.epsilon_star,
            "epsilon_stars": self.epsilon_stars,
            "gap_min": self.gap_min,
            "curve_pair": list(self.curve_pair),
            "kind": self.kind,
            "participants": list(self.participants),
            "exchange_fidelity": self.exchange_fidelity,
            "overlap_matrix": np.asarray(self.overlap_matrix).tolist(),
            "relabeling": {str(k): v for k, v in self.relabeling.items()},
            "epsilon_before": self.epsilon_before,
            "epsilon_after": self.epsilon_after,
            "thresholds": asdict(self.thresholds),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _labelled_solution(cfg, scan: Scan, eps: float, steps_per_period: int) -> FloquetSolution:
    i = scan.index_of(eps)
    ref = scan.solution_at(i)
    if abs(scan.epsilons[i] - eps) < 1e-9:
        return ref
    sol = solve(cfg, eps, steps_per_period)
    perm, _ = continue_labels(ref, sol)
    return FloquetSolution(epsilon=sol.epsilon, quasienergies=sol.quasienergies[perm],
                           states=sol.states[:, perm], monodromy=sol.monodromy,
                           parity=sol.parity[perm], cfg=cfg)


def exchange_fidelity(O: np.ndarray) -> tuple[float, np.ndarray]:
    """Best permutation mass of a square overlap block, per state."""
    if O.size == 0:
        return 1.0, np.zeros(0, dtype=int)
    rows, cols = linear_sum_assignment(O, maximize=True)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    return float(O[rows, cols].sum() / O.shape[0]), perm


def classify(cfg: WellConfig, crossings, epsilon_before: float, epsilon_after: float, scan: Scan,
             thresholds: Thresholds = Thresholds(), others=(),
             steps_per_period: int = DEFAULT_STEPS_PER_PERIOD) -> AvoidedCrossing:
    """Classify one refined crossing, or a group of overlapping ones.

    Participants are curves that carry more than ``thresholds.participant``
    of the mixed states at the crossing center(s), lose more than that
    fraction of their structure between ``epsilon_before`` and
    ``epsilon_after``, and whose structure ends up mostly on another curve.
    If mixing curves lose structure without any relabeling, they are all
    participants and the crossing is broad.  The exchange fidelity is the
    largest per-state overlap mass achievable by a permutation among the
    participants.
    """
    group = [crossings] if isinstance(crossings, RefinedCrossing) else list(crossings)
    if not group:
        raise ValueError("no crossing given")
    stars = sorted(c.epsilon_star for c in group)
    if not epsilon_before < stars[0] <= stars[-1] < epsilon_after:
        raise ValueError("need epsilon_before < epsilon_star < epsilon_after")
    for o in others:
        if o.apparent or any(o is c for c in group):
            continue
        for e in (epsilon_before, epsilon_after):
            if o.bracket[0] <= e <= o.bracket[1] and set(o.pair) & {l for c in group for l in c.pair}:
                warnings.warn(f"epsilon={e} lies inside the crossing of {o.pair} at {o.epsilon_star:.3f}",
                              ContaminationWarning, stacklevel=2)

    before = _labelled_solution(cfg, scan, epsilon_before, steps_per_period)
    after = _labelled_solution(cfg, scan, epsilon_after, steps_per_period)
    O = np.abs(before.states.conj().T @ after.states) ** 2
    labels = scan.labels
    off_identity = 1.0 - np.diag(O)

    gap_min = min(c.gap_min for c in group)
    primary = min(group, key=lambda c: c.gap_min)
    if all(c.apparent for c in group) or gap_min < thresholds.degeneracy:
        parts = sorted({l for c in group for l in c.pair})
        kind = "apparent"
    else:
        mix = np.zeros(len(labels))
        for c in group:
            w = np.abs(before.states.conj().T @ c.center_states) ** 2
            mix = np.maximum(mix, w.max(axis=1))
        moved = (mix > thresholds.participant) & (off_identity > thresholds.participant)
        relabeled = moved & (np.argmax(O, axis=1) != np.arange(len(labels)))
        sel = relabeled if relabeled.any() else moved
        parts = [int(l) for l in labels[sel]]
        kind = None if relabeled.any() or not moved.any() else "broad"
    cols = [scan.column(l) for l in parts]
    block = O[np.ix_(cols, cols)]
    fidelity, perm = exchange_fidelity(block)
    if kind is None:
        if len(parts) == 0:
            kind = "none"
        elif len(parts) == 2 and fidelity >= thresholds.sharp_fidelity:
            kind = "sharp"
        else:
            kind = "broad"
    relabel = {}
    for r, l in enumerate(parts):
        relabel[int(l)] = int(labels[int(np.argmax(O[cols[r]]))])
    return AvoidedCrossing(
        epsilon_star=float(primary.epsilon_star),
        gap_min=float(gap_min),
        curve_pair=tuple(int(l) for l in primary.pair),
        participants=parts,
        kind=kind,
        exchange_fidelity=float(fidelity),
        overlap_matrix=block,
        relabeling=relabel,
        epsilon_before=float(epsilon_before),
        epsilon_after=float(epsilon_after),
        epsilon_stars=[float(s) for s in stars],
        thresholds=thresholds,
    )
