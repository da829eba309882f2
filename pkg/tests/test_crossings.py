import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floquetwell import crossings, floquet
from floquetwell.basis import WellConfig
from floquetwell.crossings import RefinedCrossing

CFG2 = WellConfig(n_basis=2)


def two_level(eps, eps0, delta, g):
    """Adiabatic eigenpairs of [[d/2, g/2], [g/2, -d/2]] with d = (eps - eps0) delta."""
    d = (eps - eps0) * delta
    w, v = np.linalg.eigh(np.array([[d / 2, g / 2], [g / 2, -d / 2]]))
    return w, v.astype(complex)


def two_level_scan(grid, eps0, delta, g, offset=0.0, cfg=CFG2):
    qs, vs = zip(*(two_level(e, eps0, delta, g) for e in grid))
    q = floquet.fold(np.array(qs) + offset, cfg.quasienergy_zone)
    return floquet.Scan(cfg=cfg, epsilons=np.asarray(grid, float), labels=np.array([1, 2]),
                        quasienergies=q, parity=np.ones_like(q, dtype=int), states=np.array(vs),
                        min_overlaps=np.zeros(len(grid) - 1))


def hyperbola(eps0, delta, g):
    return lambda e: float(np.sqrt(((e - eps0) * delta) ** 2 + g ** 2))


@given(a=st.floats(-100, 100), b=st.floats(-100, 100), k=st.integers(-3, 3))
def test_circle_gap_properties(a, b, k):
    zone = 80.0
    d = crossings.circle_gap(a, b, zone)
    assert 0 <= d <= zone / 2
    assert d == pytest.approx(crossings.circle_gap(b, a, zone), abs=1e-9)
    assert d == pytest.approx(crossings.circle_gap(a, b + k * zone, zone), abs=1e-9)


def test_parallel_curves_give_no_candidates():
    grid = np.linspace(0, 10, 41)
    sc = two_level_scan(grid, 0.0, 0.0, 0.3)
    assert crossings.detect(sc, 0.5) == []


@settings(max_examples=20, deadline=None)
@given(eps0=st.floats(2.0, 8.0), delta=st.floats(0.2, 5.0), g=st.floats(1e-3, 0.4))
def test_detect_and_refine_two_level_oracle(eps0, delta, g):
    grid = np.linspace(0, 10, 41)
    sc = two_level_scan(grid, eps0, delta, g)
    # grid points are 0.25 apart, so the sampled gap stays below 2
    cands = crossings.detect(sc, 2.0)
    hits = [c for c in cands if c.bracket[0] <= eps0 <= c.bracket[1]]
    assert hits and all(c.pair == (1, 2) and c.same_sector for c in hits)
    x, gap = crossings.minimize_gap(hyperbola(eps0, delta, g), hits[0].bracket, tol=1e-7)
    assert x == pytest.approx(eps0, abs=1e-6)
    assert gap == pytest.approx(g, abs=1e-6)


def test_refinement_error_tracks_tolerance():
    f = hyperbola(5.123456, 2.0, 0.05)
    errs = [abs(crossings.minimize_gap(f, (4.5, 5.5), tol=tol)[0] - 5.123456) for tol in (1e-2, 1e-4, 1e-6)]
    assert errs[0] <= 1e-2 and errs[1] <= 1e-4 and errs[2] <= 1e-6


def test_minimum_outside_bracket_raises():
    with pytest.raises(crossings.BracketError):
        crossings.minimize_gap(hyperbola(7.0, 1.0, 0.1), (4.0, 5.0), tol=1e-4)


def test_detect_across_branch_edge():
    # both curves hug the zone edge, so one of them is folded to the far side
    grid = np.linspace(0, 10, 41)
    sc = two_level_scan(grid, 5.0, 1.0, 0.2, offset=40.0)
    half = (sc.quasienergies < 0)
    sc.parity = np.where(half, -1, 1)
    cands = crossings.detect(sc, 0.5)
    assert len(cands) == 1
    assert cands[0].gap_grid == pytest.approx(0.2, abs=1e-9)
    assert cands[0].same_sector


def _refined(eps0, delta, g, bracket):
    _, v = two_level(eps0, eps0, delta, g)
    return RefinedCrossing(pair=(1, 2), epsilon_star=eps0, gap_min=g, bracket=bracket, apparent=False,
                           center_states=v, slope_difference=delta)


@settings(max_examples=20, deadline=None)
@given(g=st.floats(1e-3, 1.0), delta=st.floats(0.5, 4.0))
def test_two_level_classification_is_sharp(g, delta):
    eps0 = 5.0
    rc = _refined(eps0, delta, g, (4.9, 5.1))
    lo, hi = crossings.default_window(rc)
    assert (lo, hi) == pytest.approx((eps0 - 10 * g / delta, eps0 + 10 * g / delta))
    sc = two_level_scan(np.array([lo, eps0, hi]), eps0, delta, g)
    ac = crossings.classify(CFG2, rc, lo, hi, sc)
    assert ac.kind == "sharp"
    assert ac.participants == [1, 2]
    assert ac.exchange_fidelity >= 0.9
    assert ac.relabeling == {1: 2, 2: 1}


def test_identical_solutions_give_no_crossing():
    grid = np.array([0.0, 5.0, 10.0])
    sc = two_level_scan(grid, 0.0, 0.0, 0.3)
    rc = _refined(5.0, 0.0, 0.3, (4.0, 6.0))
    ac = crossings.classify(CFG2, rc, 0.0, 10.0, sc)
    assert ac.participants == []
    assert ac.kind == "none"


def test_classify_validates_order():
    sc = two_level_scan(np.array([0.0, 5.0, 10.0]), 5.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        crossings.classify(CFG2, _refined(5.0, 1.0, 0.1, (4, 6)), 6.0, 10.0, sc)


def test_apparent_when_degenerate():
    sc = two_level_scan(np.array([0.0, 5.0, 10.0]), 5.0, 1.0, 0.0)
    rc = _refined(5.0, 1.0, 0.0, (4, 6))
    ac = crossings.classify(CFG2, rc, 0.0, 10.0, sc)
    assert ac.kind == "apparent"


def test_contamination_warning():
    sc = two_level_scan(np.array([3.0, 5.0, 7.0]), 5.0, 1.0, 0.05)
    rc = _refined(5.0, 1.0, 0.05, (4.5, 5.5))
    other = _refined(3.1, 1.0, 0.05, (2.5, 3.5))
    with pytest.warns(crossings.ContaminationWarning):
        crossings.classify(CFG2, rc, 3.0, 7.0, sc, others=[rc, other])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        crossings.classify(CFG2, rc, 3.0, 7.0, sc, others=[rc])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_exchange_fidelity_phase_invariant(seed):
    rng = np.random.default_rng(seed)
    A = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))[0]
    B = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))[0]
    O = np.abs(A.conj().T @ B) ** 2
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    O2 = np.abs((A * phases).conj().T @ (B * phases[::-1])) ** 2
    f1, _ = crossings.exchange_fidelity(O)
    f2, _ = crossings.exchange_fidelity(O2)
    assert f1 == pytest.approx(f2, abs=1e-12)
    assert 0 <= f1 <= 1 + 1e-12


def test_overlap_matrix_doubly_stochastic(sharp_scan):
    a = sharp_scan.states[sharp_scan.index_of(170.0)]
    b = sharp_scan.states[sharp_scan.index_of(180.0)]
    O = np.abs(a.conj().T @ b) ** 2
    assert np.abs(O.sum(axis=0) - 1).max() < 1e-6
    assert np.abs(O.sum(axis=1) - 1).max() < 1e-6


def test_report_json_fields():
    sc = two_level_scan(np.array([4.0, 5.0, 6.0]), 5.0, 1.0, 0.05)
    ac = crossings.classify(CFG2, _refined(5.0, 1.0, 0.05, (4.5, 5.5)), 4.0, 6.0, sc)
    d = ac.to_json()
    for key in ("epsilon_star", "gap_min", "kind", "participants", "exchange_fidelity", "overlap_matrix"):
        assert key in d
    assert '"kind": "sharp"' in ac.dumps()


def test_detect_misses_nothing_a_fine_scan_finds(cfg, sharp_scan):
    """Every gap minimum below threshold on a 0.05 grid sits inside a coarse bracket."""
    fine = floquet.scan(cfg, np.arange(172.0, 180.0 + 1e-9, 0.05))
    k = sharp_scan.index_of(172.0)
    O = np.abs(sharp_scan.states[k].conj().T @ fine.states[0]) ** 2
    match = np.argmax(O, axis=0)
    assert O[match, np.arange(O.shape[1])].min() > 0.99
    to_coarse = {int(fine.labels[j]): int(sharp_scan.labels[match[j]]) for j in range(len(match))}
    coarse = crossings.detect(sharp_scan, 0.5)
    missed = []
    for c in crossings.detect(fine, 0.5):
        pair = tuple(sorted(to_coarse[l] for l in c.pair))
        if max(pair) > 40 or not 172.5 <= c.epsilon_grid <= 179.5:
            continue
        if not any(tuple(sorted(d.pair)) == pair and d.bracket[0] <= c.epsilon_grid <= d.bracket[1]
                   for d in coarse):
            missed.append((pair, c.epsilon_grid))
    assert missed == []


def _exchanges(scan, c, shift=3):
    k, a, b = c.index, scan.column(c.pair[0]), scan.column(c.pair[1])
    if k - shift < 0 or k + shift >= len(scan.epsilons):
        return False
    s0, s1 = scan.states[k - shift], scan.states[k + shift]
    return min(abs(np.vdot(s0[:, a], s1[:, b])) ** 2, abs(np.vdot(s0[:, b], s1[:, a])) ** 2) > 0.5


def test_first_visible_exchanges_between_100_and_200(full_scan):
    """Same-sector crossings that swap character and have a gap of at least 0.1
    (visible on the quasienergy plot) first appear above eps=100."""
    labels = [int(l) for l in full_scan.labels if l <= 40]
    found = [c for c in crossings.detect(full_scan, 0.5, labels=labels)
             if c.same_sector and c.gap_grid >= 0.1 and _exchanges(full_scan, c)]
    assert found
    assert 100 < found[0].epsilon_grid < 200
