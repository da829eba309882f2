import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from floquetwell import basis, floquet
from floquetwell.basis import WellConfig
from floquetwell.floquet import Propagator
from oracles import schrodinger_oracle


def test_free_monodromy_is_diagonal_phases():
    cfg = WellConfig()
    U = floquet.monodromy(cfg, 0.0)
    E = np.diag(basis.assemble_h0(cfg))
    np.testing.assert_allclose(U, np.diag(np.exp(-1j * E * cfg.period / cfg.kappa)), atol=1e-10)


def test_free_quasienergies_are_folded_levels():
    cfg = WellConfig()
    sol = floquet.solve(cfg, 0.0)
    E = np.array([basis.unperturbed_energy(n, cfg) for n in range(1, cfg.n_basis + 1)])
    np.testing.assert_allclose(np.sort(sol.quasienergies), np.sort(floquet.fold(E, cfg.omega0)), atol=1e-8)
    np.testing.assert_array_equal(np.sort(sol.dominant_levels()), np.arange(1, 81))


def test_propagation_matches_direct_integration():
    cfg = WellConfig()
    rng = np.random.default_rng(7)
    psi = rng.normal(size=(cfg.n_basis, 3)) + 1j * rng.normal(size=(cfg.n_basis, 3))
    psi /= np.linalg.norm(psi, axis=0)
    U = floquet.monodromy(cfg, 175.5)
    ref = schrodinger_oracle(cfg, 175.5, psi, cfg.period)
    fid = np.abs(np.sum(ref.conj() * (U @ psi), axis=0)) ** 2
    assert fid.min() >= 1 - 1e-6


def test_symmetric_and_direct_monodromy_agree():
    cfg = WellConfig()
    prop = Propagator(cfg, 400.0)
    np.testing.assert_allclose(prop.monodromy(), prop.monodromy(direct=True), atol=1e-11)


def test_step_halving_is_fourth_order():
    cfg = WellConfig(n_basis=40)
    U = {s: Propagator(cfg, 300.0, s).monodromy() for s in (128, 256, 512)}
    e1 = np.abs(U[128] - U[256]).max()
    e2 = np.abs(U[256] - U[512]).max()
    assert 10 < e1 / e2 < 22
    assert e2 < 1e-7


def test_parity_root_squares_to_monodromy():
    cfg = WellConfig()
    prop = Propagator(cfg, 175.5)
    W = prop.parity_root()
    np.testing.assert_allclose(W, W.T, atol=1e-12)
    np.testing.assert_allclose(W @ W, prop.monodromy(direct=True), atol=1e-11)


def test_generalized_parity_identity():
    cfg = WellConfig()
    prop = Propagator(cfg, 175.5)
    P = np.diag(basis.parity_diagonal(cfg))
    U0 = prop.monodromy(direct=True)
    U_half = prop.evolve(cfg.period / 2, 3 * cfg.period / 2, prop.steps_per_period)
    np.testing.assert_allclose(U_half, P @ U0 @ P, atol=1e-7)


@pytest.mark.parametrize("eps", [175.5, 760.0])
def test_solution_contract(eps):
    cfg = WellConfig()
    sol = floquet.solve(cfg, eps)
    assert basis.unitarity_defect(sol.monodromy) <= 1e-8
    assert sol.residuals().max() <= 1e-7
    assert sol.gram_defect() <= 1e-8
    assert np.abs(np.abs(sol.eigenvalues) - 1).max() <= 1e-8
    half = cfg.quasienergy_zone / 2
    assert np.all((sol.quasienergies >= -half) & (sol.quasienergies < half))
    assert set(np.unique(sol.parity)) <= {-1, 1}
    # each state is an eigenvector of the parity root with eigenvalue
    # sector * exp(-i omega T / 2 kappa)
    W = floquet.parity_root(cfg, eps)
    mu = sol.parity * np.exp(-0.5j * sol.quasienergies * cfg.period / cfg.kappa)
    np.testing.assert_allclose(W @ sol.states, sol.states * mu[None, :], atol=1e-7)


def test_fixed_point_of_each_state():
    cfg = WellConfig()
    sol = floquet.solve(cfg, 400.0)
    Uv = sol.monodromy @ sol.states
    fid = np.abs(np.sum(sol.states.conj() * Uv, axis=0)) ** 2
    assert fid.min() >= 1 - 1e-8


def test_random_unitary_decomposition():
    cfg = WellConfig(n_basis=30)
    U = unitary_group.rvs(30, random_state=3)
    sol = floquet.floquet_states(U, cfg)
    assert sol.residuals().max() < 1e-10
    assert sol.gram_defect() < 1e-10


def test_degenerate_cluster_is_deterministic():
    cfg = WellConfig(n_basis=6)
    phases = np.exp(1j * np.array([0.3, 0.3, 0.3, -1.0, 2.0, 1.1]))
    out = []
    for seed in (1, 2):
        R = np.eye(6, dtype=complex)
        R[:3, :3] = unitary_group.rvs(3, random_state=seed)
        Q = unitary_group.rvs(6, random_state=11) @ R
        U = Q @ np.diag(phases) @ Q.conj().T
        out.append(floquet.floquet_states(U, cfg))
    O = np.abs(out[0].states.conj().T @ out[1].states) ** 2
    np.testing.assert_allclose(O, np.eye(6), atol=1e-8)


def test_phase_convention():
    sol = floquet.solve(WellConfig(n_basis=20), 50.0)
    k = np.argmax(np.abs(sol.states), axis=0)
    lead = sol.states[k, np.arange(20)]
    np.testing.assert_allclose(lead.imag, 0.0, atol=1e-14)
    assert np.all(lead.real > 0)


@given(st.floats(-1e4, 1e4), st.floats(1.0, 500.0))
def test_fold_idempotent(x, zone):
    f = floquet.fold(x, zone)
    assert -zone / 2 <= f < zone / 2 + 1e-9
    assert floquet.fold(f, zone) == pytest.approx(f, abs=1e-9 * zone)


def test_continue_labels_identity_and_swap():
    sol = floquet.solve(WellConfig(n_basis=20), 120.0)
    perm, ov = floquet.continue_labels(sol, sol)
    np.testing.assert_array_equal(perm, np.arange(20))
    np.testing.assert_allclose(ov, 1.0)
    swapped = floquet._reorder(sol, np.array([1, 0] + list(range(2, 20))))
    perm, ov = floquet.continue_labels(sol, swapped)
    assert perm[0] == 1 and perm[1] == 0
    np.testing.assert_allclose(ov, 1.0)


def test_single_point_scan_labels_levels():
    cfg = WellConfig()
    sc = floquet.scan(cfg, [0.0])
    np.testing.assert_array_equal(sc.labels, np.arange(1, 81))
    E = np.array([basis.unperturbed_energy(n, cfg) for n in sc.labels])
    np.testing.assert_allclose(sc.quasienergies[0], floquet.fold(E, cfg.omega0), atol=1e-8)


def test_scan_rejects_bad_grids():
    cfg = WellConfig(n_basis=10)
    with pytest.raises(ValueError):
        floquet.scan(cfg, [1.0, 0.5])
    with pytest.raises(ValueError):
        floquet.scan(cfg, [])


def test_scan_refines_and_tracks_smoothly():
    cfg = WellConfig(n_basis=40)
    sc = floquet.scan(cfg, np.arange(150.0, 160.0 + 1e-9, 2.5), watch=20, keep_states=False)
    assert sc.states is None
    assert sc.min_overlaps.min() >= 0.9 or sc.refinements > 0
    d = sc.diagnostics()
    assert d["n_points"] == len(sc.epsilons) and d["refinements"] == sc.refinements
    c = sc.curve(5)
    assert c.label == 5 and len(c.quasienergies) == len(sc.epsilons)
    with pytest.raises(ValueError):
        sc.solution_at(0)


def test_tracking_overlap_threshold_respected(sharp_scan):
    # wherever refinement could not lift the overlap, a split is recorded
    low = sharp_scan.min_overlaps < 0.5
    assert not low.any() or sharp_scan.splits
    assert sharp_scan.diagnostics()["min_overlap"] == pytest.approx(sharp_scan.min_overlaps.min())
