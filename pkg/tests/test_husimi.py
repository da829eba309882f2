import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floquetwell import husimi
from floquetwell.basis import WellConfig

CFG = WellConfig()


def _basis_state(n):
    v = np.zeros(CFG.n_basis, dtype=complex)
    v[n - 1] = 1.0
    return v


def test_centered_gaussian_has_no_even_levels():
    c = husimi.coherent_coeffs(0.0, 0.0, 0.1, CFG)
    assert np.abs(c[1::2]).max() < 1e-14
    assert np.abs(c[0::2]).max() > 0.1


@pytest.mark.parametrize("x0,p0", [(0.0, 0.0), (0.4, 12.0), (-0.8, -30.0)])
def test_quadrature_self_convergence(x0, p0):
    a = husimi.coherent_coeffs(x0, p0, 0.1, CFG, n_quad=600)
    b = husimi.coherent_coeffs(x0, p0, 0.1, CFG, n_quad=1200)
    assert np.abs(a - b).max() < 1e-10


def test_coefficient_norm_bounded_and_complete():
    c = husimi.coherent_coeffs(0.1, 5.0, 0.1, CFG)
    assert np.linalg.norm(c) <= 1.0
    assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-3)
    edge = husimi.coherent_coeffs(0.97, 5.0, 0.1, CFG)
    assert np.linalg.norm(edge) < 0.9


def test_wide_gaussian_warns():
    with pytest.warns(UserWarning):
        husimi.coherent_coeffs(0.99, 0.0, 2.0, CFG)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        husimi.coherent_coeffs(0.0, 0.0, 0.1, CFG)


def test_value_of_own_projection():
    c = husimi.coherent_coeffs(0.2, 7.0, 0.1, CFG)
    psi = c / np.linalg.norm(c)
    assert husimi.husimi_value(psi, 0.2, 7.0, 0.1, CFG) == pytest.approx(np.vdot(c, c).real, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(phase=st.floats(0, 2 * np.pi))
def test_global_phase_invariance(phase):
    rng = np.random.default_rng(1)
    psi = rng.normal(size=CFG.n_basis) + 1j * rng.normal(size=CFG.n_basis)
    psi /= np.linalg.norm(psi)
    a = husimi.husimi_value(psi, 0.3, 4.0, 0.1, CFG)
    b = husimi.husimi_value(np.exp(1j * phase) * psi, 0.3, 4.0, 0.1, CFG)
    assert a == pytest.approx(b, rel=1e-12)


def test_level_16_peaks_at_momentum_8pi():
    psi = _basis_state(16)
    p = np.linspace(0.0, 40.0, 801)
    vals = np.array([husimi.husimi_value(psi, 0.0, pp, 0.1, CFG) for pp in p])
    assert abs(p[np.argmax(vals)] - 8 * np.pi) < 1.0


def test_grid_matches_pointwise_values():
    rng = np.random.default_rng(2)
    psi = rng.normal(size=CFG.n_basis) + 1j * rng.normal(size=CFG.n_basis)
    psi /= np.linalg.norm(psi)
    g = husimi.husimi_grid(psi, CFG, n_theta=32, n_J=32, J_max=40.0)
    for i, j in [(0, 0), (5, 17), (20, 3), (31, 31), (16, 10)]:
        th, J = g.theta_axis[i], g.J_axis[j]
        x0 = 2 * abs(th) / np.pi - 1
        p0 = np.sign(th) * np.pi * J / 2 if th != 0 else np.pi * J / 2
        assert g.values[i, j] == pytest.approx(husimi.husimi_value(psi, x0, p0, 0.1, CFG), rel=1e-9, abs=1e-15)


def test_grid_axes_and_positivity():
    g = husimi.husimi_grid(_basis_state(5), CFG)
    assert g.values.shape == (128, 128)
    assert g.theta_axis[-1] == pytest.approx(np.pi) and g.theta_axis[0] > -np.pi
    assert g.J_axis[0] == 0.0 and g.J_axis[-1] == 40.0
    assert np.all(np.isfinite(g.values)) and g.values.min() >= 0


@pytest.mark.parametrize("n", [3, 10, 16])
def test_phase_space_normalization(n):
    g = husimi.husimi_grid(_basis_state(n), CFG)
    assert 0.8 <= g.normalization() <= 1.05
    assert abs(g.mean_J() - n) < 1.5


def test_grid_resolution_floor():
    with pytest.raises(ValueError):
        husimi.husimi_grid(_basis_state(1), CFG, n_theta=16)


def test_participation_ratio():
    assert husimi.participation_ratio(np.ones(50)) == pytest.approx(50)
    v = np.zeros(50)
    v[3] = 2.0
    assert husimi.participation_ratio(v) == pytest.approx(1.0)
    low = husimi.husimi_grid(_basis_state(2), CFG).participation_ratio()
    mixed = husimi.husimi_grid((_basis_state(2) + _basis_state(25)) / np.sqrt(2), CFG).participation_ratio()
    assert mixed > low


def test_write_csv(tmp_path):
    g = husimi.husimi_grid(_basis_state(4), CFG, n_theta=32, n_J=32)
    path = tmp_path / "h.csv"
    husimi.write_husimi_csv(path, g, {"label": 4})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# {") and '"sigma": 0.1' in lines[0] and '"label": 4' in lines[0]
    assert lines[1] == "theta,J,value"
    assert len(lines) == 2 + 32 * 32
