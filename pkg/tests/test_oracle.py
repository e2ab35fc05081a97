import math

import numpy as np
import pytest
import scipy.sparse as sp

from nlfano import effective as E
from nlfano import oracle as O
from nlfano import profiles as P
from nlfano.linalg import nullspace
from nlfano.model import ModelParams


def test_two_level_grid_arithmetic():
    dm = O.discretize(ModelParams(q=1, Omega=0.1), 2, 1.0, grid="uniform", strict=False)
    np.testing.assert_allclose(dm.weights, [2.0, 2.0])
    np.testing.assert_allclose(dm.coupling, math.sqrt(2 / math.pi))
    np.testing.assert_allclose(dm.energies, [-1.0, 1.0])


@pytest.mark.parametrize("grid", O.GRIDS)
def test_density_normalization(grid):
    dm = O.discretize(ModelParams(q=1, Omega=0.3, omega_e=2.0), 200, 20.0, omega_L=1.0, grid=grid)
    np.testing.assert_allclose(math.pi * dm.coupling**2 / dm.weights, 1.0, rtol=1e-14)
    assert np.all(np.diff(dm.energies) > 0) and np.all(dm.weights > 0)
    np.testing.assert_allclose(dm.field_coupling, 0.3 * dm.coupling)


def test_halving_spacing_halves_coupling_squared():
    p = ModelParams(q=1, Omega=0.1)
    a = O.discretize(p, 201, 20.0, grid="uniform")
    b = O.discretize(p, 401, 20.0, grid="uniform")
    np.testing.assert_allclose(b.coupling**2, a.coupling[0] ** 2 / 2)


def test_discretization_errors():
    p = ModelParams(q=1, Omega=0.1)
    with pytest.raises(O.DiscretizationError, match="resolution floor"):
        O.discretize(p, 2, 1.0, grid="uniform")
    with pytest.raises(O.DiscretizationError):
        O.discretize(p, O.MAX_STATES + 1, 50.0)
    with pytest.raises(O.DiscretizationError):
        O.discretize(p, 100, 20.0, grid="gauss")
    with pytest.raises(O.DiscretizationError):
        O.discretize(p, 100, -1.0)


def test_ladder_grid_resolves_laser_frequency():
    dm = O.discretize(ModelParams(q=1, Omega=0.1, Gamma_c=0.5), 200, 40.0, omega_L=3.0, grid="ladder")
    near = np.abs(dm.energies - 3.0) < 0.25
    assert dm.weights[near].max() < 0.05


def hand_built_three_level(p: ModelParams, e1: float, w1: float, wl: float) -> np.ndarray:
    """9x9 generator for (g, e, k), column-stacked, written out without the library."""
    V = math.sqrt(w1 / math.pi)
    H = np.array(
        [[0, p.q * p.Omega, p.Omega * V], [p.q * p.Omega, p.omega_e - wl, V], [p.Omega * V, V, e1 - wl]],
        dtype=complex,
    )
    n = 3
    L = np.zeros((9, 9), dtype=complex)

    def idx(a, b):
        return a + n * b  # column stacking, unlike the library

    for a in range(n):
        for b in range(n):
            for c in range(n):
                L[idx(a, b), idx(c, b)] += -1j * H[a, c]
                L[idx(a, b), idx(a, c)] += 1j * H[c, b]
    for rate, src in ((p.Gamma_e, 1), (p.Gamma_c, 2)):
        L[idx(0, 0), idx(src, src)] += rate
        for b in range(n):
            L[idx(src, b), idx(src, b)] -= rate / 2
            L[idx(b, src), idx(b, src)] -= rate / 2
    for (a, b), r in {(0, 1): p.gamma_eg, (0, 2): p.gamma_kg, (1, 2): p.gamma_ke}.items():
        L[idx(a, b), idx(a, b)] -= r
        L[idx(b, a), idx(b, a)] -= r
    v = nullspace(L).basis[0]
    rho = v.reshape(n, n).T
    return rho / np.trace(rho)


def test_single_continuum_level_against_hand_solution():
    p = ModelParams(q=2, Omega=0.6, Gamma_c=0.7, Gamma_e=0.3, gamma_eg=0.2, gamma_kg=0.1, gamma_ke=0.15, omega_e=0.5)
    dm = O.discretize(p, 2, 3.0, grid="uniform", strict=False)
    dm1 = O.DiscretizedModel(dm.energies[:1], dm.weights[:1], p, dm.W, "uniform", dm.center)
    st = O.steady_state(O.build_full_liouvillian(dm1, p, 0.3))
    np.testing.assert_allclose(st.rho, hand_built_three_level(p, dm1.energies[0], dm1.weights[0], 0.3), atol=1e-12)


def test_trace_preservation_and_hermiticity():
    p = ModelParams(q=2, Omega=0.5, Gamma_e=0.3, gamma_eg=0.2, gamma_kg=0.1, gamma_ke=0.2)
    dm = O.discretize(p, 12, 5.0, grid="tangent")
    L = O.build_full_liouvillian(dm, p, 0.4)
    n = dm.dimension
    pops = [a * n + a for a in range(n)]
    assert np.abs(np.asarray(L[pops].sum(axis=0))).max() < 1e-14


def test_three_solvers_agree():
    p = ModelParams(q=2, Omega=0.5, Gamma_e=0.3, gamma_eg=0.2, gamma_kg=0.1, gamma_ke=0.2)
    L = O.build_full_liouvillian(O.discretize(p, 8, 3.0, grid="tangent"), p, 0.4)
    ref = O.steady_state(L, method="dense").rho
    for method in ("eliminate", "sparse", "auto"):
        np.testing.assert_allclose(O.steady_state(L, method=method).rho, ref, atol=1e-13)


def test_elimination_refuses_coupled_continuum():
    L = sp.random(16, 16, density=0.9, random_state=0, format="csr")
    with pytest.raises(ValueError, match="not diagonal"):
        O.steady_state(L, method="eliminate")


def test_zero_field():
    st = O.solve_point(ModelParams(q=3, Omega=0.0), 0.5, 100, 20.0)
    assert st.block.rho_gg == pytest.approx(1.0, abs=1e-14) and abs(st.n_c) < 1e-14


def test_state_invariants():
    st = O.solve_point(ModelParams(q=1, Omega=1, Gamma_e=0.5, gamma_eg=0.2, gamma_kg=0.1, gamma_ke=0.1), -2.0, 200, 40.0)
    assert st.trace == pytest.approx(1.0, abs=1e-10)
    assert np.linalg.eigvalsh(st.block.as_matrix())[0] >= -1e-8
    assert 0 <= st.n_c <= 1
    np.testing.assert_allclose(st.rho, st.rho.conj().T)


@pytest.mark.parametrize(
    "p, wl",
    [
        (ModelParams(q=5, Omega=0.1), 0.0),
        (ModelParams(q=1, Omega=1.0, Gamma_c=0.5), 1.0),
        (ModelParams(q=-2, Omega=0.6, Gamma_e=0.5, gamma_eg=0.3), 2.0),
    ],
)
def test_block_matches_effective_kernel(p, wl):
    st = O.solve_point(p, wl, 200, 40.0)
    ref = E.discrete_steady_state(E.build_effective_liouvillian(p, wl - p.omega_e))
    np.testing.assert_allclose(st.unit_block().as_vector(), ref.as_vector(), atol=1e-3)
    assert st.n_c == pytest.approx(E.population(p, wl), rel=1e-3)


def test_photocurrent_matches_closed_form():
    p = ModelParams(q=3, Omega=0.8, Gamma_e=0.7, gamma_eg=0.4, Gamma_c=0.5)
    for wl in (-3.0, 0.0, 2.5):
        st = O.solve_point(p, wl, 200, 40.0)
        assert st.photocurrent(p.Gamma_c) == pytest.approx(P.photocurrent(p, wl), rel=1e-3)


def test_weak_field_shape():
    p = ModelParams(q=5, Omega=1e-3)
    eps = np.linspace(-10, 10, 9)
    nc = O.profile(p, eps, 200, 40.0, workers=1)
    f = P.fano(eps, 5.0)
    np.testing.assert_allclose(nc / nc.max(), f / f.max(), atol=1e-2)


def test_transparency_zero():
    p = ModelParams(q=15, Omega=1.0)
    zero = O.solve_point(p, 0.0, 200, 40.0).n_c
    peak = O.solve_point(p.replace(Omega=2.0), 0.0, 200, 40.0).n_c
    assert zero <= 1e-3 * peak


def test_large_Gamma_c_scaling():
    p = ModelParams(q=2, Omega=0.3)
    a = O.solve_point(p.replace(Gamma_c=20.0), 0.5, 200, 40.0).n_c
    b = O.solve_point(p.replace(Gamma_c=40.0), 0.5, 200, 40.0).n_c
    assert a / b == pytest.approx(2.0, rel=0.05)


def test_grid_shift_robustness():
    p = ModelParams(q=5, Omega=0.1)
    dm = O.discretize(p, 400, 40.0, grid="uniform")
    half = 0.5 * dm.weights[0]
    a = O.steady_state(O.build_full_liouvillian(dm, p, 0.3)).n_c
    shifted = O.discretize(p, 400, 40.0, grid="uniform", offset=half)
    b = O.steady_state(O.build_full_liouvillian(shifted, p, 0.3)).n_c
    assert abs(a - b) <= 1e-3 * a


def test_uniform_band_truncation_error_is_visible():
    # a finite band misses the principal-value shift of the far continuum
    p = ModelParams(q=5, Omega=0.1)
    ref = E.population(p, 3.0)
    uni = O.solve_point(p, 3.0, 400, 40.0, grid="uniform").n_c
    lad = O.solve_point(p, 3.0, 400, 40.0, grid="ladder").n_c
    assert abs(lad - ref) < 1e-6 * ref < abs(uni - ref)


def test_converge_loose_tolerance():
    r = O.converge(ModelParams(q=5, Omega=0.1), 0.0, rel_tol=0.1)
    assert len(r.history) <= 2 and r.N == 200


def test_converge_strong_field():
    r = O.converge(ModelParams(q=1, Omega=1.0), 0.5, rel_tol=1e-3)
    assert r.n_c == pytest.approx(E.population(ModelParams(q=1, Omega=1.0), 0.5), rel=1e-3)


def test_converge_failure_reports_trace():
    with pytest.raises(O.ConvergenceError) as info:
        O.converge(ModelParams(q=5, Omega=0.1), 0.0, rel_tol=1e-3, max_doublings=0)
    assert info.value.history and "N" in info.value.history[0]
    with pytest.raises(ValueError):
        O.converge(ModelParams(q=5, Omega=0.1), 0.0, rel_tol=0.5)


def test_uniform_converge_widens_band():
    r = O.converge(ModelParams(q=1, Omega=0.3), 0.0, rel_tol=1e-2, grid="uniform")
    assert r.W >= 40.0


def test_parallel_profile_is_ordered():
    p = ModelParams(q=2, Omega=0.4)
    w = np.linspace(-4, 4, 6)
    np.testing.assert_array_equal(O.profile(p, w, 100, 20.0, workers=2), O.profile(p, w, 100, 20.0, workers=1))
