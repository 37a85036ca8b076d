from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poincare_fewbody.errors import ParameterError
from poincare_fewbody.numerics import make_grid
from poincare_fewbody.threebody import (
    _direct_t,
    assemble_faddeev_kernel,
    dominant_eta,
    embed_bt,
    embed_tensor,
    embedded_t,
    halfshell_kernel,
    halfshell_t_embedded,
    halfshell_t_nr,
    make_jacobi_grid,
    offshell_extend,
    onshell_equivalence_check,
    oracle_mass,
    permutation_geometry,
    prepare_faddeev,
    recoupling_jacobian_check,
    reduced_s_elements,
    solve_trimer,
    symmetrization_residual,
)
from poincare_fewbody.twobody import NUCLEON_MASS as M
from poincare_fewbody.twobody import MTParameters, PartialWaveKernel, malfliet_tjon_kernel

ENERGIES = [1.0, 10.0, 30.0, 60.0, 100.0]


@pytest.fixture(scope="module")
def v64():
    return malfliet_tjon_kernel(MTParameters(), make_grid(64, 400.0))


# ------------------------------------------------------------ embeddings


@pytest.mark.parametrize("m3", [M, 500.0, 3000.0])
def test_embedding_s_matrix_equivalence(v64, m3):
    assert onshell_equivalence_check(v64, m3, ENERGIES) < 1e-8


def test_embedding_s_matrix_unitary(v64):
    k = np.array([20.0, 150.0, 400.0])
    for op, q in ((embed_bt(v64, M), 120.0), (embed_tensor(v64, M), None)):
        s = reduced_s_elements(op, k, q)
        assert np.allclose(np.abs(s), 1.0, atol=1e-12)


def test_embedding_zero_interaction_gives_identity():
    v = PartialWaveKernel.zero(make_grid(32, 400.0))
    assert onshell_equivalence_check(v, M, ENERGIES) == 0.0
    s = reduced_s_elements(embed_bt(v, M), np.array([50.0, 200.0]), 80.0)
    assert np.allclose(s, 1.0, atol=0)


def test_embedding_energy_validation(v64):
    with pytest.raises(ParameterError):
        onshell_equivalence_check(v64, M, [-1.0])


def test_halfshell_identity(v64):
    rng = np.random.default_rng(7)
    op = embed_bt(v64, M)
    worst = 0.0
    for k0, kp, q in zip(rng.uniform(20, 400, 10), rng.uniform(10, 600, 10), rng.uniform(0, 400, 10)):
        t_nr = halfshell_t_nr(v64, M, M, k0, [kp])
        formula = halfshell_kernel(t_nr, k0, kp, q, M)
        direct = halfshell_t_embedded(op, q, k0, [kp])
        worst = max(worst, float(np.max(np.abs(formula - direct) / np.abs(direct))))
    assert worst < 1e-8


def test_halfshell_zero_potential():
    v = PartialWaveKernel.zero(make_grid(24, 400.0))
    t = halfshell_t_nr(v, M, M, 100.0, [50.0, 150.0])
    assert np.all(t == 0.0)
    assert np.all(halfshell_kernel(t, 100.0, np.array([50.0, 150.0]), 30.0, M) == 0.0)


def test_halfshell_factor_on_shell_limit():
    # at k' = k the bracketed factor reduces to d g_q / d(k^2) times 2 mu
    k, q = 120.0, 90.0
    w = np.sqrt(M * M + k * k)
    expected = (M / 1.0) * (2 * w) / (w * w) * (2 * w) / np.sqrt(4 * w * w + q * q) / 2
    assert halfshell_kernel(1.0, k, k, q, M) == pytest.approx(expected, rel=1e-14)


# ------------------------------------------------------------ recoupling


def test_permutation_nonrelativistic_geometry():
    q, qp, x = 100.0, 70.0, 0.3
    pi1, pi2, r = permutation_geometry(q, qp, x, M, relativistic=False)
    assert pi1 == pytest.approx(np.sqrt(qp**2 + q**2 / 4 + q * qp * x))
    assert pi2 == pytest.approx(np.sqrt(q**2 + qp**2 / 4 + q * qp * x))
    assert r == 1.0


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 800.0), st.floats(1.0, 800.0), st.floats(-1.0, 1.0))
def test_permutation_geometry_swap_symmetry(q, qp, x):
    a1, a2, ra = permutation_geometry(q, qp, x, M)
    b1, b2, rb = permutation_geometry(qp, q, x, M)
    assert a1 == pytest.approx(b2, rel=1e-12) and a2 == pytest.approx(b1, rel=1e-12)
    assert ra == pytest.approx(rb, rel=1e-12)


def test_permutation_approaches_nonrelativistic_for_heavy_mass():
    q, qp, x = 50.0, 30.0, -0.4
    rel = permutation_geometry(q, qp, x, 1e7)
    nr = permutation_geometry(q, qp, x, 1e7, relativistic=False)
    assert np.allclose(rel[:2], nr[:2], rtol=1e-8)
    # partition Jacobians tend to 1, corrections are O(p^2/m^2)
    assert float(rel[2]) == pytest.approx(1.0, rel=1e-8)


def test_permutation_at_zero_momenta():
    pi1, pi2, r = permutation_geometry(0.0, 0.0, 0.5, M)
    assert pi1 == 0.0 and pi2 == 0.0 and np.isfinite(r)


@pytest.mark.parametrize("relativistic", [True, False])
def test_recoupling_is_unitary(relativistic):
    rng = np.random.default_rng(3)
    for _ in range(5):
        q, qp = rng.normal(scale=300.0, size=(2, 3))
        assert abs(recoupling_jacobian_check(q, qp, M, relativistic)) < 1e-8


# ------------------------------------------------------------ t-matrix continuation


def test_offshell_extend_matches_direct(small_setups):
    s = small_setups[True]
    tg, te = embedded_t(s, s.threshold - 37.0)
    dg, de = embedded_t(s, s.threshold - 37.0, direct=True)
    assert np.max(np.abs(tg - dg)) / np.max(np.abs(dg)) < 1e-8
    assert np.max(np.abs(te - de)) / np.max(np.abs(de)) < 1e-8


def test_offshell_extend_identity_and_continuity(small_setups):
    s = small_setups[False]
    k = s.grids.k_grid.nodes
    meas = s.grids.k_grid.weights * k * k
    t0, _ = offshell_extend(s.t_ref[0], s.z_ref, s.z_ref, s.m0[:, 0], meas)
    assert np.array_equal(t0, s.t_ref[0])
    t1, _ = offshell_extend(s.t_ref[0], s.z_ref + 1e-6, s.z_ref, s.m0[:, 0], meas)
    assert np.max(np.abs(t1 - t0)) < 1e-6 * np.max(np.abs(t0))
    t2, _ = offshell_extend(s.t_ref[0], s.z_ref - 20.0, s.z_ref, s.m0[:, 0], meas)
    # symmetric kernel and real z below threshold give a symmetric t
    assert np.max(np.abs(t2 - t2.T)) < 1e-10 * np.max(np.abs(t2))
    d, _ = _direct_t(s.v_grid[0], s.v_ext[0], s.z_ref - 20.0, s.m0[:, 0], meas)
    assert np.max(np.abs(t2 - d)) < 1e-8 * np.max(np.abs(d))


# ------------------------------------------------------------ Faddeev kernel and trimer


def test_kernel_vanishes_without_interaction(small_jacobi):
    v = PartialWaveKernel.zero(small_jacobi.k_grid)
    s = prepare_faddeev(v, M, small_jacobi, True)
    assert np.all(assemble_faddeev_kernel(s, 0.99 * 3 * M).matrix == 0.0)
    sol = solve_trimer(v, M, small_jacobi, setup=s)
    assert not sol.bound and sol.M3 is None


def test_kernel_rejects_z_above_threshold(small_setups):
    s = small_setups[True]
    with pytest.raises(ParameterError):
        assemble_faddeev_kernel(s, s.threshold + 1.0)


def test_kernel_finite_below_threshold(small_setups):
    s = small_setups[True]
    k = assemble_faddeev_kernel(s, s.threshold - 1e-3)
    assert np.all(np.isfinite(k.matrix))
    assert k.shape == s.m0.shape


@pytest.mark.parametrize("relativistic", [False, True])
def test_trimer_oracle_and_regression(small_jacobi, small_setups, relativistic):
    s = small_setups[relativistic]
    v = malfliet_tjon_kernel(MTParameters(), small_jacobi.k_grid)
    sol = solve_trimer(v, M, small_jacobi, relativistic, setup=s)
    assert sol.bound
    oracle = oracle_mass(s)
    assert abs(sol.M3 - oracle) / oracle < 1e-6
    # regression values on the (16, 12, 12) grid
    expected = 2797.541268 if relativistic else 2797.255456
    assert sol.M3 == pytest.approx(expected, abs=1e-5)
    assert sol.M3 < s.threshold
    assert symmetrization_residual(sol.psi, small_jacobi, M, relativistic) < 1e-8
    assert dominant_eta(s, sol.M3)[0] == pytest.approx(1.0, abs=1e-8)


def test_eta_monotone(small_setups):
    s = small_setups[True]
    zs = np.linspace(s.threshold - 60.0, s.threshold - 1e-3, 12)
    etas = [dominant_eta(s, z)[0] for z in zs]
    assert np.all(np.diff(etas) > 0)


def test_threshold_continuity(small_setups):
    s = small_setups[True]
    e = [dominant_eta(s, s.threshold - d)[0] for d in (1e-2, 1e-3, 1e-4)]
    assert np.all(np.isfinite(e))
    assert abs(e[2] - e[1]) < abs(e[1] - e[0]) + 1e-12


def test_relativistic_less_bound_than_nonrelativistic(small_setups):
    nr, rel = small_setups[False], small_setups[True]
    v = malfliet_tjon_kernel(MTParameters(), nr.grids.k_grid)
    a = solve_trimer(v, M, nr.grids, False, setup=nr).binding_energy
    b = solve_trimer(v, M, rel.grids, True, setup=rel).binding_energy
    assert b - a > 0.1


def test_grid_validation(small_jacobi):
    v = malfliet_tjon_kernel(MTParameters(), make_grid(10, 400.0))
    with pytest.raises(ParameterError):
        prepare_faddeev(v, M, small_jacobi)
    g = make_jacobi_grid(8, 6, 6)
    assert g.shape == (8, 6) and g.size == 48
