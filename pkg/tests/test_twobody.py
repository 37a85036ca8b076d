from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from poincare_fewbody.errors import ContractViolation, ParameterError, UnphysicalPotentialError
from poincare_fewbody.kinematics import LorentzTransform
from poincare_fewbody.numerics import graded_eigensolve, make_grid
from poincare_fewbody.twobody import (
    MTParameters,
    PartialWaveKernel,
    build_dynamical_irrep,
    coester_embed,
    malfliet_tjon_kernel,
    malfliet_tjon_potential,
    nr_hamiltonian,
    reduced_mass,
    solve_bound_states,
    solve_nr_bound_states,
    solve_phase_shifts,
)

M = 938.92
K_ON = np.linspace(10.0, 500.0, 10)


def _wrap(d):
    return (np.asarray(d) + np.pi / 2) % np.pi - np.pi / 2


def _fourier_bessel(params, kp, k):
    """(2/pi) int r^2 j0(k'r) V(r) j0(kr) dr for the Yukawa sum, by adaptive quadrature."""
    total = 0.0
    for lam, mu in params.terms():
        # sin(k'r) sin(kr) = [cos((k-k')r) - cos((k+k')r)] / 2, finite at r = 0 after the 1/r
        f = lambda r, lam=lam, mu=mu: lam * np.exp(-mu * r) * (np.cos((k - kp) * r) - np.cos((k + kp) * r)) / (2 * r)  # noqa: E731
        val, _ = quad(f, 0.0, 60.0 / mu, limit=400, epsabs=0, epsrel=1e-13)
        total += val
    return 2.0 / np.pi * total / (k * kp)


def test_mt_kernel_matches_coordinate_space_oracle():
    rng = np.random.default_rng(20)
    params = MTParameters()
    for kp, k in rng.uniform(1.0, 800.0, size=(20, 2)):
        ref = _fourier_bessel(params, kp, k)
        assert malfliet_tjon_potential(params, kp, k) == pytest.approx(ref, rel=1e-9, abs=1e-18)


def test_mt_kernel_zero_strength_and_limits():
    g = make_grid(12, 400.0)
    assert np.all(malfliet_tjon_kernel(MTParameters(0.0, 600.0, 0.0, 300.0), g).values == 0.0)
    p = MTParameters(1.0, 300.0, 0.0, 300.0)
    # k = 0 limit: lambda / (2 pi) * 4 / (k'^2 + mu^2)
    assert malfliet_tjon_potential(p, 50.0, 0.0) == pytest.approx(4 / (2 * np.pi * (2500 + 300.0**2)))
    assert malfliet_tjon_potential(p, 75.0, 75.0) > 0
    with pytest.raises(ParameterError):
        MTParameters(1.0, -1.0, 0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 2000.0), st.floats(0.0, 2000.0))
def test_mt_kernel_symmetric(kp, k):
    p = MTParameters()
    assert malfliet_tjon_potential(p, kp, k) == pytest.approx(malfliet_tjon_potential(p, k, kp), rel=1e-14)


def test_kernel_hermiticity_enforced():
    g = make_grid(6, 100.0)
    with pytest.raises(ContractViolation):
        PartialWaveKernel.from_function(lambda kp, k: kp + 2 * k, g)


@pytest.mark.parametrize("m1,m2", [(M, M), (938.27, 1875.6)])
def test_coester_spectral_map(mt_kernel_96, m1, m2):
    mu = reduced_mass(m1, m2)
    k = mt_kernel_96.grid.nodes
    e, _ = graded_eigensolve(k * k / (2 * mu), mt_kernel_96.weighted())
    expected = np.sqrt(2 * mu * e + m1**2) + np.sqrt(2 * mu * e + m2**2)
    op = coester_embed(mt_kernel_96, m1, m2)
    got, _ = graded_eigensolve(op.kinetic, op.interaction)
    assert np.max(np.abs(got - expected) / expected) < 1e-10


def test_coester_free_case_is_diagonal():
    g = make_grid(10, 300.0)
    op = coester_embed(PartialWaveKernel.zero(g), 900.0, 1000.0)
    k = g.nodes
    assert np.allclose(op.matrix, np.diag(np.sqrt(900.0**2 + k * k) + np.sqrt(1000.0**2 + k * k)))
    assert solve_bound_states(op).bound_masses.size == 0


def test_coester_rejects_unphysical_binding():
    g = make_grid(24, 400.0)
    v = malfliet_tjon_kernel(MTParameters(0.0, 600.0, -400.0, 300.0), g)
    with pytest.raises(UnphysicalPotentialError):
        coester_embed(v, 10.0, 10.0)


def test_bound_state_values_and_wavefunction_identity(mt_kernel_96):
    rel = solve_bound_states(coester_embed(mt_kernel_96, M, M))
    nr = solve_nr_bound_states(mt_kernel_96, M, M)
    assert len(rel.bound_masses) == 1 and len(nr.bound_masses) == 1
    # regression values for the default parameters
    assert rel.binding_energies[0] == pytest.approx(-2.2317, abs=2e-4)
    assert nr.binding_energies[0] == pytest.approx(-2.2304, abs=2e-4)
    # the relativistic mass is the spectral image of the NR energy
    mu = M / 2
    e = nr.binding_energies[0]
    assert rel.bound_masses[0] == pytest.approx(2 * np.sqrt(2 * mu * e + M * M), rel=1e-12)
    g = mt_kernel_96.grid
    w = g.weights * g.nodes**2
    phi_r, phi_n = rel.bound_wavefunctions[0], nr.bound_wavefunctions[0]
    assert np.sum(w * phi_r**2) == pytest.approx(1.0, abs=1e-10)
    assert abs(abs(np.sum(w * phi_r * phi_n)) - 1) < 1e-10


def test_bound_state_grid_convergence(mt_kernel_48, mt_kernel_96):
    a = solve_bound_states(coester_embed(mt_kernel_48, M, M)).bound_masses[0]
    b = solve_bound_states(coester_embed(mt_kernel_96, M, M)).bound_masses[0]
    assert abs(a - b) < 1e-3


@pytest.mark.parametrize("method", ["invariance", "direct"])
def test_phase_equivalence(mt_kernel_96, method):
    d_rel = solve_phase_shifts(mt_kernel_96, True, K_ON, M, M, method=method)
    d_nr = solve_phase_shifts(mt_kernel_96, False, K_ON, M, M)
    assert np.max(np.abs(_wrap(d_rel - d_nr))) < 1e-8


def test_phase_equivalence_unequal_masses():
    v = malfliet_tjon_kernel(MTParameters(), make_grid(64, 400.0))
    k = np.array([30.0, 150.0, 420.0])
    d_rel = solve_phase_shifts(v, True, k, 938.27, 1875.6, method="direct")
    d_nr = solve_phase_shifts(v, False, k, 938.27, 1875.6)
    assert np.max(np.abs(_wrap(d_rel - d_nr))) < 1e-8


def test_phase_shift_regression(mt_kernel_96):
    d = solve_phase_shifts(mt_kernel_96, False, [10.0, 118.88888888888889, 500.0], M, M)
    assert np.allclose(d, [-0.27598, 1.27759, -0.06757], atol=2e-5)


def test_phase_at_grid_node_is_regular(mt_kernel_48):
    k0 = mt_kernel_48.grid.nodes[20]
    a = solve_phase_shifts(mt_kernel_48, True, [k0], M, M, method="direct")
    b = solve_phase_shifts(mt_kernel_48, False, [k0], M, M)
    assert np.isfinite(a).all() and abs(_wrap(a - b)[0]) < 1e-8


def test_phase_zero_potential_and_born_sign():
    g = make_grid(48, 400.0)
    z = solve_phase_shifts(PartialWaveKernel.zero(g), True, K_ON, M, M, method="direct")
    assert np.all(z == 0.0)
    weak = malfliet_tjon_kernel(MTParameters(0.0, 600.0, -1e-4, 300.0), g)
    k = np.array([5.0, 20.0])
    d = solve_phase_shifts(weak, False, k, M, M)
    born = np.arctan(-np.pi * (M / 2) * k * malfliet_tjon_potential(weak_params := MTParameters(0.0, 600.0, -1e-4, 300.0), k, k))
    assert np.all(d > 0)
    assert np.allclose(d, born, rtol=1e-3)
    assert weak_params.lambda_a < 0


def test_phase_input_validation(mt_kernel_48):
    with pytest.raises(ParameterError):
        solve_phase_shifts(mt_kernel_48, False, [-1.0], M, M)
    with pytest.raises(ParameterError):
        solve_phase_shifts(mt_kernel_48, False, [1e9], M, M)
    with pytest.raises(ParameterError):
        solve_phase_shifts(mt_kernel_48, True, [10.0], M, M, method="other")


def test_dynamical_irrep(mt_kernel_48):
    sol = solve_bound_states(coester_embed(mt_kernel_48, M, M))
    ev = build_dynamical_irrep(sol, "instant")
    assert ev.mass == pytest.approx(sol.bound_masses[0])
    src = [10.0, -20.0, 30.0]
    ident = ev(1.0, LorentzTransform.identity(), np.zeros(4), src)
    assert np.allclose(ident.spin_matrix, np.eye(3)) and ident.weight == pytest.approx(1.0)
    from poincare_fewbody.irreps import wigner_function

    rot = LorentzTransform.rotation([0, 1, 1], 0.8)
    a = np.array([0.0, 0.01, 0.0, 0.02])
    r1 = ev(1.0, rot, a, src)
    r2 = wigner_function("instant", 2 * M, 1.0, rot, a, src)
    assert np.allclose(r1.spin_matrix, r2.spin_matrix) and r1.weight == pytest.approx(r2.weight)
    boost = LorentzTransform.boost_z(0.5)
    b1 = ev(1.0, boost, np.zeros(4), src)
    b2 = wigner_function("instant", 2 * M, 1.0, boost, np.zeros(4), src)
    assert not np.allclose(b1.target_coords, b2.target_coords, rtol=1e-9, atol=0)
    with pytest.raises(ParameterError):
        build_dynamical_irrep(sol, "instant", index=3)
