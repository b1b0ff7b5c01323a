import numpy as np
import pytest

from polaron_series.domain import DomainSpec, build_basis, coupling_matrices
from polaron_series.pekar import (pekar_energy, pekar_energy_from_parts,
                                  solve_pekar, reduced_resolvent_matrix,
                                  reduced_resolvent_apply, verify_assumptions,
                                  SCFError, _ground_vector)


@pytest.fixture(scope="module")
def basis():
    return build_basis(DomainSpec("interval", np.pi, 8, 3))


@pytest.fixture(scope="module")
def sol(basis):
    return solve_pekar(basis)


def grid_energy_oracle(basis, c, scale=1.0):
    """Direct functional evaluation on the quadrature grid."""
    psi = c @ basis.values
    dpsi = (c * np.sqrt(basis.lambdas)) @ _cos_values(basis)
    kinetic = float(np.dot(basis.weights, dpsi ** 2))
    quart = 0.0
    for j in range(1, basis.M + 1):
        wj = basis.values[j - 1]
        coup = float(np.dot(basis.weights, psi ** 2 * wj))
        quart += (scale * basis.lambdas[j - 1] ** -0.5 * coup) ** 2
    return kinetic - quart


def _cos_values(basis):
    L = basis.spec.extent
    j = np.arange(1, basis.K + 1)
    return np.sqrt(2.0 / L) * np.cos(np.outer(j, basis.x) * (np.pi / L))


def test_energy_of_first_mode_matches_grid_oracle(basis):
    c = np.eye(basis.K)[0]
    assert abs(pekar_energy(basis, c) - grid_energy_oracle(basis, c)) <= 1e-11


def test_energy_requires_normalization(basis):
    with pytest.raises(ValueError):
        pekar_energy(basis, np.ones(basis.K))


def test_interaction_scaling_is_quadratic(basis):
    c = np.eye(basis.K)[0]
    B = coupling_matrices(basis)
    e1 = pekar_energy_from_parts(basis.lambdas, B, c)
    e2 = pekar_energy_from_parts(basis.lambdas, 2.0 * B, c)
    kinetic = basis.lambdas[0]
    assert abs((e2 - kinetic) - 4.0 * (e1 - kinetic)) <= 1e-12


def test_minimizer_beats_trial_and_meets_residual(basis, sol):
    c0 = np.eye(basis.K)[0]
    assert sol.e_pek <= pekar_energy(basis, c0) + 1e-14
    assert sol.residual <= 1e-13
    assert np.abs(np.diff(sol.energies)).size == 0 or \
        np.all(np.diff(sol.energies) <= 1e-13)


def test_minimizer_parity(basis, sol):
    # even-parity class: coefficients of even-index modes vanish
    assert np.abs(sol.c[1::2]).max() <= 1e-10


def test_solution_invariants(basis, sol):
    assert abs(np.linalg.norm(sol.c) - 1.0) <= 1e-12
    assert np.linalg.norm(sol.H0 @ sol.c) <= 1e-12
    assert sol.gap > 0
    assert abs(sol.mu_pek - (sol.e_pek - sol.phi_p @ sol.phi_p)) <= 1e-14
    B = coupling_matrices(basis)
    quart = np.einsum("jab,a,b->j", B, sol.c, sol.c)
    assert np.abs(sol.phi_p + quart).max() <= 1e-14


def test_reduced_resolvent_identities(basis, sol):
    R = reduced_resolvent_matrix(sol)
    assert np.linalg.norm(R @ sol.c) <= 1e-12
    rng = np.random.default_rng(7)
    Q = np.eye(basis.K) - np.outer(sol.c, sol.c)
    for _ in range(20):
        u = rng.standard_normal(basis.K)
        assert u @ R @ u <= 1e-12
        # defining identity on the complement range
        assert np.abs(R @ (sol.H0 @ u) + Q @ u).max() <= 1e-10
    assert np.abs(reduced_resolvent_apply(sol, sol.c)).max() <= 1e-12


def test_degenerate_scf_operator_rejected():
    with pytest.raises(SCFError):
        _ground_vector(np.eye(3))


def test_assumption_report(basis, sol):
    rep = verify_assumptions(basis, sol, n_restarts=4, n_samples=20, seed=3)
    assert rep["unique"]
    assert rep["restart_max_deviation"] <= 1e-8
    assert rep["coercivity_tau_hat"] > 0
    assert rep["h0_gap"] == sol.gap
    # the minimizer itself: zero gain at zero distance (structural limit check)
    c_eps = sol.c.copy()
    delta = pekar_energy(basis, c_eps) - sol.e_pek
    assert abs(delta) <= 1e-13
