import numpy as np
import pytest

from polaron_series.domain import DomainSpec, build_basis
from polaron_series.pekar import solve_pekar
from polaron_series.model import build_model, model_from_solution, synthetic_model
from polaron_series.quadratic import (hessian_matrix, ground_energy,
                                      ladder_spectrum, ladder_states,
                                      bogoliubov_kernel, HessianError,
                                      HessianModel)


def test_interaction_off_gives_identity():
    basis, sol, model = build_model(K=6, M=2, interaction_scale=0.0)
    hm = hessian_matrix(model)
    assert np.abs(hm.h - np.eye(2)).max() <= 1e-14
    assert np.allclose(hm.tau, 1.0, atol=1e-14)
    assert np.abs(hm.B_kernel).max() <= 1e-14


def test_hessian_window_and_negativity(default_hessian):
    hm = default_hessian
    assert hm.tau[0] > 0
    assert hm.tau[-1] <= 1 + 1e-10
    rng = np.random.default_rng(1)
    for _ in range(10):
        u = rng.standard_normal(hm.M)
        assert u @ hm.G @ u <= 1e-12
    assert abs(np.trace(np.eye(hm.M) - hm.h) + 4 * np.trace(hm.G)) <= 1e-12


def test_hessian_matches_finite_difference_of_reduced_energy(default_stack,
                                                             default_hessian):
    """Independent oracle: numerically differentiate the reduced field energy.

    F(phi) = min spec(diag(lambda) - 2 sum_j phi_j B_j) + |phi|^2 has Hessian
    2 h at the optimal field.
    """
    basis, sol, model = default_stack
    from polaron_series.domain import coupling_matrices
    B = coupling_matrices(basis)
    lam = np.diag(basis.lambdas)

    def F(phi):
        # electron feels +2 sum phi_j B_j; phi_p is the stationary point
        A = lam + 2.0 * np.einsum("j,jab->ab", phi, B)
        return np.linalg.eigvalsh(A)[0] + phi @ phi

    M = model.M
    h_fd = np.zeros((M, M))
    step = 1e-4
    for j in range(M):
        for k in range(M):
            pj = np.eye(M)[j] * step
            pk = np.eye(M)[k] * step
            h_fd[j, k] = (F(sol.phi_p + pj + pk) - F(sol.phi_p + pj - pk)
                          - F(sol.phi_p - pj + pk) + F(sol.phi_p - pj - pk)
                          ) / (4 * step ** 2)
    assert np.abs(h_fd / 2.0 - default_hessian.h).max() <= 1e-5


def test_nonpositive_tau_rejected():
    # strong synthetic coupling drives a curvature eigenvalue negative
    K = 3
    B = np.zeros((1, K, K))
    B[0, 0, 1] = B[0, 1, 0] = 1.0
    model = synthetic_model(np.eye(K)[0], np.diag([0.0, 1.0, 2.0]), B)
    with pytest.raises(HessianError):
        hessian_matrix(model)


def test_ground_energy_values():
    hm_id = HessianModel(G=np.zeros((2, 2)), h=np.eye(2), tau=np.ones(2),
                         modes=np.eye(2), B_kernel=np.zeros((2, 2)),
                         cosh_kernel=np.eye(2))
    assert ground_energy(hm_id) == 0.0
    hm1 = HessianModel(G=np.array([[-3 / 16]]), h=np.array([[0.25]]),
                       tau=np.array([0.25]), modes=np.eye(1),
                       B_kernel=None, cosh_kernel=None)
    assert abs(ground_energy(hm1) + 0.25) <= 1e-15


def test_ladder_enumeration(default_hessian):
    hm = default_hessian
    levels = ladder_spectrum(hm, count=8)
    assert levels[0].degeneracy == 1
    assert levels[0].occupations[0] == (0, 0, 0, 0)
    e0 = ground_energy(hm)
    assert abs(levels[0].energy - e0) <= 1e-14
    assert abs(levels[1].energy - (e0 + np.sqrt(hm.tau[0]))) <= 1e-14
    energies = [L.energy for L in levels]
    assert np.all(np.diff(energies) > 0)
    # default window: everything below ground + 1
    window = ladder_spectrum(hm, count=None)
    assert all(L.energy < e0 + 1.0 for L in window)


def test_ladder_degeneracy_by_construction():
    tau = np.array([0.49, 0.49, 0.81])
    G = np.diag((tau - 1) / 4.0)
    hm = hessian_matrix(synthetic_model(
        np.eye(4)[0], np.diag([0.0, 1.0, 1.0, 1.0]),
        _coupling_for_diag_G(G, K=4)))
    assert abs(hm.tau[0] - hm.tau[1]) <= 1e-14
    levels = ladder_spectrum(hm, count=4)
    assert levels[1].degeneracy == 2


def _coupling_for_diag_G(G, K):
    B = np.zeros((G.shape[0], K, K))
    for j in range(G.shape[0]):
        beta = np.sqrt(-G[j, j])
        B[j, 0, 1 + j] = B[j, 1 + j, 0] = beta
    return B


def test_bogoliubov_kernel_values(default_hessian):
    tau = np.array([1.0 / 16.0])
    hm = hessian_matrix(synthetic_model(
        np.eye(2)[0], np.diag([0.0, 1.0]),
        _coupling_for_diag_G(np.array([[(tau[0] - 1) / 4]]), K=2)))
    Bk, Ck = bogoliubov_kernel(hm)
    assert abs(Bk[0, 0] - 0.75) <= 1e-14
    assert abs(Ck[0, 0] - 1.25) <= 1e-14
    # squeeze-bound constant: B^2 <= C (1 - h) in the shared eigenbasis
    hm4 = default_hessian
    C = hm4.squeeze_bound_constant()
    lhs = hm4.B_kernel @ hm4.B_kernel
    rhs = C * (np.eye(hm4.M) - hm4.h)
    assert np.linalg.eigvalsh(rhs - lhs)[0] >= -1e-12
    assert np.isfinite(hm4.hs_norm_B())
