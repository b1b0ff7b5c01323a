import numpy as np
import pytest

from polaron_series.model import build_model, synthetic_model
from polaron_series.fock import build_fock
from polaron_series.quadratic import hessian_matrix
from polaron_series.series import make_series_context, expansion_coefficients


@pytest.fixture(scope="session")
def default_stack():
    """Desk-scale default configuration shared across the suite."""
    basis, sol, model = build_model(K=10, M=4)
    return basis, sol, model


@pytest.fixture(scope="session")
def default_model(default_stack):
    return default_stack[2]


@pytest.fixture(scope="session")
def default_hessian(default_model):
    return hessian_matrix(default_model)


@pytest.fixture(scope="session")
def default_fock():
    return build_fock(4, 10)


@pytest.fixture(scope="session")
def ground_ctx(default_model, default_fock, default_hessian):
    ctx = make_series_context(default_model, default_fock, n=1,
                              hm=default_hessian)
    expansion_coefficients(ctx, 4)
    return ctx


@pytest.fixture(scope="session")
def small_stack():
    """Small configuration for cheap structural tests."""
    basis, sol, model = build_model(K=6, M=2)
    fock = build_fock(2, 8)
    return basis, sol, model, fock


def engineered_degenerate():
    """Twofold-degenerate excited level with nonzero first-order splitting.

    Curvature eigenvalues (0.16, 0.64) make two quanta of the soft mode
    degenerate with one of the stiff mode; couplings inside the gapped
    electron block feed the off-diagonal level-matrix entry.
    """
    K = 4
    h = np.array([0.0, 1.0, 1.4, 1.9])
    tau_t = np.array([0.16, 0.64])
    beta = np.sqrt((1 - tau_t) * h[1:3] / 4.0)
    B = np.zeros((2, K, K))
    for j in range(2):
        B[j, 0, 1 + j] = B[j, 1 + j, 0] = beta[j]
    B[0, 1, 2] = B[0, 2, 1] = 0.30
    B[1, 1, 1] = 0.20
    B[1, 2, 2] = 0.15
    B[1, 1, 3] = B[1, 3, 1] = 0.10
    return synthetic_model(np.eye(K)[0], np.diag(h), B)


@pytest.fixture(scope="session")
def degenerate_ctx():
    model = engineered_degenerate()
    fock = build_fock(2, 36)
    ctx = make_series_context(model, fock, n=3, cluster_tol=1e-6)
    return model, fock, ctx
