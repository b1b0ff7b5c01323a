"""Bundled electron-sector data shared by the fluctuation machinery.

ModelData carries exactly what the Fock-space and series modules need from
the electron problem: the minimizer c, the linearized operator H0 with its
reduced resolvent R, the coupling matrices B_j, and the classical field.
It can be built from a converged Pekar solution or assembled directly from
explicit matrices (used for engineered degenerate configurations in tests).

When built from a Pekar solution, the electron sector is stored in the
eigenrepresentation of the linearized operator: H0 becomes an exact
diagonal with a hard zero in the minimizer slot, c becomes the first unit
vector and R an exact diagonal.  That one-time rotation defines the model
of record; it removes every large cancellation from downstream quadratic
forms (the identities below are then float-exact, and the exact-
diagonalization cross-checks resolve remainders near 1e-13 * alpha^{-2}).
"""

import numpy as np
from dataclasses import dataclass

from .domain import DomainSpec, build_basis, coupling_matrices, squared_mode_matrix
from .pekar import solve_pekar, reduced_resolvent_matrix, GAP_THRESHOLD, GapError


@dataclass(frozen=True)
class ModelData:
    lambdas: np.ndarray          # (K,) electron eigenvalues
    c: np.ndarray                # (K,) minimizer coefficients, |c| = 1
    H0: np.ndarray               # (K, K), H0 c = 0
    R: np.ndarray                # (K, K) reduced resolvent, R <= 0
    B: np.ndarray                # (M, K, K) coupling matrices
    phi_p: np.ndarray            # (M,) optimal classical field
    gap: float
    e_pek: float = np.nan
    mu_pek: float = np.nan
    interaction_scale: float = 1.0
    basis: object = None         # Basis when built from a domain, else None
    q_mats: np.ndarray = None    # (M, K, K) multiplication by w_j^2 (for cutoff terms)

    elec_rotation: np.ndarray = None  # columns map the stored frame to mode coordinates

    @property
    def K(self):
        return self.c.shape[0]

    @property
    def M(self):
        return self.B.shape[0]

    def w_mats(self):
        """Multiplication matrices W_j = lambda_j^{1/2} B_j / scale, j <= M."""
        lam = self.lambdas[: self.M]
        return self.B * (np.sqrt(lam) / self.interaction_scale)[:, None, None]

    def vertex_mats(self):
        """F_j = B_j + phi_j * I, the mode coefficients of the shifted coupling."""
        eye = np.eye(self.K)
        return self.B + self.phi_p[:, None, None] * eye


def model_from_solution(basis, sol, interaction_scale=1.0):
    """Rotate the converged solution into the H0 eigenrepresentation."""
    V = sol.evecs.copy()
    if V[:, 0] @ sol.c < 0:
        V[:, 0] = -V[:, 0]
    for k in range(1, basis.K):  # deterministic sign gauge
        if V[np.argmax(np.abs(V[:, k])), k] < 0:
            V[:, k] = -V[:, k]
    he = sol.evals.copy()
    he[0] = 0.0
    c = np.zeros(basis.K)
    c[0] = 1.0
    inv = np.zeros(basis.K)
    inv[1:] = -1.0 / he[1:]
    B_modes = coupling_matrices(basis, scale=interaction_scale)[: basis.M]
    B = np.array([V.T @ Bj @ V for Bj in B_modes])
    B = 0.5 * (B + np.transpose(B, (0, 2, 1)))
    phi_p = -B[:, 0, 0].copy()
    q = np.array([V.T @ squared_mode_matrix(basis, j) @ V
                  for j in range(1, basis.M + 1)])
    q = 0.5 * (q + np.transpose(q, (0, 2, 1)))
    return ModelData(
        lambdas=basis.lambdas.copy(),
        c=c,
        H0=np.diag(he),
        R=np.diag(inv),
        B=B,
        phi_p=phi_p,
        gap=sol.gap,
        e_pek=sol.e_pek,
        mu_pek=sol.mu_pek,
        interaction_scale=interaction_scale,
        basis=basis,
        q_mats=q,
        elec_rotation=V,
    )


def build_model(kind="interval", extent=np.pi, K=10, M=4, interaction_scale=1.0,
                quadrature_points=0, **scf_opts):
    """Basis + Pekar solve + bundle, the standard construction path."""
    spec = DomainSpec(kind=kind, extent=extent, K=K, M=M,
                      quadrature_points=quadrature_points)
    basis = build_basis(spec)
    sol = solve_pekar(basis, interaction_scale=interaction_scale, **scf_opts)
    return basis, sol, model_from_solution(basis, sol, interaction_scale)


def synthetic_model(c, H0, B, lambdas=None):
    """Assemble ModelData from explicit matrices.

    Intended for engineered spectra (exact Hessian degeneracies etc.).  H0
    must annihilate c; the field is derived from its definition
    phi_j = -c^T B_j c.  lambdas defaults to 1..K (it only enters cutoff
    bookkeeping, which synthetic configurations do not exercise).
    """
    c = np.asarray(c, float)
    c = c / np.linalg.norm(c)
    H0 = np.asarray(H0, float)
    B = np.asarray(B, float)
    K = c.shape[0]
    if np.linalg.norm(H0 @ c) > 1e-10:
        raise ValueError("H0 must annihilate the coefficient vector")
    evals, evecs = np.linalg.eigh(H0)
    k0 = int(np.argmin(np.abs(evals)))
    if abs(evals[k0]) > 1e-10:
        raise ValueError("H0 has no (near-)zero eigenvalue")
    others = np.delete(evals, k0)
    if others.min() <= GAP_THRESHOLD:
        raise GapError("synthetic H0 gap %.3e below threshold" % others.min())
    inv = np.zeros_like(evals)
    keep = np.arange(K) != k0
    inv[keep] = -1.0 / evals[keep]
    R = (evecs * inv) @ evecs.T
    phi_p = -np.einsum("jab,a,b->j", B, c, c)
    if lambdas is None:
        lambdas = np.arange(1.0, K + 1.0)
    return ModelData(
        lambdas=np.asarray(lambdas, float),
        c=c, H0=H0, R=R, B=B, phi_p=phi_p,
        gap=float(others.min()),
    )
