"""Pekar minimizer, its linearization H0, and the reduced resolvent.

The semiclassical electron energy in mode coordinates is

    E(c) = c^T diag(lambda) c - sum_j (c^T B_j c)^2,   |c| = 1,

obtained by optimizing the classical field out of the coupled functional;
the optimal field components are phi_j = -c^T B_j c.  The minimizer solves
the self-consistent eigenvalue problem

    [diag(lambda) - 2 sum_j (c^T B_j c) B_j] c = mu c,

and H0 is that operator shifted so H0 c = 0.  Its spectral gap above zero
feeds the reduced resolvent R = -Q (Q H0 Q)^{-1} Q, a bounded negative
operator used by every higher-order construction.
"""

import numpy as np
from dataclasses import dataclass

from .domain import coupling_matrices


class SCFError(RuntimeError):
    """Self-consistent iteration failed to converge or hit a degeneracy."""


class GapError(RuntimeError):
    """Spectral gap of H0 below the conditioning threshold."""


# keeps (Q H0 Q)^{-1} condition within ~1e8 in double precision
GAP_THRESHOLD = 1e-8


@dataclass(frozen=True)
class PekarSolution:
    """Converged minimizer data.

    c is the unit coefficient vector in the positivity gauge, phi_p the
    optimal field (length M), H0 the linearized operator with H0 c = 0,
    and (evals, evecs) its eigendecomposition with evals[0] ~ 0.
    """

    c: np.ndarray
    e_pek: float
    phi_p: np.ndarray
    mu_pek: float
    H0: np.ndarray
    gap: float
    evals: np.ndarray
    evecs: np.ndarray
    residual: float
    iterations: int
    energies: np.ndarray


def pekar_energy_from_parts(lambdas, B, c):
    """E(c) for explicit mode data; B has shape (M, K, K)."""
    c = np.asarray(c, float)
    nrm = np.linalg.norm(c)
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError("coefficient vector must be normalized")
    quart = np.einsum("jab,a,b->j", B, c, c)
    return float(c @ (lambdas * c) - np.sum(quart ** 2))


def pekar_energy(basis, c, interaction_scale=1.0):
    """Pekar energy of a normalized coefficient vector on the given basis."""
    B = coupling_matrices(basis, scale=interaction_scale)
    return pekar_energy_from_parts(basis.lambdas, B, c)


def _scf_operator(lambdas, B, c):
    quart = np.einsum("jab,a,b->j", B, c, c)
    return np.diag(lambdas) - 2.0 * np.einsum("j,jab->ab", quart, B)


def _ground_vector(A, degeneracy_tol=1e-10):
    w, V = np.linalg.eigh(A)
    if w[1] - w[0] < degeneracy_tol * max(1.0, abs(w[0])):
        raise SCFError(
            "ground state of the self-consistent operator is degenerate "
            "(gap %.3e)" % (w[1] - w[0])
        )
    return w, V[:, 0]


def solve_pekar(basis, tol=1e-13, max_iter=600, damping=0.5, start=None,
                interaction_scale=1.0):
    """Damped self-consistent minimization of the Pekar energy.

    Each step proposes the ground vector of the linearized operator and
    backtracks the mixing weight until the energy does not increase.  Near
    the fixed point the iteration runs undamped, which converges linearly
    and pushes the residual |H0 c| to the eigensolver floor.
    """
    lambdas = basis.lambdas
    B = coupling_matrices(basis, scale=interaction_scale)
    K = basis.K

    if start is None:
        c = np.zeros(K)
        c[0] = 1.0
    else:
        c = np.asarray(start, float)
        c = c / np.linalg.norm(c)

    energies = [pekar_energy_from_parts(lambdas, B, c)]
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        A = _scf_operator(lambdas, B, c)
        w, v = _ground_vector(A)
        if np.dot(v, c) < 0:
            v = -v
        mu = c @ A @ c
        residual = float(np.linalg.norm(A @ c - mu * c))
        if residual <= tol:
            break
        # pure eigenvector step once close; damped line search otherwise
        if residual < 1e-6:
            c_new = v
            e_new = pekar_energy_from_parts(lambdas, B, c_new)
        else:
            theta = damping
            e_cur = energies[-1]
            while True:
                cand = (1.0 - theta) * c + theta * v
                cand /= np.linalg.norm(cand)
                e_new = pekar_energy_from_parts(lambdas, B, cand)
                if e_new <= e_cur + 1e-14 * max(1.0, abs(e_cur)) or theta < 1e-6:
                    break
                theta *= 0.5
            c_new = cand
        c = c_new
        energies.append(e_new)
    else:
        raise SCFError(
            "no convergence after %d iterations (residual %.3e)" % (max_iter, residual)
        )

    # positivity gauge: wave function nonnegative at its max-magnitude point
    psi = c @ basis.values
    if psi[np.argmax(np.abs(psi))] < 0:
        c = -c

    quart = np.einsum("jab,a,b->j", B, c, c)
    phi_p = -quart[: basis.M]
    e_pek = pekar_energy_from_parts(lambdas, B, c)
    mu_pek = e_pek - float(phi_p @ phi_p)
    H0 = _scf_operator(lambdas, B, c) - mu_pek * np.eye(K)
    H0 = 0.5 * (H0 + H0.T)
    evals, evecs = np.linalg.eigh(H0)
    gap = float(evals[1])
    if gap <= GAP_THRESHOLD:
        raise GapError("H0 gap %.3e below threshold %.1e" % (gap, GAP_THRESHOLD))
    return PekarSolution(
        c=c, e_pek=e_pek, phi_p=phi_p, mu_pek=mu_pek, H0=H0, gap=gap,
        evals=evals, evecs=evecs, residual=residual, iterations=it,
        energies=np.array(energies),
    )


def reduced_resolvent_matrix(sol):
    """R = -Q (Q H0 Q)^{-1} Q as a dense matrix (kernel direction excluded)."""
    inv = np.zeros_like(sol.evals)
    inv[1:] = -1.0 / sol.evals[1:]
    return (sol.evecs * inv) @ sol.evecs.T


def reduced_resolvent_apply(sol, u):
    """Apply R to an electron vector."""
    return reduced_resolvent_matrix(sol) @ np.asarray(u, float)


def verify_assumptions(basis, sol, n_restarts=8, n_samples=40, seed=0,
                       interaction_scale=1.0):
    """Numerical check of minimizer uniqueness and quadratic coercivity.

    (a) restarts the SCF from random initial vectors and records the largest
    deviation from the reference minimizer (up to sign); (b) samples
    normalized states near and far from the minimizer and reports the
    smallest observed ratio (E(psi) - e_pek) / |psi - psi_P|_{H1}^2; (c)
    reports the H0 gap.  Report only; nothing is asserted here.
    """
    rng = np.random.default_rng(seed)
    lambdas = basis.lambdas
    B = coupling_matrices(basis, scale=interaction_scale)

    max_dev = 0.0
    for _ in range(n_restarts):
        c0 = rng.standard_normal(basis.K)
        alt = solve_pekar(basis, start=c0, interaction_scale=interaction_scale)
        dev = min(np.linalg.norm(alt.c - sol.c), np.linalg.norm(alt.c + sol.c))
        max_dev = max(max_dev, float(dev))

    h1 = 1.0 + lambdas  # truncated-basis H1 weight
    ratios = []
    for i in range(n_samples):
        if i % 2 == 0:
            d = rng.standard_normal(basis.K)
            psi = sol.c + 10.0 ** rng.uniform(-4, -1) * d / np.linalg.norm(d)
        else:
            psi = rng.standard_normal(basis.K)
        psi = psi / np.linalg.norm(psi)
        if np.dot(psi, sol.c) < 0:
            psi = -psi
        dist2 = float((psi - sol.c) @ (h1 * (psi - sol.c)))
        if dist2 < 1e-24:
            continue
        gain = pekar_energy_from_parts(lambdas, B, psi) - sol.e_pek
        ratios.append(gain / dist2)
    tau_hat = float(min(ratios)) if ratios else np.nan

    return {
        "restart_max_deviation": max_dev,
        "unique": bool(max_dev <= 1e-8),
        "coercivity_tau_hat": tau_hat,
        "coercive": bool(tau_hat > 0),
        "h0_gap": sol.gap,
        "n_restarts": n_restarts,
        "n_samples": n_samples,
    }
