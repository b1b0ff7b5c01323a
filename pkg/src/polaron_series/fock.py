"""Truncated bosonic Fock space over M modes with a total-occupancy cap.

States are occupation tuples (n_1, ..., n_M) with sum <= N_max, listed
lexicographically; dim = C(M + N_max, M).  Ladder operators are sparse;
quadratic Hamiltonians are assembled dense, which is comfortable at the
dimensions this package targets (a few thousand).
"""

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from dataclasses import dataclass
from math import comb


class FockError(RuntimeError):
    pass


@dataclass(frozen=True)
class FockSpace:
    M: int
    N_max: int
    occs: np.ndarray      # (dim, M) int occupation table, lexicographic
    index: dict           # occupation tuple -> row

    @property
    def dim(self):
        return self.occs.shape[0]

    def vacuum(self):
        v = np.zeros(self.dim)
        v[self.index[(0,) * self.M]] = 1.0
        return v

    def interior(self, margin=2):
        """Boolean mask of states with total occupancy <= N_max - margin."""
        return self.occs.sum(axis=1) <= self.N_max - margin


def build_fock(M, N_max, dim_budget=200_000):
    if M < 1 or N_max < 1:
        raise FockError("M and N_max must be >= 1")
    dim = comb(M + N_max, M)
    if dim > dim_budget:
        raise FockError("Fock dimension %d exceeds budget %d" % (dim, dim_budget))
    rows = []

    def rec(prefix, rem):
        if len(prefix) == M:
            rows.append(tuple(prefix))
            return
        for n in range(rem + 1):
            rec(prefix + [n], rem - n)

    rec([], N_max)
    rows.sort()
    occs = np.array(rows, dtype=np.int64)
    assert occs.shape[0] == dim
    return FockSpace(M=M, N_max=N_max, occs=occs,
                     index={t: i for i, t in enumerate(rows)})


def ladder(fock, j):
    """(a_j, a_j^dagger) for mode j (1-based), as CSR matrices."""
    if not (1 <= j <= fock.M):
        raise IndexError("mode index out of range: %d" % j)
    col = j - 1
    rows, cols, vals = [], [], []
    for i in range(fock.dim):
        n = fock.occs[i, col]
        if n > 0:
            t = fock.occs[i].copy()
            t[col] -= 1
            rows.append(fock.index[tuple(t)])
            cols.append(i)
            vals.append(np.sqrt(float(n)))
    a = sp.csr_matrix((vals, (rows, cols)), shape=(fock.dim, fock.dim))
    return a, a.T.tocsr()


def number_diagonal(fock):
    return fock.occs.sum(axis=1).astype(float)


def number_operator(fock):
    return sp.diags(number_diagonal(fock)).tocsr()


def field_operator(fock, f):
    """phi(f) = sum_j f_j (a_j + a_j^dagger); f real of length M."""
    f = np.asarray(f, float)
    if f.shape != (fock.M,):
        raise ValueError("f must have length M")
    op = sp.csr_matrix((fock.dim, fock.dim))
    for j in range(1, fock.M + 1):
        if f[j - 1] == 0.0:
            continue
        a, ad = ladder(fock, j)
        op = op + f[j - 1] * (a + ad)
    return op.tocsr()


def mode_operators(fock):
    """Lists (a_j), (a_j^dagger), (phi_j) for all modes, plus the number diagonal."""
    an, cr, phi = [], [], []
    for j in range(1, fock.M + 1):
        a, ad = ladder(fock, j)
        an.append(a)
        cr.append(ad)
        phi.append((a + ad).tocsr())
    return an, cr, phi, number_diagonal(fock)


def bogoliubov_hamiltonian(fock, G):
    """Dense quadratic field Hamiltonian N + sum_jk G[j,k] phi_j phi_k."""
    G = np.asarray(G, float)
    if G.shape != (fock.M, fock.M):
        raise ValueError("G must be M x M")
    _, _, phi, ndiag = mode_operators(fock)
    H = np.diag(ndiag)
    for j in range(fock.M):
        for k in range(fock.M):
            if G[j, k] != 0.0:
                H += G[j, k] * (phi[j] @ phi[k]).toarray()
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class EigenGroup:
    n: int                 # 1-based level index
    energy: float
    degeneracy: int
    vectors: np.ndarray    # (dim, d) orthonormal, deterministic gauge
    indices: np.ndarray    # positions inside the full ascending spectrum
    evals: np.ndarray      # full spectrum (ascending)
    evecs: np.ndarray

    def projector(self):
        return self.vectors @ self.vectors.T


def _cluster(evals, tol):
    groups = [[0]]
    for i in range(1, len(evals)):
        if evals[i] - evals[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def eigenpair_group(H_fock, n, cluster_tol=1e-7):
    """n-th eigenvalue group (1-based) of a dense hermitian Fock operator.

    States are clustered at cluster_tol / 100; a boundary gap below
    cluster_tol then signals an ambiguous cluster and raises.
    """
    evals, evecs = np.linalg.eigh(H_fock)
    groups = _cluster(evals, cluster_tol / 100.0)
    if n < 1 or n > len(groups):
        raise FockError("level %d outside the enumerated window" % n)
    idx = np.array(groups[n - 1])
    lo, hi = idx[0], idx[-1]
    if lo > 0 and evals[lo] - evals[lo - 1] < cluster_tol:
        raise FockError("ambiguous cluster boundary below level %d" % n)
    if hi < len(evals) - 1 and evals[hi + 1] - evals[hi] < cluster_tol:
        raise FockError("ambiguous cluster boundary above level %d" % n)
    vecs = evecs[:, idx].copy()
    for k in range(vecs.shape[1]):  # deterministic sign gauge
        p = np.argmax(np.abs(vecs[:, k]))
        if vecs[p, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return EigenGroup(n=n, energy=float(evals[idx].mean()), degeneracy=len(idx),
                      vectors=vecs, indices=idx, evals=evals, evecs=evecs)


def fock_reduced_resolvent(group):
    """Dense matrix of -QQ (QQ (H - E) QQ)^{-1} QQ for the group's level."""
    w = np.zeros_like(group.evals)
    keep = np.ones(len(group.evals), bool)
    keep[group.indices] = False
    w[keep] = 1.0 / (group.energy - group.evals[keep])
    return (group.evecs * w) @ group.evecs.T


def bogoliubov_unitary(fock, hm):
    """Fock-space squeeze transform diagonalizing the quadratic Hamiltonian.

    Realized as a single orthogonal exponential exp((1/2) sum_jk kappa_jk
    (a_j a_k - a_j^dag a_k^dag)) with kappa = -(1/4) log h, evaluated in the
    Hessian eigenbasis.  The truncated generator is exactly antisymmetric,
    so the result is orthogonal to machine precision regardless of the cap;
    truncation shows up only in how faithfully the conjugation action
    reproduces the squeeze relations near the cap.
    """
    kappa = (hm.modes * (-0.25 * np.log(hm.tau))) @ hm.modes.T
    an, cr, _, _ = mode_operators(fock)
    gen = sp.csr_matrix((fock.dim, fock.dim))
    for j in range(fock.M):
        for k in range(fock.M):
            if kappa[j, k] != 0.0:
                gen = gen + 0.5 * kappa[j, k] * (an[j] @ an[k] - cr[j] @ cr[k])
    U = expm(gen.toarray())
    inter = fock.interior(2)
    defect = np.abs((U.T @ U - np.eye(fock.dim))[np.ix_(inter, inter)]).max()
    return U, {"orthogonality_defect_interior": float(defect)}


def squeeze_relation_residual(fock, U, hm, margin=2):
    """Max interior deviation of U a_j^dag U^T from its squeeze image.

    The target is a^dag(cosh_kernel e_j) + a(B_kernel e_j); rows and columns
    are restricted to states with occupancy <= N_max - margin.
    """
    an, cr, _, _ = mode_operators(fock)
    inter = fock.interior(margin)
    worst = 0.0
    for j in range(fock.M):
        lhs = U @ cr[j].toarray() @ U.T
        rhs = np.zeros_like(lhs)
        for m in range(fock.M):
            if hm.cosh_kernel[m, j] != 0.0:
                rhs += hm.cosh_kernel[m, j] * cr[m].toarray()
            if hm.B_kernel[m, j] != 0.0:
                rhs += hm.B_kernel[m, j] * an[m].toarray()
        dev = np.abs((lhs - rhs)[np.ix_(inter, inter)]).max()
        worst = max(worst, float(dev))
    return worst


def dgamma(fock, one_body):
    """Second quantization sum_jk A[j,k] a_j^dag a_k of a one-body matrix."""
    A = np.asarray(one_body, float)
    an, cr, _, _ = mode_operators(fock)
    out = np.zeros((fock.dim, fock.dim))
    for j in range(fock.M):
        for k in range(fock.M):
            if A[j, k] != 0.0:
                out += A[j, k] * (cr[j] @ an[k]).toarray()
    return out


def diagonalization_residual(fock, U, H_fock, hm, margin=2):
    """Max interior deviation of U H U^T from dGamma(h^{1/2}) + ground energy."""
    half = (hm.modes * np.sqrt(hm.tau)) @ hm.modes.T
    e0 = 0.5 * float(np.sum(np.sqrt(hm.tau) - 1.0))
    target = dgamma(fock, half) + e0 * np.eye(fock.dim)
    inter = fock.interior(margin)
    dev = np.abs((U @ H_fock @ U.T - target)[np.ix_(inter, inter)]).max()
    return float(dev)
