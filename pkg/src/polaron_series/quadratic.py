"""Gaussian-fluctuation model: Hessian kernel, squeeze kernel, ladder spectrum.

The one-phonon Hessian is h = I + 4 G with

    G[j, k] = (B_j c)^T R (B_k c),

a negative-semidefinite matrix, so the eigenvalues tau_k of h lie in (0, 1]
for admissible couplings.  The quadratic field Hamiltonian built on G has
ground energy  (1/2) sum_k (sqrt(tau_k) - 1)  and excitation ladder
sum_k nu_k sqrt(tau_k); the squeeze kernel of its diagonalizing Bogoliubov
map is  B = (h^{-1/4} - h^{1/4}) / 2.
"""

import heapq
import numpy as np
from dataclasses import dataclass


class HessianError(RuntimeError):
    """Hessian spectrum outside the admissible (0, 1] window."""


@dataclass(frozen=True)
class HessianModel:
    G: np.ndarray           # (M, M), negative semidefinite
    h: np.ndarray           # I + 4 G
    tau: np.ndarray         # ascending eigenvalues of h
    modes: np.ndarray       # eigenvectors, columns matching tau
    B_kernel: np.ndarray    # (h^{-1/4} - h^{1/4}) / 2
    cosh_kernel: np.ndarray  # (1 + B_kernel^2)^{1/2}

    @property
    def M(self):
        return self.tau.shape[0]

    def hs_norm_B(self):
        return float(np.linalg.norm(self.B_kernel))

    def squeeze_bound_constant(self):
        """Smallest C with B_kernel^2 <= C (I - h), from the shared eigenbasis."""
        b2 = 0.25 * (self.tau ** -0.5 + self.tau ** 0.5 - 2.0)
        gap = 1.0 - self.tau
        ratios = np.where(gap > 1e-14, b2 / np.where(gap > 1e-14, gap, 1.0), 0.0)
        return float(ratios.max()) if ratios.size else 0.0


def hessian_matrix(model):
    """Assemble and diagonalize h = I + 4 G from a ModelData bundle."""
    u = np.einsum("jab,b->ja", model.B, model.c)      # (M, K): B_j c
    G = u @ model.R @ u.T
    G = 0.5 * (G + G.T)
    h = np.eye(model.M) + 4.0 * G
    tau, modes = np.linalg.eigh(h)
    if tau[0] <= 0:
        raise HessianError("nonpositive Hessian eigenvalue %.3e" % tau[0])
    if tau[-1] > 1.0 + 1e-10:
        raise HessianError("Hessian eigenvalue above one: %.12f" % tau[-1])
    q = tau ** 0.25
    Bk = (modes * (0.5 * (1.0 / q - q))) @ modes.T
    ck = (modes * (0.5 * (1.0 / q + q))) @ modes.T
    return HessianModel(G=G, h=h, tau=tau, modes=modes,
                        B_kernel=0.5 * (Bk + Bk.T), cosh_kernel=0.5 * (ck + ck.T))


def ground_energy(hm):
    """Lowest fluctuation eigenvalue, (1/2) sum_k (sqrt(tau_k) - 1) <= 0."""
    return float(0.5 * np.sum(np.sqrt(hm.tau) - 1.0))


@dataclass(frozen=True)
class LadderLevel:
    index: int               # 1-based level index (grouped)
    energy: float
    occupations: tuple       # one representative tuple per degenerate state
    degeneracy: int


def ladder_states(hm, count=None):
    """The `count` smallest ladder energies with their occupation tuples.

    Best-first search over the occupation lattice; when count is None the
    enumeration stops at the default window, ground + 1.
    """
    e0 = ground_energy(hm)
    freqs = np.sqrt(hm.tau)
    M = hm.M
    limit = e0 + 1.0 if count is None else np.inf
    heap = [(e0, (0,) * M)]
    seen = {(0,) * M}
    out = []
    while heap:
        e, occ = heapq.heappop(heap)
        if count is None and e >= limit - 1e-12:
            break
        out.append((e, occ))
        if count is not None and len(out) >= count:
            break
        last = 0
        for k in range(M - 1, -1, -1):
            if occ[k] > 0:
                last = k
                break
        # canonical successor rule keeps every tuple reachable exactly once
        for k in range(last, M):
            nxt = list(occ)
            nxt[k] += 1
            t = tuple(nxt)
            if t not in seen:
                seen.add(t)
                heapq.heappush(heap, (e + freqs[k], t))
    return out


def ladder_spectrum(hm, count=None, degeneracy_tol=1e-9):
    """Grouped ladder levels (ascending), degeneracies counted within tol."""
    states = ladder_states(hm, count=count)
    levels = []
    for e, occ in states:
        if levels and abs(e - levels[-1][0][0]) <= degeneracy_tol * max(1.0, abs(e)):
            levels[-1].append((e, occ))
        else:
            levels.append([(e, occ)])
    return [
        LadderLevel(index=i + 1, energy=float(np.mean([e for e, _ in grp])),
                    occupations=tuple(occ for _, occ in grp), degeneracy=len(grp))
        for i, grp in enumerate(levels)
    ]


def bogoliubov_kernel(hm):
    """Squeeze kernel and its cosh partner for the diagonalizing transform."""
    if hm.tau[0] <= 0:
        raise HessianError("squeeze kernel requires tau > 0")
    return hm.B_kernel, hm.cosh_kernel
