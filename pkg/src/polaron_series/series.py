"""Recursive expansion coefficients for the low-energy fluctuation levels.

Everything is driven by chains of three electron-sector objects -- the
shifted coupling vertex, the field-counting term, and scalar counterterms --
folded between the minimizer projector and the reduced resolvent R, and by a
second layer of chains on the Fock sector folded through the level projector
and its reduced resolvent.  The order-l folded operator acting on the Fock
sector is

    sum over compositions (e_1..e_i) of l+2:
        P V_{e_1} (R V_{e_2}) ... (R V_{e_i}) P

with V_1 the vertex, V_2 = N - E_0 and V_l = -E_{l-2} for l >= 3; dropping
the single-factor term gives the variant independent of E_{l-1}, E_l.  The
level coefficients are read off either from the scalar bracket (simple
levels) or from the ascending analytic eigenvalue branches of the matrix
family sum_k x^k M_k built on a degenerate level's eigenbasis.

Chains are evaluated right-to-left as operator applications on (dim_F, K)
arrays; products are never materialized.  Composition enumeration is
lexicographic in (number of parts, parts) and sums are compensated, since
the terms alternate in sign.
"""

import numpy as np
from dataclasses import dataclass, field

from .quadratic import hessian_matrix
from .fock import (bogoliubov_hamiltonian, eigenpair_group,
                   fock_reduced_resolvent, mode_operators)


class SeriesError(RuntimeError):
    pass


B_GUARD = 10  # composition counts grow as 2^(l+1); hard ceiling on the order


# ---------------------------------------------------------------------------
# composition enumeration


def compositions(total, parts):
    """All tuples of `parts` positive integers summing to `total`, lexicographic."""
    if parts == 1:
        return [(total,)] if total >= 1 else []
    out = []
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out


def all_compositions(total, min_parts=1, max_parts=None):
    """Compositions of `total` ordered by (part count, lexicographic)."""
    if max_parts is None:
        max_parts = total
    out = []
    for i in range(min_parts, max_parts + 1):
        out.extend(compositions(total, i))
    return out


class _Kahan:
    """Compensated accumulator for scalars or arrays."""

    def __init__(self, template):
        self.s = np.zeros_like(template)
        self.comp = np.zeros_like(template)

    def add(self, term):
        y = term - self.comp
        t = self.s + y
        self.comp = (t - self.s) - y
        self.s = t


# ---------------------------------------------------------------------------
# level data and context


@dataclass(frozen=True)
class LevelContext:
    n: int
    energy: float          # E_0 for this level
    degeneracy: int
    vectors: np.ndarray    # (dim_F, d) orthonormal eigenbasis of the level
    resolvent: np.ndarray  # (dim_F, dim_F) reduced resolvent at the level
    H_fock: np.ndarray     # dense quadratic Hamiltonian on the Fock sector
    evals: np.ndarray


class SeriesContext:
    """Holds the model, the Fock sector, one spectral level, and coefficients.

    The coefficient list starts as [E_0]; expansion drivers append to it.
    `use_cache` toggles suffix memoization inside chain sums (results agree
    to roundoff either way; the cached path is the default).
    """

    def __init__(self, model, fock, hm, level, use_cache=True):
        self.model = model
        self.fock = fock
        self.hm = hm
        self.level = level
        self.use_cache = use_cache
        self.E = [float(level.energy)]
        self.diagnostics = {}
        self.level_matrices = []
        an, cr, phi, ndiag = mode_operators(fock)
        self._an, self._cr, self._phi, self._ndiag = an, cr, phi, ndiag
        self._F = model.vertex_mats()
        self._c = model.c
        self._R = model.R

    # -- elementary applications on (dim_F, K) arrays ----------------------

    def prepare(self, x):
        """Embed a Fock vector against the minimizer: psi (x) x."""
        return np.outer(x, self._c)

    def contract(self, X):
        """Fock component of the projection onto the minimizer."""
        return X @ self._c

    def apply_R(self, X):
        return X @ self._R

    def apply_vertex(self, ell, X):
        """V_ell on a (dim_F, K) array; scalars require known coefficients."""
        if ell == 1:
            out = np.zeros_like(X)
            for j in range(self.fock.M):
                out += self._phi[j] @ X @ self._F[j]
            return out
        if ell == 2:
            return self._ndiag[:, None] * X - self.E[0] * X
        if ell - 2 >= len(self.E):
            raise SeriesError(
                "V_%d requires E_%d which is not available yet" % (ell, ell - 2)
            )
        return -self.E[ell - 2] * X

    def vertex_prunable(self, ell):
        """True when P V_ell R and R V_ell P vanish identically.

        Scalars die on P R = 0; the field-counting term acts as the identity
        on the electron factor, so R V_2 (psi (x) y) = (R psi) (x) ... = 0.
        """
        return ell >= 2


# ---------------------------------------------------------------------------
# folded chain sums


def _chain_sum(ctx, total, x, min_parts, family_apply=None, prunable=None):
    """Sum of P V (R V) ... (R V) P chains over compositions of `total`.

    Applied to the Fock vector x; returns a Fock vector.  family_apply and
    prunable default to the context's vertex family (used also for the
    cutoff-transformed family in the gross module).
    """
    if family_apply is None:
        family_apply = ctx.apply_vertex
        prunable = ctx.vertex_prunable
    X0 = ctx.prepare(x)
    memo = {} if ctx.use_cache else None
    acc = _Kahan(x)

    def suffix_state(eps):
        if memo is not None and eps in memo:
            return memo[eps]
        head, tail = eps[0], eps[1:]
        if not tail:
            st = family_apply(head, X0)
        else:
            st = family_apply(head, ctx.apply_R(suffix_state(tail)))
        if memo is not None:
            memo[eps] = st
        return st

    for eps in all_compositions(total, min_parts=min_parts):
        if len(eps) >= 2 and (prunable(eps[0]) or prunable(eps[-1])):
            continue
        acc.add(ctx.contract(suffix_state(eps)))
    return acc.s


def folded_term(ctx, ell, x, include_single=False, family_apply=None,
                prunable=None):
    """Order-l folded operator applied to a Fock vector.

    include_single=False drops the single-factor composition and yields the
    variant that does not depend on E_{l-1}, E_l; include_single=True gives
    the full operator (only meaningful once those coefficients exist).
    """
    if ell < 0:
        raise SeriesError("order must be >= 0")
    min_parts = 1 if include_single else 2
    return _chain_sum(ctx, ell + 2, x, min_parts, family_apply, prunable)


def folded_term_full(ctx, ell, x):
    """Full order-l folded operator, via raw term minus the scalar shift."""
    if ell == 0:
        return folded_term(ctx, 0, x, include_single=True)
    if ell >= len(ctx.E):
        raise SeriesError("E_%d not available for the full order-%d term" % (ell, ell))
    return folded_term(ctx, ell, x) - ctx.E[ell] * x


def bracket_apply(ctx, ell, y, family_apply=None, prunable=None):
    """[raw folded term at order l  +  second-layer chains of total order l].

    The second layer folds full folded terms through the level's reduced
    resolvent; its scalar diagonal against the level eigenbasis produces the
    expansion coefficients and the degenerate-level matrices.
    """
    out = _Kahan(y)
    out.add(folded_term(ctx, ell, y, family_apply=family_apply, prunable=prunable))
    Rf = ctx.level.resolvent
    memo = {} if ctx.use_cache else None

    def outer_state(eps):
        if memo is not None and eps in memo:
            return memo[eps]
        head, tail = eps[0], eps[1:]
        if not tail:
            st = _folded_full(ctx, head, y, family_apply, prunable)
        else:
            st = _folded_full(ctx, head, Rf @ outer_state(tail), family_apply,
                              prunable)
        if memo is not None:
            memo[eps] = st
        return st

    for i in range(2, ell + 1):
        for eps in compositions(ell, i):
            out.add(outer_state(eps))
    return out.s


def _folded_full(ctx, ell, x, family_apply, prunable):
    raw = folded_term(ctx, ell, x, family_apply=family_apply, prunable=prunable)
    if ell >= len(ctx.E):
        raise SeriesError("E_%d needed by a second-layer chain is missing" % ell)
    return raw - ctx.E[ell] * x


# ---------------------------------------------------------------------------
# coefficient drivers


ODD_TOL = 1e-9


def expansion_coefficients(ctx, b, family_apply=None, prunable=None,
                           enforce_odd=True):
    """E_0..E_b for a non-degenerate level.

    Odd orders must vanish; they are checked against ODD_TOL relative to the
    preceding even coefficient and then recorded as exact zeros.  Raises on
    an odd coefficient above tolerance (model/implementation inconsistency).
    enforce_odd=False keeps odd orders as computed (used by term families
    without parity protection).
    """
    if ctx.level.degeneracy != 1:
        raise SeriesError("level is degenerate; use the branch-resolved driver")
    if b > B_GUARD:
        raise SeriesError("order %d exceeds guard %d" % (b, B_GUARD))
    gamma = ctx.level.vectors[:, 0]
    del ctx.E[1:]
    odd = {}
    for ell in range(1, b + 1):
        val = float(gamma @ bracket_apply(ctx, ell, gamma, family_apply, prunable))
        if ell % 2 == 1:
            odd[ell] = abs(val)
            if enforce_odd:
                ref = max(1.0, abs(ctx.E[ell - 1]))
                if abs(val) > ODD_TOL * ref:
                    raise SeriesError(
                        "odd coefficient E_%d = %.3e above tolerance" % (ell, val)
                    )
                val = 0.0
        ctx.E.append(val)
    ctx.diagnostics["odd_magnitudes"] = odd
    return list(ctx.E)


def level_matrix(ctx, k):
    """Degenerate-level matrix at order k on the stored eigenbasis (hermitian)."""
    d = ctx.level.degeneracy
    G = ctx.level.vectors
    M = np.empty((d, d))
    for t in range(d):
        w = bracket_apply(ctx, k, G[:, t])
        M[:, t] = G.T @ w
    asym = float(np.abs(M - M.T).max())
    if asym > 1e-12 * max(1.0, float(np.abs(M).max())):
        raise SeriesError("level matrix asymmetry %.3e at order %d" % (asym, k))
    return 0.5 * (M + M.T)


# ---------------------------------------------------------------------------
# eigenvalue branches of hermitian matrix families


def _poly_mul(A, B, L):
    out = [np.zeros_like(A[0]) for _ in range(L)]
    for i, Ai in enumerate(A):
        if i >= L:
            break
        for j, Bj in enumerate(B):
            if i + j >= L:
                break
            out[i + j] = out[i + j] + Ai @ Bj
    return out


def _poly_adjoint(A):
    return [a.T.copy() for a in A]


def _cluster_indices(w, rtol):
    tol = rtol * max(1.0, float(np.abs(w).max()))
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _branches(Ms, rtol):
    L = len(Ms)
    m = Ms[0].shape[0] if L else 0
    if L == 0:
        return [()]
    w, V = np.linalg.eigh(Ms[0])
    groups = _cluster_indices(w, rtol)
    S = [V.T @ Mk @ V for Mk in Ms]
    if L > 1:
        T = [np.diag(w)] + S[1:]
        if len(groups) > 1:
            # order-by-order unitary block diagonalization of T(x)/x
            mus = np.array([w[g].mean() for g in groups])
            block_of = np.empty(m, int)
            for gi, g in enumerate(groups):
                block_of[g] = gi
            off = block_of[:, None] != block_of[None, :]
            denom = np.where(off, mus[block_of][None, :] - mus[block_of][:, None], 1.0)
            W = [np.eye(m)] + [np.zeros((m, m)) for _ in range(L - 1)]
            for n in range(1, L):
                B = _poly_mul(_poly_adjoint(W), _poly_mul(T, W, L), L)
                C = np.where(off, B[n], 0.0)
                if not np.any(C):
                    continue
                delta = C / denom
                E = [np.eye(m)] + [np.zeros((m, m)) for _ in range(L - 1)]
                power = np.eye(m)
                fact = 1.0
                for t in range(1, (L - 1) // n + 1):
                    power = power @ delta
                    fact *= t
                    E[n * t] = power / fact
                W = _poly_mul(W, E, L)
            B = _poly_mul(_poly_adjoint(W), _poly_mul(T, W, L), L)
            B = [0.5 * (bk + bk.T) for bk in B]
        else:
            B = T
    out = []
    for g, grp in enumerate(groups):
        mu = float(w[grp].mean())
        if L == 1:
            out.extend([(mu,)] * len(grp))
        else:
            idx = np.array(grp)
            sub = [B[k][np.ix_(idx, idx)] for k in range(1, L)]
            for tail in _branches(sub, rtol):
                out.append((mu,) + tail)
    out.sort()
    return out


def eigenvalue_branch_series(Ms, cluster_rtol=1e-9):
    """Ascending analytic eigenvalue branches of M(x) = sum_k x^k M_k.

    Returns (branches, shared) where branches is a (d, L) array whose s-th
    row holds the power-series coefficients of the s-th ascending branch
    near x = 0+, and shared groups branch indices that remain degenerate
    through every computed order (their coefficients are averaged so tied
    branches report identical series).
    """
    Ms = [0.5 * (np.asarray(M, float) + np.asarray(M, float).T) for M in Ms]
    d = Ms[0].shape[0]
    L = len(Ms)
    br = np.array(_branches(Ms, cluster_rtol), float).reshape(d, L)
    scale = max(1.0, float(np.abs(br).max()))
    shared = []
    used = set()
    for i in range(d):
        if i in used:
            continue
        grp = [i]
        for j in range(i + 1, d):
            if j not in used and np.all(np.abs(br[i] - br[j]) <= cluster_rtol * scale):
                grp.append(j)
        if len(grp) > 1:
            br[grp] = br[grp].mean(axis=0)
        used.update(grp)
        shared.append(tuple(grp))
    return br, shared


def branch_series_consistency(Ms, branches, xs=(1e-2, 1e-3)):
    """Compare numeric eigenvalues of M(x) against the partial branch series.

    Returns the worst |difference| / x^(L+1) over the probe points; an O(1)
    ratio confirms the series matches to its full computed order.
    """
    L = len(Ms)
    worst = 0.0
    for x in xs:
        Mx = sum((x ** (k + 1)) * Ms[k] for k in range(L))
        ev = np.linalg.eigh(Mx)[0]
        pred = np.sort(branches @ (x ** np.arange(1, L + 1)))
        worst = max(worst, float(np.abs(ev - pred).max()) / x ** (L + 1))
    return worst


def expansion_coefficients_degenerate(ctx, s, b):
    """E_0..E_b for the s-th ascending branch (1-based) of a degenerate level.

    Iterates the order: at each l the level matrices M_1..M_l are assembled
    with the coefficients fixed so far, and E_l is the order-l coefficient
    of the s-th ascending analytic eigenvalue branch of sum_k x^k M_k.  For
    a simple level this reproduces the non-degenerate driver exactly.
    """
    d = ctx.level.degeneracy
    if not (1 <= s <= d):
        raise SeriesError("branch index %d outside 1..%d" % (s, d))
    if b > B_GUARD:
        raise SeriesError("order %d exceeds guard %d" % (b, B_GUARD))
    del ctx.E[1:]
    ctx.level_matrices = []
    shared_last = None
    for ell in range(1, b + 1):
        ctx.level_matrices.append(level_matrix(ctx, ell))
        branches, shared = eigenvalue_branch_series(ctx.level_matrices)
        prev = np.array(ctx.E[1:])
        if prev.size and np.abs(branches[s - 1, : prev.size] - prev).max() > 1e-8 * max(
            1.0, float(np.abs(prev).max())
        ):
            raise SeriesError("branch coefficients drifted between orders")
        ctx.E.append(float(branches[s - 1, ell - 1]))
        shared_last = shared
    ctx.diagnostics["branch_shared_groups"] = shared_last
    if ctx.level_matrices:
        ctx.diagnostics["branch_consistency_ratio"] = branch_series_consistency(
            ctx.level_matrices, eigenvalue_branch_series(ctx.level_matrices)[0]
        )
    return list(ctx.E)


# ---------------------------------------------------------------------------
# explicit low-order transcriptions (independent of the generic enumerators)


def explicit_second_order(ctx):
    """Second coefficient assembled term by term from its closed form.

    Three contributions: the vertex chain through the field counter, the
    four-vertex chain, and the second-layer term folding the three-vertex
    chain through the level resolvent.
    """
    gamma = ctx.level.vectors[:, 0]
    X0 = ctx.prepare(gamma)
    V1, R = ctx.apply_vertex, ctx.apply_R

    t = V1(1, X0)
    t = R(t)
    t = ctx._ndiag[:, None] * t - ctx.E[0] * t
    t = R(t)
    t = V1(1, t)
    term1 = float(gamma @ ctx.contract(t))

    t = V1(1, X0)
    for _ in range(3):
        t = V1(1, R(t))
    term2 = float(gamma @ ctx.contract(t))

    t = V1(1, X0)
    t = V1(1, R(t))
    t = V1(1, R(t))
    u = ctx.contract(t)
    term3 = float(u @ ctx.level.resolvent @ u)

    return term1 + term2 + term3


def explicit_fourth_order(ctx):
    """Fourth coefficient from its displayed chain structure.

    Uses the raw/full folded terms as subunits (their definitions, not the
    generic second-layer enumerator): diagonal part
    raw_4 + raw_2 Rf full_2... pattern plus twice the real part of the two
    cross chains.  Requires E_0..E_2 to be fixed in the context.
    """
    if len(ctx.E) < 3:
        raise SeriesError("explicit fourth order needs E_0..E_2")
    gamma = ctx.level.vectors[:, 0]
    Rf = ctx.level.resolvent

    def raw(ell, x):
        return folded_term(ctx, ell, x)

    def full(ell, x):
        return folded_term(ctx, ell, x) - ctx.E[ell] * x

    t1 = float(gamma @ raw(4, gamma))
    t2 = float(gamma @ raw(2, Rf @ raw(2, gamma)))
    t3 = float(gamma @ raw(1, Rf @ full(2, Rf @ raw(1, gamma))))
    t4 = float(gamma @ raw(1, Rf @ full(1, Rf @ full(1, Rf @ raw(1, gamma)))))
    t5 = 2.0 * float(gamma @ raw(3, Rf @ raw(1, gamma)))
    t6 = 2.0 * float(gamma @ raw(1, Rf @ full(1, Rf @ raw(2, gamma))))
    return t1 + t2 + t3 + t4 + t5 + t6


# ---------------------------------------------------------------------------
# construction


def make_series_context(model, fock, n=1, cluster_tol=1e-7, use_cache=True,
                        hm=None, H_fock=None):
    """Assemble the Hessian, the Fock Hamiltonian, and one level's context."""
    if hm is None:
        hm = hessian_matrix(model)
    if H_fock is None:
        H_fock = bogoliubov_hamiltonian(fock, hm.G)
    grp = eigenpair_group(H_fock, n, cluster_tol=cluster_tol)
    level = LevelContext(
        n=n, energy=grp.energy, degeneracy=grp.degeneracy, vectors=grp.vectors,
        resolvent=fock_reduced_resolvent(grp), H_fock=H_fock, evals=grp.evals,
    )
    return SeriesContext(model, fock, hm, level, use_cache=use_cache)
