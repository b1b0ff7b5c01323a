"""Brute-force spectral ground truth and order-of-decay fits.

The fluctuation-frame Hamiltonian on electron (x) Fock,

    H(a) = H0 (x) 1 + a^{-1} sum_j F_j (x) phi_j + a^{-2} 1 (x) N,

is diagonalized per coupling (dense below a size threshold, otherwise
shift-invert Lanczos seeded by a cheap edge probe), and every retained
eigenvalue is polished with an extended-precision Rayleigh quotient so that
the cancellations a^2 E(a) - partial series are meaningful down to ~1e-13.
Log-log least-squares slopes of those remainders against the coupling are
the acceptance quantity for the series and residual decay orders.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from dataclasses import dataclass, field


class OracleError(RuntimeError):
    pass


FIT_FLOOR = 1e-13  # below this the remainder is float noise; points are masked


def fluctuation_hamiltonian(model, fock, alpha):
    """Sparse CSR fluctuation Hamiltonian at coupling alpha (alpha=inf allowed).

    Vector layout matches (dim_F, K) arrays flattened row-major: the Fock
    index is the slow axis.
    """
    if not (alpha > 0):
        raise OracleError("alpha must be positive")
    dimF, K = fock.dim, model.K
    H = sp.kron(sp.identity(dimF, format="csr"), model.H0, format="csr")
    if np.isinf(alpha):
        return H.tocsr()
    from .fock import mode_operators, number_diagonal

    _, _, phi, _ = mode_operators(fock)
    F = model.vertex_mats()
    for j in range(model.M):
        H = H + (1.0 / alpha) * sp.kron(phi[j], F[j], format="csr")
    H = H + (1.0 / alpha ** 2) * sp.kron(
        sp.diags(number_diagonal(fock)), sp.identity(K, format="csr"), format="csr"
    )
    return H.tocsr()


def _matvec_ld(H, data_ld, x):
    prod = data_ld * x[H.indices]
    hx = np.add.reduceat(prod, H.indptr[:-1])
    hx[np.diff(H.indptr) == 0] = 0.0
    return hx


def _block_ritz(H, V):
    """Ritz values of the span of V, with quadratic forms in longdouble.

    The block projection makes the values insensitive to intra-block mixing
    left over by inverse iteration; assembling the small matrices in
    extended precision avoids the float64 cancellation noise of the
    quadratic forms.
    """
    from scipy.linalg import eigh as dense_eigh

    Hc = H.tocsr()
    data_ld = Hc.data.astype(np.longdouble)
    Vld = V.astype(np.longdouble)
    HV = np.column_stack([_matvec_ld(Hc, data_ld, Vld[:, i])
                          for i in range(V.shape[1])])
    Hk = Vld.T @ HV
    Sk = Vld.T @ Vld
    Hk = 0.5 * (Hk + Hk.T)
    Sk = 0.5 * (Sk + Sk.T)
    vals = dense_eigh(Hk.astype(float), Sk.astype(float), eigvals_only=True)
    return np.sort(vals)


def lowest_eigenvalues(H, k, dense_limit=2600, refine=True, probe_tol=1e-6,
                       polish_steps=2):
    """The k smallest eigenvalues of a sparse hermitian matrix, refined.

    Dense path below dense_limit.  Otherwise a loose smallest-algebraic
    Lanczos probe locates the spectral edge, one LU factorization at a
    shift just below it drives both shift-invert Lanczos and a few inverse
    iteration polish steps per vector, and extended-precision Rayleigh
    quotients squeeze the eigenvalue error to ~1e-17 absolute.
    """
    n = H.shape[0]
    if n <= dense_limit:
        evals, evecs = np.linalg.eigh(H.toarray())
        evals, evecs = evals[:k], evecs[:, :k]
        if refine:
            evals = _block_ritz(H, evecs)
        return np.sort(evals)
    v0 = np.ones(n) / np.sqrt(n)
    edge = spla.eigsh(H, k=1, which="SA", v0=v0, tol=probe_tol,
                      return_eigenvectors=False)[0]
    sigma = edge - 0.5 * max(abs(edge), 1e-8)
    lu = spla.splu((H - sigma * sp.identity(n, format="csr")).tocsc())
    op_inv = spla.LinearOperator((n, n), matvec=lu.solve)
    evals, evecs = spla.eigsh(H, k=k, sigma=sigma, which="LM", v0=v0,
                              tol=0, OPinv=op_inv)
    order = np.argsort(evals)
    evals, evecs = evals[order[:k]], evecs[:, order[:k]]
    if not refine:
        return np.sort(evals)
    # fixed-shift inverse iteration purges far-mode error; the block Ritz
    # step afterwards is immune to the intra-block mixing it introduces
    V = evecs.copy()
    for _ in range(polish_steps):
        V = lu.solve(V)
        V, _ = np.linalg.qr(V)
    return _block_ritz(H, V)


@dataclass
class SpectralSweep:
    alphas: np.ndarray           # ascending coupling grid
    levels: np.ndarray           # (n_alpha, n_levels) fluctuation eigenvalues
    n_levels: int
    meta: dict = field(default_factory=dict)

    def level(self, n):
        """1-based level column."""
        return self.levels[:, n - 1]


def default_alpha_grid(lo=20.0, hi=200.0, count=16):
    return np.geomspace(lo, hi, count)


def exact_levels(model, fock, alphas, n_levels=8, dense_limit=2600):
    """Sweep of the lowest fluctuation eigenvalues over a coupling grid."""
    alphas = np.asarray(alphas, float)
    if alphas.size == 0:
        raise OracleError("empty coupling grid")
    out = np.empty((alphas.size, n_levels))
    for i, a in enumerate(alphas):
        H = fluctuation_hamiltonian(model, fock, a)
        out[i] = lowest_eigenvalues(H, n_levels, dense_limit=dense_limit)
    return SpectralSweep(alphas=alphas, levels=out, n_levels=n_levels,
                         meta={"dims": (fock.dim, model.K)})


def loglog_fit(x, y):
    """OLS slope/intercept/R^2 of log|y| against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float)))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def series_remainder(sweep, coeffs, n=1):
    """r_b(a) = a^2 E_n(a) - sum_l a^{-l} E_l on the sweep grid (longdouble)."""
    a = sweep.alphas.astype(np.longdouble)
    vals = sweep.level(n).astype(np.longdouble)
    r = a ** 2 * vals
    for ell, e in enumerate(coeffs):
        r = r - np.longdouble(e) * a ** (-ell)
    return np.asarray(r, float)


# refined-eigenvalue accuracy; remainder noise is a^2 * this.  With the
# electron sector stored in the eigenrepresentation the measured floor is
# below 1e-21; 1e-18 keeps three orders of margin.
EIG_FLOOR = 1e-18


def coefficient_order_fit(sweep, coeffs, n=1, alpha_range=(60.0, 200.0),
                          floor=FIT_FLOOR, eig_floor=EIG_FLOOR):
    """Fit the decay order of the series remainder over an alpha window.

    Points with |r| below the measurement floor max(floor, a^2 * eig_floor)
    are masked as float noise; if fewer than two usable points remain and
    every in-window remainder sits at its floor, the check is reported as
    directly successful (slope None): the remainder is unresolvable at the
    working precision, which is the strongest statement the model supports.
    """
    b = len(coeffs) - 1
    r = series_remainder(sweep, coeffs, n=n)
    a = sweep.alphas
    window = (a >= alpha_range[0] - 1e-9) & (a <= alpha_range[1] + 1e-9)
    noise = np.maximum(floor, a ** 2 * eig_floor)
    usable = window & (np.abs(r) > noise)
    report = {
        "b": b, "n": n, "alpha": a[window].tolist(),
        "remainder": r[window].tolist(),
        "n_usable": int(usable.sum()), "floor": floor, "eig_floor": eig_floor,
    }
    if usable.sum() < 2:
        report.update(slope=None, intercept=None, r2=None,
                      success_direct=bool(np.all(np.abs(r[window]) <= noise[window])))
        return report
    slope, intercept, r2 = loglog_fit(a[usable], r[usable])
    drop = usable.copy()
    drop[np.max(np.nonzero(usable)[0])] = False
    slope_drop = loglog_fit(a[drop], r[drop])[0] if drop.sum() >= 2 else slope
    report.update(slope=slope, intercept=intercept, r2=r2,
                  success_direct=False, slope_drop_last=slope_drop)
    return report


def residual_order_fit(alphas, residuals, alpha_range=None, floor=FIT_FLOOR):
    """Log-log decay order of approximate-eigenstate residual norms."""
    alphas = np.asarray(alphas, float)
    residuals = np.asarray(residuals, float)
    mask = residuals > floor
    if alpha_range is not None:
        mask &= (alphas >= alpha_range[0] - 1e-9) & (alphas <= alpha_range[1] + 1e-9)
    if mask.sum() < 2:
        return {"slope": None, "n_usable": int(mask.sum()),
                "success_direct": bool(np.all(residuals <= floor))}
    slope, intercept, r2 = loglog_fit(alphas[mask], residuals[mask])
    return {"slope": slope, "intercept": intercept, "r2": r2,
            "n_usable": int(mask.sum()), "success_direct": False}


def growth_check(coeffs):
    """Smallest C with |E_l| <= C^l sqrt(l!) over the computed orders."""
    import math

    per = []
    for ell, e in enumerate(coeffs):
        if ell == 0 or e == 0.0:
            continue
        per.append((ell, float((abs(e) / math.sqrt(math.factorial(ell)))
                               ** (1.0 / ell))))
    c_hat = max((c for _, c in per), default=0.0)
    return {"C_hat": c_hat, "per_order": per}
