"""Dirichlet-Laplacian eigenbasis for the electron sector.

The electron lives on a bounded domain: an interval (0, L), or the radial
(s-wave) sector of a ball of radius R.  Everything downstream is expressed
in the basis of the first K Laplacian eigenfunctions; pointwise products of
basis functions are reduced to K x K matrices with a fixed Gauss-Legendre
quadrature whose resolution is tied to the mode count.

For the ball we work with the reduced radial wave u(r) = r * psi(r), so the
eigenfunctions are again sines, u_j(r) = sqrt(2/R) sin(j pi r / R) with
eigenvalues (j pi / R)^2, while pointwise products of the original 3-d mode
functions acquire the weight 1 / (sqrt(4 pi) r).
"""

import numpy as np
from dataclasses import dataclass, field


class DomainError(ValueError):
    """Invalid domain specification."""


class QuadratureError(RuntimeError):
    """Quadrature grid cannot resolve the requested mode content."""


_KINDS = ("interval", "ball_radial")


@dataclass(frozen=True)
class DomainSpec:
    """Electron domain plus mode counts.

    K is the electron mode count, M <= K the number of phonon modes kept in
    the interaction.  quadrature_points = 0 selects the automatic resolution
    8 * max(K, M) + 32, enough to integrate triple products of modes to
    machine precision.
    """

    kind: str
    extent: float
    K: int
    M: int
    quadrature_points: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError("unsupported domain kind: %r" % (self.kind,))
        if not (self.extent > 0):
            raise DomainError("extent must be positive")
        if self.K < 1 or self.M < 1:
            raise DomainError("K and M must be >= 1")
        if self.M > self.K:
            raise DomainError("M must not exceed K")
        nq = self.quadrature_points
        if nq == 0:
            nq = 8 * max(self.K, self.M) + 32
            object.__setattr__(self, "quadrature_points", nq)
        if nq < 4 * max(self.K, self.M):
            raise DomainError("quadrature_points must be >= 4*max(K, M)")


@dataclass(frozen=True)
class Basis:
    """Eigenpairs of -Laplace with Dirichlet conditions, on a quadrature grid.

    values[j] holds the j-th (0-based) eigenfunction on the grid `x` with
    quadrature weights `weights`; `triple_weight` is the extra measure factor
    applied inside products of three mode functions (1 on the interval,
    1/(sqrt(4 pi) r) for the radial ball sector).
    """

    spec: DomainSpec
    lambdas: np.ndarray
    x: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    triple_weight: np.ndarray
    gram_defect: float = field(default=0.0)

    @property
    def K(self):
        return self.spec.K

    @property
    def M(self):
        return self.spec.M


def build_basis(spec):
    """Construct the K lowest Dirichlet eigenpairs for the given domain.

    Raises QuadratureError if the grid fails to reproduce orthonormality of
    the modes to 1e-12 (underresolved quadrature).
    """
    nodes, w = np.polynomial.legendre.leggauss(spec.quadrature_points)
    L = spec.extent
    x = 0.5 * L * (nodes + 1.0)
    weights = 0.5 * L * w

    j = np.arange(1, spec.K + 1)
    lambdas = (j * np.pi / L) ** 2
    values = np.sqrt(2.0 / L) * np.sin(np.outer(j, x) * (np.pi / L))

    if spec.kind == "interval":
        triple_weight = np.ones_like(x)
    else:  # ball_radial: modes are u_j(r)/(sqrt(4 pi) r) as 3-d functions
        triple_weight = 1.0 / (np.sqrt(4.0 * np.pi) * x)

    gram = (values * weights) @ values.T
    defect = float(np.abs(gram - np.eye(spec.K)).max())
    if defect > 1e-12:
        raise QuadratureError(
            "quadrature underresolved: orthonormality defect %.3e" % defect
        )
    return Basis(spec, lambdas, x, weights, values, triple_weight, defect)


def laplacian_power(basis, s):
    """Diagonal of (-Laplace)^s in the eigenbasis: lambda_j**s, j = 1..K."""
    return basis.lambdas ** s


def triple_overlap(basis, j, m, n):
    """Integral of the product of modes j, m, n (1-based indices).

    Symmetric under all index permutations by construction (single code
    path, commutative integrand).
    """
    for idx in (j, m, n):
        if not (1 <= idx <= basis.K):
            raise IndexError("mode index out of range: %d" % idx)
    integrand = (
        basis.values[j - 1]
        * basis.values[m - 1]
        * basis.values[n - 1]
        * basis.triple_weight
    )
    return float(np.dot(basis.weights, integrand))


def multiplication_matrix(basis, j):
    """K x K matrix of multiplication by mode j (1-based), W_j[m,n] = <w_m, w_j w_n>."""
    if not (1 <= j <= basis.K):
        raise IndexError("mode index out of range: %d" % j)
    core = basis.values * (basis.weights * basis.triple_weight * basis.values[j - 1])
    return core @ basis.values.T


def squared_mode_matrix(basis, j):
    """K x K matrix of multiplication by (mode j)^2: <w_m, w_j^2 w_n>."""
    if not (1 <= j <= basis.K):
        raise IndexError("mode index out of range: %d" % j)
    # two triple-weight factors: w_j^2 carries the product measure twice
    core = basis.values * (
        basis.weights * basis.triple_weight ** 2 * basis.values[j - 1] ** 2
    )
    return core @ basis.values.T


def coupling_matrices(basis, scale=1.0):
    """Interaction mode matrices B_j = scale * lambda_j^{-1/2} W_j, j = 1..M.

    With these, the electron-phonon coupling a(v_x) + a*(v_x) acts as
    sum_j B_j (x) (a_j + a_j^dagger) on the truncated model.
    """
    out = np.empty((basis.M, basis.K, basis.K))
    for j in range(1, basis.M + 1):
        out[j - 1] = scale * basis.lambdas[j - 1] ** (-0.5) * multiplication_matrix(basis, j)
        out[j - 1] = 0.5 * (out[j - 1] + out[j - 1].T)
    return out


def uv_projection(basis, cutoff):
    """Mode indices (1-based) with lambda_j <= cutoff^2.

    cutoff = inf selects all modes; cutoff = 0 selects none.
    """
    if cutoff < 0:
        raise DomainError("cutoff must be >= 0")
    if np.isinf(cutoff):
        return tuple(range(1, basis.K + 1))
    mask = basis.lambdas <= cutoff ** 2
    return tuple(int(i) + 1 for i in np.nonzero(mask)[0])
