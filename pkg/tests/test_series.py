import numpy as np
import pytest

from polaron_series.series import (make_series_context, SeriesContext,
                                   expansion_coefficients,
                                   expansion_coefficients_degenerate,
                                   level_matrix, folded_term, bracket_apply,
                                   eigenvalue_branch_series,
                                   branch_series_consistency,
                                   explicit_second_order, explicit_fourth_order,
                                   compositions, all_compositions, SeriesError)
from polaron_series.fock import build_fock
from polaron_series.model import synthetic_model


def test_composition_enumeration():
    assert compositions(4, 2) == [(1, 3), (2, 2), (3, 1)]
    # compositions of 4 into two or more parts
    assert len(all_compositions(4, min_parts=2)) == 7
    assert len(all_compositions(6)) == 2 ** 5


def test_vertex_diagonal_vanishes(ground_ctx):
    # the shifted coupling has no diagonal matrix element at the minimizer:
    # its field shift is defined to cancel it
    ctx = ground_ctx
    vac = ctx.fock.vacuum()
    X = ctx.apply_vertex(1, ctx.prepare(vac))
    val = vac @ ctx.contract(X)
    assert abs(val) <= 1e-14
    F = ctx.model.vertex_mats()
    diag = [ctx.model.c @ F[j] @ ctx.model.c for j in range(ctx.model.M)]
    assert np.abs(diag).max() <= 1e-14


def test_scalar_vertices(ground_ctx):
    ctx = ground_ctx
    rng = np.random.default_rng(0)
    x = rng.standard_normal(ctx.fock.dim)
    X = ctx.prepare(x)
    # third-order counterterm carries E_1 = 0
    assert np.abs(ctx.apply_vertex(3, X)).max() == 0.0
    # field counter on the bare vacuum leaves -E_0
    vac = ctx.fock.vacuum()
    V2 = ctx.apply_vertex(2, ctx.prepare(vac))
    assert np.abs(V2 + ctx.E[0] * ctx.prepare(vac)).max() <= 1e-15


def test_order_zero_reduces_to_fock_hamiltonian(ground_ctx):
    ctx = ground_ctx
    rng = np.random.default_rng(1)
    x = rng.standard_normal(ctx.fock.dim)
    lhs = folded_term(ctx, 0, x, include_single=True)
    rhs = ctx.level.H_fock @ x - ctx.E[0] * x
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_raw_term_independent_of_latest_coefficients(ground_ctx):
    ctx = ground_ctx
    rng = np.random.default_rng(2)
    x = rng.standard_normal(ctx.fock.dim)
    base = folded_term(ctx, 1, x)
    saved = list(ctx.E)
    try:
        ctx.E[1:] = [0.37]  # fake E_1; the raw first-order term must not move
        pert = folded_term(ctx, 1, x)
    finally:
        ctx.E[:] = saved
    assert np.abs(base - pert).max() == 0.0


def test_pruned_chains_vanish_identically(ground_ctx):
    # chains with a counterterm at either end die on the resolvent/projector
    ctx = ground_ctx
    rng = np.random.default_rng(3)
    x = rng.standard_normal(ctx.fock.dim)
    X0 = ctx.prepare(x)
    # trailing side: R V_2 (psi x y) = (R psi) x ... = 0
    v2 = ctx.apply_vertex(2, X0)
    assert np.abs(ctx.apply_R(v2)).max() <= 1e-14
    # leading side: P V_2 R (...) = 0 because R has no minimizer component
    v1 = ctx.apply_vertex(1, X0)
    lead = ctx.contract(ctx.apply_vertex(2, ctx.apply_R(v1)))
    assert np.abs(lead).max() <= 1e-14
    # scalar counterterms die the same way on both ends
    saved = list(ctx.E)
    try:
        ctx.E[1:] = [0.0, 0.123]
        v4 = ctx.apply_vertex(4, X0)
        assert np.abs(ctx.apply_R(v4)).max() <= 1e-14
    finally:
        ctx.E[:] = saved


def test_cache_purity(default_model, default_fock, default_hessian):
    ctx_c = make_series_context(default_model, default_fock, n=1,
                                hm=default_hessian, use_cache=True)
    ctx_n = make_series_context(default_model, default_fock, n=1,
                                hm=default_hessian, use_cache=False)
    Ec = expansion_coefficients(ctx_c, 3)
    En = expansion_coefficients(ctx_n, 3)
    assert np.abs(np.array(Ec) - np.array(En)).max() <= 1e-13


def test_ground_coefficients(ground_ctx, default_hessian):
    E = list(ground_ctx.E)
    from polaron_series.quadratic import ground_energy
    assert abs(E[0] - ground_energy(default_hessian)) <= 1e-9
    assert E[1] == 0.0 and E[3] == 0.0
    odd = ground_ctx.diagnostics["odd_magnitudes"]
    assert odd[1] <= 1e-9 * max(1.0, abs(E[0]))
    assert odd[3] <= 1e-9 * max(1.0, abs(E[2]))


def test_explicit_forms_match_recursion(ground_ctx):
    E = list(ground_ctx.E)
    e2 = explicit_second_order(ground_ctx)
    e4 = explicit_fourth_order(ground_ctx)
    assert abs(e2 - E[2]) <= 1e-10 * abs(E[2])
    assert abs(e4 - E[4]) <= 1e-9 * abs(E[4])


def test_interaction_off_second_order_vanishes():
    from polaron_series.model import build_model
    basis, sol, model = build_model(K=5, M=2, interaction_scale=0.0)
    fock = build_fock(2, 6)
    ctx = make_series_context(model, fock, n=1)
    E = expansion_coefficients(ctx, 2)
    assert E == [0.0, 0.0, 0.0]
    assert explicit_second_order(ctx) == 0.0


def test_full_term_is_raw_minus_scalar_shift(ground_ctx):
    # assembling the full folded operator with its single-factor composition
    # included equals the raw variant minus the coefficient times identity
    ctx = ground_ctx
    rng = np.random.default_rng(14)
    x = rng.standard_normal(ctx.fock.dim)
    with_single = folded_term(ctx, 2, x, include_single=True)
    shifted = folded_term(ctx, 2, x) - ctx.E[2] * x
    assert np.abs(with_single - shifted).max() <= 1e-13


def test_raw_term_diagonal_reproduces_coefficient(ground_ctx):
    # the coefficient at each order is the level diagonal of the raw term
    # plus the second-layer chains; at order two the chains contribute too,
    # so check the full bracket instead of the bare diagonal
    ctx = ground_ctx
    gamma = ctx.level.vectors[:, 0]
    val = float(gamma @ bracket_apply(ctx, 2, gamma))
    assert abs(val - ctx.E[2]) <= 1e-13


def test_level_matrix_degenerate_structure(degenerate_ctx):
    model, fock, ctx = degenerate_ctx
    assert ctx.level.degeneracy == 2
    M1 = level_matrix(ctx, 1)
    assert abs(M1[0, 0]) <= 1e-12 and abs(M1[1, 1]) <= 1e-12
    assert abs(M1[0, 1]) > 1e-3
    # closed-form off-diagonal entry: bare-coupling chain through the
    # shifted vertex, evaluated without the generic second layer
    g0, g1 = ctx.level.vectors[:, 0], ctx.level.vectors[:, 1]
    Bv = model.B  # phi_p = 0 in this configuration: bare = shifted vertex
    assert np.abs(model.phi_p).max() == 0.0
    t = ctx.apply_vertex(1, ctx.prepare(g1))
    t = ctx.apply_vertex(1, ctx.apply_R(t))
    t = ctx.apply_vertex(1, ctx.apply_R(t))
    explicit = g0 @ ctx.contract(t)
    assert abs(M1[0, 1] - explicit) <= 1e-12 * max(1.0, abs(explicit))


def test_branch_series_trivia():
    # diagonal family: branches are the sorted diagonals order by order
    M1 = np.diag([1.0, -1.0])
    M2 = np.diag([0.5, 0.25])
    br, shared = eigenvalue_branch_series([M1, M2])
    assert np.allclose(br, [[-1.0, 0.25], [1.0, 0.5]])
    # antidiagonal first order splits into -|m|, +|m|
    m = 0.7
    br, _ = eigenvalue_branch_series([np.array([[0.0, m], [m, 0.0]])])
    assert np.allclose(br, [[-m], [m]])


def test_branch_series_second_order_matches_textbook():
    # family x M1 + x^2 M2 with simple M1 spectrum: the order-x^2 response
    # is the diagonal of M2 in the M1 eigenbasis (M1 contributes nothing
    # off-diagonal in its own basis), and order x^3 picks up the standard
    # sum over intermediate states of M2's off-diagonal couplings
    rng = np.random.default_rng(11)
    A = rng.standard_normal((3, 3))
    M1 = 0.5 * (A + A.T)
    Bm = rng.standard_normal((3, 3))
    M2 = 0.5 * (Bm + Bm.T)
    w, V = np.linalg.eigh(M1)
    br, _ = eigenvalue_branch_series([M1, M2, np.zeros((3, 3))])
    for s in range(3):
        v = V[:, s]
        assert abs(br[s, 0] - w[s]) <= 1e-12
        assert abs(br[s, 1] - v @ M2 @ v) <= 1e-11
        third = sum((V[:, m] @ M2 @ v) ** 2 / (w[s] - w[m])
                    for m in range(3) if m != s)
        assert abs(br[s, 2] - third) <= 1e-10
    ratio = branch_series_consistency([M1, M2], br[:, :2])
    assert ratio < 50.0


def test_branch_series_finite_difference_oracle():
    rng = np.random.default_rng(21)
    A = rng.standard_normal((2, 2))
    M1 = 0.5 * (A + A.T)
    Bm = rng.standard_normal((2, 2))
    M2 = 0.5 * (Bm + Bm.T)
    br, _ = eigenvalue_branch_series([M1, M2])
    for x in (1e-3, 1e-4):
        ev = np.linalg.eigvalsh(x * M1 + x ** 2 * M2)
        pred = np.sort(br @ [x, x ** 2])
        assert np.abs(ev - pred).max() <= 40 * x ** 3


def test_degenerate_driver_matches_simple_driver(default_model, default_fock,
                                                 default_hessian):
    ctx = make_series_context(default_model, default_fock, n=1,
                              hm=default_hessian)
    Ea = expansion_coefficients(ctx, 3)
    ctx2 = make_series_context(default_model, default_fock, n=1,
                               hm=default_hessian)
    Eb = expansion_coefficients_degenerate(ctx2, 1, 3)
    assert np.abs(np.array(Ea) - np.array(Eb)).max() <= 1e-12


def test_degenerate_branches_and_basis_independence(degenerate_ctx):
    model, fock, ctx = degenerate_ctx
    E1 = expansion_coefficients_degenerate(ctx, 1, 2)
    E2 = expansion_coefficients_degenerate(ctx, 2, 2)
    M1 = ctx.level_matrices[0]
    m12 = abs(M1[0, 1])
    assert abs(E1[1] + m12) <= 1e-10
    assert abs(E2[1] - m12) <= 1e-10
    assert abs(E1[2] - E2[2]) <= 1e-9  # even order stays shared here
    # rotate the degenerate eigenbasis: coefficients must not move
    theta = 0.3
    Q = np.array([[np.cos(theta), -np.sin(theta)],
                  [np.sin(theta), np.cos(theta)]])
    from polaron_series.series import LevelContext
    rot = LevelContext(
        n=ctx.level.n, energy=ctx.level.energy, degeneracy=2,
        vectors=ctx.level.vectors @ Q, resolvent=ctx.level.resolvent,
        H_fock=ctx.level.H_fock, evals=ctx.level.evals)
    ctx_rot = SeriesContext(model, fock, ctx.hm, rot)
    E1r = expansion_coefficients_degenerate(ctx_rot, 1, 2)
    assert np.abs(np.array(E1r) - np.array(E1)).max() <= 1e-10


def test_order_guard(ground_ctx):
    with pytest.raises(SeriesError):
        expansion_coefficients(ground_ctx, 11)
