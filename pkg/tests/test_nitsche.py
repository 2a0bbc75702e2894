import numpy as np
import pytest
import scipy.sparse as sp

from vmsd.errors import InvalidConfigError
from vmsd.nitsche import (CurlGrid, NitscheOperator, TimeStepper, discrete_energy,
                          error_norms, fully_discrete_solve, load_vector, nitsche_rhs,
                          ritz_project, smooth_vector_field, startup)


def test_grid_geometry():
    grid = CurlGrid(4)
    assert abs(np.sum(grid.area) - 1.0) < 1e-14
    assert len(grid.bedges) == 16
    # outward normals: edge midpoint shifted along the normal leaves the square
    for va, vb, tri, normal in grid.bedges:
        mid = 0.5 * (grid.verts[va] + grid.verts[vb]) + 1e-3 * np.asarray(normal)
        assert not (0 <= mid[0] <= 1 and 0 <= mid[1] <= 1)


def test_rejects_bad_parameters():
    with pytest.raises(InvalidConfigError):
        CurlGrid(0)
    with pytest.raises(InvalidConfigError):
        NitscheOperator(CurlGrid(2), 0.0)


def test_matrix_exactly_symmetric():
    for n in (3, 8):
        op = NitscheOperator(CurlGrid(n), 10.0)
        diff = op.A - op.A.T
        assert diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0


def test_bilinear_zero_and_symmetry():
    op = NitscheOperator(CurlGrid(5), 10.0)
    zero = np.zeros(op.grid.n_dofs)
    assert op.bilinear(zero, zero) == 0.0
    rng = np.random.default_rng(0)
    for _ in range(5):
        u = rng.standard_normal(op.grid.n_dofs)
        v = rng.standard_normal(op.grid.n_dofs)
        a1, a2 = op.bilinear(u, v), op.bilinear(v, u)
        assert abs(a1 - a2) <= 1e-13 * max(1.0, abs(a1))


def test_norm_of_constant_field():
    # curl of a constant vanishes; only the boundary term survives
    n = 8
    op = NitscheOperator(CurlGrid(n), 10.0)
    c = np.array([0.6, -1.2])
    u = np.tile(c, op.grid.n_verts)
    expected = np.sqrt((1.0 / op.grid.h) * float(c @ c) * 4.0)
    assert abs(op.norm_h(u) - expected) < 1e-12 * expected
    assert op.triple_norm(u) >= op.norm_h(u) - 1e-14


def test_triple_norm_dominates():
    op = NitscheOperator(CurlGrid(6), 10.0)
    rng = np.random.default_rng(1)
    for _ in range(10):
        u = rng.standard_normal(op.grid.n_dofs)
        assert op.triple_norm(u) >= op.norm_h(u) - 1e-12


def test_coercivity_at_default_penalty():
    op = NitscheOperator(CurlGrid(8), 10.0)
    assert op.coercivity_constant() >= 0.1


def test_continuity_bound():
    op = NitscheOperator(CurlGrid(8), 10.0)
    rng = np.random.default_rng(2)
    bound = 9.0 + op.gamma
    for _ in range(50):
        u = rng.standard_normal(op.grid.n_dofs)
        v = rng.standard_normal(op.grid.n_dofs)
        assert abs(op.bilinear(u, v)) <= bound * op.triple_norm(u) * op.triple_norm(v)


def test_inverse_estimate_bounded():
    rng = np.random.default_rng(3)
    for n in (4, 8, 16):
        op = NitscheOperator(CurlGrid(n), 10.0)
        worst = 0.0
        for _ in range(20):
            u = rng.standard_normal(op.grid.n_dofs)
            ratio = op.triple_norm(u) * op.grid.h / np.sqrt(u @ (op.M @ u))
            worst = max(worst, ratio)
        assert worst < 40.0


def _p1_field_callables(grid, w):
    n = grid.n

    def locate(pts):
        tris = []
        for x, y in pts:
            i = min(int(x * n), n - 1)
            j = min(int(y * n), n - 1)
            xl, yl = x * n - i, y * n - j
            tris.append(2 * (i * n + j) + (0 if xl >= yl else 1))
        return np.array(tris, dtype=int)

    def u_func(pts):
        out = np.zeros((len(pts), 2))
        tris = locate(pts)
        for k, (p, t) in enumerate(zip(pts, tris)):
            verts = grid.verts[grid.tris[t]]
            mat = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
            ab = np.linalg.solve(mat, p - verts[0])
            lam = np.array([1 - ab.sum(), ab[0], ab[1]])
            out[k] = lam @ w.reshape(-1, 2)[grid.tris[t]]
        return out

    def curl_func(pts):
        tris = locate(pts)
        return np.array([grid.curlvec[t] @ w[grid.tri_dofs[t]] for t in tris])

    return u_func, curl_func


def test_ritz_reproduces_discrete_fields():
    grid = CurlGrid(6)
    op = NitscheOperator(grid, 10.0)
    rng = np.random.default_rng(4)
    w = rng.standard_normal(grid.n_dofs)
    u_func, curl_func = _p1_field_callables(grid, w)
    q = op.solve(nitsche_rhs(op, u_func, curl_func))
    assert np.linalg.norm(q - w) <= 1e-12 * np.linalg.norm(w)


def test_ritz_galerkin_orthogonality():
    op = NitscheOperator(CurlGrid(8), 40.0)
    u, curl_u, _ = smooth_vector_field()
    rhs = nitsche_rhs(op, u, curl_u)
    q = op.solve(rhs)
    residual = rhs - op.A @ q
    assert np.linalg.norm(residual) <= 1e-10 * max(1.0, np.linalg.norm(rhs))


def test_pde_load_matches_ritz_data():
    # consistency: a(u, chi) equals (curl curl u, chi) for fields vanishing on
    # the boundary, up to quadrature error
    op = NitscheOperator(CurlGrid(12), 40.0)
    u, curl_u, curlcurl_u = smooth_vector_field()
    r1 = nitsche_rhs(op, u, curl_u)
    r2 = load_vector(op.grid, curlcurl_u)
    assert np.linalg.norm(r1 - r2) <= 1e-4 * np.linalg.norm(r1)


def test_ritz_rate_pair():
    u, curl_u, _ = smooth_vector_field()
    errs = []
    for n in (8, 16):
        op = NitscheOperator(CurlGrid(n), 160.0)
        q = ritz_project(op, u, curl_u)
        l2, _, _ = error_norms(op, q, u, curl_u)
        errs.append(l2)
    assert np.log2(errs[0] / errs[1]) > 1.6


def test_load_vector_zero_and_constant():
    grid = CurlGrid(5)
    op = NitscheOperator(grid, 10.0)
    zero = load_vector(grid, lambda pts: np.zeros((len(pts), 2)))
    assert np.max(np.abs(zero)) == 0.0
    c = np.array([2.0, -3.0])
    load = load_vector(grid, lambda pts: np.tile(c, (len(pts), 1)))
    # (c, phi_i) equals the mass matrix applied to the constant field
    ref = op.M @ np.tile(c, grid.n_verts)
    assert np.allclose(load, ref, atol=1e-13)


def test_load_vector_against_fine_quadrature():
    grid = CurlGrid(3)

    def func(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([np.sin(2 * x + y), np.cos(x - y)])

    load = load_vector(grid, func)
    # brute-force: dense tensor Gauss rule per triangle via splitting into
    # fine sub-triangles of the barycentric degree-4 rule
    from vmsd.nitsche import TRI_QUAD_BARY, TRI_QUAD_W

    ref = np.zeros(grid.n_dofs)
    levels = 4  # refine each triangle uniformly and reuse the rule
    for t, tri in enumerate(grid.tris):
        verts = grid.verts[tri]
        subdiv = []
        m01 = 0.5 * (verts[0] + verts[1])
        m12 = 0.5 * (verts[1] + verts[2])
        m02 = 0.5 * (verts[0] + verts[2])
        subdiv = [(verts[0], m01, m02), (m01, verts[1], m12),
                  (m02, m12, verts[2]), (m01, m12, m02)]
        for sv in subdiv:
            sv = np.asarray(sv)
            pts = TRI_QUAD_BARY @ sv
            area = grid.area[t] / 4
            vals = func(pts)
            for q in range(len(TRI_QUAD_W)):
                lam_coarse = np.linalg.solve(
                    np.column_stack([verts[1] - verts[0], verts[2] - verts[0]]),
                    pts[q] - verts[0])
                lam = np.array([1 - lam_coarse.sum(), *lam_coarse])
                for i in range(3):
                    for c in range(2):
                        ref[2 * tri[i] + c] += TRI_QUAD_W[q] * area * lam[i] * vals[q, c]
    assert np.linalg.norm(load - ref) <= 5e-6 * np.linalg.norm(ref)


def test_startup_stationary():
    op = NitscheOperator(CurlGrid(6), 40.0)
    u, curl_u, _ = smooth_vector_field()
    e0, e1 = startup(op, 0.1, u, curl_u)
    assert np.array_equal(e0, e1)


def test_startup_linear_in_time_exact():
    # E(t) = t c for a constant field: first level k * c exactly
    op = NitscheOperator(CurlGrid(5), 40.0)
    c = np.array([1.0, 2.0])

    def zero(pts):
        return np.zeros((len(pts), 2))

    def zero_curl(pts):
        return np.zeros(len(pts))

    def cfield(pts):
        return np.tile(c, (len(pts), 1))

    k = 0.05
    e0, e1 = startup(op, k, zero, zero_curl, cfield, zero_curl)
    assert np.max(np.abs(e0)) < 1e-12
    ref = k * np.tile(c, op.grid.n_verts)
    assert np.allclose(e1, ref, atol=1e-10)


def test_time_difference_exact_on_quadratics():
    # mass-only stepping integrates quadratic-in-time data exactly
    grid = CurlGrid(3)
    op = NitscheOperator(grid, 10.0)

    class MassOnly:
        M = op.M
        A = sp.csr_matrix(op.A.shape)

    k = 0.21
    stepper = TimeStepper(MassOnly(), k)
    rng = np.random.default_rng(5)
    w = rng.standard_normal(grid.n_dofs)

    def theta(t):
        return (1.0 + 2.0 * t + 1.5 * t**2) * w

    prev2, prev1 = theta(0.0), theta(k)
    for m in range(2, 6):
        load = op.M @ (3.0 * w)  # second time derivative of theta
        prev2, prev1 = prev1, stepper.step(prev2, prev1, load)
        expect = theta(m * k)
        assert np.allclose(prev1, expect, atol=1e-10 * np.linalg.norm(expect))


def test_discrete_energy_examples():
    op = NitscheOperator(CurlGrid(4), 10.0)
    zero = np.zeros(op.grid.n_dofs)
    assert discrete_energy(op, zero, zero, 0.1) == 0.0
    rng = np.random.default_rng(6)
    w = rng.standard_normal(op.grid.n_dofs)
    c = 0.7
    val = discrete_energy(op, c * w, c * w, 0.1)
    assert abs(val - c**2 * op.bilinear(w, w)) <= 1e-12 * abs(val)


def test_homogeneous_stepping_conserves_energy():
    op = NitscheOperator(CurlGrid(6), 40.0)
    k = 1.0 / 12.0
    stepper = TimeStepper(op, k)
    rng = np.random.default_rng(7)
    prev2 = rng.standard_normal(op.grid.n_dofs)
    prev1 = rng.standard_normal(op.grid.n_dofs)
    zero = np.zeros_like(prev2)
    e_ref = discrete_energy(op, prev1, prev2, k)
    for _ in range(20):
        prev2, prev1 = prev1, stepper.step(prev2, prev1, zero)
        e_now = discrete_energy(op, prev1, prev2, k)
        assert abs(e_now - e_ref) <= 1e-10 * e_ref


def test_fully_discrete_error_ratio():
    errs = []
    for n in (8, 16):
        op = NitscheOperator(CurlGrid(n), 160.0)
        errs.append(fully_discrete_solve(op, 1.0 / n, 1.0))
    assert np.log2(errs[0] / errs[1]) >= 1.6
