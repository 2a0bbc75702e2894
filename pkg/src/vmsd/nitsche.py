"""Nitsche penalty scheme for the second-order field equation.

Discretizes E_tt + curl(curl E) = -j_t on a triangulated square with
continuous piecewise-linear vector elements: the boundary condition is
imposed weakly through symmetric consistency terms plus a gamma/h penalty,
and time uses a three-level second-difference scheme with the averaged
stiffness (E^m + 2 E^{m-1} + E^{m-2}) / 4 on the new level.

The planar reduction identifies curl u = d1 u2 - d2 u1 (scalar) and
u x n = u1 n2 - u2 n1.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import gauss_rule
from .errors import InvalidConfigError, SolverFailure

# degree-4 rule on the reference triangle (barycentric points, weights sum to 1)
_TRI_A = 0.445948490915965
_TRI_B = 0.091576213509771
_TRI_W1 = 0.223381589678011
_TRI_W2 = 0.109951743655322
TRI_QUAD_BARY = np.array([
    [1 - 2 * _TRI_A, _TRI_A, _TRI_A],
    [_TRI_A, 1 - 2 * _TRI_A, _TRI_A],
    [_TRI_A, _TRI_A, 1 - 2 * _TRI_A],
    [1 - 2 * _TRI_B, _TRI_B, _TRI_B],
    [_TRI_B, 1 - 2 * _TRI_B, _TRI_B],
    [_TRI_B, _TRI_B, 1 - 2 * _TRI_B],
])
TRI_QUAD_W = np.array([_TRI_W1] * 3 + [_TRI_W2] * 3)

EDGE_QUAD = gauss_rule(4)


class CurlGrid:
    """Uniform triangulation of the unit square with a P1 vector space.

    Each grid square is split along its main diagonal; degrees of freedom
    are the two components at every vertex (dof = 2 * vertex + component).
    No constraint is placed on boundary values.
    """

    def __init__(self, n: int):
        if n < 1:
            raise InvalidConfigError(f"need at least one cell per direction, got {n}")
        self.n = int(n)
        self.h = 1.0 / n
        xs = np.linspace(0.0, 1.0, n + 1)
        xx, yy = np.meshgrid(xs, xs, indexing="ij")
        self.verts = np.column_stack([xx.ravel(), yy.ravel()])
        self.n_verts = (n + 1) ** 2
        self.n_dofs = 2 * self.n_verts

        def vid(i, j):
            return i * (n + 1) + j

        tris = []
        for i in range(n):
            for j in range(n):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
        self.tris = np.array(tris, dtype=int)

        # constant barycentric gradients and signed areas
        v0 = self.verts[self.tris[:, 0]]
        v1 = self.verts[self.tris[:, 1]]
        v2 = self.verts[self.tris[:, 2]]
        det = ((v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1])
               - (v2[:, 0] - v0[:, 0]) * (v1[:, 1] - v0[:, 1]))
        self.area = 0.5 * np.abs(det)
        grads = np.empty((len(tris), 3, 2))
        grads[:, 1, 0] = (v2[:, 1] - v0[:, 1]) / det
        grads[:, 1, 1] = (v0[:, 0] - v2[:, 0]) / det
        grads[:, 2, 0] = (v0[:, 1] - v1[:, 1]) / det
        grads[:, 2, 1] = (v1[:, 0] - v0[:, 0]) / det
        grads[:, 0] = -grads[:, 1] - grads[:, 2]
        self.grads = grads
        # curl of the six local vector basis functions (lambda_i e_c)
        curl = np.empty((len(tris), 6))
        curl[:, 0::2] = -grads[:, :, 1]
        curl[:, 1::2] = grads[:, :, 0]
        self.curlvec = curl
        dofs = np.empty((len(tris), 6), dtype=int)
        dofs[:, 0::2] = 2 * self.tris
        dofs[:, 1::2] = 2 * self.tris + 1
        self.tri_dofs = dofs

        # boundary edges: (vertex a, vertex b, adjacent triangle, outward normal)
        edges = []
        for j in range(n):  # y = 0, triangles (i, j=0) lower; normal (0,-1)
            i = j
            edges.append((vid(i, 0), vid(i + 1, 0), 2 * (i * n), (0.0, -1.0)))
        for j in range(n):  # x = 1: lower triangle of column i = n-1
            edges.append((vid(n, j), vid(n, j + 1), 2 * ((n - 1) * n + j), (1.0, 0.0)))
        for j in range(n):  # y = 1: upper triangles
            edges.append((vid(j, n), vid(j + 1, n), 2 * (j * n + (n - 1)) + 1, (0.0, 1.0)))
        for j in range(n):  # x = 0: upper triangles of column 0
            edges.append((vid(0, j), vid(0, j + 1), 2 * j + 1, (-1.0, 0.0)))
        self.bedges = edges

    # -- assembly -----------------------------------------------------------

    def _scatter(self, rows, cols, vals) -> sp.csr_matrix:
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(self.n_dofs, self.n_dofs)).tocsr()
        mat.sum_duplicates()
        mat.sort_indices()
        return mat

    def curl_stiffness(self) -> sp.csr_matrix:
        """(curl u, curl v) over the domain."""
        vals = self.area[:, None, None] * np.einsum("ti,tj->tij", self.curlvec, self.curlvec)
        rows = np.repeat(self.tri_dofs[:, :, None], 6, axis=2)
        cols = np.repeat(self.tri_dofs[:, None, :], 6, axis=1)
        return self._scatter(rows.ravel(), cols.ravel(), vals.ravel())

    def mass(self) -> sp.csr_matrix:
        """(u, v) over the domain (block P1 mass)."""
        base = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
        loc = np.kron(base, np.eye(2))
        vals = self.area[:, None, None] * loc[None]
        rows = np.repeat(self.tri_dofs[:, :, None], 6, axis=2)
        cols = np.repeat(self.tri_dofs[:, None, :], 6, axis=1)
        return self._scatter(rows.ravel(), cols.ravel(), vals.ravel())

    def _edge_loops(self):
        for va, vb, tri, normal in self.bedges:
            pa, pb = self.verts[va], self.verts[vb]
            length = float(np.linalg.norm(pb - pa))
            yield va, vb, tri, np.asarray(normal), pa, pb, length

    def boundary_consistency(self) -> sp.csr_matrix:
        """C[test, trial] = boundary integral of (curl phi_trial)(phi_test x n)."""
        rows, cols, vals = [], [], []
        for va, vb, tri, normal, pa, pb, length in self._edge_loops():
            cross = np.array([normal[1], -normal[0]])  # (e_x x n, e_y x n)
            for vert in (va, vb):
                weight = length / 2.0  # integral of the hat function on its edge
                for c in range(2):
                    r = 2 * vert + c
                    for j in range(6):
                        rows.append(r)
                        cols.append(self.tri_dofs[tri, j])
                        vals.append(weight * cross[c] * self.curlvec[tri, j])
        return self._scatter(np.array(rows), np.array(cols), np.array(vals))

    def boundary_mass(self) -> sp.csr_matrix:
        """(u, v) over the boundary."""
        base = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        rows, cols, vals = [], [], []
        for va, vb, tri, normal, pa, pb, length in self._edge_loops():
            loc = length * np.kron(base, np.eye(2))
            dofs = np.array([2 * va, 2 * va + 1, 2 * vb, 2 * vb + 1])
            for a in range(4):
                for b in range(4):
                    rows.append(dofs[a])
                    cols.append(dofs[b])
                    vals.append(loc[a, b])
        return self._scatter(np.array(rows), np.array(cols), np.array(vals))

    def boundary_curl_mass(self) -> sp.csr_matrix:
        """(curl u, curl v) over the boundary (piecewise constant curls)."""
        rows, cols, vals = [], [], []
        for va, vb, tri, normal, pa, pb, length in self._edge_loops():
            for a in range(6):
                for b in range(6):
                    rows.append(self.tri_dofs[tri, a])
                    cols.append(self.tri_dofs[tri, b])
                    vals.append(length * self.curlvec[tri, a] * self.curlvec[tri, b])
        return self._scatter(np.array(rows), np.array(cols), np.array(vals))


class NitscheOperator:
    """Assembled forms of the penalty scheme on one grid."""

    def __init__(self, grid: CurlGrid, gamma: float):
        if gamma <= 0:
            raise InvalidConfigError(f"penalty parameter must be positive, got {gamma}")
        self.grid = grid
        self.gamma = float(gamma)
        self.K = grid.curl_stiffness()
        self.M = grid.mass()
        self.C = grid.boundary_consistency()
        self.Eb = grid.boundary_mass()
        self.CCb = grid.boundary_curl_mass()
        h = grid.h
        # consistency terms enter with + under the orientation used here
        # (curl u = d1 u2 - d2 u1, u x n = u1 n2 - u2 n1, n outward):
        # (curl curl E, g) = (curl E, curl g) + <curl E, g x n>_Gamma.
        self.A = (self.K + self.C + self.C.T + (self.gamma / h) * self.Eb).tocsr()
        self.gram_h = (self.K + (1.0 / h) * self.Eb).tocsr()
        self.gram_triple = (self.gram_h + h * self.CCb).tocsr()
        self._factor = None

    def bilinear(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(v @ (self.A @ u))

    def norm_h(self, u: np.ndarray) -> float:
        return float(np.sqrt(u @ (self.gram_h @ u)))

    def triple_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(u @ (self.gram_triple @ u)))

    def coercivity_constant(self) -> float:
        """Smallest eigenvalue of A in the metric of the h-norm Gram matrix."""
        from scipy.linalg import eigh

        vals = eigh(self.A.toarray(), self.gram_h.toarray(), eigvals_only=True,
                    subset_by_index=[0, 0])
        return float(vals[0])

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._factor is None:
            try:
                self._factor = spla.splu(self.A.tocsc())
            except RuntimeError as exc:
                raise SolverFailure(
                    f"stationary solve failed, consider increasing gamma: {exc}", np.inf
                ) from exc
        return self._factor.solve(rhs)


# -- loads and projections ----------------------------------------------------


def load_vector(grid: CurlGrid, func) -> np.ndarray:
    """Inner products (func, phi_i) by degree-4 triangle quadrature.

    func maps points (n, 2) to values (n, 2).
    """
    out = np.zeros(grid.n_dofs)
    pts = np.einsum("qi,tix->tqx", TRI_QUAD_BARY, grid.verts[grid.tris])
    vals = np.asarray(func(pts.reshape(-1, 2)), dtype=float).reshape(len(grid.tris), -1, 2)
    for q in range(TRI_QUAD_BARY.shape[0]):
        w = TRI_QUAD_W[q] * grid.area
        for i in range(3):
            lam = TRI_QUAD_BARY[q, i]
            for c in range(2):
                np.add.at(out, 2 * grid.tris[:, i] + c, w * lam * vals[:, q, c])
    return out


def nitsche_rhs(op: NitscheOperator, u_func, curl_func) -> np.ndarray:
    """a(u, phi_i) for an exact field given by (u, curl u) callables."""
    grid = op.grid
    out = np.zeros(grid.n_dofs)
    # volume: (curl u, curl phi)
    pts = np.einsum("qi,tix->tqx", TRI_QUAD_BARY, grid.verts[grid.tris])
    cu = np.asarray(curl_func(pts.reshape(-1, 2)), dtype=float).reshape(len(grid.tris), -1)
    cu_int = np.einsum("q,tq->t", TRI_QUAD_W, cu) * grid.area
    np.add.at(out, grid.tri_dofs, cu_int[:, None] * grid.curlvec)
    # boundary terms
    gamma_h = op.gamma / grid.h
    for va, vb, tri, normal, pa, pb, length in grid._edge_loops():
        ts = 0.5 * (EDGE_QUAD.nodes + 1.0)
        epts = pa[None, :] + ts[:, None] * (pb - pa)[None, :]
        ew = 0.5 * length * EDGE_QUAD.weights
        uvals = np.asarray(u_func(epts), dtype=float)
        cvals = np.asarray(curl_func(epts), dtype=float)
        cross = np.array([normal[1], -normal[0]])
        u_cross_n = uvals[:, 0] * normal[1] - uvals[:, 1] * normal[0]
        lam = np.column_stack([1.0 - ts, ts])
        for k, vert in enumerate((va, vb)):
            for c in range(2):
                dof = 2 * vert + c
                # +(curl u)(phi x n) and penalty (gamma/h)(u, phi)
                out[dof] += np.sum(ew * cvals * cross[c] * lam[:, k])
                out[dof] += gamma_h * np.sum(ew * uvals[:, c] * lam[:, k])
        # +(u x n)(curl phi): hits all dofs of the adjacent triangle
        flux = np.sum(ew * u_cross_n)
        out[grid.tri_dofs[tri]] += flux * grid.curlvec[tri]
    return out


def ritz_project(op: NitscheOperator, u_func, curl_func) -> np.ndarray:
    """Projection reproducing the bilinear form: a(Q u, v) = a(u, v) for all v."""
    return op.solve(nitsche_rhs(op, u_func, curl_func))


# -- error measures -----------------------------------------------------------


def error_norms(op: NitscheOperator, coeffs: np.ndarray, u_func, curl_func):
    """(L2, h-norm, triple-norm) of (u - u_h) by quadrature.

    u_h is the P1 field with the given coefficients.
    """
    grid = op.grid
    pts = np.einsum("qi,tix->tqx", TRI_QUAD_BARY, grid.verts[grid.tris])
    uex = np.asarray(u_func(pts.reshape(-1, 2)), dtype=float).reshape(len(grid.tris), -1, 2)
    cex = np.asarray(curl_func(pts.reshape(-1, 2)), dtype=float).reshape(len(grid.tris), -1)
    node_vals = coeffs.reshape(-1, 2)[grid.tris]          # (nt, 3, 2)
    uh = np.einsum("qi,tic->tqc", TRI_QUAD_BARY, node_vals)
    ch = np.einsum("tj,tj->t", grid.curlvec, coeffs[grid.tri_dofs])
    du = uex - uh
    dc = cex - ch[:, None]
    l2_sq = float(np.einsum("q,tqc->", TRI_QUAD_W, du**2 * grid.area[:, None, None]))
    curl_sq = float(np.einsum("q,tq->", TRI_QUAD_W, dc**2 * grid.area[:, None]))
    bnd_sq = 0.0
    bnd_curl_sq = 0.0
    for va, vb, tri, normal, pa, pb, length in grid._edge_loops():
        ts = 0.5 * (EDGE_QUAD.nodes + 1.0)
        epts = pa[None, :] + ts[:, None] * (pb - pa)[None, :]
        ew = 0.5 * length * EDGE_QUAD.weights
        ue = np.asarray(u_func(epts), dtype=float)
        ce = np.asarray(curl_func(epts), dtype=float)
        lam = np.column_stack([1.0 - ts, ts])
        uhe = (lam[:, 0:1] * coeffs.reshape(-1, 2)[va][None, :]
               + lam[:, 1:2] * coeffs.reshape(-1, 2)[vb][None, :])
        che = float(grid.curlvec[tri] @ coeffs[grid.tri_dofs[tri]])
        bnd_sq += float(np.sum(ew * np.sum((ue - uhe) ** 2, axis=1)))
        bnd_curl_sq += float(np.sum(ew * (ce - che) ** 2))
    h = grid.h
    h_norm = np.sqrt(curl_sq + bnd_sq / h)
    triple = np.sqrt(curl_sq + bnd_sq / h + h * bnd_curl_sq)
    return float(np.sqrt(l2_sq)), float(h_norm), float(triple)


def l2_norm(op: NitscheOperator, coeffs: np.ndarray) -> float:
    return float(np.sqrt(coeffs @ (op.M @ coeffs)))


# -- time stepping ------------------------------------------------------------


class TimeStepper:
    """Three-level scheme: second time difference plus averaged stiffness."""

    def __init__(self, op: NitscheOperator, k: float):
        if k <= 0:
            raise InvalidConfigError(f"time step must be positive, got {k}")
        self.op = op
        self.k = float(k)
        self._factor = spla.splu((op.M / k**2 + op.A / 4.0).tocsc())

    def step(self, e_prev2: np.ndarray, e_prev1: np.ndarray, load: np.ndarray) -> np.ndarray:
        """Advance one level; load carries the assembled right-hand side."""
        op, k = self.op, self.k
        rhs = (op.M @ (2.0 * e_prev1 - e_prev2)) / k**2 \
            - (op.A @ (2.0 * e_prev1 + e_prev2)) / 4.0 + load
        return self._factor.solve(rhs)


def startup(op: NitscheOperator, k: float, e0, e0_curl, et0=None, et0_curl=None,
            ett0=None, ett0_curl=None, ettt0=None, ettt0_curl=None):
    """First two levels: the projection of the initial field and of its
    Taylor expansion at time k (third order when a third derivative is given)."""

    def taylor(funcs, curls):
        coefs = [1.0, k, k**2 / 2.0, k**3 / 6.0]

        def u(pts):
            out = 0.0
            for coef, f in zip(coefs, funcs):
                if f is not None:
                    out = out + coef * np.asarray(f(pts), dtype=float)
            return out

        def cu(pts):
            out = 0.0
            for coef, f in zip(coefs, curls):
                if f is not None:
                    out = out + coef * np.asarray(f(pts), dtype=float)
            return out

        return u, cu

    e_first = ritz_project(op, e0, e0_curl)
    u1, cu1 = taylor((e0, et0, ett0, ettt0), (e0_curl, et0_curl, ett0_curl, ettt0_curl))
    e_second = ritz_project(op, u1, cu1)
    return e_first, e_second


def discrete_energy(op: NitscheOperator, theta_m: np.ndarray, theta_m1: np.ndarray,
                    k: float) -> float:
    """Three-level energy: squared difference-quotient mass plus averaged stiffness."""
    d = (theta_m - theta_m1) / k
    s = theta_m + theta_m1
    return float(d @ (op.M @ d) + 0.25 * s @ (op.A @ s))


# -- manufactured fields --------------------------------------------------------


def smooth_vector_field():
    """Smooth divergence-free vortex on the unit square, zero on the boundary.

    The rotated gradient of the stream bubble sin^2(pi x) sin^2(pi y);
    divergence-free fields are the ones the curl-curl data determines (a
    gradient admixture is invisible to the bilinear form).  Returns
    (u, curl u, curl curl u) callables on (n, 2) point arrays.
    """
    pi = np.pi

    def u(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([pi * np.sin(pi * x) ** 2 * np.sin(2 * pi * y),
                                -pi * np.sin(2 * pi * x) * np.sin(pi * y) ** 2])

    def curl_u(pts):
        x, y = pts[:, 0], pts[:, 1]
        return -2 * pi**2 * (np.cos(2 * pi * x) * np.sin(pi * y) ** 2
                             + np.sin(pi * x) ** 2 * np.cos(2 * pi * y))

    def curl_curl_u(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([
            -2 * pi**3 * np.sin(2 * pi * y) * (2 * np.cos(2 * pi * x) - 1),
            2 * pi**3 * np.sin(2 * pi * x) * (2 * np.cos(2 * pi * y) - 1)])

    return u, curl_u, curl_curl_u


def oscillating_solution():
    """E(t, x) = cos(t) u(x) with the matching source time derivative.

    Returns (E, curl E, j_t) where each takes (t, pts) and j_t satisfies
    E_tt + curl curl E = -j_t.
    """
    u, curl_u, curl_curl_u = smooth_vector_field()

    def efield(t, pts):
        return np.cos(t) * u(pts)

    def ecurl(t, pts):
        return np.cos(t) * curl_u(pts)

    def j_t(t, pts):
        return np.cos(t) * (u(pts) - curl_curl_u(pts))

    return efield, ecurl, j_t


def fully_discrete_solve(op: NitscheOperator, k: float, t_final: float,
                         all_norms: bool = False):
    """March the oscillating manufactured solution to t_final.

    Returns the L2 error there, or the (L2, h-norm, triple-norm) triple
    when all_norms is set.
    """
    efield, ecurl, j_t = oscillating_solution()
    u, curl_u, curl_curl_u = smooth_vector_field()

    def neg_u(pts):
        return -u(pts)

    def neg_curl(pts):
        return -curl_u(pts)

    e0c, e1c = startup(op, k, u, curl_u, None, None, neg_u, neg_curl)
    stepper = TimeStepper(op, k)
    m_steps = int(round(t_final / k))
    prev2, prev1 = e0c, e1c
    for m in range(2, m_steps + 1):
        t_load = (m - 1) * k
        load = -load_vector(op.grid, lambda pts: j_t(t_load, pts))
        prev2, prev1 = prev1, stepper.step(prev2, prev1, load)

    def u_final(pts):
        return efield(t_final, pts)

    def cu_final(pts):
        return ecurl(t_final, pts)

    norms = error_norms(op, prev1, u_final, cu_final)
    return norms if all_norms else norms[0]
