"""Streamline-diffusion scheme for the Vlasov equation in phase space-time.

Handles one spatial and two velocity coordinates: trial/test functions are
degree-p tensor products over (t, x, v1, v2), continuous in (x, v1, v2)
and discontinuous across slab interfaces, with x periodic and homogeneous
Dirichlet data on the velocity boundary (compactly supported densities).

The transport coefficients (v1, E1 + v2 B, E2 - v1 B) factorize into a
field part on (t, x) and affine velocity weights, so every local matrix is
a short sum of Kronecker-product terms; assembly batches those products
over all cells of a slab.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import AssemblyError, InvalidConfigError
from .maxwell import FieldState, MaxwellSpace
from .mesh import TensorMesh, TimePartition, HpAssignment
from .sparse import CompressedPattern, SparseSystem, solve
from .spaces import Direction, time_direction


def vhat(v, relativistic: bool):
    """Transport velocity: v itself, or v / sqrt(1 + |v|^2)."""
    v = np.asarray(v, dtype=float)
    if not relativistic:
        return v.copy()
    gamma = np.sqrt(1.0 + np.sum(v * v, axis=-1, keepdims=True))
    return v / gamma


def velocity_jacobian(v, relativistic: bool) -> np.ndarray:
    """Jacobian d vhat_i / d v_j at one point; exactly symmetric."""
    v = np.asarray(v, dtype=float)
    n = v.size
    if not relativistic:
        return np.eye(n)
    gamma = np.sqrt(1.0 + float(np.dot(v, v)))
    jac = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            # v[i]*v[j] is bitwise symmetric, so jac[i,j] == jac[j,i] exactly
            jac[i, j] = (1.0 if i == j else 0.0) / gamma - v[i] * v[j] / gamma**3
    return jac


def phase_divergence(v, b_field, relativistic: bool) -> float:
    """Analytic phase-space divergence of the transport field.

    The x-block vanishes because vhat does not depend on x; the force block
    reduces to contractions of B with antisymmetric differences of the
    (symmetric) vhat Jacobian, coded so the cancellation is exact.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    jac = velocity_jacobian(v, relativistic)
    if v.size == 2:
        b = float(np.asarray(b_field).reshape(()))
        force_div = b * (jac[1, 0] - jac[0, 1])
    elif v.size == 3:
        b = np.asarray(b_field, dtype=float).reshape(3)
        force_div = (b[0] * (jac[2, 1] - jac[1, 2])
                     + b[1] * (jac[0, 2] - jac[2, 0])
                     + b[2] * (jac[1, 0] - jac[0, 1]))
    else:
        raise InvalidConfigError("velocity must have 2 or 3 components")
    return 0.0 + force_div


class TransportField:
    """Frozen phase-space velocity built from electromagnetic fields.

    For the 1x2v solver the fields come from a discrete FieldState on the
    matching slab; generic callables (t, x) -> values support tests and the
    full 3D evaluation path.  x_scale multiplies the spatial transport
    block (1/L on a normalized domain).
    """

    def __init__(self, relativistic: bool = False, x_scale: float = 1.0,
                 maxwell_space: MaxwellSpace | None = None,
                 field_state: FieldState | None = None, t_lo: float = 0.0,
                 e_func=None, b_func=None):
        self.relativistic = bool(relativistic)
        self.x_scale = float(x_scale)
        self.maxwell_space = maxwell_space
        self.field_state = field_state
        self.t_lo = float(t_lo)
        self.e_func = e_func
        self.b_func = b_func

    def fields_at(self, t: float, x):
        """(E, B) at one point: E 2-vector and scalar B in reduced mode."""
        if self.field_state is not None:
            w = self.maxwell_space.eval_point(self.field_state, t - self.t_lo, x)
            return w[:2], w[2]
        e = np.zeros(2) if self.e_func is None else np.asarray(self.e_func(t, x), dtype=float)
        b = 0.0 if self.b_func is None else self.b_func(t, x)
        return e, b

    def quad_grids(self, nqt: int, n_cells: int, nq: int):
        """Field values on the slab quadrature grid, each (n_cells, nqt*nq)."""
        f = self.maxwell_space.quad_values(self.field_state)
        if f.shape[1] != nqt or f.shape[2] != n_cells or f.shape[3] != nq:
            raise AssemblyError("field state and phase space use different quadrature grids")
        flat = np.transpose(f, (0, 2, 1, 3)).reshape(3, n_cells, nqt * nq)
        return flat[0], flat[1], flat[2]


def transport_eval(field: TransportField, t: float, x, v) -> np.ndarray:
    """Phase-space velocity G at one point (spatial block, then force block)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    vh = vhat(v, field.relativistic)
    if v.size == 2:
        e, b = field.fields_at(t, x)
        return np.array([field.x_scale * vh[0], e[0] + vh[1] * b, e[1] - vh[0] * b])
    if v.size == 3:
        e = np.asarray(field.e_func(t, x), dtype=float)
        b = np.asarray(field.b_func(t, x), dtype=float)
        return np.concatenate([field.x_scale * vh, e + np.cross(vh, b)])
    raise InvalidConfigError("velocity must have 2 or 3 components")


@dataclass
class DensityState:
    """Discrete phase-space density on one slab.

    coeffs has shape (p+1, x nodes, v1 nodes, v2 nodes); Dirichlet velocity
    boundary nodes are present and held at zero.
    """

    m: int
    coeffs: np.ndarray

    @property
    def trace_in(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def trace_out(self) -> np.ndarray:
        return self.coeffs[-1]


# streaming pieces: (tx pattern, field key, scale key, v1 (power, deriv), v2 (power, deriv))
_PIECES = (
    ("t", None, 1.0, (0, False), (0, False)),
    ("x", None, "x_scale", (1, False), (0, False)),
    ("v", "e1", 1.0, (0, True), (0, False)),
    ("v", "b", 1.0, (0, True), (1, False)),
    ("v", "e2", 1.0, (0, False), (0, True)),
    ("v", "b", -1.0, (1, False), (0, True)),
)


class PhaseSpace:
    """Discrete slab space on (t, x, v1, v2) plus assembly tables."""

    def __init__(self, mesh_x: TensorMesh, mesh_v: TensorMesh, p: int, slab_length: float,
                 n_quad: int | None = None):
        if mesh_x.dim != 1 or mesh_v.dim != 2:
            raise AssemblyError("phase-space assembly supports one spatial and two velocity dimensions")
        if not mesh_x.periodic[0]:
            raise AssemblyError("the spatial direction must be periodic")
        self.mesh_x = mesh_x
        self.mesh_v = mesh_v
        self.p = int(p)
        self.k = float(slab_length)
        self.xdir = Direction(*mesh_x.bounds[0], mesh_x.cells[0], p, bc="periodic", n_quad=n_quad)
        self.v1dir = Direction(*mesh_v.bounds[0], mesh_v.cells[0], p, bc="dirichlet", n_quad=n_quad)
        self.v2dir = Direction(*mesh_v.bounds[1], mesh_v.cells[1], p, bc="dirichlet", n_quad=n_quad)
        self.tdir = time_direction(0.0, self.k, p, n_quad=n_quad)
        self.n_cells = mesh_x.cells[0] * mesh_v.cells[0] * mesh_v.cells[1]
        self.cell_grid = (mesh_x.cells[0], mesh_v.cells[0], mesh_v.cells[1])
        self.node_shape = (self.xdir.n_nodes, self.v1dir.n_nodes, self.v2dir.n_nodes)
        self._build_tables()
        self._build_scatter()
        self._pair_cache: dict[str, np.ndarray] = {}

    # -- tables -----------------------------------------------------------

    def _build_tables(self):
        nl = self.p + 1
        td, xd = self.tdir, self.xdir
        # joint (t, x) pattern tables, ((p+1)^2, nqt*nqx)
        self.tx_pat = {
            "v": np.kron(td.val, xd.val),
            "t": np.kron(td.der, xd.val),
            "x": np.kron(td.val, xd.der),
        }
        self.w_tx = np.kron(td.qw, xd.qw)
        # weighted velocity matrices per (power, test deriv, trial deriv)
        self._vmats = {}
        for dd, tag in ((self.v1dir, 1), (self.v2dir, 2)):
            for power in (0, 1, 2):
                for dt in (False, True):
                    for dr in (False, True):
                        self._vmats[(tag, power, dt, dr)] = dd.weighted(power, dt, dr)
        # flattened spatial-velocity tables for evaluation paths
        dirs3 = (self.xdir, self.v1dir, self.v2dir)
        self.V3 = reduce(np.kron, [d.val for d in dirs3])
        self.D3 = []
        for l in range(3):
            self.D3.append(reduce(np.kron, [dirs3[j].der if j == l else dirs3[j].val
                                            for j in range(3)]))
        self.wQ3 = reduce(np.kron, [d.qw for d in dirs3])
        cell_multi = np.indices(self.cell_grid).reshape(3, -1)
        nq_each = [d.n_quad for d in dirs3]
        q_multi = np.indices(nq_each).reshape(3, -1)
        self.Xq3 = np.empty((self.n_cells, int(np.prod(nq_each)), 3))
        for l in range(3):
            self.Xq3[:, :, l] = dirs3[l].qx[cell_multi[l]][:, q_multi[l]]
        loc_multi = np.indices((nl,) * 3).reshape(3, -1)
        gather = None
        for l in range(3):
            nodes_l = dirs3[l].local_map[cell_multi[l]][:, loc_multi[l]]
            gather = nodes_l if gather is None else gather * self.node_shape[l] + nodes_l
        self.gather = gather
        self._cell_multi = cell_multi
        self._loc_multi = loc_multi

    def _build_scatter(self):
        nl = self.p + 1
        dirs3 = (self.xdir, self.v1dir, self.v2dir)
        free_counts = [d.n_free for d in dirs3]
        nfree = int(np.prod(free_counts))
        self.n_dofs = nl * nfree
        fidx, ok = None, None
        for l in range(3):
            nodes_l = dirs3[l].local_map[self._cell_multi[l]][:, self._loc_multi[l]]
            f_l = dirs3[l].node_to_free[nodes_l]
            ok = f_l >= 0 if ok is None else ok & (f_l >= 0)
            fidx = f_l if fidx is None else fidx * free_counts[l] + f_l
        # local ordering (a, local x, local v1, local v2), C order
        dof = np.arange(nl)[None, :, None] * nfree + fidx[:, None, :]
        dof = np.where(ok[:, None, :], dof, -1).reshape(self.n_cells, -1)
        self.cell_dofs = dof
        rows = np.repeat(dof[:, :, None], dof.shape[1], axis=2)
        cols = np.repeat(dof[:, None, :], dof.shape[1], axis=1)
        keep = (rows >= 0) & (cols >= 0)
        self._keep = keep
        self._pattern = CompressedPattern(rows[keep], cols[keep], self.n_dofs)
        self._free_counts = free_counts

    # -- coefficient layout -------------------------------------------------

    def tensor_to_vector(self, coeffs: np.ndarray) -> np.ndarray:
        out = coeffs
        for ax, dd in enumerate((self.xdir, self.v1dir, self.v2dir)):
            out = np.compress(dd.free, out, axis=1 + ax)
        return out.reshape(-1)

    def vector_to_tensor(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros((self.p + 1,) + self.node_shape)
        idx = np.ix_(np.arange(self.p + 1),
                     *[np.flatnonzero(dd.free) for dd in (self.xdir, self.v1dir, self.v2dir)])
        out[idx] = vec.reshape((self.p + 1,) + tuple(self._free_counts))
        return out

    def mass_apply(self, trace: np.ndarray) -> np.ndarray:
        out = trace
        for ax, dd in enumerate((self.xdir, self.v1dir, self.v2dir)):
            gm = dd.mass_global()
            out = np.moveaxis(np.tensordot(gm, out, axes=(1, ax)), 0, ax)
        return out

    def trace_inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(a * self.mass_apply(b)))

    def trace_load(self, func) -> np.ndarray:
        """Inner products of a callable f(points (n,3)) with trace basis functions."""
        pts = self.Xq3.reshape(-1, 3)
        vals = np.asarray(func(pts), dtype=float).reshape(self.n_cells, -1)
        loads = np.einsum("q,sq,uq->su", self.wQ3, vals, self.V3)
        rhs = np.zeros(int(np.prod(self.node_shape)))
        np.add.at(rhs, self.gather, loads)
        return rhs.reshape(self.node_shape)

    def project_trace(self, func) -> np.ndarray:
        """L2 projection onto the trace space (zero on the velocity boundary)."""
        out = self.trace_load(func)
        for ax, dd in enumerate((self.xdir, self.v1dir, self.v2dir)):
            free = np.flatnonzero(dd.free)
            gm = dd.mass_global()[np.ix_(free, free)]
            moved = np.moveaxis(out, ax, 0)
            shape = moved.shape
            reduced = moved[free].reshape(len(free), -1)
            sol = np.zeros((shape[0], reduced.shape[1]))
            sol[free] = np.linalg.solve(gm, reduced)
            out = np.moveaxis(sol.reshape(shape), 0, ax)
        return out

    def reflect_trace(self, trace: np.ndarray) -> np.ndarray:
        """Map f(x, v) to f(x, -v) on a symmetric velocity grid."""
        for dd in (self.v1dir, self.v2dir):
            if abs(dd.lo + dd.hi) > 1e-12 * max(1.0, abs(dd.hi)):
                raise InvalidConfigError("velocity mesh must be symmetric under v -> -v")
        return trace[:, ::-1, ::-1].copy()

    # -- pair moments ---------------------------------------------------------

    def pair_weights(self, weight, cache_key: str | None = None) -> np.ndarray:
        """Integrals of weight(v1, v2) against every velocity basis pair.

        Returns (n v1 nodes, n v2 nodes); exact for polynomial weights up
        to the quadrature's degree, quadrature-accurate otherwise.
        """
        if cache_key is not None and cache_key in self._pair_cache:
            return self._pair_cache[cache_key]
        q1, w1 = self.v1dir.qx, self.v1dir.qw
        q2, w2 = self.v2dir.qx, self.v2dir.qw
        vals = weight(q1[:, None, :, None], q2[None, :, None, :])
        vals = np.broadcast_to(vals, (self.v1dir.n_cells, self.v2dir.n_cells,
                                      q1.shape[1], q2.shape[1]))
        loc = np.einsum("p,q,cdpq,ap,bq->cdab", w1, w2, vals, self.v1dir.val, self.v2dir.val)
        out = np.zeros((self.v1dir.n_nodes, self.v2dir.n_nodes))
        rows = self.v1dir.local_map
        cols = self.v2dir.local_map
        for c in range(self.v1dir.n_cells):
            for d in range(self.v2dir.n_cells):
                out[np.ix_(rows[c], cols[d])] += loc[c, d]
        if cache_key is not None:
            self._pair_cache[cache_key] = out
        return out

    def moment_rep(self, state: DensityState, pair_w: np.ndarray) -> np.ndarray:
        """Velocity moment of the density as (p+1, x nodes) coefficients."""
        return np.einsum("aijk,jk->ai", state.coeffs, pair_w)

    def current_density(self, state: DensityState, t_local: float, x,
                        relativistic: bool = False) -> np.ndarray:
        """(j1, j2) at one point of the slab, summed over all velocity cells."""
        if relativistic:
            w1 = self.pair_weights(lambda a, b: a / np.sqrt(1.0 + a**2 + b**2), "jhat1")
            w2 = self.pair_weights(lambda a, b: b / np.sqrt(1.0 + a**2 + b**2), "jhat2")
        else:
            w1 = self.pair_weights(lambda a, b: a + 0.0 * b, "j1")
            w2 = self.pair_weights(lambda a, b: b + 0.0 * a, "j2")
        from .basis import ShapeSet

        tv, _ = ShapeSet(self.p).eval([2.0 * t_local / self.k - 1.0])
        cell, xv, _ = self.xdir.interp_tables([np.atleast_1d(x)[0]])
        nodes = self.xdir.local_map[cell[0]]
        out = []
        for wm in (w1, w2):
            rep = np.einsum("aijk,jk->ai", state.coeffs, wm)
            out.append(float(np.einsum("ai,a,i->", rep[:, nodes], tv[:, 0], xv[:, 0])))
        return np.array(out)

    # -- assembly ---------------------------------------------------------------

    def _tx_tensor(self, pat_test: str, pat_trial: str, field: np.ndarray | None):
        """(t,x) block: field-weighted joint pattern integrals per x-cell."""
        ta, tb = self.tx_pat[pat_test], self.tx_pat[pat_trial]
        if field is None:
            return np.einsum("q,uq,vq->uv", self.w_tx, ta, tb)
        return np.einsum("sq,uq,vq->suv", self.w_tx[None, :] * field, ta, tb)

    def _groups(self, transport: TransportField):
        """Accumulate Kronecker-term groups keyed by velocity matrix kinds."""
        if transport.relativistic:
            raise AssemblyError("phase-space assembly requires the non-relativistic transport")
        nqt, nqx = self.tdir.n_quad, self.xdir.n_quad
        e1, e2, bb = transport.quad_grids(nqt, self.xdir.n_cells, nqx)
        fields = {"e1": e1, "e2": e2, "b": bb}

        def scale_of(s):
            return transport.x_scale if s == "x_scale" else float(s)

        galerkin: dict[tuple, list] = {}
        sd: dict[tuple, list] = {}

        def add(groups, key, pat_test, pat_trial, field_vals, factor):
            groups.setdefault(key, []).append((pat_test, pat_trial, field_vals, factor))

        for piece in _PIECES:
            patb, fb, sb, v1b, v2b = piece
            key = ((v1b[0], False, v1b[1]), (v2b[0], False, v2b[1]))
            add(galerkin, key, "v", patb, None if fb is None else fields[fb], scale_of(sb))
        for pa in _PIECES:
            for pb in _PIECES:
                pata, fa, sa, v1a, v2a = pa
                patb, fb, sb, v1b, v2b = pb
                key = ((v1a[0] + v1b[0], v1a[1], v1b[1]), (v2a[0] + v2b[0], v2a[1], v2b[1]))
                if fa is None and fb is None:
                    fv = None
                elif fa is None:
                    fv = fields[fb]
                elif fb is None:
                    fv = fields[fa]
                else:
                    fv = fields[fa] * fields[fb]
                add(sd, key, pata, patb, fv, scale_of(sa) * scale_of(sb))

        def materialize(groups):
            nx = self.xdir.n_cells
            txs, v1s, v2s = [], [], []
            for (k1, k2), terms in groups.items():
                const, var = None, None
                for pat_test, pat_trial, fv, factor in terms:
                    tx = self._tx_tensor(pat_test, pat_trial, fv) * factor
                    if fv is None:
                        const = tx if const is None else const + tx
                    else:
                        var = tx if var is None else var + tx
                if const is not None:
                    tiled = np.broadcast_to(const, (nx,) + const.shape)
                    var = tiled.copy() if var is None else var + tiled
                txs.append(var)
                v1s.append(self._vmats[(1,) + k1])
                v2s.append(self._vmats[(2,) + k2])
            return np.ascontiguousarray(txs), np.ascontiguousarray(v1s), np.ascontiguousarray(v2s)

        return materialize(galerkin), materialize(sd)

    def matrix(self, transport: TransportField, delta_cells: np.ndarray):
        """Slab matrix for the given frozen transport and per-cell weights."""
        from ._kernels import accumulate_local

        delta_cells = np.asarray(delta_cells, dtype=float)
        if delta_cells.shape != (self.n_cells,):
            raise AssemblyError("stabilization weights must be given per cell")
        (txg, v1g, v2g), (txs, v1s, v2s) = self._groups(transport)
        nl = self.p + 1
        # weak upwind start trace, constant across cells
        e00 = np.zeros((nl, nl))
        e00[0, 0] = 1.0
        trace_loc = reduce(np.kron, [e00, self.xdir.mass, self.v1dir.mass, self.v2dir.mass])
        vals = accumulate_local(txg, v1g, v2g, txs, v1s, v2s, delta_cells, trace_loc,
                                self.cell_grid, nl)
        return self._pattern.build(vals[self._keep])

    def assemble_slab(self, t_lo: float, t_hi: float, delta_cells: np.ndarray,
                      transport: TransportField, incoming) -> SparseSystem:
        """Assemble one slab system; incoming is a trace array or callable."""
        if not np.isclose(t_hi - t_lo, self.k):
            raise AssemblyError("slab length does not match the partition")
        matrix = self.matrix(transport, delta_cells)
        rhs_tensor = np.zeros((self.p + 1,) + self.node_shape)
        if callable(incoming):
            rhs_tensor[0] = self.trace_load(incoming)
        else:
            inc = np.asarray(incoming, dtype=float)
            if inc.shape != self.node_shape:
                raise AssemblyError("incoming trace has the wrong shape")
            rhs_tensor[0] = self.mass_apply(inc)
        return SparseSystem.from_csr(matrix, self.tensor_to_vector(rhs_tensor))

    def solve_slab(self, system: SparseSystem, m: int, x0: np.ndarray | None = None,
                   method: str = "direct", **kwargs) -> DensityState:
        vec = solve(system, method=method, x0=x0, **kwargs)
        return DensityState(m=m, coeffs=self.vector_to_tensor(vec))

    # -- evaluation ----------------------------------------------------------

    def quad_values(self, state: DensityState, kind: str) -> np.ndarray:
        """Values or first derivatives on the slab quadrature grid.

        kind in {'val', 'dt', 'dx', 'dv1', 'dv2'}; the result has shape
        (nx, n1, n2, nqt, nqx, nq1, nq2).
        """
        ttab = self.tdir.der if kind == "dt" else self.tdir.val
        tabs = {"val": self.V3, "dt": self.V3, "dx": self.D3[0],
                "dv1": self.D3[1], "dv2": self.D3[2]}
        flat = state.coeffs.reshape(self.p + 1, -1)
        cloc = flat[:, self.gather]                      # (p+1, cells, loc)
        out = np.einsum("asu,at,uq->stq", cloc, ttab, tabs[kind])
        nq = (self.tdir.n_quad, self.xdir.n_quad, self.v1dir.n_quad, self.v2dir.n_quad)
        return out.reshape(self.cell_grid + nq)

    def streaming_values(self, state: DensityState, transport: TransportField) -> np.ndarray:
        """d_t f + G . grad f on the quadrature grid (shape as quad_values)."""
        nqt, nqx = self.tdir.n_quad, self.xdir.n_quad
        e1, e2, bb = transport.quad_grids(nqt, self.xdir.n_cells, nqx)
        shape_tx = (self.xdir.n_cells, 1, 1, nqt, nqx, 1, 1)
        e1 = e1.reshape(shape_tx)
        e2 = e2.reshape(shape_tx)
        bb = bb.reshape(shape_tx)
        v1 = self.v1dir.qx.reshape(1, self.v1dir.n_cells, 1, 1, 1, -1, 1)
        v2 = self.v2dir.qx.reshape(1, 1, self.v2dir.n_cells, 1, 1, 1, -1)
        res = self.quad_values(state, "dt")
        res += transport.x_scale * v1 * self.quad_values(state, "dx")
        res += (e1 + v2 * bb) * self.quad_values(state, "dv1")
        res += (e2 - v1 * bb) * self.quad_values(state, "dv2")
        return res

    def trace_values(self, trace: np.ndarray) -> np.ndarray:
        """Values of a trace array on the spatial quadrature grid (cells, nQ)."""
        loc = trace.reshape(-1)[self.gather]
        return loc @ self.V3

    def trace_error(self, trace: np.ndarray, func) -> tuple[float, float]:
        """L1 and L2 norms of (trace - func) over the phase-space box."""
        diff = self.trace_values(trace) - np.asarray(
            func(self.Xq3.reshape(-1, 3)), dtype=float).reshape(self.n_cells, -1)
        l1 = float(np.einsum("q,sq->", self.wQ3, np.abs(diff)))
        l2 = float(np.sqrt(np.einsum("q,sq->", self.wQ3, diff**2)))
        return l1, l2

    def quad_integral(self, values: np.ndarray, per_cell: bool = False):
        """Integrate a quadrature-grid array over the slab (optionally per cell)."""
        w = (self.tdir.qw[:, None, None, None] * self.xdir.qw[None, :, None, None]
             * self.v1dir.qw[None, None, :, None] * self.v2dir.qw[None, None, None, :])
        out = np.einsum("xuvtpqr,tpqr->xuv", values, w)
        return out if per_cell else float(out.sum())

    def slab_norm_sq(self, coeffs: np.ndarray) -> float:
        from .spaces import grid_norm_sq

        masses = [self.tdir.mass_global(), self.xdir.mass_global(),
                  self.v1dir.mass_global(), self.v2dir.mass_global()]
        return grid_norm_sq(coeffs, masses)


def streaming_residual_sq_vlasov(space: PhaseSpace, state: DensityState,
                                 transport: TransportField, delta_cells: np.ndarray) -> float:
    res = space.streaming_values(state, transport)
    per_cell = space.quad_integral(res * res, per_cell=True).reshape(-1)
    return float(np.dot(np.asarray(delta_cells, dtype=float), per_cell))


def triple_norm_vlasov(space: PhaseSpace, states: list[DensityState],
                       transports: list[TransportField], partition: TimePartition,
                       hp: HpAssignment) -> float:
    """Method norm with the frozen-transport streaming residual."""
    if len(states) != partition.M:
        raise AssemblyError("need one state per slab")
    total = space.trace_inner(states[0].trace_in, states[0].trace_in)
    total += space.trace_inner(states[-1].trace_out, states[-1].trace_out)
    for m in range(1, partition.M):
        jump = states[m].trace_in - states[m - 1].trace_out
        total += space.trace_inner(jump, jump)
    for m, st in enumerate(states):
        total += 2.0 * streaming_residual_sq_vlasov(space, st, transports[m], hp.slab_delta(m))
    return float(np.sqrt(0.5 * total))


def bilinear_form_vlasov(space: PhaseSpace, u_states: list[DensityState],
                         g_states: list[DensityState], transports: list[TransportField],
                         partition: TimePartition, hp: HpAssignment) -> float:
    """Global trilinear form with frozen transport, via the slab matrices."""
    total = 0.0
    for m, (us, gs) in enumerate(zip(u_states, g_states)):
        mat = space.matrix(transports[m], hp.slab_delta(m))
        total += float(space.tensor_to_vector(gs.coeffs) @ (mat @ space.tensor_to_vector(us.coeffs)))
    for m in range(1, partition.M):
        total -= space.trace_inner(g_states[m].trace_in, u_states[m - 1].trace_out)
    return total
