"""Streamline-diffusion space-time scheme for symmetric hyperbolic systems.

Solves d_t W + sum_l M_l d_l W = b slab by slab: within one slab the trial
and test spaces are tensor products of a degree-p time basis with a CG
space in x, discontinuous across slab interfaces.  The test function is
augmented with delta_K times the streaming operator applied to it, and
slab coupling is weak through the upwind start trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import AssemblyError, InvalidConfigError
from .mesh import TensorMesh, TimePartition, HpAssignment
from .sparse import CompressedPattern, SparseSystem, solve
from .spaces import Direction, time_direction


@dataclass(frozen=True)
class FluxMatrices:
    """Constant symmetric flux matrices of the first-order system."""

    dim: int
    n_components: int
    mats: tuple[np.ndarray, ...]

    def scaled(self, factor: float) -> "FluxMatrices":
        """Same system with every spatial flux scaled (e.g. by 1/L)."""
        return FluxMatrices(self.dim, self.n_components,
                            tuple(factor * m for m in self.mats))


def flux_matrices(mode: str) -> FluxMatrices:
    """Flux matrices of the Maxwell system.

    'full3d': W = (E1, E2, E3, B1, B2, B3), three 6x6 matrices encoding
    (-curl B, curl E).  'reduced1half': W = (E1, E2, B) with the single
    matrix coupling E2 and B through d_x.
    """
    if mode == "reduced1half":
        m = np.zeros((3, 3))
        m[1, 2] = m[2, 1] = 1.0
        return FluxMatrices(1, 3, (m,))
    if mode != "full3d":
        raise InvalidConfigError(f"unknown flux mode {mode!r}")
    m1 = np.zeros((6, 6))
    m2 = np.zeros((6, 6))
    m3 = np.zeros((6, 6))
    m1[1, 5] = m1[5, 1] = 1.0
    m1[2, 4] = m1[4, 2] = -1.0
    m2[0, 5] = m2[5, 0] = -1.0
    m2[2, 3] = m2[3, 2] = 1.0
    m3[0, 4] = m3[4, 0] = 1.0
    m3[1, 3] = m3[3, 1] = -1.0
    return FluxMatrices(3, 6, (m1, m2, m3))


class SourceField:
    """Right-hand side b(t, x), evaluated pointwise at quadrature nodes."""

    def __init__(self, n_components: int, func=None):
        self.n_components = n_components
        self.func = func

    @classmethod
    def zero(cls, n_components: int) -> "SourceField":
        return cls(n_components, None)

    def values(self, t_pts: np.ndarray, x_pts: np.ndarray) -> np.ndarray | None:
        """Array (n_components, len(t_pts), len(x_pts)); x_pts is (npts, dim)."""
        if self.func is None:
            return None
        out = np.asarray(self.func(t_pts, x_pts), dtype=float)
        want = (self.n_components, len(t_pts), x_pts.shape[0])
        if out.shape != want:
            raise AssemblyError(f"source returned shape {out.shape}, expected {want}")
        return out


@dataclass
class FieldState:
    """Discrete electromagnetic unknown on one slab.

    coeffs has shape (n_components, p+1, *node counts); time node 0 sits at
    the slab start, node p at the slab end, so traces are plain slices.
    """

    m: int
    coeffs: np.ndarray
    incoming: np.ndarray | None = None

    @property
    def trace_in(self) -> np.ndarray:
        return self.coeffs[:, 0]

    @property
    def trace_out(self) -> np.ndarray:
        return self.coeffs[:, -1]


class MaxwellSpace:
    """Discrete slab space plus precomputed assembly tables.

    The slab matrix does not change across a uniform partition; only the
    stabilization weights may vary per cell, so the assembled matrix is
    cached against them.
    """

    def __init__(self, mesh: TensorMesh, p: int, flux: FluxMatrices, slab_length: float,
                 n_quad: int | None = None):
        if mesh.dim != flux.dim:
            raise AssemblyError(
                f"mesh dimension {mesh.dim} does not match flux dimension {flux.dim}")
        self.mesh = mesh
        self.p = int(p)
        self.flux = flux
        self.nc = flux.n_components
        self.k = float(slab_length)
        self.dirs = [
            Direction(lo, hi, n, p, bc="periodic" if per else "dirichlet", n_quad=n_quad)
            for (lo, hi), n, per in zip(mesh.bounds, mesh.cells, mesh.periodic)
        ]
        self.tdir = time_direction(0.0, self.k, p, n_quad=n_quad)
        self._build_tables()
        self._build_local()
        self._build_scatter()
        self._cached_delta: np.ndarray | None = None
        self._cached_matrix = None

    # -- tables ---------------------------------------------------------

    def _build_tables(self):
        d = self.mesh.dim
        nl = self.p + 1
        self.Vx = reduce(np.kron, [dd.val for dd in self.dirs])
        self.Dx = []
        for l in range(d):
            tabs = [self.dirs[j].der if j == l else self.dirs[j].val for j in range(d)]
            self.Dx.append(reduce(np.kron, tabs))
        self.wQ = reduce(np.kron, [dd.qw for dd in self.dirs])
        cell_multi = np.indices(self.mesh.cells).reshape(d, -1)
        nq_each = [dd.n_quad for dd in self.dirs]
        nQ = int(np.prod(nq_each))
        q_multi = np.indices(nq_each).reshape(d, -1)
        self.Xq = np.empty((self.mesh.n_cells, nQ, d))
        for l in range(d):
            self.Xq[:, :, l] = self.dirs[l].qx[cell_multi[l]][:, q_multi[l]]
        self.node_shape = tuple(dd.n_nodes for dd in self.dirs)
        loc_multi = np.indices((nl,) * d).reshape(d, -1)
        gather = None
        for l in range(d):
            nodes_l = self.dirs[l].local_map[cell_multi[l]][:, loc_multi[l]]
            gather = nodes_l if gather is None else gather * self.node_shape[l] + nodes_l
        self.gather = gather
        self._cell_multi = cell_multi
        self._loc_multi = loc_multi

    def _build_local(self):
        """Constant local blocks: Galerkin, stabilization and start trace."""
        d = self.mesh.dim
        td = self.tdir
        Nt, A1t, St = td.mass, td.conv, td.stiff
        E00 = np.zeros_like(Nt)
        E00[0, 0] = 1.0
        eye = np.eye(self.nc)
        masses = [dd.mass for dd in self.dirs]
        convs = [dd.conv for dd in self.dirs]

        def full(comp, time, xkinds):
            return reduce(np.kron, [comp, time] + list(xkinds))

        mats = self.flux.mats
        G = full(eye, A1t, masses)
        T = full(eye, E00, masses)
        SD = full(eye, St, masses)
        for l in range(d):
            xk = [convs[j] if j == l else masses[j] for j in range(d)]
            G = G + full(mats[l], Nt, xk)
            SD = SD + full(mats[l], A1t.T, xk)
            xk_t = [convs[j].T if j == l else masses[j] for j in range(d)]
            SD = SD + full(mats[l], A1t, xk_t)
            for lp in range(d):
                comp = mats[lp] @ mats[l]
                if l == lp:
                    xk2 = [self.dirs[j].stiff if j == l else masses[j] for j in range(d)]
                else:
                    xk2 = [convs[j] if j == l else convs[j].T if j == lp else masses[j]
                           for j in range(d)]
                SD = SD + full(comp, Nt, xk2)
        self.loc_galerkin = G
        self.loc_sd = SD
        self.loc_trace = T

    def _build_scatter(self):
        d = self.mesh.dim
        nl = self.p + 1
        free_counts = [dd.n_free for dd in self.dirs]
        nx_free = int(np.prod(free_counts))
        self.n_dofs = self.nc * nl * nx_free
        fidx = None
        ok = None
        for l in range(d):
            nodes_l = self.dirs[l].local_map[self._cell_multi[l]][:, self._loc_multi[l]]
            f_l = self.dirs[l].node_to_free[nodes_l]
            ok = f_l >= 0 if ok is None else ok & (f_l >= 0)
            fidx = f_l if fidx is None else fidx * free_counts[l] + f_l
        comp_a = (np.arange(self.nc)[:, None] * nl + np.arange(nl)[None, :]).reshape(-1)
        dof = comp_a[None, :, None] * nx_free + fidx[:, None, :]
        dof = np.where(ok[:, None, :], dof, -1).reshape(self.mesh.n_cells, -1)
        self.cell_dofs = dof
        rows = np.repeat(dof[:, :, None], dof.shape[1], axis=2)
        cols = np.repeat(dof[:, None, :], dof.shape[1], axis=1)
        keep = (rows >= 0) & (cols >= 0)
        self._keep = keep
        self._pattern = CompressedPattern(rows[keep], cols[keep], self.n_dofs)
        self._free_counts = free_counts

    # -- coefficient layout ----------------------------------------------

    def tensor_to_vector(self, coeffs: np.ndarray) -> np.ndarray:
        out = coeffs
        for ax, dd in enumerate(self.dirs):
            out = np.compress(dd.free, out, axis=2 + ax)
        return out.reshape(-1)

    def vector_to_tensor(self, vec: np.ndarray) -> np.ndarray:
        shape = (self.nc, self.p + 1) + tuple(self._free_counts)
        out = np.zeros((self.nc, self.p + 1) + self.node_shape)
        idx = np.ix_(np.arange(self.nc), np.arange(self.p + 1),
                     *[np.flatnonzero(dd.free) for dd in self.dirs])
        out[idx] = vec.reshape(shape)
        return out

    # -- assembly ---------------------------------------------------------

    def matrix(self, delta_cells: np.ndarray):
        """Slab matrix for per-cell stabilization weights (cached)."""
        delta_cells = np.asarray(delta_cells, dtype=float)
        if delta_cells.shape != (self.mesh.n_cells,):
            raise AssemblyError("stabilization weights must be given per cell")
        if self._cached_matrix is not None and np.array_equal(delta_cells, self._cached_delta):
            return self._cached_matrix
        vals = (self.loc_galerkin[None] + delta_cells[:, None, None] * self.loc_sd[None]
                + self.loc_trace[None])
        matrix = self._pattern.build(vals[self._keep])
        self._cached_delta = delta_cells.copy()
        self._cached_matrix = matrix
        return matrix

    def mass_apply(self, trace: np.ndarray) -> np.ndarray:
        """Apply the spatial Gram matrix to a (n_c, *nodes) trace array."""
        out = trace
        for ax, dd in enumerate(self.dirs):
            gm = dd.mass_global()
            out = np.moveaxis(np.tensordot(gm, out, axes=(1, 1 + ax)), 0, 1 + ax)
        return out

    def trace_inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(a * self.mass_apply(b)))

    def trace_load(self, funcs) -> np.ndarray:
        """Inner products of callables with every trace basis function."""
        pts = self.Xq.reshape(-1, self.mesh.dim)
        vals = np.asarray(funcs(pts), dtype=float).reshape(self.nc, self.mesh.n_cells, -1)
        loads = np.einsum("q,csq,uq->csu", self.wQ, vals, self.Vx)
        rhs = np.zeros((self.nc, int(np.prod(self.node_shape))))
        for c in range(self.nc):
            np.add.at(rhs[c], self.gather, loads[c])
        return rhs.reshape((self.nc,) + self.node_shape)

    def trace_values(self, trace: np.ndarray) -> np.ndarray:
        """Trace values on the spatial quadrature grid, (n_c, cells, nQ)."""
        loc = trace.reshape(self.nc, -1)[:, self.gather]
        return np.einsum("csu,uq->csq", loc, self.Vx)

    def trace_error(self, trace: np.ndarray, funcs) -> tuple[np.ndarray, np.ndarray]:
        """Per-component L1 and L2 norms of (trace - funcs) over the box."""
        pts = self.Xq.reshape(-1, self.mesh.dim)
        ex = np.asarray(funcs(pts), dtype=float).reshape(self.nc, self.mesh.n_cells, -1)
        diff = self.trace_values(trace) - ex
        l1 = np.einsum("q,csq->c", self.wQ, np.abs(diff))
        l2 = np.sqrt(np.einsum("q,csq->c", self.wQ, diff**2))
        return l1, l2

    def project_trace(self, funcs) -> np.ndarray:
        """L2 projection of callables onto the trace space (free nodes)."""
        out = self.trace_load(funcs)
        for ax, dd in enumerate(self.dirs):
            free = np.flatnonzero(dd.free)
            gm = dd.mass_global()[np.ix_(free, free)]
            moved = np.moveaxis(out, 1 + ax, 0)
            shape = moved.shape
            reduced = moved[free].reshape(len(free), -1)
            sol = np.zeros((shape[0], reduced.shape[1]))
            sol[free] = np.linalg.solve(gm, reduced)
            out = np.moveaxis(sol.reshape(shape), 0, 1 + ax)
        return out

    def assemble_slab(self, t_lo: float, t_hi: float, delta_cells: np.ndarray,
                      source: SourceField, incoming) -> SparseSystem:
        """Assemble one slab system.

        incoming is either a trace coefficient array (n_c, *nodes) from the
        previous slab, or a callable (npts, dim) -> (n_c, npts) imposing the
        initial datum weakly.
        """
        if not np.isclose(t_hi - t_lo, self.k):
            raise AssemblyError("slab length does not match the partition")
        delta_cells = np.asarray(delta_cells, dtype=float)
        matrix = self.matrix(delta_cells)
        rhs_tensor = np.zeros((self.nc, self.p + 1) + self.node_shape)

        if source.func is not None:
            t_pts = t_lo + self.tdir.qx[0]
            pts = self.Xq.reshape(-1, self.mesh.dim)
            b = source.values(t_pts, pts).reshape(self.nc, self.tdir.n_quad,
                                                  self.mesh.n_cells, -1)
            wt = self.tdir.qw
            tv, tdv = self.tdir.val, self.tdir.der
            r1 = np.einsum("t,q,ctsq,at,uq->scau", wt, self.wQ, b, tv, self.Vx)
            r2 = np.einsum("t,q,ctsq,at,uq->scau", wt, self.wQ, b, tdv, self.Vx)
            for l in range(self.mesh.dim):
                bl = np.einsum("ec,etsq->ctsq", self.flux.mats[l], b)
                r2 += np.einsum("t,q,ctsq,at,uq->scau", wt, self.wQ, bl, tv, self.Dx[l])
            loads = r1 + delta_cells[:, None, None, None] * r2
            flat = rhs_tensor.reshape(self.nc, self.p + 1, -1)
            for c in range(self.nc):
                for a in range(self.p + 1):
                    np.add.at(flat[c, a], self.gather, loads[:, c, a])

        if callable(incoming):
            rhs_tensor[:, 0] += self.trace_load(incoming)
        else:
            inc = np.asarray(incoming, dtype=float)
            if inc.shape != (self.nc,) + self.node_shape:
                raise AssemblyError("incoming trace has the wrong shape")
            rhs_tensor[:, 0] += self.mass_apply(inc)

        return SparseSystem.from_csr(matrix, self.tensor_to_vector(rhs_tensor))

    def solve_slab(self, system: SparseSystem, m: int, incoming=None,
                   method: str = "direct", **kwargs) -> FieldState:
        vec = solve(system, method=method, **kwargs)
        inc = None if callable(incoming) or incoming is None else np.asarray(incoming)
        return FieldState(m=m, coeffs=self.vector_to_tensor(vec), incoming=inc)

    # -- evaluation --------------------------------------------------------

    def quad_values(self, state: FieldState, derivative: int = -1) -> np.ndarray:
        """Values (or one spatial derivative) on the slab quadrature grid.

        Returns (n_c, n_qt, n_cells, nQ); derivative=-1 for plain values,
        otherwise the index of the differentiated direction.
        """
        tab = self.Vx if derivative < 0 else self.Dx[derivative]
        flat = state.coeffs.reshape(self.nc, self.p + 1, -1)
        cloc = flat[:, :, self.gather]
        return np.einsum("casu,at,uq->ctsq", cloc, self.tdir.val, tab)

    def time_derivative_values(self, state: FieldState) -> np.ndarray:
        flat = state.coeffs.reshape(self.nc, self.p + 1, -1)
        cloc = flat[:, :, self.gather]
        return np.einsum("casu,at,uq->ctsq", cloc, self.tdir.der, self.Vx)

    def eval_point(self, state: FieldState, t_local: float, x) -> np.ndarray:
        """Field components at one point; t_local in [0, k] within the slab."""
        from .basis import ShapeSet

        x = np.atleast_1d(np.asarray(x, dtype=float))
        tv, _ = ShapeSet(self.p).eval([2.0 * t_local / self.k - 1.0])
        nodes, xval = None, None
        for l, (dd, xi) in enumerate(zip(self.dirs, x)):
            cell, val, _ = dd.interp_tables([xi])
            ids = dd.local_map[cell[0]]
            if nodes is None:
                nodes, xval = ids, val[:, 0]
            else:
                nodes = (nodes[:, None] * self.node_shape[l] + ids[None, :]).ravel()
                xval = np.outer(xval, val[:, 0]).ravel()
        flat = state.coeffs.reshape(self.nc, self.p + 1, -1)
        return np.einsum("cau,u,a->c", flat[:, :, nodes], xval, tv[:, 0])


def streaming_residual_sq(space: MaxwellSpace, state: FieldState,
                          delta_cells: np.ndarray) -> float:
    """Quadrature of delta_K |d_t W + sum M_l d_l W|^2 over one slab."""
    res = space.time_derivative_values(state)
    for l in range(space.mesh.dim):
        dv = space.quad_values(state, derivative=l)
        res = res + np.einsum("ce,etsq->ctsq", space.flux.mats[l], dv)
    per_cell = np.einsum("t,q,ctsq->s", space.tdir.qw, space.wQ, res**2)
    return float(np.dot(np.asarray(delta_cells, dtype=float), per_cell))


def triple_norm_maxwell(space: MaxwellSpace, states: list[FieldState],
                        partition: TimePartition, hp: HpAssignment) -> float:
    """Method norm: end traces, interface jumps and weighted streaming residuals."""
    if len(states) != partition.M:
        raise AssemblyError("need one state per slab")
    total = space.trace_inner(states[0].trace_in, states[0].trace_in)
    total += space.trace_inner(states[-1].trace_out, states[-1].trace_out)
    for m in range(1, partition.M):
        jump = states[m].trace_in - states[m - 1].trace_out
        total += space.trace_inner(jump, jump)
    for m, st in enumerate(states):
        total += 2.0 * streaming_residual_sq(space, st, hp.slab_delta(m))
    return float(np.sqrt(0.5 * total))


def bilinear_form_maxwell(space: MaxwellSpace, u_states: list[FieldState],
                          g_states: list[FieldState], partition: TimePartition,
                          hp: HpAssignment) -> float:
    """Global scheme bilinear form evaluated through the slab matrices."""
    total = 0.0
    for m, (us, gs) in enumerate(zip(u_states, g_states)):
        mat = space.matrix(hp.slab_delta(m))
        uv = space.tensor_to_vector(us.coeffs)
        gv = space.tensor_to_vector(gs.coeffs)
        total += float(gv @ (mat @ uv))
    for m in range(1, partition.M):
        total -= space.trace_inner(g_states[m].trace_in, u_states[m - 1].trace_out)
    return total


def march_maxwell(space: MaxwellSpace, partition: TimePartition, hp: HpAssignment,
                  source: SourceField, initial, method: str = "direct") -> list[FieldState]:
    """Solve slab by slab from a weakly imposed initial datum."""
    states: list[FieldState] = []
    incoming = initial
    for m in range(partition.M):
        t_lo, t_hi = partition.slab(m)
        system = space.assemble_slab(t_lo, t_hi, hp.slab_delta(m), source, incoming)
        st = space.solve_slab(system, m, incoming, method=method)
        states.append(st)
        incoming = st.trace_out
    return states


def standing_wave_solution():
    """Periodic 1D manufactured solution of the reduced system.

    (E2, B) form an exact standing wave; E1 oscillates against a matching
    current.  Returns (exact, source, initial) with the vectorized
    signatures the assembler expects.
    """
    tau = 2.0 * np.pi

    def exact(t_pts, x_pts):
        x = x_pts[:, 0]
        s, c = np.sin(tau * x), np.cos(tau * x)
        st, ct = np.sin(tau * t_pts), np.cos(tau * t_pts)
        e1 = 0.5 * s[None, :] * st[:, None]
        e2 = s[None, :] * ct[:, None]
        b = -c[None, :] * st[:, None]
        return np.stack([e1, e2, b])

    def source(t_pts, x_pts):
        x = x_pts[:, 0]
        b1 = np.pi * np.sin(tau * x)[None, :] * np.cos(tau * t_pts)[:, None]
        zero = np.zeros_like(b1)
        return np.stack([b1, zero, zero])

    def initial(pts):
        x = pts[:, 0]
        zero = np.zeros_like(x)
        return np.stack([zero, np.sin(tau * x), zero])

    return exact, source, initial


def l2q_error_maxwell(space: MaxwellSpace, states: list[FieldState],
                      partition: TimePartition, exact) -> float:
    """L2 error over the space-time cylinder against exact(t_pts, x_pts)."""
    total = 0.0
    pts = space.Xq.reshape(-1, space.mesh.dim)
    for m, st in enumerate(states):
        t_lo, _ = partition.slab(m)
        t_pts = t_lo + space.tdir.qx[0]
        ex = np.asarray(exact(t_pts, pts), dtype=float).reshape(
            space.nc, space.tdir.n_quad, space.mesh.n_cells, -1)
        diff = space.quad_values(st) - ex
        total += float(np.einsum("t,q,ctsq->", space.tdir.qw, space.wQ, diff**2))
    return float(np.sqrt(total))
