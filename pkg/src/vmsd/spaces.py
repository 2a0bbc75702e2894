"""Per-direction machinery for tensor-product CG spaces on uniform grids.

A Direction bundles one coordinate axis: its cells, nodal Lagrange basis,
quadrature tables, local-to-global node maps and the 1D elementary
matrices the space-time assemblers combine into Kronecker products.
Boundary conditions are per direction: 'none', 'periodic' or 'dirichlet'
(homogeneous, endpoints constrained).
"""

from __future__ import annotations

import numpy as np

from .basis import shape_tables
from .errors import InvalidConfigError

BCS = ("none", "periodic", "dirichlet")


class Direction:
    def __init__(self, lo: float, hi: float, n_cells: int, p: int, bc: str = "none",
                 n_quad: int | None = None):
        if bc not in BCS:
            raise InvalidConfigError(f"unknown boundary condition {bc!r}")
        if hi <= lo:
            raise InvalidConfigError(f"empty interval [{lo}, {hi}]")
        self.lo, self.hi = float(lo), float(hi)
        self.n_cells = int(n_cells)
        self.p = int(p)
        self.bc = bc
        self.n_quad = int(n_quad) if n_quad else self.p + 2

        val, der, qn, qw = shape_tables(self.p, self.n_quad)
        self.h = (self.hi - self.lo) / self.n_cells
        self.val = val                      # (p+1, nq) reference values
        self.der = der * (2.0 / self.h)     # physical derivatives
        self.qw = qw * (self.h / 2.0)       # physical weights per cell
        # physical quadrature coordinates, shape (n_cells, nq)
        left = self.lo + self.h * np.arange(self.n_cells)
        self.qx = left[:, None] + (qn[None, :] + 1.0) * (self.h / 2.0)

        # node bookkeeping: cells share endpoint nodes; periodic wraps
        n_open = self.n_cells * self.p + 1
        self.n_nodes = n_open - 1 if bc == "periodic" else n_open
        base = self.p * np.arange(self.n_cells)[:, None] + np.arange(self.p + 1)[None, :]
        self.local_map = base % self.n_nodes if bc == "periodic" else base
        from .basis import lobatto_nodes

        ref = lobatto_nodes(self.p)
        coords = np.empty(n_open)
        coords[base[:, :-1].ravel()] = (
            left[:, None] + (ref[None, :-1] + 1.0) * (self.h / 2.0)
        ).ravel()
        coords[-1] = self.hi
        self.node_coords = coords[: self.n_nodes]

        self.free = np.ones(self.n_nodes, dtype=bool)
        if bc == "dirichlet":
            self.free[0] = False
            self.free[-1] = False
        self.n_free = int(np.count_nonzero(self.free))
        self.node_to_free = np.full(self.n_nodes, -1, dtype=int)
        self.node_to_free[self.free] = np.arange(self.n_free)

        # elementary matrices on one cell (identical across a uniform grid)
        self.mass = np.einsum("q,aq,bq->ab", self.qw, val, val)
        self.conv = np.einsum("q,aq,bq->ab", self.qw, val, self.der)   # test value, trial derivative
        self.stiff = np.einsum("q,aq,bq->ab", self.qw, self.der, self.der)

    def weighted(self, power: int, test_der: bool, trial_der: bool) -> np.ndarray:
        """Per-cell matrices with coordinate-power weight, shape (n_cells, p+1, p+1)."""
        ta = self.der if test_der else self.val
        tb = self.der if trial_der else self.val
        w = self.qw[None, :] * self.qx**power
        return np.einsum("cq,aq,bq->cab", w, ta, tb)

    def node_weights(self, power: int) -> np.ndarray:
        """Integral of coordinate^power against each global nodal basis function."""
        per_cell = np.einsum("cq,aq->ca", self.qw[None, :] * self.qx**power, self.val)
        out = np.zeros(self.n_nodes)
        np.add.at(out, self.local_map, per_cell)
        return out

    def mass_global(self) -> np.ndarray:
        """Dense Gram matrix of the global nodal basis (all nodes)."""
        out = np.zeros((self.n_nodes, self.n_nodes))
        rows = np.repeat(self.local_map, self.p + 1, axis=1)
        cols = np.tile(self.local_map, (1, self.p + 1))
        np.add.at(out, (rows.ravel(), cols.ravel()),
                  np.broadcast_to(self.mass.ravel(), (self.n_cells, (self.p + 1) ** 2)).ravel())
        return out

    def interp_tables(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Locate points and tabulate basis values/derivatives there.

        Returns (cell indices, values (p+1, n), derivatives (p+1, n)); used
        for pointwise evaluation of discrete fields.
        """
        from .basis import ShapeSet

        x = np.atleast_1d(np.asarray(points, dtype=float))
        cells = np.clip(((x - self.lo) / self.h).astype(int), 0, self.n_cells - 1)
        xi = 2.0 * (x - (self.lo + cells * self.h)) / self.h - 1.0
        val, der = ShapeSet(self.p).eval(xi)
        return cells, val, der * (2.0 / self.h)


def grid_norm_sq(coeffs: np.ndarray, masses: list[np.ndarray]) -> float:
    """L2 norm squared of a tensor coefficient array against per-axis Grams."""
    out = coeffs
    for ax, mat in enumerate(masses):
        out = np.tensordot(mat, out, axes=(1, ax))
        out = np.moveaxis(out, 0, ax)
    return float(np.sum(coeffs * out))


def time_direction(t0: float, t1: float, p: int, n_quad: int | None = None) -> Direction:
    """Degree-p basis on one time slab (single cell, ends included)."""
    return Direction(t0, t1, 1, p, bc="none", n_quad=n_quad)
