"""Gauss-Legendre quadrature and nodal Lagrange bases on reference cells.

All one-dimensional objects live on the reference interval [-1, 1] and are
tensorized per direction by the assemblers.  Bases are nodal Lagrange
polynomials on Gauss-Lobatto points so that traces at cell ends and slab
interfaces are read straight off the coefficient arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, InvalidConfigError

MAX_DEGREE = 4

# Gauss-Lobatto point sets per supported degree.
_LOBATTO = {
    1: np.array([-1.0, 1.0]),
    2: np.array([-1.0, 0.0, 1.0]),
    3: np.array([-1.0, -np.sqrt(1.0 / 5.0), np.sqrt(1.0 / 5.0), 1.0]),
    4: np.array([-1.0, -np.sqrt(3.0 / 7.0), 0.0, np.sqrt(3.0 / 7.0), 1.0]),
}


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)

    def mapped(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights transported to the interval [lo, hi]."""
        half = 0.5 * (hi - lo)
        return lo + half * (self.nodes + 1.0), half * self.weights


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1."""
    if n < 1:
        raise InvalidConfigError(f"quadrature rule needs at least one node, got n={n}")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(nodes, weights)


def lobatto_nodes(p: int) -> np.ndarray:
    if not 1 <= p <= MAX_DEGREE:
        raise InvalidConfigError(f"polynomial degree must be in 1..{MAX_DEGREE}, got {p}")
    return _LOBATTO[p].copy()


class ShapeSet:
    """Nodal Lagrange basis of degree p on Gauss-Lobatto points of [-1, 1].

    Provides value and first-derivative tables at arbitrary points; the
    basis satisfies the Kronecker property at its own nodes and partition
    of unity everywhere.
    """

    def __init__(self, p: int):
        self.p = p
        self.nodes = lobatto_nodes(p)
        self.n = p + 1

    def eval(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Tables (values, derivatives), each of shape (p+1, len(points))."""
        x = np.atleast_1d(np.asarray(points, dtype=float))
        nds = self.nodes
        values = np.ones((self.n, x.size))
        derivs = np.zeros((self.n, x.size))
        for i in range(self.n):
            for j in range(self.n):
                if j != i:
                    values[i] *= (x - nds[j]) / (nds[i] - nds[j])
            for k in range(self.n):
                if k == i:
                    continue
                term = np.full(x.size, 1.0 / (nds[i] - nds[k]))
                for j in range(self.n):
                    if j != i and j != k:
                        term *= (x - nds[j]) / (nds[i] - nds[j])
                derivs[i] += term
        return values, derivs


@lru_cache(maxsize=None)
def shape_tables(p: int, n_quad: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Basis values/derivatives at the n_quad Gauss points, plus the rule.

    Returns (values, derivatives, quad nodes, quad weights); tables have
    shape (p+1, n_quad) on the reference interval.
    """
    rule = gauss_rule(n_quad)
    val, der = ShapeSet(p).eval(rule.nodes)
    return val, der, rule.nodes, rule.weights


def tensor_eval(bounds, degrees, index, point) -> tuple[float, np.ndarray]:
    """Evaluate one tensor-product basis function on a physical cell.

    bounds: sequence of (lo, hi) per direction; degrees: per-direction
    polynomial degree; index: per-direction node index of the basis
    function; point: physical coordinates inside the cell.  Returns the
    value and the gradient in physical coordinates (chain rule with the
    per-direction affine maps).
    """
    bounds = [tuple(b) for b in bounds]
    point = np.atleast_1d(np.asarray(point, dtype=float))
    dim = len(bounds)
    if not (len(degrees) == len(index) == point.size == dim):
        raise InvalidConfigError("bounds, degrees, index and point must agree in length")
    vals = np.empty(dim)
    ders = np.empty(dim)
    for d, ((lo, hi), p, i) in enumerate(zip(bounds, degrees, index)):
        if not lo <= point[d] <= hi:
            raise DomainError(f"coordinate {point[d]} outside [{lo}, {hi}] in direction {d}")
        xi = 2.0 * (point[d] - lo) / (hi - lo) - 1.0
        v, dv = ShapeSet(p).eval([xi])
        vals[d] = v[i, 0]
        ders[d] = dv[i, 0] * 2.0 / (hi - lo)
    value = float(np.prod(vals))
    grad = np.empty(dim)
    for d in range(dim):
        grad[d] = ders[d] * np.prod(np.delete(vals, d))
    return value, grad
