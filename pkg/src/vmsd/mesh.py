"""Time partitions, tensor-product meshes and per-cell hp/stabilization data."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError


@dataclass(frozen=True)
class TimePartition:
    """Uniform partition of [0, T] into M slabs."""

    T: float
    M: int
    knots: np.ndarray
    k: float

    def slab(self, m: int) -> tuple[float, float]:
        return float(self.knots[m]), float(self.knots[m + 1])


def build_time_partition(T: float, M: int) -> TimePartition:
    if T <= 0:
        raise InvalidConfigError(f"final time must be positive, got T={T}")
    if M < 1:
        raise InvalidConfigError(f"slab count must be at least 1, got M={M}")
    knots = np.linspace(0.0, T, M + 1)
    return TimePartition(T=float(T), M=int(M), knots=knots, k=float(T) / M)


@dataclass(frozen=True)
class TensorMesh:
    """Uniform tensor-product mesh of a d-dimensional box.

    Cells are enumerated in C order over the per-dimension cell counts;
    periodic dimensions identify their end faces for neighbor lookup.
    """

    bounds: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]
    periodic: tuple[bool, ...]

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def widths(self) -> np.ndarray:
        return np.array([(hi - lo) / n for (lo, hi), n in zip(self.bounds, self.cells)])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def cell_diameter(self) -> float:
        """Euclidean diameter of one (uniform) cell."""
        return float(np.sqrt(np.sum(self.widths**2)))

    def cell_bounds(self, index) -> list[tuple[float, float]]:
        """Per-dimension interval of the cell with the given multi-index."""
        out = []
        for d, i in enumerate(np.atleast_1d(index)):
            lo = self.bounds[d][0] + i * self.widths[d]
            out.append((lo, lo + self.widths[d]))
        return out

    def neighbor(self, index, dim: int, side: int):
        """Multi-index of the face neighbor (side is -1 or +1), or None.

        A periodic dimension wraps; a non-periodic boundary face has no
        neighbor.
        """
        idx = list(np.atleast_1d(index))
        idx[dim] += side
        n = self.cells[dim]
        if self.periodic[dim]:
            idx[dim] %= n
        elif not 0 <= idx[dim] < n:
            return None
        return tuple(idx)

    def centers(self, dim: int) -> np.ndarray:
        lo = self.bounds[dim][0]
        w = self.widths[dim]
        return lo + w * (np.arange(self.cells[dim]) + 0.5)


def build_tensor_mesh(bounds, cells, periodic=None) -> TensorMesh:
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    cells = tuple(int(n) for n in cells)
    if periodic is None:
        periodic = (False,) * len(bounds)
    periodic = tuple(bool(b) for b in periodic)
    if not len(bounds) == len(cells) == len(periodic):
        raise InvalidConfigError("bounds, cells and periodic flags must agree in length")
    for (lo, hi), n in zip(bounds, cells):
        if hi <= lo:
            raise InvalidConfigError(f"empty interval [{lo}, {hi}]")
        if n < 1:
            raise InvalidConfigError(f"cell count must be at least 1, got {n}")
    return TensorMesh(bounds=bounds, cells=cells, periodic=periodic)


@dataclass(frozen=True)
class HpRule:
    """Selection of per-cell degree and stabilization weight.

    kind "uniform": every cell gets (p, delta).  kind "theory": every cell
    gets delta = c1 * h_K / p_K, and cells violating p_K * h_K <= c2 are
    reported (never rejected) when c2 > 0.
    """

    kind: str
    p: int
    delta: float = 0.0
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "theory"):
            raise InvalidConfigError(f"unknown hp rule kind {self.kind!r}")
        if self.p < 1:
            raise InvalidConfigError(f"degree must be at least 1, got p={self.p}")
        if self.kind == "uniform" and self.delta < 0:
            raise InvalidConfigError(f"stabilization weight must be nonnegative, got {self.delta}")
        if self.kind == "theory" and self.c1 <= 0:
            raise InvalidConfigError(f"theory rule needs c1 > 0, got {self.c1}")


@dataclass(frozen=True)
class HpAssignment:
    """Per space-time cell degree, diameter and stabilization weight.

    Arrays are indexed (slab, flat spatial cell).  Assemblers in this
    package require a single degree across cells (uniform tensor meshes);
    the per-cell storage keeps the general bookkeeping testable.
    """

    p: np.ndarray
    h: np.ndarray
    delta: np.ndarray
    violations: tuple[tuple[int, int], ...] = field(default=())

    def uniform_degree(self) -> int:
        p0 = int(self.p.flat[0])
        if not np.all(self.p == p0):
            raise InvalidConfigError("assemblers require a uniform polynomial degree")
        return p0

    def slab_delta(self, m: int) -> np.ndarray:
        return self.delta[m]


def assign_hp(mesh: TensorMesh, time_partition: TimePartition, rule: HpRule) -> HpAssignment:
    """Assign (p_K, h_K, delta_K) to every slab x cell of the mesh.

    h_K is the Euclidean diameter of the spatial/velocity footprint of the
    cell; the slab length enters the scheme separately.
    """
    shape = (time_partition.M, mesh.n_cells)
    h = np.full(shape, mesh.cell_diameter)
    p = np.full(shape, rule.p, dtype=int)
    if rule.kind == "uniform":
        delta = np.full(shape, rule.delta)
    else:
        delta = rule.c1 * h / p
    violations: list[tuple[int, int]] = []
    if rule.kind == "theory" and rule.c2 > 0:
        bad = np.argwhere(p * h > rule.c2)
        violations = [(int(m), int(c)) for m, c in bad]
        if violations:
            warnings.warn(
                f"{len(violations)} cells violate the admissibility bound "
                f"p_K*h_K <= {rule.c2} (max product {float(np.max(p * h)):.3g})",
                stacklevel=2,
            )
    return HpAssignment(p=p, h=h, delta=delta, violations=tuple(violations))
