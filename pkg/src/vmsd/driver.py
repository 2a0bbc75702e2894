"""Coupled Vlasov-Maxwell driver: fixed-point slab solves and experiments.

The 1x2v system is solved on the normalized spatial domain x in [0, 1]
(x_phys = L * x with L = 2*pi/k0), which scales every spatial derivative
by 1/L; velocities stay physical.  Per slab, the field and density solves
are iterated: moments of the current density iterate feed the Maxwell
solve, whose fields freeze the transport of the next Vlasov solve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError
from .basis import ShapeSet
from .maxwell import FieldState, MaxwellSpace, SourceField, flux_matrices
from .mesh import (HpAssignment, HpRule, TensorMesh, TimePartition, assign_hp,
                   build_tensor_mesh, build_time_partition)
from .vlasov import DensityState, PhaseSpace, TransportField


@dataclass(frozen=True)
class WeibelCase:
    """Counter-streaming beam parameters of the magnetic instability runs."""

    mu: float
    v01: float
    v02: float
    k0: float
    beta: float = 0.01
    b_amp: float = 0.001

    @property
    def L(self) -> float:
        return 2.0 * np.pi / self.k0

    @classmethod
    def preset(cls, case: int) -> "WeibelCase":
        if case == 1:
            return cls(mu=0.5, v01=-0.3, v02=-0.3, k0=0.2)
        if case == 2:
            return cls(mu=1.0 / 6.0, v01=-0.5, v02=-0.1, k0=0.2)
        raise InvalidConfigError(f"unknown case {case}; expected 1 or 2")


def weibel_initial(case: WeibelCase, x: float, v) -> tuple[float, np.ndarray, float]:
    """Initial (f0, E0, B0) at a physical point (x, v1, v2).

    f0 is a product of a centered Gaussian in v1 with a two-beam profile
    in v2 (unit mass); the fields start at E = 0 and a seeded magnetic
    perturbation B0 = -b sin(k0 x).
    """
    v = np.asarray(v, dtype=float)
    beta = case.beta
    f0 = (1.0 / (np.pi * beta)) * np.exp(-v[0] ** 2 / beta) * (
        case.mu * np.exp(-((v[1] - case.v01) ** 2) / beta)
        + (1.0 - case.mu) * np.exp(-((v[1] + case.v02) ** 2) / beta)
    )
    b0 = -case.b_amp * np.sin(case.k0 * x)
    return float(f0), np.zeros(2), float(b0)


def weibel_density_callable(case: WeibelCase, reflect: bool = False):
    """Vectorized f0 on (n, 3) points (normalized x, v1, v2)."""
    sign = -1.0 if reflect else 1.0

    def f0(pts):
        v1 = sign * pts[:, 1]
        v2 = sign * pts[:, 2]
        beta = case.beta
        return (1.0 / (np.pi * beta)) * np.exp(-v1**2 / beta) * (
            case.mu * np.exp(-((v2 - case.v01) ** 2) / beta)
            + (1.0 - case.mu) * np.exp(-((v2 + case.v02) ** 2) / beta))

    return f0


def weibel_field_callable(case: WeibelCase):
    """Vectorized (E1, E2, B) initial data on (n, 1) normalized-x points."""

    def w0(pts):
        x = pts[:, 0]
        zero = np.zeros_like(x)
        return np.stack([zero, zero, -case.b_amp * np.sin(2.0 * np.pi * x)])

    return w0


@dataclass
class VMSetup:
    """Everything a coupled run needs: spaces, partitions and options."""

    case: WeibelCase
    partition: TimePartition
    maxwell_space: MaxwellSpace
    phase_space: PhaseSpace
    hp_maxwell: HpAssignment
    hp_vlasov: HpAssignment
    x_scale: float
    solver_method: str = "auto"
    fp_max_iters: int = 5
    fp_tol: float = 1e-8
    direct_limit: int = 40000

    @property
    def x_measure(self) -> float:
        d = self.phase_space.xdir
        return d.hi - d.lo


def build_setup(case: WeibelCase, nx: int, nv: int, v_bound: float, T: float, M: int,
                p: int, rule: HpRule, solver_method: str = "auto", fp_max_iters: int = 5,
                fp_tol: float = 1e-8, direct_limit: int = 40000) -> VMSetup:
    """Assemble the normalized-domain discretization for a coupled run."""
    mesh_x = build_tensor_mesh([(0.0, 1.0)], [nx], [True])
    mesh_v = build_tensor_mesh([(-v_bound, v_bound)] * 2, [nv, nv])
    mesh_phase = build_tensor_mesh([(0.0, 1.0), (-v_bound, v_bound), (-v_bound, v_bound)],
                                   [nx, nv, nv], [True, False, False])
    partition = build_time_partition(T, M)
    hp_m = assign_hp(mesh_x, partition, rule)
    hp_v = assign_hp(mesh_phase, partition, rule)
    x_scale = 1.0 / case.L
    flux = flux_matrices("reduced1half").scaled(x_scale)
    maxwell_space = MaxwellSpace(mesh_x, p, flux, partition.k)
    phase_space = PhaseSpace(mesh_x, mesh_v, p, partition.k)
    return VMSetup(case=case, partition=partition, maxwell_space=maxwell_space,
                   phase_space=phase_space, hp_maxwell=hp_m, hp_vlasov=hp_v,
                   x_scale=x_scale, solver_method=solver_method,
                   fp_max_iters=fp_max_iters, fp_tol=fp_tol, direct_limit=direct_limit)


def energies(setup: VMSetup, field_trace: np.ndarray, density_trace: np.ndarray):
    """(E1, E2, B, K1, K2) energies of one time-level snapshot."""
    ps, ms = setup.phase_space, setup.maxwell_space
    gm = ms.dirs[0].mass_global()
    scale = 1.0 / (2.0 * setup.x_measure)
    e1, e2, bb = (scale * float(field_trace[c] @ (gm @ field_trace[c])) for c in range(3))
    wx = ps.xdir.node_weights(0)
    k1w = ps.pair_weights(lambda a, b: a**2 + 0.0 * b, "v1sq")
    k2w = ps.pair_weights(lambda a, b: b**2 + 0.0 * a, "v2sq")
    k1 = scale * float(np.einsum("ijk,i,jk->", density_trace, wx, k1w))
    k2 = scale * float(np.einsum("ijk,i,jk->", density_trace, wx, k2w))
    return e1, e2, bb, k1, k2


def density_mass(setup: VMSetup, density_trace: np.ndarray) -> float:
    """Integral of the density over phase space at one time level."""
    ps = setup.phase_space
    wx = ps.xdir.node_weights(0)
    w0 = ps.pair_weights(lambda a, b: 1.0 + 0.0 * a + 0.0 * b, "unit")
    return float(np.einsum("ijk,i,jk->", density_trace, wx, w0))


def _moment_source(setup: VMSetup, f_state: DensityState, t_lo: float) -> SourceField:
    """Maxwell right-hand side (-j1, -j2, 0) from the density iterate."""
    ps = setup.phase_space
    rep1 = ps.moment_rep(f_state, ps.pair_weights(lambda a, b: a + 0.0 * b, "j1"))
    rep2 = ps.moment_rep(f_state, ps.pair_weights(lambda a, b: b + 0.0 * a, "j2"))
    p, k = ps.p, ps.k

    def func(t_pts, x_pts):
        tv, _ = ShapeSet(p).eval(2.0 * (t_pts - t_lo) / k - 1.0)
        cells, xv, _ = ps.xdir.interp_tables(x_pts[:, 0])
        nodes = ps.xdir.local_map[cells]           # (npts, p+1)
        r1 = rep1[:, nodes]                        # (p+1, npts, p+1)
        r2 = rep2[:, nodes]
        j1 = np.einsum("at,anb,bn->tn", tv, r1, xv)
        j2 = np.einsum("at,anb,bn->tn", tv, r2, xv)
        return np.stack([-j1, -j2, np.zeros_like(j1)])

    return SourceField(3, func)


def fixed_point_slab(setup: VMSetup, m: int, f_guess_trace: np.ndarray, f_incoming,
                     w_incoming) -> tuple[FieldState, DensityState, list[float]]:
    """Iterate moment -> field solve -> transport -> density solve on slab m.

    Stops when the relative slab-L2 change of the density iterate drops
    below the tolerance or the iteration budget runs out (with a warning).
    """
    ps, ms = setup.phase_space, setup.maxwell_space
    t_lo, t_hi = setup.partition.slab(m)
    f_cur = np.repeat(f_guess_trace[None], ps.p + 1, axis=0)
    resids: list[float] = []
    w_state = None
    f_state = DensityState(m, f_cur)
    for _ in range(setup.fp_max_iters):
        source = _moment_source(setup, f_state, t_lo)
        sys_w = ms.assemble_slab(t_lo, t_hi, setup.hp_maxwell.slab_delta(m), source, w_incoming)
        w_state = ms.solve_slab(sys_w, m, w_incoming, method="direct")
        transport = TransportField(maxwell_space=ms, field_state=w_state, t_lo=t_lo,
                                   x_scale=setup.x_scale)
        sys_f = ps.assemble_slab(t_lo, t_hi, setup.hp_vlasov.slab_delta(m), transport,
                                 f_incoming)
        f_new = ps.solve_slab(sys_f, m, x0=ps.tensor_to_vector(f_cur),
                              method=setup.solver_method, direct_limit=setup.direct_limit)
        num = np.sqrt(ps.slab_norm_sq(f_new.coeffs - f_cur))
        den = np.sqrt(ps.slab_norm_sq(f_new.coeffs))
        rel = num / max(den, 1e-300)
        resids.append(float(rel))
        f_cur = f_new.coeffs
        f_state = f_new
        if rel <= setup.fp_tol:
            break
    else:
        warnings.warn(f"fixed-point iteration on slab {m} stopped at "
                      f"{setup.fp_max_iters} sweeps with residual {resids[-1]:.3e}")
    return w_state, f_state, resids


@dataclass
class Trajectory:
    """Slab-end diagnostics and final coefficient snapshots of one run."""

    times: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    b: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    mass: np.ndarray
    iters: np.ndarray
    residual: np.ndarray
    final_field_trace: np.ndarray = field(default=None, repr=False)
    final_density_trace: np.ndarray = field(default=None, repr=False)
    snapshots: list = field(default_factory=list, repr=False)

    def total_energy(self) -> np.ndarray:
        return self.e1 + self.e2 + self.b + self.k1 + self.k2

    def rows(self):
        for i, t in enumerate(self.times):
            yield (t, self.e1[i], self.e2[i], self.b[i], self.k1[i], self.k2[i],
                   self.mass[i], int(self.iters[i]), self.residual[i])


def march(setup: VMSetup, f_init, w_init, snapshot_times=()) -> Trajectory:
    """Run the coupled solve over every slab, sampling diagnostics at slab ends.

    f_init / w_init are exact-data callables (first run) or trace
    coefficient arrays (restarted or reversed runs).
    """
    ps, ms = setup.phase_space, setup.maxwell_space
    M = setup.partition.M
    f_trace = ps.project_trace(f_init) if callable(f_init) else np.asarray(f_init, dtype=float)
    w_trace = ms.project_trace(w_init) if callable(w_init) else np.asarray(w_init, dtype=float)

    n = M + 1
    cols = {name: np.zeros(n) for name in ("e1", "e2", "b", "k1", "k2", "mass", "residual")}
    iters = np.zeros(n, dtype=int)
    times = setup.partition.knots.copy()
    cols["e1"][0], cols["e2"][0], cols["b"][0], cols["k1"][0], cols["k2"][0] = energies(
        setup, w_trace, f_trace)
    cols["mass"][0] = density_mass(setup, f_trace)

    snapshot_times = sorted(snapshot_times)
    snapshots = []
    want = {int(round(t / setup.partition.k)) for t in snapshot_times}

    f_incoming = f_init if callable(f_init) else f_trace
    w_incoming = w_init if callable(w_init) else w_trace
    for m in range(M):
        w_state, f_state, resids = fixed_point_slab(setup, m, f_trace, f_incoming, w_incoming)
        f_trace = f_state.trace_out
        w_trace = w_state.trace_out
        f_incoming, w_incoming = f_trace, w_trace
        i = m + 1
        cols["e1"][i], cols["e2"][i], cols["b"][i], cols["k1"][i], cols["k2"][i] = energies(
            setup, w_trace, f_trace)
        cols["mass"][i] = density_mass(setup, f_trace)
        iters[i] = len(resids)
        cols["residual"][i] = resids[-1]
        if i in want:
            snapshots.append((float(times[i]), w_trace.copy(), f_trace.copy()))

    return Trajectory(times=times, e1=cols["e1"], e2=cols["e2"], b=cols["b"],
                      k1=cols["k1"], k2=cols["k2"], mass=cols["mass"], iters=iters,
                      residual=cols["residual"], final_field_trace=w_trace,
                      final_density_trace=f_trace, snapshots=snapshots)


def reversibility_test(setup: VMSetup) -> dict[tuple[str, str], float]:
    """Forward run, velocity reflection with B sign flip, second run.

    Returns L1/L2 errors of the recovered state against the reflected
    initial data, keyed by (unknown, norm).
    """
    ps, ms = setup.phase_space, setup.maxwell_space
    case = setup.case
    traj1 = march(setup, weibel_density_callable(case), weibel_field_callable(case))
    f_rev = ps.reflect_trace(traj1.final_density_trace)
    w_rev = traj1.final_field_trace.copy()
    w_rev[2] *= -1.0
    traj2 = march(setup, f_rev, w_rev)

    f_ref = weibel_density_callable(case, reflect=True)
    w0 = weibel_field_callable(case)

    def w_ref(pts):
        out = w0(pts)
        out[2] *= -1.0
        return out

    f_l1, f_l2 = ps.trace_error(traj2.final_density_trace, f_ref)
    field_errs = ms.trace_error(traj2.final_field_trace, w_ref)
    out = {("f", "L1"): f_l1, ("f", "L2"): f_l2}
    for c, name in enumerate(("E1", "E2", "B")):
        out[(name, "L1")] = field_errs[0][c]
        out[(name, "L2")] = field_errs[1][c]
    return out
