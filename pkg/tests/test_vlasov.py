import numpy as np
import pytest

from vmsd.errors import AssemblyError, InvalidConfigError
from vmsd.maxwell import FieldState, MaxwellSpace, flux_matrices
from vmsd.mesh import HpRule, assign_hp, build_tensor_mesh, build_time_partition
from vmsd.vlasov import (DensityState, PhaseSpace, TransportField, bilinear_form_vlasov,
                         phase_divergence, transport_eval, triple_norm_vlasov, vhat)


def test_vhat_zero():
    assert np.allclose(vhat([0.0, 0.0], True), 0.0)
    assert np.allclose(vhat([0.0, 0.0], False), 0.0)


def test_vhat_unit_vector_relativistic():
    assert np.allclose(vhat([1.0, 0.0, 0.0], True), [1 / np.sqrt(2), 0, 0])


def test_vhat_subluminal():
    rng = np.random.default_rng(0)
    v = rng.uniform(-1e6, 1e6, size=(200, 3))
    speeds = np.linalg.norm(vhat(v, True), axis=-1)
    assert np.all(speeds < 1.0)


def test_vhat_nonrelativistic_identity():
    v = np.array([3.0, -4.0])
    assert np.array_equal(vhat(v, False), v)


def test_transport_eval_free_streaming():
    tf = TransportField()
    g = transport_eval(tf, 0.0, [0.2], [0.5, -0.25])
    assert np.allclose(g, [0.5, 0.0, 0.0])


def test_transport_eval_forces():
    tf = TransportField(e_func=lambda t, x: np.array([1.0, 0.0]), b_func=lambda t, x: 2.0)
    g = transport_eval(tf, 0.0, [0.3], [0.5, -0.5])
    assert np.allclose(g, [0.5, 1.0 + (-0.5) * 2.0, 0.0 - 0.5 * 2.0])


def test_transport_eval_3d_relativistic():
    tf = TransportField(relativistic=True,
                        e_func=lambda t, x: np.zeros(3),
                        b_func=lambda t, x: np.array([0.0, 0.0, 1.0]))
    g = transport_eval(tf, 0.0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    assert np.allclose(g[3:], [0.0, -1 / np.sqrt(2), 0.0])


@pytest.mark.parametrize("relativistic", [False, True])
def test_divergence_exactly_zero_2d(relativistic):
    rng = np.random.default_rng(5)
    for _ in range(200):
        v = rng.uniform(-3, 3, size=2)
        b = rng.standard_normal()
        assert phase_divergence(v, b, relativistic) == 0.0


@pytest.mark.parametrize("relativistic", [False, True])
def test_divergence_exactly_zero_3d(relativistic):
    rng = np.random.default_rng(6)
    for _ in range(200):
        v = rng.uniform(-5, 5, size=3)
        b = rng.standard_normal(3)
        assert phase_divergence(v, b, relativistic) == 0.0


def make_phase(nx=4, nv=4, p=1, m_slabs=2, t_final=0.5, delta=0.04):
    mesh_x = build_tensor_mesh([(0.0, 1.0)], [nx], [True])
    mesh_v = build_tensor_mesh([(-1.0, 1.0)] * 2, [nv, nv])
    mesh_phase = build_tensor_mesh([(0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
                                   [nx, nv, nv], [True, False, False])
    part = build_time_partition(t_final, m_slabs)
    hp = assign_hp(mesh_phase, part, HpRule("uniform", p=p, delta=delta))
    ps = PhaseSpace(mesh_x, mesh_v, p, part.k)
    ms = MaxwellSpace(mesh_x, p, flux_matrices("reduced1half"), part.k)
    return ps, ms, part, hp


def random_density(ps, rng, m=0):
    g = rng.standard_normal((ps.p + 1,) + ps.node_shape)
    g[:, :, ~ps.v1dir.free, :] = 0.0
    g[:, :, :, ~ps.v2dir.free] = 0.0
    return DensityState(m, g)


def zero_transport(ms, t_lo=0.0):
    zero = FieldState(0, np.zeros((3, ms.p + 1, ms.node_shape[0])))
    return TransportField(maxwell_space=ms, field_state=zero, t_lo=t_lo)


def test_zero_density_stays_zero():
    ps, ms, part, hp = make_phase()
    inc = lambda pts: np.zeros(pts.shape[0])
    st = None
    for m in range(part.M):
        sys = ps.assemble_slab(*part.slab(m), hp.slab_delta(m), zero_transport(ms), inc)
        st = ps.solve_slab(sys, m)
        inc = st.trace_out
    assert np.max(np.abs(st.coeffs)) < 1e-14


def test_x_independent_profile_is_steady():
    # with no fields, an x-independent density is constant in time
    ps, ms, part, hp = make_phase(nx=5, nv=5, m_slabs=3)

    def f0(pts):
        return (1 - pts[:, 1] ** 2) ** 2 * (1 - pts[:, 2] ** 2) ** 2

    inc = f0
    proj = ps.project_trace(f0)
    for m in range(part.M):
        sys = ps.assemble_slab(*part.slab(m), hp.slab_delta(m), zero_transport(ms), inc)
        st = ps.solve_slab(sys, m)
        inc = st.trace_out
    assert np.max(np.abs(st.trace_out - proj)) < 1e-8


def test_free_streaming_matches_characteristics():
    T = 0.5

    def bump(v1, v2):
        return (1 - v1**2) ** 2 * (1 - v2**2) ** 2

    def f0(pts):
        return np.sin(2 * np.pi * pts[:, 0]) * bump(pts[:, 1], pts[:, 2])

    errs = []
    for n in (4, 8):
        ps, ms, part, hp = make_phase(nx=n, nv=n, m_slabs=n, t_final=T, delta=0.05)
        inc = f0
        for m in range(part.M):
            sys = ps.assemble_slab(*part.slab(m), hp.slab_delta(m), zero_transport(ms), inc)
            st = ps.solve_slab(sys, m)
            inc = st.trace_out

        def f_exact(pts):
            x = (pts[:, 0] - pts[:, 1] * T) % 1.0
            return np.sin(2 * np.pi * x) * bump(pts[:, 1], pts[:, 2])

        errs.append(ps.trace_error(st.trace_out, f_exact)[1])
    assert errs[0] / errs[1] >= 2**1.5 * 0.8


@pytest.mark.parametrize("p", [1, 2])
def test_v_coercivity_identity(p):
    ps, ms, part, hp = make_phase(nv=4, p=p)
    rng = np.random.default_rng(10 + p)
    for _ in range(3):
        states, transports = [], []
        for m in range(part.M):
            states.append(random_density(ps, rng, m))
            w = FieldState(m, rng.standard_normal((3, p + 1, ms.node_shape[0])))
            transports.append(TransportField(maxwell_space=ms, field_state=w,
                                             t_lo=part.knots[m]))
        form = bilinear_form_vlasov(ps, states, states, transports, part, hp)
        norm = triple_norm_vlasov(ps, states, transports, part, hp)
        assert abs(form - norm**2) <= 1e-10 * norm**2


def test_triple_norm_of_constant_without_boundary():
    # interior-supported constants see only the end traces
    ps, ms, part, hp = make_phase(nx=3, nv=6, m_slabs=2, delta=0.0)
    coeffs = np.ones((2,) + ps.node_shape)
    coeffs[:, :, ~ps.v1dir.free, :] = 0.0
    coeffs[:, :, :, ~ps.v2dir.free] = 0.0
    states = [DensityState(m, coeffs.copy()) for m in range(part.M)]
    transports = [zero_transport(ms, part.knots[m]) for m in range(part.M)]
    norm = triple_norm_vlasov(ps, states, transports, part, hp)
    # value equals the L2 norm of the (interior-hat) trace function
    ref = np.sqrt(ps.trace_inner(states[0].trace_in, states[0].trace_in))
    assert abs(norm - ref) < 1e-12 * max(1.0, ref)


def test_current_density_zero_for_zero_density():
    ps, ms, part, hp = make_phase()
    st = DensityState(0, np.zeros((2,) + ps.node_shape))
    assert np.allclose(ps.current_density(st, 0.1, 0.5), 0.0)


def test_current_density_even_profile_vanishes():
    ps, ms, part, hp = make_phase(nv=8)

    def f0(pts):
        return np.exp(-8 * (pts[:, 1] ** 2 + pts[:, 2] ** 2)) * (1 + 0.3 * np.sin(2 * np.pi * pts[:, 0]))

    trace = ps.project_trace(f0)
    st = DensityState(0, np.repeat(trace[None], ps.p + 1, axis=0))
    j = ps.current_density(st, 0.0, 0.37)
    assert np.max(np.abs(j)) < 1e-12


def test_current_density_weibel_cases():
    # the two-beam means cancel for both parameter sets
    from vmsd.driver import WeibelCase, weibel_density_callable

    for case_id in (1, 2):
        case = WeibelCase.preset(case_id)
        mesh_x = build_tensor_mesh([(0.0, 1.0)], [3], [True])
        mesh_v = build_tensor_mesh([(-1.1, 1.1)] * 2, [48, 48])
        ps = PhaseSpace(mesh_x, mesh_v, 1, 0.1)
        trace = ps.project_trace(weibel_density_callable(case))
        st = DensityState(0, np.repeat(trace[None], 2, axis=0))
        j = ps.current_density(st, 0.05, 0.4)
        assert np.max(np.abs(j)) < 1e-10


def test_pair_weights_against_scipy_oracle():
    from scipy.integrate import dblquad

    ps, ms, part, hp = make_phase(nx=2, nv=2, p=2)
    w = ps.pair_weights(lambda a, b: a * b**2)
    # compare one interior pair against adaptive quadrature
    j, k = 1, 2

    def shape_1d(dd, idx, coord):
        total = 0.0
        for cell in range(dd.n_cells):
            lo = dd.lo + cell * dd.h
            if lo <= coord <= lo + dd.h:
                locs = np.flatnonzero(dd.local_map[cell] == idx)
                if locs.size:
                    from vmsd.basis import ShapeSet

                    xi = 2 * (coord - lo) / dd.h - 1
                    val, _ = ShapeSet(dd.p).eval([xi])
                    total = val[locs[0], 0]
        return total

    val, err = dblquad(
        lambda b, a: a * b**2 * shape_1d(ps.v1dir, j, a) * shape_1d(ps.v2dir, k, b),
        -1.0, 1.0, -1.0, 1.0, epsabs=1e-12)
    assert abs(w[j, k] - val) < 1e-9


def test_mass_drift_small_on_weibel_slabs():
    from vmsd.driver import WeibelCase, build_setup, march, weibel_density_callable, \
        weibel_field_callable

    case = WeibelCase.preset(1)
    setup = build_setup(case, nx=6, nv=12, v_bound=1.1, T=0.5, M=4, p=1,
                        rule=HpRule("uniform", p=1, delta=0.05))
    traj = march(setup, weibel_density_callable(case), weibel_field_callable(case))
    drift = np.max(np.abs(np.diff(traj.mass)))
    assert drift <= 1e-3 * traj.mass[0]


def test_reflect_trace_is_involution():
    ps, ms, part, hp = make_phase(nv=6)
    rng = np.random.default_rng(4)
    st = random_density(ps, rng)
    twice = ps.reflect_trace(ps.reflect_trace(st.trace_in))
    assert np.array_equal(twice, st.trace_in)


def test_reflect_requires_symmetric_mesh():
    mesh_x = build_tensor_mesh([(0.0, 1.0)], [2], [True])
    mesh_v = build_tensor_mesh([(-1.0, 2.0), (-1.0, 1.0)], [4, 4])
    ps = PhaseSpace(mesh_x, mesh_v, 1, 0.1)
    with pytest.raises(InvalidConfigError):
        ps.reflect_trace(np.zeros(ps.node_shape))


def test_relativistic_assembly_rejected():
    ps, ms, part, hp = make_phase()
    tf = TransportField(relativistic=True, maxwell_space=ms,
                        field_state=FieldState(0, np.zeros((3, 2, ms.node_shape[0]))))
    with pytest.raises(AssemblyError):
        ps.assemble_slab(0.0, part.k, hp.slab_delta(0), tf, lambda pts: np.zeros(pts.shape[0]))


def test_assembly_deterministic_across_thread_counts():
    numba = pytest.importorskip("numba")
    ps, ms, part, hp = make_phase(nx=3, nv=5)
    rng = np.random.default_rng(8)
    w = FieldState(0, rng.standard_normal((3, 2, ms.node_shape[0])))
    tr = TransportField(maxwell_space=ms, field_state=w)
    delta = hp.slab_delta(0)
    before = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        m1 = ps.matrix(tr, delta)
        numba.set_num_threads(min(4, numba.config.NUMBA_NUM_THREADS))
        m2 = ps.matrix(tr, delta)
    finally:
        numba.set_num_threads(before)
    assert np.array_equal(m1.toarray(), m2.toarray())


def test_phase_space_requires_1x2v():
    mesh_x = build_tensor_mesh([(0.0, 1.0)] * 2, [2, 2], [True, True])
    mesh_v = build_tensor_mesh([(-1.0, 1.0)] * 2, [2, 2])
    with pytest.raises(AssemblyError):
        PhaseSpace(mesh_x, mesh_v, 1, 0.1)
