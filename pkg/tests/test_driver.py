import numpy as np
import pytest

from vmsd.errors import InvalidConfigError
from vmsd.mesh import HpRule
from vmsd.driver import (Trajectory, WeibelCase, build_setup, density_mass, energies,
                         fixed_point_slab, march, reversibility_test, weibel_initial,
                         weibel_density_callable, weibel_field_callable)


def test_case_presets():
    c1 = WeibelCase.preset(1)
    assert (c1.mu, c1.v01, c1.v02, c1.k0) == (0.5, -0.3, -0.3, 0.2)
    assert c1.beta == 0.01 and c1.b_amp == 0.001
    c2 = WeibelCase.preset(2)
    assert np.isclose(c2.mu, 1 / 6) and c2.v01 == -0.5 and c2.v02 == -0.1
    with pytest.raises(InvalidConfigError):
        WeibelCase.preset(3)


def test_weibel_initial_pointwise():
    case = WeibelCase.preset(1)
    f0, e0, b0 = weibel_initial(case, case.L / 4.0, [0.0, 0.0])
    assert np.allclose(e0, 0.0)
    assert abs(b0 - (-0.001)) < 1e-15
    # peak of the two-beam profile at v = (0, -0.3)
    fpeak, _, _ = weibel_initial(case, 0.0, [0.0, -0.3])
    assert fpeak > f0


def test_initial_density_normalized():
    # velocity integral is one at every x (product of normalized profiles)
    case = WeibelCase.preset(1)
    from numpy.polynomial.legendre import leggauss

    nodes, weights = leggauss(60)
    v = 1.1 * nodes
    w = 1.1 * weights
    vals = np.array([[weibel_initial(case, 0.3, [a, b])[0] for b in v] for a in v])
    total = w @ vals @ w
    assert abs(total - 1.0) < 1e-10


def make_setup(nx=6, nv=10, T=0.5, M=4, p=1, v_bound=1.1, **kw):
    case = WeibelCase.preset(1)
    return case, build_setup(case, nx=nx, nv=nv, v_bound=v_bound, T=T, M=M, p=p,
                             rule=HpRule("uniform", p=p, delta=0.05), **kw)


def test_initial_energies_match_closed_forms():
    case, setup = make_setup(nx=10, nv=24)
    ft = setup.phase_space.project_trace(weibel_density_callable(case))
    wt = setup.maxwell_space.project_trace(weibel_field_callable(case))
    e1, e2, b, k1, k2 = energies(setup, wt, ft)
    assert e1 == 0.0 and e2 == 0.0
    assert abs(b - case.b_amp**2 / 4) <= 0.01 * case.b_amp**2 / 4
    assert abs(k1 - case.beta / 4) <= 0.01 * case.beta / 4
    k2_exact = (case.beta / 2 + case.mu * case.v01**2 + (1 - case.mu) * case.v02**2) / 2
    assert abs(k2 - k2_exact) <= 0.01 * k2_exact
    assert abs(density_mass(setup, ft) - 1.0) < 1e-6


def test_all_zero_state_has_zero_energies():
    case, setup = make_setup(nx=4, nv=4)
    wt = np.zeros((3,) + setup.maxwell_space.node_shape)
    ft = np.zeros(setup.phase_space.node_shape)
    assert energies(setup, wt, ft) == (0.0, 0.0, 0.0, 0.0, 0.0)


def test_fixed_point_even_profile_converges_immediately():
    # x-independent even beam with no seed field: j = 0, fields stay zero
    case = WeibelCase(mu=0.5, v01=-0.3, v02=-0.3, k0=0.2, b_amp=0.0)
    setup = build_setup(case, nx=4, nv=10, v_bound=1.1, T=0.2, M=2, p=1,
                        rule=HpRule("uniform", p=1, delta=0.05))
    f_trace = setup.phase_space.project_trace(weibel_density_callable(case))
    w_trace = np.zeros((3,) + setup.maxwell_space.node_shape)
    w_state, f_state, resids = fixed_point_slab(setup, 0, f_trace, f_trace, w_trace)
    assert len(resids) == 1
    assert np.max(np.abs(w_state.coeffs)) < 1e-12
    assert np.max(np.abs(f_state.coeffs - f_trace[None])) < 1e-7


def test_fixed_point_residuals_decrease():
    case, setup = make_setup(nx=6, nv=10, T=0.3, M=2)
    setup.fp_max_iters = 3
    setup.fp_tol = 0.0  # force all three sweeps
    ps = setup.phase_space
    f_trace = ps.project_trace(weibel_density_callable(case))
    w_trace = setup.maxwell_space.project_trace(weibel_field_callable(case))
    with pytest.warns(UserWarning):
        _, _, resids = fixed_point_slab(setup, 0, f_trace, f_trace, w_trace)
    assert len(resids) == 3
    assert resids[0] > resids[1] > resids[2]


def test_fixed_point_decoupled_matches_independent_solves():
    # with zero density the field solve and the transport solve decouple
    case = WeibelCase.preset(1)
    setup = build_setup(case, nx=4, nv=6, v_bound=1.0, T=0.2, M=1, p=1,
                        rule=HpRule("uniform", p=1, delta=0.05), fp_max_iters=1)
    ps, ms = setup.phase_space, setup.maxwell_space
    f_trace = np.zeros(ps.node_shape)
    w_trace = ms.project_trace(weibel_field_callable(case))
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # single sweep cannot meet the tolerance
        w_state, f_state, _ = fixed_point_slab(setup, 0, f_trace, f_trace, w_trace)

    from vmsd.maxwell import SourceField
    from vmsd.vlasov import TransportField

    sys_w = ms.assemble_slab(0.0, setup.partition.k, setup.hp_maxwell.slab_delta(0),
                             SourceField(3, lambda t, x: np.zeros((3, len(t), x.shape[0]))),
                             w_trace)
    w_ref = ms.solve_slab(sys_w, 0, w_trace, method="direct")
    assert np.array_equal(w_state.coeffs, w_ref.coeffs)
    tr = TransportField(maxwell_space=ms, field_state=w_ref, t_lo=0.0, x_scale=setup.x_scale)
    sys_f = ps.assemble_slab(0.0, setup.partition.k, setup.hp_vlasov.slab_delta(0), tr, f_trace)
    f_ref = ps.solve_slab(sys_f, 0, x0=ps.tensor_to_vector(np.zeros((2,) + ps.node_shape)),
                          method="auto")
    assert np.array_equal(f_state.coeffs, f_ref.coeffs)


def test_march_zero_data_is_identically_zero():
    case, setup = make_setup(nx=4, nv=6, T=0.3, M=3)
    traj = march(setup, np.zeros(setup.phase_space.node_shape),
                 np.zeros((3,) + setup.maxwell_space.node_shape))
    assert np.all(traj.e1 == 0) and np.all(traj.b == 0)
    assert np.all(traj.mass == 0)
    assert len(traj.times) == 4


def test_march_rows_and_snapshots():
    case, setup = make_setup(nx=6, nv=8, T=0.4, M=4)
    traj = march(setup, weibel_density_callable(case), weibel_field_callable(case),
                 snapshot_times=(0.2, 0.4))
    rows = list(traj.rows())
    assert len(rows) == 5
    assert rows[0][7] == 0  # no iterations at the initial level
    assert len(traj.snapshots) == 2
    assert abs(traj.snapshots[0][0] - 0.2) < 1e-12


def test_reversibility_errors_structure_and_magnitude():
    case, setup = make_setup(nx=6, nv=8, T=0.3, M=3)
    errors = reversibility_test(setup)
    keys = {k for k in errors}
    assert keys == {(u, n) for u in ("f", "E1", "E2", "B") for n in ("L1", "L2")}
    assert all(np.isfinite(v) and v >= 0 for v in errors.values())
    # fields barely move over a short horizon; reversal error stays small
    assert errors[("E1", "L2")] < 1e-6
    assert errors[("B", "L2")] < 1e-4


def test_total_energy_steady_on_short_run():
    case, setup = make_setup(nx=8, nv=16, T=0.5, M=4)
    traj = march(setup, weibel_density_callable(case), weibel_field_callable(case))
    tot = traj.total_energy()
    assert np.max(np.abs(tot - tot[0])) <= 1e-3 * tot[0]
