"""Command-line entry point: mode dispatch and deterministic artifacts.

Every CSV is written atomically (temp file + rename) with a fixed column
layout, and each run leaves a manifest recording the config hash, package
version, and wall time.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import RunConfig, parse_config, render_config, validate
from .driver import (Trajectory, WeibelCase, build_setup, march, reversibility_test,
                     weibel_density_callable, weibel_field_callable)
from .errors import VmsdError
from .maxwell import (MaxwellSpace, SourceField, flux_matrices, l2q_error_maxwell,
                      march_maxwell, standing_wave_solution)
from .mesh import HpRule, assign_hp, build_tensor_mesh, build_time_partition
from .nitsche import (CurlGrid, NitscheOperator, error_norms, fully_discrete_solve,
                      ritz_project, smooth_vector_field)


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _write_csv(path: str, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _hp_rule(config: RunConfig) -> HpRule:
    if config.delta_rule == "uniform":
        return HpRule("uniform", p=config.p, delta=config.delta)
    return HpRule("theory", p=config.p, c1=config.c1, c2=config.c2)


def _case(config: RunConfig) -> WeibelCase:
    return WeibelCase(mu=config.mu, v01=config.v01, v02=config.v02, k0=config.k0,
                      beta=config.beta, b_amp=config.b_amp)


def _setup(config: RunConfig):
    return build_setup(_case(config), nx=config.nx, nv=config.nv, v_bound=config.v_bound,
                       T=config.T, M=config.slabs, p=config.p, rule=_hp_rule(config),
                       solver_method=config.solver, fp_max_iters=config.fp_max_iters,
                       fp_tol=config.fp_tol, direct_limit=config.direct_limit)


def _write_snapshots(config: RunConfig, traj: Trajectory, out_dir: str) -> list[str]:
    written = []
    for t, field_trace, density_trace in traj.snapshots:
        stem = os.path.join(out_dir, f"snapshot_t{t:.6g}")
        ext = "txt" if config.snapshot_format == "text" else "bin"
        for tag, arr in (("field", field_trace), ("density", density_trace)):
            path = f"{stem}_{tag}.{ext}"
            if config.snapshot_format == "text":
                np.savetxt(path + ".tmp", arr.reshape(-1))
                os.replace(path + ".tmp", path)
            else:
                arr.astype("<f8").tofile(path + ".tmp")
                os.replace(path + ".tmp", path)
            written.append(path)
        sidecar = {
            "time": t,
            "format": config.snapshot_format,
            "field": {"components": ["E1", "E2", "B"], "shape": list(field_trace.shape),
                      "order": "component-major, then x nodes"},
            "density": {"shape": list(density_trace.shape),
                        "order": "x nodes, v1 nodes, v2 nodes (C order)"},
            "mesh": {"nx": config.nx, "nv": config.nv, "v_bound": config.v_bound,
                     "p": config.p},
        }
        spath = f"{stem}.json"
        _atomic_write(spath, json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        written.append(spath)
    return written


def _dump_slab_matrix(config: RunConfig, setup, out_dir: str) -> list[str]:
    """Debug aid: the slab-0 field matrix in coordinate text format."""
    if not config.debug_dump:
        return []
    from .maxwell import SourceField

    system = setup.maxwell_space.assemble_slab(
        0.0, setup.partition.k, setup.hp_maxwell.slab_delta(0),
        SourceField.zero(3), weibel_field_callable(_case(config)))
    path = os.path.join(out_dir, "slab0_field_matrix.txt")
    system.dump_coordinate(path)
    return [path]


def _run_weibel(config: RunConfig, out_dir: str) -> list[str]:
    setup = _setup(config)
    case = _case(config)
    extra = _dump_slab_matrix(config, setup, out_dir)
    traj = march(setup, weibel_density_callable(case), weibel_field_callable(case),
                 snapshot_times=config.snapshot_times)
    path = os.path.join(out_dir, "trajectory.csv")
    _write_csv(path, "t,E1,E2,B,K1,K2,mass,iters,residual", traj.rows())
    return [path] + _write_snapshots(config, traj, out_dir) + extra


def _run_reversibility(config: RunConfig, out_dir: str) -> list[str]:
    setup = _setup(config)
    extra = _dump_slab_matrix(config, setup, out_dir)
    errors = reversibility_test(setup)
    rows = [(unknown, norm, value) for (unknown, norm), value in errors.items()]
    path = os.path.join(out_dir, "reversibility.csv")
    _write_csv(path, "unknown,norm,value", rows)
    return [path] + extra


def _run_sd_convergence(config: RunConfig, out_dir: str) -> list[str]:
    exact, source, initial = standing_wave_solution()
    flux = flux_matrices("reduced1half")
    errs, hs = [], []
    n0 = max(2, config.nx)
    for level in range(3):
        n = n0 * 2**level
        mesh = build_tensor_mesh([(0.0, 1.0)], [n], [True])
        part = build_time_partition(0.5, n)
        hp = assign_hp(mesh, part, _hp_rule(config))
        space = MaxwellSpace(mesh, config.p, flux, part.k)
        states = march_maxwell(space, part, hp, SourceField(3, source), initial)
        errs.append(l2q_error_maxwell(space, states, part, exact))
        hs.append(1.0 / n)
    rows = []
    for i, (h, e) in enumerate(zip(hs, errs)):
        order = np.log2(errs[i - 1] / errs[i]) if i else float("nan")
        rows.append((h, e, order))
    path = os.path.join(out_dir, "sd_convergence.csv")
    _write_csv(path, "h,l2_error,observed_order", rows)
    return [path]


def _run_nitsche_convergence(config: RunConfig, out_dir: str) -> list[str]:
    rows = []
    prev = None
    for level in range(config.nitsche_levels):
        n = config.nitsche_n0 * 2**level
        h = 1.0 / n
        k = config.nitsche_cfl * h
        op = NitscheOperator(CurlGrid(n), config.gamma)
        l2, hn, tn = fully_discrete_solve(op, k, config.nitsche_T, all_norms=True)
        order = float("nan") if prev is None else np.log2(prev / l2)
        prev = l2
        rows.append((h, k, l2, hn, tn, order))
    path = os.path.join(out_dir, "nitsche_convergence.csv")
    _write_csv(path, "h,k,l2_error,h_norm_error,triple_norm_error,observed_order", rows)
    return [path]


def _run_ritz_study(config: RunConfig, out_dir: str) -> list[str]:
    u, curl_u, _ = smooth_vector_field()
    rows = []
    prev = None
    for level in range(config.nitsche_levels):
        n = config.nitsche_n0 * 2**level
        h = 1.0 / n
        op = NitscheOperator(CurlGrid(n), config.gamma)
        coeffs = ritz_project(op, u, curl_u)
        l2, hn, tn = error_norms(op, coeffs, u, curl_u)
        order = float("nan") if prev is None else np.log2(prev / l2)
        prev = l2
        rows.append((h, 0.0, l2, hn, tn, order))
    path = os.path.join(out_dir, "ritz_study.csv")
    _write_csv(path, "h,k,l2_error,h_norm_error,triple_norm_error,observed_order", rows)
    return [path]


_MODES = {
    "weibel-run": _run_weibel,
    "reversibility": _run_reversibility,
    "sd-convergence": _run_sd_convergence,
    "nitsche-convergence": _run_nitsche_convergence,
    "ritz-study": _run_ritz_study,
}


def run(config: RunConfig) -> int:
    """Execute one mode and write its artifacts; returns the exit status."""
    validate(config)
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    _set_threads(config.threads)
    start = time.time()
    try:
        outputs = _MODES[config.mode](config, out_dir)
    except VmsdError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    manifest = {
        "mode": config.mode,
        "config_sha256": hashlib.sha256(render_config(config).encode()).hexdigest(),
        "version": __version__,
        "seed": config.seed,
        "wall_time_s": round(time.time() - start, 3),
        "outputs": [os.path.basename(p) for p in outputs],
    }
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def _set_threads(n: int) -> None:
    if n < 1:
        raise VmsdError(f"thread count must be positive, got {n}")
    try:
        import numba

        numba.set_num_threads(n)
    except (ImportError, ValueError):
        pass


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vmsd",
        description="Streamline-diffusion Vlasov-Maxwell solver and Nitsche field schemes")
    parser.add_argument("mode", choices=_MODES.keys())
    parser.add_argument("--config", help="path to a key-value config file")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--threads", type=int, help="assembly thread count")
    parser.add_argument("--seed", type=int, help="random seed recorded in the manifest")
    args = parser.parse_args(argv)

    try:
        if args.config:
            with open(args.config) as f:
                config = parse_config(f.read())
        else:
            config = RunConfig()
        updates = {"mode": args.mode}
        if args.out is not None:
            updates["out_dir"] = args.out
        if args.seed is not None:
            updates["seed"] = args.seed
        threads = args.threads
        if threads is None:
            env = os.environ.get("VMSD_THREADS")
            threads = int(env) if env else None
        if threads is not None:
            updates["threads"] = threads
        from dataclasses import replace

        config = replace(config, **updates)
    except (OSError, ValueError, VmsdError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
