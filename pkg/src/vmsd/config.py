"""Run configuration: a flat key-value text format with cosmetic sections.

Keys are globally unique, so section headers group related keys for
readability but do not scope them.  Unknown keys are rejected with the
offending name; parse(render(config)) round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import InvalidConfigError

MODES = ("weibel-run", "reversibility", "sd-convergence", "nitsche-convergence", "ritz-study")

# mesh presets for the accuracy runs: (h_t, nx, nv)
PRESETS = {
    "H1": (0.1, 10, 6),
    "H2": (0.05, 20, 12),
    "H3": (0.025, 40, 24),
}


@dataclass(frozen=True)
class RunConfig:
    mode: str = "weibel-run"
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1

    case: int = 1
    beta: float = 0.01
    b_amp: float = 0.001
    k0: float = 0.2
    mu: float = 0.5
    v01: float = -0.3
    v02: float = -0.3
    relativistic: bool = False

    preset: str = "H1"
    v_bound: float = 1.0
    nx: int = 10
    nv: int = 6
    T: float = 5.0
    slabs: int = 50
    p: int = 1

    delta_rule: str = "uniform"
    delta: float = 0.05
    c1: float = 0.5
    c2: float = 0.0

    fp_max_iters: int = 5
    fp_tol: float = 1e-8

    solver: str = "auto"
    gmres_tol: float = 1e-10
    gmres_max_iters: int = 10000
    direct_limit: int = 40000
    debug_dump: bool = False

    gamma: float = 10.0
    nitsche_levels: int = 4
    nitsche_n0: int = 4
    nitsche_T: float = 1.0
    nitsche_cfl: float = 1.0

    snapshot_times: tuple[float, ...] = ()
    snapshot_format: str = "text"


SECTIONS = {
    "run": ("mode", "out_dir", "seed", "threads"),
    "physics": ("case", "beta", "b_amp", "k0", "mu", "v01", "v02", "relativistic"),
    "mesh": ("preset", "v_bound", "nx", "nv", "T", "slabs", "p"),
    "stabilization": ("delta_rule", "delta", "c1", "c2"),
    "fixed_point": ("fp_max_iters", "fp_tol"),
    "solver": ("solver", "gmres_tol", "gmres_max_iters", "direct_limit", "debug_dump"),
    "nitsche": ("gamma", "nitsche_levels", "nitsche_n0", "nitsche_T", "nitsche_cfl"),
    "output": ("snapshot_times", "snapshot_format"),
}

_CASE_KEYS = ("mu", "v01", "v02", "k0")
CASE_PRESETS = {
    1: {"mu": 0.5, "v01": -0.3, "v02": -0.3, "k0": 0.2},
    2: {"mu": 1.0 / 6.0, "v01": -0.5, "v02": -0.1, "k0": 0.2},
}


def _parse_value(name: str, text: str, target_type):
    try:
        if target_type is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text}")
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        if target_type is str:
            return text
        if target_type == tuple[float, ...]:
            stripped = text.strip()
            if not stripped:
                return ()
            return tuple(float(tok) for tok in stripped.split(","))
    except ValueError as exc:
        raise InvalidConfigError(f"key {name!r}: {exc}") from exc
    raise InvalidConfigError(f"key {name!r}: unsupported type {target_type}")


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def validate(config: RunConfig) -> RunConfig:
    if config.mode not in MODES:
        raise InvalidConfigError(f"key 'mode': {config.mode!r} not one of {MODES}")
    if config.case not in (1, 2):
        raise InvalidConfigError(f"key 'case': expected 1 or 2, got {config.case}")
    if config.p < 1:
        raise InvalidConfigError(f"key 'p': degree must be at least 1, got {config.p}")
    if config.T <= 0:
        raise InvalidConfigError(f"key 'T': final time must be positive, got {config.T}")
    if config.slabs < 1:
        raise InvalidConfigError(f"key 'slabs': need at least one slab, got {config.slabs}")
    if config.nx < 1 or config.nv < 1:
        raise InvalidConfigError("keys 'nx'/'nv': cell counts must be at least 1")
    if config.v_bound <= 0:
        raise InvalidConfigError(f"key 'v_bound': must be positive, got {config.v_bound}")
    if config.delta_rule not in ("uniform", "theory"):
        raise InvalidConfigError(f"key 'delta_rule': {config.delta_rule!r} not uniform|theory")
    if config.delta < 0:
        raise InvalidConfigError(f"key 'delta': must be nonnegative, got {config.delta}")
    if config.delta_rule == "theory" and config.c1 <= 0:
        raise InvalidConfigError(f"key 'c1': theory rule needs c1 > 0, got {config.c1}")
    if config.preset not in ("", *PRESETS):
        raise InvalidConfigError(f"key 'preset': {config.preset!r} not one of {tuple(PRESETS)}")
    if config.fp_max_iters < 1:
        raise InvalidConfigError(f"key 'fp_max_iters': must be at least 1, got {config.fp_max_iters}")
    if config.solver not in ("direct", "gmres", "auto"):
        raise InvalidConfigError(f"key 'solver': {config.solver!r} not direct|gmres|auto")
    if config.gamma <= 0:
        raise InvalidConfigError(f"key 'gamma': must be positive, got {config.gamma}")
    if config.snapshot_format not in ("text", "binary"):
        raise InvalidConfigError(f"key 'snapshot_format': {config.snapshot_format!r} not text|binary")
    if config.mode == "reversibility":
        for t in config.snapshot_times:
            if not 0 <= t <= config.T:
                raise InvalidConfigError(f"key 'snapshot_times': {t} outside [0, {config.T}]")
    return config


def parse_config(text: str) -> RunConfig:
    """Parse the key-value document, applying case and mesh presets.

    Explicitly given keys always win over preset-derived values.
    """
    by_name = {f.name: f for f in fields(RunConfig)}
    seen: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise InvalidConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise InvalidConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in by_name:
            raise InvalidConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise InvalidConfigError(f"line {lineno}: duplicate key {key!r}")
        seen[key] = value.strip()

    values = {}
    for key, raw_value in seen.items():
        f = by_name[key]
        ftype = {"snapshot_times": tuple[float, ...]}.get(key, f.type)
        if isinstance(ftype, str):  # from __future__ annotations
            ftype = {"str": str, "int": int, "float": float, "bool": bool,
                     "tuple[float, ...]": tuple[float, ...]}[ftype]
        values[key] = _parse_value(key, raw_value, ftype)

    config = RunConfig(**values)
    # case presets fill beam parameters not explicitly given
    for key, preset_value in CASE_PRESETS[config.case].items():
        if key not in seen:
            config = replace(config, **{key: preset_value})
    # mesh preset fills nx/nv/slabs not explicitly given
    if config.preset:
        h_t, nx, nv = PRESETS[config.preset]
        if "nx" not in seen:
            config = replace(config, nx=nx)
        if "nv" not in seen:
            config = replace(config, nv=nv)
        if "slabs" not in seen:
            config = replace(config, slabs=max(1, round(config.T / h_t)))
    return validate(config)


def render_config(config: RunConfig) -> str:
    """Canonical text form listing every key under its section."""
    lines = []
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_render_value(getattr(config, key))}")
        lines.append("")
    return "\n".join(lines)
