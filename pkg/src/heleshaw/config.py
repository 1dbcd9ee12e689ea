"""Flat key = value configuration with defaults, validation and round-trip.

Grammar: UTF-8 text, one ``key = value`` per line, ``#`` starts a comment,
``[section]`` lines are ignored.  Every key has a default; unknown keys are
hard errors carrying the line number, as are values that fail their range
check.  ``serialize_config(parse_config(text))`` reparses to an equal
Config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import BadValueError, UnknownKeyError
from .grid import Grid2D
from .model import (
    CHI_OPTIONS,
    F_OPTIONS,
    PHI_OPTIONS,
    Coefficients,
    InitialData,
    SimParams,
    make_initial_patch,
)

TAU = 2.0 * math.pi


@dataclass
class Config:
    """Everything a run or a sweep needs, in config-file order."""

    # grid
    grid_n: int = 64
    box_length: float = TAU
    # time stepping and regularization
    m: float = 6.0
    eps_visc: float = 0.0
    eps_mollify: float = 0.0
    dt_safety: float = 0.4
    t_end: float = 0.2
    snapshot_every: int = 20
    # coefficients
    chi: str = "constant"
    chi_0: float = 8.0
    f: str = "saturating"
    phi: str = "zero"
    phi_amp: float = 0.5
    c_B: float = 1.0
    # validation budget and diagnostics
    init_bound: float = 10.0
    compl_threshold_rel: float = 1e-3
    # initial data preset: density patch inside a wider oxygen bump whose
    # inward gradient compresses the patch against the stiff ceiling
    patch_radius: float = 1.0
    patch_center_x: float | None = None  # None = box center ("auto")
    patch_center_y: float | None = None
    n_amp: float = 0.8
    c_amp: float = 0.5
    mollify_width: float = 0.15
    c_profile: str = "disc"
    c_radius: float | None = 0.8
    c_mollify_width: float | None = 0.3
    u0: str = "taylor-green"
    u0_amp: float = 0.5
    # execution
    out_dir: str = "out"
    deterministic: bool = True
    workers: int = 1
    # sweep
    m_list: tuple[float, ...] = (5.0, 8.0, 12.0, 18.0, 27.0, 40.0)
    sweep_slices: int = 8


_AUTO_KEYS = {"patch_center_x", "patch_center_y", "c_radius", "c_mollify_width"}


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_m_list(raw: str) -> tuple[float, ...]:
    vals = tuple(float(part) for part in raw.split(",") if part.strip())
    if not vals:
        raise ValueError("empty m_list")
    if sorted(vals) != list(vals) or len(set(vals)) != len(vals):
        raise ValueError("m_list must be strictly ascending")
    return vals


_RANGE_CHECKS = {
    "grid_n": (lambda v: v >= 8, "grid_n must be >= 8"),
    "box_length": (lambda v: v > 0, "box_length must be > 0"),
    "m": (lambda v: v >= 3, "m must be >= 3"),
    "eps_visc": (lambda v: v >= 0, "eps_visc must be >= 0"),
    "eps_mollify": (lambda v: v >= 0, "eps_mollify must be >= 0"),
    "dt_safety": (lambda v: 0 < v <= 1, "dt_safety must lie in (0, 1]"),
    "t_end": (lambda v: v >= 0, "t_end must be >= 0"),
    "snapshot_every": (lambda v: v >= 1, "snapshot_every must be >= 1"),
    "chi": (lambda v: v in CHI_OPTIONS, f"chi must be one of {CHI_OPTIONS}"),
    "f": (lambda v: v in F_OPTIONS, f"f must be one of {F_OPTIONS}"),
    "phi": (lambda v: v in PHI_OPTIONS, f"phi must be one of {PHI_OPTIONS}"),
    "c_B": (lambda v: v > 0, "c_B must be > 0"),
    "init_bound": (lambda v: v > 0, "init_bound must be > 0"),
    "compl_threshold_rel": (lambda v: v >= 0, "compl_threshold_rel must be >= 0"),
    "patch_radius": (lambda v: v > 0, "patch_radius must be > 0"),
    "n_amp": (lambda v: 0 <= v <= 1, "n_amp must lie in [0, 1]"),
    "c_amp": (lambda v: v >= 0, "c_amp must be >= 0"),
    "mollify_width": (lambda v: v >= 0, "mollify_width must be >= 0"),
    "c_profile": (lambda v: v in ("disc", "uniform"), "c_profile must be disc or uniform"),
    "u0": (lambda v: v in ("zero", "taylor-green"), "u0 must be zero or taylor-green"),
    "workers": (lambda v: v >= 1, "workers must be >= 1"),
    "m_list": (lambda v: all(x >= 5 for x in v), "every sweep m must be >= 5"),
    "sweep_slices": (lambda v: v >= 1, "sweep_slices must be >= 1"),
}


def parse_config(text: str) -> Config:
    """Parse flat key = value text into a validated Config."""
    cfg = Config()
    known = {f.name for f in fields(Config)}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise BadValueError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, raw_val = line.partition("=")
        key = key.strip()
        raw_val = raw_val.strip()
        if key not in known:
            raise UnknownKeyError(f"line {lineno}: unknown key {key!r}")
        try:
            value = _convert(key, raw_val)
        except ValueError as exc:
            raise BadValueError(f"line {lineno}: bad value for {key!r}: {exc}") from None
        check = _RANGE_CHECKS.get(key)
        if check is not None and value is not None and not check[0](value):
            raise BadValueError(f"line {lineno}: {check[1]} (got {raw_val})")
        setattr(cfg, key, value)
    return cfg


def _convert(key: str, raw: str):
    if key in _AUTO_KEYS:
        if raw.lower() == "auto":
            return None
        return float(raw)
    if key == "m_list":
        return _parse_m_list(raw)
    if key in ("grid_n", "snapshot_every", "workers", "sweep_slices"):
        value = float(raw)
        if value != int(value):
            raise ValueError("expected an integer")
        return int(value)
    if key == "deterministic":
        return _parse_bool(raw)
    if key in ("chi", "f", "phi", "c_profile", "u0", "out_dir"):
        return raw
    return float(raw)


def serialize_config(cfg: Config) -> str:
    """Emit the config as key = value lines that reparse to an equal Config."""
    lines = []
    for f in fields(Config):
        value = getattr(cfg, f.name)
        if f.name in _AUTO_KEYS:
            rendered = "auto" if value is None else repr(float(value))
        elif f.name == "m_list":
            rendered = ",".join(repr(float(v)) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"


def build_grid(cfg: Config) -> Grid2D:
    return Grid2D(cfg.grid_n, cfg.box_length)


def build_coeffs(cfg: Config) -> Coefficients:
    return Coefficients(
        chi=cfg.chi, f=cfg.f, phi=cfg.phi, c_B=cfg.c_B, chi_0=cfg.chi_0, phi_amp=cfg.phi_amp
    )


def build_params(cfg: Config) -> SimParams:
    return SimParams(
        grid=build_grid(cfg),
        m=cfg.m,
        coeffs=build_coeffs(cfg),
        eps_visc=cfg.eps_visc,
        eps_mollify=cfg.eps_mollify,
        dt_safety=cfg.dt_safety,
        t_end=cfg.t_end,
        snapshot_every=cfg.snapshot_every,
        init_bound=cfg.init_bound,
        compl_threshold_rel=cfg.compl_threshold_rel,
    )


def build_initial_data(cfg: Config, params: SimParams | None = None) -> InitialData:
    params = build_params(cfg) if params is None else params
    grid = params.grid
    cx = 0.5 * grid.length if cfg.patch_center_x is None else cfg.patch_center_x
    cy = 0.5 * grid.length if cfg.patch_center_y is None else cfg.patch_center_y
    return make_initial_patch(
        grid,
        (cx, cy),
        cfg.patch_radius,
        cfg.n_amp,
        cfg.c_amp,
        cfg.mollify_width,
        params,
        c_radius=cfg.c_radius,
        c_mollify_width=cfg.c_mollify_width,
        c_profile=cfg.c_profile,
        u0_mode=cfg.u0,
        u0_amp=cfg.u0_amp,
    )
