"""Command-line entry points: run, sweep, validate, selftest.

Exit codes: 0 on success, 1 when a validation/oracle suite fails, 2 for
bad configuration or IO problems.  All output paths are relative to the
configured (or --out overridden) output directory.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .config import Config, build_initial_data, build_params, parse_config
from .diagnostics import compute_pressure
from .errors import ConfigError, HeleshawError
from .grid import Grid2D, ScalarField, VectorField, integrate
from .io import write_diag_csv, write_heatmap, write_slopes_txt, write_sweep_csv
from .model import Coefficients, SimParams
from .selfcheck import run_selfchecks
from .solver import State, cfl_dt, run, step, step_oxygen
from .sweep import barenblatt_refinement, default_workers, sweep


def _load_config(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = build_params(cfg)
    data = build_initial_data(cfg, params)

    records = []
    frame = {"idx": 0}
    hi_n = max(1.0, 1.25 * float(data.n0.values.max()))
    hi_p = (params.m / (params.m - 1.0)) * hi_n ** (params.m - 1.0)
    state_box = {}

    def csv_sink(rec):
        records.append(rec)

    def frame_observer(prev, new, rep, cums):
        state_box["state"] = new

    def frame_sink(rec):
        state = state_box.get("state")
        if state is None:
            return
        idx = frame["idx"]
        write_heatmap(state.n, out / f"n_{idx:05d}.pgm", 0.0, hi_n)
        p = compute_pressure(state.n, params.m)
        write_heatmap(p, out / f"P_{idx:05d}.pgm", 0.0, hi_p)
        frame["idx"] += 1

    final = run(params, data, sinks=(csv_sink, frame_sink), observers=(frame_observer,))
    write_diag_csv(records, out / "diag.csv")
    # frame 0 (initial state) is written last so the scales match the run
    write_heatmap(data.n0, out / "n_initial.pgm", 0.0, hi_n)
    print(f"run finished at t = {final.t:.6g} after {len(records)} records -> {out / 'diag.csv'}")
    print(f"mass_n drift: {abs(records[-1].mass_n - records[0].mass_n):.3e}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = build_params(cfg)
    data = build_initial_data(cfg, params)
    workers = default_workers() if default_workers() > 1 else cfg.workers
    result = sweep(params, data, list(cfg.m_list), snapshot_stride=cfg.sweep_slices, workers=workers)
    write_sweep_csv(result, out / "sweep.csv")
    write_slopes_txt(result, out / "slopes.txt")
    for r in result.per_m:
        status = "ok" if r.ok else f"FAILED ({r.error})"
        print(
            f"m = {r.m:6.2f}  overshoot_st = {r.overshoot_st:.6e}  "
            f"graph_P_st = {r.graph_P_st:.6e}  compl_st = {r.compl_st:.6e}  [{status}]"
        )
    fit = result.slopes.get("overshoot_st")
    if fit is not None:
        print(f"overshoot_st log-log slope: {fit.slope:+.4f} (r2 = {fit.r2:.4f})")
    print(f"wrote {out / 'sweep.csv'} and {out / 'slopes.txt'}")
    return 0 if not result.partial else 1


def _validate_barenblatt() -> tuple[bool, str]:
    from .sweep import BARENBLATT_MASS, BARENBLATT_WINDOW

    t0, t1 = BARENBLATT_WINDOW
    mass = BARENBLATT_MASS
    rep = barenblatt_refinement(2.0, 64, 2.0 * math.pi, t0, t1, mass)
    ratio = rep.l1_ratio
    ok = (
        1.4 <= ratio <= 2.6
        and rep.fine.l1_error <= 0.6 * rep.coarse.l1_error
        and rep.fine.l1_error <= 0.02 * mass
        and rep.coarse.mass_rel_drift < 1e-12
        and rep.fine.mass_rel_drift < 1e-12
    )
    detail = (
        f"L1 errors: N=64 {rep.coarse.l1_error:.4e}, N=128 {rep.fine.l1_error:.4e}, "
        f"refinement ratio {ratio:.3f} (want [1.4, 2.6])"
    )
    return ok, detail


def _validate_taylor_green() -> tuple[bool, str]:
    cfg = Config(grid_n=64, m=6.0, t_end=0.1, n_amp=0.0, c_amp=0.0, u0="taylor-green",
                 u0_amp=1.0, chi_0=0.0, snapshot_every=10**9)
    params = build_params(cfg)
    data = build_initial_data(cfg, params)
    state = State.from_initial(data)
    grid = params.grid
    ke0 = 0.5 * integrate(ScalarField(grid, data.u0.x_values**2 + data.u0.y_values**2))
    while params.t_end - state.t > 1e-12:
        state, _ = step(state, params, max_dt=params.t_end - state.t)
    ke = 0.5 * integrate(ScalarField(grid, state.u.x_values**2 + state.u.y_values**2))
    h = grid.h
    lam = 2.0 * (4.0 / h**2) * math.sin(math.pi * h / grid.length) ** 2
    expected = ke0 * math.exp(-2.0 * lam * state.t)
    rel = abs(ke / expected - 1.0)
    ok = rel <= 1e-3
    return ok, f"kinetic energy rel. deviation from discrete decay law: {rel:.3e} (want <= 1e-3)"


def _validate_ode() -> tuple[bool, str]:
    grid = Grid2D(64, 2.0 * math.pi)
    coeffs = Coefficients(chi="constant", chi_0=0.0, f="saturating", c_B=2.0)
    params = SimParams(grid=grid, m=8.0, coeffs=coeffs, t_end=1.0, init_bound=1e9)
    state = State(0.0, ScalarField.full(grid, 1.0), ScalarField.full(grid, 1.0),
                  VectorField.zeros(grid), ScalarField.zeros(grid))
    dt = cfl_dt(state, params)
    c_ref = 1.0
    for _ in range(100):
        c_new, _ = step_oxygen(state, params, dt)
        state = State(state.t + dt, state.n, c_new, state.u, state.pi)
    fine = dt / 100.0
    for _ in range(100 * 100):
        c_ref = c_ref + fine * (-1.0 * c_ref / (1.0 + c_ref))
    rel = abs(float(state.c.values[0, 0]) - c_ref) / abs(c_ref)
    ok = rel <= 1e-6
    return ok, f"uniform oxygen vs fine-step scalar integration: rel error {rel:.3e} (want <= 1e-6)"


_VALIDATE_CASES = {
    "barenblatt": _validate_barenblatt,
    "taylor-green": _validate_taylor_green,
    "ode": _validate_ode,
}


def _cmd_validate(args) -> int:
    cases = [args.case] if args.case else list(_VALIDATE_CASES)
    failed = False
    for case in cases:
        ok, detail = _VALIDATE_CASES[case]()
        print(f"{'PASS' if ok else 'FAIL'} {case}: {detail}")
        failed = failed or not ok
    return 1 if failed else 0


def _cmd_selftest(_args) -> int:
    checks = run_selfchecks()
    failed = False
    for name, ok, detail in checks:
        suffix = f" ({detail})" if detail else ""
        print(f"{'PASS' if ok else 'FAIL'} {name}{suffix}")
        failed = failed or not ok
    print(f"{sum(1 for _, ok, _ in checks if ok)}/{len(checks)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="heleshaw",
        description="chemotaxis-fluid lab with degenerate diffusion and stiff-limit diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single simulation: diag.csv plus density/pressure frames")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="diffusion-exponent ladder: sweep.csv plus slopes.txt")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate", help="oracle suites (exact-solution checks)")
    p_val.add_argument("--case", choices=sorted(_VALIDATE_CASES), default=None)
    p_val.set_defaults(func=_cmd_validate)

    p_self = sub.add_parser("selftest", help="operator/invariant suite on small grids")
    p_self.set_defaults(func=_cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except HeleshawError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
