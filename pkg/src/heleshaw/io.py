"""CSV and PGM emission with frozen schemas.

The diagnostic CSV starts with the comment line ``# version=1`` (schema
gate), then the fixed 20-column header, then one row per record with every
value printed to 17 significant digits (lossless for doubles) and LF line
endings.  Heatmaps are binary 8-bit PGM (P5) with round-half-up
quantization.  The sweep CSV holds one row per ladder member followed by a
cross-pair block.
"""

from __future__ import annotations

import numpy as np

from .diagnostics import CSV_COLUMNS, DiagRecord
from .grid import ScalarField
from .sweep import PER_M_METRICS, SweepResult

DIAG_VERSION_LINE = "# version=1"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_diag_csv(records: list[DiagRecord], path) -> None:
    """Write diagnostic records; header-only file for an empty list."""
    lines = [DIAG_VERSION_LINE, ",".join(CSV_COLUMNS)]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, col)) for col in CSV_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_diag_csv(path) -> list[DiagRecord]:
    """Parse a diagnostic CSV back into records (inverse of write_diag_csv)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    header = body[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected diagnostic CSV header in {path}")
    records = []
    for ln in body[1:]:
        vals = [float(tok) for tok in ln.split(",")]
        records.append(DiagRecord(*vals))
    return records


def write_heatmap(f: ScalarField, path, lo: float, hi: float) -> None:
    """Binary grayscale PGM of a field: value = clamp(round(255 (f - lo)/(hi - lo))).

    Rounding is half-up (never banker's).  Image rows run from large y to
    small y so the picture has y pointing up.
    """
    if not lo < hi:
        raise ValueError("heatmap range needs lo < hi")
    n = f.grid.n_cells
    scaled = 255.0 * (f.values - lo) / (hi - lo)
    pix = np.clip(np.floor(scaled + 0.5), 0.0, 255.0).astype(np.uint8)
    rows = pix.T[::-1, :]  # row r = y index (n-1-r), columns run along x
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
        fh.write(rows.tobytes())


def write_sweep_csv(result: SweepResult, path) -> None:
    """One row per ladder member, then the adjacent-pair distance block."""
    lines = [DIAG_VERSION_LINE]
    cols = ("m",) + PER_M_METRICS + ("snapshot_mismatch", "steps", "ok", "error")
    lines.append(",".join(cols))
    for r in result.per_m:
        lines.append(
            ",".join(
                [
                    _fmt(r.m),
                    _fmt(r.overshoot_st),
                    _fmt(r.graph_P_st),
                    _fmt(r.graph_gradP_st),
                    _fmt(r.compl_st),
                    _fmt(r.grad_nm_st),
                    _fmt(r.snapshot_mismatch),
                    str(r.steps),
                    "1" if r.ok else "0",
                    r.error.replace(",", ";"),
                ]
            )
        )
    lines.append("# cross-m adjacent pairs")
    lines.append("m_lo,m_hi,hminus1_st,grad_pow_st")
    for c in result.cross_m:
        lines.append(",".join([_fmt(c.m_lo), _fmt(c.m_hi), _fmt(c.hminus1_st), _fmt(c.grad_pow_st)]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_slopes_txt(result: SweepResult, path) -> None:
    """Human-readable log-log slope summary, one metric per line."""
    lines = [
        "fitted log-log decay slopes (metric ~ m^slope)",
        f"ladder: {', '.join(_fmt(m) for m in result.m_values)}",
        "",
    ]
    for name, fit in result.slopes.items():
        if fit is None:
            lines.append(f"{name:14s}  slope = absent (fewer than 3 positive points)")
        else:
            lines.append(
                f"{name:14s}  slope = {fit.slope:+.6f}  intercept = {fit.intercept:+.6f}"
                f"  r2 = {fit.r2:.6f}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
