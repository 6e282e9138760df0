"""Deterministic artifact serialization: CSV, JSON, checksums.

All floats are written with 17 significant digits ('%.17g'), which
round-trips IEEE doubles exactly; CSV uses '.' decimals, ',' separators and
LF line endings.  JSON objects are emitted with sorted keys.  Identical
inputs therefore produce byte-identical files regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np


def fmt(x) -> str:
    """17-significant-digit decimal form of a float (exact round trip)."""
    return "%.17g" % float(x)


def csv_lines(header, rows):
    out = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, str):
                cells.append(v)
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(fmt(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def write_text(path, text: str) -> str:
    data = text.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def write_json(path, obj) -> str:
    return write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def complex_columns(prefix: str, count: int):
    cols = []
    for k in range(1, count + 1):
        cols.append(f"re_{prefix}{k}")
        cols.append(f"im_{prefix}{k}")
    return cols


def map_csv(emap) -> str:
    """One row per cell: x, y, Re/Im of each eigenvalue, min gap, max overlap."""
    dim = emap.eigenvalues.shape[-1]
    header = ["x", "y"] + complex_columns("lambda", dim) + ["min_gap", "max_overlap"]
    rows = []
    for i, x in enumerate(emap.xs):
        for j, y in enumerate(emap.ys):
            row = [x, y]
            for k in range(dim):
                lam = emap.eigenvalues[i, j, k]
                row.extend([lam.real, lam.imag])
            row.extend([emap.min_gap[i, j], emap.max_overlap[i, j]])
            rows.append(row)
    return csv_lines(header, rows)


def map_json(emap) -> dict:
    return {
        "model": emap.model,
        "plane": {
            "x": {"name": emap.plane.x.name, "lo": emap.plane.x.lo,
                  "hi": emap.plane.x.hi, "res": emap.plane.x.res},
            "y": {"name": emap.plane.y.name, "lo": emap.plane.y.lo,
                  "hi": emap.plane.y.hi, "res": emap.plane.y.res},
            "fixed": dict(sorted(emap.plane.fixed.items())),
        },
        "lines": [[[float(v[0]), float(v[1])] for v in line] for line in emap.lines],
        "points": [
            {
                "location": [c.location[0], c.location[1]],
                "order": c.order,
                "eigenvalue": [c.eigenvalue.real, c.eigenvalue.imag],
                "residual": c.residual,
                "kind": c.kind,
            }
            for c in emap.points
        ],
    }


def trajectory_csv(traj, extra_sheet=None) -> str:
    """t, Re/Im state components, norm, Re/Im projection, sheet, weights.

    States are the unit-normalized snapshots; the norm column carries the
    magnitude (zero after underflow).  ``extra_sheet`` substitutes the
    sheet column (used by the mean-field runs, which report the excited
    population there instead).
    """
    dim = traj.states.shape[1]
    header = (
        ["t"]
        + complex_columns("state", dim)
        + ["norm", "re_projection", "im_projection", "sheet_index", "pop1", "pop2"]
    )
    rows = []
    for k in range(len(traj.times)):
        row = [traj.times[k]]
        for c in range(dim):
            row.extend([traj.states[k, c].real, traj.states[k, c].imag])
        row.append(traj.norm[k])
        if traj.projected is not None:
            row.extend([traj.projected[k].real, traj.projected[k].imag])
        else:
            row.extend([float("nan"), float("nan")])
        if extra_sheet is not None:
            row.append(extra_sheet[k])
        elif traj.sheet_index is not None:
            row.append(int(traj.sheet_index[k]))
        else:
            row.append(float("nan"))
        if traj.populations is not None:
            w = np.abs(traj.populations[k]) ** 2
            row.extend([w[0], w[1] if len(w) > 1 else float("nan")])
        else:
            row.extend([float("nan"), float("nan")])
        rows.append(row)
    return csv_lines(header, rows)


def chirality_json(report) -> dict:
    return {
        "ccw": {
            "fidelity_to_initial_branch": report.ccw_final_fidelity_to_initial_branch,
            "fidelity_to_other_branch": report.ccw_final_fidelity_to_other_branch,
        },
        "cw": {
            "fidelity_to_initial_branch": report.cw_final_fidelity_to_initial_branch,
            "fidelity_to_other_branch": report.cw_final_fidelity_to_other_branch,
        },
        "verdict": report.verdict,
        "adiabaticity": {
            "min_gap": report.adiabaticity.min_real_gap,
            "period_times_min_gap": report.adiabaticity.dimensionless_ratio,
        },
    }


def steady_scan_csv(omegas, deltas, gamma, W) -> str:
    """Omega, Delta, root count, each population, stability flags."""
    from .rydberg import RydbergParams, steady_states

    header = [
        "Omega", "Delta", "root_count",
        "n_1", "n_2", "n_3", "stable_1", "stable_2", "stable_3",
    ]
    rows = []
    for om in omegas:
        for de in deltas:
            p = RydbergParams(Omega=float(om), Delta=float(de), gamma=gamma, W=W)
            roots = steady_states(p).roots
            ns = [s.n for s in roots] + [float("nan")] * (3 - len(roots))
            st = [int(s.stable) for s in roots] + [-1] * (3 - len(roots))
            rows.append([om, de, len(roots)] + ns + st)
    return csv_lines(header, rows)


def fold_json(fmap) -> dict:
    return {
        "gamma": fmap.gamma,
        "W": fmap.W,
        "lines": [[[float(v[0]), float(v[1])] for v in line] for line in fmap.lines],
        "cusp": list(fmap.cusp) if fmap.cusp is not None else None,
    }
