"""Run summaries, comparison metrics and CSV emission."""
from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .simulator import COLUMNS, TimeSeries

RECOVERY_WINDOW = 0.5   # s after clearing scanned for the recovery-start voltage


def fmt(v) -> str:
    """Nine significant digits; integers and strings pass through."""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if v == 0.0:
        return "0"  # folds -0.0
    return f"{v:.9g}"


def write_csv(ts: TimeSeries, stream) -> None:
    stream.write(",".join(COLUMNS) + "\n")
    cols = [ts[c] for c in COLUMNS]
    for k in range(len(ts)):
        row = []
        for name, col in zip(COLUMNS, cols):
            v = col[k]
            row.append(str(int(v)) if name == "lvrt_active" else fmt(v))
        stream.write(",".join(row) + "\n")


def csv_text(ts: TimeSeries) -> str:
    buf = io.StringIO()
    write_csv(ts, buf)
    return buf.getvalue()


def write_grid_csv(stream, row_name: str, rows: Sequence[float], col_name: str,
                   cols: Sequence[float], values: np.ndarray) -> None:
    """Grid with the column axis in the header and the row axis in column one."""
    stream.write(f"{row_name}\\{col_name}," + ",".join(fmt(c) for c in cols) + "\n")
    for r, line in zip(rows, values):
        stream.write(fmt(r) + "," + ",".join(fmt(v) for v in line) + "\n")


@dataclass
class RunSummary:
    scenario: str
    mode: str
    events: list
    terminated: Optional[str]
    U_c_post_min: float
    U_c_post_max: float
    U_dc_max: float
    theta_v_abs_max: float
    recovery_start: float
    cct: Optional[float] = None
    cct_censored: Optional[bool] = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["events"] = [list(e) for e in self.events]
        return d

    def lines(self) -> list[str]:
        out = [f"scenario: {self.scenario}", f"mode: {self.mode}"]
        for e in self.events:
            out.append("event: t=" + fmt(e[0]) + " " + " ".join(str(x) for x in e[1:]))
        for key in ("U_c_post_min", "U_c_post_max", "recovery_start", "U_dc_max",
                    "theta_v_abs_max"):
            out.append(f"{key}: {fmt(getattr(self, key))}")
        if self.cct is not None:
            out.append(f"cct: {fmt(self.cct)}" + (" (censored at bracket)" if self.cct_censored else ""))
        for k, v in self.extra.items():
            out.append(f"{k}: {fmt(v) if isinstance(v, float) else v}")
        out.append("status: " + (self.terminated or "ok"))
        return out


def _ext(values: np.ndarray, fn) -> float:
    return float(fn(values)) if len(values) else math.nan


def summarize(ts: TimeSeries, t_clear: float, window: float = RECOVERY_WINDOW) -> RunSummary:
    """Post-fault extrema of a trajectory.

    ``recovery_start`` is the lowest PCC voltage within ``window`` seconds
    after clearing, i.e. the level the recovery starts from.  A run cut
    short by LOS is judged on the samples it produced.
    """
    post = ts.window(t_clear, open_left=True)
    rec = ts.window(t_clear, t_clear + window, open_left=True)
    U = ts["U_c"]
    return RunSummary(
        scenario=ts.scenario,
        mode=ts.header.get("mode", ""),
        events=list(ts.events),
        terminated=ts.terminated,
        U_c_post_min=_ext(U[post], np.min),
        U_c_post_max=_ext(U[post], np.max),
        U_dc_max=_ext(ts["U_dc"], np.max),
        theta_v_abs_max=_ext(np.abs(ts["theta_v"]), np.max),
        recovery_start=_ext(U[rec], np.min),
    )


def compare_lines(summaries: dict) -> list[str]:
    """Side-by-side metrics for two or more modes, with differences to the first."""
    names = list(summaries)
    keys = ("recovery_start", "U_c_post_max", "U_dc_max", "cct")
    out = ["metric," + ",".join(names)]
    for k in keys:
        vals = [getattr(summaries[n], k) for n in names]
        if all(v is None for v in vals):
            continue
        out.append(k + "," + ",".join("" if v is None else fmt(v) for v in vals))
    if len(names) > 1:
        base = summaries[names[0]]
        for n in names[1:]:
            for k in keys:
                a, b = getattr(base, k), getattr(summaries[n], k)
                if a is not None and b is not None:
                    out.append(f"delta_{k}({n}-{names[0]}),{fmt(b - a)}")
    return out
