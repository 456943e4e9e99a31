"""End-to-end runs over a set of labelled ground-truth points."""
import csv
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from ..channel import Position3D
from ..protocol import InputData, lmf_run_procedure
from .scenario import build_world


@dataclass(frozen=True)
class ReportRow:
    label: str
    truth: Position3D
    estimate: Optional[Position3D]
    error_m: Optional[float]
    toas: tuple = ()  # (trp_id, toa_s)
    tdoas: tuple = ()  # (trp_id, tdoa_s)
    trace_ref: str = ""
    failure: Optional[str] = None

    @property
    def ok(self):
        return self.failure is None


@dataclass(frozen=True)
class RunReport:
    rows: tuple
    seed: int = 0

    def errors(self):
        return np.array([r.error_m for r in self.rows if r.ok])

    def rmse(self):
        e = self.errors()
        return float(np.sqrt(np.mean(e**2))) if e.size else float("nan")

    def max_error(self):
        e = self.errors()
        return float(e.max()) if e.size else float("nan")


def horizontal_error(truth, estimate):
    return float(np.hypot(estimate.x - truth.x, estimate.y - truth.y))


def point_labels(n):
    letters = string.ascii_uppercase
    if n <= len(letters):
        return list(letters[:n])
    return [f"P{i}" for i in range(n)]


def default_points(cfg, n_side=4, margin=0.2):
    """``n_side`` x ``n_side`` grid inside the TRP bounding box, labelled A, B, ..."""
    locs = np.array([t.location.as_array() for t in cfg.trps])
    lo, hi = locs[:, :2].min(axis=0), locs[:, :2].max(axis=0)
    span = hi - lo
    # a collinear layout has a flat box; give it the extent of the long side
    flat = span <= 0
    lo, hi = np.where(flat, lo - span.max() / 2, lo), np.where(flat, hi + span.max() / 2, hi)
    span = hi - lo
    lo, hi = lo + margin * span, hi - margin * span
    xs = np.linspace(lo[0], hi[0], n_side)
    ys = np.linspace(lo[1], hi[1], n_side)
    coords = [(x, y) for y in ys for x in xs]
    z = cfg.solver.fixed_z
    return list(zip(point_labels(len(coords)), [Position3D(x, y, z) for x, y in coords]))


def load_points(path, fixed_z=1.3):
    """Points from YAML (list of {label, x, y[, z]}) or CSV (label,x,y[,z])."""
    path = str(path)
    if path.endswith((".yaml", ".yml")):
        with open(path) as fh:
            raw = yaml.safe_load(fh) or []
        rows = [(r["label"], r["x"], r["y"], r.get("z", fixed_z)) for r in raw]
    else:
        with open(path, newline="") as fh:
            reader = csv.reader(line for line in fh if line.strip() and not line.startswith("#"))
            rows = []
            for rec in reader:
                if rec[0] == "label":
                    continue
                z = rec[3] if len(rec) > 3 and rec[3] != "" else fixed_z
                rows.append((rec[0], rec[1], rec[2], z))
    return [(str(lbl), Position3D(float(x), float(y), float(z))) for lbl, x, y, z in rows]


def point_seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def run_point(cfg, label, truth, seed, trace_dir=None):
    world = build_world(cfg, ue_position=truth, seed=seed)
    trace_ref = f"trace-{label}"
    try:
        loc, trace = lmf_run_procedure(InputData(cfg.ue.supi), world)
    except Exception as exc:  # recorded per row, the run carries on
        return ReportRow(label, truth, None, None, trace_ref=trace_ref, failure=f"{type(exc).__name__}: {exc}")
    if trace_dir is not None:
        trace.write(f"{trace_dir}/{trace_ref}.csv")
    est = loc.cartesian
    return ReportRow(
        label,
        truth,
        est,
        horizontal_error(truth, est),
        toas=tuple((m.trp_id, m.toa_s) for m in trace.measurements),
        tdoas=tuple(trace.tdoas.entries),
        trace_ref=trace_ref,
    )


def run_end_to_end(cfg, points=None, seed=0, workers=1, trace_dir=None):
    """Position the UE at every point; per-point seeds derive from ``seed``."""
    if points is None:
        points = default_points(cfg)
    seeds = point_seeds(seed, len(points))
    jobs = [(cfg, lbl, truth, s, trace_dir) for (lbl, truth), s in zip(points, seeds)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda j: run_point(*j), jobs))
    else:
        rows = [run_point(*j) for j in jobs]
    return RunReport(tuple(rows), seed)
