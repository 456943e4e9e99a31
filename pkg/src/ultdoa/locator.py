"""TDoA position estimation (linear LS + damped Gauss-Newton) and the
ground-truth distance solver.

Positions are solved in the horizontal plane; the height is a fixed input.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import SPEED_OF_LIGHT, Position3D

DEFAULT_TOL_M = 1e-9
DEFAULT_MAX_ITER = 100
LAMBDA_INIT = 1e-3
LAMBDA_UP = 10.0
LAMBDA_DOWN = 10.0
LAMBDA_MAX = 1e16


class LocalizationError(ValueError):
    pass


class InsufficientMeasurementsError(LocalizationError):
    pass


class NonConvergenceError(LocalizationError):
    pass


class InconsistentDistancesError(LocalizationError):
    pass


@dataclass(frozen=True)
class TdoaSet:
    reference_trp: int
    entries: tuple  # ((trp_id, tdoa_s), ...) with the reference first
    trp_positions: dict = field(default_factory=dict)

    def __post_init__(self):
        entries = tuple((int(t), float(d)) for t, d in self.entries)
        ids = [t for t, _ in entries]
        if self.reference_trp not in ids:
            raise LocalizationError(f"reference TRP {self.reference_trp} missing from entries")
        if dict(entries)[self.reference_trp] != 0.0:
            raise LocalizationError("reference TRP must have zero TDoA")
        if len(set(ids)) != len(ids):
            raise LocalizationError("duplicate TRP ids in TDoA set")
        missing = [t for t in ids if t not in self.trp_positions]
        if missing:
            raise LocalizationError(f"no position for TRP(s) {missing}")
        object.__setattr__(self, "entries", entries)

    @property
    def n_non_reference(self):
        return len(self.entries) - 1

    def arrays(self):
        """(anchors (n, 3), range differences in metres (n,), reference row)."""
        ids = [t for t, _ in self.entries]
        anchors = np.array([self.trp_positions[t].as_array() for t in ids])
        rd = SPEED_OF_LIGHT * np.array([d for _, d in self.entries])
        return anchors, rd, ids.index(self.reference_trp)


@dataclass(frozen=True)
class PositionEstimate:
    position: Position3D
    residual_norm_s: float
    iterations: int = 0
    converged: bool = True
    ambiguity_flag: bool = False


@dataclass(frozen=True)
class GroundTruthProblem:
    anchors: tuple
    distances_m: tuple
    initial_guess: Position3D

    def __post_init__(self):
        if len(self.anchors) != len(self.distances_m):
            raise ValueError("anchors and distances differ in length")
        if len(self.anchors) < 1:
            raise ValueError("need at least one anchor")
        if any(d < 0 for d in self.distances_m):
            raise ValueError("distances must be non-negative")


# --------------------------------------------------------------------------
# ToA -> TDoA
# --------------------------------------------------------------------------
def select_reference(measurements):
    """TRP with the strongest RSRP, lowest trp_id on ties."""
    if not measurements:
        raise LocalizationError("no measurements to pick a reference from")
    best = max(measurements, key=lambda m: (m.rsrp_dbfs, -m.trp_id))
    return best.trp_id


def toa_to_tdoa(measurements, reference_trp, trp_positions):
    toas = {m.trp_id: m.toa_s for m in measurements}
    if reference_trp not in toas:
        raise LocalizationError(f"reference TRP {reference_trp} has no measurement")
    ref = toas[reference_trp]
    order = [reference_trp] + sorted(t for t in toas if t != reference_trp)
    entries = [(t, 0.0 if t == reference_trp else toas[t] - ref) for t in order]
    return TdoaSet(reference_trp, tuple(entries), dict(trp_positions))


# --------------------------------------------------------------------------
# residual model
# --------------------------------------------------------------------------
def _range_model(xy, anchors, z, ref):
    p = np.array([xy[0], xy[1], z])
    dist = np.linalg.norm(anchors - p, axis=1)
    return dist - dist[ref], dist


def tdoa_residuals(xy, anchors, rd, z, ref):
    """Measured minus modelled range differences (metres), reference row dropped."""
    model, _ = _range_model(xy, anchors, z, ref)
    keep = np.arange(len(anchors)) != ref
    return (rd - model)[keep]


def tdoa_jacobian(xy, anchors, z, ref):
    """d residual / d (x, y), matching ``tdoa_residuals`` row order."""
    p = np.array([xy[0], xy[1], z])
    diff = p - anchors
    dist = np.linalg.norm(diff, axis=1)
    unit = np.divide(diff[:, :2], dist[:, None], out=np.zeros((len(anchors), 2)), where=dist[:, None] > 0)
    keep = np.arange(len(anchors)) != ref
    return -(unit[keep] - unit[ref])


def _geometry_rank(anchors, ref):
    delta = (anchors - anchors[ref])[:, :2]
    return np.linalg.matrix_rank(delta, tol=1e-9 * max(1.0, np.abs(delta).max()))


def ls_position(tdoas, fixed_z):
    """Linearised range-difference solve for (x, y, range-to-reference).

    Squaring ``|p - a_i| = r_i + R0`` and subtracting the reference equation
    gives ``2 (a_i - a_0) . p + 2 r_i R0 = |a_i|^2 - |a_0|^2 - r_i^2``, linear in
    ``(x, y, R0)`` once the fixed height term is moved to the right.
    """
    if tdoas.n_non_reference < 3:
        raise InsufficientMeasurementsError(
            f"linear TDoA solve needs >= 3 non-reference TRPs, got {tdoas.n_non_reference}"
        )
    anchors, rd, ref = tdoas.arrays()
    keep = np.arange(len(anchors)) != ref
    a0 = anchors[ref]
    ai = anchors[keep]
    ri = rd[keep]
    A = np.column_stack([2 * (ai[:, 0] - a0[0]), 2 * (ai[:, 1] - a0[1]), 2 * ri])
    b = (ai**2).sum(axis=1) - (a0**2).sum() - ri**2 - 2 * (ai[:, 2] - a0[2]) * fixed_z
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    ambiguous = _geometry_rank(anchors, ref) < 2
    xy = sol[:2]
    res = tdoa_residuals(xy, anchors, rd, fixed_z, ref)
    return PositionEstimate(
        Position3D(xy[0], xy[1], fixed_z),
        residual_norm_s=float(np.linalg.norm(res)) / SPEED_OF_LIGHT,
        iterations=0,
        converged=True,
        ambiguity_flag=bool(ambiguous),
    )


# --------------------------------------------------------------------------
# damped Gauss-Newton
# --------------------------------------------------------------------------
def gauss_newton(residual_fn, jacobian_fn, x0, tol=DEFAULT_TOL_M, max_iter=DEFAULT_MAX_ITER):
    """Levenberg-damped Gauss-Newton on ``sum(residual_fn(x)**2)``.

    Damping starts at 1e-3, is multiplied by 10 after a rejected step and
    divided by 10 after an accepted one.  Only cost-reducing steps are
    accepted, so the returned cost never exceeds the starting cost.

    Returns ``(x, residual_norm, iterations, converged)``.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    r = residual_fn(x)
    cost = float(r @ r)
    lam = LAMBDA_INIT
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        J = jacobian_fn(x)
        g = J.T @ r
        H = J.T @ J
        try:
            step = np.linalg.solve(H + lam * np.eye(len(x)), -g)
        except np.linalg.LinAlgError:
            step = -g / lam
        if not np.all(np.isfinite(step)):
            break
        if np.linalg.norm(step) < tol:
            converged = True
            break
        trial = x + step
        r_trial = residual_fn(trial)
        cost_trial = float(r_trial @ r_trial)
        if cost_trial < cost:
            x, r, cost = trial, r_trial, cost_trial
            lam = max(lam / LAMBDA_DOWN, 1e-15)
        else:
            lam *= LAMBDA_UP
            if lam > LAMBDA_MAX:
                break
    return x, float(np.sqrt(cost)), it, converged


def nlls_refine(tdoas, init, fixed_z, tol=DEFAULT_TOL_M, max_iter=DEFAULT_MAX_ITER):
    anchors, rd, ref = tdoas.arrays()
    x0 = np.array([init.position.x, init.position.y])
    if not np.all(np.isfinite(x0)):
        raise LocalizationError("initial position is not finite")
    xy, res_m, it, ok = gauss_newton(
        lambda v: tdoa_residuals(v, anchors, rd, fixed_z, ref),
        lambda v: tdoa_jacobian(v, anchors, fixed_z, ref),
        x0,
        tol=tol,
        max_iter=max_iter,
    )
    return PositionEstimate(
        Position3D(xy[0], xy[1], fixed_z),
        residual_norm_s=res_m / SPEED_OF_LIGHT,
        iterations=it,
        converged=ok,
        ambiguity_flag=init.ambiguity_flag or _geometry_rank(anchors, ref) < 2,
    )


def locate(tdoas, fixed_z, tol=DEFAULT_TOL_M, max_iter=DEFAULT_MAX_ITER):
    """Coarse linear solve followed by nonlinear refinement."""
    return nlls_refine(tdoas, ls_position(tdoas, fixed_z), fixed_z, tol, max_iter)


def grid_search_position(tdoas, fixed_z, x_range, y_range, step_m):
    """Exhaustive search of the TDoA cost over a rectangular grid.

    Returns the best cell centre and the full cost surface.
    """
    anchors, rd, ref = tdoas.arrays()
    xs = np.arange(x_range[0], x_range[1] + step_m / 2, step_m)
    ys = np.arange(y_range[0], y_range[1] + step_m / 2, step_m)
    cost = kernels.tdoa_grid_cost(xs, ys, float(fixed_z), np.ascontiguousarray(anchors), ref, rd)
    iy, ix = np.unravel_index(np.argmin(cost), cost.shape)
    return Position3D(xs[ix], ys[iy], fixed_z), cost


# --------------------------------------------------------------------------
# ground-truth geometry
# --------------------------------------------------------------------------
def distance_residuals(xy, anchors, distances, z):
    p = np.array([xy[0], xy[1], z])
    return np.linalg.norm(anchors - p, axis=1) - distances


def distance_jacobian(xy, anchors, z):
    p = np.array([xy[0], xy[1], z])
    diff = p - anchors
    dist = np.linalg.norm(diff, axis=1)
    return np.divide(diff[:, :2], dist[:, None], out=np.zeros((len(anchors), 2)), where=dist[:, None] > 0)


def _trilateration_start(anchors, dists, z):
    """Closed-form (x, y) from differencing the squared range equations, or None."""
    if len(anchors) < 3 or _geometry_rank(anchors, 0) < 2:
        return None
    a0, ai = anchors[0], anchors[1:]
    A = 2 * (ai[:, :2] - a0[:2])
    b = (
        (ai**2).sum(axis=1) - (a0**2).sum()
        - dists[1:] ** 2 + dists[0] ** 2
        - 2 * (ai[:, 2] - a0[2]) * z
    )
    xy, *_ = np.linalg.lstsq(A, b, rcond=None)
    return xy


def solve_ground_truth(problem, tol=DEFAULT_TOL_M, max_iter=DEFAULT_MAX_ITER):
    """Find (x, y) at the fixed height whose distances to the anchors match.

    Starts from the supplied guess and, if that lands in a local minimum,
    again from the closed-form trilateration point.
    """
    anchors = np.array([a.as_array() for a in problem.anchors])
    dists = np.asarray(problem.distances_m, dtype=np.float64)
    z = problem.initial_guess.z
    starts = [np.array([problem.initial_guess.x, problem.initial_guess.y])]

    # a zero distance pins the point onto that anchor
    for a, d in zip(anchors, dists):
        if d == 0.0:
            starts = [a[:2].copy()]
            break
    closed = _trilateration_start(anchors, dists, z)
    if closed is not None and np.all(np.isfinite(closed)):
        starts.append(closed)

    best = None
    for x0 in starts:
        xy, _, it, ok = gauss_newton(
            lambda v: distance_residuals(v, anchors, dists, z),
            lambda v: distance_jacobian(v, anchors, z),
            x0,
            tol=tol * 1e-3,
            max_iter=max_iter,
        )
        worst = float(np.max(np.abs(distance_residuals(xy, anchors, dists, z))))
        if worst <= tol:
            return Position3D(xy[0], xy[1], z)
        if best is None or worst < best[1]:
            best = (xy, worst, it, ok)

    _, worst, it, ok = best
    if ok:
        raise InconsistentDistancesError(
            f"distances inconsistent: best fit leaves residual {worst:.3e} m > {tol:.1e} m"
        )
    raise NonConvergenceError(f"no convergence after {it} iterations (residual {worst:.3e} m)")
