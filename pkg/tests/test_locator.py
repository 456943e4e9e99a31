import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from ultdoa.channel import Position3D
from ultdoa.estimator import ToaMeasurement
from ultdoa.locator import (
    GroundTruthProblem,
    InconsistentDistancesError,
    InsufficientMeasurementsError,
    LocalizationError,
    PositionEstimate,
    TdoaSet,
    distance_jacobian,
    distance_residuals,
    grid_search_position,
    locate,
    ls_position,
    nlls_refine,
    select_reference,
    solve_ground_truth,
    tdoa_jacobian,
    tdoa_residuals,
    toa_to_tdoa,
)

SQUARE = [(0, 0, 2), (20, 0, 2), (0, 20, 2), (20, 20, 2)]
Z = 1.3


def meas(trp_id, toa, rsrp=0.0):
    return ToaMeasurement(trp_id, toa, 0, 0, rsrp)


def tdoa_set(anchors, ue, ref=0, offset=0.0):
    d = np.linalg.norm(np.asarray(anchors, float) - np.asarray(ue, float), axis=1)
    ms = [meas(i, di / oracles.C + offset) for i, di in enumerate(d)]
    pos = {i: Position3D(*a) for i, a in enumerate(anchors)}
    return toa_to_tdoa(ms, ref, pos)


def start_at(x, y):
    return PositionEstimate(Position3D(x, y, Z), float("inf"))


# -- reference / TDoA ----------------------------------------------------------
def test_select_reference():
    assert select_reference([meas(1, 0, -30), meas(2, 0, -20), meas(3, 0, -25)]) == 2
    assert select_reference([meas(5, 0, -20), meas(3, 0, -20), meas(4, 0, -20)]) == 3
    assert select_reference([meas(9, 0)]) == 9
    with pytest.raises(LocalizationError):
        select_reference([])


def test_toa_to_tdoa_values():
    pos = {i: Position3D(i, 0, 0) for i in range(3)}
    t = 1e-7
    assert all(d == 0 for _, d in toa_to_tdoa([meas(i, t) for i in range(3)], 0, pos).entries)
    s = toa_to_tdoa([meas(0, 100e-9), meas(1, 150e-9), meas(2, 120e-9)], 0, pos)
    np.testing.assert_allclose([d for _, d in s.entries], [0, 50e-9, 20e-9], atol=1e-20)
    with pytest.raises(LocalizationError):
        toa_to_tdoa([meas(0, t)], 5, pos)


@given(st.floats(-1e-6, 1e-6))
def test_common_offset_cancels(c):
    ue = (7.0, 3.0, Z)
    a = tdoa_set(SQUARE, ue)
    b = tdoa_set(SQUARE, ue, offset=c)
    np.testing.assert_allclose([d for _, d in a.entries], [d for _, d in b.entries], atol=1e-15)
    pa, pb = locate(a, Z).position, locate(b, Z).position
    assert abs(pa.x - pb.x) < 1e-9 and abs(pa.y - pb.y) < 1e-9


def test_tdoa_set_invariants():
    pos = {0: Position3D(0, 0, 0), 1: Position3D(1, 0, 0)}
    with pytest.raises(LocalizationError):
        TdoaSet(0, ((0, 1e-9), (1, 0.0)), pos)
    with pytest.raises(LocalizationError):
        TdoaSet(0, ((0, 0.0), (2, 0.0)), pos)
    with pytest.raises(LocalizationError):
        TdoaSet(0, ((0, 0.0), (0, 0.0)), pos)


# -- linear LS --------------------------------------------------------------------
def test_ls_symmetric_center():
    est = ls_position(tdoa_set(SQUARE, (10, 10, Z)), Z)
    assert est.position.x == pytest.approx(10, abs=1e-9)
    assert est.position.y == pytest.approx(10, abs=1e-9)
    assert not est.ambiguity_flag


def test_ls_exact_point():
    est = ls_position(tdoa_set(SQUARE, (5, 5, Z)), Z)
    assert np.hypot(est.position.x - 5, est.position.y - 5) < 1e-6


def test_ls_collinear_flags_ambiguity():
    anchors = [p for _, p in oracles.PAPER_LOG_TRPS]
    est = ls_position(tdoa_set(anchors, (-18, 6, Z)), Z)
    assert est.ambiguity_flag


def test_ls_needs_three_non_reference():
    with pytest.raises(InsufficientMeasurementsError):
        ls_position(tdoa_set(SQUARE[:3], (5, 5, Z)), Z)


# -- NLLS -------------------------------------------------------------------------
def test_nlls_stationary_at_truth():
    s = tdoa_set(SQUARE, (5, 8, Z))
    est = nlls_refine(s, start_at(5, 8), Z)
    assert (est.position.x, est.position.y) == (5, 8)
    assert est.residual_norm_s == 0.0 or est.residual_norm_s < 1e-20


@pytest.mark.parametrize("dx,dy", [(3, 0), (0, -3), (2.1, 2.1), (-2.1, 2.1)])
def test_nlls_recovers_from_offset(dx, dy):
    s = tdoa_set(SQUARE, (5, 8, Z))
    est = nlls_refine(s, start_at(5 + dx, 8 + dy), Z)
    assert est.converged
    assert np.hypot(est.position.x - 5, est.position.y - 8) < 1e-6


def test_nlls_three_anchors_from_centroid():
    s = tdoa_set(SQUARE[:3], (4, 6, Z))
    est = nlls_refine(s, start_at(20 / 3, 20 / 3), Z)
    assert np.hypot(est.position.x - 4, est.position.y - 6) < 1e-6


@given(st.floats(-5, 25), st.floats(-5, 25), st.floats(-6, 6), st.floats(-6, 6), st.floats(0, 3e-9))
def test_nlls_never_worse_than_start(x, y, dx, dy, noise):
    s = tdoa_set(SQUARE, (x, y, Z))
    noisy = TdoaSet(s.reference_trp, tuple((t, d + (noise if t == 1 else 0)) for t, d in s.entries), s.trp_positions)
    anchors, rd, ref = noisy.arrays()
    x0 = np.array([x + dx, y + dy])
    before = np.linalg.norm(tdoa_residuals(x0, anchors, rd, Z, ref))
    est = nlls_refine(noisy, start_at(*x0), Z)
    after = np.linalg.norm(tdoa_residuals([est.position.x, est.position.y], anchors, rd, Z, ref))
    assert after <= before + 1e-12
    assert est.residual_norm_s >= 0


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_tdoa_jacobian_matches_finite_differences(x, y):
    anchors = np.array(SQUARE, float)
    rd = np.zeros(4)
    J = tdoa_jacobian([x, y], anchors, Z, 0)
    fd = oracles.central_difference(lambda v: tdoa_residuals(v, anchors, rd, Z, 0), [x, y])
    assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


def test_mirror_symmetry_of_collinear_residual():
    anchors = np.array([p for _, p in oracles.PAPER_LOG_TRPS], float)
    rd = np.array([0, 3.0, -2.0, 1.0])
    for x, y in [(-10, 4), (3, 17), (-30, 0.5)]:
        np.testing.assert_allclose(
            tdoa_residuals([x, y], anchors, rd, Z, 0), tdoa_residuals([x, -y], anchors, rd, Z, 0), atol=1e-12
        )
    s = tdoa_set(anchors, (-18, 6, Z))
    assert nlls_refine(s, start_at(-18, 5), Z).ambiguity_flag


@pytest.mark.parametrize("ue", [(3, 4), (7, 2), (1, 8), (6, 6)])
def test_nlls_agrees_with_exhaustive_grid(ue):
    anchors = [(0, 0, 2), (9, 0, 2), (0, 9, 2), (9, 9, 2), (4, 0, 3)]
    s = tdoa_set(anchors, (*ue, Z))
    a, rd, ref = s.arrays()
    xs = np.round(np.arange(0, 9.0001, 0.01), 2)
    ys = np.round(np.arange(0, 9.0001, 0.01), 2)
    cost = oracles.grid_search(a, rd, Z, ref, xs, ys)
    iy, ix = np.unravel_index(np.argmin(cost), cost.shape)
    est = locate(s, Z).position
    assert abs(est.x - xs[ix]) <= 0.01 + 1e-9 and abs(est.y - ys[iy]) <= 0.01 + 1e-9
    # the library's accelerated grid search finds the same cell
    best, _ = grid_search_position(s, Z, (0, 9), (0, 9), 0.01)
    assert abs(best.x - xs[ix]) < 1e-9 and abs(best.y - ys[iy]) < 1e-9


# -- ground truth ---------------------------------------------------------------------
def test_ground_truth_single_anchor_zero_distance():
    p = solve_ground_truth(GroundTruthProblem((Position3D(4, -2, Z),), (0.0,), Position3D(0, 0, Z)))
    assert (p.x, p.y) == (4, -2)


def test_ground_truth_reference_antenna():
    anchors = [Position3D(0, 0, 2.2), Position3D(-9, 0, 2.2), Position3D(-9, 12, 2.5), Position3D(4, 15, 2.0)]
    truth = np.array([3, 4, 1.3])
    d = tuple(float(np.linalg.norm(a.as_array() - truth)) for a in anchors)
    p = solve_ground_truth(GroundTruthProblem(tuple(anchors), d, Position3D(0, 5, 1.3)))
    assert abs(p.x - 3) < 1e-9 and abs(p.y - 4) < 1e-9


def test_ground_truth_inflated_distances_rejected():
    anchors = [Position3D(0, 0, 2.2), Position3D(-9, 0, 2.2), Position3D(-9, 12, 2.5)]
    truth = np.array([3, 4, 1.3])
    d = tuple(float(np.linalg.norm(a.as_array() - truth)) + 10 for a in anchors)
    with pytest.raises(InconsistentDistancesError):
        solve_ground_truth(GroundTruthProblem(tuple(anchors), d, Position3D(0, 5, 1.3)))


def test_distance_jacobian_matches_finite_differences():
    anchors = np.array([[0, 0, 2.2], [-9, 0, 2.2], [5, 7, 3]])
    d = np.array([5.0, 6.0, 7.0])
    for x in ([1, 2], [-4, 9], [10, -3]):
        J = distance_jacobian(x, anchors, Z)
        fd = oracles.central_difference(lambda v: distance_residuals(v, anchors, d, Z), x)
        np.testing.assert_allclose(J, fd, atol=1e-8)


def test_ground_truth_problem_validation():
    with pytest.raises(ValueError):
        GroundTruthProblem((Position3D(0, 0, 0),), (1.0, 2.0), Position3D(0, 0, 0))
    with pytest.raises(ValueError):
        GroundTruthProblem((Position3D(0, 0, 0),), (-1.0,), Position3D(0, 0, 0))


def test_ground_truth_escapes_centroid_local_minimum():
    # plain Gauss-Newton from the anchor centroid stalls 0.86 m off here
    anchors = (Position3D(0, 0, 2.2), Position3D(-33.293, 22.94, 2.173), Position3D(-4.048, 4.421, 1.98))
    truth = np.array([-7.004, 15.212, 1.3])
    d = tuple(float(np.linalg.norm(a.as_array() - truth)) for a in anchors)
    p = solve_ground_truth(GroundTruthProblem(anchors, d, Position3D(-12.447, 9.12, 1.3)))
    assert abs(p.x - truth[0]) < 1e-9 and abs(p.y - truth[1]) < 1e-9
