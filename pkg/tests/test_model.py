"""Domain model: projection, lane geometry, eligibility, structural checks."""

import math

import numpy as np
import pytest

from conftest import (
    N,
    build_scenario,
    cruising_av,
    make_lane,
    make_track,
    mirror_scenario,
    polyline_min_distance_brute,
)
from cutin_miner.model import (
    DegenerateCenterlineError,
    InvalidStateError,
    LaneGeometry,
    Scenario,
    ScenarioError,
    lateral_offset,
    lateral_offset_series,
    lateral_velocity_series,
    nearest_lane_ids,
    project_frame,
    project_points,
    rigid_transform,
    scenario_eligible,
)


# -- structural invariants ----------------------------------------------------


def test_frame_rate_must_be_ten():
    with pytest.raises(ScenarioError, match="frame_rate"):
        Scenario(scenario_id="s", frame_rate=25.0, tracks=(cruising_av(),),
                 lanes=(), av_track_id="av")


def test_av_track_must_exist():
    with pytest.raises(ScenarioError, match="matches no track"):
        build_scenario([cruising_av(track_id="veh")], av="av")


def test_duplicate_av_designation_rejected():
    with pytest.raises(ScenarioError, match="duplicate"):
        build_scenario([cruising_av(), cruising_av(y=3.6)], av="av")


def test_mismatched_frame_counts_rejected():
    short = make_track("veh", 0.0, 0.0, n=45)
    with pytest.raises(ScenarioError, match="frame count"):
        build_scenario([cruising_av(), short])


def test_invalid_frames_may_carry_nan():
    valid = np.ones(N, dtype=bool)
    valid[10:20] = False
    x = np.zeros(N)
    x[10:20] = np.nan
    track = make_track("veh", x, 0.0, valid=valid)
    assert track.state(10).valid is False
    with pytest.raises(InvalidStateError):
        track.require_valid(10)


def test_nonpositive_extent_on_valid_frame_rejected():
    with pytest.raises(ScenarioError, match="extent"):
        make_track("veh", 0.0, 0.0, length=0.0)


def test_degenerate_centerline_rejected():
    with pytest.raises(DegenerateCenterlineError):
        LaneGeometry("L", np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]))


# -- eligibility ----------------------------------------------------------------


def test_eligible_constant_fast():
    assert scenario_eligible(build_scenario([cruising_av(speed=6.0)]))


def test_ineligible_constant_slow():
    assert not scenario_eligible(build_scenario([cruising_av(speed=4.9)]))


def test_run_of_49_is_not_enough():
    # 6 m/s on frames 0..48 (run of 49), then 3 m/s: direct count says 49 < 50
    vx = np.full(N, 3.0)
    vx[:49] = 6.0
    assert not scenario_eligible(build_scenario([make_track("av", 0.0, 0.0, vx=vx)]))
    vx[:50] = 6.0
    assert scenario_eligible(build_scenario([make_track("av", 0.0, 0.0, vx=vx)]))


def test_invalid_frames_break_the_run():
    valid = np.ones(N, dtype=bool)
    valid[45] = False
    av = make_track("av", 0.0, 0.0, vx=8.0, valid=valid)
    assert not scenario_eligible(build_scenario([av]))


def test_eligibility_monotone_in_speed(rng):
    for _ in range(20):
        vx = rng.uniform(3.0, 7.0, N)
        base = scenario_eligible(build_scenario([make_track("av", 0.0, 0.0, vx=vx)]))
        faster = scenario_eligible(
            build_scenario([make_track("av", 0.0, 0.0, vx=vx + rng.uniform(0, 3))]))
        assert not (base and not faster)


# -- projection -----------------------------------------------------------------


def test_reference_agent_projects_to_origin():
    av = cruising_av(speed=8.0)
    proj = project_frame(build_scenario([av]), "av", 30)
    assert np.allclose(proj["av"][30], [0.0, 0.0], atol=1e-12)


def test_agent_ahead_along_heading():
    av = make_track("av", 5.0, 2.0, vx=8.0, heading=0.7)
    other = make_track("veh", 5.0 + 10.0 * math.cos(0.7), 2.0 + 10.0 * math.sin(0.7),
                       vx=8.0)
    proj = project_frame(build_scenario([av, other]), "av", 0)
    assert np.allclose(proj["veh"][0], [10.0, 0.0], atol=1e-9)


def test_left_is_positive_lateral():
    av = make_track("av", 0.0, 0.0, vx=8.0, heading=0.0)
    left = make_track("veh", 0.0, 3.0, vx=8.0)
    proj = project_frame(build_scenario([av, left]), "av", 0)
    assert proj["veh"][0][1] == pytest.approx(3.0)


def test_projection_is_isometry(rng):
    # pairwise distances preserved to 1e-9 under the rigid map
    av = make_track("av", rng.normal(0, 50, N), rng.normal(0, 50, N),
                    heading=rng.uniform(-3, 3, N), vx=8.0)
    veh = make_track("veh", rng.normal(0, 50, N), rng.normal(0, 50, N), vx=5.0)
    s = build_scenario([av, veh])
    proj = project_frame(s, "av", 17)
    for f in [0, 17, 44, 90]:
        d_map = math.hypot(av.x[f] - veh.x[f], av.y[f] - veh.y[f])
        d_proj = float(np.linalg.norm(proj["av"][f] - proj["veh"][f]))
        assert d_proj == pytest.approx(d_map, abs=1e-9)


def test_projection_requires_valid_reference():
    valid = np.ones(N, dtype=bool)
    valid[3] = False
    av = make_track("av", 0.0, 0.0, vx=8.0, valid=valid)
    with pytest.raises(InvalidStateError):
        project_frame(build_scenario([av]), "av", 3)


def test_project_points_roundtrip(rng):
    pts = rng.normal(0, 20, (40, 2))
    origin = np.array([3.0, -2.0])
    proj = project_points(pts, origin, 1.1)
    d0 = np.linalg.norm(pts - origin, axis=1)
    d1 = np.linalg.norm(proj, axis=1)
    assert np.allclose(d0, d1, atol=1e-9)


# -- lateral offsets --------------------------------------------------------------


def test_offset_zero_on_centerline():
    lane = make_lane("L", 0.0)
    track = make_track("veh", 10.0, 0.0, vx=5.0)
    assert lateral_offset(track, lane, 0) == pytest.approx(0.0)


def test_offset_left_positive():
    lane = make_lane("L", 0.0)
    track = make_track("veh", 10.0, 1.5, vx=5.0)
    assert lateral_offset(track, lane, 0) == pytest.approx(1.5)
    track = make_track("veh", 10.0, -2.0, vx=5.0)
    assert lateral_offset(track, lane, 0) == pytest.approx(-2.0)


def test_offset_sign_flips_under_mirror():
    lane = make_lane("L", 0.0)
    s = build_scenario([make_track("av", 10.0, 1.2, vx=6.0)], lanes=[lane])
    m = mirror_scenario(s)
    a = lateral_offset(s.av_track, s.lanes[0], 5)
    b = lateral_offset(m.av_track, m.lanes[0], 5)
    assert a == pytest.approx(-b)


def test_offset_near_corner_matches_bruteforce_and_is_continuous():
    # 90-degree corner; magnitude must equal the brute-force minimum over
    # segments and move continuously while the agent drives past the corner
    corner = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]])
    lane = LaneGeometry("L", corner)
    xs = np.linspace(6.0, 9.5, N)
    ys = np.linspace(-1.0, 2.5, N)
    track = make_track("veh", xs, ys, vx=1.0)
    offs = lateral_offset_series(track, lane)
    for f in range(0, N, 7):
        brute = polyline_min_distance_brute([xs[f], ys[f]], corner)
        assert abs(offs[f]) == pytest.approx(brute, abs=1e-9)
    step = np.abs(np.diff(offs))
    motion = np.hypot(np.diff(xs), np.diff(ys))
    assert (step <= motion + 1e-9).all()


def test_offset_extrapolates_past_the_ends():
    lane = LaneGeometry("L", np.array([[0.0, 0.0], [10.0, 0.0]]))
    track = make_track("veh", -5.0, 2.0, vx=1.0)
    # beyond the start: still the perpendicular offset, not the vertex distance
    assert lateral_offset(track, lane, 0) == pytest.approx(2.0)


def test_lateral_velocity_uses_velocity_vector():
    lane = make_lane("L", 0.0)
    track = make_track("veh", 0.0, 1.0, vx=5.0, vy=-0.7)
    lv = lateral_velocity_series(track, lane)
    assert lv[0] == pytest.approx(-0.7)


def test_nearest_lane_association_with_tie_break():
    lanes = (make_lane("L2", 3.6), make_lane("L1", 0.0))
    track = make_track("veh", 0.0, 1.8, vx=5.0)  # exactly between centers
    assoc = nearest_lane_ids(track, lanes)
    assert assoc[0] == "L1"  # lexicographic tie-break


# -- rigid transforms -------------------------------------------------------------


def test_rigid_transform_preserves_offsets(rng):
    lane = make_lane("L", 0.0)
    track = make_track("av", np.linspace(0, 50, N), 1.3, vx=6.0)
    s = build_scenario([track], lanes=[lane])
    s2 = rigid_transform(s, angle=0.83, tx=120.0, ty=-40.0)
    o1 = lateral_offset_series(s.av_track, s.lanes[0])
    o2 = lateral_offset_series(s2.av_track, s2.lanes[0])
    assert np.allclose(o1, o2, atol=1e-9)
    assert np.allclose(s.av_track.speed, s2.av_track.speed, atol=1e-9)
