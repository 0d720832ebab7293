"""Detector: entry-frame scan, target classification, the eight criteria,
dedup/ordering, and the planted-template falsification suite."""

import numpy as np
import pytest

from conftest import N, build_scenario, cruising_av, make_lane, make_track, mirror_scenario
from cutin_miner.detector import (
    CutInEvent,
    NoCrossingError,
    classify_target,
    detect_cutins,
    evaluate_criteria,
    find_entry_frame,
    shared_maneuver_count,
)
from cutin_miner.synth import (
    NEGATIVE_TEMPLATES,
    PlantSpec,
    plant_cutin,
    plant_negative,
    replay_twin,
)


def merge_profile(entry=40, duration_frames=16, start=3.6, outside=1.81):
    """Piecewise-linear |offset| profile crossing between entry-1 and entry."""
    y = np.full(N, start)
    y[24:entry] = np.linspace(start, outside, entry - 24)
    end = entry + duration_frames
    y[entry - 1:end + 1] = np.linspace(outside, 0.0, duration_frames + 2)
    y[end:] = 0.0
    return y


def vy_of(y):
    return np.diff(y, append=y[-1]) / 0.1


# -- find_entry_frame ---------------------------------------------------------


def test_entry_is_first_frame_strictly_inside():
    offs = np.full(N, 2.1)
    offs[1], offs[2:] = 1.9, 1.7
    track = make_track("c", 0.0, offs, vx=5.0)
    lane = make_lane("L", 0.0)  # half-width 1.8
    assert find_entry_frame(track, lane, (0, 10)) == 2


def test_exactly_half_width_is_still_outside():
    offs = np.full(N, 1.75)
    offs[0], offs[1] = 1.9, 1.8
    track = make_track("c", 0.0, offs, vx=5.0)
    lane = make_lane("L", 0.0)
    assert find_entry_frame(track, lane, (0, 10)) == 2


def test_already_inside_raises():
    track = make_track("c", 0.0, 0.4, vx=5.0)
    lane = make_lane("L", 0.0)
    with pytest.raises(NoCrossingError, match="no crossing"):
        find_entry_frame(track, lane, (0, 90))


def test_crossing_skips_invalid_frames():
    offs = np.full(N, 1.0)
    offs[:5] = 2.0
    valid = np.ones(N, dtype=bool)
    valid[5] = False  # the first inside frame is occluded
    track = make_track("c", 0.0, offs, vx=5.0, valid=valid)
    lane = make_lane("L", 0.0)
    assert find_entry_frame(track, lane, (0, 90)) == 6


# -- classify_target ------------------------------------------------------------


def _classification_scenario(distance):
    av = cruising_av(speed=10.0)
    other = make_track("veh", av.x + distance, 0.0, vx=10.0)
    return build_scenario([av, other], lanes=[make_lane("L1", 0.0)])


def test_av_target_is_av():
    s = _classification_scenario(30.0)
    assert classify_target(s, "av", 10) == "AV"


def test_vehicle_inside_radius_is_hdv():
    assert classify_target(_classification_scenario(74.9), "veh", 10) == "HDV"
    assert classify_target(_classification_scenario(75.0), "veh", 10) == "HDV"


def test_vehicle_outside_radius_is_ineligible():
    assert classify_target(_classification_scenario(80.0), "veh", 10) is None


def test_pedestrian_is_ineligible():
    av = cruising_av(speed=10.0)
    ped = make_track("ped", av.x + 5.0, 0.0, vx=1.0, agent_type="pedestrian",
                     length=0.5, width=0.5)
    s = build_scenario([av, ped], lanes=[make_lane("L1", 0.0)])
    assert classify_target(s, "ped", 10) is None


# -- detection on planted scenarios ----------------------------------------------


def test_planted_av_cutin_detected():
    spec = PlantSpec(target_kind="AV", gap_entry=7.6, cutter_speed=12.0,
                     target_speed=11.0, lc_duration=2.0, side="left",
                     entry_time=4.0)
    scenario, label = plant_cutin(spec, seed=1, scenario_id="p")
    detections = detect_cutins(scenario)
    assert len(detections) == 1
    ev, verdict = detections[0]
    assert verdict.all_pass
    exp = label["expected_event"]
    assert ev.target_kind == "AV"
    assert ev.cutter_id == exp["cutter_id"]
    assert ev.entry_frame == exp["entry_frame"]
    assert ev.completion_frame == exp["completion_frame"]
    assert ev.side == "left"
    assert ev.lc_duration == pytest.approx(exp["lc_duration_s"])


def test_planted_hdv_cutin_detected():
    spec = PlantSpec(target_kind="HDV", gap_entry=9.5, cutter_speed=11.0,
                     target_speed=10.0, lc_duration=1.5, side="right",
                     entry_time=3.0)
    scenario, label = plant_cutin(spec, seed=2, scenario_id="p")
    detections = detect_cutins(scenario)
    assert len(detections) == 1
    ev = detections[0].event
    assert ev.target_kind == "HDV"
    assert ev.target_id == "target"
    assert ev.side == "right"
    assert ev.entry_frame == label["expected_event"]["entry_frame"]


def test_lane_keepers_produce_no_events():
    av = cruising_av(speed=10.0)
    veh = make_track("veh", av.x + 15.0, 3.6, vx=10.0)
    s = build_scenario([av, veh], lanes=[make_lane("L1", 0.0), make_lane("L2", 3.6)])
    assert detect_cutins(s) == []


def test_out_of_range_duration_rejected():
    scenario, label = plant_negative("c4", np.random.default_rng(0), "neg")
    assert detect_cutins(scenario) == []


def test_ineligible_scenario_yields_nothing():
    spec = PlantSpec(target_kind="AV", target_speed=4.0, cutter_speed=10.0,
                     gap_entry=8.0, lc_duration=1.5, entry_time=4.0)
    scenario, _ = plant_cutin(spec, seed=3, scenario_id="slow")
    assert detect_cutins(scenario) == []


@pytest.mark.parametrize("template", NEGATIVE_TEMPLATES)
def test_each_negative_fails_exactly_its_criterion(template):
    rng = np.random.default_rng(5)
    scenario, _ = plant_negative(template, rng, f"neg-{template}")
    detections, rejects = detect_cutins(scenario, diagnostics=True)
    assert detections == []
    relevant = [r for r in rejects if r.cutter_id == "cutter"
                and r.target_id in ("av", "target")]
    assert relevant, "expected a diagnostic row for the planted pair"
    for r in relevant:
        assert r.verdict.failed == (template,)


def test_twin_passes_all_criteria_via_public_op():
    scenario, _ = replay_twin()
    verdict = evaluate_criteria(scenario, "cutter", "av", (0, 90),
                                target_lane_id="L1")
    assert verdict.all_pass


def test_window_out_of_bounds_rejected():
    scenario, _ = replay_twin()
    with pytest.raises(ValueError, match="bounds"):
        evaluate_criteria(scenario, "cutter", "av", (0, 200))


# -- multi-target and dedup -------------------------------------------------------


def _two_target_scenario():
    t = np.arange(N) / 10.0
    y = merge_profile(entry=40, duration_frames=16)
    cutter = make_track("cutter", 10.0 * t + 13.0, y, vx=10.0, vy=vy_of(y))
    av = make_track("av", 10.0 * t, 0.0, vx=10.0, length=5.2, width=2.1)
    hdv = make_track("veh", 10.0 * t - 10.0, 0.0, vx=10.0, length=5.2, width=2.1)
    return build_scenario([cutter, av, hdv],
                          lanes=[make_lane("L1", 0.0), make_lane("L2", 3.6)])


def test_one_maneuver_can_hit_both_populations():
    s = _two_target_scenario()
    detections = detect_cutins(s)
    kinds = sorted(d.event.target_kind for d in detections)
    assert kinds == ["AV", "HDV"]
    entries = {d.event.entry_frame for d in detections}
    assert entries == {40}
    assert shared_maneuver_count(detections) == 1


def test_events_sorted_and_unique_per_pair():
    s = _two_target_scenario()
    detections = detect_cutins(s)
    keys = [(d.event.entry_frame, d.event.cutter_id, d.event.target_id)
            for d in detections]
    assert keys == sorted(keys)
    assert len({(d.event.cutter_id, d.event.target_id) for d in detections}) \
        == len(detections)


# -- invariants ------------------------------------------------------------------


def test_determinism_across_runs():
    spec = PlantSpec(target_kind="AV", gap_entry=6.0, cutter_speed=13.0,
                     target_speed=11.5, lc_duration=2.5, entry_time=3.5)
    s, _ = plant_cutin(spec, seed=11, scenario_id="det")
    a = detect_cutins(s)
    b = detect_cutins(s)
    assert a == b


def test_mirror_swaps_side_only():
    spec = PlantSpec(target_kind="AV", gap_entry=7.0, cutter_speed=12.0,
                     target_speed=10.0, lc_duration=2.0, side="left",
                     entry_time=4.0)
    s, _ = plant_cutin(spec, seed=4, scenario_id="m")
    sm = mirror_scenario(s)
    (d1,), (d2,) = detect_cutins(s), detect_cutins(sm)
    assert d1.event.side == "left" and d2.event.side == "right"
    for field in ("cutter_id", "target_id", "target_kind", "onset_frame",
                  "entry_frame", "completion_frame", "lc_duration"):
        assert getattr(d1.event, field) == getattr(d2.event, field)


def test_event_frame_order_enforced():
    with pytest.raises(ValueError, match="out of order"):
        CutInEvent(scenario_id="s", cutter_id="c", target_id="t",
                   target_kind="AV", onset_frame=10, entry_frame=10,
                   completion_frame=12, side="left", lc_duration=0.2)


def test_diagnostics_for_lane_keeper_fail_only_c2():
    av = cruising_av(speed=10.0)
    veh = make_track("veh", av.x + 15.0, 3.6, vx=10.0)
    s = build_scenario([av, veh], lanes=[make_lane("L1", 0.0), make_lane("L2", 3.6)])
    detections, rejects = detect_cutins(s, diagnostics=True)
    assert detections == []
    rows = [r for r in rejects if r.cutter_id == "veh"]
    assert rows and all(r.verdict.failed == ("c2",) for r in rows)
