"""Eight-criterion cut-in detector.

A surrounding vehicle produces a cut-in event against a target when, over a
lane-residency transition window, all eight criteria hold:

  c1  cutter speed >= 2 m/s throughout the maneuver window
  c2  signed lateral position crosses into the target lane
  c3  cutter front bumper within 25 m (longitudinal) of the target at entry
  c4  lane-change duration within [0.5, 6.0] s
  c5  cutter centroid ahead of the target at completion
  c6  peak lateral speed >= 0.3 m/s during the maneuver
  c7  cutter is not a parked/stationary object
  c8  cutter within 1.5 m of the target's lane center at completion

Targets are the scenario's AV or any other vehicle within 75 m of the AV at
the entry frame. Threshold conventions: ">= X" and "within X" are inclusive;
the lane-boundary crossing (entry) is strict.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import (
    FRAME_RATE_HZ,
    AgentTrack,
    LaneGeometry,
    Scenario,
    lateral_offset_series,
    lateral_velocity_series,
    longitudinal_offsets,
    nearest_lane_ids,
    scenario_eligible,
)

CRITERIA = ("c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8")


class NoCrossingError(ValueError):
    """The cutter never crosses into the target lane within the window."""


@dataclass(frozen=True)
class DetectorParams:
    """All detector thresholds; defaults are the published rule-set values."""

    min_cutter_speed: float = 2.0            # m/s, c1
    max_entry_distance: float = 25.0         # m, c3 (front bumper, longitudinal)
    min_lc_duration: float = 0.5             # s, c4
    max_lc_duration: float = 6.0             # s, c4
    min_peak_lateral_speed: float = 0.3      # m/s, c6
    stationary_max_speed: float = 0.5        # m/s, c7 fallback
    max_completion_center_offset: float = 1.5  # m, c8
    settle_max_offset: float = 0.5           # m, lane-center stabilization
    settle_max_lateral_speed: float = 0.3    # m/s, lane-center stabilization
    hdv_target_radius: float = 75.0          # m, HDV targets must be this close to the AV
    eligibility_min_speed: float = 5.0       # m/s, scenario filter
    eligibility_min_frames: int = 50         # frames, scenario filter

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown detector parameters: {sorted(unknown)}")
        return cls(**d)


DEFAULT_PARAMS = DetectorParams()


@dataclass(frozen=True)
class CriteriaVerdict:
    c1: bool
    c2: bool
    c3: bool
    c4: bool
    c5: bool
    c6: bool
    c7: bool
    c8: bool

    @property
    def all_pass(self) -> bool:
        return all(getattr(self, c) for c in CRITERIA)

    @property
    def failed(self) -> tuple[str, ...]:
        return tuple(c for c in CRITERIA if not getattr(self, c))

    def as_dict(self) -> dict:
        d = {c: getattr(self, c) for c in CRITERIA}
        d["all_pass"] = self.all_pass
        return d


@dataclass(frozen=True)
class CutInEvent:
    scenario_id: str
    cutter_id: str
    target_id: str
    target_kind: str        # "AV" | "HDV"
    onset_frame: int        # last frame fully in the source lane
    entry_frame: int        # first frame past the target-lane boundary
    completion_frame: int   # lane-center stabilization (capped at window end)
    side: str               # "left" | "right", of the target lane
    lc_duration: float      # s, (completion - entry) / frame rate

    def __post_init__(self):
        if not (self.onset_frame < self.entry_frame <= self.completion_frame):
            raise ValueError(
                f"event frames out of order: onset {self.onset_frame}, "
                f"entry {self.entry_frame}, completion {self.completion_frame}"
            )
        if self.target_kind not in ("AV", "HDV"):
            raise ValueError(f"bad target_kind {self.target_kind!r}")
        if self.side not in ("left", "right"):
            raise ValueError(f"bad side {self.side!r}")


class Detection(NamedTuple):
    event: CutInEvent
    verdict: CriteriaVerdict


@dataclass(frozen=True)
class CandidateDiagnostic:
    """One evaluated (cutter, target) candidate, kept in diagnostic mode."""

    cutter_id: str
    target_id: str
    window: tuple[int, int]
    entry_frame: int | None
    completion_frame: int | None
    verdict: CriteriaVerdict


def find_entry_frame(cutter: AgentTrack, target_lane: LaneGeometry,
                     window: tuple[int, int]) -> int:
    """First frame in ``window`` at which the cutter centroid is strictly
    inside the target lane (|offset| < width/2) having been outside
    (|offset| >= width/2) at the previous valid frame."""
    lo, hi = window
    off = np.abs(lateral_offset_series(cutter, target_lane))
    half = target_lane.half_width
    prev = None
    for f in range(lo, hi + 1):
        if not cutter.valid[f]:
            continue
        if prev is not None and off[prev] >= half and off[f] < half:
            return f
        prev = f
    raise NoCrossingError(
        f"track {cutter.track_id!r}: no crossing into lane "
        f"{target_lane.lane_id!r} in frames [{lo}, {hi}]"
    )


def classify_target(scenario: Scenario, target_id: str, entry_frame: int,
                    params: DetectorParams = DEFAULT_PARAMS) -> str | None:
    """"AV" for the designated AV track, "HDV" for any other vehicle within
    the AV radius at the entry frame, None for ineligible targets."""
    if target_id == scenario.av_track_id:
        return "AV"
    target = scenario.track(target_id)
    if target.agent_type != "vehicle":
        return None
    av = scenario.av_track
    if not (target.valid[entry_frame] and av.valid[entry_frame]):
        return None
    dist = float(np.hypot(target.x[entry_frame] - av.x[entry_frame],
                          target.y[entry_frame] - av.y[entry_frame]))
    return "HDV" if dist <= params.hdv_target_radius else None


def _find_completion(offsets: np.ndarray, lat_speed: np.ndarray, valid: np.ndarray,
                     entry: int, window_end: int, params: DetectorParams) -> int:
    """First frame >= entry with |offset| and |lateral speed| both settled;
    capped at the window end when stabilization is never reached."""
    for f in range(entry, window_end + 1):
        if not valid[f]:
            continue
        if (abs(offsets[f]) <= params.settle_max_offset
                and abs(lat_speed[f]) <= params.settle_max_lateral_speed):
            return f
    return window_end


def _find_onset(offsets: np.ndarray, valid: np.ndarray, window_start: int,
                entry: int, clearance: float) -> int:
    """Last frame before entry with the cutter box entirely on the source side
    of the target-lane boundary (|offset| >= half width + half cutter width);
    falls back to the window start."""
    for f in range(entry - 1, window_start - 1, -1):
        if valid[f] and abs(offsets[f]) >= clearance:
            return f
    return window_start


def _window_all_valid(valid: np.ndarray, lo: int, hi: int) -> bool:
    return bool(valid[lo:hi + 1].all())


def _evaluate(scenario: Scenario, cutter: AgentTrack, target: AgentTrack,
              target_lane: LaneGeometry, onset: int, entry: int, completion: int,
              params: DetectorParams) -> CriteriaVerdict:
    """Evaluate all eight criteria for a resolved candidate. The maneuver
    window for c1/c6 is onset..completion; any invalid cutter frame inside it
    fails those criteria (conservative occlusion policy)."""
    offsets = lateral_offset_series(cutter, target_lane)
    lat_speed = lateral_velocity_series(cutter, target_lane)
    speed = cutter.speed

    man_valid = _window_all_valid(cutter.valid, onset, completion)

    c1 = man_valid and bool(speed[onset:completion + 1].min() >= params.min_cutter_speed)
    c2 = True  # a resolved candidate has a crossing by construction

    if cutter.valid[entry] and target.valid[entry]:
        _, front, _ = longitudinal_offsets(scenario, target.track_id,
                                           cutter.track_id, entry)
        target_front = float(target.length[entry]) / 2.0
        c3 = abs(front - target_front) <= params.max_entry_distance
    else:
        c3 = False

    duration = (completion - entry) / FRAME_RATE_HZ
    c4 = params.min_lc_duration <= duration <= params.max_lc_duration

    if cutter.valid[completion] and target.valid[completion]:
        center, _, _ = longitudinal_offsets(scenario, target.track_id,
                                            cutter.track_id, completion)
        c5 = center > 0.0
    else:
        c5 = False

    c6 = man_valid and bool(
        np.abs(lat_speed[onset:completion + 1]).max() >= params.min_peak_lateral_speed)

    v = cutter.valid
    c7 = (cutter.agent_type != "other" and v.any()
          and bool(speed[v].max() >= params.stationary_max_speed))

    c8 = bool(cutter.valid[completion]
              and abs(offsets[completion]) <= params.max_completion_center_offset)

    return CriteriaVerdict(c1, c2, c3, c4, c5, c6, c7, c8)


def _residency_runs(assoc: list[str | None], valid: np.ndarray) -> list[tuple[str, int, int]]:
    """Maximal runs of (lane_id, start_frame, end_frame) over valid frames.
    Invalid frames terminate a run."""
    runs: list[tuple[str, int, int]] = []
    cur: str | None = None
    start = 0
    for f, lane_id in enumerate(assoc):
        here = lane_id if valid[f] else None
        if here != cur:
            if cur is not None:
                runs.append((cur, start, f - 1))
            cur = here
            start = f
    if cur is not None:
        runs.append((cur, start, len(assoc) - 1))
    return runs


def evaluate_criteria(scenario: Scenario, cutter_id: str, target_id: str,
                      window: tuple[int, int], target_lane_id: str | None = None,
                      params: DetectorParams = DEFAULT_PARAMS) -> CriteriaVerdict:
    """Evaluate the rule set for one (cutter, target) pair over a candidate
    window. The target lane defaults to the cutter's associated lane at the
    window end. Raises if the window is outside scenario bounds."""
    lo, hi = window
    if lo < 0 or hi >= scenario.frame_count or lo > hi:
        raise ValueError(f"window {window} outside scenario bounds")
    cutter = scenario.track(cutter_id)
    target = scenario.track(target_id)
    if target_lane_id is None:
        assoc = nearest_lane_ids(cutter, scenario.lanes)
        target_lane_id = next(
            (assoc[f] for f in range(hi, lo - 1, -1) if assoc[f] is not None), None)
        if target_lane_id is None:
            raise ValueError("cutter has no lane association in the window")
    lane = scenario.lane(target_lane_id)

    try:
        entry = find_entry_frame(cutter, lane, window)
    except NoCrossingError:
        return CriteriaVerdict(True, False, True, True, True, True, True, True)

    offsets = lateral_offset_series(cutter, lane)
    lat_speed = lateral_velocity_series(cutter, lane)
    completion = _find_completion(offsets, lat_speed, cutter.valid, entry, hi, params)
    clearance = lane.half_width + float(np.nanmax(cutter.width)) / 2.0
    onset = _find_onset(offsets, cutter.valid, lo, entry, clearance)
    return _evaluate(scenario, cutter, target, lane, onset, entry, completion, params)


def detect_cutins(scenario: Scenario, params: DetectorParams = DEFAULT_PARAMS,
                  diagnostics: bool = False,
                  ) -> list[Detection] | tuple[list[Detection], list[CandidateDiagnostic]]:
    """Extract all qualifying cut-in events from one scenario.

    Returns detections sorted by (entry_frame, cutter, target), one event per
    (cutter, target) pair (earliest qualifying entry wins). With
    ``diagnostics=True`` also returns every evaluated candidate verdict,
    including near-misses and, for cutters that never change lanes, a
    pseudo-verdict failing only c2.
    """
    detections: list[Detection] = []
    rejected: list[CandidateDiagnostic] = []

    if not scenario_eligible(scenario, params.eligibility_min_speed,
                             params.eligibility_min_frames):
        return (detections, rejected) if diagnostics else detections

    av_id = scenario.av_track_id
    # "other"-typed tracks stay in the candidate pool so the stationarity
    # criterion (c7) is what rejects them, visibly, rather than a silent filter.
    cutters = [t for t in scenario.tracks
               if t.track_id != av_id and t.agent_type in ("vehicle", "other")]
    target_pool = [t for t in scenario.tracks if t.agent_type == "vehicle"
                   or t.track_id == av_id]

    assoc_cache: dict[str, list[str | None]] = {
        t.track_id: nearest_lane_ids(t, scenario.lanes) for t in scenario.tracks}

    best: dict[tuple[str, str], Detection] = {}
    for cutter in cutters:
        assoc = assoc_cache[cutter.track_id]
        runs = _residency_runs(assoc, cutter.valid)
        transitions = [(a, b) for a, b in zip(runs, runs[1:]) if a[0] != b[0]]

        if not transitions and diagnostics:
            pseudo = CriteriaVerdict(True, False, True, True, True, True, True, True)
            for target in target_pool:
                if target.track_id == cutter.track_id:
                    continue
                rejected.append(CandidateDiagnostic(
                    cutter.track_id, target.track_id,
                    (0, scenario.frame_count - 1), None, None, pseudo))
            continue

        for run_a, run_b in transitions:
            lane = scenario.lane(run_b[0])
            window = (run_a[1], run_b[2])
            try:
                entry = find_entry_frame(cutter, lane, window)
            except NoCrossingError:
                continue

            offsets = lateral_offset_series(cutter, lane)
            lat_speed = lateral_velocity_series(cutter, lane)
            completion = _find_completion(offsets, lat_speed, cutter.valid,
                                          entry, window[1], params)
            clearance = lane.half_width + float(np.nanmax(cutter.width)) / 2.0
            onset = _find_onset(offsets, cutter.valid, window[0], entry, clearance)
            if onset >= entry:
                continue
            side = "left" if offsets[onset] > 0 else "right"

            for target in target_pool:
                if target.track_id == cutter.track_id:
                    continue
                if not target.valid[entry]:
                    continue
                if assoc_cache[target.track_id][entry] != lane.lane_id:
                    continue
                kind = classify_target(scenario, target.track_id, entry, params)
                if kind is None:
                    continue
                verdict = _evaluate(scenario, cutter, target, lane,
                                    onset, entry, completion, params)
                if verdict.all_pass:
                    event = CutInEvent(
                        scenario_id=scenario.scenario_id,
                        cutter_id=cutter.track_id, target_id=target.track_id,
                        target_kind=kind, onset_frame=onset, entry_frame=entry,
                        completion_frame=completion, side=side,
                        lc_duration=(completion - entry) / FRAME_RATE_HZ,
                    )
                    key = (cutter.track_id, target.track_id)
                    if key not in best or event.entry_frame < best[key].event.entry_frame:
                        best[key] = Detection(event, verdict)
                elif diagnostics:
                    rejected.append(CandidateDiagnostic(
                        cutter.track_id, target.track_id, window,
                        entry, completion, verdict))

    detections = sorted(best.values(),
                        key=lambda d: (d.event.entry_frame, d.event.cutter_id,
                                       d.event.target_id))
    return (detections, rejected) if diagnostics else detections


def shared_maneuver_count(detections: list[Detection]) -> int:
    """Events sharing (cutter, entry_frame) — one physical maneuver scored
    against multiple targets. Reported, not suppressed."""
    seen: dict[tuple[str, str, int], int] = {}
    for d in detections:
        key = (d.event.scenario_id, d.event.cutter_id, d.event.entry_frame)
        seen[key] = seen.get(key, 0) + 1
    return sum(c - 1 for c in seen.values() if c > 1)
