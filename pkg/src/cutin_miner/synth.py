"""Deterministic synthetic scenario generator with planted ground truth.

Builds interchange-ready scenarios on a straight multi-lane road: a target
cruises in lane L1 while a cutter starts in the adjacent lane L2 and merges
in front of it with planted gap, speeds, duration, and side. Negative
templates violate exactly one detector criterion apiece, plus generic
distractors (lane keeping, aborted merges, parked vehicles).

Lateral profiles are piecewise linear with the boundary crossing placed
between frames, so the planted entry/completion frames and entry gap are
recovered exactly (durations at the 0.1 s frame granularity). Velocity
channels carry the planted scalar speeds; positions carry the planted gap
series. (seed, spec) fully determines every byte of output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .interchange import write_scenario_stream
from .model import AgentTrack, LaneGeometry, Scenario

N_FRAMES = 91
DT = 0.1
LANE_WIDTH = 3.6
BOUNDARY = LANE_WIDTH / 2.0
OUTSIDE_MARGIN = 0.01           # lateral start of the in-lane descent, m past the boundary

CUTTER_LEN, CUTTER_WID = 4.8, 1.9
TARGET_LEN, TARGET_WID = 5.2, 2.1
HALF_SUM = (CUTTER_LEN + TARGET_LEN) / 2.0

# box-clearance threshold behind which the cutter counts as fully in-source
ONSET_CLEARANCE = BOUNDARY + CUTTER_WID / 2.0

NEGATIVE_TEMPLATES = ("c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8")
DISTRACTOR_TEMPLATES = ("abort", "parked")

# Table I medians used by the paper-mimic preset (SI where applicable)
PAPER_GAP_MEDIANS = {"AV": 7.58, "HDV": 9.57}          # m
PAPER_CUTIN_MEDIANS = {"AV": 51.70 / 3.6, "HDV": 37.72 / 3.6}   # m/s
PAPER_DIFF_MEDIANS = {"AV": 6.90 / 3.6, "HDV": 3.83 / 3.6}      # m/s
PAPER_DROP_MEDIANS = {"AV": 2.42 / 3.6, "HDV": 1.42 / 3.6}      # m/s


class InfeasiblePlantError(ValueError):
    """The requested maneuver does not fit in the 9.1 s recording."""


@dataclass(frozen=True)
class PlantSpec:
    """Parameters of one planted scenario.

    ``lc_duration`` is the entry-to-stabilization time the detector will
    measure, quantized to the frame grid. ``negative`` names a criterion
    (c1..c8) or distractor template; None plants a detectable event.
    """

    target_kind: str = "AV"
    gap_entry: float = 7.6
    cutter_speed: float = 12.0
    target_speed: float = 10.0
    lc_duration: float = 2.5
    side: str = "left"
    entry_time: float = 4.0
    lane_width: float = LANE_WIDTH
    noise_std: float = 0.0
    lead_speed_drop: float = 0.0
    negative: str | None = None


@dataclass(frozen=True)
class CorpusConfig:
    """Corpus-level recipe; (config, seed) determines the output bytes."""

    n_scenarios: int
    negative_fraction: float = 0.0
    seed: int = 42
    av_fraction: float = 0.5      # share of positives targeting the AV
    gap_medians: dict = field(default_factory=lambda: dict(PAPER_GAP_MEDIANS))
    gap_sigma: float = 0.4
    id_prefix: str = "synth"

    @classmethod
    def demo(cls, n: int = 60, seed: int = 42) -> "CorpusConfig":
        return cls(n_scenarios=n, negative_fraction=0.4, seed=seed, id_prefix="demo")

    @classmethod
    def detector_oracle(cls, n: int = 500, seed: int = 42) -> "CorpusConfig":
        """Mixed positives plus one negative template per criterion, cycled."""
        return cls(n_scenarios=n, negative_fraction=0.5, seed=seed, id_prefix="oracle")

    @classmethod
    def paper_mimic(cls, seed: int = 42) -> "CorpusConfig":
        """700 AV-targeted + 3,000 HDV-targeted positives with the published
        medians planted."""
        return cls(n_scenarios=3700, negative_fraction=0.0, seed=seed,
                   av_fraction=700 / 3700, id_prefix="mimic")


# ---------------------------------------------------------------------------
# low-level trajectory assembly


def _track(track_id: str, agent_type: str, x, y, vx, vy,
           length: float, width: float) -> AgentTrack:
    n = len(x)
    return AgentTrack(
        track_id=track_id, agent_type=agent_type,
        x=np.asarray(x, dtype=float), y=np.asarray(y, dtype=float),
        heading=np.zeros(n), vx=np.asarray(vx, dtype=float),
        vy=np.asarray(vy, dtype=float),
        length=np.full(n, length), width=np.full(n, width),
        valid=np.ones(n, dtype=bool),
    )


def _lanes(side_sign: float, with_av_lane: bool, lane_width: float) -> tuple[LaneGeometry, ...]:
    span = np.array([[-300.0, 0.0], [700.0, 0.0]])
    lanes = [
        LaneGeometry("L1", span, lane_width),
        LaneGeometry("L2", span + [0.0, side_sign * lane_width], lane_width),
    ]
    if with_av_lane:
        lanes.append(LaneGeometry("L3", span + [0.0, -side_sign * lane_width], lane_width))
    return tuple(lanes)


def _forward_rate(series: np.ndarray) -> np.ndarray:
    """Per-frame forward-difference rate; last frame repeats zero change."""
    return np.diff(series, append=series[-1]) / DT


def _vx_for_speed(speed: np.ndarray | float, vy: np.ndarray) -> np.ndarray:
    """Longitudinal velocity component so hypot(vx, vy) equals the planted
    scalar speed exactly."""
    sq = np.asarray(speed, dtype=float) ** 2 - vy ** 2
    return np.sqrt(np.maximum(sq, 1e-4))


def _lateral_descent(entry_frame: int, duration_frames: int, lane_width: float) -> np.ndarray:
    """In-lane part of the merge: |offset| from (boundary + margin) at
    entry-1 linearly to 0 at entry + duration_frames.

    The constant descent rate stays above the stabilization speed threshold,
    so the detector's completion lands exactly on the final frame.
    """
    start = lane_width / 2.0 + OUTSIDE_MARGIN
    k = duration_frames + 1
    f = np.arange(k + 1)
    return start * (k - f) / k  # offsets for frames entry-1 .. entry+duration


def _target_speed_series(v0: float, drop: float, entry_frame: int) -> np.ndarray:
    """Target speed: constant to entry, then a linear 2 s drop, then constant."""
    t = np.arange(N_FRAMES) * DT
    te = entry_frame * DT
    ramp = np.clip((t - te) / 2.0, 0.0, 1.0)
    return v0 - drop * ramp


def _integrate(v: np.ndarray, x0: float) -> np.ndarray:
    """Exact positions for piecewise-linear speeds (trapezoid between frames)."""
    steps = (v[1:] + v[:-1]) / 2.0 * DT
    return x0 + np.concatenate([[0.0], np.cumsum(steps)])


def _gap_series(x_cutter: np.ndarray, x_target: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, x_cutter - x_target - HALF_SUM)


def _noise(rng: np.random.Generator, std: float) -> np.ndarray:
    if std <= 0:
        return np.zeros((N_FRAMES, 2))
    return rng.normal(0.0, std, size=(N_FRAMES, 2))


def _expected_event(spec: PlantSpec, cutter: AgentTrack,
                    target: AgentTrack, onset: int, entry: int,
                    completion: int) -> dict:
    """Ground-truth metrics re-derived from the built arrays (independent of
    the detector/metrics modules)."""
    gap = float(max(0.0, cutter.x[entry] - target.x[entry] - HALF_SUM))
    gaps = np.maximum(0.0, cutter.x[onset:completion + 1]
                      - target.x[onset:completion + 1] - HALF_SUM)
    v_cut = float(np.hypot(cutter.vx[entry], cutter.vy[entry]))
    v_tgt = float(np.hypot(target.vx[entry], target.vy[entry]))
    closing = v_tgt - v_cut
    horizon = min(entry + 20, N_FRAMES - 1)
    drop = float(np.hypot(target.vx[entry], target.vy[entry])
                 - np.hypot(target.vx[horizon], target.vy[horizon]))
    if gap < 5.0:
        severity = "Critical"
    elif gap < 10.0:
        severity = "Moderate"
    else:
        severity = "Low"
    return {
        "cutter_id": cutter.track_id,
        "target_id": target.track_id,
        "target_kind": spec.target_kind,
        "side": spec.side,
        "onset_frame": onset,
        "entry_frame": entry,
        "completion_frame": completion,
        "lc_duration_s": round((completion - entry) * DT, 10),
        "gap_m": gap,
        "cutin_speed_ms": v_cut,
        "target_speed_ms": v_tgt,
        "speed_diff_ms": v_cut - v_tgt,
        "ttc_s": gap / closing if closing > 0 else None,
        "min_dist_m": float(gaps.min()),
        "lead_speed_drop_ms": drop,
        "severity": severity,
    }


# ---------------------------------------------------------------------------
# templates


def _positive_lateral(spec: PlantSpec) -> tuple[np.ndarray, int, int]:
    """Full |offset|-to-L1-center profile for a clean merge; returns
    (offsets, entry_frame, completion_frame)."""
    e = int(round(spec.entry_time / DT))
    k = int(round(spec.lc_duration / DT))
    if spec.entry_time + spec.lc_duration > 8.1 + 1e-9:
        raise InfeasiblePlantError(
            f"entry {spec.entry_time} s + duration {spec.lc_duration} s "
            "exceeds the 8.1 s horizon")
    if e < 12:
        raise InfeasiblePlantError("entry_time leaves no room for the approach")
    if k < 5 or k > 55:
        raise InfeasiblePlantError("lc_duration outside the constructible range")
    c = e + k
    l = np.full(N_FRAMES, spec.lane_width, dtype=float)
    approach = min(15, e - 3)
    a0 = e - 1 - approach
    ramp = np.linspace(spec.lane_width, BOUNDARY + OUTSIDE_MARGIN, approach + 1)
    l[a0:e] = ramp
    l[e - 1:c + 1] = _lateral_descent(e, k, spec.lane_width)
    l[c:] = 0.0
    return l, e, c


def _onset_from(l: np.ndarray, entry: int) -> int:
    for f in range(entry - 1, -1, -1):
        if l[f] >= ONSET_CLEARANCE:
            return f
    return 0


def _build_cutin(spec: PlantSpec, rng: np.random.Generator, scenario_id: str,
                 lateral: np.ndarray | None = None,
                 entry: int | None = None, completion: int | None = None,
                 center_offset_at_entry: float | None = None,
                 agent_type: str = "vehicle",
                 ) -> tuple[Scenario, dict | None]:
    """Assemble a scenario from a lateral profile plus longitudinal plan."""
    if lateral is None:
        lateral, entry, completion = _positive_lateral(spec)
    sign = 1.0 if spec.side == "left" else -1.0
    t = np.arange(N_FRAMES) * DT
    te = entry * DT

    v_t = _target_speed_series(spec.target_speed, spec.lead_speed_drop, entry)
    x_t = _integrate(v_t, 0.0)
    x_t = x_t - x_t[entry]  # target centroid at x=0 at entry

    if center_offset_at_entry is None:
        x_c0 = HALF_SUM + spec.gap_entry - spec.cutter_speed * te
    else:
        x_c0 = center_offset_at_entry - spec.cutter_speed * te
    x_c = x_c0 + spec.cutter_speed * t

    y_c = sign * lateral
    vy_c = _forward_rate(y_c)
    vx_c = _vx_for_speed(spec.cutter_speed, vy_c)

    jc = _noise(rng, spec.noise_std)
    jt = _noise(rng, spec.noise_std)
    cutter = _track("cutter", agent_type, x_c + jc[:, 0], y_c + jc[:, 1],
                    vx_c, vy_c, CUTTER_LEN, CUTTER_WID)
    target = _track("target" if spec.target_kind == "HDV" else "av",
                    "vehicle", x_t + jt[:, 0], jt[:, 1], v_t, np.zeros(N_FRAMES),
                    TARGET_LEN, TARGET_WID)
    tracks = [cutter, target]
    if spec.target_kind == "HDV":
        av_v = 12.0
        av_x = x_t[entry] - 25.0 + av_v * (t - te)
        tracks.append(_track("av", "vehicle", av_x,
                             np.full(N_FRAMES, -sign * spec.lane_width),
                             np.full(N_FRAMES, av_v), np.zeros(N_FRAMES),
                             TARGET_LEN, TARGET_WID))

    scenario = Scenario(
        scenario_id=scenario_id, frame_rate=10.0, tracks=tuple(tracks),
        lanes=_lanes(sign, with_av_lane=spec.target_kind == "HDV",
                     lane_width=spec.lane_width),
        av_track_id="av",
    )
    if spec.negative is None:
        onset = _onset_from(lateral, entry)
        label = _expected_event(spec, cutter, target, onset, entry, completion)
    else:
        label = None
    return scenario, label


def _negative_lateral(template: str, spec: PlantSpec) -> tuple[np.ndarray, int, int]:
    """Lateral profiles for templates that need a nonstandard shape."""
    l = np.full(N_FRAMES, spec.lane_width, dtype=float)
    if template == "c4":
        # slow drift keeps |offset| above the settle band for >6 s, then snaps
        e = 15
        l[2:e] = np.linspace(spec.lane_width, BOUNDARY + OUTSIDE_MARGIN, e - 2)
        drift_end = e + 63                       # 6.3 s at 0.2 m/s
        l[e - 1:drift_end + 1] = np.linspace(BOUNDARY + OUTSIDE_MARGIN, 0.55, drift_end - e + 2)
        snap_end = drift_end + 5                 # 0.5 s at 1.1 m/s
        l[drift_end:snap_end + 1] = np.linspace(0.55, 0.0, 6)
        l[snap_end:] = 0.0
        return l, e, snap_end
    if template == "c6":
        # constant sub-threshold lateral rate; still settles inside 6 s
        l[:] = 1.85
        l[3:52] = 1.85 - 0.029 * np.arange(49)
        l[52:] = l[51]
        return l, 5, 50
    if template == "c8":
        # merges but parks 1.62 m off the lane center
        e = 40
        l[24:e] = np.linspace(spec.lane_width, BOUNDARY + OUTSIDE_MARGIN, e - 24)
        l[e - 1:e + 4] = np.linspace(BOUNDARY + OUTSIDE_MARGIN, 1.62, 5)
        l[e + 3:] = 1.62
        return l, e, N_FRAMES - 1
    if template == "abort":
        # crosses in, hesitates, returns to the source lane
        e = 40
        l[24:e] = np.linspace(spec.lane_width, BOUNDARY + OUTSIDE_MARGIN, e - 24)
        l[e - 1:e + 10] = np.linspace(BOUNDARY + OUTSIDE_MARGIN, 1.0, 11)
        l[e + 9:e + 12] = 1.0
        l[e + 11:e + 22] = np.linspace(1.0, 1.9, 11)
        l[e + 21:e + 40] = np.linspace(1.9, spec.lane_width, 19)
        l[e + 39:] = spec.lane_width
        return l, e, e + 9
    raise ValueError(f"no lateral template {template!r}")


def plant_negative(template: str, rng: np.random.Generator,
                   scenario_id: str, side: str = "left") -> tuple[Scenario, dict | None]:
    """One scenario violating exactly the named criterion (c1..c8) or a
    generic distractor (abort, parked)."""
    base = PlantSpec(target_kind="AV", gap_entry=8.0, cutter_speed=11.0,
                     target_speed=11.0, lc_duration=1.5, side=side,
                     entry_time=4.0, negative=template)
    if template == "c1":
        spec = PlantSpec(target_kind="AV", gap_entry=6.0, cutter_speed=1.5,
                         target_speed=6.0, lc_duration=2.0, side=side,
                         entry_time=4.0, negative="c1")
        return _build_cutin(spec, rng, scenario_id)
    if template == "c2":
        spec = base
        lateral = np.full(N_FRAMES, spec.lane_width)
        sign = 1.0 if side == "left" else -1.0
        t = np.arange(N_FRAMES) * DT
        cutter = _track("cutter", "vehicle", 20.0 + spec.cutter_speed * t,
                        sign * lateral, np.full(N_FRAMES, spec.cutter_speed),
                        np.zeros(N_FRAMES), CUTTER_LEN, CUTTER_WID)
        target = _track("av", "vehicle", spec.target_speed * t,
                        np.zeros(N_FRAMES), np.full(N_FRAMES, spec.target_speed),
                        np.zeros(N_FRAMES), TARGET_LEN, TARGET_WID)
        scenario = Scenario(scenario_id=scenario_id, frame_rate=10.0,
                            tracks=(cutter, target),
                            lanes=_lanes(sign, False, spec.lane_width),
                            av_track_id="av")
        return scenario, None
    if template == "c3":
        spec = PlantSpec(target_kind="AV", gap_entry=28.0, cutter_speed=11.0,
                         target_speed=11.0, lc_duration=1.5, side=side,
                         entry_time=4.0, negative="c3")
        return _build_cutin(spec, rng, scenario_id)
    if template == "c4":
        spec = PlantSpec(target_kind="AV", gap_entry=8.0, cutter_speed=11.0,
                         target_speed=11.0, lc_duration=6.8, side=side,
                         entry_time=1.5, negative="c4")
        lateral, e, c = _negative_lateral("c4", spec)
        return _build_cutin(spec, rng, scenario_id, lateral, e, c)
    if template == "c5":
        spec = PlantSpec(target_kind="AV", gap_entry=8.0, cutter_speed=11.0,
                         target_speed=11.0, lc_duration=1.5, side=side,
                         entry_time=4.0, negative="c5")
        return _build_cutin(spec, rng, scenario_id, center_offset_at_entry=-8.0)
    if template == "c6":
        spec = PlantSpec(target_kind="AV", gap_entry=8.0, cutter_speed=11.0,
                         target_speed=11.0, lc_duration=4.5, side=side,
                         entry_time=0.5, negative="c6")
        lateral, e, c = _negative_lateral("c6", spec)
        return _build_cutin(spec, rng, scenario_id, lateral, e, c)
    if template == "c7":
        spec = PlantSpec(target_kind="AV", gap_entry=8.0, cutter_speed=11.0,
                         target_speed=11.0, lc_duration=1.5, side=side,
                         entry_time=4.0, negative="c7")
        return _build_cutin(spec, rng, scenario_id, agent_type="other")
    if template == "c8":
        spec = PlantSpec(target_kind="AV", gap_entry=8.0, cutter_speed=11.0,
                         target_speed=11.0, lc_duration=5.0, side=side,
                         entry_time=4.0, negative="c8")
        lateral, e, c = _negative_lateral("c8", spec)
        return _build_cutin(spec, rng, scenario_id, lateral, e, c)
    if template == "abort":
        spec = PlantSpec(target_kind="AV", gap_entry=8.0, cutter_speed=11.0,
                         target_speed=11.0, lc_duration=1.0, side=side,
                         entry_time=4.0, negative="abort")
        lateral, e, c = _negative_lateral("abort", spec)
        return _build_cutin(spec, rng, scenario_id, lateral, e, c)
    if template == "parked":
        sign = 1.0 if side == "left" else -1.0
        t = np.arange(N_FRAMES) * DT
        cutter = _track("cutter", "vehicle", np.full(N_FRAMES, 15.0),
                        np.full(N_FRAMES, sign * LANE_WIDTH),
                        np.zeros(N_FRAMES), np.zeros(N_FRAMES),
                        CUTTER_LEN, CUTTER_WID)
        target = _track("av", "vehicle", 11.0 * t, np.zeros(N_FRAMES),
                        np.full(N_FRAMES, 11.0), np.zeros(N_FRAMES),
                        TARGET_LEN, TARGET_WID)
        scenario = Scenario(scenario_id=scenario_id, frame_rate=10.0,
                            tracks=(cutter, target),
                            lanes=_lanes(sign, False, LANE_WIDTH),
                            av_track_id="av")
        return scenario, None
    raise ValueError(f"unknown negative template {template!r}")


def plant_cutin(spec: PlantSpec, seed: int = 0,
                scenario_id: str = "plant") -> tuple[Scenario, dict]:
    """Build one scenario from a spec; returns (scenario, label record)."""
    rng = np.random.default_rng(seed)
    if spec.negative is None:
        scenario, expected = _build_cutin(spec, rng, scenario_id)
        return scenario, {"scenario_id": scenario_id, "template": "positive",
                          "violated_criterion": None, "expected_event": expected}
    scenario, _ = plant_negative(spec.negative, rng, scenario_id, spec.side)
    violated = spec.negative if spec.negative in NEGATIVE_TEMPLATES else None
    return scenario, {"scenario_id": scenario_id, "template": spec.negative,
                      "violated_criterion": violated, "expected_event": None}


# ---------------------------------------------------------------------------
# the Table-III replay twin


def replay_twin(scenario_id: str = "replay-twin") -> tuple[Scenario, dict]:
    """A merge whose key instants reproduce the published case replay:
    gap 12.0 m at onset ("CI faster"), 7.6 m at entry with +3.0 m/s approach
    speed, 5.0 m at completion with +4.4 m/s, recovering afterwards.

    Positions carry the gap knots and velocities carry the approach-speed
    knots independently; the published rows are not mutually integrable.
    """
    frames = np.arange(N_FRAMES, dtype=float)

    lateral = np.interp(frames, [0, 1, 5, 39, 65, 90],
                        [3.6, 3.6, 2.7, 1.81, 0.0, 0.0])
    entry, completion = 40, 65

    def smoothstep(knot_f, knot_v):
        out = np.empty(N_FRAMES)
        for (f0, f1), (v0, v1) in zip(zip(knot_f, knot_f[1:]),
                                      zip(knot_v, knot_v[1:])):
            seg = slice(int(f0), int(f1) + 1)
            u = (frames[seg] - f0) / max(f1 - f0, 1)
            out[seg] = v0 + (v1 - v0) * (1.0 - np.cos(np.pi * u)) / 2.0
        return out

    gap = smoothstep([0, 4, 40, 65, 90], [12.0, 12.0, 7.6, 5.0, 5.5])
    v_target = np.interp(frames, [0, 40, 60, 90], [15.0, 15.0, 13.0, 13.0])
    v_cutter = smoothstep([0, 4, 40, 65, 90], [15.5556, 15.5556, 12.0, 8.6, 12.9])

    x_t = _integrate(v_target, 30.0)
    x_c = x_t + HALF_SUM + gap
    vy_c = _forward_rate(lateral)
    vx_c = _vx_for_speed(v_cutter, vy_c)

    cutter = _track("cutter", "vehicle", x_c, lateral, vx_c, vy_c,
                    CUTTER_LEN, CUTTER_WID)
    target = _track("av", "vehicle", x_t, np.zeros(N_FRAMES), v_target,
                    np.zeros(N_FRAMES), TARGET_LEN, TARGET_WID)
    scenario = Scenario(scenario_id=scenario_id, frame_rate=10.0,
                        tracks=(cutter, target),
                        lanes=_lanes(1.0, False, LANE_WIDTH), av_track_id="av")

    spec = PlantSpec(target_kind="AV", gap_entry=7.6, side="left",
                     entry_time=4.0, lc_duration=2.5)
    expected = _expected_event(spec, cutter, target,
                               _onset_from(lateral, entry), entry, completion)
    return scenario, {"scenario_id": scenario_id, "template": "replay-twin",
                      "violated_criterion": None, "expected_event": expected}


# ---------------------------------------------------------------------------
# corpus generation


def _draw_positive(rng: np.random.Generator, kind: str, cfg: CorpusConfig) -> PlantSpec:
    def lognorm(median, sigma, lo, hi):
        return float(np.clip(median * math.exp(sigma * rng.standard_normal()), lo, hi))

    gap = lognorm(cfg.gap_medians[kind], cfg.gap_sigma, 0.6, 19.5)
    v_c = lognorm(PAPER_CUTIN_MEDIANS[kind], 0.25, 6.0, 28.0)
    diff = float(np.clip(rng.normal(PAPER_DIFF_MEDIANS[kind], 1.5), -3.0, 6.0))
    v_t_floor = 5.5 if kind == "AV" else 3.5
    v_t = float(np.clip(v_c - diff, v_t_floor, 26.0))

    entry_time = float(rng.integers(20, 51)) / 10.0
    dur_hi = min(5.0, 8.1 - entry_time)
    duration = round(lognorm(1.2, 0.45, 0.5, dur_hi), 1)

    # keep the cutter centroid ahead of the target through completion (c5)
    if gap + HALF_SUM + (v_c - v_t) * (duration + 0.2) < 1.0:
        v_c = v_t + (1.0 - gap - HALF_SUM) / (duration + 0.2)
        v_c = float(np.clip(v_c, 6.0, 30.0))

    drop = lognorm(PAPER_DROP_MEDIANS[kind], 0.6, 0.0, 2.5)
    drop = float(np.clip(drop, 0.0, max(0.0, v_t - (5.05 if kind == "AV" else 3.0))))

    side = "left" if rng.random() < 297 / 706 else "right"
    return PlantSpec(target_kind=kind, gap_entry=gap, cutter_speed=v_c,
                     target_speed=v_t, lc_duration=duration, side=side,
                     entry_time=entry_time, lead_speed_drop=drop)


def generate_corpus(config: CorpusConfig, corpus_fp: TextIO,
                    labels_fp: TextIO) -> dict:
    """Write the corpus and its ground-truth label stream; returns counts.

    Scenario i draws from its own spawned seed, so sharding or reordering the
    generation can never change the output.
    """
    root = np.random.SeedSequence(config.seed)
    children = root.spawn(config.n_scenarios)
    neg_cycle = list(NEGATIVE_TEMPLATES) + list(DISTRACTOR_TEMPLATES)

    counts = {"scenarios": 0, "positives": 0, "negatives": 0,
              "events": {"AV": 0, "HDV": 0}}
    neg_index = 0
    acc_prev = 0
    av_acc_prev = 0
    n_pos = 0
    scenarios = []
    labels = []
    for i in range(config.n_scenarios):
        rng = np.random.default_rng(children[i])
        sid = f"{config.id_prefix}-{i:05d}"
        acc = int((i + 1) * config.negative_fraction)
        is_negative = acc > acc_prev
        acc_prev = acc
        if is_negative:
            template = neg_cycle[neg_index % len(neg_cycle)]
            neg_index += 1
            side = "left" if rng.random() < 0.5 else "right"
            scenario, _ = plant_negative(template, rng, sid, side)
            label = {"scenario_id": sid, "template": template,
                     "violated_criterion": template if template in NEGATIVE_TEMPLATES else None,
                     "expected_event": None}
            counts["negatives"] += 1
        else:
            # deterministic accumulator: exactly round(n_pos * av_fraction)
            # AV-targeted positives, evenly interleaved
            n_pos += 1
            av_acc = int(n_pos * config.av_fraction + 0.5)
            kind = "AV" if av_acc > av_acc_prev else "HDV"
            av_acc_prev = av_acc
            spec = _draw_positive(rng, kind, config)
            scenario, expected = _build_cutin(spec, rng, sid)
            label = {"scenario_id": sid, "template": "positive",
                     "violated_criterion": None, "expected_event": expected}
            counts["positives"] += 1
            counts["events"][kind] += 1
        scenarios.append(scenario)
        labels.append(label)
        counts["scenarios"] += 1
        if len(scenarios) >= 64:
            write_scenario_stream(scenarios, corpus_fp)
            for rec in labels:
                labels_fp.write(json.dumps(rec, separators=(",", ":")) + "\n")
            scenarios, labels = [], []
    write_scenario_stream(scenarios, corpus_fp)
    for rec in labels:
        labels_fp.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return counts


def read_labels(fp) -> list[dict]:
    return [json.loads(line) for line in fp if line.strip()]
