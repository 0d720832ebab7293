"""Domain model for 10 Hz multi-agent driving scenarios.

A scenario is a short fixed-rate recording: agent tracks (pose, velocity,
extent, per-frame validity), lane centerlines, and the designated
autonomous-vehicle track. All units are SI (m, m/s, rad); unit conversion
happens only at report emission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FRAME_RATE_HZ = 10.0
FRAME_DT = 1.0 / FRAME_RATE_HZ
EXPECTED_FRAME_COUNT = 91

DEFAULT_LANE_WIDTH = 3.6  # m, applied when a record omits the lane width

# Scenario eligibility: the AV must sustain this speed for this many
# consecutive valid frames (5 s at 10 Hz).
ELIGIBLE_MIN_SPEED = 5.0
ELIGIBLE_MIN_FRAMES = 50

AGENT_TYPES = ("vehicle", "pedestrian", "cyclist", "other")


class ScenarioError(ValueError):
    """A scenario or track violates a structural invariant."""


class InvalidStateError(ValueError):
    """An operation required a valid agent state at a frame that has none."""


class DegenerateCenterlineError(ValueError):
    """A lane centerline contains a zero-length segment."""


@dataclass(frozen=True)
class AgentState:
    """Single-frame kinematic state of one agent (map frame)."""

    x: float
    y: float
    heading: float
    vx: float
    vy: float
    length: float
    width: float
    valid: bool

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)  # never freeze (or alias) a caller's buffer
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class AgentTrack:
    """Per-agent time series, stored columnar for vectorized geometry.

    Invalid frames carry ``valid[i] = False`` and NaN kinematics; they are
    excluded from every kinematic computation.
    """

    track_id: str
    agent_type: str
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    length: np.ndarray
    width: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.agent_type not in AGENT_TYPES:
            raise ScenarioError(
                f"track {self.track_id!r}: unknown agent_type {self.agent_type!r}"
            )
        n = len(self.valid)
        arrays = {}
        for name in ("x", "y", "heading", "vx", "vy", "length", "width"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ScenarioError(
                    f"track {self.track_id!r}: field {name} has {arr.shape}, expected ({n},)"
                )
            arrays[name] = _readonly(arr)
        arrays["valid"] = _readonly(np.asarray(self.valid, dtype=bool))
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

        v = arrays["valid"]
        if v.any():
            if not (arrays["length"][v] > 0).all() or not (arrays["width"][v] > 0).all():
                raise ScenarioError(
                    f"track {self.track_id!r}: non-positive extent on a valid frame"
                )
            for name in ("x", "y", "heading", "vx", "vy"):
                if not np.isfinite(arrays[name][v]).all():
                    raise ScenarioError(
                        f"track {self.track_id!r}: non-finite {name} on a valid frame"
                    )

    @classmethod
    def from_states(cls, track_id: str, agent_type: str,
                    states: list[AgentState | None]) -> "AgentTrack":
        n = len(states)
        cols = {k: np.full(n, np.nan) for k in
                ("x", "y", "heading", "vx", "vy", "length", "width")}
        valid = np.zeros(n, dtype=bool)
        for i, st in enumerate(states):
            if st is None or not st.valid:
                continue
            valid[i] = True
            cols["x"][i] = st.x
            cols["y"][i] = st.y
            cols["heading"][i] = st.heading
            cols["vx"][i] = st.vx
            cols["vy"][i] = st.vy
            cols["length"][i] = st.length
            cols["width"][i] = st.width
        return cls(track_id=track_id, agent_type=agent_type, valid=valid, **cols)

    @property
    def n_frames(self) -> int:
        return len(self.valid)

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)

    def state(self, frame: int) -> AgentState:
        return AgentState(
            x=float(self.x[frame]), y=float(self.y[frame]),
            heading=float(self.heading[frame]),
            vx=float(self.vx[frame]), vy=float(self.vy[frame]),
            length=float(self.length[frame]), width=float(self.width[frame]),
            valid=bool(self.valid[frame]),
        )

    def require_valid(self, frame: int) -> None:
        if frame < 0 or frame >= self.n_frames or not self.valid[frame]:
            raise InvalidStateError(
                f"track {self.track_id!r} has no valid state at frame {frame}"
            )


@dataclass(frozen=True)
class LaneGeometry:
    """One lane, represented by its centerline polyline and width."""

    lane_id: str
    centerline: np.ndarray  # (N, 2)
    width: float = DEFAULT_LANE_WIDTH

    def __post_init__(self):
        pts = np.asarray(self.centerline, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ScenarioError(
                f"lane {self.lane_id!r}: centerline must be an (N>=2, 2) polyline"
            )
        seg = np.diff(pts, axis=0)
        if (np.einsum("ij,ij->i", seg, seg) == 0.0).any():
            raise DegenerateCenterlineError(
                f"lane {self.lane_id!r}: consecutive centerline points coincide"
            )
        object.__setattr__(self, "centerline", _readonly(pts))
        if not (self.width > 0):
            raise ScenarioError(f"lane {self.lane_id!r}: width must be positive")

    @property
    def half_width(self) -> float:
        return self.width / 2.0


@dataclass(frozen=True)
class Scenario:
    """One fixed-rate recording with a designated AV track."""

    scenario_id: str
    frame_rate: float
    tracks: tuple[AgentTrack, ...]
    lanes: tuple[LaneGeometry, ...]
    av_track_id: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        object.__setattr__(self, "lanes", tuple(self.lanes))
        if self.frame_rate != FRAME_RATE_HZ:
            raise ScenarioError(
                f"scenario {self.scenario_id!r}: frame_rate {self.frame_rate} Hz, "
                f"only {FRAME_RATE_HZ:g} Hz is supported"
            )
        if not self.tracks:
            raise ScenarioError(f"scenario {self.scenario_id!r}: no tracks")
        ids = [t.track_id for t in self.tracks]
        n_av = ids.count(self.av_track_id)
        if n_av > 1:
            raise ScenarioError(
                f"scenario {self.scenario_id!r}: duplicate AV designation "
                f"({n_av} tracks named {self.av_track_id!r})"
            )
        if n_av == 0:
            raise ScenarioError(
                f"scenario {self.scenario_id!r}: av_track_id {self.av_track_id!r} "
                "matches no track"
            )
        if len(set(ids)) != len(ids):
            raise ScenarioError(f"scenario {self.scenario_id!r}: duplicate track_id")
        counts = {t.n_frames for t in self.tracks}
        if len(counts) != 1:
            raise ScenarioError(
                f"scenario {self.scenario_id!r}: tracks disagree on frame count {sorted(counts)}"
            )
        lane_ids = [l.lane_id for l in self.lanes]
        if len(set(lane_ids)) != len(lane_ids):
            raise ScenarioError(f"scenario {self.scenario_id!r}: duplicate lane_id")

    @property
    def frame_count(self) -> int:
        return self.tracks[0].n_frames

    @property
    def av_track(self) -> AgentTrack:
        return self.track(self.av_track_id)

    def track(self, track_id: str) -> AgentTrack:
        for t in self.tracks:
            if t.track_id == track_id:
                return t
        raise KeyError(f"no track {track_id!r} in scenario {self.scenario_id!r}")

    def lane(self, lane_id: str) -> LaneGeometry:
        for l in self.lanes:
            if l.lane_id == lane_id:
                return l
        raise KeyError(f"no lane {lane_id!r} in scenario {self.scenario_id!r}")


# ---------------------------------------------------------------------------
# Eligibility


def scenario_eligible(scenario: Scenario,
                      min_speed: float = ELIGIBLE_MIN_SPEED,
                      min_frames: int = ELIGIBLE_MIN_FRAMES) -> bool:
    """True iff the AV holds speed >= min_speed over >= min_frames consecutive
    valid frames. Invalid AV frames break the run."""
    av = scenario.av_track
    ok = av.valid & (np.nan_to_num(av.speed, nan=-1.0) >= min_speed)
    run = best = 0
    for flag in ok:
        run = run + 1 if flag else 0
        best = max(best, run)
    return best >= min_frames


# ---------------------------------------------------------------------------
# Frame projection (AV-centric / target-centric axes)


def project_points(points: np.ndarray, origin: np.ndarray, heading: float) -> np.ndarray:
    """Rigidly map map-frame points into the frame anchored at ``origin`` with
    +s along ``heading`` and +l to the left. Returns (..., 2) of (s, l)."""
    c, s = math.cos(heading), math.sin(heading)
    rel = np.asarray(points, dtype=float) - np.asarray(origin, dtype=float)
    return np.stack([rel[..., 0] * c + rel[..., 1] * s,
                     -rel[..., 0] * s + rel[..., 1] * c], axis=-1)


def project_frame(scenario: Scenario, reference_track_id: str,
                  reference_frame: int) -> dict[str, np.ndarray]:
    """Project every track's valid states into the frame of the reference
    agent at the reference frame.

    Returns per-track (frame_count, 2) arrays of (s, l); invalid frames are
    NaN. The reference agent at the reference frame maps to (0, 0).
    """
    ref = scenario.track(reference_track_id)
    ref.require_valid(reference_frame)
    origin = np.array([ref.x[reference_frame], ref.y[reference_frame]])
    heading = float(ref.heading[reference_frame])
    out = {}
    for t in scenario.tracks:
        proj = np.full((t.n_frames, 2), np.nan)
        v = t.valid
        if v.any():
            pts = np.stack([t.x[v], t.y[v]], axis=-1)
            proj[v] = project_points(pts, origin, heading)
        out[t.track_id] = proj
    return out


# ---------------------------------------------------------------------------
# Lane geometry queries


def polyline_signed_offset(points: np.ndarray, centerline: np.ndarray) -> np.ndarray:
    """Signed perpendicular distance from each point to the polyline.

    Positive = left of the travel direction (direction of increasing
    arclength). Magnitude is the distance to the nearest segment; beyond the
    polyline ends the nearest end segment is extrapolated, so the value stays
    a true lateral offset for stations off the mapped extent.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = centerline[:-1]
    d = np.diff(centerline, axis=0)
    seg_len2 = np.einsum("ij,ij->i", d, d)
    if (seg_len2 == 0.0).any():
        raise DegenerateCenterlineError("zero-length centerline segment")

    rel = pts[:, None, :] - a[None, :, :]                 # (F, N, 2)
    t = np.einsum("fnj,nj->fn", rel, d) / seg_len2        # (F, N)
    tc = np.clip(t, 0.0, 1.0)
    near = a[None, :, :] + tc[..., None] * d[None, :, :]
    dist2 = np.einsum("fnj,fnj->fn", pts[:, None, :] - near, pts[:, None, :] - near)
    k = np.argmin(dist2, axis=1)
    rows = np.arange(len(pts))

    cross = d[k, 0] * (pts[:, 1] - a[k, 1]) - d[k, 1] * (pts[:, 0] - a[k, 0])
    offset = np.where(cross >= 0.0, 1.0, -1.0) * np.sqrt(dist2[rows, k])

    # Off the ends, replace the clamped (vertex) distance with the
    # perpendicular distance to the end segment's line.
    t_near = t[rows, k]
    last = len(a) - 1
    off_end = ((k == 0) & (t_near < 0.0)) | ((k == last) & (t_near > 1.0))
    if off_end.any():
        perp = cross[off_end] / np.sqrt(seg_len2[k[off_end]])
        offset[off_end] = perp
    return offset


def lateral_offset(track: AgentTrack, lane: LaneGeometry, frame: int) -> float:
    """Signed lateral distance (left positive) from the agent centroid to the
    lane centerline at one frame."""
    track.require_valid(frame)
    pt = np.array([[track.x[frame], track.y[frame]]])
    return float(polyline_signed_offset(pt, lane.centerline)[0])


def lateral_offset_series(track: AgentTrack, lane: LaneGeometry) -> np.ndarray:
    """Per-frame signed lateral offsets; NaN at invalid frames."""
    out = np.full(track.n_frames, np.nan)
    v = track.valid
    if v.any():
        pts = np.stack([track.x[v], track.y[v]], axis=-1)
        out[v] = polyline_signed_offset(pts, lane.centerline)
    return out


def lateral_velocity_series(track: AgentTrack, lane: LaneGeometry) -> np.ndarray:
    """Per-frame lateral velocity relative to the lane tangent (left positive);
    NaN at invalid frames. Uses the velocity vector, not offset differencing."""
    out = np.full(track.n_frames, np.nan)
    v = track.valid
    if not v.any():
        return out
    pts = np.stack([track.x[v], track.y[v]], axis=-1)
    a = lane.centerline[:-1]
    d = np.diff(lane.centerline, axis=0)
    seg_len2 = np.einsum("ij,ij->i", d, d)
    rel = pts[:, None, :] - a[None, :, :]
    t = np.einsum("fnj,nj->fn", rel, d) / seg_len2
    tc = np.clip(t, 0.0, 1.0)
    near = a[None, :, :] + tc[..., None] * d[None, :, :]
    dist2 = np.einsum("fnj,fnj->fn", pts[:, None, :] - near, pts[:, None, :] - near)
    k = np.argmin(dist2, axis=1)
    tang = d[k] / np.sqrt(seg_len2[k])[:, None]
    out[v] = tang[:, 0] * track.vy[v] - tang[:, 1] * track.vx[v]
    return out


def nearest_lane_ids(track: AgentTrack, lanes: tuple[LaneGeometry, ...]) -> list[str | None]:
    """Per-frame nearest-centerline lane association (None at invalid frames).

    Ties break to the lexicographically smallest lane_id, which also fixes the
    iteration order so association is deterministic.
    """
    n = track.n_frames
    assoc: list[str | None] = [None] * n
    if not lanes or not track.valid.any():
        return assoc
    best = np.full(n, np.inf)
    for lane in sorted(lanes, key=lambda l: l.lane_id):
        off = np.abs(lateral_offset_series(track, lane))
        better = track.valid & (off < best)
        best = np.where(better, off, best)
        for i in np.nonzero(better)[0]:
            assoc[i] = lane.lane_id
    return assoc


# ---------------------------------------------------------------------------
# Relative longitudinal geometry (bumper arithmetic)


def longitudinal_offsets(scenario: Scenario, reference_id: str, other_id: str,
                         frame: int) -> tuple[float, float, float]:
    """(center, front-bumper, rear-bumper) s-coordinates of ``other`` in the
    frame of ``reference`` at ``frame`` (axis = reference heading).

    Bumper points lie along the other agent's own heading at half its length.
    """
    ref = scenario.track(reference_id)
    oth = scenario.track(other_id)
    ref.require_valid(frame)
    oth.require_valid(frame)
    origin = np.array([ref.x[frame], ref.y[frame]])
    h = float(ref.heading[frame])
    half = float(oth.length[frame]) / 2.0
    ho = float(oth.heading[frame])
    nose = half * np.array([math.cos(ho), math.sin(ho)])
    center = np.array([oth.x[frame], oth.y[frame]])
    pts = np.stack([center, center + nose, center - nose])
    s = project_points(pts, origin, h)[:, 0]
    return float(s[0]), float(s[1]), float(s[2])


def bumper_gap(scenario: Scenario, cutter_id: str, target_id: str,
               frame: int) -> float:
    """Bumper-to-bumper longitudinal separation: cutter rear bumper minus
    target front bumper, projected on the target's heading; clamped at 0 when
    the boxes overlap longitudinally."""
    target = scenario.track(target_id)
    _, _, rear = longitudinal_offsets(scenario, target_id, cutter_id, frame)
    target_front = float(target.length[frame]) / 2.0
    return max(0.0, rear - target_front)


# ---------------------------------------------------------------------------
# Whole-scenario rigid transforms (used by invariance checks and tooling)


def rigid_transform(scenario: Scenario, angle: float, tx: float, ty: float) -> Scenario:
    """Rotate by ``angle`` then translate by (tx, ty): positions, headings,
    velocity vectors, and lane centerlines all move together."""
    c, s = math.cos(angle), math.sin(angle)

    def rot(x, y):
        return c * x - s * y, s * x + c * y

    tracks = []
    for t in scenario.tracks:
        x, y = rot(t.x, t.y)
        vx, vy = rot(t.vx, t.vy)
        tracks.append(AgentTrack(
            track_id=t.track_id, agent_type=t.agent_type,
            x=x + tx, y=y + ty, heading=t.heading + angle,
            vx=vx, vy=vy, length=t.length, width=t.width, valid=t.valid,
        ))
    lanes = []
    for l in scenario.lanes:
        px, py = rot(l.centerline[:, 0], l.centerline[:, 1])
        lanes.append(LaneGeometry(
            lane_id=l.lane_id,
            centerline=np.stack([px + tx, py + ty], axis=-1),
            width=l.width,
        ))
    return Scenario(
        scenario_id=scenario.scenario_id, frame_rate=scenario.frame_rate,
        tracks=tuple(tracks), lanes=tuple(lanes),
        av_track_id=scenario.av_track_id, meta=dict(scenario.meta),
    )
