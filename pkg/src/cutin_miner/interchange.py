"""Line-delimited interchange format for scenario corpora (format_version 1).

One JSON object per line:

    {"format_version": 1, "scenario_id": "...", "frame_rate_hz": 10,
     "av_track_id": "...",
     "lanes":  [{"lane_id": "...", "width_m": 3.6, "centerline": [[x, y], ...]}],
     "tracks": [{"track_id": "...", "agent_type": "vehicle",
                 "states": [[x, y, heading, vx, vy, length, width, valid], ...]}]}

All numbers SI. ``valid`` is 0/1; a state entry may be null for an invalid
frame. ``width_m`` may be null/absent, in which case the default lane width
applies (recorded in the scenario meta).
"""

from __future__ import annotations

import json
import logging
from typing import Callable, Iterable, Iterator, TextIO

import numpy as np

from .model import (
    AGENT_TYPES,
    DEFAULT_LANE_WIDTH,
    AgentTrack,
    LaneGeometry,
    Scenario,
    ScenarioError,
)

FORMAT_VERSION = 1
STATE_ARITY = 8

log = logging.getLogger(__name__)


class InterchangeError(ValueError):
    """A record does not conform to the interchange schema."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


def _require(obj: dict, key: str, kinds, where: str):
    if key not in obj:
        raise InterchangeError(f"{where}: missing field {key!r}")
    val = obj[key]
    if not isinstance(val, kinds):
        raise InterchangeError(f"{where}: field {key!r} has wrong type")
    return val


def scenario_from_record(obj: dict) -> Scenario:
    """Build a validated Scenario from one decoded record."""
    if not isinstance(obj, dict):
        raise InterchangeError("record is not an object")
    version = _require(obj, "format_version", int, "record")
    if version != FORMAT_VERSION:
        raise InterchangeError(f"unsupported format_version {version}")
    sid = _require(obj, "scenario_id", str, "record")
    rate = _require(obj, "frame_rate_hz", (int, float), sid)
    av_id = _require(obj, "av_track_id", str, sid)

    lanes = []
    defaulted = 0
    for lrec in _require(obj, "lanes", list, sid):
        lid = _require(lrec, "lane_id", str, f"{sid} lane")
        pts = _require(lrec, "centerline", list, f"{sid} lane {lid}")
        for p in pts:
            if not isinstance(p, list) or len(p) != 2:
                raise InterchangeError(f"{sid} lane {lid}: centerline point arity")
        width = lrec.get("width_m")
        if width is None:
            width = DEFAULT_LANE_WIDTH
            defaulted += 1
        lanes.append(LaneGeometry(lane_id=lid, centerline=np.asarray(pts, dtype=float),
                                  width=float(width)))

    tracks = []
    av_seen = 0
    for trec in _require(obj, "tracks", list, sid):
        tid = _require(trec, "track_id", str, f"{sid} track")
        atype = _require(trec, "agent_type", str, f"{sid} track {tid}")
        if atype not in AGENT_TYPES:
            raise InterchangeError(f"{sid} track {tid}: unknown agent_type {atype!r}")
        states = _require(trec, "states", list, f"{sid} track {tid}")
        n = len(states)
        cols = np.full((n, 7), np.nan)
        valid = np.zeros(n, dtype=bool)
        for i, st in enumerate(states):
            if st is None:
                continue
            if not isinstance(st, list) or len(st) != STATE_ARITY:
                raise InterchangeError(
                    f"{sid} track {tid}: state {i} has arity "
                    f"{len(st) if isinstance(st, list) else '?'}, expected {STATE_ARITY}"
                )
            if not st[7]:
                continue
            valid[i] = True
            cols[i] = st[:7]
        if tid == av_id:
            av_seen += 1
            if av_seen > 1:
                raise InterchangeError(f"{sid}: duplicate AV designation ({tid!r})")
        tracks.append(AgentTrack(
            track_id=tid, agent_type=atype,
            x=cols[:, 0], y=cols[:, 1], heading=cols[:, 2],
            vx=cols[:, 3], vy=cols[:, 4], length=cols[:, 5], width=cols[:, 6],
            valid=valid,
        ))

    try:
        return Scenario(
            scenario_id=sid, frame_rate=float(rate),
            tracks=tuple(tracks), lanes=tuple(lanes), av_track_id=av_id,
            meta={"defaulted_lane_widths": defaulted} if defaulted else {},
        )
    except ScenarioError as exc:
        raise InterchangeError(str(exc)) from exc


def scenario_to_record(scenario: Scenario) -> dict:
    """Inverse of scenario_from_record (field-exact for finite values)."""
    lanes = [{
        "lane_id": l.lane_id,
        "width_m": l.width,
        "centerline": l.centerline.tolist(),
    } for l in scenario.lanes]
    tracks = []
    for t in scenario.tracks:
        states: list[list | None] = []
        for i in range(t.n_frames):
            if not t.valid[i]:
                states.append(None)
                continue
            states.append([float(t.x[i]), float(t.y[i]), float(t.heading[i]),
                           float(t.vx[i]), float(t.vy[i]),
                           float(t.length[i]), float(t.width[i]), 1])
        tracks.append({"track_id": t.track_id, "agent_type": t.agent_type,
                       "states": states})
    return {
        "format_version": FORMAT_VERSION,
        "scenario_id": scenario.scenario_id,
        "frame_rate_hz": scenario.frame_rate,
        "av_track_id": scenario.av_track_id,
        "lanes": lanes,
        "tracks": tracks,
    }


def write_scenario_stream(scenarios: Iterable[Scenario], fp: TextIO) -> int:
    """Write scenarios one JSON record per line; returns the count written."""
    n = 0
    for s in scenarios:
        fp.write(json.dumps(scenario_to_record(s), separators=(",", ":")))
        fp.write("\n")
        n += 1
    return n


def parse_scenario_stream(fp: Iterable[str], strict: bool = False,
                          on_error: Callable[[InterchangeError], None] | None = None,
                          ) -> Iterator[Scenario]:
    """Yield Scenarios from a line stream, in input order.

    Malformed records are reported with their line number and skipped; in
    strict mode the first malformed record aborts the stream.
    """
    for line_no, line in enumerate(fp, 1):
        line = line.strip()
        if not line:
            continue
        try:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InterchangeError(f"invalid JSON ({exc.msg})", line_no) from exc
            try:
                yield scenario_from_record(obj)
            except InterchangeError as exc:
                raise InterchangeError(str(exc), line_no) from exc
        except InterchangeError as exc:
            if strict:
                raise
            log.warning("skipping malformed record: %s", exc)
            if on_error is not None:
                on_error(exc)


def iter_corpus(path: str, strict: bool = False,
                on_error: Callable[[InterchangeError], None] | None = None,
                ) -> Iterator[Scenario]:
    with open(path, "r", encoding="utf-8") as fp:
        yield from parse_scenario_stream(fp, strict=strict, on_error=on_error)


def load_corpus(path: str, strict: bool = False) -> list[Scenario]:
    return list(iter_corpus(path, strict=strict))
