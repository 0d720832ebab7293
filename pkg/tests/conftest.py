"""Shared scenario builders and brute-force oracles for the test suite."""

import itertools

import numpy as np
import pytest

from cutin_miner.model import AgentTrack, LaneGeometry, Scenario

N = 91


def arr(value, n=N):
    if np.isscalar(value):
        return np.full(n, float(value))
    out = np.asarray(value, dtype=float)
    assert len(out) == n
    return out


def make_track(track_id, x, y, vx=0.0, vy=0.0, heading=0.0, length=4.8,
               width=1.9, valid=None, agent_type="vehicle", n=N):
    if valid is None:
        valid = np.ones(n, dtype=bool)
    return AgentTrack(
        track_id=track_id, agent_type=agent_type,
        x=arr(x, n), y=arr(y, n), heading=arr(heading, n),
        vx=arr(vx, n), vy=arr(vy, n), length=arr(length, n),
        width=arr(width, n), valid=np.asarray(valid, dtype=bool),
    )


def make_lane(lane_id, y_center, width=3.6, x0=-300.0, x1=700.0):
    return LaneGeometry(lane_id, np.array([[x0, y_center], [x1, y_center]]), width)


def build_scenario(tracks, lanes=(), av="av", scenario_id="test"):
    return Scenario(scenario_id=scenario_id, frame_rate=10.0,
                    tracks=tuple(tracks), lanes=tuple(lanes), av_track_id=av)


def cruising_av(speed=10.0, y=0.0, x0=0.0, track_id="av"):
    t = np.arange(N) / 10.0
    return make_track(track_id, x0 + speed * t, y, vx=speed, length=5.2, width=2.1)


def mirror_scenario(scenario):
    """Reflect the scenario about the x-axis (lane axis for straight lanes)."""
    tracks = []
    for t in scenario.tracks:
        tracks.append(AgentTrack(
            track_id=t.track_id, agent_type=t.agent_type,
            x=t.x.copy(), y=-t.y, heading=-t.heading,
            vx=t.vx.copy(), vy=-t.vy, length=t.length.copy(),
            width=t.width.copy(), valid=t.valid.copy(),
        ))
    lanes = []
    for l in scenario.lanes:
        pts = l.centerline.copy()
        pts[:, 1] = -pts[:, 1]
        lanes.append(LaneGeometry(l.lane_id, pts, l.width))
    return Scenario(scenario_id=scenario.scenario_id, frame_rate=scenario.frame_rate,
                    tracks=tuple(tracks), lanes=tuple(lanes),
                    av_track_id=scenario.av_track_id)


# ---------------------------------------------------------------------------
# independent oracles


def mw_exact_p_brute(a, b):
    """Two-sided Mann-Whitney p by full enumeration of labelings."""
    pooled = list(a) + list(b)
    n1, n = len(a), len(a) + len(b)

    def u_stat(idx):
        chosen = set(idx)
        group_a = [pooled[i] for i in idx]
        group_b = [pooled[i] for i in range(n) if i not in chosen]
        u = 0.0
        for x in group_a:
            for y in group_b:
                u += 1.0 if x > y else (0.5 if x == y else 0.0)
        return u

    us = [u_stat(c) for c in itertools.combinations(range(n), n1)]
    u_obs = u_stat(tuple(range(n1)))
    p_le = sum(1 for v in us if v <= u_obs + 1e-9) / len(us)
    p_ge = sum(1 for v in us if v >= u_obs - 1e-9) / len(us)
    return min(1.0, 2.0 * min(p_le, p_ge))


def cliffs_delta_brute(a, b):
    greater = less = 0
    for x in a:
        for y in b:
            if x > y:
                greater += 1
            elif x < y:
                less += 1
    return (greater - less) / (len(a) * len(b))


def polyline_min_distance_brute(point, centerline):
    """Unsigned distance to a polyline by brute force over segments."""
    p = np.asarray(point, dtype=float)
    best = np.inf
    for a, b in zip(centerline[:-1], centerline[1:]):
        d = b - a
        t = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(p - (a + t * d))))
    return best


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240917)
