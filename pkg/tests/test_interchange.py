"""Interchange format: round-trips, schema errors, strict vs lenient parsing."""

import io
import json

import numpy as np
import pytest

from conftest import N, build_scenario, cruising_av, make_lane, make_track
from cutin_miner.interchange import (
    InterchangeError,
    parse_scenario_stream,
    scenario_from_record,
    scenario_to_record,
    write_scenario_stream,
)
from cutin_miner.synth import CorpusConfig, generate_corpus


def _sample_scenario():
    valid = np.ones(N, dtype=bool)
    valid[5:8] = False
    x = np.linspace(0, 90, N)
    x[5:8] = np.nan
    veh = make_track("veh", x, 3.6, vx=9.0, valid=valid)
    return build_scenario([cruising_av(speed=8.0), veh],
                          lanes=[make_lane("L1", 0.0), make_lane("L2", 3.6)],
                          scenario_id="rt")


def _tracks_equal(a, b):
    if a.track_id != b.track_id or a.agent_type != b.agent_type:
        return False
    if not np.array_equal(a.valid, b.valid):
        return False
    v = a.valid
    for f in ("x", "y", "heading", "vx", "vy", "length", "width"):
        if not np.array_equal(getattr(a, f)[v], getattr(b, f)[v]):
            return False
    return True


def test_roundtrip_identity():
    s = _sample_scenario()
    buf = io.StringIO()
    write_scenario_stream([s], buf)
    buf.seek(0)
    (back,) = list(parse_scenario_stream(buf))
    assert back.scenario_id == s.scenario_id
    assert back.av_track_id == s.av_track_id
    assert len(back.tracks) == len(s.tracks)
    for ta, tb in zip(s.tracks, back.tracks):
        assert _tracks_equal(ta, tb)
    for la, lb in zip(s.lanes, back.lanes):
        assert la.lane_id == lb.lane_id
        assert la.width == lb.width
        assert np.array_equal(la.centerline, lb.centerline)


def test_synth_corpus_roundtrips_field_exact():
    cfp, lfp = io.StringIO(), io.StringIO()
    generate_corpus(CorpusConfig.demo(n=50, seed=3), cfp, lfp)
    first_pass = cfp.getvalue()
    assert first_pass.count("\n") == 50
    cfp.seek(0)
    scenarios = list(parse_scenario_stream(cfp))
    assert [s.scenario_id for s in scenarios] == [f"demo-{i:05d}" for i in range(50)]
    buf = io.StringIO()
    write_scenario_stream(scenarios, buf)
    assert buf.getvalue() == first_pass


def test_duplicate_av_designation_is_reported():
    rec = scenario_to_record(_sample_scenario())
    rec["tracks"].append(dict(rec["tracks"][0]))  # second track named "av"
    with pytest.raises(InterchangeError, match="duplicate AV designation"):
        scenario_from_record(rec)


def test_missing_field_and_bad_arity():
    rec = scenario_to_record(_sample_scenario())
    del rec["av_track_id"]
    with pytest.raises(InterchangeError, match="av_track_id"):
        scenario_from_record(rec)
    rec = scenario_to_record(_sample_scenario())
    rec["tracks"][0]["states"][4] = [1.0, 2.0]
    with pytest.raises(InterchangeError, match="arity"):
        scenario_from_record(rec)


def test_wrong_frame_rate_rejected():
    rec = scenario_to_record(_sample_scenario())
    rec["frame_rate_hz"] = 20
    with pytest.raises(InterchangeError, match="Hz"):
        scenario_from_record(rec)


def test_wrong_format_version_rejected():
    rec = scenario_to_record(_sample_scenario())
    rec["format_version"] = 2
    with pytest.raises(InterchangeError, match="format_version"):
        scenario_from_record(rec)


def test_default_lane_width_applied_and_counted():
    rec = scenario_to_record(_sample_scenario())
    rec["lanes"][0]["width_m"] = None
    s = scenario_from_record(rec)
    assert s.lane("L1").width == 3.6
    assert s.meta["defaulted_lane_widths"] == 1


def test_lenient_mode_skips_with_line_numbers():
    s = _sample_scenario()
    good = json.dumps(scenario_to_record(s))
    lines = [good, "{not json", good, '{"format_version": 1}']
    errors = []
    out = list(parse_scenario_stream(lines, on_error=errors.append))
    assert len(out) == 2
    assert len(errors) == 2
    assert errors[0].line_no == 2
    assert errors[1].line_no == 4


def test_strict_mode_aborts():
    s = _sample_scenario()
    lines = [json.dumps(scenario_to_record(s)), "garbage"]
    with pytest.raises(InterchangeError, match="line 2"):
        list(parse_scenario_stream(lines, strict=True))
