/** Decoder for the publicly documented WOMD scenario protobuf schema.
 *
 * Field numbers follow waymo_open_dataset/protos/scenario.proto and
 * map.proto. Only the fields the interchange format needs are decoded;
 * everything else is skipped by field number.
 */

import {
  Field,
  ProtoError,
  asBool,
  asBytes,
  asDouble,
  asFloat,
  asInt,
  iterFields,
} from "./proto";

export interface ObjectState {
  centerX: number;
  centerY: number;
  length: number;
  width: number;
  heading: number;
  velocityX: number;
  velocityY: number;
  valid: boolean;
}

export interface Track {
  id: number;
  objectType: number; // 0 unset, 1 vehicle, 2 pedestrian, 3 cyclist, 4 other
  states: ObjectState[];
}

export interface LaneCenter {
  featureId: bigint;
  polyline: Array<[number, number]>;
}

export interface WomdScenario {
  scenarioId: string;
  timestamps: number[];
  tracks: Track[];
  lanes: LaneCenter[];
  sdcTrackIndex: number;
}

// scenario.proto
const SCENARIO_TIMESTAMPS = 1;
const SCENARIO_TRACKS = 2;
const SCENARIO_ID = 5;
const SCENARIO_SDC_INDEX = 6;
const SCENARIO_MAP_FEATURES = 8;

const TRACK_ID = 1;
const TRACK_OBJECT_TYPE = 2;
const TRACK_STATES = 3;

const STATE_CENTER_X = 2;
const STATE_CENTER_Y = 3;
const STATE_LENGTH = 5;
const STATE_WIDTH = 6;
const STATE_HEADING = 8;
const STATE_VELOCITY_X = 9;
const STATE_VELOCITY_Y = 10;
const STATE_VALID = 11;

// map.proto
const FEATURE_ID = 1;
const FEATURE_LANE = 3;
const LANE_POLYLINE = 8;
const MAP_POINT_X = 1;
const MAP_POINT_Y = 2;

function decodeState(buf: Buffer): ObjectState {
  const s: ObjectState = {
    centerX: 0, centerY: 0, length: 0, width: 0,
    heading: 0, velocityX: 0, velocityY: 0, valid: false,
  };
  for (const f of iterFields(buf)) {
    switch (f.fieldNo) {
      case STATE_CENTER_X: s.centerX = asDouble(f); break;
      case STATE_CENTER_Y: s.centerY = asDouble(f); break;
      case STATE_LENGTH: s.length = asFloat(f); break;
      case STATE_WIDTH: s.width = asFloat(f); break;
      case STATE_HEADING: s.heading = asFloat(f); break;
      case STATE_VELOCITY_X: s.velocityX = asFloat(f); break;
      case STATE_VELOCITY_Y: s.velocityY = asFloat(f); break;
      case STATE_VALID: s.valid = asBool(f); break;
      default: break;
    }
  }
  return s;
}

function decodeTrack(buf: Buffer): Track {
  const track: Track = { id: -1, objectType: 0, states: [] };
  for (const f of iterFields(buf)) {
    switch (f.fieldNo) {
      case TRACK_ID: track.id = asInt(f); break;
      case TRACK_OBJECT_TYPE: track.objectType = asInt(f); break;
      case TRACK_STATES: track.states.push(decodeState(asBytes(f))); break;
      default: break;
    }
  }
  return track;
}

function decodeLanePolyline(buf: Buffer): Array<[number, number]> {
  const points: Array<[number, number]> = [];
  for (const f of iterFields(buf)) {
    if (f.fieldNo !== LANE_POLYLINE) continue;
    let x = 0;
    let y = 0;
    for (const p of iterFields(asBytes(f))) {
      if (p.fieldNo === MAP_POINT_X) x = asDouble(p);
      else if (p.fieldNo === MAP_POINT_Y) y = asDouble(p);
    }
    points.push([x, y]);
  }
  return points;
}

function decodeMapFeature(buf: Buffer): LaneCenter | null {
  let featureId = 0n;
  let lane: Buffer | null = null;
  for (const f of iterFields(buf)) {
    if (f.fieldNo === FEATURE_ID && f.varint !== undefined) featureId = f.varint;
    else if (f.fieldNo === FEATURE_LANE) lane = asBytes(f);
  }
  if (lane === null) return null; // road line / edge / crosswalk / ...
  return { featureId, polyline: decodeLanePolyline(lane) };
}

function decodePackedDoubles(f: Field): number[] {
  if (f.wireType === 1 && f.fixed) return [f.fixed.readDoubleLE(0)];
  const buf = asBytes(f);
  if (buf.length % 8 !== 0) throw new ProtoError("bad packed double length");
  const out: number[] = [];
  for (let i = 0; i < buf.length; i += 8) out.push(buf.readDoubleLE(i));
  return out;
}

export function decodeScenario(buf: Buffer): WomdScenario {
  const scenario: WomdScenario = {
    scenarioId: "", timestamps: [], tracks: [], lanes: [], sdcTrackIndex: -1,
  };
  for (const f of iterFields(buf)) {
    switch (f.fieldNo) {
      case SCENARIO_TIMESTAMPS:
        scenario.timestamps.push(...decodePackedDoubles(f));
        break;
      case SCENARIO_TRACKS:
        scenario.tracks.push(decodeTrack(asBytes(f)));
        break;
      case SCENARIO_ID:
        scenario.scenarioId = asBytes(f).toString("utf-8");
        break;
      case SCENARIO_SDC_INDEX:
        scenario.sdcTrackIndex = asInt(f);
        break;
      case SCENARIO_MAP_FEATURES: {
        const lane = decodeMapFeature(asBytes(f));
        if (lane !== null) scenario.lanes.push(lane);
        break;
      }
      default:
        break;
    }
  }
  return scenario;
}
