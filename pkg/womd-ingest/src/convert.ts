/** WOMD scenario -> interchange record conversion with skip accounting. */

import { TfRecordError, readTfRecords } from "./tfrecord";
import { ProtoError } from "./proto";
import { WomdScenario, decodeScenario } from "./womd";

export const FORMAT_VERSION = 1;
export const FRAME_RATE_HZ = 10;

// same rule the mining engine applies; running it here just shrinks output
const ELIGIBLE_MIN_SPEED = 5.0;
const ELIGIBLE_MIN_FRAMES = 50;

export type SkipReason = "not-eligible" | "missing-map" | "parse-error";

export interface ConversionReport {
  filesRead: number;
  converted: number;
  skipped: Record<SkipReason, number>;
  outputPath: string;
}

export interface ConvertOptions {
  prefilterEligible?: boolean;
  limit?: number;
}

const AGENT_TYPES: Record<number, string> = {
  0: "other",
  1: "vehicle",
  2: "pedestrian",
  3: "cyclist",
  4: "other",
};

type StateTuple = [number, number, number, number, number, number, number, number];

export interface InterchangeRecord {
  format_version: number;
  scenario_id: string;
  frame_rate_hz: number;
  av_track_id: string;
  lanes: Array<{ lane_id: string; width_m: null; centerline: Array<[number, number]> }>;
  tracks: Array<{ track_id: string; agent_type: string; states: Array<StateTuple | null> }>;
}

export class ConversionError extends Error {
  constructor(message: string, readonly reason: SkipReason) {
    super(message);
  }
}

function dedupedCenterline(points: Array<[number, number]>): Array<[number, number]> {
  // the interchange format forbids coincident consecutive points
  const out: Array<[number, number]> = [];
  for (const p of points) {
    const last = out[out.length - 1];
    if (last && last[0] === p[0] && last[1] === p[1]) continue;
    out.push(p);
  }
  return out;
}

function avIsEligible(scenario: WomdScenario): boolean {
  const av = scenario.tracks[scenario.sdcTrackIndex];
  let run = 0;
  for (const s of av.states) {
    const ok = s.valid && Math.hypot(s.velocityX, s.velocityY) >= ELIGIBLE_MIN_SPEED;
    run = ok ? run + 1 : 0;
    if (run >= ELIGIBLE_MIN_FRAMES) return true;
  }
  return false;
}

export function toInterchange(scenario: WomdScenario,
                              options: ConvertOptions = {}): InterchangeRecord {
  if (scenario.sdcTrackIndex < 0 || scenario.sdcTrackIndex >= scenario.tracks.length) {
    throw new ConversionError(
      `bad sdc_track_index ${scenario.sdcTrackIndex}`, "parse-error");
  }
  const lanes = scenario.lanes
    .map((lane) => ({
      lane_id: lane.featureId.toString(),
      width_m: null as null, // widths are never invented here
      centerline: dedupedCenterline(lane.polyline),
    }))
    .filter((lane) => lane.centerline.length >= 2);
  if (lanes.length === 0) {
    throw new ConversionError(
      `scenario ${scenario.scenarioId}: no usable lane centerlines`, "missing-map");
  }
  if (options.prefilterEligible && !avIsEligible(scenario)) {
    throw new ConversionError(
      `scenario ${scenario.scenarioId}: AV speed below the eligibility rule`,
      "not-eligible");
  }

  const frameCount = Math.max(...scenario.tracks.map((t) => t.states.length));
  const tracks = scenario.tracks.map((t) => {
    const states: Array<StateTuple | null> = [];
    for (let i = 0; i < frameCount; i++) {
      const s = t.states[i];
      if (!s || !s.valid) {
        states.push(null);
        continue;
      }
      states.push([s.centerX, s.centerY, s.heading, s.velocityX, s.velocityY,
                   s.length, s.width, 1]);
    }
    return {
      track_id: t.id.toString(),
      agent_type: AGENT_TYPES[t.objectType] ?? "other",
      states,
    };
  });

  return {
    format_version: FORMAT_VERSION,
    scenario_id: scenario.scenarioId,
    frame_rate_hz: FRAME_RATE_HZ,
    av_track_id: scenario.tracks[scenario.sdcTrackIndex].id.toString(),
    lanes,
    tracks,
  };
}

export interface FileResult {
  records: InterchangeRecord[];
  skipped: Record<SkipReason, number>;
}

export function convertBuffer(data: Buffer, options: ConvertOptions = {}): FileResult {
  const result: FileResult = {
    records: [],
    skipped: { "not-eligible": 0, "missing-map": 0, "parse-error": 0 },
  };
  let frames: Generator<Buffer>;
  try {
    frames = readTfRecords(data);
    for (const payload of frames) {
      if (options.limit !== undefined
          && result.records.length >= options.limit) {
        break;
      }
      try {
        const scenario = decodeScenario(payload);
        result.records.push(toInterchange(scenario, options));
      } catch (err) {
        if (err instanceof ConversionError) {
          result.skipped[err.reason]++;
        } else if (err instanceof ProtoError) {
          result.skipped["parse-error"]++;
        } else {
          throw err;
        }
      }
    }
  } catch (err) {
    if (err instanceof TfRecordError) {
      // the rest of the file is unreadable past a bad frame
      result.skipped["parse-error"]++;
    } else {
      throw err;
    }
  }
  return result;
}
