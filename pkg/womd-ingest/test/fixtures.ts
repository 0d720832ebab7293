/** Hand-encoded WOMD scenario fixtures (schema field numbers as in the
 * public scenario.proto / map.proto). */

import { ProtoWriter } from "../src/proto";
import { writeTfRecord } from "../src/tfrecord";

export const N_FRAMES = 91;

export interface FixtureTrack {
  id: number;
  objectType: number;
  /** per-frame [x, y, heading, vx, vy, length, width] or null for invalid */
  states: Array<[number, number, number, number, number, number, number] | null>;
}

export interface FixtureScenario {
  scenarioId: string;
  sdcIndex: number;
  tracks: FixtureTrack[];
  lanes: Array<{ id: number; polyline: Array<[number, number]> }>;
  extraRoadEdge?: boolean;
}

export function cruisingTrack(id: number, y: number, speed: number,
                              objectType = 1,
                              invalidFrames: number[] = []): FixtureTrack {
  const bad = new Set(invalidFrames);
  const states: FixtureTrack["states"] = [];
  for (let f = 0; f < N_FRAMES; f++) {
    if (bad.has(f)) {
      states.push(null);
      continue;
    }
    states.push([speed * f * 0.1, y, 0.0, speed, 0.0, 4.8, 1.9]);
  }
  return { id, objectType, states };
}

export function encodeScenario(fix: FixtureScenario): Buffer {
  const w = new ProtoWriter();
  w.packedDoubles(1, Array.from({ length: N_FRAMES }, (_, i) => i * 0.1));
  for (const track of fix.tracks) {
    w.message(2, (tw) => {
      tw.varint(1, track.id);
      tw.varint(2, track.objectType);
      for (const s of track.states) {
        tw.message(3, (sw) => {
          if (s === null) {
            sw.bool(11, false);
            return;
          }
          sw.double(2, s[0]);
          sw.double(3, s[1]);
          sw.double(4, 0.0);       // center_z, ignored
          sw.float(5, s[5]);
          sw.float(6, s[6]);
          sw.float(7, 1.5);        // height, ignored
          sw.float(8, s[2]);
          sw.float(9, s[3]);
          sw.float(10, s[4]);
          sw.bool(11, true);
        });
      }
    });
  }
  w.string(5, fix.scenarioId);
  w.varint(6, fix.sdcIndex);
  for (const lane of fix.lanes) {
    w.message(8, (fw) => {
      fw.varint(1, lane.id);
      fw.message(3, (lw) => {
        lw.double(1, 45.0);        // speed_limit_mph, ignored
        for (const [x, y] of lane.polyline) {
          lw.message(8, (pw) => {
            pw.double(1, x);
            pw.double(2, y);
            pw.double(3, 0.0);
          });
        }
      });
    });
  }
  if (fix.extraRoadEdge) {
    // a road_edge feature (field 5) the converter must ignore
    w.message(8, (fw) => {
      fw.varint(1, 999);
      fw.message(5, (ew) => {
        ew.varint(1, 1);
      });
    });
  }
  return w.finish();
}

export function standardFixture(): FixtureScenario {
  return {
    scenarioId: "womd-sample-001",
    sdcIndex: 0,
    tracks: [
      cruisingTrack(100, 0.0, 8.0, 1),
      cruisingTrack(200, 3.6, 9.5, 1, [5, 6, 7]),
      cruisingTrack(300, -4.0, 1.2, 2),
    ],
    lanes: [
      { id: 10, polyline: [[-100, 0], [0, 0], [0, 0], [300, 0]] },  // dup point
      { id: 11, polyline: [[-100, 3.6], [300, 3.6]] },
    ],
    extraRoadEdge: true,
  };
}

export function tfrecordFile(scenarios: Buffer[]): Buffer {
  return Buffer.concat(scenarios.map(writeTfRecord));
}
