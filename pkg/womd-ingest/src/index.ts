export { crc32c, maskedCrc32c } from "./crc32c";
export { readTfRecords, writeTfRecord, TfRecordError } from "./tfrecord";
export { decodeScenario } from "./womd";
export type { WomdScenario, Track, ObjectState, LaneCenter } from "./womd";
export {
  ConversionError,
  convertBuffer,
  toInterchange,
} from "./convert";
export type {
  ConversionReport,
  ConvertOptions,
  InterchangeRecord,
  SkipReason,
} from "./convert";
export { convertFiles, expandGlob } from "./cli";
