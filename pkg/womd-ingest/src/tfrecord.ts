/** TFRecord container framing.
 *
 * Each record is [uint64le length][uint32le masked-crc of the length bytes]
 * [payload][uint32le masked-crc of the payload]. Checksums are verified;
 * a bad frame aborts the file (the remainder is unreadable).
 */

import { maskedCrc32c } from "./crc32c";

export class TfRecordError extends Error {}

export function* readTfRecords(data: Buffer): Generator<Buffer> {
  let off = 0;
  while (off < data.length) {
    if (off + 12 > data.length) {
      throw new TfRecordError(`truncated record header at byte ${off}`);
    }
    const lenBuf = data.subarray(off, off + 8);
    const length = Number(lenBuf.readBigUInt64LE(0));
    const lenCrc = data.readUInt32LE(off + 8);
    if (lenCrc !== maskedCrc32c(lenBuf)) {
      throw new TfRecordError(`length checksum mismatch at byte ${off}`);
    }
    const start = off + 12;
    if (start + length + 4 > data.length) {
      throw new TfRecordError(`truncated record payload at byte ${off}`);
    }
    const payload = data.subarray(start, start + length);
    const dataCrc = data.readUInt32LE(start + length);
    if (dataCrc !== maskedCrc32c(payload)) {
      throw new TfRecordError(`payload checksum mismatch at byte ${off}`);
    }
    yield payload;
    off = start + length + 4;
  }
}

/** Framing writer, used to build fixtures and round-trip tests. */
export function writeTfRecord(payload: Buffer): Buffer {
  const lenBuf = Buffer.alloc(8);
  lenBuf.writeBigUInt64LE(BigInt(payload.length), 0);
  const head = Buffer.alloc(4);
  head.writeUInt32LE(maskedCrc32c(lenBuf), 0);
  const tail = Buffer.alloc(4);
  tail.writeUInt32LE(maskedCrc32c(payload), 0);
  return Buffer.concat([lenBuf, head, payload, tail]);
}
