/** Minimal protobuf wire-format reader (and writer, for test fixtures).
 *
 * Only what the scenario schema needs: varint, fixed32/64, and
 * length-delimited fields, with packed repeated scalars.
 */

export class ProtoError extends Error {}

export const WIRE_VARINT = 0;
export const WIRE_FIXED64 = 1;
export const WIRE_LEN = 2;
export const WIRE_FIXED32 = 5;

export interface Field {
  fieldNo: number;
  wireType: number;
  /** varint value (bigint to stay exact for 64-bit ids) */
  varint?: bigint;
  /** raw bytes for LEN fields */
  bytes?: Buffer;
  /** raw 4/8-byte scalar buffers */
  fixed?: Buffer;
}

export function readVarint(buf: Buffer, off: number): [bigint, number] {
  let result = 0n;
  let shift = 0n;
  let pos = off;
  for (;;) {
    if (pos >= buf.length) throw new ProtoError("truncated varint");
    const byte = buf[pos++];
    result |= BigInt(byte & 0x7f) << shift;
    if ((byte & 0x80) === 0) return [result, pos];
    shift += 7n;
    if (shift > 70n) throw new ProtoError("varint too long");
  }
}

export function* iterFields(buf: Buffer): Generator<Field> {
  let off = 0;
  while (off < buf.length) {
    const [tag, afterTag] = readVarint(buf, off);
    off = afterTag;
    const fieldNo = Number(tag >> 3n);
    const wireType = Number(tag & 7n);
    if (fieldNo === 0) throw new ProtoError("field number 0");
    switch (wireType) {
      case WIRE_VARINT: {
        const [value, next] = readVarint(buf, off);
        off = next;
        yield { fieldNo, wireType, varint: value };
        break;
      }
      case WIRE_FIXED64: {
        if (off + 8 > buf.length) throw new ProtoError("truncated fixed64");
        yield { fieldNo, wireType, fixed: buf.subarray(off, off + 8) };
        off += 8;
        break;
      }
      case WIRE_LEN: {
        const [len, next] = readVarint(buf, off);
        off = next + Number(len);
        if (off > buf.length) throw new ProtoError("truncated length-delimited field");
        yield { fieldNo, wireType, bytes: buf.subarray(next, off) };
        break;
      }
      case WIRE_FIXED32: {
        if (off + 4 > buf.length) throw new ProtoError("truncated fixed32");
        yield { fieldNo, wireType, fixed: buf.subarray(off, off + 4) };
        off += 4;
        break;
      }
      default:
        throw new ProtoError(`unsupported wire type ${wireType}`);
    }
  }
}

export function asDouble(f: Field): number {
  if (f.wireType === WIRE_FIXED64 && f.fixed) return f.fixed.readDoubleLE(0);
  throw new ProtoError(`field ${f.fieldNo}: expected double`);
}

export function asFloat(f: Field): number {
  if (f.wireType === WIRE_FIXED32 && f.fixed) return f.fixed.readFloatLE(0);
  throw new ProtoError(`field ${f.fieldNo}: expected float`);
}

export function asBool(f: Field): boolean {
  if (f.wireType === WIRE_VARINT && f.varint !== undefined) return f.varint !== 0n;
  throw new ProtoError(`field ${f.fieldNo}: expected bool`);
}

export function asInt(f: Field): number {
  if (f.wireType === WIRE_VARINT && f.varint !== undefined) {
    return Number(BigInt.asIntN(64, f.varint));
  }
  throw new ProtoError(`field ${f.fieldNo}: expected varint`);
}

export function asBytes(f: Field): Buffer {
  if (f.wireType === WIRE_LEN && f.bytes) return f.bytes;
  throw new ProtoError(`field ${f.fieldNo}: expected length-delimited`);
}

// ---------------------------------------------------------------------------
// writer (fixtures / round-trip tests)

export class ProtoWriter {
  private parts: Buffer[] = [];

  static varintBytes(value: bigint): Buffer {
    const out: number[] = [];
    let v = BigInt.asUintN(64, value);
    do {
      let byte = Number(v & 0x7fn);
      v >>= 7n;
      if (v !== 0n) byte |= 0x80;
      out.push(byte);
    } while (v !== 0n);
    return Buffer.from(out);
  }

  private tag(fieldNo: number, wireType: number): void {
    this.parts.push(ProtoWriter.varintBytes(BigInt((fieldNo << 3) | wireType)));
  }

  varint(fieldNo: number, value: number | bigint): this {
    this.tag(fieldNo, WIRE_VARINT);
    this.parts.push(ProtoWriter.varintBytes(BigInt(value)));
    return this;
  }

  bool(fieldNo: number, value: boolean): this {
    return this.varint(fieldNo, value ? 1 : 0);
  }

  double(fieldNo: number, value: number): this {
    this.tag(fieldNo, WIRE_FIXED64);
    const b = Buffer.alloc(8);
    b.writeDoubleLE(value, 0);
    this.parts.push(b);
    return this;
  }

  float(fieldNo: number, value: number): this {
    this.tag(fieldNo, WIRE_FIXED32);
    const b = Buffer.alloc(4);
    b.writeFloatLE(value, 0);
    this.parts.push(b);
    return this;
  }

  string(fieldNo: number, value: string): this {
    return this.bytes(fieldNo, Buffer.from(value, "utf-8"));
  }

  bytes(fieldNo: number, value: Buffer): this {
    this.tag(fieldNo, WIRE_LEN);
    this.parts.push(ProtoWriter.varintBytes(BigInt(value.length)), value);
    return this;
  }

  message(fieldNo: number, build: (w: ProtoWriter) => void): this {
    const w = new ProtoWriter();
    build(w);
    return this.bytes(fieldNo, w.finish());
  }

  packedDoubles(fieldNo: number, values: number[]): this {
    const b = Buffer.alloc(8 * values.length);
    values.forEach((v, i) => b.writeDoubleLE(v, i * 8));
    return this.bytes(fieldNo, b);
  }

  finish(): Buffer {
    return Buffer.concat(this.parts);
  }
}
