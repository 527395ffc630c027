/** Decoders for the two payload formats the service serves. */

export interface DecodedImage {
  width: number;
  height: number;
  depth: number; // 1 for 2-D
  maxval: number;
  /** Row-major samples, x fastest (slice-major for volumes). */
  data: Uint16Array;
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

/** Read `count` ASCII integer tokens, honoring '#' comment lines. */
function readTokens(bytes: Uint8Array, start: number, count: number): { values: number[]; end: number } {
  const values: number[] = [];
  let i = start;
  while (values.length < count) {
    while (i < bytes.length && isSpace(bytes[i])) i++;
    if (bytes[i] === 0x23) {
      while (i < bytes.length && bytes[i] !== 0x0a) i++;
      continue;
    }
    let token = "";
    while (i < bytes.length && !isSpace(bytes[i])) {
      token += String.fromCharCode(bytes[i]);
      i++;
    }
    if (!token) throw new Error("truncated header");
    const value = Number(token);
    if (!Number.isInteger(value)) throw new Error(`bad header token '${token}'`);
    values.push(value);
  }
  return { values, end: i + 1 }; // one whitespace after the last token
}

export function decodePgm(buffer: ArrayBuffer): DecodedImage {
  const bytes = new Uint8Array(buffer);
  if (bytes[0] !== 0x50 || bytes[1] !== 0x35) throw new Error("not a P5 PGM");
  const { values, end } = readTokens(bytes, 2, 3);
  const [width, height, maxval] = values;
  const count = width * height;
  const data = new Uint16Array(count);
  if (maxval > 255) {
    if (bytes.length < end + 2 * count) throw new Error("PGM raster truncated");
    for (let i = 0; i < count; i++) {
      data[i] = (bytes[end + 2 * i] << 8) | bytes[end + 2 * i + 1]; // big-endian
    }
  } else {
    if (bytes.length < end + count) throw new Error("PGM raster truncated");
    data.set(bytes.subarray(end, end + count));
  }
  return { width, height, depth: 1, maxval, data };
}

export function decodeGrid3d(buffer: ArrayBuffer): DecodedImage {
  const bytes = new Uint8Array(buffer);
  let nl = 0;
  while (nl < bytes.length && bytes[nl] !== 0x0a) nl++;
  const header = new TextDecoder().decode(bytes.subarray(0, nl)).trim().split(/\s+/);
  if (header[0] !== "G3D" || header.length !== 5) throw new Error("not a grid3d payload");
  const [dx, dy, dz, bits] = header.slice(1).map(Number);
  const count = dx * dy * dz;
  const start = nl + 1;
  const data = new Uint16Array(count);
  if (bits === 16) {
    if (bytes.length < start + 2 * count) throw new Error("grid3d raster truncated");
    for (let i = 0; i < count; i++) {
      data[i] = bytes[start + 2 * i] | (bytes[start + 2 * i + 1] << 8); // little-endian
    }
  } else if (bits === 8) {
    if (bytes.length < start + count) throw new Error("grid3d raster truncated");
    data.set(bytes.subarray(start, start + count));
  } else {
    throw new Error(`unsupported grid3d bit depth ${bits}`);
  }
  return { width: dx, height: dy, depth: dz, maxval: (1 << bits) - 1, data };
}

export function decodeImagePayload(buffer: ArrayBuffer): DecodedImage {
  const bytes = new Uint8Array(buffer);
  if (bytes[0] === 0x50 && bytes[1] === 0x35) return decodePgm(buffer);
  return decodeGrid3d(buffer);
}

/** One axial slice of a decoded payload as a flat (width*height) view. */
export function sliceOf(image: DecodedImage, z: number): Uint16Array {
  const planeSize = image.width * image.height;
  return image.data.subarray(z * planeSize, (z + 1) * planeSize);
}

export function decodeBase64Mask(b64: string, dims: number[]): Uint8Array {
  const raw = atob(b64);
  const total = dims.reduce((a, b) => a * b, 1);
  if (raw.length !== total) {
    throw new Error(`mask payload is ${raw.length} bytes, expected ${total}`);
  }
  const out = new Uint8Array(total);
  for (let i = 0; i < total; i++) out[i] = raw.charCodeAt(i);
  return out;
}
