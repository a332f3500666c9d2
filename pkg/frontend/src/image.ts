/**
 * Minimal PPM/PGM image loading and edge-replication padding.
 *
 * Binary P6 (RGB) and P5 (grayscale, replicated to RGB) with 8-bit depth
 * cover the adapter's needs without an image decoding dependency.
 */
import { readFileSync } from "node:fs";

export interface RgbImage {
  width: number;
  height: number;
  /** row-major RGB triplets, length = width * height * 3 */
  data: Float32Array;
}

function parseHeader(buf: Buffer): { magic: string; fields: number[]; offset: number } {
  // header tokens separated by whitespace; '#' starts a comment to EOL
  let pos = 0;
  const tokens: string[] = [];
  while (tokens.length < 4 && pos < buf.length) {
    const ch = String.fromCharCode(buf[pos]);
    if (ch === "#") {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      pos++;
    } else if (/\s/.test(ch)) {
      pos++;
    } else {
      let start = pos;
      while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
      tokens.push(buf.subarray(start, pos).toString("ascii"));
    }
  }
  if (tokens.length < 4) throw new Error("truncated image header");
  pos++; // single whitespace after maxval
  return {
    magic: tokens[0],
    fields: tokens.slice(1).map((t) => parseInt(t, 10)),
    offset: pos,
  };
}

export function loadImage(path: string): RgbImage {
  const buf = readFileSync(path);
  const { magic, fields, offset } = parseHeader(buf);
  const [width, height, maxval] = fields;
  if (!Number.isFinite(width) || !Number.isFinite(height) || width < 1 || height < 1) {
    throw new Error(`bad image dimensions ${width}x${height}`);
  }
  if (maxval !== 255) throw new Error(`only 8-bit images supported, maxval=${maxval}`);
  const pixels = width * height;
  const data = new Float32Array(pixels * 3);
  if (magic === "P6") {
    if (buf.length < offset + pixels * 3) throw new Error("truncated P6 payload");
    for (let i = 0; i < pixels * 3; i++) data[i] = buf[offset + i] / 255;
  } else if (magic === "P5") {
    if (buf.length < offset + pixels) throw new Error("truncated P5 payload");
    for (let i = 0; i < pixels; i++) {
      const v = buf[offset + i] / 255;
      data[3 * i] = v;
      data[3 * i + 1] = v;
      data[3 * i + 2] = v;
    }
  } else {
    throw new Error(`unsupported image magic ${magic}`);
  }
  return { width, height, data };
}

export function padToMultiple(multiple: number, size: number): number {
  return Math.ceil(size / multiple) * multiple;
}

/** Pad right/bottom by edge replication so strided transforms divide evenly. */
export function padImage(img: RgbImage, multiple: number): RgbImage {
  const width = padToMultiple(multiple, img.width);
  const height = padToMultiple(multiple, img.height);
  if (width === img.width && height === img.height) return img;
  const data = new Float32Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    const sy = Math.min(y, img.height - 1);
    for (let x = 0; x < width; x++) {
      const sx = Math.min(x, img.width - 1);
      const src = (sy * img.width + sx) * 3;
      const dst = (y * width + x) * 3;
      data[dst] = img.data[src];
      data[dst + 1] = img.data[src + 1];
      data[dst + 2] = img.data[src + 2];
    }
  }
  return { width, height, data };
}
