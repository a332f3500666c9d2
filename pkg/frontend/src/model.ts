/**
 * Reduced-width compression transforms with reproducible weights.
 *
 * Each model family ships a JSON config naming its padding multiple,
 * quality-level partition, and per-variant channel widths; weights are
 * derived from the config seed with a deterministic PRNG when the model is
 * loaded, so two executions of the same modality are bit-identical. The
 * runtime is a strided-convolution analysis transform followed by a
 * transposed-convolution synthesis transform with a rounding bottleneck in
 * between: the full encode+decode chain the measurement protocol drives,
 * at desk-scale channel widths.
 */
import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { RgbImage, padImage } from "./image.js";

export interface VariantConfig {
  n: number;
  m: number;
}

export interface ModelConfig {
  name: string;
  fullName: string;
  padMultiple: number;
  lowLevels: number[];
  highLevels: number[];
  channels: { low: VariantConfig; high: VariantConfig };
  seed: number;
}

export interface Tensor {
  channels: number;
  width: number;
  height: number;
  data: Float32Array;
}

const KERNEL = 5;
const STRIDES = [2, 2, 2, 2];

/** xorshift128+ keyed by the config seed; stable across platforms. */
export class Prng {
  private s0: bigint;
  private s1: bigint;

  constructor(seed: number) {
    this.s0 = BigInt(seed) * 0x9e3779b97f4a7c15n + 1n;
    this.s1 = (BigInt(seed) ^ 0xdeadbeefcafen) * 0xbf58476d1ce4e5b9n + 1n;
    for (let i = 0; i < 8; i++) this.next();
  }

  next(): number {
    const mask = 0xffffffffffffffffn;
    let x = this.s0;
    const y = this.s1;
    this.s0 = y;
    x = (x ^ ((x << 23n) & mask)) & mask;
    x = x ^ (x >> 17n) ^ y ^ (y >> 26n);
    this.s1 = x & mask;
    const sum = (this.s0 + this.s1) & mask;
    // take the top 53 bits for a uniform double in [0, 1)
    return Number(sum >> 11n) / 2 ** 53;
  }

  uniform(scale: number): number {
    return (this.next() * 2 - 1) * scale;
  }
}

export function loadConfig(modelsDir: string, name: string): ModelConfig {
  const path = join(modelsDir, `${name}.json`);
  const config = JSON.parse(readFileSync(path, "utf-8")) as ModelConfig;
  for (const key of ["name", "padMultiple", "lowLevels", "highLevels", "channels", "seed"]) {
    if (!(key in config)) throw new Error(`${path}: missing key ${key}`);
  }
  return config;
}

export function variantForQuality(config: ModelConfig, quality: number): "low" | "high" {
  if (config.lowLevels.includes(quality)) return "low";
  if (config.highLevels.includes(quality)) return "high";
  throw new Error(
    `quality ${quality} outside ${config.name}'s range ` +
      `${config.lowLevels[0]}-${config.highLevels[config.highLevels.length - 1]}`
  );
}

interface ConvLayer {
  inCh: number;
  outCh: number;
  stride: number;
  weights: Float32Array; // [outCh][inCh][KERNEL][KERNEL]
  bias: Float32Array;
}

function makeLayer(prng: Prng, inCh: number, outCh: number): ConvLayer {
  const fanIn = inCh * KERNEL * KERNEL;
  const scale = Math.sqrt(1.5 / fanIn);
  const weights = new Float32Array(outCh * inCh * KERNEL * KERNEL);
  for (let i = 0; i < weights.length; i++) weights[i] = prng.uniform(scale);
  const bias = new Float32Array(outCh);
  for (let i = 0; i < outCh; i++) bias[i] = prng.uniform(0.05);
  return { inCh, outCh, stride: 2, weights, bias };
}

export class CompressionModel {
  readonly config: ModelConfig;
  readonly variant: "low" | "high";
  private analysis: ConvLayer[];
  private synthesis: ConvLayer[];

  constructor(config: ModelConfig, quality: number) {
    this.config = config;
    this.variant = variantForQuality(config, quality);
    const { n, m } = config.channels[this.variant];
    // quality shifts the seed so distinct operating points have distinct weights
    const prng = new Prng(config.seed * 1000 + quality);
    const encWidths = [3, n, n, n, m];
    const decWidths = [m, n, n, n, 3];
    this.analysis = [];
    this.synthesis = [];
    for (let i = 0; i < STRIDES.length; i++) {
      this.analysis.push(makeLayer(prng, encWidths[i], encWidths[i + 1]));
      this.synthesis.push(makeLayer(prng, decWidths[i], decWidths[i + 1]));
    }
  }

  private convDown(input: Tensor, layer: ConvLayer): Tensor {
    const ow = input.width / layer.stride;
    const oh = input.height / layer.stride;
    const out = new Float32Array(layer.outCh * ow * oh);
    const half = (KERNEL - 1) >> 1;
    for (let oc = 0; oc < layer.outCh; oc++) {
      for (let oy = 0; oy < oh; oy++) {
        for (let ox = 0; ox < ow; ox++) {
          let acc = layer.bias[oc];
          const cy = oy * layer.stride;
          const cx = ox * layer.stride;
          for (let ic = 0; ic < layer.inCh; ic++) {
            const wBase = ((oc * layer.inCh + ic) * KERNEL) * KERNEL;
            const iBase = ic * input.width * input.height;
            for (let ky = 0; ky < KERNEL; ky++) {
              const iy = cy + ky - half;
              if (iy < 0 || iy >= input.height) continue;
              for (let kx = 0; kx < KERNEL; kx++) {
                const ix = cx + kx - half;
                if (ix < 0 || ix >= input.width) continue;
                acc += layer.weights[wBase + ky * KERNEL + kx] * input.data[iBase + iy * input.width + ix];
              }
            }
          }
          // bounded nonlinearity keeps activations stable at any depth
          out[(oc * oh + oy) * ow + ox] = Math.tanh(acc);
        }
      }
    }
    return { channels: layer.outCh, width: ow, height: oh, data: out };
  }

  private convUp(input: Tensor, layer: ConvLayer): Tensor {
    const ow = input.width * layer.stride;
    const oh = input.height * layer.stride;
    const out = new Float32Array(layer.outCh * ow * oh);
    for (let oc = 0; oc < layer.outCh; oc++) {
      const oBase = oc * ow * oh;
      for (let i = 0; i < ow * oh; i++) out[oBase + i] = layer.bias[oc];
    }
    const half = (KERNEL - 1) >> 1;
    for (let ic = 0; ic < layer.inCh; ic++) {
      const iBase = ic * input.width * input.height;
      for (let iy = 0; iy < input.height; iy++) {
        for (let ix = 0; ix < input.width; ix++) {
          const v = input.data[iBase + iy * input.width + ix];
          if (v === 0) continue;
          for (let oc = 0; oc < layer.outCh; oc++) {
            const wBase = ((oc * layer.inCh + ic) * KERNEL) * KERNEL;
            const oBase = oc * ow * oh;
            for (let ky = 0; ky < KERNEL; ky++) {
              const oy = iy * layer.stride + ky - half;
              if (oy < 0 || oy >= oh) continue;
              for (let kx = 0; kx < KERNEL; kx++) {
                const ox = ix * layer.stride + kx - half;
                if (ox < 0 || ox >= ow) continue;
                out[oBase + oy * ow + ox] += layer.weights[wBase + ky * KERNEL + kx] * v;
              }
            }
          }
        }
      }
    }
    return { channels: layer.outCh, width: ow, height: oh, data: out };
  }

  /**
   * Full encode+decode chain on the padded image.
   *
   * The latent passes through a rounding bottleneck (the quantizer), but no
   * entropy coding is performed.
   */
  execute(image: RgbImage): { reconstruction: Tensor; paddedWidth: number; paddedHeight: number } {
    const padded = padImage(image, this.config.padMultiple);
    let t: Tensor = {
      channels: 3,
      width: padded.width,
      height: padded.height,
      data: planarize(padded),
    };
    for (const layer of this.analysis) t = this.convDown(t, layer);
    // quantize the latent to integer steps
    const latent = t.data;
    for (let i = 0; i < latent.length; i++) latent[i] = Math.round(latent[i] * 32) / 32;
    let r: Tensor = t;
    for (const layer of this.synthesis) r = this.convUp(r, layer);
    return { reconstruction: r, paddedWidth: padded.width, paddedHeight: padded.height };
  }

  /** sha256 over the uint8-quantized reconstruction, hex encoded. */
  checksum(reconstruction: Tensor): string {
    const bytes = new Uint8Array(reconstruction.data.length);
    for (let i = 0; i < bytes.length; i++) {
      const v = Math.max(0, Math.min(1, (reconstruction.data[i] + 1) / 2));
      bytes[i] = Math.round(v * 255);
    }
    return createHash("sha256").update(bytes).digest("hex");
  }
}

function planarize(img: RgbImage): Float32Array {
  const pixels = img.width * img.height;
  const out = new Float32Array(3 * pixels);
  for (let i = 0; i < pixels; i++) {
    out[i] = img.data[3 * i];
    out[pixels + i] = img.data[3 * i + 1];
    out[2 * pixels + i] = img.data[3 * i + 2];
  }
  return out;
}
