/**
 * Workload adapter entry point.
 *
 * Loads one compression modality (model family, quality level, image) and
 * serves the measurement protocol on stdio. The model is fully loaded
 * before READY, so DONE elapsed times cover execution only.
 *
 * Usage:
 *   adapter --model bfac --quality 1 --image photo.ppm \
 *           [--models-dir models] [--device cpu] [--deterministic]
 */
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { loadImage, RgbImage } from "./image.js";
import { CompressionModel, loadConfig } from "./model.js";
import { serve, Runner } from "./protocol.js";

interface Args {
  model: string;
  quality: number;
  image: string;
  modelsDir: string;
  device: string;
  deterministic: boolean;
}

function parseArgs(argv: string[]): Args {
  const defaults = join(dirname(fileURLToPath(import.meta.url)), "..", "models");
  const args: Args = {
    model: "",
    quality: NaN,
    image: "",
    modelsDir: defaults,
    device: "cpu",
    deterministic: true,
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    switch (flag) {
      case "--model":
        args.model = argv[++i];
        break;
      case "--quality":
        args.quality = parseInt(argv[++i], 10);
        break;
      case "--image":
        args.image = argv[++i];
        break;
      case "--models-dir":
        args.modelsDir = argv[++i];
        break;
      case "--device":
        args.device = argv[++i];
        break;
      case "--deterministic":
        args.deterministic = true;
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!args.model || !args.image || !Number.isFinite(args.quality)) {
    throw new Error("required: --model <name> --quality <level> --image <path>");
  }
  return args;
}

class ModalityRunner implements Runner {
  constructor(private model: CompressionModel, private image: RgbImage) {}

  runOnce() {
    const start = process.hrtime.bigint();
    const { reconstruction, paddedWidth, paddedHeight } = this.model.execute(this.image);
    const elapsedS = Number(process.hrtime.bigint() - start) / 1e9;
    return {
      paddedWidth,
      paddedHeight,
      checksum: this.model.checksum(reconstruction),
      elapsedS: Math.max(elapsedS, 1e-9),
    };
  }

  temperature(): number | null {
    return null; // no on-device sensor on the CPU path
  }
}

async function main(): Promise<number> {
  let runner: ModalityRunner;
  try {
    const args = parseArgs(process.argv.slice(2));
    const config = loadConfig(args.modelsDir, args.model);
    const model = new CompressionModel(config, args.quality);
    const image = loadImage(args.image);
    runner = new ModalityRunner(model, image);
  } catch (err) {
    process.stderr.write(`adapter: ${err instanceof Error ? err.message : err}\n`);
    return 2;
  }
  return serve(runner);
}

main().then((code) => process.exit(code));
