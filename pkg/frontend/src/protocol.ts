/**
 * Line protocol served over stdio.
 *
 * adapter -> stdout:  READY | META <w> <h> <checksum> | DONE <elapsed_s>
 *                     | TEMP <celsius|NA> | ERR <message>
 * primary -> stdin:   RUN | TEMP? | QUIT
 *
 * One command is in flight at a time. Execution failures answer ERR and the
 * session keeps serving; only protocol-level violations exit nonzero.
 */
import { createInterface } from "node:readline";

export interface Runner {
  /** one full encode+decode; returns padded dims, checksum, elapsed seconds */
  runOnce(): { paddedWidth: number; paddedHeight: number; checksum: string; elapsedS: number };
  /** device temperature in Celsius, or null when no sensor exists */
  temperature(): number | null;
}

export function serve(runner: Runner, input = process.stdin, output = process.stdout): Promise<number> {
  const say = (line: string) => output.write(line + "\n");
  say("READY");
  const rl = createInterface({ input, terminal: false });
  return new Promise((resolve) => {
    rl.on("line", (raw) => {
      const command = raw.trim();
      if (command === "RUN") {
        try {
          const r = runner.runOnce();
          say(`META ${r.paddedWidth} ${r.paddedHeight} ${r.checksum}`);
          say(`DONE ${r.elapsedS}`);
        } catch (err) {
          say(`ERR ${err instanceof Error ? err.message : String(err)}`);
        }
      } else if (command === "TEMP?") {
        const t = runner.temperature();
        say(`TEMP ${t === null ? "NA" : t}`);
      } else if (command === "QUIT") {
        rl.close();
        resolve(0);
      } else if (command.length > 0) {
        say(`ERR unknown command ${JSON.stringify(command)}`);
      }
    });
    rl.on("close", () => resolve(0));
  });
}
