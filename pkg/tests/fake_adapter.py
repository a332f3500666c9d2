"""Scripted workload adapter speaking the stdio line protocol.

Used by the conformance suite to exercise every protocol token without any
model runtime. Behavior is shaped by flags:

  --elapsed S       seconds reported in DONE lines (default 0.01)
  --padded WxH      padded size reported in META (default 768x512)
  --checksum HEX    checksum reported in META (default depends on --elapsed)
  --temp V          TEMP response value, a float or NA (default NA)
  --fail-runs N,M   RUN indices (1-based) answered with ERR
  --no-ready        exit without the READY handshake (protocol violation)
  --die-after N     exit abruptly after N commands
"""
import argparse
import sys
import time


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--elapsed", type=float, default=0.01)
    parser.add_argument("--padded", default="768x512")
    parser.add_argument("--checksum", default=None)
    parser.add_argument("--temp", default="NA")
    parser.add_argument("--fail-runs", default="")
    parser.add_argument("--no-ready", action="store_true")
    parser.add_argument("--die-after", type=int, default=0)
    args = parser.parse_args()

    fail_runs = {int(x) for x in args.fail_runs.split(",") if x}
    pw, ph = (int(v) for v in args.padded.split("x"))
    checksum = args.checksum or f"{abs(hash((pw, ph, args.elapsed))):016x}"

    def say(line: str) -> None:
        sys.stdout.write(line + "\n")
        sys.stdout.flush()

    if args.no_ready:
        return 3
    say("READY")

    runs = 0
    commands = 0
    for raw in sys.stdin:
        commands += 1
        if args.die_after and commands > args.die_after:
            return 7
        command = raw.strip()
        if command == "RUN":
            runs += 1
            if runs in fail_runs:
                say(f"ERR injected failure on run {runs}")
                continue
            time.sleep(min(args.elapsed, 0.05))
            say(f"META {pw} {ph} {checksum}")
            say(f"DONE {args.elapsed}")
        elif command == "TEMP?":
            say(f"TEMP {args.temp}")
        elif command == "QUIT":
            return 0
        else:
            say(f"ERR unknown command {command!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
