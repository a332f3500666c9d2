"""Command-line interface.

Subcommands: ``idle``, ``measure``, ``energy``, ``mac``, ``fit``,
``correlate``, ``report``. Machine-readable output goes to stdout and CSV
files; diagnostics go to stderr. Exit codes are fixed for scripting:

=====  ==========================================================
2      power-source failure or unusable source configuration
3      measurement window without samples (window/trace mismatch)
4      network description schema violation
5      too few points per (network, quality_class) group to fit
6      fit results and MAC table cannot be joined
=====  ==========================================================

The ``GPUWATT_QUERY_CMD`` environment variable overrides the live-meter
query command from the campaign config.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import yaml

from . import reference
from .adapter_client import AdapterClient
from .errors import (
    EmptyWindow,
    GpuwattError,
    JoinMismatch,
    ParseError,
    SchemaError,
    SourceFailure,
    TooFewPoints,
)
from .modeling import (
    correlate,
    fit_groups,
    format_fit_report,
    read_fit_summary,
    write_fit_summary,
    write_plot_data,
)
from .network import (
    fixture_names,
    load_description,
    load_fixture,
    macs_per_pixel,
    pad_dimensions,
    param_count,
    read_mac_table,
    write_mac_table,
)
from .protocol import (
    MeasurementPlan,
    append_energy_record,
    preheat,
    read_energy_records,
    run_idle_reference,
    run_measurement,
)
from .sources import (
    CommandPowerSource,
    SyntheticTraceSpec,
    read_windows,
    replay_trace,
    synthesize_trace,
)
from .trace import EnergyRecord, compute_mean_energy

EXIT_SOURCE = 2
EXIT_WINDOW = 3
EXIT_SCHEMA = 4
EXIT_POINTS = 5
EXIT_JOIN = 6

_CONFIG_KEYS = {"plan", "source", "workload", "preheat_timeout_s", "re_measure_idle", "results", "state"}
_PLAN_KEYS = {
    "idle_duration_s": "idle_duration",
    "preheat_target_c": "preheat_target_c",
    "min_batch_duration_s": "min_batch_duration",
    "k_min": "k_min",
    "k_max": "k_max",
    "confidence": "confidence",
    "rel_halfwidth": "rel_halfwidth",
}
_SOURCE_KEYS = {"kind", "query_command", "sample_interval_s", "path", "segments", "rng_seed"}
_WORKLOAD_KEYS = {"command", "network", "quality", "image_id", "pixels", "m"}


def _fail(code: int, message: str) -> int:
    print(f"gpuwatt: {message}", file=sys.stderr)
    return code


def _display_kmac(value: float) -> str:
    # headline values carry the reference tables' 0.1 kMAC precision
    return f"{math.floor(round(value * 10, 6)) / 10:.1f}"


def load_campaign_config(path: str | Path) -> dict:
    """Parse and validate the campaign config YAML; unknown keys rejected."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError("campaign config must be a mapping")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"campaign config: unknown keys {sorted(unknown)}")
    plan_raw = data.get("plan", {}) or {}
    unknown = set(plan_raw) - set(_PLAN_KEYS)
    if unknown:
        raise ValueError(f"campaign config plan: unknown keys {sorted(unknown)}")
    data["plan"] = MeasurementPlan(**{_PLAN_KEYS[k]: v for k, v in plan_raw.items()})
    source = data.get("source")
    if source is not None:
        unknown = set(source) - _SOURCE_KEYS
        if unknown:
            raise ValueError(f"campaign config source: unknown keys {sorted(unknown)}")
    workload = data.get("workload")
    if workload is not None:
        unknown = set(workload) - _WORKLOAD_KEYS
        if unknown:
            raise ValueError(f"campaign config workload: unknown keys {sorted(unknown)}")
    return data


def build_source(source_cfg: dict | None):
    """Instantiate the configured power source (kind: command|replay|synthetic)."""
    if not source_cfg:
        raise SourceFailure("no source configured")
    kind = source_cfg.get("kind")
    env_cmd = os.environ.get("GPUWATT_QUERY_CMD")
    if kind == "command" or (kind is None and env_cmd):
        command = env_cmd or source_cfg.get("query_command")
        if not command:
            raise SourceFailure("command source needs query_command or GPUWATT_QUERY_CMD")
        return CommandPowerSource(
            command, float(source_cfg.get("sample_interval_s", 0.1))
        )
    if kind == "replay":
        path = source_cfg.get("path")
        if not path:
            raise SourceFailure("replay source needs a path")
        return replay_trace(path)
    if kind == "synthetic":
        segments = source_cfg.get("segments")
        if not segments:
            raise SourceFailure("synthetic source needs segments")
        spec = SyntheticTraceSpec(
            segments=tuple((float(d), float(p), float(j)) for d, p, j in segments),
            sample_interval=float(source_cfg.get("sample_interval_s", 0.1)),
            rng_seed=int(source_cfg.get("rng_seed", 0)),
        )
        return synthesize_trace(spec)
    raise SourceFailure(f"unknown source kind {kind!r}")


def _state_path(args, config: dict | None = None) -> Path:
    if getattr(args, "state", None):
        return Path(args.state)
    if config and config.get("state"):
        return Path(config["state"])
    return Path(args.out) / "campaign_state.json"


def _ensure_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_idle(args) -> int:
    """Idle reference: mean power with no workload; stored in campaign state."""
    try:
        config = load_campaign_config(args.config) if args.config else {}
    except (OSError, ValueError) as exc:
        return _fail(EXIT_SOURCE, f"cannot load config: {exc}")
    plan: MeasurementPlan = config.get("plan", MeasurementPlan())
    try:
        source_cfg = dict(config.get("source") or {})
        if args.trace:
            source_cfg = {"kind": "replay", "path": args.trace}
        source = build_source(source_cfg)
        # replayed or synthesized traces are themselves the idle measurement
        if hasattr(source, "samples"):
            trace = source
            p_idle = math.fsum(s.p for s in trace.samples) / len(trace)
        else:
            p_idle = run_idle_reference(source, plan)
    except (SourceFailure, ParseError, OSError) as exc:
        return _fail(EXIT_SOURCE, f"idle reference failed: {exc}")
    _ensure_out(args)
    state_file = _state_path(args, config)
    state_file.parent.mkdir(parents=True, exist_ok=True)
    state = {"p_idle_w": p_idle, "idle_duration_s": plan.idle_duration}
    state_file.write_text(json.dumps(state, indent=2) + "\n", encoding="utf-8")
    print(f"p_idle_w={p_idle:.3f}")
    return 0


def _read_p_idle(args, config: dict | None = None) -> float:
    if getattr(args, "p_idle", None) is not None:
        return float(args.p_idle)
    state_file = _state_path(args, config)
    data = json.loads(state_file.read_text(encoding="utf-8"))
    return float(data["p_idle_w"])


def cmd_energy(args) -> int:
    """One modality row from a trace file, windows file, and idle power."""
    try:
        trace = replay_trace(args.trace)
        windows = read_windows(args.windows)
    except (ParseError, OSError) as exc:
        return _fail(1, f"cannot load trace/windows: {exc}")
    try:
        p_idle = _read_p_idle(args)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(1, f"cannot determine idle power: {exc}")
    try:
        estimate = compute_mean_energy([(trace, w) for w in windows], p_idle, args.m)
    except EmptyWindow as exc:
        return _fail(EXIT_WINDOW, f"window/trace mismatch: {exc}")
    pixels = args.pixels
    if pixels is None and args.image:
        w, h = _parse_size(args.image)
        pixels = pad_dimensions(w, h, args.pad_multiple)[2]
    record = EnergyRecord(
        network_id=args.network,
        quality_level=args.quality,
        image_id=args.image_id,
        pixels=int(pixels) if pixels else 1,
        mean_energy_j=estimate.mean_energy_j,
        k_iterations=estimate.k_iterations,
        m_repetitions=estimate.m_repetitions,
    )
    _ensure_out(args)
    results = Path(args.results) if args.results else Path(args.out) / "results.csv"
    append_energy_record(results, record)
    print(f"mean_energy_j={estimate.mean_energy_j!r} k={estimate.k_iterations} m={estimate.m_repetitions}")
    return 0


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ValueError(f"expected WxH, got {text!r}") from exc


def _describe(name_or_path: str):
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") or path.exists():
        return load_description(path)
    return load_fixture(name_or_path)


def cmd_mac(args) -> int:
    """Complexity report for one description or every bundled fixture."""
    try:
        if args.all_fixtures:
            descriptions = [load_fixture(name) for name in fixture_names()]
        else:
            if not args.description:
                return _fail(EXIT_SCHEMA, "mac needs a description path, fixture name, or --all-fixtures")
            descriptions = [_describe(args.description)]
    except SchemaError as exc:
        return _fail(EXIT_SCHEMA, f"invalid description: {exc}")
    except OSError as exc:
        return _fail(EXIT_SCHEMA, f"cannot read description: {exc}")
    rows = []
    for desc in descriptions:
        report = macs_per_pixel(desc)
        print(f"network={desc.name} variant={desc.variant} pad_multiple={desc.pad_multiple}")
        print(
            f"total={_display_kmac(report.total_kmac_per_px)} "
            f"second_stage={_display_kmac(report.second_stage_kmac_per_px)}"
        )
        print(
            f"exact_total_kmac={report.total_kmac_per_px!r} "
            f"exact_second_stage_kmac={report.second_stage_kmac_per_px!r} "
            f"params={param_count(desc)}"
        )
        if not args.all_fixtures and not args.totals_only:
            for tag, kmac in report.per_layer:
                print(f"  {tag:24s} {kmac:12.4f}")
        if args.image:
            w, h = _parse_size(args.image)
            pw, ph, pixels = pad_dimensions(w, h, desc.pad_multiple)
            print(f"padded={pw}x{ph} pixels={pixels}")
        rows.append(
            (desc.name, desc.variant, report.total_kmac_per_px, report.second_stage_kmac_per_px)
        )
    if args.csv_out:
        Path(args.csv_out).parent.mkdir(parents=True, exist_ok=True)
        write_mac_table(rows, args.csv_out)
    return 0


def cmd_fit(args) -> int:
    """Per-group cross-validated fits from a results CSV."""
    try:
        records = read_energy_records(args.results)
    except (OSError, ValueError) as exc:
        return _fail(1, f"cannot load results: {exc}")
    try:
        reports = fit_groups(records, args.folds, args.seed, reference.quality_class_of)
    except TooFewPoints as exc:
        return _fail(EXIT_POINTS, str(exc))
    out = _ensure_out(args)
    write_fit_summary(reports, out / "fit_summary.csv")
    for key, report in sorted(reports.items()):
        text = format_fit_report(key, report, args.pixels)
        (out / f"fit_{key[0]}_{key[1]}.txt").write_text(text, encoding="utf-8")
        print(
            f"{key[0]}/{key[1]}: alpha={report.model.alpha:.4e} beta={report.model.beta:.3f} "
            f"cv_mre={report.mre:.2%} r={report.pearson_r:.3f} n={report.n_points}"
        )
    print(f"fit_summary={out / 'fit_summary.csv'}")
    return 0


def cmd_correlate(args) -> int:
    """Meta-fit of slopes against MAC complexity; emits plot data."""
    try:
        fit_rows = read_fit_summary(args.fits)
        mac_rows = read_mac_table(args.macs)
    except (OSError, ValueError) as exc:
        return _fail(1, f"cannot load inputs: {exc}")
    try:
        result = correlate(fit_rows, mac_rows)
    except JoinMismatch as exc:
        return _fail(EXIT_JOIN, str(exc))
    out = _ensure_out(args)
    lines = []
    for scope in ("full", "second_stage"):
        model = result[scope]["model"]
        lines.append(
            f"{scope}: slope={model.alpha!r} offset={model.beta!r} mre={result[scope]['mre']:.4%}"
        )
    lines.append(f"pearson_full={result['pearson_full']:.4f}")
    text = "\n".join(lines)
    print(text)
    (out / "meta_fit.txt").write_text(text + "\n", encoding="utf-8")
    write_plot_data(result["plot_rows"], out / "plot_data.csv")
    return 0


def cmd_measure(args) -> int:
    """Full campaign for one modality against a live adapter workload."""
    try:
        config = load_campaign_config(args.config)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_SOURCE, f"cannot load config: {exc}")
    plan: MeasurementPlan = config["plan"]
    workload_cfg = config.get("workload") or {}
    if not workload_cfg.get("command"):
        return _fail(EXIT_SOURCE, "campaign config needs workload.command")
    try:
        source = build_source(config.get("source"))
    except SourceFailure as exc:
        return _fail(EXIT_SOURCE, str(exc))
    if hasattr(source, "samples"):
        return _fail(EXIT_SOURCE, "measure needs a pollable source, not a recorded trace")
    state_file = _state_path(args, config)
    try:
        if args.re_measure_idle or config.get("re_measure_idle") or not state_file.exists():
            p_idle = run_idle_reference(source, plan)
            state_file.parent.mkdir(parents=True, exist_ok=True)
            state_file.write_text(
                json.dumps({"p_idle_w": p_idle, "idle_duration_s": plan.idle_duration}, indent=2)
                + "\n",
                encoding="utf-8",
            )
        else:
            p_idle = float(json.loads(state_file.read_text(encoding="utf-8"))["p_idle_w"])
    except SourceFailure as exc:
        return _fail(EXIT_SOURCE, f"idle reference failed: {exc}")
    client = AdapterClient(workload_cfg["command"])
    try:
        achieved = preheat(client, plan, timeout=float(config.get("preheat_timeout_s", 300.0)))
        if achieved is not None:
            print(f"preheat_c={achieved:.1f}", file=sys.stderr)
        estimate = run_measurement(
            client, source, plan, p_idle, m=workload_cfg.get("m")
        )
        pixels = client.pixels() or workload_cfg.get("pixels")
        if not pixels:
            return _fail(1, "workload reported no padded size; set workload.pixels")
        record = EnergyRecord(
            network_id=str(workload_cfg.get("network", "unknown")),
            quality_level=int(workload_cfg.get("quality", 0) or 1),
            image_id=str(workload_cfg.get("image_id", "image")),
            pixels=int(pixels),
            mean_energy_j=estimate.mean_energy_j,
            k_iterations=estimate.k_iterations,
            m_repetitions=estimate.m_repetitions,
        )
    except SourceFailure as exc:
        client.close()
        return _fail(EXIT_SOURCE, f"measurement failed: {exc}")
    finally:
        client.close()
    _ensure_out(args)
    results = Path(args.results or config.get("results") or Path(args.out) / "results.csv")
    append_energy_record(results, record)
    print(
        f"mean_energy_j={estimate.mean_energy_j!r} k={estimate.k_iterations} "
        f"m={estimate.m_repetitions} pixels={record.pixels}"
    )
    return 0


def cmd_report(args) -> int:
    """Readable campaign summary plus energy-vs-pixels plot data."""
    try:
        records = read_energy_records(args.results)
        fit_rows = read_fit_summary(args.fits) if args.fits else {}
    except (OSError, ValueError) as exc:
        return _fail(1, f"cannot load inputs: {exc}")
    print(f"records={len(records)} groups={len(fit_rows)}")
    for (network, qc), row in sorted(fit_rows.items()):
        print(
            f"{network}/{qc}: alpha={row['alpha']:.4e} beta={row['beta']:.3f} "
            f"cv_mre={row['mre_cv']:.2%} r={row['pearson_r']:.3f} n={row['n']}"
        )
        threshold = reference.OFFSET_SHARE_MIN_PIXELS
        share = row["beta"] / (row["alpha"] * threshold + row["beta"])
        print(f"  offset_share_at_{threshold}px={share:.3f}")
    if args.macs and args.fits:
        try:
            result = correlate(fit_rows, read_mac_table(args.macs))
        except JoinMismatch as exc:
            return _fail(EXIT_JOIN, str(exc))
        print(
            f"slope_vs_full_mac: mre={result['full']['mre']:.4%} "
            f"pearson={result['pearson_full']:.4f}"
        )
        print(f"slope_vs_second_stage_mac: mre={result['second_stage']['mre']:.4%}")
    if args.out:
        out = _ensure_out(args)
        import csv as _csv

        with open(out / "energy_vs_pixels.csv", "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["pixels", "mean_energy_j", "quality", "network"])
            for rec in records:
                writer.writerow(
                    [rec.pixels, repr(rec.mean_energy_j), rec.quality_level, rec.network_id]
                )
        print(f"plot_data={out / 'energy_vs_pixels.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpuwatt",
        description="GPU energy profiling and pixel-count energy modeling",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--out", default="gpuwatt_out", help="output directory")
        p.add_argument("--seed", type=int, default=0, help="RNG seed for anything stochastic")

    p = sub.add_parser("idle", help="measure the idle power reference")
    common(p)
    p.add_argument("--config", help="campaign config YAML")
    p.add_argument("--trace", help="replay an idle trace CSV instead of polling")
    p.add_argument("--state", help="campaign state JSON path")
    p.set_defaults(func=cmd_idle)

    p = sub.add_parser("measure", help="run a measurement campaign for one modality")
    common(p)
    p.add_argument("--config", required=True, help="campaign config YAML")
    p.add_argument("--state", help="campaign state JSON path")
    p.add_argument("--results", help="results CSV to append to")
    p.add_argument("--re-measure-idle", action="store_true", dest="re_measure_idle")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("energy", help="compute one energy record from trace + windows")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--p-idle", type=float, dest="p_idle", help="idle power in watts")
    p.add_argument("--state", help="campaign state JSON with p_idle_w")
    p.add_argument("--m", type=int, required=True, help="executions per iteration")
    p.add_argument("--network", default="unknown")
    p.add_argument("--quality", type=int, default=1)
    p.add_argument("--image-id", dest="image_id", default="image")
    p.add_argument("--pixels", type=int, help="padded pixel count for the record")
    p.add_argument("--image", help="original size WxH (padded via --pad-multiple)")
    p.add_argument("--pad-multiple", type=int, dest="pad_multiple", default=16)
    p.add_argument("--results", help="results CSV to append to")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("mac", help="MAC-per-pixel complexity of a network description")
    common(p)
    p.add_argument("description", nargs="?", help="description YAML path or fixture name")
    p.add_argument("--all-fixtures", action="store_true", dest="all_fixtures")
    p.add_argument("--image", help="report padded size for an original WxH image")
    p.add_argument("--totals-only", action="store_true", dest="totals_only",
                   help="suppress the per-layer table")
    p.add_argument("--csv-out", dest="csv_out", help="write the MAC table CSV here")
    p.set_defaults(func=cmd_mac)

    p = sub.add_parser("fit", help="fit the pixel-energy model per group")
    common(p)
    p.add_argument("--results", required=True, help="results CSV")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--pixels", choices=("padded", "original"), default="padded")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("correlate", help="meta-fit slopes against MAC complexity")
    common(p)
    p.add_argument("--fits", required=True, help="fit summary CSV")
    p.add_argument("--macs", required=True, help="MAC table CSV")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("report", help="summarize campaign results")
    common(p)
    p.add_argument("--results", required=True)
    p.add_argument("--fits", help="fit summary CSV")
    p.add_argument("--macs", help="MAC table CSV")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GpuwattError as exc:
        return _fail(1, str(exc))


if __name__ == "__main__":
    sys.exit(main())
