"""Declarative network descriptions and the MAC-per-pixel analyzer.

A description lists convolution layers with their grid scale: the number of
spatial positions per original image pixel (1 at full resolution, 1/4 after
one stride-2 step, and so on). A layer's multiply-accumulate count per
original pixel is

    in_ch * out_ch * kernel_h * kernel_w * g,

where ``g`` is the coarser of the layer's input and output grids: a strided
convolution evaluates its kernel once per *output* position, a transposed
convolution once per *input* position. This convention is the physically
exact count for both layer kinds; bias additions, normalization, and
activations are excluded (multiply-accumulates only). FLOP counters in the
wild disagree on transposed convolutions, so the convention is pinned here
and enforced by an exhaustive counting oracle in the test suite.

Parameters not carried by convolution weights (normalization layers,
entropy-model tables, folded side branches) are declared as opaque
``param_blocks`` validated against each fixture's published total.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable

import yaml

from .errors import InconsistentGrid, SchemaError

MAC_TABLE_HEADER = ("network", "quality_class", "kmac_total", "kmac_second_stage")

LAYER_KINDS = ("conv", "tconv")
_LAYER_KEYS = {"kind", "in", "out", "kernel", "stride", "tag", "second_stage", "grid_scale_in"}
_SUBNET_KEYS = {"name", "grid_scale_in", "grid_scale_out", "layers"}
_TOP_KEYS = {
    "name",
    "full_name",
    "variant",
    "pad_multiple",
    "quality_levels",
    "declared_params",
    "subnets",
    "param_blocks",
}


@dataclass(frozen=True, slots=True)
class LayerSpec:
    """One convolution (or transposed convolution) with its grid context."""

    kind: str
    in_ch: int
    out_ch: int
    kernel_h: int
    kernel_w: int
    stride: int
    grid_scale_in: Fraction
    tag: str = ""
    second_stage: bool = False

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"kind must be one of {LAYER_KINDS}, got {self.kind!r}")
        for name in ("in_ch", "out_ch", "kernel_h", "kernel_w", "stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.grid_scale_in <= 0:
            raise ValueError(f"grid_scale_in must be > 0, got {self.grid_scale_in}")

    @property
    def grid_scale_out(self) -> Fraction:
        s2 = self.stride * self.stride
        if self.kind == "conv":
            return self.grid_scale_in / s2
        return self.grid_scale_in * s2

    @property
    def weight_params(self) -> int:
        return self.in_ch * self.out_ch * self.kernel_h * self.kernel_w + self.out_ch


@dataclass(frozen=True, slots=True)
class ParamBlock:
    """Opaque parameter count for structure not expressed as conv layers."""

    label: str
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"param block count must be >= 0, got {self.count}")


@dataclass(frozen=True)
class Subnet:
    """A chained run of layers sharing one grid flow (encoder, decoder, ...)."""

    name: str
    layers: tuple[LayerSpec, ...]
    grid_scale_out: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))


@dataclass(frozen=True)
class NetworkDescription:
    """A named network variant as a flat, grid-annotated layer list."""

    name: str
    variant: str
    subnets: tuple[Subnet, ...]
    pad_multiple: int
    declared_params: int | None = None
    param_blocks: tuple[ParamBlock, ...] = ()
    quality_levels: tuple[int, ...] = ()
    full_name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "subnets", tuple(self.subnets))
        object.__setattr__(self, "param_blocks", tuple(self.param_blocks))
        object.__setattr__(self, "quality_levels", tuple(self.quality_levels))
        if self.pad_multiple < 1:
            raise ValueError(f"pad_multiple must be >= 1, got {self.pad_multiple}")

    @property
    def layers(self) -> tuple[LayerSpec, ...]:
        return tuple(layer for subnet in self.subnets for layer in subnet.layers)


@dataclass(frozen=True)
class MacReport:
    """Total, second-downsampling-stage, and per-layer kMAC per pixel."""

    total_kmac_per_px: float
    second_stage_kmac_per_px: float
    per_layer: tuple[tuple[str, float], ...]


def _layer_macs(layer: LayerSpec) -> Fraction:
    g = min(layer.grid_scale_in, layer.grid_scale_out)
    return layer.in_ch * layer.out_ch * layer.kernel_h * layer.kernel_w * g


def layer_macs_per_pixel(layer: LayerSpec) -> float:
    """Multiply-accumulates per original image pixel for one layer."""
    return float(_layer_macs(layer))


def _validate_chain(subnet: Subnet) -> None:
    prev: LayerSpec | None = None
    for layer in subnet.layers:
        if prev is not None and layer.grid_scale_in not in (
            prev.grid_scale_out,
            prev.grid_scale_in,
        ):
            raise InconsistentGrid(
                f"subnet {subnet.name!r}: layer {layer.tag!r} declares grid "
                f"{layer.grid_scale_in}, expected {prev.grid_scale_out} "
                f"(chained) or {prev.grid_scale_in} (side branch)"
            )
        prev = layer
    if subnet.grid_scale_out is not None and subnet.layers:
        last = subnet.layers[-1]
        if last.grid_scale_out != subnet.grid_scale_out:
            raise InconsistentGrid(
                f"subnet {subnet.name!r} ends at grid {last.grid_scale_out}, "
                f"declared {subnet.grid_scale_out}"
            )


def macs_per_pixel(net: NetworkDescription) -> MacReport:
    """Sum layer MACs per pixel; grids must chain within each subnet.

    Raises:
        InconsistentGrid: a layer's grid does not follow from its
            predecessor (chained output, or same input for a side branch).
    """
    for subnet in net.subnets:
        _validate_chain(subnet)
    per_layer = []
    total = Fraction(0)
    second = Fraction(0)
    for layer in net.layers:
        m = _layer_macs(layer)
        total += m
        if layer.second_stage:
            second += m
        per_layer.append((layer.tag, float(m) / 1000.0))
    return MacReport(
        total_kmac_per_px=float(total) / 1000.0,
        second_stage_kmac_per_px=float(second) / 1000.0,
        per_layer=tuple(per_layer),
    )


def param_count(net: NetworkDescription) -> int:
    """Weights plus biases over all layers, plus opaque parameter blocks."""
    return sum(l.weight_params for l in net.layers) + sum(b.count for b in net.param_blocks)


def pad_dimensions(width: int, height: int, pad_multiple: int) -> tuple[int, int, int]:
    """Round each dimension up to the multiple; returns (w, h, pixels)."""
    if width < 1 or height < 1 or pad_multiple < 1:
        raise ValueError("width, height and pad_multiple must be >= 1")
    pw = math.ceil(width / pad_multiple) * pad_multiple
    ph = math.ceil(height / pad_multiple) * pad_multiple
    return pw, ph, pw * ph


# --- description files ------------------------------------------------------


def _parse_fraction(value, context: str) -> Fraction:
    try:
        if isinstance(value, str):
            return Fraction(value.strip())
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(value).limit_denominator(10**9)
    except (ValueError, ZeroDivisionError):
        pass
    raise SchemaError(f"{context}: cannot parse grid scale {value!r}")


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise SchemaError(f"{context}: missing required key {key!r}")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed: set, context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise SchemaError(f"{context}: unknown keys {sorted(unknown)}")


def _parse_layer(raw: dict, grid_in: Fraction, context: str) -> LayerSpec:
    if not isinstance(raw, dict):
        raise SchemaError(f"{context}: layer must be a mapping, got {type(raw).__name__}")
    _reject_unknown(raw, _LAYER_KEYS, context)
    kernel = _require(raw, "kernel", context)
    if isinstance(kernel, int):
        kh = kw = kernel
    elif isinstance(kernel, (list, tuple)) and len(kernel) == 2:
        kh, kw = int(kernel[0]), int(kernel[1])
    else:
        raise SchemaError(f"{context}: kernel must be an int or [h, w], got {kernel!r}")
    try:
        return LayerSpec(
            kind=str(_require(raw, "kind", context)),
            in_ch=int(_require(raw, "in", context)),
            out_ch=int(_require(raw, "out", context)),
            kernel_h=kh,
            kernel_w=kw,
            stride=int(raw.get("stride", 1)),
            grid_scale_in=grid_in,
            tag=str(raw.get("tag", "")),
            second_stage=bool(raw.get("second_stage", False)),
        )
    except ValueError as exc:
        raise SchemaError(f"{context}: {exc}") from exc


def _parse_subnet(raw: dict, index: int, context: str) -> Subnet:
    if not isinstance(raw, dict):
        raise SchemaError(f"{context}: subnet must be a mapping")
    sub_name = str(raw.get("name", f"subnet{index}"))
    ctx = f"{context}, subnet {sub_name!r}"
    _reject_unknown(raw, _SUBNET_KEYS, ctx)
    root = _parse_fraction(_require(raw, "grid_scale_in", ctx), ctx)
    raw_layers = _require(raw, "layers", ctx)
    if not isinstance(raw_layers, list):
        raise SchemaError(f"{ctx}: layers must be a list")
    layers: list[LayerSpec] = []
    grid = root
    for j, raw_layer in enumerate(raw_layers):
        lctx = f"{ctx}, layer {j}"
        if isinstance(raw_layer, dict) and "grid_scale_in" in raw_layer:
            grid_in = _parse_fraction(raw_layer["grid_scale_in"], lctx)
        elif layers:
            grid_in = layers[-1].grid_scale_out
        else:
            grid_in = root
        layers.append(_parse_layer(raw_layer, grid_in, lctx))
    grid_out = None
    if raw.get("grid_scale_out") is not None:
        grid_out = _parse_fraction(raw["grid_scale_out"], ctx)
    return Subnet(name=sub_name, layers=tuple(layers), grid_scale_out=grid_out)


def parse_description(data: dict, context: str = "description") -> NetworkDescription:
    """Build a description from a parsed mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise SchemaError(f"{context}: top level must be a mapping")
    _reject_unknown(data, _TOP_KEYS, context)
    name = str(_require(data, "name", context))
    variant = str(_require(data, "variant", context))
    subnets_raw = _require(data, "subnets", context)
    if not isinstance(subnets_raw, list):
        raise SchemaError(f"{context}: subnets must be a list")
    subnets = tuple(
        _parse_subnet(raw, i, context) for i, raw in enumerate(subnets_raw)
    )
    blocks_raw = data.get("param_blocks", []) or []
    if not isinstance(blocks_raw, list):
        raise SchemaError(f"{context}: param_blocks must be a list")
    blocks = []
    for i, raw in enumerate(blocks_raw):
        bctx = f"{context}, param_blocks[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{bctx}: must be a mapping")
        _reject_unknown(raw, {"label", "count"}, bctx)
        try:
            blocks.append(ParamBlock(str(_require(raw, "label", bctx)), int(_require(raw, "count", bctx))))
        except ValueError as exc:
            raise SchemaError(f"{bctx}: {exc}") from exc
    declared = data.get("declared_params")
    levels = data.get("quality_levels", []) or []
    if not isinstance(levels, list) or not all(isinstance(q, int) for q in levels):
        raise SchemaError(f"{context}: quality_levels must be a list of integers")
    try:
        desc = NetworkDescription(
            name=name,
            variant=variant,
            subnets=subnets,
            pad_multiple=int(_require(data, "pad_multiple", context)),
            declared_params=int(declared) if declared is not None else None,
            param_blocks=tuple(blocks),
            quality_levels=tuple(levels),
            full_name=str(data.get("full_name", "")),
        )
    except ValueError as exc:
        raise SchemaError(f"{context}: {exc}") from exc
    for subnet in desc.subnets:
        _validate_chain(subnet)
    return desc


def load_description(path: str | Path) -> NetworkDescription:
    """Load and validate a network description YAML file."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: invalid YAML: {exc}") from exc
    return parse_description(data, context=str(path))


def write_mac_table(
    rows: Iterable[tuple[str, str, float, float]], path: str | Path
) -> None:
    """Write per-group complexities (``network,quality_class,kmac_total,kmac_second_stage``)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MAC_TABLE_HEADER)
        for network, qc, total, second in rows:
            writer.writerow([network, qc, repr(float(total)), repr(float(second))])


def read_mac_table(path: str | Path) -> dict[tuple[str, str], dict]:
    """Load a MAC table CSV back into per-group rows."""
    rows: dict[tuple[str, str], dict] = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != list(MAC_TABLE_HEADER):
            raise ValueError(f"unexpected MAC table header: {header!r}")
        for row in reader:
            if not row:
                continue
            rows[(row[0], row[1])] = {
                "kmac_total": float(row[2]),
                "kmac_second_stage": float(row[3]),
            }
    return rows


def fixture_names() -> list[str]:
    """Names of the bundled network fixtures (sorted)."""
    root = resources.files("gpuwatt").joinpath("fixtures")
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_fixture(name: str) -> NetworkDescription:
    """Load a bundled fixture such as ``bfac_low`` or ``cattn_high``."""
    ref = resources.files("gpuwatt").joinpath("fixtures").joinpath(f"{name}.yaml")
    if not ref.is_file():
        raise SchemaError(f"unknown fixture {name!r}; available: {fixture_names()}")
    data = yaml.safe_load(ref.read_text(encoding="utf-8"))
    return parse_description(data, context=f"fixture {name}")
