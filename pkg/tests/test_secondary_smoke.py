"""Real-adapter smoke: the stdio workload adapter behind the campaign loop.

Runs the built adapter once per network family on one image, checking the
DONE/META grammar, deterministic checksums across two executions, and that
the adapter-side padding agrees with the description module's arithmetic.
Skipped when node or the built adapter is unavailable.
"""
import shutil
import sys
from pathlib import Path

import pytest

from gpuwatt import reference
from gpuwatt.adapter_client import AdapterClient
from gpuwatt.network import pad_dimensions

sys.path.insert(0, str(Path(__file__).parent))
from adapter_conformance import (  # noqa: E402
    check_deterministic_checksum,
    check_handshake_and_run,
    check_temperature,
    check_unknown_command_gets_err,
)

FRONTEND = Path(__file__).resolve().parent.parent / "frontend"
ADAPTER = FRONTEND / "dist" / "main.js"
SAMPLE = FRONTEND / "assets" / "sample.ppm"
MODELS = FRONTEND / "models"
IMAGE_SIZE = (100, 70)

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not ADAPTER.exists(),
    reason="node or the built adapter (frontend/dist) is unavailable",
)


def adapter_cmd(model: str, quality: int) -> list[str]:
    return [
        "node", str(ADAPTER),
        "--model", model,
        "--quality", str(quality),
        "--image", str(SAMPLE),
        "--models-dir", str(MODELS),
        "--deterministic",
    ]


@pytest.mark.parametrize("network", reference.NETWORKS)
def test_one_run_per_family(network):
    quality = reference.QUALITY_LEVELS[network]["low"][0]
    pad = reference.PAD_MULTIPLE[network]
    pw, ph, _ = pad_dimensions(*IMAGE_SIZE, pad)
    elapsed = check_handshake_and_run(adapter_cmd(network, quality), expected_padded=(pw, ph))
    assert elapsed > 0


def test_checksums_deterministic_across_two_runs():
    check_deterministic_checksum(adapter_cmd("bfac", 1))


def test_checksums_deterministic_across_sessions():
    first = AdapterClient(adapter_cmd("mcont", 2))
    try:
        first.run_once()
        sum_a = first.checksum
    finally:
        first.close()
    second = AdapterClient(adapter_cmd("mcont", 2))
    try:
        second.run_once()
        sum_b = second.checksum
    finally:
        second.close()
    assert sum_a == sum_b


def test_temperature_reports_unavailable():
    assert check_temperature(adapter_cmd("bhyp", 6)) is None


def test_unknown_token_answered_with_err():
    check_unknown_command_gets_err(adapter_cmd("cattn", 4))


def test_high_quality_variant_pads_and_runs():
    quality = reference.QUALITY_LEVELS["canch"]["high"][0]
    pw, ph, _ = pad_dimensions(*IMAGE_SIZE, 128)
    check_handshake_and_run(adapter_cmd("canch", quality), expected_padded=(pw, ph))
